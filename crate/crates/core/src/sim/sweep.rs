use std::io::Write;

use super::ber::fixed_correlations;
use super::config::ExperimentConfig;
use super::csv::fmt_f64;
use crate::error::{Error, Result};
use crate::filters::FilterKind;
use crate::model::CorrelationMatrix;
use crate::sinr::{compute_weight_schedule, sinr_breakdown};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    /// 1-based.
    pub user: usize,
    pub stage: usize,
    pub w: f64,
    pub sinr_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageOptimum {
    pub stage: usize,
    /// `None` when the SINR does not depend on the weight.
    pub w_opt: Option<f64>,
    /// SINR at `w_opt`, or at `w = 1` for a degenerate stage.
    pub sinr_db: f64,
    /// Grid point with the largest SINR.
    pub grid_argmax: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinrSweepResult {
    pub points: Vec<SweepPoint>,
    pub optima: Vec<StageOptimum>,
}

/// Average SINR of `user` (0-based) against its stage-`m` weight for every
/// requested stage; earlier stages use their optimum weights.
pub fn sweep_correlation(
    r: &CorrelationMatrix,
    amplitudes: &[f64],
    sigma2: f64,
    user: usize,
    stages: &[usize],
    grid: &[f64],
) -> Result<SinrSweepResult> {
    let Some(&max_stage) = stages.iter().max() else {
        return Err(Error::InvalidParameter("no stages to sweep".into()));
    };
    if let Some(&s) = stages.iter().find(|&&s| s < 2) {
        return Err(Error::InvalidParameter(format!("stage {s}: weights start at stage 2")));
    }
    let schedule = compute_weight_schedule(r, amplitudes, sigma2, max_stage)?.schedule;
    let mut points = Vec::with_capacity(stages.len() * grid.len());
    let mut optima = Vec::with_capacity(stages.len());
    for &m in stages {
        let prior = schedule.truncated(m - 1);
        let br = sinr_breakdown(r, amplitudes, sigma2, &prior, user, m)?;
        let mut best = (f64::NEG_INFINITY, f64::NAN);
        for &w in grid {
            let db = 10.0 * br.sinr(w).log10();
            if db > best.0 {
                best = (db, w);
            }
            points.push(SweepPoint {
                user: user + 1,
                stage: m,
                w,
                sinr_db: db,
            });
        }
        optima.push(StageOptimum {
            stage: m,
            w_opt: br.w_opt,
            sinr_db: 10.0 * br.sinr(br.w_opt.unwrap_or(1.0)).log10(),
            grid_argmax: best.1,
        });
    }
    Ok(SinrSweepResult { points, optima })
}

/// SINR sweep for the stages of the configured `Gpw` detector, using the
/// experiment's fixed spreading sequences.
pub fn run_sinr_experiment(cfg: &ExperimentConfig) -> Result<SinrSweepResult> {
    cfg.validate()?;
    if cfg.subcarriers != 1 {
        return Err(Error::InvalidParameter("sinr-sweep needs M = 1".into()));
    }
    let entry = cfg
        .detectors
        .iter()
        .find(|d| d.kind == FilterKind::WeightedProposed)
        .ok_or_else(|| Error::InvalidParameter("sinr-sweep needs a Gpw detector entry".into()))?;
    let r = fixed_correlations(cfg)?.remove(0);
    sweep_correlation(
        &r,
        &cfg.amplitudes(),
        cfg.sigma2(),
        cfg.sweep_user - 1,
        &entry.stages,
        &cfg.sweep_grid.points(),
    )
}

/// `user,stage,w,sinr_db` rows.
pub fn write_sweep_csv<W: Write>(result: &SinrSweepResult, mut out: W) -> Result<()> {
    writeln!(out, "user,stage,w,sinr_db")?;
    for p in &result.points {
        writeln!(out, "{},{},{},{}", p.user, p.stage, fmt_f64(p.w), fmt_f64(p.sinr_db))?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::config::{parse_config, WeightGrid};

    #[test]
    fn identity_gives_flat_degenerate_curve() {
        let r = CorrelationMatrix::identity(4);
        let grid = WeightGrid::default().points();
        let res = sweep_correlation(&r, &[1.0; 4], 0.1, 0, &[2, 3], &grid).unwrap();
        assert!(res.optima.iter().all(|o| o.w_opt.is_none()));
        let first = res.points[0].sinr_db;
        assert!(res.points.iter().all(|p| (p.sinr_db - first).abs() < 1e-12));
    }

    #[test]
    fn stage_two_curve_peaks_at_optimum() {
        let text = "K = 20\nP = 64\nsnr_db = 20\ndetectors = Gpw:2..4\n";
        let cfg = parse_config(text).unwrap();
        let res = run_sinr_experiment(&cfg).unwrap();
        assert_eq!(res.points.len(), 3 * 401);
        for o in &res.optima {
            let w = o.w_opt.unwrap();
            assert!((o.grid_argmax - w).abs() <= 0.005, "stage {}: {} vs {w}", o.stage, o.grid_argmax);
            let curve: Vec<_> = res.points.iter().filter(|p| p.stage == o.stage).collect();
            assert!(curve.iter().all(|p| p.sinr_db <= o.sinr_db + 1e-12));
        }
        // Unimodal at stage 2: increases up to the peak, decreases after it.
        let s2: Vec<f64> = res.points.iter().filter(|p| p.stage == 2).map(|p| p.sinr_db).collect();
        let peak = s2.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert!(s2[..=peak].windows(2).all(|w| w[0] <= w[1]));
        assert!(s2[peak..].windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn rejects_missing_weighted_detector_and_multicarrier() {
        let cfg = parse_config("K = 4\nP = 16\nsnr_db = 20\ndetectors = G:2\n").unwrap();
        assert!(run_sinr_experiment(&cfg).is_err());
        let cfg = parse_config("K = 4\nP = 16\nM = 2\nreceiver = type1\nsnr_db = 20\ndetectors = Gpw:2\n").unwrap();
        assert!(run_sinr_experiment(&cfg).is_err());
    }
}
