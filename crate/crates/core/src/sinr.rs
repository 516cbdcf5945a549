//! Closed-form average SINR of the weighted proposed canceller and its
//! per-user, per-stage optimum weights.
//!
//! With weights on every stage, row `k` of the stage-`m` filter is
//! `e_k − w_k^(m) q_k^(m)`, where `q_k^(m)` depends only on `R` and the weights
//! of stages below `m`. Because fading makes every interference and noise term
//! a linear combination of independent complex Gaussians, the average output
//! SINR is a ratio of quadratics in `w_k^(m)` with a closed-form maximizer.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::filters::{identity_minus, WeightSchedule};
use crate::linalg;
use crate::model::CorrelationMatrix;

/// `q_{k,i}^(m)` for one user and stage. Entry `k` of `row` is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct QCoefficients {
    pub user: usize,
    pub stage: usize,
    pub row: DVector<f64>,
}

impl QCoefficients {
    /// The `K − 1` coefficients with `i ≠ k`, in user order.
    pub fn values(&self) -> Vec<f64> {
        self.row
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != self.user)
            .map(|(_, &v)| v)
            .collect()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.row[i]
    }
}

/// All rows of `Q^(m)` at once: `Q^(m) = −Σ_{n=1}^{m−1} C_n`, with
/// `C_1 = I − R` and `C_n = [C_{n−1} W^(m−n+1) (I−R)]^⊙`.
///
/// This is the alternating nested sum over index chains, evaluated with one
/// matrix product per stage.
pub fn q_matrix(r: &CorrelationMatrix, prior: &WeightSchedule, m: usize) -> Result<DMatrix<f64>> {
    if m < 2 {
        return Err(Error::InvalidParameter(format!(
            "q coefficients need stage m >= 2, got {m}"
        )));
    }
    let k = r.users();
    if prior.users() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: prior.users(),
        });
    }
    if m > 2 && prior.max_stage() < m - 1 {
        return Err(Error::MissingWeights {
            needed: m - 1,
            covered: prior.max_stage(),
        });
    }
    let e = identity_minus(r.as_matrix());
    let mut c = e.clone();
    let mut sum = c.clone();
    for n in 2..m {
        let w = prior.stage(m - n + 1).expect("checked above");
        for (col, &wc) in w.iter().enumerate() {
            c.column_mut(col).scale_mut(wc);
        }
        c = &c * &e;
        linalg::zero_diagonal_mut(&mut c)?;
        sum += &c;
    }
    Ok(-sum)
}

pub fn q_coefficients(
    r: &CorrelationMatrix,
    prior: &WeightSchedule,
    user: usize,
    m: usize,
) -> Result<QCoefficients> {
    check_user(r, user)?;
    let q = q_matrix(r, prior, m)?;
    Ok(QCoefficients {
        user,
        stage: m,
        row: q.row(user).transpose(),
    })
}

fn check_user(r: &CorrelationMatrix, user: usize) -> Result<()> {
    if user >= r.users() {
        return Err(Error::InvalidParameter(format!(
            "user {user} out of range for K={}",
            r.users()
        )));
    }
    Ok(())
}

/// Coefficients of the average SINR of user `k` at stage `m` as a function of
/// its weight `w`:
///
/// ```text
/// SINR(w) = A_k² (1 − a w)² / (σ_I²(w) + σ_N²(w))
/// σ_I²(w) = b + w² c − 2 w d
/// σ_N²(w) = σ² (1 + w² e − 2 w a)
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct SinrBreakdown {
    pub user: usize,
    pub stage: usize,
    pub amplitude: f64,
    pub sigma2: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    /// `(d − ab) / (c − ad + σ²(e − a²))`, `None` when the denominator vanishes.
    pub w_opt: Option<f64>,
}

impl SinrBreakdown {
    pub fn interference_power(&self, w: f64) -> f64 {
        self.b + w * w * self.c - 2.0 * w * self.d
    }

    pub fn noise_power(&self, w: f64) -> f64 {
        self.sigma2 * (1.0 + w * w * self.e - 2.0 * w * self.a)
    }

    pub fn signal_power(&self, w: f64) -> f64 {
        let s = 1.0 - self.a * w;
        self.amplitude * self.amplitude * s * s
    }

    pub fn sinr(&self, w: f64) -> f64 {
        self.signal_power(w) / (self.interference_power(w) + self.noise_power(w))
    }

    pub fn optimum_weight(&self) -> Result<f64> {
        self.w_opt.ok_or(Error::DegenerateOptimum)
    }
}

/// Evaluates `a, b, c, d, e` for user `k` at stage `m` given weights of stages `< m`.
pub fn sinr_breakdown(
    r: &CorrelationMatrix,
    amplitudes: &[f64],
    sigma2: f64,
    prior: &WeightSchedule,
    user: usize,
    m: usize,
) -> Result<SinrBreakdown> {
    check_user(r, user)?;
    let q = q_matrix(r, prior, m)?;
    breakdown_from_q(r, amplitudes, sigma2, q.row(user).transpose().as_slice(), user, m)
}

fn breakdown_from_q(
    r: &CorrelationMatrix,
    amplitudes: &[f64],
    sigma2: f64,
    q: &[f64],
    k: usize,
    m: usize,
) -> Result<SinrBreakdown> {
    let users = r.users();
    if amplitudes.len() != users {
        return Err(Error::DimensionMismatch {
            expected: users,
            got: amplitudes.len(),
        });
    }
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise variance {sigma2}")));
    }
    let rho = |i: usize, j: usize| r.rho(i, j);
    let others = || (0..users).filter(move |&i| i != k);

    // g_i = q_{k,i} + Σ_{k1 ≠ i,k} q_{k,k1} ρ_{k1,i}
    let g = |i: usize| -> f64 {
        q[i] + (0..users)
            .filter(|&k1| k1 != i && k1 != k)
            .map(|k1| q[k1] * rho(k1, i))
            .sum::<f64>()
    };

    let a: f64 = others().map(|i| q[i] * rho(k, i)).sum();
    let b: f64 = others()
        .map(|i| rho(k, i).powi(2) * amplitudes[i].powi(2))
        .sum();
    let mut c = 0.0;
    let mut d = 0.0;
    for i in others() {
        let gi = g(i);
        let p = amplitudes[i].powi(2);
        c += gi * gi * p;
        d += rho(k, i) * gi * p;
    }
    let e: f64 = others()
        .map(|i| others().map(|j| q[i] * q[j] * rho(i, j)).sum::<f64>())
        .sum();

    let num = d - a * b;
    let den = c - a * d + sigma2 * (e - a * a);
    let scale = c.abs() + (a * d).abs() + sigma2 * (e.abs() + a * a);
    let w_opt = if den == 0.0 || den.abs() <= 1e-13 * scale {
        None
    } else {
        Some(num / den)
    };
    Ok(SinrBreakdown {
        user: k,
        stage: m,
        amplitude: amplitudes[k],
        sigma2,
        a,
        b,
        c,
        d,
        e,
        w_opt,
    })
}

/// Optimum weight schedule and the (stage, user) pairs whose optimum was degenerate.
#[derive(Debug, Clone, PartialEq)]
pub struct ComputedSchedule {
    pub schedule: WeightSchedule,
    /// Pairs that fell back to unit weight.
    pub degenerate: Vec<(usize, usize)>,
}

/// Builds `W^(2) … W^(m_max)` stage by stage; every user's weight at stage `m`
/// uses the already-fixed weights of stages `< m`. Degenerate optima default
/// to 1 and are listed in the result.
pub fn compute_weight_schedule(
    r: &CorrelationMatrix,
    amplitudes: &[f64],
    sigma2: f64,
    m_max: usize,
) -> Result<ComputedSchedule> {
    if m_max < 2 {
        return Err(Error::InvalidParameter(format!(
            "weight schedule needs m_max >= 2, got {m_max}"
        )));
    }
    let k = r.users();
    let mut schedule = WeightSchedule::empty(k);
    let mut degenerate = Vec::new();
    for m in 2..=m_max {
        let q = q_matrix(r, &schedule, m)?;
        let mut stage = Vec::with_capacity(k);
        for user in 0..k {
            let row = q.row(user).transpose();
            let br = breakdown_from_q(r, amplitudes, sigma2, row.as_slice(), user, m)?;
            match br.w_opt {
                Some(w) => stage.push(w),
                None => {
                    degenerate.push((m, user));
                    stage.push(1.0);
                }
            }
        }
        schedule.push_stage(stage)?;
    }
    Ok(ComputedSchedule {
        schedule,
        degenerate,
    })
}

/// `(w, SINR(w))` for every weight in `grid`.
pub fn sinr_sweep(
    r: &CorrelationMatrix,
    amplitudes: &[f64],
    sigma2: f64,
    prior: &WeightSchedule,
    user: usize,
    m: usize,
    grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let br = sinr_breakdown(r, amplitudes, sigma2, prior, user, m)?;
    Ok(grid.iter().map(|&w| (w, br.sinr(w))).collect())
}

/// Closed-form third-stage SIR of the conventional and proposed filters for
/// `K` equicorrelated, equal-amplitude users without noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquicorrSirReport {
    pub users: usize,
    pub rho: f64,
    pub sir_g3: f64,
    pub sir_gp3: f64,
    pub beta: f64,
    /// `(K − 1)ρ < 1`, i.e. `λ_max(R) < 2`.
    pub converges: bool,
}

impl EquicorrSirReport {
    /// `sqrt(SIR_Gp / SIR_G)` from the two SIR expressions.
    pub fn beta_from_sirs(&self) -> f64 {
        (self.sir_gp3 / self.sir_g3).sqrt()
    }
}

pub fn equicorr_sir_report(users: usize, rho: f64) -> Result<EquicorrSirReport> {
    if users < 3 {
        return Err(Error::InvalidParameter(format!(
            "equicorrelated SIR comparison needs K >= 3, got {users}"
        )));
    }
    if rho == 0.0 || !rho.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "equicorrelated SIR comparison needs a finite nonzero rho, got {rho}"
        )));
    }
    let k = users as f64;
    let r3 = rho.powi(3);
    let sir_g3 = (1.0 + (k - 1.0) * (k - 2.0) * r3).powi(2)
        / ((k - 1.0) * ((k - 1.0) * r3 + (k - 2.0).powi(2) * r3).powi(2));
    let sir_gp3 = (1.0 - (k - 1.0) * rho * rho + (k - 1.0) * (k - 2.0) * r3).powi(2)
        / ((k - 1.0) * ((k - 2.0).powi(2) * r3).powi(2));
    let beta = 1.0
        + (k - 1.0) * (1.0 - (k - 2.0) * rho) * (1.0 + (k - 2.0) * rho - (k - 1.0) * rho * rho)
            / ((k - 2.0).powi(2) * (1.0 + (k - 1.0) * (k - 2.0) * r3));
    Ok(EquicorrSirReport {
        users,
        rho,
        sir_g3,
        sir_gp3,
        beta,
        converges: (k - 1.0) * rho < 1.0,
    })
}
