use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::filters::{EigenOrder, FilterKind};
use crate::multicarrier::type2_supports;

/// Received amplitude profile.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum NearFar {
    /// Every user at the desired user's amplitude.
    #[default]
    None,
    /// Even-numbered users (counting from 1) at ten times the amplitude.
    Paper,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum ReceiverType {
    #[default]
    Single,
    Type1,
    Type2,
}

impl ReceiverType {
    pub fn label(self) -> &'static str {
        match self {
            ReceiverType::Single => "single",
            ReceiverType::Type1 => "type1",
            ReceiverType::Type2 => "type2",
        }
    }
}

impl fmt::Display for ReceiverType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ReceiverType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "single" => Ok(ReceiverType::Single),
            "type1" | "type-i" => Ok(ReceiverType::Type1),
            "type2" | "type-ii" => Ok(ReceiverType::Type2),
            other => Err(Error::InvalidParameter(format!("unknown receiver `{other}`"))),
        }
    }
}

/// Whether spreading sequences are drawn once per experiment or once per trial.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum SequenceMode {
    #[default]
    Fixed,
    PerTrial,
}

/// Which spreading-sequence draws are accepted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum SequenceCondition {
    /// Any draw with a positive definite `R`.
    #[default]
    Any,
    /// Only draws whose `R^(i)` all have `λ_max < 2`, so the conventional
    /// series converges on every subcarrier.
    Convergent,
}

/// Which users' bit errors are counted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum CountMode {
    /// User 1 only.
    #[default]
    DesiredUser,
    AllUsers,
}

/// One filter kind with the stages to evaluate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectorEntry {
    pub kind: FilterKind,
    pub stages: Vec<usize>,
}

impl DetectorEntry {
    pub fn new(kind: FilterKind, stages: impl IntoIterator<Item = usize>) -> Self {
        Self {
            kind,
            stages: stages.into_iter().collect(),
        }
    }

    /// Entry for a filter without a stage index.
    pub fn unstaged(kind: FilterKind) -> Self {
        Self { kind, stages: vec![1] }
    }
}

/// `start:step:stop`, inclusive of `stop` up to rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightGrid {
    pub start: f64,
    pub step: f64,
    pub stop: f64,
}

impl Default for WeightGrid {
    fn default() -> Self {
        Self {
            start: 0.0,
            step: 0.005,
            stop: 2.0,
        }
    }
}

impl WeightGrid {
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub users: usize,
    pub chips: usize,
    pub subcarriers: usize,
    pub snr_db: f64,
    pub near_far: NearFar,
    pub detectors: Vec<DetectorEntry>,
    pub receiver: ReceiverType,
    /// Bits per user.
    pub trials: u64,
    pub seed: u64,
    pub sequence_mode: SequenceMode,
    pub sequence_condition: SequenceCondition,
    /// Reuse one spreading set on every subcarrier.
    pub identical_subcarriers: bool,
    pub count: CountMode,
    pub eigen_order: EigenOrder,
    pub output: Option<PathBuf>,
    /// 1-based user plotted by the SINR sweep.
    pub sweep_user: usize,
    pub sweep_grid: WeightGrid,
}

pub const DEFAULT_TRIALS: u64 = 100_000;
pub const DEFAULT_SEED: u64 = 1;

impl ExperimentConfig {
    /// Configuration with every optional field at its default.
    pub fn new(users: usize, chips: usize, snr_db: f64, detectors: Vec<DetectorEntry>) -> Self {
        Self {
            users,
            chips,
            subcarriers: 1,
            snr_db,
            near_far: NearFar::None,
            detectors,
            receiver: ReceiverType::Single,
            trials: DEFAULT_TRIALS,
            seed: DEFAULT_SEED,
            sequence_mode: SequenceMode::Fixed,
            sequence_condition: SequenceCondition::Any,
            identical_subcarriers: false,
            count: CountMode::DesiredUser,
            eigen_order: EigenOrder::Descending,
            output: None,
            sweep_user: 1,
            sweep_grid: WeightGrid::default(),
        }
    }

    /// Received amplitudes; the desired user always has amplitude 1.
    pub fn amplitudes(&self) -> Vec<f64> {
        (1..=self.users)
            .map(|k| match self.near_far {
                NearFar::Paper if k % 2 == 0 => 10.0,
                _ => 1.0,
            })
            .collect()
    }

    /// Per-subcarrier noise variance, `σ² = M·A₁² / SNR`.
    pub fn sigma2(&self) -> f64 {
        self.subcarriers as f64 / 10f64.powf(self.snr_db / 10.0)
    }

    /// Users whose decisions are counted.
    pub fn counted_users(&self) -> Vec<usize> {
        match self.count {
            CountMode::DesiredUser => vec![0],
            CountMode::AllUsers => (0..self.users).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.users == 0 || self.chips == 0 || self.subcarriers == 0 {
            return bad("K, P and M must be at least 1".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !self.snr_db.is_finite() {
            return bad(format!("snr_db {}", self.snr_db));
        }
        if self.detectors.is_empty() {
            return bad("no detectors configured".into());
        }
        if self.receiver == ReceiverType::Single && self.subcarriers != 1 {
            return bad("the single-carrier receiver needs M = 1; use type1 or type2".into());
        }
        for d in &self.detectors {
            let label = d.kind.label();
            if d.stages.is_empty() {
                return bad(format!("{label}: empty stage list"));
            }
            if !d.kind.is_staged() && d.stages != [1] {
                return bad(format!("{label} takes no stage"));
            }
            if let Some(&s) = d.stages.iter().find(|&&s| s == 0) {
                return bad(format!("{label}: stage {s} is below 1"));
            }
            if matches!(d.kind, FilterKind::MmseConverging | FilterKind::ModifiedMmse) {
                if let Some(&s) = d.stages.iter().find(|&&s| s > self.users) {
                    return bad(format!("{label}: stage {s} exceeds K = {}", self.users));
                }
            }
            if self.receiver == ReceiverType::Type2 && !type2_supports(d.kind) {
                return bad(format!("{label} is not defined for the type2 receiver"));
            }
        }
        if self.sweep_user == 0 || self.sweep_user > self.users {
            return bad(format!("sweep_user {} outside 1..={}", self.sweep_user, self.users));
        }
        let g = self.sweep_grid;
        if !(g.step > 0.0 && g.start.is_finite() && g.stop >= g.start) {
            return bad("sweep_w must be start:step:stop with step > 0 and stop >= start".into());
        }
        Ok(())
    }
}

fn parse_stages(spec: &str) -> std::result::Result<Vec<usize>, String> {
    let spec = spec.trim();
    if let Some((a, b)) = spec.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| format!("bad stage `{a}`"))?;
        let b: usize = b.trim().parse().map_err(|_| format!("bad stage `{b}`"))?;
        if b < a {
            return Err(format!("empty stage range {a}..{b}"));
        }
        Ok((a..=b).collect())
    } else {
        let s: usize = spec.parse().map_err(|_| format!("bad stage `{spec}`"))?;
        Ok(vec![s])
    }
}

/// Parses `G:2..6, Gp:3, DC, MMSE`.
fn parse_detectors(value: &str) -> std::result::Result<Vec<DetectorEntry>, String> {
    let mut out = Vec::new();
    for item in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (name, stages) = match item.split_once(':') {
            Some((n, s)) => (n.trim(), Some(s)),
            None => (item, None),
        };
        let kind = FilterKind::from_label(name).ok_or_else(|| format!("unknown detector `{name}`"))?;
        let stages = match stages {
            Some(s) => parse_stages(s)?,
            None if kind.is_staged() => return Err(format!("{name} needs a stage, e.g. {name}:2..6")),
            None => vec![1],
        };
        out.push(DetectorEntry { kind, stages });
    }
    if out.is_empty() {
        return Err("empty detector list".into());
    }
    Ok(out)
}

fn parse_number<T: FromStr>(value: &str) -> std::result::Result<T, String> {
    value.parse().map_err(|_| format!("invalid number `{value}`"))
}

/// Counts written as integers or in scientific notation, e.g. `1e6`.
fn parse_count(value: &str) -> std::result::Result<u64, String> {
    if let Ok(n) = value.parse::<u64>() {
        return Ok(n);
    }
    let f: f64 = parse_number(value)?;
    if f >= 0.0 && f.fract() == 0.0 && f < 1.8e19 {
        Ok(f as u64)
    } else {
        Err(format!("`{value}` is not a non-negative integer"))
    }
}

fn parse_grid(value: &str) -> std::result::Result<WeightGrid, String> {
    let parts: Vec<&str> = value.split(':').map(str::trim).collect();
    if parts.len() != 3 {
        return Err("expected start:step:stop".into());
    }
    Ok(WeightGrid {
        start: parse_number(parts[0])?,
        step: parse_number(parts[1])?,
        stop: parse_number(parts[2])?,
    })
}

/// Parses `key = value` lines; `#` starts a comment.
///
/// Required keys: `K`, `P`, `snr_db`, `detectors`. Defaults: `M = 1`,
/// `near_far = none`, `receiver = single`, `trials = 1e5`, `seed = 1`,
/// `sequences = fixed`, `sequence_condition = any`, `subcarrier_sequences = independent`, `count = user1`,
/// `eigen_order = descending`, `sweep_user = 1`, `sweep_w = 0:0.005:2`.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::new(0, 0, f64::NAN, Vec::new());
    let mut seen: Vec<&'static str> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Config { line, msg };
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, got `{content}`")))?;
        let (key, value) = (key.trim(), value.trim());
        let canonical: &'static str = match key {
            "K" => {
                cfg.users = parse_number(value).map_err(err)?;
                "K"
            }
            "P" => {
                cfg.chips = parse_number(value).map_err(err)?;
                "P"
            }
            "M" => {
                cfg.subcarriers = parse_number(value).map_err(err)?;
                "M"
            }
            "snr_db" => {
                cfg.snr_db = parse_number(value).map_err(err)?;
                "snr_db"
            }
            "near_far" => {
                cfg.near_far = match value.to_ascii_lowercase().as_str() {
                    "none" => NearFar::None,
                    "paper" => NearFar::Paper,
                    _ => return Err(err(format!("near_far must be none or paper, got `{value}`"))),
                };
                "near_far"
            }
            "detectors" => {
                cfg.detectors = parse_detectors(value).map_err(err)?;
                "detectors"
            }
            "receiver" => {
                cfg.receiver = value.parse().map_err(|e: Error| err(e.to_string()))?;
                "receiver"
            }
            "trials" => {
                cfg.trials = parse_count(value).map_err(err)?;
                "trials"
            }
            "seed" => {
                cfg.seed = parse_count(value).map_err(err)?;
                "seed"
            }
            "sequences" => {
                cfg.sequence_mode = match value {
                    "fixed" => SequenceMode::Fixed,
                    "per-trial" | "per_trial" => SequenceMode::PerTrial,
                    _ => return Err(err(format!("sequences must be fixed or per-trial, got `{value}`"))),
                };
                "sequences"
            }
            "sequence_condition" => {
                cfg.sequence_condition = match value {
                    "any" => SequenceCondition::Any,
                    "convergent" => SequenceCondition::Convergent,
                    _ => return Err(err(format!("sequence_condition must be any or convergent, got `{value}`"))),
                };
                "sequence_condition"
            }
            "subcarrier_sequences" => {
                cfg.identical_subcarriers = match value {
                    "independent" => false,
                    "identical" => true,
                    _ => {
                        return Err(err(format!(
                            "subcarrier_sequences must be independent or identical, got `{value}`"
                        )))
                    }
                };
                "subcarrier_sequences"
            }
            "count" => {
                cfg.count = match value {
                    "user1" => CountMode::DesiredUser,
                    "all" => CountMode::AllUsers,
                    _ => return Err(err(format!("count must be user1 or all, got `{value}`"))),
                };
                "count"
            }
            "eigen_order" => {
                cfg.eigen_order = match value {
                    "descending" => EigenOrder::Descending,
                    "ascending" => EigenOrder::Ascending,
                    _ => return Err(err(format!("eigen_order must be descending or ascending, got `{value}`"))),
                };
                "eigen_order"
            }
            "output" => {
                cfg.output = Some(PathBuf::from(value));
                "output"
            }
            "sweep_user" => {
                cfg.sweep_user = parse_number(value).map_err(err)?;
                "sweep_user"
            }
            "sweep_w" => {
                cfg.sweep_grid = parse_grid(value).map_err(err)?;
                "sweep_w"
            }
            other => return Err(err(format!("unknown key `{other}`"))),
        };
        if seen.contains(&canonical) {
            return Err(err(format!("duplicate key `{canonical}`")));
        }
        seen.push(canonical);
    }
    for required in ["K", "P", "snr_db", "detectors"] {
        if !seen.contains(&required) {
            return Err(Error::InvalidParameter(format!("missing required key `{required}`")));
        }
    }
    cfg.validate()?;
    Ok(cfg)
}
