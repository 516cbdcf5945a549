//! Experiment configuration, Monte Carlo BER runs, SINR sweeps and CSV export.

mod ber;
mod config;
mod csv;
pub mod stats;
mod sweep;

pub use ber::{run_ber_experiment, BerRecord, BerRun, DetectorFailure};
pub use config::{
    parse_config, CountMode, DetectorEntry, ExperimentConfig, NearFar, ReceiverType, SequenceCondition, SequenceMode, WeightGrid,
};
pub use csv::{emit_csv, parse_csv, write_csv, CSV_HEADER};
pub use sweep::{run_sinr_experiment, write_sweep_csv, SinrSweepResult, StageOptimum, SweepPoint};
