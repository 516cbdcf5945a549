//! Linear parallel interference cancellation (LPIC) for synchronous single-
//! and multicarrier DS-CDMA.
//!
//! The crate models the matched-filter output of a `K`-user system, builds the
//! one-shot matrix filters that multistage cancellers are equivalent to,
//! evaluates their closed-form average SINR and optimum weights, and runs
//! seeded Monte Carlo bit-error-rate experiments.

pub mod error;
pub mod filters;
pub mod linalg;
pub mod model;
pub mod multicarrier;
pub mod oracle;
pub mod sim;
pub mod sinr;

pub use error::{Error, Result};
