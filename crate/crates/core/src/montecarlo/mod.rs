//! Payoffs, their chaos coefficients, seeded path simulation and hedging experiments.

mod estimate;
mod paths;
mod payoff;
mod sweep;

pub use estimate::{mc_err_norm, tracking_error_hedge, McEstimate};
pub use paths::{sample_paths, PathBatch};
pub use payoff::{
    coeffs_occupation_time, coeffs_terminal, hermite_expand_terminal, occupation_err_norm,
    random_expansion, Payoff,
};
pub use sweep::{
    hedge_sweep, payoff_expansion, rate_sweep, rate_sweep_expansion, HedgeReport, HedgeRow,
};
