//! Discrete-time Clark-Ocone decomposition of Wiener functionals.
//!
//! A functional of the Brownian increments on a uniform grid of `[0, T]` is
//! stored as a finitely supported Wiener chaos expansion in the Fourier-Hermite
//! basis of the standardized increments. On top of that representation the
//! crate provides
//!
//! * the decomposition of `F - E[F]` into per-slot, per-Hermite-order terms
//!   ([`clark_ocone::decompose`]),
//! * the exact Sobolev norm of the `n`-th order truncation error after grid
//!   refinement, together with the matching a-priori bound
//!   ([`clark_ocone::verify_bound`]),
//! * payoff expansions, seeded path simulation and delta-hedge tracking-error
//!   experiments ([`montecarlo`]).
//!
//! Slots are numbered from 1, as increments are: slot `i` holds
//! `ΔW_i = W(iT/N) - W((i-1)T/N)`.

pub mod chaos;
pub mod clark_ocone;
pub mod cli;
pub mod error;
pub mod hermite;
pub mod montecarlo;
pub mod multiindex;

pub use chaos::{ChaosExpansion, GramMatrix, GridSpec};
pub use clark_ocone::{BoundCheck, ClarkOconeDecomposition, ClarkOconeTerm, RateReport};
pub use error::{Error, Result};
pub use hermite::QuadratureRule;
pub use montecarlo::{PathBatch, Payoff};
pub use multiindex::MultiIndex;
