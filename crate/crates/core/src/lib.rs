//! Optimal protection allocation against adversarial shocks on linear
//! network equilibria `x = (I - Λ)^{-1} D c`.
//!
//! Shocks enter the inputs as `c = c̄ + Q^{-1} η`, where `q ≥ 1` is a
//! per-node protection with `‖q‖₂ ≤ C` and `η` has uncorrelated components
//! of total variance one. The adversary concentrates variance where
//! `y_i / q_i` is largest, and the protector answers with a waterfilling
//! allocation over a centrality vector `y`:
//!
//! - `y = ℓ` (column norms of `L`) for the total variance `Σ Var[x_i]`,
//! - `y = v` (Bonacich centrality `n^{-1} L' 1`) for the variance of the mean.
//!
//! Modules:
//! - [`model`] builds `(Λ, D)` for production networks, coordination games
//!   and quadratic games, and computes the influence operator `L`.
//! - [`centrality`] computes `ℓ` and `v`, plus closed forms for star graphs.
//! - [`waterfill`] solves the min-max problem exactly and certifies it.
//! - [`oracle`] holds independent checks: grid search, projected
//!   subgradient and Monte Carlo.
//! - [`io`] reads edge lists and input-output matrices, writes solutions
//!   and sweep tables.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod centrality;
pub mod io;
pub mod model;
pub mod oracle;
pub mod waterfill;

pub use centrality::{CentralityKind, CentralityVector};
pub use model::{EquilibriumInput, InfluenceOperator, NetworkModel, Provenance};
pub use waterfill::{KktCertificate, ProtectionSolution, Regime};

/// Crate-wide error, wrapping the error of each stage.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("model: {0}")]
    Model(#[from] model::ModelError),
    #[error("centrality: {0}")]
    Centrality(#[from] centrality::CentralityError),
    #[error("solver: {0}")]
    Solve(#[from] waterfill::SolveError),
    #[error("oracle: {0}")]
    Oracle(#[from] oracle::OracleError),
    #[error("io: {0}")]
    Io(#[from] io::IoError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
