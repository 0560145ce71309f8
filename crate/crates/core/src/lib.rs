//! Cooperative component analysis (CoCA) for two-view data.
//!
//! A CoCA component is a rank-1 factorization `u·vᵀ` of the concatenated
//! views `X = [X1 | X2]` with a penalty `ρ‖X1v1 − X2v2‖²` on disagreement
//! between the per-view scores. At `ρ = 0` it is the leading principal
//! component; as `ρ → ∞` the per-view directions approach the leading
//! canonical pair. An optional ℓ1 penalty gives sparse components.

pub mod baselines;
pub mod cli;
pub mod coca;
pub mod data;
pub mod error;
pub mod lasso;
pub mod linalg;
pub mod metrics;
pub mod selection;
pub mod simulate;

pub use coca::{fit, fit_dense, fit_sparse, solution_path, CocaModel, SolverConfig};
pub use data::MultiViewData;
pub use error::{CocaError, Result};
