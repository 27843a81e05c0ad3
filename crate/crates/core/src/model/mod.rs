//! Problem data, primal and dual objectives, KKT maps and restricted views.
//!
//! The training problem is
//!
//! ```text
//! min_w  (1/n) Σ_i φ_i(-A_iᵀ w) + β (α/2 ‖w‖² + ‖w‖₁)
//! ```
//!
//! with `φ_i` the log-partition function, and its dual is
//!
//! ```text
//! min_θ  (1/2αβ) ‖S_β((1/n) Σ_i A_i ∘ θ_i)‖² - (1/n) Σ_i H(θ_i)
//! ```
//!
//! over a product of open simplices. A [`ProblemView`] evaluates both on the
//! rows of the `A_i` that survive screening.

mod data;
mod dual;
mod gram;
mod ops;
mod view;

pub use data::{beta_max, BlockLayout, CorrectedFeatureSet, Hyperparams};
pub(crate) use data::for_each_sample_run;
pub use dual::{BlockVector, DualPoint, EPS_SIMPLEX};
pub(crate) use gram::GramCache;
pub use ops::{affine_compose, entropy, log_partition, soft_threshold};
pub(crate) use ops::shrink;
pub use view::{ActiveSet, PrimalVector, ProblemView};
