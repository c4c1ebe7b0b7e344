//! Attention-kernel laboratory.
//!
//! Three attention families over dense row-major matrices:
//!
//! - softmax dot-product attention, `softmax(Q Kᵀ) V`, which materializes the
//!   `N × N` weight matrix;
//! - kernel-feature-map attention with `φ(x) = elu(x) + 1`, in an explicit
//!   double-loop form and a factored form that shares `Σ φ(kⱼ) vⱼᵀ` across
//!   queries;
//! - Taylor linear attention, where `exp(q̂ᵀk̂)` is replaced by `1 + q̂ᵀk̂` on
//!   L2-normalized rows, in a row-wise definitional form and a vectorized
//!   form that runs in `O(N)` time and auxiliary memory.
//!
//! Every optimized path has a definitional twin it is checked against, and
//! every call reports the auxiliary bytes its allocation plan needs, so the
//! quadratic-versus-linear contrast can be measured rather than asserted.
//!
//! Row loops run on rayon when the `parallel` feature is enabled (the
//! default). Per-row arithmetic is identical in both modes, so results are
//! bit-for-bit the same with and without the feature.

pub mod analysis;
pub mod attention;
pub mod bench;
mod error;
mod par;
pub use par::sequential;
pub mod tensor;
pub mod verify;
pub mod vision;
pub mod workload;

pub use attention::{
    attend, kernel_attention_factored, kernel_attention_unfactored, linear_attention_rowwise,
    linear_attention_vectorized, project, softmax_attention, softmax_attention_normalized,
    AttentionMechanism, AttentionOutput, AuxPlan, FeatureMap, ProjectionWeights, Projections,
};
pub use error::{Error, Result};
pub use tensor::{ElementType, Matrix, Real, Rng, DEFAULT_EPS};
