//! Attention mechanisms.
//!
//! Each mechanism computes, for every query row `i`, a weighted average of
//! the value rows with nonnegative weights that sum to one. They differ in
//! the similarity and in how the sum over keys is organized:
//!
//! | mechanism | similarity | cost |
//! |---|---|---|
//! | [`softmax_attention`] | `exp(qᵢᵀkⱼ)` | `O(N²)` time and memory |
//! | [`kernel_attention_unfactored`] | `φ(qᵢ)ᵀφ(kⱼ)` | `O(N²)` time |
//! | [`kernel_attention_factored`] | same, shared `Σⱼ φ(kⱼ)vⱼᵀ` | `O(N)` |
//! | [`linear_attention_rowwise`] | `1 + q̂ᵢᵀk̂ⱼ` | `O(N²)` time |
//! | [`linear_attention_vectorized`] | same, shared `Σⱼ k̂ⱼvⱼᵀ` | `O(N)` |
//!
//! `q̂`, `k̂` are rows scaled to unit L2 norm, which keeps `1 + q̂ᵀk̂` in
//! `[0, 2]`. The unfactored and row-wise forms are the definitional
//! references for the factored and vectorized forms.

mod kernel;
mod linear;
mod mechanism;
mod projection;
mod softmax;

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Real};

pub use kernel::{kernel_attention_factored, kernel_attention_unfactored};
pub use linear::{linear_attention_rowwise, linear_attention_vectorized};
pub use mechanism::{AttentionMechanism, FeatureMap};
pub use projection::{project, ProjectionWeights, Projections};
pub use softmax::{softmax_attention, softmax_attention_normalized};

/// Auxiliary allocation of one attention call, excluding inputs and output.
///
/// `buffers` holds allocations whose size depends on the number of rows
/// (weight matrices, normalized or feature-mapped copies of `q` and `k`).
/// `accumulators` holds the key/value summaries shared across queries,
/// whose size depends only on `Dk` and `Dv`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AuxPlan {
    pub buffers: usize,
    pub accumulators: usize,
}

impl AuxPlan {
    pub fn total(&self) -> usize {
        self.buffers + self.accumulators
    }
}

#[derive(Clone, Debug)]
pub struct AttentionOutput<T: Real = f64> {
    pub out: Matrix<T>,
    pub aux: AuxPlan,
}

impl<T: Real> AttentionOutput<T> {
    /// Peak auxiliary bytes for the call.
    pub fn aux_bytes(&self) -> usize {
        self.aux.total()
    }
}

/// Dispatches to the mechanism's implementation.
pub fn attend<T: Real>(
    mechanism: &AttentionMechanism,
    q: &Matrix<T>,
    k: &Matrix<T>,
    v: &Matrix<T>,
    eps: f64,
) -> Result<AttentionOutput<T>> {
    match mechanism {
        AttentionMechanism::Softmax => softmax_attention(q, k, v),
        AttentionMechanism::SoftmaxNormalizedQK => softmax_attention_normalized(q, k, v, eps),
        AttentionMechanism::Kernel(id) => {
            kernel_attention_factored(q, k, v, FeatureMap::resolve(id)?)
        }
        AttentionMechanism::KernelUnfactored(id) => {
            kernel_attention_unfactored(q, k, v, FeatureMap::resolve(id)?)
        }
        AttentionMechanism::LinearRowwise => linear_attention_rowwise(q, k, v, eps),
        AttentionMechanism::LinearVectorized => linear_attention_vectorized(q, k, v, eps),
    }
}

pub(crate) fn check_qkv<T: Real>(
    op: &'static str,
    q: &Matrix<T>,
    k: &Matrix<T>,
    v: &Matrix<T>,
) -> Result<()> {
    if q.cols() != k.cols() {
        return Err(Error::shape(op, q.shape(), k.shape()));
    }
    if k.rows() != v.rows() {
        return Err(Error::shape(op, k.shape(), v.shape()));
    }
    if k.rows() == 0 {
        return Err(Error::ZeroCount("number of keys"));
    }
    Ok(())
}

pub(crate) fn bytes_of<T: Real>(elements: usize) -> usize {
    elements * std::mem::size_of::<T>()
}

/// Rejects a row denominator below the vanishing threshold.
pub(crate) fn check_denominator<T: Real>(
    mechanism: &'static str,
    row: usize,
    den: T,
) -> Result<()> {
    let value = den.as_f64();
    if value < VANISHING_DENOMINATOR || !value.is_finite() {
        Err(Error::VanishingDenominator {
            mechanism,
            row,
            value,
        })
    } else {
        Ok(())
    }
}

pub(crate) const VANISHING_DENOMINATOR: f64 = 1e-12;
