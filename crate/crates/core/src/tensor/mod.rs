//! Dense rank-2 matrices and the handful of row operations the attention
//! kernels are built from.

mod matrix;
pub(crate) mod ops;
mod real;
mod rng;
pub mod tsr;

pub use matrix::Matrix;
pub use ops::{elu_plus_one, l2_normalize_rows, matmul, matmul_transposed, softmax_rows};
pub use real::{ElementType, Real};
pub use rng::Rng;

/// Rows with an L2 norm below this are treated as zero rows.
pub const DEFAULT_EPS: f64 = 1e-12;
