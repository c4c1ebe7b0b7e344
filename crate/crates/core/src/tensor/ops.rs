use crate::error::{Error, Result};
use crate::par;
use crate::tensor::{Matrix, Real};

/// `a · b`. Each output element accumulates `a[i][p] * b[p][j]` for `p`
/// ascending, starting from zero, so results match the textbook triple loop
/// bit for bit.
pub fn matmul<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    if a.cols() != b.rows() {
        return Err(Error::shape("matmul", a.shape(), b.shape()));
    }
    let (m, n) = (a.rows(), b.cols());
    let mut out = Matrix::zeros(m, n);
    par::for_each_row(out.data_mut(), n, |i, row| {
        for (p, &a_ip) in a.row(i).iter().enumerate() {
            axpy(row, a_ip, b.row(p));
        }
    });
    out.check_finite("matmul")?;
    Ok(out)
}

/// `a · bᵀ`, one dot product per output element in ascending index order.
pub fn matmul_transposed<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    if a.cols() != b.cols() {
        return Err(Error::shape("matmul_transposed", a.shape(), b.shape()));
    }
    let (m, n) = (a.rows(), b.rows());
    let mut out = Matrix::zeros(m, n);
    par::for_each_row(out.data_mut(), n, |i, row| {
        let ai = a.row(i);
        for (j, o) in row.iter_mut().enumerate() {
            *o = dot(ai, b.row(j));
        }
    });
    out.check_finite("matmul_transposed")?;
    Ok(out)
}

#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// `y += alpha * x`.
#[inline]
pub(crate) fn axpy<T: Real>(y: &mut [T], alpha: T, x: &[T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

pub(crate) fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidEps(eps))
    }
}

pub(crate) fn l2_norm<T: Real>(row: &[T]) -> T {
    let sq: T = row.iter().map(|&x| x * x).sum();
    if sq.is_finite() {
        return sq.sqrt();
    }
    // squares overflowed; rescale by the largest magnitude
    let scale = row.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
    let sq: T = row.iter().map(|&x| (x / scale) * (x / scale)).sum();
    scale * sq.sqrt()
}

/// Writes `src / ‖src‖₂` into `dst`, or zeros when the norm is below `eps`.
pub(crate) fn normalize_row_into<T: Real>(src: &[T], dst: &mut [T], eps: f64) {
    let norm = l2_norm(src);
    if norm.as_f64() < eps {
        dst.iter_mut().for_each(|d| *d = T::zero());
    } else {
        for (d, &s) in dst.iter_mut().zip(src) {
            *d = s / norm;
        }
    }
}

/// Scales each row to unit L2 norm. Rows whose norm is below `eps` become
/// zero rows.
pub fn l2_normalize_rows<T: Real>(m: &Matrix<T>, eps: f64) -> Result<Matrix<T>> {
    check_eps(eps)?;
    let cols = m.cols();
    let mut out = Matrix::zeros(m.rows(), cols);
    par::for_each_row(out.data_mut(), cols, |i, row| {
        normalize_row_into(m.row(i), row, eps)
    });
    Ok(out)
}

/// In-place stabilized softmax of one row.
pub(crate) fn softmax_in_place<T: Real>(row: &mut [T]) {
    let max = row.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
    let mut sum = T::zero();
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        sum = sum + *x;
    }
    for x in row.iter_mut() {
        *x = *x / sum;
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows<T: Real>(m: &Matrix<T>) -> Matrix<T> {
    let mut out = m.clone();
    let cols = out.cols();
    par::for_each_row(out.data_mut(), cols, |_, row| softmax_in_place(row));
    out
}

/// `elu(x) + 1`: `x + 1` for `x ≥ 0`, `exp(x)` otherwise.
pub fn elu_plus_one<T: Real>(x: T) -> T {
    if x >= T::zero() {
        x + T::one()
    } else {
        x.exp()
    }
}
