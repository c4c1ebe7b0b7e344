use crate::attention::{bytes_of, check_qkv, AttentionOutput, AuxPlan};
use crate::error::Result;
use crate::par;
use crate::tensor::ops::{check_eps, softmax_in_place};
use crate::tensor::{l2_normalize_rows, matmul, matmul_transposed, Matrix, Real};

/// `softmax(Q Kᵀ) V`, row softmax with max subtraction.
///
/// Materializes the full `Nq × Nk` weight matrix; that matrix is the whole
/// auxiliary footprint.
pub fn softmax_attention<T: Real>(
    q: &Matrix<T>,
    k: &Matrix<T>,
    v: &Matrix<T>,
) -> Result<AttentionOutput<T>> {
    check_qkv("softmax_attention", q, k, v)?;
    let mut weights = matmul_transposed(q, k)?;
    let n_keys = k.rows();
    par::for_each_row(weights.data_mut(), n_keys, |_, row| softmax_in_place(row));
    let out = matmul(&weights, v)?;
    let aux = AuxPlan {
        buffers: weights.bytes(),
        accumulators: 0,
    };
    Ok(AttentionOutput { out, aux })
}

/// Softmax attention over `q̂`, `k̂` (rows scaled to unit L2 norm). This is
/// the exponential that the Taylor linear attention approximates.
pub fn softmax_attention_normalized<T: Real>(
    q: &Matrix<T>,
    k: &Matrix<T>,
    v: &Matrix<T>,
    eps: f64,
) -> Result<AttentionOutput<T>> {
    check_qkv("softmax_attention_normalized", q, k, v)?;
    check_eps(eps)?;
    let qn = l2_normalize_rows(q, eps)?;
    let kn = l2_normalize_rows(k, eps)?;
    let mut res = softmax_attention(&qn, &kn, v)?;
    res.aux.buffers += bytes_of::<T>(qn.as_slice().len() + kn.as_slice().len());
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Rng;

    /// Output row i = Σⱼ exp(qᵢ·kⱼ) vⱼ / Σⱼ exp(qᵢ·kⱼ), no stabilization.
    fn explicit_exp_oracle(q: &Matrix, k: &Matrix, v: &Matrix) -> Matrix {
        let mut out = vec![0.0; q.rows() * v.cols()];
        for i in 0..q.rows() {
            let mut den = 0.0;
            let mut num = vec![0.0; v.cols()];
            for j in 0..k.rows() {
                let logit: f64 = (0..q.cols()).map(|a| q.get(i, a) * k.get(j, a)).sum();
                let w = logit.exp();
                den += w;
                for (d, slot) in num.iter_mut().enumerate() {
                    *slot += w * v.get(j, d);
                }
            }
            for d in 0..v.cols() {
                out[i * v.cols() + d] = num[d] / den;
            }
        }
        Matrix::from_vec(q.rows(), v.cols(), out).unwrap()
    }

    #[test]
    fn single_row_returns_v() {
        let mut rng = Rng::new(1);
        let (q, k, v): (Matrix, Matrix, Matrix) = (
            rng.standard_normal_matrix(1, 3),
            rng.standard_normal_matrix(1, 3),
            rng.standard_normal_matrix(1, 4),
        );
        assert_eq!(softmax_attention(&q, &k, &v).unwrap().out, v);
    }

    #[test]
    fn zero_keys_average_values() {
        let mut rng = Rng::new(2);
        let q: Matrix = rng.standard_normal_matrix(4, 3);
        let v: Matrix = rng.standard_normal_matrix(5, 2);
        let res = softmax_attention(&q, &Matrix::zeros(5, 3), &v).unwrap();
        let mean = v.column_means();
        for row in res.out.row_iter() {
            for (a, b) in row.iter().zip(&mean) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn seeded_instance_matches_explicit_exponentials() {
        let mut rng = Rng::new(3);
        let q: Matrix = rng.standard_normal_matrix(3, 2);
        let k: Matrix = rng.standard_normal_matrix(3, 2);
        let v: Matrix = rng.standard_normal_matrix(3, 2);
        let got = softmax_attention(&q, &k, &v).unwrap();
        let want = explicit_exp_oracle(&q, &k, &v);
        assert!(got.out.max_abs_diff(&want).unwrap() < 1e-12);
    }

    #[test]
    fn aux_is_the_weight_matrix() {
        let mut rng = Rng::new(4);
        let q: Matrix = rng.standard_normal_matrix(6, 2);
        let k: Matrix = rng.standard_normal_matrix(9, 2);
        let v: Matrix = rng.standard_normal_matrix(9, 3);
        assert_eq!(softmax_attention(&q, &k, &v).unwrap().aux_bytes(), 6 * 9 * 8);
        let qf: Matrix<f32> = q.cast();
        let res = softmax_attention(&qf, &k.cast(), &v.cast()).unwrap();
        assert_eq!(res.aux_bytes(), 6 * 9 * 4);
        let norm = softmax_attention_normalized(&q, &k, &v, 1e-12).unwrap();
        assert_eq!(norm.aux, AuxPlan { buffers: (54 + 12 + 18) * 8, accumulators: 0 });
    }

    #[test]
    fn shape_errors() {
        let a = Matrix::<f64>::zeros(2, 3);
        assert!(softmax_attention(&a, &Matrix::zeros(2, 4), &a).is_err());
        assert!(softmax_attention(&a, &a, &Matrix::zeros(3, 3)).is_err());
    }
}
