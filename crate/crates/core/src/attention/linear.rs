use crate::attention::{bytes_of, check_denominator, check_qkv, AttentionOutput, AuxPlan};
use crate::error::Result;
use crate::par;
use crate::tensor::ops::{axpy, check_eps, dot};
use crate::tensor::{l2_normalize_rows, Matrix, Real};

/// Taylor linear attention, one query at a time:
/// `outᵢ = Σⱼ (1 + q̂ᵢᵀk̂ⱼ) vⱼ / Σⱼ (1 + q̂ᵢᵀk̂ⱼ)`.
///
/// `O(Nq·Nk)` time; this is the definitional form the vectorized version is
/// checked against. Rows of `q` or `k` with norm below `eps` normalize to
/// zero, so a zero query attends uniformly.
pub fn linear_attention_rowwise<T: Real>(
    q: &Matrix<T>,
    k: &Matrix<T>,
    v: &Matrix<T>,
    eps: f64,
) -> Result<AttentionOutput<T>> {
    check_qkv("linear_attention_rowwise", q, k, v)?;
    let qn = l2_normalize_rows(q, eps)?;
    let kn = l2_normalize_rows(k, eps)?;
    let mut out = Matrix::zeros(q.rows(), v.cols());
    par::try_for_each_row(out.data_mut(), v.cols(), |i, row| {
        let qi = qn.row(i);
        let mut den = T::zero();
        for j in 0..kn.rows() {
            let sim = T::one() + dot(qi, kn.row(j));
            den = den + sim;
            axpy(row, sim, v.row(j));
        }
        check_denominator("linear_attention_rowwise", i, den)?;
        row.iter_mut().for_each(|x| *x = *x / den);
        Ok(())
    })?;
    out.check_finite("linear_attention_rowwise")?;
    let aux = AuxPlan {
        buffers: qn.bytes() + kn.bytes(),
        accumulators: 0,
    };
    Ok(AttentionOutput { out, aux })
}

/// Taylor linear attention in `O(N)`:
///
/// one pass over the key/value rows accumulates `sᵥ = Σⱼ vⱼ`,
/// `S = Σⱼ k̂ⱼvⱼᵀ` and `z = Σⱼ k̂ⱼ`; one pass over queries then emits
/// `outᵢ = (sᵥ + q̂ᵢᵀS) / (N + q̂ᵢᵀz)`.
///
/// The accumulators take `(Dv + Dk·Dv + Dk)` elements regardless of `N`.
pub fn linear_attention_vectorized<T: Real>(
    q: &Matrix<T>,
    k: &Matrix<T>,
    v: &Matrix<T>,
    eps: f64,
) -> Result<AttentionOutput<T>> {
    check_qkv("linear_attention_vectorized", q, k, v)?;
    check_eps(eps)?;
    let (dk, dv) = (k.cols(), v.cols());
    let qn = l2_normalize_rows(q, eps)?;
    let kn = l2_normalize_rows(k, eps)?;

    let mut sv = vec![T::zero(); dv];
    let mut s = vec![T::zero(); dk * dv];
    let mut z = vec![T::zero(); dk];
    for (kj, vj) in kn.row_iter().zip(v.row_iter()) {
        axpy(&mut sv, T::one(), vj);
        for (a, &ka) in kj.iter().enumerate() {
            axpy(&mut s[a * dv..(a + 1) * dv], ka, vj);
            z[a] = z[a] + ka;
        }
    }

    let n = T::of(k.rows() as f64);
    let mut out = Matrix::zeros(q.rows(), dv);
    par::try_for_each_row(out.data_mut(), dv, |i, row| {
        let qi = qn.row(i);
        row.copy_from_slice(&sv);
        for (a, &qa) in qi.iter().enumerate() {
            axpy(row, qa, &s[a * dv..(a + 1) * dv]);
        }
        let den = n + dot(qi, &z);
        check_denominator("linear_attention_vectorized", i, den)?;
        row.iter_mut().for_each(|x| *x = *x / den);
        Ok(())
    })?;
    out.check_finite("linear_attention_vectorized")?;
    let aux = AuxPlan {
        buffers: qn.bytes() + kn.bytes(),
        accumulators: bytes_of::<T>(sv.len() + s.len() + z.len()),
    };
    Ok(AttentionOutput { out, aux })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::tensor::Rng;

    fn instance(seed: u64, n: usize, dk: usize, dv: usize) -> (Matrix, Matrix, Matrix) {
        let mut rng = Rng::new(seed);
        (
            rng.standard_normal_matrix(n, dk),
            rng.standard_normal_matrix(n, dk),
            rng.standard_normal_matrix(n, dv),
        )
    }

    fn both(q: &Matrix, k: &Matrix, v: &Matrix) -> [Matrix; 2] {
        [
            linear_attention_rowwise(q, k, v, 1e-12).unwrap().out,
            linear_attention_vectorized(q, k, v, 1e-12).unwrap().out,
        ]
    }

    #[test]
    fn single_row_returns_v() {
        let (q, k, v) = instance(1, 1, 4, 3);
        for out in both(&q, &k, &v) {
            assert!(out.max_abs_diff(&v).unwrap() < 1e-12);
        }
    }

    #[test]
    fn seeded_golden() {
        // Frozen from the row-wise form at first computation.
        let golden = [
            [-0.1895034019206202, 1.1952242867912588, 0.8246658531728163],
            [0.15374199369099187, 0.9025555458683264, 0.4601485209209658],
            [-0.4946920546809462, 1.4138625625624393, 0.713983107874953],
            [0.18895215480003613, 0.8140697310712115, 0.5733351077575881],
            [0.06331209688742455, 0.9195260062403132, 0.4138832390439843],
            [-0.13574265739163127, 1.1321623574182593, 0.3648794515550853],
        ];
        let golden = Matrix::from_rows(&golden.map(Vec::from)).unwrap();
        let (q, k, v) = instance(6, 6, 4, 3);
        for out in both(&q, &k, &v) {
            assert!(out.max_abs_diff(&golden).unwrap() < 1e-12);
        }
    }

    #[test]
    fn constant_values_pass_through() {
        let (q, k, _) = instance(2, 9, 4, 3);
        let v = Matrix::filled(9, 3, 2.5).unwrap();
        for out in both(&q, &k, &v) {
            assert!(out.as_slice().iter().all(|x| (x - 2.5).abs() < 1e-12));
        }
    }

    #[test]
    fn aligned_identical_keys_average_values() {
        let (_, _, v) = instance(3, 5, 3, 2);
        let key = vec![0.3, -1.2, 0.4];
        let k = Matrix::from_rows(&vec![key.clone(); 5]).unwrap();
        let q = Matrix::from_rows(&[key.iter().map(|x| 4.0 * x).collect()]).unwrap();
        let mean = v.column_means();
        for out in both(&q, &k, &v) {
            for (a, b) in out.row(0).iter().zip(&mean) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_query_attends_uniformly() {
        let (_, k, v) = instance(4, 6, 3, 2);
        let mean = v.column_means();
        for out in both(&Matrix::zeros(2, 3), &k, &v) {
            for row in out.row_iter() {
                for (a, b) in row.iter().zip(&mean) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn antipodal_keys_are_a_structured_error() {
        let q = Matrix::from_rows(&[vec![1.0, 1.0], vec![2.0, 0.0]]).unwrap();
        let k = Matrix::from_rows(&[vec![-3.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        let v = Matrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        for res in [
            linear_attention_rowwise(&q, &k, &v, 1e-12),
            linear_attention_vectorized(&q, &k, &v, 1e-12),
        ] {
            match res {
                Err(Error::VanishingDenominator { row, .. }) => assert_eq!(row, 1),
                other => panic!("expected vanishing denominator, got {other:?}"),
            }
        }
    }

    #[test]
    fn rejects_non_positive_eps() {
        let (q, k, v) = instance(5, 3, 2, 2);
        assert!(matches!(linear_attention_rowwise(&q, &k, &v, 0.0), Err(Error::InvalidEps(_))));
        assert!(matches!(linear_attention_vectorized(&q, &k, &v, -1.0), Err(Error::InvalidEps(_))));
    }

    #[test]
    fn joint_key_value_permutation_is_invisible() {
        let (q, k, v) = instance(6, 12, 4, 3);
        let perm = Rng::new(60).permutation(12);
        let (kp, vp) = (k.permute_rows(&perm).unwrap(), v.permute_rows(&perm).unwrap());
        let [a0, b0] = both(&q, &k, &v);
        let [a1, b1] = both(&q, &kp, &vp);
        assert!(a0.max_abs_diff(&a1).unwrap() < 1e-12);
        assert!(b0.max_abs_diff(&b1).unwrap() < 1e-12);
    }

    #[test]
    fn aux_accumulators_do_not_depend_on_n() {
        let mut prev = None;
        for n in [8, 64, 512] {
            let (q, k, v) = instance(7, n, 4, 3);
            let res = linear_attention_vectorized(&q, &k, &v, 1e-12).unwrap();
            assert_eq!(res.aux.buffers, 2 * n * 4 * 8);
            assert_eq!(res.aux.accumulators, (3 + 12 + 4) * 8);
            if let Some(p) = prev {
                assert_eq!(p, res.aux.accumulators);
            }
            prev = Some(res.aux.accumulators);
        }
    }
}
