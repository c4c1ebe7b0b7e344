//! How far the Taylor linear attention sits from softmax attention,
//! measured on explicit weight matrices and on outputs.

use serde::{Deserialize, Serialize};

use crate::attention::{attend, check_qkv, AttentionMechanism, FeatureMap};
use crate::error::{Error, Result};
use crate::tensor::ops::dot;
use crate::tensor::{l2_normalize_rows, matmul_transposed, softmax_rows, Matrix};

/// Largest N for which an explicit `N × N` weight matrix is built.
pub const MAX_WEIGHT_MATRIX_N: usize = 4096;

/// Divergence between two mechanisms on one input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproxReport {
    pub n: usize,
    pub dk: usize,
    pub dv: usize,
    pub mechanism_a: AttentionMechanism,
    pub mechanism_b: AttentionMechanism,
    /// Max over query rows of the total-variation distance between weight rows.
    pub max_row_tv: f64,
    pub mean_row_tv: f64,
    /// Max over rows of `‖outA_i − outB_i‖₂ / (‖outB_i‖₂ + 1e-12)`.
    pub max_out_rel_l2: f64,
    pub mean_out_rel_l2: f64,
}

/// The normalized attention weights a mechanism assigns: entry `(i, j)` is
/// the weight of value row `j` in output row `i`.
pub fn weight_matrix(
    mechanism: &AttentionMechanism,
    q: &Matrix,
    k: &Matrix,
    eps: f64,
) -> Result<Matrix> {
    let n = q.rows().max(k.rows());
    if n > MAX_WEIGHT_MATRIX_N {
        return Err(Error::WeightMatrixTooLarge {
            n,
            max: MAX_WEIGHT_MATRIX_N,
        });
    }
    if q.cols() != k.cols() {
        return Err(Error::shape("weight_matrix", q.shape(), k.shape()));
    }
    match mechanism {
        AttentionMechanism::Softmax => Ok(softmax_rows(&matmul_transposed(q, k)?)),
        AttentionMechanism::SoftmaxNormalizedQK => {
            let (qn, kn) = (l2_normalize_rows(q, eps)?, l2_normalize_rows(k, eps)?);
            Ok(softmax_rows(&matmul_transposed(&qn, &kn)?))
        }
        AttentionMechanism::Kernel(id) | AttentionMechanism::KernelUnfactored(id) => {
            let map = FeatureMap::resolve(id)?;
            let phi = |m: &Matrix| {
                Matrix::from_vec(
                    m.rows(),
                    m.cols(),
                    m.as_slice().iter().map(|&x| map.apply(x)).collect(),
                )
            };
            let (fq, fk) = (phi(q)?, phi(k)?);
            normalize_similarities("kernel weights", &fq, &fk, 0.0)
        }
        AttentionMechanism::LinearRowwise | AttentionMechanism::LinearVectorized => {
            let (qn, kn) = (l2_normalize_rows(q, eps)?, l2_normalize_rows(k, eps)?);
            normalize_similarities("linear weights", &qn, &kn, 1.0)
        }
    }
}

/// Rows of `(offset + a_i·b_j) / Σ_j (offset + a_i·b_j)`.
fn normalize_similarities(
    mechanism: &'static str,
    a: &Matrix,
    b: &Matrix,
    offset: f64,
) -> Result<Matrix> {
    let mut data = Vec::with_capacity(a.rows() * b.rows());
    for (i, ai) in a.row_iter().enumerate() {
        let start = data.len();
        data.extend(b.row_iter().map(|bj| offset + dot(ai, bj)));
        let den: f64 = data[start..].iter().sum();
        if den.is_nan() || den < 1e-12 {
            return Err(Error::VanishingDenominator {
                mechanism,
                row: i,
                value: den,
            });
        }
        data[start..].iter_mut().for_each(|w| *w /= den);
    }
    Matrix::from_vec(a.rows(), b.rows(), data)
}

/// Largest amount by which any output element leaves the per-column
/// `[min, max]` range of `v`. Zero when every row is inside the hull box.
pub fn hull_excursion(out: &Matrix, v: &Matrix) -> f64 {
    let bounds = v.column_bounds();
    out.row_iter()
        .flat_map(|row| row.iter().zip(&bounds))
        .map(|(&x, &(lo, hi))| (lo - x).max(x - hi).max(0.0))
        .fold(0.0, f64::max)
}

/// Errors if `out` leaves the value hull box by more than `tol`.
pub fn check_convex_hull(
    mechanism: &AttentionMechanism,
    out: &Matrix,
    v: &Matrix,
    tol: f64,
) -> Result<()> {
    let bounds = v.column_bounds();
    for (i, row) in out.row_iter().enumerate() {
        for (d, (&x, &(lo, hi))) in row.iter().zip(&bounds).enumerate() {
            if x < lo - tol || x > hi + tol {
                return Err(Error::ConvexHullViolation {
                    mechanism: mechanism.to_string(),
                    row: i,
                    col: d,
                    value: x,
                    min: lo,
                    max: hi,
                });
            }
        }
    }
    Ok(())
}

/// Hull tolerance applied to outputs inside [`compare`].
pub const HULL_TOL: f64 = 1e-9;

fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

fn l2(x: impl Iterator<Item = f64>) -> f64 {
    x.map(|v| v * v).sum::<f64>().sqrt()
}

/// Compares two mechanisms on the same `(q, k, v)`.
pub fn compare(
    mechanism_a: &AttentionMechanism,
    mechanism_b: &AttentionMechanism,
    q: &Matrix,
    k: &Matrix,
    v: &Matrix,
    eps: f64,
) -> Result<ApproxReport> {
    check_qkv("compare", q, k, v)?;
    let wa = weight_matrix(mechanism_a, q, k, eps)?;
    let wb = weight_matrix(mechanism_b, q, k, eps)?;
    let oa = attend(mechanism_a, q, k, v, eps)?.out;
    let ob = attend(mechanism_b, q, k, v, eps)?.out;
    check_convex_hull(mechanism_a, &oa, v, HULL_TOL)?;
    check_convex_hull(mechanism_b, &ob, v, HULL_TOL)?;

    let rows = q.rows() as f64;
    let tv: Vec<f64> = wa
        .row_iter()
        .zip(wb.row_iter())
        .map(|(a, b)| total_variation(a, b))
        .collect();
    let rel: Vec<f64> = oa
        .row_iter()
        .zip(ob.row_iter())
        .map(|(a, b)| {
            let diff = l2(a.iter().zip(b).map(|(x, y)| x - y));
            diff / (l2(b.iter().copied()) + 1e-12)
        })
        .collect();
    Ok(ApproxReport {
        n: k.rows(),
        dk: k.cols(),
        dv: v.cols(),
        mechanism_a: mechanism_a.clone(),
        mechanism_b: mechanism_b.clone(),
        max_row_tv: tv.iter().copied().fold(0.0, f64::max),
        mean_row_tv: tv.iter().sum::<f64>() / rows,
        max_out_rel_l2: rel.iter().copied().fold(0.0, f64::max),
        mean_out_rel_l2: rel.iter().sum::<f64>() / rows,
    })
}

/// Scans `x` over `[-1, 1]` in steps of `step` and returns the point and
/// value of the largest `|eˣ − (1 + x)|`.
pub fn taylor_residual_max(step: f64) -> (f64, f64) {
    let points = (2.0 / step).round() as usize;
    (0..=points)
        .map(|i| (-1.0 + i as f64 * step).min(1.0))
        .map(|x| (x, (x.exp() - (1.0 + x)).abs()))
        .fold((0.0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Rng;

    fn instance(seed: u64, n: usize, dk: usize, dv: usize) -> (Matrix, Matrix, Matrix) {
        let mut rng = Rng::new(seed);
        (
            rng.standard_normal_matrix(n, dk),
            rng.standard_normal_matrix(n, dk),
            rng.standard_normal_matrix(n, dv),
        )
    }

    #[test]
    fn softmax_zero_keys_is_uniform() {
        let (q, _, _) = instance(1, 5, 3, 1);
        let w = weight_matrix(&AttentionMechanism::Softmax, &q, &Matrix::zeros(5, 3), 1e-12).unwrap();
        assert!(w.as_slice().iter().all(|&x| (x - 0.2).abs() < 1e-15));
    }

    #[test]
    fn single_key_weight_is_one() {
        let (q, k, _) = instance(2, 1, 3, 1);
        let w = weight_matrix(&AttentionMechanism::LinearRowwise, &q, &k, 1e-12).unwrap();
        assert_eq!(w.shape(), (1, 1));
        assert!((w.get(0, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn weights_reproduce_kernel_outputs() {
        // W · V must equal the attention output for every mechanism.
        let (q, k, v) = instance(4, 4, 3, 2);
        for m in AttentionMechanism::builtin() {
            let w = weight_matrix(&m, &q, &k, 1e-12).unwrap();
            for row in w.row_iter() {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                assert!(row.iter().all(|&x| x >= -1e-12));
            }
            let via_weights = crate::tensor::matmul(&w, &v).unwrap();
            let out = attend(&m, &q, &k, &v, 1e-12).unwrap().out;
            assert!(via_weights.max_abs_diff(&out).unwrap() < 1e-12, "{m}");
        }
    }

    #[test]
    fn guard_on_large_n() {
        let q = Matrix::zeros(MAX_WEIGHT_MATRIX_N + 1, 1);
        assert!(matches!(
            weight_matrix(&AttentionMechanism::Softmax, &q, &q, 1e-12),
            Err(Error::WeightMatrixTooLarge { .. })
        ));
    }

    #[test]
    fn self_comparison_is_zero_and_tv_is_symmetric() {
        let (q, k, v) = instance(5, 20, 4, 3);
        for m in AttentionMechanism::builtin() {
            let r = compare(&m, &m, &q, &k, &v, 1e-12).unwrap();
            assert!(r.max_row_tv.abs() < 1e-12 && r.max_out_rel_l2.abs() < 1e-12);
        }
        let (a, b) = (AttentionMechanism::LinearVectorized, AttentionMechanism::Softmax);
        let ab = compare(&a, &b, &q, &k, &v, 1e-12).unwrap();
        let ba = compare(&b, &a, &q, &k, &v, 1e-12).unwrap();
        assert!((ab.max_row_tv - ba.max_row_tv).abs() < 1e-12);
        assert!((ab.mean_row_tv - ba.mean_row_tv).abs() < 1e-12);
        assert!(ab.max_row_tv > 0.0 && ab.max_row_tv <= 1.0);
    }

    #[test]
    fn single_row_reports_zero() {
        let (q, k, v) = instance(6, 1, 4, 3);
        let r = compare(
            &AttentionMechanism::LinearVectorized,
            &AttentionMechanism::Softmax,
            &q,
            &k,
            &v,
            1e-12,
        )
        .unwrap();
        assert!(r.max_row_tv < 1e-12 && r.max_out_rel_l2 < 1e-12);
    }

    #[test]
    fn report_json_is_flat_snake_case() {
        let (q, k, v) = instance(7, 3, 2, 2);
        let r = compare(
            &AttentionMechanism::LinearVectorized,
            &AttentionMechanism::SoftmaxNormalizedQK,
            &q,
            &k,
            &v,
            1e-12,
        )
        .unwrap();
        let json = serde_json::to_value(&r).unwrap();
        let obj = json.as_object().unwrap();
        let keys: Vec<&str> = obj.keys().map(String::as_str).collect();
        let mut expected = vec![
            "n", "dk", "dv", "mechanism_a", "mechanism_b", "max_row_tv", "mean_row_tv",
            "max_out_rel_l2", "mean_out_rel_l2",
        ];
        expected.sort_unstable();
        let mut keys = keys;
        keys.sort_unstable();
        assert_eq!(keys, expected);
        assert_eq!(obj["mechanism_b"], "softmax_normalized_qk");
        assert!(obj.values().all(|v| !v.is_object() && !v.is_array()));
    }

    #[test]
    fn hull_check_flags_escapes() {
        let v = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let inside = Matrix::from_rows(&[vec![0.5]]).unwrap();
        let outside = Matrix::from_rows(&[vec![1.5]]).unwrap();
        let m = AttentionMechanism::Softmax;
        assert!(check_convex_hull(&m, &inside, &v, 1e-9).is_ok());
        assert!(matches!(
            check_convex_hull(&m, &outside, &v, 1e-9),
            Err(Error::ConvexHullViolation { row: 0, col: 0, .. })
        ));
        assert_eq!(hull_excursion(&outside, &v), 0.5);
    }

    #[test]
    fn taylor_residual_peaks_at_one() {
        let (x, r) = taylor_residual_max(1e-3);
        assert_eq!(x, 1.0);
        assert!((r - (std::f64::consts::E - 2.0)).abs() < 1e-15);
    }
}
