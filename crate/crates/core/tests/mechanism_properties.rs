use linattn::analysis::{hull_excursion, weight_matrix};
use linattn::{attend, AttentionMechanism, Matrix};
use proptest::prelude::*;

/// Runs `m`, or rejects the case when every similarity of some row cancels
/// (the documented vanishing-denominator error, e.g. all cosines = -1).
macro_rules! attend_or_reject {
    ($m:expr, $q:expr, $k:expr, $v:expr) => {
        match attend($m, $q, $k, $v, 1e-12) {
            Ok(res) => res.out,
            Err(linattn::Error::VanishingDenominator { .. }) => {
                return Err(TestCaseError::reject("vanishing denominator"))
            }
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    };
}

fn qkv() -> impl Strategy<Value = (Matrix, Matrix, Matrix)> {
    (1usize..24, 1usize..8, 1usize..6).prop_flat_map(|(n, dk, dv)| {
        let m = |r: usize, c: usize| {
            prop::collection::vec(-3.0f64..3.0, r * c)
                .prop_map(move |d| Matrix::from_vec(r, c, d).unwrap())
        };
        (m(n, dk), m(n, dk), m(n, dv))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn outputs_stay_in_value_hull((q, k, v) in qkv()) {
        for m in AttentionMechanism::builtin() {
            let out = attend_or_reject!(&m, &q, &k, &v);
            prop_assert!(hull_excursion(&out, &v) <= 1e-9, "{}", m);
        }
    }

    #[test]
    fn joint_permutation_is_invisible((q, k, v) in qkv(), seed: u64) {
        let perm = linattn::Rng::new(seed).permutation(k.rows());
        let (kp, vp) = (k.permute_rows(&perm).unwrap(), v.permute_rows(&perm).unwrap());
        for m in AttentionMechanism::builtin() {
            let a = attend_or_reject!(&m, &q, &k, &v);
            let b = attend_or_reject!(&m, &q, &kp, &vp);
            prop_assert!(a.max_abs_diff(&b).unwrap() < 1e-9, "{}", m);
        }
    }

    #[test]
    fn explicit_weights_are_stochastic((q, k, _v) in qkv()) {
        for m in AttentionMechanism::builtin() {
            let w = match weight_matrix(&m, &q, &k, 1e-12) {
                Ok(w) => w,
                Err(linattn::Error::VanishingDenominator { .. }) => {
                    return Err(TestCaseError::reject("vanishing denominator"))
                }
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            };
            for row in w.row_iter() {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                prop_assert!(row.iter().all(|&x| x >= -1e-12));
            }
        }
    }

    #[test]
    fn linear_ignores_query_scale((q, k, v) in qkv(), exps in prop::collection::vec(-3.0f64..3.0, 24)) {
        let scales: Vec<f64> = exps[..q.rows()].iter().map(|e| 10f64.powf(*e)).collect();
        let qs = q.scale_rows(&scales).unwrap();
        for m in [AttentionMechanism::LinearRowwise, AttentionMechanism::LinearVectorized] {
            let a = attend_or_reject!(&m, &q, &k, &v);
            let b = attend_or_reject!(&m, &qs, &k, &v);
            prop_assert!(a.max_abs_diff(&b).unwrap() < 1e-9);
        }
    }
}

#[test]
fn dispatch_is_identity() {
    let mut rng = linattn::Rng::new(77);
    let (q, k, v): (Matrix, Matrix, Matrix) = (
        rng.standard_normal_matrix(9, 4),
        rng.standard_normal_matrix(9, 4),
        rng.standard_normal_matrix(9, 2),
    );
    let eps = 1e-12;
    let via = |m: AttentionMechanism| attend(&m, &q, &k, &v, eps).unwrap().out;
    assert_eq!(via(AttentionMechanism::Softmax), linattn::softmax_attention(&q, &k, &v).unwrap().out);
    assert_eq!(
        via(AttentionMechanism::LinearVectorized),
        linattn::linear_attention_vectorized(&q, &k, &v, eps).unwrap().out
    );
    let (qn, kn) = (
        linattn::tensor::l2_normalize_rows(&q, eps).unwrap(),
        linattn::tensor::l2_normalize_rows(&k, eps).unwrap(),
    );
    assert_eq!(
        via(AttentionMechanism::SoftmaxNormalizedQK),
        linattn::softmax_attention(&qn, &kn, &v).unwrap().out
    );
    assert!(matches!(
        attend(&AttentionMechanism::Kernel("relu".into()), &q, &k, &v, eps),
        Err(linattn::Error::UnknownFeatureMap(_))
    ));
}

#[test]
fn sequential_and_default_execution_agree_bitwise() {
    let w = linattn::workload::Workload::<f64>::generate(5, 300, 8, 6, 4).unwrap();
    let (q, k, v) = (&w.qkv.q, &w.qkv.k, &w.qkv.v);
    for m in AttentionMechanism::builtin() {
        let a = attend(&m, q, k, v, 1e-12).unwrap().out;
        let b = linattn::sequential(|| attend(&m, q, k, v, 1e-12).unwrap().out);
        assert_eq!(a.as_slice(), b.as_slice(), "{m}");
    }
}
