use linattn::vision::{flatten, layer_forward, unflatten, AttentionLayer, FeatureMap};
use linattn::tensor::matmul;
use linattn::{AttentionMechanism, Matrix, ProjectionWeights, Rng};

fn layer(seed: u64, c: usize, dk: usize, mechanism: AttentionMechanism) -> AttentionLayer {
    let w = ProjectionWeights::seeded(&mut Rng::new(seed), c, dk, c);
    AttentionLayer::new(w, mechanism, 1e-12).unwrap()
}

#[test]
fn single_pixel_adds_value_projection() {
    let fm = FeatureMap::seeded(&mut Rng::new(1), 4, 1, 1);
    for m in AttentionMechanism::builtin() {
        let l = layer(2, 4, 3, m.clone());
        let out = layer_forward(&l, &fm).unwrap();
        let x = flatten(&fm);
        let expected = x.add(&matmul(&x, l.weights().wv()).unwrap()).unwrap();
        assert!(flatten(&out).max_abs_diff(&expected).unwrap() < 1e-12, "{m}");
    }
}

#[test]
fn zero_value_weights_pass_input_through() {
    let mut rng = Rng::new(3);
    let fm = FeatureMap::seeded(&mut rng, 3, 4, 5);
    let w = ProjectionWeights::seeded(&mut rng, 3, 2, 3);
    let w = ProjectionWeights::new(w.wq().clone(), w.wk().clone(), Matrix::zeros(3, 3)).unwrap();
    for m in AttentionMechanism::builtin() {
        let l = AttentionLayer::new(w.clone(), m, 1e-12).unwrap();
        assert_eq!(layer_forward(&l, &fm).unwrap(), fm);
    }
}

#[test]
fn vectorized_matches_rowwise_on_maps_up_to_16x16() {
    for (seed, (c, h, w)) in [(4, 8, 8), (3, 16, 16), (2, 5, 11), (6, 1, 16)].into_iter().enumerate() {
        let fm = FeatureMap::seeded(&mut Rng::new(seed as u64), c, h, w);
        let fast = layer_forward(&layer(9, c, 4, AttentionMechanism::LinearVectorized), &fm).unwrap();
        let slow = layer_forward(&layer(9, c, 4, AttentionMechanism::LinearRowwise), &fm).unwrap();
        assert!(flatten(&fast).max_abs_diff(&flatten(&slow)).unwrap() < 1e-9);
    }
}

#[test]
fn pixel_permutation_commutes_with_the_layer() {
    let (c, h, w) = (3, 6, 7);
    let mut rng = Rng::new(11);
    let fm = FeatureMap::seeded(&mut rng, c, h, w);
    let perm = rng.permutation(h * w);
    let mut inverse = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inverse[p] = i;
    }
    let permuted = unflatten(&flatten(&fm).permute_rows(&perm).unwrap(), h, w).unwrap();
    for m in AttentionMechanism::builtin() {
        let l = layer(12, c, 4, m.clone());
        let direct = flatten(&layer_forward(&l, &fm).unwrap());
        let via_perm = flatten(&layer_forward(&l, &permuted).unwrap())
            .permute_rows(&inverse)
            .unwrap();
        assert!(direct.max_abs_diff(&via_perm).unwrap() < 1e-9, "{m}");
    }
}

#[test]
fn outputs_are_finite() {
    let fm = FeatureMap::seeded(&mut Rng::new(13), 4, 8, 8);
    for m in AttentionMechanism::builtin() {
        let out = layer_forward(&layer(14, 4, 4, m), &fm).unwrap();
        assert!(out.as_slice().iter().all(|x| x.is_finite()));
    }
}
