use mesoshrink_nn::{
    grad_check, Architecture, GradCheckOptions, Layer, LayerSpec, ModelGraph, PadMode, Padding, Tensor,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(dims: [usize; 4], seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(dims, |_| rng.gen_range(-1.0..1.0))
}

fn check(input: [usize; 3], layers: Vec<Layer>, batch: usize, tol: f64) {
    let arch = Architecture { input, layers };
    let mut g = ModelGraph::<f64>::new(arch, 11).unwrap();
    // Non-zero biases so the bias gradients are exercised against a generic point.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for p in g.params_mut().iter_mut().filter(|p| p.name.ends_with("bias")) {
        for v in p.value.data_mut() {
            *v = rng.gen_range(-0.2..0.2);
        }
    }
    let [c, h, w] = input;
    let x = random([batch, c, h, w], 3);
    // Plain relative error; small components get no scale allowance here.
    let opts = GradCheckOptions {
        scale_floor: 0.0,
        ..GradCheckOptions::default()
    };
    let report = grad_check(&mut g, &x, &opts).unwrap();
    assert!(report.passes(tol), "{report:?}");
    assert!(report.checked > 0);
}

fn l(spec: LayerSpec) -> Layer {
    Layer::new(spec)
}

#[test]
fn conv3x3_matches_finite_differences() {
    check([2, 6, 5], vec![l(LayerSpec::Conv3x3 { cin: 2, cout: 3 })], 2, 1e-6);
}

#[test]
fn conv1x1_matches_finite_differences() {
    check([3, 4, 4], vec![l(LayerSpec::Conv1x1 { cin: 3, cout: 2 })], 2, 1e-6);
}

#[test]
fn padding_modes_match_finite_differences() {
    for (x, y) in [
        (PadMode::Periodic, PadMode::Periodic),
        (PadMode::Periodic, PadMode::Replicate),
        (PadMode::Zero, PadMode::Replicate),
    ] {
        let layers = vec![
            l(LayerSpec::Pad {
                mode: Padding { x, y },
                width: 2,
            }),
            l(LayerSpec::Conv3x3 { cin: 1, cout: 2 }),
        ];
        check([1, 4, 3], layers, 1, 1e-6);
    }
}

#[test]
fn avgpool_matches_finite_differences() {
    let layers = vec![l(LayerSpec::Conv1x1 { cin: 2, cout: 2 }), l(LayerSpec::Avgpool2x2)];
    check([2, 4, 6], layers, 2, 1e-6);
}

#[test]
fn maxpool_subgradient_away_from_ties() {
    // Continuous random inputs have no ties, so the routed gradient is the derivative.
    let layers = vec![l(LayerSpec::Conv1x1 { cin: 1, cout: 2 }), l(LayerSpec::Maxpool2x2)];
    check([1, 6, 4], layers, 2, 1e-6);
}

#[test]
fn upconv_matches_finite_differences() {
    check([3, 3, 2], vec![l(LayerSpec::Upconv2x2 { cin: 3, cout: 2 })], 2, 1e-6);
}

#[test]
fn smooth_activations_match_finite_differences() {
    for act in [LayerSpec::Sigmoid, LayerSpec::Softplus] {
        let layers = vec![l(LayerSpec::Conv1x1 { cin: 1, cout: 2 }), l(act)];
        check([1, 3, 3], layers, 2, 1e-6);
    }
}

#[test]
fn relu_matches_finite_differences() {
    let layers = vec![l(LayerSpec::Conv1x1 { cin: 2, cout: 3 }), l(LayerSpec::Relu)];
    check([2, 3, 3], layers, 2, 1e-6);
}

#[test]
fn dense_matches_finite_differences() {
    let layers = vec![
        l(LayerSpec::Flatten),
        l(LayerSpec::Dense { inputs: 12, outputs: 4 }),
        l(LayerSpec::Softplus),
    ];
    check([3, 2, 2], layers, 3, 1e-6);
}

#[test]
fn skip_concat_matches_finite_differences() {
    let layers = vec![
        Layer::named("skip", LayerSpec::Conv1x1 { cin: 1, cout: 2 }),
        l(LayerSpec::Maxpool2x2),
        l(LayerSpec::Upconv2x2 { cin: 2, cout: 2 }),
        l(LayerSpec::Concat { with: "skip".into() }),
        l(LayerSpec::Conv1x1 { cin: 4, cout: 1 }),
    ];
    check([1, 4, 4], layers, 2, 1e-6);
}

#[test]
fn crop_matches_finite_differences() {
    let layers = vec![
        l(LayerSpec::Pad {
            mode: Padding::PERIODIC,
            width: 2,
        }),
        l(LayerSpec::Conv3x3 { cin: 1, cout: 1 }),
        l(LayerSpec::Crop {
            top: 1,
            left: 0,
            height: 3,
            width: 4,
        }),
    ];
    check([1, 4, 4], layers, 1, 1e-6);
}

#[test]
fn linear_graph_is_exact_to_rounding() {
    let layers = vec![l(LayerSpec::Flatten), l(LayerSpec::Dense { inputs: 8, outputs: 3 })];
    let mut g = ModelGraph::<f64>::new(
        Architecture {
            input: [2, 2, 2],
            layers,
        },
        1,
    )
    .unwrap();
    let x = random([2, 2, 2, 2], 9);
    let report = grad_check(&mut g, &x, &GradCheckOptions::default()).unwrap();
    // Central differences are exact on affine maps; only rounding of h remains.
    assert!(report.max_rel_error < 1e-9, "{report:?}");
}
