mod support;

use gaze_core::cnn::{
    draw_masks, forward_with_masks, load_weights, reference_spec, save_weights, train, LayerSpec, NetworkState, Tensor,
    TrainConfig,
};
use gaze_core::dataset::{synth_generate, SynthParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn analytic_gradients_match_finite_differences() {
    for seed in [1, 2, 3] {
        let gc = support::gradient_check(seed, 4, 1e-3);
        println!("seed {seed}: {:.4} within 1e-4, max {:.2e}", gc.fraction_within(1e-4), gc.max());
        assert!(gc.fraction_within(1e-4) >= 0.99);
        assert!(gc.max() <= 1e-3);
    }
}

#[test]
fn dropout_matches_infer_in_expectation() {
    let spec = reference_spec(3).unwrap();
    let drop = spec.layers().iter().position(|l| matches!(l, LayerSpec::Dropout { .. })).unwrap();
    let state = NetworkState::<f64>::init(spec.clone(), 11).unwrap();
    let img: Vec<f64> = (0..72 * 72).map(|i| ((i * 31 + i / 72 * 7) % 255) as f64 / 255.0).collect();
    let one = Tensor::new(vec![1, 1, 72, 72], img.clone()).unwrap();
    let (_, infer) = forward_with_masks(&state, &one, None).unwrap();
    let expected: f64 = infer.traces()[0].activation(drop).iter().sum();
    assert!(expected > 0.0);

    let n = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let masks = draw_masks::<f64, _>(state.spec(), n, &mut rng);
    let batch = Tensor::new(vec![n, 1, 72, 72], img.repeat(n)).unwrap();
    let (_, trained) = forward_with_masks(&state, &batch, Some(masks)).unwrap();
    let mean = trained.traces().iter().map(|t| t.activation(drop).iter().sum::<f64>()).sum::<f64>() / n as f64;
    assert!((mean - expected).abs() <= 0.02 * expected, "mean {mean} vs infer {expected}");
    // Everything upstream of the dropout layer is untouched by the masks.
    assert_eq!(trained.traces()[17].activation(drop - 1), infer.traces()[0].activation(drop - 1));
}

fn small_set(seed: u64, n: usize, classes: usize) -> gaze_core::dataset::LabeledSet {
    let mix = if classes == 2 { [0.5, 0.5, 0.0] } else { [0.34, 0.33, 0.33] };
    synth_generate(seed, &SynthParams::new(n, mix, 8)).unwrap()
}

#[test]
fn training_loss_decreases() {
    let set = small_set(3, 200, 3);
    let config = TrainConfig { iterations: 300, ..TrainConfig::default() };
    let (_, report) = train(&reference_spec(3).unwrap(), &set, None, &config).unwrap();
    let head: f64 = report.losses[..50].iter().sum::<f64>() / 50.0;
    let tail: f64 = report.losses[250..].iter().sum::<f64>() / 50.0;
    assert!(head > tail, "first 50 mean {head}, last 50 mean {tail}");
}

#[test]
fn same_seed_gives_identical_weights() {
    let set = small_set(4, 120, 2);
    let config = TrainConfig { iterations: 20, batch: 16, seed: 9, ..TrainConfig::default() };
    let spec = reference_spec(2).unwrap();
    let (a, _) = train(&spec, &set, None, &config).unwrap();
    let (b, _) = train(&spec, &set, None, &config).unwrap();
    assert_eq!(save_weights(&a), save_weights(&b));
    let other = TrainConfig { seed: 10, ..config };
    let (c, _) = train(&spec, &set, None, &other).unwrap();
    assert_ne!(save_weights(&a), save_weights(&c));
}

#[test]
fn lanes_do_not_change_the_optimum_much() {
    let set = small_set(4, 120, 2);
    let spec = reference_spec(2).unwrap();
    let base = TrainConfig { iterations: 10, batch: 20, ..TrainConfig::default() };
    let (a, _) = train(&spec, &set, None, &base).unwrap();
    let (b, _) = train(&spec, &set, None, &TrainConfig { lanes: 3, ..base.clone() }).unwrap();
    let (b2, _) = train(&spec, &set, None, &TrainConfig { lanes: 3, ..base }).unwrap();
    assert_eq!(save_weights(&b), save_weights(&b2));
    for (pa, pb) in a.params().iter().zip(b.params()) {
        for (x, y) in pa.weights.iter().zip(&pb.weights) {
            assert!((x - y).abs() < 1e-4);
        }
    }
}

#[test]
fn weight_file_round_trip_is_byte_identical() {
    let spec = reference_spec(3).unwrap();
    let state = NetworkState::<f32>::init(spec.clone(), 21).unwrap();
    let bytes = save_weights(&state);
    let back = load_weights(&bytes, &spec).unwrap();
    assert_eq!(save_weights(&back), bytes);
    assert_eq!(back.params(), state.params());
}
