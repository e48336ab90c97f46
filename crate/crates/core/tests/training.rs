mod common;

use std::sync::OnceLock;

use common::{colour_coded_set, noise_set};
use opponency::data::Split;
use opponency::model::{build_model, encode_checkpoint, evaluate, train, ModelConfig, VisualSystemModel};
use opponency::ndnum::OptimizerKind;
use opponency::probe::{classify, sweep_responses, ResponseCurve, Tolerances};
use opponency::stimulus::{hue_sweep, zero_stimulus};
use opponency::Error;

fn small_config() -> ModelConfig {
    let mut c = ModelConfig::new(4, 0);
    c.seed = 17;
    c.epochs = 30;
    c.batch_size = 20;
    c.lr = 1e-3;
    c
}

/// Trained once and shared by the tests that need a fitted model.
fn overfit() -> &'static (VisualSystemModel, Vec<f64>) {
    static CELL: OnceLock<(VisualSystemModel, Vec<f64>)> = OnceLock::new();
    CELL.get_or_init(|| {
        let set = colour_coded_set(200, 1, Split::Train);
        let mut model = build_model(&small_config()).unwrap();
        let log = train(&mut model, &set, &mut |_| {}).unwrap();
        let acc = log.epochs.iter().map(|e| e.train_accuracy).collect();
        (model, acc)
    })
}

#[test]
fn small_model_overfits_two_hundred_images() {
    let (model, per_epoch) = overfit();
    let set = colour_coded_set(200, 1, Split::Train);
    let clean = evaluate(model, &set, 50).unwrap();
    assert!(clean > 0.9, "train-set accuracy {clean:.3}, per epoch {per_epoch:?}");
    assert_eq!(model.meta.epochs_completed, 30);
}

#[test]
fn untrained_model_is_at_chance() {
    let mut c = small_config();
    c.seed = 3;
    let model = build_model(&c).unwrap();
    let acc = evaluate(&model, &noise_set(2000, 9), 100).unwrap();
    assert!((acc - 0.1).abs() <= 0.02, "{acc}");
}

#[test]
fn zero_learning_rate_keeps_weights() {
    let mut c = small_config();
    c.epochs = 1;
    c.lr = 0.0;
    c.weight_decay = 0.0;
    let set = colour_coded_set(40, 2, Split::Train);
    let mut model = build_model(&c).unwrap();
    let before = model.clone();
    train(&mut model, &set, &mut |_| {}).unwrap();
    for (a, b) in model.parameters().iter().zip(before.parameters()) {
        assert_eq!(a.data(), b.data());
    }
}

#[test]
fn loss_falls_during_the_first_epoch() {
    let mut c = small_config();
    c.epochs = 1;
    c.batch_size = 10;
    let set = colour_coded_set(200, 4, Split::Train);
    let mut model = build_model(&c).unwrap();
    let log = train(&mut model, &set, &mut |_| {}).unwrap();
    let losses = &log.epochs[0].batch_losses;
    let q = losses.len() / 4;
    let first: f32 = losses[..q].iter().sum::<f32>() / q as f32;
    let last: f32 = losses[losses.len() - q..].iter().sum::<f32>() / q as f32;
    assert!(last < first, "first quarter {first}, last quarter {last}");
}

#[test]
fn same_seed_gives_identical_models() {
    let mut c = small_config();
    c.epochs = 1;
    c.optimizer = OptimizerKind::Sgd;
    c.lr = 0.01;
    let set = colour_coded_set(30, 5, Split::Train);
    let run = || {
        let mut m = build_model(&c).unwrap();
        train(&mut m, &set, &mut |_| {}).unwrap();
        encode_checkpoint(&m)
    };
    assert_eq!(run(), run());
    let mut other = c.clone();
    other.seed += 1;
    let mut m = build_model(&other).unwrap();
    train(&mut m, &set, &mut |_| {}).unwrap();
    assert_ne!(encode_checkpoint(&m), run());
}

#[test]
fn exploding_learning_rate_is_reported_as_divergence() {
    let mut c = small_config();
    c.epochs = 3;
    c.lr = 1e30;
    c.optimizer = OptimizerKind::Sgd;
    let set = colour_coded_set(40, 6, Split::Train);
    let mut model = build_model(&c).unwrap();
    let err = train(&mut model, &set, &mut |_| {}).unwrap_err();
    assert!(matches!(err, Error::Diverged(_)), "{err}");
}

#[test]
fn spectral_class_is_stable_under_hue_grid_refinement() {
    let (model, _) = overfit();
    let tol = Tolerances::default();
    let layers = model.config.probed_layers();
    let base = opponency::probe::centre_responses(model, &layers, &zero_stimulus().image).unwrap();
    let coarse_sweep = hue_sweep(64).unwrap();
    let fine_sweep = hue_sweep(256).unwrap();
    let coarse = sweep_responses(model, &layers, &coarse_sweep).unwrap();
    let fine = sweep_responses(model, &layers, &fine_sweep).unwrap();
    let (mut same, mut total) = (0, 0);
    for ((b, c), f) in base.iter().zip(&coarse).zip(&fine) {
        for ch in 0..b.by_channel.len() {
            let baseline = b.by_channel[ch][0];
            let cc = ResponseCurve::new(coarse_sweep.parameters(), c.by_channel[ch].clone(), baseline).unwrap();
            let fc = ResponseCurve::new(fine_sweep.parameters(), f.by_channel[ch].clone(), baseline).unwrap();
            total += 1;
            same += (classify(&cc, &tol).unwrap() == classify(&fc, &tol).unwrap()) as usize;
        }
    }
    assert!(same as f64 >= 0.95 * total as f64, "{same}/{total}");
}
