mod common;

use prgcn_core::data::{generate_synthetic, stack_batch, AugmentParams, SynthSpec};
use prgcn_core::model::{load_checkpoint, save_checkpoint};
use prgcn_core::train::prepare_clip;
use prgcn_core::{sgd_step, train, Error, Mode, ModelConfig, Module, PrGcnModel, RunConfig, Tensor, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn toy_data(seed: u64) -> Vec<prgcn_core::data::SkeletonSequence> {
    generate_synthetic(&SynthSpec::new(2, 2, 3, 12, seed)).unwrap()
}

fn toy_cfg() -> ModelConfig {
    ModelConfig::toy(3, 12, 2)
}

#[test]
fn first_step_descends_on_a_frozen_batch() {
    let data = toy_data(0);
    let mut model = PrGcnModel::<f64>::new(toy_cfg()).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(0);
    let clips: Vec<_> = data.iter().map(|c| prepare_clip(c, 1, 12, Mode::Eval, &mut r)).collect();
    let x: Tensor<f64> = stack_batch(&clips).unwrap();
    let labels: Vec<usize> = data.iter().map(|c| c.label.unwrap()).collect();

    let before = model.forward(&x, Mode::Train).unwrap().cross_entropy(&labels).unwrap();
    before.backward().unwrap();
    sgd_step(&mut model.parameters_mut(), 1e-3, 0.9).unwrap();
    let after = model.forward(&x, Mode::Train).unwrap().cross_entropy(&labels).unwrap();
    assert!(after.item().unwrap() < before.item().unwrap());
}

#[test]
fn short_run_reduces_loss() {
    let data = generate_synthetic(&SynthSpec::new(2, 4, 3, 12, 1)).unwrap();
    let mut model = PrGcnModel::<f32>::new(toy_cfg()).unwrap();
    let cfg = TrainConfig { epochs: 8, batch_size: 2, augment: AugmentParams::NONE, ..TrainConfig::default() };
    let m = train(&mut model, &data, &cfg, None).unwrap();
    assert_eq!(m.history.len(), 8);
    assert!(m.history.last().unwrap().loss < m.history[0].loss, "{:?}", m.history);
}

#[test]
fn same_seed_gives_identical_logs() {
    let data = toy_data(2);
    let run = || {
        let mut model = PrGcnModel::<f32>::new(toy_cfg()).unwrap();
        let cfg = TrainConfig { epochs: 3, batch_size: 2, seed: 5, ..TrainConfig::default() };
        let mut log = Vec::new();
        train(&mut model, &data, &cfg, Some(&mut log)).unwrap();
        (log, save_checkpoint(&model, true))
    };
    let (a, ca) = run();
    let (b, cb) = run();
    assert_eq!(String::from_utf8(a.clone()).unwrap().lines().count(), 3);
    assert_eq!(a, b);
    assert_eq!(ca, cb);
}

#[test]
fn trained_model_survives_checkpoint_round_trip() {
    let data = toy_data(3);
    let mut model = PrGcnModel::<f32>::new(toy_cfg()).unwrap();
    let cfg = TrainConfig { epochs: 2, batch_size: 2, ..TrainConfig::default() };
    train(&mut model, &data, &cfg, None).unwrap();
    let loaded: PrGcnModel<f32> = load_checkpoint(&save_checkpoint(&model, true), model.config()).unwrap();
    let x = Tensor::<f32>::from_f64(&(0..108).map(|i| (i as f64).cos()).collect::<Vec<_>>(), &[1, 1, 3, 12, 3]).unwrap();
    assert_eq!(
        model.forward_logits(&x, Mode::Eval).unwrap().data(),
        loaded.forward_logits(&x, Mode::Eval).unwrap().data()
    );
    for (p, q) in model.parameters().iter().zip(loaded.parameters()) {
        assert_eq!(p.momentum_buffer(), q.momentum_buffer());
    }
}

#[test]
fn divergence_reports_non_finite_loss() {
    let mut data = toy_data(4);
    data[0].coords[[0, 0, 0, 0]] = f32::NAN;
    let mut model = PrGcnModel::<f32>::new(toy_cfg()).unwrap();
    let cfg = TrainConfig { epochs: 2, batch_size: 4, augment: AugmentParams::NONE, ..TrainConfig::default() };
    let r = train(&mut model, &data, &cfg, None);
    assert!(matches!(r, Err(Error::NonFinite { epoch: 0, .. })), "{r:?}");
}

#[test]
fn dataset_problems_are_reported_before_training() {
    let mut model = PrGcnModel::<f32>::new(toy_cfg()).unwrap();
    let cfg = TrainConfig { epochs: 1, ..TrainConfig::default() };
    assert!(train(&mut model, &[], &cfg, None).is_err());
    let mut data = toy_data(5);
    data[1].label = Some(7);
    assert!(matches!(train(&mut model, &data, &cfg, None), Err(Error::Label { label: 7, .. })));
    let wide = generate_synthetic(&SynthSpec::new(2, 1, 4, 12, 0)).unwrap();
    assert!(train(&mut model, &wide, &cfg, None).is_err());
    let bad = TrainConfig { momentum: 1.0, ..cfg };
    assert!(train(&mut model, &toy_data(5), &bad, None).is_err());
}

#[test]
fn run_config_routes_dotted_and_bare_keys() {
    let mut rc = RunConfig::default();
    rc.set("model.num_classes", "7").unwrap();
    rc.set("epochs", "3").unwrap();
    rc.set("train.lr", "0.5").unwrap();
    rc.set("seed", "9").unwrap();
    assert_eq!(rc.model.num_classes, 7);
    assert_eq!(rc.train.epochs, 3);
    assert_eq!(rc.train.base_lr, 0.5);
    assert_eq!((rc.model.seed, rc.train.seed), (9, 9));
    assert!(rc.set("model.nonsense", "1").is_err());
    assert!(rc.set("epochs", "many").is_err());
    let back = RunConfig::from_kv(&rc.to_kv()).unwrap();
    assert_eq!(back.model, rc.model);
    assert_eq!(back.train, rc.train);
}
