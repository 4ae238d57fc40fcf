mod common;

use common::{random_tensor, rng, uniform};
use prgcn_core::model::{checkpoint_config, load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
use prgcn_core::{count_flops, count_params, Mode, ModelConfig, Module, PrGcnModel, Tensor};

fn toy_model(seed: u64) -> PrGcnModel<f64> {
    let mut cfg = ModelConfig::toy(4, 12, 3);
    cfg.persons = 2;
    cfg.seed = seed;
    PrGcnModel::new(cfg).unwrap()
}

fn toy_input(seed: u64, persons: usize) -> Tensor<f64> {
    random_tensor(&mut rng(seed), &[2, persons, 3, 12, 4])
}

#[test]
fn outputs_are_distributions() {
    let mut cfg = ModelConfig::toy(3, 6, 2);
    cfg.persons = 2;
    let model = PrGcnModel::<f64>::new(cfg).unwrap();
    let y = model.forward(&random_tensor(&mut rng(0), &[1, 2, 3, 6, 3]), Mode::Eval).unwrap();
    assert_eq!(y.shape(), &[1, 2]);
    assert!((y.data().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(y.data().iter().all(|&p| p >= 0.0));
}

#[test]
fn duplicated_person_equals_single_person() {
    let model = toy_model(1);
    let one = toy_input(2, 1);
    let two = Tensor::concat(&[one.clone(), one.clone()], 1).unwrap();
    let a = model.forward(&one, Mode::Eval).unwrap();
    let b = model.forward(&two, Mode::Eval).unwrap();
    assert_eq!(a.data(), b.data());
}

#[test]
fn person_order_does_not_matter() {
    let model = toy_model(3);
    let x = toy_input(4, 2);
    let swapped = Tensor::concat(&[x.narrow(1, 1, 1).unwrap(), x.narrow(1, 0, 1).unwrap()], 1).unwrap();
    assert_eq!(
        model.forward(&x, Mode::Eval).unwrap().data(),
        model.forward(&swapped, Mode::Eval).unwrap().data()
    );
}

#[test]
fn permuting_classifier_rows_permutes_scores() {
    let mut model = toy_model(5);
    let x = toy_input(6, 2);
    let before = model.forward(&x, Mode::Eval).unwrap().to_vec();
    let perm = [2, 0, 1];
    let w = model.parameter("head.classifier.weight").unwrap().value().to_vec();
    let c = w.len() / 3;
    let mut permuted = vec![0.0; w.len()];
    for (new, &old) in perm.iter().enumerate() {
        permuted[new * c..(new + 1) * c].copy_from_slice(&w[old * c..(old + 1) * c]);
    }
    model.parameter_mut("head.classifier.weight").unwrap().set_data(permuted).unwrap();
    let after = model.forward(&x, Mode::Eval).unwrap().to_vec();
    for b in 0..2 {
        for (new, &old) in perm.iter().enumerate() {
            assert!((after[b * 3 + new] - before[b * 3 + old]).abs() < 1e-14);
        }
    }
}

#[test]
fn inference_is_deterministic_and_build_is_seeded() {
    let x = toy_input(7, 2);
    let a = toy_model(8).forward(&x, Mode::Eval).unwrap();
    let b = toy_model(8).forward(&x, Mode::Eval).unwrap();
    assert_eq!(a.data(), b.data());
    let model = toy_model(8);
    assert_eq!(model.forward(&x, Mode::Eval).unwrap().data(), model.forward(&x, Mode::Eval).unwrap().data());
    assert_ne!(toy_model(9).forward(&x, Mode::Eval).unwrap().data(), a.data());
}

#[test]
fn wrong_input_extents_are_rejected() {
    let model = toy_model(0);
    for shape in [[1, 1, 2, 12, 4], [1, 1, 3, 6, 4], [1, 1, 3, 12, 5]] {
        assert!(model.forward(&Tensor::zeros(&shape), Mode::Eval).is_err(), "{shape:?}");
    }
}

#[test]
fn parameter_count_ignores_person_count() {
    let mut cfg = ModelConfig::kinetics();
    let two = count_params(&PrGcnModel::<f32>::new(cfg.clone()).unwrap()).total;
    cfg.persons = 1;
    let one = PrGcnModel::<f32>::new(cfg).unwrap();
    assert_eq!(count_params(&one).total, two);
    assert_eq!(count_flops(&one).clip_total * 2, count_flops(&PrGcnModel::<f32>::new(ModelConfig::kinetics()).unwrap()).clip_total);
}

#[test]
fn ablation_accounting_is_ordered() {
    let build = |prm: bool, tam: bool| {
        let cfg = ModelConfig {
            enable_prm: prm,
            enable_tam: tam,
            ..ModelConfig::kinetics()
        };
        let m = PrGcnModel::<f32>::new(cfg).unwrap();
        (count_params(&m).total, count_flops(&m).total)
    };
    let (base, with_prm, with_tam) = (build(false, false), build(true, false), build(false, true));
    assert!(base.0 < with_tam.0);
    assert!(base.1 < with_prm.1);
    let (params, flops) = build(true, true);
    assert!((450_000..=600_000).contains(&params));
    assert!((250_000..=350_000).contains(&base.0));
    let g = flops as f64 * 1e-9;
    assert!((1.7 * 0.6..=1.7 * 1.4).contains(&g), "{g}");
}

#[test]
fn ntu_layout_builds() {
    let mut cfg = ModelConfig::ntu();
    cfg.frames = 12;
    let model = PrGcnModel::<f32>::new(cfg).unwrap();
    let y = model.forward(&Tensor::zeros(&[1, 2, 3, 12, 25]), Mode::Eval).unwrap();
    assert_eq!(y.shape(), &[1, 60]);
}

fn trained_toy() -> PrGcnModel<f64> {
    let mut model = toy_model(11);
    let x = toy_input(12, 2);
    let mut r = rng(13);
    for p in model.parameters_mut() {
        let n = p.numel();
        p.set_data(uniform(&mut r, n, -0.5, 0.5)).unwrap();
    }
    // one train-mode pass to move running statistics off their defaults
    model.forward(&x, Mode::Train).unwrap();
    model
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let model = trained_toy();
    let x = toy_input(14, 2);
    let bytes = save_checkpoint(&model, true);
    let cfg = checkpoint_config(&bytes).unwrap();
    assert_eq!(&cfg, model.config());
    let loaded: PrGcnModel<f64> = load_checkpoint(&bytes, &cfg).unwrap();
    assert_eq!(
        model.forward_logits(&x, Mode::Eval).unwrap().data(),
        loaded.forward_logits(&x, Mode::Eval).unwrap().data()
    );

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("toy.ckpt");
    write_checkpoint(&model, &path, false).unwrap();
    let from_file: PrGcnModel<f64> = read_checkpoint(&path).unwrap();
    assert_eq!(
        model.forward_logits(&x, Mode::Eval).unwrap().data(),
        from_file.forward_logits(&x, Mode::Eval).unwrap().data()
    );
}

#[test]
fn checkpoint_rejects_mismatched_classes() {
    let model = trained_toy();
    let bytes = save_checkpoint(&model, false);
    let mut cfg = model.config().clone();
    cfg.num_classes = 4;
    let err = load_checkpoint::<f64>(&bytes, &cfg).unwrap_err().to_string();
    assert!(err.contains("head.classifier.weight"), "{err}");
}

#[test]
fn checkpoint_rejects_damage() {
    let model = trained_toy();
    let bytes = save_checkpoint(&model, false);
    let cfg = model.config().clone();
    for cut in [0, 8, bytes.len() / 2, bytes.len() - 1] {
        assert!(load_checkpoint::<f64>(&bytes[..cut], &cfg).is_err(), "cut at {cut}");
    }
    let mut flipped = bytes.clone();
    let mid = bytes.len() / 2;
    flipped[mid] ^= 0x40;
    assert!(load_checkpoint::<f64>(&flipped, &cfg).is_err());
    assert!(load_checkpoint::<f32>(&bytes, &cfg).is_err());
}
