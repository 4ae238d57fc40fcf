//! Contract checks shared by the integration tests and the acceptance report.

use prgcn_core::data::{generate_synthetic, SkeletonSequence, SynthSpec};
use prgcn_core::modules::{compute_motion, FusionMode, FusionWidths};
use prgcn_core::{evaluate, train_until, Mode, ModelConfig, Module, PrGcnModel, Tensor, TrainConfig};

use super::{random_tensor, rng, uniform};

/// Refined poses of a fresh Kinetics-layout model against the raw input.
/// Returns `(bit-for-bit identical, confidence untouched under random head)`.
pub fn prm_identity(seed: u64) -> (bool, bool) {
    let mut cfg = ModelConfig::toy(18, 6, 3);
    cfg.topology = prgcn_core::Topology::Kinetics18;
    cfg.seed = seed;
    let mut model = PrGcnModel::<f32>::new(cfg).unwrap();
    let mut r = rng(seed);
    let x: Tensor<f32> = Tensor::from_f64(&uniform(&mut r, 2 * 2 * 3 * 6 * 18, -1.0, 1.0), &[2, 2, 3, 6, 18]).unwrap();

    let fresh = model.refine(&x, Mode::Eval).unwrap();
    let identity = fresh.data() == x.data();

    for p in model.prm_mut().unwrap().parameters_mut() {
        let n = p.numel();
        p.set_data(uniform(&mut r, n, -1.0, 1.0).into_iter().map(|v| v as f32).collect()).unwrap();
    }
    let mut conf_kept = true;
    for mode in [Mode::Train, Mode::Eval] {
        let refined = model.refine(&x, mode).unwrap();
        let (a, b) = (refined.data(), x.data());
        // (B, M, C, T, N): channel 2 is confidence
        let plane = 6 * 18;
        for bm in 0..4 {
            let off = (bm * 3 + 2) * plane;
            conf_kept &= a[off..off + plane] == b[off..off + plane];
        }
        conf_kept &= a != b;
    }
    (identity, conf_kept)
}

/// Motion of a time-constant sequence, and cumulative-sum reconstruction of
/// a dyadic-valued sequence. Returns `(static gives zero, reconstruction exact)`.
pub fn motion_contract(seed: u64) -> (bool, bool) {
    let (b, c, t, n) = (2, 3, 12, 5);
    let mut r = rng(seed);
    let frame = random_tensor(&mut r, &[b, c, 1, n]);
    let constant = Tensor::concat(&vec![frame; t], 2).unwrap();
    let zero = compute_motion(&constant).unwrap().data().iter().all(|&v| v == 0.0);

    // Multiples of 2^-8 in [-4, 4]: every partial sum is exact in f64.
    let p: Vec<f64> = uniform(&mut r, b * c * t * n, -1024.0, 1024.0)
        .into_iter()
        .map(|v| v.round() / 256.0)
        .collect();
    let pt = Tensor::from_vec(p.clone(), &[b, c, t, n]).unwrap();
    let m = compute_motion(&pt).unwrap().to_vec();
    let mut exact = true;
    for bc in 0..b * c {
        for j in 0..n {
            let mut acc = p[bc * t * n + j];
            for f in 1..t {
                acc += m[(bc * t + f) * n + j];
                exact &= acc == p[(bc * t + f) * n + j];
            }
        }
    }
    (zero, exact)
}

/// Temporal extent of the fused features for a `frames`-long toy input.
pub fn fused_frames(frames: usize) -> usize {
    let cfg = ModelConfig::toy(3, frames, 2);
    let model = PrGcnModel::<f32>::new(cfg).unwrap();
    let x = Tensor::<f32>::zeros(&[1, 3, frames, 3]);
    model.backbone().forward(&x, model.adjacency(), Mode::Eval).unwrap().shape()[2]
}

/// Desk-scale overfit setup: 5-class, 50-clip synthetic set on a 5-joint
/// chain, width-16 model, batch 4, stock optimizer and schedule.
pub fn overfit_setup(mode: FusionMode, seed: u64) -> (ModelConfig, TrainConfig, Vec<SkeletonSequence>) {
    let data = generate_synthetic(&SynthSpec::new(5, 10, 5, 48, seed)).unwrap();
    let mut model = ModelConfig::toy(5, 48, 5);
    model.widths = FusionWidths { pos: [16, 16, 16], mot: 16, tconv1: 32, tconv2: 32 };
    model.prm_hidden = 16;
    model.fusion_mode = mode;
    model.seed = seed;
    let train = TrainConfig { batch_size: 4, epochs: 200, seed, ..TrainConfig::default() };
    (model, train, data)
}

/// Trains until inference-mode train top-1 reaches 1 or `epochs` run out.
/// Returns `(best train top-1, epochs run)`.
pub fn overfit(mode: FusionMode, seed: u64, epochs: usize) -> (f64, usize) {
    let (mcfg, mut tcfg, data) = overfit_setup(mode, seed);
    tcfg.epochs = epochs;
    let mut model = PrGcnModel::<f32>::new(mcfg).unwrap();
    let mut best: f64 = 0.0;
    let metrics = train_until(&mut model, &data, &tcfg, None, |_, m| {
        best = best.max(evaluate(m, &data)?.top1);
        Ok(best >= 1.0)
    })
    .unwrap();
    (best, metrics.history.len())
}
