#![allow(dead_code)]

pub mod checks;
pub mod eq_suite;
pub mod oracles;
pub mod suites;

use prgcn_core::{Module, Result, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_EPS: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-4;
/// Gradient pairs whose norms are both below this are treated as zero.
const TINY: f64 = 1e-9;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

pub fn random_tensor(rng: &mut impl Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_f64(&uniform(rng, n, -1.0, 1.0), shape).unwrap()
}

/// `Σ y ⊙ r` for fixed random `r`, so the scalar depends on every element
/// with distinct weights (a plain sum is constant after batch norm).
pub fn probe(y: &Tensor<f64>, seed: u64) -> Result<Tensor<f64>> {
    let r = random_tensor(&mut rng(seed), y.shape());
    Ok(y.mul(&r)?.sum_all())
}

pub fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na.max(nb) < TINY {
        0.0
    } else {
        diff / na.max(nb)
    }
}

/// Central-difference check of `f` with respect to each leaf. Returns the
/// largest norm-relative error over the leaves.
pub fn check_leaves(leaves: &[Tensor<f64>], f: impl Fn(&[Tensor<f64>]) -> Result<Tensor<f64>>) -> f64 {
    let tracked: Vec<_> = leaves.iter().map(|t| t.requires_grad()).collect();
    f(&tracked).unwrap().backward().unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..leaves.len() {
        let analytic = tracked[i].grad().unwrap_or_else(|| vec![0.0; leaves[i].numel()]);
        let mut numeric = Vec::with_capacity(leaves[i].numel());
        for e in 0..leaves[i].numel() {
            let eval = |delta: f64| {
                let mut data = leaves[i].to_vec();
                data[e] += delta;
                let mut inputs = leaves.to_vec();
                inputs[i] = Tensor::from_vec(data, leaves[i].shape()).unwrap();
                f(&inputs).unwrap().item().unwrap()
            };
            numeric.push((eval(FD_EPS) - eval(-FD_EPS)) / (2.0 * FD_EPS));
        }
        worst = worst.max(rel_error(&analytic, &numeric));
    }
    worst
}

/// Central-difference check of `loss(module)` with respect to every
/// parameter. Returns `(parameter name, relative error)` per parameter.
pub fn check_module<M: Module<f64>>(module: &mut M, loss: impl Fn(&M) -> Result<Tensor<f64>>) -> Vec<(String, f64)> {
    for p in module.parameters() {
        p.zero_grad();
    }
    loss(module).unwrap().backward().unwrap();
    let analytic: Vec<Vec<f64>> = module
        .parameters()
        .iter()
        .map(|p| p.grad().unwrap_or_else(|| vec![0.0; p.numel()]))
        .collect();
    let count = analytic.len();
    let mut out = Vec::with_capacity(count);
    for (pi, grad) in analytic.into_iter().enumerate() {
        let original = module.parameters()[pi].value().to_vec();
        let name = module.parameters()[pi].name().to_string();
        let mut numeric = Vec::with_capacity(original.len());
        for e in 0..original.len() {
            let mut eval = |delta: f64| {
                let mut data = original.clone();
                data[e] += delta;
                module.parameters_mut()[pi].set_data(data).unwrap();
                loss(module).unwrap().item().unwrap()
            };
            let (plus, minus) = (eval(FD_EPS), eval(-FD_EPS));
            numeric.push((plus - minus) / (2.0 * FD_EPS));
        }
        module.parameters_mut()[pi].set_data(original).unwrap();
        out.push((name, rel_error(&grad, &numeric)));
    }
    out
}

pub fn worst(errors: &[(String, f64)]) -> (String, f64) {
    errors
        .iter()
        .cloned()
        .fold((String::new(), 0.0), |acc, e| if e.1 > acc.1 { e } else { acc })
}
