use serde::Serialize;

use super::PrGcnModel;
use crate::layers::Module;
use crate::numerics::Float;

/// Scalar parameter counts per block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ParamReport {
    pub prm: usize,
    pub gfm: usize,
    pub tam: usize,
    pub head: usize,
    pub total: usize,
}

/// Floating-point operations per block for one person stream of
/// `frames` frames. A multiply-accumulate counts as two; batch norm,
/// activations and pooling are not counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FlopReport {
    pub prm: u64,
    pub gfm: u64,
    pub tam: u64,
    pub head: u64,
    /// Sum of the blocks for one person stream.
    pub total: u64,
    pub persons: usize,
    /// `total` times the configured person count.
    pub clip_total: u64,
}

impl FlopReport {
    pub fn gflops(&self) -> f64 {
        self.total as f64 * 1e-9
    }

    pub fn clip_gflops(&self) -> f64 {
        self.clip_total as f64 * 1e-9
    }
}

pub fn count_params<F: Float>(model: &PrGcnModel<F>) -> ParamReport {
    let prm = model.prm().map_or(0, |m| m.num_params());
    let gfm = model.backbone().num_params();
    let tam = model.head().tam().map_or(0, |t| t.num_params());
    let head = model.head().classifier().num_params();
    ParamReport {
        prm,
        gfm,
        tam,
        head,
        total: prm + gfm + tam + head,
    }
}

pub fn count_flops<F: Float>(model: &PrGcnModel<F>) -> FlopReport {
    let cfg = model.config();
    let (t, n) = (cfg.frames, model.num_joints());
    let prm = model.prm().map_or(0, |m| m.flops(t, n));
    let gfm = model.backbone().flops(t, n);
    let tam = model.head().tam().map_or(0, |a| a.flops(n));
    let head = model.head().classifier().flops(1, 1);
    let total = prm + gfm + tam + head;
    FlopReport {
        prm,
        gfm,
        tam,
        head,
        total,
        persons: cfg.persons,
        clip_total: total * cfg.persons as u64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    #[test]
    fn kinetics_budgets() {
        let full = count_params(&PrGcnModel::<f32>::new(ModelConfig::kinetics()).unwrap());
        assert_eq!(full.total, 563_668);
        assert_eq!(full.prm, 39_512);
        assert_eq!(full.tam, 230_860);
        assert_eq!(full.head, 256 * 400);
        let base = ModelConfig {
            enable_prm: false,
            enable_tam: false,
            ..ModelConfig::kinetics()
        };
        assert_eq!(count_params(&PrGcnModel::<f32>::new(base).unwrap()).total, 293_296);
    }

    #[test]
    fn person_count_scales_clip_flops_only() {
        let one = ModelConfig { persons: 1, ..ModelConfig::toy(3, 6, 2) };
        let three = ModelConfig { persons: 3, ..one.clone() };
        let (a, b) = (
            PrGcnModel::<f32>::new(one).unwrap(),
            PrGcnModel::<f32>::new(three).unwrap(),
        );
        assert_eq!(count_params(&a), count_params(&b));
        assert_eq!(count_flops(&a).total, count_flops(&b).total);
        assert_eq!(count_flops(&b).clip_total, 3 * count_flops(&a).total);
    }
}
