use std::collections::HashSet;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ModelConfig;
use crate::error::{Error, Result};
use crate::graph::{PartitionedAdjacency, Skeleton};
use crate::layers::{BatchNorm, Mode, Module};
use crate::modules::{ClassifierHead, FusionBackbone, PoseRefinement, TemporalAggregation, INPUT_CHANNELS};
use crate::numerics::{Float, Parameter, Tensor};

/// Pose refinement, gradual fusion and the classifier head, applied to every
/// person stream with shared weights.
#[derive(Debug)]
pub struct PrGcnModel<F: Float = f32> {
    config: ModelConfig,
    skeleton: Skeleton,
    adjacency: Arc<PartitionedAdjacency>,
    prm: Option<PoseRefinement<F>>,
    gfm: FusionBackbone<F>,
    head: ClassifierHead<F>,
}

impl<F: Float> PrGcnModel<F> {
    /// Builds and initializes a model from `config.seed`.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let skeleton = Skeleton::preset(&config.topology)?;
        let n = skeleton.num_joints();
        let adjacency = Arc::new(PartitionedAdjacency::new(&skeleton, config.alpha)?);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

        let prm = if config.enable_prm {
            Some(PoseRefinement::new("prm", config.prm_hidden, n, config.semantics, &mut rng)?)
        } else {
            None
        };
        let gfm = FusionBackbone::new("gfm", config.fusion_mode, &config.widths, n, &mut rng)?;
        let fused = config.widths.fused();
        let tam = if config.enable_tam {
            Some(TemporalAggregation::new("tam", fused, config.tam_reduction, n, &mut rng)?)
        } else {
            None
        };
        let head = ClassifierHead::new(tam, fused, config.num_classes, &mut rng)?;

        let model = PrGcnModel {
            config,
            skeleton,
            adjacency,
            prm,
            gfm,
            head,
        };
        let mut seen = HashSet::new();
        for p in model.parameters() {
            if !seen.insert(p.name()) {
                return Err(Error::Config(format!("duplicate parameter name `{}`", p.name())));
            }
        }
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn skeleton(&self) -> &Skeleton {
        &self.skeleton
    }

    pub fn adjacency(&self) -> &PartitionedAdjacency {
        &self.adjacency
    }

    pub fn num_joints(&self) -> usize {
        self.skeleton.num_joints()
    }

    pub fn prm(&self) -> Option<&PoseRefinement<F>> {
        self.prm.as_ref()
    }

    pub fn prm_mut(&mut self) -> Option<&mut PoseRefinement<F>> {
        self.prm.as_mut()
    }

    pub fn backbone(&self) -> &FusionBackbone<F> {
        &self.gfm
    }

    pub fn head(&self) -> &ClassifierHead<F> {
        &self.head
    }

    pub fn head_mut(&mut self) -> &mut ClassifierHead<F> {
        &mut self.head
    }

    /// Looks a parameter up by its registry name.
    pub fn parameter(&self, name: &str) -> Option<&Parameter<F>> {
        self.parameters().into_iter().find(|p| p.name() == name)
    }

    pub fn parameter_mut(&mut self, name: &str) -> Option<&mut Parameter<F>> {
        self.parameters_mut().into_iter().find(|p| p.name() == name)
    }

    /// Checks a `(B, M, C, T, N)` batch against the configuration and returns
    /// its extents. Any person count is accepted.
    pub fn check_input(&self, x: &Tensor<F>) -> Result<[usize; 5]> {
        let want = (INPUT_CHANNELS, self.config.frames, self.num_joints());
        match *x.shape() {
            [b, m, c, t, n] if (c, t, n) == want => Ok([b, m, c, t, n]),
            _ => Err(Error::shape(
                "model",
                format!(
                    "expected (B, M, {}, {}, {}) input, got {:?}",
                    want.0,
                    want.1,
                    want.2,
                    x.shape()
                ),
            )),
        }
    }

    /// Refined poses, same shape as the `(B, M, C, T, N)` input. Without a
    /// refinement module this is the input itself.
    pub fn refine(&self, x: &Tensor<F>, mode: Mode) -> Result<Tensor<F>> {
        let [b, m, c, t, n] = self.check_input(x)?;
        match &self.prm {
            Some(prm) => prm
                .forward(&x.reshape(&[b * m, c, t, n])?, &self.adjacency, mode)?
                .reshape(&[b, m, c, t, n]),
            None => Ok(x.clone()),
        }
    }

    /// Class scores of each person stream, `(B, M, K)`.
    pub fn person_logits(&self, x: &Tensor<F>, mode: Mode) -> Result<Tensor<F>> {
        let [b, m, c, t, n] = self.check_input(x)?;
        let mut h = x.reshape(&[b * m, c, t, n])?;
        if let Some(prm) = &self.prm {
            h = prm.forward(&h, &self.adjacency, mode)?;
        }
        let f = self.gfm.forward(&h, &self.adjacency, mode)?;
        self.head
            .logits(&f, &self.adjacency, mode)?
            .reshape(&[b, m, self.config.num_classes])
    }

    /// Class scores `(B, K)`: the elementwise max over person streams.
    pub fn forward_logits(&self, x: &Tensor<F>, mode: Mode) -> Result<Tensor<F>> {
        self.person_logits(x, mode)?.max_axis(1, false)
    }

    /// Class probabilities `(B, K)`.
    pub fn forward(&self, x: &Tensor<F>, mode: Mode) -> Result<Tensor<F>> {
        self.forward_logits(x, mode)?.softmax(1)
    }
}

impl<F: Float> Module<F> for PrGcnModel<F> {
    fn parameters(&self) -> Vec<&Parameter<F>> {
        let mut p = self.prm.as_ref().map(|m| m.parameters()).unwrap_or_default();
        p.extend(self.gfm.parameters());
        p.extend(self.head.parameters());
        p
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter<F>> {
        let mut p = self.prm.as_mut().map(|m| m.parameters_mut()).unwrap_or_default();
        p.extend(self.gfm.parameters_mut());
        p.extend(self.head.parameters_mut());
        p
    }

    fn batch_norms(&self) -> Vec<&BatchNorm<F>> {
        let mut b = self.prm.as_ref().map(|m| m.batch_norms()).unwrap_or_default();
        b.extend(self.gfm.batch_norms());
        b.extend(self.head.batch_norms());
        b
    }
}
