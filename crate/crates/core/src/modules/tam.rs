use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::PartitionedAdjacency;
use crate::layers::{expect_4d, BatchNorm, GraphConvLayer, Mode, Module, PointwiseConv, ResidualKind};
use crate::numerics::{Float, Parameter, Tensor};

/// Time-pooled channel recalibration followed by a graph convolution.
///
/// `f · σ(W_o · relu(W_i · avg(f)))`, where `avg` pools over joints after the
/// temporal average. Both squeeze weights are bias-free pointwise convs.
#[derive(Debug)]
pub struct TemporalAggregation<F: Float = f32> {
    se_reduce: PointwiseConv<F>,
    se_expand: PointwiseConv<F>,
    gconv: GraphConvLayer<F>,
    reduction: usize,
}

impl<F: Float> TemporalAggregation<F> {
    pub fn new(name: &str, channels: usize, reduction: usize, num_joints: usize, rng: &mut impl Rng) -> Result<Self> {
        if reduction == 0 || channels % reduction != 0 {
            return Err(Error::Config(format!(
                "aggregation channels {channels} are not divisible by reduction {reduction}"
            )));
        }
        let squeezed = channels / reduction;
        Ok(TemporalAggregation {
            se_reduce: PointwiseConv::new(&format!("{name}.se_reduce"), channels, squeezed, rng)?,
            se_expand: PointwiseConv::new(&format!("{name}.se_expand"), squeezed, channels, rng)?,
            gconv: GraphConvLayer::new(&format!("{name}.gconv"), channels, channels, num_joints, ResidualKind::Auto, rng)?,
            reduction,
        })
    }

    pub fn channels(&self) -> usize {
        self.se_reduce.in_channels()
    }

    pub fn reduction(&self) -> usize {
        self.reduction
    }

    pub fn se_reduce_mut(&mut self) -> &mut PointwiseConv<F> {
        &mut self.se_reduce
    }

    pub fn se_expand_mut(&mut self) -> &mut PointwiseConv<F> {
        &mut self.se_expand
    }

    /// Per-channel scales `(B, C, 1, 1)` for time-pooled features `(B, C, 1, N)`.
    pub fn scales(&self, pooled: &Tensor<F>) -> Result<Tensor<F>> {
        let squeezed = pooled.mean_axis(3, true)?;
        let h = self.se_reduce.forward(&squeezed)?.relu();
        Ok(self.se_expand.forward(&h)?.sigmoid())
    }

    /// Time-pools `(B, C, T, N)` features, recalibrates channels and applies
    /// the graph convolution. Returns `(B, C, 1, N)`.
    pub fn forward(&self, f: &Tensor<F>, adj: &PartitionedAdjacency, mode: Mode) -> Result<Tensor<F>> {
        let [_, c, _, _] = expect_4d("temporal_aggregation", f)?;
        if c != self.channels() {
            return Err(Error::shape(
                "temporal_aggregation",
                format!("channel axis has {c}, module expects {}", self.channels()),
            ));
        }
        let pooled = f.mean_axis(2, true)?;
        let recalibrated = pooled.mul(&self.scales(&pooled)?)?;
        self.gconv.forward(&recalibrated, adj, mode)
    }

    pub fn flops(&self, n: usize) -> u64 {
        self.se_reduce.flops(1, 1) + self.se_expand.flops(1, 1) + self.gconv.flops(1, n)
    }
}

impl<F: Float> Module<F> for TemporalAggregation<F> {
    fn parameters(&self) -> Vec<&Parameter<F>> {
        let mut p = self.se_reduce.parameters();
        p.extend(self.se_expand.parameters());
        p.extend(self.gconv.parameters());
        p
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter<F>> {
        let mut p = self.se_reduce.parameters_mut();
        p.extend(self.se_expand.parameters_mut());
        p.extend(self.gconv.parameters_mut());
        p
    }

    fn batch_norms(&self) -> Vec<&BatchNorm<F>> {
        self.gconv.batch_norms()
    }
}

/// Pooling and classifier, optionally preceded by temporal aggregation.
#[derive(Debug)]
pub struct ClassifierHead<F: Float = f32> {
    tam: Option<TemporalAggregation<F>>,
    classifier: PointwiseConv<F>,
}

impl<F: Float> ClassifierHead<F> {
    pub fn new(
        tam: Option<TemporalAggregation<F>>,
        channels: usize,
        num_classes: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if let Some(t) = &tam {
            if t.channels() != channels {
                return Err(Error::Config(format!(
                    "aggregation width {} does not match head width {channels}",
                    t.channels()
                )));
            }
        }
        Ok(ClassifierHead {
            tam,
            classifier: PointwiseConv::new("head.classifier", channels, num_classes, rng)?,
        })
    }

    pub fn tam(&self) -> Option<&TemporalAggregation<F>> {
        self.tam.as_ref()
    }

    pub fn tam_mut(&mut self) -> Option<&mut TemporalAggregation<F>> {
        self.tam.as_mut()
    }

    pub fn classifier(&self) -> &PointwiseConv<F> {
        &self.classifier
    }

    pub fn classifier_mut(&mut self) -> &mut PointwiseConv<F> {
        &mut self.classifier
    }

    pub fn num_classes(&self) -> usize {
        self.classifier.out_channels()
    }

    /// Class scores `(B, K)` before softmax.
    pub fn logits(&self, f: &Tensor<F>, adj: &PartitionedAdjacency, mode: Mode) -> Result<Tensor<F>> {
        let [b, _, _, _] = expect_4d("classifier_head", f)?;
        let h = match &self.tam {
            Some(tam) => tam.forward(f, adj, mode)?,
            None => f.mean_axis(2, true)?,
        };
        let pooled = h.mean_axis(3, true)?;
        self.classifier.forward(&pooled)?.reshape(&[b, self.num_classes()])
    }

    /// Class probabilities `(B, K)`.
    pub fn forward(&self, f: &Tensor<F>, adj: &PartitionedAdjacency, mode: Mode) -> Result<Tensor<F>> {
        self.logits(f, adj, mode)?.softmax(1)
    }

    pub fn flops(&self, n: usize) -> u64 {
        self.tam.as_ref().map_or(0, |t| t.flops(n)) + self.classifier.flops(1, 1)
    }
}

impl<F: Float> Module<F> for ClassifierHead<F> {
    fn parameters(&self) -> Vec<&Parameter<F>> {
        let mut p = self.tam.as_ref().map(|t| t.parameters()).unwrap_or_default();
        p.extend(self.classifier.parameters());
        p
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter<F>> {
        let mut p = self.tam.as_mut().map(|t| t.parameters_mut()).unwrap_or_default();
        p.extend(self.classifier.parameters_mut());
        p
    }

    fn batch_norms(&self) -> Vec<&BatchNorm<F>> {
        self.tam.as_ref().map(|t| t.batch_norms()).unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Skeleton, Topology, DEFAULT_ALPHA};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn adj(n: usize) -> PartitionedAdjacency {
        PartitionedAdjacency::new(&Skeleton::preset(&Topology::Chain(n)).unwrap(), DEFAULT_ALPHA).unwrap()
    }

    #[test]
    fn reduction_must_divide_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(TemporalAggregation::<f32>::new("tam", 6, 4, 3, &mut rng).is_err());
        assert!(TemporalAggregation::<f32>::new("tam", 8, 4, 3, &mut rng).is_ok());
    }

    #[test]
    fn zero_squeeze_weights_halve_every_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut tam = TemporalAggregation::<f64>::new("tam", 8, 4, 3, &mut rng).unwrap();
        tam.se_expand_mut().weight_mut().set_data(vec![0.0; 16]).unwrap();
        let x = Tensor::from_f64(&(0..24).map(|i| i as f64 * 0.1 - 1.0).collect::<Vec<_>>(), &[1, 8, 1, 3]).unwrap();
        assert!(tam.scales(&x).unwrap().data().iter().all(|&s| s == 0.5));
    }

    #[test]
    fn kinetics_scale_aggregation_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let tam = TemporalAggregation::<f32>::new("tam", 256, 4, 18, &mut rng).unwrap();
        // squeeze 2*256*64, graph conv 3*256*256 + 3*18*18 + 2*256
        assert_eq!(tam.num_params(), 32768 + 196608 + 972 + 512);
    }

    #[test]
    fn head_outputs_distributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tam = TemporalAggregation::<f64>::new("tam", 4, 2, 3, &mut rng).unwrap();
        let head = ClassifierHead::new(Some(tam), 4, 5, &mut rng).unwrap();
        let x = Tensor::from_f64(&(0..48).map(|i| (i as f64).sin()).collect::<Vec<_>>(), &[2, 4, 2, 3]).unwrap();
        let p = head.forward(&x, &adj(3), Mode::Train).unwrap();
        assert_eq!(p.shape(), &[2, 5]);
        for row in p.data().chunks(5) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&v| v >= 0.0));
        }
    }
}
