use rand::Rng;

use super::{ChannelSemantics, INPUT_CHANNELS};
use crate::error::{Error, Result};
use crate::graph::PartitionedAdjacency;
use crate::layers::{BatchNorm, GraphConvLayer, Mode, Module, PointwiseConv, ResidualKind, TemporalConvLayer};
use crate::numerics::{Float, Parameter, Tensor};

/// Predicts per-joint coordinate offsets and adds them to the input poses.
///
/// The offset head starts at zero, so a fresh module returns its input
/// unchanged. For 2-D input only x and y are refined; confidence passes
/// through.
#[derive(Debug)]
pub struct PoseRefinement<F: Float = f32> {
    lift: PointwiseConv<F>,
    gconv1: GraphConvLayer<F>,
    gconv2: GraphConvLayer<F>,
    tconv: TemporalConvLayer<F>,
    head: PointwiseConv<F>,
    semantics: ChannelSemantics,
}

impl<F: Float> PoseRefinement<F> {
    pub fn new(
        name: &str,
        hidden: usize,
        num_joints: usize,
        semantics: ChannelSemantics,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let n = num_joints;
        Ok(PoseRefinement {
            lift: PointwiseConv::new(&format!("{name}.lift"), INPUT_CHANNELS, hidden, rng)?,
            gconv1: GraphConvLayer::new(&format!("{name}.gconv1"), hidden, hidden, n, ResidualKind::Auto, rng)?,
            gconv2: GraphConvLayer::new(&format!("{name}.gconv2"), hidden, hidden, n, ResidualKind::Auto, rng)?,
            tconv: TemporalConvLayer::new(&format!("{name}.tconv"), hidden, hidden, 1, ResidualKind::Auto, rng)?,
            head: PointwiseConv::zeros(&format!("{name}.head"), hidden, semantics.coord_channels())?,
            semantics,
        })
    }

    pub fn semantics(&self) -> ChannelSemantics {
        self.semantics
    }

    pub fn head_mut(&mut self) -> &mut PointwiseConv<F> {
        &mut self.head
    }

    /// `(B, D_off, T, N)` offsets for the coordinate channels.
    pub fn offsets(&self, x: &Tensor<F>, adj: &PartitionedAdjacency, mode: Mode) -> Result<Tensor<F>> {
        if x.rank() != 4 || x.shape()[1] != INPUT_CHANNELS {
            return Err(Error::shape(
                "pose_refinement",
                format!("expected ({INPUT_CHANNELS}-channel) (B, C, T, N) input, got {:?}", x.shape()),
            ));
        }
        let h = self.lift.forward(x)?.relu();
        let h = self.gconv1.forward(&h, adj, mode)?;
        let h = self.gconv2.forward(&h, adj, mode)?;
        let h = self.tconv.forward(&h, mode)?;
        self.head.forward(&h)
    }

    pub fn forward(&self, x: &Tensor<F>, adj: &PartitionedAdjacency, mode: Mode) -> Result<Tensor<F>> {
        let offsets = self.offsets(x, adj, mode)?;
        let pass_through = INPUT_CHANNELS - self.semantics.coord_channels();
        let offsets = if pass_through > 0 {
            offsets.pad(1, 0, pass_through)?
        } else {
            offsets
        };
        x.add(&offsets)
    }

    pub fn flops(&self, t: usize, n: usize) -> u64 {
        self.lift.flops(t, n)
            + self.gconv1.flops(t, n)
            + self.gconv2.flops(t, n)
            + self.tconv.flops(t, n)
            + self.head.flops(t, n)
    }
}

impl<F: Float> Module<F> for PoseRefinement<F> {
    fn parameters(&self) -> Vec<&Parameter<F>> {
        let mut p = self.lift.parameters();
        p.extend(self.gconv1.parameters());
        p.extend(self.gconv2.parameters());
        p.extend(self.tconv.parameters());
        p.extend(self.head.parameters());
        p
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter<F>> {
        let mut p = self.lift.parameters_mut();
        p.extend(self.gconv1.parameters_mut());
        p.extend(self.gconv2.parameters_mut());
        p.extend(self.tconv.parameters_mut());
        p.extend(self.head.parameters_mut());
        p
    }

    fn batch_norms(&self) -> Vec<&BatchNorm<F>> {
        let mut b = self.gconv1.batch_norms();
        b.extend(self.gconv2.batch_norms());
        b.extend(self.tconv.batch_norms());
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Skeleton, Topology, DEFAULT_ALPHA};
    use crate::layers::Module;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kinetics_scale_parameter_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let prm = PoseRefinement::<f32>::new("prm", 64, 18, ChannelSemantics::XyConf, &mut rng).unwrap();
        // lift 3*64, two graph convs (3*64*64 + 3*18*18 + 2*64), temporal 64*64*3 + 2*64, head 64*2
        assert_eq!(prm.num_params(), 192 + 2 * (12288 + 972 + 128) + (12288 + 128) + 128);
    }

    #[test]
    fn rejects_wrong_channel_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let adj = PartitionedAdjacency::new(&Skeleton::preset(&Topology::Chain(3)).unwrap(), DEFAULT_ALPHA).unwrap();
        let prm = PoseRefinement::<f64>::new("prm", 4, 3, ChannelSemantics::Xyz, &mut rng).unwrap();
        assert!(prm.forward(&Tensor::zeros(&[1, 2, 6, 3]), &adj, Mode::Eval).is_err());
    }
}
