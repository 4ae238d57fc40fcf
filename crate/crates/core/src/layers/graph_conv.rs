use rand::Rng;

use super::{check_channels, expect_4d, he_normal, BatchNorm, Mode, Module, Residual, ResidualKind};
use crate::error::{Error, Result};
use crate::graph::{PartitionedAdjacency, NUM_GROUPS};
use crate::numerics::{Float, Parameter, Tensor};

/// Spatial graph convolution over the partitioned skeleton adjacency.
///
/// For each group `k` the features of every target joint `i` aggregate
/// `(A_k ⊙ M_k)[i, j] * x[.., j]` over neighbors `j`, are mixed across
/// channels by `W_k`, and the groups are summed. Batch norm, the skip path
/// and ReLU follow.
#[derive(Debug)]
pub struct GraphConvLayer<F: Float = f32> {
    weight: Parameter<F>,
    mask: Parameter<F>,
    bn: BatchNorm<F>,
    residual: Residual<F>,
}

impl<F: Float> GraphConvLayer<F> {
    pub fn new(
        name: &str,
        c_in: usize,
        c_out: usize,
        num_joints: usize,
        residual: ResidualKind,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let w = he_normal(rng, c_in * NUM_GROUPS, NUM_GROUPS * c_out * c_in);
        let mask_len = NUM_GROUPS * num_joints * num_joints;
        Ok(GraphConvLayer {
            weight: Parameter::new(format!("{name}.weight"), w, &[NUM_GROUPS, c_out, c_in])?,
            mask: Parameter::new(
                format!("{name}.mask"),
                vec![F::one(); mask_len],
                &[NUM_GROUPS, num_joints, num_joints],
            )?,
            bn: BatchNorm::new(&format!("{name}.bn"), c_out)?,
            residual: Residual::build(residual, name, c_in, c_out, rng)?,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[2]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn num_joints(&self) -> usize {
        self.mask.shape()[1]
    }

    pub fn weight(&self) -> &Parameter<F> {
        &self.weight
    }

    pub fn weight_mut(&mut self) -> &mut Parameter<F> {
        &mut self.weight
    }

    pub fn mask(&self) -> &Parameter<F> {
        &self.mask
    }

    pub fn mask_mut(&mut self) -> &mut Parameter<F> {
        &mut self.mask
    }

    pub fn residual(&self) -> &Residual<F> {
        &self.residual
    }

    /// `Σ_k W_k (x · (A_k ⊙ M_k)ᵀ)`: the aggregation before batch norm.
    pub fn aggregate(&self, x: &Tensor<F>, adj: &PartitionedAdjacency) -> Result<Tensor<F>> {
        let [b, c, t, n] = expect_4d("graph_conv", x)?;
        check_channels("graph_conv", c, self.in_channels())?;
        if n != self.num_joints() || adj.num_joints() != n {
            return Err(Error::shape(
                "graph_conv",
                format!(
                    "joint axis has {n}, layer mask has {}, adjacency has {}",
                    self.num_joints(),
                    adj.num_joints()
                ),
            ));
        }
        let c_out = self.out_channels();
        let mut acc: Option<Tensor<F>> = None;
        for k in 0..NUM_GROUPS {
            let a_k = Tensor::from_f64(&adj.group_matrix(k), &[n, n])?;
            let m_k = self.mask.value().index_select(0, &[k])?.reshape(&[n, n])?;
            let propagate = a_k.mul(&m_k)?.transpose(0, 1)?;
            let spread = x.matmul(&propagate)?.reshape(&[b, c, t * n])?;
            let w_k = self.weight.value().index_select(0, &[k])?.reshape(&[c_out, c])?;
            let y_k = w_k.matmul(&spread)?;
            acc = Some(match acc {
                Some(a) => a.add(&y_k)?,
                None => y_k,
            });
        }
        acc.expect("at least one group").reshape(&[b, c_out, t, n])
    }

    pub fn forward(&self, x: &Tensor<F>, adj: &PartitionedAdjacency, mode: Mode) -> Result<Tensor<F>> {
        let y = self.bn.forward(&self.aggregate(x, adj)?, mode)?;
        let y = match self.residual.apply(x)? {
            Some(r) => y.add(&r)?,
            None => y,
        };
        Ok(y.relu())
    }

    pub fn flops(&self, t: usize, n: usize) -> u64 {
        let (c_in, c_out) = (self.in_channels(), self.out_channels());
        let per_group = 2 * (c_in * t * n * n + c_in * c_out * t * n) as u64;
        NUM_GROUPS as u64 * per_group + self.residual.flops(t * n)
    }
}

impl<F: Float> Module<F> for GraphConvLayer<F> {
    fn parameters(&self) -> Vec<&Parameter<F>> {
        let mut p = vec![&self.weight, &self.mask];
        p.extend(self.bn.parameters());
        p.extend(self.residual.parameters());
        p
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter<F>> {
        let mut p = vec![&mut self.weight, &mut self.mask];
        p.extend(self.bn.parameters_mut());
        p.extend(self.residual.parameters_mut());
        p
    }

    fn batch_norms(&self) -> Vec<&BatchNorm<F>> {
        vec![&self.bn]
    }
}
