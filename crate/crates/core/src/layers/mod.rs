//! Reusable layers: graph convolution, temporal convolution, pointwise
//! convolution, batch normalization and temporal max pooling.
//!
//! All layers consume and produce `(B, C, T, N)` feature maps: batch,
//! channels, frames, joints.

mod batchnorm;
mod graph_conv;
mod temporal;

pub use batchnorm::BatchNorm;
pub use graph_conv::GraphConvLayer;
pub use temporal::{max_pool_time, pointwise_conv, PointwiseConv, TemporalConvLayer, KERNEL_T};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::numerics::{Float, Parameter, Tensor};

/// Whether batch norm uses batch statistics (and updates its running
/// estimates) or the stored running estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Something holding named parameters.
pub trait Module<F: Float> {
    fn parameters(&self) -> Vec<&Parameter<F>>;

    fn parameters_mut(&mut self) -> Vec<&mut Parameter<F>>;

    fn batch_norms(&self) -> Vec<&BatchNorm<F>>;

    fn num_params(&self) -> usize {
        self.parameters().iter().map(|p| p.numel()).sum()
    }
}

/// Skip path of a layer.
#[derive(Debug)]
pub enum Residual<F: Float> {
    None,
    Identity,
    Project(PointwiseConv<F>),
}

/// How a layer picks its skip path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidualKind {
    /// Identity when channel counts match, pointwise projection otherwise.
    Auto,
    None,
}

impl<F: Float> Residual<F> {
    fn build(kind: ResidualKind, name: &str, c_in: usize, c_out: usize, rng: &mut impl Rng) -> Result<Self> {
        Ok(match kind {
            ResidualKind::None => Residual::None,
            ResidualKind::Auto if c_in == c_out => Residual::Identity,
            ResidualKind::Auto => Residual::Project(PointwiseConv::new(
                &format!("{name}.residual"),
                c_in,
                c_out,
                rng,
            )?),
        })
    }

    fn apply(&self, x: &Tensor<F>) -> Result<Option<Tensor<F>>> {
        match self {
            Residual::None => Ok(None),
            Residual::Identity => Ok(Some(x.clone())),
            Residual::Project(p) => p.forward(x).map(Some),
        }
    }

    fn parameters(&self) -> Vec<&Parameter<F>> {
        match self {
            Residual::Project(p) => p.parameters(),
            _ => Vec::new(),
        }
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter<F>> {
        match self {
            Residual::Project(p) => p.parameters_mut(),
            _ => Vec::new(),
        }
    }

    fn flops(&self, positions: usize) -> u64 {
        match self {
            Residual::Project(p) => p.flops(positions, 1),
            _ => 0,
        }
    }
}

/// He-normal initialization for a layer with `fan_in` inputs.
pub(crate) fn he_normal<F: Float>(rng: &mut impl Rng, fan_in: usize, count: usize) -> Vec<F> {
    let std = (2.0 / fan_in.max(1) as f64).sqrt();
    let dist = Normal::new(0.0, std).expect("finite std");
    (0..count).map(|_| F::of(dist.sample(rng))).collect()
}

pub fn expect_4d<F: Float>(op: &'static str, x: &Tensor<F>) -> Result<[usize; 4]> {
    match *x.shape() {
        [b, c, t, n] => Ok([b, c, t, n]),
        _ => Err(Error::shape(op, format!("expected (B, C, T, N), got {:?}", x.shape()))),
    }
}

pub(crate) fn check_channels(op: &'static str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::shape(op, format!("channel axis has {got}, layer expects {want}")));
    }
    Ok(())
}
