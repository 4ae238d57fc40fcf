use rand::Rng;

use super::{check_channels, expect_4d, he_normal, BatchNorm, Mode, Module, Residual, ResidualKind};
use crate::error::{Error, Result};
use crate::numerics::{Float, Parameter, Tensor};

/// Temporal kernel width.
pub const KERNEL_T: usize = 3;

const SUPPORTED_STRIDES: [usize; 3] = [1, 2, 3];

/// Applies a `(C_out, C_in)` weight at every (frame, joint) position.
pub fn pointwise_conv<F: Float>(x: &Tensor<F>, weight: &Tensor<F>) -> Result<Tensor<F>> {
    let [b, c, t, n] = expect_4d("pointwise_conv", x)?;
    match *weight.shape() {
        [c_out, c_in] if c_in == c => {
            let y = weight.matmul(&x.reshape(&[b, c, t * n])?)?;
            y.reshape(&[b, c_out, t, n])
        }
        _ => Err(Error::shape(
            "pointwise_conv",
            format!("weight {:?} does not map {c} channels", weight.shape()),
        )),
    }
}

/// 1x1 convolution without bias.
#[derive(Debug)]
pub struct PointwiseConv<F: Float = f32> {
    weight: Parameter<F>,
}

impl<F: Float> PointwiseConv<F> {
    pub fn new(name: &str, c_in: usize, c_out: usize, rng: &mut impl Rng) -> Result<Self> {
        let w = he_normal(rng, c_in, c_out * c_in);
        Ok(PointwiseConv {
            weight: Parameter::new(format!("{name}.weight"), w, &[c_out, c_in])?,
        })
    }

    pub fn zeros(name: &str, c_in: usize, c_out: usize) -> Result<Self> {
        Ok(PointwiseConv {
            weight: Parameter::new(format!("{name}.weight"), vec![F::zero(); c_out * c_in], &[c_out, c_in])?,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn weight(&self) -> &Parameter<F> {
        &self.weight
    }

    pub fn weight_mut(&mut self) -> &mut Parameter<F> {
        &mut self.weight
    }

    pub fn forward(&self, x: &Tensor<F>) -> Result<Tensor<F>> {
        pointwise_conv(x, self.weight.value())
    }

    pub fn flops(&self, t: usize, n: usize) -> u64 {
        2 * (self.in_channels() * self.out_channels() * t * n) as u64
    }
}

impl<F: Float> Module<F> for PointwiseConv<F> {
    fn parameters(&self) -> Vec<&Parameter<F>> {
        vec![&self.weight]
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter<F>> {
        vec![&mut self.weight]
    }

    fn batch_norms(&self) -> Vec<&BatchNorm<F>> {
        Vec::new()
    }
}

/// Frames kept by a strided temporal layer: `ceil(t / stride)`.
pub fn strided_len(t: usize, stride: usize) -> usize {
    t.div_ceil(stride)
}

/// `K_t x 1` convolution along time with symmetric zero padding, followed by
/// batch norm, the skip path and ReLU.
///
/// The skip path subsamples frames with the layer's stride; it is the
/// identity when channel counts match and a pointwise projection otherwise.
#[derive(Debug)]
pub struct TemporalConvLayer<F: Float = f32> {
    kernel: Parameter<F>,
    stride: usize,
    bn: BatchNorm<F>,
    residual: Residual<F>,
}

impl<F: Float> TemporalConvLayer<F> {
    pub fn new(
        name: &str,
        c_in: usize,
        c_out: usize,
        stride: usize,
        residual: ResidualKind,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if !SUPPORTED_STRIDES.contains(&stride) {
            return Err(Error::Config(format!(
                "{name}: temporal stride {stride} unsupported (expected one of {SUPPORTED_STRIDES:?})"
            )));
        }
        let k = he_normal(rng, c_in * KERNEL_T, c_out * c_in * KERNEL_T);
        Ok(TemporalConvLayer {
            kernel: Parameter::new(format!("{name}.kernel"), k, &[c_out, c_in, KERNEL_T])?,
            stride,
            bn: BatchNorm::new(&format!("{name}.bn"), c_out)?,
            residual: Residual::build(residual, name, c_in, c_out, rng)?,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.kernel.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.kernel.shape()[0]
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn kernel(&self) -> &Parameter<F> {
        &self.kernel
    }

    pub fn kernel_mut(&mut self) -> &mut Parameter<F> {
        &mut self.kernel
    }

    pub fn residual(&self) -> &Residual<F> {
        &self.residual
    }

    /// The bare convolution, before batch norm, skip and activation.
    pub fn convolve(&self, x: &Tensor<F>) -> Result<Tensor<F>> {
        let [_, c, _, _] = expect_4d("temporal_conv", x)?;
        check_channels("temporal_conv", c, self.in_channels())?;
        x.conv_time(self.kernel.value(), self.stride, (KERNEL_T - 1) / 2)
    }

    pub fn forward(&self, x: &Tensor<F>, mode: Mode) -> Result<Tensor<F>> {
        let y = self.bn.forward(&self.convolve(x)?, mode)?;
        let t = x.shape()[2];
        let skip_input = if self.stride > 1 {
            let frames: Vec<usize> = (0..t).step_by(self.stride).collect();
            x.index_select(2, &frames)?
        } else {
            x.clone()
        };
        let y = match self.residual.apply(&skip_input)? {
            Some(r) => y.add(&r)?,
            None => y,
        };
        Ok(y.relu())
    }

    pub fn output_frames(&self, t: usize) -> usize {
        strided_len(t, self.stride)
    }

    pub fn flops(&self, t: usize, n: usize) -> u64 {
        let positions = self.output_frames(t) * n;
        let conv = 2 * (self.in_channels() * self.out_channels() * KERNEL_T * positions) as u64;
        conv + self.residual.flops(positions)
    }
}

impl<F: Float> Module<F> for TemporalConvLayer<F> {
    fn parameters(&self) -> Vec<&Parameter<F>> {
        let mut p = vec![&self.kernel];
        p.extend(self.bn.parameters());
        p.extend(self.residual.parameters());
        p
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter<F>> {
        let mut p = vec![&mut self.kernel];
        p.extend(self.bn.parameters_mut());
        p.extend(self.residual.parameters_mut());
        p
    }

    fn batch_norms(&self) -> Vec<&BatchNorm<F>> {
        vec![&self.bn]
    }
}

/// Maximum over disjoint windows of `window` frames.
pub fn max_pool_time<F: Float>(x: &Tensor<F>, window: usize) -> Result<Tensor<F>> {
    let [b, c, t, n] = expect_4d("max_pool_time", x)?;
    if window == 0 || t % window != 0 {
        return Err(Error::shape(
            "max_pool_time",
            format!("{t} frames are not divisible into windows of {window}"),
        ));
    }
    if window == 1 {
        return Ok(x.clone());
    }
    x.reshape(&[b, c, t / window, window, n])?.max_axis(3, false)
}
