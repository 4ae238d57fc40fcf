use std::sync::Mutex;

use super::{check_channels, expect_4d, Mode, Module};
use crate::error::Result;
use crate::numerics::{no_grad, Float, Parameter, Tensor};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone)]
struct Running<F> {
    mean: Vec<F>,
    var: Vec<F>,
}

/// Per-channel batch normalization over the batch, frame and joint axes.
#[derive(Debug)]
pub struct BatchNorm<F: Float = f32> {
    name: String,
    gamma: Parameter<F>,
    beta: Parameter<F>,
    running: Mutex<Running<F>>,
    eps: f64,
    momentum: f64,
}

impl<F: Float> BatchNorm<F> {
    pub fn new(name: &str, channels: usize) -> Result<Self> {
        Ok(BatchNorm {
            name: name.to_string(),
            gamma: Parameter::new(format!("{name}.gamma"), vec![F::one(); channels], &[channels])?,
            beta: Parameter::new(format!("{name}.beta"), vec![F::zero(); channels], &[channels])?,
            running: Mutex::new(Running {
                mean: vec![F::zero(); channels],
                var: vec![F::one(); channels],
            }),
            eps: BN_EPS,
            momentum: BN_MOMENTUM,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn channels(&self) -> usize {
        self.gamma.numel()
    }

    pub fn gamma(&self) -> &Parameter<F> {
        &self.gamma
    }

    pub fn beta(&self) -> &Parameter<F> {
        &self.beta
    }

    /// `(running_mean, running_var)`.
    pub fn running_stats(&self) -> (Vec<F>, Vec<F>) {
        let r = self.running.lock().unwrap();
        (r.mean.clone(), r.var.clone())
    }

    pub fn set_running_stats(&self, mean: Vec<F>, var: Vec<F>) {
        assert_eq!(mean.len(), self.channels());
        assert_eq!(var.len(), self.channels());
        *self.running.lock().unwrap() = Running { mean, var };
    }

    pub fn forward(&self, x: &Tensor<F>, mode: Mode) -> Result<Tensor<F>> {
        let [b, c, t, n] = expect_4d("batch_norm", x)?;
        check_channels("batch_norm", c, self.channels())?;
        let per_channel = [1, c, 1, 1];
        let gamma = self.gamma.value().reshape(&per_channel)?;
        let beta = self.beta.value().reshape(&per_channel)?;
        let eps = F::of(self.eps);

        let normalized = match mode {
            Mode::Train => {
                let mean = channel_mean(x)?;
                let centered = x.sub(&mean)?;
                let var = channel_mean(&centered.square())?;
                let count = (b * t * n) as f64;
                let unbias = if count > 1.0 { count / (count - 1.0) } else { 1.0 };
                let m = F::of(self.momentum);
                no_grad(|| {
                    let mut r = self.running.lock().unwrap();
                    for ch in 0..c {
                        r.mean[ch] = (F::one() - m) * r.mean[ch] + m * mean.data()[ch];
                        r.var[ch] = (F::one() - m) * r.var[ch] + m * var.data()[ch] * F::of(unbias);
                    }
                });
                centered.div(&var.add_scalar(eps).sqrt())?
            }
            Mode::Eval => {
                let (mean, var) = self.running_stats();
                let mean = Tensor::from_vec(mean, &per_channel)?;
                let inv_std: Vec<F> = var.iter().map(|&v| F::one() / (v + eps).sqrt()).collect();
                x.sub(&mean)?.mul(&Tensor::from_vec(inv_std, &per_channel)?)?
            }
        };
        normalized.mul(&gamma)?.add(&beta)
    }
}

fn channel_mean<F: Float>(x: &Tensor<F>) -> Result<Tensor<F>> {
    x.mean_axis(3, true)?.mean_axis(2, true)?.mean_axis(0, true)
}

impl<F: Float> Module<F> for BatchNorm<F> {
    fn parameters(&self) -> Vec<&Parameter<F>> {
        vec![&self.gamma, &self.beta]
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter<F>> {
        vec![&mut self.gamma, &mut self.beta]
    }

    fn batch_norms(&self) -> Vec<&BatchNorm<F>> {
        vec![self]
    }
}
