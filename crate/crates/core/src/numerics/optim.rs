use super::float::Float;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// A named trainable tensor with its momentum buffer.
pub struct Parameter<F: Float = f32> {
    name: String,
    value: Tensor<F>,
    momentum: Vec<F>,
}

impl<F: Float> Parameter<F> {
    pub fn new(name: impl Into<String>, data: Vec<F>, shape: &[usize]) -> Result<Self> {
        let value = Tensor::param(data, shape)?;
        let momentum = vec![F::zero(); value.numel()];
        Ok(Parameter {
            name: name.into(),
            value,
            momentum,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self) -> &Tensor<F> {
        &self.value
    }

    pub fn shape(&self) -> &[usize] {
        self.value.shape()
    }

    pub fn numel(&self) -> usize {
        self.value.numel()
    }

    pub fn grad(&self) -> Option<Vec<F>> {
        self.value.grad()
    }

    pub fn zero_grad(&self) {
        self.value.zero_grad();
    }

    pub fn momentum_buffer(&self) -> &[F] {
        &self.momentum
    }

    /// Replaces the value with a fresh leaf (dropping any stored gradient).
    pub fn set_data(&mut self, data: Vec<F>) -> Result<()> {
        self.value = Tensor::param(data, self.value.shape())?;
        Ok(())
    }

    pub fn set_momentum(&mut self, buf: Vec<F>) -> Result<()> {
        if buf.len() != self.momentum.len() {
            return Err(Error::shape(
                "set_momentum",
                format!("{} values for parameter `{}` of {}", buf.len(), self.name, self.momentum.len()),
            ));
        }
        self.momentum = buf;
        Ok(())
    }
}

impl<F: Float> std::fmt::Debug for Parameter<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Parameter({}, {:?})", self.name, self.shape())
    }
}

/// One SGD-with-momentum update: `buf = momentum * buf + grad`,
/// `value -= lr * buf`. Gradients are consumed; no parameter is touched
/// unless all of them have one.
pub fn sgd_step<F: Float>(params: &mut [&mut Parameter<F>], lr: F, momentum: F) -> Result<()> {
    let grads = params
        .iter()
        .map(|p| p.grad().ok_or_else(|| Error::MissingGrad(p.name.clone())))
        .collect::<Result<Vec<_>>>()?;
    for (p, g) in params.iter_mut().zip(grads) {
        for (b, g) in p.momentum.iter_mut().zip(&g) {
            *b = momentum * *b + *g;
        }
        let updated = p
            .value
            .data()
            .iter()
            .zip(&p.momentum)
            .map(|(&v, &b)| v - lr * b)
            .collect();
        p.set_data(updated)?;
    }
    Ok(())
}
