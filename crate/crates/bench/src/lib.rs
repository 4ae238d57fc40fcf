//! Deterministic inputs shared by the benchmarks.

use prgcn_core::{Result, Tensor};

/// Smooth pseudo-random values of the given shape; no RNG so runs compare.
pub fn wave(shape: &[usize]) -> Result<Tensor<f32>> {
    let len: usize = shape.iter().product();
    let data: Vec<f64> = (0..len).map(|i| (i as f64 * 0.37).sin() * 0.5).collect();
    Tensor::from_f64(&data, shape)
}
