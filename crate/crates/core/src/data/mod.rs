//! Skeleton clips: the Kinetics-skeleton JSON format, manifests, length
//! fitting, augmentation and a synthetic action generator.

mod kinetics;
mod synthetic;
mod transform;

pub use kinetics::{
    load_kinetics_clip, parse_kinetics_clip, read_manifest, write_dataset, write_kinetics_clip, ClipFormat,
    ManifestEntry,
};
pub use synthetic::{class_frequency, generate_synthetic, SynthSpec, FREQ_BASE, FREQ_STEP, MAX_SYNTH_CLASSES};
pub use transform::{augment, fit_length, fit_persons, similarity_transform, AugmentParams};

use ndarray::Array4;

use crate::error::{Error, Result};
use crate::modules::ChannelSemantics;
use crate::numerics::{Float, Tensor};

/// One clip: `(M, C, T_raw, N)` coordinates.
///
/// For `xy_conf` data a missing joint (or absent person) is all zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSequence {
    pub coords: Array4<f32>,
    pub semantics: ChannelSemantics,
    pub label: Option<usize>,
    pub id: String,
}

impl SkeletonSequence {
    pub fn persons(&self) -> usize {
        self.coords.shape()[0]
    }

    pub fn frames(&self) -> usize {
        self.coords.shape()[2]
    }

    pub fn joints(&self) -> usize {
        self.coords.shape()[3]
    }

    pub fn label_or_err(&self) -> Result<usize> {
        self.label
            .ok_or_else(|| Error::Data(format!("clip `{}` has no label", self.id)))
    }
}

/// Stacks equally shaped `(M, C, T, N)` clips into a `(B, M, C, T, N)` tensor.
pub fn stack_batch<F: Float>(clips: &[Array4<f32>]) -> Result<Tensor<F>> {
    let first = clips
        .first()
        .ok_or_else(|| Error::Data("cannot build an empty batch".into()))?;
    let dims = first.shape().to_vec();
    let mut data = Vec::with_capacity(clips.len() * first.len());
    for c in clips {
        if c.shape() != dims.as_slice() {
            return Err(Error::Data(format!(
                "clip shape {:?} differs from batch shape {dims:?}",
                c.shape()
            )));
        }
        data.extend(c.iter().map(|&v| F::of(v as f64)));
    }
    let mut shape = vec![clips.len()];
    shape.extend(dims);
    Tensor::from_vec(data, &shape)
}

/// Copies one `(M, C, T, N)` slice of a `(B, M, C, T, N)` tensor out as
/// `f32` coordinates.
pub fn unstack_clip<F: Float>(batch: &Tensor<F>, index: usize) -> Result<Array4<f32>> {
    let [b, m, c, t, n] = match *batch.shape() {
        [b, m, c, t, n] => [b, m, c, t, n],
        _ => return Err(Error::shape("unstack_clip", format!("expected rank 5, got {:?}", batch.shape()))),
    };
    if index >= b {
        return Err(Error::shape("unstack_clip", format!("index {index} out of {b} clips")));
    }
    let len = m * c * t * n;
    let values = batch.data()[index * len..(index + 1) * len]
        .iter()
        .map(|&v| Float::to_f64(v) as f32)
        .collect();
    Ok(Array4::from_shape_vec((m, c, t, n), values).expect("length matches"))
}
