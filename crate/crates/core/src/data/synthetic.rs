use std::f64::consts::PI;

use ndarray::Array4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::SkeletonSequence;
use crate::error::{Error, Result};
use crate::modules::ChannelSemantics;

pub const MAX_SYNTH_CLASSES: usize = 16;
/// Oscillation frequency of class 0, in cycles per clip.
pub const FREQ_BASE: f64 = 1.0;
/// Frequency increment between consecutive classes, in cycles per clip.
pub const FREQ_STEP: f64 = 1.0;
const CHAIN_EXTENT: f64 = 0.3;

/// Parameters of a synthetic action dataset on a chain skeleton.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub num_classes: usize,
    pub per_class: usize,
    pub joints: usize,
    pub frames: usize,
    /// Person slots per clip; only the first is populated.
    pub persons: usize,
    /// Peak displacement of the oscillation, in normalized units.
    pub amplitude: f64,
    /// Standard deviation of the Gaussian coordinate noise.
    pub noise: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(num_classes: usize, per_class: usize, joints: usize, frames: usize, seed: u64) -> Self {
        SynthSpec {
            num_classes,
            per_class,
            joints,
            frames,
            persons: 1,
            amplitude: 0.3,
            noise: 0.005,
            seed,
        }
    }
}

pub fn class_frequency(class: usize) -> f64 {
    FREQ_BASE + class as f64 * FREQ_STEP
}

/// Generates `per_class` clips for each class, class-major.
///
/// Every joint of a class-`k` clip oscillates along direction `k·π/K` with
/// frequency [`class_frequency`]`(k)` and a phase lag growing along the chain;
/// the phase offset of each clip is random. Confidence is 1 for every joint.
/// Classes are distinguishable as long as `frames` exceeds twice the highest
/// frequency.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<Vec<SkeletonSequence>> {
    let SynthSpec {
        num_classes: k,
        per_class,
        joints: n,
        frames: t,
        persons,
        amplitude,
        noise,
        seed,
    } = *spec;
    if k == 0 || k > MAX_SYNTH_CLASSES {
        return Err(Error::Data(format!("synthetic classes must be in 1..={MAX_SYNTH_CLASSES}, got {k}")));
    }
    if per_class == 0 || n == 0 || t == 0 || persons == 0 {
        return Err(Error::Data(format!("empty synthetic dataset requested: {spec:?}")));
    }
    let noise = Normal::new(0.0, noise).map_err(|e| Error::Data(format!("noise: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let rest_y = |j: usize| {
        if n == 1 {
            0.0
        } else {
            -CHAIN_EXTENT + 2.0 * CHAIN_EXTENT * j as f64 / (n - 1) as f64
        }
    };
    let mut clips = Vec::with_capacity(k * per_class);
    for class in 0..k {
        let freq = class_frequency(class);
        let (dir_y, dir_x) = (PI * class as f64 / k as f64).sin_cos();
        let lag = PI * (class + 1) as f64 / (2 * k) as f64;
        for s in 0..per_class {
            let phase = rng.random_range(0.0..2.0 * PI);
            let mut coords = Array4::<f32>::zeros((persons, 3, t, n));
            for f in 0..t {
                for j in 0..n {
                    let a = amplitude * (2.0 * PI * freq * f as f64 / t as f64 + phase + lag * j as f64).sin();
                    coords[[0, 0, f, j]] = (a * dir_x + noise.sample(&mut rng)) as f32;
                    coords[[0, 1, f, j]] = (rest_y(j) + a * dir_y + noise.sample(&mut rng)) as f32;
                    coords[[0, 2, f, j]] = 1.0;
                }
            }
            clips.push(SkeletonSequence {
                coords,
                semantics: ChannelSemantics::XyConf,
                label: Some(class),
                id: format!("synth_c{class:02}_s{s:03}"),
            });
        }
    }
    Ok(clips)
}
