use ndarray::{s, Array4, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::layers::Mode;
use crate::modules::ChannelSemantics;

/// Crops or loop-pads `(M, C, T_raw, N)` coordinates to exactly `t` frames.
///
/// Longer clips are cropped to a random window in train mode and to the
/// centered window in eval mode. Shorter clips repeat with period `T_raw`.
pub fn fit_length(x: &Array4<f32>, t: usize, mode: Mode, rng: &mut impl Rng) -> Array4<f32> {
    let t_raw = x.shape()[2];
    assert!(t_raw >= 1 && t >= 1, "fit_length needs at least one frame");
    if t_raw >= t {
        let start = match mode {
            Mode::Train => rng.random_range(0..=t_raw - t),
            Mode::Eval => (t_raw - t) / 2,
        };
        return x.slice(s![.., .., start..start + t, ..]).to_owned();
    }
    let frames: Vec<usize> = (0..t).map(|i| i % t_raw).collect();
    x.select(Axis(2), &frames)
}

/// Keeps the first `persons` streams, padding with all-zero persons.
pub fn fit_persons(x: &Array4<f32>, persons: usize) -> Array4<f32> {
    let (m, c, t, n) = x.dim();
    let mut out = Array4::zeros((persons, c, t, n));
    let keep = m.min(persons);
    out.slice_mut(s![..keep, .., .., ..]).assign(&x.slice(s![..keep, .., .., ..]));
    out
}

/// Ranges of the random similarity transform used for augmentation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentParams {
    /// Rotation angle drawn from `[-rotation_deg, rotation_deg]`.
    pub rotation_deg: f64,
    /// Scale factor drawn from `[1 - scale, 1 + scale]`.
    pub scale: f64,
    /// Per-axis offset drawn from `[-translation, translation]`.
    pub translation: f64,
}

impl AugmentParams {
    pub const NONE: AugmentParams = AugmentParams {
        rotation_deg: 0.0,
        scale: 0.0,
        translation: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !(ok(self.rotation_deg) && ok(self.scale) && ok(self.translation)) || self.scale >= 1.0 {
            return Err(Error::Config(format!("invalid augmentation ranges {self:?}")));
        }
        Ok(())
    }
}

impl Default for AugmentParams {
    fn default() -> Self {
        AugmentParams {
            rotation_deg: 10.0,
            scale: 0.1,
            translation: 0.25,
        }
    }
}

fn symmetric(rng: &mut impl Rng, half: f64) -> f64 {
    if half > 0.0 {
        rng.random_range(-half..=half)
    } else {
        0.0
    }
}

/// Applies one random rotation, scale and translation to the coordinate
/// channels of every present joint in a `(M, C, T, N)` clip.
///
/// 2-D clips rotate in the image plane; 3-D clips rotate about the vertical
/// (y) axis. Confidence values and all-zero (missing) joints are untouched.
pub fn augment(x: &Array4<f32>, semantics: ChannelSemantics, params: &AugmentParams, rng: &mut impl Rng) -> Array4<f32> {
    let theta = symmetric(rng, params.rotation_deg).to_radians();
    let scale = 1.0 + symmetric(rng, params.scale);
    let shift: Vec<f64> = (0..semantics.coord_channels())
        .map(|_| symmetric(rng, params.translation))
        .collect();
    similarity_transform(x, semantics, theta, scale, &shift)
}

/// `scale * R(theta) * p + shift` on every present joint `p`.
pub fn similarity_transform(
    x: &Array4<f32>,
    semantics: ChannelSemantics,
    theta: f64,
    scale: f64,
    shift: &[f64],
) -> Array4<f32> {
    let d = semantics.coord_channels();
    assert_eq!(shift.len(), d, "one offset per coordinate channel");
    let (sin, cos) = theta.sin_cos();
    let (a, b) = match semantics {
        ChannelSemantics::XyConf => (0, 1),
        ChannelSemantics::Xyz => (0, 2),
    };

    let mut out = x.clone();
    let (m, _, t, n) = x.dim();
    for p in 0..m {
        for f in 0..t {
            for j in 0..n {
                let v = x.slice(s![p, .., f, j]);
                if v.iter().all(|&c| c == 0.0) {
                    continue;
                }
                let mut coords: Vec<f64> = (0..d).map(|c| v[c] as f64).collect();
                let (u, w) = (coords[a], coords[b]);
                (coords[a], coords[b]) = match semantics {
                    ChannelSemantics::XyConf => (cos * u - sin * w, sin * u + cos * w),
                    ChannelSemantics::Xyz => (cos * u + sin * w, -sin * u + cos * w),
                };
                for (c, value) in coords.iter().enumerate() {
                    out[[p, c, f, j]] = (scale * value + shift[c]) as f32;
                }
            }
        }
    }
    out
}
