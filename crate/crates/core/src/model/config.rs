use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::{Topology, DEFAULT_ALPHA};
use crate::modules::{ChannelSemantics, FusionMode, FusionWidths, TEMPORAL_REDUCTION};

/// Splits flat `key = value` text into pairs. Blank lines and lines starting
/// with `#` are skipped.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got `{line}`", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Parses one `key=value` override.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{s}` is not key=value")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

pub(crate) fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

/// Architecture and input description.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub topology: Topology,
    pub num_classes: usize,
    /// Input frames per clip.
    pub frames: usize,
    /// Person streams per clip.
    pub persons: usize,
    pub semantics: ChannelSemantics,
    pub prm_hidden: usize,
    pub widths: FusionWidths,
    pub tam_reduction: usize,
    pub enable_prm: bool,
    pub enable_tam: bool,
    pub fusion_mode: FusionMode,
    pub alpha: f64,
    /// Seed for parameter initialization.
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::kinetics()
    }
}

const KEYS: [&str; 16] = [
    "topology",
    "num_classes",
    "frames",
    "persons",
    "semantics",
    "prm_hidden",
    "pos_widths",
    "mot_width",
    "tconv1_width",
    "tconv2_width",
    "tam_reduction",
    "enable_prm",
    "enable_tam",
    "fusion_mode",
    "alpha",
    "seed",
];

impl ModelConfig {
    /// 18-joint 2-D skeletons, 400 classes, 300 frames, two persons.
    pub fn kinetics() -> Self {
        ModelConfig {
            topology: Topology::Kinetics18,
            num_classes: 400,
            frames: 300,
            persons: 2,
            semantics: ChannelSemantics::XyConf,
            prm_hidden: 64,
            widths: FusionWidths::default(),
            tam_reduction: 4,
            enable_prm: true,
            enable_tam: true,
            fusion_mode: FusionMode::ParallelPm,
            alpha: DEFAULT_ALPHA,
            seed: 0,
        }
    }

    /// 25-joint 3-D skeletons, 60 classes.
    pub fn ntu() -> Self {
        ModelConfig {
            topology: Topology::Ntu25,
            num_classes: 60,
            semantics: ChannelSemantics::Xyz,
            ..ModelConfig::kinetics()
        }
    }

    /// Small widths for desk-scale runs on chain skeletons.
    pub fn toy(num_joints: usize, frames: usize, num_classes: usize) -> Self {
        ModelConfig {
            topology: Topology::Chain(num_joints),
            num_classes,
            frames,
            persons: 1,
            prm_hidden: 4,
            widths: FusionWidths {
                pos: [4, 4, 4],
                mot: 4,
                tconv1: 8,
                tconv2: 8,
            },
            tam_reduction: 4,
            ..ModelConfig::kinetics()
        }
    }

    /// Names accepted by [`ModelConfig::set`].
    pub fn keys() -> &'static [&'static str] {
        &KEYS
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "topology" => self.topology = value.parse()?,
            "num_classes" => self.num_classes = parse_value(key, value)?,
            "frames" => self.frames = parse_value(key, value)?,
            "persons" => self.persons = parse_value(key, value)?,
            "semantics" => self.semantics = value.parse()?,
            "prm_hidden" => self.prm_hidden = parse_value(key, value)?,
            "pos_widths" => {
                let w: Vec<usize> = value
                    .split(',')
                    .map(|s| parse_value(key, s.trim()))
                    .collect::<Result<_>>()?;
                self.widths.pos = w
                    .try_into()
                    .map_err(|_| Error::Config(format!("`{key}` needs three comma-separated widths")))?;
            }
            "mot_width" => self.widths.mot = parse_value(key, value)?,
            "tconv1_width" => self.widths.tconv1 = parse_value(key, value)?,
            "tconv2_width" => self.widths.tconv2 = parse_value(key, value)?,
            "tam_reduction" => self.tam_reduction = parse_value(key, value)?,
            "enable_prm" => self.enable_prm = parse_value(key, value)?,
            "enable_tam" => self.enable_tam = parse_value(key, value)?,
            "fusion_mode" => self.fusion_mode = value.parse()?,
            "alpha" => self.alpha = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            _ => return Err(Error::Config(format!("unknown model key `{key}`"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let w = &self.widths;
        Some(match key {
            "topology" => self.topology.to_string(),
            "num_classes" => self.num_classes.to_string(),
            "frames" => self.frames.to_string(),
            "persons" => self.persons.to_string(),
            "semantics" => self.semantics.name().to_string(),
            "prm_hidden" => self.prm_hidden.to_string(),
            "pos_widths" => format!("{},{},{}", w.pos[0], w.pos[1], w.pos[2]),
            "mot_width" => w.mot.to_string(),
            "tconv1_width" => w.tconv1.to_string(),
            "tconv2_width" => w.tconv2.to_string(),
            "tam_reduction" => self.tam_reduction.to_string(),
            "enable_prm" => self.enable_prm.to_string(),
            "enable_tam" => self.enable_tam.to_string(),
            "fusion_mode" => self.fusion_mode.to_string(),
            "alpha" => self.alpha.to_string(),
            "seed" => self.seed.to_string(),
            _ => return None,
        })
    }

    /// Every field as `key = value` lines, readable by [`ModelConfig::from_kv`].
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        for key in KEYS {
            let _ = writeln!(s, "{key} = {}", self.get(key).expect("known key"));
        }
        s
    }

    /// Starts from the Kinetics defaults and applies every pair in `text`.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = ModelConfig::kinetics();
        for (k, v) in parse_kv(text)? {
            cfg.set(k.strip_prefix("model.").unwrap_or(&k), &v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(Error::Config(msg));
        if self.frames == 0 || self.frames % TEMPORAL_REDUCTION != 0 {
            return err(format!(
                "frames = {} must be a positive multiple of {TEMPORAL_REDUCTION}",
                self.frames
            ));
        }
        if self.num_classes == 0 {
            return err("num_classes must be positive".into());
        }
        if self.persons == 0 {
            return err("persons must be positive".into());
        }
        let w = &self.widths;
        if w.pos.contains(&0) || w.mot == 0 || w.tconv1 == 0 || w.tconv2 == 0 {
            return err(format!("channel widths must be positive: {w:?}"));
        }
        if self.enable_prm && self.prm_hidden == 0 {
            return err("prm_hidden must be positive".into());
        }
        if self.enable_tam && (self.tam_reduction == 0 || w.fused() % self.tam_reduction != 0) {
            return err(format!(
                "fused width {} is not divisible by tam_reduction {}",
                w.fused(),
                self.tam_reduction
            ));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return err(format!("alpha = {} must be positive", self.alpha));
        }
        Ok(())
    }
}
