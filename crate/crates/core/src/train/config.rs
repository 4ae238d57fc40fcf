use std::fmt::Write as _;

use crate::data::AugmentParams;
use crate::error::{Error, Result};
use crate::model::{parse_kv, parse_value, ModelConfig};

/// Optimizer, schedule and batching settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub base_lr: f64,
    pub momentum: f64,
    pub decay_factor: f64,
    /// Epochs between decays.
    pub decay_period: usize,
    /// Leading epochs trained at `base_lr`.
    pub warm_period: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub augment: AugmentParams,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            base_lr: 0.01,
            momentum: 0.9,
            decay_factor: 0.1,
            decay_period: 10,
            warm_period: 10,
            epochs: 50,
            batch_size: 16,
            seed: 0,
            augment: AugmentParams::default(),
        }
    }
}

const KEYS: [&str; 11] = [
    "lr",
    "momentum",
    "decay_factor",
    "decay_period",
    "warm_period",
    "epochs",
    "batch_size",
    "seed",
    "rotation_deg",
    "scale",
    "translation",
];

impl TrainConfig {
    pub fn keys() -> &'static [&'static str] {
        &KEYS
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "lr" | "base_lr" => self.base_lr = parse_value(key, value)?,
            "momentum" => self.momentum = parse_value(key, value)?,
            "decay_factor" => self.decay_factor = parse_value(key, value)?,
            "decay_period" => self.decay_period = parse_value(key, value)?,
            "warm_period" => self.warm_period = parse_value(key, value)?,
            "epochs" => self.epochs = parse_value(key, value)?,
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "rotation_deg" => self.augment.rotation_deg = parse_value(key, value)?,
            "scale" => self.augment.scale = parse_value(key, value)?,
            "translation" => self.augment.translation = parse_value(key, value)?,
            _ => return Err(Error::Config(format!("unknown train key `{key}`"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "lr" => self.base_lr.to_string(),
            "momentum" => self.momentum.to_string(),
            "decay_factor" => self.decay_factor.to_string(),
            "decay_period" => self.decay_period.to_string(),
            "warm_period" => self.warm_period.to_string(),
            "epochs" => self.epochs.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "seed" => self.seed.to_string(),
            "rotation_deg" => self.augment.rotation_deg.to_string(),
            "scale" => self.augment.scale.to_string(),
            "translation" => self.augment.translation.to_string(),
            _ => return None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_lr.is_finite() && self.base_lr > 0.0) {
            return Err(Error::Config(format!("lr = {} must be positive", self.base_lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum = {} must be in [0, 1)", self.momentum)));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return Err(Error::Config(format!("decay_factor = {} must be in (0, 1]", self.decay_factor)));
        }
        if self.decay_period == 0 || self.batch_size == 0 {
            return Err(Error::Config("decay_period and batch_size must be positive".into()));
        }
        self.augment.validate()
    }
}

/// Model and training settings read from one flat `key = value` file.
///
/// Keys may be qualified as `model.<key>` or `train.<key>`. A bare key is
/// looked up among the model keys first, then the train keys; bare `seed`
/// sets both seeds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if let Some(k) = key.strip_prefix("model.") {
            return self.model.set(k, value);
        }
        if let Some(k) = key.strip_prefix("train.") {
            return self.train.set(k, value);
        }
        if key == "seed" {
            self.model.set(key, value)?;
            return self.train.set(key, value);
        }
        if ModelConfig::keys().contains(&key) {
            self.model.set(key, value)
        } else {
            self.train.set(key, value)
        }
    }

    pub fn apply_kv(&mut self, text: &str) -> Result<()> {
        for (k, v) in parse_kv(text)? {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    /// Kinetics model defaults and default training settings, overridden by
    /// `text`.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_kv(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        for key in ModelConfig::keys() {
            let _ = writeln!(s, "model.{key} = {}", self.model.get(key).expect("known key"));
        }
        for key in TrainConfig::keys() {
            let _ = writeln!(s, "train.{key} = {}", self.train.get(key).expect("known key"));
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()
    }
}
