//! Plain-text `key = value` training configuration.
//!
//! Keys are the [`TrainConfig`] field names. Blank lines and `#` comments are
//! ignored; omitted keys keep their defaults.

use std::collections::HashSet;
use std::str::FromStr;

use serde::de::DeserializeOwned;

use super::{TrainConfig, TrainError};

fn number<T: FromStr>(key: &str, value: &str) -> Result<T, TrainError> {
    value.parse().map_err(|_| TrainError::Config(format!("{key}: cannot parse {value:?}")))
}

fn keyword<T: DeserializeOwned>(key: &str, value: &str) -> Result<T, TrainError> {
    serde_json::from_value(serde_json::Value::String(value.to_string()))
        .map_err(|_| TrainError::Config(format!("{key}: unknown value {value:?}")))
}

fn name<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(str::to_string)).expect("unit variant")
}

impl TrainConfig {
    pub fn parse(text: &str) -> Result<Self, TrainError> {
        let mut cfg = TrainConfig::default();
        let mut seen = HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| TrainError::Config(format!("line {}: expected key = value", n + 1)))?;
            if !seen.insert(key.to_string()) {
                return Err(TrainError::Config(format!("line {}: duplicate key {key}", n + 1)));
            }
            match key {
                "optimizer" => cfg.optimizer = keyword(key, value)?,
                "learning_rate" => cfg.learning_rate = number(key, value)?,
                "momentum" => cfg.momentum = number(key, value)?,
                "beta2" => cfg.beta2 = number(key, value)?,
                "batch_size" => cfg.batch_size = number(key, value)?,
                "max_epochs" => cfg.max_epochs = number(key, value)?,
                "decay_rate" => cfg.decay_rate = number(key, value)?,
                "plateau_patience" => cfg.plateau_patience = number(key, value)?,
                "plateau_factor" => cfg.plateau_factor = number(key, value)?,
                "early_stop_patience" => cfg.early_stop_patience = number(key, value)?,
                "loss" => cfg.loss = keyword(key, value)?,
                "kappa_under" => cfg.kappa_under = number(key, value)?,
                "kappa_over" => cfg.kappa_over = number(key, value)?,
                "seed" => cfg.seed = number(key, value)?,
                "projection" => cfg.projection = keyword(key, value)?,
                _ => return Err(TrainError::Config(format!("line {}: unknown key {key}", n + 1))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        format!(
            "optimizer = {}\nlearning_rate = {:e}\nmomentum = {:e}\nbeta2 = {:e}\nbatch_size = {}\nmax_epochs = {}\n\
             decay_rate = {:e}\nplateau_patience = {}\nplateau_factor = {:e}\nearly_stop_patience = {}\nloss = {}\n\
             kappa_under = {:e}\nkappa_over = {:e}\nseed = {}\nprojection = {}\n",
            name(&self.optimizer),
            self.learning_rate,
            self.momentum,
            self.beta2,
            self.batch_size,
            self.max_epochs,
            self.decay_rate,
            self.plateau_patience,
            self.plateau_factor,
            self.early_stop_patience,
            name(&self.loss),
            self.kappa_under,
            self.kappa_over,
            self.seed,
            name(&self.projection),
        )
    }
}
