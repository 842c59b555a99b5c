//! Flat `key=value` configuration shared by the simulator and the pipeline.
//!
//! Blank lines and `#` comments are ignored. Every key is also a CLI flag of
//! the same name; flags override the file.

use std::collections::BTreeMap;
use std::str::FromStr;

use qsync_core::channel::{ChannelConfig, ClockPair};
use qsync_core::pipeline::SyncConfig;
use qsync_core::sync_string::{StringError, StringParams};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {0}: expected key=value")]
    Syntax(usize),
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("bad value for {key}: {value:?}")]
    BadValue { key: String, value: String },
    #[error(transparent)]
    String(#[from] StringError),
}

/// Recognized keys and their accepted spellings.
pub const KEYS: &[(&str, &[&str])] = &[
    ("tauA", &["tau_A", "tau_a"]),
    ("fractional_offset", &[]),
    ("drift_rate", &[]),
    ("jitter_sigma", &[]),
    ("eta", &[]),
    ("qber", &[]),
    ("background_rate", &[]),
    ("mu", &[]),
    ("z_basis_prob", &[]),
    ("duration", &[]),
    ("seed", &[]),
    ("start_time", &[]),
    ("resolution", &[]),
    ("L", &[]),
    ("N1", &[]),
    ("lambda", &[]),
    ("string_seed", &[]),
    ("Tacq", &["T_acq"]),
    ("sigma", &[]),
    ("trim", &[]),
    ("threshold", &[]),
    ("eta_hint", &[]),
    ("n_samples", &["N"]),
];

fn canonical(key: &str) -> Option<&'static str> {
    KEYS.iter().find(|(k, aliases)| *k == key || aliases.contains(&key)).map(|(k, _)| *k)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<&'static str, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut config = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax(i + 1))?;
            config.set(key.trim(), value.trim())?;
        }
        Ok(config)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<(), ConfigError> {
        let key = canonical(key).ok_or_else(|| ConfigError::UnknownKey(key.to_string()))?;
        self.values.insert(key, value.into());
        Ok(())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        let key = canonical(key).ok_or_else(|| ConfigError::UnknownKey(key.to_string()))?;
        self.values
            .get(key)
            .map(|v| v.parse().map_err(|_| ConfigError::BadValue { key: key.to_string(), value: v.clone() }))
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn clock(&self) -> Result<ClockPair, ConfigError> {
        Ok(ClockPair {
            tau_a: self.get_or("tauA", 20e-9)?,
            fractional_offset: self.get_or("fractional_offset", 0.0)?,
            drift_rate: self.get_or("drift_rate", 0.0)?,
            jitter_sigma: self.get_or("jitter_sigma", 100e-12)?,
        })
    }

    /// Channel settings; `duration` defaults to the sync string plus 2%.
    pub fn channel(&self) -> Result<ChannelConfig, ConfigError> {
        let d = ChannelConfig::default();
        let clock = self.clock()?;
        let params = self.string_params()?;
        let start_time = self.get_or("start_time", d.start_time)?;
        let fit = start_time + params.len as f64 * clock.tau_a * (1.0 + clock.fractional_offset.abs()) * 1.02;
        Ok(ChannelConfig {
            eta: self.get_or("eta", d.eta)?,
            qber: self.get_or("qber", d.qber)?,
            background_rate: self.get_or("background_rate", d.background_rate)?,
            mu: self.get_or("mu", d.mu)?,
            z_basis_prob: self.get_or("z_basis_prob", d.z_basis_prob)?,
            duration: self.get_or("duration", fit)?,
            seed: self.get_or("seed", d.seed)?,
            start_time,
            resolution: self.get_or("resolution", d.resolution)?,
        })
    }

    pub fn string_params(&self) -> Result<StringParams, ConfigError> {
        Ok(StringParams::new(
            self.get_or("L", 1_000_000)?,
            self.get_or("N1", 10)?,
            self.get_or("lambda", 1.0)?,
            self.get_or("string_seed", 0)?,
        )?)
    }

    /// Pipeline settings; `Tacq` defaults to 1 s.
    pub fn sync(&self) -> Result<SyncConfig, ConfigError> {
        let clock = self.clock()?;
        let base = SyncConfig::new(clock.tau_a, self.get_or("sigma", clock.jitter_sigma)?, self.get_or("Tacq", 1.0)?);
        Ok(SyncConfig {
            trim_fraction: self.get_or("trim", base.trim_fraction)?,
            delta_threshold: self.get_or("threshold", base.delta_threshold)?,
            eta_hint: self.get("eta_hint")?,
            n_samples: self.get_or("n_samples", base.n_samples)?,
            ..base
        })
    }
}
