//! Flat `key = value` experiment configuration.
//!
//! Keys are the long CLI flag names, so `--zmin 4.5e-3` and a config line
//! `zmin = 4.5e-3` set the same field. Blank lines and `#` comments are
//! ignored. Values given on the command line override the file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::CandidateSet;
use crate::network::AutoencoderSpec;
use crate::optics::{ObjectModel, OpticalConfig, Padding};
use crate::strategies::{RandomMode, ReconstructionConfig, StrategyKind};
use crate::tensor::AdamConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Built-in sample name (`bar-target`, `cells`, `dendrite`) or an image path.
    pub sample: String,
    /// Hologram directory written by `simulate`, read by `reconstruct`.
    pub hologram: Option<PathBuf>,
    pub wavelength: f64,
    pub pitch: f64,
    /// Grid is `size x size`.
    pub size: usize,
    /// True object distance used for simulation and the known-distance run.
    pub z: f64,
    pub zmin: f64,
    pub zmax: f64,
    pub zstep: f64,
    pub strategy: StrategyKind,
    /// Used by `strategy = random-expectation`.
    pub random_mode: RandomMode,
    pub random_expectation: bool,
    pub epochs: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub encoder_channels: Vec<usize>,
    pub kernel_size: usize,
    pub leaky_slope: f64,
    pub precision: Precision,
    /// Gaussian noise on the simulated hologram, relative to its mean.
    pub noise: f64,
    pub normalize: bool,
    pub padding: Padding,
    pub object: ObjectModel,
    pub log_every: usize,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            sample: "bar-target".into(),
            hologram: None,
            wavelength: 532e-9,
            pitch: 2e-6,
            size: 128,
            z: 5e-3,
            zmin: 4.5e-3,
            zmax: 5.5e-3,
            zstep: 1e-4,
            strategy: StrategyKind::ReverseAttention,
            random_mode: RandomMode::Include,
            random_expectation: false,
            epochs: 1500,
            seed: 0,
            learning_rate: 1e-3,
            encoder_channels: vec![16, 32, 64, 128],
            kernel_size: 3,
            leaky_slope: 0.1,
            precision: Precision::F32,
            noise: 0.0,
            normalize: true,
            padding: Padding::None,
            object: ObjectModel::default(),
            log_every: 0,
            out: None,
        }
    }
}

fn parse<V: std::str::FromStr>(key: &str, value: &str) -> Result<V> {
    value.parse().map_err(|_| Error::Config(format!("invalid value '{value}' for '{key}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean '{value}' for '{key}'"))),
    }
}

fn join<T: ToString>(values: &[T]) -> String {
    values.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub const KEYS: [&'static str; 26] = [
        "sample",
        "hologram",
        "wavelength",
        "pitch",
        "size",
        "z",
        "zmin",
        "zmax",
        "zstep",
        "strategy",
        "random-mode",
        "random-expectation",
        "epochs",
        "seed",
        "learning-rate",
        "encoder-channels",
        "kernel-size",
        "leaky-slope",
        "precision",
        "noise",
        "normalize",
        "padding",
        "absorption",
        "phase",
        "log-every",
        "out",
    ];

    /// Assign one key. `absorption` and `phase` both select the object model.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "sample" => self.sample = value.to_string(),
            "hologram" => self.hologram = Some(PathBuf::from(value)),
            "wavelength" => self.wavelength = parse(key, value)?,
            "pitch" => self.pitch = parse(key, value)?,
            "size" => self.size = parse(key, value)?,
            "z" => self.z = parse(key, value)?,
            "zmin" => self.zmin = parse(key, value)?,
            "zmax" => self.zmax = parse(key, value)?,
            "zstep" => self.zstep = parse(key, value)?,
            "strategy" => self.strategy = value.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
            "random-mode" => {
                self.random_mode = match value {
                    "include" => RandomMode::Include,
                    "exclude" => RandomMode::Exclude,
                    _ => return Err(Error::Config(format!("random-mode must be include or exclude, got '{value}'"))),
                }
            }
            "random-expectation" => self.random_expectation = parse_bool(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "learning-rate" => self.learning_rate = parse(key, value)?,
            "encoder-channels" => {
                self.encoder_channels = value.split(',').map(|v| parse(key, v.trim())).collect::<Result<_>>()?
            }
            "kernel-size" => self.kernel_size = parse(key, value)?,
            "leaky-slope" => self.leaky_slope = parse(key, value)?,
            "precision" => {
                self.precision = match value {
                    "f32" => Precision::F32,
                    "f64" => Precision::F64,
                    _ => return Err(Error::Config(format!("precision must be f32 or f64, got '{value}'"))),
                }
            }
            "noise" => self.noise = parse(key, value)?,
            "normalize" => self.normalize = parse_bool(key, value)?,
            "padding" => {
                self.padding = match value {
                    "none" => Padding::None,
                    "double" => Padding::Double,
                    _ => return Err(Error::Config(format!("padding must be none or double, got '{value}'"))),
                }
            }
            "absorption" => self.object = ObjectModel::Amplitude { absorption: parse(key, value)? },
            "phase" => self.object = ObjectModel::Phase { max_phase: parse(key, value)? },
            "log-every" => self.log_every = parse(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (number, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got '{raw}'", number + 1)))?;
            self.set(key.trim(), value)
                .map_err(|e| Error::Config(format!("line {}: {e}", number + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Every key in `KEYS` order; parsing this text back yields `self`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("sample", self.sample.clone());
        if let Some(h) = &self.hologram {
            line("hologram", h.display().to_string());
        }
        line("wavelength", format!("{:e}", self.wavelength));
        line("pitch", format!("{:e}", self.pitch));
        line("size", self.size.to_string());
        line("z", format!("{:e}", self.z));
        line("zmin", format!("{:e}", self.zmin));
        line("zmax", format!("{:e}", self.zmax));
        line("zstep", format!("{:e}", self.zstep));
        line("strategy", self.strategy.to_string());
        line("random-mode", match self.random_mode {
            RandomMode::Include => "include".into(),
            RandomMode::Exclude => "exclude".into(),
        });
        line("random-expectation", self.random_expectation.to_string());
        line("epochs", self.epochs.to_string());
        line("seed", self.seed.to_string());
        line("learning-rate", format!("{:e}", self.learning_rate));
        line("encoder-channels", join(&self.encoder_channels));
        line("kernel-size", self.kernel_size.to_string());
        line("leaky-slope", self.leaky_slope.to_string());
        line("precision", match self.precision {
            Precision::F32 => "f32".into(),
            Precision::F64 => "f64".into(),
        });
        line("noise", self.noise.to_string());
        line("normalize", self.normalize.to_string());
        line("padding", match self.padding {
            Padding::None => "none".into(),
            Padding::Double => "double".into(),
        });
        match self.object {
            ObjectModel::Amplitude { absorption } => line("absorption", absorption.to_string()),
            ObjectModel::Phase { max_phase } => line("phase", max_phase.to_string()),
        }
        line("log-every", self.log_every.to_string());
        if let Some(o) = &self.out {
            line("out", o.display().to_string());
        }
        out
    }

    pub fn optical(&self) -> Result<OpticalConfig> {
        OpticalConfig::new(self.wavelength, self.pitch, self.size, self.size)
    }

    pub fn candidates(&self) -> Result<CandidateSet> {
        if !(self.zstep > 0.0) {
            return Err(Error::Config(format!("zstep must be positive, got {}", self.zstep)));
        }
        CandidateSet::from_range(self.zmin, self.zmax, self.zstep)
    }

    /// Candidate set with the true distance attached when it lies on the grid.
    pub fn candidates_with_truth(&self, z: Option<f64>) -> Result<CandidateSet> {
        let set = self.candidates()?;
        match z {
            Some(z) if z >= self.zmin && z <= self.zmax => set.with_true_distance(z),
            _ => Ok(set),
        }
    }

    pub fn network(&self) -> AutoencoderSpec {
        AutoencoderSpec {
            encoder_channels: self.encoder_channels.clone(),
            kernel_size: self.kernel_size,
            leaky_slope: self.leaky_slope,
            ..AutoencoderSpec::desk(self.size, self.size)
        }
    }

    pub fn reconstruction(&self) -> ReconstructionConfig {
        ReconstructionConfig {
            network: self.network(),
            adam: AdamConfig::with_learning_rate(self.learning_rate),
            epochs: self.epochs,
            seed: self.seed,
            log_every: (self.log_every > 0).then_some(self.log_every),
        }
    }
}
