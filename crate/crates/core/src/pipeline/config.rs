//! Run configuration: named presets, JSON files and command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::forward::{check_fine_h, BcSet};
use crate::optimizer::NlcgConfig;
use crate::phantom::Phantom;

/// Noise levels allowed when a configuration reproduces a named preset.
pub const PRESET_NOISE_LEVELS: [f64; 3] = [0.0, 0.10, 0.25];

/// Everything needed to synthesize data and reconstruct from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub preset: Option<String>,
    /// Built-in phantom name or path to a JSON geometry file.
    pub phantom: String,
    pub bc_set: BcSet,
    pub coarse_h: f64,
    pub fine_h: f64,
    pub noise: f64,
    pub seed: u64,
    #[serde(default)]
    pub nlcg: NlcgConfig,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

/// A named starting point for [`RunConfig`].
#[derive(Debug, Clone, Copy)]
pub struct Preset {
    pub name: &'static str,
    pub phantom: &'static str,
    pub bc_set: BcSet,
    pub noise: f64,
    pub s: u8,
}

pub const PRESETS: &[Preset] = &[
    Preset { name: "test1-bc1-clean", phantom: "disk", bc_set: BcSet::Bc1, noise: 0.0, s: 1 },
    Preset { name: "test1-bc1-l2", phantom: "disk", bc_set: BcSet::Bc1, noise: 0.0, s: 0 },
    Preset { name: "heart-clean", phantom: "heart_lung", bc_set: BcSet::Bc1, noise: 0.0, s: 1 },
    Preset { name: "heart-noise10", phantom: "heart_lung", bc_set: BcSet::Bc1, noise: 0.10, s: 1 },
    Preset { name: "heart-noise25", phantom: "heart_lung", bc_set: BcSet::Bc1, noise: 0.25, s: 1 },
    Preset { name: "rect-bc1", phantom: "rotated_rect", bc_set: BcSet::Bc1, noise: 0.0, s: 1 },
    Preset { name: "rect-bc2", phantom: "rotated_rect", bc_set: BcSet::Bc2, noise: 0.0, s: 1 },
    Preset { name: "rect-bc3", phantom: "rotated_rect", bc_set: BcSet::Bc3, noise: 0.0, s: 1 },
    Preset { name: "composite-bc1", phantom: "composite", bc_set: BcSet::Bc1, noise: 0.0, s: 1 },
    Preset { name: "composite-bc3", phantom: "composite", bc_set: BcSet::Bc3, noise: 0.0, s: 1 },
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.name).collect()
}

impl RunConfig {
    /// Expands a preset to a full configuration at the reference resolution
    /// (coarse h = 0.01 with data from h = 0.005).
    pub fn preset(name: &str) -> Result<RunConfig> {
        let p = PRESETS.iter().find(|p| p.name == name).ok_or_else(|| {
            Error::Config(format!(
                "unknown preset `{name}`; available presets: {}",
                preset_names().join(", ")
            ))
        })?;
        Ok(RunConfig {
            preset: Some(p.name.to_string()),
            phantom: p.phantom.to_string(),
            bc_set: p.bc_set,
            coarse_h: 0.01,
            fine_h: 0.005,
            noise: p.noise,
            seed: 1,
            nlcg: NlcgConfig { s: p.s, ..NlcgConfig::default() },
            out: None,
        })
    }

    /// Parses a JSON configuration. Keys present in the file override the
    /// preset named by its `"preset"` field (or `test1-bc1-clean`).
    pub fn from_json(text: &str) -> Result<RunConfig> {
        let overlay: Value = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("configuration is not valid JSON: {e}")))?;
        let Value::Object(map) = &overlay else {
            return Err(Error::Config("configuration must be a JSON object".into()));
        };
        let base = match map.get("preset") {
            Some(Value::String(name)) => RunConfig::preset(name)?,
            Some(Value::Null) | None => RunConfig::preset("test1-bc1-clean")?,
            Some(other) => return Err(Error::Config(format!("`preset` must be a string, got {other}"))),
        };
        let mut merged = serde_json::to_value(&base)?;
        if map.get("preset").is_none() {
            merged["preset"] = Value::Null;
        }
        merge(&mut merged, &overlay);
        serde_json::from_value(merged).map_err(|e| Error::Config(format!("configuration: {e}")))
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read configuration {}: {e}", path.display())))?;
        let mut cfg = RunConfig::from_json(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        // phantom files are resolved relative to the configuration file
        if cfg.phantom.ends_with(".json") && Path::new(&cfg.phantom).is_relative() {
            if let Some(dir) = path.parent() {
                cfg.phantom = dir.join(&cfg.phantom).to_string_lossy().into_owned();
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check_fine_h(self.fine_h, self.coarse_h)?;
        if !(self.noise >= 0.0) || !self.noise.is_finite() {
            return Err(Error::Config(format!("noise must be a finite value ≥ 0, got {}", self.noise)));
        }
        if self.preset.is_some() && !PRESET_NOISE_LEVELS.iter().any(|&d| (d - self.noise).abs() < 1e-12) {
            return Err(Error::Config(format!(
                "preset runs use noise 0, 0.10 or 0.25 (got {}); drop the preset field \
                 or set \"preset\": null for other levels",
                self.noise
            )));
        }
        self.nlcg.validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn phantom(&self) -> Result<Phantom> {
        if self.phantom.ends_with(".json") {
            Phantom::load(Path::new(&self.phantom))
        } else {
            Phantom::builtin(&self.phantom)
        }
    }
}

fn merge(base: &mut Value, overlay: &Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, o) => *b = o.clone(),
    }
}

/// Command-line values that take precedence over the configuration file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub alpha: Option<f64>,
    pub s: Option<u8>,
    pub noise: Option<f64>,
    pub seed: Option<u64>,
    pub k_max: Option<usize>,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(a) = self.alpha {
            cfg.nlcg.alpha = a;
        }
        if let Some(s) = self.s {
            cfg.nlcg.s = s;
        }
        if let Some(d) = self.noise {
            cfg.noise = d;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(k) = self.k_max {
            cfg.nlcg.k_max = k;
        }
        if let Some(t) = self.tol {
            cfg.nlcg.tol = t;
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
    }
}

/// Resolves `--config`, `--preset` and the remaining flags in that order.
pub fn resolve(config: Option<&Path>, preset: Option<&str>, overrides: &Overrides) -> Result<RunConfig> {
    let mut cfg = match config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::preset(preset.unwrap_or("test1-bc1-clean"))?,
    };
    if let (Some(path), Some(name)) = (config, preset) {
        if cfg.preset.as_deref() != Some(name) {
            return Err(Error::Config(format!(
                "--preset {name} conflicts with the preset of {}",
                path.display()
            )));
        }
    }
    overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}
