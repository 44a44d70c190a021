//! Run configuration. Values resolve as CLI flags > JSON config file > defaults.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use vosprop_core::{AffinityConfig, FeatureKey, Similarity};

/// MAG radius used unless overridden: 25√2 feature-grid cells.
pub const DEFAULT_MAG_RADIUS: f64 = 35.355_339_059_327_38;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    None,
    Mag,
    Oracle,
}

impl FromStr for FilterKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(FilterKind::None),
            "mag" => Ok(FilterKind::Mag),
            "oracle" => Ok(FilterKind::Oracle),
            other => bail!("unknown filter {other:?} (expected none, mag or oracle)"),
        }
    }
}

/// Coordinate space of `mag_radius`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RadiusUnits {
    /// Feature-grid cells.
    Grid,
    /// Image pixels; grid displacements are scaled by the feature stride.
    Image,
}

impl FromStr for RadiusUnits {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "grid" => Ok(RadiusUnits::Grid),
            "image" => Ok(RadiusUnits::Image),
            other => bail!("unknown radius units {other:?} (expected grid or image)"),
        }
    }
}

/// Optional settings as read from a config file or from flags.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunOverrides {
    pub manifest: Option<PathBuf>,
    pub affinity: Option<Similarity>,
    pub topk: Option<usize>,
    pub temperature: Option<f64>,
    pub memory_n: Option<usize>,
    pub pin_first: Option<bool>,
    pub filter: Option<FilterKind>,
    pub mag_radius: Option<f64>,
    pub mag_units: Option<RadiusUnits>,
    pub layer: Option<u32>,
    pub timestep: Option<u32>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub fg_bg_k: Option<usize>,
}

impl RunOverrides {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Fields set in `self` win over those in `base`.
    pub fn over(self, base: RunOverrides) -> RunOverrides {
        RunOverrides {
            manifest: self.manifest.or(base.manifest),
            affinity: self.affinity.or(base.affinity),
            topk: self.topk.or(base.topk),
            temperature: self.temperature.or(base.temperature),
            memory_n: self.memory_n.or(base.memory_n),
            pin_first: self.pin_first.or(base.pin_first),
            filter: self.filter.or(base.filter),
            mag_radius: self.mag_radius.or(base.mag_radius),
            mag_units: self.mag_units.or(base.mag_units),
            layer: self.layer.or(base.layer),
            timestep: self.timestep.or(base.timestep),
            out: self.out.or(base.out),
            threads: self.threads.or(base.threads),
            fg_bg_k: self.fg_bg_k.or(base.fg_bg_k),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub affinity: Similarity,
    pub topk: usize,
    /// Softmax temperature; `None` picks the affinity's default.
    pub temperature: Option<f64>,
    pub memory_n: usize,
    pub pin_first: bool,
    pub filter: FilterKind,
    pub mag_radius: f64,
    pub mag_units: RadiusUnits,
    pub layer: u32,
    pub timestep: u32,
    #[serde(skip)]
    pub out: PathBuf,
    /// Worker threads; 0 lets rayon decide. Never affects outputs.
    #[serde(skip)]
    pub threads: usize,
    /// Cutoff for the FG-BG percentage diagnostic; `None` means H*W.
    pub fg_bg_k: Option<usize>,
}

/// The fields that determine a run's outputs.
#[derive(Serialize)]
struct HashedFields<'a> {
    manifest: &'a Path,
    affinity: Similarity,
    topk: usize,
    temperature: f64,
    memory_n: usize,
    pin_first: bool,
    filter: FilterKind,
    mag_radius: Option<f64>,
    mag_units: Option<RadiusUnits>,
    layer: u32,
    timestep: u32,
    fg_bg_k: Option<usize>,
}

impl RunConfig {
    pub fn resolve(overrides: RunOverrides) -> Result<Self> {
        let cfg = RunConfig {
            manifest: overrides
                .manifest
                .ok_or_else(|| anyhow!("--manifest is required"))?,
            affinity: overrides.affinity.unwrap_or(Similarity::Cos),
            topk: overrides
                .topk
                .unwrap_or(AffinityConfig::<f32>::DEFAULT_TOPK),
            temperature: overrides.temperature,
            memory_n: overrides.memory_n.unwrap_or(8),
            pin_first: overrides.pin_first.unwrap_or(true),
            filter: overrides.filter.unwrap_or(FilterKind::None),
            mag_radius: overrides.mag_radius.unwrap_or(DEFAULT_MAG_RADIUS),
            mag_units: overrides.mag_units.unwrap_or(RadiusUnits::Grid),
            layer: overrides.layer.unwrap_or(0),
            timestep: overrides.timestep.unwrap_or(0),
            out: overrides.out.ok_or_else(|| anyhow!("--out is required"))?,
            threads: overrides.threads.unwrap_or(0),
            fg_bg_k: overrides.fg_bg_k,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.affinity_config().validate()?;
        if self.memory_n == 0 {
            bail!("--memory-n must be >= 1");
        }
        if self.filter == FilterKind::Mag && (self.mag_radius.is_nan() || self.mag_radius <= 0.0) {
            bail!("--mag-radius must be positive");
        }
        if self.fg_bg_k == Some(0) {
            bail!("fg_bg_k must be >= 1");
        }
        Ok(())
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
            .unwrap_or_else(|| self.affinity.default_temperature())
    }

    pub fn affinity_config(&self) -> AffinityConfig<f32> {
        AffinityConfig::new(self.affinity)
            .with_topk(self.topk)
            .with_temperature(self.temperature() as f32)
    }

    pub fn key(&self) -> FeatureKey {
        FeatureKey {
            layer: self.layer,
            timestep: self.timestep,
        }
    }

    /// Hex SHA-256 over every field that influences outputs (not `out` or `threads`).
    pub fn config_hash(&self) -> String {
        let mag = self.filter == FilterKind::Mag;
        let fields = HashedFields {
            manifest: &self.manifest,
            affinity: self.affinity,
            topk: self.topk,
            temperature: self.temperature(),
            memory_n: self.memory_n,
            pin_first: self.pin_first,
            filter: self.filter,
            mag_radius: mag.then_some(self.mag_radius),
            mag_units: mag.then_some(self.mag_units),
            layer: self.layer,
            timestep: self.timestep,
            fg_bg_k: self.fg_bg_k,
        };
        let json = serde_json::to_vec(&fields).expect("config serializes");
        Sha256::digest(&json)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
