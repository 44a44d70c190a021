use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifies one feature extraction setting within a video.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FeatureKey {
    pub layer: u32,
    pub timestep: u32,
}

impl fmt::Display for FeatureKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}_T{}", self.layer, self.timestep)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionMeta {
    pub model: String,
    pub total_timesteps: u32,
    pub native_480p: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureEntry {
    pub layer: u32,
    pub timestep: u32,
    pub path: PathBuf,
}

impl FeatureEntry {
    pub fn key(&self) -> FeatureKey {
        FeatureKey {
            layer: self.layer,
            timestep: self.timestep,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub index: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
    pub features: Vec<FeatureEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<PathBuf>,
}

/// Per-video manifest. Relative paths resolve against the manifest's directory.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoManifest {
    pub video_id: String,
    pub extraction: ExtractionMeta,
    pub image_height: usize,
    pub image_width: usize,
    pub objects: u8,
    pub frames: Vec<FrameEntry>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl VideoManifest {
    pub fn from_json(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut manifest: VideoManifest = serde_json::from_str(text)?;
        manifest.base_dir = base_dir.into();
        manifest.validate_indices()?;
        Ok(manifest)
    }

    /// Parses and validates; every referenced file must exist.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let manifest = Self::from_json(&text, base)?;
        manifest.check_files()?;
        Ok(manifest)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn validate_indices(&self) -> Result<()> {
        if self.frames.is_empty() {
            return Err(Error::Manifest(format!("{}: no frames", self.video_id)));
        }
        for pair in self.frames.windows(2) {
            if pair[1].index != pair[0].index + 1 {
                return Err(Error::Manifest(format!(
                    "{}: frame indices must increase by one, found {} then {}",
                    self.video_id, pair[0].index, pair[1].index
                )));
            }
        }
        Ok(())
    }

    fn check_files(&self) -> Result<()> {
        for frame in &self.frames {
            let paths = frame
                .image
                .iter()
                .chain(frame.mask.iter())
                .chain(frame.features.iter().map(|f| &f.path));
            for p in paths {
                let resolved = self.resolve(p);
                if !resolved.is_file() {
                    return Err(Error::Manifest(format!(
                        "{}: frame {} references missing file {}",
                        self.video_id,
                        frame.index,
                        resolved.display()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn feature_path(&self, frame_pos: usize, key: FeatureKey) -> Option<PathBuf> {
        self.frames[frame_pos]
            .features
            .iter()
            .find(|f| f.key() == key)
            .map(|f| self.resolve(&f.path))
    }

    pub fn mask_path(&self, frame_pos: usize) -> Option<PathBuf> {
        self.frames[frame_pos]
            .mask
            .as_ref()
            .map(|p| self.resolve(p))
    }

    /// True when every frame carries features for `key`.
    pub fn has_key(&self, key: FeatureKey) -> bool {
        self.frames
            .iter()
            .all(|f| f.features.iter().any(|e| e.key() == key))
    }

    pub fn has_all_masks(&self) -> bool {
        self.frames.iter().all(|f| f.mask.is_some())
    }
}

/// A list of per-video manifests making up a dataset.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub videos: Vec<PathBuf>,
}

impl DatasetIndex {
    /// Resolves `path` to a list of manifest paths. Accepts either a dataset
    /// index (`{"videos": [...]}`) or a single video manifest.
    pub fn manifest_paths(path: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        if value.get("videos").is_some() {
            let index: DatasetIndex = serde_json::from_value(value)?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            Ok(index
                .videos
                .iter()
                .map(|v| {
                    if v.is_absolute() {
                        v.clone()
                    } else {
                        base.join(v)
                    }
                })
                .collect())
        } else {
            Ok(vec![path.to_path_buf()])
        }
    }
}
