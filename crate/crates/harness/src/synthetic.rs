//! Desk-scale synthetic videos: rigidly moving shapes whose pixels carry a
//! per-object signature vector plus Gaussian noise.
//!
//! Layout under the output root:
//!
//! ```text
//! dataset.json                         {"videos": ["Manifests/<id>.json", ...]}
//! Manifests/<id>.json                  per-video manifest
//! Annotations/<id>/<frame:05>.msk      ground truth at image resolution
//! Features/<id>/L<l>_T<t>/<frame:05>.fmap
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use vosprop_core::tensor_store::{
    write_msk, DatasetIndex, ExtractionMeta, FeatureEntry, FrameEntry, VideoManifest,
};
use vosprop_core::{
    resample_mask, write_fmap, FeatureKey, FeatureMap, HardMask, LabelMask, ResampleDirection,
};

use crate::write_json;

/// Noise and signature spacing for one (layer, timestep) feature set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub layer: u32,
    pub timestep: u32,
    /// Per-channel Gaussian noise standard deviation.
    pub noise: f64,
    /// Euclidean distance between any two label signatures; 0 gives pure noise.
    pub separation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub videos: usize,
    pub frames: usize,
    pub objects: u8,
    /// Feature grid size.
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    /// Image pixels per feature cell along each axis.
    pub stride: usize,
    /// Background shapes that copy an object's signature.
    pub confusers: usize,
    /// Shapes stay put when false.
    pub motion: bool,
    pub seed: u64,
    pub cells: Vec<CellSpec>,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            videos: 3,
            frames: 10,
            objects: 2,
            height: 24,
            width: 32,
            channels: 16,
            stride: 1,
            confusers: 0,
            motion: true,
            seed: 0,
            cells: vec![CellSpec {
                layer: 0,
                timestep: 0,
                noise: 1.0,
                separation: 10.0,
            }],
        }
    }
}

impl SyntheticSpec {
    pub fn image_size(&self) -> (usize, usize) {
        (self.height * self.stride, self.width * self.stride)
    }

    fn validate(&self) -> Result<()> {
        if self.videos == 0 || self.frames < 2 {
            bail!("need at least one video of two frames");
        }
        if self.height == 0 || self.width == 0 || self.stride == 0 || self.channels == 0 {
            bail!("grid, stride and channels must be >= 1");
        }
        if self.channels < self.objects as usize + 1 {
            bail!(
                "channels ({}) must be >= objects + 1 ({}) for orthogonal signatures",
                self.channels,
                self.objects as usize + 1
            );
        }
        if self.confusers > 0 && self.objects == 0 {
            bail!("confusers copy object signatures; need objects >= 1");
        }
        if self.cells.is_empty() {
            bail!("at least one feature cell is required");
        }
        for c in &self.cells {
            if !(c.noise >= 0.0 && c.separation >= 0.0) {
                bail!("noise and separation must be non-negative");
            }
        }
        Ok(())
    }
}

fn mix(mut x: u64) -> u64 {
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn rng_for(parts: &[u64]) -> ChaCha8Rng {
    let seed = parts
        .iter()
        .fold(0x9e37_79b9_7f4a_7c15u64, |acc, &p| mix(acc ^ mix(p)));
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Copy, Debug)]
struct Shape {
    ellipse: bool,
    cy: f64,
    cx: f64,
    ry: f64,
    rx: f64,
    vy: f64,
    vx: f64,
    /// Ground-truth label (0 for confusers).
    label: u8,
    /// Signature index.
    look: u8,
}

impl Shape {
    fn contains(&self, y: f64, x: f64) -> bool {
        let (dy, dx) = ((y - self.cy) / self.ry, (x - self.cx) / self.rx);
        if self.ellipse {
            dy * dy + dx * dx <= 1.0
        } else {
            dy.abs() <= 1.0 && dx.abs() <= 1.0
        }
    }

    fn advance(&mut self, h: f64, w: f64) {
        self.cy += self.vy;
        self.cx += self.vx;
        if self.cy - self.ry < 0.0 || self.cy + self.ry > h {
            self.vy = -self.vy;
            self.cy = self.cy.clamp(self.ry, (h - self.ry).max(self.ry));
        }
        if self.cx - self.rx < 0.0 || self.cx + self.rx > w {
            self.vx = -self.vx;
            self.cx = self.cx.clamp(self.rx, (w - self.rx).max(self.rx));
        }
    }
}

fn random_shape(rng: &mut ChaCha8Rng, h: f64, w: f64, speed: f64, label: u8, look: u8) -> Shape {
    let ry = h * rng.random_range(0.12..0.25);
    let rx = w * rng.random_range(0.12..0.25);
    Shape {
        ellipse: rng.random_bool(0.5),
        cy: rng.random_range(ry..(h - ry).max(ry + 1e-9)),
        cx: rng.random_range(rx..(w - rx).max(rx + 1e-9)),
        ry,
        rx,
        vy: rng.random_range(-speed..=speed),
        vx: rng.random_range(-speed..=speed),
        label,
        look,
    }
}

/// Signatures for background plus each object: an orthonormal set scaled so
/// every pair is `separation` apart.
fn signatures(
    rng: &mut ChaCha8Rng,
    count: usize,
    channels: usize,
    separation: f64,
) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut v: Vec<f64> = (0..channels).map(|_| StandardNormal.sample(rng)).collect();
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(b).for_each(|(a, b)| *a -= dot * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-6 {
            basis.push(v.into_iter().map(|a| a / norm).collect());
        }
    }
    let scale = separation / std::f64::consts::SQRT_2;
    basis
        .into_iter()
        .map(|b| b.into_iter().map(|a| a * scale).collect())
        .collect()
}

/// Rasterizes shapes in order (later shapes on top) into (ground truth, appearance).
fn rasterize(shapes: &[Shape], h: usize, w: usize, objs: u8) -> (HardMask, HardMask) {
    let mut gt = vec![0u8; h * w];
    let mut look = vec![0u8; h * w];
    for y in 0..h {
        for x in 0..w {
            let (py, px) = (y as f64 + 0.5, x as f64 + 0.5);
            for s in shapes {
                if s.contains(py, px) {
                    gt[y * w + x] = s.label;
                    look[y * w + x] = s.look;
                }
            }
        }
    }
    (
        HardMask::new(h, w, objs, gt).expect("labels within objs"),
        HardMask::new(h, w, objs, look).expect("looks within objs"),
    )
}

pub fn video_id(v: usize) -> String {
    format!("synth_{v:03}")
}

pub fn frame_name(index: u32) -> String {
    format!("{index:05}")
}

fn key_dir(key: FeatureKey) -> String {
    key.to_string()
}

fn generate_video(spec: &SyntheticSpec, root: &Path, v: usize) -> Result<PathBuf> {
    let id = video_id(v);
    let (ih, iw) = spec.image_size();
    let (gh, gw) = (spec.height, spec.width);
    let mut rng = rng_for(&[spec.seed, v as u64, 0]);
    let speed = if spec.motion { spec.stride as f64 } else { 0.0 };

    // Confusers go first so real objects are drawn over them.
    let mut shapes = Vec::new();
    for c in 0..spec.confusers {
        let look = (c % spec.objects as usize) as u8 + 1;
        shapes.push(random_shape(&mut rng, ih as f64, iw as f64, speed, 0, look));
    }
    for obj in 1..=spec.objects {
        shapes.push(random_shape(
            &mut rng, ih as f64, iw as f64, speed, obj, obj,
        ));
    }

    let sigs: Vec<Vec<Vec<f64>>> = spec
        .cells
        .iter()
        .enumerate()
        .map(|(ci, cell)| {
            let mut r = rng_for(&[spec.seed, v as u64, 1, ci as u64]);
            signatures(
                &mut r,
                spec.objects as usize + 1,
                spec.channels,
                cell.separation,
            )
        })
        .collect();

    let ann_dir = root.join("Annotations").join(&id);
    std::fs::create_dir_all(&ann_dir)?;
    for cell in &spec.cells {
        let key = FeatureKey {
            layer: cell.layer,
            timestep: cell.timestep,
        };
        std::fs::create_dir_all(root.join("Features").join(&id).join(key_dir(key)))?;
    }

    let mut frames = Vec::with_capacity(spec.frames);
    for f in 0..spec.frames {
        let index = f as u32;
        let (gt, look) = rasterize(&shapes, ih, iw, spec.objects);
        let mask_rel = PathBuf::from("..")
            .join("Annotations")
            .join(&id)
            .join(format!("{}.msk", frame_name(index)));
        write_msk(&gt, ann_dir.join(format!("{}.msk", frame_name(index))))?;

        let grid_look =
            resample_mask::<f64>(&LabelMask::Hard(look), gh, gw, ResampleDirection::Down)?
                .to_hard();
        let mut features = Vec::with_capacity(spec.cells.len());
        for (ci, cell) in spec.cells.iter().enumerate() {
            let key = FeatureKey {
                layer: cell.layer,
                timestep: cell.timestep,
            };
            let mut noise_rng = rng_for(&[spec.seed, v as u64, 2, ci as u64, f as u64]);
            let mut pixels = Vec::with_capacity(gh * gw * spec.channels);
            for &l in grid_look.labels() {
                for &s in &sigs[ci][l as usize] {
                    let n: f64 = StandardNormal.sample(&mut noise_rng);
                    pixels.push((s + cell.noise * n) as f32);
                }
            }
            let map = FeatureMap::from_pixels(spec.channels, gh, gw, &pixels)?;
            let rel = PathBuf::from(key_dir(key)).join(format!("{}.fmap", frame_name(index)));
            write_fmap(&map, root.join("Features").join(&id).join(&rel))?;
            features.push(FeatureEntry {
                layer: cell.layer,
                timestep: cell.timestep,
                path: PathBuf::from("..").join("Features").join(&id).join(rel),
            });
        }
        frames.push(FrameEntry {
            index,
            image: None,
            features,
            mask: Some(mask_rel),
        });
        for s in shapes.iter_mut() {
            s.advance(ih as f64, iw as f64);
        }
    }

    let manifest = VideoManifest {
        video_id: id.clone(),
        extraction: ExtractionMeta {
            model: "synthetic".into(),
            total_timesteps: 1000,
            native_480p: false,
        },
        image_height: ih,
        image_width: iw,
        objects: spec.objects,
        frames,
        base_dir: PathBuf::new(),
    };
    let rel = PathBuf::from("Manifests").join(format!("{id}.json"));
    std::fs::write(root.join(&rel), manifest.to_json()? + "\n")?;
    Ok(rel)
}

/// Writes a synthetic dataset under `root` and returns the path of its
/// `dataset.json`. Output depends only on `spec`.
pub fn generate(spec: &SyntheticSpec, root: &Path) -> Result<PathBuf> {
    spec.validate()?;
    std::fs::create_dir_all(root.join("Manifests"))
        .with_context(|| format!("creating {}", root.display()))?;
    let videos = (0..spec.videos)
        .into_par_iter()
        .map(|v| generate_video(spec, root, v))
        .collect::<Result<Vec<_>>>()?;
    let index = DatasetIndex { videos };
    let path = root.join("dataset.json");
    write_json(&path, &index)?;
    write_json(&root.join("synthetic_spec.json"), spec)?;
    Ok(path)
}
