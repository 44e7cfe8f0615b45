//! Scene recipes and deterministic train/validation splits.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::texture::mix64;
use super::{generate, Layer, Motion, SceneSpec, SequenceSample, Shape};
use crate::error::{Error, Result};

/// Parameters of the seeded benchmark recipe.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct BenchmarkConfig {
    pub count: usize,
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub channels: usize,
    pub seed: u64,
    /// Share of sequences whose foreground switches velocity mid-sequence.
    pub abrupt_fraction: f64,
    pub max_layers: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            count: 24,
            width: 96,
            height: 96,
            frames: 3,
            channels: 1,
            seed: 2018,
            abrupt_fraction: 0.25,
            max_layers: 3,
        }
    }
}

fn velocity(rng: &mut ChaCha8Rng, max: f64) -> (f64, f64) {
    (rng.random_range(-max..=max), rng.random_range(-max..=max))
}

/// One scene per sequence: a moving background plus occluding foreground
/// layers. Every `1 / abrupt_fraction`-th scene has a foreground layer whose
/// velocity switches at the middle frame.
pub fn benchmark_specs(cfg: &BenchmarkConfig) -> Vec<(SceneSpec, u64)> {
    let (w, h) = (cfg.width as f64, cfg.height as f64);
    let mut out = Vec::with_capacity(cfg.count);
    for i in 0..cfg.count {
        let seq_seed = mix64(cfg.seed ^ mix64(i as u64));
        let mut rng = ChaCha8Rng::seed_from_u64(seq_seed);
        let center = (
            w / 2.0 + rng.random_range(-8.0..8.0),
            h / 2.0 + rng.random_range(-8.0..8.0),
        );
        let background_motion = match rng.random_range(0..10) {
            0 | 1 => Motion::Zoom {
                cx: center.0,
                cy: center.1,
                scale_per_frame: rng.random_range(0.97..1.03),
            },
            2 | 3 => Motion::Rotation {
                cx: center.0,
                cy: center.1,
                deg_per_frame: rng.random_range(-2.0..2.0),
            },
            _ => {
                let (vx, vy) = velocity(&mut rng, 2.0);
                Motion::ConstantVelocity { vx, vy }
            }
        };
        let abrupt = libm::floor((i + 1) as f64 * cfg.abrupt_fraction) > libm::floor(i as f64 * cfg.abrupt_fraction);
        let n_layers = if cfg.max_layers == 0 {
            0
        } else {
            rng.random_range(1..=cfg.max_layers)
        };
        let mut layers = Vec::with_capacity(n_layers);
        for k in 0..n_layers {
            let size = rng.random_range(0.18..0.4) * w.min(h);
            let cx = rng.random_range(0.2 * w..0.8 * w);
            let cy = rng.random_range(0.2 * h..0.8 * h);
            let shape = if rng.random_bool(0.5) {
                let aspect = rng.random_range(0.6..1.6);
                let hw = 0.5 * size * aspect;
                let hh = 0.5 * size / aspect;
                Shape::Rect {
                    x0: cx - hw,
                    y0: cy - hh,
                    x1: cx + hw,
                    y1: cy + hh,
                }
            } else {
                Shape::Disc {
                    cx,
                    cy,
                    radius: 0.5 * size,
                }
            };
            let motion = if abrupt && k == 0 {
                Motion::AbruptChange {
                    before: velocity(&mut rng, 3.0),
                    after: velocity(&mut rng, 3.0),
                    switch_frame: cfg.frames / 2,
                }
            } else if rng.random_bool(0.25) {
                let (vx, vy) = velocity(&mut rng, 2.5);
                let (ax, ay) = velocity(&mut rng, 0.3);
                Motion::ConstantAcceleration { vx, vy, ax, ay }
            } else {
                let (vx, vy) = velocity(&mut rng, 3.0);
                Motion::ConstantVelocity { vx, vy }
            };
            layers.push(Layer {
                texture_seed: rng.random(),
                brightness: rng.random_range(0.35..0.65),
                shape,
                depth: k as i32 + 1,
                motion,
            });
        }
        let spec = SceneSpec {
            width: cfg.width,
            height: cfg.height,
            frames: cfg.frames,
            channels: cfg.channels,
            background_seed: rng.random(),
            background_motion,
            layers,
        };
        out.push((spec, seq_seed));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetEntry {
    /// Position in the input list.
    pub id: usize,
    pub spec: SceneSpec,
    pub seed: u64,
    pub sample: SequenceSample,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<DatasetEntry>,
    pub val: Vec<DatasetEntry>,
}

/// Renders every scene and splits them by a hash of their seed.
///
/// `round(split_ratio * n)` entries go to training; both halves keep the input order.
pub fn make_dataset(scenes: &[(SceneSpec, u64)], split_ratio: f64) -> Result<Dataset> {
    if scenes.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(0.0..=1.0).contains(&split_ratio) {
        return Err(Error::InvalidParameter(alloc::format!(
            "split ratio must lie in [0, 1], got {split_ratio}"
        )));
    }
    let mut ranked: Vec<usize> = (0..scenes.len()).collect();
    ranked.sort_by_key(|&i| (mix64(scenes[i].1), i));
    let n_train = libm::round(split_ratio * scenes.len() as f64) as usize;
    let mut is_train = alloc::vec![false; scenes.len()];
    for &i in &ranked[..n_train] {
        is_train[i] = true;
    }
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (id, (spec, seed)) in scenes.iter().enumerate() {
        let entry = DatasetEntry {
            id,
            spec: spec.clone(),
            seed: *seed,
            sample: generate(spec, *seed)?,
        };
        if is_train[id] {
            train.push(entry);
        } else {
            val.push(entry);
        }
    }
    Ok(Dataset { train, val })
}
