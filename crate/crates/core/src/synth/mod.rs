//! Seeded synthetic sequences with analytic ground truth.
//!
//! A scene is a stack of textured layers over a full-canvas background. Each
//! layer's shape and texture live in reference coordinates (frame 0) and a
//! motion model maps them into every frame, so forward and backward flows and
//! occlusions follow in closed form.

mod dataset;
pub mod texture;

pub use dataset::{benchmark_specs, make_dataset, BenchmarkConfig, Dataset, DatasetEntry};

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::image::{ImageBuffer, Mask};
use texture::{mix64, Texture};

/// How a layer moves; `t` is the (real-valued) frame index.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Motion {
    Static,
    ConstantVelocity {
        vx: f64,
        vy: f64,
    },
    ConstantAcceleration {
        vx: f64,
        vy: f64,
        ax: f64,
        ay: f64,
    },
    /// Rotation about `(cx, cy)`; positive angles turn +x towards +y.
    Rotation {
        cx: f64,
        cy: f64,
        deg_per_frame: f64,
    },
    Zoom {
        cx: f64,
        cy: f64,
        scale_per_frame: f64,
    },
    /// Constant velocity that switches from `before` to `after` at `switch_frame`.
    AbruptChange {
        before: (f64, f64),
        after: (f64, f64),
        switch_frame: usize,
    },
}

impl Motion {
    fn translation(&self, t: f64) -> Option<(f64, f64)> {
        match *self {
            Motion::Static => Some((0.0, 0.0)),
            Motion::ConstantVelocity { vx, vy } => Some((vx * t, vy * t)),
            Motion::ConstantAcceleration { vx, vy, ax, ay } => {
                Some((vx * t + 0.5 * ax * t * t, vy * t + 0.5 * ay * t * t))
            }
            Motion::AbruptChange {
                before,
                after,
                switch_frame,
            } => {
                let k = switch_frame as f64;
                let t0 = t.min(k);
                let t1 = (t - k).max(0.0);
                Some((before.0 * t0 + after.0 * t1, before.1 * t0 + after.1 * t1))
            }
            Motion::Rotation { .. } | Motion::Zoom { .. } => None,
        }
    }

    /// Position at time `t` of the point at `p` in reference coordinates.
    pub fn forward(&self, p: (f64, f64), t: f64) -> (f64, f64) {
        if let Some((dx, dy)) = self.translation(t) {
            return (p.0 + dx, p.1 + dy);
        }
        match *self {
            Motion::Rotation { cx, cy, deg_per_frame } => {
                let th = (deg_per_frame * t).to_radians();
                let (s, c) = libm::sincos(th);
                let (dx, dy) = (p.0 - cx, p.1 - cy);
                (cx + c * dx - s * dy, cy + s * dx + c * dy)
            }
            Motion::Zoom {
                cx,
                cy,
                scale_per_frame,
            } => {
                let s = libm::pow(scale_per_frame, t);
                (cx + s * (p.0 - cx), cy + s * (p.1 - cy))
            }
            _ => unreachable!(),
        }
    }

    /// Reference coordinates of the point found at `q` at time `t`.
    pub fn inverse(&self, q: (f64, f64), t: f64) -> (f64, f64) {
        if let Some((dx, dy)) = self.translation(t) {
            return (q.0 - dx, q.1 - dy);
        }
        match *self {
            Motion::Rotation { cx, cy, deg_per_frame } => {
                let th = -(deg_per_frame * t).to_radians();
                let (s, c) = libm::sincos(th);
                let (dx, dy) = (q.0 - cx, q.1 - cy);
                (cx + c * dx - s * dy, cy + s * dx + c * dy)
            }
            Motion::Zoom {
                cx,
                cy,
                scale_per_frame,
            } => {
                let s = libm::pow(scale_per_frame, t);
                (cx + (q.0 - cx) / s, cy + (q.1 - cy) / s)
            }
            _ => unreachable!(),
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        let ok = match *self {
            Motion::Static => true,
            Motion::ConstantVelocity { vx, vy } => finite(&[vx, vy]),
            Motion::ConstantAcceleration { vx, vy, ax, ay } => finite(&[vx, vy, ax, ay]),
            Motion::Rotation { cx, cy, deg_per_frame } => finite(&[cx, cy, deg_per_frame]),
            Motion::Zoom {
                cx,
                cy,
                scale_per_frame,
            } => finite(&[cx, cy, scale_per_frame]) && scale_per_frame > 0.0,
            Motion::AbruptChange { before, after, .. } => finite(&[before.0, before.1, after.0, after.1]),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidScene(format!("invalid motion parameters: {self:?}")))
        }
    }
}

/// Layer footprint in reference coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Shape {
    Full,
    /// Half-open box `[x0, x1) x [y0, y1)`.
    Rect {
        x0: f64,
        y0: f64,
        x1: f64,
        y1: f64,
    },
    Disc {
        cx: f64,
        cy: f64,
        radius: f64,
    },
}

impl Shape {
    #[inline]
    pub fn contains(&self, p: (f64, f64)) -> bool {
        match *self {
            Shape::Full => true,
            Shape::Rect { x0, y0, x1, y1 } => p.0 >= x0 && p.0 < x1 && p.1 >= y0 && p.1 < y1,
            Shape::Disc { cx, cy, radius } => {
                let dx = p.0 - cx;
                let dy = p.1 - cy;
                dx * dx + dy * dy < radius * radius
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Layer {
    pub texture_seed: u64,
    /// Mean intensity of the texture.
    pub brightness: f64,
    pub shape: Shape,
    /// Larger values are nearer to the camera; ties go to the later layer.
    pub depth: i32,
    pub motion: Motion,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    /// 1 (gray) or 3 (RGB).
    pub channels: usize,
    pub background_seed: u64,
    pub background_motion: Motion,
    pub layers: Vec<Layer>,
}

impl SceneSpec {
    /// A static textured background with no foreground layers.
    pub fn new(width: usize, height: usize, frames: usize) -> Self {
        Self {
            width,
            height,
            frames,
            channels: 1,
            background_seed: 1,
            background_motion: Motion::Static,
            layers: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidScene("canvas must be nonempty".into()));
        }
        if self.frames < 3 {
            return Err(Error::InvalidScene(format!(
                "at least 3 frames are required, got {}",
                self.frames
            )));
        }
        if self.channels != 1 && self.channels != 3 {
            return Err(Error::InvalidScene(format!(
                "channels must be 1 or 3, got {}",
                self.channels
            )));
        }
        let probes = [
            (0.0, 0.0),
            ((self.width - 1) as f64, 0.0),
            (0.0, (self.height - 1) as f64),
            ((self.width - 1) as f64, (self.height - 1) as f64),
            (self.width as f64 / 2.0, self.height as f64 / 2.0),
        ];
        let max_dx = self.width as f64 / 2.0;
        let max_dy = self.height as f64 / 2.0;
        let motions = core::iter::once(&self.background_motion).chain(self.layers.iter().map(|l| &l.motion));
        for motion in motions {
            motion.validate()?;
            for t in 0..self.frames - 1 {
                for &p in &probes {
                    let a = motion.forward(p, t as f64);
                    let b = motion.forward(p, t as f64 + 1.0);
                    if libm::fabs(b.0 - a.0) > max_dx || libm::fabs(b.1 - a.1) > max_dy {
                        return Err(Error::InvalidScene(format!(
                            "motion {motion:?} exceeds half the canvas per frame"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// A rendered sequence with ground truth between adjacent frames.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSample {
    pub frames: Vec<ImageBuffer>,
    /// `gt_fwd[i]`: frame `i` to frame `i + 1`.
    pub gt_fwd: Vec<FlowField>,
    /// `gt_bwd[i]`: frame `i + 1` to frame `i`.
    pub gt_bwd: Vec<FlowField>,
    /// `occlusion[i]`: pixels of frame `i` not visible in frame `i + 1`.
    pub occlusion: Vec<Mask>,
}

impl SequenceSample {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.frames[0].dims()
    }
}

/// Index of the visible layer; `BACKGROUND` for the background.
pub const BACKGROUND: usize = usize::MAX;

struct Scene<'a> {
    spec: &'a SceneSpec,
    /// Layer indices sorted nearest first.
    order: Vec<usize>,
    textures: Vec<[Texture; 3]>,
    background: [Texture; 3],
}

impl<'a> Scene<'a> {
    fn new(spec: &'a SceneSpec, seed: u64) -> Self {
        let mut order: Vec<usize> = (0..spec.layers.len()).collect();
        order.sort_by(|&a, &b| spec.layers[b].depth.cmp(&spec.layers[a].depth).then(b.cmp(&a)));
        let textures_for = |tex_seed: u64, brightness: f64| {
            let base = mix64(seed ^ mix64(tex_seed));
            [
                Texture::new(base, brightness),
                Texture::new(mix64(base ^ 1), brightness),
                Texture::new(mix64(base ^ 2), brightness),
            ]
        };
        Self {
            spec,
            textures: spec
                .layers
                .iter()
                .map(|l| textures_for(l.texture_seed, l.brightness))
                .collect(),
            background: textures_for(spec.background_seed, 0.5),
            order,
        }
    }

    /// Visible layer at `q` in frame `t` and the point's reference coordinates.
    fn top(&self, q: (f64, f64), t: f64) -> (usize, (f64, f64)) {
        for &i in &self.order {
            let layer = &self.spec.layers[i];
            let p0 = layer.motion.inverse(q, t);
            if layer.shape.contains(p0) {
                return (i, p0);
            }
        }
        (BACKGROUND, self.spec.background_motion.inverse(q, t))
    }

    fn motion(&self, layer: usize) -> &Motion {
        if layer == BACKGROUND {
            &self.spec.background_motion
        } else {
            &self.spec.layers[layer].motion
        }
    }

    fn render(&self, t: usize) -> ImageBuffer {
        let ch = self.spec.channels;
        ImageBuffer::from_fn(self.spec.width, self.spec.height, ch, |x, y, c| {
            let (layer, p0) = self.top((x as f64, y as f64), t as f64);
            let tex = if layer == BACKGROUND {
                &self.background
            } else {
                &self.textures[layer]
            };
            tex[c].sample(p0.0, p0.1)
        })
    }

    /// Flow from frame `from` to frame `to` at every pixel of frame `from`.
    fn flow(&self, from: usize, to: usize) -> FlowField {
        FlowField::from_fn(self.spec.width, self.spec.height, |x, y| {
            let q = (x as f64, y as f64);
            let (layer, p0) = self.top(q, from as f64);
            let target = self.motion(layer).forward(p0, to as f64);
            (target.0 - q.0, target.1 - q.1)
        })
    }

    fn occlusion(&self, from: usize, to: usize) -> Mask {
        let max_x = (self.spec.width - 1) as f64;
        let max_y = (self.spec.height - 1) as f64;
        Mask::from_fn(self.spec.width, self.spec.height, |x, y| {
            let (layer, p0) = self.top((x as f64, y as f64), from as f64);
            let target = self.motion(layer).forward(p0, to as f64);
            if !(0.0..=max_x).contains(&target.0) || !(0.0..=max_y).contains(&target.1) {
                return true;
            }
            self.top(target, to as f64).0 != layer
        })
    }
}

/// Renders the sequence described by `spec`; deterministic per `(spec, seed)`.
pub fn generate(spec: &SceneSpec, seed: u64) -> Result<SequenceSample> {
    spec.validate()?;
    let scene = Scene::new(spec, seed);
    let frames = (0..spec.frames).map(|t| scene.render(t)).collect();
    let gt_fwd = (0..spec.frames - 1).map(|t| scene.flow(t, t + 1)).collect();
    let gt_bwd = (0..spec.frames - 1).map(|t| scene.flow(t + 1, t)).collect();
    let occlusion = (0..spec.frames - 1).map(|t| scene.occlusion(t, t + 1)).collect();
    Ok(SequenceSample {
        frames,
        gt_fwd,
        gt_bwd,
        occlusion,
    })
}

/// Visible layer index per pixel of frame `t` (`BACKGROUND` for the background).
pub fn layer_ids(spec: &SceneSpec, t: usize) -> Vec<usize> {
    let scene = Scene::new(spec, 0);
    let mut ids = Vec::with_capacity(spec.width * spec.height);
    for y in 0..spec.height {
        for x in 0..spec.width {
            ids.push(scene.top((x as f64, y as f64), t as f64).0);
        }
    }
    ids
}
