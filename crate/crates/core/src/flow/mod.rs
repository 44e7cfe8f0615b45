//! Dense flow fields and the pure flow/image math built on them.

pub(crate) mod warp;

pub use warp::{bilinear_sample, bilinear_sample_into, brightness_error, compose_warp_chain, warp_flow, warp_image};

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::{ImageBuffer, Mask};

/// Per-pixel displacement in pixels; positive `u` points right, positive `v` down.
///
/// `valid` is optional. A field without a mask is valid everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    u: Vec<f64>,
    v: Vec<f64>,
    valid: Option<Mask>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self::constant(width, height, 0.0, 0.0)
    }

    pub fn constant(width: usize, height: usize, u: f64, v: f64) -> Self {
        Self {
            width,
            height,
            u: vec![u; width * height],
            v: vec![v; width * height],
            valid: None,
        }
    }

    pub fn from_components(width: usize, height: usize, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        let n = width * height;
        for len in [u.len(), v.len()] {
            if len != n {
                return Err(Error::BufferLength {
                    expected: n,
                    found: len,
                });
            }
        }
        if let Some(index) = u.iter().chain(&v).position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { index: index % n });
        }
        Ok(Self {
            width,
            height,
            u,
            v,
            valid: None,
        })
    }

    pub fn from_fn<F>(width: usize, height: usize, mut f: F) -> Self
    where
        F: FnMut(usize, usize) -> (f64, f64),
    {
        let mut u = Vec::with_capacity(width * height);
        let mut v = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let (a, b) = f(x, y);
                u.push(a);
                v.push(b);
            }
        }
        Self {
            width,
            height,
            u,
            v,
            valid: None,
        }
    }

    /// Attaches a validity mask, replacing any existing one.
    pub fn with_valid(mut self, valid: Mask) -> Result<Self> {
        if valid.dims() != self.dims() {
            return Err(Error::dims(self.dims(), valid.dims()));
        }
        self.valid = Some(valid);
        Ok(self)
    }

    pub fn set_valid(&mut self, valid: Option<Mask>) -> Result<()> {
        if let Some(m) = &valid {
            if m.dims() != self.dims() {
                return Err(Error::dims(self.dims(), m.dims()));
            }
        }
        self.valid = valid;
        Ok(())
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    #[inline]
    pub fn u(&self) -> &[f64] {
        &self.u
    }

    #[inline]
    pub fn v(&self) -> &[f64] {
        &self.v
    }

    #[inline]
    pub fn valid(&self) -> Option<&Mask> {
        self.valid.as_ref()
    }

    /// Validity mask, materialized as all-true when absent.
    pub fn valid_mask(&self) -> Mask {
        self.valid
            .clone()
            .unwrap_or_else(|| Mask::new(self.width, self.height, true))
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.valid.as_ref().map_or(true, |m| m.get(x, y))
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.u[i], self.v[i])
    }

    #[inline]
    pub fn at_index(&self, i: usize) -> (f64, f64) {
        (self.u[i], self.v[i])
    }

    /// Stores a displacement. Non-finite values are a logic error.
    #[inline]
    pub fn set(&mut self, x: usize, y: usize, u: f64, v: f64) {
        debug_assert!(u.is_finite() && v.is_finite());
        let i = y * self.width + x;
        self.u[i] = u;
        self.v[i] = v;
    }

    pub fn negated(&self) -> FlowField {
        FlowField {
            width: self.width,
            height: self.height,
            u: self.u.iter().map(|x| -x).collect(),
            v: self.v.iter().map(|x| -x).collect(),
            valid: self.valid.clone(),
        }
    }

    pub fn scaled(&self, s: f64) -> FlowField {
        FlowField {
            width: self.width,
            height: self.height,
            u: self.u.iter().map(|x| x * s).collect(),
            v: self.v.iter().map(|x| x * s).collect(),
            valid: self.valid.clone(),
        }
    }

    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<FlowField> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(Error::dims(self.dims(), (x0 + w, y0 + h)));
        }
        let mut out = FlowField::from_fn(w, h, |x, y| self.at(x0 + x, y0 + y));
        out.valid = match &self.valid {
            Some(m) => Some(m.crop(x0, y0, w, h)?),
            None => None,
        };
        Ok(out)
    }

    /// Mirrors the field left to right, negating `u`.
    pub fn flipped_horizontal(&self) -> FlowField {
        let w = self.width;
        let mut out = FlowField::from_fn(w, self.height, |x, y| {
            let (u, v) = self.at(w - 1 - x, y);
            (-u, v)
        });
        out.valid = self
            .valid
            .as_ref()
            .map(|m| Mask::from_fn(w, self.height, |x, y| m.get(w - 1 - x, y)));
        out
    }

    /// True when no stored displacement is NaN or infinite.
    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.v).all(|x| x.is_finite())
    }

    pub(crate) fn check_dims(&self, other: (usize, usize)) -> Result<()> {
        if self.dims() != other {
            return Err(Error::dims(self.dims(), other));
        }
        Ok(())
    }

    pub(crate) fn components_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.u, &mut self.v)
    }
}

/// Per-pixel Euclidean length of the flow vectors.
pub fn flow_magnitude(flow: &FlowField) -> ImageBuffer {
    let data = flow
        .u()
        .iter()
        .zip(flow.v())
        .map(|(u, v)| libm::hypot(*u, *v))
        .collect();
    ImageBuffer::from_vec(flow.width(), flow.height(), 1, data).expect("magnitude of a finite field is finite")
}

/// Pixels whose ground-truth displacement carries them outside the image.
pub fn out_of_boundary_mask(gt: &FlowField) -> Mask {
    let max_x = gt.width() as f64 - 1.0;
    let max_y = gt.height() as f64 - 1.0;
    Mask::from_fn(gt.width(), gt.height(), |x, y| {
        let (u, v) = gt.at(x, y);
        let tx = x as f64 + u;
        let ty = y as f64 + v;
        !(0.0..=max_x).contains(&tx) || !(0.0..=max_y).contains(&ty)
    })
}
