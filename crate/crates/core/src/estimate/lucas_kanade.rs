//! Dense pyramidal Lucas-Kanade.
//!
//! Every pixel solves the windowed 2x2 least-squares system, iterating with its
//! own displacement.
//! Where the structure tensor's smaller eigenvalue falls below the threshold
//! the pixel keeps the estimate it inherited from the coarser level; at the
//! finest level such pixels are also marked invalid.

use alloc::vec;
use alloc::vec::Vec;

use super::{gray_pair, pyramid, Frame, TwoFrameEstimator};
use crate::error::{Error, Result};
use crate::flow::warp::Taps;
use crate::flow::FlowField;
use crate::image::{ImageBuffer, Mask};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct LkParams {
    pub window_radius: usize,
    pub pyramid_levels: usize,
    pub iterations_per_level: usize,
    /// Threshold on the window-averaged structure tensor (intensities in `[0, 1]`).
    pub min_eigen_threshold: f64,
}

impl Default for LkParams {
    fn default() -> Self {
        Self {
            window_radius: 4,
            pyramid_levels: 4,
            iterations_per_level: 5,
            min_eigen_threshold: 1e-6,
        }
    }
}

impl LkParams {
    pub fn validate(&self) -> Result<()> {
        if self.window_radius == 0 || self.pyramid_levels == 0 || self.iterations_per_level == 0 {
            return Err(Error::InvalidParameter(
                "lk window_radius, pyramid_levels and iterations_per_level must be at least 1".into(),
            ));
        }
        if !(self.min_eigen_threshold >= 0.0 && self.min_eigen_threshold.is_finite()) {
            return Err(Error::InvalidParameter(alloc::format!(
                "lk min_eigen_threshold must be a nonnegative number, got {}",
                self.min_eigen_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct LucasKanade {
    params: LkParams,
}

/// Summed-area table with clipped rectangular queries.
struct Integral {
    w: usize,
    h: usize,
    sums: Vec<f64>,
}

impl Integral {
    fn new(data: &[f64], w: usize, h: usize) -> Self {
        let mut sums = vec![0.0; (w + 1) * (h + 1)];
        for y in 0..h {
            let mut row = 0.0;
            for x in 0..w {
                row += data[y * w + x];
                sums[(y + 1) * (w + 1) + x + 1] = sums[y * (w + 1) + x + 1] + row;
            }
        }
        Self { w, h, sums }
    }

    /// Sum over the window of radius `r` around `(x, y)`, clipped to the image.
    #[inline]
    fn window(&self, x: usize, y: usize, r: usize) -> f64 {
        let x0 = x.saturating_sub(r);
        let y0 = y.saturating_sub(r);
        let x1 = (x + r + 1).min(self.w);
        let y1 = (y + r + 1).min(self.h);
        let s = self.w + 1;
        self.sums[y1 * s + x1] - self.sums[y0 * s + x1] - self.sums[y1 * s + x0] + self.sums[y0 * s + x0]
    }
}

impl LucasKanade {
    pub fn new(params: LkParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }

    pub fn params(&self) -> &LkParams {
        &self.params
    }

    /// Iterates each pixel's window independently: the window is sampled in
    /// `b` at the pixel's own displacement, while the structure tensor comes
    /// from the gradients of `a` and is fixed per level.
    fn refine_level(&self, a: &ImageBuffer, b: &ImageBuffer, mut flow: FlowField) -> Result<(FlowField, Mask)> {
        let (w, h) = a.dims();
        let n = w * h;
        let r = self.params.window_radius as isize;
        let (gx, gy) = pyramid::gradients(a);
        let xx: Vec<f64> = gx.iter().map(|g| g * g).collect();
        let xy: Vec<f64> = gx.iter().zip(&gy).map(|(p, q)| p * q).collect();
        let yy: Vec<f64> = gy.iter().map(|g| g * g).collect();
        let sxx = Integral::new(&xx, w, h);
        let sxy = Integral::new(&xy, w, h);
        let syy = Integral::new(&yy, w, h);
        let ru = self.params.window_radius;
        let mut reliable = vec![true; n];
        let bd = b.data();
        let ad = a.data();
        let (u, v) = flow.components_mut();
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let count = ((x + ru + 1).min(w) - x.saturating_sub(ru)) as f64
                    * ((y + ru + 1).min(h) - y.saturating_sub(ru)) as f64;
                let g11 = sxx.window(x, y, ru) / count;
                let g12 = sxy.window(x, y, ru) / count;
                let g22 = syy.window(x, y, ru) / count;
                let disc = libm::sqrt((g11 - g22) * (g11 - g22) + 4.0 * g12 * g12);
                let min_eig = 0.5 * (g11 + g22 - disc);
                let det = g11 * g22 - g12 * g12;
                if min_eig.is_nan() || min_eig <= self.params.min_eigen_threshold || det <= 0.0 {
                    reliable[i] = false;
                    continue;
                }
                let (mut pu, mut pv) = (u[i], v[i]);
                for _ in 0..self.params.iterations_per_level {
                    let mut b1 = 0.0;
                    let mut b2 = 0.0;
                    for dy in -r..=r {
                        let yy = y as isize + dy;
                        if yy < 0 || yy >= h as isize {
                            continue;
                        }
                        for dx in -r..=r {
                            let xx = x as isize + dx;
                            if xx < 0 || xx >= w as isize {
                                continue;
                            }
                            let j = yy as usize * w + xx as usize;
                            let taps = Taps::new(w, h, xx as f64 + pu, yy as f64 + pv);
                            let it = taps.apply(bd) - ad[j];
                            b1 += gx[j] * it;
                            b2 += gy[j] * it;
                        }
                    }
                    b1 /= count;
                    b2 /= count;
                    pu -= (g22 * b1 - g12 * b2) / det;
                    pv -= (g11 * b2 - g12 * b1) / det;
                }
                u[i] = pu;
                v[i] = pv;
            }
        }
        Ok((flow, Mask::from_vec(w, h, reliable)?))
    }
}

impl TwoFrameEstimator for LucasKanade {
    fn name(&self) -> &str {
        "lucas-kanade"
    }

    fn estimate(&self, from: Frame<'_>, to: Frame<'_>) -> Result<FlowField> {
        let (a, b) = gray_pair(from, to)?;
        let pa = pyramid::build(&a, self.params.pyramid_levels);
        let pb = pyramid::build(&b, self.params.pyramid_levels);
        let mut state: Option<(FlowField, Mask)> = None;
        for (la, lb) in pa.iter().zip(&pb).rev() {
            let (w, h) = la.dims();
            let init = match state.take() {
                Some((coarse, _)) => {
                    let mut f = pyramid::upsample_flow(&coarse, w, h);
                    f.set_valid(None)?;
                    f
                }
                None => FlowField::zeros(w, h),
            };
            state = Some(self.refine_level(la, lb, init)?);
        }
        let (flow, reliable) = state.expect("at least one level");
        flow.with_valid(reliable)
    }
}
