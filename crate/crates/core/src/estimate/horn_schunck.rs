//! Coarse-to-fine Horn-Schunck with per-level warping.

use alloc::vec;
use alloc::vec::Vec;

use super::{gray_pair, pyramid, Frame, TwoFrameEstimator};
use crate::error::{Error, Result};
use crate::flow::{warp_image, FlowField};
use crate::image::ImageBuffer;

/// Intensities are rescaled to 8-bit units internally so that `alpha` keeps
/// its textbook magnitude.
const INTENSITY_SCALE: f64 = 255.0;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct HsParams {
    /// Smoothness weight, in 8-bit intensity units.
    pub alpha: f64,
    pub iterations: usize,
    pub pyramid_levels: usize,
    pub warps_per_level: usize,
}

impl Default for HsParams {
    fn default() -> Self {
        Self {
            alpha: 15.0,
            iterations: 200,
            pyramid_levels: 4,
            warps_per_level: 1,
        }
    }
}

impl HsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter(alloc::format!(
                "hs alpha must be positive, got {}",
                self.alpha
            )));
        }
        if self.iterations == 0 || self.pyramid_levels == 0 || self.warps_per_level == 0 {
            return Err(Error::InvalidParameter(
                "hs iterations, pyramid_levels and warps_per_level must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct HornSchunck {
    params: HsParams,
}

impl HornSchunck {
    pub fn new(params: HsParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }

    pub fn params(&self) -> &HsParams {
        &self.params
    }

    fn refine_level(&self, a: &ImageBuffer, b: &ImageBuffer, init: FlowField) -> Result<FlowField> {
        let (w, h) = a.dims();
        let n = w * h;
        let alpha2 = self.params.alpha * self.params.alpha;
        let mut flow = init;
        let (ga_x, ga_y) = pyramid::gradients(a);
        for _ in 0..self.params.warps_per_level {
            let (warped, _) = warp_image(b, &flow)?;
            let (gb_x, gb_y) = pyramid::gradients(&warped);
            let mut ix = Vec::with_capacity(n);
            let mut iy = Vec::with_capacity(n);
            let mut it = Vec::with_capacity(n);
            let mut denom = Vec::with_capacity(n);
            for i in 0..n {
                let gx = 0.5 * (ga_x[i] + gb_x[i]) * INTENSITY_SCALE;
                let gy = 0.5 * (ga_y[i] + gb_y[i]) * INTENSITY_SCALE;
                ix.push(gx);
                iy.push(gy);
                it.push((warped.data()[i] - a.data()[i]) * INTENSITY_SCALE);
                denom.push(alpha2 + gx * gx + gy * gy);
            }
            let u0 = flow.u().to_vec();
            let v0 = flow.v().to_vec();
            let mut u = u0.clone();
            let mut v = v0.clone();
            let mut u_next = vec![0.0; n];
            let mut v_next = vec![0.0; n];
            for _ in 0..self.params.iterations {
                for y in 0..h {
                    let ym = y.saturating_sub(1);
                    let yp = (y + 1).min(h - 1);
                    for x in 0..w {
                        let xm = x.saturating_sub(1);
                        let xp = (x + 1).min(w - 1);
                        let i = y * w + x;
                        let ubar = 0.25 * (u[y * w + xm] + u[y * w + xp] + u[ym * w + x] + u[yp * w + x]);
                        let vbar = 0.25 * (v[y * w + xm] + v[y * w + xp] + v[ym * w + x] + v[yp * w + x]);
                        let r = it[i] + ix[i] * (ubar - u0[i]) + iy[i] * (vbar - v0[i]);
                        let k = r / denom[i];
                        u_next[i] = ubar - ix[i] * k;
                        v_next[i] = vbar - iy[i] * k;
                    }
                }
                core::mem::swap(&mut u, &mut u_next);
                core::mem::swap(&mut v, &mut v_next);
            }
            flow = FlowField::from_components(w, h, u, v)?;
        }
        Ok(flow)
    }
}

impl TwoFrameEstimator for HornSchunck {
    fn name(&self) -> &str {
        "horn-schunck"
    }

    fn estimate(&self, from: Frame<'_>, to: Frame<'_>) -> Result<FlowField> {
        let (a, b) = gray_pair(from, to)?;
        let pa = pyramid::build(&a, self.params.pyramid_levels);
        let pb = pyramid::build(&b, self.params.pyramid_levels);
        let mut flow: Option<FlowField> = None;
        for (la, lb) in pa.iter().zip(&pb).rev() {
            let (w, h) = la.dims();
            let init = match flow.take() {
                Some(coarse) => pyramid::upsample_flow(&coarse, w, h),
                None => FlowField::zeros(w, h),
            };
            flow = Some(self.refine_level(la, lb, init)?);
        }
        Ok(flow.expect("at least one level"))
    }
}
