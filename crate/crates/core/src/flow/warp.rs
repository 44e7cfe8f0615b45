//! Backward warping with bilinear sampling.
//!
//! Samples outside `[0, W-1] x [0, H-1]` are clamped to the nearest edge pixel
//! and reported as out of bounds; callers receive the flag as a validity mask.

use alloc::vec;
use alloc::vec::Vec;

use super::FlowField;
use crate::error::{Error, Result};
use crate::image::{ImageBuffer, Mask};

/// Neighbor indices and fractional offsets of one bilinear lookup.
///
/// Interpolation uses nested lerps, so equal neighbors reproduce their value
/// exactly and integer positions return the stored pixel exactly.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Taps {
    pub idx: [usize; 4],
    pub fx: f64,
    pub fy: f64,
    pub in_bounds: bool,
}

impl Taps {
    /// Taps into a `width x height` plane (pixel index, not channel index).
    #[inline]
    pub(crate) fn new(width: usize, height: usize, x: f64, y: f64) -> Taps {
        let max_x = (width - 1) as f64;
        let max_y = (height - 1) as f64;
        let in_bounds = (0.0..=max_x).contains(&x) && (0.0..=max_y).contains(&y);
        // NaN fails both range checks; treat it as the origin.
        let cx = if x.is_nan() { 0.0 } else { x.clamp(0.0, max_x) };
        let cy = if y.is_nan() { 0.0 } else { y.clamp(0.0, max_y) };
        let x0 = libm::floor(cx) as usize;
        let y0 = libm::floor(cy) as usize;
        let x1 = (x0 + 1).min(width - 1);
        let y1 = (y0 + 1).min(height - 1);
        Taps {
            idx: [y0 * width + x0, y0 * width + x1, y1 * width + x0, y1 * width + x1],
            fx: cx - x0 as f64,
            fy: cy - y0 as f64,
            in_bounds,
        }
    }

    /// Bilinear weight of each neighbor.
    #[inline]
    pub(crate) fn weights(&self) -> [f64; 4] {
        let (fx, fy) = (self.fx, self.fy);
        [(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy]
    }

    #[inline]
    fn lerp(&self, a: f64, b: f64, c: f64, d: f64) -> f64 {
        let top = a + self.fx * (b - a);
        let bottom = c + self.fx * (d - c);
        top + self.fy * (bottom - top)
    }

    #[inline]
    pub(crate) fn apply(&self, plane: &[f64]) -> f64 {
        self.lerp(
            plane[self.idx[0]],
            plane[self.idx[1]],
            plane[self.idx[2]],
            plane[self.idx[3]],
        )
    }

    #[inline]
    fn apply_strided(&self, data: &[f64], channels: usize, c: usize) -> f64 {
        self.lerp(
            data[self.idx[0] * channels + c],
            data[self.idx[1] * channels + c],
            data[self.idx[2] * channels + c],
            data[self.idx[3] * channels + c],
        )
    }
}

/// Bilinear lookup at a real-valued position, writing one value per channel
/// into `out`. Returns whether `(x, y)` lies inside the image.
pub fn bilinear_sample_into(img: &ImageBuffer, x: f64, y: f64, out: &mut [f64]) -> bool {
    assert!(!img.is_empty(), "sampling an empty image");
    let taps = Taps::new(img.width(), img.height(), x, y);
    let ch = img.channels();
    for (c, o) in out.iter_mut().enumerate().take(ch) {
        *o = taps.apply_strided(img.data(), ch, c);
    }
    taps.in_bounds
}

/// Bilinear lookup at a real-valued position.
pub fn bilinear_sample(img: &ImageBuffer, x: f64, y: f64) -> (Vec<f64>, bool) {
    let mut out = vec![0.0; img.channels()];
    let inside = bilinear_sample_into(img, x, y, &mut out);
    (out, inside)
}

/// Backward warp: output pixel `p` pulls `img` at `p + flow(p)`.
pub fn warp_image(img: &ImageBuffer, flow: &FlowField) -> Result<(ImageBuffer, Mask)> {
    flow.check_dims(img.dims())?;
    let (w, h) = img.dims();
    let ch = img.channels();
    let mut out = Vec::with_capacity(w * h * ch);
    let mut valid = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (u, v) = flow.at(x, y);
            let taps = Taps::new(w, h, x as f64 + u, y as f64 + v);
            for c in 0..ch {
                out.push(taps.apply_strided(img.data(), ch, c));
            }
            valid.push(taps.in_bounds);
        }
    }
    Ok((ImageBuffer::from_vec(w, h, ch, out)?, Mask::from_vec(w, h, valid)?))
}

/// Resamples both channels of `flow_prev` at `p + flow_back(p)`.
///
/// With `flow_prev = w(t-1 -> t)` and `flow_back = w(t -> t-1)` the result is
/// the previous motion expressed in frame `t`, a prediction of `w(t -> t+1)`.
/// The result is valid where the lookup stayed in bounds and every neighbor
/// contributing a nonzero weight was valid in `flow_prev`.
pub fn warp_flow(flow_prev: &FlowField, flow_back: &FlowField) -> Result<FlowField> {
    flow_back.check_dims(flow_prev.dims())?;
    let (w, h) = flow_prev.dims();
    let mut u = Vec::with_capacity(w * h);
    let mut v = Vec::with_capacity(w * h);
    let mut valid = Vec::with_capacity(w * h);
    let prev_valid = flow_prev.valid();
    for y in 0..h {
        for x in 0..w {
            let (du, dv) = flow_back.at(x, y);
            let taps = Taps::new(w, h, x as f64 + du, y as f64 + dv);
            u.push(taps.apply(flow_prev.u()));
            v.push(taps.apply(flow_prev.v()));
            let src_ok = match prev_valid {
                None => true,
                Some(m) => taps
                    .idx
                    .iter()
                    .zip(taps.weights())
                    .all(|(&i, wt)| wt == 0.0 || m.as_slice()[i]),
            };
            valid.push(taps.in_bounds && src_ok);
        }
    }
    FlowField::from_components(w, h, u, v)?.with_valid(Mask::from_vec(w, h, valid)?)
}

/// Transports the oldest forward flow through a chain of backward flows.
///
/// `flows_bwd` is ordered oldest first: for a field starting at frame `s`,
/// `flows_bwd[i]` maps frame `s+i+1` to frame `s+i`, and the last entry is the
/// flow from the current frame into its predecessor. Validity is intersected
/// at every step.
pub fn compose_warp_chain(oldest_fwd: &FlowField, flows_bwd: &[FlowField]) -> Result<FlowField> {
    let (first, rest) = flows_bwd.split_first().ok_or(Error::EmptyChain)?;
    let mut acc = warp_flow(oldest_fwd, first)?;
    for back in rest {
        acc = warp_flow(&acc, back)?;
    }
    Ok(acc)
}

/// Brightness-constancy error `|I_t - W(I_next; flow)|`, averaged over channels.
pub fn brightness_error(frame: &ImageBuffer, next: &ImageBuffer, flow: &FlowField) -> Result<ImageBuffer> {
    next.check_same_dims(frame.dims())?;
    if frame.channels() != next.channels() {
        return Err(Error::ChannelMismatch {
            expected: frame.channels(),
            found: next.channels(),
        });
    }
    let (warped, _) = warp_image(next, flow)?;
    let ch = frame.channels();
    let data = frame
        .data()
        .chunks_exact(ch)
        .zip(warped.data().chunks_exact(ch))
        .map(|(a, b)| a.iter().zip(b).map(|(p, q)| libm::fabs(p - q)).sum::<f64>() / ch as f64)
        .collect();
    ImageBuffer::from_vec(frame.width(), frame.height(), 1, data)
}
