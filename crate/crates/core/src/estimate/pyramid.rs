//! Gray-image pyramids and derivative stencils shared by the estimators.

use alloc::vec::Vec;

use crate::flow::FlowField;
use crate::image::ImageBuffer;

/// Coarsest allowed level size (shorter side, pixels).
const MIN_LEVEL_SIZE: usize = 8;

/// 2x2 box reduction; odd trailing rows and columns are averaged with themselves.
pub(crate) fn downsample(img: &ImageBuffer) -> ImageBuffer {
    let (w, h) = img.dims();
    let (nw, nh) = (w.div_ceil(2), h.div_ceil(2));
    ImageBuffer::from_fn(nw, nh, 1, |x, y, _| {
        let x0 = 2 * x;
        let y0 = 2 * y;
        let x1 = (x0 + 1).min(w - 1);
        let y1 = (y0 + 1).min(h - 1);
        0.25 * (img.get(x0, y0, 0) + img.get(x1, y0, 0) + img.get(x0, y1, 0) + img.get(x1, y1, 0))
    })
}

/// Finest level first; stops early once a level would drop below the minimum size.
pub(crate) fn build(img: &ImageBuffer, levels: usize) -> Vec<ImageBuffer> {
    let mut out = Vec::with_capacity(levels);
    out.push(img.clone());
    while out.len() < levels {
        let last = out.last().expect("nonempty");
        if last.width().min(last.height()) / 2 < MIN_LEVEL_SIZE {
            break;
        }
        out.push(downsample(last));
    }
    out
}

/// Resizes a coarse flow to `(w, h)` and rescales the displacements.
pub(crate) fn upsample_flow(flow: &FlowField, w: usize, h: usize) -> FlowField {
    let (cw, ch) = flow.dims();
    let sx = w as f64 / cw as f64;
    let sy = h as f64 / ch as f64;
    let mut out = FlowField::from_fn(w, h, |x, y| {
        let cx = (x as f64 + 0.5) / sx - 0.5;
        let cy = (y as f64 + 0.5) / sy - 0.5;
        let taps = crate::flow::warp::Taps::new(cw, ch, cx, cy);
        (taps.apply(flow.u()) * sx, taps.apply(flow.v()) * sy)
    });
    if let Some(valid) = flow.valid() {
        let m = crate::image::Mask::from_fn(w, h, |x, y| {
            let cx = ((x as f64 + 0.5) / sx) as usize;
            let cy = ((y as f64 + 0.5) / sy) as usize;
            valid.get(cx.min(cw - 1), cy.min(ch - 1))
        });
        out.set_valid(Some(m)).expect("same dims");
    }
    out
}

/// Central differences with replicated borders.
pub(crate) fn gradients(img: &ImageBuffer) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = img.dims();
    let d = img.data();
    let mut gx = Vec::with_capacity(w * h);
    let mut gy = Vec::with_capacity(w * h);
    for y in 0..h {
        let ym = y.saturating_sub(1);
        let yp = (y + 1).min(h - 1);
        for x in 0..w {
            let xm = x.saturating_sub(1);
            let xp = (x + 1).min(w - 1);
            gx.push(0.5 * (d[y * w + xp] - d[y * w + xm]));
            gy.push(0.5 * (d[yp * w + x] - d[ym * w + x]));
        }
    }
    (gx, gy)
}
