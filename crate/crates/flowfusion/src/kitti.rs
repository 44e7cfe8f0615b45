//! KITTI 2015 flow PNGs: 16-bit RGB with `u = (R - 2^15) / 64`,
//! `v = (G - 2^15) / 64` and `valid = B > 0`.

use std::path::Path;

use flowfusion_core::{FlowField, Mask};
use image::{DynamicImage, ImageBuffer, Rgb};

use crate::error::{Error, Result};

const OFFSET: f64 = 32768.0;
const SCALE: f64 = 64.0;
/// Largest encodable displacement magnitude per component (exclusive).
pub const MAX_DISPLACEMENT: f64 = 512.0;

/// Quantizes one component to the 1/64 grid, rounding half away from zero.
pub fn quantize(c: f64) -> Option<u16> {
    if !(c.is_finite() && c.abs() < MAX_DISPLACEMENT) {
        return None;
    }
    let q = (c * SCALE).round() + OFFSET;
    Some(q.clamp(0.0, 65535.0) as u16)
}

pub fn dequantize(q: u16) -> f64 {
    (q as f64 - OFFSET) / SCALE
}

pub fn encode_kitti(flow: &FlowField) -> Result<ImageBuffer<Rgb<u16>, Vec<u16>>> {
    let (w, h) = flow.dims();
    let mut raw = Vec::with_capacity(3 * w * h);
    for i in 0..w * h {
        let (x, y) = (i % w, i / w);
        if !flow.is_valid(x, y) {
            raw.extend_from_slice(&[0, 0, 0]);
            continue;
        }
        let (u, v) = flow.at_index(i);
        let (Some(qu), Some(qv)) = (quantize(u), quantize(v)) else {
            return Err(Error::format(
                "<kitti>",
                format!("displacement ({u}, {v}) at ({x}, {y}) is outside the encodable range"),
            ));
        };
        raw.extend_from_slice(&[qu, qv, 1]);
    }
    Ok(ImageBuffer::from_raw(w as u32, h as u32, raw).expect("sized above"))
}

pub fn decode_kitti(img: &ImageBuffer<Rgb<u16>, Vec<u16>>) -> Result<FlowField> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut u = Vec::with_capacity(w * h);
    let mut v = Vec::with_capacity(w * h);
    let mut valid = Vec::with_capacity(w * h);
    for px in img.pixels() {
        let ok = px[2] > 0;
        u.push(if ok { dequantize(px[0]) } else { 0.0 });
        v.push(if ok { dequantize(px[1]) } else { 0.0 });
        valid.push(ok);
    }
    Ok(FlowField::from_components(w, h, u, v)?.with_valid(Mask::from_vec(w, h, valid)?)?)
}

pub fn read_kitti_png(path: impl AsRef<Path>) -> Result<FlowField> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.into(),
        source,
    })?;
    match img {
        DynamicImage::ImageRgb16(buf) => decode_kitti(&buf),
        other => Err(Error::format(
            path,
            format!("expected a 16-bit RGB flow PNG, found {:?}", other.color()),
        )),
    }
}

pub fn write_kitti_png(path: impl AsRef<Path>, flow: &FlowField) -> Result<()> {
    let path = path.as_ref();
    let buf = encode_kitti(flow).map_err(|e| match e {
        Error::Format { detail, .. } => Error::format(path, detail),
        e => e,
    })?;
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: path.into(),
            source,
        })
}
