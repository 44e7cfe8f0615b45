//! Frames as PNG (8 or 16 bit) and PNM, plus mask and RGB helpers.

use std::path::Path;

use flowfusion_core::{ImageBuffer, Mask};
use image::{DynamicImage, ImageFormat};

use crate::error::{Error, Result};

fn image_err(path: &Path) -> impl FnOnce(image::ImageError) -> Error + '_ {
    move |source| Error::Image {
        path: path.into(),
        source,
    }
}

/// Reads a frame with values scaled to `[0, 1]`. Gray stays single-channel,
/// color becomes RGB; alpha is dropped.
pub fn read_image(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let img = image::open(path).map_err(image_err(path))?;
    Ok(from_dynamic(img))
}

pub fn from_dynamic(img: DynamicImage) -> ImageBuffer {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let gray = !img.color().has_color();
    let sixteen = img.color().bytes_per_pixel() / img.color().channel_count() > 1;
    let data: Vec<f64> = match (gray, sixteen) {
        (true, false) => img
            .into_luma8()
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 255.0)
            .collect(),
        (true, true) => img
            .into_luma16()
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 65535.0)
            .collect(),
        (false, false) => img
            .into_rgb8()
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 255.0)
            .collect(),
        (false, true) => img
            .into_rgb16()
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 65535.0)
            .collect(),
    };
    ImageBuffer::from_vec(w, h, if gray { 1 } else { 3 }, data).expect("decoded buffer matches dimensions")
}

fn quantize(v: f64, max: f64) -> f64 {
    (v.clamp(0.0, 1.0) * max).round()
}

fn format_for(path: &Path) -> Result<ImageFormat> {
    ImageFormat::from_path(path).map_err(|_| Error::format(path, "unknown image extension"))
}

/// Writes a 1- or 3-channel frame, clamped to `[0, 1]`, at 8 or 16 bits.
/// The container follows the extension (`.png`, `.ppm`, `.pgm`).
pub fn write_image(path: impl AsRef<Path>, img: &ImageBuffer, sixteen_bit: bool) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = (img.width() as u32, img.height() as u32);
    let dynamic = match (img.channels(), sixteen_bit) {
        (1, false) => DynamicImage::ImageLuma8(
            image::ImageBuffer::from_raw(w, h, img.data().iter().map(|&v| quantize(v, 255.0) as u8).collect())
                .expect("sized"),
        ),
        (1, true) => DynamicImage::ImageLuma16(
            image::ImageBuffer::from_raw(w, h, img.data().iter().map(|&v| quantize(v, 65535.0) as u16).collect())
                .expect("sized"),
        ),
        (3, false) => DynamicImage::ImageRgb8(
            image::ImageBuffer::from_raw(w, h, img.data().iter().map(|&v| quantize(v, 255.0) as u8).collect())
                .expect("sized"),
        ),
        (3, true) => DynamicImage::ImageRgb16(
            image::ImageBuffer::from_raw(w, h, img.data().iter().map(|&v| quantize(v, 65535.0) as u16).collect())
                .expect("sized"),
        ),
        (c, _) => return Err(Error::format(path, format!("cannot store a {c}-channel image"))),
    };
    let fmt = format_for(path)?;
    dynamic.save_with_format(path, fmt).map_err(image_err(path))
}

/// Writes packed 8-bit RGB bytes as a PNG.
pub fn write_rgb8(path: impl AsRef<Path>, width: usize, height: usize, rgb: Vec<u8>) -> Result<()> {
    let path = path.as_ref();
    let buf: image::RgbImage = image::ImageBuffer::from_raw(width as u32, height as u32, rgb)
        .ok_or_else(|| Error::format(path, "RGB buffer does not match the dimensions"))?;
    buf.save_with_format(path, ImageFormat::Png).map_err(image_err(path))
}

/// Stores a mask as an 8-bit gray PNG (0 or 255).
pub fn write_mask(path: impl AsRef<Path>, mask: &Mask) -> Result<()> {
    let path = path.as_ref();
    let raw = mask.as_slice().iter().map(|&b| if b { 255u8 } else { 0 }).collect();
    let buf: image::GrayImage =
        image::ImageBuffer::from_raw(mask.width() as u32, mask.height() as u32, raw).expect("sized");
    buf.save_with_format(path, ImageFormat::Png).map_err(image_err(path))
}

/// Reads a mask; pixels at or above half intensity are set.
pub fn read_mask(path: impl AsRef<Path>) -> Result<Mask> {
    let img = read_image(path)?.to_gray();
    let (w, h) = img.dims();
    Ok(Mask::from_vec(w, h, img.data().iter().map(|&v| v >= 0.5).collect())?)
}
