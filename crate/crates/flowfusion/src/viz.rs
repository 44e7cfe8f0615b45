//! PNG renderings of flows and diagnostic maps.

use std::path::Path;

use flowfusion_core::color::flow_to_color;
use flowfusion_core::metrics::{Comparison, IndicatorClass};
use flowfusion_core::{FlowField, ImageBuffer};

use crate::error::{Error, Result};
use crate::imageio::write_rgb8;

pub fn write_flow_color(path: impl AsRef<Path>, flow: &FlowField, max_mag: Option<f64>) -> Result<()> {
    let img = flow_to_color(flow, max_mag);
    write_rgb8(path, flow.width(), flow.height(), img.to_u8())
}

fn write_classes<T: Copy>(
    path: &Path,
    width: usize,
    height: usize,
    classes: &[T],
    rgb: impl Fn(T) -> [u8; 3],
) -> Result<()> {
    if classes.len() != width * height {
        return Err(Error::format(
            path,
            format!("{} classes for a {width}x{height} map", classes.len()),
        ));
    }
    write_rgb8(path, width, height, classes.iter().flat_map(|&c| rgb(c)).collect())
}

pub fn write_indicator(path: impl AsRef<Path>, width: usize, height: usize, classes: &[IndicatorClass]) -> Result<()> {
    write_classes(path.as_ref(), width, height, classes, IndicatorClass::rgb)
}

pub fn write_comparison(path: impl AsRef<Path>, width: usize, height: usize, classes: &[Comparison]) -> Result<()> {
    write_classes(path.as_ref(), width, height, classes, Comparison::rgb)
}

/// Gray EPE map: black is 0, white is `max_epe` or more.
pub fn write_epe_map(path: impl AsRef<Path>, epe: &ImageBuffer, max_epe: f64) -> Result<()> {
    let scale = if max_epe > 0.0 { max_epe } else { 1.0 };
    let rgb = epe
        .data()
        .iter()
        .flat_map(|&e| {
            let g = ((e / scale).clamp(0.0, 1.0) * 255.0).round() as u8;
            [g, g, g]
        })
        .collect();
    write_rgb8(path, epe.width(), epe.height(), rgb)
}
