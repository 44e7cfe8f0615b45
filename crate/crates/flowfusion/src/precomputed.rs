//! Flow fields computed elsewhere, loaded by frame-pair file name.

use std::path::{Path, PathBuf};

use flowfusion_core::estimate::{Frame, TwoFrameEstimator};
use flowfusion_core::FlowField;

use crate::error::{Error, Result};
use crate::{flo, kitti};

pub const DEFAULT_PATTERN: &str = "flow_%06d_%06d";

/// Expands the two integer conversions (`%d` or `%0Nd`) of a printf-style
/// pattern with the source and target frame indices. `%%` is a literal `%`.
pub fn format_pair(pattern: &str, source: usize, target: usize) -> Result<String> {
    let mut out = String::with_capacity(pattern.len() + 8);
    let mut values = [source, target].into_iter();
    let mut chars = pattern.chars().peekable();
    while let Some(c) = chars.next() {
        if c != '%' {
            out.push(c);
            continue;
        }
        if chars.peek() == Some(&'%') {
            chars.next();
            out.push('%');
            continue;
        }
        let mut spec = String::new();
        while let Some(&d) = chars.peek() {
            if d.is_ascii_digit() {
                spec.push(d);
                chars.next();
            } else {
                break;
            }
        }
        if chars.next() != Some('d') {
            return Err(Error::Config(format!(
                "pattern `{pattern}`: only %d and %0Nd are supported"
            )));
        }
        let value = values
            .next()
            .ok_or_else(|| Error::Config(format!("pattern `{pattern}` has more than two fields")))?;
        let width: usize = if spec.is_empty() {
            0
        } else {
            spec.parse().expect("digits")
        };
        if spec.starts_with('0') {
            out.push_str(&format!("{value:0width$}"));
        } else {
            out.push_str(&format!("{value:width$}"));
        }
    }
    if values.next().is_some() {
        return Err(Error::Config(format!("pattern `{pattern}` needs two integer fields")));
    }
    Ok(out)
}

/// A [`TwoFrameEstimator`] that reads `<dir>/<pattern>.flo` (or `.png` in
/// KITTI encoding) for the pair `(from.index, to.index)`. A pattern that
/// already ends in `.flo` or `.png` is used as is.
#[derive(Debug, Clone)]
pub struct PrecomputedSource {
    dir: PathBuf,
    pattern: String,
}

impl PrecomputedSource {
    pub fn new(dir: impl Into<PathBuf>, pattern: impl Into<String>) -> Result<Self> {
        let pattern = pattern.into();
        format_pair(&pattern, 0, 0)?;
        Ok(Self {
            dir: dir.into(),
            pattern,
        })
    }

    pub fn with_default_pattern(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            pattern: DEFAULT_PATTERN.into(),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Candidate files for a pair, in lookup order.
    pub fn paths(&self, source: usize, target: usize) -> Result<Vec<PathBuf>> {
        let name = format_pair(&self.pattern, source, target)?;
        let base = self.dir.join(&name);
        Ok(if name.ends_with(".flo") || name.ends_with(".png") {
            vec![base]
        } else {
            vec![base.with_extension("flo"), base.with_extension("png")]
        })
    }

    pub fn load(&self, source: usize, target: usize) -> Result<FlowField> {
        let paths = self.paths(source, target)?;
        let Some(path) = paths.iter().find(|p| p.is_file()) else {
            return Err(Error::FlowNotFound { path: paths[0].clone() });
        };
        if path.extension().is_some_and(|e| e == "png") {
            kitti::read_kitti_png(path)
        } else {
            flo::read_flo(path)
        }
    }
}

impl TwoFrameEstimator for PrecomputedSource {
    fn name(&self) -> &str {
        "precomputed"
    }

    fn estimate(&self, from: Frame<'_>, to: Frame<'_>) -> flowfusion_core::Result<FlowField> {
        let flow = self.load(from.index, to.index).map_err(|e| match e {
            Error::Core(c) => c,
            e => flowfusion_core::Error::Estimator {
                name: self.name().into(),
                message: e.to_string(),
            },
        })?;
        let (w, h) = from.image.dims();
        if flow.dims() != (w, h) {
            return Err(flowfusion_core::Error::DimensionMismatch {
                expected_width: w,
                expected_height: h,
                found_width: flow.width(),
                found_height: flow.height(),
            });
        }
        Ok(flow)
    }
}
