//! Two-frame flow estimators.
//!
//! Everything downstream of the estimator (candidate construction, fusion,
//! evaluation) works through [`TwoFrameEstimator`], so classical methods and
//! externally computed flows are interchangeable.

mod horn_schunck;
mod lucas_kanade;
mod pyramid;

pub use horn_schunck::{HornSchunck, HsParams};
pub use lucas_kanade::{LkParams, LucasKanade};

use alloc::boxed::Box;

use crate::error::Result;
use crate::flow::FlowField;
use crate::image::ImageBuffer;

/// A frame together with its index in the sequence.
///
/// Built-in estimators only look at the pixels; sources of precomputed flow
/// use the index to locate the stored field.
#[derive(Debug, Clone, Copy)]
pub struct Frame<'a> {
    pub index: usize,
    pub image: &'a ImageBuffer,
}

impl<'a> Frame<'a> {
    pub fn new(index: usize, image: &'a ImageBuffer) -> Self {
        Self { index, image }
    }
}

/// Estimates the flow that maps `from` onto `to`.
///
/// Implementations must be deterministic and return a field with the frames'
/// dimensions.
pub trait TwoFrameEstimator {
    fn name(&self) -> &str;

    fn estimate(&self, from: Frame<'_>, to: Frame<'_>) -> Result<FlowField>;
}

impl<T: TwoFrameEstimator + ?Sized> TwoFrameEstimator for &T {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn estimate(&self, from: Frame<'_>, to: Frame<'_>) -> Result<FlowField> {
        (**self).estimate(from, to)
    }
}

impl<T: TwoFrameEstimator + ?Sized> TwoFrameEstimator for Box<T> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn estimate(&self, from: Frame<'_>, to: Frame<'_>) -> Result<FlowField> {
        (**self).estimate(from, to)
    }
}

/// Returns the pair's gray versions after checking they match in size.
fn gray_pair(from: Frame<'_>, to: Frame<'_>) -> Result<(ImageBuffer, ImageBuffer)> {
    to.image.check_same_dims(from.image.dims())?;
    Ok((from.image.to_gray(), to.image.to_gray()))
}
