//! Multi-frame optical flow fusion.
//!
//! A previous-frame flow is brought into the current frame's coordinates by
//! backward warping it with the flow into the past, giving a second candidate
//! for the current motion. Candidates are fused by a ground-truth oracle, a
//! brightness-error heuristic, or a small encoder-decoder network trained with
//! a robust multi-level loss.
//!
//! This crate is `no_std` (it needs `alloc`) and contains only the numerical
//! parts: flow math, two-frame estimators, the reverse-mode autodiff engine,
//! fusion, metrics and the synthetic sequence generator. File formats and the
//! command line live in the `flowfusion` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod autodiff;
pub mod color;
pub mod error;
pub mod estimate;
pub mod flow;
pub mod fusion;
pub mod image;
pub mod metrics;
pub mod synth;

pub use error::{Error, Result};
pub use flow::FlowField;
pub use image::{ImageBuffer, Mask};
