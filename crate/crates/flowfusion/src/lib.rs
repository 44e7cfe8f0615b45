//! File formats, datasets, checkpoints, reports and the command line for
//! `flowfusion-core`.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod flo;
pub mod imageio;
pub mod kitti;
pub mod pipeline;
pub mod precomputed;
pub mod report;
pub mod viz;

pub use error::{Error, Result};
pub use flowfusion_core as core;
