//! Evaluation protocol: region-partitioned endpoint error, the KITTI outlier
//! rate, indicator and comparison maps, and the red-region analysis.

mod maps;

pub use maps::{
    analyze_red_regions, comparison_map, indicator_map, Comparison, IndicatorClass, IndicatorThresholds,
    RedRegionReport,
};

use alloc::vec::Vec;

use crate::error::Result;
use crate::flow::{out_of_boundary_mask, FlowField};
use crate::image::{ImageBuffer, Mask};

/// Per-pixel endpoint error.
pub fn epe_map(flow: &FlowField, gt: &FlowField) -> Result<ImageBuffer> {
    flow.check_dims(gt.dims())?;
    let data = epe_values(flow, gt);
    ImageBuffer::from_vec(flow.width(), flow.height(), 1, data)
}

fn epe_values(flow: &FlowField, gt: &FlowField) -> Vec<f64> {
    (0..flow.len())
        .map(|i| {
            let (a, b) = flow.at_index(i);
            let (c, d) = gt.at_index(i);
            libm::hypot(a - c, b - d)
        })
        .collect()
}

/// Mean endpoint error over `mask` (every pixel when `None`); `None` for an empty mask.
pub fn aepe(flow: &FlowField, gt: &FlowField, mask: Option<&Mask>) -> Result<Option<f64>> {
    flow.check_dims(gt.dims())?;
    if let Some(m) = mask {
        flow.check_dims(m.dims())?;
    }
    let epe = epe_values(flow, gt);
    Ok(masked_mean(&epe, mask))
}

pub(crate) fn masked_mean(values: &[f64], mask: Option<&Mask>) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, v) in values.iter().enumerate() {
        if mask.map_or(true, |m| m.as_slice()[i]) {
            sum += v;
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// Inside/outside partition from ground-truth motion plus the occlusion mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMasks {
    pub inside: Mask,
    pub outside: Mask,
    pub occluded: Mask,
}

impl RegionMasks {
    pub fn all(&self) -> Mask {
        self.inside.or(&self.outside)
    }
}

pub fn region_partition(gt: &FlowField, occlusion: &Mask) -> Result<RegionMasks> {
    gt.check_dims(occlusion.dims())?;
    let outside = out_of_boundary_mask(gt);
    Ok(RegionMasks {
        inside: outside.not(),
        outside,
        occluded: occlusion.clone(),
    })
}

/// KITTI outlier rate in percent: EPE above 3 px and above 5% of the GT length.
pub fn fl_score(flow: &FlowField, gt: &FlowField, valid: Option<&Mask>) -> Result<Option<f64>> {
    flow.check_dims(gt.dims())?;
    if let Some(m) = valid {
        flow.check_dims(m.dims())?;
    }
    let outliers: Vec<f64> = (0..flow.len())
        .map(|i| {
            let (a, b) = flow.at_index(i);
            let (c, d) = gt.at_index(i);
            let epe = libm::hypot(a - c, b - d);
            let mag = libm::hypot(c, d);
            if epe > 3.0 && epe > 0.05 * mag {
                100.0
            } else {
                0.0
            }
        })
        .collect();
    Ok(masked_mean(&outliers, valid))
}

/// One region's statistic: mean EPE and the pixel count it was taken over.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionStat {
    pub aepe: Option<f64>,
    pub pixels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub all: RegionStat,
    pub inside: RegionStat,
    pub outside: RegionStat,
    pub occluded: RegionStat,
    pub fl_all: Option<f64>,
}

impl MetricsReport {
    /// Evaluates `flow` against `gt` over ground-truth-valid pixels.
    pub fn compute(flow: &FlowField, gt: &FlowField, regions: &RegionMasks) -> Result<Self> {
        flow.check_dims(gt.dims())?;
        let epe = epe_values(flow, gt);
        let valid = gt.valid_mask();
        let stat = |m: &Mask| {
            let m = m.and(&valid);
            RegionStat {
                aepe: masked_mean(&epe, Some(&m)),
                pixels: m.count(),
            }
        };
        Ok(Self {
            all: stat(&regions.all()),
            inside: stat(&regions.inside),
            outside: stat(&regions.outside),
            occluded: stat(&regions.occluded),
            fl_all: fl_score(flow, gt, Some(&valid))?,
        })
    }
}

/// Sums per-image statistics into dataset-level ones, weighting by pixel count.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MetricsAccumulator {
    sums: [f64; 4],
    counts: [usize; 4],
    fl_sum: f64,
    fl_count: usize,
}

impl MetricsAccumulator {
    pub fn add(&mut self, r: &MetricsReport) {
        for (k, s) in [r.all, r.inside, r.outside, r.occluded].iter().enumerate() {
            if let Some(a) = s.aepe {
                self.sums[k] += a * s.pixels as f64;
                self.counts[k] += s.pixels;
            }
        }
        if let Some(fl) = r.fl_all {
            self.fl_sum += fl * r.all.pixels as f64;
            self.fl_count += r.all.pixels;
        }
    }

    pub fn finish(&self) -> MetricsReport {
        let stat = |k: usize| RegionStat {
            aepe: (self.counts[k] > 0).then(|| self.sums[k] / self.counts[k] as f64),
            pixels: self.counts[k],
        };
        MetricsReport {
            all: stat(0),
            inside: stat(1),
            outside: stat(2),
            occluded: stat(3),
            fl_all: (self.fl_count > 0).then(|| self.fl_sum / self.fl_count as f64),
        }
    }
}
