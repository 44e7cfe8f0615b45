//! Per-pixel diagnostic maps.

use alloc::vec::Vec;

use super::{epe_values, masked_mean};
use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::image::{ImageBuffer, Mask};

/// How a fused vector relates to its two candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IndicatorClass {
    /// The candidates agree.
    Blue,
    /// The candidates disagree and the fused flow follows the current flow.
    Yellow,
    /// The candidates disagree and the fused flow follows the warped flow.
    Cyan,
    /// The fused flow differs from both candidates.
    Red,
}

impl IndicatorClass {
    pub const ALL: [IndicatorClass; 4] = [
        IndicatorClass::Blue,
        IndicatorClass::Yellow,
        IndicatorClass::Cyan,
        IndicatorClass::Red,
    ];

    pub fn rgb(self) -> [u8; 3] {
        match self {
            IndicatorClass::Blue => [0, 0, 255],
            IndicatorClass::Yellow => [255, 207, 0],
            IndicatorClass::Cyan => [0, 255, 255],
            IndicatorClass::Red => [255, 0, 0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndicatorThresholds {
    /// Candidates closer than this (pixels) count as agreeing.
    pub agree: f64,
    /// The fused vector closer than this to a candidate counts as following it.
    pub matching: f64,
}

impl Default for IndicatorThresholds {
    fn default() -> Self {
        Self {
            agree: 5.0,
            matching: 5.0,
        }
    }
}

fn dist(a: &FlowField, b: &FlowField, i: usize) -> f64 {
    let (p, q) = a.at_index(i);
    let (r, s) = b.at_index(i);
    libm::hypot(p - r, q - s)
}

pub fn indicator_map(
    fused: &FlowField,
    current: &FlowField,
    warped: &FlowField,
    thresholds: IndicatorThresholds,
) -> Result<Vec<IndicatorClass>> {
    current.check_dims(fused.dims())?;
    warped.check_dims(fused.dims())?;
    Ok((0..fused.len())
        .map(|i| {
            if dist(current, warped, i) < thresholds.agree {
                IndicatorClass::Blue
            } else if dist(fused, current, i) < thresholds.matching {
                IndicatorClass::Yellow
            } else if dist(fused, warped, i) < thresholds.matching {
                IndicatorClass::Cyan
            } else {
                IndicatorClass::Red
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Comparison {
    /// The first method is better by more than the margin.
    Green,
    /// The second method is better by more than the margin.
    Red,
    Gray,
}

impl Comparison {
    pub fn rgb(self) -> [u8; 3] {
        match self {
            Comparison::Green => [0, 200, 0],
            Comparison::Red => [220, 0, 0],
            Comparison::Gray => [128, 128, 128],
        }
    }
}

/// Compares two EPE maps pixel by pixel with a strict margin.
pub fn comparison_map(epe_a: &ImageBuffer, epe_b: &ImageBuffer, margin: f64) -> Result<Vec<Comparison>> {
    epe_b.check_same_dims(epe_a.dims())?;
    if epe_a.channels() != 1 || epe_b.channels() != 1 {
        return Err(Error::ChannelMismatch {
            expected: 1,
            found: epe_a.channels().max(epe_b.channels()),
        });
    }
    Ok(epe_a
        .data()
        .iter()
        .zip(epe_b.data())
        .map(|(a, b)| {
            if b - a > margin {
                Comparison::Green
            } else if a - b > margin {
                Comparison::Red
            } else {
                Comparison::Gray
            }
        })
        .collect())
}

/// Statistics inside the red class of an indicator map.
#[derive(Debug, Clone, PartialEq)]
pub struct RedRegionReport {
    pub pixels: usize,
    /// One entry per candidate, in the order given.
    pub aepe_candidates: Vec<Option<f64>>,
    pub aepe_fused: Option<f64>,
    pub aepe_oracle: Option<f64>,
    /// Percentage of red pixels where the fused flow beats the oracle.
    pub fused_better_than_oracle: Option<f64>,
}

pub fn analyze_red_regions(
    fused: &FlowField,
    candidates: &[&FlowField],
    oracle: &FlowField,
    gt: &FlowField,
    classes: &[IndicatorClass],
) -> Result<RedRegionReport> {
    for f in candidates.iter().copied().chain([oracle, gt]) {
        f.check_dims(fused.dims())?;
    }
    if classes.len() != fused.len() {
        return Err(Error::BufferLength {
            expected: fused.len(),
            found: classes.len(),
        });
    }
    let red = Mask::from_vec(
        fused.width(),
        fused.height(),
        classes.iter().map(|c| *c == IndicatorClass::Red).collect(),
    )?;
    let fused_epe = epe_values(fused, gt);
    let oracle_epe = epe_values(oracle, gt);
    let better: Vec<f64> = fused_epe
        .iter()
        .zip(&oracle_epe)
        .map(|(f, o)| if f < o { 100.0 } else { 0.0 })
        .collect();
    Ok(RedRegionReport {
        pixels: red.count(),
        aepe_candidates: candidates
            .iter()
            .map(|c| masked_mean(&epe_values(c, gt), Some(&red)))
            .collect(),
        aepe_fused: masked_mean(&fused_epe, Some(&red)),
        aepe_oracle: masked_mean(&oracle_epe, Some(&red)),
        fused_better_than_oracle: masked_mean(&better, Some(&red)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn c(u: f64, v: f64) -> FlowField {
        FlowField::constant(1, 1, u, v)
    }

    #[test]
    fn indicator_examples() {
        let t = IndicatorThresholds::default();
        let same = c(3.0, 1.0);
        for fused in [c(0.0, 0.0), c(50.0, -20.0)] {
            assert_eq!(indicator_map(&fused, &same, &same, t).unwrap(), [IndicatorClass::Blue]);
        }
        let cur = c(10.0, 0.0);
        let warped = c(0.0, 0.0);
        assert_eq!(
            indicator_map(&c(10.0, 0.0), &cur, &warped, t).unwrap(),
            [IndicatorClass::Yellow]
        );
        assert_eq!(
            indicator_map(&c(1.0, 1.0), &cur, &warped, t).unwrap(),
            [IndicatorClass::Cyan]
        );
        // |(5,5)-(10,0)| = |(5,5)-(0,0)| = 7.07 > 5
        assert_eq!(
            indicator_map(&c(5.0, 5.0), &cur, &warped, t).unwrap(),
            [IndicatorClass::Red]
        );
    }

    #[test]
    fn comparison_examples() {
        let z = ImageBuffer::filled(3, 2, 1, 0.0);
        let five = ImageBuffer::filled(3, 2, 1, 5.0);
        assert!(comparison_map(&z, &z, 0.5)
            .unwrap()
            .iter()
            .all(|&k| k == Comparison::Gray));
        assert!(comparison_map(&z, &five, 0.5)
            .unwrap()
            .iter()
            .all(|&k| k == Comparison::Green));
        assert!(comparison_map(&five, &z, 0.5)
            .unwrap()
            .iter()
            .all(|&k| k == Comparison::Red));
        let half = ImageBuffer::filled(3, 2, 1, 0.5);
        assert!(comparison_map(&z, &half, 0.5)
            .unwrap()
            .iter()
            .all(|&k| k == Comparison::Gray));
    }

    #[test]
    fn red_region_examples() {
        let gt = FlowField::from_components(2, 1, vec![20.0, 0.0], vec![0.0, 0.0]).unwrap();
        let cur = FlowField::from_components(2, 1, vec![10.0, 0.0], vec![0.0, 0.0]).unwrap();
        let warped = FlowField::zeros(2, 1);
        let oracle = cur.clone();
        let classes = indicator_map(&gt, &cur, &warped, IndicatorThresholds::default()).unwrap();
        assert_eq!(classes, [IndicatorClass::Red, IndicatorClass::Blue]);
        let rep = analyze_red_regions(&gt, &[&cur, &warped], &oracle, &gt, &classes).unwrap();
        assert_eq!(rep.pixels, 1);
        assert_eq!(rep.aepe_fused, Some(0.0));
        assert_eq!(rep.aepe_candidates, [Some(10.0), Some(20.0)]);
        assert_eq!(rep.fused_better_than_oracle, Some(100.0));

        // Fused equal to the current flow leaves nothing red.
        let classes = indicator_map(&cur, &cur, &warped, IndicatorThresholds::default()).unwrap();
        let rep = analyze_red_regions(&cur, &[&cur, &warped], &oracle, &gt, &classes).unwrap();
        assert_eq!(rep.pixels, 0);
        assert_eq!(rep.aepe_fused, None);
        assert_eq!(rep.fused_better_than_oracle, None);
    }
}
