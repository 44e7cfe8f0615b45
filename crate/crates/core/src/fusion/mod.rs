//! Multi-frame fusion: candidate assembly, oracle and heuristic selection,
//! and the learned fusion network.

mod net;
mod train;

pub use net::{fuse, pack_input, FusionInputConfig, FusionNet, FLOW_SCALE, PAD_MULTIPLE};
pub use train::{prepare_samples, train_fusion, train_fusion_with, FusionSample, TrainConfig, TrainOutcome};

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::estimate::{Frame, TwoFrameEstimator};
use crate::flow::{brightness_error, compose_warp_chain, warp_flow, FlowField};
use crate::image::ImageBuffer;

/// The fusion inputs at frame `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    /// `w(t -> t+1)` from the two-frame estimator.
    pub current: FlowField,
    /// `w(t-1 -> t)` carried into frame `t`; its mask marks lookups that stayed in bounds.
    pub warped: FlowField,
    pub err_current: ImageBuffer,
    pub err_warped: ImageBuffer,
    /// `I_t`.
    pub frame: ImageBuffer,
    /// Older predictions, nearest first, for multi-frame oracle studies.
    pub extra: Vec<FlowField>,
}

impl CandidateSet {
    pub fn new(
        current: FlowField,
        warped: FlowField,
        err_current: ImageBuffer,
        err_warped: ImageBuffer,
        frame: ImageBuffer,
    ) -> Result<Self> {
        let dims = current.dims();
        warped.check_dims(dims)?;
        for img in [&err_current, &err_warped, &frame] {
            img.check_same_dims(dims)?;
        }
        for e in [&err_current, &err_warped] {
            if e.channels() != 1 {
                return Err(Error::ChannelMismatch {
                    expected: 1,
                    found: e.channels(),
                });
            }
        }
        Ok(Self {
            current,
            warped,
            err_current,
            err_warped,
            frame,
            extra: Vec::new(),
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.current.dims()
    }

    /// All candidate flows: current, warped, then the extras.
    pub fn flows(&self) -> Vec<&FlowField> {
        let mut v = Vec::with_capacity(2 + self.extra.len());
        v.push(&self.current);
        v.push(&self.warped);
        v.extend(self.extra.iter());
        v
    }

    /// Crops every member to the given window.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        Ok(Self {
            current: self.current.crop(x0, y0, w, h)?,
            warped: self.warped.crop(x0, y0, w, h)?,
            err_current: self.err_current.crop(x0, y0, w, h)?,
            err_warped: self.err_warped.crop(x0, y0, w, h)?,
            frame: self.frame.crop(x0, y0, w, h)?,
            extra: self.extra.iter().map(|f| f.crop(x0, y0, w, h)).collect::<Result<_>>()?,
        })
    }
}

fn check_frames(frames: &[Frame<'_>]) -> Result<()> {
    let first = frames[0].image;
    for f in &frames[1..] {
        f.image.check_same_dims(first.dims())?;
        if f.image.channels() != first.channels() {
            return Err(Error::ChannelMismatch {
                expected: first.channels(),
                found: f.image.channels(),
            });
        }
    }
    Ok(())
}

fn estimate(est: &dyn TwoFrameEstimator, from: Frame<'_>, to: Frame<'_>) -> Result<FlowField> {
    let f = est.estimate(from, to)?;
    f.check_dims(from.image.dims())?;
    Ok(f)
}

/// Runs the estimator on `(t-1, t)`, `(t, t-1)` and `(t, t+1)` and builds
/// both candidates with their brightness errors against `I_{t+1}`.
pub fn build_candidates(
    prev: Frame<'_>,
    cur: Frame<'_>,
    next: Frame<'_>,
    est: &dyn TwoFrameEstimator,
) -> Result<CandidateSet> {
    build_candidates_multi(&[prev, cur, next], est)
}

/// Like [`build_candidates`] over `frames = [I_{t-m}, .., I_t, I_{t+1}]`
/// (oldest first, `m >= 1`). Every older forward flow is carried to frame
/// `t` through the chain of backward flows and stored in `extra`.
pub fn build_candidates_multi(frames: &[Frame<'_>], est: &dyn TwoFrameEstimator) -> Result<CandidateSet> {
    if frames.len() < 3 {
        return Err(Error::TooFewCandidates {
            needed: 3,
            found: frames.len(),
        });
    }
    check_frames(frames)?;
    let t = frames.len() - 2;
    let (cur, next) = (frames[t], frames[t + 1]);
    let current = estimate(est, cur, next)?;
    let mut fwd = Vec::with_capacity(t);
    let mut bwd = Vec::with_capacity(t);
    for i in 0..t {
        fwd.push(estimate(est, frames[i], frames[i + 1])?);
        bwd.push(estimate(est, frames[i + 1], frames[i])?);
    }
    let warped = warp_flow(&fwd[t - 1], &bwd[t - 1])?;
    let err_current = brightness_error(cur.image, next.image, &current)?;
    let err_warped = brightness_error(cur.image, next.image, &warped)?;
    let mut set = CandidateSet::new(current, warped, err_current, err_warped, cur.image.clone())?;
    for s in (0..t - 1).rev() {
        set.extra.push(compose_warp_chain(&fwd[s], &bwd[s..t])?);
    }
    Ok(set)
}

/// Per pixel, the candidate closest to `gt`; ties go to the earliest one.
/// Returns the fused field and the index chosen at every pixel.
pub fn oracle_fuse(candidates: &[&FlowField], gt: &FlowField) -> Result<(FlowField, Vec<usize>)> {
    if candidates.len() < 2 {
        return Err(Error::TooFewCandidates {
            needed: 2,
            found: candidates.len(),
        });
    }
    for c in candidates {
        c.check_dims(gt.dims())?;
    }
    let (w, h) = gt.dims();
    let mut u = Vec::with_capacity(w * h);
    let mut v = Vec::with_capacity(w * h);
    let mut choice = Vec::with_capacity(w * h);
    for i in 0..w * h {
        let (gu, gv) = gt.at_index(i);
        let mut best = 0;
        let mut best_err = f64::INFINITY;
        for (k, c) in candidates.iter().enumerate() {
            let (cu, cv) = c.at_index(i);
            let e = libm::hypot(cu - gu, cv - gv);
            if e < best_err {
                best = k;
                best_err = e;
            }
        }
        let (cu, cv) = candidates[best].at_index(i);
        u.push(cu);
        v.push(cv);
        choice.push(best);
    }
    Ok((FlowField::from_components(w, h, u, v)?, choice))
}

/// Per pixel, the candidate with the smaller brightness error. Out-of-frame
/// warped pixels and ties yield the current flow.
pub fn heuristic_fuse(set: &CandidateSet) -> FlowField {
    let (w, h) = set.dims();
    let mut out = set.current.clone();
    let _ = out.set_valid(None);
    let ec = set.err_current.data();
    let ew = set.err_warped.data();
    for i in 0..w * h {
        let (x, y) = (i % w, i / w);
        if set.warped.is_valid(x, y) && ew[i] < ec[i] {
            let (u, v) = set.warped.at_index(i);
            out.set(x, y, u, v);
        }
    }
    out
}
