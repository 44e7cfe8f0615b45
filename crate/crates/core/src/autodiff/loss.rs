//! Multi-level robust flow loss with weight decay.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::ops;
use super::tape::{LossNorm, Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::flow::FlowField;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct LossConfig {
    /// Per-level weights, finest first.
    pub alpha: Vec<f64>,
    pub epsilon: f64,
    pub q: f64,
    /// Weight decay on convolution weights (biases excluded).
    pub gamma: f64,
    pub norm: LossNorm,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            alpha: vec![0.005, 0.01, 0.02, 0.08, 0.32],
            epsilon: 0.01,
            q: 0.4,
            gamma: 0.0004,
            norm: LossNorm::L1,
        }
    }
}

impl LossConfig {
    /// The single-output setting used by the fusion network.
    pub fn single_level() -> Self {
        Self {
            alpha: vec![0.005],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(format!("loss: {m}")));
        if self.alpha.is_empty() || self.alpha.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return bad("alpha must be a non-empty list of non-negative weights");
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be positive");
        }
        if !(self.q > 0.0 && self.q <= 1.0) {
            return bad("q must lie in (0, 1]");
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad("gamma must be non-negative");
        }
        Ok(())
    }
}

/// Ground truth for one output level: `[n, 2, h, w]` flow plus `[n, h, w]` validity.
#[derive(Debug, Clone, PartialEq)]
pub struct LossTarget {
    pub flow: Tensor,
    pub valid: Vec<bool>,
}

impl LossTarget {
    /// Stacks a batch of equally sized ground-truth fields.
    pub fn from_fields(fields: &[&FlowField]) -> Result<Self> {
        let first = fields.first().ok_or(Error::EmptyDataset)?;
        let (w, h) = first.dims();
        let plane = w * h;
        let mut flow = Vec::with_capacity(2 * plane * fields.len());
        let mut valid = Vec::with_capacity(plane * fields.len());
        for f in fields {
            f.check_dims((w, h))?;
            flow.extend_from_slice(f.u());
            flow.extend_from_slice(f.v());
            valid.extend((0..plane).map(|i| f.is_valid(i % w, i / w)));
        }
        Ok(Self {
            flow: Tensor::from_vec(&[fields.len(), 2, h, w], flow)?,
            valid,
        })
    }

    /// Next coarser level: 2x2 mean of the vectors halved in length; a
    /// coarse pixel is valid only when all four fine pixels are.
    pub fn downsampled(&self) -> Result<Self> {
        let [n, _, h, w] = self.flow.dims4("loss target")?;
        let (oh, ow) = (h / 2, w / 2);
        if oh == 0 || ow == 0 {
            return Err(Error::Shape {
                op: "loss target",
                detail: format!("cannot halve a {w}x{h} target"),
            });
        }
        let src = self.flow.data();
        let mut flow = vec![0.0; n * 2 * oh * ow];
        let mut valid = vec![false; n * oh * ow];
        for b in 0..n {
            for y in 0..oh {
                for x in 0..ow {
                    let taps = [
                        (2 * y) * w + 2 * x,
                        (2 * y) * w + 2 * x + 1,
                        (2 * y + 1) * w + 2 * x,
                        (2 * y + 1) * w + 2 * x + 1,
                    ];
                    for c in 0..2 {
                        let plane = &src[(b * 2 + c) * h * w..][..h * w];
                        flow[((b * 2 + c) * oh + y) * ow + x] = 0.125 * taps.iter().map(|&i| plane[i]).sum::<f64>();
                    }
                    valid[(b * oh + y) * ow + x] = taps.iter().all(|&i| self.valid[b * h * w + i]);
                }
            }
        }
        Ok(Self {
            flow: Tensor::from_vec(&[n, 2, oh, ow], flow)?,
            valid,
        })
    }

    /// `levels` targets, finest first.
    pub fn pyramid(self, levels: usize) -> Result<Vec<Self>> {
        let mut out = Vec::with_capacity(levels);
        out.push(self);
        while out.len() < levels {
            let next = out.last().expect("non-empty").downsampled()?;
            out.push(next);
        }
        Ok(out)
    }
}

/// Total loss `sum_l alpha_l * penalty(pred_l, target_l) + gamma * |weights|^2`.
///
/// `preds` and `targets` are finest first and must have one entry per used
/// level; `preds.len()` may not exceed `cfg.alpha.len()`.
pub fn robust_loss(
    tape: &mut Tape,
    preds: &[Var],
    targets: &[LossTarget],
    weights: &[Var],
    cfg: &LossConfig,
) -> Result<Var> {
    if preds.is_empty() || preds.len() != targets.len() || preds.len() > cfg.alpha.len() {
        return Err(Error::InvalidParameter(format!(
            "loss over {} predictions, {} targets and {} level weights",
            preds.len(),
            targets.len(),
            cfg.alpha.len()
        )));
    }
    if targets.iter().all(|t| !t.valid.iter().any(|&v| v)) {
        return Err(Error::EmptyValidSet);
    }
    let mut terms = Vec::with_capacity(preds.len() + 1);
    for ((&p, t), &a) in preds.iter().zip(targets).zip(&cfg.alpha) {
        let pen = ops::robust_penalty(tape, p, &t.flow, &t.valid, cfg.epsilon, cfg.q, cfg.norm)?;
        terms.push(ops::scale(tape, pen, a));
    }
    if !weights.is_empty() && cfg.gamma > 0.0 {
        let wd = ops::sum_squares(tape, weights);
        terms.push(ops::scale(tape, wd, cfg.gamma));
    }
    let mut total = terms[0];
    for &t in &terms[1..] {
        total = ops::add(tape, total, t)?;
    }
    Ok(total)
}
