use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::net::{pack_input, FusionInputConfig, FusionNet, PAD_MULTIPLE};
use super::{build_candidates, CandidateSet};
use crate::autodiff::{robust_loss, Adam, AdamConfig, LossConfig, LossTarget, Tape, Tensor};
use crate::error::{Error, Result};
use crate::estimate::{Frame, TwoFrameEstimator};
use crate::flow::FlowField;
use crate::synth::SequenceSample;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    /// Side of the square training crops.
    pub crop_size: usize,
    /// Seeds initialization, shuffling and crop placement.
    pub seed: u64,
    pub loss: LossConfig,
    pub optimizer: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            batch_size: 4,
            crop_size: 64,
            seed: 0,
            loss: LossConfig::single_level(),
            optimizer: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.batch_size == 0 {
            return Err(Error::InvalidParameter("steps and batch_size must be positive".into()));
        }
        if self.crop_size < PAD_MULTIPLE || self.crop_size % PAD_MULTIPLE != 0 {
            return Err(Error::InvalidParameter(format!(
                "crop_size must be a positive multiple of {PAD_MULTIPLE}, got {}",
                self.crop_size
            )));
        }
        if self.loss.alpha.len() != 1 {
            return Err(Error::InvalidParameter(
                "the fusion network has a single output; loss.alpha must have one entry".into(),
            ));
        }
        self.loss.validate()?;
        self.optimizer.validate()
    }
}

/// One training example: packed network input and ground truth at frame `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionSample {
    /// Raw packed input, `[1, C, H, W]`.
    pub input: Tensor,
    pub target: LossTarget,
    pub frame_channels: usize,
}

impl FusionSample {
    pub fn new(set: &CandidateSet, gt: &FlowField, cfg: &FusionInputConfig) -> Result<Self> {
        gt.check_dims(set.dims())?;
        Ok(Self {
            input: pack_input(set, cfg),
            target: LossTarget::from_fields(&[gt])?,
            frame_channels: set.frame.channels(),
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        let s = self.input.shape();
        (s[3], s[2])
    }
}

/// Candidate sets and ground truth for every interior frame of every sequence.
pub fn prepare_samples(
    sequences: &[&SequenceSample],
    est: &dyn TwoFrameEstimator,
    cfg: &FusionInputConfig,
) -> Result<Vec<FusionSample>> {
    let mut out = Vec::new();
    for seq in sequences {
        for t in 1..seq.len().saturating_sub(1) {
            let f = |i: usize| Frame::new(i, &seq.frames[i]);
            let set = build_candidates(f(t - 1), f(t), f(t + 1), est)?;
            out.push(FusionSample::new(&set, &seq.gt_fwd[t], cfg)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: FusionNet,
    /// Total loss at every step.
    pub losses: Vec<f64>,
}

fn crop_sample(
    s: &FusionSample,
    x0: usize,
    y0: usize,
    size: usize,
    input: &mut Vec<f64>,
    target: &mut Vec<f64>,
    valid: &mut Vec<bool>,
) {
    let (w, _) = s.dims();
    let c = s.input.shape()[1];
    let plane = s.input.len() / c;
    for k in 0..c {
        for y in y0..y0 + size {
            let row = k * plane + y * w + x0;
            input.extend_from_slice(&s.input.data()[row..row + size]);
        }
    }
    for k in 0..2 {
        for y in y0..y0 + size {
            let row = k * plane + y * w + x0;
            target.extend_from_slice(&s.target.flow.data()[row..row + size]);
        }
    }
    for y in y0..y0 + size {
        valid.extend_from_slice(&s.target.valid[y * w + x0..y * w + x0 + size]);
    }
}

pub fn train_fusion(samples: &[FusionSample], cfg: &TrainConfig, icfg: &FusionInputConfig) -> Result<TrainOutcome> {
    train_fusion_with(samples, cfg, icfg, |_, _| {})
}

/// Trains a fresh network, calling `on_step(step, loss)` after every update.
pub fn train_fusion_with<F>(
    samples: &[FusionSample],
    cfg: &TrainConfig,
    icfg: &FusionInputConfig,
    mut on_step: F,
) -> Result<TrainOutcome>
where
    F: FnMut(usize, f64),
{
    cfg.validate()?;
    let first = samples.first().ok_or(Error::EmptyDataset)?;
    let frame_channels = first.frame_channels;
    let channels = icfg.channels(frame_channels);
    for s in samples {
        if s.input.shape()[1] != channels {
            return Err(Error::ChannelMismatch {
                expected: channels,
                found: s.input.shape()[1],
            });
        }
    }
    // every sample must hold a crop; smaller sets train on their largest multiple-of-8 window
    let min_side = samples
        .iter()
        .map(|s| {
            let (w, h) = s.dims();
            w.min(h)
        })
        .min()
        .unwrap_or(0);
    let size = cfg.crop_size.min(min_side / PAD_MULTIPLE * PAD_MULTIPLE);
    if size == 0 {
        return Err(Error::InvalidParameter(format!(
            "training samples must be at least {PAD_MULTIPLE}x{PAD_MULTIPLE}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = FusionNet::new(*icfg, frame_channels, &mut rng);
    let mut adam = Adam::new(cfg.optimizer, net.params());
    let weights: Vec<usize> = net.weight_indices().collect();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut cursor = order.len();
    let mut losses = Vec::with_capacity(cfg.steps);
    let b = cfg.batch_size;

    for step in 0..cfg.steps {
        let mut input = Vec::with_capacity(b * channels * size * size);
        let mut target = Vec::with_capacity(b * 2 * size * size);
        let mut valid = Vec::with_capacity(b * size * size);
        for _ in 0..b {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let s = &samples[order[cursor]];
            cursor += 1;
            let (w, h) = s.dims();
            let x0 = rng.random_range(0..=w - size);
            let y0 = rng.random_range(0..=h - size);
            crop_sample(s, x0, y0, size, &mut input, &mut target, &mut valid);
        }
        let mut x = Tensor::from_vec(&[b, channels, size, size], input)?;
        net.normalize(&mut x)?;
        let target = LossTarget {
            flow: Tensor::from_vec(&[b, 2, size, size], target)?,
            valid,
        };

        let mut tape = Tape::new();
        let xv = tape.leaf(x);
        let (out, params) = net.record(&mut tape, xv)?;
        let wvars: Vec<_> = weights.iter().map(|&i| params[i]).collect();
        let loss = match robust_loss(&mut tape, &[out], core::slice::from_ref(&target), &wvars, &cfg.loss) {
            Err(Error::EmptyValidSet) => {
                // a crop without valid ground truth carries no signal
                losses.push(0.0);
                on_step(step, 0.0);
                continue;
            }
            r => r?,
        };
        let value = tape.value(loss).item();
        if !value.is_finite() {
            return Err(Error::NonFiniteLoss { step, value });
        }
        tape.backward(loss)?;
        let grads: Vec<Vec<f64>> = params.iter().map(|&p| tape.grad(p)).collect();
        if let Some(i) = grads.iter().position(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite { index: i });
        }
        adam.step(net.params_mut(), &grads)?;
        losses.push(value);
        on_step(step, value);
    }
    Ok(TrainOutcome { net, losses })
}
