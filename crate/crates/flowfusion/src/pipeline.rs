//! Dataset-level evaluation and the oracle study.

use flowfusion_core::estimate::{Frame, TwoFrameEstimator};
use flowfusion_core::fusion::{
    build_candidates, build_candidates_multi, fuse, heuristic_fuse, oracle_fuse, CandidateSet, FusionNet,
};
use flowfusion_core::metrics::{
    analyze_red_regions, indicator_map, region_partition, IndicatorThresholds, MetricsAccumulator, MetricsReport,
    RedRegionReport,
};
use flowfusion_core::synth::SequenceSample;
use flowfusion_core::FlowField;

use crate::error::Result;
use crate::report::{Report, Value};

fn frame(seq: &SequenceSample, i: usize) -> Frame<'_> {
    Frame::new(i, &seq.frames[i])
}

/// Candidates at every interior frame `t` of `seq`, in order.
pub fn sequence_candidates(seq: &SequenceSample, est: &dyn TwoFrameEstimator) -> Result<Vec<(usize, CandidateSet)>> {
    (1..seq.len().saturating_sub(1))
        .map(|t| {
            Ok((
                t,
                build_candidates(frame(seq, t - 1), frame(seq, t), frame(seq, t + 1), est)?,
            ))
        })
        .collect()
}

/// Pixel-weighted sums of red-region statistics across images.
#[derive(Debug, Clone, Default)]
struct RedAccumulator {
    pixels: usize,
    sums: Vec<f64>,
}

impl RedAccumulator {
    fn add(&mut self, r: &RedRegionReport) {
        let values: Vec<f64> = r
            .aepe_candidates
            .iter()
            .chain([&r.aepe_fused, &r.aepe_oracle, &r.fused_better_than_oracle])
            .map(|v| v.unwrap_or(0.0) * r.pixels as f64)
            .collect();
        if self.sums.is_empty() {
            self.sums = vec![0.0; values.len()];
        }
        for (s, v) in self.sums.iter_mut().zip(values) {
            *s += v;
        }
        self.pixels += r.pixels;
    }

    fn finish(&self, candidates: usize) -> RedRegionReport {
        let mean = |k: usize| (self.pixels > 0).then(|| self.sums[k] / self.pixels as f64);
        RedRegionReport {
            pixels: self.pixels,
            aepe_candidates: (0..candidates).map(mean).collect(),
            aepe_fused: mean(candidates),
            aepe_oracle: mean(candidates + 1),
            fused_better_than_oracle: mean(candidates + 2),
        }
    }
}

/// Dataset-level metrics of every fusion method.
#[derive(Debug, Clone)]
pub struct EvalSummary {
    pub images: usize,
    /// `current`, `warped`, `heuristic`, `oracle` and, with a network, `fused`.
    pub methods: Vec<(String, MetricsReport)>,
    pub red: Option<RedRegionReport>,
}

impl EvalSummary {
    pub fn method(&self, name: &str) -> Option<&MetricsReport> {
        self.methods.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    pub fn report(&self) -> Report {
        let mut r = Report::new();
        r.push("images", Value::Count(self.images));
        for (name, m) in &self.methods {
            r.push_method(name.clone(), *m);
        }
        if let Some(red) = &self.red {
            r.push_red_regions("red", &["current", "warped"], red);
        }
        r
    }
}

/// Evaluates the candidates, the heuristic, the oracle and (given a network)
/// the learned fusion at every interior frame, pooling pixels over the dataset.
pub fn evaluate_sequences(
    sequences: &[&SequenceSample],
    est: &dyn TwoFrameEstimator,
    net: Option<&FusionNet>,
    thresholds: IndicatorThresholds,
) -> Result<EvalSummary> {
    let mut names = vec!["current", "warped", "heuristic", "oracle"];
    if net.is_some() {
        names.push("fused");
    }
    let mut acc = vec![MetricsAccumulator::default(); names.len()];
    let mut red = RedAccumulator::default();
    let mut images = 0;
    for seq in sequences {
        for (t, set) in sequence_candidates(seq, est)? {
            let gt = &seq.gt_fwd[t];
            let regions = region_partition(gt, &seq.occlusion[t])?;
            let (oracle, _) = oracle_fuse(&[&set.current, &set.warped], gt)?;
            let mut flows = vec![set.current.clone(), set.warped.clone(), heuristic_fuse(&set), oracle];
            if let Some(net) = net {
                let fused = fuse(net, &set, net.input_config())?;
                let classes = indicator_map(&fused, &set.current, &set.warped, thresholds)?;
                red.add(&analyze_red_regions(
                    &fused,
                    &[&set.current, &set.warped],
                    &flows[3],
                    gt,
                    &classes,
                )?);
                flows.push(fused);
            }
            for (a, f) in acc.iter_mut().zip(&flows) {
                a.add(&MetricsReport::compute(f, gt, &regions)?);
            }
            images += 1;
        }
    }
    Ok(EvalSummary {
        images,
        methods: names
            .iter()
            .map(|n| n.to_string())
            .zip(acc.iter().map(|a| a.finish()))
            .collect(),
        red: net.map(|_| red.finish(2)),
    })
}

/// Oracle AEPE as the number of frames grows.
#[derive(Debug, Clone)]
pub struct OracleStudy {
    pub images: usize,
    pub current: MetricsReport,
    pub warped: MetricsReport,
    /// `(frames, metrics)` for 3, 4, ... frames; 3 frames fuse current and warped.
    pub oracle: Vec<(usize, MetricsReport)>,
}

impl OracleStudy {
    pub fn report(&self) -> Report {
        let mut r = Report::new();
        r.push("images", Value::Count(self.images));
        r.push_method("current", self.current);
        r.push_method("warped", self.warped);
        for (k, m) in &self.oracle {
            let name = if *k == 3 {
                "oracle".to_string()
            } else {
                format!("oracle_k{k}")
            };
            r.push_method(name, *m);
        }
        r
    }
}

/// Runs the oracle at the last interior frame of each sequence with
/// 3..=`max_frames` frames (capped by the shortest sequence). Candidate lists
/// are nested, so each step adds one older prediction.
pub fn oracle_study(
    sequences: &[&SequenceSample],
    est: &dyn TwoFrameEstimator,
    max_frames: usize,
) -> Result<OracleStudy> {
    let shortest = sequences.iter().map(|s| s.len()).min().unwrap_or(0);
    if shortest < 3 {
        return Err(flowfusion_core::Error::TooFewCandidates {
            needed: 3,
            found: shortest,
        }
        .into());
    }
    let k_max = max_frames.min(shortest).max(3);
    let mut cur = MetricsAccumulator::default();
    let mut warped = MetricsAccumulator::default();
    let mut oracle = vec![MetricsAccumulator::default(); k_max - 2];
    for seq in sequences {
        let n = seq.len();
        let t = n - 2;
        let frames: Vec<Frame<'_>> = (n - k_max..n).map(|i| frame(seq, i)).collect();
        let set = build_candidates_multi(&frames, est)?;
        let gt = &seq.gt_fwd[t];
        let regions = region_partition(gt, &seq.occlusion[t])?;
        cur.add(&MetricsReport::compute(&set.current, gt, &regions)?);
        warped.add(&MetricsReport::compute(&set.warped, gt, &regions)?);
        let flows: Vec<&FlowField> = set.flows();
        for (j, acc) in oracle.iter_mut().enumerate() {
            let (o, _) = oracle_fuse(&flows[..j + 2], gt)?;
            acc.add(&MetricsReport::compute(&o, gt, &regions)?);
        }
    }
    Ok(OracleStudy {
        images: sequences.len(),
        current: cur.finish(),
        warped: warped.finish(),
        oracle: oracle.iter().enumerate().map(|(j, a)| (j + 3, a.finish())).collect(),
    })
}
