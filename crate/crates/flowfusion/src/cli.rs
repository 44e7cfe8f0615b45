//! The `flowfusion` command line.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use flowfusion_core::estimate::Frame;
use flowfusion_core::flow::{warp_flow, warp_image};
use flowfusion_core::fusion::{
    build_candidates, fuse, heuristic_fuse, oracle_fuse, prepare_samples, train_fusion_with, FusionNet,
};
use flowfusion_core::metrics::{
    comparison_map, epe_map, indicator_map, region_partition, IndicatorThresholds, MetricsReport,
};
use flowfusion_core::synth::{benchmark_specs, make_dataset, DatasetEntry, SequenceSample};
use flowfusion_core::{FlowField, Mask};

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::config::{extract_overrides, RunConfig};
use crate::dataset::{load_split, write_dataset, Split};
use crate::error::{Error, Result};
use crate::pipeline::{evaluate_sequences, oracle_study, sequence_candidates};
use crate::report::{Report, Value};
use crate::{flo, imageio, kitti, viz};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "FLOWFUSION_OUT";

#[derive(Debug, Parser)]
#[command(
    name = "flowfusion",
    version,
    about = "Multi-frame optical flow fusion",
    after_help = "Any configuration key can be set with --section.key=value, e.g. --train.steps=200."
)]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory [default: $FLOWFUSION_OUT/<command> or runs/<command>].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FuseMode {
    Oracle,
    Heuristic,
    Learned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    All,
}

impl SplitArg {
    fn split(self) -> Option<Split> {
        match self {
            SplitArg::Train => Some(Split::Train),
            SplitArg::Val => Some(Split::Val),
            SplitArg::All => None,
        }
    }
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset directory written by gen-data [default: generate from the [data] section].
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub split: Option<SplitArg>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    GenData,
    /// Estimate the flow between two frames.
    Estimate {
        #[arg(long, num_args = 2, value_names = ["FROM", "TO"], required = true)]
        frames: Vec<PathBuf>,
        /// Frame indices of FROM and TO (used by the precomputed estimator).
        #[arg(long, num_args = 2, value_names = ["I", "J"], default_values_t = [0usize, 1])]
        indices: Vec<usize>,
    },
    /// Carry a past flow into the current frame, or warp an image by a flow.
    Warp {
        /// w(t-1 -> t).
        #[arg(long, requires = "flow_back", conflicts_with_all = ["image", "flow"])]
        flow_prev: Option<PathBuf>,
        /// w(t -> t-1).
        #[arg(long)]
        flow_back: Option<PathBuf>,
        /// Image to resample.
        #[arg(long, requires = "flow")]
        image: Option<PathBuf>,
        /// Flow used to resample --image.
        #[arg(long)]
        flow: Option<PathBuf>,
    },
    /// Fuse the candidates at the middle of three frames.
    Fuse {
        #[arg(long, num_args = 3, value_names = ["PREV", "CUR", "NEXT"], required = true)]
        frames: Vec<PathBuf>,
        /// Index of PREV; CUR and NEXT follow.
        #[arg(long, default_value_t = 0)]
        first_index: usize,
        #[arg(long, value_enum)]
        mode: FuseMode,
        /// Ground truth w(t -> t+1), required by the oracle.
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train the fusion network.
    TrainFusion {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Evaluate one flow against ground truth, or every method on a dataset.
    Eval {
        #[arg(long, requires = "gt", conflicts_with_all = ["data", "checkpoint"])]
        flow: Option<PathBuf>,
        #[arg(long)]
        gt: Option<PathBuf>,
        /// Occlusion mask for --flow.
        #[arg(long, requires = "flow")]
        occ: Option<PathBuf>,
        #[command(flatten)]
        data: DataArgs,
        /// Trained network; adds the learned fusion and the red-region analysis.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Also write indicator and comparison maps per image.
        #[arg(long)]
        maps: bool,
    },
    /// Oracle selection with a growing number of frames.
    OracleStudy {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Render a flow, its error and diagnostic maps as PNGs.
    Visualize {
        #[arg(long)]
        flow: PathBuf,
        #[arg(long)]
        max_mag: Option<f64>,
        /// Ground truth; adds epe.png.
        #[arg(long)]
        gt: Option<PathBuf>,
        /// With --warped, treats --flow as fused and adds indicator.png.
        #[arg(long, requires = "warped")]
        current: Option<PathBuf>,
        #[arg(long, requires = "current")]
        warped: Option<PathBuf>,
        /// A second flow compared with --flow against --gt in comparison.png.
        #[arg(long, requires = "gt")]
        other: Option<PathBuf>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GenData => "gen-data",
            Command::Estimate { .. } => "estimate",
            Command::Warp { .. } => "warp",
            Command::Fuse { .. } => "fuse",
            Command::TrainFusion { .. } => "train-fusion",
            Command::Eval { .. } => "eval",
            Command::OracleStudy { .. } => "oracle-study",
            Command::Visualize { .. } => "visualize",
        }
    }
}

/// `--out`, else `$FLOWFUSION_OUT/<command>`, else `runs/<command>`.
pub fn output_dir(out: Option<&Path>, command: &str) -> PathBuf {
    match out {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os(OUT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("runs"))
            .join(command),
    }
}

/// Reads a `.flo` file or a KITTI flow PNG.
pub fn read_flow(path: &Path) -> Result<FlowField> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
        kitti::read_kitti_png(path)
    } else {
        flo::read_flo(path)
    }
}

fn write(path: PathBuf, body: impl AsRef<[u8]>) -> Result<()> {
    fs::write(&path, body).map_err(|e| Error::io(&path, e))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, S>(args: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let (args, overrides) = extract_overrides(args.into_iter().map(Into::into).collect());
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            e.print().map_err(|e| Error::io("<stdout>", e))?;
            return Ok(());
        }
        Err(e) => {
            return Err(Error::Config(
                e.to_string().lines().next().unwrap_or_default().to_string(),
            ))
        }
    };
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    let out = output_dir(cli.out.as_deref(), cli.command.name());
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    cfg.write_resolved(&out)?;
    execute(&cli.command, &cfg, &out)
}

fn sequences(cfg: &RunConfig, data: &DataArgs, default: SplitArg) -> Result<Vec<DatasetEntry>> {
    let split = data.split.unwrap_or(default);
    match &data.data {
        Some(root) => load_split(root, split.split()),
        None => {
            let ds = make_dataset(&benchmark_specs(&cfg.data.benchmark()), cfg.data.split_ratio)?;
            Ok(match split {
                SplitArg::Train => ds.train,
                SplitArg::Val => ds.val,
                SplitArg::All => {
                    let mut all: Vec<_> = ds.train.into_iter().chain(ds.val).collect();
                    all.sort_by_key(|e| e.id);
                    all
                }
            })
        }
    }
}

fn samples(entries: &[DatasetEntry]) -> Result<Vec<&SequenceSample>> {
    if entries.is_empty() {
        return Err(flowfusion_core::Error::EmptyDataset.into());
    }
    Ok(entries.iter().map(|e| &e.sample).collect())
}

fn thresholds(cfg: &RunConfig) -> IndicatorThresholds {
    IndicatorThresholds {
        agree: cfg.eval.indicator_agree,
        matching: cfg.eval.indicator_matching,
    }
}

pub fn execute(command: &Command, cfg: &RunConfig, out: &Path) -> Result<()> {
    match command {
        Command::GenData => {
            let ds = make_dataset(&benchmark_specs(&cfg.data.benchmark()), cfg.data.split_ratio)?;
            let m = write_dataset(out, &ds)?;
            eprintln!("wrote {} sequences to {}", m.sequences.len(), out.display());
        }
        Command::Estimate { frames, indices } => {
            let a = imageio::read_image(&frames[0])?;
            let b = imageio::read_image(&frames[1])?;
            let est = cfg.estimator()?;
            let flow = est.estimate(Frame::new(indices[0], &a), Frame::new(indices[1], &b))?;
            flo::write_flo(out.join("flow.flo"), &flow)?;
            viz::write_flow_color(out.join("flow.png"), &flow, None)?;
        }
        Command::Warp {
            flow_prev,
            flow_back,
            image,
            flow,
        } => match (flow_prev, flow_back, image, flow) {
            (Some(p), Some(b), _, _) => {
                let warped = warp_flow(&read_flow(p)?, &read_flow(b)?)?;
                flo::write_flo(out.join("warped.flo"), &warped)?;
                imageio::write_mask(out.join("warped_valid.png"), &warped.valid_mask())?;
            }
            (_, _, Some(i), Some(f)) => {
                let (img, valid) = warp_image(&imageio::read_image(i)?, &read_flow(f)?)?;
                imageio::write_image(out.join("warped.png"), &img, true)?;
                imageio::write_mask(out.join("warped_valid.png"), &valid)?;
            }
            _ => {
                return Err(Error::Config(
                    "warp needs --flow-prev with --flow-back, or --image with --flow".into(),
                ))
            }
        },
        Command::Fuse {
            frames,
            first_index,
            mode,
            gt,
            checkpoint,
        } => {
            let gt = gt.as_deref().map(read_flow).transpose()?;
            if *mode == FuseMode::Oracle && gt.is_none() {
                return Err(Error::Config("fuse --mode=oracle requires --gt".into()));
            }
            let net = match (mode, checkpoint) {
                (FuseMode::Learned, Some(c)) => Some(load_checkpoint(c)?.0),
                (FuseMode::Learned, None) => {
                    return Err(Error::Config("fuse --mode=learned requires --checkpoint".into()))
                }
                _ => None,
            };
            let imgs = frames.iter().map(imageio::read_image).collect::<Result<Vec<_>>>()?;
            let est = cfg.estimator()?;
            let f = |k: usize| Frame::new(first_index + k, &imgs[k]);
            let set = build_candidates(f(0), f(1), f(2), est.as_ref())?;
            let fused = match mode {
                FuseMode::Oracle => {
                    let (o, choice) = oracle_fuse(&[&set.current, &set.warped], gt.as_ref().expect("checked"))?;
                    let (w, h) = o.dims();
                    imageio::write_mask(
                        out.join("choice.png"),
                        &Mask::from_vec(w, h, choice.iter().map(|&c| c == 1).collect())?,
                    )?;
                    o
                }
                FuseMode::Heuristic => heuristic_fuse(&set),
                FuseMode::Learned => fuse(net.as_ref().expect("checked"), &set, &cfg.fusion)?,
            };
            let cand = out.join("candidates");
            fs::create_dir_all(&cand).map_err(|e| Error::io(&cand, e))?;
            flo::write_flo(cand.join("current.flo"), &set.current)?;
            flo::write_flo(cand.join("warped.flo"), &set.warped)?;
            imageio::write_mask(cand.join("warped_valid.png"), &set.warped.valid_mask())?;
            imageio::write_image(cand.join("err_current.png"), &set.err_current, true)?;
            imageio::write_image(cand.join("err_warped.png"), &set.err_warped, true)?;
            flo::write_flo(out.join("fused.flo"), &fused)?;
            viz::write_flow_color(out.join("fused.png"), &fused, None)?;
            if let Some(gt) = &gt {
                let mut r = Report::new();
                let regions = region_partition(gt, &Mask::new(gt.width(), gt.height(), false))?;
                for (name, f) in [("current", &set.current), ("warped", &set.warped), ("fused", &fused)] {
                    r.push_method(name, MetricsReport::compute(f, gt, &regions)?);
                }
                r.write(out)?;
            }
        }
        Command::TrainFusion { data } => {
            let entries = sequences(cfg, data, SplitArg::Train)?;
            let seqs = samples(&entries)?;
            let est = cfg.estimator()?;
            let prepared = prepare_samples(&seqs, est.as_ref(), &cfg.fusion)?;
            let every = (cfg.train.steps / 20).max(1);
            let outcome = train_fusion_with(&prepared, &cfg.train, &cfg.fusion, |s, l| {
                if s % every == 0 || s + 1 == cfg.train.steps {
                    eprintln!("step {s:>6}  loss {l:.6}");
                }
            })?;
            save_checkpoint(out.join("checkpoint.ffnet"), &outcome.net, &cfg.train)?;
            let mut csv = String::from("step,loss\n");
            for (i, l) in outcome.losses.iter().enumerate() {
                csv.push_str(&format!("{i},{l}\n"));
            }
            write(out.join("loss.csv"), csv)?;
        }
        Command::Eval {
            flow,
            gt,
            occ,
            data,
            checkpoint,
            maps,
        } => {
            if let (Some(f), Some(g)) = (flow, gt) {
                let (flow, gt) = (read_flow(f)?, read_flow(g)?);
                let occ = match occ {
                    Some(p) => imageio::read_mask(p)?,
                    None => Mask::new(gt.width(), gt.height(), false),
                };
                let mut r = Report::new();
                r.push("images", Value::Count(1));
                r.push_method(
                    "flow",
                    MetricsReport::compute(&flow, &gt, &region_partition(&gt, &occ)?)?,
                );
                r.write(out)?;
                print!("{}", r.to_text());
                return Ok(());
            }
            let entries = sequences(cfg, data, SplitArg::Val)?;
            let seqs = samples(&entries)?;
            let net = checkpoint.as_deref().map(load_checkpoint).transpose()?.map(|(n, _)| n);
            let est = cfg.estimator()?;
            let summary = evaluate_sequences(&seqs, est.as_ref(), net.as_ref(), thresholds(cfg))?;
            let r = summary.report();
            r.write(out)?;
            if *maps {
                write_maps(&entries, cfg, net.as_ref(), &out.join("maps"))?;
            }
            print!("{}", r.to_text());
        }
        Command::OracleStudy { data } => {
            let entries = sequences(cfg, data, SplitArg::Val)?;
            let seqs = samples(&entries)?;
            let est = cfg.estimator()?;
            let r = oracle_study(&seqs, est.as_ref(), cfg.eval.oracle_frames)?.report();
            r.write(out)?;
            print!("{}", r.to_text());
        }
        Command::Visualize {
            flow,
            max_mag,
            gt,
            current,
            warped,
            other,
        } => {
            let f = read_flow(flow)?;
            viz::write_flow_color(out.join("flow.png"), &f, *max_mag)?;
            let (w, h) = f.dims();
            if let Some(g) = gt {
                let g = read_flow(g)?;
                viz::write_epe_map(out.join("epe.png"), &epe_map(&f, &g)?, 10.0)?;
                if let Some(o) = other {
                    let classes = comparison_map(
                        &epe_map(&f, &g)?,
                        &epe_map(&read_flow(o)?, &g)?,
                        cfg.eval.comparison_margin,
                    )?;
                    viz::write_comparison(out.join("comparison.png"), w, h, &classes)?;
                }
            }
            if let (Some(c), Some(wp)) = (current, warped) {
                let classes = indicator_map(&f, &read_flow(c)?, &read_flow(wp)?, thresholds(cfg))?;
                viz::write_indicator(out.join("indicator.png"), w, h, &classes)?;
            }
        }
    }
    Ok(())
}

/// Per-image flow, indicator and comparison renderings for a dataset evaluation.
fn write_maps(entries: &[DatasetEntry], cfg: &RunConfig, net: Option<&FusionNet>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let est = cfg.estimator()?;
    for e in entries {
        for (t, set) in sequence_candidates(&e.sample, est.as_ref())? {
            let gt = &e.sample.gt_fwd[t];
            let (w, h) = gt.dims();
            let stem = format!("seq_{:04}_t{t:02}", e.id);
            let max = flowfusion_core::color::default_max_magnitude(gt);
            viz::write_flow_color(dir.join(format!("{stem}_gt.png")), gt, Some(max))?;
            viz::write_flow_color(dir.join(format!("{stem}_current.png")), &set.current, Some(max))?;
            viz::write_flow_color(dir.join(format!("{stem}_warped.png")), &set.warped, Some(max))?;
            if let Some(net) = net {
                let fused = fuse(net, &set, net.input_config())?;
                viz::write_flow_color(dir.join(format!("{stem}_fused.png")), &fused, Some(max))?;
                let classes = indicator_map(&fused, &set.current, &set.warped, thresholds(cfg))?;
                viz::write_indicator(dir.join(format!("{stem}_indicator.png")), w, h, &classes)?;
                let cmp = comparison_map(
                    &epe_map(&fused, gt)?,
                    &epe_map(&set.current, gt)?,
                    cfg.eval.comparison_margin,
                )?;
                viz::write_comparison(dir.join(format!("{stem}_comparison.png")), w, h, &cmp)?;
            }
        }
    }
    Ok(())
}
