use std::path::{Path, PathBuf};
use std::process::Command;

use flowfusion::cli::run;
use flowfusion::dataset::{read_manifest, read_sequence};
use flowfusion::flo::{read_flo, write_flo};
use flowfusion::report::KvReport;
use flowfusion_core::metrics::epe_map;
use tempfile::TempDir;

const SMALL: [&str; 5] = [
    "--data.count=4",
    "--data.width=32",
    "--data.height=32",
    "--data.frames=3",
    "--data.seed=5",
];

fn s(p: &Path) -> String {
    p.display().to_string()
}

fn cli(args: &[&str], extra: &[String]) -> flowfusion::Result<()> {
    let mut v: Vec<String> = std::iter::once("flowfusion")
        .chain(args.iter().copied())
        .map(String::from)
        .collect();
    v.extend(extra.iter().cloned());
    run(v)
}

/// Generates the small dataset and returns (tempdir, dataset root, first sequence dir).
fn dataset() -> (TempDir, PathBuf, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("data");
    let mut args: Vec<&str> = vec!["gen-data", "--out"];
    let r = s(&root);
    args.push(&r);
    args.extend(SMALL);
    cli(&args, &[]).unwrap();
    let m = read_manifest(&root).unwrap();
    let seq = root.join(&m.sequences[0].dir);
    (dir, root, seq)
}

#[test]
fn gen_data_writes_manifest_and_sequences() {
    let (_d, root, seq) = dataset();
    let m = read_manifest(&root).unwrap();
    assert_eq!(m.sequences.len(), 4);
    assert!(root.join("config.toml").is_file());
    let sample = read_sequence(&seq).unwrap();
    assert_eq!(sample.len(), 3);
    assert_eq!(sample.frames[0].width(), 32);
    assert_eq!(sample.gt_fwd.len(), 2);
}

#[test]
fn estimate_and_warp_write_outputs() {
    let (d, _root, seq) = dataset();
    let est = d.path().join("est");
    let (f0, f1) = (s(&seq.join("frame_00.png")), s(&seq.join("frame_01.png")));
    cli(&["estimate", "--frames", &f0, &f1, "--out", &s(&est)], &[]).unwrap();
    let flow = read_flo(est.join("flow.flo")).unwrap();
    assert_eq!(flow.dims(), (32, 32));
    assert!(est.join("flow.png").is_file());

    let warp = d.path().join("warp");
    let (prev, back) = (s(&seq.join("flow_fwd_00.flo")), s(&seq.join("flow_bwd_01.flo")));
    cli(
        &["warp", "--flow-prev", &prev, "--flow-back", &back, "--out", &s(&warp)],
        &[],
    )
    .unwrap();
    assert_eq!(read_flo(warp.join("warped.flo")).unwrap().dims(), (32, 32));
    assert!(warp.join("warped_valid.png").is_file());

    let img = d.path().join("img");
    cli(
        &[
            "warp",
            "--image",
            &f1,
            "--flow",
            &s(&seq.join("flow_fwd_00.flo")),
            "--out",
            &s(&img),
        ],
        &[],
    )
    .unwrap();
    assert!(img.join("warped.png").is_file());
}

#[test]
fn oracle_fuse_requires_ground_truth() {
    let (d, _root, seq) = dataset();
    let frames: Vec<String> = (0..3).map(|i| s(&seq.join(format!("frame_{i:02}.png")))).collect();
    let out = d.path().join("fuse");
    let err = cli(
        &[
            "fuse",
            "--frames",
            &frames[0],
            &frames[1],
            &frames[2],
            "--mode",
            "oracle",
            "--out",
            &s(&out),
        ],
        &[],
    )
    .unwrap_err();
    assert!(err.to_string().contains("requires --gt"), "{err}");

    let gt = s(&seq.join("flow_fwd_01.flo"));
    cli(
        &[
            "fuse",
            "--frames",
            &frames[0],
            &frames[1],
            &frames[2],
            "--mode",
            "oracle",
            "--gt",
            &gt,
            "--out",
            &s(&out),
        ],
        &[],
    )
    .unwrap();
    let gt = read_flo(&gt).unwrap();
    let fused = epe_map(&read_flo(out.join("fused.flo")).unwrap(), &gt).unwrap();
    for cand in ["current", "warped"] {
        let c = epe_map(
            &read_flo(out.join("candidates").join(format!("{cand}.flo"))).unwrap(),
            &gt,
        )
        .unwrap();
        assert!(fused.data().iter().zip(c.data()).all(|(f, c)| f <= c));
    }
    assert!(out.join("choice.png").is_file());
    assert!(out.join("report.txt").is_file());
}

#[test]
fn learned_fuse_requires_checkpoint() {
    let (d, _root, seq) = dataset();
    let frames: Vec<String> = (0..3).map(|i| s(&seq.join(format!("frame_{i:02}.png")))).collect();
    let out = s(&d.path().join("fuse"));
    assert!(cli(
        &["fuse", "--frames", &frames[0], &frames[1], &frames[2], "--mode", "learned", "--out", &out],
        &[]
    )
    .is_err());
    cli(
        &[
            "fuse",
            "--frames",
            &frames[0],
            &frames[1],
            &frames[2],
            "--mode",
            "heuristic",
            "--out",
            &out,
        ],
        &[],
    )
    .unwrap();
}

#[test]
fn eval_of_a_flow_against_itself_is_zero() {
    let (d, _root, seq) = dataset();
    let gt = s(&seq.join("flow_fwd_00.flo"));
    let out = d.path().join("eval");
    cli(
        &[
            "eval",
            "--flow",
            &gt,
            "--gt",
            &gt,
            "--occ",
            &s(&seq.join("occ_00.png")),
            "--out",
            &s(&out),
        ],
        &[],
    )
    .unwrap();
    let r = KvReport::read(out.join("report.txt")).unwrap();
    assert_eq!(r.real("flow.aepe_all"), Some(Some(0.0)));
    assert_eq!(r.real("flow.fl_all"), Some(Some(0.0)));
    let csv = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("flow,0.000000"));
}

#[test]
fn eval_and_oracle_study_on_a_dataset() {
    let (d, root, _seq) = dataset();
    let out = d.path().join("eval");
    cli(
        &[
            "eval",
            "--data",
            &s(&root),
            "--split",
            "all",
            "--maps",
            "--out",
            &s(&out),
        ],
        &[],
    )
    .unwrap();
    let r = KvReport::read(out.join("report.txt")).unwrap();
    let get = |k: &str| r.real(k).flatten().unwrap();
    assert!(get("oracle.aepe_all") <= get("current.aepe_all").min(get("warped.aepe_all")));
    assert!(out.join("maps").is_dir());

    let study = d.path().join("study");
    cli(
        &[
            "oracle-study",
            "--data",
            &s(&root),
            "--split",
            "all",
            "--out",
            &s(&study),
        ],
        &[],
    )
    .unwrap();
    let r = KvReport::read(study.join("report.txt")).unwrap();
    assert!(r.real("oracle.aepe_all").flatten().is_some());
}

#[test]
fn visualize_writes_pngs() {
    let (d, _root, seq) = dataset();
    let out = d.path().join("viz");
    let (a, b) = (s(&seq.join("flow_fwd_00.flo")), s(&seq.join("flow_fwd_01.flo")));
    cli(
        &[
            "visualize",
            "--flow",
            &a,
            "--gt",
            &b,
            "--current",
            &a,
            "--warped",
            &b,
            "--other",
            &b,
            "--out",
            &s(&out),
        ],
        &[],
    )
    .unwrap();
    for f in ["flow.png", "epe.png", "comparison.png", "indicator.png"] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

#[test]
fn overrides_are_validated_and_recorded() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("o");
    let err = cli(&["gen-data", "--out", &s(&out)], &["--data.bogus=1".into()]).unwrap_err();
    assert!(err.to_string().contains("bogus"), "{err}");
    let toml = d.path().join("run.toml");
    std::fs::write(&toml, "[data]\ncount = 3\nwidth = 24\nheight = 24\n").unwrap();
    cli(
        &["--config", &s(&toml), "gen-data", "--out", &s(&out)],
        &["--data.count=2".into()],
    )
    .unwrap();
    assert_eq!(read_manifest(&out).unwrap().sequences.len(), 2);
    let resolved = std::fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(
        resolved.contains("width = 24") && resolved.contains("count = 2"),
        "{resolved}"
    );
}

#[test]
fn binary_resolves_output_dir_from_environment_and_reports_errors() {
    let d = tempfile::tempdir().unwrap();
    let flow = d.path().join("f.flo");
    write_flo(&flow, &flowfusion_core::FlowField::constant(8, 8, 1.0, -2.0)).unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_flowfusion"))
        .args(["visualize", "--flow", &s(&flow)])
        .env("FLOWFUSION_OUT", d.path().join("runs"))
        .status()
        .unwrap();
    assert!(status.success());
    assert!(d.path().join("runs/visualize/flow.png").is_file());

    let out = Command::new(env!("CARGO_BIN_EXE_flowfusion"))
        .args(["visualize", "--flow", &s(&d.path().join("missing.flo"))])
        .env("FLOWFUSION_OUT", d.path().join("runs"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}
