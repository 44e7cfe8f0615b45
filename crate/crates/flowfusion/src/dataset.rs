//! On-disk dataset layout.
//!
//! ```text
//! <root>/manifest.json
//! <root>/seq_0000/frame_00.png      16-bit frames
//! <root>/seq_0000/flow_fwd_00.flo   frame 0 -> 1
//! <root>/seq_0000/flow_bwd_00.flo   frame 1 -> 0
//! <root>/seq_0000/occ_00.png        pixels of frame 0 hidden in frame 1
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use flowfusion_core::synth::{Dataset, DatasetEntry, SceneSpec, SequenceSample};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{flo, imageio};

pub const MANIFEST: &str = "manifest.json";
pub const FORMAT: &str = "flowfusion-dataset";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: usize,
    pub dir: String,
    pub split: Split,
    pub seed: u64,
    pub spec: SceneSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub sequences: Vec<ManifestEntry>,
}

pub fn sequence_dir_name(id: usize) -> String {
    format!("seq_{id:04}")
}

fn mkdir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn write_sequence(dir: impl AsRef<Path>, seq: &SequenceSample) -> Result<()> {
    let dir = dir.as_ref();
    mkdir(dir)?;
    for (i, f) in seq.frames.iter().enumerate() {
        imageio::write_image(dir.join(format!("frame_{i:02}.png")), f, true)?;
    }
    for i in 0..seq.gt_fwd.len() {
        flo::write_flo(dir.join(format!("flow_fwd_{i:02}.flo")), &seq.gt_fwd[i])?;
        flo::write_flo(dir.join(format!("flow_bwd_{i:02}.flo")), &seq.gt_bwd[i])?;
        imageio::write_mask(dir.join(format!("occ_{i:02}.png")), &seq.occlusion[i])?;
    }
    Ok(())
}

/// Number of consecutive `frame_%02d.png` files in `dir`.
pub fn count_frames(dir: &Path) -> usize {
    (0..100)
        .take_while(|i| dir.join(format!("frame_{i:02}.png")).is_file())
        .count()
}

pub fn read_sequence(dir: impl AsRef<Path>) -> Result<SequenceSample> {
    let dir = dir.as_ref();
    let n = count_frames(dir);
    if n < 2 {
        return Err(Error::format(dir, format!("expected at least two frames, found {n}")));
    }
    let mut seq = SequenceSample {
        frames: Vec::with_capacity(n),
        gt_fwd: Vec::with_capacity(n - 1),
        gt_bwd: Vec::with_capacity(n - 1),
        occlusion: Vec::with_capacity(n - 1),
    };
    for i in 0..n {
        seq.frames
            .push(imageio::read_image(dir.join(format!("frame_{i:02}.png")))?);
    }
    for i in 0..n - 1 {
        seq.gt_fwd
            .push(flo::read_flo(dir.join(format!("flow_fwd_{i:02}.flo")))?);
        seq.gt_bwd
            .push(flo::read_flo(dir.join(format!("flow_bwd_{i:02}.flo")))?);
        seq.occlusion
            .push(imageio::read_mask(dir.join(format!("occ_{i:02}.png")))?);
    }
    Ok(seq)
}

/// Writes every sequence and the manifest.
pub fn write_dataset(root: impl AsRef<Path>, ds: &Dataset) -> Result<Manifest> {
    let root = root.as_ref();
    mkdir(root)?;
    let mut sequences = Vec::new();
    for (split, entries) in [(Split::Train, &ds.train), (Split::Val, &ds.val)] {
        for e in entries {
            let dir = sequence_dir_name(e.id);
            write_sequence(root.join(&dir), &e.sample)?;
            sequences.push(ManifestEntry {
                id: e.id,
                dir,
                split,
                seed: e.seed,
                spec: e.spec.clone(),
            });
        }
    }
    sequences.sort_by_key(|s| s.id);
    let manifest = Manifest {
        format: FORMAT.into(),
        version: VERSION,
        sequences,
    };
    let path = root.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

pub fn read_manifest(root: impl AsRef<Path>) -> Result<Manifest> {
    let path = root.as_ref().join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
    if m.format != FORMAT || m.version != VERSION {
        return Err(Error::format(
            &path,
            format!("unsupported manifest {} v{}", m.format, m.version),
        ));
    }
    Ok(m)
}

/// Loads the sequences of one split (all when `None`), in manifest order.
pub fn load_split(root: impl AsRef<Path>, split: Option<Split>) -> Result<Vec<DatasetEntry>> {
    let root = root.as_ref();
    read_manifest(root)?
        .sequences
        .into_iter()
        .filter(|s| split.map_or(true, |want| s.split == want))
        .map(|s| {
            let dir: PathBuf = root.join(&s.dir);
            Ok(DatasetEntry {
                id: s.id,
                sample: read_sequence(&dir)?,
                spec: s.spec,
                seed: s.seed,
            })
        })
        .collect()
}
