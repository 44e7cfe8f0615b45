//! Run configuration: a TOML file with one table per section, where every key
//! can also be set on the command line as `--section.key=value`.

use std::fs;
use std::path::Path;

use flowfusion_core::estimate::{HornSchunck, HsParams, LkParams, LucasKanade, TwoFrameEstimator};
use flowfusion_core::fusion::{FusionInputConfig, TrainConfig};
use flowfusion_core::synth::BenchmarkConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::precomputed::{PrecomputedSource, DEFAULT_PATTERN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    HornSchunck,
    LucasKanade,
    Precomputed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    pub kind: EstimatorKind,
    /// Directory of stored flows for the `precomputed` kind.
    pub precomputed_dir: String,
    pub precomputed_pattern: String,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            kind: EstimatorKind::HornSchunck,
            precomputed_dir: String::new(),
            precomputed_pattern: DEFAULT_PATTERN.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub count: usize,
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub channels: usize,
    pub seed: u64,
    pub abrupt_fraction: f64,
    pub max_layers: usize,
    /// Share of sequences assigned to training.
    pub split_ratio: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        let b = BenchmarkConfig::default();
        Self {
            // the network needs more than a couple dozen scenes to generalize
            count: 100,
            width: b.width,
            height: b.height,
            frames: b.frames,
            channels: b.channels,
            seed: b.seed,
            abrupt_fraction: b.abrupt_fraction,
            max_layers: b.max_layers,
            split_ratio: 0.8,
        }
    }
}

impl DataConfig {
    pub fn benchmark(&self) -> BenchmarkConfig {
        BenchmarkConfig {
            count: self.count,
            width: self.width,
            height: self.height,
            frames: self.frames,
            channels: self.channels,
            seed: self.seed,
            abrupt_fraction: self.abrupt_fraction,
            max_layers: self.max_layers,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Candidates closer than this count as agreeing in indicator maps.
    pub indicator_agree: f64,
    /// The fused flow closer than this to a candidate counts as following it.
    pub indicator_matching: f64,
    /// Strict EPE margin for comparison maps.
    pub comparison_margin: f64,
    /// Most frames used per multi-frame oracle (3 = current and warped only).
    pub oracle_frames: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            indicator_agree: 5.0,
            indicator_matching: 5.0,
            comparison_margin: 0.5,
            oracle_frames: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub estimator: EstimatorConfig,
    pub horn_schunck: HsParams,
    pub lucas_kanade: LkParams,
    pub fusion: FusionInputConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
    pub eval: EvalConfig,
}

/// Parses a command-line value as a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.len() < 2 || parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override `{key}` must look like section.key")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{key}`: `{p}` is not a section")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl RunConfig {
    /// Reads `file` (if any), applies `key=value` overrides in order and validates.
    pub fn load(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        // Layer everything over the serialized defaults so that a partial
        // nested table keeps the defaults of its enclosing section.
        let mut table = toml::Table::try_from(RunConfig::default()).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(p) = file {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            let user =
                toml::from_str::<toml::Table>(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            merge(&mut table, user);
        }
        for (k, v) in overrides {
            set_path(&mut table, k, parse_value(v))?;
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.horn_schunck.validate()?;
        self.lucas_kanade.validate()?;
        self.train.validate()?;
        if !(0.0..=1.0).contains(&self.data.split_ratio) {
            return Err(Error::Config("data.split_ratio must lie in [0, 1]".into()));
        }
        if self.estimator.kind == EstimatorKind::Precomputed && self.estimator.precomputed_dir.is_empty() {
            return Err(Error::Config(
                "estimator.precomputed_dir is required for the precomputed estimator".into(),
            ));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Writes the resolved configuration to `<dir>/config.toml`.
    pub fn write_resolved(&self, dir: &Path) -> Result<()> {
        let path = dir.join("config.toml");
        fs::write(&path, self.to_toml()?).map_err(|e| Error::io(&path, e))
    }

    pub fn estimator(&self) -> Result<Box<dyn TwoFrameEstimator>> {
        Ok(match self.estimator.kind {
            EstimatorKind::HornSchunck => Box::new(HornSchunck::new(self.horn_schunck)?),
            EstimatorKind::LucasKanade => Box::new(LucasKanade::new(self.lucas_kanade)?),
            EstimatorKind::Precomputed => Box::new(PrecomputedSource::new(
                &self.estimator.precomputed_dir,
                self.estimator.precomputed_pattern.clone(),
            )?),
        })
    }
}

/// Splits `--section.key=value` arguments out of a command line.
pub fn extract_overrides(args: Vec<String>) -> (Vec<String>, Vec<(String, String)>) {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    for a in args {
        if let Some(body) = a.strip_prefix("--") {
            if let Some((k, v)) = body.split_once('=') {
                if k.contains('.') {
                    overrides.push((k.to_string(), v.to_string()));
                    continue;
                }
            }
        }
        rest.push(a);
    }
    (rest, overrides)
}
