//! Evaluation reports as flat `key = value` text and as CSV.
//!
//! Text reports hold one entry per line, keys are dotted (`current.aepe_all`),
//! numbers use six decimals and regions without pixels read `absent`. Lines
//! starting with `#` are comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use flowfusion_core::metrics::{MetricsReport, RedRegionReport};

use crate::error::{Error, Result};

pub const ABSENT: &str = "absent";

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Real(Option<f64>),
    Count(usize),
    Text(String),
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::Real(Some(v)) => write!(f, "{v:.6}"),
            Value::Real(None) => f.write_str(ABSENT),
            Value::Count(n) => write!(f, "{n}"),
            Value::Text(s) => f.write_str(s),
        }
    }
}

/// Metrics of one method over a dataset or a single flow.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodMetrics {
    pub name: String,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    entries: Vec<(String, Value)>,
    methods: Vec<MethodMetrics>,
}

pub const CSV_HEADER: &str =
    "method,aepe_all,aepe_inside,aepe_outside,aepe_occluded,fl_all,pixels_all,pixels_inside,pixels_outside,pixels_occluded";

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: Value) {
        self.entries.push((key.into(), value));
    }

    pub fn push_method(&mut self, name: impl Into<String>, metrics: MetricsReport) {
        let name = name.into();
        let m = &metrics;
        for (region, stat) in [
            ("all", m.all),
            ("inside", m.inside),
            ("outside", m.outside),
            ("occluded", m.occluded),
        ] {
            self.push(format!("{name}.aepe_{region}"), Value::Real(stat.aepe));
        }
        self.push(format!("{name}.fl_all"), Value::Real(m.fl_all));
        for (region, stat) in [
            ("all", m.all),
            ("inside", m.inside),
            ("outside", m.outside),
            ("occluded", m.occluded),
        ] {
            self.push(format!("{name}.pixels_{region}"), Value::Count(stat.pixels));
        }
        self.methods.push(MethodMetrics { name, metrics });
    }

    pub fn push_red_regions(&mut self, prefix: &str, names: &[&str], r: &RedRegionReport) {
        self.push(format!("{prefix}.pixels"), Value::Count(r.pixels));
        for (n, v) in names.iter().zip(&r.aepe_candidates) {
            self.push(format!("{prefix}.aepe_{n}"), Value::Real(*v));
        }
        self.push(format!("{prefix}.aepe_fused"), Value::Real(r.aepe_fused));
        self.push(format!("{prefix}.aepe_oracle"), Value::Real(r.aepe_oracle));
        self.push(
            format!("{prefix}.fused_better_than_oracle_pct"),
            Value::Real(r.fused_better_than_oracle),
        );
    }

    pub fn methods(&self) -> &[MethodMetrics] {
        &self.methods
    }

    pub fn method(&self, name: &str) -> Option<&MetricsReport> {
        self.methods.iter().find(|m| m.name == name).map(|m| &m.metrics)
    }

    pub fn entries(&self) -> &[(String, Value)] {
        &self.entries
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            writeln!(s, "{k} = {v}").expect("writing to a String");
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for m in &self.methods {
            let r = &m.metrics;
            let real = |v: Option<f64>| Value::Real(v).to_string();
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                m.name,
                real(r.all.aepe),
                real(r.inside.aepe),
                real(r.outside.aepe),
                real(r.occluded.aepe),
                real(r.fl_all),
                r.all.pixels,
                r.inside.pixels,
                r.outside.pixels,
                r.occluded.pixels
            )
            .expect("writing to a String");
        }
        s
    }

    /// Writes `<dir>/report.txt` and `<dir>/report.csv`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        for (name, body) in [("report.txt", self.to_text()), ("report.csv", self.to_csv())] {
            let p = dir.join(name);
            fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}

/// Parsed text report; values stay as written.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvReport(pub BTreeMap<String, String>);

impl KvReport {
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected `key = value`", i + 1))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Self(map))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|d| Error::format(path, d))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    /// `Some(None)` for `absent`, `None` for a missing key or a non-number.
    pub fn real(&self, key: &str) -> Option<Option<f64>> {
        match self.get(key)? {
            ABSENT => Some(None),
            v => v.parse().ok().map(Some),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use flowfusion_core::metrics::RegionStat;

    fn metrics() -> MetricsReport {
        let s = |a, n| RegionStat { aepe: a, pixels: n };
        MetricsReport {
            all: s(Some(1.25), 10),
            inside: s(Some(0.5), 6),
            outside: s(Some(2.375), 4),
            occluded: s(None, 0),
            fl_all: Some(10.0),
        }
    }

    #[test]
    fn text_format() {
        let mut r = Report::new();
        r.push("samples", Value::Count(3));
        r.push_method("current", metrics());
        let text = r.to_text();
        assert!(text.starts_with("samples = 3\ncurrent.aepe_all = 1.250000\n"), "{text}");
        assert!(text.contains("current.aepe_occluded = absent\n"));
        assert!(text.contains("current.pixels_occluded = 0\n"));
        let kv = KvReport::parse(&text).unwrap();
        assert_eq!(kv.real("current.aepe_outside"), Some(Some(2.375)));
        assert_eq!(kv.real("current.aepe_occluded"), Some(None));
        assert_eq!(kv.real("nothing"), None);
    }

    #[test]
    fn csv_format() {
        let mut r = Report::new();
        r.push_method("oracle", metrics());
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "oracle,1.250000,0.500000,2.375000,absent,10.000000,10,6,4,0");
    }

    #[test]
    fn parse_errors_name_the_line() {
        assert!(KvReport::parse("# c\na = 1\nbroken\n").unwrap_err().contains("line 3"));
    }
}
