//! Run-directory files and their readers.
//!
//! Layout of `<root>/<config hash>/run-NNNN/`:
//!
//! - `manifest.json`: [`Manifest`].
//! - `report.json`: [`RunReport`].
//! - `summary.csv`: one row per suite, run, interval or quantity.
//! - `constants.csv`: constant-scan values (scan only).
//! - `counterexamples/<suite>-NNN.json`: [`Counterexample`] (verify only).
//! - `trajectories/traj-NNN.csv`: flow samples (flow only).
//! - `timing.json`: wall-clock data, the only file that differs between repeats.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{Command, RunConfig};
use crate::ambient::AmbientSpace;
use crate::error::{Error, Result};
use crate::flow::{
    read_trajectory_csv, EvolutionReport, FlowSample, InvarianceRun, MinimalSphereReport,
    PinchRange,
};
use crate::verifier::{Counterexample, SuiteReport};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowRun {
    pub u0: f64,
    /// `u0` lies in the pinched range; only these runs carry assertions.
    pub pinched: bool,
    pub summary: InvarianceRun,
    /// Trajectory file relative to the run directory.
    pub trajectory: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum RunReport {
    Verify {
        suites: Vec<SuiteReport>,
    },
    Scan {
        report: SuiteReport,
    },
    Flow {
        space: AmbientSpace,
        eps: f64,
        range: PinchRange,
        runs: Vec<FlowRun>,
    },
    PinchRange {
        range: PinchRange,
        /// Intervals located from the sign of `Q`.
        q_route: Vec<(f64, f64)>,
        /// Largest distance between corresponding boundaries of the two routes.
        boundary_gap: f64,
        routes_agree: bool,
        nonconvex_witness: Option<f64>,
    },
    EvolutionCheck {
        reports: Vec<EvolutionReport>,
    },
    Minimal {
        report: MinimalSphereReport,
    },
}

impl RunReport {
    pub fn pass(&self) -> bool {
        match self {
            RunReport::Verify { suites } => suites.iter().all(|s| s.pass),
            RunReport::Scan { report } => report.pass,
            RunReport::Flow { runs, .. } => runs.iter().all(|r| !r.pinched || r.summary.pass),
            RunReport::PinchRange { routes_agree, .. } => *routes_agree,
            RunReport::EvolutionCheck { reports } => reports.iter().all(|r| r.pass),
            RunReport::Minimal { report } => report.pass,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: Command,
    pub config_hash: String,
    pub config: RunConfig,
    pub pass: bool,
    pub exit_code: i32,
    pub error: Option<String>,
    /// Every file of the run directory except `timing.json`, sorted.
    pub files: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub started_unix_s: f64,
    pub wall_time_s: f64,
    /// `(label, seconds)` per suite or per stage.
    pub stages: Vec<(String, f64)>,
}

/// A comma-separated table without quoting; cells never contain commas.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &str) -> Self {
        Self {
            header: header.split(',').map(str::to_string).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| Error::InvalidArgument("empty CSV".into()))?
            .split(',')
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (i, l) in lines.enumerate() {
            if l.is_empty() {
                continue;
            }
            let row: Vec<String> = l.split(',').map(str::to_string).collect();
            if row.len() != header.len() {
                return Err(Error::InvalidArgument(format!(
                    "CSV row {}: expected {} cells, got {}",
                    i + 2,
                    header.len(),
                    row.len()
                )));
            }
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j].as_str()).collect())
    }
}

/// 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    read_json(&dir.join("manifest.json"))
}

pub fn read_report(dir: &Path) -> Result<RunReport> {
    read_json(&dir.join("report.json"))
}

pub fn read_timing(dir: &Path) -> Result<Timing> {
    read_json(&dir.join("timing.json"))
}

pub fn read_csv(path: &Path) -> Result<CsvTable> {
    CsvTable::parse(&fs::read_to_string(path)?)
}

pub fn read_counterexample(path: &Path) -> Result<Counterexample> {
    read_json(path)
}

pub fn read_trajectory(path: &Path) -> Result<Vec<FlowSample>> {
    let f = fs::File::open(path)?;
    read_trajectory_csv(std::io::BufReader::new(f))
}

/// Everything stored in one run directory.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub report: Option<RunReport>,
    pub summary: Option<CsvTable>,
    pub counterexamples: Vec<(String, Counterexample)>,
    pub trajectories: Vec<(String, Vec<FlowSample>)>,
    pub tables: Vec<(String, CsvTable)>,
}

/// Loads and parses every file listed in the manifest.
pub fn read_run(dir: &Path) -> Result<RunRecord> {
    let manifest = read_manifest(dir)?;
    let mut rec = RunRecord {
        dir: dir.to_path_buf(),
        manifest,
        report: None,
        summary: None,
        counterexamples: Vec::new(),
        trajectories: Vec::new(),
        tables: Vec::new(),
    };
    for f in rec.manifest.files.clone() {
        let path = dir.join(&f);
        if f == "manifest.json" {
            continue;
        } else if f == "report.json" {
            rec.report = Some(read_report(dir)?);
        } else if f == "summary.csv" {
            rec.summary = Some(read_csv(&path)?);
        } else if f.starts_with("counterexamples/") {
            rec.counterexamples
                .push((f.clone(), read_counterexample(&path)?));
        } else if f.starts_with("trajectories/") {
            rec.trajectories.push((f.clone(), read_trajectory(&path)?));
        } else if f.ends_with(".csv") {
            rec.tables.push((f.clone(), read_csv(&path)?));
        } else {
            return Err(Error::InvalidArgument(format!(
                "unexpected file in manifest: {f}"
            )));
        }
    }
    Ok(rec)
}
