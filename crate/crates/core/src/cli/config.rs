//! TOML run configuration.
//!
//! ```toml
//! command = "verify"
//! workers = 4
//!
//! [verify]
//! suite = "r2_identity"
//! dims = [[12, 2]]
//! trials = 1000
//! seed = 1
//! ```
//!
//! Each command reads the section of the same name (`-` becomes `_`).

use std::collections::BTreeSet;
use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::ambient::{AmbientSpace, SpaceKind};
use crate::flow::{focal_radius, StepPolicy};
use crate::verifier::{SuiteId, SuiteSpec};

/// Dimensions of the default verification matrix.
pub const DEFAULT_DIMS: [(usize, usize); 5] = [(5, 1), (13, 1), (12, 2), (16, 2), (27, 3)];
pub const DEFAULT_H_FD: f64 = 1e-3;
pub const DEFAULT_GRID: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Verify,
    Scan,
    Flow,
    PinchRange,
    EvolutionCheck,
    Minimal,
    Report,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Verify,
        Command::Scan,
        Command::Flow,
        Command::PinchRange,
        Command::EvolutionCheck,
        Command::Minimal,
        Command::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::Scan => "scan",
            Command::Flow => "flow",
            Command::PinchRange => "pinch-range",
            Command::EvolutionCheck => "evolution-check",
            Command::Minimal => "minimal",
            Command::Report => "report",
        }
    }

    /// Name of the TOML section holding the command's keys.
    pub fn section(self) -> &'static str {
        match self {
            Command::PinchRange => "pinch_range",
            Command::EvolutionCheck => "evolution_check",
            c => c.as_str(),
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Command::ALL.iter().map(|c| c.as_str()).collect();
                format!(
                    "unknown command `{s}`; expected one of {}",
                    names.join(", ")
                )
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum U0Choice {
    List(Vec<f64>),
    /// Evenly spaced radii inside the first pinched interval.
    PinchedGrid(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    pub space: AmbientSpace,
    pub u0: U0Choice,
    pub eps: f64,
    pub policy: StepPolicy,
    pub write_trajectories: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Params {
    Verify {
        suites: Vec<SuiteSpec>,
    },
    Scan {
        spec: SuiteSpec,
    },
    Flow(FlowParams),
    PinchRange {
        space: AmbientSpace,
        eps: f64,
    },
    EvolutionCheck {
        space: AmbientSpace,
        u: Vec<f64>,
        h_fd: f64,
    },
    Minimal {
        space: AmbientSpace,
    },
    Report {
        run_dir: PathBuf,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub workers: usize,
    /// Output root; falls back to `PINCHLAB_OUT`, then `pinchlab-runs`.
    pub output: Option<PathBuf>,
    pub params: Params,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(l) = self.line {
            write!(f, "line {l}: ")?;
        }
        if let Some(k) = &self.key {
            write!(f, "`{k}`: ")?;
        }
        f.write_str(&self.message)
    }
}

/// Every problem found in a configuration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key = ...` inside `section` (`None` for the root table).
fn locate(text: &str, section: Option<&str>, key: &str) -> Option<usize> {
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            current = Some(
                line.trim_matches(|c| c == '[' || c == ']')
                    .trim()
                    .to_string(),
            );
            continue;
        }
        if current.as_deref() == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim().trim_matches('"') == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

fn locate_section(text: &str, section: &str) -> Option<usize> {
    text.lines()
        .position(|l| l.trim().trim_matches(|c| c == '[' || c == ']').trim() == section)
        .map(|i| i + 1)
}

/// Typed reads from one table, collecting errors and remembering used keys.
struct Reader<'a, 'e> {
    text: &'a str,
    section: Option<&'a str>,
    table: &'a Table,
    used: BTreeSet<String>,
    errors: &'e mut Vec<ConfigError>,
}

impl<'a> Reader<'a, '_> {
    fn err(&mut self, key: &str, message: String) {
        let line = locate(self.text, self.section, key)
            .or_else(|| self.section.and_then(|s| locate_section(self.text, s)));
        let key = match self.section {
            Some(s) => format!("{s}.{key}"),
            None => key.to_string(),
        };
        self.errors.push(ConfigError {
            line,
            key: Some(key),
            message,
        });
    }

    fn get(&mut self, key: &str) -> Option<&'a Value> {
        self.used.insert(key.to_string());
        self.table.get(key)
    }

    fn float(&mut self, key: &str, default: f64) -> f64 {
        match self.get(key) {
            None => default,
            Some(Value::Float(x)) => *x,
            Some(Value::Integer(i)) => *i as f64,
            Some(v) => {
                self.err(key, format!("expected a number, got {}", v.type_str()));
                default
            }
        }
    }

    fn uint(&mut self, key: &str, default: u64) -> u64 {
        match self.get(key) {
            None => default,
            Some(Value::Integer(i)) if *i >= 0 => *i as u64,
            Some(v) => {
                self.err(key, format!("expected a nonnegative integer, got {v}"));
                default
            }
        }
    }

    fn boolean(&mut self, key: &str, default: bool) -> bool {
        match self.get(key) {
            None => default,
            Some(Value::Boolean(b)) => *b,
            Some(v) => {
                self.err(key, format!("expected true or false, got {}", v.type_str()));
                default
            }
        }
    }

    fn string(&mut self, key: &str) -> Option<String> {
        match self.get(key) {
            None => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(v) => {
                self.err(key, format!("expected a string, got {}", v.type_str()));
                None
            }
        }
    }

    /// A number or an array of numbers.
    fn floats(&mut self, key: &str) -> Option<Vec<f64>> {
        let v = self.get(key)?;
        let num = |v: &Value| match v {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            _ => None,
        };
        match v {
            Value::Array(items) => {
                let out: Option<Vec<f64>> = items.iter().map(num).collect();
                if out.is_none() {
                    self.err(key, "expected an array of numbers".into());
                }
                out
            }
            other => match num(other) {
                Some(x) => Some(vec![x]),
                None => {
                    self.err(
                        key,
                        format!(
                            "expected a number or an array of numbers, got {}",
                            other.type_str()
                        ),
                    );
                    None
                }
            },
        }
    }

    /// A string or an array of strings.
    fn strings(&mut self, key: &str) -> Option<Vec<String>> {
        let v = self.get(key)?;
        match v {
            Value::String(s) => Some(vec![s.clone()]),
            Value::Array(items) => {
                let out: Option<Vec<String>> = items
                    .iter()
                    .map(|x| x.as_str().map(str::to_string))
                    .collect();
                if out.is_none() {
                    self.err(key, "expected an array of strings".into());
                }
                out
            }
            other => {
                self.err(
                    key,
                    format!(
                        "expected a string or an array of strings, got {}",
                        other.type_str()
                    ),
                );
                None
            }
        }
    }

    fn dims(&mut self, key: &str) -> Option<Vec<(usize, usize)>> {
        let v = self.get(key)?;
        let pair = |v: &Value| -> Option<(usize, usize)> {
            let a = v.as_array()?;
            match a.as_slice() {
                [Value::Integer(m), Value::Integer(k)] if *m >= 0 && *k >= 0 => {
                    Some((*m as usize, *k as usize))
                }
                _ => None,
            }
        };
        let list = match v {
            Value::Array(items) if items.iter().all(|x| x.is_array()) => {
                items.iter().map(pair).collect()
            }
            single => pair(single).map(|p| vec![p]),
        };
        if list.is_none() {
            self.err(key, "expected [m, k] or a list of [m, k] pairs".into());
        }
        list
    }

    fn finish(self) {
        let unknown: Vec<String> = self
            .table
            .keys()
            .filter(|k| !self.used.contains(*k))
            .cloned()
            .collect();
        for k in unknown {
            let line = locate(self.text, self.section, &k);
            let key = match self.section {
                Some(s) => format!("{s}.{k}"),
                None => k.clone(),
            };
            self.errors.push(ConfigError {
                line,
                key: Some(key),
                message: "unknown key".into(),
            });
        }
    }
}

fn read_space(r: &mut Reader<'_, '_>, complex_only: bool) -> Option<AmbientSpace> {
    let kind = match r
        .string("space")
        .as_deref()
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        None | Some("cp") => Some(SpaceKind::ComplexProjective),
        Some("hp") => Some(SpaceKind::QuaternionicProjective),
        Some(other) => {
            r.err(
                "space",
                format!("expected \"cp\" or \"hp\", got \"{other}\""),
            );
            None
        }
    };
    let n = r.uint("n", 3) as usize;
    let c = r.float("c", 1.0);
    let mut ok = kind.is_some();
    if n < 3 {
        r.err(
            "n",
            format!("n = {n}: geodesic-sphere commands need n >= 3"),
        );
        ok = false;
    }
    if !(c.is_finite() && c > 0.0) {
        r.err("c", format!("c = {c} must be positive"));
        ok = false;
    }
    if complex_only && kind == Some(SpaceKind::QuaternionicProjective) {
        r.err(
            "space",
            "this command realizes frames and needs \"cp\"; HP^n is scalar only".into(),
        );
        ok = false;
    }
    if !ok {
        return None;
    }
    AmbientSpace::new(kind?, n, c).ok()
}

fn check_eps(r: &mut Reader<'_, '_>, key: &str, eps: f64) -> bool {
    if (0.0..1.0).contains(&eps) {
        true
    } else {
        r.err(
            key,
            format!("eps = {eps} outside [0, 1): the pinching constants need 0 <= eps < 1"),
        );
        false
    }
}

fn read_verify(r: &mut Reader<'_, '_>, workers: usize) -> Option<Params> {
    let names = r
        .strings("suite")
        .unwrap_or_else(|| vec!["all".to_string()]);
    let mut ids = Vec::new();
    for name in &names {
        if name == "all" {
            ids.extend(SuiteId::ALL);
            continue;
        }
        match name.parse::<SuiteId>() {
            Ok(id) => ids.push(id),
            Err(_) => {
                let known: Vec<&str> = SuiteId::ALL.iter().map(|s| s.as_str()).collect();
                r.err(
                    "suite",
                    format!("unknown suite `{name}`; known: all, {}", known.join(", ")),
                );
            }
        }
    }
    let dims = r.dims("dims").unwrap_or_else(|| DEFAULT_DIMS.to_vec());
    let trials = r
        .get("trials")
        .is_some()
        .then(|| r.uint("trials", 0) as usize);
    let seed = r.uint("seed", 0);
    let eps = r.floats("eps");
    let margin = r.float("margin", 1e-6);
    let c = r.float("c", 1.0);
    let mutant = r.string("mutant");
    let negative_test = r.boolean("negative_test", false);
    let fail_fast = r.boolean("fail_fast", false);
    let n_max = r.uint("n_max", 100) as usize;
    if let Some(es) = &eps {
        for &e in es {
            check_eps(r, "eps", e);
        }
    }
    let mut suites = Vec::new();
    let mut reported = BTreeSet::new();
    for id in ids {
        let mut spec = SuiteSpec::new(
            id,
            dims.clone(),
            trials.unwrap_or(id.default_trials()),
            seed,
        );
        if let Some(es) = &eps {
            spec.eps = es.clone();
        }
        spec.margin = margin;
        spec.c = c;
        spec.mutant = mutant.clone();
        spec.negative_test = negative_test;
        spec.fail_fast = fail_fast;
        spec.workers = workers.max(1);
        spec.n_max = n_max;
        for p in spec.problems() {
            // eps problems were reported above.
            if p.starts_with("eps = ") || !reported.insert(p.clone()) {
                continue;
            }
            let key = if p.contains("dims")
                || p.contains("admissible")
                || p.contains("n >=")
                || p.contains("(2n - 3)/5")
            {
                "dims"
            } else if p.contains("mutant") {
                "mutant"
            } else if p.contains("trials") {
                "trials"
            } else if p.contains("margin") {
                "margin"
            } else if p.contains("n_max") {
                "n_max"
            } else if p.starts_with("c = ") {
                "c"
            } else {
                "suite"
            };
            r.err(key, format!("{id}: {p}"));
        }
        suites.push(spec);
    }
    Some(Params::Verify { suites })
}

fn read_scan(r: &mut Reader<'_, '_>, workers: usize) -> Option<Params> {
    let n_max = r.uint("n_max", 100) as usize;
    let eps = r.floats("eps");
    let mutant = r.string("mutant");
    let mut spec = SuiteSpec::new(SuiteId::ConstantScan, Vec::new(), 1, 0);
    spec.n_max = n_max;
    spec.mutant = mutant;
    spec.workers = workers.max(1);
    if let Some(es) = eps {
        spec.eps = es;
    }
    for p in spec.problems() {
        let key = if p.contains("n_max") {
            "n_max"
        } else if p.contains("mutant") {
            "mutant"
        } else {
            "eps"
        };
        r.err(key, p);
    }
    Some(Params::Scan { spec })
}

fn check_radius(r: &mut Reader<'_, '_>, key: &str, space: Option<AmbientSpace>, u: f64) -> bool {
    let Some(space) = space else { return true };
    let uf = focal_radius(&space);
    if u > 0.0 && u < uf {
        true
    } else {
        r.err(
            key,
            format!("u = {u} outside (0, {uf}) for c = {}", space.c),
        );
        false
    }
}

fn read_flow(r: &mut Reader<'_, '_>) -> Option<Params> {
    let space = read_space(r, false);
    let u0 = r.floats("u0");
    let grid = r
        .get("grid")
        .is_some()
        .then(|| r.uint("grid", DEFAULT_GRID as u64) as usize);
    let eps = r.float("eps", 0.0);
    let d = StepPolicy::default();
    let policy = StepPolicy {
        rtol: r.float("rtol", d.rtol),
        atol: r.float("atol", d.atol),
        u_stop: r.float("u_stop", d.u_stop),
        t_max: r.float("t_max", d.t_max),
        max_steps: r.uint("max_steps", d.max_steps as u64) as usize,
    };
    let write_trajectories = r.boolean("write_trajectories", true);
    let eps_ok = check_eps(r, "eps", eps);
    if let Err(e) = policy.validate() {
        let msg = e.to_string();
        let key = ["rtol", "atol", "u_stop", "t_max", "max_steps"]
            .into_iter()
            .find(|k| msg.contains(k))
            .unwrap_or("rtol");
        r.err(key, msg);
    }
    let choice = match (u0, grid) {
        (Some(_), Some(_)) => {
            r.err("grid", "give either u0 or grid, not both".into());
            None
        }
        (Some(list), None) => {
            if list.is_empty() {
                r.err("u0", "u0 list is empty".into());
            }
            let all_ok = list
                .iter()
                .fold(true, |acc, &u| check_radius(r, "u0", space, u) && acc);
            all_ok.then_some(U0Choice::List(list))
        }
        (None, Some(0)) => {
            r.err("grid", "grid must be at least 1".into());
            None
        }
        (None, g) => Some(U0Choice::PinchedGrid(g.unwrap_or(DEFAULT_GRID))),
    };
    let (space, u0) = (space?, choice?);
    eps_ok.then_some(Params::Flow(FlowParams {
        space,
        u0,
        eps,
        policy,
        write_trajectories,
    }))
}

fn read_range(r: &mut Reader<'_, '_>) -> Option<Params> {
    let space = read_space(r, false);
    let eps = r.float("eps", 0.0);
    let ok = check_eps(r, "eps", eps);
    ok.then_some(Params::PinchRange { space: space?, eps })
}

fn read_evolution(r: &mut Reader<'_, '_>) -> Option<Params> {
    let space = read_space(r, true);
    let u = r.floats("u").unwrap_or_else(|| vec![FRAC_PI_4]);
    let h_fd = r.float("h_fd", DEFAULT_H_FD);
    let mut ok = true;
    if u.is_empty() {
        r.err("u", "u list is empty".into());
        ok = false;
    }
    for &x in &u {
        ok &= check_radius(r, "u", space, x);
    }
    if !(h_fd.is_finite() && h_fd > 0.0) {
        r.err("h_fd", format!("h_fd = {h_fd} must be positive"));
        ok = false;
    }
    let space = space?;
    ok.then_some(Params::EvolutionCheck { space, u, h_fd })
}

fn read_minimal(r: &mut Reader<'_, '_>) -> Option<Params> {
    read_space(r, false).map(|space| Params::Minimal { space })
}

fn read_report(r: &mut Reader<'_, '_>) -> Option<Params> {
    match r.string("run_dir") {
        Some(d) => Some(Params::Report {
            run_dir: PathBuf::from(d),
        }),
        None => {
            r.err("run_dir", "required".into());
            None
        }
    }
}

/// Parses and validates a configuration, reporting every problem found.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| {
        let line = e.span().map(|s| line_of_offset(text, s.start));
        ConfigErrors(vec![ConfigError {
            line,
            key: None,
            message: format!("syntax error: {}", e.message()),
        }])
    })?;
    let mut errors = Vec::new();
    let mut root = Reader {
        text,
        section: None,
        table: &table,
        used: BTreeSet::new(),
        errors: &mut errors,
    };
    let command = match root.string("command") {
        Some(s) => match s.parse::<Command>() {
            Ok(c) => Some(c),
            Err(e) => {
                root.err("command", e);
                None
            }
        },
        None => {
            root.err("command", "required".into());
            None
        }
    };
    let workers = root.uint("workers", 1) as usize;
    if workers == 0 {
        root.err("workers", "workers must be at least 1".into());
    }
    let output = root.string("output").map(PathBuf::from);
    let Some(command) = command else {
        root.finish();
        return Err(ConfigErrors(errors));
    };
    let section_name = command.section();
    let empty = Table::new();
    let section = match root.get(section_name) {
        None => &empty,
        Some(Value::Table(t)) => t,
        Some(_) => {
            root.err(section_name, "expected a table".into());
            &empty
        }
    };
    root.finish();
    let mut r = Reader {
        text,
        section: Some(section_name),
        table: section,
        used: BTreeSet::new(),
        errors: &mut errors,
    };
    let params = match command {
        Command::Verify => read_verify(&mut r, workers),
        Command::Scan => read_scan(&mut r, workers),
        Command::Flow => read_flow(&mut r),
        Command::PinchRange => read_range(&mut r),
        Command::EvolutionCheck => read_evolution(&mut r),
        Command::Minimal => read_minimal(&mut r),
        Command::Report => read_report(&mut r),
    };
    r.finish();
    match params {
        Some(params) if errors.is_empty() => Ok(RunConfig {
            command,
            workers: workers.max(1),
            output,
            params,
        }),
        _ => {
            errors.sort_by_key(|e| e.line.unwrap_or(usize::MAX));
            Err(ConfigErrors(errors))
        }
    }
}
