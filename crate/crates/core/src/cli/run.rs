//! Dispatch of a validated configuration and persistence of its outputs.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::config::{parse_config, Command, FlowParams, Params, RunConfig, U0Choice};
use super::output::{
    num, opt_num, read_run, CsvTable, FlowRun, Manifest, RunReport, Timing, SCHEMA_VERSION,
};
use crate::error::{Error, Result};
use crate::flow::{
    evolution_check, integrate, minimal_sphere_check, nonconvex_witness, pinch_range,
    pinch_range_generic, pinched_grid, summarize, SphereModel,
};
use crate::verifier::{run_suite, SuiteReport};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;
/// Environment variable naming the default output root.
pub const OUTPUT_ENV: &str = "PINCHLAB_OUT";
pub const DEFAULT_OUTPUT: &str = "pinchlab-runs";
/// Two boundary routes agree when every boundary differs by at most this.
pub const ROUTE_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    pub run_dir: Option<PathBuf>,
    /// Human-readable summary lines.
    pub lines: Vec<String>,
}

impl Outcome {
    fn usage(lines: Vec<String>) -> Self {
        Self {
            exit_code: EXIT_CONFIG,
            run_dir: None,
            lines,
        }
    }
}

/// First 16 hex digits of the SHA-256 of the canonical JSON of the config,
/// with the output root left out.
pub fn config_hash(config: &RunConfig) -> String {
    let mut c = config.clone();
    c.output = None;
    let json = serde_json::to_string(&c).expect("configs serialize");
    let digest = Sha256::digest(json.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

pub fn output_root(config: &RunConfig) -> PathBuf {
    config
        .output
        .clone()
        .or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT))
}

/// Parses `text` and executes it; parse failures give exit code 2 and no outputs.
pub fn run_config_text(text: &str, root: Option<&Path>) -> Outcome {
    match parse_config(text) {
        Ok(cfg) => match root {
            Some(r) => execute_in(&cfg, r),
            None => execute(&cfg),
        },
        Err(errs) => Outcome::usage(
            errs.0
                .iter()
                .map(|e| format!("config error: {e}"))
                .collect(),
        ),
    }
}

pub fn execute(config: &RunConfig) -> Outcome {
    execute_in(config, &output_root(config))
}

/// Output files of one run, relative path and contents.
struct Artifacts {
    files: Vec<(String, String)>,
    stages: Vec<(String, f64)>,
}

impl Artifacts {
    fn add(&mut self, path: impl Into<String>, contents: String) {
        self.files.push((path.into(), contents));
    }
}

fn exit_kind(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) | Error::Inadmissible { .. } | Error::Unsupported(_) => {
            EXIT_CONFIG
        }
        _ => EXIT_INTERNAL,
    }
}

pub fn execute_in(config: &RunConfig, root: &Path) -> Outcome {
    if let Params::Report { run_dir } = &config.params {
        return report(run_dir);
    }
    let start = Instant::now();
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0);
    let mut art = Artifacts {
        files: Vec::new(),
        stages: Vec::new(),
    };
    let computed = compute(config, &mut art);
    let hash = config_hash(config);
    let (report, exit_code, error) = match computed {
        Ok(r) => {
            let code = if r.pass() { EXIT_PASS } else { EXIT_VIOLATION };
            (Some(r), code, None)
        }
        Err(e) => {
            let code = exit_kind(&e);
            if code == EXIT_CONFIG {
                return Outcome::usage(vec![format!("error: {e}")]);
            }
            (None, code, Some(e.to_string()))
        }
    };
    let mut lines = match &report {
        Some(r) => summary_lines(r),
        None => Vec::new(),
    };
    if let Some(e) = &error {
        lines.push(format!("internal numerical failure: {e}"));
    }
    if let Some(r) = &report {
        match serde_json::to_string_pretty(r) {
            Ok(json) => art.add("report.json", json + "\n"),
            Err(e) => return internal(lines, format!("report serialization: {e}")),
        }
    }
    let mut files: Vec<String> = art.files.iter().map(|(p, _)| p.clone()).collect();
    files.push("manifest.json".into());
    files.sort();
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: config.command,
        config_hash: hash.clone(),
        config: RunConfig {
            output: None,
            ..config.clone()
        },
        pass: report.as_ref().is_some_and(RunReport::pass),
        exit_code,
        error,
        files,
    };
    let manifest_json = match serde_json::to_string_pretty(&manifest) {
        Ok(j) => j + "\n",
        Err(e) => return internal(lines, format!("manifest serialization: {e}")),
    };
    art.add("manifest.json", manifest_json);
    let timing = Timing {
        started_unix_s: started,
        wall_time_s: start.elapsed().as_secs_f64(),
        stages: art.stages.clone(),
    };
    art.add(
        "timing.json",
        serde_json::to_string_pretty(&timing).unwrap_or_default() + "\n",
    );
    match write_run(root, &hash, &art.files) {
        Ok(dir) => {
            lines.push(format!("run directory: {}", dir.display()));
            Outcome {
                exit_code,
                run_dir: Some(dir),
                lines,
            }
        }
        Err(e) => internal(lines, format!("writing outputs: {e}")),
    }
}

fn internal(mut lines: Vec<String>, msg: String) -> Outcome {
    lines.push(format!("internal failure: {msg}"));
    Outcome {
        exit_code: EXIT_INTERNAL,
        run_dir: None,
        lines,
    }
}

/// Creates `<root>/<hash>/run-NNNN` with the next free index and writes every file.
fn write_run(root: &Path, hash: &str, files: &[(String, String)]) -> Result<PathBuf> {
    let base = root.join(hash);
    fs::create_dir_all(&base)?;
    let mut idx = 1;
    let dir = loop {
        let d = base.join(format!("run-{idx:04}"));
        match fs::create_dir(&d) {
            Ok(()) => break d,
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => idx += 1,
            Err(e) => return Err(e.into()),
        }
    };
    for (rel, contents) in files {
        let path = dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, contents)?;
    }
    Ok(dir)
}

fn suite_table(reports: &[SuiteReport]) -> String {
    let mut out = String::from(SuiteReport::CSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

fn compute(config: &RunConfig, art: &mut Artifacts) -> Result<RunReport> {
    match &config.params {
        Params::Verify { suites } => {
            let mut reports = Vec::new();
            for spec in suites {
                let r = run_suite(spec)?;
                art.stages.push((spec.suite_id.to_string(), r.wall_time));
                for (i, cx) in r.violations.iter().enumerate() {
                    art.add(
                        format!("counterexamples/{}-{:03}.json", spec.suite_id, i),
                        serde_json::to_string_pretty(cx)? + "\n",
                    );
                }
                reports.push(r);
            }
            art.add("summary.csv", suite_table(&reports));
            Ok(RunReport::Verify { suites: reports })
        }
        Params::Scan { spec } => {
            let r = run_suite(spec)?;
            art.stages.push(("constant_scan".into(), r.wall_time));
            let mut t = CsvTable::new("name,n,m,k,eps,value,claim,holds");
            for v in &r.constants {
                t.push(vec![
                    v.name.clone(),
                    v.n.to_string(),
                    v.m.to_string(),
                    v.k.to_string(),
                    opt_num(v.eps),
                    num(v.value),
                    v.claim.clone(),
                    v.holds.to_string(),
                ]);
            }
            art.add("constants.csv", t.render());
            for (i, cx) in r.violations.iter().enumerate() {
                art.add(
                    format!("counterexamples/constant_scan-{i:03}.json"),
                    serde_json::to_string_pretty(cx)? + "\n",
                );
            }
            art.add("summary.csv", suite_table(std::slice::from_ref(&r)));
            Ok(RunReport::Scan { report: r })
        }
        Params::Flow(p) => flow(p, config.workers, art),
        Params::PinchRange { space, eps } => {
            let range = pinch_range(space, *eps)?;
            let q_route = pinch_range_generic(space, *eps)?;
            let boundary_gap = if q_route.len() == range.intervals.len() {
                range
                    .intervals
                    .iter()
                    .zip(&q_route)
                    .map(|(a, b)| (a.0 - b.0).abs().max((a.1 - b.1).abs()))
                    .fold(0.0, f64::max)
            } else {
                f64::MAX
            };
            let witness = nonconvex_witness(space, *eps)?;
            let mut t = CsvTable::new("route,lo,hi");
            for (name, ivs) in [("closed_form", &range.intervals), ("q_sign", &q_route)] {
                for &(lo, hi) in ivs {
                    t.push(vec![name.to_string(), num(lo), num(hi)]);
                }
            }
            art.add("summary.csv", t.render());
            Ok(RunReport::PinchRange {
                range,
                q_route,
                boundary_gap,
                routes_agree: boundary_gap <= ROUTE_TOL,
                nonconvex_witness: witness,
            })
        }
        Params::EvolutionCheck { space, u, h_fd } => {
            let reports = u
                .iter()
                .map(|&x| evolution_check(space, x, *h_fd))
                .collect::<Result<Vec<_>>>()?;
            let mut t = CsvTable::new(
                "u,quantity,comparison,fd_h,fd_h2,fd_h4,extrapolated,rhs,exact,order_vs_rhs,order_self,cancellation,holds",
            );
            for r in &reports {
                for q in &r.quantities {
                    t.push(vec![
                        num(r.u),
                        q.name.clone(),
                        serde_json::to_value(q.comparison)?
                            .as_str()
                            .unwrap_or_default()
                            .to_string(),
                        num(q.fd[0]),
                        num(q.fd[1]),
                        num(q.fd[2]),
                        num(q.extrapolated),
                        num(q.rhs),
                        num(q.exact),
                        num(q.order_vs_rhs),
                        num(q.order_self),
                        q.cancellation.to_string(),
                        q.holds.to_string(),
                    ]);
                }
            }
            art.add("summary.csv", t.render());
            Ok(RunReport::EvolutionCheck { reports })
        }
        Params::Minimal { space } => {
            let report = minimal_sphere_check(space)?;
            let mut t =
                CsvTable::new("u_star,u_star_closed_form,a2,bound,outside_pinch_range,pass");
            t.push(vec![
                num(report.u_star),
                num(report.u_star_closed_form),
                num(report.a2),
                num(report.bound),
                report.outside_pinch_range.to_string(),
                report.pass.to_string(),
            ]);
            art.add("summary.csv", t.render());
            Ok(RunReport::Minimal { report })
        }
        Params::Report { .. } => unreachable!("handled before dispatch"),
    }
}

fn flow(p: &FlowParams, workers: usize, art: &mut Artifacts) -> Result<RunReport> {
    let range = pinch_range(&p.space, p.eps)?;
    let u0s = match &p.u0 {
        U0Choice::List(v) => v.clone(),
        U0Choice::PinchedGrid(n) => pinched_grid(&range, *n)?,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let start = Instant::now();
    let trajs = pool.install(|| {
        u0s.par_iter()
            .map(|&u0| SphereModel::new(p.space, u0).and_then(|m| integrate(&m, p.eps, &p.policy)))
            .collect::<Result<Vec<_>>>()
    })?;
    art.stages
        .push(("integrate".into(), start.elapsed().as_secs_f64()));
    let mut runs = Vec::new();
    let mut t = CsvTable::new(
        "u0,pinched,termination,extinction_time,extinction_time_extrapolated,q_max,final_roundness,volume_error,pass",
    );
    for (i, traj) in trajs.iter().enumerate() {
        let summary = summarize(traj);
        let file = p
            .write_trajectories
            .then(|| format!("trajectories/traj-{i:03}.csv"));
        if let Some(f) = &file {
            art.add(f.clone(), traj.to_csv());
        }
        let pinched = range.contains(traj.model.u);
        t.push(vec![
            num(traj.model.u),
            pinched.to_string(),
            serde_json::to_value(traj.termination)?
                .as_str()
                .unwrap_or_default()
                .to_string(),
            opt_num(summary.extinction_time),
            opt_num(summary.extinction_time_extrapolated),
            num(summary.q_max),
            num(summary.final_roundness),
            num(summary.volume_error),
            summary.pass.to_string(),
        ]);
        runs.push(FlowRun {
            u0: traj.model.u,
            pinched,
            summary,
            trajectory: file,
        });
    }
    art.add("summary.csv", t.render());
    Ok(RunReport::Flow {
        space: p.space,
        eps: p.eps,
        range,
        runs,
    })
}

fn summary_lines(r: &RunReport) -> Vec<String> {
    let verdict = |b: bool| if b { "PASS" } else { "FAIL" };
    match r {
        RunReport::Verify { suites } => suites
            .iter()
            .map(|s| {
                format!(
                    "{} {}: {} trials, {} violations, worst slack {:.3e} ({}){}",
                    verdict(s.pass),
                    s.suite_id,
                    s.trials_run,
                    s.violation_count,
                    s.worst_slack,
                    s.worst_check,
                    if s.stopped_early { ", stopped early" } else { "" }
                )
            })
            .collect(),
        RunReport::Scan { report } => vec![format!(
            "{} constant_scan: {} values, {} violations, worst slack {:.3e} ({})",
            verdict(report.pass),
            report.trials_run,
            report.violation_count,
            report.worst_slack,
            report.worst_check
        )],
        RunReport::Flow { space, runs, .. } => {
            let pinched: Vec<&FlowRun> = runs.iter().filter(|r| r.pinched).collect();
            let failed = pinched.iter().filter(|r| !r.summary.pass).count();
            vec![format!(
                "{} flow {}^{}: {} runs, {} pinched, {} pinched runs failed",
                verdict(failed == 0),
                space.kind.label(),
                space.n,
                runs.len(),
                pinched.len(),
                failed
            )]
        }
        RunReport::PinchRange { range, q_route, boundary_gap, routes_agree, nonconvex_witness } => vec![format!(
            "{} pinch-range {}^{}: closed form {:?}, Q sign {:?}, gap {:.3e}, non-convex witness {:?}",
            verdict(*routes_agree),
            range.space.kind.label(),
            range.space.n,
            range.intervals,
            q_route,
            boundary_gap,
            nonconvex_witness
        )],
        RunReport::EvolutionCheck { reports } => reports
            .iter()
            .flat_map(|rep| {
                rep.quantities.iter().map(move |q| {
                    format!(
                        "{} u = {:.6} {}: extrapolated {:.10e}, rhs {:.10e}, order {:.3} (self {:.3})",
                        verdict(q.holds),
                        rep.u,
                        q.name,
                        q.extrapolated,
                        q.rhs,
                        q.order_vs_rhs,
                        q.order_self
                    )
                })
            })
            .collect(),
        RunReport::Minimal { report } => vec![format!(
            "{} minimal {}^{}: u* = {:.12}, |A|^2 = {:.12} >= {}, outside pinched range: {}",
            verdict(report.pass),
            report.space.kind.label(),
            report.space.n,
            report.u_star,
            report.a2,
            report.bound,
            report.outside_pinch_range
        )],
    }
}

/// Reads a run directory back and prints its summary; the exit code is the recorded one.
fn report(dir: &Path) -> Outcome {
    let rec = match read_run(dir) {
        Ok(r) => r,
        Err(e) => {
            return Outcome::usage(vec![format!(
                "cannot read run directory {}: {e}",
                dir.display()
            )])
        }
    };
    let mut lines = vec![format!(
        "command {} (config {}), recorded exit code {}",
        rec.manifest.command, rec.manifest.config_hash, rec.manifest.exit_code
    )];
    if let Some(r) = &rec.report {
        lines.extend(summary_lines(r));
        if r.pass() != rec.manifest.pass {
            lines.push("manifest verdict disagrees with report.json".into());
            return Outcome {
                exit_code: EXIT_INTERNAL,
                run_dir: Some(dir.to_path_buf()),
                lines,
            };
        }
    }
    if let Some(e) = &rec.manifest.error {
        lines.push(format!("recorded error: {e}"));
    }
    lines.push(format!(
        "{} files, {} counterexamples, {} trajectories",
        rec.manifest.files.len(),
        rec.counterexamples.len(),
        rec.trajectories.len()
    ));
    Outcome {
        exit_code: rec.manifest.exit_code,
        run_dir: Some(dir.to_path_buf()),
        lines,
    }
}

/// `command = "<cmd>"` followed by a `[section]` with `key = value` lines.
pub fn config_from_pairs(command: Command, pairs: &[String]) -> String {
    let mut text = format!("command = \"{command}\"\n[{}]\n", command.section());
    for p in pairs {
        text.push_str(p);
        text.push('\n');
    }
    text
}
