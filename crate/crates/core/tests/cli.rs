use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command as Proc;

use pinchlab::cli::{
    config_hash, parse_config, read_run, run_config_text, Command, Params, RunReport, EXIT_CONFIG,
    EXIT_PASS, EXIT_VIOLATION,
};

const R2: &str = r#"
command = "verify"
[verify]
suite = "r2_identity"
dims = [[12, 2], [5, 1]]
trials = 200
seed = 3
"#;

fn bin() -> Proc {
    Proc::new(env!("CARGO_BIN_EXE_pinchlab"))
}

/// Every file of a run directory except `timing.json`, keyed by relative path.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "timing.json" {
                out.insert(
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}

#[test]
fn parses_a_suite_config() {
    let cfg = parse_config(R2).unwrap();
    assert_eq!(cfg.command, Command::Verify);
    assert_eq!(cfg.workers, 1);
    match &cfg.params {
        Params::Verify { suites } => {
            assert_eq!(suites.len(), 1);
            assert_eq!(suites[0].dims, vec![(12, 2), (5, 1)]);
            assert_eq!((suites[0].trials, suites[0].seed), (200, 3));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn rejects_inadmissible_dims() {
    let text = R2.replace("[[12, 2], [5, 1]]", "[[11, 3]]");
    let errs = parse_config(&text).unwrap_err();
    assert!(
        errs.0.iter().any(|e| e.message.contains("(2n - 3)/5")),
        "{errs}"
    );
    assert!(errs
        .0
        .iter()
        .any(|e| e.key.as_deref() == Some("verify.dims")));
    // Allowed as a negative test.
    let neg = text.replace("seed = 3", "seed = 3\nnegative_test = true");
    assert!(parse_config(&neg).is_ok());
}

#[test]
fn rejects_eps_one() {
    let errs = parse_config("command = \"flow\"\n[flow]\neps = 1.0\n").unwrap_err();
    assert!(
        errs.0.iter().any(|e| e.key.as_deref() == Some("flow.eps")),
        "{errs}"
    );
}

#[test]
fn collects_every_error_with_lines() {
    let text = "command = \"flow\"\nworkers = 0\n[flow]\nspace = \"rp\"\neps = 2.0\nbogus = 1\n";
    let errs = parse_config(text).unwrap_err();
    assert!(errs.0.len() >= 4, "{errs}");
    let find = |k: &str| {
        errs.0
            .iter()
            .find(|e| e.key.as_deref() == Some(k))
            .unwrap_or_else(|| panic!("{k}: {errs}"))
    };
    assert_eq!(find("workers").line, Some(2));
    assert_eq!(find("flow.space").line, Some(4));
    assert_eq!(find("flow.eps").line, Some(5));
    assert_eq!(find("flow.bogus").line, Some(6));
    assert!(errs.to_string().contains("line 6"));
    assert!(parse_config("command = \"nope\"\n").is_err());
    assert!(parse_config("[verify]\n").is_err());
    assert!(parse_config("command = ").is_err());
}

#[test]
fn library_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let ok = run_config_text(R2, Some(tmp.path()));
    assert_eq!(ok.exit_code, EXIT_PASS, "{:?}", ok.lines);
    let dir = ok.run_dir.unwrap();
    assert!(dir.starts_with(tmp.path()));
    assert!(dir
        .file_name()
        .unwrap()
        .to_str()
        .unwrap()
        .starts_with("run-"));

    let mutated = R2.replace(
        "seed = 3",
        "seed = 3\nmutant = \"r2_inverse_m_minus_1\"\nfail_fast = true",
    );
    let bad = run_config_text(&mutated, Some(tmp.path()));
    assert_eq!(bad.exit_code, EXIT_VIOLATION);
    let rec = read_run(&bad.run_dir.unwrap()).unwrap();
    assert!(!rec.counterexamples.is_empty());
    assert!(!rec.manifest.pass && rec.manifest.exit_code == EXIT_VIOLATION);

    let cfg = run_config_text(
        "command = \"verify\"\n[verify]\ntrials = -1\n",
        Some(tmp.path()),
    );
    assert_eq!(cfg.exit_code, EXIT_CONFIG);
    assert!(cfg.run_dir.is_none());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let configs = [
        R2.to_string(),
        R2.replace("seed = 3", "seed = 3\nmutant = \"r2_inverse_m_minus_1\""),
        "command = \"flow\"\n[flow]\ngrid = 5\n".to_string(),
        "command = \"pinch-range\"\n[pinch_range]\nn = 4\n".to_string(),
        "command = \"evolution-check\"\n[evolution_check]\nu = [0.7, 0.9]\n".to_string(),
        "command = \"minimal\"\n[minimal]\nspace = \"hp\"\nn = 4\n".to_string(),
        "command = \"scan\"\n[scan]\nn_max = 40\n".to_string(),
    ];
    for text in &configs {
        let a = run_config_text(text, Some(tmp.path()));
        let b = run_config_text(text, Some(tmp.path()));
        let (da, db) = (a.run_dir.unwrap(), b.run_dir.unwrap());
        assert_ne!(da, db);
        assert_eq!(da.parent(), db.parent());
        assert_eq!(snapshot(&da), snapshot(&db), "{text}");
        assert!(da.join("timing.json").exists());
    }
}

#[test]
fn results_do_not_depend_on_workers() {
    let tmp = tempfile::tempdir().unwrap();
    let one = run_config_text(&format!("workers = 1\n{R2}"), Some(tmp.path()));
    let three = run_config_text(&format!("workers = 3\n{R2}"), Some(tmp.path()));
    let (a, b) = (
        read_run(&one.run_dir.unwrap()).unwrap(),
        read_run(&three.run_dir.unwrap()).unwrap(),
    );
    assert_ne!(a.manifest.config_hash, b.manifest.config_hash);
    assert_eq!(a.report, b.report);
    assert_eq!(a.summary, b.summary);
}

#[test]
fn run_directory_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_config_text(
        "command = \"flow\"\n[flow]\nu0 = [0.5, 0.785]\n",
        Some(tmp.path()),
    );
    assert_eq!(out.exit_code, EXIT_PASS, "{:?}", out.lines);
    let dir = out.run_dir.unwrap();
    let rec = read_run(&dir).unwrap();
    let cfg = parse_config("command = \"flow\"\n[flow]\nu0 = [0.5, 0.785]\n").unwrap();
    assert_eq!(rec.manifest.config_hash, config_hash(&cfg));
    assert_eq!(
        dir.parent().unwrap().file_name().unwrap().to_str().unwrap(),
        config_hash(&cfg)
    );
    assert_eq!(rec.trajectories.len(), 2);
    match rec.report.as_ref().unwrap() {
        RunReport::Flow { runs, .. } => {
            for (run, (_, samples)) in runs.iter().zip(&rec.trajectories) {
                assert_eq!(run.summary.samples, samples.len());
                assert_eq!(samples[0].u, run.u0);
            }
        }
        other => panic!("{other:?}"),
    }
    let report = run_config_text(
        &format!(
            "command = \"report\"\n[report]\nrun_dir = \"{}\"\n",
            dir.display()
        ),
        Some(tmp.path()),
    );
    assert_eq!(report.exit_code, EXIT_PASS);
    assert!(
        report.lines.iter().any(|l| l.contains("2 trajectories")),
        "{:?}",
        report.lines
    );
}

#[test]
fn binary_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("r2.toml");
    fs::write(&cfg, R2).unwrap();
    let out = tmp.path().join("runs");

    let st = bin()
        .args(["run"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(
        st.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&st.stderr)
    );

    let st = bin()
        .args([
            "verify",
            "--set",
            "suite=\"r2_identity\"",
            "--set",
            "dims=[[12,2]]",
            "--set",
            "trials=300",
        ])
        .args(["--set", "mutant=\"r2_inverse_m_minus_1\""])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(1));

    let st = bin()
        .args(["verify", "--set", "dims=[[11,3]]"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&st.stderr).contains("(2n - 3)/5"));

    let st = bin()
        .args(["flow", "--set", "eps=1.0"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(2));

    let st = bin()
        .args(["evolution-check"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(1));

    let st = bin().args(["frobnicate"]).output().unwrap();
    assert_eq!(st.status.code(), Some(2));

    let st = bin()
        .args(["run"])
        .arg(tmp.path().join("missing.toml"))
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(2));
}
