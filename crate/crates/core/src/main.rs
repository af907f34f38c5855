use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pinchlab::cli::{self, Command, Outcome, Params, EXIT_CONFIG};

#[derive(Parser)]
#[command(
    name = "pinchlab",
    version,
    about = "Pinching inequality campaigns and geodesic-sphere flows"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration file; `command` may be omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// `key=value` entries of the command's section, used instead of a file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output root (overrides `output` and PINCHLAB_OUT).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Sub {
    /// Run a configuration file that names its own command.
    Run {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Randomized inequality suites.
    Verify(Common),
    /// Closed-form constants over admissible dimensions.
    Scan(Common),
    /// Geodesic-sphere flows.
    Flow(Common),
    /// Pinched radii of geodesic spheres.
    PinchRange(Common),
    /// Finite-difference checks of the evolution laws.
    EvolutionCheck(Common),
    /// The minimal geodesic sphere.
    Minimal(Common),
    /// Read back a run directory.
    Report { run_dir: PathBuf },
}

fn usage(msg: String) -> Outcome {
    Outcome {
        exit_code: EXIT_CONFIG,
        run_dir: None,
        lines: vec![msg],
    }
}

fn with_command(text: String, command: Command) -> Result<String, String> {
    match text.parse::<toml::Table>() {
        Ok(t) => match t.get("command").and_then(|v| v.as_str()) {
            None => Ok(format!("command = \"{command}\"\n{text}")),
            Some(c) if c == command.as_str() => Ok(text),
            Some(c) => Err(format!(
                "config names command `{c}` but `{command}` was invoked"
            )),
        },
        // Syntax errors are reported with line numbers by the parser.
        Err(_) => Ok(text),
    }
}

fn run_common(command: Command, c: Common) -> Outcome {
    let text = match (&c.config, c.set.is_empty()) {
        (Some(_), false) => return usage("use either --config or --set, not both".into()),
        (Some(path), true) => match std::fs::read_to_string(path) {
            Ok(t) => match with_command(t, command) {
                Ok(t) => t,
                Err(e) => return usage(e),
            },
            Err(e) => return usage(format!("cannot read {}: {e}", path.display())),
        },
        (None, _) => cli::config_from_pairs(command, &c.set),
    };
    let mut cfg = match cli::parse_config(&text) {
        Ok(cfg) => cfg,
        Err(errs) => {
            return Outcome {
                exit_code: EXIT_CONFIG,
                run_dir: None,
                lines: errs
                    .0
                    .iter()
                    .map(|e| format!("config error: {e}"))
                    .collect(),
            }
        }
    };
    if let Some(w) = c.workers {
        if w == 0 {
            return usage("--workers must be at least 1".into());
        }
        cfg.workers = w;
        match &mut cfg.params {
            Params::Verify { suites } => suites.iter_mut().for_each(|s| s.workers = w),
            Params::Scan { spec } => spec.workers = w,
            _ => {}
        }
    }
    if let Some(out) = c.out {
        cfg.output = Some(out);
    }
    cli::execute(&cfg)
}

fn main() -> ExitCode {
    let args = Cli::parse();
    let outcome = match args.command {
        Sub::Run { file, out } => match std::fs::read_to_string(&file) {
            Ok(text) => match out {
                Some(o) => cli::run_config_text(&text, Some(&o)),
                None => cli::run_config_text(&text, None),
            },
            Err(e) => usage(format!("cannot read {}: {e}", file.display())),
        },
        Sub::Verify(c) => run_common(Command::Verify, c),
        Sub::Scan(c) => run_common(Command::Scan, c),
        Sub::Flow(c) => run_common(Command::Flow, c),
        Sub::PinchRange(c) => run_common(Command::PinchRange, c),
        Sub::EvolutionCheck(c) => run_common(Command::EvolutionCheck, c),
        Sub::Minimal(c) => run_common(Command::Minimal, c),
        Sub::Report { run_dir } => {
            let text = format!(
                "command = \"report\"\n[report]\nrun_dir = {}\n",
                toml::Value::String(run_dir.display().to_string())
            );
            cli::run_config_text(&text, None)
        }
    };
    for l in &outcome.lines {
        if outcome.exit_code == EXIT_CONFIG {
            eprintln!("{l}");
        } else {
            println!("{l}");
        }
    }
    ExitCode::from(outcome.exit_code as u8)
}
