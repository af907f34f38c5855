//! Configuration, dispatch and persisted outputs of the command-line tool.

mod config;
mod output;
mod run;

pub use config::{
    parse_config, Command, ConfigError, ConfigErrors, FlowParams, Params, RunConfig, U0Choice,
    DEFAULT_DIMS, DEFAULT_GRID, DEFAULT_H_FD,
};
pub use output::{
    num, read_counterexample, read_csv, read_manifest, read_report, read_run, read_timing,
    read_trajectory, CsvTable, FlowRun, Manifest, RunRecord, RunReport, Timing, SCHEMA_VERSION,
};
pub use run::{
    config_from_pairs, config_hash, execute, execute_in, output_root, run_config_text, Outcome,
    DEFAULT_OUTPUT, EXIT_CONFIG, EXIT_INTERNAL, EXIT_PASS, EXIT_VIOLATION, OUTPUT_ENV, ROUTE_TOL,
};
