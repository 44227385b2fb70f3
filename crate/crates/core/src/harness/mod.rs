//! Configuration, CSV output and the experiment drivers behind the CLI.

pub mod config;
pub mod runs;
pub mod table;

pub use config::{
    apply_override, config_hash, parse_config, render_config, Backend, ExperimentConfig, LrhConfig, OracleConfig,
    OUT_DIR_ENV, VERSION,
};
pub use runs::{
    prepare, run_e2e_table, run_lrh_table, run_separation, source_accuracy, truth_conjunctions, truth_for,
    write_table, CellCache, LrhTables, Prepared, E2E_COLUMNS, LRH_COLUMNS, PROBE_COLUMNS, SEPARATION_COLUMNS,
};
pub use table::{fmt_f64, Table};
