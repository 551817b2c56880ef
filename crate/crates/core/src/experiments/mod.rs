//! Experiment configuration, boundedness sweeps and CSV output.

pub mod checks;
pub mod config;
pub mod report;
pub mod sweeps;
pub mod tools;

pub use checks::run_inequality_suite;
pub use config::{Experiment, ExperimentConfig};
pub use report::{write_csv, write_csv_file, CheckReport, RatioReport, Record};
pub use sweeps::{run_free_case, run_hls, run_hoelder_boundedness, run_morrey_boundedness, run_weak_morrey_boundedness, test_family};
pub use tools::{heat_kernel_table, norm_table, rho_table};
