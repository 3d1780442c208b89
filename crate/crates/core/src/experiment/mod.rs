//! Configuration-driven trials and sweeps, instance bundles and the
//! acceptance suite.

mod bundle;
mod config;
mod expr;
mod sweep;
mod trial;
pub mod verify;

pub use bundle::{read_bundle, write_bundle, Bundle, BundleMeta};
pub use config::{
    AdversaryConfig, AlgorithmConfig, AlgorithmKind, ExperimentConfig, PartitionConfig,
    SettingPoint,
};
pub use expr::Expr;
pub use sweep::{read_csv, run_sweep, write_csv, write_csv_file};
pub use trial::{
    generate_instance, run_algorithm, run_trial, run_trial_detailed, trial_seed, AlgorithmOutput,
    Instance, TrialOutcome, TrialRecord, CSV_COLUMNS,
};
