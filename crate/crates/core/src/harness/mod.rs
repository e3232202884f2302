//! Experiment configuration, persistence, study sweeps and the command-line
//! front end.

mod checkpoint;
mod cli;
mod config;
mod outputs;
mod plots;
mod runs;
mod studies;
mod verify;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use cli::{run_cli, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE};
pub use config::{study_architectures, ConfigBuilder, ExperimentConfig, TransferOptions, PRESETS};
pub use outputs::{
    save_error_field_csv, save_metrics_csv, write_metrics_csv, RunSummary, ERROR_FIELD_COLUMNS, METRICS_COLUMNS,
};
pub use plots::{Plot, Scale, Series};
pub use runs::{
    datasets, residual_plot, run_evaluate, run_sample, run_training, run_transfer, training_set, write_run,
    write_transfer, TrainOutcome, TransferOutcome, CHECKPOINT_FILE, ERROR_FIELD_FILE, METRICS_FILE, REPORT_FILE,
};
pub use studies::{
    architecture_study, convergence_study, fit_cells, write_architecture_study, write_convergence_study,
    ArchitectureCell, ConvergenceStudy, FitRecord, StudyCell, NORM_NAMES,
};
pub use verify::{
    gradient_check, jet_check, manufactured_residual_max, relative_error, sixteen_point_set, verify, Check,
};
