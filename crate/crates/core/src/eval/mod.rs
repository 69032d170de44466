//! Abstraction-error metrics, contamination, misspecification and the
//! k-fold experiment driver.

pub mod contamination;
pub mod grid;
pub mod metrics;
pub mod misspec;

pub use contamination::{contaminate, ContaminationSpec, NoiseKind};
pub use grid::{
    cell_seed, derive_seed, fold_ranges, generate_data, nominal_env, read_results_csv, run_grid, score_all,
    summarize, train_all, train_each, write_results_csv, CellSummary, ExperimentData, ExperimentResult, FitFailure,
    FMisspec, GridSpec,
    MethodKind, MethodSpec, OmegaMisspec, Setting, TrainedMap, RESULTS_HEADER,
};
pub use metrics::{abstraction_error_empirical, abstraction_error_gaussian, TestPair};
pub use misspec::{f_misspec_apply, f_misspec_sample, omega_misspec, Nonlinearity};
