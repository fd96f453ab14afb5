//! Monte Carlo experiments: configuration, runners and CSV output.
//!
//! Each experiment splits its trials into cells, one per (geometry
//! realization, sample group). Cells draw from their own seeded streams and
//! run in parallel; results are merged in cell order, so output depends only
//! on the master seed.

pub mod config;
pub mod experiments;
pub mod results;

pub use config::{
    config_from_str, emit_config, parse_config, EstimatorKind, ExperimentConfig, Noise, Preset,
};
pub use experiments::{
    run_channel_experiment, run_covariance_experiment, run_sumrate_experiment, METRIC_E_NF, METRIC_E_NF_BASIC,
    METRIC_E_NMSE, METRIC_E_NMSE_CLOSED, METRIC_R_SUM,
};
pub use results::{emit_csv, ExperimentKind, ExperimentResult, Record, CSV_HEADER};
