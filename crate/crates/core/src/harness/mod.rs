//! Reproducible experiments: configuration, datasets, output files and the
//! end-to-end runs behind the command-line tool.

pub mod commands;
pub mod config;
pub mod data;
pub mod experiments;
pub mod output;

pub use commands::{beamform, export_csv, gen_channels, gen_feedback, train_cvae, Solver, CHANNELS_FILE};
pub use config::{ExperimentConfig, OUTPUT_ENV};
pub use data::{Observation, Scenario};
pub use experiments::{
    evaluate_beamforming, motivation_curves, run_compare, run_motivation, run_offline_scheme, run_online_scheme,
    run_table1, Generator, SumRateCurves,
};
pub use output::{write_report, ExperimentReport, OutputSink};
