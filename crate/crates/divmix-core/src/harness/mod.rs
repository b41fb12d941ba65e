//! Config-driven Monte-Carlo experiments and table reproduction.

pub mod config;
pub mod csv;
pub mod data;
pub mod run;
pub mod tables;

pub use config::{EstimatorEntry, ExperimentConfig, InitSpec, Method, Outputs, ProxObjectiveSpec, Truth};
pub use csv::{csv_field, fmt6};
pub use data::{estimate_file, estimate_observations, parse_observations, read_estimator, write_sample, xy_csv};
pub use run::{
    run_experiment, run_method, tables_csv, worker_pool, ExperimentOutput, Outcome, Reference, ReplicationRecord,
    ResultRow, ResultTable, Summary, CSV_HEADER,
};
pub use tables::{list_tables, reproduce_table, table_spec, Reproduction, TableSpec, TABLE_IDS};
