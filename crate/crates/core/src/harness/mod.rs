//! Epoch driver, sweeps, heatmaps and result export.

pub mod config;
pub mod engine;
pub mod export;
pub mod heatmap;
pub mod sweep;

pub use config::{Composition, IncentiveConfig, ParameterSet, SimConfig, SynthesisConfig};
pub use engine::{run_simulation, EpochOutcome, Simulation};
pub use export::{read_json, read_rows_csv, write_json, write_rows_csv, CsvSink};
pub use heatmap::{heatmap_optimal_p, Heatmap, HeatmapPlan};
pub use sweep::{aggregate_rows, sweep_parameters, Axis, SweepAggregates, SweepPlan, SweepResult, SweepRow};
