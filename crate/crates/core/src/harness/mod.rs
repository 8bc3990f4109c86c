//! Scenario files, orchestration of one shared solve per scenario, report
//! persistence and refinement tables.

mod convergence;
mod run;
mod scenario;

pub use convergence::{convergence_csv, convergence_table, ConvergenceRow};
pub use run::{band_probes, run_scenario, ExperimentRecord, RunOptions, RunReport, SolveRecord, Timing};
pub use scenario::{
    load_scenario, parse_scenario, Experiment, GridConfig, HeatContentMode, NonlinearityConfig, PairSpec, ProbeSet,
    Scenario, Tolerances, SCHEMA_VERSION,
};
