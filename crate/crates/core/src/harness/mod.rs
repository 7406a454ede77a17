//! Experiment driver: configuration, single runs, sweeps and report files.

pub mod config;
pub mod report;
pub mod run;
pub mod sweep;

pub use config::{BetaRule, ExperimentConfig, Method, PdeKind};
pub use run::{
    assemble_system, cardinal_trace, discretize, interpolation_errors, run_solve, run_solve_on,
    run_spectrum, spacing_for_count, voronoi_jump, Discretization, InterpolationErrors,
    SolveReport, SpectrumReport,
};
pub use sweep::{
    fit_rate, run_h_sweep, run_p_sweep, run_q_sweep, sweep_spacings, RateFit, SweepReport, SweepRow,
};
