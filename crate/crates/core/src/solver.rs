//! Steady mixed solver on a MAC grid with regularization continuation.

mod experiments;
mod grid;
mod picard;
mod problem;

pub use experiments::{
    dependence_experiment, discrete_infsup_diagnostic, loglog_slope, DependenceRow, DependenceTable,
    Perturbation,
};
pub use grid::{BoundaryFace, Grid2D};
pub use picard::{
    continuation, solve_stage, solve_steady, solve_steady_from, SolveReport, SolverConfig, StageReport,
};
pub use problem::{
    boundary_norm, cell_norm, discretize, face_norm, manufactured_case, manufactured_from_pressure,
    state_distance, two_term_law, ProblemData, ResidualParts, StaggeredState,
};
