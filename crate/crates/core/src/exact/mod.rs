//! Exact solution of the sample-average problem.

mod bbc;
mod enumerate;
mod recourse;

pub use bbc::{lshaped_solve, LShapedParams, LShapedResult, LShapedStats, LogLine, SolveStatus, BBC_VEHICLE_LIMIT};
pub use enumerate::{enumerate_optimal, EnumerationResult, ENUMERATION_VEHICLE_LIMIT};
pub use recourse::{recourse_lp, recourse_program, solve_dsp, Assignment, DualSolution, OptimalityCut};
