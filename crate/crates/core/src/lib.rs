//! Sequencing of mixed-model assembly lines when products may fail and be
//! pulled out of the launch sequence.
//!
//! The crate is organised bottom-up:
//!
//! * [`instance`] holds the problem data, its validation, random generation and
//!   the on-disk format.
//! * [`scenario`] models failure realizations and i.i.d. samples of them.
//! * [`evaluator`] computes the exact second-stage work overload of a sequence,
//!   including incremental re-evaluation after local moves.
//! * [`greedy`], [`tabu`] and [`exact`] produce sequences; [`solver`] exposes
//!   them behind a single trait and a name-keyed registry.
//! * [`assess`] estimates optimality gaps of candidate sequences.

pub mod assess;
pub mod error;
pub mod evaluator;
pub mod exact;
pub mod greedy;
pub mod instance;
pub mod lp;
pub mod rng;
pub mod scenario;
pub mod solver;
pub mod tabu;
pub mod time;

pub use error::{MmsError, Result};
pub use evaluator::{EvalState, Sequence};
pub use instance::{Instance, RiskClass, Station, Vehicle};
pub use scenario::{Sample, Scenario};
pub use solver::{SaaSolver, SolveOptions, SolveReport, SolverRegistry};
pub use time::Time;
