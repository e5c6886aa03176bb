//! Local search over sequences.

mod moves;
mod search;

pub use moves::{apply, is_tabu, Move, MoveKind};
pub use search::{
    history_csv, search, simulated_annealing, Budget, HistoryRow, SAParams, SearchOutcome, SearchParams,
};
