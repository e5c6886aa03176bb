//! Solvers for the sample-average problem behind one trait, looked up by name.

use crate::evaluator::{evaluate_expected_ticks, Sequence};
use crate::exact::{enumerate_optimal, lshaped_solve, LShapedParams, SolveStatus};
use crate::greedy::construct;
use crate::instance::Instance;
use crate::scenario::Sample;
use crate::tabu::{search, simulated_annealing, Budget, HistoryRow, SAParams, SearchParams};
use crate::time::SCALE;
use crate::{MmsError, Result};
use std::collections::BTreeMap;
use std::time::Duration;

/// Share of an iteration or time budget spent on the failure-free phase
/// (10 s out of 600 s by default).
const PHASE_ONE_SHARE: f64 = 10.0 / 600.0;
const DEFAULT_BUDGET: Duration = Duration::from_secs(600);

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveOptions {
    pub seed: u64,
    /// Iteration budget for the local searches; takes precedence over time.
    pub iterations: Option<u64>,
    pub time_limit: Option<Duration>,
    /// Starting sequence for the local searches (greedy otherwise).
    pub start: Option<Sequence>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportStatus {
    /// Proven optimal for the sample.
    Optimal,
    /// Stopped at the requested gap.
    GapReached,
    /// Stopped by the time limit with an incumbent.
    TimeLimit,
    /// No optimality claim.
    Heuristic,
}

impl ReportStatus {
    pub fn name(self) -> &'static str {
        match self {
            ReportStatus::Optimal => "optimal",
            ReportStatus::GapReached => "gap_reached",
            ReportStatus::TimeLimit => "time_limit",
            ReportStatus::Heuristic => "heuristic",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub method: String,
    pub sequence: Sequence,
    /// Mean overload of `sequence` under the sample.
    pub objective: f64,
    pub weighted_ticks: i64,
    pub lower_bound: Option<f64>,
    pub status: ReportStatus,
    pub iterations: u64,
    pub history: Vec<HistoryRow>,
    pub log: String,
}

impl SolveReport {
    fn new(method: &str, instance: &Instance, sample: &Sample, sequence: Sequence) -> Result<Self> {
        let (weighted_ticks, n) = evaluate_expected_ticks(instance, &sequence, sample)?;
        Ok(SolveReport {
            method: method.to_string(),
            sequence,
            objective: weighted_ticks as f64 / n as f64 / SCALE as f64,
            weighted_ticks,
            lower_bound: None,
            status: ReportStatus::Heuristic,
            iterations: 0,
            history: Vec::new(),
            log: String::new(),
        })
    }

    pub fn gap(&self) -> Option<f64> {
        self.lower_bound.map(|lb| (self.objective - lb).max(0.0))
    }
}

/// A method that returns a sequence for a sample-average problem.
pub trait SaaSolver: Send + Sync {
    fn name(&self) -> &'static str;

    /// Whether a successful run proves optimality for the sample.
    fn is_exact(&self) -> bool;

    fn solve(&self, instance: &Instance, sample: &Sample, options: &SolveOptions) -> Result<SolveReport>;
}

pub struct GreedySolver;

impl SaaSolver for GreedySolver {
    fn name(&self) -> &'static str {
        "greedy"
    }

    fn is_exact(&self) -> bool {
        false
    }

    fn solve(&self, instance: &Instance, sample: &Sample, options: &SolveOptions) -> Result<SolveReport> {
        let (sequence, trace) = construct(instance, options.seed);
        let mut report = SolveReport::new(self.name(), instance, sample, sequence)?;
        report.log = trace.to_text();
        Ok(report)
    }
}

fn start_sequence(instance: &Instance, options: &SolveOptions) -> Result<Sequence> {
    match &options.start {
        Some(s) => {
            s.check(instance)?;
            Ok(s.clone())
        }
        None => Ok(construct(instance, options.seed).0),
    }
}

/// Greedy start, then tabu search on the failure-free scenario and on the sample.
#[derive(Clone, Debug, Default)]
pub struct TabuSolver {
    pub params: SearchParams,
}

impl SaaSolver for TabuSolver {
    fn name(&self) -> &'static str {
        "ts"
    }

    fn is_exact(&self) -> bool {
        false
    }

    fn solve(&self, instance: &Instance, sample: &Sample, options: &SolveOptions) -> Result<SolveReport> {
        let start = start_sequence(instance, options)?;
        let mut params = self.params.clone();
        params.seed = options.seed;
        match (options.iterations, options.time_limit) {
            (Some(k), _) => {
                let one = (k as f64 * PHASE_ONE_SHARE).round() as u64;
                params.phase_one = Budget::Iterations(one);
                params.phase_two = Budget::Iterations(k - one);
            }
            (None, limit) => {
                let total = limit.unwrap_or(DEFAULT_BUDGET);
                let one = total.mul_f64(PHASE_ONE_SHARE);
                params.phase_one = Budget::Time(one);
                params.phase_two = Budget::Time(total.saturating_sub(one));
            }
        }
        let outcome = search(instance, sample, &start, &params)?;
        let mut report = SolveReport::new(self.name(), instance, sample, outcome.best)?;
        report.iterations = outcome.iterations;
        report.history = outcome.history;
        Ok(report)
    }
}

/// Greedy start, then simulated annealing on the sample.
#[derive(Clone, Debug, Default)]
pub struct AnnealingSolver {
    pub params: SAParams,
}

impl SaaSolver for AnnealingSolver {
    fn name(&self) -> &'static str {
        "sa"
    }

    fn is_exact(&self) -> bool {
        false
    }

    fn solve(&self, instance: &Instance, sample: &Sample, options: &SolveOptions) -> Result<SolveReport> {
        let start = start_sequence(instance, options)?;
        let params = SAParams { seed: options.seed, ..self.params.clone() };
        let budget = match (options.iterations, options.time_limit) {
            (Some(k), _) => Budget::Iterations(k),
            (None, limit) => Budget::Time(limit.unwrap_or(DEFAULT_BUDGET)),
        };
        let outcome = simulated_annealing(instance, sample, &start, &params, budget)?;
        let mut report = SolveReport::new(self.name(), instance, sample, outcome.best)?;
        report.iterations = outcome.iterations;
        report.history = outcome.history;
        Ok(report)
    }
}

/// Branch-and-Benders-cut.
#[derive(Clone, Debug, Default)]
pub struct LShapedSolver {
    pub params: LShapedParams,
}

impl SaaSolver for LShapedSolver {
    fn name(&self) -> &'static str {
        "lshaped"
    }

    fn is_exact(&self) -> bool {
        true
    }

    fn solve(&self, instance: &Instance, sample: &Sample, options: &SolveOptions) -> Result<SolveReport> {
        let params = LShapedParams {
            time_limit: options.time_limit.or(self.params.time_limit),
            ..self.params.clone()
        };
        let result = lshaped_solve(instance, sample, &params)?;
        let mut report = SolveReport::new(self.name(), instance, sample, result.sequence.clone())?;
        report.lower_bound = Some(result.lower_bound);
        report.iterations = result.stats.nodes;
        report.status = match result.status {
            SolveStatus::Optimal => ReportStatus::Optimal,
            SolveStatus::GapReached => ReportStatus::GapReached,
            SolveStatus::TimeLimit => ReportStatus::TimeLimit,
        };
        report.log = result.log_text();
        Ok(report)
    }
}

/// Exhaustive enumeration of all permutations.
pub struct EnumerationSolver;

impl SaaSolver for EnumerationSolver {
    fn name(&self) -> &'static str {
        "enum"
    }

    fn is_exact(&self) -> bool {
        true
    }

    fn solve(&self, instance: &Instance, sample: &Sample, _options: &SolveOptions) -> Result<SolveReport> {
        let result = enumerate_optimal(instance, sample)?;
        let mut report = SolveReport::new(self.name(), instance, sample, result.sequence)?;
        report.lower_bound = Some(report.objective);
        report.status = ReportStatus::Optimal;
        report.iterations = result.leaves;
        Ok(report)
    }
}

/// Solvers keyed by name.
pub struct SolverRegistry {
    solvers: BTreeMap<&'static str, Box<dyn SaaSolver>>,
}

impl Default for SolverRegistry {
    fn default() -> Self {
        let mut registry = SolverRegistry::empty();
        registry.register(Box::new(GreedySolver));
        registry.register(Box::new(TabuSolver::default()));
        registry.register(Box::new(AnnealingSolver::default()));
        registry.register(Box::new(LShapedSolver::default()));
        registry.register(Box::new(EnumerationSolver));
        registry
    }
}

impl SolverRegistry {
    pub fn empty() -> Self {
        SolverRegistry { solvers: BTreeMap::new() }
    }

    /// Adds or replaces the solver registered under its name.
    pub fn register(&mut self, solver: Box<dyn SaaSolver>) {
        self.solvers.insert(solver.name(), solver);
    }

    pub fn get(&self, name: &str) -> Result<&dyn SaaSolver> {
        self.solvers
            .get(name)
            .map(|s| s.as_ref())
            .ok_or_else(|| MmsError::UnknownSolver(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.solvers.keys().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::fixtures::{greedy_example, random_instance};
    use crate::scenario::sample;

    #[test]
    fn registry_lookup() {
        let registry = SolverRegistry::default();
        assert_eq!(registry.names(), vec!["enum", "greedy", "lshaped", "sa", "ts"]);
        assert!(registry.get("lshaped").unwrap().is_exact());
        assert!(!registry.get("ts").unwrap().is_exact());
        assert!(matches!(registry.get("cplex"), Err(MmsError::UnknownSolver(_))));
    }

    #[test]
    fn greedy_through_registry() {
        let registry = SolverRegistry::default();
        let inst = greedy_example();
        let report = registry
            .get("greedy")
            .unwrap()
            .solve(&inst, &Sample::all_exist(6), &SolveOptions::default())
            .unwrap();
        assert_eq!(report.sequence.order(), &[0, 2, 5, 1, 4, 3]);
        assert_eq!(report.objective, 3.0);
    }

    #[test]
    fn zero_iteration_tabu_is_greedy() {
        let registry = SolverRegistry::default();
        let inst = random_instance(12, 4);
        let s = sample(&inst, 20, 1, false).unwrap();
        let options = SolveOptions { iterations: Some(0), seed: 2, ..SolveOptions::default() };
        let ts = registry.get("ts").unwrap().solve(&inst, &s, &options).unwrap();
        let greedy = registry.get("greedy").unwrap().solve(&inst, &s, &options).unwrap();
        assert_eq!(ts.sequence, greedy.sequence);
    }

    #[test]
    fn exact_solvers_agree() {
        let registry = SolverRegistry::default();
        let inst = random_instance(6, 11);
        let s = sample(&inst, 25, 3, false).unwrap();
        let options = SolveOptions::default();
        let a = registry.get("enum").unwrap().solve(&inst, &s, &options).unwrap();
        let b = registry.get("lshaped").unwrap().solve(&inst, &s, &options).unwrap();
        assert_eq!(a.weighted_ticks, b.weighted_ticks);
        assert_eq!(b.status, ReportStatus::Optimal);
        let sa = registry
            .get("sa")
            .unwrap()
            .solve(&inst, &s, &SolveOptions { iterations: Some(500), ..options })
            .unwrap();
        assert!(sa.weighted_ticks >= a.weighted_ticks);
    }
}
