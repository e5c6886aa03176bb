//! Two-phase tabu search and the simulated-annealing baseline.

use super::moves::{apply, is_tabu, Move, MoveKind};
use crate::evaluator::{evaluate_expected_ticks, Sequence, SampleEvaluator};
use crate::instance::Instance;
use crate::rng::{rng_from, Rng};
use crate::scenario::Sample;
use crate::time::SCALE;
use crate::{MmsError, Result};
use rand::Rng as _;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

const TS_TAG: u64 = 0x7ab0;
const SA_TAG: u64 = 0x5a00;
const MAX_RESAMPLES: usize = 100;

/// When a search phase stops.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Budget {
    Iterations(u64),
    Time(Duration),
}

impl Budget {
    fn exhausted(&self, iterations: u64, started: Instant) -> bool {
        match *self {
            Budget::Iterations(max) => iterations >= max,
            Budget::Time(limit) => started.elapsed() >= limit,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchParams {
    /// Probabilities of swap, forward insertion, backward insertion, inversion.
    pub operator_weights: [f64; 4],
    /// Budget of the phase on the scenario without failures.
    pub phase_one: Budget,
    /// Budget of the phase on the sample.
    pub phase_two: Budget,
    pub seed: u64,
    /// Compare the incremental objective with a full evaluation every this
    /// many iterations.
    pub verify_every: Option<u64>,
    /// Record every this many iterations in the history (improvements are
    /// always recorded).
    pub history_stride: u64,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            operator_weights: [0.45, 0.10, 0.15, 0.30],
            phase_one: Budget::Time(Duration::from_secs(10)),
            phase_two: Budget::Time(Duration::from_secs(590)),
            seed: 0,
            verify_every: None,
            history_stride: 1,
        }
    }
}

impl SearchParams {
    pub fn with_iterations(phase_one: u64, phase_two: u64, seed: u64) -> Self {
        SearchParams {
            phase_one: Budget::Iterations(phase_one),
            phase_two: Budget::Iterations(phase_two),
            seed,
            ..Self::default()
        }
    }

    fn check(&self) -> Result<()> {
        let w = &self.operator_weights;
        if w.iter().any(|x| !(*x >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(MmsError::InvalidArgument(format!(
                "operator weights must be nonnegative and sum to 1, got {w:?}"
            )));
        }
        if self.history_stride == 0 {
            return Err(MmsError::InvalidArgument("history stride must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SAParams {
    pub t_init: f64,
    /// Temperature factor applied after every iteration.
    pub alpha: f64,
    pub seed: u64,
    pub history_stride: u64,
}

impl Default for SAParams {
    fn default() -> Self {
        SAParams {
            t_init: 10.0,
            alpha: 0.999,
            seed: 0,
            history_stride: 1,
        }
    }
}

/// One row of the convergence history.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoryRow {
    pub iteration: u64,
    /// Seconds since the search started.
    pub elapsed: f64,
    pub phase: u8,
    pub operator: Option<MoveKind>,
    pub accepted: bool,
    /// Incumbent objective after the iteration, in time units.
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchOutcome {
    pub best: Sequence,
    /// Expected overload of `best` under the sample.
    pub objective: f64,
    pub history: Vec<HistoryRow>,
    pub iterations: u64,
    pub accepted: u64,
}

/// History as CSV; `zero_elapsed` blanks wall-clock values for byte-stable output.
pub fn history_csv(history: &[HistoryRow], zero_elapsed: bool) -> String {
    let mut out = String::from("iteration,elapsed,phase,operator,accepted,objective\n");
    for r in history {
        let elapsed = if zero_elapsed { 0.0 } else { r.elapsed };
        let _ = writeln!(
            out,
            "{},{:.6},{},{},{},{}",
            r.iteration,
            elapsed,
            r.phase,
            r.operator.map_or("none", MoveKind::name),
            r.accepted,
            r.objective
        );
    }
    out
}

fn pick_operator(rng: &mut Rng, weights: &[f64; 4]) -> MoveKind {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (kind, w) in MoveKind::ALL.iter().zip(weights) {
        acc += w;
        if u < acc {
            return *kind;
        }
    }
    // rounding left a sliver above the last cumulative weight
    *MoveKind::ALL
        .iter()
        .zip(weights)
        .rev()
        .find(|(_, w)| **w > 0.0)
        .map(|(k, _)| k)
        .unwrap_or(&MoveKind::Swap)
}

fn random_pair(rng: &mut Rng, n: usize) -> (usize, usize) {
    let a = rng.random_range(0..n);
    let mut b = rng.random_range(0..n - 1);
    if b >= a {
        b += 1;
    }
    (a.min(b), a.max(b))
}

struct Walk<'a> {
    instance: &'a Instance,
    sample: &'a Sample,
    evaluator: SampleEvaluator,
    current: Sequence,
    best: Sequence,
    best_ticks: i64,
    iterations: u64,
    accepted: u64,
    history: Vec<HistoryRow>,
    started: Instant,
    stride: u64,
}

impl<'a> Walk<'a> {
    fn new(instance: &'a Instance, sample: &'a Sample, start: Sequence, started: Instant, stride: u64) -> Result<Self> {
        let evaluator = SampleEvaluator::new(instance, &start, sample, true)?;
        Ok(Walk {
            instance,
            sample,
            best_ticks: evaluator.weighted_ticks(),
            evaluator,
            best: start.clone(),
            current: start,
            iterations: 0,
            accepted: 0,
            history: Vec::new(),
            started,
            stride,
        })
    }

    fn objective(&self) -> f64 {
        self.evaluator.objective()
    }

    fn record(&mut self, phase: u8, operator: Option<MoveKind>, accepted: bool, force: bool) {
        if force || self.iterations.is_multiple_of(self.stride) {
            self.history.push(HistoryRow {
                iteration: self.iterations,
                elapsed: self.started.elapsed().as_secs_f64(),
                phase,
                operator,
                accepted,
                objective: self.objective(),
            });
        }
    }

    /// Tries `mv`; `accept` sees the weighted delta in ticks.
    fn attempt(&mut self, mv: Move, accept: impl FnOnce(i64) -> bool) -> Result<bool> {
        let delta = self.evaluator.apply_move(&self.current, mv)?;
        if accept(delta) {
            self.evaluator.commit();
            self.current = apply(&self.current, mv);
            self.accepted += 1;
            if self.evaluator.weighted_ticks() < self.best_ticks {
                self.best_ticks = self.evaluator.weighted_ticks();
                self.best = self.current.clone();
            }
            Ok(true)
        } else {
            self.evaluator.rollback();
            Ok(false)
        }
    }

    fn verify(&self) -> Result<()> {
        let (full, _) = evaluate_expected_ticks(self.instance, &self.current, self.sample)?;
        if full == self.evaluator.weighted_ticks() {
            Ok(())
        } else {
            Err(MmsError::Contract(format!(
                "incremental objective {} differs from full evaluation {full}",
                self.evaluator.weighted_ticks()
            )))
        }
    }
}

fn tabu_phase(walk: &mut Walk<'_>, rng: &mut Rng, params: &SearchParams, phase: u8, budget: Budget) -> Result<()> {
    let n = walk.current.len();
    let is_ev: Vec<bool> = walk.instance.vehicles.iter().map(|v| v.is_ev).collect();
    let phase_start = Instant::now();
    let mut local = 0u64;
    while n >= 2 && !budget.exhausted(local, phase_start) {
        local += 1;
        walk.iterations += 1;
        let kind = pick_operator(rng, &params.operator_weights);
        let mut chosen = None;
        for _ in 0..MAX_RESAMPLES {
            let (t1, t2) = random_pair(rng, n);
            let mv = Move::new(kind, t1, t2);
            if !is_tabu(&is_ev, &walk.current, mv) {
                chosen = Some(mv);
                break;
            }
        }
        let Some(mv) = chosen else {
            walk.record(phase, Some(kind), false, false);
            continue;
        };
        let best_before = walk.best_ticks;
        let accepted = walk.attempt(mv, |delta| delta <= 0)?;
        if let Some(k) = params.verify_every {
            if k > 0 && walk.iterations.is_multiple_of(k) {
                walk.verify()?;
            }
        }
        walk.record(phase, Some(kind), accepted, walk.best_ticks < best_before);
    }
    Ok(())
}

/// Tabu search: a phase on the failure-free scenario, then a phase on `sample`.
///
/// The second phase starts from whichever of `start` and the first phase's
/// best is better under the sample, so the result never loses to `start`.
pub fn search(instance: &Instance, sample: &Sample, start: &Sequence, params: &SearchParams) -> Result<SearchOutcome> {
    params.check()?;
    start.check(instance)?;
    sample.check(instance)?;
    let started = Instant::now();
    let mut rng = rng_from(params.seed, &[TS_TAG]);

    let nominal = Sample::all_exist(instance.n_vehicles());
    let mut one = Walk::new(instance, &nominal, start.clone(), started, params.history_stride)?;
    one.record(1, None, true, true);
    tabu_phase(&mut one, &mut rng, params, 1, params.phase_one)?;

    let mut incumbent = start.clone();
    let (start_ticks, _) = evaluate_expected_ticks(instance, start, sample)?;
    if one.best != *start {
        let (ticks, _) = evaluate_expected_ticks(instance, &one.best, sample)?;
        if ticks < start_ticks {
            incumbent = one.best.clone();
        }
    }
    let mut two = Walk::new(instance, sample, incumbent, started, params.history_stride)?;
    two.iterations = one.iterations;
    two.accepted = one.accepted;
    two.history = std::mem::take(&mut one.history);
    two.record(2, None, true, true);
    tabu_phase(&mut two, &mut rng, params, 2, params.phase_two)?;

    Ok(SearchOutcome {
        objective: two.best_ticks as f64 / two.evaluator.n() as f64 / SCALE as f64,
        best: two.best,
        history: two.history,
        iterations: two.iterations,
        accepted: two.accepted,
    })
}

/// Simulated annealing on `sample` with Metropolis acceptance and geometric cooling.
pub fn simulated_annealing(
    instance: &Instance,
    sample: &Sample,
    start: &Sequence,
    params: &SAParams,
    budget: Budget,
) -> Result<SearchOutcome> {
    if !(params.t_init > 0.0) || !(params.alpha > 0.0 && params.alpha < 1.0) || params.history_stride == 0 {
        return Err(MmsError::InvalidArgument(format!(
            "annealing needs t_init > 0, 0 < alpha < 1 and a positive stride, got {params:?}"
        )));
    }
    start.check(instance)?;
    sample.check(instance)?;
    let started = Instant::now();
    let mut rng = rng_from(params.seed, &[SA_TAG]);
    let mut walk = Walk::new(instance, sample, start.clone(), started, params.history_stride)?;
    walk.record(2, None, true, true);
    let n = start.len();
    let scale = (sample.n() as i64 * SCALE) as f64;
    let mut temperature = params.t_init;
    while n >= 2 && !budget.exhausted(walk.iterations, started) {
        walk.iterations += 1;
        let kind = MoveKind::ALL[rng.random_range(0..4)];
        let (t1, t2) = random_pair(&mut rng, n);
        let u: f64 = rng.random();
        let best_before = walk.best_ticks;
        let accepted = walk.attempt(Move::new(kind, t1, t2), |delta| {
            delta <= 0 || u < (-(delta as f64 / scale) / temperature).exp()
        })?;
        temperature *= params.alpha;
        walk.record(2, Some(kind), accepted, walk.best_ticks < best_before);
    }
    Ok(SearchOutcome {
        objective: walk.best_ticks as f64 / scale,
        best: walk.best,
        history: walk.history,
        iterations: walk.iterations,
        accepted: walk.accepted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::evaluate_expected;
    use crate::greedy::construct;
    use crate::instance::fixtures::random_instance;
    use crate::scenario::sample;

    #[test]
    fn zero_budget_returns_start() {
        let inst = random_instance(20, 1);
        let s = sample(&inst, 50, 2, false).unwrap();
        let (start, _) = construct(&inst, 1);
        let out = search(&inst, &s, &start, &SearchParams::with_iterations(0, 0, 1)).unwrap();
        assert_eq!(out.best, start);
        assert_eq!(out.iterations, 0);
        assert_eq!(out.objective, evaluate_expected(&inst, &start, &s).unwrap());
    }

    #[test]
    fn search_improves_and_keeps_evs_apart() {
        let inst = random_instance(30, 4);
        let s = sample(&inst, 100, 5, false).unwrap();
        let (start, _) = construct(&inst, 4);
        let mut params = SearchParams::with_iterations(2000, 2000, 9);
        params.verify_every = Some(97);
        let out = search(&inst, &s, &start, &params).unwrap();
        let start_value = evaluate_expected(&inst, &start, &s).unwrap();
        assert!(out.objective <= start_value);
        assert_eq!(out.objective, evaluate_expected(&inst, &out.best, &s).unwrap());
        let ev: Vec<bool> = out.best.order().iter().map(|&v| inst.vehicles[v].is_ev).collect();
        assert!(!ev.windows(2).any(|w| w[0] && w[1]));
        assert_eq!(out.iterations, 4000);
        assert_eq!(out.history.len(), 4002);
        let accepted: Vec<f64> = out
            .history
            .iter()
            .filter(|r| r.phase == 2 && r.operator.is_some())
            .map(|r| r.objective)
            .collect();
        assert!(accepted.windows(2).all(|w| w[1] <= w[0]), "phase-2 incumbent must not worsen");
    }

    #[test]
    fn runs_are_reproducible() {
        let inst = random_instance(15, 7);
        let s = sample(&inst, 40, 1, false).unwrap();
        let start = Sequence::identity(15);
        let params = SearchParams::with_iterations(300, 300, 3);
        let a = search(&inst, &s, &start, &params).unwrap();
        let b = search(&inst, &s, &start, &params).unwrap();
        assert_eq!(a.best, b.best);
        assert_eq!(history_csv(&a.history, true), history_csv(&b.history, true));
        let sa = SAParams { seed: 3, ..SAParams::default() };
        let x = simulated_annealing(&inst, &s, &start, &sa, Budget::Iterations(500)).unwrap();
        let y = simulated_annealing(&inst, &s, &start, &sa, Budget::Iterations(500)).unwrap();
        assert_eq!(history_csv(&x.history, true), history_csv(&y.history, true));
    }

    #[test]
    fn cold_annealing_is_descent() {
        let inst = random_instance(20, 2);
        let s = sample(&inst, 30, 1, false).unwrap();
        let start = Sequence::identity(20);
        let sa = SAParams { t_init: 1e-300, alpha: 0.5, seed: 1, history_stride: 1 };
        let out = simulated_annealing(&inst, &s, &start, &sa, Budget::Iterations(1000)).unwrap();
        let objectives: Vec<f64> = out.history.iter().map(|r| r.objective).collect();
        assert!(objectives.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn bad_parameters_are_rejected() {
        let inst = random_instance(6, 1);
        let s = Sample::all_exist(6);
        let start = Sequence::identity(6);
        let mut p = SearchParams::with_iterations(1, 1, 0);
        p.operator_weights = [0.5, 0.5, 0.5, 0.0];
        assert!(search(&inst, &s, &start, &p).is_err());
        let sa = SAParams { alpha: 1.0, ..SAParams::default() };
        assert!(simulated_annealing(&inst, &s, &start, &sa, Budget::Iterations(1)).is_err());
    }

    #[test]
    fn history_csv_layout() {
        let rows = vec![HistoryRow {
            iteration: 3,
            elapsed: 1.25,
            phase: 2,
            operator: Some(MoveKind::Inversion),
            accepted: false,
            objective: 12.5,
        }];
        assert_eq!(
            history_csv(&rows, false),
            "iteration,elapsed,phase,operator,accepted,objective\n3,1.250000,2,inversion,false,12.5\n"
        );
        assert!(history_csv(&rows, true).contains(",0.000000,"));
    }
}
