//! Branch-and-Benders-cut over the assignment polytope.

use super::recourse::{solve_dsp, Assignment, OptimalityCut};
use crate::evaluator::{evaluate, Sequence};
use crate::greedy::construct;
use crate::instance::Instance;
use crate::lp::{solve_lp, Direction, LinearProgram, LpStatus, Sense};
use crate::scenario::Sample;
use crate::time::SCALE;
use crate::{MmsError, Result};
use rayon::prelude::*;
use std::cmp::Ordering;
use std::collections::hash_map::DefaultHasher;
use std::collections::{BinaryHeap, HashSet};
use std::fmt::Write as _;
use std::hash::{Hash, Hasher};
use std::time::{Duration, Instant};

/// Largest vehicle count accepted by [`lshaped_solve`].
pub const BBC_VEHICLE_LIMIT: usize = 12;
const INTEGRALITY_TOL: f64 = 1e-6;
const CUT_TOL: f64 = 1e-6;
/// Half of the smallest possible difference between two weighted objectives.
const PRUNE_MARGIN: f64 = 0.5 / SCALE as f64;
/// Master solutions an active cut may stay slack before it leaves the LP.
const SLACK_RUN_LIMIT: u32 = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct LShapedParams {
    /// Regularization added to the dual objective, in ticks.
    pub epsilon: f64,
    pub time_limit: Option<Duration>,
    /// Stop once upper minus lower bound (mean overload) is at most this.
    pub gap_tol: f64,
    /// Separation rounds at fractional master solutions per node; 0 adds cuts
    /// only at integral solutions.
    pub fractional_rounds: usize,
}

impl Default for LShapedParams {
    fn default() -> Self {
        LShapedParams {
            epsilon: 1e-3,
            time_limit: None,
            gap_tol: 0.0,
            fractional_rounds: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    GapReached,
    TimeLimit,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LShapedStats {
    pub nodes: u64,
    pub integer_nodes: u64,
    pub lp_solves: u64,
    pub cuts: usize,
    pub elapsed: Duration,
}

/// Bounds after a processed node, in mean overload.
#[derive(Clone, Debug, PartialEq)]
pub struct LogLine {
    pub nodes: u64,
    pub lower: f64,
    pub upper: f64,
    pub cuts: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LShapedResult {
    pub sequence: Sequence,
    /// Mean overload of `sequence` under the sample.
    pub objective: f64,
    pub weighted_ticks: i64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub status: SolveStatus,
    pub stats: LShapedStats,
    pub cuts: Vec<OptimalityCut>,
    pub log: Vec<LogLine>,
}

impl LShapedResult {
    pub fn gap(&self) -> f64 {
        (self.upper_bound - self.lower_bound).max(0.0)
    }

    pub fn log_text(&self) -> String {
        let mut out = String::from("nodes lower upper cuts\n");
        for l in &self.log {
            let _ = writeln!(out, "{} {:.6} {:.6} {}", l.nodes, l.lower, l.upper, l.cuts);
        }
        out
    }
}

struct Node {
    bound: f64,
    id: u64,
    fixings: Vec<(usize, bool)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    /// Reversed so that the max-heap pops the smallest bound, oldest first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then_with(|| other.id.cmp(&self.id))
    }
}

struct Master<'a> {
    instance: &'a Instance,
    sample: &'a Sample,
    n: usize,
    counts: Vec<f64>,
    cuts: Vec<OptimalityCut>,
    seen: HashSet<u64>,
    epsilon: f64,
    /// Whether each pooled cut is a row of the master LP.
    active: Vec<bool>,
    /// Consecutive master solutions at which each active cut was slack.
    slack_runs: Vec<u32>,
}

impl Master<'_> {
    fn cut_key(cut: &OptimalityCut) -> u64 {
        let mut h = DefaultHasher::new();
        cut.scenario.hash(&mut h);
        for v in cut.coefficients.iter().chain(std::iter::once(&cut.constant)) {
            ((v * 1e7).round() as i64).hash(&mut h);
        }
        h.finish()
    }

    fn add_cut(&mut self, cut: OptimalityCut) -> bool {
        if self.seen.insert(Self::cut_key(&cut)) {
            self.cuts.push(cut);
            self.active.push(true);
            self.slack_runs.push(0);
            true
        } else {
            false
        }
    }

    fn cut_value(cut: &OptimalityCut, x: &[f64]) -> f64 {
        cut.coefficients.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + cut.constant
    }

    /// Activates pooled cuts violated at `(x, theta)` and retires active cuts
    /// that have been slack for too long; returns how many were activated.
    fn refresh_pool(&mut self, x: &[f64], theta: &[f64]) -> usize {
        let mut activated = 0;
        for (i, cut) in self.cuts.iter().enumerate() {
            let th = theta[cut.scenario];
            let excess = Self::cut_value(cut, x) - th;
            let tol = CUT_TOL * (1.0 + th.abs());
            if self.active[i] {
                if excess < -tol {
                    self.slack_runs[i] += 1;
                    if self.slack_runs[i] >= SLACK_RUN_LIMIT {
                        self.active[i] = false;
                    }
                } else {
                    self.slack_runs[i] = 0;
                }
            } else if excess > tol {
                self.active[i] = true;
                self.slack_runs[i] = 0;
                activated += 1;
            }
        }
        activated
    }

    /// DSP cuts at `x_hat` for the listed scenarios; returns how many were new.
    fn separate(&mut self, x_hat: &Assignment, scenarios: &[usize]) -> Result<usize> {
        let (instance, sample, epsilon) = (self.instance, self.sample, self.epsilon);
        let found: Vec<Result<OptimalityCut>> = scenarios
            .par_iter()
            .map(|&u| {
                let (_, mut cut) = solve_dsp(instance, x_hat, &sample.unique()[u].0, epsilon, true)?;
                cut.scenario = u;
                Ok(cut)
            })
            .collect();
        let mut added = 0;
        for cut in found {
            added += usize::from(self.add_cut(cut?));
        }
        Ok(added)
    }

    /// DSP cuts at a fractional master point, kept only where they cut off
    /// the current `θ`; returns how many were added.
    fn separate_fractional(&mut self, x: &[f64], theta: &[f64]) -> Result<usize> {
        let clamped: Vec<f64> = x.iter().map(|v| v.clamp(0.0, 1.0)).collect();
        let x_hat = Assignment::from_matrix(self.n, clamped)?;
        let (instance, sample, epsilon) = (self.instance, self.sample, self.epsilon);
        let found: Vec<Result<OptimalityCut>> = (0..sample.unique().len())
            .into_par_iter()
            .map(|u| {
                let (_, mut cut) = solve_dsp(instance, &x_hat, &sample.unique()[u].0, epsilon, true)?;
                cut.scenario = u;
                Ok(cut)
            })
            .collect();
        let mut added = 0;
        for cut in found {
            let cut = cut?;
            if cut.value(&x_hat) > theta[cut.scenario] + CUT_TOL * (1.0 + theta[cut.scenario].abs()) {
                added += usize::from(self.add_cut(cut));
            }
        }
        Ok(added)
    }

    fn program(&self, fixings: &[(usize, bool)]) -> LinearProgram {
        let n = self.n;
        let nx = n * n;
        let mut lp = LinearProgram::new(Direction::Minimize, nx + self.counts.len());
        for j in 0..nx {
            lp.set_bounds(j, 0.0, 1.0);
        }
        for &(j, one) in fixings {
            let value = if one { 1.0 } else { 0.0 };
            lp.set_bounds(j, value, value);
        }
        for (u, &count) in self.counts.iter().enumerate() {
            lp.objective[nx + u] = count;
        }
        for i in 0..n {
            let by_vehicle: Vec<(usize, f64)> = (0..n).map(|t| (i * n + t, 1.0)).collect();
            lp.add_sparse_row(&by_vehicle, Sense::Eq, 1.0);
            let by_position: Vec<(usize, f64)> = (0..n).map(|v| (v * n + i, 1.0)).collect();
            lp.add_sparse_row(&by_position, Sense::Eq, 1.0);
        }
        for cut in self.cuts.iter().zip(&self.active).filter(|(_, a)| **a).map(|(c, _)| c) {
            let mut row: Vec<f64> = cut.coefficients.iter().map(|a| -a).collect();
            row.resize(nx + self.counts.len(), 0.0);
            row[nx + cut.scenario] = 1.0;
            lp.add_row(row, Sense::Ge, cut.constant);
        }
        lp
    }

    /// Per-scenario overload in ticks.
    fn scenario_costs(&self, sequence: &Sequence) -> Vec<i64> {
        self.sample
            .unique()
            .par_iter()
            .map(|(s, _)| evaluate(self.instance, sequence, s, true).total_overload().ticks())
            .collect()
    }
}

fn as_sequence(x: &[f64], n: usize) -> Option<Sequence> {
    if x.iter().any(|v| (v - v.round()).abs() > INTEGRALITY_TOL) {
        return None;
    }
    let mut order = vec![usize::MAX; n];
    for v in 0..n {
        for t in 0..n {
            if x[v * n + t] > 0.5 {
                order[t] = v;
            }
        }
    }
    Sequence::new(order).ok()
}

/// Solves the sample-average problem to optimality (or to the gap or time limit).
///
/// Nodes are processed best-bound first and branch on the most fractional
/// `x_vt`. At every integral node the incumbent is updated and one DSP cut is
/// added for each scenario whose `θ_ω` underestimates its true recourse cost.
/// Fractional nodes get up to `fractional_rounds` rounds of violated DSP cuts
/// before branching.
pub fn lshaped_solve(instance: &Instance, sample: &Sample, params: &LShapedParams) -> Result<LShapedResult> {
    let n = instance.n_vehicles();
    if n > BBC_VEHICLE_LIMIT {
        return Err(MmsError::Guard(format!(
            "branch-and-cut supports at most {BBC_VEHICLE_LIMIT} vehicles, got {n}"
        )));
    }
    sample.check(instance)?;
    if !(params.gap_tol >= 0.0) || !(params.epsilon >= 0.0) {
        return Err(MmsError::InvalidArgument("gap_tol and epsilon must be nonnegative".into()));
    }
    let started = Instant::now();
    let out_of_time = || params.time_limit.is_some_and(|limit| started.elapsed() >= limit);
    let n_total = sample.n() as f64;
    let mut master = Master {
        instance,
        sample,
        n,
        counts: sample.unique().iter().map(|(_, c)| *c as f64).collect(),
        cuts: Vec::new(),
        seen: HashSet::new(),
        epsilon: params.epsilon,
        active: Vec::new(),
        slack_runs: Vec::new(),
    };
    let all: Vec<usize> = (0..sample.unique().len()).collect();

    let (start, _) = construct(instance, 0);
    let start_costs = master.scenario_costs(&start);
    let weighted = |costs: &[i64]| -> i64 {
        costs.iter().zip(sample.unique()).map(|(q, (_, c))| q * *c as i64).sum()
    };
    let mut incumbent = (weighted(&start_costs), start.clone());
    master.separate(&Assignment::from_sequence(&start), &all)?;

    let mut stats = LShapedStats::default();
    let mut log = Vec::new();
    let mut heap = BinaryHeap::new();
    let mut next_id = 0u64;
    heap.push(Node { bound: 0.0, id: next_id, fixings: Vec::new() });
    next_id += 1;
    let mut lower = 0.0f64;
    let mut status = SolveStatus::Optimal;
    let upper = |inc: &(i64, Sequence)| inc.0 as f64 / SCALE as f64;

    while let Some(node) = heap.pop() {
        if node.bound > upper(&incumbent) - PRUNE_MARGIN {
            heap.clear();
            break;
        }
        if out_of_time() {
            heap.push(node);
            status = SolveStatus::TimeLimit;
            break;
        }
        stats.nodes += 1;
        let mut integer_seen = false;
        let mut rounds = 0;
        loop {
            let lp = master.program(&node.fixings);
            stats.lp_solves += 1;
            let solution = solve_lp(&lp)?;
            match solution.status {
                LpStatus::Optimal => {}
                LpStatus::Infeasible => break,
                other => return Err(MmsError::Lp(format!("master problem ended with status {other:?}"))),
            }
            let x = &solution.x[..n * n];
            if master.refresh_pool(x, &solution.x[n * n..]) > 0 {
                continue;
            }
            let bound = solution.objective.max(node.bound);
            if bound > upper(&incumbent) - PRUNE_MARGIN {
                break;
            }
            if let Some(seq) = as_sequence(x, n) {
                if !integer_seen {
                    stats.integer_nodes += 1;
                    integer_seen = true;
                }
                let costs = master.scenario_costs(&seq);
                let value = weighted(&costs);
                if value < incumbent.0 {
                    incumbent = (value, seq.clone());
                }
                let violated: Vec<usize> = all
                    .iter()
                    .copied()
                    .filter(|&u| solution.x[n * n + u] < costs[u] as f64 / SCALE as f64 - CUT_TOL)
                    .collect();
                if violated.is_empty() || master.separate(&Assignment::from_sequence(&seq), &violated)? == 0 || out_of_time() {
                    break;
                }
            } else {
                if rounds < params.fractional_rounds && !out_of_time() {
                    rounds += 1;
                    if master.separate_fractional(x, &solution.x[n * n..])? > 0 {
                        continue;
                    }
                }
                let j = (0..n * n)
                    .filter(|&j| (x[j] - x[j].round()).abs() > INTEGRALITY_TOL)
                    .min_by(|&a, &b| (x[a] - 0.5).abs().total_cmp(&(x[b] - 0.5).abs()).then(a.cmp(&b)))
                    .expect("fractional variable");
                for one in [true, false] {
                    let mut fixings = node.fixings.clone();
                    fixings.push((j, one));
                    heap.push(Node { bound, id: next_id, fixings });
                    next_id += 1;
                }
                break;
            }
        }
        let open = heap.peek().map_or(upper(&incumbent), |top| top.bound.min(upper(&incumbent)));
        lower = lower.max(open);
        log.push(LogLine {
            nodes: stats.nodes,
            lower: lower / n_total,
            upper: upper(&incumbent) / n_total,
            cuts: master.cuts.len(),
        });
        if heap.is_empty() {
            break;
        }
        if (upper(&incumbent) - lower) / n_total <= params.gap_tol {
            status = if upper(&incumbent) - lower <= PRUNE_MARGIN { SolveStatus::Optimal } else { SolveStatus::GapReached };
            break;
        }
    }
    if heap.is_empty() && status != SolveStatus::TimeLimit {
        lower = upper(&incumbent);
    } else if let Some(top) = heap.peek() {
        lower = lower.max(top.bound.min(upper(&incumbent)));
    }
    stats.cuts = master.cuts.len();
    stats.elapsed = started.elapsed();
    let (ticks, sequence) = incumbent;
    Ok(LShapedResult {
        objective: ticks as f64 / n_total / SCALE as f64,
        weighted_ticks: ticks,
        lower_bound: lower.min(ticks as f64 / SCALE as f64) / n_total,
        upper_bound: ticks as f64 / n_total / SCALE as f64,
        sequence,
        status,
        stats,
        cuts: master.cuts,
        log,
    })
}
