//! Expected overload over a sample of scenarios.

use super::state::moved_fingerprint;
use super::{evaluate, EvalState, Sequence};
use crate::instance::Instance;
use crate::scenario::{Sample, Scenario};
use crate::tabu::Move;
use crate::time::SCALE;
use crate::{MmsError, Result};
use rayon::prelude::*;

/// Below this many distinct scenarios, per-move work stays on one thread.
const PARALLEL_THRESHOLD: usize = 16;

/// `Σ n_ω · Q(x, ω)` in ticks together with `N`.
pub fn evaluate_expected_ticks(instance: &Instance, sequence: &Sequence, sample: &Sample) -> Result<(i64, usize)> {
    sequence.check(instance)?;
    sample.check(instance)?;
    let totals: Vec<i64> = sample
        .unique()
        .par_iter()
        .map(|(s, n)| evaluate(instance, sequence, s, true).total_overload().ticks() * *n as i64)
        .collect();
    Ok((totals.iter().sum(), sample.n()))
}

/// `(1/N) Σ n_ω · Q(x, ω)` in time units.
pub fn evaluate_expected(instance: &Instance, sequence: &Sequence, sample: &Sample) -> Result<f64> {
    let (weighted, n) = evaluate_expected_ticks(instance, sequence, sample)?;
    Ok(ticks_to_mean(weighted, n))
}

/// `Σ ρ_ω · Q(x, ω)` over explicitly weighted scenarios.
pub fn evaluate_expected_probabilities(
    instance: &Instance,
    sequence: &Sequence,
    scenarios: &[(Scenario, f64)],
) -> Result<f64> {
    sequence.check(instance)?;
    let terms: Vec<f64> = scenarios
        .par_iter()
        .map(|(s, p)| {
            if *p == 0.0 {
                0.0
            } else {
                p * evaluate(instance, sequence, s, true).total_overload().as_f64()
            }
        })
        .collect();
    Ok(terms.iter().sum())
}

pub(crate) fn ticks_to_mean(weighted: i64, n: usize) -> f64 {
    weighted as f64 / n as f64 / SCALE as f64
}

/// One [`EvalState`] per distinct scenario of a sample, moved in lockstep.
///
/// The objective is kept as the exact integer `Σ n_ω · Q_ω` in ticks so that
/// comparisons never depend on the order of reduction.
#[derive(Clone, Debug)]
pub struct SampleEvaluator {
    states: Vec<EvalState>,
    counts: Vec<i64>,
    n: usize,
    weighted: i64,
    saved: Option<(i64, u64)>,
    fingerprint: u64,
}

impl SampleEvaluator {
    pub fn new(instance: &Instance, sequence: &Sequence, sample: &Sample, regenerative: bool) -> Result<Self> {
        sequence.check(instance)?;
        sample.check(instance)?;
        let states: Vec<EvalState> = sample
            .unique()
            .par_iter()
            .map(|(s, _)| evaluate(instance, sequence, s, regenerative))
            .collect();
        let counts: Vec<i64> = sample.unique().iter().map(|(_, n)| *n as i64).collect();
        let weighted = states
            .iter()
            .zip(&counts)
            .map(|(s, n)| s.total_overload().ticks() * n)
            .sum();
        Ok(SampleEvaluator {
            states,
            counts,
            n: sample.n(),
            weighted,
            saved: None,
            fingerprint: sequence.fingerprint(),
        })
    }

    /// Expected overload in time units.
    pub fn objective(&self) -> f64 {
        ticks_to_mean(self.weighted, self.n)
    }

    /// `Σ n_ω · Q_ω` in ticks.
    pub fn weighted_ticks(&self) -> i64 {
        self.weighted
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn states(&self) -> &[EvalState] {
        &self.states
    }

    /// Station-position steps recomputed by the last move, over all scenarios.
    pub fn recomputed(&self) -> usize {
        self.states.iter().map(EvalState::recomputed).sum()
    }

    /// Applies `mv` to every scenario state; returns the change of the
    /// weighted sum in ticks. Undo with [`SampleEvaluator::rollback`].
    pub fn apply_move(&mut self, old_sequence: &Sequence, mv: Move) -> Result<i64> {
        if old_sequence.fingerprint() != self.fingerprint {
            return Err(MmsError::Contract(
                "sample evaluator does not belong to the given sequence".into(),
            ));
        }
        if mv.t2 >= old_sequence.len() {
            return Err(MmsError::InvalidArgument(format!(
                "move {mv} exceeds a sequence of length {}",
                old_sequence.len()
            )));
        }
        let fingerprint = moved_fingerprint(self.fingerprint, old_sequence.order(), mv);
        let deltas: Vec<i64> = if self.states.len() >= PARALLEL_THRESHOLD {
            self.states
                .par_iter_mut()
                .map(|s| s.apply_move_unchecked(mv, fingerprint).ticks())
                .collect()
        } else {
            self.states
                .iter_mut()
                .map(|s| s.apply_move_unchecked(mv, fingerprint).ticks())
                .collect()
        };
        let delta: i64 = deltas.iter().zip(&self.counts).map(|(d, n)| d * n).sum();
        self.saved = Some((self.weighted, self.fingerprint));
        self.weighted += delta;
        self.fingerprint = fingerprint;
        Ok(delta)
    }

    pub fn rollback(&mut self) {
        if let Some((weighted, fingerprint)) = self.saved.take() {
            self.states.iter_mut().for_each(EvalState::rollback);
            self.weighted = weighted;
            self.fingerprint = fingerprint;
        }
    }

    pub fn commit(&mut self) {
        if self.saved.take().is_some() {
            self.states.iter_mut().for_each(EvalState::commit);
        }
    }
}
