//! Cached evaluation state and incremental re-evaluation after a move.

use super::{effective_times, evaluate_station, position_hash, step, ScenarioTransform, Sequence};
use crate::instance::Instance;
use crate::scenario::Scenario;
use crate::tabu::Move;
use crate::time::Time;
use crate::{MmsError, Result};

/// Arrays of one station along the sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StationTrace {
    /// Effective processing time at each position.
    pub b: Vec<Time>,
    /// Operator start offset from the left border.
    pub z: Vec<Time>,
    pub w: Vec<Time>,
    pub idle: Vec<Time>,
    pub total: Time,
}

#[derive(Clone, Debug, Default)]
struct Journal {
    /// `(station, position, z, w, idle)` before each write, in write order.
    cells: Vec<(usize, usize, Time, Time, Time)>,
    /// `(station, offset into b_store)` for each saved `b` span.
    spans: Vec<(usize, usize)>,
    b_store: Vec<Time>,
    span: Option<(usize, usize)>,
    station_totals: Vec<Time>,
    total: Time,
    fingerprint: u64,
}

/// Full per-station evaluation of one sequence under one scenario.
///
/// A state remembers which sequence it belongs to, so
/// [`EvalState::apply_move`] refuses to update it from the wrong one.
#[derive(Clone, Debug)]
pub struct EvalState {
    stations: Vec<StationTrace>,
    lengths: Vec<Time>,
    cycle_time: Time,
    regenerative: bool,
    total: Time,
    fingerprint: u64,
    journal: Option<Journal>,
    recomputed: usize,
}

impl PartialEq for EvalState {
    /// Compares the evaluated values, not the undo journal.
    fn eq(&self, other: &Self) -> bool {
        self.stations == other.stations
            && self.lengths == other.lengths
            && self.cycle_time == other.cycle_time
            && self.regenerative == other.regenerative
            && self.total == other.total
            && self.fingerprint == other.fingerprint
    }
}

impl EvalState {
    pub(crate) fn build(instance: &Instance, sequence: &Sequence, scenario: &Scenario, regenerative: bool) -> Self {
        let c = instance.cycle_time;
        let stations: Vec<StationTrace> =
            effective_times(instance, sequence, scenario, ScenarioTransform::ImprovedNeutral)
                .iter()
                .zip(&instance.stations)
                .map(|(b, s)| evaluate_station(b, c, s.length, regenerative))
                .collect();
        EvalState {
            total: stations.iter().map(|s| s.total).sum(),
            stations,
            lengths: instance.stations.iter().map(|s| s.length).collect(),
            cycle_time: c,
            regenerative,
            fingerprint: sequence.fingerprint(),
            journal: None,
            recomputed: 0,
        }
    }

    pub fn total_overload(&self) -> Time {
        self.total
    }

    pub fn stations(&self) -> &[StationTrace] {
        &self.stations
    }

    /// `η_kt = b_kt - c`.
    pub fn eta(&self, station: usize, position: usize) -> Time {
        self.stations[station].b[position] - self.cycle_time
    }

    pub fn regenerative(&self) -> bool {
        self.regenerative
    }

    /// Fingerprint of the sequence this state describes.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Station-position steps recomputed by the last move.
    pub fn recomputed(&self) -> usize {
        self.recomputed
    }

    /// Updates the state to `mv` applied to `old_sequence` and returns the
    /// change in total overload. The previous values stay available to
    /// [`EvalState::rollback`] until the next move or [`EvalState::commit`].
    pub fn apply_move(&mut self, old_sequence: &Sequence, mv: Move) -> Result<Time> {
        if old_sequence.fingerprint() != self.fingerprint {
            return Err(MmsError::Contract(
                "evaluation state does not belong to the given sequence".into(),
            ));
        }
        if mv.t2 >= old_sequence.len() {
            return Err(MmsError::InvalidArgument(format!(
                "move {mv} exceeds a sequence of length {}",
                old_sequence.len()
            )));
        }
        let fingerprint = moved_fingerprint(self.fingerprint, old_sequence.order(), mv);
        Ok(self.apply_move_unchecked(mv, fingerprint))
    }

    pub(crate) fn apply_move_unchecked(&mut self, mv: Move, new_fingerprint: u64) -> Time {
        let mut journal = self.journal.take().unwrap_or_default();
        journal.cells.clear();
        journal.spans.clear();
        journal.b_store.clear();
        journal.span = Some((mv.t1, mv.t2));
        journal.station_totals.clear();
        journal.station_totals.extend(self.stations.iter().map(|s| s.total));
        journal.total = self.total;
        journal.fingerprint = self.fingerprint;

        let before = self.total;
        let mut steps = 0;
        for k in 0..self.stations.len() {
            steps += self.reevaluate_station(k, mv, &mut journal);
        }
        self.total = self.stations.iter().map(|s| s.total).sum();
        self.fingerprint = new_fingerprint;
        self.recomputed = steps;
        self.journal = Some(journal);
        self.total - before
    }

    fn reevaluate_station(&mut self, k: usize, mv: Move, journal: &mut Journal) -> usize {
        let (c, l, regenerative) = (self.cycle_time, self.lengths[k], self.regenerative);
        let st = &mut self.stations[k];
        let n = st.b.len();
        let offset = journal.b_store.len();
        journal.b_store.extend_from_slice(&st.b[mv.t1..=mv.t2]);
        journal.spans.push((k, offset));
        let old_b = &journal.b_store[offset..];
        let mut changed = Vec::new();
        for t in mv.touched() {
            let nb = old_b[mv.source(t) - mv.t1];
            if nb != st.b[t] {
                st.b[t] = nb;
                changed.push(t);
            }
        }

        let mut steps = 0;
        let mut next = 0;
        while next < changed.len() {
            let mut t = changed[next];
            loop {
                let last = t + 1 == n;
                let (w, z_next, idle_next) = step(st.z[t], st.b[t], c, l, last, regenerative);
                steps += 1;
                if w != st.w[t] {
                    journal.cells.push((k, t, st.z[t], st.w[t], st.idle[t]));
                    st.total += w - st.w[t];
                    st.w[t] = w;
                }
                while next < changed.len() && changed[next] <= t {
                    next += 1;
                }
                if last {
                    break;
                }
                let u = t + 1;
                let same = z_next == st.z[u];
                if !same || idle_next != st.idle[u] {
                    journal.cells.push((k, u, st.z[u], st.w[u], st.idle[u]));
                    st.z[u] = z_next;
                    st.idle[u] = idle_next;
                }
                if same && changed.get(next) != Some(&u) {
                    // the recursion only carries z forward, so everything up to
                    // the next changed position is already correct
                    break;
                }
                t = u;
            }
        }
        steps
    }

    /// Restores the values from before the last move.
    pub fn rollback(&mut self) {
        let Some(mut journal) = self.journal.take() else {
            return;
        };
        if let Some((t1, t2)) = journal.span.take() {
            for &(k, t, z, w, idle) in journal.cells.iter().rev() {
                let st = &mut self.stations[k];
                st.z[t] = z;
                st.w[t] = w;
                st.idle[t] = idle;
            }
            let len = t2 - t1 + 1;
            for &(k, offset) in &journal.spans {
                self.stations[k].b[t1..=t2].copy_from_slice(&journal.b_store[offset..offset + len]);
            }
            for (st, &total) in self.stations.iter_mut().zip(&journal.station_totals) {
                st.total = total;
            }
            self.total = journal.total;
            self.fingerprint = journal.fingerprint;
        }
        journal.cells.clear();
        journal.spans.clear();
        self.recomputed = 0;
        self.journal = Some(journal);
    }

    /// Forgets the undo information of the last move.
    pub fn commit(&mut self) {
        if let Some(j) = self.journal.as_mut() {
            j.cells.clear();
            j.spans.clear();
            j.span = None;
        }
    }
}

/// Fingerprint of `old` after `mv`, computed from the touched positions only.
pub(crate) fn moved_fingerprint(fingerprint: u64, old: &[usize], mv: Move) -> u64 {
    mv.touched().into_iter().fold(fingerprint, |acc, t| {
        acc.wrapping_sub(position_hash(t, old[t]))
            .wrapping_add(position_hash(t, old[mv.source(t)]))
    })
}

/// Returns the state of the moved sequence and the change in total overload.
pub fn partial_reevaluate(
    state: &EvalState,
    instance: &Instance,
    old_sequence: &Sequence,
    mv: Move,
) -> Result<(EvalState, Time)> {
    old_sequence.check(instance)?;
    let mut next = state.clone();
    let delta = next.apply_move(old_sequence, mv)?;
    next.commit();
    Ok((next, delta))
}
