//! Exact second-stage evaluation.
//!
//! For a fixed sequence and scenario the recourse problem has a closed form:
//! each station's operator start offset follows a clamped cumulative sum of
//! `b_t - c`, and work overload is whatever spills past the station border.

mod sample;
mod state;

pub use sample::{evaluate_expected, evaluate_expected_probabilities, evaluate_expected_ticks, SampleEvaluator};
pub use state::{partial_reevaluate, EvalState, StationTrace};

use crate::instance::Instance;
use crate::rng::splitmix64;
use crate::scenario::Scenario;
use crate::time::Time;
use crate::{MmsError, Result};
use std::fmt;
use std::str::FromStr;

/// Launch order: `order()[t]` is the vehicle at zero-based position `t`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sequence(Vec<usize>);

impl Sequence {
    /// Fails unless `order` is a permutation of `0..order.len()`.
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; order.len()];
        for &v in &order {
            match seen.get_mut(v) {
                Some(s) if !*s => *s = true,
                Some(_) => return Err(MmsError::InvalidArgument(format!("vehicle {v} appears twice"))),
                None => {
                    return Err(MmsError::InvalidArgument(format!(
                        "vehicle {v} out of range for a sequence of length {}",
                        order.len()
                    )))
                }
            }
        }
        Ok(Sequence(order))
    }

    pub fn identity(n: usize) -> Self {
        Sequence((0..n).collect())
    }

    pub(crate) fn from_permutation_unchecked(order: Vec<usize>) -> Self {
        debug_assert!(Sequence::new(order.clone()).is_ok());
        Sequence(order)
    }

    pub fn order(&self) -> &[usize] {
        &self.0
    }

    pub fn into_order(self) -> Vec<usize> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn check(&self, instance: &Instance) -> Result<()> {
        if self.len() == instance.n_vehicles() {
            Ok(())
        } else {
            Err(MmsError::Dimension(format!(
                "sequence has {} positions, instance has {} vehicles",
                self.len(),
                instance.n_vehicles()
            )))
        }
    }

    /// Order-sensitive hash, updatable position by position.
    pub fn fingerprint(&self) -> u64 {
        self.0
            .iter()
            .enumerate()
            .fold(0u64, |acc, (t, &v)| acc.wrapping_add(position_hash(t, v)))
    }
}

pub(crate) fn position_hash(t: usize, v: usize) -> u64 {
    splitmix64(((t as u64) << 32) ^ v as u64)
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl FromStr for Sequence {
    type Err = MmsError;

    fn from_str(s: &str) -> Result<Self> {
        let order = s
            .split_whitespace()
            .map(|tok| {
                tok.parse::<usize>()
                    .map_err(|_| MmsError::InvalidArgument(format!("`{tok}` is not a vehicle id")))
            })
            .collect::<Result<Vec<_>>>()?;
        Sequence::new(order)
    }
}

/// How failed vehicles enter the second stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ScenarioTransform {
    /// Failed vehicles are deleted and successors close the gap.
    Removal,
    /// Failed vehicles keep their position with zero processing time.
    StandardZero,
    /// Failed vehicles keep their position with processing time `c`.
    ImprovedNeutral,
}

/// Per-station processing times along the sequence after the transform.
pub fn effective_times(
    instance: &Instance,
    sequence: &Sequence,
    scenario: &Scenario,
    transform: ScenarioTransform,
) -> Vec<Vec<Time>> {
    let c = instance.cycle_time;
    (0..instance.n_stations())
        .map(|k| {
            sequence
                .order()
                .iter()
                .filter_map(|&v| {
                    let p = instance.processing_time(k, v);
                    match (scenario.exists(v), transform) {
                        (true, _) => Some(p),
                        (false, ScenarioTransform::Removal) => None,
                        (false, ScenarioTransform::StandardZero) => Some(Time::ZERO),
                        (false, ScenarioTransform::ImprovedNeutral) => Some(c),
                    }
                })
                .collect()
        })
        .collect()
}

/// One position of the recursion: returns `(w_t, z_{t+1}, idle_{t+1})`.
#[inline]
pub(crate) fn step(z: Time, b: Time, c: Time, l: Time, last: bool, regenerative: bool) -> (Time, Time, Time) {
    let v = z + b;
    if last {
        let border = if regenerative { c } else { l };
        ((v - border).max(Time::ZERO), Time::ZERO, Time::ZERO)
    } else {
        (
            (v - l).max(Time::ZERO),
            (v - c).clamp(Time::ZERO, l - c),
            (c - v).max(Time::ZERO),
        )
    }
}

/// Evaluates one station.
///
/// `idle[t]` is the time the operator waits for the workpiece at position `t`
/// after finishing position `t - 1`; `idle[0]` is zero.
pub fn evaluate_station(b: &[Time], c: Time, l: Time, regenerative: bool) -> StationTrace {
    let n = b.len();
    let mut trace = StationTrace {
        b: b.to_vec(),
        z: vec![Time::ZERO; n],
        w: vec![Time::ZERO; n],
        idle: vec![Time::ZERO; n],
        total: Time::ZERO,
    };
    let mut z = Time::ZERO;
    for t in 0..n {
        let (w, z_next, idle_next) = step(z, b[t], c, l, t + 1 == n, regenerative);
        trace.z[t] = z;
        trace.w[t] = w;
        trace.total += w;
        if t + 1 < n {
            trace.idle[t + 1] = idle_next;
        }
        z = z_next;
    }
    trace
}

/// Full evaluation under the neutral transform.
pub fn evaluate(instance: &Instance, sequence: &Sequence, scenario: &Scenario, regenerative: bool) -> EvalState {
    EvalState::build(instance, sequence, scenario, regenerative)
}

/// Total overload of the sequence with failed vehicles deleted.
pub fn evaluate_removal(instance: &Instance, sequence: &Sequence, scenario: &Scenario, regenerative: bool) -> Time {
    let c = instance.cycle_time;
    effective_times(instance, sequence, scenario, ScenarioTransform::Removal)
        .iter()
        .zip(&instance.stations)
        .map(|(b, s)| evaluate_station(b, c, s.length, regenerative).total)
        .sum()
}

/// Per-position trace as CSV with columns
/// `station,position,vehicle,b,z,w,idle` (zero-based indices).
pub fn trace_csv(state: &EvalState, sequence: &Sequence) -> String {
    let mut out = String::from("station,position,vehicle,b,z,w,idle\n");
    for (k, st) in state.stations().iter().enumerate() {
        for (t, &v) in sequence.order().iter().enumerate() {
            out.push_str(&format!(
                "{k},{t},{v},{},{},{},{}\n",
                st.b[t], st.z[t], st.w[t], st.idle[t]
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::fixtures::greedy_example;
    use crate::instance::{generate, GeneratorConfig, InstanceClass};
    use crate::rng::rng_from;
    use rand::seq::SliceRandom;
    use rand::Rng as _;

    fn units(xs: &[i64]) -> Vec<Time> {
        xs.iter().map(|&x| Time::units(x)).collect()
    }

    #[test]
    fn window_without_regeneration() {
        let st = evaluate_station(&units(&[9, 5, 5, 9, 9]), Time::units(7), Time::units(10), false);
        assert_eq!(st.z, units(&[0, 2, 0, 0, 2]));
        assert_eq!(st.w, units(&[0, 0, 0, 0, 1]));
        assert_eq!(st.idle, units(&[0, 0, 0, 2, 0]));
        assert_eq!(st.total, Time::units(1));
    }

    #[test]
    fn window_with_regeneration() {
        let st = evaluate_station(&units(&[9, 5, 5, 9, 9]), Time::units(7), Time::units(10), true);
        assert_eq!(st.w, units(&[0, 0, 0, 0, 4]));
        assert_eq!(st.total, Time::units(4));
    }

    #[test]
    fn neutral_sequence_is_flat() {
        let st = evaluate_station(&units(&[7; 6]), Time::units(7), Time::units(10), true);
        assert!(st.z.iter().chain(&st.w).chain(&st.idle).all(|x| *x == Time::ZERO));
    }

    #[test]
    fn greedy_sequence_overloads_once() {
        let inst = greedy_example();
        // A C F B E D
        let seq = Sequence::new(vec![0, 2, 5, 1, 4, 3]).unwrap();
        let state = evaluate(&inst, &seq, &Scenario::all_exist(6), true);
        assert_eq!(state.total_overload(), Time::units(3));
        assert_eq!(state.stations()[0].total, Time::ZERO);
        assert_eq!(state.stations()[1].w, units(&[0, 0, 0, 0, 0, 3]));
    }

    #[test]
    fn all_failed_means_no_overload() {
        let inst = generate(&GeneratorConfig::for_class(InstanceClass::Small, 9, 2)).unwrap();
        let seq = Sequence::identity(9);
        let none = Scenario::new(vec![false; 9]);
        assert_eq!(evaluate(&inst, &seq, &none, true).total_overload(), Time::ZERO);
        assert_eq!(evaluate_removal(&inst, &seq, &none, true), Time::ZERO);
    }

    #[test]
    fn transforms_agree_without_failures() {
        let inst = greedy_example();
        let seq = Sequence::identity(6);
        let s = Scenario::all_exist(6);
        let r = effective_times(&inst, &seq, &s, ScenarioTransform::Removal);
        assert_eq!(r, effective_times(&inst, &seq, &s, ScenarioTransform::StandardZero));
        assert_eq!(r, effective_times(&inst, &seq, &s, ScenarioTransform::ImprovedNeutral));
        assert_eq!(r[1][2], Time::units(10));
    }

    #[test]
    fn failed_vehicle_becomes_neutral() {
        let inst = greedy_example();
        let seq = Sequence::identity(5 + 1);
        let s = Scenario::new(vec![true, false, true, true, true, true]);
        let b = effective_times(&inst, &seq, &s, ScenarioTransform::ImprovedNeutral);
        assert_eq!(b[0][1], inst.cycle_time);
        assert_eq!(b[1][1], inst.cycle_time);
        assert_eq!(effective_times(&inst, &seq, &s, ScenarioTransform::Removal)[0].len(), 5);
        assert_eq!(effective_times(&inst, &seq, &s, ScenarioTransform::StandardZero)[0][1], Time::ZERO);
    }

    #[test]
    fn neutral_position_keeps_start_and_removal_matches() {
        let mut rng = rng_from(5, &[]);
        for seed in 0..20 {
            let inst = generate(&GeneratorConfig::for_class(InstanceClass::Small, 8, seed)).unwrap();
            let mut order: Vec<usize> = (0..8).collect();
            order.shuffle(&mut rng);
            let seq = Sequence::new(order).unwrap();
            let s = Scenario::new((0..8).map(|_| rng.random_bool(0.6)).collect());
            let state = evaluate(&inst, &seq, &s, true);
            for (k, st) in state.stations().iter().enumerate() {
                for t in 0..7 {
                    if !s.exists(seq.order()[t]) {
                        assert_eq!(st.z[t + 1], st.z[t], "station {k} position {t}");
                        assert_eq!(st.w[t], Time::ZERO);
                    }
                }
            }
            assert_eq!(state.total_overload(), evaluate_removal(&inst, &seq, &s, true));
        }
    }

    #[test]
    fn clamp_invariants_hold() {
        let inst = generate(&GeneratorConfig::for_class(InstanceClass::Medium, 40, 1)).unwrap();
        let mut rng = rng_from(9, &[]);
        let mut order: Vec<usize> = (0..40).collect();
        order.shuffle(&mut rng);
        let seq = Sequence::new(order).unwrap();
        let state = evaluate(&inst, &seq, &Scenario::all_exist(40), true);
        let c = inst.cycle_time;
        for (k, st) in state.stations().iter().enumerate() {
            let l = inst.stations[k].length;
            for t in 0..40 {
                assert!(st.z[t] >= Time::ZERO && st.z[t] <= l - c);
                assert!(st.w[t] >= Time::ZERO && st.idle[t] >= Time::ZERO);
                // idle belongs to the wait before t, so a long workpiece or the
                // regenerative end can still overload after an idle wait
                if st.b[t] <= l && t + 1 < 40 {
                    assert!(st.w[t] == Time::ZERO || st.idle[t] == Time::ZERO);
                }
                if st.w[t] > Time::ZERO && t + 1 < 40 {
                    assert_eq!(st.z[t + 1], l - c);
                }
            }
        }
        let sum: Time = state.stations().iter().flat_map(|s| s.w.iter().copied()).sum();
        assert_eq!(sum, state.total_overload());
    }

    #[test]
    fn transition_is_monotone_in_start() {
        let (c, l) = (Time::units(7), Time::units(10));
        for b in 1..15 {
            let mut prev = None;
            for z in 0..=3 {
                let (w, zn, _) = step(Time::units(z), Time::units(b), c, l, false, true);
                if let Some((pw, pz)) = prev {
                    assert!(w >= pw && zn >= pz);
                }
                prev = Some((w, zn));
            }
        }
    }

    #[test]
    fn sequence_parsing_and_validation() {
        assert_eq!("2 0 1".parse::<Sequence>().unwrap().order(), &[2, 0, 1]);
        assert!("0 0 1".parse::<Sequence>().is_err());
        assert!("0 3 1".parse::<Sequence>().is_err());
        assert_eq!(Sequence::new(vec![1, 0]).unwrap().to_string(), "1 0");
        assert_ne!(Sequence::identity(4).fingerprint(), Sequence::new(vec![1, 0, 2, 3]).unwrap().fingerprint());
    }

    #[test]
    fn trace_has_one_row_per_cell() {
        let inst = greedy_example();
        let seq = Sequence::new(vec![0, 2, 5, 1, 4, 3]).unwrap();
        let csv = trace_csv(&evaluate(&inst, &seq, &Scenario::all_exist(6), true), &seq);
        assert_eq!(csv.lines().count(), 1 + 12);
        assert!(csv.ends_with("1,5,3,8.0000,2.0000,3.0000,0.0000\n"), "{csv}");
    }
}
