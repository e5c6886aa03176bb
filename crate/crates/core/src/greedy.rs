//! Priority-rule construction of an initial sequence.
//!
//! Positions are filled left to right. The EV ratio fixes in advance which
//! positions take an EV; each position then takes the candidate of the right
//! category that adds the least work overload, then the least idle time, then
//! has the largest utilization-weighted processing time.

use crate::evaluator::{step, Sequence};
use crate::instance::Instance;
use crate::rng::rng_from;
use crate::time::Time;
use rand::Rng as _;
use std::fmt::Write as _;

const PATTERN_TAG: u64 = 0xe7;

/// `Σ_k p_kv Σ_{i∈V̂} p_ki / (|K| |V̂| c)` over the unassigned set `V̂`.
pub fn utilization_weight(instance: &Instance, unassigned: &[usize], v: usize) -> f64 {
    let denom = (instance.n_stations() * unassigned.len()) as f64 * instance.cycle_time.as_f64();
    let num: f64 = (0..instance.n_stations())
        .map(|k| {
            let load: f64 = unassigned.iter().map(|&i| instance.processing_time(k, i).as_f64()).sum();
            instance.processing_time(k, v).as_f64() * load
        })
        .sum();
    num / denom
}

/// Numerator of [`utilization_weight`] in squared ticks; exact for ranking.
fn weight_key(instance: &Instance, station_loads: &[i128], v: usize) -> i128 {
    station_loads
        .iter()
        .enumerate()
        .map(|(k, load)| instance.processing_time(k, v).ticks() as i128 * load)
        .sum()
}

/// Marks which of `total` positions take an EV.
///
/// The first position is an EV; consecutive EVs are `floor(total / ev_count)`
/// or one more apart, the larger gap drawn with probability equal to the
/// fractional part. Gaps shrink where needed so that every EV fits.
pub fn ev_position_pattern(ev_count: usize, total: usize, seed: u64) -> Vec<bool> {
    let mut pattern = vec![false; total];
    if ev_count == 0 || total == 0 {
        return pattern;
    }
    let ev_count = ev_count.min(total);
    let mut rng = rng_from(seed, &[PATTERN_TAG]);
    let ratio = total as f64 / ev_count as f64;
    let base = ratio.floor() as usize;
    let frac = ratio - base as f64;
    let mut pos = 0;
    pattern[0] = true;
    for placed in 1..ev_count {
        let gap = base + usize::from(frac > 0.0 && rng.random_bool(frac));
        pos = (pos + gap).min(total - (ev_count - placed));
        pattern[pos] = true;
    }
    pattern
}

/// Decisions taken at one position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GreedyStep {
    pub position: usize,
    /// Category demanded by the pattern.
    pub ev: bool,
    /// Whether the demanded category was exhausted and the other one used.
    pub fallback: bool,
    pub candidates: usize,
    /// Candidates left after the overload stage.
    pub after_overload: usize,
    /// Candidates left after the idle-time stage.
    pub after_idle: usize,
    /// Candidates left after the weight stage.
    pub after_weight: usize,
    pub chosen: usize,
    pub new_overload: Time,
    pub new_idle: Time,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GreedyTrace {
    pub steps: Vec<GreedyStep>,
}

impl GreedyTrace {
    pub fn to_text(&self) -> String {
        let mut out = String::from("position ev fallback candidates after_overload after_idle after_weight chosen new_overload new_idle\n");
        for s in &self.steps {
            let _ = writeln!(
                out,
                "{} {} {} {} {} {} {} {} {} {}",
                s.position,
                s.ev,
                s.fallback,
                s.candidates,
                s.after_overload,
                s.after_idle,
                s.after_weight,
                s.chosen,
                s.new_overload,
                s.new_idle
            );
        }
        out
    }
}

fn keep_min<K: Ord + Copy>(items: Vec<(usize, K)>) -> Vec<usize> {
    let best = items.iter().map(|(_, k)| *k).min();
    items.into_iter().filter(|(_, k)| Some(*k) == best).map(|(v, _)| v).collect()
}

/// Builds a sequence for the scenario in which every vehicle exists.
pub fn construct(instance: &Instance, seed: u64) -> (Sequence, GreedyTrace) {
    let n = instance.n_vehicles();
    let n_stations = instance.n_stations();
    let c = instance.cycle_time;
    let pattern = ev_position_pattern(instance.ev_count(), n, seed);

    let mut unassigned: Vec<usize> = (0..n).collect();
    let mut z = vec![Time::ZERO; n_stations];
    let mut order = Vec::with_capacity(n);
    let mut trace = GreedyTrace::default();

    for (t, &want_ev) in pattern.iter().enumerate() {
        let last = t + 1 == n;
        let mut pool: Vec<usize> = unassigned
            .iter()
            .copied()
            .filter(|&v| instance.vehicles[v].is_ev == want_ev)
            .collect();
        let fallback = pool.is_empty();
        if fallback {
            pool = unassigned.clone();
        }
        let candidates = pool.len();

        let effect = |v: usize| -> (Time, Time) {
            (0..n_stations).fold((Time::ZERO, Time::ZERO), |(wo, idle), k| {
                let p = instance.processing_time(k, v);
                let l = instance.stations[k].length;
                let (w, _, _) = step(z[k], p, c, l, last, last);
                (wo + w, idle + (c - (z[k] + p)).max(Time::ZERO))
            })
        };

        if t > 0 {
            pool = keep_min(pool.iter().map(|&v| (v, effect(v).0)).collect());
        }
        let after_overload = pool.len();
        pool = keep_min(pool.iter().map(|&v| (v, effect(v).1)).collect());
        let after_idle = pool.len();

        let loads: Vec<i128> = (0..n_stations)
            .map(|k| unassigned.iter().map(|&i| instance.processing_time(k, i).ticks() as i128).sum())
            .collect();
        pool = keep_min(pool.iter().map(|&v| (v, -weight_key(instance, &loads, v))).collect());
        let after_weight = pool.len();

        let chosen = *pool.iter().min().expect("at least one candidate");
        let (new_overload, new_idle) = effect(chosen);
        for (k, zk) in z.iter_mut().enumerate() {
            let (_, next, _) = step(*zk, instance.processing_time(k, chosen), c, instance.stations[k].length, last, last);
            *zk = next;
        }
        unassigned.retain(|&v| v != chosen);
        order.push(chosen);
        trace.steps.push(GreedyStep {
            position: t,
            ev: want_ev,
            fallback,
            candidates,
            after_overload,
            after_idle,
            after_weight,
            chosen,
            new_overload: if t > 0 { new_overload } else { Time::ZERO },
            new_idle,
        });
    }
    (Sequence::from_permutation_unchecked(order), trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::evaluate;
    use crate::instance::fixtures::{greedy_example, random_instance, vehicle};
    use crate::instance::Station;
    use crate::scenario::Scenario;

    #[test]
    fn weight_examples() {
        let single = Instance::new(
            Time::units(7),
            vec![Station { id: 0, length: Time::units(10) }],
            vec![vehicle(0, false, 0.0, &[7.0]), vehicle(1, false, 0.0, &[3.0])],
        )
        .unwrap();
        assert!((utilization_weight(&single, &[0], 0) - 7.0).abs() < 1e-12);

        let inst = greedy_example();
        let all: Vec<usize> = (0..6).collect();
        // C = (2, 10), station loads (42, 41): (2*42 + 10*41) / (2*6*7)
        assert!((utilization_weight(&inst, &all, 2) - 494.0 / 84.0).abs() < 1e-12);

        let mut doubled = inst.clone();
        doubled.cycle_time = Time::units(14);
        for v in 0..6 {
            let ratio = utilization_weight(&inst, &all, v) / utilization_weight(&doubled, &all, v);
            assert!((ratio - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pattern_examples() {
        assert_eq!(
            ev_position_pattern(2, 6, 0),
            vec![true, false, false, true, false, false]
        );
        assert_eq!(ev_position_pattern(0, 5, 0), vec![false; 5]);
        assert_eq!(ev_position_pattern(4, 4, 0), vec![true; 4]);
    }

    #[test]
    fn pattern_gaps_follow_ratio() {
        for seed in 0..1000 {
            let p = ev_position_pattern(3, 10, seed);
            let at: Vec<usize> = (0..10).filter(|&t| p[t]).collect();
            assert_eq!(at.len(), 3);
            assert_eq!(at[0], 0);
            assert!(at.windows(2).all(|w| (3..=4).contains(&(w[1] - w[0]))), "{at:?}");
        }
        let mut saw = [false; 2];
        for seed in 0..50 {
            let p = ev_position_pattern(3, 10, seed);
            saw[usize::from(p[4])] = true;
        }
        assert!(saw[0] && saw[1], "both gap sizes should occur");
    }

    #[test]
    fn table_example_sequence() {
        let inst = greedy_example();
        let (seq, trace) = construct(&inst, 0);
        // A C F B E D
        assert_eq!(seq.order(), &[0, 2, 5, 1, 4, 3]);
        let state = evaluate(&inst, &seq, &Scenario::all_exist(6), true);
        assert_eq!(state.total_overload(), Time::units(3));
        assert_eq!(state.stations()[1].w[5], Time::units(3));
        for s in &trace.steps {
            assert!(s.after_weight <= s.after_idle && s.after_idle <= s.after_overload);
            assert!(s.after_overload <= s.candidates);
            assert_eq!(inst.vehicles[s.chosen].is_ev, s.ev);
        }
        assert_eq!(trace.to_text().lines().count(), 7);
    }

    #[test]
    fn identical_vehicles_come_out_by_id() {
        let inst = Instance::new(
            Time::units(7),
            vec![Station { id: 0, length: Time::units(10) }],
            (0..6).map(|i| vehicle(i, i == 1 || i == 4, 0.0, &[6.0])).collect(),
        )
        .unwrap();
        let (seq, _) = construct(&inst, 3);
        assert_eq!(seq.order(), &[1, 0, 2, 4, 3, 5]);
    }

    #[test]
    fn output_matches_pattern_and_is_deterministic() {
        for seed in 0..20 {
            let inst = random_instance(40, seed);
            let (a, trace) = construct(&inst, seed);
            let (b, _) = construct(&inst, seed);
            assert_eq!(a, b);
            let pattern = ev_position_pattern(inst.ev_count(), 40, seed);
            for (t, &v) in a.order().iter().enumerate() {
                assert_eq!(inst.vehicles[v].is_ev, pattern[t]);
            }
            assert!(trace.steps.iter().all(|s| !s.fallback));
        }
    }
}
