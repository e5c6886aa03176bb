//! Exhaustive search over all permutations; the reference optimum for tiny instances.

use crate::evaluator::{step, Sequence};
use crate::instance::Instance;
use crate::scenario::Sample;
use crate::time::{Time, SCALE};
use crate::{MmsError, Result};

/// Largest vehicle count accepted by [`enumerate_optimal`].
pub const ENUMERATION_VEHICLE_LIMIT: usize = 9;

#[derive(Clone, Debug, PartialEq)]
pub struct EnumerationResult {
    /// Lexicographically smallest optimal sequence.
    pub sequence: Sequence,
    /// Expected overload in time units.
    pub objective: f64,
    /// `Σ n_ω Q_ω` in ticks.
    pub weighted_ticks: i64,
    /// Complete permutations evaluated after pruning.
    pub leaves: u64,
}

struct Search {
    n: usize,
    n_stations: usize,
    /// `[scenario][station][vehicle]` effective processing time.
    times: Vec<Vec<Vec<Time>>>,
    counts: Vec<i64>,
    cycle: Time,
    lengths: Vec<Time>,
    /// `z[depth][scenario * n_stations + station]`
    z: Vec<Vec<Time>>,
    used: Vec<bool>,
    prefix: Vec<usize>,
    best: Option<(i64, Vec<usize>)>,
    leaves: u64,
}

impl Search {
    fn descend(&mut self, depth: usize, cost: i64) {
        if depth == self.n {
            self.leaves += 1;
            if self.best.as_ref().is_none_or(|(b, _)| cost < *b) {
                self.best = Some((cost, self.prefix.clone()));
            }
            return;
        }
        let last = depth + 1 == self.n;
        for v in 0..self.n {
            if self.used[v] {
                continue;
            }
            let mut added = 0i64;
            for (u, count) in self.counts.iter().enumerate() {
                let mut w_sum = Time::ZERO;
                for k in 0..self.n_stations {
                    let idx = u * self.n_stations + k;
                    let z = self.z[depth][idx];
                    let (w, z_next, _) = step(z, self.times[u][k][v], self.cycle, self.lengths[k], last, true);
                    self.z[depth + 1][idx] = z_next;
                    w_sum += w;
                }
                added += w_sum.ticks() * count;
            }
            let total = cost + added;
            if self.best.as_ref().is_some_and(|(b, _)| total >= *b) {
                continue;
            }
            self.used[v] = true;
            self.prefix.push(v);
            self.descend(depth + 1, total);
            self.prefix.pop();
            self.used[v] = false;
        }
    }
}

/// Minimizes the sample-average overload over every permutation.
pub fn enumerate_optimal(instance: &Instance, sample: &Sample) -> Result<EnumerationResult> {
    let n = instance.n_vehicles();
    if n > ENUMERATION_VEHICLE_LIMIT {
        return Err(MmsError::Guard(format!(
            "enumeration covers {n}! permutations; at most {ENUMERATION_VEHICLE_LIMIT} vehicles are supported"
        )));
    }
    sample.check(instance)?;
    let c = instance.cycle_time;
    let k_count = instance.n_stations();
    let times = sample
        .unique()
        .iter()
        .map(|(s, _)| {
            (0..k_count)
                .map(|k| {
                    (0..n)
                        .map(|v| if s.exists(v) { instance.processing_time(k, v) } else { c })
                        .collect()
                })
                .collect()
        })
        .collect();
    let width = sample.unique().len() * k_count;
    let mut search = Search {
        n,
        n_stations: k_count,
        times,
        counts: sample.unique().iter().map(|(_, c)| *c as i64).collect(),
        cycle: c,
        lengths: instance.stations.iter().map(|s| s.length).collect(),
        z: vec![vec![Time::ZERO; width]; n + 1],
        used: vec![false; n],
        prefix: Vec::with_capacity(n),
        best: None,
        leaves: 0,
    };
    search.descend(0, 0);
    let (weighted_ticks, order) = search.best.expect("at least one permutation");
    Ok(EnumerationResult {
        sequence: Sequence::new(order)?,
        objective: weighted_ticks as f64 / sample.n() as f64 / SCALE as f64,
        weighted_ticks,
        leaves: search.leaves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::evaluate_expected_ticks;
    use crate::instance::fixtures::{greedy_example, random_instance};
    use crate::scenario::sample;

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for i in 0..=p.len() {
                let mut q = p.clone();
                q.insert(i, n - 1);
                out.push(q);
            }
        }
        out.sort();
        out
    }

    #[test]
    fn matches_plain_brute_force() {
        for seed in 0..6 {
            let n = 2 + seed as usize % 5;
            let inst = random_instance(n, seed);
            let s = sample(&inst, 30, seed, false).unwrap();
            let mut best: Option<(i64, Vec<usize>)> = None;
            for p in permutations(n) {
                let (ticks, _) = evaluate_expected_ticks(&inst, &Sequence::new(p.clone()).unwrap(), &s).unwrap();
                if best.as_ref().is_none_or(|(b, _)| ticks < *b) {
                    best = Some((ticks, p));
                }
            }
            let (ticks, order) = best.unwrap();
            let result = enumerate_optimal(&inst, &s).unwrap();
            assert_eq!(result.weighted_ticks, ticks);
            assert_eq!(result.sequence.order(), order.as_slice());
        }
    }

    #[test]
    fn table_example_optimum_is_at_most_greedy() {
        let result = enumerate_optimal(&greedy_example(), &Sample::all_exist(6)).unwrap();
        assert!(result.objective <= 3.0);
        let again = enumerate_optimal(&greedy_example(), &Sample::all_exist(6)).unwrap();
        assert_eq!(result, again);
    }

    #[test]
    fn guard_rejects_large_instances() {
        let inst = random_instance(10, 1);
        assert!(matches!(enumerate_optimal(&inst, &Sample::all_exist(10)), Err(MmsError::Guard(_))));
    }
}
