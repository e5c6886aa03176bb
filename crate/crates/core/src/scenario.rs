//! Failure scenarios and i.i.d. samples of them.

use crate::instance::{Instance, RiskClass};
use crate::rng::rng_from;
use crate::{MmsError, Result};
use rand::Rng as _;
use std::collections::BTreeMap;
use std::fmt::Write as _;

const SAMPLE_TAG: u64 = 0x5a3e;
/// Largest vehicle count accepted by [`enumerate_all`].
pub const ENUMERATION_LIMIT: usize = 20;
pub const SAMPLE_FORMAT: &str = "mms-sample/1";

/// Which vehicles exist; `exists[v] == false` means vehicle `v` failed.
///
/// The derived order is lexicographic with failure before existence.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Scenario(Vec<bool>);

impl Scenario {
    pub fn new(exists: Vec<bool>) -> Self {
        Scenario(exists)
    }

    pub fn all_exist(n_vehicles: usize) -> Self {
        Scenario(vec![true; n_vehicles])
    }

    pub fn exists(&self, vehicle: usize) -> bool {
        self.0[vehicle]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn failures(&self) -> usize {
        self.0.iter().filter(|e| !**e).count()
    }

    /// `1` for an existing vehicle, `0` for a failed one.
    pub fn to_bits(&self) -> String {
        self.0.iter().map(|&e| if e { '1' } else { '0' }).collect()
    }

    pub fn from_bits(bits: &str) -> Result<Self> {
        bits.chars()
            .map(|ch| match ch {
                '1' => Ok(true),
                '0' => Ok(false),
                other => Err(MmsError::parse(None, format!("invalid scenario bit `{other}`"))),
            })
            .collect::<Result<Vec<bool>>>()
            .map(Scenario)
    }

    fn check_len(&self, instance: &Instance) -> Result<()> {
        if self.len() == instance.n_vehicles() {
            Ok(())
        } else {
            Err(MmsError::Dimension(format!(
                "scenario covers {} vehicles, instance has {}",
                self.len(),
                instance.n_vehicles()
            )))
        }
    }
}

/// A multiset of `n` scenarios stored as sorted distinct scenarios with counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sample {
    unique: Vec<(Scenario, usize)>,
    n: usize,
    seed: u64,
}

impl Sample {
    /// Deduplicates `scenarios`; the input order is irrelevant.
    pub fn from_scenarios(scenarios: impl IntoIterator<Item = Scenario>, seed: u64) -> Self {
        let mut counts: BTreeMap<Scenario, usize> = BTreeMap::new();
        for s in scenarios {
            *counts.entry(s).or_default() += 1;
        }
        Self::from_counts(counts, seed)
    }

    /// Builds a sample from `(scenario, count)` pairs, merging repeated scenarios.
    pub fn from_unique(pairs: impl IntoIterator<Item = (Scenario, usize)>, seed: u64) -> Self {
        let mut counts: BTreeMap<Scenario, usize> = BTreeMap::new();
        for (s, c) in pairs {
            if c > 0 {
                *counts.entry(s).or_default() += c;
            }
        }
        Self::from_counts(counts, seed)
    }

    fn from_counts(counts: BTreeMap<Scenario, usize>, seed: u64) -> Self {
        let n = counts.values().sum();
        Sample {
            unique: counts.into_iter().collect(),
            n,
            seed,
        }
    }

    /// The deterministic one-scenario problem: nothing fails.
    pub fn all_exist(n_vehicles: usize) -> Self {
        Sample {
            unique: vec![(Scenario::all_exist(n_vehicles), 1)],
            n: 1,
            seed: 0,
        }
    }

    /// Distinct scenarios in ascending order with their multiplicities.
    pub fn unique(&self) -> &[(Scenario, usize)] {
        &self.unique
    }

    /// Total multiplicity `N`.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_vehicles(&self) -> usize {
        self.unique.first().map_or(0, |(s, _)| s.len())
    }

    /// The full multiset in ascending order.
    pub fn scenarios(&self) -> impl Iterator<Item = &Scenario> + '_ {
        self.unique
            .iter()
            .flat_map(|(s, c)| std::iter::repeat_n(s, *c))
    }

    pub fn check(&self, instance: &Instance) -> Result<()> {
        if self.n == 0 {
            return Err(MmsError::InvalidArgument("sample is empty".into()));
        }
        self.unique.iter().try_for_each(|(s, _)| s.check_len(instance))
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{SAMPLE_FORMAT}\nseed {}\nn {}\n", self.seed, self.n);
        for (s, c) in &self.unique {
            let _ = writeln!(out, "{} {c}", s.to_bits());
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let mut header = |key: &str| -> Result<String> {
            let (i, line) = lines
                .next()
                .ok_or_else(|| MmsError::parse(None, format!("missing `{key}` line")))?;
            if key == SAMPLE_FORMAT {
                return if line.trim() == SAMPLE_FORMAT {
                    Ok(String::new())
                } else {
                    Err(MmsError::parse(Some(i + 1), format!("expected `{SAMPLE_FORMAT}`")))
                };
            }
            match line.split_whitespace().collect::<Vec<_>>()[..] {
                [k, v] if k == key => Ok(v.to_string()),
                _ => Err(MmsError::parse(Some(i + 1), format!("expected `{key} <value>`"))),
            }
        };
        header(SAMPLE_FORMAT)?;
        let seed: u64 = header("seed")?
            .parse()
            .map_err(|_| MmsError::parse(Some(2), "seed must be an unsigned integer"))?;
        let n: usize = header("n")?
            .parse()
            .map_err(|_| MmsError::parse(Some(3), "n must be an unsigned integer"))?;
        let mut pairs = Vec::new();
        for (i, line) in lines {
            let bad = || MmsError::parse(Some(i + 1), "expected `<bits> <count>`");
            let (bits, count) = line.trim().split_once(' ').ok_or_else(bad)?;
            let count: usize = count.trim().parse().map_err(|_| bad())?;
            pairs.push((Scenario::from_bits(bits)?, count));
        }
        let sample = Sample::from_unique(pairs, seed);
        if sample.n != n {
            return Err(MmsError::parse(
                None,
                format!("counts sum to {}, header says {n}", sample.n),
            ));
        }
        Ok(sample)
    }
}

/// `ρ_ω = Π_v f_v^(1-e_v) (1-f_v)^e_v`.
pub fn scenario_probability(instance: &Instance, scenario: &Scenario) -> Result<f64> {
    scenario.check_len(instance)?;
    Ok(instance
        .vehicles
        .iter()
        .zip(scenario.as_slice())
        .map(|(v, &e)| if e { 1.0 - v.failure_prob } else { v.failure_prob })
        .product())
}

/// Draws `n` scenarios with independent per-vehicle failures.
///
/// With `forbid_low_risk_failures` low-risk vehicles always exist; their coins
/// are still flipped so the high-risk draws do not depend on the flag.
pub fn sample(instance: &Instance, n: usize, seed: u64, forbid_low_risk_failures: bool) -> Result<Sample> {
    if n == 0 {
        return Err(MmsError::InvalidArgument("sample size must be at least 1".into()));
    }
    let mut rng = rng_from(seed, &[SAMPLE_TAG]);
    let mut counts: BTreeMap<Scenario, usize> = BTreeMap::new();
    for _ in 0..n {
        let exists = instance
            .vehicles
            .iter()
            .map(|v| {
                let fails = rng.random::<f64>() < v.failure_prob;
                !fails || (forbid_low_risk_failures && v.risk_class == RiskClass::Low)
            })
            .collect();
        *counts.entry(Scenario(exists)).or_default() += 1;
    }
    Ok(Sample::from_counts(counts, seed))
}

/// Every scenario with its probability, in ascending scenario order.
pub fn enumerate_all(instance: &Instance) -> Result<Vec<(Scenario, f64)>> {
    let n = instance.n_vehicles();
    if n > ENUMERATION_LIMIT {
        return Err(MmsError::Guard(format!(
            "full enumeration needs 2^{n} scenarios; at most {ENUMERATION_LIMIT} vehicles are supported"
        )));
    }
    (0u64..1 << n)
        .map(|mask| {
            let s = Scenario((0..n).map(|v| mask >> (n - 1 - v) & 1 == 1).collect());
            let p = scenario_probability(instance, &s)?;
            Ok((s, p))
        })
        .collect()
}
