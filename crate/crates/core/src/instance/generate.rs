//! Random instances resembling a five-station final-assembly segment.

use super::{Instance, RiskClass, Station, Vehicle};
use crate::rng::{rng_from, Rng};
use crate::time::Time;
use crate::{MmsError, Result};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Beta, Distribution, Triangular};

/// Processing-time statistics of one station.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProcessingProfile {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

impl ProcessingProfile {
    pub const fn new(min: f64, mean: f64, max: f64) -> Self {
        ProcessingProfile { min, mean, max }
    }

    /// Mode of the triangular distribution on `[min, max]` whose mean is `mean`.
    pub fn triangular_mode(&self) -> f64 {
        3.0 * self.mean - self.min - self.max
    }

    fn sampler(&self) -> ProfileSampler {
        let mode = self.triangular_mode();
        if self.max - self.min < 1e-12 {
            ProfileSampler::Constant(self.min)
        } else if (self.min..=self.max).contains(&mode) {
            ProfileSampler::Triangular(Triangular::new(self.min, self.max, mode).expect("valid triangle"))
        } else {
            // No triangle on [min, max] has this mean; fall back to a scaled
            // beta with the same mean.
            let mu = (self.mean - self.min) / (self.max - self.min);
            let mu = mu.clamp(1e-3, 1.0 - 1e-3);
            let concentration = 6.0;
            ProfileSampler::Beta {
                dist: Beta::new(mu * concentration, (1.0 - mu) * concentration).expect("valid beta"),
                min: self.min,
                span: self.max - self.min,
            }
        }
    }
}

enum ProfileSampler {
    Constant(f64),
    Triangular(Triangular<f64>),
    Beta { dist: Beta<f64>, min: f64, span: f64 },
}

impl ProfileSampler {
    fn draw(&self, rng: &mut Rng) -> f64 {
        match self {
            ProfileSampler::Constant(v) => *v,
            ProfileSampler::Triangular(t) => t.sample(rng),
            ProfileSampler::Beta { dist, min, span } => min + span * dist.sample(rng),
        }
    }
}

/// Per-station (min, mean, max) processing times of the reference line.
pub const TABLE_PROFILES: [ProcessingProfile; 5] = [
    ProcessingProfile::new(42.6, 94.1, 117.2),
    ProcessingProfile::new(7.9, 84.3, 197.9),
    ProcessingProfile::new(57.8, 96.2, 113.3),
    ProcessingProfile::new(26.9, 96.9, 109.7),
    ProcessingProfile::new(57.8, 96.2, 114.3),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InstanceClass {
    Small,
    Medium,
    Large,
}

impl InstanceClass {
    pub fn sizes(self) -> &'static [usize] {
        match self {
            InstanceClass::Small => &[7, 8, 9, 10],
            InstanceClass::Medium => &[40],
            InstanceClass::Large => &[200, 300, 400],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            InstanceClass::Small => "small",
            InstanceClass::Medium => "medium",
            InstanceClass::Large => "large",
        }
    }
}

impl std::str::FromStr for InstanceClass {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "small" => Ok(InstanceClass::Small),
            "medium" => Ok(InstanceClass::Medium),
            "large" => Ok(InstanceClass::Large),
            other => Err(format!("unknown instance class `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorConfig {
    pub n_vehicles: usize,
    pub n_stations: usize,
    pub cycle_time: Time,
    pub station_lengths: Vec<Time>,
    pub processing_time_profile: Vec<ProcessingProfile>,
    pub ev_ratio_range: (f64, f64),
    pub high_risk_fraction_range: (f64, f64),
    pub low_risk_prob_range: (f64, f64),
    pub high_risk_prob_range: (f64, f64),
    /// Station whose EV processing times are drawn from the top third of its
    /// range (non-EVs from the bottom two thirds).
    pub battery_station: Option<usize>,
    pub seed: u64,
}

impl GeneratorConfig {
    /// Reference line: c = 97, l = (240, 120, 120, 120, 120).
    pub fn reference(n_vehicles: usize, seed: u64) -> Self {
        GeneratorConfig {
            n_vehicles,
            n_stations: 5,
            cycle_time: Time::units(97),
            station_lengths: [240, 120, 120, 120, 120].map(Time::units).to_vec(),
            processing_time_profile: TABLE_PROFILES.to_vec(),
            ev_ratio_range: (0.25, 1.0 / 3.0),
            high_risk_fraction_range: (0.03, 0.05),
            low_risk_prob_range: (0.0, 0.01),
            high_risk_prob_range: (0.2, 0.35),
            battery_station: Some(0),
            seed,
        }
    }

    /// Reference line with the risk mix used for a given instance class.
    pub fn for_class(class: InstanceClass, n_vehicles: usize, seed: u64) -> Self {
        let mut config = Self::reference(n_vehicles, seed);
        if class == InstanceClass::Small {
            config.high_risk_fraction_range = (0.15, 0.25);
        }
        config
    }

    pub fn check(&self) -> Result<()> {
        let err = |m: String| Err(MmsError::Config(m));
        if self.n_vehicles < 2 {
            return err(format!("n_vehicles must be at least 2, got {}", self.n_vehicles));
        }
        if self.n_stations == 0 {
            return err("n_stations must be positive".into());
        }
        if self.station_lengths.len() != self.n_stations {
            return err(format!(
                "station_lengths has {} entries for {} stations",
                self.station_lengths.len(),
                self.n_stations
            ));
        }
        if self.processing_time_profile.len() != self.n_stations {
            return err(format!(
                "processing_time_profile has {} entries for {} stations",
                self.processing_time_profile.len(),
                self.n_stations
            ));
        }
        if !self.cycle_time.is_positive() {
            return err("cycle_time must be positive".into());
        }
        for (k, l) in self.station_lengths.iter().enumerate() {
            if *l < self.cycle_time {
                return err(format!("station_lengths[{k}] = {l} is below the cycle time"));
            }
        }
        for (k, p) in self.processing_time_profile.iter().enumerate() {
            if !(p.min > 0.0 && p.min <= p.mean && p.mean <= p.max) {
                return err(format!(
                    "processing_time_profile[{k}] needs 0 < min <= mean <= max, got ({}, {}, {})",
                    p.min, p.mean, p.max
                ));
            }
        }
        let ranges = [
            ("ev_ratio_range", self.ev_ratio_range),
            ("high_risk_fraction_range", self.high_risk_fraction_range),
            ("low_risk_prob_range", self.low_risk_prob_range),
            ("high_risk_prob_range", self.high_risk_prob_range),
        ];
        for (name, (lo, hi)) in ranges {
            if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                return err(format!("{name} must be a sub-interval of [0, 1], got [{lo}, {hi}]"));
            }
        }
        for (name, (_, hi)) in [
            ("low_risk_prob_range", self.low_risk_prob_range),
            ("high_risk_prob_range", self.high_risk_prob_range),
        ] {
            if hi >= 0.5 {
                return err(format!("{name} must stay below 0.5, got upper end {hi}"));
            }
        }
        if let Some(b) = self.battery_station {
            if b >= self.n_stations {
                return err(format!("battery_station {b} out of range"));
            }
        }
        if integer_counts(self.n_vehicles, self.ev_ratio_range).is_empty() {
            return err(format!(
                "no EV count out of {} vehicles has a ratio in [{}, {}]",
                self.n_vehicles, self.ev_ratio_range.0, self.ev_ratio_range.1
            ));
        }
        Ok(())
    }
}

/// Integer counts `k <= n` with `k / n` inside `range`.
fn integer_counts(n: usize, (lo, hi): (f64, f64)) -> Vec<usize> {
    let eps = 1e-9;
    let first = ((lo * n as f64) - eps).ceil().max(0.0) as usize;
    let last = ((hi * n as f64) + eps).floor().min(n as f64) as usize;
    (first..=last).collect()
}

fn uniform(rng: &mut Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

fn round_prob(p: f64) -> f64 {
    (p * 1e4).round() / 1e4
}

/// Draws an instance; the output depends only on `config`.
pub fn generate(config: &GeneratorConfig) -> Result<Instance> {
    config.check()?;
    let n = config.n_vehicles;
    let mut rng = rng_from(config.seed, &[0x1a57]);

    let ev_choices = integer_counts(n, config.ev_ratio_range);
    let ev_count = ev_choices[rng.random_range(0..ev_choices.len())];

    let risk_choices = integer_counts(n, config.high_risk_fraction_range);
    let high_count = if risk_choices.is_empty() {
        let mid = 0.5 * (config.high_risk_fraction_range.0 + config.high_risk_fraction_range.1);
        ((mid * n as f64).round() as usize).min(n)
    } else {
        risk_choices[rng.random_range(0..risk_choices.len())]
    };

    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut rng);
    let mut is_ev = vec![false; n];
    for &v in &ids[..ev_count] {
        is_ev[v] = true;
    }
    ids.shuffle(&mut rng);
    let mut high = vec![false; n];
    for &v in &ids[..high_count] {
        high[v] = true;
    }

    let samplers: Vec<ProfileSampler> = config
        .processing_time_profile
        .iter()
        .map(ProcessingProfile::sampler)
        .collect();

    let mut vehicles = Vec::with_capacity(n);
    for v in 0..n {
        let mut processing_times = Vec::with_capacity(config.n_stations);
        for (k, profile) in config.processing_time_profile.iter().enumerate() {
            let raw = if config.battery_station == Some(k) {
                let cut = profile.min + (profile.max - profile.min) * 2.0 / 3.0;
                if is_ev[v] {
                    uniform(&mut rng, (cut, profile.max))
                } else {
                    // rejection keeps the profile shape below the EV band
                    let mut draw = samplers[k].draw(&mut rng);
                    let mut tries = 0;
                    while draw > cut && tries < 64 {
                        draw = samplers[k].draw(&mut rng);
                        tries += 1;
                    }
                    draw.min(cut)
                }
            } else {
                samplers[k].draw(&mut rng)
            };
            let lo = Time::from_f64(profile.min).max(Time::from_ticks(1));
            let hi = Time::from_f64(profile.max).max(lo);
            processing_times.push(Time::from_f64(raw).clamp(lo, hi));
        }
        let (risk_class, prob_range) = if high[v] {
            (RiskClass::High, config.high_risk_prob_range)
        } else {
            (RiskClass::Low, config.low_risk_prob_range)
        };
        let failure_prob = round_prob(uniform(&mut rng, prob_range)).min(0.4999);
        vehicles.push(Vehicle {
            id: v,
            is_ev: is_ev[v],
            risk_class,
            failure_prob,
            processing_times,
        });
    }

    let stations = config
        .station_lengths
        .iter()
        .enumerate()
        .map(|(id, &length)| Station { id, length })
        .collect();
    Instance::new(config.cycle_time, stations, vehicles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::validate;

    #[test]
    fn small_reference_instance() {
        let inst = generate(&GeneratorConfig::for_class(InstanceClass::Small, 10, 3)).unwrap();
        assert_eq!(inst.n_vehicles(), 10);
        assert_eq!(inst.n_stations(), 5);
        let ratio = inst.ev_count() as f64 / 10.0;
        assert!((0.25..=0.33).contains(&ratio), "ratio {ratio}");
        assert!(validate(&inst).is_empty());
    }

    #[test]
    fn every_reference_size_is_feasible() {
        for class in [InstanceClass::Small, InstanceClass::Medium, InstanceClass::Large] {
            for &n in class.sizes() {
                let inst = generate(&GeneratorConfig::for_class(class, n, 11)).unwrap();
                let ratio = inst.ev_count() as f64 / n as f64;
                assert!((0.25..=1.0 / 3.0 + 1e-12).contains(&ratio), "n={n} ratio={ratio}");
            }
        }
    }

    #[test]
    fn same_seed_same_instance() {
        let cfg = GeneratorConfig::for_class(InstanceClass::Small, 9, 42);
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let other = GeneratorConfig { seed: 43, ..cfg.clone() };
        assert_ne!(generate(&cfg).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn station_two_profile_statistics() {
        let inst = generate(&GeneratorConfig::reference(1000, 5)).unwrap();
        let times: Vec<f64> = inst.vehicles.iter().map(|v| v.processing_times[1].as_f64()).collect();
        let min = times.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = times.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mean = times.iter().sum::<f64>() / times.len() as f64;
        assert!(min >= 7.9 && max <= 197.9, "range [{min}, {max}]");
        assert!((mean - 84.3).abs() <= 0.1 * 84.3, "mean {mean}");
    }

    #[test]
    fn battery_station_skews_evs_upward() {
        for seed in 0..20 {
            let inst = generate(&GeneratorConfig::for_class(InstanceClass::Small, 7, seed)).unwrap();
            let mean = |ev: bool| {
                let xs: Vec<f64> = inst
                    .vehicles
                    .iter()
                    .filter(|v| v.is_ev == ev)
                    .map(|v| v.processing_times[0].as_f64())
                    .collect();
                xs.iter().sum::<f64>() / xs.len() as f64
            };
            assert!(mean(true) > mean(false), "seed {seed}");
        }
    }

    #[test]
    fn risk_classes_follow_ranges() {
        let inst = generate(&GeneratorConfig::for_class(InstanceClass::Small, 10, 8)).unwrap();
        let high = inst.vehicles.iter().filter(|v| v.risk_class == RiskClass::High).count();
        assert!((0.15..=0.25).contains(&(high as f64 / 10.0)));
        for v in &inst.vehicles {
            let ok = match v.risk_class {
                RiskClass::High => (0.2..=0.35).contains(&v.failure_prob),
                RiskClass::Low => (0.0..=0.01).contains(&v.failure_prob),
            };
            assert!(ok, "{v:?}");
        }
    }

    #[test]
    fn infeasible_ev_range_is_a_config_error() {
        let mut cfg = GeneratorConfig::reference(9, 1);
        cfg.ev_ratio_range = (0.25, 0.33);
        assert!(matches!(generate(&cfg), Err(MmsError::Config(_))));
        cfg.ev_ratio_range = (0.4, 0.3);
        assert!(matches!(generate(&cfg), Err(MmsError::Config(_))));
    }

    #[test]
    fn triangular_mode_matches_mean_for_station_two() {
        let mode = TABLE_PROFILES[1].triangular_mode();
        assert!((mode - 47.1).abs() < 1e-9);
        assert!(TABLE_PROFILES[0].triangular_mode() > TABLE_PROFILES[0].max);
    }
}
