//! Problem data: stations, vehicles and the cycle time.

mod generate;
mod io;

pub use generate::{generate, GeneratorConfig, InstanceClass, ProcessingProfile, TABLE_PROFILES};
pub use io::{from_text, load, load_with_warnings, save, to_text, FORMAT_VERSION};

use crate::time::Time;
use crate::{MmsError, Result};
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Station {
    pub id: usize,
    pub length: Time,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RiskClass {
    Low,
    High,
}

impl fmt::Display for RiskClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RiskClass::Low => "low",
            RiskClass::High => "high",
        })
    }
}

impl FromStr for RiskClass {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "low" => Ok(RiskClass::Low),
            "high" => Ok(RiskClass::High),
            other => Err(format!("unknown risk class `{other}` (expected low or high)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Vehicle {
    pub id: usize,
    pub is_ev: bool,
    pub risk_class: RiskClass,
    pub failure_prob: f64,
    /// Indexed by station.
    pub processing_times: Vec<Time>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub cycle_time: Time,
    pub stations: Vec<Station>,
    pub vehicles: Vec<Vehicle>,
}

impl Instance {
    /// Builds an instance and rejects it unless [`validate`] reports nothing.
    pub fn new(cycle_time: Time, stations: Vec<Station>, vehicles: Vec<Vehicle>) -> Result<Self> {
        let instance = Instance {
            cycle_time,
            stations,
            vehicles,
        };
        let violations = validate(&instance);
        if violations.is_empty() {
            Ok(instance)
        } else {
            Err(MmsError::InvalidInstance(violations))
        }
    }

    pub fn n_vehicles(&self) -> usize {
        self.vehicles.len()
    }

    pub fn n_stations(&self) -> usize {
        self.stations.len()
    }

    pub fn processing_time(&self, station: usize, vehicle: usize) -> Time {
        self.vehicles[vehicle].processing_times[station]
    }

    pub fn ev_count(&self) -> usize {
        self.vehicles.iter().filter(|v| v.is_ev).count()
    }

    /// Station-major copy of the processing-time matrix in ticks.
    pub fn processing_matrix(&self) -> Vec<Vec<i64>> {
        (0..self.n_stations())
            .map(|k| self.vehicles.iter().map(|v| v.processing_times[k].ticks()).collect())
            .collect()
    }

    /// `(l_k - c) / min_v p_kv`, the coefficient that keeps the failed-vehicle
    /// constraints of the zero-time model inactive at existing positions.
    pub fn beta(&self, station: usize) -> f64 {
        let min_p = self
            .vehicles
            .iter()
            .map(|v| v.processing_times[station])
            .min()
            .unwrap_or(Time::ZERO);
        (self.stations[station].length - self.cycle_time).as_f64() / min_p.as_f64()
    }
}

/// Lists every broken invariant; an empty list means the instance is usable.
pub fn validate(instance: &Instance) -> Vec<String> {
    let mut out = Vec::new();
    let c = instance.cycle_time;
    if !c.is_positive() {
        out.push(format!("cycle_time: must be positive, got {c}"));
    }
    if instance.stations.is_empty() {
        out.push("stations: at least one station is required".to_string());
    }
    if instance.vehicles.len() < 2 {
        out.push(format!(
            "vehicles: at least two vehicles are required, got {}",
            instance.vehicles.len()
        ));
    }
    for (k, station) in instance.stations.iter().enumerate() {
        if station.id != k {
            out.push(format!("stations[{k}].id: must equal its index {k}, got {}", station.id));
        }
        if !station.length.is_positive() {
            out.push(format!("stations[{k}].length: must be positive, got {}", station.length));
        }
        if station.length < c {
            out.push(format!(
                "stations[{k}].length: must be at least the cycle time {c}, got {}",
                station.length
            ));
        }
    }
    let n_stations = instance.stations.len();
    for (v, vehicle) in instance.vehicles.iter().enumerate() {
        if vehicle.id != v {
            out.push(format!("vehicles[{v}].id: must equal its index {v}, got {}", vehicle.id));
        }
        if vehicle.processing_times.len() != n_stations {
            out.push(format!(
                "vehicles[{v}].processing_times: expected {n_stations} entries, got {}",
                vehicle.processing_times.len()
            ));
        }
        for (k, p) in vehicle.processing_times.iter().enumerate() {
            if !p.is_positive() {
                out.push(format!(
                    "vehicles[{v}].processing_times[{k}]: must be strictly positive, got {p}"
                ));
            }
        }
        let f = vehicle.failure_prob;
        if !(0.0..0.5).contains(&f) {
            out.push(format!("vehicles[{v}].failure_prob: must lie in [0, 0.5), got {f}"));
        }
    }
    out
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn vehicle(id: usize, is_ev: bool, f: f64, times: &[f64]) -> Vehicle {
        Vehicle {
            id,
            is_ev,
            risk_class: if f >= 0.1 { RiskClass::High } else { RiskClass::Low },
            failure_prob: f,
            processing_times: times.iter().map(|&t| Time::from_f64(t)).collect(),
        }
    }

    /// Reference-line instance of any size `n >= 2`, with up to a third EVs
    /// and the small-class risk mix.
    pub fn random_instance(n: usize, seed: u64) -> Instance {
        let mut config = super::GeneratorConfig::for_class(super::InstanceClass::Small, n, seed);
        config.ev_ratio_range = (0.0, 0.34);
        super::generate(&config).unwrap()
    }

    /// Six vehicles, two stations, c = 7, l = (20, 10); vehicles A..F are ids 0..5.
    pub fn greedy_example() -> Instance {
        let rows: [(bool, [f64; 2]); 6] = [
            (true, [15.0, 4.0]),
            (true, [16.0, 3.0]),
            (false, [2.0, 10.0]),
            (false, [3.0, 8.0]),
            (false, [2.0, 9.0]),
            (false, [4.0, 7.0]),
        ];
        Instance::new(
            Time::units(7),
            vec![
                Station { id: 0, length: Time::units(20) },
                Station { id: 1, length: Time::units(10) },
            ],
            rows.iter()
                .enumerate()
                .map(|(i, (ev, p))| vehicle(i, *ev, 0.0, p))
                .collect(),
        )
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::vehicle;
    use super::*;

    fn five_station(lengths: [f64; 5]) -> Instance {
        Instance {
            cycle_time: Time::units(97),
            stations: lengths
                .iter()
                .enumerate()
                .map(|(id, &l)| Station { id, length: Time::from_f64(l) })
                .collect(),
            vehicles: (0..3)
                .map(|i| vehicle(i, i == 0, 0.01, &[94.1, 84.3, 96.2, 96.9, 96.2]))
                .collect(),
        }
    }

    #[test]
    fn well_formed_instance_has_no_violations() {
        let inst = five_station([240.0, 120.0, 120.0, 120.0, 120.0]);
        assert_eq!(validate(&inst), Vec::<String>::new());
    }

    #[test]
    fn short_station_is_reported() {
        let inst = five_station([240.0, 90.0, 120.0, 120.0, 120.0]);
        let v = validate(&inst);
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(v[0].contains("stations[1].length") && v[0].contains("cycle time"));
    }

    #[test]
    fn zero_processing_time_is_reported() {
        let mut inst = five_station([240.0, 120.0, 120.0, 120.0, 120.0]);
        inst.vehicles[2].processing_times[3] = Time::ZERO;
        let v = validate(&inst);
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(v[0].contains("strictly positive"));
    }

    #[test]
    fn other_violations() {
        let mut inst = five_station([240.0, 120.0, 120.0, 120.0, 120.0]);
        inst.vehicles[1].failure_prob = 0.5;
        inst.vehicles[2].processing_times.pop();
        inst.vehicles[0].id = 9;
        let v = validate(&inst);
        assert_eq!(v.len(), 3, "{v:?}");
        inst.vehicles.truncate(1);
        assert!(validate(&inst).iter().any(|m| m.contains("at least two vehicles")));
    }

    #[test]
    fn beta_uses_minimum_processing_time() {
        let inst = fixtures::greedy_example();
        // station 0: (20 - 7) / 2, station 1: (10 - 7) / 3
        assert!((inst.beta(0) - 6.5).abs() < 1e-12);
        assert!((inst.beta(1) - 1.0).abs() < 1e-12);
    }
}
