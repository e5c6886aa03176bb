//! Second-stage LPs, the regularized dual subproblem and optimality cuts.

use crate::evaluator::{ScenarioTransform, Sequence};
use crate::instance::Instance;
use crate::lp::{solve_lp, Direction, LinearProgram, LpStatus, Sense};
use crate::scenario::Scenario;
use crate::time::SCALE;
use crate::{MmsError, Result};

/// First-stage decision `x_vt`, stored vehicle-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    n: usize,
    x: Vec<f64>,
}

impl Assignment {
    pub fn from_sequence(sequence: &Sequence) -> Self {
        let n = sequence.len();
        let mut x = vec![0.0; n * n];
        for (t, &v) in sequence.order().iter().enumerate() {
            x[v * n + t] = 1.0;
        }
        Assignment { n, x }
    }

    /// Every vehicle spread evenly over every position.
    pub fn uniform(n: usize) -> Self {
        Assignment {
            n,
            x: vec![1.0 / n as f64; n * n],
        }
    }

    /// Accepts a doubly-stochastic matrix within `1e-6`.
    pub fn from_matrix(n: usize, x: Vec<f64>) -> Result<Self> {
        if x.len() != n * n {
            return Err(MmsError::Dimension(format!("expected {} entries, got {}", n * n, x.len())));
        }
        let a = Assignment { n, x };
        for i in 0..n {
            let row: f64 = (0..n).map(|t| a.get(i, t)).sum();
            let col: f64 = (0..n).map(|v| a.get(v, i)).sum();
            if (row - 1.0).abs() > 1e-6 || (col - 1.0).abs() > 1e-6 {
                return Err(MmsError::InvalidArgument("assignment is not doubly stochastic".into()));
            }
        }
        if a.x.iter().any(|v| *v < -1e-9) {
            return Err(MmsError::InvalidArgument("assignment has negative entries".into()));
        }
        Ok(a)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, v: usize, t: usize) -> f64 {
        self.x[v * self.n + t]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.x
    }
}

/// Processing times per station and vehicle after the scenario transform, in
/// time units.
fn transformed_times(instance: &Instance, scenario: &Scenario, transform: ScenarioTransform) -> Result<Vec<Vec<f64>>> {
    let c = instance.cycle_time.as_f64();
    let failed = match transform {
        ScenarioTransform::StandardZero => 0.0,
        ScenarioTransform::ImprovedNeutral => c,
        ScenarioTransform::Removal => {
            return Err(MmsError::InvalidArgument(
                "the removal transform changes the horizon and has no fixed-horizon LP".into(),
            ))
        }
    };
    Ok((0..instance.n_stations())
        .map(|k| {
            (0..instance.n_vehicles())
                .map(|v| if scenario.exists(v) { instance.processing_time(k, v).as_f64() } else { failed })
                .collect()
        })
        .collect())
}

fn loads(times: &[f64], x: &Assignment) -> Vec<f64> {
    (0..x.n())
        .map(|t| (0..x.n()).map(|v| times[v] * x.get(v, t)).sum())
        .collect()
}

/// Builds the second-stage LP in time units.
///
/// Per station `k` the variables are `z_k0..z_kT` (start offsets, with the
/// first fixed at 0 and, when regenerative, the last fixed at 0) followed by
/// `w_k0..w_k(T-1)`. The standard variant adds the `β_k` rows that stop the
/// operator from drifting back over a zero-time position.
pub fn recourse_program(
    instance: &Instance,
    x: &Assignment,
    scenario: &Scenario,
    transform: ScenarioTransform,
    regenerative: bool,
) -> Result<LinearProgram> {
    let n = instance.n_vehicles();
    if x.n() != n || scenario.len() != n {
        return Err(MmsError::Dimension("assignment or scenario does not match the instance".into()));
    }
    let times = transformed_times(instance, scenario, transform)?;
    let c = instance.cycle_time.as_f64();
    let per_station = 2 * n + 1;
    let mut lp = LinearProgram::new(Direction::Minimize, per_station * instance.n_stations());
    for (k, station) in instance.stations.iter().enumerate() {
        let l = station.length.as_f64();
        let base = k * per_station;
        let z = |t: usize| base + t;
        let w = |t: usize| base + n + 1 + t;
        let b = loads(&times[k], x);
        lp.set_bounds(z(0), 0.0, 0.0);
        if regenerative {
            lp.set_bounds(z(n), 0.0, 0.0);
        }
        let beta = instance.beta(k);
        for t in 0..n {
            lp.objective[w(t)] = 1.0;
            lp.add_sparse_row(&[(z(t), 1.0), (w(t), -1.0), (z(t + 1), -1.0)], Sense::Le, c - b[t]);
            lp.add_sparse_row(&[(z(t), 1.0), (w(t), -1.0)], Sense::Le, l - b[t]);
            if transform == ScenarioTransform::StandardZero {
                if t + 1 < n {
                    lp.add_sparse_row(&[(z(t), 1.0), (z(t + 1), -1.0)], Sense::Le, beta * b[t]);
                } else if regenerative {
                    lp.add_sparse_row(&[(z(t), 1.0), (w(t), -1.0)], Sense::Le, beta * b[t]);
                }
            }
        }
    }
    Ok(lp)
}

/// Optimal second-stage overload in time units.
pub fn recourse_lp(
    instance: &Instance,
    x: &Assignment,
    scenario: &Scenario,
    transform: ScenarioTransform,
) -> Result<f64> {
    let lp = recourse_program(instance, x, scenario, transform, true)?;
    let solution = solve_lp(&lp)?;
    match solution.status {
        LpStatus::Optimal => Ok(solution.objective),
        other => Err(MmsError::Lp(format!("recourse problem ended with status {other:?}"))),
    }
}

/// Dual values of the improved subproblem, `[station][position]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualSolution {
    pub pi_sp: Vec<Vec<f64>>,
    pub pi_wo: Vec<Vec<f64>>,
}

impl DualSolution {
    /// Largest violation of the dual constraints.
    pub fn infeasibility(&self, regenerative: bool) -> f64 {
        let mut worst: f64 = 0.0;
        for (sp, wo) in self.pi_sp.iter().zip(&self.pi_wo) {
            let n = sp.len();
            for t in 0..n {
                worst = worst.max(-sp[t]).max(-wo[t]).max(sp[t] + wo[t] - 1.0);
                if t + 1 < n {
                    worst = worst.max(sp[t] - sp[t + 1] - wo[t + 1]);
                }
            }
            if !regenerative && n > 0 {
                worst = worst.max(sp[n - 1]);
            }
        }
        worst
    }
}

/// `θ_ω ≥ G·x + g`, an affine underestimator of one scenario's recourse cost
/// in time units.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimalityCut {
    /// Index of the scenario in the sample's unique list.
    pub scenario: usize,
    /// Vehicle-major coefficients of `x_vt`.
    pub coefficients: Vec<f64>,
    pub constant: f64,
}

impl OptimalityCut {
    pub fn value(&self, x: &Assignment) -> f64 {
        self.coefficients.iter().zip(x.as_slice()).map(|(a, b)| a * b).sum::<f64>() + self.constant
    }

    pub fn value_at(&self, sequence: &Sequence) -> f64 {
        let n = sequence.len();
        sequence
            .order()
            .iter()
            .enumerate()
            .map(|(t, &v)| self.coefficients[v * n + t])
            .sum::<f64>()
            + self.constant
    }
}

/// Solves the improved dual subproblem at `x_hat` and returns the duals and the cut.
///
/// Each station's dual is solved separately in ticks with `epsilon` (ticks)
/// added to every objective coefficient, which favours dual solutions with
/// more nonzero entries among the optimal ones. The cut itself is built from
/// the unperturbed data and is valid for every assignment.
pub fn solve_dsp(
    instance: &Instance,
    x_hat: &Assignment,
    scenario: &Scenario,
    epsilon: f64,
    regenerative: bool,
) -> Result<(DualSolution, OptimalityCut)> {
    let n = instance.n_vehicles();
    if x_hat.n() != n || scenario.len() != n {
        return Err(MmsError::Dimension("assignment or scenario does not match the instance".into()));
    }
    if !(epsilon >= 0.0) {
        return Err(MmsError::InvalidArgument(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    let times = transformed_times(instance, scenario, ScenarioTransform::ImprovedNeutral)?;
    let scale = SCALE as f64;
    let c = instance.cycle_time.as_f64();
    let mut duals = DualSolution {
        pi_sp: Vec::with_capacity(instance.n_stations()),
        pi_wo: Vec::with_capacity(instance.n_stations()),
    };
    let mut coefficients = vec![0.0; n * n];
    let mut constant = 0.0;
    for (k, station) in instance.stations.iter().enumerate() {
        let l = station.length.as_f64();
        let b = loads(&times[k], x_hat);
        // variables: π^sp_0..π^sp_(T-1), π^wo_0..π^wo_(T-1)
        let mut lp = LinearProgram::new(Direction::Maximize, 2 * n);
        for t in 0..n {
            lp.objective[t] = (b[t] - c) * scale + epsilon;
            lp.objective[n + t] = (b[t] - l) * scale + epsilon;
            lp.add_sparse_row(&[(t, 1.0), (n + t, 1.0)], Sense::Le, 1.0);
            if t + 1 < n {
                lp.add_sparse_row(&[(t, 1.0), (t + 1, -1.0), (n + t + 1, -1.0)], Sense::Le, 0.0);
            }
        }
        if !regenerative {
            lp.set_bounds(n - 1, 0.0, 0.0);
        }
        let solution = solve_lp(&lp)?;
        if solution.status != LpStatus::Optimal {
            return Err(MmsError::Lp(format!("dual subproblem ended with status {:?}", solution.status)));
        }
        let clean = |v: f64| v.clamp(0.0, 1.0);
        let sp: Vec<f64> = solution.x[..n].iter().map(|&v| clean(v)).collect();
        let wo: Vec<f64> = solution.x[n..].iter().map(|&v| clean(v)).collect();
        for t in 0..n {
            for v in 0..n {
                coefficients[v * n + t] += (sp[t] + wo[t]) * times[k][v];
            }
            constant -= sp[t] * c + wo[t] * l;
        }
        duals.pi_sp.push(sp);
        duals.pi_wo.push(wo);
    }
    Ok((
        duals,
        OptimalityCut {
            scenario: 0,
            coefficients,
            constant,
        },
    ))
}
