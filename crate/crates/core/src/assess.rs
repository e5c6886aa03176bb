//! Statistical quality assessment of a candidate sequence.
//!
//! The multiple replication procedure draws `M` independent samples, solves
//! the sample problem on each and compares the sample optimum with the
//! candidate's cost on the same sample. The gaps give a one-sided confidence
//! bound on the candidate's optimality gap.

use crate::evaluator::{evaluate_expected, Sequence};
use crate::instance::Instance;
use crate::rng::derive_seed;
use crate::scenario::sample;
use crate::solver::{SaaSolver, SolveOptions};
use crate::{MmsError, Result};
use rayon::prelude::*;
use std::fmt::Write as _;

const MRP_TAG: u64 = 0x3e9;
const SAA_TAG: u64 = 0x5aa;
/// Below this mean sample optimum the bound is reported unnormalized.
pub const NORMALIZATION_FLOOR: f64 = 1e-9;

fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_1,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..100_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function I_x(a, b).
fn incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Upper `alpha` quantile of Student's t distribution with `dof` degrees of
/// freedom, i.e. the `t` with `P(T > t) = alpha`.
pub fn t_quantile(alpha: f64, dof: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) || !(dof >= 1.0) || !dof.is_finite() {
        return Err(MmsError::InvalidArgument(format!(
            "t quantile needs 0 < alpha < 1 and dof >= 1, got alpha={alpha}, dof={dof}"
        )));
    }
    if alpha == 0.5 {
        return Ok(0.0);
    }
    if alpha > 0.5 {
        return t_quantile(1.0 - alpha, dof).map(|t| -t);
    }
    // P(|T| > t) = I_x(dof/2, 1/2) with x = dof / (dof + t^2), increasing in x.
    let target = 2.0 * alpha;
    let (a, b) = (dof / 2.0, 0.5);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if incomplete_beta(a, b, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    Ok((dof * (1.0 - x) / x).sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Replication {
    pub sample_seed: u64,
    /// Sample optimum (or the solver's best) on the replication's sample.
    pub z_opt: f64,
    /// Cost of the candidate on the same sample.
    pub z_candidate: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MRPReport {
    pub replications: Vec<Replication>,
    pub alpha: f64,
    pub mean_gap: f64,
    pub gap_variance: f64,
    pub mean_z: f64,
    pub t_quantile: f64,
    /// Confidence bound on the gap, relative to `mean_z` unless `normalized` is false.
    pub bound: f64,
    pub normalized: bool,
    /// Error message of the replication that stopped the procedure early.
    pub aborted: Option<String>,
}

impl MRPReport {
    fn assemble(replications: Vec<Replication>, alpha: f64, aborted: Option<String>) -> Result<Self> {
        let m = replications.len();
        let mut report = MRPReport {
            replications,
            alpha,
            mean_gap: f64::NAN,
            gap_variance: f64::NAN,
            mean_z: f64::NAN,
            t_quantile: f64::NAN,
            bound: f64::NAN,
            normalized: false,
            aborted,
        };
        if m < 2 {
            return Ok(report);
        }
        let mf = m as f64;
        let gaps = report.replications.iter().map(|r| r.gap);
        report.mean_gap = gaps.clone().sum::<f64>() / mf;
        report.gap_variance = gaps.map(|g| (g - report.mean_gap).powi(2)).sum::<f64>() / (mf - 1.0);
        report.mean_z = report.replications.iter().map(|r| r.z_opt).sum::<f64>() / mf;
        report.t_quantile = t_quantile(alpha, mf - 1.0)?;
        let raw = report.mean_gap + report.t_quantile * report.gap_variance.sqrt() / mf.sqrt();
        report.normalized = report.mean_z >= NORMALIZATION_FLOOR;
        report.bound = if report.normalized { raw / report.mean_z } else { raw };
        Ok(report)
    }

    /// One row per replication followed by an aggregate row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,sample_seed,z_opt,z_candidate,gap,gap_variance,t_quantile,bound,normalized\n");
        for (m, r) in self.replications.iter().enumerate() {
            let _ = writeln!(
                out,
                "{m},{},{:.6},{:.6},{:.6},,,,",
                r.sample_seed, r.z_opt, r.z_candidate, r.gap
            );
        }
        let mean_candidate = if self.replications.is_empty() {
            f64::NAN
        } else {
            self.replications.iter().map(|r| r.z_candidate).sum::<f64>() / self.replications.len() as f64
        };
        let _ = writeln!(
            out,
            "aggregate,,{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
            self.mean_z, mean_candidate, self.mean_gap, self.gap_variance, self.t_quantile, self.bound, self.normalized
        );
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MrpConfig {
    /// Number of replications.
    pub m: usize,
    /// Scenarios per replication.
    pub n: usize,
    pub alpha: f64,
    pub seed: u64,
    pub forbid_low_risk_failures: bool,
    /// Passed to the solver; its seed is replaced per replication.
    pub solve: SolveOptions,
}

impl MrpConfig {
    pub fn new(m: usize, n: usize, alpha: f64, seed: u64) -> Self {
        MrpConfig {
            m,
            n,
            alpha,
            seed,
            forbid_low_risk_failures: false,
            solve: SolveOptions::default(),
        }
    }
}

/// Seed of the sample of replication `m`.
pub fn replication_seed(seed: u64, m: usize) -> u64 {
    derive_seed(seed, &[MRP_TAG, m as u64])
}

fn replicate(
    instance: &Instance,
    candidate: &Sequence,
    config: &MrpConfig,
    solver: &dyn SaaSolver,
    m: usize,
) -> Result<Replication> {
    let sample_seed = replication_seed(config.seed, m);
    let s = sample(instance, config.n, sample_seed, config.forbid_low_risk_failures)?;
    let options = SolveOptions { seed: sample_seed, ..config.solve.clone() };
    let report = solver.solve(instance, &s, &options)?;
    let z_candidate = evaluate_expected(instance, candidate, &s)?;
    Ok(Replication {
        sample_seed,
        z_opt: report.objective,
        z_candidate,
        gap: z_candidate - report.objective,
    })
}

/// Estimates an upper confidence bound on the optimality gap of `candidate`.
///
/// A failing replication stops the procedure; the report then holds the
/// replications before it and `aborted` carries the error.
pub fn mrp(instance: &Instance, candidate: &Sequence, config: &MrpConfig, solver: &dyn SaaSolver) -> Result<MRPReport> {
    if config.m < 2 || config.n == 0 {
        return Err(MmsError::InvalidArgument(format!(
            "replication procedure needs M >= 2 and N >= 1, got M={}, N={}",
            config.m, config.n
        )));
    }
    candidate.check(instance)?;
    // Validates alpha before any solver runs.
    t_quantile(config.alpha, (config.m - 1) as f64)?;
    let results: Vec<Result<Replication>> = (0..config.m)
        .into_par_iter()
        .map(|m| replicate(instance, candidate, config, solver, m))
        .collect();
    let mut replications = Vec::with_capacity(config.m);
    let mut aborted = None;
    for r in results {
        match r {
            Ok(rep) => replications.push(rep),
            Err(e) => {
                log::error!("replication {} failed: {e}", replications.len());
                aborted = Some(e.to_string());
                break;
            }
        }
    }
    MRPReport::assemble(replications, config.alpha, aborted)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SaaStep {
    pub n: usize,
    pub sample_seed: u64,
    pub candidate: Sequence,
    /// Candidate's cost on its own sample.
    pub objective: f64,
    pub report: MRPReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SaaOutcome {
    pub sequence: Sequence,
    pub bound: f64,
    /// Whether some sample size met the requested bound.
    pub met: bool,
    pub trace: Vec<SaaStep>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SaaConfig {
    /// Increasing sample sizes for the candidate problems.
    pub n_list: Vec<usize>,
    pub epsilon: f64,
    /// Replication settings; `mrp.seed` is split per sample size.
    pub mrp: MrpConfig,
}

/// Solves sample problems of growing size until the candidate's gap bound is
/// at most `epsilon`.
pub fn mrp_integrated_saa(instance: &Instance, config: &SaaConfig, solver: &dyn SaaSolver) -> Result<SaaOutcome> {
    let n_list = &config.n_list;
    if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) || n_list[0] == 0 {
        return Err(MmsError::InvalidArgument(format!(
            "sample sizes must be positive and strictly increasing, got {n_list:?}"
        )));
    }
    let mut trace = Vec::with_capacity(n_list.len());
    for (i, &n) in n_list.iter().enumerate() {
        let sample_seed = derive_seed(config.mrp.seed, &[SAA_TAG, i as u64, 0]);
        let s = sample(instance, n, sample_seed, config.mrp.forbid_low_risk_failures)?;
        let options = SolveOptions { seed: sample_seed, ..config.mrp.solve.clone() };
        let solved = solver.solve(instance, &s, &options)?;
        let mrp_config = MrpConfig {
            seed: derive_seed(config.mrp.seed, &[SAA_TAG, i as u64, 1]),
            ..config.mrp.clone()
        };
        let report = mrp(instance, &solved.sequence, &mrp_config, solver)?;
        if let Some(e) = &report.aborted {
            return Err(MmsError::Contract(format!("replication procedure aborted: {e}")));
        }
        log::info!("SAA N={n}: objective {:.4}, bound {:.6}", solved.objective, report.bound);
        let met = report.bound <= config.epsilon;
        let bound = report.bound;
        trace.push(SaaStep {
            n,
            sample_seed,
            candidate: solved.sequence.clone(),
            objective: solved.objective,
            report,
        });
        if met || i + 1 == n_list.len() {
            return Ok(SaaOutcome {
                sequence: solved.sequence,
                bound,
                met,
                trace,
            });
        }
    }
    unreachable!("the last sample size always returns")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::fixtures::random_instance;
    use crate::solver::{EnumerationSolver, GreedySolver, SolverRegistry};
    use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

    #[test]
    fn t_quantile_against_statrs() {
        for &dof in &[1.0, 2.0, 5.0, 9.0, 29.0, 100.0, 1000.0] {
            let dist = StudentsT::new(0.0, 1.0, dof).unwrap();
            for &alpha in &[0.001, 0.01, 0.025, 0.05, 0.1, 0.3, 0.7, 0.95] {
                let ours = t_quantile(alpha, dof).unwrap();
                let oracle = dist.inverse_cdf(1.0 - alpha);
                assert!((ours - oracle).abs() < 1e-6, "alpha {alpha} dof {dof}: {ours} vs {oracle}");
            }
        }
    }

    #[test]
    fn t_quantile_reference_values() {
        assert!((t_quantile(0.05, 29.0).unwrap() - 1.699127).abs() < 1e-5);
        assert_eq!(t_quantile(0.5, 7.0).unwrap(), 0.0);
        let normal = Normal::new(0.0, 1.0).unwrap().inverse_cdf(0.95);
        assert!((normal - 1.644854).abs() < 1e-6);
        assert!((t_quantile(0.05, 1e6).unwrap() - normal).abs() < 1e-4);
        assert!(t_quantile(0.0, 3.0).is_err());
        assert!(t_quantile(0.05, 0.5).is_err());
    }

    #[test]
    fn ln_gamma_matches_factorials() {
        let mut fact = 1.0f64;
        for k in 1..20 {
            fact *= k as f64;
            assert!((ln_gamma(k as f64 + 1.0) - fact.ln()).abs() < 1e-10);
        }
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-12);
    }

    #[test]
    fn exact_mrp_has_nonnegative_gaps() {
        let inst = random_instance(6, 21);
        let candidate = crate::greedy::construct(&inst, 0).0;
        let report = mrp(&inst, &candidate, &MrpConfig::new(5, 40, 0.05, 9), &EnumerationSolver).unwrap();
        assert_eq!(report.replications.len(), 5);
        assert!(report.aborted.is_none());
        for r in &report.replications {
            assert!(r.gap >= -1e-6);
            assert!((r.gap - (r.z_candidate - r.z_opt)).abs() < 1e-12);
        }
        let again = mrp(&inst, &candidate, &MrpConfig::new(5, 40, 0.05, 9), &EnumerationSolver).unwrap();
        assert_eq!(report, again);
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 7);
        assert!(lines[6].starts_with("aggregate,"));
    }

    #[test]
    fn replication_is_reproducible_in_isolation() {
        let inst = random_instance(6, 22);
        let candidate = Sequence::identity(6);
        let config = MrpConfig::new(4, 30, 0.05, 5);
        let report = mrp(&inst, &candidate, &config, &EnumerationSolver).unwrap();
        let third = replicate(&inst, &candidate, &config, &EnumerationSolver, 2).unwrap();
        assert_eq!(report.replications[2], third);
    }

    #[test]
    fn greedy_against_itself_is_degenerate() {
        // The greedy order does not depend on the sample, so the candidate
        // equals every replication's answer.
        let inst = random_instance(8, 23);
        let candidate = crate::greedy::construct(&inst, 0).0;
        let mut config = MrpConfig::new(4, 30, 0.05, 1);
        config.solve.seed = 0;
        struct Fixed;
        impl SaaSolver for Fixed {
            fn name(&self) -> &'static str {
                "fixed"
            }
            fn is_exact(&self) -> bool {
                false
            }
            fn solve(
                &self,
                instance: &Instance,
                sample: &crate::Sample,
                options: &SolveOptions,
            ) -> Result<crate::solver::SolveReport> {
                GreedySolver.solve(instance, sample, &SolveOptions { seed: 0, ..options.clone() })
            }
        }
        let report = mrp(&inst, &candidate, &config, &Fixed).unwrap();
        assert_eq!(report.mean_gap, 0.0);
        assert_eq!(report.gap_variance, 0.0);
        assert_eq!(report.bound, 0.0);
    }

    #[test]
    fn infinite_epsilon_stops_at_first_size() {
        let inst = random_instance(6, 24);
        let registry = SolverRegistry::default();
        let config = SaaConfig {
            n_list: vec![20, 40],
            epsilon: f64::INFINITY,
            mrp: MrpConfig::new(3, 20, 0.05, 2),
        };
        let out = mrp_integrated_saa(&inst, &config, registry.get("enum").unwrap()).unwrap();
        assert!(out.met);
        assert_eq!(out.trace.len(), 1);
        let none = SaaConfig { epsilon: -1.0, ..config };
        let out = mrp_integrated_saa(&inst, &none, registry.get("enum").unwrap()).unwrap();
        assert!(!out.met);
        assert_eq!(out.trace.len(), 2);
        assert_eq!(out.sequence, out.trace[1].candidate);
    }

    #[test]
    fn rejects_bad_arguments() {
        let inst = random_instance(6, 25);
        let c = Sequence::identity(6);
        assert!(mrp(&inst, &c, &MrpConfig::new(1, 10, 0.05, 0), &EnumerationSolver).is_err());
        assert!(mrp(&inst, &c, &MrpConfig::new(3, 10, 1.5, 0), &EnumerationSolver).is_err());
        let config = SaaConfig { n_list: vec![20, 10], epsilon: 0.1, mrp: MrpConfig::new(3, 10, 0.05, 0) };
        assert!(mrp_integrated_saa(&inst, &config, &EnumerationSolver).is_err());
    }
}
