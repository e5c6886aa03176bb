use crate::{
    AssessArgs, BudgetArgs, CliError, CompareArgs, EvaluateArgs, GenerateArgs, RunRecord, SaaArgs, SampleArgs,
    SampleCmdArgs, SolutionFile, SolveArgs,
};
use mms_core::assess::{mrp, mrp_integrated_saa, MRPReport, MrpConfig, SaaConfig};
use mms_core::evaluator::{evaluate, evaluate_expected, trace_csv};
use mms_core::instance::{self, generate, GeneratorConfig, InstanceClass};
use mms_core::rng::derive_seed;
use mms_core::scenario::sample;
use mms_core::solver::ReportStatus;
use mms_core::tabu::history_csv;
use mms_core::{Instance, Sample, Scenario, SolveOptions, SolverRegistry};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

/// Local-search iterations under `--deterministic` when `--iters` is absent.
pub const DETERMINISTIC_ITERATIONS: u64 = 20_000;
const COMPARE_TAG: u64 = 0xc0;

fn instance_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn load_instance(path: &Path) -> Result<Instance, CliError> {
    Ok(instance::load(path)?)
}

fn load_sample(instance: &Instance, args: &SampleArgs) -> Result<Sample, CliError> {
    let s = match &args.sample {
        Some(path) => Sample::from_text(&std::fs::read_to_string(path)?)?,
        None => sample(instance, args.sample_size, args.sample_seed, args.forbid_low_risk)?,
    };
    s.check(instance)?;
    Ok(s)
}

fn solve_options(budget: &BudgetArgs, seed: u64) -> Result<SolveOptions, CliError> {
    let time_limit = match budget.time_limit {
        _ if budget.deterministic => None,
        Some(t) if !(t > 0.0) || !t.is_finite() => {
            return Err(CliError::Usage(format!("--time-limit must be positive, got {t}")));
        }
        Some(t) => Some(Duration::from_secs_f64(t)),
        None => None,
    };
    let iterations = match budget.iters {
        Some(k) => Some(k),
        None if budget.deterministic => Some(DETERMINISTIC_ITERATIONS),
        None => None,
    };
    Ok(SolveOptions {
        seed,
        iterations,
        time_limit,
        start: None,
    })
}

fn budget_params(budget: &BudgetArgs, options: &SolveOptions) -> String {
    format!(
        "iters={};time_limit={};deterministic={}",
        options.iterations.map(|k| k.to_string()).unwrap_or_default(),
        options.time_limit.map(|t| t.as_secs_f64().to_string()).unwrap_or_default(),
        budget.deterministic
    )
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<Vec<PathBuf>, CliError> {
    let class: InstanceClass = args.class.parse().map_err(CliError::Usage)?;
    let sizes = if args.sizes.is_empty() { class.sizes().to_vec() } else { args.sizes.clone() };
    let mut written = Vec::new();
    if args.count == 0 {
        return Ok(written);
    }
    std::fs::create_dir_all(&args.out)?;
    for &size in &sizes {
        for i in 0..args.count {
            let mut config = GeneratorConfig::for_class(class, size, derive_seed(args.seed, &[size as u64, i as u64]));
            match args.high_risk_fraction[..] {
                [] => {}
                [lo, hi] => config.high_risk_fraction_range = (lo, hi),
                _ => return Err(CliError::Usage("--high-risk-fraction takes exactly `LO,HI`".into())),
            }
            let inst = generate(&config)?;
            let path = args.out.join(format!("{}_n{size}_{i:02}.toml", class.name()));
            instance::save(&inst, &path)?;
            written.push(path);
        }
    }
    Ok(written)
}

pub fn cmd_sample(args: &SampleCmdArgs) -> Result<String, CliError> {
    let inst = load_instance(&args.instance)?;
    Ok(load_sample(&inst, &args.sample)?.to_text())
}

/// Returns the run record and whether an exact solver hit its time limit.
pub fn cmd_solve(args: &SolveArgs) -> Result<(RunRecord, bool), CliError> {
    let inst = load_instance(&args.instance)?;
    let s = load_sample(&inst, &args.sample)?;
    let registry = SolverRegistry::default();
    let solver = registry.get(&args.method)?;
    let options = solve_options(&args.budget, args.budget.seed)?;
    let started = Instant::now();
    let report = solver.solve(&inst, &s, &options)?;
    let elapsed = started.elapsed().as_secs_f64();
    let id = instance_id(&args.instance);

    if let Some(path) = &args.out {
        SolutionFile { instance: id.clone(), sample_seed: s.seed(), sequence: report.sequence.clone() }.save(path)?;
    }
    if let Some(path) = &args.history {
        std::fs::write(path, history_csv(&report.history, args.budget.deterministic))?;
    }
    if let Some(path) = &args.log {
        std::fs::write(path, &report.log)?;
    }
    let record = RunRecord {
        command: "solve".into(),
        instance: id,
        method: args.method.clone(),
        seed: args.budget.seed,
        sample_size: s.n(),
        sample_seed: s.seed(),
        params: budget_params(&args.budget, &options),
        objective: report.objective,
        lower_bound: report.lower_bound,
        gap: report.gap(),
        status: report.status.name().into(),
        wall_time: if args.budget.deterministic { 0.0 } else { elapsed },
        iterations: report.iterations,
    };
    if let Some(path) = &args.record {
        record.append(path)?;
    }
    Ok((record, report.status == ReportStatus::TimeLimit))
}

fn load_solution(path: &Path, instance: &Instance, instance_path: &Path) -> Result<SolutionFile, CliError> {
    let solution = SolutionFile::load(path)?;
    solution.sequence.check(instance)?;
    let id = instance_id(instance_path);
    if solution.instance != id {
        log::warn!("solution was computed for `{}`, evaluating on `{id}`", solution.instance);
    }
    Ok(solution)
}

/// Expected overload of a stored solution under a sample.
pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<f64, CliError> {
    let inst = load_instance(&args.instance)?;
    let solution = load_solution(&args.solution, &inst, &args.instance)?;
    let s = load_sample(&inst, &args.sample)?;
    if let Some(path) = &args.trace {
        let state = evaluate(&inst, &solution.sequence, &Scenario::all_exist(inst.n_vehicles()), true);
        std::fs::write(path, trace_csv(&state, &solution.sequence))?;
    }
    Ok(evaluate_expected(&inst, &solution.sequence, &s)?)
}

pub fn cmd_assess(args: &AssessArgs) -> Result<MRPReport, CliError> {
    let inst = load_instance(&args.instance)?;
    let solution = load_solution(&args.solution, &inst, &args.instance)?;
    let registry = SolverRegistry::default();
    let solver = registry.get(&args.method)?;
    let config = MrpConfig {
        forbid_low_risk_failures: args.forbid_low_risk,
        solve: solve_options(&args.budget, args.budget.seed)?,
        ..MrpConfig::new(args.replications, args.sample_size, args.alpha, args.budget.seed)
    };
    Ok(mrp(&inst, &solution.sequence, &config, solver)?)
}

/// Trace CSV of the growing-sample procedure, one row per sample size tried.
pub fn cmd_saa(args: &SaaArgs) -> Result<String, CliError> {
    let inst = load_instance(&args.instance)?;
    let registry = SolverRegistry::default();
    let solver = registry.get(&args.method)?;
    let config = SaaConfig {
        n_list: args.sizes.clone(),
        epsilon: args.epsilon,
        mrp: MrpConfig {
            forbid_low_risk_failures: args.forbid_low_risk,
            solve: solve_options(&args.budget, args.budget.seed)?,
            ..MrpConfig::new(args.replications, args.mrp_size, args.alpha, args.budget.seed)
        },
    };
    let outcome = mrp_integrated_saa(&inst, &config, solver)?;
    let mut out = String::from("n,sample_seed,objective,mean_z,mean_gap,gap_variance,t_quantile,bound,normalized,met\n");
    let last = outcome.trace.len() - 1;
    for (i, step) in outcome.trace.iter().enumerate() {
        let r = &step.report;
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{}",
            step.n,
            step.sample_seed,
            step.objective,
            r.mean_z,
            r.mean_gap,
            r.gap_variance,
            r.t_quantile,
            r.bound,
            r.normalized,
            i == last && outcome.met
        );
    }
    if let Some(path) = &args.solution_out {
        SolutionFile {
            instance: instance_id(&args.instance),
            sample_seed: outcome.trace[last].sample_seed,
            sequence: outcome.sequence,
        }
        .save(path)?;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareRow {
    pub instance: String,
    pub seed: u64,
    pub method: String,
    /// Out-of-sample expected overload of the failure-free solution.
    pub one_scenario: f64,
    /// Out-of-sample expected overload of the sample solution.
    pub saa: f64,
    /// Reduction relative to the failure-free solution, in percent.
    pub improvement_pct: f64,
}

impl CompareRow {
    pub fn to_csv(rows: &[CompareRow]) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["instance", "seed", "method", "one_scenario", "saa", "improvement_pct"])?;
        for r in rows {
            w.write_record([
                r.instance.clone(),
                r.seed.to_string(),
                r.method.clone(),
                format!("{:.6}", r.one_scenario),
                format!("{:.6}", r.saa),
                format!("{:.4}", r.improvement_pct),
            ])?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"))
    }
}

/// Solves the failure-free and the sample problem with the same method and
/// budget, then evaluates both sequences on a common out-of-sample set.
pub fn cmd_compare(args: &CompareArgs) -> Result<Vec<CompareRow>, CliError> {
    let registry = SolverRegistry::default();
    let solver = registry.get(&args.method)?;
    let mut rows = Vec::new();
    for path in &args.instance {
        let inst = load_instance(path)?;
        for &seed in &args.seeds {
            let options = solve_options(&args.budget, seed)?;
            let nominal = solver.solve(&inst, &Sample::all_exist(inst.n_vehicles()), &options)?;
            let training = sample(
                &inst,
                args.sample_size,
                derive_seed(seed, &[COMPARE_TAG, 0]),
                args.forbid_low_risk,
            )?;
            let robust = solver.solve(&inst, &training, &options)?;
            let held_out = sample(&inst, args.eval_size, derive_seed(seed, &[COMPARE_TAG, 1]), args.forbid_low_risk)?;
            let one_scenario = evaluate_expected(&inst, &nominal.sequence, &held_out)?;
            let saa = evaluate_expected(&inst, &robust.sequence, &held_out)?;
            let improvement_pct = if one_scenario > 0.0 {
                (one_scenario - saa) / one_scenario * 100.0
            } else {
                0.0
            };
            log::info!("{} seed {seed}: one-scenario {one_scenario:.4}, sample {saa:.4}", path.display());
            rows.push(CompareRow {
                instance: instance_id(path),
                seed,
                method: args.method.clone(),
                one_scenario,
                saa,
                improvement_pct,
            });
        }
    }
    Ok(rows)
}
