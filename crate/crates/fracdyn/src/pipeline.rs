//! Experiment pipelines behind the subcommands.

use std::path::{Path, PathBuf};

use fracdyn_core::basis::BasisSpec;
use fracdyn_core::harness::{
    add_noise_dataset, compare_responses, field_error_surface, zero_inputs, ComparisonReport, ErrorReport, NoiseSpec,
};
use fracdyn_core::learn::{
    estimate_order, generate_channel_datasets, integer_order_baseline, learn_from_datasets, ExperimentDataset,
    ExperimentPlan, InputLaw, LearnedModel, OrderEstimate,
};
use fracdyn_core::simulate::{simulate, Trajectory};
use fracdyn_core::systems::Benchmark;
use fracdyn_core::{ControlAffineSystem, State};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Resolved;
use crate::error::{CliError, Result};
use crate::io::{self, write_json};
use crate::model::write_model;

/// Input sequence for `simulate`: zero, or uniform draws from the plan's law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum InputMode {
    Zero,
    Random,
}

pub fn input_sequence(r: &Resolved, mode: InputMode) -> Vec<State> {
    let m = r.system.input_dim();
    match mode {
        InputMode::Zero => zero_inputs(m, r.horizon),
        InputMode::Random => {
            use rand::Rng;
            let mut rng = fracdyn_core::rng::stream(r.plan.seed, u64::MAX);
            let (lo, hi) = (r.plan.input.low, r.plan.input.high);
            (0..r.horizon)
                .map(|_| (0..m).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect())
                .collect()
        }
    }
}

pub fn run_simulate(r: &Resolved, mode: InputMode) -> Result<Trajectory> {
    let inputs = input_sequence(r, mode);
    let traj = simulate(&r.system, &r.x0, &inputs, r.h)?;
    io::write_trajectory(&r.out, "trajectory", &traj)?;
    Ok(traj)
}

/// Clean datasets and, if noise is configured, their noisy copies.
pub struct Datasets {
    pub clean: Vec<ExperimentDataset>,
    pub noisy: Option<Vec<ExperimentDataset>>,
}

impl Datasets {
    /// What the learner sees.
    pub fn observed(&self) -> &[ExperimentDataset] {
        self.noisy.as_deref().unwrap_or(&self.clean)
    }
}

pub fn make_datasets(system: &ControlAffineSystem, plan: &ExperimentPlan, h: f64, noise: Option<NoiseSpec>) -> Result<Datasets> {
    let clean = generate_channel_datasets(system, plan, h)?;
    let noisy = noise.map(|spec| {
        clean
            .iter()
            .map(|ds| {
                // one stream family per channel
                let per_channel = NoiseSpec {
                    seed: spec.seed.wrapping_add(ds.active_channel as u64),
                    ..spec
                };
                add_noise_dataset(ds, &per_channel)
            })
            .collect()
    });
    Ok(Datasets { clean, noisy })
}

pub fn run_generate(r: &Resolved) -> Result<Datasets> {
    let ds = make_datasets(&r.system, &r.plan, r.h, r.noise)?;
    io::write_channel_datasets(&r.out.join("dataset"), ds.observed(), r.noise)?;
    Ok(ds)
}

fn observed_datasets(r: &Resolved, dataset_dir: Option<&Path>) -> Result<Vec<ExperimentDataset>> {
    match dataset_dir {
        Some(dir) => io::read_channel_datasets(dir),
        None => Ok(make_datasets(&r.system, &r.plan, r.h, r.noise)?.observed().to_vec()),
    }
}

pub struct LearnOutcome {
    pub model: LearnedModel,
    pub errors: ErrorReport,
}

pub fn run_learn(r: &Resolved, dataset_dir: Option<&Path>) -> Result<LearnOutcome> {
    let datasets = observed_datasets(r, dataset_dir)?;
    let model = learn_from_datasets(&datasets, &r.basis)?;
    let errors = field_error_surface(&r.system, &model, r.grid_density)?;
    write_model(&r.out.join("model.json"), &model)?;
    io::write_error_report(&r.out, "error_surface", &errors)?;
    Ok(LearnOutcome { model, errors })
}

pub fn run_estimate_order(r: &Resolved, dataset_dir: Option<&Path>) -> Result<OrderEstimate> {
    let datasets = observed_datasets(r, dataset_dir)?;
    let est = estimate_order(&datasets[0])?;
    write_json(&r.out.join("order.json"), &est)?;
    Ok(est)
}

pub struct CompareOutcome {
    pub fractional: LearnedModel,
    pub integer: LearnedModel,
    pub report: ComparisonReport,
}

/// Fits the fractional and the integer-order model on one set of datasets
/// and compares their responses against the truth.
pub fn compare_on(
    truth: &ControlAffineSystem,
    datasets: &[ExperimentDataset],
    basis: &BasisSpec,
    x0: &[f64],
    inputs: &[State],
    h: f64,
) -> Result<CompareOutcome> {
    let fractional = learn_from_datasets(datasets, basis)?;
    let integer = integer_order_baseline(datasets, basis)?;
    let report = compare_responses(truth, &fractional.to_system()?, &integer.to_system()?, x0, inputs, h)?;
    Ok(CompareOutcome {
        fractional,
        integer,
        report,
    })
}

fn write_compare(dir: &Path, c: &CompareOutcome) -> Result<()> {
    write_model(&dir.join("model_fractional.json"), &c.fractional)?;
    write_model(&dir.join("model_integer.json"), &c.integer)?;
    io::write_comparison(dir, "comparison", &c.report)
}

pub fn run_compare(r: &Resolved) -> Result<CompareOutcome> {
    let datasets = make_datasets(&r.system, &r.plan, r.h, r.noise)?;
    let inputs = vec![vec![r.compare_input; r.system.input_dim()]; r.compare_horizon];
    let c = compare_on(&r.system, datasets.observed(), &r.basis, &r.compare_x0, &inputs, r.h)?;
    write_compare(&r.out, &c)?;
    Ok(c)
}

// ---------------------------------------------------------------------------
// Reproduction suite

/// Orders at which each benchmark's fractional-vs-integer comparison runs.
pub fn comparison_orders(b: Benchmark) -> &'static [f64] {
    match b {
        Benchmark::VanDerPol => &[0.9, 0.85],
        Benchmark::LotkaVolterra => &[0.98, 0.96],
        Benchmark::Logistic => &[0.6],
        Benchmark::UltraCapacitor => &[0.2],
    }
}

pub const COMPARISON_M: usize = 100;
pub const COMPARISON_N: usize = 20;
pub const NOISY_M: usize = 100;
pub const NOISY_N: usize = 20;

pub fn benchmark_h(b: Benchmark) -> f64 {
    match b.build_default().system.time_kind {
        fracdyn_core::TimeKind::Continuous => crate::config::DEFAULT_H,
        fracdyn_core::TimeKind::Discrete => 1.0,
    }
}

pub fn noiseless_plan(b: Benchmark, seed: u64) -> Result<ExperimentPlan> {
    let (m, n) = if b == Benchmark::Logistic { (200, 20) } else { (50, 10) };
    Ok(ExperimentPlan::new(m, n, InputLaw::symmetric(b.default_input_amplitude()), seed)?)
}

pub fn sized_plan(b: Benchmark, m: usize, n: usize, seed: u64) -> Result<ExperimentPlan> {
    Ok(ExperimentPlan::new(m, n, InputLaw::symmetric(b.default_input_amplitude()), seed)?)
}

fn grid_density(b: Benchmark) -> usize {
    if b.build_default().system.state_dim() == 1 {
        801
    } else {
        41
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseSummary {
    pub benchmark: String,
    pub case: String,
    pub alpha: f64,
    pub alpha_hat: Vec<f64>,
    pub alpha_raw: Vec<f64>,
    pub drift_max_abs_error: f64,
    pub control_max_abs_error: f64,
    pub baseline_drift_max_abs_error: f64,
    pub baseline_control_max_abs_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonSummaryRow {
    pub benchmark: String,
    pub alpha: f64,
    pub max_dev_fractional: f64,
    pub max_dev_integer: f64,
    pub diverged_runs: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub requirement: String,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchSummary {
    pub seed: u64,
    pub cases: Vec<CaseSummary>,
    pub comparisons: Vec<ComparisonSummaryRow>,
    pub checks: Vec<Check>,
}

impl BenchSummary {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn learn_case(b: Benchmark, case: &str, plan: &ExperimentPlan, noise: Option<NoiseSpec>, dir: &Path) -> Result<CaseSummary> {
    let spec = b.build_default();
    let sys = &spec.system;
    let h = benchmark_h(b);
    let basis = BasisSpec::legendre(b.default_basis_len(), sys.domain.clone())?;
    let ds = make_datasets(sys, plan, h, noise)?;
    io::write_channel_datasets(&dir.join("dataset"), ds.observed(), noise)?;
    let model = learn_from_datasets(ds.observed(), &basis)?;
    let baseline = integer_order_baseline(ds.observed(), &basis)?;
    let density = grid_density(b);
    let err = field_error_surface(sys, &model, density)?;
    let berr = field_error_surface(sys, &baseline, density)?;
    write_model(&dir.join("model.json"), &model)?;
    write_model(&dir.join("model_integer.json"), &baseline)?;
    io::write_error_report(dir, "error_surface", &err)?;
    io::write_error_report(dir, "error_surface_integer", &berr)?;
    Ok(CaseSummary {
        benchmark: b.name().into(),
        case: case.into(),
        alpha: b.default_alpha(),
        alpha_hat: model.alpha_hat.as_slice().to_vec(),
        alpha_raw: model.order.as_ref().map(|o| o.raw.clone()).unwrap_or_default(),
        drift_max_abs_error: err.drift.max_abs_error,
        control_max_abs_error: err.control.max_abs_error,
        baseline_drift_max_abs_error: berr.drift.max_abs_error,
        baseline_control_max_abs_error: berr.control.max_abs_error,
    })
}

/// The fractional-vs-integer comparison at one order.
pub fn comparison_case(b: Benchmark, alpha: f64, seed: u64) -> Result<CompareOutcome> {
    let sys = b.build(alpha)?.system;
    let h = benchmark_h(b);
    let basis = BasisSpec::legendre(b.default_basis_len(), sys.domain.clone())?;
    let plan = sized_plan(b, COMPARISON_M, COMPARISON_N, seed)?;
    let ds = generate_channel_datasets(&sys, &plan, h)?;
    let inputs = zero_inputs(sys.input_dim(), crate::config::DEFAULT_HORIZON);
    compare_on(&sys, &ds, &basis, &b.default_comparison_x0(), &inputs, h)
}

pub fn comparison_dir(out: &Path, b: Benchmark, alpha: f64) -> PathBuf {
    out.join("comparisons").join(format!("{}-alpha-{alpha}", b.name()))
}

/// Every comparison of the suite, written under `out/comparisons`.
pub fn run_comparison_suite(out: &Path, seed: u64) -> Result<Vec<ComparisonSummaryRow>> {
    let jobs: Vec<(Benchmark, f64)> = Benchmark::ALL
        .iter()
        .flat_map(|&b| comparison_orders(b).iter().map(move |&a| (b, a)))
        .collect();
    jobs.par_iter()
        .map(|&(b, a)| {
            let c = comparison_case(b, a, seed)?;
            write_compare(&comparison_dir(out, b, a), &c)?;
            Ok(ComparisonSummaryRow {
                benchmark: b.name().into(),
                alpha: a,
                max_dev_fractional: c.report.max_dev_fractional,
                max_dev_integer: c.report.max_dev_integer,
                diverged_runs: c.report.diverged_runs.clone(),
            })
        })
        .collect()
}

fn check(name: impl Into<String>, value: f64, requirement: impl Into<String>, pass: bool) -> Check {
    Check {
        name: name.into(),
        value,
        requirement: requirement.into(),
        pass,
    }
}

fn max_rel_order_error(c: &CaseSummary) -> f64 {
    c.alpha_raw.iter().map(|a| (a - c.alpha).abs()).fold(0.0, f64::max)
}

/// All four benchmarks, noiseless and noisy, plus the comparison suite.
/// Writes `summary.json` and `summary.csv` last.
pub fn run_bench(out: &Path, seed: u64) -> Result<BenchSummary> {
    let noise = NoiseSpec::new(NoiseSpec::DEFAULT_LEVEL, seed.wrapping_add(1))?;
    let mut jobs = Vec::new();
    for b in Benchmark::ALL {
        jobs.push((b, "noiseless", noiseless_plan(b, seed)?, None));
        jobs.push((b, "noisy", sized_plan(b, NOISY_M, NOISY_N, seed)?, Some(noise)));
    }
    let cases: Vec<CaseSummary> = jobs
        .par_iter()
        .map(|(b, case, plan, noise)| learn_case(*b, case, plan, *noise, &out.join(b.name()).join(case)))
        .collect::<Result<_>>()?;
    let comparisons = run_comparison_suite(out, seed)?;

    let mut checks = Vec::new();
    for c in &cases {
        let err = max_rel_order_error(c);
        if c.case == "noiseless" {
            checks.push(check(format!("{} order recovery", c.benchmark), err, "|alpha_hat - alpha| <= 1e-8", err <= 1e-8));
        } else {
            checks.push(check(
                format!("{} order under noise", c.benchmark),
                err / c.alpha,
                "|alpha_hat - alpha| <= 0.15 alpha",
                err <= 0.15 * c.alpha,
            ));
        }
    }
    if let Some(l) = cases.iter().find(|c| c.benchmark == "logistic" && c.case == "noiseless") {
        checks.push(check(
            "logistic fractional drift max-abs error",
            l.drift_max_abs_error,
            "<= 0.01",
            l.drift_max_abs_error <= 0.01,
        ));
        let v = l.baseline_drift_max_abs_error;
        checks.push(check(
            "logistic integer-order drift max-abs error",
            v,
            "in [0.9, 1.6]",
            (0.9..=1.6).contains(&v),
        ));
    }
    for b in [Benchmark::VanDerPol, Benchmark::LotkaVolterra] {
        let rows: Vec<&ComparisonSummaryRow> = comparisons.iter().filter(|r| r.benchmark == b.name()).collect();
        for r in &rows {
            checks.push(check(
                format!("{} alpha={} integer deviation exceeds fractional", b.name(), r.alpha),
                r.max_dev_integer - r.max_dev_fractional,
                "> 0",
                r.max_dev_integer > r.max_dev_fractional,
            ));
        }
        if let [hi, lo] = rows[..] {
            checks.push(check(
                format!("{} integer deviation grows as alpha decreases", b.name()),
                lo.max_dev_integer - hi.max_dev_integer,
                "> 0",
                lo.max_dev_integer > hi.max_dev_integer,
            ));
        }
    }

    let summary = BenchSummary {
        seed,
        cases,
        comparisons,
        checks,
    };
    write_json(&out.join("summary.json"), &summary)?;
    write_summary_csv(&out.join("summary.csv"), &summary)?;
    Ok(summary)
}

fn write_summary_csv(path: &Path, s: &BenchSummary) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::format(path, e);
    w.write_record(["check", "value", "requirement", "status"]).map_err(err)?;
    for c in &s.checks {
        w.write_record([
            c.name.as_str(),
            &io::fmt_f64(c.value),
            &c.requirement,
            if c.pass { "PASS" } else { "FAIL" },
        ])
        .map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::format(path, e))?;
    io::write_atomic(path, &bytes)
}
