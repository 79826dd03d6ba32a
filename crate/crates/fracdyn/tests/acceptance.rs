//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Run with `cargo test -p fracdyn --test acceptance`.

use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use fracdyn::config::DEFAULT_SEED;
use fracdyn::pipeline::{comparison_case, make_datasets, noiseless_plan, sized_plan, benchmark_h};
use fracdyn_core::basis::{BasisExpansion, BasisSpec};
use fracdyn_core::frac::psi_coefficient;
use fracdyn_core::harness::{field_error_surface, NoiseSpec};
use fracdyn_core::learn::{
    estimate_order, generate_channel_datasets, integer_order_baseline, learn_from_datasets, ExperimentPlan, InputLaw,
};
use fracdyn_core::rng::seeded;
use fracdyn_core::simulate::{simulate, step_discrete};
use fracdyn_core::systems::{Benchmark, FnFields};
use fracdyn_core::{ControlAffineSystem, DomainBox, FractionalOrderVector, MemoryCoefficients, State, TimeKind};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------------------
// 1. memory coefficients against the Gamma-function ratio

fn gamma_ratio(alpha: f64, j: usize) -> f64 {
    use statrs::function::gamma::gamma;
    gamma(j as f64 - alpha) / (gamma(-alpha) * gamma(j as f64 + 1.0))
}

fn criterion_1() -> Outcome {
    let mut worst_gamma: f64 = 0.0;
    let mut worst_closed: f64 = 0.0;
    for alpha in [0.2, 0.5, 0.6, 0.9] {
        for j in 0..=20 {
            let psi = psi_coefficient(alpha, j).unwrap();
            worst_gamma = worst_gamma.max((psi - gamma_ratio(alpha, j)).abs());
        }
        let two = -psi_coefficient(alpha, 2).unwrap() - (alpha - alpha * alpha) / 2.0;
        let three = -psi_coefficient(alpha, 3).unwrap() - (alpha.powi(3) - 3.0 * alpha * alpha + 2.0 * alpha) / 6.0;
        worst_closed = worst_closed.max(two.abs()).max(three.abs());
    }
    outcome(
        worst_gamma <= 1e-12 && worst_closed <= 1e-14,
        format!("gamma-ratio err {worst_gamma:.2e} (<= 1e-12), closed-form err {worst_closed:.2e} (<= 1e-14)"),
    )
}

// ---------------------------------------------------------------------------
// 2. discrete simulator against a direct evaluation of the recursion

struct RandomSystem {
    system: ControlAffineSystem,
    a: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
}

fn random_discrete_system(rng: &mut impl Rng) -> RandomSystem {
    let n = rng.random_range(1..=3);
    let m = rng.random_range(1..=2);
    let mut mat = |r: usize, c: usize| -> Vec<Vec<f64>> {
        (0..r).map(|_| (0..c).map(|_| rng.random::<f64>() - 0.5).collect()).collect()
    };
    let a = mat(n, n);
    let c = mat(n * m, n);
    let (fa, fc) = (a.clone(), c.clone());
    let fields = FnFields::new(
        n,
        m,
        move |x, out| {
            for (o, row) in out.iter_mut().zip(&fa) {
                *o = row.iter().zip(x).map(|(w, v)| w * v.sin()).sum();
            }
        },
        move |x, out| {
            for (o, row) in out.iter_mut().zip(&fc) {
                *o = 1.0 + 0.5 * row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>().cos();
            }
        },
    );
    let alpha: Vec<f64> = (0..n).map(|_| 0.05 + 0.95 * rng.random::<f64>()).collect();
    let domain = DomainBox::from_bounds(&vec![(-1.0, 1.0); n]).unwrap();
    let system = ControlAffineSystem::new(
        Arc::new(fields),
        domain,
        FractionalOrderVector::new(alpha).unwrap(),
        TimeKind::Discrete,
    )
    .unwrap();
    RandomSystem { system, a, c }
}

/// `x(k+1) = f(x(k)) + g(x(k)) u(k) − Σ_{j=1}^{k+1} ψ_j x(k+1−j)` with the
/// fields and coefficients written out from scratch.
fn brute_force(rs: &RandomSystem, x0: &[f64], inputs: &[State]) -> Vec<State> {
    let n = x0.len();
    let m = inputs[0].len();
    let alpha = rs.system.alpha.as_slice();
    let psi = |i: usize, j: usize| -> f64 {
        let mut p = 1.0;
        for q in 1..=j {
            p *= (q as f64 - 1.0 - alpha[i]) / q as f64;
        }
        p
    };
    let mut xs = vec![x0.to_vec()];
    for (k, u) in inputs.iter().enumerate() {
        let x = &xs[k];
        let mut next = vec![0.0; n];
        for i in 0..n {
            let f: f64 = (0..n).map(|q| rs.a[i][q] * x[q].sin()).sum();
            let mut gu = 0.0;
            for l in 0..m {
                let arg: f64 = (0..n).map(|q| rs.c[i * m + l][q] * x[q]).sum();
                gu += (1.0 + 0.5 * arg.cos()) * u[l];
            }
            let mut memory = 0.0;
            for j in 1..=k + 1 {
                memory += psi(i, j) * xs[k + 1 - j][i];
            }
            next[i] = f + gu - memory;
        }
        xs.push(next);
    }
    xs
}

fn criterion_2() -> Outcome {
    let mut rng = seeded(DEFAULT_SEED);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let rs = random_discrete_system(&mut rng);
        let (n, m) = (rs.system.state_dim(), rs.system.input_dim());
        let k = rng.random_range(1..=10);
        let x0: State = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let inputs: Vec<State> = (0..k).map(|_| (0..m).map(|_| rng.random::<f64>() - 0.5).collect()).collect();
        let expect = brute_force(&rs, &x0, &inputs);
        let coeffs = MemoryCoefficients::new(rs.system.alpha.clone(), k);
        let mut history = vec![x0.clone()];
        for u in &inputs {
            let next = step_discrete(&rs.system, &coeffs, &history, u).unwrap();
            history.push(next);
        }
        for (a, b) in history.iter().flatten().zip(expect.iter().flatten()) {
            worst = worst.max((a - b).abs());
        }
    }
    outcome(worst <= 1e-15, format!("max deviation {worst:.2e} over 100 systems (<= 1e-15)"))
}

// ---------------------------------------------------------------------------
// 3. memory-reset identities

fn criterion_3() -> Outcome {
    let mut rng = seeded(DEFAULT_SEED ^ 3);
    let mut lines = Vec::new();
    let mut pass = true;
    for b in Benchmark::ALL {
        let sys = b.build_default().system;
        let h = benchmark_h(b);
        let (n, m) = (sys.state_dim(), sys.input_dim());
        let amp = b.default_input_amplitude();
        let (mut first, mut second) = (0.0f64, 0.0f64);
        for _ in 0..50 {
            let x0 = sys.domain.sample(&mut rng);
            let us: Vec<State> = (0..3).map(|_| (0..m).map(|_| amp * (2.0 * rng.random::<f64>() - 1.0)).collect()).collect();
            match sys.time_kind {
                TimeKind::Continuous => {
                    let run = simulate(&sys, &x0, &us[..2], h).unwrap();
                    let reset = simulate(&sys, &run.states[1], &us[1..2], h).unwrap();
                    for i in 0..n {
                        let lhs = run.states[2][i] - reset.states[1][i];
                        let rhs = (1.0 - sys.alpha[i]) * (x0[i] - run.states[1][i]);
                        first = first.max((lhs - rhs).abs());
                    }
                }
                TimeKind::Discrete => {
                    let run = simulate(&sys, &x0, &us, 1.0).unwrap();
                    let r2 = simulate(&sys, &run.states[1], &us[1..2], 1.0).unwrap();
                    let r3 = simulate(&sys, &run.states[2], &us[2..3], 1.0).unwrap();
                    for i in 0..n {
                        let a = sys.alpha[i];
                        let half = (a - a * a) / 2.0;
                        let cubic = (a * a * a - 3.0 * a * a + 2.0 * a) / 6.0;
                        let d2 = run.states[2][i] - r2.states[1][i];
                        let d3 = run.states[3][i] - r3.states[1][i];
                        first = first.max((d2 - half * x0[i]).abs());
                        second = second.max((d3 - half * run.states[1][i] - cubic * x0[i]).abs());
                    }
                }
            }
        }
        pass &= first <= 1e-12 && second <= 1e-12;
        match sys.time_kind {
            TimeKind::Continuous => lines.push(format!("{} {first:.1e}", b.name())),
            TimeKind::Discrete => lines.push(format!("{} {first:.1e}/{second:.1e}", b.name())),
        }
    }
    outcome(pass, format!("max residuals (<= 1e-12): {}", lines.join(", ")))
}

// ---------------------------------------------------------------------------
// 4. noiseless order recovery

fn criterion_4() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for b in Benchmark::ALL {
        let sys = b.build_default().system;
        let plan = noiseless_plan(b, DEFAULT_SEED).unwrap();
        let ds = generate_channel_datasets(&sys, &plan, benchmark_h(b)).unwrap();
        let est = estimate_order(&ds[0]).unwrap();
        let err = est.raw.iter().map(|a| (a - b.default_alpha()).abs()).fold(0.0, f64::max);
        pass &= err <= 1e-8;
        if b == Benchmark::Logistic {
            let sel = est.root_selection.as_ref().unwrap()[0];
            let other = sel.roots[1 - sel.chosen];
            let ok = (sel.roots[sel.chosen] - 0.6).abs() <= 1e-8 && (other - 0.4).abs() <= 1e-8;
            pass &= ok;
            parts.push(format!("{} {err:.1e} (roots {:.6}/{:.6}, chose {:.6})", b.name(), sel.roots[0], sel.roots[1], sel.roots[sel.chosen]));
        } else {
            parts.push(format!("{} {err:.1e}", b.name()));
        }
    }
    outcome(pass, format!("|alpha_hat - alpha| (<= 1e-8): {}", parts.join(", ")))
}

// ---------------------------------------------------------------------------
// 5. exact recovery when the control field lies in the basis span

fn in_span_case(time_kind: TimeKind, alpha: f64, h: f64, seed: u64) -> (f64, f64, f64) {
    let domain = DomainBox::from_bounds(&[(-2.0, 2.0), (-1.0, 3.0)]).unwrap();
    let basis = BasisSpec::legendre(5, domain.clone()).unwrap();
    let mut rng = seeded(seed);
    let b_true: Vec<f64> = (0..10).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    let g_true = BasisExpansion::new(basis.clone(), b_true.clone()).unwrap();
    let g_fields = g_true.clone();
    let fields = FnFields::new(
        2,
        1,
        |x, out| {
            out[0] = 0.3 * x[1] - 0.1 * x[0] * x[0] * x[0];
            out[1] = (0.5 * x[0]).sin() - 0.2 * x[1];
        },
        move |x, out| out.copy_from_slice(&g_fields.eval(x)),
    );
    let sys = ControlAffineSystem::new(
        Arc::new(fields),
        domain,
        FractionalOrderVector::uniform(alpha, 2).unwrap(),
        time_kind,
    )
    .unwrap();
    let plan = ExperimentPlan::new(50, 10, InputLaw::symmetric(0.5), seed).unwrap();
    let ds = generate_channel_datasets(&sys, &plan, h).unwrap();
    let model = learn_from_datasets(&ds, &basis).unwrap();

    let coef_err = model.g_hat[0]
        .coefficients
        .iter()
        .zip(&b_true)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let drift_err = model
        .f_samples
        .iter()
        .flat_map(|(x, f)| {
            let t = sys.drift_at(x);
            f.iter().zip(t).map(|(a, b)| (a - b).abs()).collect::<Vec<_>>()
        })
        .fold(0.0, f64::max);
    // one step with the learned (alpha, f samples, g) from each x0 under u0 of trial 1
    let d = &ds[0];
    let hpow = model.alpha_hat.step_powers(h);
    let mut resim_err: f64 = 0.0;
    for (i, (x0, f)) in model.f_samples.iter().enumerate() {
        let g = model.eval_control(x0);
        let u = d.u0[i][1][0];
        for r in 0..2 {
            let x1 = match time_kind {
                TimeKind::Continuous => x0[r] + hpow[r] * (f[r] + g[r] * u),
                TimeKind::Discrete => f[r] + g[r] * u + model.alpha_hat[r] * x0[r],
            };
            resim_err = resim_err.max((x1 - d.x1[i][1][r]).abs());
        }
    }
    (coef_err, drift_err, resim_err)
}

fn criterion_5() -> Outcome {
    let (c1, d1, r1) = in_span_case(TimeKind::Continuous, 0.8, 0.1, DEFAULT_SEED);
    let (c2, d2, r2) = in_span_case(TimeKind::Discrete, 0.3, 1.0, DEFAULT_SEED + 1);
    let worst = [c1, d1, r1, c2, d2, r2].into_iter().fold(0.0, f64::max);
    outcome(
        worst <= 1e-8,
        format!(
            "continuous coef/drift/resim {c1:.1e}/{d1:.1e}/{r1:.1e}, discrete {c2:.1e}/{d2:.1e}/{r2:.1e} (<= 1e-8)"
        ),
    )
}

// ---------------------------------------------------------------------------
// 6. logistic drift error, fractional and integer-order

fn criterion_6() -> Outcome {
    let b = Benchmark::Logistic;
    let sys = b.build_default().system;
    let basis = BasisSpec::legendre(7, sys.domain.clone()).unwrap();
    let plan = noiseless_plan(b, DEFAULT_SEED).unwrap();
    let ds = generate_channel_datasets(&sys, &plan, 1.0).unwrap();
    let frac = learn_from_datasets(&ds, &basis).unwrap();
    let int = integer_order_baseline(&ds, &basis).unwrap();
    let ef = field_error_surface(&sys, &frac, 801).unwrap().drift.max_abs_error;
    let ei = field_error_surface(&sys, &int, 801).unwrap().drift.max_abs_error;
    let pf = ef <= 0.01;
    let pi = (0.9..=1.6).contains(&ei);
    outcome(
        pf && pi,
        format!(
            "fractional drift error {ef:.4e} (<= 0.01: {}), integer-order drift error {ei:.4} (in [0.9, 1.6]: {})",
            if pf { "ok" } else { "no" },
            if pi { "ok" } else { "no" }
        ),
    )
}

// ---------------------------------------------------------------------------
// 7. fractional vs integer-order response ordering

fn criterion_7() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (b, [hi, lo]) in [(Benchmark::VanDerPol, [0.9, 0.85]), (Benchmark::LotkaVolterra, [0.98, 0.96])] {
        let a = comparison_case(b, hi, DEFAULT_SEED).unwrap().report;
        let c = comparison_case(b, lo, DEFAULT_SEED).unwrap().report;
        let ok = a.max_dev_integer > a.max_dev_fractional
            && c.max_dev_integer > c.max_dev_fractional
            && c.max_dev_integer > a.max_dev_integer;
        pass &= ok;
        parts.push(format!(
            "{} a={hi}: frac {:.3e} int {:.3e}; a={lo}: frac {:.3e} int {:.3e}",
            b.name(),
            a.max_dev_fractional,
            a.max_dev_integer,
            c.max_dev_fractional,
            c.max_dev_integer
        ));
    }
    outcome(pass, parts.join("; "))
}

// ---------------------------------------------------------------------------
// 8. order estimates under relative measurement noise

fn criterion_8() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let noise = NoiseSpec::new(0.05, DEFAULT_SEED + 1).unwrap();
    for b in Benchmark::ALL {
        let sys = b.build_default().system;
        let plan = sized_plan(b, 100, 20, DEFAULT_SEED).unwrap();
        let ds = make_datasets(&sys, &plan, benchmark_h(b), Some(noise)).unwrap();
        let est = estimate_order(&ds.observed()[0]).unwrap();
        let alpha = b.default_alpha();
        let err = est.raw.iter().map(|a| (a - alpha).abs()).fold(0.0, f64::max);
        pass &= err <= 0.15 * alpha;
        parts.push(format!("{} {:.3}", b.name(), err / alpha));
    }
    outcome(pass, format!("|alpha_hat - alpha| / alpha (<= 0.15): {}", parts.join(", ")))
}

// ---------------------------------------------------------------------------
// 9. benchmark run determinism

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        let mut entries: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out
}

fn criterion_9() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_fracdyn");
    let mut codes = Vec::new();
    for run in ["a", "b"] {
        let status = std::process::Command::new(bin)
            .args(["bench-paper", "--out"])
            .arg(tmp.path().join(run))
            .env_remove("FRACDYN_SEED")
            .stdout(std::process::Stdio::null())
            .stderr(std::process::Stdio::null())
            .status()
            .unwrap();
        codes.push(status.code().unwrap_or(-1));
    }
    let a = tree(&tmp.path().join("a"));
    let b = tree(&tmp.path().join("b"));
    let files = a.len();
    let identical = !a.is_empty() && a == b;
    outcome(
        identical && codes[0] == codes[1],
        format!("{files} files, byte-identical: {identical}, exit codes {codes:?}"),
    )
}

type Criterion = (&'static str, fn() -> Outcome, Duration);

fn main() {
    let criteria: [Criterion; 9] = [
        ("memory coefficients vs Gamma ratio", criterion_1, Duration::from_secs(1)),
        ("discrete simulator vs direct recursion", criterion_2, Duration::from_secs(10)),
        ("memory-reset identities", criterion_3, Duration::from_secs(30)),
        ("noiseless order recovery", criterion_4, Duration::from_secs(30)),
        ("in-span exact recovery", criterion_5, Duration::from_secs(30)),
        ("logistic drift error", criterion_6, Duration::from_secs(60)),
        ("comparison ordering", criterion_7, Duration::from_secs(120)),
        ("noise robustness", criterion_8, Duration::from_secs(120)),
        ("benchmark run determinism", criterion_9, Duration::from_secs(600)),
    ];
    let mut failed = 0;
    for (k, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let elapsed = start.elapsed();
        let pass = o.pass && elapsed <= *budget;
        if !pass {
            failed += 1;
        }
        println!(
            "{} [{}] {name}: {} ({:.2?}, budget {:?})",
            if pass { "PASS" } else { "FAIL" },
            k + 1,
            o.detail,
            elapsed,
            budget
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
