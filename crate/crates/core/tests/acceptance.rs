//! Acceptance suite. Runs every criterion sequentially (so the wall-clock
//! comparisons are not disturbed by concurrent tests), prints one PASS/FAIL
//! line per criterion and exits nonzero if any fails.

use std::io::Write;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use mcsd::bench::{self, BenchConfig};
use mcsd::linalg::{msign_exact, msign_iterative, spectral_norm, PolarMode, PolarScheme};
use mcsd::lmo::NormKind;
use mcsd::manifold::feasibility_violation;
use mcsd::objective::{BrockettInstance, Objective};
use mcsd::optim::{manifold_muon_direction, Method, OptimizerRun, StepSchedule};
use mcsd::rng::RngStream;
use mcsd::verify;

const SEED: u64 = 20;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

type Check = fn() -> mcsd::Result<Outcome>;

fn polar_accuracy() -> mcsd::Result<Outcome> {
    let mut rng = RngStream::new(SEED);
    let scheme = PolarScheme::newton_schulz();
    let (mut worst_diff, mut worst_orth) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let y = rng.gaussian_matrix(200, 5);
        let it = msign_iterative(&y, &scheme, 8)?;
        worst_diff = worst_diff.max(it.sub(&msign_exact(&y)?)?.frobenius_norm());
        worst_orth = worst_orth.max(feasibility_violation(&it));
    }
    Ok(outcome(
        worst_diff <= 1e-6 && worst_orth <= 1e-8,
        format!("max |NS8 - exact|_F = {worst_diff:.3e} (<= 1e-6), max orthogonality = {worst_orth:.3e} (<= 1e-8)"),
    ))
}

fn pca_head_to_head() -> mcsd::Result<Outcome> {
    let dir = tempfile::tempdir()?;
    let text = include_str!("../configs/pca_default.toml");
    let mut cfg = BenchConfig::parse(text)?;
    cfg.output_dir = dir.path().to_path_buf();
    cfg.workers = 1;
    let report = bench::pca_bench(&cfg)?;
    if let Some((run, e)) = report.first_error() {
        return Ok(outcome(false, format!("{} repeat {} aborted: {e}", run.method, run.repeat)));
    }
    let (Some(rgd), Some(spel), Some(mm)) = (report.summary("RGD"), report.summary("SPEL"), report.summary("MM")) else {
        return Ok(outcome(false, "default config lacks RGD/SPEL/MM"));
    };
    let a = spel.final_error_median <= rgd.final_error_median;
    let b = spel.final_error_median <= 0.1 * spel.initial_error_median;
    let c = spel.wall_time_median <= 0.5 * mm.wall_time_median;
    Ok(outcome(
        a && b && c,
        format!(
            "(a) SPEL {:.3e} <= RGD {:.3e}: {a}; (b) SPEL {:.3e} <= 0.1 x initial {:.3e}: {b}; \
             (c) SPEL {:.3}s <= 0.5 x MM {:.3}s: {c}",
            spel.final_error_median,
            rgd.final_error_median,
            spel.final_error_median,
            spel.initial_error_median,
            spel.wall_time_median,
            mm.wall_time_median
        ),
    ))
}

fn small_instance() -> mcsd::Result<BrockettInstance> {
    BrockettInstance::generate(50, 3, 200, SEED)
}

fn deterministic_theorem() -> mcsd::Result<Outcome> {
    let (_, tele, rate) = verify::deterministic_theorem_audit(&small_instance()?, 100, SEED)?;
    Ok(outcome(
        tele.passed && rate.passed,
        format!(
            "telescoped {:.4e} <= {:.4e} + {:.0e}; min dual norm {:.4e} <= {:.4e} + 1e-6",
            tele.lhs, tele.rhs, tele.slack, rate.lhs, rate.rhs
        ),
    ))
}

fn descent_lemma() -> mcsd::Result<Outcome> {
    let rep = verify::check_descent_lemma(&small_instance()?, 1000, 0.2, SEED)?;
    Ok(outcome(
        rep.passed,
        format!("worst excess over the quadratic model {:.4e} (slack 1e-8), 1000 samples", rep.lhs),
    ))
}

fn stochastic_theorem() -> mcsd::Result<Outcome> {
    let rep = verify::stochastic_theorem_audit(&small_instance()?, 400, 20, 1.0, SEED)?;
    Ok(outcome(
        rep.passed,
        format!(
            "seed-mean min dual norm {:.4e} <= {:.4e} + 3 s.e. {:.3e}, 20 seeds, T = 400",
            rep.lhs, rep.rhs, rep.slack
        ),
    ))
}

fn gradient_check() -> mcsd::Result<Outcome> {
    let rep = verify::check_gradient(&small_instance()?, 20, 1e-5, 1e-5, SEED)?;
    Ok(outcome(
        rep.passed,
        format!("max relative error {:.3e} (<= 1e-5) over 20 points", rep.lhs),
    ))
}

fn max_deviation(inst: &BrockettInstance, a: Method, b: Method, schedule: StepSchedule, seed: u64) -> mcsd::Result<f64> {
    let x0 = inst.manifold()?.random_point(&mut RngStream::new(seed))?;
    let mut ra = OptimizerRun::new(a, schedule.clone(), x0.clone(), PolarMode::Exact, seed)?;
    let mut rb = OptimizerRun::new(b, schedule, x0, PolarMode::Exact, seed)?;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        ra.step(inst)?;
        rb.step(inst)?;
        worst = worst.max(ra.point().matrix().sub(rb.point().matrix())?.max_abs());
    }
    Ok(worst)
}

fn structural_equivalences() -> mcsd::Result<Outcome> {
    let frob = Method::Mcsd {
        norm: NormKind::Frobenius,
    };
    let decay = StepSchedule::periodic_decay(0.1, 0.5, 30)?;
    let inst = BrockettInstance::generate(200, 5, 1000, SEED)?;
    let rgd = max_deviation(&inst, Method::Rgd, frob.clone(), StepSchedule::constant(0.001)?, SEED)?
        .max(max_deviation(&inst, Method::Rgd, frob.clone(), decay.clone(), SEED)?);
    let sphere = BrockettInstance::generate(200, 1, 1000, SEED)?;
    let sp = max_deviation(&sphere, Method::spel(), frob, decay, SEED)?;
    Ok(outcome(
        rgd <= 1e-12 && sp <= 1e-12,
        format!("RGD vs MCSD(F) {rgd:.3e}, St(n,1) spectral vs Frobenius {sp:.3e} (<= 1e-12, 100 steps)"),
    ))
}

fn muon_quality() -> mcsd::Result<Outcome> {
    let inst = BrockettInstance::generate(200, 5, 1000, SEED)?;
    let m = inst.manifold()?;
    let mut rng = RngStream::new(SEED);
    let mode = PolarMode::default();
    let (mut worst_gap, mut worst_tan, mut worst_spec, mut fallbacks) = (f64::NEG_INFINITY, 0.0f64, 0.0f64, 0);
    for _ in 0..50 {
        let x = m.random_point(&mut rng)?;
        let g = x.riemannian_grad(&inst.euclid_grad(x.matrix())?)?;
        let dir = manifold_muon_direction(&x, &g, 10, 0.1, 1e-3, &mode)?.expect("nonzero gradient");
        fallbacks += dir.fallback as usize;
        worst_gap = worst_gap.max((dir.value - dir.reference) / g.frobenius_norm());
        worst_tan = worst_tan.max(x.tangency_residual(&dir.d)?);
        worst_spec = worst_spec.max(spectral_norm(&dir.d)? - 1.0);
    }
    Ok(outcome(
        worst_gap <= 1e-3 && worst_tan <= 1e-8 && worst_spec <= 1e-8 && fallbacks == 0,
        format!(
            "max (<g,d> - ref)/|g|_F = {worst_gap:.3e} (<= 1e-3), tangency {worst_tan:.2e}, \
             |d|_2 - 1 = {worst_spec:.2e}, fallbacks {fallbacks}"
        ),
    ))
}

fn lmo_brute_force() -> mcsd::Result<Outcome> {
    let mut rng = RngStream::new(SEED);
    let rep = verify::brute_force_lmo_check(NormKind::Spectral, (2, 2), 1_000_000, 20, &mut rng)?;
    Ok(outcome(
        rep.passed,
        format!("worst (lmo value - net min)/|s|_F = {:.3e} (<= 1e-2), 20 inputs, 1e6-point net", rep.lhs),
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, Check, Duration); 9] = [
        ("1 polar accuracy", polar_accuracy, Duration::from_secs(10)),
        ("2 PCA head-to-head", pca_head_to_head, Duration::from_secs(300)),
        ("3 deterministic theorem audit", deterministic_theorem, Duration::from_secs(30)),
        ("4 descent lemma sampling", descent_lemma, Duration::from_secs(60)),
        ("5 stochastic theorem surrogate", stochastic_theorem, Duration::from_secs(600)),
        ("6 gradient correctness", gradient_check, Duration::MAX),
        ("7 structural equivalences", structural_equivalences, Duration::MAX),
        ("8 Manifold Muon direction quality", muon_quality, Duration::MAX),
        ("9 LMO brute force", lmo_brute_force, Duration::MAX),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut out = std::io::stdout().lock();
    for (name, check, budget) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let (passed, detail) = match result {
            Ok(o) => (o.passed, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let in_time = elapsed <= budget;
        let ok = passed && in_time;
        failed += !ok as usize;
        let budget_note = if budget == Duration::MAX {
            String::new()
        } else {
            format!(" / budget {}s", budget.as_secs())
        };
        let _ = writeln!(
            out,
            "criterion {name}: {} [{:.2}s{budget_note}] {detail}",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
        let _ = out.flush();
    }
    if failed == 0 {
        let _ = writeln!(out, "acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        let _ = writeln!(out, "acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
