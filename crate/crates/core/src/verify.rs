//! Executable checks of the convergence analysis: descent-lemma sampling,
//! telescoped-bound audits of finished traces, gradient-rate checks and an
//! LMO brute-force cross-check.
//!
//! Every checker returns a [`BoundReport`] with `passed ⇔ lhs <= rhs + slack`.
//! Sampling checkers take a seed and give sample `i` its own stream
//! `RngStream::derive(seed, i)`, so results do not depend on the worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{config, Result};
use crate::linalg::{msign_exact, spectral_norm, DenseMatrix, PolarMode};
use crate::lmo::{dual_norm, lmo, norm_equiv_constant, NormKind};
use crate::objective::{BrockettInstance, NoiseConfig, Objective};
use crate::optim::{drive, Method, OptimizerRun, StepSchedule, STIEFEL_RADIUS};
use crate::rng::RngStream;
use crate::trace::RunTrace;

/// Slack added to each per-step descent inequality.
pub const STEP_SLACK: f64 = 1e-8;
/// Per-step slack of the telescoped bound (multiplied by `T`).
pub const TELESCOPE_SLACK: f64 = 1e-6;
/// Minimum number of seeds for the stochastic rate check.
pub const MIN_SEEDS: usize = 20;

/// Constants a bound was evaluated with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub lipschitz: f64,
    pub norm_equiv: f64,
    pub radius: f64,
    pub delta: f64,
}

impl BoundConstants {
    /// Constants for `inst` under `norm`, with `Δ = 1.1·(f(x0) − f*)`.
    pub fn for_instance(inst: &BrockettInstance, norm: NormKind, x0: &DenseMatrix) -> Result<Self> {
        Ok(Self {
            lipschitz: inst.smoothness_constants().l_composed,
            norm_equiv: norm_equiv_constant(norm, inst.n(), inst.p()),
            radius: STIEFEL_RADIUS,
            delta: delta_for(inst, x0)?,
        })
    }
}

/// `1.1·(f(x0) − f*)`, an upper bound on the initial gap with 10% headroom.
pub fn delta_for(inst: &BrockettInstance, x0: &DenseMatrix) -> Result<f64> {
    Ok(1.1 * (inst.value(x0)? - inst.optimal_value()))
}

/// The sample attaining the worst margin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub index: usize,
    pub x: DenseMatrix,
    pub d: DenseMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub passed: bool,
    pub constants: Option<BoundConstants>,
    pub samples: usize,
    pub witness: Option<Witness>,
}

impl BoundReport {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64, slack: f64) -> Self {
        Self {
            name: name.into(),
            lhs,
            rhs,
            slack,
            passed: lhs <= rhs + slack,
            constants: None,
            samples: 1,
            witness: None,
        }
    }

    fn with_constants(mut self, c: BoundConstants) -> Self {
        self.constants = Some(c);
        self
    }

    fn with_samples(mut self, n: usize) -> Self {
        self.samples = n;
        self
    }

    /// `rhs + slack − lhs`; negative when the check fails.
    pub fn margin(&self) -> f64 {
        self.rhs + self.slack - self.lhs
    }

    /// One machine-readable line: `name lhs rhs slack pass`.
    pub fn record_line(&self) -> String {
        format!(
            "name={} lhs={:.17e} rhs={:.17e} slack={:.3e} pass={}",
            self.name, self.lhs, self.rhs, self.slack, self.passed
        )
    }
}

impl fmt::Display for BoundReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}: lhs = {:.6e}, rhs = {:.6e}, slack = {:.1e}, margin = {:.3e} ({} samples)",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.lhs,
            self.rhs,
            self.slack,
            self.margin(),
            self.samples
        )?;
        if let Some(c) = &self.constants {
            let parts: Vec<String> = [("L", c.lipschitz), ("N", c.norm_equiv), ("r", c.radius), ("Δ", c.delta)]
                .iter()
                .filter(|(_, v)| v.is_finite())
                .map(|(k, v)| format!("{k} = {v:.6e}"))
                .collect();
            write!(f, "\n       {}", parts.join(", "))?;
        }
        if let (false, Some(w)) = (self.passed, &self.witness) {
            write!(f, "\n       worst sample #{}", w.index)?;
        }
        Ok(())
    }
}

/// Random element of the unit ball of `norm`.
///
/// Spectral: `U diag(σ) Vᵀ` with Haar-like orthonormal factors; half the
/// draws put every `σᵢ = 1` (the extreme points), the rest draw `σᵢ ~ U[0,1]`.
/// Frobenius: Gaussian direction times a radius that is 1 half the time and
/// uniform otherwise.
pub fn sample_unit_ball(norm: NormKind, rows: usize, cols: usize, rng: &mut RngStream) -> DenseMatrix {
    let boundary = rng.uniform() < 0.5;
    match norm {
        NormKind::Frobenius => {
            let g = rng.gaussian_matrix(rows, cols);
            let radius = if boundary { 1.0 } else { rng.uniform() };
            g.scale(radius / g.frobenius_norm())
        }
        NormKind::Spectral => {
            let k = rows.min(cols);
            let u = orthonormal(rows, k, rng);
            let v = orthonormal(cols, k, rng);
            let sigma: Vec<f64> = (0..k).map(|_| if boundary { 1.0 } else { rng.uniform() }).collect();
            u.scale_columns(&sigma)
                .and_then(|us| us.matmul_t(&v))
                .expect("factor shapes agree")
        }
    }
}

fn orthonormal(n: usize, k: usize, rng: &mut RngStream) -> DenseMatrix {
    loop {
        // A Gaussian matrix is full rank with probability one.
        if let Ok(q) = msign_exact(&rng.gaussian_matrix(n, k)) {
            return q;
        }
    }
}

/// Central differences `(f(x + h eᵢⱼ) − f(x − h eᵢⱼ)) / 2h` for every entry.
pub fn central_difference(obj: &dyn Objective, x: &DenseMatrix, h: f64) -> Result<DenseMatrix> {
    let (r, c) = x.shape();
    let mut out = DenseMatrix::zeros(r, c);
    let mut probe = x.clone();
    for k in 0..r * c {
        let orig = probe.data()[k];
        probe.data_mut()[k] = orig + h;
        let plus = obj.value(&probe)?;
        probe.data_mut()[k] = orig - h;
        let minus = obj.value(&probe)?;
        probe.data_mut()[k] = orig;
        out.data_mut()[k] = (plus - minus) / (2.0 * h);
    }
    Ok(out)
}

/// Worst relative error `‖fd − ∇f‖_F / ‖∇f‖_F` over `points` random Stiefel
/// points, against `tol`.
pub fn check_gradient(inst: &BrockettInstance, points: usize, h: f64, tol: f64, seed: u64) -> Result<BoundReport> {
    let m = inst.manifold()?;
    let errs: Vec<f64> = (0..points)
        .into_par_iter()
        .map(|i| {
            let x = m.random_point(&mut RngStream::derive(seed, i as u64))?;
            let g = inst.euclid_grad(x.matrix())?;
            let fd = central_difference(inst, x.matrix(), h)?;
            Ok(fd.sub(&g)?.frobenius_norm() / g.frobenius_norm())
        })
        .collect::<Result<_>>()?;
    let worst = errs.iter().copied().fold(0.0, f64::max);
    Ok(BoundReport::new("gradient-finite-difference", worst, tol, 0.0).with_samples(points))
}

/// Samples `x` uniformly on the manifold and `d = ρ G / ‖G‖₂` with Gaussian
/// `G` and `ρ ~ U(0, r]`, and checks
/// `f(P(x + d)) <= f(x) + ⟨∇_M f(x), d⟩ + (L/2)‖d‖_F²` with `L = l_composed`.
///
/// The report's `lhs` is the worst excess `f(P(x+d)) − model`, `rhs` is 0.
pub fn check_descent_lemma(inst: &BrockettInstance, samples: usize, r: f64, seed: u64) -> Result<BoundReport> {
    if samples == 0 {
        return config("descent-lemma check needs at least one sample");
    }
    if !(r > 0.0 && r <= STIEFEL_RADIUS) {
        return config(format!("radius must lie in (0, {STIEFEL_RADIUS}], got {r}"));
    }
    let m = inst.manifold()?;
    let l = inst.smoothness_constants().l_composed;
    let excess: Vec<(f64, DenseMatrix, DenseMatrix)> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::derive(seed, i as u64);
            let x = m.random_point(&mut rng)?;
            let g = rng.gaussian_matrix(inst.n(), inst.p());
            let rho = r * (1.0 - rng.uniform());
            let d = g.scale(rho / spectral_norm(&g)?);
            let gm = x.riemannian_grad(&inst.euclid_grad(x.matrix())?)?;
            let moved = m.project(&x.matrix().add(&d)?, &PolarMode::Exact)?;
            let fd = d.frobenius_norm();
            let model = inst.value(x.matrix())? + gm.inner(&d)? + 0.5 * l * fd * fd;
            Ok((inst.value(moved.matrix())? - model, x.into_matrix(), d))
        })
        .collect::<Result<_>>()?;
    let (index, worst) = excess
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (i, e)| if e.0 > b.1 { (i, e.0) } else { b });
    let (_, x, d) = excess[index].clone();
    let mut rep = BoundReport::new("descent-lemma", worst, 0.0, STEP_SLACK)
        .with_constants(BoundConstants {
            lipschitz: l,
            norm_equiv: f64::NAN,
            radius: r,
            delta: f64::NAN,
        })
        .with_samples(samples);
    rep.witness = Some(Witness { index, x, d });
    Ok(rep)
}

fn checked_prefix<'a>(trace: &'a RunTrace, c: &BoundConstants) -> Result<&'a [crate::trace::TraceRecord]> {
    let steps = trace.steps();
    let recs = &trace.records[..steps];
    if recs.iter().any(|r| !r.grad_dual_norm.is_finite()) {
        return config(format!("trace `{}` lacks gradient dual norms", trace.label));
    }
    if let Some(r) = recs.iter().find(|r| !(r.step_size > 0.0 && r.step_size <= c.radius)) {
        return config(format!(
            "trace `{}` step {} has α = {} outside (0, {}]",
            trace.label, r.iter, r.step_size, c.radius
        ));
    }
    Ok(recs)
}

/// Telescoped bound
/// `Σ_{t<T} α_t ‖∇_M f(x_t)‖_* <= f(x_0) − f(x_T) + (L N²/2) Σ α_t²`
/// recomputed from a trace, with slack `1e-6·T`.
pub fn audit_deterministic_bound(trace: &RunTrace, c: &BoundConstants) -> Result<BoundReport> {
    let Some(first) = trace.first() else {
        return config("empty trace");
    };
    let recs = checked_prefix(trace, c)?;
    let last = trace.last().unwrap_or(first);
    let lhs: f64 = recs.iter().map(|r| r.step_size * r.grad_dual_norm).sum();
    let sq: f64 = recs.iter().map(|r| r.step_size * r.step_size).sum();
    let rhs = first.objective - last.objective + 0.5 * c.lipschitz * c.norm_equiv * c.norm_equiv * sq;
    Ok(
        BoundReport::new("telescoped-bound", lhs, rhs, TELESCOPE_SLACK * recs.len() as f64)
            .with_constants(*c)
            .with_samples(recs.len()),
    )
}

/// Per-step inequality `f(x_{t+1}) <= f(x_t) − α_t ‖∇_M f(x_t)‖_* + (L/2) α_t² N²`.
/// The report carries the worst step's excess over the right side.
pub fn audit_descent_steps(trace: &RunTrace, c: &BoundConstants) -> Result<BoundReport> {
    let recs = checked_prefix(trace, c)?;
    let n2 = c.norm_equiv * c.norm_equiv;
    let worst = recs
        .iter()
        .zip(&trace.records[1..])
        .map(|(a, b)| {
            let rhs = a.objective - a.step_size * a.grad_dual_norm + 0.5 * c.lipschitz * a.step_size * a.step_size * n2;
            b.objective - rhs
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let worst = if recs.is_empty() { 0.0 } else { worst };
    Ok(BoundReport::new("per-step-descent", worst, 0.0, STEP_SLACK)
        .with_constants(*c)
        .with_samples(recs.len()))
}

fn min_dual(trace: &RunTrace) -> f64 {
    trace.records[..trace.steps()]
        .iter()
        .map(|r| r.grad_dual_norm)
        .fold(f64::INFINITY, f64::min)
}

/// `min_{t<T} ‖∇_M f(x_t)‖_* <= √(2ΔLN²/T) + 1e-6` for a run with the
/// deterministic theorem schedule.
pub fn check_min_grad_rate(trace: &RunTrace, schedule: &StepSchedule) -> Result<BoundReport> {
    let StepSchedule::TheoremDeterministic {
        delta,
        lipschitz,
        norm_equiv,
        horizon,
        ..
    } = *schedule
    else {
        return config("deterministic rate check needs the deterministic theorem schedule");
    };
    if trace.steps() != horizon {
        return config(format!("trace has {} steps but the schedule horizon is {horizon}", trace.steps()));
    }
    let c = BoundConstants {
        lipschitz,
        norm_equiv,
        radius: STIEFEL_RADIUS,
        delta,
    };
    checked_prefix(trace, &c)?;
    let rhs = (2.0 * delta * lipschitz * norm_equiv * norm_equiv / horizon as f64).sqrt();
    Ok(BoundReport::new("min-grad-rate", min_dual(trace), rhs, 1e-6)
        .with_constants(c)
        .with_samples(horizon))
}

/// Monte-Carlo surrogate of the expected-rate guarantee: the mean over seeds
/// of the per-seed minimum dual norm against `4N(√(LΔ) + σ) T^{−1/4}`, with
/// slack of three standard errors.
pub fn check_min_grad_rate_stochastic(traces: &[RunTrace], schedule: &StepSchedule, sigma: f64) -> Result<BoundReport> {
    let StepSchedule::TheoremStochastic {
        delta,
        lipschitz,
        norm_equiv,
        horizon,
        ..
    } = *schedule
    else {
        return config("stochastic rate check needs the stochastic theorem schedule");
    };
    if traces.len() < MIN_SEEDS {
        return config(format!("stochastic rate check needs >= {MIN_SEEDS} seeds, got {}", traces.len()));
    }
    let c = BoundConstants {
        lipschitz,
        norm_equiv,
        radius: STIEFEL_RADIUS,
        delta,
    };
    let mut mins = Vec::with_capacity(traces.len());
    for t in traces {
        if t.steps() != horizon {
            return config(format!("trace `{}` has {} steps, horizon is {horizon}", t.label, t.steps()));
        }
        checked_prefix(t, &c)?;
        mins.push(min_dual(t));
    }
    let k = mins.len() as f64;
    let mean = mins.iter().sum::<f64>() / k;
    let var = mins.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (k - 1.0);
    let rhs = 4.0 * norm_equiv * ((lipschitz * delta).sqrt() + sigma) * (horizon as f64).powf(-0.25);
    Ok(BoundReport::new("stochastic-min-grad-rate", mean, rhs, 3.0 * var.sqrt() / k.sqrt())
        .with_constants(c)
        .with_samples(traces.len()))
}

/// Compares `⟨s, lmo(s)⟩` with the minimum of `⟨s, d⟩` over `net_size` random
/// points of the unit ball, for `inputs` random Gaussian `s`.
///
/// `lhs` is the worst `(⟨s, lmo(s)⟩ − net minimum) / ‖s‖_F`; the check passes
/// when it is at most the net resolution `1e-2`.
pub fn brute_force_lmo_check(
    norm: NormKind,
    dims: (usize, usize),
    net_size: usize,
    inputs: usize,
    rng: &mut RngStream,
) -> Result<BoundReport> {
    let (r, c) = dims;
    let ss: Vec<DenseMatrix> = (0..inputs).map(|_| rng.gaussian_matrix(r, c)).collect();
    let mut net_min = vec![f64::INFINITY; inputs];
    for _ in 0..net_size {
        let d = sample_unit_ball(norm, r, c, rng);
        for (m, s) in net_min.iter_mut().zip(&ss) {
            *m = m.min(s.inner(&d)?);
        }
    }
    let mut worst = f64::NEG_INFINITY;
    for (s, m) in ss.iter().zip(&net_min) {
        let d = lmo(norm, s, &PolarMode::Exact)?.expect("gaussian input is nonzero");
        worst = worst.max((s.inner(&d)? - m) / s.frobenius_norm());
    }
    Ok(BoundReport::new(format!("lmo-brute-force-{norm}"), worst, 0.0, 1e-2).with_samples(inputs))
}

/// Deterministic SPEL run with the theorem step from a random start on
/// `inst`, audited for the telescoped bound and the min-gradient rate.
pub fn deterministic_theorem_audit(
    inst: &BrockettInstance,
    horizon: usize,
    seed: u64,
) -> Result<(RunTrace, BoundReport, BoundReport)> {
    let x0 = inst.manifold()?.random_point(&mut RngStream::new(seed))?;
    let c = BoundConstants::for_instance(inst, NormKind::Spectral, x0.matrix())?;
    let sched = StepSchedule::theorem_deterministic(c.delta, c.lipschitz, c.norm_equiv, horizon)?;
    sched.check_cap(c.radius)?;
    let mut run = OptimizerRun::new(Method::spel(), sched.clone(), x0, PolarMode::Exact, seed)?;
    let out = drive(&mut run, inst, horizon, false);
    if let Some(e) = out.error {
        return Err(e);
    }
    let tele = audit_deterministic_bound(&out.trace, &c)?;
    let rate = check_min_grad_rate(&out.trace, &sched)?;
    Ok((out.trace, tele, rate))
}

/// Stochastic SPEL runs (theorem step and momentum, additive Gaussian noise
/// of total standard deviation `sigma`) from one random start, one noise
/// stream per seed.
pub fn stochastic_theorem_audit(
    inst: &BrockettInstance,
    horizon: usize,
    seeds: usize,
    sigma: f64,
    seed: u64,
) -> Result<BoundReport> {
    let x0 = inst.manifold()?.random_point(&mut RngStream::new(seed))?;
    let c = BoundConstants::for_instance(inst, NormKind::Spectral, x0.matrix())?;
    let sched = StepSchedule::theorem_stochastic(c.delta, c.lipschitz, c.norm_equiv, horizon)?;
    sched.check_cap(c.radius)?;
    let beta = sched.beta().expect("stochastic schedule has momentum");
    let noise = NoiseConfig::gaussian_with_total_sigma(sigma, inst.n(), inst.p());
    let method = Method::StochasticMcsd {
        norm: NormKind::Spectral,
        beta,
        noise,
    };
    let traces: Vec<RunTrace> = (0..seeds)
        .into_par_iter()
        .map(|k| {
            let stream = seed.wrapping_mul(1_000_003).wrapping_add(k as u64 + 1);
            let mut run = OptimizerRun::new(method.clone(), sched.clone(), x0.clone(), PolarMode::Exact, stream)?;
            let out = drive(&mut run, inst, horizon, false);
            match out.error {
                Some(e) => Err(e),
                None => Ok(out.trace),
            }
        })
        .collect::<Result<_>>()?;
    check_min_grad_rate_stochastic(&traces, &sched, sigma)
}

/// Which checks [`run_suite`] performs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Fast,
    Full,
}

impl std::str::FromStr for Level {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(Level::Fast),
            "full" => Ok(Level::Full),
            other => config(format!("unknown verify level `{other}` (fast|full)")),
        }
    }
}

/// The standard verification suite on the (50, 3, 200) instance.
///
/// Fast: 200-sample descent lemma, 100-step deterministic audit, 2×2 spectral
/// LMO brute force. Full adds the 1000-sample descent lemma and the 20-seed,
/// 400-step stochastic rate check.
pub fn run_suite(level: Level, seed: u64) -> Result<Vec<BoundReport>> {
    let inst = BrockettInstance::generate(50, 3, 200, seed)?;
    let mut reports = Vec::new();
    let samples = match level {
        Level::Fast => 200,
        Level::Full => 1000,
    };
    reports.push(check_descent_lemma(&inst, samples, STIEFEL_RADIUS, seed)?);
    let (_, tele, rate) = deterministic_theorem_audit(&inst, 100, seed)?;
    reports.push(tele);
    reports.push(rate);
    let mut rng = RngStream::derive(seed, 0x1_0000);
    let net = match level {
        Level::Fast => 100_000,
        Level::Full => 1_000_000,
    };
    reports.push(brute_force_lmo_check(NormKind::Spectral, (2, 2), net, 20, &mut rng)?);
    if level == Level::Full {
        reports.push(stochastic_theorem_audit(&inst, 400, MIN_SEEDS, 1.0, seed)?);
    }
    Ok(reports)
}

/// `‖s‖_*` of the exact Riemannian gradient at `x`.
pub fn riemannian_dual_norm(obj: &dyn Objective, x: &crate::manifold::StiefelPoint, norm: NormKind) -> Result<f64> {
    dual_norm(norm, &x.riemannian_grad(&obj.euclid_grad(x.matrix())?)?)
}
