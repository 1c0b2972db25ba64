//! Optimizers over the Stiefel manifold sharing one stepping interface.
//!
//! Every method takes the projected step `x ← P_St(x + α_t d_t)` and differs
//! only in the direction `d_t`:
//!
//! | method            | direction                                              |
//! |-------------------|--------------------------------------------------------|
//! | `Mcsd(norm)`      | `lmo_norm(∇_M f(x))`; spectral norm gives SPEL          |
//! | `StochasticMcsd`  | `lmo_norm(P_T(m_t))`, `m_t = β m_{t−1} + (1−β) g_t`     |
//! | `Rgd`             | `−∇_M f / ‖∇_M f‖_F` (the Frobenius MCSD step)          |
//! | `ManifoldMuon`    | tangent-restricted spectral LMO, solved iteratively    |

mod muon;
mod schedule;

pub use muon::{
    manifold_muon_direction, MuonDirection, DEFAULT_INNER_ITERS, DEFAULT_INNER_LR, DEFAULT_QUALITY_TOL,
};
pub use schedule::{StepSchedule, STIEFEL_RADIUS};

use serde::{Deserialize, Serialize};
use std::time::Instant;

use crate::error::{config, Error, Result};
use crate::linalg::{DenseMatrix, PolarMode};
use crate::lmo::{dual_norm, lmo, NormKind};
use crate::manifold::StiefelPoint;
use crate::objective::{NoiseConfig, Objective};
use crate::rng::RngStream;
use crate::trace::{RunTrace, TraceRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Method {
    Mcsd {
        norm: NormKind,
    },
    StochasticMcsd {
        norm: NormKind,
        beta: f64,
        noise: NoiseConfig,
    },
    Rgd,
    ManifoldMuon {
        inner_iters: usize,
        inner_lr: f64,
    },
}

impl Method {
    /// MCSD with the spectral norm.
    pub fn spel() -> Self {
        Method::Mcsd {
            norm: NormKind::Spectral,
        }
    }

    pub fn manifold_muon() -> Self {
        Method::ManifoldMuon {
            inner_iters: DEFAULT_INNER_ITERS,
            inner_lr: DEFAULT_INNER_LR,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Method::Mcsd {
                norm: NormKind::Spectral,
            } => "SPEL".into(),
            Method::Mcsd { norm } => format!("MCSD-{norm}"),
            Method::StochasticMcsd { norm, beta, .. } => format!("SMCSD-{norm}-beta{beta}"),
            Method::Rgd => "RGD".into(),
            Method::ManifoldMuon { inner_iters, .. } => format!("MM-{inner_iters}"),
        }
    }

    /// Norm whose dual measures stationarity for this method.
    pub fn norm(&self) -> NormKind {
        match self {
            Method::Mcsd { norm } | Method::StochasticMcsd { norm, .. } => *norm,
            Method::Rgd => NormKind::Frobenius,
            Method::ManifoldMuon { .. } => NormKind::Spectral,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Method::StochasticMcsd { beta, .. } if !(0.0..1.0).contains(beta) => {
                config(format!("momentum beta must lie in [0, 1), got {beta}"))
            }
            Method::ManifoldMuon { inner_iters, inner_lr } if *inner_iters == 0 || !(*inner_lr > 0.0) => {
                config("manifold muon needs inner_iters >= 1 and inner_lr > 0")
            }
            _ => Ok(()),
        }
    }
}

/// What one step did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub step_size: f64,
    pub inner_iters: usize,
    /// The direction was zero and the iterate was kept.
    pub held: bool,
    /// The Manifold Muon inner solve fell back to `−g/‖g‖₂`.
    pub fallback: bool,
}

/// One optimization trajectory: configuration plus evolving state.
#[derive(Debug, Clone)]
pub struct OptimizerRun {
    method: Method,
    schedule: StepSchedule,
    x: StiefelPoint,
    momentum: Option<DenseMatrix>,
    t: usize,
    rng: RngStream,
    polar_mode: PolarMode,
    converged: bool,
    quality_tol: f64,
    warnings: Vec<String>,
}

impl OptimizerRun {
    pub fn new(method: Method, schedule: StepSchedule, x0: StiefelPoint, polar_mode: PolarMode, seed: u64) -> Result<Self> {
        method.validate()?;
        Ok(Self {
            method,
            schedule,
            x: x0,
            momentum: None,
            t: 0,
            rng: RngStream::new(seed),
            polar_mode,
            converged: false,
            quality_tol: DEFAULT_QUALITY_TOL,
            warnings: Vec::new(),
        })
    }

    pub fn with_quality_tol(mut self, tol: f64) -> Self {
        self.quality_tol = tol;
        self
    }

    pub fn method(&self) -> &Method {
        &self.method
    }

    pub fn schedule(&self) -> &StepSchedule {
        &self.schedule
    }

    pub fn point(&self) -> &StiefelPoint {
        &self.x
    }

    pub fn momentum(&self) -> Option<&DenseMatrix> {
        self.momentum.as_ref()
    }

    pub fn iteration(&self) -> usize {
        self.t
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn polar_mode(&self) -> &PolarMode {
        &self.polar_mode
    }

    /// Advances one iteration with the configured method.
    pub fn step(&mut self, obj: &dyn Objective) -> Result<StepOutcome> {
        match self.method {
            Method::Mcsd { .. } => self.mcsd_step(obj),
            Method::StochasticMcsd { .. } => self.stochastic_mcsd_step(obj),
            Method::Rgd => self.rgd_step(obj),
            Method::ManifoldMuon { .. } => self.manifold_muon_step(obj),
        }
    }

    fn wrong_method<T>(&self, op: &str) -> Result<T> {
        config(format!("{op} called on a {} run", self.method.label()))
    }

    /// `x ← P(x + α lmo(∇_M f(x)))`.
    pub fn mcsd_step(&mut self, obj: &dyn Objective) -> Result<StepOutcome> {
        let Method::Mcsd { norm } = self.method else {
            return self.wrong_method("mcsd_step");
        };
        self.lmo_step(obj, norm)
    }

    /// `x ← P(x − α ∇_M f / ‖∇_M f‖_F)`, the Frobenius-norm MCSD step.
    pub fn rgd_step(&mut self, obj: &dyn Objective) -> Result<StepOutcome> {
        if self.method != Method::Rgd {
            return self.wrong_method("rgd_step");
        }
        self.lmo_step(obj, NormKind::Frobenius)
    }

    fn lmo_step(&mut self, obj: &dyn Objective, norm: NormKind) -> Result<StepOutcome> {
        let g = self.x.riemannian_grad(&obj.euclid_grad(self.x.matrix())?)?;
        let d = lmo(norm, &g, &self.polar_mode)?;
        self.finish(d, 0, false)
    }

    /// Samples `g_t`, updates the momentum (`m_0 = g_0`) and steps along the
    /// LMO of the tangent-projected momentum.
    pub fn stochastic_mcsd_step(&mut self, obj: &dyn Objective) -> Result<StepOutcome> {
        let Method::StochasticMcsd { norm, beta, noise } = self.method else {
            return self.wrong_method("stochastic_mcsd_step");
        };
        let g = obj.stochastic_grad(self.x.matrix(), &mut self.rng, &noise)?;
        let m = match self.momentum.take() {
            Some(prev) if self.t > 0 => prev.scale(beta).add_scaled(1.0 - beta, &g)?,
            _ => g,
        };
        let projected = self.x.tangent_project(&m)?;
        self.momentum = Some(m);
        let d = lmo(norm, &projected, &self.polar_mode)?;
        self.finish(d, 0, false)
    }

    /// Steps along the Manifold Muon direction.
    pub fn manifold_muon_step(&mut self, obj: &dyn Objective) -> Result<StepOutcome> {
        let Method::ManifoldMuon { inner_iters, inner_lr } = self.method else {
            return self.wrong_method("manifold_muon_step");
        };
        let g = self.x.riemannian_grad(&obj.euclid_grad(self.x.matrix())?)?;
        let dir = manifold_muon_direction(&self.x, &g, inner_iters, inner_lr, self.quality_tol, &self.polar_mode)?;
        let (d, iters, fallback) = match dir {
            Some(dir) => {
                if dir.fallback {
                    self.warnings.push(format!(
                        "iteration {}: inner solve missed the quality contract ({:e} > {:e}); used -g/|g|_2",
                        self.t, dir.value, dir.reference
                    ));
                }
                (Some(dir.d), dir.inner_iters, dir.fallback)
            }
            None => (None, 0, false),
        };
        self.finish(d, iters, fallback)
    }

    fn finish(&mut self, d: Option<DenseMatrix>, inner_iters: usize, fallback: bool) -> Result<StepOutcome> {
        let alpha = self.schedule.alpha(self.t);
        let held = d.is_none();
        match d {
            Some(d) => {
                let y = self.x.matrix().add_scaled(alpha, &d)?;
                let manifold = *self.x.manifold();
                self.x = manifold.project(&y, &self.polar_mode).map_err(|e| match e {
                    Error::Infeasible { violation, limit, .. } => Error::Infeasible {
                        iteration: self.t + 1,
                        violation,
                        limit,
                    },
                    other => other,
                })?;
                self.converged = false;
            }
            None => self.converged = true,
        }
        self.t += 1;
        Ok(StepOutcome {
            step_size: alpha,
            inner_iters,
            held,
            fallback,
        })
    }
}

/// Result of driving a run: the trace up to the last completed step and the
/// error that stopped it, if any.
#[derive(Debug)]
pub struct DriveResult {
    pub trace: RunTrace,
    pub error: Option<Error>,
}

/// Metrics of the current iterate, measured outside the timed region.
pub fn observe(run: &OptimizerRun, obj: &dyn Objective) -> Result<TraceRecord> {
    let x = run.point();
    let g = x.riemannian_grad(&obj.euclid_grad(x.matrix())?)?;
    Ok(TraceRecord {
        iter: run.iteration(),
        objective: obj.value(x.matrix())?,
        subspace_error: obj.subspace_error(x.matrix()).unwrap_or(f64::NAN),
        orth_violation: x.violation(),
        grad_dual_norm: dual_norm(run.method().norm(), &g)?,
        step_size: 0.0,
        inner_iters: 0,
        elapsed_s: 0.0,
    })
}

/// Runs `steps` iterations, recording every iterate including the initial
/// one. Only the step itself is timed; with `timing = false` the elapsed
/// column stays zero so traces are byte-reproducible.
pub fn drive(run: &mut OptimizerRun, obj: &dyn Objective, steps: usize, timing: bool) -> DriveResult {
    let mut trace = RunTrace::new(run.method().label());
    let mut elapsed = 0.0;
    let mut error = None;
    for _ in 0..steps {
        let mut rec = match observe(run, obj) {
            Ok(r) => r,
            Err(e) => {
                error = Some(e);
                break;
            }
        };
        rec.elapsed_s = elapsed;
        let start = Instant::now();
        let outcome = run.step(obj);
        let dt = start.elapsed().as_secs_f64();
        match outcome {
            Ok(out) => {
                if timing {
                    elapsed += dt;
                }
                rec.step_size = out.step_size;
                rec.inner_iters = out.inner_iters;
                trace.records.push(rec);
            }
            Err(e) => {
                trace.records.push(rec);
                error = Some(e);
                break;
            }
        }
    }
    if error.is_none() {
        match observe(run, obj) {
            Ok(mut rec) => {
                rec.elapsed_s = elapsed;
                trace.records.push(rec);
            }
            Err(e) => error = Some(e),
        }
    }
    trace.warnings = run.warnings().to_vec();
    DriveResult { trace, error }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::msign_exact;
    use crate::manifold::StiefelManifold;
    use crate::objective::BrockettInstance;

    fn instance() -> BrockettInstance {
        BrockettInstance::generate(20, 3, 60, 11).unwrap()
    }

    fn start(inst: &BrockettInstance, seed: u64) -> StiefelPoint {
        inst.manifold().unwrap().random_point(&mut RngStream::new(seed)).unwrap()
    }

    fn run(method: Method, schedule: StepSchedule, x0: StiefelPoint, mode: PolarMode) -> OptimizerRun {
        OptimizerRun::new(method, schedule, x0, mode, 99).unwrap()
    }

    /// Objective with a zero gradient everywhere.
    struct Flat(usize, usize);

    impl Objective for Flat {
        fn shape(&self) -> (usize, usize) {
            (self.0, self.1)
        }
        fn value(&self, _x: &DenseMatrix) -> Result<f64> {
            Ok(1.0)
        }
        fn euclid_grad(&self, _x: &DenseMatrix) -> Result<DenseMatrix> {
            Ok(DenseMatrix::zeros(self.0, self.1))
        }
        fn stochastic_grad(&self, x: &DenseMatrix, _: &mut RngStream, _: &NoiseConfig) -> Result<DenseMatrix> {
            self.euclid_grad(x)
        }
    }

    #[test]
    fn zero_gradient_holds_position() {
        let m = StiefelManifold::new(6, 2).unwrap();
        let x0 = m.random_point(&mut RngStream::new(1)).unwrap();
        let sched = StepSchedule::constant(0.1).unwrap();
        let noise = NoiseConfig::AdditiveGaussian { sigma_entry: 0.0 };
        for method in [
            Method::spel(),
            Method::Rgd,
            Method::manifold_muon(),
            Method::StochasticMcsd {
                norm: NormKind::Spectral,
                beta: 0.5,
                noise,
            },
        ] {
            let mut r = run(method, sched.clone(), x0.clone(), PolarMode::Exact);
            let out = r.step(&Flat(6, 2)).unwrap();
            assert!(out.held);
            assert!(r.converged());
            assert_eq!(r.point(), &x0);
            assert_eq!(r.iteration(), 1);
        }
    }

    #[test]
    fn spel_step_matches_closed_form() {
        let inst = instance();
        let x0 = start(&inst, 2);
        let alpha = 0.05;
        let mut r = run(Method::spel(), StepSchedule::constant(alpha).unwrap(), x0.clone(), PolarMode::Exact);
        r.step(&inst).unwrap();
        let g = x0.riemannian_grad(&inst.euclid_grad(x0.matrix()).unwrap()).unwrap();
        let want = msign_exact(&x0.matrix().add_scaled(-alpha, &msign_exact(&g).unwrap()).unwrap()).unwrap();
        assert!(r.point().matrix().sub(&want).unwrap().max_abs() <= 1e-12);
    }

    #[test]
    fn rgd_is_frobenius_mcsd() {
        let inst = instance();
        let x0 = start(&inst, 3);
        let sched = StepSchedule::periodic_decay(0.1, 0.5, 30).unwrap();
        for mode in [PolarMode::Exact, PolarMode::iterative(8)] {
            let mut a = run(Method::Rgd, sched.clone(), x0.clone(), mode.clone());
            let mut b = run(Method::Mcsd { norm: NormKind::Frobenius }, sched.clone(), x0.clone(), mode);
            for _ in 0..100 {
                a.step(&inst).unwrap();
                b.step(&inst).unwrap();
                let dev = a.point().matrix().sub(b.point().matrix()).unwrap().max_abs();
                assert!(dev <= 1e-12);
            }
        }
    }

    #[test]
    fn sphere_spectral_equals_frobenius() {
        let inst = BrockettInstance::generate(15, 1, 40, 4).unwrap();
        let x0 = start(&inst, 4);
        let sched = StepSchedule::constant(0.05).unwrap();
        let mut a = run(Method::spel(), sched.clone(), x0.clone(), PolarMode::Exact);
        let mut b = run(Method::Mcsd { norm: NormKind::Frobenius }, sched, x0, PolarMode::Exact);
        for _ in 0..100 {
            a.step(&inst).unwrap();
            b.step(&inst).unwrap();
            let dev = a.point().matrix().sub(b.point().matrix()).unwrap().max_abs();
            assert!(dev <= 1e-12);
        }
    }

    #[test]
    fn noiseless_memoryless_stochastic_equals_deterministic() {
        let inst = instance();
        let x0 = start(&inst, 5);
        let sched = StepSchedule::constant(0.02).unwrap();
        let noise = NoiseConfig::AdditiveGaussian { sigma_entry: 0.0 };
        let mut a = run(Method::spel(), sched.clone(), x0.clone(), PolarMode::Exact);
        let mut b = run(
            Method::StochasticMcsd {
                norm: NormKind::Spectral,
                beta: 0.0,
                noise,
            },
            sched,
            x0,
            PolarMode::Exact,
        );
        for _ in 0..50 {
            a.step(&inst).unwrap();
            b.step(&inst).unwrap();
            assert!(a.point().matrix().sub(b.point().matrix()).unwrap().max_abs() <= 1e-12);
        }
    }

    /// Records every sampled gradient so momentum can be checked against the
    /// unrolled sum.
    struct Recording<'a> {
        inner: &'a BrockettInstance,
        seen: std::sync::Mutex<Vec<DenseMatrix>>,
    }

    impl Objective for Recording<'_> {
        fn shape(&self) -> (usize, usize) {
            self.inner.shape()
        }
        fn value(&self, x: &DenseMatrix) -> Result<f64> {
            self.inner.value(x)
        }
        fn euclid_grad(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
            self.inner.euclid_grad(x)
        }
        fn stochastic_grad(&self, x: &DenseMatrix, rng: &mut RngStream, noise: &NoiseConfig) -> Result<DenseMatrix> {
            let g = self.inner.stochastic_grad(x, rng, noise)?;
            self.seen.lock().unwrap().push(g.clone());
            Ok(g)
        }
    }

    #[test]
    fn momentum_matches_unrolled_sum() {
        let inst = instance();
        let rec = Recording {
            inner: &inst,
            seen: Default::default(),
        };
        for beta in [0.0, 0.3, 0.9] {
            rec.seen.lock().unwrap().clear();
            let noise = NoiseConfig::AdditiveGaussian { sigma_entry: 0.7 };
            let mut r = run(
                Method::StochasticMcsd {
                    norm: NormKind::Spectral,
                    beta,
                    noise,
                },
                StepSchedule::constant(0.01).unwrap(),
                start(&inst, 6),
                PolarMode::Exact,
            );
            for t in 0..=20usize {
                r.step(&rec).unwrap();
                let gs = rec.seen.lock().unwrap();
                // m_t = (1−β) Σ_{i=1}^{t} β^{t−i} g_i + β^t g_0
                let mut want = gs[0].scale(beta.powi(t as i32));
                for i in 1..=t {
                    want = want.add_scaled((1.0 - beta) * beta.powi((t - i) as i32), &gs[i]).unwrap();
                }
                let m = r.momentum().unwrap();
                let scale = want.frobenius_norm().max(1.0);
                assert!(m.sub(&want).unwrap().max_abs() <= 1e-10 * scale, "beta {beta} t {t}");
                if beta == 0.0 {
                    assert_eq!(m, &gs[t]);
                }
            }
        }
    }

    #[test]
    fn wrong_method_is_a_configuration_error() {
        let inst = instance();
        let mut r = run(Method::Rgd, StepSchedule::constant(0.1).unwrap(), start(&inst, 7), PolarMode::Exact);
        assert!(matches!(r.mcsd_step(&inst), Err(Error::Config(_))));
        assert!(matches!(r.manifold_muon_step(&inst), Err(Error::Config(_))));
        let bad = Method::StochasticMcsd {
            norm: NormKind::Spectral,
            beta: 1.0,
            noise: NoiseConfig::AdditiveGaussian { sigma_entry: 0.0 },
        };
        assert!(OptimizerRun::new(bad, StepSchedule::constant(0.1).unwrap(), start(&inst, 7), PolarMode::Exact, 0).is_err());
    }

    #[test]
    fn under_iterated_projection_aborts_with_iteration() {
        let inst = instance();
        let mut r = run(Method::spel(), StepSchedule::constant(0.1).unwrap(), start(&inst, 8), PolarMode::iterative(1));
        match r.step(&inst) {
            Err(Error::Infeasible { iteration, .. }) => assert_eq!(iteration, 1),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn drive_records_every_iterate() {
        let inst = instance();
        let mut r = run(Method::manifold_muon(), StepSchedule::constant(0.05).unwrap(), start(&inst, 9), PolarMode::iterative(8));
        let out = drive(&mut r, &inst, 12, true);
        assert!(out.error.is_none());
        let recs = &out.trace.records;
        assert_eq!(recs.len(), 13);
        assert!(recs.windows(2).all(|w| w[1].iter == w[0].iter + 1));
        assert!(recs.windows(2).all(|w| w[1].elapsed_s >= w[0].elapsed_s));
        assert!(recs[..12].iter().all(|r| r.inner_iters == DEFAULT_INNER_ITERS && r.step_size == 0.05));
        assert_eq!(recs[12].step_size, 0.0);
        assert!(recs.iter().all(|r| r.orth_violation <= 1e-6));

        let empty = drive(&mut r, &inst, 0, true);
        assert_eq!(empty.trace.records.len(), 1);
    }

    #[test]
    fn drive_is_deterministic_without_timing() {
        let inst = instance();
        let noise = NoiseConfig::AdditiveGaussian { sigma_entry: 0.3 };
        let method = Method::StochasticMcsd {
            norm: NormKind::Spectral,
            beta: 0.9,
            noise,
        };
        let go = || {
            let mut r = run(method.clone(), StepSchedule::constant(0.01).unwrap(), start(&inst, 10), PolarMode::iterative(8));
            drive(&mut r, &inst, 20, false).trace
        };
        assert_eq!(go(), go());
    }
}
