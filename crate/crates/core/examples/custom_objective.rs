//! Plugging a user objective into the optimizers: orthogonal Procrustes,
//! f(X) = ½|AX - B|_F², minimized over St(n, p) with SPEL.
//!
//! cargo run --release --example custom_objective

use mcsd::linalg::{DenseMatrix, PolarMode};
use mcsd::manifold::StiefelManifold;
use mcsd::objective::Objective;
use mcsd::optim::{drive, Method, OptimizerRun, StepSchedule};
use mcsd::rng::RngStream;
use mcsd::verify;

struct Procrustes {
    a: DenseMatrix,
    b: DenseMatrix,
}

impl Objective for Procrustes {
    fn shape(&self) -> (usize, usize) {
        (self.a.cols(), self.b.cols())
    }

    fn value(&self, x: &DenseMatrix) -> mcsd::Result<f64> {
        let r = self.a.matmul(x)?.sub(&self.b)?;
        Ok(0.5 * r.frobenius_norm().powi(2))
    }

    fn euclid_grad(&self, x: &DenseMatrix) -> mcsd::Result<DenseMatrix> {
        self.a.t_matmul(&self.a.matmul(x)?.sub(&self.b)?)
    }
}

fn main() -> mcsd::Result<()> {
    let (m, n, p) = (60, 20, 4);
    let mut rng = RngStream::new(2);
    let st = StiefelManifold::new(n, p)?;
    let truth = st.random_point(&mut rng)?;
    let a = rng.gaussian_matrix(m, n);
    let b = a.matmul(truth.matrix())?;
    let obj = Procrustes { a, b };

    let x0 = st.random_point(&mut rng)?;
    let fd = verify::central_difference(&obj, x0.matrix(), 1e-6)?;
    let g = obj.euclid_grad(x0.matrix())?;
    println!("gradient check: relative error {:.2e}", fd.sub(&g)?.frobenius_norm() / g.frobenius_norm());

    let sched = StepSchedule::periodic_decay(0.1, 0.5, 40)?;
    let mut run = OptimizerRun::new(Method::spel(), sched, x0, PolarMode::default(), 0)?;
    let out = drive(&mut run, &obj, 200, true);
    if let Some(e) = out.error {
        return Err(e);
    }
    for r in out.trace.records.iter().step_by(40) {
        println!("t = {:>3}  f = {:.4e}  |grad|_nuc = {:.3e}", r.iter, r.objective, r.grad_dual_norm);
    }
    let dist = run.point().matrix().sub(truth.matrix())?.frobenius_norm();
    println!("|X - X_true|_F = {dist:.3e} after {} steps, {:.3}s", out.trace.steps(), out.trace.total_time());
    Ok(())
}
