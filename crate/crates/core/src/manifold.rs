//! The Stiefel manifold `St(n,p) = { X : XᵀX = I_p }` as an embedded
//! submanifold of `R^{n×p}`. The unit sphere is `St(n,1)`.

use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::linalg::{msign, sym, DenseMatrix, PolarMode};
use crate::rng::RngStream;

pub const DEFAULT_FEAS_TOL: f64 = 1e-8;

/// Iterates may drift up to this multiple of `feas_tol` before a run aborts.
pub const DRIFT_FACTOR: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StiefelManifold {
    n: usize,
    p: usize,
    feas_tol: f64,
}

impl StiefelManifold {
    pub fn new(n: usize, p: usize) -> Result<Self> {
        Self::with_tolerance(n, p, DEFAULT_FEAS_TOL)
    }

    pub fn with_tolerance(n: usize, p: usize, feas_tol: f64) -> Result<Self> {
        if p == 0 || p > n {
            return config(format!("St(n,p) requires 1 <= p <= n, got n={n}, p={p}"));
        }
        if !(feas_tol > 0.0) {
            return config(format!("feasibility tolerance must be positive, got {feas_tol}"));
        }
        Ok(Self { n, p, feas_tol })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn feas_tol(&self) -> f64 {
        self.feas_tol
    }

    pub fn drift_limit(&self) -> f64 {
        DRIFT_FACTOR * self.feas_tol
    }

    fn check_shape(&self, y: &DenseMatrix, what: &str) -> Result<()> {
        if y.shape() != (self.n, self.p) {
            return config(format!(
                "{what}: expected {}x{}, got {}x{}",
                self.n,
                self.p,
                y.rows(),
                y.cols()
            ));
        }
        Ok(())
    }

    /// Certifies `x` as a point of the manifold (violation within `feas_tol`).
    pub fn point(&self, x: DenseMatrix) -> Result<StiefelPoint> {
        self.check_shape(&x, "point")?;
        let violation = feasibility_violation(&x);
        if !(violation <= self.feas_tol) {
            return Err(Error::Infeasible {
                iteration: 0,
                violation,
                limit: self.feas_tol,
            });
        }
        Ok(StiefelPoint { x, manifold: *self })
    }

    /// Nearest-point projection `P_St(Y) = msign(Y)`.
    ///
    /// The result is only required to sit within [`drift_limit`](Self::drift_limit),
    /// so inexact iterative projections surface as measurable drift instead of
    /// an immediate failure.
    pub fn project(&self, y: &DenseMatrix, mode: &PolarMode) -> Result<StiefelPoint> {
        self.check_shape(y, "project")?;
        let x = msign(y, mode)?;
        let violation = feasibility_violation(&x);
        if !(violation <= self.drift_limit()) {
            return Err(Error::Infeasible {
                iteration: 0,
                violation,
                limit: self.drift_limit(),
            });
        }
        Ok(StiefelPoint { x, manifold: *self })
    }

    /// Haar-distributed point: the polar factor of a Gaussian draw.
    pub fn random_point(&self, rng: &mut RngStream) -> Result<StiefelPoint> {
        let mut last = None;
        for _ in 0..2 {
            let g = rng.gaussian_matrix(self.n, self.p);
            match self.project(&g, &PolarMode::Exact) {
                Ok(x) => return Ok(x),
                Err(e @ Error::RankDeficient { .. }) => last = Some(e),
                Err(e) => return Err(e),
            }
        }
        Err(last.expect("loop ran"))
    }
}

/// A matrix with orthonormal columns, tagged with its manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelPoint {
    x: DenseMatrix,
    manifold: StiefelManifold,
}

impl StiefelPoint {
    pub fn matrix(&self) -> &DenseMatrix {
        &self.x
    }

    pub fn into_matrix(self) -> DenseMatrix {
        self.x
    }

    pub fn manifold(&self) -> &StiefelManifold {
        &self.manifold
    }

    pub fn violation(&self) -> f64 {
        feasibility_violation(&self.x)
    }

    /// Orthogonal projection onto the tangent space, `G − X sym(XᵀG)`.
    pub fn tangent_project(&self, g: &DenseMatrix) -> Result<DenseMatrix> {
        self.manifold.check_shape(g, "tangent_project")?;
        let s = sym(&self.x.t_matmul(g)?)?;
        g.sub(&self.x.matmul(&s)?)
    }

    /// Riemannian gradient under the embedded metric.
    pub fn riemannian_grad(&self, euclid_grad: &DenseMatrix) -> Result<DenseMatrix> {
        self.tangent_project(euclid_grad)
    }

    /// Frobenius norm of `sym(Xᵀ Z)`, zero exactly for tangent `Z`.
    pub fn tangency_residual(&self, z: &DenseMatrix) -> Result<f64> {
        Ok(sym(&self.x.t_matmul(z)?)?.frobenius_norm())
    }
}

/// `‖XᵀX − I_p‖_F`.
pub fn feasibility_violation(x: &DenseMatrix) -> f64 {
    let g = x.t_matmul(x).expect("XᵀX is always defined");
    g.sub(&DenseMatrix::identity(x.cols()))
        .expect("same shape")
        .frobenius_norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::msign_exact;

    fn setup(n: usize, p: usize, seed: u64) -> (StiefelManifold, RngStream) {
        (StiefelManifold::new(n, p).unwrap(), RngStream::new(seed))
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(StiefelManifold::new(2, 3).is_err());
        assert!(StiefelManifold::new(2, 0).is_err());
    }

    #[test]
    fn projection_is_idempotent_and_scale_free() {
        let (m, mut rng) = setup(8, 3, 1);
        let x = m.random_point(&mut rng).unwrap();
        let again = m.project(x.matrix(), &PolarMode::Exact).unwrap();
        assert!(again.matrix().sub(x.matrix()).unwrap().max_abs() <= 1e-12);
        let doubled = m.project(&x.matrix().scale(2.0), &PolarMode::Exact).unwrap();
        assert!(doubled.matrix().sub(x.matrix()).unwrap().max_abs() <= 1e-12);
        let y = rng.gaussian_matrix(8, 3);
        let p1 = m.project(&y, &PolarMode::Exact).unwrap();
        let p2 = m.project(p1.matrix(), &PolarMode::Exact).unwrap();
        assert!(p2.matrix().sub(p1.matrix()).unwrap().frobenius_norm() <= 1e-10);
    }

    #[test]
    fn projection_beats_sampled_points() {
        let (m, mut rng) = setup(6, 2, 2);
        let y = rng.gaussian_matrix(6, 2);
        let best = m.project(&y, &PolarMode::Exact).unwrap();
        let d_best = best.matrix().sub(&y).unwrap().frobenius_norm();
        for _ in 0..100_000 {
            let z = m.random_point(&mut rng).unwrap();
            let d = z.matrix().sub(&y).unwrap().frobenius_norm();
            assert!(d >= d_best - 1e-12);
        }
    }

    #[test]
    fn tangent_projection_cases() {
        let (m, mut rng) = setup(7, 3, 3);
        let x = m.random_point(&mut rng).unwrap();
        let z = x.tangent_project(x.matrix()).unwrap();
        assert!(z.max_abs() <= 1e-14);

        // XᵀG skew: G = X K with K skew, plus a normal-space-free component.
        let mut k = DenseMatrix::zeros(3, 3);
        k[(0, 1)] = 1.5;
        k[(1, 0)] = -1.5;
        k[(1, 2)] = -0.5;
        k[(2, 1)] = 0.5;
        let perp = x.tangent_project(&rng.gaussian_matrix(7, 3)).unwrap();
        let g = x.matrix().matmul(&k).unwrap().add(&perp).unwrap();
        assert!(x.tangent_project(&g).unwrap().sub(&g).unwrap().max_abs() <= 1e-12);

        for _ in 0..20 {
            let g = rng.gaussian_matrix(7, 3);
            let t1 = x.tangent_project(&g).unwrap();
            let t2 = x.tangent_project(&t1).unwrap();
            assert!(t2.sub(&t1).unwrap().max_abs() <= 1e-12);
            assert!(x.tangency_residual(&t1).unwrap() <= 1e-10);
            assert!(t1.frobenius_norm() <= g.frobenius_norm() * (1.0 + 1e-14));
        }
        assert!(x.tangent_project(&DenseMatrix::zeros(3, 7)).is_err());
    }

    #[test]
    fn riemannian_gradient_residual_is_normal() {
        let (m, mut rng) = setup(9, 3, 4);
        let x = m.random_point(&mut rng).unwrap();
        let a = rng.gaussian_matrix(9, 9);
        let c = a.matmul_t(&a).unwrap();
        // Brockett-style gradient −C X D.
        let g = c.matmul(x.matrix()).unwrap().scale_columns(&[-3.0, -2.0, -1.0]).unwrap();
        let rg = x.riemannian_grad(&g).unwrap();
        let resid = g.sub(&rg).unwrap();
        for _ in 0..100 {
            let z = x.tangent_project(&rng.gaussian_matrix(9, 3)).unwrap();
            assert!(resid.inner(&z).unwrap().abs() <= 1e-9);
        }
        assert_eq!(
            x.riemannian_grad(&DenseMatrix::zeros(9, 3)).unwrap(),
            DenseMatrix::zeros(9, 3)
        );
        assert!(x.riemannian_grad(&rg).unwrap().sub(&rg).unwrap().max_abs() <= 1e-12);
    }

    #[test]
    fn feasibility_violation_values() {
        let (m, mut rng) = setup(6, 4, 5);
        let x = m.random_point(&mut rng).unwrap();
        assert!(x.violation() <= 1e-10);
        let v = feasibility_violation(&x.matrix().scale(2.0));
        assert!((v - 3.0 * 2.0).abs() <= 1e-12, "{v}");
        assert!((feasibility_violation(&DenseMatrix::zeros(6, 4)) - 2.0).abs() <= 1e-15);
    }

    #[test]
    fn random_points_are_deterministic_and_centered() {
        let m = StiefelManifold::new(5, 2).unwrap();
        let a = m.random_point(&mut RngStream::new(9)).unwrap();
        let b = m.random_point(&mut RngStream::new(9)).unwrap();
        assert_eq!(a, b);

        let mut rng = RngStream::new(10);
        let mut vals = Vec::new();
        while vals.len() < 10_000 {
            vals.extend_from_slice(m.random_point(&mut rng).unwrap().matrix().data());
        }
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() <= 3.0 * (var / n).sqrt(), "mean {mean}");
    }

    #[test]
    fn sphere_reduction() {
        let (m, mut rng) = setup(6, 1, 6);
        let y = rng.gaussian_matrix(6, 1);
        let p = m.project(&y, &PolarMode::Exact).unwrap();
        let direct = y.scale(1.0 / y.frobenius_norm());
        assert!(p.matrix().sub(&direct).unwrap().max_abs() <= 1e-12);
        let g = rng.gaussian_matrix(6, 1);
        let xtg = p.matrix().inner(&g).unwrap();
        let direct = g.add_scaled(-xtg, p.matrix()).unwrap();
        assert!(p.tangent_project(&g).unwrap().sub(&direct).unwrap().max_abs() <= 1e-12);
    }

    #[test]
    fn point_certification() {
        let (m, mut rng) = setup(5, 2, 7);
        let q = msign_exact(&rng.gaussian_matrix(5, 2)).unwrap();
        assert!(m.point(q.clone()).is_ok());
        assert!(matches!(m.point(q.scale(1.1)), Err(Error::Infeasible { .. })));
    }
}
