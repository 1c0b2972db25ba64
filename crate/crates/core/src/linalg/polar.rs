//! Matrix sign / polar factor `msign(Y) = U Vᵀ` for `Y = U Σ Vᵀ`.
//!
//! Two routes: an exact one through the SVD, used as the oracle and for
//! verification runs, and an odd-polynomial fixed-point iteration that only
//! needs matrix products.

use serde::{Deserialize, Serialize};

use super::{svd, DenseMatrix};
use crate::error::{config, Error, Result};

/// Relative threshold on `sigma_min / sigma_max` below which the polar
/// factor is treated as undefined.
pub const RANK_TOL: f64 = 1e-10;

/// Default iteration count for the iterative route.
pub const DEFAULT_POLAR_ITERS: usize = 8;

/// Coefficient schedule for the odd-polynomial polar iteration
///
/// ```text
/// X_{k+1} = a_k X_k + b_k X_k (X_kᵀ X_k) + c_k X_k (X_kᵀ X_k)²
/// ```
///
/// applied after scaling the input by `1 / (prescale · ‖Y‖_F)`. Iterations
/// past the end of `coeffs` reuse the last triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarScheme {
    pub coeffs: Vec<[f64; 3]>,
    pub prescale: f64,
}

impl Default for PolarScheme {
    fn default() -> Self {
        Self::newton_schulz()
    }
}

impl PolarScheme {
    /// Cubic Newton–Schulz, `X ← (3X − X XᵀX) / 2`, with input scaled by
    /// `1.01 ‖Y‖_F` so every singular value starts in `(0, 1)`.
    pub fn newton_schulz() -> Self {
        Self {
            coeffs: vec![[1.5, -0.5, 0.0]],
            prescale: 1.01,
        }
    }

    pub fn custom(coeffs: Vec<[f64; 3]>, prescale: f64) -> Result<Self> {
        if coeffs.is_empty() {
            return config("polar scheme needs at least one coefficient triple");
        }
        if !(prescale.is_finite() && prescale > 0.0) {
            return config(format!("polar prescale must be positive, got {prescale}"));
        }
        Ok(Self { coeffs, prescale })
    }

    fn step(&self, k: usize) -> [f64; 3] {
        self.coeffs[k.min(self.coeffs.len() - 1)]
    }
}

/// How the polar factor is evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PolarMode {
    Exact,
    Iterative { iters: usize, scheme: PolarScheme },
}

impl PolarMode {
    pub fn iterative(iters: usize) -> Self {
        PolarMode::Iterative {
            iters,
            scheme: PolarScheme::newton_schulz(),
        }
    }

    /// Parses `exact` or `iterative:<iters>` (Newton–Schulz).
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("exact") {
            return Ok(PolarMode::Exact);
        }
        if let Some(rest) = s.strip_prefix("iterative") {
            let rest = rest.trim_start_matches([':', '(']).trim_end_matches(')');
            let iters = if rest.is_empty() {
                DEFAULT_POLAR_ITERS
            } else {
                rest.parse::<usize>()
                    .map_err(|_| Error::Config(format!("bad polar iteration count `{rest}`")))?
            };
            if iters == 0 {
                return config("polar iteration count must be at least 1");
            }
            return Ok(PolarMode::iterative(iters));
        }
        config(format!("unknown polar mode `{s}` (expected exact | iterative:<k>)"))
    }

    pub fn label(&self) -> String {
        match self {
            PolarMode::Exact => "exact".into(),
            PolarMode::Iterative { iters, .. } => format!("iterative:{iters}"),
        }
    }
}

impl Default for PolarMode {
    fn default() -> Self {
        PolarMode::iterative(DEFAULT_POLAR_ITERS)
    }
}

/// The polar factor of a single row or column is `y / ‖y‖_F`.
fn vector_polar(y: &DenseMatrix) -> Result<Option<DenseMatrix>> {
    if y.rows() != 1 && y.cols() != 1 {
        return Ok(None);
    }
    if !y.is_finite() {
        return Err(Error::Numeric {
            routine: "msign",
            iteration: 0,
            detail: "non-finite input".into(),
        });
    }
    let norm = y.frobenius_norm();
    Ok(Some(if norm == 0.0 { y.clone() } else { y.scale(1.0 / norm) }))
}

/// Polar factor from the SVD. Fails when `sigma_min <= RANK_TOL * sigma_max`.
pub fn msign_exact(y: &DenseMatrix) -> Result<DenseMatrix> {
    if let Some(v) = vector_polar(y)? {
        return if v.max_abs() == 0.0 {
            Err(Error::RankDeficient {
                sigma_min: 0.0,
                tol: 0.0,
            })
        } else {
            Ok(v)
        };
    }
    let f = svd(y)?;
    let smax = f.s.first().copied().unwrap_or(0.0);
    let smin = f.s.last().copied().unwrap_or(0.0);
    let tol = RANK_TOL * smax;
    if smax == 0.0 || smin <= tol {
        return Err(Error::RankDeficient {
            sigma_min: smin,
            tol,
        });
    }
    f.u.matmul(&f.vt)
}

/// `U_r V_rᵀ` over the singular values above `RANK_TOL * sigma_max`. Equals
/// [`msign_exact`] on full-rank input and stays defined on rank-deficient
/// input; the zero matrix maps to zero.
pub fn msign_truncated(y: &DenseMatrix) -> Result<DenseMatrix> {
    if let Some(v) = vector_polar(y)? {
        return Ok(v);
    }
    let f = svd(y)?;
    let smax = f.s.first().copied().unwrap_or(0.0);
    let tol = RANK_TOL * smax;
    let mask: Vec<f64> = f
        .s
        .iter()
        .map(|&s| if smax > 0.0 && s > tol { 1.0 } else { 0.0 })
        .collect();
    f.u.scale_columns(&mask)?.matmul(&f.vt)
}

/// Iterative polar factor. With the default scheme the iteration contracts
/// for any input because prescaling puts the spectrum inside `(0, 1)`;
/// singular values that are tiny relative to `‖Y‖_F` converge slowly.
pub fn msign_iterative(y: &DenseMatrix, scheme: &PolarScheme, iters: usize) -> Result<DenseMatrix> {
    if iters == 0 {
        return config("msign_iterative: iters must be >= 1");
    }
    let fro = y.frobenius_norm();
    if !fro.is_finite() {
        return Err(Error::Numeric {
            routine: "msign_iterative",
            iteration: 0,
            detail: "non-finite input".into(),
        });
    }
    if fro == 0.0 {
        return Err(Error::RankDeficient {
            sigma_min: 0.0,
            tol: 0.0,
        });
    }
    let tall = y.rows() >= y.cols();
    let limit = 10.0 * (y.rows().min(y.cols()) as f64).sqrt();
    let mut x = y.scale(1.0 / (scheme.prescale * fro));
    for k in 0..iters {
        let [a, b, c] = scheme.step(k);
        // Gram on the short side: XᵀX for tall, XXᵀ for wide.
        let gram = if tall { x.t_matmul(&x)? } else { x.matmul_t(&x)? };
        let poly = if c == 0.0 {
            gram.scale(b)
        } else {
            gram.scale(b).add_scaled(c, &gram.matmul(&gram)?)?
        };
        let correction = if tall { x.matmul(&poly)? } else { poly.matmul(&x)? };
        x = x.scale(a).add(&correction)?;
        let norm = x.frobenius_norm();
        if !norm.is_finite() || norm > limit {
            return Err(Error::Numeric {
                routine: "msign_iterative",
                iteration: k + 1,
                detail: format!("iterate norm {norm:e} exceeds {limit:e}"),
            });
        }
    }
    Ok(x)
}

/// Polar factor under the given mode.
pub fn msign(y: &DenseMatrix, mode: &PolarMode) -> Result<DenseMatrix> {
    match mode {
        PolarMode::Exact => msign_exact(y),
        PolarMode::Iterative { iters, scheme } => msign_iterative(y, scheme, *iters),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn orth(q: &DenseMatrix) -> f64 {
        let g = q.t_matmul(q).unwrap();
        g.sub(&DenseMatrix::identity(g.rows())).unwrap().frobenius_norm()
    }

    fn stiefel(rng: &mut RngStream, n: usize, p: usize) -> DenseMatrix {
        msign_exact(&rng.gaussian_matrix(n, p)).unwrap()
    }

    /// Random matrix with prescribed singular values.
    fn with_spectrum(rng: &mut RngStream, n: usize, s: &[f64]) -> DenseMatrix {
        let u = stiefel(rng, n, s.len());
        let v = stiefel(rng, s.len(), s.len());
        u.scale_columns(s).unwrap().matmul_t(&v).unwrap()
    }

    #[test]
    fn exact_fixed_point_and_scale_invariance() {
        let mut rng = RngStream::new(1);
        let x = stiefel(&mut rng, 6, 3);
        assert!(orth(&x) <= 1e-12);
        assert!(msign_exact(&x).unwrap().sub(&x).unwrap().max_abs() <= 1e-12);
        let y = x.scale(3.7);
        assert!(msign_exact(&y).unwrap().sub(&x).unwrap().max_abs() <= 1e-12);
    }

    #[test]
    fn exact_on_signed_diagonal() {
        let y = DenseMatrix::from_diag(&[2.0, -3.0]);
        let q = msign_exact(&y).unwrap();
        let want = DenseMatrix::from_diag(&[1.0, -1.0]);
        assert!(q.sub(&want).unwrap().max_abs() <= 1e-14);
    }

    #[test]
    fn exact_rejects_rank_deficient() {
        let mut y = DenseMatrix::zeros(3, 2);
        y[(0, 0)] = 1.0;
        assert!(matches!(msign_exact(&y), Err(Error::RankDeficient { .. })));
        assert!(matches!(
            msign_exact(&DenseMatrix::zeros(2, 2)),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn truncated_handles_rank_deficiency() {
        let mut y = DenseMatrix::zeros(3, 2);
        y[(0, 0)] = -5.0;
        let q = msign_truncated(&y).unwrap();
        let mut want = DenseMatrix::zeros(3, 2);
        want[(0, 0)] = -1.0;
        assert!(q.sub(&want).unwrap().max_abs() <= 1e-14);
        assert_eq!(msign_truncated(&DenseMatrix::zeros(2, 2)).unwrap(), DenseMatrix::zeros(2, 2));
    }

    #[test]
    fn exact_is_right_equivariant() {
        let mut rng = RngStream::new(2);
        for _ in 0..10 {
            let y = rng.gaussian_matrix(7, 4);
            let q = stiefel(&mut rng, 4, 4);
            let lhs = msign_exact(&y.matmul(&q).unwrap()).unwrap();
            let rhs = msign_exact(&y).unwrap().matmul(&q).unwrap();
            assert!(lhs.sub(&rhs).unwrap().frobenius_norm() <= 1e-9);
            assert!(orth(&lhs) <= 1e-10);
        }
    }

    #[test]
    fn iterative_fixed_point_and_scalar() {
        let mut rng = RngStream::new(3);
        let x = stiefel(&mut rng, 9, 4);
        let scheme = PolarScheme::newton_schulz();
        // Prescaling moves a Stiefel input off the fixed point, so only the
        // converged iterate reproduces it.
        let q = msign_iterative(&x, &scheme, 30).unwrap();
        assert!(q.sub(&x).unwrap().max_abs() <= 1e-12);
        let s = msign_iterative(&DenseMatrix::from_rows(&[&[-4.0]]), &scheme, 8).unwrap();
        assert!((s[(0, 0)] + 1.0).abs() <= 1e-12);
    }

    #[test]
    fn iterative_matches_exact_gaussian_200x5() {
        let mut rng = RngStream::new(4);
        let y = rng.gaussian_matrix(200, 5);
        let q = msign_iterative(&y, &PolarScheme::newton_schulz(), 8).unwrap();
        let e = msign_exact(&y).unwrap();
        assert!(q.sub(&e).unwrap().frobenius_norm() <= 1e-6);
    }

    #[test]
    fn iterative_converges_on_well_conditioned_inputs() {
        let mut rng = RngStream::new(5);
        for cond in [1.0, 3.0, 10.0] {
            let y = with_spectrum(&mut rng, 12, &[cond, 0.5 * (cond + 1.0), 1.0]);
            let q = msign_iterative(&y, &PolarScheme::newton_schulz(), 30).unwrap();
            let e = msign_exact(&y).unwrap();
            assert!(q.sub(&e).unwrap().frobenius_norm() <= 1e-10, "cond {cond}");
        }
    }

    /// Eight cubic steps after Frobenius prescaling reach 1e-6 for condition
    /// numbers up to about 3; at 10 the smallest prescaled singular value is
    /// below 0.1 and twelve steps are needed.
    #[test]
    fn iterative_accuracy_by_condition_number() {
        let mut rng = RngStream::new(7);
        let ns = PolarScheme::newton_schulz();
        let err = |y: &DenseMatrix, k: usize| {
            msign_iterative(y, &ns, k).unwrap().sub(&msign_exact(y).unwrap()).unwrap().frobenius_norm()
        };
        for s in [&[3.0, 2.0, 1.0][..], &[2.0, 1.0], &[3.0, 1.0, 1.0, 1.0, 1.0]] {
            assert!(err(&with_spectrum(&mut rng, 20, s), 8) <= 1e-6, "{s:?}");
        }
        for s in [&[10.0, 1.0][..], &[10.0, 1.0, 1.0, 1.0, 1.0], &[10.0, 10.0, 10.0, 10.0, 1.0]] {
            let y = with_spectrum(&mut rng, 20, s);
            assert!(err(&y, 8) > 1e-6, "{s:?}");
            assert!(err(&y, 12) <= 1e-6, "{s:?}");
        }
    }

    #[test]
    fn iterative_handles_wide_input() {
        let mut rng = RngStream::new(6);
        let y = rng.gaussian_matrix(3, 10);
        let q = msign_iterative(&y, &PolarScheme::newton_schulz(), 30).unwrap();
        let e = msign_exact(&y).unwrap();
        assert!(q.sub(&e).unwrap().frobenius_norm() <= 1e-10);
    }

    #[test]
    fn iterative_reports_divergence() {
        let bad = PolarScheme::custom(vec![[3.0, 0.0, 0.0]], 1.01).unwrap();
        let y = DenseMatrix::identity(2);
        match msign_iterative(&y, &bad, 10) {
            Err(Error::Numeric { iteration, .. }) => assert!(iteration >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
        assert!(msign_iterative(&y, &PolarScheme::default(), 0).is_err());
    }

    #[test]
    fn mode_parsing() {
        assert_eq!(PolarMode::parse("exact").unwrap(), PolarMode::Exact);
        assert_eq!(PolarMode::parse("iterative:8").unwrap(), PolarMode::iterative(8));
        assert_eq!(PolarMode::parse("iterative").unwrap(), PolarMode::iterative(8));
        assert!(PolarMode::parse("iterative:0").is_err());
        assert!(PolarMode::parse("qr").is_err());
    }
}
