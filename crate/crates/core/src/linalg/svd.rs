//! One-sided (Hestenes) Jacobi SVD.
//!
//! Columns are orthogonalized pairwise by plane rotations until every pair is
//! orthogonal to working precision. The column norms are then the singular
//! values. Matrices wider than tall are handled through their transpose.

use super::{dot, DenseMatrix};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 60;

/// Thin SVD `y = u · diag(s) · vt` with `k = min(rows, cols)`.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    pub vt: DenseMatrix,
}

impl SvdFactors {
    pub fn reconstruct(&self) -> DenseMatrix {
        self.u
            .scale_columns(&self.s)
            .and_then(|us| us.matmul(&self.vt))
            .expect("factor shapes agree")
    }
}

struct Jacobi {
    /// Working columns (length `m` each), rotated in place.
    cols: Vec<Vec<f64>>,
    /// Accumulated right rotations, stored by column.
    v: Option<Vec<Vec<f64>>>,
}

impl Jacobi {
    fn run(a: &DenseMatrix, want_v: bool) -> Result<Self> {
        if !a.is_finite() {
            return Err(Error::Numeric {
                routine: "svd",
                iteration: 0,
                detail: "non-finite input".into(),
            });
        }
        let n = a.cols();
        let cols: Vec<Vec<f64>> = (0..n).map(|j| a.col(j)).collect();
        let v = want_v.then(|| {
            (0..n)
                .map(|j| {
                    let mut e = vec![0.0; n];
                    e[j] = 1.0;
                    e
                })
                .collect()
        });
        let mut state = Self { cols, v };
        state.sweep_until_converged()?;
        Ok(state)
    }

    fn sweep_until_converged(&mut self) -> Result<()> {
        let n = self.cols.len();
        let tol = f64::EPSILON;
        for sweep in 0..MAX_SWEEPS {
            let mut rotated = false;
            for i in 0..n {
                for j in (i + 1)..n {
                    let alpha = dot(&self.cols[i], &self.cols[i]);
                    let beta = dot(&self.cols[j], &self.cols[j]);
                    let gamma = dot(&self.cols[i], &self.cols[j]);
                    if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (2.0 * gamma);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    rotate(&mut self.cols, i, j, c, s);
                    if let Some(v) = self.v.as_mut() {
                        rotate(v, i, j, c, s);
                    }
                }
            }
            if !rotated {
                return Ok(());
            }
            if sweep + 1 == MAX_SWEEPS {
                break;
            }
        }
        Err(Error::Numeric {
            routine: "svd",
            iteration: MAX_SWEEPS,
            detail: "Jacobi sweeps did not converge".into(),
        })
    }

    /// Column norms and the permutation sorting them descending.
    fn sorted_norms(&self) -> (Vec<f64>, Vec<usize>) {
        let norms: Vec<f64> = self.cols.iter().map(|c| dot(c, c).sqrt()).collect();
        let mut order: Vec<usize> = (0..norms.len()).collect();
        order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
        (order.iter().map(|&k| norms[k]).collect(), order)
    }
}

fn rotate(cols: &mut [Vec<f64>], i: usize, j: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(j);
    let (ci, cj) = (&mut lo[i], &mut hi[0]);
    for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Singular values of `a`, descending.
pub fn singular_values(a: &DenseMatrix) -> Result<Vec<f64>> {
    let tall = if a.rows() >= a.cols() {
        a.clone()
    } else {
        a.transpose()
    };
    let j = Jacobi::run(&tall, false)?;
    Ok(j.sorted_norms().0)
}

/// Thin singular value decomposition.
pub fn svd(y: &DenseMatrix) -> Result<SvdFactors> {
    if y.rows() < y.cols() {
        let f = svd(&y.transpose())?;
        return Ok(SvdFactors {
            u: f.vt.transpose(),
            s: f.s,
            vt: f.u.transpose(),
        });
    }
    let (m, n) = y.shape();
    let jac = Jacobi::run(y, true)?;
    let (s, order) = jac.sorted_norms();
    let v = jac.v.as_ref().expect("requested");
    let smax = s.first().copied().unwrap_or(0.0);
    let null_tol = smax * f64::EPSILON * m as f64;

    let mut ucols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut deficient = Vec::new();
    for (k, &src) in order.iter().enumerate() {
        if s[k] > null_tol && s[k] > 0.0 {
            ucols.push(jac.cols[src].iter().map(|x| x / s[k]).collect());
        } else {
            deficient.push(k);
            ucols.push(vec![0.0; m]);
        }
    }
    complete_basis(&mut ucols, &deficient);

    let mut u = DenseMatrix::zeros(m, n);
    let mut vt = DenseMatrix::zeros(n, n);
    for k in 0..n {
        for i in 0..m {
            u[(i, k)] = ucols[k][i];
        }
        let vc = &v[order[k]];
        for i in 0..n {
            vt[(k, i)] = vc[i];
        }
    }
    Ok(SvdFactors { u, s, vt })
}

/// Fills the columns listed in `missing` with unit vectors orthogonal to all
/// other columns (Gram–Schmidt against canonical basis vectors, twice).
fn complete_basis(cols: &mut [Vec<f64>], missing: &[usize]) {
    if missing.is_empty() {
        return;
    }
    let m = cols[0].len();
    let mut candidate = 0usize;
    for &k in missing {
        while candidate < m {
            let mut e = vec![0.0; m];
            e[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for (idx, c) in cols.iter().enumerate() {
                    if idx == k || (missing.contains(&idx) && dot(c, c) == 0.0) {
                        continue;
                    }
                    let proj = dot(c, &e);
                    for (x, y) in e.iter_mut().zip(c) {
                        *x -= proj * y;
                    }
                }
            }
            let nrm = dot(&e, &e).sqrt();
            if nrm > 1e-8 {
                cols[k] = e.iter().map(|x| x / nrm).collect();
                break;
            }
        }
    }
}
