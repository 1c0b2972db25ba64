//! Tangent-space spectral steepest descent direction (Manifold Muon),
//! solved by dual subgradient ascent on the symmetric multiplier of the
//! tangency constraint `sym(Xᵀ d) = 0`.

use crate::error::Result;
use crate::linalg::{spectral_norm, sym, DenseMatrix, PolarMode};
use crate::lmo::{lmo, NormKind};
use crate::manifold::StiefelPoint;

pub const DEFAULT_INNER_ITERS: usize = 10;
pub const DEFAULT_INNER_LR: f64 = 0.1;
pub const DEFAULT_QUALITY_TOL: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct MuonDirection {
    /// Feasible direction: tangent at `x` with spectral norm at most one.
    pub d: DenseMatrix,
    pub inner_iters: usize,
    /// `⟨g, d⟩` of the returned direction.
    pub value: f64,
    /// `−‖g‖_F² / ‖g‖₂`, the value of the always-feasible point `−g/‖g‖₂`.
    pub reference: f64,
    /// The inner solve missed the quality contract and `−g/‖g‖₂` was returned.
    pub fallback: bool,
}

/// Approximately solves `min ⟨g, d⟩` over tangent `d` with `‖d‖₂ <= 1`.
///
/// The multiplier `Λ` starts at zero and each inner step evaluates
/// `d = −msign(g + XΛ)` then moves `Λ` along the dual supergradient
/// `sym(Xᵀ d)`. The last `d` is made exactly feasible by tangent projection
/// and clipping to the spectral unit ball, then checked against the
/// reference value. Returns `None` when `g` is numerically zero.
pub fn manifold_muon_direction(
    x: &StiefelPoint,
    g: &DenseMatrix,
    inner_iters: usize,
    inner_lr: f64,
    quality_tol: f64,
    mode: &PolarMode,
) -> Result<Option<MuonDirection>> {
    let inner_iters = inner_iters.max(1);
    let xm = x.matrix();
    let p = xm.cols();
    let mut lambda = DenseMatrix::zeros(p, p);
    let mut d = None;
    for _ in 0..inner_iters {
        let shifted = g.add(&xm.matmul(&lambda)?)?;
        let Some(dk) = lmo(NormKind::Spectral, &shifted, mode)? else {
            break;
        };
        lambda = lambda.add_scaled(inner_lr, &sym(&xm.t_matmul(&dk)?)?)?;
        d = Some(dk);
    }
    let Some(d) = d else {
        return Ok(None);
    };

    let g_fro = g.frobenius_norm();
    let g_spec = spectral_norm(g)?;
    if g_spec == 0.0 {
        return Ok(None);
    }
    let reference = -g_fro * g_fro / g_spec;

    let d = x.tangent_project(&d)?;
    let scale = spectral_norm(&d)?.max(1.0);
    let d = d.scale(1.0 / scale);
    let value = g.inner(&d)?;
    if value <= reference + quality_tol * g_fro {
        return Ok(Some(MuonDirection {
            d,
            inner_iters,
            value,
            reference,
            fallback: false,
        }));
    }
    let d = g.scale(-1.0 / g_spec);
    let value = g.inner(&d)?;
    Ok(Some(MuonDirection {
        d,
        inner_iters,
        value,
        reference,
        fallback: true,
    }))
}
