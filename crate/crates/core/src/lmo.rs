//! Linear minimization oracles over norm unit balls.
//!
//! `lmo(s) = argmin_{‖d‖ ≤ 1} ⟨s, d⟩`, whose optimal value is `−‖s‖_*`.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{msign_iterative, msign_truncated, norms, nuclear_norm, DenseMatrix, PolarMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NormKind {
    Frobenius,
    Spectral,
}

impl NormKind {
    /// Name of the dual norm, for reports.
    pub fn dual_name(&self) -> &'static str {
        match self {
            NormKind::Frobenius => "frobenius",
            NormKind::Spectral => "nuclear",
        }
    }

    /// `‖d‖` in this norm.
    pub fn primal(&self, d: &DenseMatrix) -> Result<f64> {
        match self {
            NormKind::Frobenius => Ok(d.frobenius_norm()),
            NormKind::Spectral => Ok(norms(d)?.spectral),
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormKind::Frobenius => "frobenius",
            NormKind::Spectral => "spectral",
        })
    }
}

impl FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "frobenius" | "fro" | "euclidean" => Ok(NormKind::Frobenius),
            "spectral" | "spec" | "operator" => Ok(NormKind::Spectral),
            other => Err(Error::Config(format!("unknown norm `{other}`"))),
        }
    }
}

/// Below this Frobenius norm the oracle input counts as zero.
pub fn zero_tol(rows: usize, cols: usize) -> f64 {
    1e-14 * ((rows * cols) as f64).sqrt()
}

/// Minimizer of `⟨s, d⟩` over the unit ball of `norm`.
///
/// Returns `None` when `‖s‖_F <= zero_tol`: every feasible `d` is optimal
/// there and callers treat it as a stationary point. The spectral oracle is
/// `−msign(s)`; in exact mode rank-deficient `s` uses the polar factor of its
/// range, which still attains `−‖s‖_nuc`.
pub fn lmo(norm: NormKind, s: &DenseMatrix, mode: &PolarMode) -> Result<Option<DenseMatrix>> {
    let fro = s.frobenius_norm();
    if fro <= zero_tol(s.rows(), s.cols()) {
        return Ok(None);
    }
    let d = match norm {
        NormKind::Frobenius => s.scale(-1.0 / fro),
        NormKind::Spectral => match mode {
            PolarMode::Exact => msign_truncated(s)?.scale(-1.0),
            PolarMode::Iterative { iters, scheme } => msign_iterative(s, scheme, *iters)?.scale(-1.0),
        },
    };
    Ok(Some(d))
}

/// `‖s‖_* = sup_{‖d‖ ≤ 1} ⟨d, s⟩`.
pub fn dual_norm(norm: NormKind, s: &DenseMatrix) -> Result<f64> {
    match norm {
        NormKind::Frobenius => Ok(s.frobenius_norm()),
        NormKind::Spectral => nuclear_norm(s),
    }
}

/// Smallest `N` with `‖X‖_F <= N ‖X‖` on `n x p` matrices.
pub fn norm_equiv_constant(norm: NormKind, n: usize, p: usize) -> f64 {
    match norm {
        NormKind::Frobenius => 1.0,
        NormKind::Spectral => (n.min(p) as f64).sqrt(),
    }
}
