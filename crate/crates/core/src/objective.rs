//! Objectives over `R^{n×p}` and the weighted-PCA (Brockett) instance.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::error::{config, Error, Result};
use crate::linalg::{sym_eigen, DenseMatrix};
use crate::manifold::StiefelManifold;
use crate::rng::RngStream;

/// Noise model for stochastic gradients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoiseConfig {
    /// Exact gradient plus iid `N(0, sigma_entry²)` per entry; total variance
    /// `n p sigma_entry²`.
    AdditiveGaussian { sigma_entry: f64 },
    /// Gradient of the covariance restricted to a uniform column batch,
    /// rescaled by `d / batch_size`.
    Minibatch { batch_size: usize },
}

impl NoiseConfig {
    /// Additive noise whose total standard deviation `sqrt(E‖g − ∇f‖²)` is `sigma`.
    pub fn gaussian_with_total_sigma(sigma: f64, n: usize, p: usize) -> Self {
        NoiseConfig::AdditiveGaussian {
            sigma_entry: sigma / ((n * p) as f64).sqrt(),
        }
    }

    pub fn validate(&self, samples: usize) -> Result<()> {
        match *self {
            NoiseConfig::AdditiveGaussian { sigma_entry } if !(sigma_entry >= 0.0) => {
                config(format!("sigma_entry must be >= 0, got {sigma_entry}"))
            }
            NoiseConfig::Minibatch { batch_size } if batch_size == 0 || batch_size > samples => {
                config(format!("batch size {batch_size} outside 1..={samples}"))
            }
            _ => Ok(()),
        }
    }
}

/// Smooth objective on the ambient space.
pub trait Objective: Send + Sync {
    /// Shape `(n, p)` of the variable.
    fn shape(&self) -> (usize, usize);

    fn value(&self, x: &DenseMatrix) -> Result<f64>;

    fn euclid_grad(&self, x: &DenseMatrix) -> Result<DenseMatrix>;

    fn stochastic_grad(
        &self,
        _x: &DenseMatrix,
        _rng: &mut RngStream,
        _noise: &NoiseConfig,
    ) -> Result<DenseMatrix> {
        Err(Error::Unsupported("stochastic gradients"))
    }

    /// Distance to a known solution subspace, when the objective has one.
    fn subspace_error(&self, _x: &DenseMatrix) -> Option<f64> {
        None
    }
}

/// Certified constants for the composed-smoothness bound on `St(n,p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessConstants {
    /// Lipschitz constant of `∇f` on the manifold.
    pub l_f: f64,
    /// Bound on `‖∇f‖_F` over the manifold.
    pub g_bound: f64,
    /// `4 l_f + 25 g_bound`, valid for steps with spectral norm at most 0.2.
    pub l_composed: f64,
}

impl SmoothnessConstants {
    pub fn new(l_f: f64, g_bound: f64) -> Self {
        Self {
            l_f,
            g_bound,
            l_composed: 4.0 * l_f + 25.0 * g_bound,
        }
    }
}

/// `f(W) = −½ tr(Wᵀ C W D)` with `C = X Xᵀ` and `D = diag(dmat)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BrockettInstance {
    n: usize,
    p: usize,
    d: usize,
    data_seed: u64,
    /// Samples as columns (`n x d`); absent for instances built from a covariance.
    data: Option<DenseMatrix>,
    c: DenseMatrix,
    dmat: Vec<f64>,
    /// Eigenvalues of `c`, descending.
    eigenvalues: Vec<f64>,
    w_star: DenseMatrix,
    warning: Option<String>,
}

impl BrockettInstance {
    /// Gaussian data `X ∈ R^{n×d}` from `data_seed`, `C = XXᵀ`, weights `(p, …, 1)`.
    pub fn generate(n: usize, p: usize, d: usize, data_seed: u64) -> Result<Self> {
        if p == 0 || p > n || n > d {
            return config(format!("Brockett instance requires p <= n <= d, got p={p} n={n} d={d}"));
        }
        let mut rng = RngStream::new(data_seed);
        let x = rng.gaussian_matrix(n, d);
        let c = x.matmul_t(&x)?;
        let dmat: Vec<f64> = (1..=p).rev().map(|k| k as f64).collect();
        let mut inst = Self::from_covariance(c, dmat)?;
        inst.d = d;
        inst.data_seed = data_seed;
        inst.data = Some(x);
        Ok(inst)
    }

    /// Instance from an explicit symmetric PSD covariance and nonincreasing
    /// nonnegative weights.
    pub fn from_covariance(c: DenseMatrix, dmat: Vec<f64>) -> Result<Self> {
        if !c.is_square() {
            return config("covariance must be square");
        }
        let (n, p) = (c.rows(), dmat.len());
        if p == 0 || p > n {
            return config(format!("need 1 <= p <= n, got p={p}, n={n}"));
        }
        if dmat.iter().any(|v| !(*v >= 0.0)) || dmat.windows(2).any(|w| w[0] < w[1]) {
            return config("weights must be nonnegative and nonincreasing");
        }
        let asym = c.sub(&c.transpose())?.max_abs();
        if asym > 1e-10 * c.max_abs().max(1.0) {
            return config(format!("covariance not symmetric (max asymmetry {asym:e})"));
        }
        let eig = sym_eigen(&c)?;
        let idx: Vec<usize> = (0..p).collect();
        let mut w_star = eig.vectors.columns(&idx);
        fix_column_signs(&mut w_star);

        let lam = &eig.values;
        let warning = (p < n && lam[p - 1] - lam[p] < 1e-8 * lam[0].abs())
            .then(|| format!("small eigengap: lambda_p - lambda_(p+1) = {:e}", lam[p - 1] - lam[p]));

        Ok(Self {
            n,
            p,
            d: n,
            data_seed: 0,
            data: None,
            c,
            dmat,
            eigenvalues: eig.values,
            w_star,
            warning,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn data_seed(&self) -> u64 {
        self.data_seed
    }

    pub fn covariance(&self) -> &DenseMatrix {
        &self.c
    }

    pub fn weights(&self) -> &[f64] {
        &self.dmat
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn w_star(&self) -> &DenseMatrix {
        &self.w_star
    }

    pub fn warning(&self) -> Option<&str> {
        self.warning.as_deref()
    }

    pub fn manifold(&self) -> Result<StiefelManifold> {
        StiefelManifold::new(self.n, self.p)
    }

    /// `f(w_star) = −½ Σ d_i λ_i`, the minimum over the manifold.
    pub fn optimal_value(&self) -> f64 {
        -0.5 * self
            .dmat
            .iter()
            .zip(&self.eigenvalues)
            .map(|(d, l)| d * l)
            .sum::<f64>()
    }

    /// `(l_f, g_bound, l_composed)` with `l_f = ‖C‖₂ max d`,
    /// `g_bound = ‖C‖₂ max d √p`.
    pub fn smoothness_constants(&self) -> SmoothnessConstants {
        let c_norm = self.eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
        let dmax = self.dmat.iter().fold(0.0f64, |m, v| m.max(*v));
        let l_f = c_norm * dmax;
        SmoothnessConstants::new(l_f, l_f * (self.p as f64).sqrt())
    }

    fn check(&self, w: &DenseMatrix) -> Result<()> {
        if w.shape() != (self.n, self.p) {
            return config(format!(
                "expected {}x{} argument, got {}x{}",
                self.n,
                self.p,
                w.rows(),
                w.cols()
            ));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(file, self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        Ok(serde_json::from_reader(file)?)
    }

    pub fn cache_file_name(n: usize, p: usize, d: usize, data_seed: u64) -> String {
        format!("brockett_n{n}_p{p}_d{d}_seed{data_seed}.json")
    }

    /// Loads the instance keyed by `(n, p, d, data_seed)` from `dir`, or
    /// generates and stores it.
    pub fn load_or_generate(dir: &Path, n: usize, p: usize, d: usize, data_seed: u64) -> Result<Self> {
        let path: PathBuf = dir.join(Self::cache_file_name(n, p, d, data_seed));
        if path.exists() {
            let inst = Self::load(&path)?;
            if (inst.n, inst.p, inst.d, inst.data_seed) == (n, p, d, data_seed) {
                return Ok(inst);
            }
        }
        let inst = Self::generate(n, p, d, data_seed)?;
        std::fs::create_dir_all(dir)?;
        inst.save(&path)?;
        Ok(inst)
    }
}

/// Flips each column so its largest-magnitude entry is positive.
fn fix_column_signs(w: &mut DenseMatrix) {
    for j in 0..w.cols() {
        let col = w.col(j);
        let pivot = col
            .iter()
            .copied()
            .fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        if pivot < 0.0 {
            for i in 0..w.rows() {
                w[(i, j)] = -w[(i, j)];
            }
        }
    }
}

impl Objective for BrockettInstance {
    fn shape(&self) -> (usize, usize) {
        (self.n, self.p)
    }

    fn value(&self, w: &DenseMatrix) -> Result<f64> {
        self.check(w)?;
        let cw = self.c.matmul(w)?;
        let mut total = 0.0;
        for i in 0..self.n {
            for (j, dj) in self.dmat.iter().enumerate() {
                total += dj * w[(i, j)] * cw[(i, j)];
            }
        }
        Ok(-0.5 * total)
    }

    fn euclid_grad(&self, w: &DenseMatrix) -> Result<DenseMatrix> {
        self.check(w)?;
        let neg: Vec<f64> = self.dmat.iter().map(|v| -v).collect();
        self.c.matmul(w)?.scale_columns(&neg)
    }

    fn stochastic_grad(&self, w: &DenseMatrix, rng: &mut RngStream, noise: &NoiseConfig) -> Result<DenseMatrix> {
        match *noise {
            NoiseConfig::AdditiveGaussian { sigma_entry } => {
                noise.validate(self.d)?;
                let g = self.euclid_grad(w)?;
                if sigma_entry == 0.0 {
                    return Ok(g);
                }
                let z = rng.gaussian_matrix(self.n, self.p);
                g.add_scaled(sigma_entry, &z)
            }
            NoiseConfig::Minibatch { batch_size } => {
                self.check(w)?;
                let data = self
                    .data
                    .as_ref()
                    .ok_or(Error::Unsupported("minibatch gradients need the sample matrix"))?;
                noise.validate(self.d)?;
                if batch_size == self.d {
                    return self.euclid_grad(w);
                }
                let idx = rng.sample_without_replacement(self.d, batch_size);
                let xb = data.columns(&idx);
                let proj = xb.t_matmul(w)?;
                let scale = self.d as f64 / batch_size as f64;
                let weights: Vec<f64> = self.dmat.iter().map(|v| -scale * v).collect();
                xb.matmul(&proj)?.scale_columns(&weights)
            }
        }
    }

    fn subspace_error(&self, w: &DenseMatrix) -> Option<f64> {
        let a = w.matmul_t(w).ok()?;
        let b = self.w_star.matmul_t(&self.w_star).ok()?;
        Some(a.sub(&b).ok()?.frobenius_norm())
    }
}
