//! Benchmark configuration files.
//!
//! ```toml
//! [instance]
//! n = 200
//! p = 5
//! d = 1000
//! data_seed = 0
//!
//! [run]
//! steps = 300              # iteration budget T
//! init_seed = 1
//! polar = "iterative:8"    # or "exact"
//! repeats = 3
//! output_dir = "out/pca"
//! timing = true            # false writes elapsed_s = 0 for byte-stable CSVs
//! workers = 1
//! # instance_cache = "out/cache"
//!
//! [[method]]
//! name = "RGD"
//! kind = "rgd"
//! schedule = "constant:0.001"
//!
//! [[method]]
//! name = "SPEL"
//! kind = "mcsd"            # rgd | mcsd | muon | stochastic
//! norm = "spectral"        # mcsd and stochastic only
//! schedule = "decay:0.1,0.5,30"
//! ```
//!
//! `muon` methods accept `inner_iters` and `inner_lr`; `stochastic` methods
//! take `beta` and either `sigma` (total noise standard deviation) or
//! `batch_size`. The environment variables `MCSD_OUTPUT_DIR` and
//! `MCSD_WORKERS` override `output_dir` and `workers`.

use serde::Deserialize;
use std::path::{Path, PathBuf};

use crate::error::{config, Error, Result};
use crate::linalg::PolarMode;
use crate::lmo::NormKind;
use crate::objective::NoiseConfig;
use crate::optim::{Method, StepSchedule, DEFAULT_INNER_ITERS, DEFAULT_INNER_LR};

pub const OUTPUT_DIR_ENV: &str = "MCSD_OUTPUT_DIR";
pub const WORKERS_ENV: &str = "MCSD_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub n: usize,
    pub p: usize,
    pub d: usize,
    #[serde(default)]
    pub data_seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    steps: usize,
    #[serde(default)]
    init_seed: u64,
    #[serde(default)]
    polar: Option<String>,
    #[serde(default = "default_repeats")]
    repeats: usize,
    #[serde(default)]
    output_dir: Option<PathBuf>,
    #[serde(default = "default_true")]
    timing: bool,
    #[serde(default)]
    workers: Option<usize>,
    #[serde(default)]
    instance_cache: Option<PathBuf>,
}

fn default_repeats() -> usize {
    3
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMethod {
    name: String,
    kind: String,
    schedule: String,
    norm: Option<String>,
    inner_iters: Option<usize>,
    inner_lr: Option<f64>,
    beta: Option<f64>,
    sigma: Option<f64>,
    batch_size: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    instance: InstanceSpec,
    run: RawRun,
    #[serde(default, rename = "method")]
    methods: Vec<RawMethod>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSpec {
    pub name: String,
    pub method: Method,
    pub schedule: StepSchedule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub instance: InstanceSpec,
    pub methods: Vec<MethodSpec>,
    pub steps: usize,
    pub init_seed: u64,
    pub polar: PolarMode,
    pub output_dir: PathBuf,
    pub repeats: usize,
    pub timing: bool,
    pub workers: usize,
    pub instance_cache: Option<PathBuf>,
}

impl BenchConfig {
    /// Reads a config file and applies environment overrides.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.apply_env(std::env::var(OUTPUT_DIR_ENV).ok(), std::env::var(WORKERS_ENV).ok())?;
        Ok(cfg)
    }

    /// Parses config text without looking at the environment.
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        let InstanceSpec { n, p, d, .. } = raw.instance;
        if !(p >= 1 && p <= n && n <= d) {
            return config(format!("instance needs 1 <= p <= n <= d, got n={n} p={p} d={d}"));
        }
        if raw.run.repeats == 0 {
            return config("repeats must be >= 1");
        }
        let methods = raw
            .methods
            .into_iter()
            .map(|m| method_spec(m, n, p))
            .collect::<Result<Vec<_>>>()?;
        for (i, m) in methods.iter().enumerate() {
            if methods[..i].iter().any(|o| o.name == m.name) {
                return config(format!("duplicate method name `{}`", m.name));
            }
        }
        let polar = match raw.run.polar {
            Some(s) => PolarMode::parse(&s)?,
            None => PolarMode::default(),
        };
        let workers = raw.run.workers.unwrap_or(1);
        if workers == 0 {
            return config("workers must be >= 1");
        }
        Ok(Self {
            instance: raw.instance,
            methods,
            steps: raw.run.steps,
            init_seed: raw.run.init_seed,
            polar,
            output_dir: raw.run.output_dir.unwrap_or_else(|| PathBuf::from("mcsd-out")),
            repeats: raw.run.repeats,
            timing: raw.run.timing,
            workers,
            instance_cache: raw.run.instance_cache,
        })
    }

    pub fn apply_env(&mut self, output_dir: Option<String>, workers: Option<String>) -> Result<()> {
        if let Some(dir) = output_dir.filter(|s| !s.is_empty()) {
            self.output_dir = PathBuf::from(dir);
        }
        if let Some(w) = workers.filter(|s| !s.is_empty()) {
            self.workers = match w.trim().parse() {
                Ok(k) if k >= 1 => k,
                _ => return config(format!("{WORKERS_ENV} must be a positive integer, got `{w}`")),
            };
        }
        Ok(())
    }
}

fn method_spec(m: RawMethod, n: usize, p: usize) -> Result<MethodSpec> {
    if m.name.is_empty() || !m.name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
        return config(format!("method name `{}` must be nonempty [A-Za-z0-9._-]", m.name));
    }
    let schedule = StepSchedule::parse(&m.schedule)?;
    let norm = || -> Result<NormKind> {
        match &m.norm {
            Some(s) => s.parse(),
            None => config(format!("method `{}` needs `norm`", m.name)),
        }
    };
    let unexpected = |field: &str, present: bool| -> Result<()> {
        if present {
            config(format!("method `{}` of kind `{}` does not take `{field}`", m.name, m.kind))
        } else {
            Ok(())
        }
    };
    let method = match m.kind.as_str() {
        "rgd" => {
            unexpected("norm", m.norm.is_some())?;
            Method::Rgd
        }
        "mcsd" => Method::Mcsd { norm: norm()? },
        "muon" => Method::ManifoldMuon {
            inner_iters: m.inner_iters.unwrap_or(DEFAULT_INNER_ITERS),
            inner_lr: m.inner_lr.unwrap_or(DEFAULT_INNER_LR),
        },
        "stochastic" => {
            let noise = match (m.sigma, m.batch_size) {
                (Some(s), None) if s >= 0.0 => NoiseConfig::gaussian_with_total_sigma(s, n, p),
                (None, Some(b)) => NoiseConfig::Minibatch { batch_size: b },
                _ => return config(format!("method `{}` needs exactly one of `sigma` (>= 0) or `batch_size`", m.name)),
            };
            Method::StochasticMcsd {
                norm: norm()?,
                beta: m.beta.unwrap_or(0.9),
                noise,
            }
        }
        other => return config(format!("unknown method kind `{other}` (rgd|mcsd|muon|stochastic)")),
    };
    if !matches!(method, Method::ManifoldMuon { .. }) {
        unexpected("inner_iters", m.inner_iters.is_some())?;
        unexpected("inner_lr", m.inner_lr.is_some())?;
    }
    if !matches!(method, Method::StochasticMcsd { .. }) {
        unexpected("beta", m.beta.is_some())?;
        unexpected("sigma", m.sigma.is_some())?;
        unexpected("batch_size", m.batch_size.is_some())?;
    }
    Ok(MethodSpec {
        name: m.name,
        method,
        schedule,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[instance]
n = 20
p = 3
d = 40
data_seed = 7

[run]
steps = 10
init_seed = 2
repeats = 2
output_dir = "out"

[[method]]
name = "RGD"
kind = "rgd"
schedule = "constant:0.001"

[[method]]
name = "SPEL"
kind = "mcsd"
norm = "spectral"
schedule = "decay:0.1,0.5,30"

[[method]]
name = "MM"
kind = "muon"
schedule = "decay:0.1,0.5,30"
inner_iters = 5

[[method]]
name = "S"
kind = "stochastic"
norm = "spectral"
schedule = "constant:0.01"
beta = 0.5
sigma = 1.0
"#;

    #[test]
    fn parses_full_config() {
        let cfg = BenchConfig::parse(BASE).unwrap();
        assert_eq!(cfg.methods.len(), 4);
        assert_eq!(cfg.methods[0].method, Method::Rgd);
        assert_eq!(cfg.methods[1].method, Method::spel());
        assert_eq!(
            cfg.methods[2].method,
            Method::ManifoldMuon {
                inner_iters: 5,
                inner_lr: DEFAULT_INNER_LR
            }
        );
        assert!(matches!(cfg.methods[3].method, Method::StochasticMcsd { beta, .. } if beta == 0.5));
        assert_eq!(cfg.polar, PolarMode::default());
        assert!(cfg.timing);
        assert_eq!(cfg.workers, 1);
    }

    #[test]
    fn env_overrides() {
        let mut cfg = BenchConfig::parse(BASE).unwrap();
        cfg.apply_env(Some("elsewhere".into()), Some("4".into())).unwrap();
        assert_eq!(cfg.output_dir, PathBuf::from("elsewhere"));
        assert_eq!(cfg.workers, 4);
        assert!(cfg.apply_env(None, Some("zero".into())).is_err());
    }

    #[test]
    fn rejects_bad_configs() {
        for (from, to) in [
            ("kind = \"rgd\"", "kind = \"adam\""),
            ("p = 3", "p = 30"),
            ("repeats = 2", "repeats = 0"),
            ("constant:0.001", "cosine"),
            ("name = \"RGD\"", "name = \"SPEL\""),
            ("name = \"RGD\"", "name = \"a/b\""),
            ("inner_iters = 5", "inner_iters = 5\nbeta = 0.3"),
            ("sigma = 1.0", "sigma = 1.0\nbatch_size = 4"),
            ("steps = 10", "steps = 10\nbogus = 1"),
        ] {
            let text = BASE.replacen(from, to, 1);
            assert!(matches!(BenchConfig::parse(&text), Err(Error::Config(_))), "{to}");
        }
    }
}
