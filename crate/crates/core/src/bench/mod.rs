//! Benchmark commands behind the `mcsd-bench` binary.
//!
//! Each `cmd_*` function returns a [`CommandOutcome`] (pass or check failure,
//! plus the text to print) or an error; [`exit_code`] maps either to the
//! process status: 0 ok, 1 check failure, 2 configuration or I/O error,
//! 3 numeric failure.

pub mod config;
pub mod svg;

pub use config::{BenchConfig, InstanceSpec, MethodSpec};

use rayon::prelude::*;
use std::collections::hash_map::DefaultHasher;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::hash::{Hash, Hasher};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, PolarMode};
use crate::manifold::StiefelPoint;
use crate::objective::BrockettInstance;
use crate::optim::{drive, Method, OptimizerRun, StepSchedule};
use crate::rng::RngStream;
use crate::trace::{fmt_f64, RunTrace};
use crate::verify::{run_suite, Level};
use svg::LineChart;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Feasibility ceiling asserted by `orth-violation`.
pub const ORTH_LIMIT: f64 = 1e-6;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Io(_) | Error::Serde(_) | Error::Unsupported(_) => EXIT_CONFIG,
        Error::RankDeficient { .. } | Error::Numeric { .. } | Error::Infeasible { .. } => EXIT_NUMERIC,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandOutcome {
    pub passed: bool,
    pub message: String,
}

impl CommandOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            EXIT_OK
        } else {
            EXIT_CHECK_FAILED
        }
    }
}

/// One finished (or aborted) run.
#[derive(Debug)]
pub struct RunResult {
    pub method: String,
    pub repeat: usize,
    pub trace: RunTrace,
    pub error: Option<Error>,
    pub init_hash: u64,
    pub csv: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub name: String,
    pub repeats: usize,
    pub failures: usize,
    pub initial_error_median: f64,
    pub final_error_mean: f64,
    pub final_error_median: f64,
    pub wall_time_mean: f64,
    pub wall_time_median: f64,
}

#[derive(Debug)]
pub struct BenchReport {
    pub runs: Vec<RunResult>,
    pub summaries: Vec<MethodSummary>,
    pub output_dir: PathBuf,
}

impl BenchReport {
    pub fn summary(&self, name: &str) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.name == name)
    }

    pub fn first_error(&self) -> Option<(&RunResult, &Error)> {
        self.runs.iter().find_map(|r| r.error.as_ref().map(|e| (r, e)))
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Hash of the exact bit pattern of a matrix.
pub fn matrix_hash(m: &DenseMatrix) -> u64 {
    let mut h = DefaultHasher::new();
    m.shape().hash(&mut h);
    for v in m.data() {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

pub fn load_instance(cfg: &BenchConfig) -> Result<BrockettInstance> {
    let InstanceSpec { n, p, d, data_seed } = cfg.instance;
    match &cfg.instance_cache {
        Some(dir) => BrockettInstance::load_or_generate(dir, n, p, d, data_seed),
        None => BrockettInstance::generate(n, p, d, data_seed),
    }
}

/// Shared starting point of every method in repeat `repeat`.
pub fn initial_point(inst: &BrockettInstance, init_seed: u64, repeat: usize) -> Result<StiefelPoint> {
    inst.manifold()?.random_point(&mut RngStream::derive(init_seed, repeat as u64))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_trace(path: &Path, trace: &RunTrace) -> Result<()> {
    trace.write_csv(BufWriter::new(File::create(path)?))
}

/// Runs every `(repeat, method)` pair on a pool of `cfg.workers` threads
/// and writes `<file_stem>.csv` for each, partial traces included.
fn run_jobs(
    cfg: &BenchConfig,
    inst: &BrockettInstance,
    jobs: Vec<(usize, String, Method, StepSchedule)>,
    polar: &PolarMode,
    file_stem: impl Fn(&str, usize) -> String + Sync,
) -> Result<Vec<RunResult>> {
    ensure_dir(&cfg.output_dir)?;
    let mut starts = Vec::new();
    for r in 0..cfg.repeats {
        starts.push(initial_point(inst, cfg.init_seed, r)?);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let results: Vec<Result<RunResult>> = pool.install(|| {
        jobs.into_par_iter()
            .map(|(repeat, name, method, schedule)| {
                let x0 = starts[repeat].clone();
                let init_hash = matrix_hash(x0.matrix());
                let seed = cfg.init_seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(repeat as u64 + 1));
                let mut run = OptimizerRun::new(method, schedule, x0, polar.clone(), seed)?;
                let mut out = drive(&mut run, inst, cfg.steps, cfg.timing);
                out.trace.label = name.clone();
                let csv = cfg.output_dir.join(format!("{}.csv", file_stem(&name, repeat)));
                write_trace(&csv, &out.trace)?;
                Ok(RunResult {
                    method: name,
                    repeat,
                    trace: out.trace,
                    error: out.error,
                    init_hash,
                    csv,
                })
            })
            .collect()
    });
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;
    for r in &runs {
        let want = matrix_hash(starts[r.repeat].matrix());
        if r.init_hash != want {
            return Err(Error::Numeric {
                routine: "bench",
                iteration: 0,
                detail: format!("{} repeat {} started from a different point", r.method, r.repeat),
            });
        }
    }
    Ok(runs)
}

fn final_error(t: &RunTrace) -> f64 {
    t.last().map_or(f64::NAN, |r| r.subspace_error)
}

/// Runs the configured comparison and writes per-run CSVs, `summary.csv`,
/// `summary.txt` and `subspace_error.svg` (first repeat, log scale).
pub fn pca_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    pca_bench_on(cfg, &load_instance(cfg)?)
}

/// [`pca_bench`] on an already constructed instance.
pub fn pca_bench_on(cfg: &BenchConfig, inst: &BrockettInstance) -> Result<BenchReport> {
    if cfg.methods.is_empty() {
        return Err(Error::Config("pca-bench needs at least one [[method]]".into()));
    }
    let jobs = (0..cfg.repeats)
        .flat_map(|r| {
            cfg.methods
                .iter()
                .map(move |m| (r, m.name.clone(), m.method.clone(), m.schedule.clone()))
        })
        .collect();
    let runs = run_jobs(cfg, inst, jobs, &cfg.polar, |name, r| format!("{name}_{r}"))?;

    let summaries: Vec<MethodSummary> = cfg
        .methods
        .iter()
        .map(|m| {
            let mine: Vec<&RunResult> = runs.iter().filter(|r| r.method == m.name).collect();
            let init: Vec<f64> = mine.iter().filter_map(|r| r.trace.first()).map(|f| f.subspace_error).collect();
            let fin: Vec<f64> = mine.iter().map(|r| final_error(&r.trace)).collect();
            let time: Vec<f64> = mine.iter().map(|r| r.trace.total_time()).collect();
            MethodSummary {
                name: m.name.clone(),
                repeats: mine.len(),
                failures: mine.iter().filter(|r| r.error.is_some()).count(),
                initial_error_median: median(&init),
                final_error_mean: mean(&fin),
                final_error_median: median(&fin),
                wall_time_mean: mean(&time),
                wall_time_median: median(&time),
            }
        })
        .collect();

    let report = BenchReport {
        runs,
        summaries,
        output_dir: cfg.output_dir.clone(),
    };
    write_summary(cfg, inst, &report)?;

    let mut chart = LineChart::new(
        format!("Subspace error, n={} p={} d={}", inst.n(), inst.p(), inst.d()),
        "iteration",
        "subspace error",
        true,
    );
    for r in report.runs.iter().filter(|r| r.repeat == 0) {
        chart.push(r.method.clone(), r.trace.records.iter().map(|x| (x.iter as f64, x.subspace_error)).collect());
    }
    fs::write(cfg.output_dir.join("subspace_error.svg"), chart.render())?;
    Ok(report)
}

fn write_summary(cfg: &BenchConfig, inst: &BrockettInstance, report: &BenchReport) -> Result<()> {
    let mut w = csv::Writer::from_path(cfg.output_dir.join("summary.csv"))?;
    w.write_record([
        "method",
        "repeats",
        "failures",
        "initial_subspace_error_median",
        "final_subspace_error_mean",
        "final_subspace_error_median",
        "wall_time_mean_s",
        "wall_time_median_s",
    ])?;
    for s in &report.summaries {
        w.write_record([
            s.name.clone(),
            s.repeats.to_string(),
            s.failures.to_string(),
            fmt_f64(s.initial_error_median),
            fmt_f64(s.final_error_mean),
            fmt_f64(s.final_error_median),
            fmt_f64(s.wall_time_mean),
            fmt_f64(s.wall_time_median),
        ])?;
    }
    w.flush()?;
    fs::write(cfg.output_dir.join("summary.txt"), summary_text(cfg, inst, report))?;
    Ok(())
}

/// Human-readable summary table plus run diagnostics.
pub fn summary_text(cfg: &BenchConfig, inst: &BrockettInstance, report: &BenchReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "instance n={} p={} d={} data_seed={}  T={}  repeats={}  polar={}",
        inst.n(),
        inst.p(),
        inst.d(),
        inst.data_seed(),
        cfg.steps,
        cfg.repeats,
        cfg.polar.label()
    );
    if let Some(w) = inst.warning() {
        let _ = writeln!(s, "warning: {w}");
    }
    let _ = writeln!(
        s,
        "{:<16} {:>14} {:>14} {:>14} {:>12} {:>9}",
        "method", "init err", "final (mean)", "final (median)", "time (s)", "failures"
    );
    for m in &report.summaries {
        let _ = writeln!(
            s,
            "{:<16} {:>14.4e} {:>14.4e} {:>14.4e} {:>12.4} {:>9}",
            m.name, m.initial_error_median, m.final_error_mean, m.final_error_median, m.wall_time_mean, m.failures
        );
    }
    for r in 0..cfg.repeats {
        if let Some(run) = report.runs.iter().find(|x| x.repeat == r) {
            let _ = writeln!(s, "repeat {r}: initial point hash {:016x}", run.init_hash);
        }
    }
    for run in &report.runs {
        for w in &run.trace.warnings {
            let _ = writeln!(s, "warning [{} #{}]: {w}", run.method, run.repeat);
        }
        if let Some(e) = &run.error {
            let _ = writeln!(
                s,
                "error [{} #{}] after {} steps: {e}",
                run.method,
                run.repeat,
                run.trace.steps()
            );
        }
    }
    s
}

pub fn cmd_pca_bench(config_path: &Path) -> Result<CommandOutcome> {
    let cfg = BenchConfig::load(config_path)?;
    let inst = load_instance(&cfg)?;
    let report = pca_bench_on(&cfg, &inst)?;
    let text = summary_text(&cfg, &inst, &report);
    if let Some(e) = report.runs.into_iter().find_map(|r| r.error) {
        eprint!("{text}");
        return Err(e);
    }
    Ok(CommandOutcome {
        passed: true,
        message: format!("{text}outputs in {}", cfg.output_dir.display()),
    })
}

#[derive(Debug)]
pub struct SweepReport {
    pub runs: Vec<RunResult>,
    /// `(step size, final subspace error)` in sweep order.
    pub finals: Vec<(f64, f64)>,
    pub winner: f64,
}

/// RGD at each constant step size from the first repeat's starting point.
/// Writes `rgd_<alpha>.csv`, `rgd_sweep.svg` and `rgd_sweep.txt`.
pub fn rgd_sweep(cfg: &BenchConfig, step_sizes: &[f64]) -> Result<SweepReport> {
    if step_sizes.is_empty() {
        return Err(Error::Config("rgd-sweep needs at least one step size".into()));
    }
    let inst = load_instance(cfg)?;
    let jobs = step_sizes
        .iter()
        .map(|&a| Ok((0, format!("rgd_{a}"), Method::Rgd, StepSchedule::constant(a)?)))
        .collect::<Result<Vec<_>>>()?;
    let single = BenchConfig {
        repeats: 1,
        ..cfg.clone()
    };
    let runs = run_jobs(&single, &inst, jobs, &cfg.polar, |name, _| name.to_string())?;
    let finals: Vec<(f64, f64)> = step_sizes.iter().zip(&runs).map(|(&a, r)| (a, final_error(&r.trace))).collect();
    let winner = finals
        .iter()
        .copied()
        .fold((f64::NAN, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b })
        .0;

    let mut chart = LineChart::new("RGD step-size sweep", "iteration", "subspace error", true);
    for (r, &a) in runs.iter().zip(step_sizes) {
        chart.push(
            format!("alpha={a}"),
            r.trace.records.iter().map(|x| (x.iter as f64, x.subspace_error)).collect(),
        );
    }
    fs::write(cfg.output_dir.join("rgd_sweep.svg"), chart.render())?;

    let mut text = String::new();
    for (a, e) in &finals {
        let _ = writeln!(text, "alpha {a:<10} final subspace error {e:.6e}{}", if *a == winner { "  <- best" } else { "" });
    }
    let _ = writeln!(text, "winner: alpha = {winner} (0.001 is the expected best on the n=200 instance)");
    for r in &runs {
        if let Some(e) = &r.error {
            let _ = writeln!(text, "error [{}] after {} steps: {e}", r.method, r.trace.steps());
        }
    }
    fs::write(cfg.output_dir.join("rgd_sweep.txt"), &text)?;
    Ok(SweepReport { runs, finals, winner })
}

pub fn cmd_rgd_sweep(config_path: &Path, step_sizes: &[f64]) -> Result<CommandOutcome> {
    let cfg = BenchConfig::load(config_path)?;
    let rep = rgd_sweep(&cfg, step_sizes)?;
    if let Some(e) = rep.runs.into_iter().find_map(|r| r.error) {
        return Err(e);
    }
    let text = fs::read_to_string(cfg.output_dir.join("rgd_sweep.txt"))?;
    Ok(CommandOutcome {
        passed: true,
        message: text,
    })
}

#[derive(Debug)]
pub struct OrthReport {
    pub runs: Vec<RunResult>,
    /// Method, iteration and value of the largest violation seen.
    pub worst: (String, usize, f64),
    /// First method/iteration exceeding [`ORTH_LIMIT`], or aborting on drift.
    pub breach: Option<String>,
}

/// Runs every configured method once with the configured polar mode and
/// checks that every iterate stays within [`ORTH_LIMIT`] of the manifold.
/// Writes `orth_<method>.csv` and `orth_violation.svg`.
pub fn orth_violation(cfg: &BenchConfig) -> Result<OrthReport> {
    if cfg.methods.is_empty() {
        return Err(Error::Config("orth-violation needs at least one [[method]]".into()));
    }
    let inst = load_instance(cfg)?;
    let single = BenchConfig {
        repeats: 1,
        ..cfg.clone()
    };
    let jobs = cfg
        .methods
        .iter()
        .map(|m| (0, m.name.clone(), m.method.clone(), m.schedule.clone()))
        .collect();
    let runs = run_jobs(&single, &inst, jobs, &cfg.polar, |name, _| format!("orth_{name}"))?;
    let mut worst = (String::new(), 0, 0.0);
    let mut breach = None;
    for r in &runs {
        let (iter, v) = r.trace.max_orth_violation();
        if v > worst.2 {
            worst = (r.method.clone(), iter, v);
        }
        if breach.is_none() {
            if let Some(rec) = r.trace.records.iter().find(|x| !(x.orth_violation <= ORTH_LIMIT)) {
                breach = Some(format!(
                    "{}: violation {:.3e} > {ORTH_LIMIT:e} at iteration {}",
                    r.method, rec.orth_violation, rec.iter
                ));
            } else if let Some(Error::Infeasible { iteration, violation, .. }) = &r.error {
                breach = Some(format!(
                    "{}: violation {violation:.3e} > {ORTH_LIMIT:e} at iteration {iteration} (run aborted)",
                    r.method
                ));
            }
        }
    }
    let mut chart = LineChart::new(
        format!("Orthogonality violation ({})", cfg.polar.label()),
        "iteration",
        "||XᵀX − I||_F",
        true,
    );
    for r in &runs {
        chart.push(r.method.clone(), r.trace.records.iter().map(|x| (x.iter as f64, x.orth_violation)).collect());
    }
    fs::write(cfg.output_dir.join("orth_violation.svg"), chart.render())?;
    Ok(OrthReport { runs, worst, breach })
}

pub fn cmd_orth_violation(config_path: &Path) -> Result<CommandOutcome> {
    let cfg = BenchConfig::load(config_path)?;
    let rep = orth_violation(&cfg)?;
    if let Some(b) = rep.breach {
        return Ok(CommandOutcome {
            passed: false,
            message: format!("orthogonality breach: {b}"),
        });
    }
    if let Some(e) = rep.runs.into_iter().find_map(|r| r.error) {
        return Err(e);
    }
    let (m, it, v) = rep.worst;
    Ok(CommandOutcome {
        passed: true,
        message: format!("max orthogonality violation {v:.3e} ({m}, iteration {it}) <= {ORTH_LIMIT:e}"),
    })
}

pub fn cmd_verify(level: Level, seed: u64) -> Result<CommandOutcome> {
    let reports = run_suite(level, seed)?;
    let mut message = String::new();
    for r in &reports {
        let _ = writeln!(message, "{r}");
    }
    for r in &reports {
        let _ = writeln!(message, "{}", r.record_line());
    }
    Ok(CommandOutcome {
        passed: reports.iter().all(|r| r.passed),
        message,
    })
}
