//! Monte Carlo comparison of the four estimators over a grid of sample sizes.
//!
//! Each trial draws an invariant ground truth, then for every sample size
//! draws elliptical data (sample sets for different `n` within a trial share
//! their prefix), runs the four estimators and records the relative Frobenius
//! error between trace-normalized estimate and truth.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{
    estimate_all_four, EstimatorKind, FixedPointConfig, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use crate::objectives::RhoObjective;
use crate::samples::fmt_f64;
use crate::sampling::{
    derive_seed, random_invariant_spd, sample_elliptical, EllipticalModel, Texture,
};
use crate::spd::{trace_normalize, SpdMatrix};
use crate::symmetry::{
    make_circulant_group, make_persymmetric_group, make_proper_complex_group,
    make_proper_quaternion_group, SymmetryGroup,
};

/// Environment variable capping the worker count (0 or unset: machine default).
pub const THREADS_ENV: &str = "SYMCOV_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupFamily {
    ProperQuaternion,
    ProperComplex,
    Circulant,
    Persymmetric,
    None,
}

impl GroupFamily {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "proper-quaternion" | "proper_quaternion" => GroupFamily::ProperQuaternion,
            "proper-complex" | "proper_complex" => GroupFamily::ProperComplex,
            "circulant" => GroupFamily::Circulant,
            "persymmetric" => GroupFamily::Persymmetric,
            "none" => GroupFamily::None,
            other => return Err(Error::Parse(format!("unknown group family {other:?}"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            GroupFamily::ProperQuaternion => "proper-quaternion",
            GroupFamily::ProperComplex => "proper-complex",
            GroupFamily::Circulant => "circulant",
            GroupFamily::Persymmetric => "persymmetric",
            GroupFamily::None => "none",
        }
    }

    /// The family's group acting on real dimension `dim`.
    pub fn build(self, dim: usize) -> Result<SymmetryGroup> {
        let divisible = |m: usize| {
            if dim.is_multiple_of(m) && dim > 0 {
                Ok(dim / m)
            } else {
                Err(Error::InvalidInput(format!(
                    "{} group needs a dimension divisible by {m}, got {dim}",
                    self.name()
                )))
            }
        };
        match self {
            GroupFamily::ProperQuaternion => make_proper_quaternion_group(divisible(4)?),
            GroupFamily::ProperComplex => make_proper_complex_group(divisible(2)?),
            GroupFamily::Circulant => make_circulant_group(dim),
            GroupFamily::Persymmetric => make_persymmetric_group(dim),
            GroupFamily::None => Ok(SymmetryGroup::trivial(dim)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObjectiveChoice {
    Tyler,
    Mggd { beta: f64 },
}

impl ObjectiveChoice {
    pub fn build(self, dim: usize) -> Result<RhoObjective> {
        match self {
            ObjectiveChoice::Tyler => RhoObjective::tyler(dim),
            ObjectiveChoice::Mggd { beta } => RhoObjective::mggd(beta),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruthMode {
    PerTrial,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    FrobeniusNormalized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Quaternion dimension; the real dimension is `4 * quaternion_p`.
    pub quaternion_p: usize,
    pub sample_sizes: Vec<usize>,
    pub trials: usize,
    pub tau_dof: u32,
    pub tau_normalize: bool,
    pub objective: ObjectiveChoice,
    pub seed: u64,
    pub group: GroupFamily,
    pub truth: TruthMode,
    pub metric: Metric,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            quaternion_p: 10,
            sample_sizes: vec![150, 300, 450, 600],
            trials: 100,
            tau_dof: 1,
            tau_normalize: false,
            objective: ObjectiveChoice::Tyler,
            seed: 0,
            group: GroupFamily::ProperQuaternion,
            truth: TruthMode::PerTrial,
            metric: Metric::FrobeniusNormalized,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

impl ExperimentConfig {
    pub fn dim(&self) -> usize {
        4 * self.quaternion_p
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.quaternion_p == 0 {
            return bad("quaternion_p must be >= 1".into());
        }
        if self.sample_sizes.is_empty() || self.sample_sizes[0] == 0 {
            return bad("sample_sizes must be a non-empty list of positive integers".into());
        }
        if self.sample_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return bad("sample_sizes must be strictly ascending".into());
        }
        if self.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        if self.tau_dof == 0 {
            return bad("tau_dof must be >= 1".into());
        }
        if self.tol.is_nan() || self.tol <= 0.0 || self.max_iter == 0 {
            return bad("tol must be positive and max_iter >= 1".into());
        }
        self.objective.build(self.dim())?;
        self.group.build(self.dim())?;
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment. Missing keys keep
    /// their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut beta = None;
        let mut objective = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let err = || {
                Error::Parse(format!(
                    "line {}: bad value for {key}: {value:?}",
                    lineno + 1
                ))
            };
            match key {
                "quaternion_p" => cfg.quaternion_p = value.parse().map_err(|_| err())?,
                "sample_sizes" => {
                    cfg.sample_sizes = value
                        .split(',')
                        .map(|v| v.trim().parse::<usize>().map_err(|_| err()))
                        .collect::<Result<_>>()?
                }
                "trials" => cfg.trials = value.parse().map_err(|_| err())?,
                "tau_dof" => cfg.tau_dof = value.parse().map_err(|_| err())?,
                "tau_normalize" => cfg.tau_normalize = value.parse().map_err(|_| err())?,
                "objective" => objective = Some(value.to_string()),
                "beta" => beta = Some(value.parse::<f64>().map_err(|_| err())?),
                "seed" => cfg.seed = value.parse().map_err(|_| err())?,
                "group" => cfg.group = GroupFamily::parse(value)?,
                "truth" => {
                    cfg.truth = match value {
                        "per_trial" => TruthMode::PerTrial,
                        "fixed" => TruthMode::Fixed,
                        _ => return Err(err()),
                    }
                }
                "metric" => {
                    cfg.metric = match value {
                        "frobenius_normalized" => Metric::FrobeniusNormalized,
                        _ => return Err(err()),
                    }
                }
                "tol" => cfg.tol = value.parse().map_err(|_| err())?,
                "max_iter" => cfg.max_iter = value.parse().map_err(|_| err())?,
                _ => {
                    return Err(Error::Parse(format!(
                        "line {}: unknown key {key:?}",
                        lineno + 1
                    )))
                }
            }
        }
        cfg.objective = match (objective.as_deref(), beta) {
            (None | Some("tyler"), None) => ObjectiveChoice::Tyler,
            (None | Some("tyler"), Some(_)) => {
                return Err(Error::Parse("beta only applies to objective = mggd".into()))
            }
            (Some("mggd"), b) => ObjectiveChoice::Mggd {
                beta: b.unwrap_or(0.5),
            },
            (Some(other), _) => return Err(Error::Parse(format!("unknown objective {other:?}"))),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Key/value echo, in the same syntax [`ExperimentConfig::parse`] accepts.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let sizes: Vec<String> = self.sample_sizes.iter().map(usize::to_string).collect();
        let mut pairs = vec![
            ("quaternion_p", self.quaternion_p.to_string()),
            ("sample_sizes", sizes.join(",")),
            ("trials", self.trials.to_string()),
            ("tau_dof", self.tau_dof.to_string()),
            ("tau_normalize", self.tau_normalize.to_string()),
        ];
        match self.objective {
            ObjectiveChoice::Tyler => pairs.push(("objective", "tyler".into())),
            ObjectiveChoice::Mggd { beta } => {
                pairs.push(("objective", "mggd".into()));
                pairs.push(("beta", format!("{beta}")));
            }
        }
        pairs.extend([
            ("seed", self.seed.to_string()),
            ("group", self.group.name().to_string()),
            (
                "truth",
                match self.truth {
                    TruthMode::PerTrial => "per_trial",
                    TruthMode::Fixed => "fixed",
                }
                .to_string(),
            ),
            ("metric", "frobenius_normalized".to_string()),
            ("tol", format!("{:e}", self.tol)),
            ("max_iter", self.max_iter.to_string()),
        ]);
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}

/// `||tn(estimate) - tn(truth)||_F / ||tn(truth)||_F` with `tn` trace normalization.
pub fn estimation_error(estimate: &SpdMatrix, truth: &SpdMatrix) -> Result<f64> {
    if estimate.dim() != truth.dim() {
        return Err(Error::dim(truth.dim(), estimate.dim()));
    }
    let e = trace_normalize(estimate);
    let t = trace_normalize(truth);
    Ok((e.as_matrix() - t.as_matrix()).norm() / t.as_matrix().norm())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub estimator: EstimatorKind,
    pub n: usize,
    pub trial: usize,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub estimator: EstimatorKind,
    pub n: usize,
    pub trial: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub estimator: EstimatorKind,
    pub n: usize,
    pub mean_error: f64,
    pub std_error: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub records: Vec<Record>,
    pub failures: Vec<Failure>,
    pub summary: Vec<SummaryRow>,
    pub metadata: Vec<(String, String)>,
}

impl ExperimentReport {
    pub fn summary_for(&self, estimator: EstimatorKind, n: usize) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|r| r.estimator == estimator && r.n == n)
    }

    /// Errors of one estimator at one sample size, ordered by trial.
    pub fn errors(&self, estimator: EstimatorKind, n: usize) -> Vec<(usize, f64)> {
        self.records
            .iter()
            .filter(|r| r.estimator == estimator && r.n == n)
            .map(|r| (r.trial, r.error))
            .collect()
    }
}

/// Mean and standard error of the mean (sample standard deviation / sqrt(m)).
pub fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let m = values.len();
    if m == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / m as f64;
    if m == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    (mean, (var / m as f64).sqrt())
}

fn summarize(records: &[Record], sizes: &[usize]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for est in EstimatorKind::ALL {
        for &n in sizes {
            let errs: Vec<f64> = records
                .iter()
                .filter(|r| r.estimator == est && r.n == n)
                .map(|r| r.error)
                .collect();
            let (mean_error, std_error) = mean_and_std_error(&errs);
            rows.push(SummaryRow {
                estimator: est,
                n,
                mean_error,
                std_error,
                trials: errs.len(),
            });
        }
    }
    rows
}

/// Worker count from `SYMCOV_THREADS`; `None` means the machine default.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

fn run_trial(
    cfg: &ExperimentConfig,
    group: &SymmetryGroup,
    obj: &RhoObjective,
    fp: &FixedPointConfig,
    trial: usize,
) -> (Vec<Record>, Vec<Failure>) {
    let dim = cfg.dim();
    let truth_seed = match cfg.truth {
        TruthMode::PerTrial => derive_seed(cfg.seed, 2 * trial as u64),
        TruthMode::Fixed => derive_seed(cfg.seed, u64::MAX),
    };
    let data_seed = derive_seed(cfg.seed, 2 * trial as u64 + 1);
    let mut records = Vec::new();
    let mut failures = Vec::new();

    let fail_all = |failures: &mut Vec<Failure>, n: usize, reason: String| {
        for est in EstimatorKind::ALL {
            failures.push(Failure {
                estimator: est,
                n,
                trial,
                reason: reason.clone(),
            });
        }
    };

    let truth = match random_invariant_spd(dim, group, truth_seed) {
        Ok(t) => t,
        Err(e) => {
            for &n in &cfg.sample_sizes {
                fail_all(&mut failures, n, format!("{}: {e}", e.kind()));
            }
            return (records, failures);
        }
    };
    let model = EllipticalModel {
        scatter: truth.clone(),
        texture: Texture::ChiSquared {
            dof: cfg.tau_dof,
            normalize: cfg.tau_normalize,
        },
        seed: data_seed,
    };

    for &n in &cfg.sample_sizes {
        let samples = match sample_elliptical(&model, n) {
            Ok(s) => s,
            Err(e) => {
                fail_all(&mut failures, n, format!("{}: {e}", e.kind()));
                continue;
            }
        };
        for (est, outcome) in estimate_all_four(&samples, group, obj, fp) {
            match outcome.and_then(|q| estimation_error(&q, &truth)) {
                Ok(error) => records.push(Record {
                    estimator: est,
                    n,
                    trial,
                    error,
                }),
                Err(e) => failures.push(Failure {
                    estimator: est,
                    n,
                    trial,
                    reason: format!("{}: {e}", e.kind()),
                }),
            }
        }
    }
    (records, failures)
}

/// Runs every (trial, sample size) cell; trials execute in parallel and the
/// output is sorted by (estimator, n, trial), so it does not depend on the
/// worker count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let dim = cfg.dim();
    let group = cfg.group.build(dim)?;
    let obj = cfg.objective.build(dim)?;
    let fp = FixedPointConfig::for_objective(&obj)
        .with_tol(cfg.tol)
        .with_max_iter(cfg.max_iter);

    let work = || -> Vec<(Vec<Record>, Vec<Failure>)> {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| run_trial(cfg, &group, &obj, &fp, t))
            .collect()
    };
    let per_trial = match threads_from_env() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (r, f) in per_trial {
        records.extend(r);
        failures.extend(f);
    }
    records.sort_by_key(|r| (r.estimator, r.n, r.trial));
    failures.sort_by_key(|f| (f.estimator, f.n, f.trial));
    let summary = summarize(&records, &cfg.sample_sizes);

    let mut metadata = vec![("version".to_string(), env!("CARGO_PKG_VERSION").to_string())];
    metadata.push(("dim".to_string(), dim.to_string()));
    metadata.push(("group_order".to_string(), group.order().to_string()));
    metadata.extend(cfg.to_pairs());

    Ok(ExperimentReport {
        records,
        failures,
        summary,
        metadata,
    })
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn records_path(base: &Path) -> PathBuf {
    with_suffix(base, ".records.csv")
}

pub fn summary_path(base: &Path) -> PathBuf {
    with_suffix(base, ".summary.csv")
}

pub fn meta_path(base: &Path) -> PathBuf {
    with_suffix(base, ".meta.txt")
}

pub fn records_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("estimator,n,trial,error\n");
    for r in &report.records {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.estimator,
            r.n,
            r.trial,
            fmt_f64(r.error)
        );
    }
    out
}

pub fn summary_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("estimator,n,mean_error,std_error,trials\n");
    for r in &report.summary {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.estimator,
            r.n,
            fmt_f64(r.mean_error),
            fmt_f64(r.std_error),
            r.trials
        );
    }
    out
}

fn meta_text(report: &ExperimentReport) -> String {
    let mut out = String::new();
    for (k, v) in &report.metadata {
        let _ = writeln!(out, "{k} = {v}");
    }
    for f in &report.failures {
        let _ = writeln!(
            out,
            "# failure {},{},{}: {}",
            f.estimator, f.n, f.trial, f.reason
        );
    }
    out
}

/// Writes `<path>.records.csv`, `<path>.summary.csv` and `<path>.meta.txt`.
pub fn write_report(report: &ExperimentReport, path: impl AsRef<Path>) -> Result<()> {
    let base = path.as_ref();
    for (file, body) in [
        (records_path(base), records_csv(report)),
        (summary_path(base), summary_csv(report)),
        (meta_path(base), meta_text(report)),
    ] {
        fs::write(&file, body).map_err(|e| Error::io(&file, e))?;
    }
    Ok(())
}

fn parse_rows(path: &Path, header: &str) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(header) {
        return Err(Error::Parse(format!(
            "{}: expected header {header:?}",
            path.display()
        )));
    }
    Ok(lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect())
}

fn parse_estimator(s: &str) -> Result<EstimatorKind> {
    EstimatorKind::from_name(s).ok_or_else(|| Error::Parse(format!("unknown estimator {s:?}")))
}

fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Parse(format!("bad number {s:?}")))
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<Record>> {
    parse_rows(path.as_ref(), "estimator,n,trial,error")?
        .into_iter()
        .map(|row| {
            if row.len() != 4 {
                return Err(Error::Parse(format!(
                    "expected 4 fields, got {}",
                    row.len()
                )));
            }
            Ok(Record {
                estimator: parse_estimator(&row[0])?,
                n: parse_num(&row[1])?,
                trial: parse_num(&row[2])?,
                error: parse_num(&row[3])?,
            })
        })
        .collect()
}

pub fn read_summary(path: impl AsRef<Path>) -> Result<Vec<SummaryRow>> {
    parse_rows(path.as_ref(), "estimator,n,mean_error,std_error,trials")?
        .into_iter()
        .map(|row| {
            if row.len() != 5 {
                return Err(Error::Parse(format!(
                    "expected 5 fields, got {}",
                    row.len()
                )));
            }
            Ok(SummaryRow {
                estimator: parse_estimator(&row[0])?,
                n: parse_num(&row[1])?,
                mean_error: parse_num(&row[2])?,
                std_error: parse_num(&row[3])?,
                trials: parse_num(&row[4])?,
            })
        })
        .collect()
}
