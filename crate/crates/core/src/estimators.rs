//! Sample covariances and the iterative reweighted fixed-point scheme
//!
//! ```text
//! Q_{k+1} = (1/N) sum_i u(s_i^T Q_k^{-1} s_i) s_i s_i^T
//! ```
//!
//! Its constrained form runs the same map on the `|K| n` replicated samples
//! `L s_i`, which keeps every iterate inside the invariant set when the
//! starting point is invariant.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::objectives::{nll_with, Factored, RhoObjective};
use crate::samples::SampleSet;
use crate::spd::{rel_frobenius, trace_normalize, SpdMatrix};
use crate::symmetry::{symmetrize_samples, SymmetryGroup};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    Identity,
    Matrix(SpdMatrix),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointConfig {
    /// Stop once `||Q_{k+1} - Q_k||_F / ||Q_k||_F < tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Rescale every iterate to trace `p`.
    pub normalize_each_iter: bool,
    pub init: Init,
}

impl FixedPointConfig {
    /// Defaults: tol 1e-8, 500 iterations, identity start, per-iterate trace
    /// normalization only for the scale-free Tyler objective.
    pub fn for_objective(obj: &RhoObjective) -> Self {
        FixedPointConfig {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            normalize_each_iter: obj.is_tyler(),
            init: Init::Identity,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_init(mut self, init: SpdMatrix) -> Self {
        self.init = Init::Matrix(init);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidInput("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EstimateResult {
    pub estimate: SpdMatrix,
    pub iterations: usize,
    pub final_relative_change: f64,
    /// Objective at the starting point and after every update.
    pub nll_trace: Vec<f64>,
    pub converged: bool,
}

/// `(1/N) S diag(w) S^T`, resymmetrized.
fn weighted_scatter(data: &DMatrix<f64>, weights: &[f64]) -> DMatrix<f64> {
    let mut scaled = data.clone();
    for (mut col, &w) in scaled.column_iter_mut().zip(weights) {
        col.scale_mut(w);
    }
    let n = data.ncols() as f64;
    let m = scaled * data.transpose() / n;
    (&m + m.transpose()) * 0.5
}

fn rank_check(s: DMatrix<f64>) -> Result<SpdMatrix> {
    SpdMatrix::from_symmetrized(&s).map_err(|e| match e {
        Error::NotPositiveDefinite(msg) => Error::RankDeficient(msg),
        other => other,
    })
}

/// `(1/n) sum s_i s_i^T`.
pub fn sample_covariance(samples: &SampleSet) -> Result<SpdMatrix> {
    let p = samples.dim();
    let n = samples.len();
    if n < p {
        return Err(Error::RankDeficient(format!(
            "{n} samples in dimension {p}"
        )));
    }
    rank_check(weighted_scatter(samples.matrix(), &vec![1.0; n]))
}

/// `(1/(|K| n)) sum_L sum_i L s_i s_i^T L^T`.
pub fn proper_sample_covariance(samples: &SampleSet, k: &SymmetryGroup) -> Result<SpdMatrix> {
    sample_covariance(&symmetrize_samples(samples, k)?)
}

/// One application of the reweighting map, without normalization.
pub fn fixed_point_step(
    samples: &SampleSet,
    obj: &RhoObjective,
    q: &SpdMatrix,
) -> Result<SpdMatrix> {
    if samples.dim() != q.dim() {
        return Err(Error::dim(q.dim(), samples.dim()));
    }
    let f = Factored::new(q)?;
    let weights: Vec<f64> = f
        .quadratic_forms(samples.matrix())
        .into_iter()
        .map(|x| obj.weight_unchecked(x))
        .collect();
    SpdMatrix::from_symmetrized(&weighted_scatter(samples.matrix(), &weights))
}

/// Iterates the reweighting map from `cfg.init` until the relative change
/// drops below `cfg.tol` or `cfg.max_iter` updates have been made.
pub fn fixed_point_estimate(
    samples: &SampleSet,
    obj: &RhoObjective,
    cfg: &FixedPointConfig,
) -> Result<EstimateResult> {
    cfg.validate()?;
    let p = samples.dim();
    if let crate::objectives::Rho::Tyler { dim } = obj.kind() {
        if dim != p {
            return Err(Error::dim(dim, p));
        }
    }
    if samples.len() < p {
        return Err(Error::RankDeficient(format!(
            "{} samples in dimension {p}; the fixed point is degenerate",
            samples.len()
        )));
    }
    rank_check(weighted_scatter(
        samples.matrix(),
        &vec![1.0; samples.len()],
    ))?;

    let mut q = match &cfg.init {
        Init::Identity => SpdMatrix::identity(p),
        Init::Matrix(m) => {
            if m.dim() != p {
                return Err(Error::dim(p, m.dim()));
            }
            m.clone()
        }
    };
    if cfg.normalize_each_iter {
        q = trace_normalize(&q);
    }

    let data = samples.matrix();
    let mut nll_trace = Vec::with_capacity(cfg.max_iter + 1);
    let mut iterations = 0;
    let mut change = f64::INFINITY;
    let mut converged = false;

    while iterations < cfg.max_iter {
        let f = Factored::new(&q)?;
        let forms = f.quadratic_forms(data);
        let n = forms.len() as f64;
        nll_trace.push(forms.iter().map(|&x| obj.rho(x)).sum::<f64>() / n + f.log_det());

        let weights: Vec<f64> = forms.iter().map(|&x| obj.weight_unchecked(x)).collect();
        let mut next = SpdMatrix::from_symmetrized(&weighted_scatter(data, &weights)).map_err(
            |e| match e {
                Error::NotPositiveDefinite(msg) => {
                    Error::NotPositiveDefinite(format!("iterate {}: {msg}", iterations + 1))
                }
                other => other,
            },
        )?;
        if cfg.normalize_each_iter {
            next = trace_normalize(&next);
        }
        change = rel_frobenius(next.as_matrix(), q.as_matrix());
        q = next;
        iterations += 1;
        if change < cfg.tol {
            converged = true;
            break;
        }
    }
    nll_trace.push(nll_with(&Factored::new(&q)?, data, obj));

    Ok(EstimateResult {
        estimate: q,
        iterations,
        final_relative_change: change,
        nll_trace,
        converged,
    })
}

/// Fixed-point estimate over the replicated samples `{L s_i}`.
pub fn constrained_estimate(
    samples: &SampleSet,
    k: &SymmetryGroup,
    obj: &RhoObjective,
    cfg: &FixedPointConfig,
) -> Result<EstimateResult> {
    fixed_point_estimate(&symmetrize_samples(samples, k)?, obj, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EstimatorKind {
    SampleCovariance,
    ProperSampleCovariance,
    Tyler,
    ProperTyler,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [
        EstimatorKind::SampleCovariance,
        EstimatorKind::ProperSampleCovariance,
        EstimatorKind::Tyler,
        EstimatorKind::ProperTyler,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::SampleCovariance => "SC",
            EstimatorKind::ProperSampleCovariance => "PSC",
            EstimatorKind::Tyler => "Tyler",
            EstimatorKind::ProperTyler => "ProperTyler",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Trace-normalized SC, PSC, M-estimate and constrained M-estimate. A failed
/// estimator is kept as its error instead of aborting the others.
pub fn estimate_all_four(
    samples: &SampleSet,
    k: &SymmetryGroup,
    obj: &RhoObjective,
    cfg: &FixedPointConfig,
) -> BTreeMap<EstimatorKind, Result<SpdMatrix>> {
    let mut out = BTreeMap::new();
    out.insert(
        EstimatorKind::SampleCovariance,
        sample_covariance(samples).map(|q| trace_normalize(&q)),
    );
    out.insert(
        EstimatorKind::ProperSampleCovariance,
        proper_sample_covariance(samples, k).map(|q| trace_normalize(&q)),
    );
    out.insert(
        EstimatorKind::Tyler,
        fixed_point_estimate(samples, obj, cfg).map(|r| trace_normalize(&r.estimate)),
    );
    out.insert(
        EstimatorKind::ProperTyler,
        constrained_estimate(samples, k, obj, cfg).map(|r| trace_normalize(&r.estimate)),
    );
    out
}
