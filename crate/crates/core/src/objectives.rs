//! Negative log-likelihoods of elliptical scatter models and the chord test
//! for geodesic convexity.
//!
//! Every objective has the form `(1/n) sum_i rho(s_i^T Q^{-1} s_i) + log det Q`:
//!
//! * Tyler: `rho(x) = p log x`, weight `u(x) = p / x`,
//! * MGGD: `rho(x) = x^beta`, weight `u(x) = beta x^(beta - 1)`, `0 < beta <= 1`.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};
use crate::samples::SampleSet;
use crate::spd::{geodesic, GeodesicParam, SpdMatrix};

/// Default additive slack for [`midpoint_convexity_check`].
pub const CONVEXITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rho {
    Tyler { dim: usize },
    Mggd { beta: f64 },
}

/// Per-sample loss `rho` together with its derivative weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoObjective(Rho);

impl RhoObjective {
    pub fn tyler(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("tyler objective needs p >= 1".into()));
        }
        Ok(RhoObjective(Rho::Tyler { dim }))
    }

    pub fn mggd(beta: f64) -> Result<Self> {
        check_beta(beta)?;
        Ok(RhoObjective(Rho::Mggd { beta }))
    }

    pub fn kind(&self) -> Rho {
        self.0
    }

    pub fn is_tyler(&self) -> bool {
        matches!(self.0, Rho::Tyler { .. })
    }

    pub fn name(&self) -> &'static str {
        match self.0 {
            Rho::Tyler { .. } => "tyler",
            Rho::Mggd { .. } => "mggd",
        }
    }

    pub fn rho(&self, x: f64) -> f64 {
        match self.0 {
            Rho::Tyler { dim } => dim as f64 * x.ln(),
            Rho::Mggd { beta } => x.powf(beta),
        }
    }

    pub(crate) fn weight_unchecked(&self, x: f64) -> f64 {
        match self.0 {
            Rho::Tyler { dim } => dim as f64 / x,
            Rho::Mggd { beta } => beta * x.powf(beta - 1.0),
        }
    }

    fn check_dim(&self, p: usize) -> Result<()> {
        match self.0 {
            Rho::Tyler { dim } if dim != p => Err(Error::dim(dim, p)),
            _ => Ok(()),
        }
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidShape(beta))
    }
}

/// `u(x) = rho'(x)`.
pub fn weight(obj: &RhoObjective, x: f64) -> Result<f64> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "weight argument {x} must be positive"
        )));
    }
    Ok(obj.weight_unchecked(x))
}

/// Cholesky factor of `Q` shared across all quadratic forms.
pub(crate) struct Factored {
    chol: Cholesky<f64, Dyn>,
    log_det: f64,
}

impl Factored {
    pub(crate) fn new(q: &SpdMatrix) -> Result<Self> {
        let chol = Cholesky::new(q.as_matrix().clone())
            .ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorization failed".into()))?;
        let log_det = 2.0
            * chol
                .l_dirty()
                .diagonal()
                .iter()
                .map(|d| d.ln())
                .sum::<f64>();
        Ok(Factored { chol, log_det })
    }

    pub(crate) fn log_det(&self) -> f64 {
        self.log_det
    }

    /// `s_i^T Q^{-1} s_i` for every column, via one triangular solve.
    pub(crate) fn quadratic_forms(&self, samples: &DMatrix<f64>) -> Vec<f64> {
        let y = self
            .chol
            .l_dirty()
            .solve_lower_triangular(samples)
            .expect("Cholesky factor has a positive diagonal");
        y.column_iter().map(|c| c.norm_squared()).collect()
    }
}

fn check_samples(samples: &SampleSet, q: &SpdMatrix) -> Result<()> {
    if samples.dim() != q.dim() {
        return Err(Error::dim(q.dim(), samples.dim()));
    }
    Ok(())
}

/// `(p/n) sum log(x_i^T Q^{-1} x_i) + log det Q`.
pub fn tyler_nll(samples: &SampleSet, q: &SpdMatrix) -> Result<f64> {
    generic_nll(samples, q, &RhoObjective::tyler(q.dim())?)
}

/// `(1/n) sum (x_i^T Q^{-1} x_i)^beta + log det Q`.
pub fn mggd_nll(samples: &SampleSet, q: &SpdMatrix, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    generic_nll(samples, q, &RhoObjective::mggd(beta)?)
}

/// `(1/n) sum rho(s_i^T Q^{-1} s_i) + log det Q`, summed in sample order.
pub fn generic_nll(samples: &SampleSet, q: &SpdMatrix, obj: &RhoObjective) -> Result<f64> {
    check_samples(samples, q)?;
    obj.check_dim(q.dim())?;
    let f = Factored::new(q)?;
    Ok(nll_with(&f, samples.matrix(), obj))
}

pub(crate) fn nll_with(f: &Factored, samples: &DMatrix<f64>, obj: &RhoObjective) -> f64 {
    let forms = f.quadratic_forms(samples);
    let n = forms.len() as f64;
    let sum: f64 = forms.iter().map(|&x| obj.rho(x)).sum();
    sum / n + f.log_det()
}

/// Chord inequality `f(Q_t) <= (1-t) f(Q0) + t f(Q1) + slack` at every grid
/// point, with `Q_t` the geodesic from `q0` to `q1`.
pub fn midpoint_convexity_check<F>(
    mut objective: F,
    q0: &SpdMatrix,
    q1: &SpdMatrix,
    grid: &[f64],
    slack: f64,
) -> Result<bool>
where
    F: FnMut(&SpdMatrix) -> Result<f64>,
{
    let params = grid
        .iter()
        .map(|&t| GeodesicParam::new(t))
        .collect::<Result<Vec<_>>>()?;
    let f0 = objective(q0)?;
    let f1 = objective(q1)?;
    for t in params {
        let qt = geodesic(q0, q1, t)?;
        let tv = t.value();
        if objective(&qt)? > (1.0 - tv) * f0 + tv * f1 + slack {
            return Ok(false);
        }
    }
    Ok(true)
}
