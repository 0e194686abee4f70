//! Dense symmetric-matrix numerics on the SPD cone.
//!
//! All matrix functions go through one symmetric eigendecomposition, which
//! gives square roots, inverse square roots and arbitrary real powers in a
//! single pass. The affine-invariant geodesic between two SPD matrices is
//!
//! ```text
//! Q(t) = Q0^{1/2} (Q0^{-1/2} Q1 Q0^{-1/2})^t Q0^{1/2},   t in [0, 1]
//! ```
//!
//! Composite products are resymmetrized before they are returned.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative asymmetry accepted by [`SpdMatrix::new`].
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Eigenvalues below `EIGEN_FLOOR * lambda_max` are treated as non-positive.
pub const EIGEN_FLOOR: f64 = 1e-13;

/// Asymmetry tolerated by [`sym_eig`] before rejecting its input.
const EIG_INPUT_SYMMETRY_TOL: f64 = 1e-10;

/// Real symmetric positive definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix(DMatrix<f64>);

impl SpdMatrix {
    /// Validates symmetry (relative `SYMMETRY_TOL`) and positive definiteness
    /// (eigenvalue floor `EIGEN_FLOOR`).
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_square(&m)?;
        let scale = max_abs(&m);
        if asymmetry(&m) > SYMMETRY_TOL * scale {
            return Err(Error::InvalidInput(format!(
                "matrix is not symmetric (asymmetry {:.3e}, scale {:.3e})",
                asymmetry(&m),
                scale
            )));
        }
        let m = symmetrize(&m);
        check_positive_spectrum(&sym_eig_unchecked(&m).eigenvalues)?;
        Ok(SpdMatrix(m))
    }

    /// Symmetrizes `m` as `(m + m^T)/2` and then validates positive definiteness.
    pub fn from_symmetrized(m: &DMatrix<f64>) -> Result<Self> {
        check_square(m)?;
        let m = symmetrize(m);
        check_positive_spectrum(&sym_eig_unchecked(&m).eigenvalues)?;
        Ok(SpdMatrix(m))
    }

    /// Wraps a matrix that is SPD by construction; symmetrizes it.
    pub(crate) fn from_trusted(m: DMatrix<f64>) -> Self {
        SpdMatrix(symmetrize(&m))
    }

    pub fn identity(p: usize) -> Self {
        SpdMatrix(DMatrix::identity(p, p))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_row_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// `c * Q` for `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "scale factor {c} must be positive"
            )));
        }
        Ok(SpdMatrix(&self.0 * c))
    }

    pub fn eig(&self) -> SymEigPair {
        sym_eig_unchecked(&self.0)
    }
}

impl AsRef<DMatrix<f64>> for SpdMatrix {
    fn as_ref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Parameter of a point on the geodesic, restricted to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct GeodesicParam(f64);

impl GeodesicParam {
    pub fn new(t: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&t) {
            Ok(GeodesicParam(t))
        } else {
            Err(Error::InvalidInput(format!(
                "geodesic parameter {t} outside [0, 1]"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Spectral decomposition with ascending eigenvalues and orthonormal
/// eigenvector columns.
#[derive(Debug, Clone)]
pub struct SymEigPair {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl SymEigPair {
    /// `V diag(f(lambda)) V^T`, resymmetrized.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            let fl = f(lambda);
            scaled.column_mut(j).scale_mut(fl);
        }
        symmetrize(&(scaled * v.transpose()))
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.map_spectrum(|l| l)
    }
}

/// Symmetric eigendecomposition with ascending eigenvalues.
pub fn sym_eig(m: &DMatrix<f64>) -> Result<SymEigPair> {
    check_square(m)?;
    let scale = max_abs(m).max(f64::MIN_POSITIVE);
    let asym = asymmetry(m);
    if asym > EIG_INPUT_SYMMETRY_TOL * scale {
        return Err(Error::InvalidInput(format!(
            "matrix is not symmetric (asymmetry {asym:.3e})"
        )));
    }
    Ok(sym_eig_unchecked(&symmetrize(m)))
}

fn sym_eig_unchecked(m: &DMatrix<f64>) -> SymEigPair {
    let p = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = DVector::from_iterator(p, order.iter().map(|&i| eig.eigenvalues[i]));
    let eigenvectors = DMatrix::from_fn(p, p, |r, c| eig.eigenvectors[(r, order[c])]);
    SymEigPair {
        eigenvalues,
        eigenvectors,
    }
}

/// `Q^t` via the eigendecomposition of `Q`.
pub fn spd_power(q: &SpdMatrix, t: f64) -> Result<SpdMatrix> {
    if !t.is_finite() {
        return Err(Error::InvalidInput(format!("power {t} is not finite")));
    }
    let eig = q.eig();
    check_positive_spectrum(&eig.eigenvalues)?;
    Ok(SpdMatrix(eig.map_spectrum(|l| l.powf(t))))
}

/// Point `Q(t)` on the affine-invariant geodesic from `q0` (t = 0) to `q1` (t = 1).
pub fn geodesic(q0: &SpdMatrix, q1: &SpdMatrix, t: GeodesicParam) -> Result<SpdMatrix> {
    if q0.dim() != q1.dim() {
        return Err(Error::dim(q0.dim(), q1.dim()));
    }
    let eig0 = q0.eig();
    check_positive_spectrum(&eig0.eigenvalues)?;
    let sqrt0 = eig0.map_spectrum(f64::sqrt);
    let inv_sqrt0 = eig0.map_spectrum(|l| 1.0 / l.sqrt());

    let inner = symmetrize(&(&inv_sqrt0 * q1.as_matrix() * &inv_sqrt0));
    let inner_eig = sym_eig_unchecked(&inner);
    check_positive_spectrum(&inner_eig.eigenvalues)?;
    let tv = t.value();
    let inner_t = inner_eig.map_spectrum(|l| l.powf(tv));

    Ok(SpdMatrix(symmetrize(&(&sqrt0 * inner_t * &sqrt0))))
}

/// Rescales `Q` to trace `p`.
pub fn trace_normalize(q: &SpdMatrix) -> SpdMatrix {
    let p = q.dim() as f64;
    SpdMatrix(q.as_matrix() * (p / q.trace()))
}

/// Symmetric within `tol` and smallest eigenvalue above `tol * max(1, max|M|)`.
pub fn is_spd(m: &DMatrix<f64>, tol: f64) -> bool {
    if !m.is_square() || m.iter().any(|x| !x.is_finite()) {
        return false;
    }
    let scale = max_abs(m).max(1.0);
    if asymmetry(m) > tol * scale {
        return false;
    }
    let eig = sym_eig_unchecked(&symmetrize(m));
    eig.eigenvalues.iter().all(|&l| l > tol * scale)
}

/// `(M + M^T) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let p = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..p {
        for j in (i + 1)..p {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() == 0 || !m.is_square() {
        return Err(Error::InvalidInput(format!(
            "expected a non-empty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    Ok(())
}

/// Rejects spectra whose smallest eigenvalue is not above the relative floor.
pub(crate) fn check_positive_spectrum(eigenvalues: &DVector<f64>) -> Result<()> {
    let lmin = eigenvalues.min();
    let lmax = eigenvalues.max();
    if lmax.is_nan() || lmax <= 0.0 || lmin.is_nan() || lmin <= EIGEN_FLOOR * lmax {
        return Err(Error::NotPositiveDefinite(format!(
            "eigenvalue range [{lmin:.3e}, {lmax:.3e}] violates floor {EIGEN_FLOOR:.0e} * lambda_max"
        )));
    }
    Ok(())
}

pub(crate) fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}
