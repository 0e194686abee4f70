//! Finite orthogonal symmetry groups and the invariant set they cut out of
//! the SPD cone.
//!
//! A matrix `Q` is invariant under a group `K` when `L Q L^T = Q` for every
//! `L` in `K`, equivalently `Q L = L Q`. Four families are built in:
//!
//! * circulant: powers of the cyclic shift,
//! * persymmetric: the identity and the exchange matrix,
//! * proper complex: `{+-I, +-[[0,1],[-1,0]] (x) I_p}`,
//! * proper quaternion: `{+-I, +-R1 (x) I_p, +-R2 (x) I_p, +-R3 (x) I_p}`.

use std::fmt;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, Matrix4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::samples::{fmt_f64, SampleSet};
use crate::spd::SpdMatrix;

/// Default relative commutation residual for invariance checks.
pub const INVARIANCE_TOL: f64 = 1e-9;

/// Tolerance used when accepting custom groups.
pub const GROUP_TOL: f64 = 1e-10;

const GENERATOR_CHECK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroupLabel {
    Circulant,
    Persymmetric,
    ProperComplex,
    ProperQuaternion,
    Custom,
}

impl fmt::Display for GroupLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GroupLabel::Circulant => "circulant",
            GroupLabel::Persymmetric => "persymmetric",
            GroupLabel::ProperComplex => "proper_complex",
            GroupLabel::ProperQuaternion => "proper_quaternion",
            GroupLabel::Custom => "custom",
        })
    }
}

/// Finite set of real orthogonal `dim x dim` matrices.
#[derive(Debug, Clone)]
pub struct SymmetryGroup {
    dim: usize,
    elements: Vec<DMatrix<f64>>,
    label: GroupLabel,
}

impl SymmetryGroup {
    /// Wraps a list of matrices without checking group axioms; only shapes are
    /// validated. Use [`verify_group`] or [`SymmetryGroup::custom`] for the rest.
    pub fn from_elements(elements: Vec<DMatrix<f64>>, label: GroupLabel) -> Result<Self> {
        let dim = elements
            .first()
            .map(|m| m.nrows())
            .ok_or_else(|| Error::InvalidInput("group must have at least one element".into()))?;
        if dim == 0 {
            return Err(Error::InvalidInput(
                "group elements must be non-empty".into(),
            ));
        }
        for m in &elements {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::dim(dim, m.nrows().max(m.ncols())));
            }
        }
        Ok(SymmetryGroup {
            dim,
            elements,
            label,
        })
    }

    /// A user-supplied group; rejected unless it passes [`verify_group`] at
    /// [`GROUP_TOL`].
    pub fn custom(elements: Vec<DMatrix<f64>>) -> Result<Self> {
        let group = Self::from_elements(elements, GroupLabel::Custom)?;
        let report = group_report(&group, GROUP_TOL);
        if !report.passed() {
            return Err(Error::InvalidInput(format!("not a valid group: {report}")));
        }
        Ok(group)
    }

    /// The group `{I_p}`.
    pub fn trivial(p: usize) -> Self {
        SymmetryGroup {
            dim: p,
            elements: vec![DMatrix::identity(p, p)],
            label: GroupLabel::Custom,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[DMatrix<f64>] {
        &self.elements
    }

    pub fn label(&self) -> GroupLabel {
        self.label
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.dim {
            return Err(Error::dim(self.dim, found));
        }
        Ok(())
    }

    /// Parses the block format: `dim=<p>`, then one matrix per block with
    /// comma-separated rows, blocks separated by blank lines.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .by_ref()
            .map(str::trim)
            .find(|l| !l.is_empty())
            .ok_or_else(|| Error::Parse("empty group file".into()))?;
        let dim: usize = header
            .strip_prefix("dim=")
            .and_then(|v| v.trim().parse().ok())
            .filter(|&d| d > 0)
            .ok_or_else(|| Error::Parse(format!("expected `dim=<p>`, got {header:?}")))?;

        let mut blocks: Vec<Vec<Vec<f64>>> = Vec::new();
        let mut current: Vec<Vec<f64>> = Vec::new();
        for line in lines.map(str::trim) {
            if line.is_empty() {
                if !current.is_empty() {
                    blocks.push(std::mem::take(&mut current));
                }
                continue;
            }
            let row = line
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad number {v:?}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            current.push(row);
        }
        if !current.is_empty() {
            blocks.push(current);
        }

        let elements = blocks
            .into_iter()
            .map(|rows| {
                if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                    return Err(Error::Parse(format!("every block must be {dim}x{dim}")));
                }
                Ok(DMatrix::from_fn(dim, dim, |r, c| rows[r][c]))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::custom(elements)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("dim={}\n", self.dim);
        for m in &self.elements {
            out.push('\n');
            for row in m.row_iter() {
                let cells: Vec<String> = row.iter().map(|x| fmt_f64(*x)).collect();
                out.push_str(&cells.join(","));
                out.push('\n');
            }
        }
        out
    }
}

/// `block (x) I_p`.
fn kron_identity(block: &DMatrix<f64>, p: usize) -> DMatrix<f64> {
    block.kronecker(&DMatrix::identity(p, p))
}

/// `{P^k : k = 0..n-1}` with `P` the cyclic shift `e_j -> e_{j-1}` on rows.
pub fn make_circulant_group(n: usize) -> Result<SymmetryGroup> {
    if n == 0 {
        return Err(Error::InvalidInput("circulant group needs n >= 1".into()));
    }
    let shift = DMatrix::from_fn(n, n, |i, j| if j == (i + 1) % n { 1.0 } else { 0.0 });
    let mut elements = Vec::with_capacity(n);
    let mut power = DMatrix::identity(n, n);
    for _ in 0..n {
        elements.push(power.clone());
        power = &power * &shift;
    }
    SymmetryGroup::from_elements(elements, GroupLabel::Circulant)
}

/// Exchange matrix `J_n`: ones on the anti-diagonal.
pub fn exchange_matrix(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if i + j == n - 1 { 1.0 } else { 0.0 })
}

/// `{I_n, J_n}`.
pub fn make_persymmetric_group(n: usize) -> Result<SymmetryGroup> {
    if n == 0 {
        return Err(Error::InvalidInput(
            "persymmetric group needs n >= 1".into(),
        ));
    }
    SymmetryGroup::from_elements(
        vec![DMatrix::identity(n, n), exchange_matrix(n)],
        GroupLabel::Persymmetric,
    )
}

/// `[[0,1],[-1,0]] (x) I_p`.
pub fn complex_unit(p: usize) -> DMatrix<f64> {
    kron_identity(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]), p)
}

/// The group generated by `I_{2p}` and the complex unit: `[I, L1, -I, -L1]`.
pub fn make_proper_complex_group(p: usize) -> Result<SymmetryGroup> {
    if p == 0 {
        return Err(Error::InvalidInput(
            "proper complex group needs p >= 1".into(),
        ));
    }
    let id = DMatrix::identity(2 * p, 2 * p);
    let l1 = complex_unit(p);
    SymmetryGroup::from_elements(
        vec![id.clone(), l1.clone(), -id, -l1],
        GroupLabel::ProperComplex,
    )
}

#[rustfmt::skip]
pub fn quaternion_units() -> [Matrix4<f64>; 3] {
    let r1 = Matrix4::new(
        0.0, 1.0, 0.0, 0.0,
        -1.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, -1.0,
        0.0, 0.0, 1.0, 0.0,
    );
    let r2 = Matrix4::new(
        0.0, 0.0, 1.0, 0.0,
        0.0, 0.0, 0.0, 1.0,
        -1.0, 0.0, 0.0, 0.0,
        0.0, -1.0, 0.0, 0.0,
    );
    let r3 = Matrix4::new(
        0.0, 0.0, 0.0, 1.0,
        0.0, 0.0, -1.0, 0.0,
        0.0, 1.0, 0.0, 0.0,
        -1.0, 0.0, 0.0, 0.0,
    );
    [r1, r2, r3]
}

fn to_dynamic(m: &Matrix4<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(4, 4, |r, c| m[(r, c)])
}

/// `[I, R1, R2, R3, -I, -R1, -R2, -R3]`, each Kronecker `I_p`.
pub fn make_proper_quaternion_group(p: usize) -> Result<SymmetryGroup> {
    if p == 0 {
        return Err(Error::InvalidInput(
            "proper quaternion group needs p >= 1".into(),
        ));
    }
    let id = DMatrix::identity(4 * p, 4 * p);
    let mut positive = vec![id];
    positive.extend(
        quaternion_units()
            .iter()
            .map(|r| kron_identity(&to_dynamic(r), p)),
    );
    let negative: Vec<DMatrix<f64>> = positive.iter().map(|m| -m).collect();
    positive.extend(negative);
    SymmetryGroup::from_elements(positive, GroupLabel::ProperQuaternion)
}

/// Outcome of [`group_report`]; the first violation of each axiom, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupReport {
    pub non_orthogonal: Option<usize>,
    pub has_identity: bool,
    pub closure_violation: Option<(usize, usize)>,
}

impl GroupReport {
    pub fn passed(&self) -> bool {
        self.non_orthogonal.is_none() && self.has_identity && self.closure_violation.is_none()
    }
}

impl fmt::Display for GroupReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed() {
            return f.write_str("ok");
        }
        let mut parts = Vec::new();
        if let Some(i) = self.non_orthogonal {
            parts.push(format!("element {i} is not orthogonal"));
        }
        if !self.has_identity {
            parts.push("identity missing".to_string());
        }
        if let Some((i, j)) = self.closure_violation {
            parts.push(format!("product of elements {i} and {j} is not in the set"));
        }
        f.write_str(&parts.join("; "))
    }
}

/// Checks orthogonality, presence of the identity and closure under
/// multiplication. Products are matched to the nearest element in Frobenius
/// distance with threshold `tol * sqrt(p)`.
pub fn group_report(k: &SymmetryGroup, tol: f64) -> GroupReport {
    let p = k.dim;
    let id = DMatrix::<f64>::identity(p, p);
    let match_tol = tol * (p as f64).sqrt();

    let non_orthogonal = k
        .elements
        .iter()
        .position(|l| (l.transpose() * l - &id).amax() > tol);
    let has_identity = k.elements.iter().any(|l| (l - &id).norm() <= match_tol);

    let mut closure_violation = None;
    'outer: for (i, a) in k.elements.iter().enumerate() {
        for (j, b) in k.elements.iter().enumerate() {
            let prod = a * b;
            let nearest = k
                .elements
                .iter()
                .map(|c| (&prod - c).norm())
                .fold(f64::INFINITY, f64::min);
            if nearest > match_tol {
                closure_violation = Some((i, j));
                break 'outer;
            }
        }
    }

    GroupReport {
        non_orthogonal,
        has_identity,
        closure_violation,
    }
}

pub fn verify_group(k: &SymmetryGroup, tol: f64) -> bool {
    group_report(k, tol).passed()
}

/// `max_L ||Q L - L Q||_F / ||Q||_F`.
pub fn commutation_residual(q: &DMatrix<f64>, k: &SymmetryGroup) -> Result<f64> {
    k.check_dim(q.nrows())?;
    let qn = q.norm();
    Ok(k.elements
        .iter()
        .map(|l| (q * l - l * q).norm() / qn)
        .fold(0.0, f64::max))
}

pub fn is_invariant(q: &SpdMatrix, k: &SymmetryGroup, tol: f64) -> Result<bool> {
    Ok(commutation_residual(q.as_matrix(), k)? <= tol)
}

/// Group average `(1/|K|) sum_L L Q L^T`, the orthogonal projection onto the
/// invariant subspace.
pub fn project_to_invariant(q: &SpdMatrix, k: &SymmetryGroup) -> Result<SpdMatrix> {
    k.check_dim(q.dim())?;
    let mut acc = DMatrix::zeros(k.dim, k.dim);
    for l in &k.elements {
        acc += l * q.as_matrix() * l.transpose();
    }
    acc /= k.order() as f64;
    Ok(SpdMatrix::from_trusted(acc))
}

/// Parameters of one member of the continuous quaternion rotation family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuaternionRotationParams {
    pub theta: f64,
    pub alpha: f64,
    pub beta_r: f64,
    pub gamma: f64,
}

impl QuaternionRotationParams {
    pub fn new(theta: f64, alpha: f64, beta_r: f64, gamma: f64) -> Result<Self> {
        let norm2 = alpha * alpha + beta_r * beta_r + gamma * gamma;
        if !theta.is_finite() || (norm2 - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "rotation axis must be a unit vector (alpha^2+beta^2+gamma^2 = {norm2})"
            )));
        }
        Ok(QuaternionRotationParams {
            theta,
            alpha,
            beta_r,
            gamma,
        })
    }

    /// Angle uniform on `[0, 2 pi)`, axis uniform on the unit sphere.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        loop {
            let v: [f64; 3] = [
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            ];
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if n > 1e-8 {
                return QuaternionRotationParams {
                    theta,
                    alpha: v[0] / n,
                    beta_r: v[1] / n,
                    gamma: v[2] / n,
                };
            }
        }
    }
}

/// `cos(theta) I + sin(theta) (alpha R1 + beta_r R2 + gamma R3)`, Kronecker `I_p`.
pub fn quaternion_rotation(params: &QuaternionRotationParams, p: usize) -> Result<DMatrix<f64>> {
    let params =
        QuaternionRotationParams::new(params.theta, params.alpha, params.beta_r, params.gamma)?;
    if p == 0 {
        return Err(Error::InvalidInput("p must be >= 1".into()));
    }
    let (s, c) = params.theta.sin_cos();
    let [r1, r2, r3] = quaternion_units();
    let block =
        Matrix4::identity() * c + (r1 * params.alpha + r2 * params.beta_r + r3 * params.gamma) * s;
    Ok(kron_identity(&to_dynamic(&block), p))
}

/// Draws `trials` random quaternion rotations and reports whether `q`
/// commutes with all of them (relative residual at most 1e-10).
///
/// `q` must have dimension `4p`. A `q` outside the invariant set simply
/// yields `false`.
pub fn generator_equivalence_check(q: &SpdMatrix, trials: usize, seed: u64) -> Result<bool> {
    let dim = q.dim();
    if !dim.is_multiple_of(4) {
        return Err(Error::InvalidInput(format!(
            "quaternion rotations act on dimension 4p, got {dim}"
        )));
    }
    let p = dim / 4;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let qm = q.as_matrix();
    let qn = qm.norm();
    for _ in 0..trials {
        let rot = quaternion_rotation(&QuaternionRotationParams::random(&mut rng), p)?;
        if (qm * &rot - &rot * qm).norm() / qn > GENERATOR_CHECK_TOL {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The `|K| n` samples `L s_i`, outer loop over group elements, inner loop
/// over samples.
pub fn symmetrize_samples(samples: &SampleSet, k: &SymmetryGroup) -> Result<SampleSet> {
    k.check_dim(samples.dim())?;
    let n = samples.len();
    let mut out = DMatrix::zeros(k.dim, k.order() * n);
    for (g, l) in k.elements.iter().enumerate() {
        out.columns_mut(g * n, n).copy_from(&(l * samples.matrix()));
    }
    SampleSet::from_columns(out)
}
