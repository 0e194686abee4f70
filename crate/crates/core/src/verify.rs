//! Numerical verification suites run by `symcov verify`.

use std::fmt;

use crate::error::Result;
use crate::objectives::{mggd_nll, midpoint_convexity_check, tyler_nll, CONVEXITY_SLACK};
use crate::sampling::{
    derive_seed, random_invariant_spd, random_spd, sample_elliptical, EllipticalModel,
};
use crate::spd::{geodesic, GeodesicParam};
use crate::symmetry::{
    commutation_residual, generator_equivalence_check, group_report, make_circulant_group,
    make_persymmetric_group, make_proper_complex_group, make_proper_quaternion_group,
    SymmetryGroup, GROUP_TOL, INVARIANCE_TOL,
};

pub const GEODESIC_GRID: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];
pub const CONVEXITY_GRID: [f64; 3] = [0.25, 0.5, 0.75];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Geodesic,
    Group,
    Convexity,
    Generators,
}

impl Suite {
    pub const ALL: [Suite; 4] = [
        Suite::Geodesic,
        Suite::Group,
        Suite::Convexity,
        Suite::Generators,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Geodesic => "geodesic",
            Suite::Group => "group",
            Suite::Convexity => "convexity",
            Suite::Generators => "generators",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub suite: Suite,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for SuiteOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status} {}: {}", self.suite.name(), self.detail)
    }
}

/// The four built-in families, each acting on dimension 8.
pub fn families_dim8() -> Result<Vec<SymmetryGroup>> {
    Ok(vec![
        make_circulant_group(8)?,
        make_persymmetric_group(8)?,
        make_proper_complex_group(4)?,
        make_proper_quaternion_group(2)?,
    ])
}

/// Largest commutation residual of geodesic points between random invariant
/// pairs, over all families and grid points.
pub fn geodesic_invariance_residual(pairs: usize, seed: u64) -> Result<f64> {
    let mut worst = 0.0f64;
    for (fi, group) in families_dim8()?.iter().enumerate() {
        let base = derive_seed(seed, fi as u64);
        for i in 0..pairs as u64 {
            let q0 = random_invariant_spd(group.dim(), group, derive_seed(base, 2 * i))?;
            let q1 = random_invariant_spd(group.dim(), group, derive_seed(base, 2 * i + 1))?;
            for t in GEODESIC_GRID {
                let qt = geodesic(&q0, &q1, GeodesicParam::new(t)?)?;
                worst = worst.max(commutation_residual(qt.as_matrix(), group)?);
            }
        }
    }
    Ok(worst)
}

/// Number of chord-inequality violations for Tyler and MGGD objectives.
pub fn convexity_violations(pairs: usize, dims: &[usize], n: usize, seed: u64) -> Result<usize> {
    let mut violations = 0;
    for &p in dims {
        let base = derive_seed(seed, p as u64);
        let scatter = random_spd(p, derive_seed(base, 0))?;
        let samples =
            sample_elliptical(&EllipticalModel::new(scatter, 1, derive_seed(base, 1))?, n)?;
        for i in 0..pairs as u64 {
            let q0 = random_spd(p, derive_seed(base, 2 * i + 2))?;
            let q1 = random_spd(p, derive_seed(base, 2 * i + 3))?;
            let ok = midpoint_convexity_check(
                |q| tyler_nll(&samples, q),
                &q0,
                &q1,
                &CONVEXITY_GRID,
                CONVEXITY_SLACK,
            )?;
            violations += usize::from(!ok);
            for beta in [0.2, 0.5, 1.0] {
                let ok = midpoint_convexity_check(
                    |q| mggd_nll(&samples, q, beta),
                    &q0,
                    &q1,
                    &CONVEXITY_GRID,
                    CONVEXITY_SLACK,
                )?;
                violations += usize::from(!ok);
            }
        }
    }
    Ok(violations)
}

/// Count of quaternion-invariant matrices failing the rotation-family check.
pub fn generator_failures(
    matrices: usize,
    quaternion_dims: &[usize],
    rotations: usize,
    seed: u64,
) -> Result<usize> {
    let mut failures = 0;
    for &p in quaternion_dims {
        let group = make_proper_quaternion_group(p)?;
        let base = derive_seed(seed, 1000 + p as u64);
        for i in 0..matrices as u64 {
            let q = random_invariant_spd(4 * p, &group, derive_seed(base, 2 * i))?;
            if !generator_equivalence_check(&q, rotations, derive_seed(base, 2 * i + 1))? {
                failures += 1;
            }
        }
    }
    Ok(failures)
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<SuiteOutcome> {
    let (passed, detail) = match suite {
        Suite::Geodesic => {
            let worst = geodesic_invariance_residual(100, seed)?;
            (
                worst <= INVARIANCE_TOL,
                format!("max commutation residual {worst:.3e} (limit {INVARIANCE_TOL:.0e})"),
            )
        }
        Suite::Group => {
            let groups = [
                make_circulant_group(8)?,
                make_persymmetric_group(8)?,
                make_proper_complex_group(4)?,
                make_proper_quaternion_group(2)?,
                make_proper_quaternion_group(10)?,
            ];
            let bad: Vec<String> = groups
                .iter()
                .filter_map(|g| {
                    let r = group_report(g, GROUP_TOL);
                    (!r.passed()).then(|| format!("{} (dim {}): {r}", g.label(), g.dim()))
                })
                .collect();
            if bad.is_empty() {
                (
                    true,
                    format!("{} groups closed and orthogonal", groups.len()),
                )
            } else {
                (false, bad.join("; "))
            }
        }
        Suite::Convexity => {
            let v = convexity_violations(100, &[2, 5, 10], 200, seed)?;
            (v == 0, format!("{v} chord-inequality violations"))
        }
        Suite::Generators => {
            let f = generator_failures(20, &[2, 10], 50, seed)?;
            (
                f == 0,
                format!("{f} invariant matrices failed the rotation check"),
            )
        }
    };
    Ok(SuiteOutcome {
        suite,
        passed,
        detail,
    })
}
