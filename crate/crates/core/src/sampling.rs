//! Seeded synthetic data: random SPD ground truths and elliptical draws
//! `s = sqrt(tau) v` with `v ~ N(0, Q0)` and a chi-squared texture `tau`.
//!
//! Sample `i` is drawn from its own ChaCha stream (stream id `i`), so the first
//! `m` samples of a set of size `n >= m` do not depend on `n`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::samples::SampleSet;
use crate::spd::{spd_power, SpdMatrix};
use crate::symmetry::{project_to_invariant, SymmetryGroup};

const RIDGE: f64 = 1e-6;

/// SplitMix64 finalizer over `seed` and `index`; used to give each trial or
/// sub-experiment its own seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn standard_normal_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// `A A^T + p * 1e-6 * I` with `A` a standard normal `p x p` draw.
pub fn random_spd(p: usize, seed: u64) -> Result<SpdMatrix> {
    if p == 0 {
        return Err(Error::InvalidInput("dimension must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = standard_normal_matrix(&mut rng, p, p);
    let m = &a * a.transpose() + DMatrix::identity(p, p) * (p as f64 * RIDGE);
    SpdMatrix::from_symmetrized(&m)
}

/// Group average of [`random_spd`].
pub fn random_invariant_spd(p: usize, k: &SymmetryGroup, seed: u64) -> Result<SpdMatrix> {
    if k.dim() != p {
        return Err(Error::dim(k.dim(), p));
    }
    project_to_invariant(&random_spd(p, seed)?, k)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Texture {
    /// `tau ~ chi^2(dof)`, optionally divided by its mean `dof`.
    ChiSquared { dof: u32, normalize: bool },
    /// `tau = 1`: plain Gaussian draws.
    Unit,
}

#[derive(Debug, Clone)]
pub struct EllipticalModel {
    pub scatter: SpdMatrix,
    pub texture: Texture,
    pub seed: u64,
}

impl EllipticalModel {
    pub fn new(scatter: SpdMatrix, tau_dof: u32, seed: u64) -> Result<Self> {
        if tau_dof == 0 {
            return Err(Error::InvalidInput(
                "tau degrees of freedom must be >= 1".into(),
            ));
        }
        Ok(EllipticalModel {
            scatter,
            texture: Texture::ChiSquared {
                dof: tau_dof,
                normalize: false,
            },
            seed,
        })
    }

    pub fn gaussian(scatter: SpdMatrix, seed: u64) -> Self {
        EllipticalModel {
            scatter,
            texture: Texture::Unit,
            seed,
        }
    }

    pub fn with_texture(mut self, texture: Texture) -> Self {
        self.texture = texture;
        self
    }
}

/// `n` draws `s_i = sqrt(tau_i) Q0^{1/2} z_i`. The Gaussian part `z_i` is drawn
/// before `tau_i` on each stream, so two models differing only in texture
/// share the same `v_i`.
pub fn sample_elliptical(model: &EllipticalModel, n: usize) -> Result<SampleSet> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be >= 1".into()));
    }
    let chi = match model.texture {
        Texture::ChiSquared { dof: 0, .. } => {
            return Err(Error::InvalidInput(
                "tau degrees of freedom must be >= 1".into(),
            ))
        }
        Texture::ChiSquared { dof, normalize } => Some((
            ChiSquared::new(f64::from(dof))
                .map_err(|e| Error::InvalidInput(format!("chi-squared texture: {e}")))?,
            if normalize { f64::from(dof) } else { 1.0 },
        )),
        Texture::Unit => None,
    };

    let p = model.scatter.dim();
    let root = spd_power(&model.scatter, 0.5)?;
    let mut z = DMatrix::zeros(p, n);
    let mut scale = vec![1.0; n];
    for i in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
        rng.set_stream(i as u64);
        for r in 0..p {
            z[(r, i)] = rng.sample(StandardNormal);
        }
        if let Some((dist, mean)) = &chi {
            scale[i] = (dist.sample(&mut rng) / mean).sqrt();
        }
    }
    let mut data = root.as_matrix() * z;
    for (mut col, s) in data.column_iter_mut().zip(scale) {
        col.scale_mut(s);
    }
    SampleSet::from_columns(data)
}
