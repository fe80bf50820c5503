//! Seeded random sources: Gaussian vectors, uniform directions on the unit
//! sphere, chi radii, and the standard Gaussian log-density.
//!
//! Every stream is a ChaCha20 generator keyed by `seed` with its 64-bit stream
//! selector set to `stream_id`, so substreams never overlap and any worker can
//! reconstruct its sequence from the pair alone. Normal variates use the
//! ziggurat sampler from `rand_distr`. Both algorithms are pinned by
//! `Cargo.lock`; changing either changes every seeded result.

use std::f64::consts::PI;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

/// Gaussian vectors shorter than this are redrawn before normalization.
pub const MIN_GAUSSIAN_NORM: f64 = 1e-150;

/// A reproducible random stream identified by `(seed, stream_id)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha20Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// A point on the unit sphere `S^{n-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    /// Normalizes `v`; `None` when its norm is below [`MIN_GAUSSIAN_NORM`] or
    /// not finite.
    pub fn normalize(mut v: Vec<f64>) -> Option<Self> {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm >= MIN_GAUSSIAN_NORM) || v.is_empty() {
            return None;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        Some(Self(v))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

pub fn fill_gaussian(rng: &mut RngStream, out: &mut [f64]) {
    for x in out.iter_mut() {
        *x = rng.standard_normal();
    }
}

/// `n` iid standard normal draws.
pub fn gaussian_vector(rng: &mut RngStream, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    fill_gaussian(rng, &mut v);
    v
}

/// Writes a uniform direction on the unit sphere into `out`.
pub fn fill_unit_sphere(rng: &mut RngStream, out: &mut [f64]) {
    loop {
        fill_gaussian(rng, out);
        let norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm >= MIN_GAUSSIAN_NORM {
            out.iter_mut().for_each(|x| *x /= norm);
            return;
        }
    }
}

/// Uniform direction on `S^{n-1}`, from a normalized Gaussian vector.
pub fn unit_sphere(rng: &mut RngStream, n: usize) -> UnitVector {
    let mut v = vec![0.0; n];
    fill_unit_sphere(rng, &mut v);
    UnitVector(v)
}

/// Chi-distributed radius with `n` degrees of freedom: the norm of an
/// `n`-dimensional standard Gaussian.
pub fn chi_sample(rng: &mut RngStream, n: usize) -> f64 {
    loop {
        let r = (0..n)
            .map(|_| {
                let g = rng.standard_normal();
                g * g
            })
            .sum::<f64>()
            .sqrt();
        if r > 0.0 {
            return r;
        }
    }
}

/// `log N(x; 0, I) = -(n/2) log(2π) - ‖x‖²/2`.
pub fn log_density_std_gaussian(x: &[f64]) -> f64 {
    log_density_isotropic_gaussian(x, 1.0)
}

/// Log-density of `N(0, σ² I)` at `x`.
pub fn log_density_isotropic_gaussian(x: &[f64], sigma: f64) -> f64 {
    let n = x.len() as f64;
    let ss: f64 = x.iter().map(|v| v * v).sum();
    -0.5 * n * (2.0 * PI).ln() - n * sigma.ln() - 0.5 * ss / (sigma * sigma)
}

/// Source of directions for the sphere estimators.
///
/// [`UniformSphere`] is the only sampler that makes the estimators unbiased;
/// the trait exists so validation harnesses can substitute faulty samplers.
pub trait DirectionSampler: Sync {
    fn sample_into(&self, rng: &mut RngStream, out: &mut [f64]);
}

#[derive(Debug, Clone, Copy, Default)]
pub struct UniformSphere;

impl DirectionSampler for UniformSphere {
    fn sample_into(&self, rng: &mut RngStream, out: &mut [f64]) {
        fill_unit_sphere(rng, out)
    }
}
