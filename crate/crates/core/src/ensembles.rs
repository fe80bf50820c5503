//! Seeded random matrix families.
//!
//! Random kinds draw from [`RngStream`]s keyed by the `EnsembleSpec` seed, on stream
//! ids at [`ENSEMBLE_STREAM_BASE`] and up: `+0` for `GaussianIid` and
//! `Orthogonal`, `+1` and `+2` for the left and right orthogonal factors of
//! `IllConditioned`. Estimators use the low stream ids, so a matrix and the
//! samples drawn against it never share random numbers even under one seed.

use crate::linalg::DenseMatrix;
use crate::sampling::{gaussian_vector, RngStream};
use crate::{Error, Result};

pub const ENSEMBLE_STREAM_BASE: u64 = 1 << 63;

#[derive(Debug, Clone, PartialEq)]
pub enum EnsembleKind {
    /// iid standard normal entries.
    GaussianIid,
    /// Haar-distributed orthogonal matrix.
    Orthogonal,
    ScaledIdentity { scale: f64 },
    /// `diag(entries)`; the dimension must equal `entries.len()`.
    Diagonal { entries: Vec<f64> },
    /// `U diag(σ) Vᵀ` with Haar `U`, `V` and `σ` log-spaced from 1 down to `1/cond`.
    IllConditioned { cond: f64 },
}

impl EnsembleKind {
    pub fn name(&self) -> &'static str {
        match self {
            EnsembleKind::GaussianIid => "gaussian_iid",
            EnsembleKind::Orthogonal => "orthogonal",
            EnsembleKind::ScaledIdentity { .. } => "scaled_identity",
            EnsembleKind::Diagonal { .. } => "diagonal",
            EnsembleKind::IllConditioned { .. } => "ill_conditioned",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub n: usize,
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn gaussian_iid(n: usize, seed: u64) -> Self {
        Self {
            kind: EnsembleKind::GaussianIid,
            n,
            seed,
        }
    }

    pub fn orthogonal(n: usize, seed: u64) -> Self {
        Self {
            kind: EnsembleKind::Orthogonal,
            n,
            seed,
        }
    }

    pub fn scaled_identity(n: usize, scale: f64) -> Self {
        Self {
            kind: EnsembleKind::ScaledIdentity { scale },
            n,
            seed: 0,
        }
    }

    pub fn diagonal(entries: Vec<f64>) -> Self {
        Self {
            n: entries.len(),
            kind: EnsembleKind::Diagonal { entries },
            seed: 0,
        }
    }

    pub fn ill_conditioned(n: usize, cond: f64, seed: u64) -> Self {
        Self {
            kind: EnsembleKind::IllConditioned { cond },
            n,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidSpec("n must be at least 1".into()));
        }
        match &self.kind {
            EnsembleKind::ScaledIdentity { scale } if !(scale.is_finite() && *scale != 0.0) => Err(
                Error::InvalidSpec(format!("scale must be finite and nonzero, got {scale}")),
            ),
            EnsembleKind::Diagonal { entries } => {
                if entries.len() != self.n {
                    return Err(Error::InvalidSpec(format!(
                        "{} diagonal entries given for n = {}",
                        entries.len(),
                        self.n
                    )));
                }
                match entries.iter().position(|d| !(d.is_finite() && *d != 0.0)) {
                    Some(i) => Err(Error::InvalidSpec(format!(
                        "diagonal entry {i} must be finite and nonzero, got {}",
                        entries[i]
                    ))),
                    None => Ok(()),
                }
            }
            EnsembleKind::IllConditioned { cond } if !(cond.is_finite() && *cond >= 1.0) => Err(
                Error::InvalidSpec(format!("condition number must be finite and >= 1, got {cond}")),
            ),
            _ => Ok(()),
        }
    }
}

pub fn generate(spec: &EnsembleSpec) -> Result<DenseMatrix> {
    spec.validate()?;
    let n = spec.n;
    match &spec.kind {
        EnsembleKind::GaussianIid => {
            DenseMatrix::new(n, gaussian_vector(&mut RngStream::new(spec.seed, ENSEMBLE_STREAM_BASE), n * n))
        }
        EnsembleKind::Orthogonal => Ok(haar_orthogonal(&mut RngStream::new(spec.seed, ENSEMBLE_STREAM_BASE), n)),
        EnsembleKind::ScaledIdentity { scale } => Ok(DenseMatrix::from_diagonal(&vec![*scale; n])),
        EnsembleKind::Diagonal { entries } => Ok(DenseMatrix::from_diagonal(entries)),
        EnsembleKind::IllConditioned { cond } => {
            let u = haar_orthogonal(&mut RngStream::new(spec.seed, ENSEMBLE_STREAM_BASE + 1), n);
            let v = haar_orthogonal(&mut RngStream::new(spec.seed, ENSEMBLE_STREAM_BASE + 2), n);
            let sigma = DenseMatrix::from_diagonal(&log_spaced_singular_values(n, *cond));
            u.matmul(&sigma)?.matmul(&v.transpose())
        }
    }
}

/// `σᵢ = cond^{-i/(n-1)}` for `i = 0..n`, so `σ₀ / σₙ₋₁ = cond`.
pub fn log_spaced_singular_values(n: usize, cond: f64) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let step = cond.ln() / (n - 1) as f64;
    (0..n).map(|i| (-(i as f64) * step).exp()).collect()
}

/// Haar orthogonal matrix: Householder QR of a Gaussian matrix, with each
/// column of `Q` multiplied by the sign of the matching diagonal entry of `R`.
pub fn haar_orthogonal(rng: &mut RngStream, n: usize) -> DenseMatrix {
    let mut a = gaussian_vector(rng, n * n);
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut r_signs = vec![1.0; n];

    for k in 0..n {
        let mut v: Vec<f64> = (k..n).map(|i| a[i * n + k]).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if k == n - 1 || norm == 0.0 {
            // Nothing left to annihilate; R[k][k] is the entry itself.
            if v[0] < 0.0 {
                r_signs[k] = -1.0;
            }
            reflectors.push(Vec::new());
            continue;
        }
        // R[k][k] = alpha, chosen opposite to v[0] to avoid cancellation.
        let alpha = if v[0] >= 0.0 { -norm } else { norm };
        r_signs[k] = alpha.signum();
        v[0] -= alpha;
        let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= vnorm);
        for j in k..n {
            let dot: f64 = (k..n).map(|i| v[i - k] * a[i * n + j]).sum();
            for i in k..n {
                a[i * n + j] -= 2.0 * v[i - k] * dot;
            }
        }
        reflectors.push(v);
    }

    // Q = H₀ H₁ ⋯ Hₙ₋₁, accumulated right to left onto the identity.
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        q[i * n + i] = 1.0;
    }
    for (k, v) in reflectors.iter().enumerate().rev() {
        if v.is_empty() {
            continue;
        }
        for j in 0..n {
            let dot: f64 = (k..n).map(|i| v[i - k] * q[i * n + j]).sum();
            for i in k..n {
                q[i * n + j] -= 2.0 * v[i - k] * dot;
            }
        }
    }
    for i in 0..n {
        for (j, s) in r_signs.iter().enumerate() {
            q[i * n + j] *= s;
        }
    }
    DenseMatrix::new(n, q).expect("orthogonal factor is finite")
}
