//! Desk-scale property suite run by `stodet validate`.
//!
//! Exactness properties use tight absolute tolerances. Statistical properties
//! compare against exact references at 4 standard errors so that the suite
//! passes for essentially every seed.

use crate::ensembles::{generate, EnsembleSpec};
use crate::estimators::{
    det_via_inverse_solves_with, inv_det_gaussian_ratio, inv_det_importance, inv_det_sphere_with,
    EstimatorConfig, IsotropicGaussianPair,
};
use crate::linalg::{lu_factorize, DenseMatrix};
use crate::sampling::{chi_sample, DirectionSampler, RngStream, UniformSphere};
use crate::Result;

const EXACT_TOL: f64 = 1e-9;
const STAT_SIGMAS: f64 = 4.0;
/// `√2·Γ(5.5)/Γ(5)`, the mean of a chi variable with 10 degrees of freedom.
pub const CHI10_MEAN: f64 = 3.084_327_759_799_864;

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// `2 · U diag(σ) Vᵀ` with `σ` log-spaced over `[1/2, 1]`, so every singular
/// value lies in `[1, 2]`. Both Gaussian-weight estimators have finite
/// variance on it.
pub fn well_conditioned_matrix(n: usize, seed: u64) -> DenseMatrix {
    generate(&EnsembleSpec::ill_conditioned(n, 2.0, seed))
        .and_then(|m| m.scaled(2.0))
        .expect("valid spec")
}

pub struct Validator<'a> {
    seed: u64,
    sampler: &'a dyn DirectionSampler,
}

impl Validator<'static> {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            sampler: &UniformSphere,
        }
    }
}

impl<'a> Validator<'a> {
    /// Replaces the sphere sampler used by the sampler checks and the sphere
    /// estimators.
    pub fn with_direction_sampler<'b>(self, sampler: &'b dyn DirectionSampler) -> Validator<'b> {
        Validator {
            seed: self.seed,
            sampler,
        }
    }

    pub fn run(&self) -> Vec<PropertyOutcome> {
        let checks: [(&'static str, fn(&Self) -> Result<(bool, String)>); 10] = [
            ("sphere_norm", Self::sphere_norm),
            ("sphere_second_moment", Self::sphere_second_moment),
            ("chi_mean", Self::chi_mean),
            ("lu_cofactor_oracle", Self::lu_cofactor_oracle),
            ("orthogonal_exactness", Self::orthogonal_exactness),
            ("scaled_identity_exactness", Self::scaled_identity_exactness),
            ("scale_equivariance", Self::scale_equivariance),
            ("cross_estimator_agreement", Self::cross_estimator_agreement),
            ("importance_generality", Self::importance_generality),
            ("inverse_solve_vs_oracle", Self::inverse_solve_vs_oracle),
        ];
        checks
            .iter()
            .map(|(name, check)| match check(self) {
                Ok((passed, detail)) => PropertyOutcome {
                    name,
                    passed,
                    detail,
                },
                Err(e) => PropertyOutcome {
                    name,
                    passed: false,
                    detail: format!("error: {e}"),
                },
            })
            .collect()
    }

    fn seed(&self, offset: u64) -> u64 {
        self.seed.wrapping_add(offset)
    }

    fn sphere_norm(&self) -> Result<(bool, String)> {
        let mut rng = RngStream::new(self.seed(1), 0);
        let mut worst = 0.0f64;
        for n in [1, 4, 50] {
            let mut s = vec![0.0; n];
            for _ in 0..1000 {
                self.sampler.sample_into(&mut rng, &mut s);
                let norm = s.iter().map(|x| x * x).sum::<f64>().sqrt();
                worst = worst.max((norm - 1.0).abs());
            }
        }
        Ok((worst <= 1e-12, format!("max |‖s‖ - 1| = {worst:.3e}")))
    }

    fn sphere_second_moment(&self) -> Result<(bool, String)> {
        let n = 4;
        let draws = 100_000;
        let mut rng = RngStream::new(self.seed(2), 0);
        let mut s = vec![0.0; n];
        let mut acc = vec![0.0; n * n];
        for _ in 0..draws {
            self.sampler.sample_into(&mut rng, &mut s);
            for i in 0..n {
                for j in 0..n {
                    acc[i * n + j] += s[i] * s[j];
                }
            }
        }
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 / n as f64 } else { 0.0 };
                worst = worst.max((acc[i * n + j] / draws as f64 - want).abs());
            }
        }
        Ok((worst <= 0.01, format!("max |E[ssᵀ] - I/4| = {worst:.3e}")))
    }

    fn chi_mean(&self) -> Result<(bool, String)> {
        let draws = 100_000;
        let mut rng = RngStream::new(self.seed(3), 0);
        let rs: Vec<f64> = (0..draws).map(|_| chi_sample(&mut rng, 10)).collect();
        let mean = rs.iter().sum::<f64>() / draws as f64;
        let var = rs.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        let se = (var / draws as f64).sqrt();
        let z = (mean - CHI10_MEAN) / se;
        Ok((z.abs() <= STAT_SIGMAS, format!("chi(10) mean {mean:.6}, z = {z:.2}")))
    }

    fn lu_cofactor_oracle(&self) -> Result<(bool, String)> {
        let mut worst = 0.0f64;
        for k in 0..100 {
            let a = generate(&EnsembleSpec::gaussian_iid(2, self.seed(1000 + k)))?;
            let s = a.as_slice();
            let cofactor = (s[0] * s[3] - s[1] * s[2]).abs().ln();
            worst = worst.max((lu_factorize(&a)?.log_abs_det() - cofactor).abs());
        }
        Ok((worst <= 1e-12, format!("max log-domain error {worst:.3e}")))
    }

    fn orthogonal_exactness(&self) -> Result<(bool, String)> {
        let mut worst = 0.0f64;
        for n in [2, 10, 50] {
            let q = generate(&EnsembleSpec::orthogonal(n, self.seed(n as u64)))?;
            let cfg = EstimatorConfig::new(100, self.seed(4));
            for r in [
                inv_det_sphere_with(&q, &cfg, self.sampler)?,
                inv_det_gaussian_ratio(&q, &cfg)?,
                det_via_inverse_solves_with(&q, &cfg, self.sampler)?,
            ] {
                worst = worst.max((r.mean - 1.0).abs()).max(r.std_error);
            }
        }
        Ok((
            worst <= EXACT_TOL,
            format!("max(|mean - 1|, std_error) = {worst:.3e}"),
        ))
    }

    fn scaled_identity_exactness(&self) -> Result<(bool, String)> {
        let a = generate(&EnsembleSpec::scaled_identity(5, 2.0))?;
        let cfg = EstimatorConfig::new(100, self.seed(5));
        let inv = inv_det_sphere_with(&a, &cfg, self.sampler)?;
        let det = det_via_inverse_solves_with(&a, &cfg, self.sampler)?;
        let err = (inv.mean - 0.03125)
            .abs()
            .max((det.mean - 32.0).abs())
            .max(inv.std_error)
            .max(det.std_error);
        Ok((
            err <= 1e-12,
            format!("sphere {:.17}, inverse-solve {:.17}", inv.mean, det.mean),
        ))
    }

    fn scale_equivariance(&self) -> Result<(bool, String)> {
        let a = generate(&EnsembleSpec::gaussian_iid(8, self.seed(6)))?;
        let cfg = EstimatorConfig::new(1000, self.seed(7));
        let base = inv_det_sphere_with(&a, &cfg, self.sampler)?;
        let mut worst = 0.0f64;
        for c in [0.5, 3.0] {
            let scaled = inv_det_sphere_with(&a.scaled(c)?, &cfg, self.sampler)?;
            let shift = scaled.log_mean - base.log_mean;
            worst = worst.max((shift + 8.0 * f64::ln(c)).abs());
        }
        Ok((worst <= 1e-12, format!("max shift error {worst:.3e}")))
    }

    fn cross_estimator_agreement(&self) -> Result<(bool, String)> {
        let a = well_conditioned_matrix(4, self.seed(8));
        let cfg = EstimatorConfig::new(200_000, self.seed(9)).with_streams(4);
        let sphere = inv_det_sphere_with(&a, &cfg, self.sampler)?;
        let ratio = inv_det_gaussian_ratio(&a, &cfg.with_streams(8))?;
        let se = sphere.std_error.hypot(ratio.std_error);
        let z = (sphere.mean - ratio.mean) / se;
        Ok((
            z.abs() <= STAT_SIGMAS,
            format!("sphere {:.6e} vs gaussian-ratio {:.6e}, z = {z:.2}", sphere.mean, ratio.mean),
        ))
    }

    fn importance_generality(&self) -> Result<(bool, String)> {
        let a = well_conditioned_matrix(2, self.seed(10));
        let s = a.as_slice();
        let want = 1.0 / (s[0] * s[3] - s[1] * s[2]).abs();
        let pair = IsotropicGaussianPair::new(1.0, 2.0)?;
        let r = inv_det_importance(&a, &pair, &EstimatorConfig::new(200_000, self.seed(11)).with_streams(4))?;
        let z = (r.mean - want) / r.std_error;
        Ok((
            z.abs() <= STAT_SIGMAS,
            format!("{:.6e} vs cofactor {want:.6e}, z = {z:.2}", r.mean),
        ))
    }

    fn inverse_solve_vs_oracle(&self) -> Result<(bool, String)> {
        let a = generate(&EnsembleSpec::gaussian_iid(10, self.seed(12)))?;
        let oracle = lu_factorize(&a)?.log_abs_det();
        let r = det_via_inverse_solves_with(
            &a,
            &EstimatorConfig::new(100_000, self.seed(13)).with_streams(4),
            self.sampler,
        )?;
        let z = (r.log_mean - oracle) / r.log_std_error();
        Ok((
            z.abs() <= STAT_SIGMAS,
            format!("log {:.6} vs oracle {oracle:.6}, z = {z:.2}", r.log_mean),
        ))
    }
}
