//! Monte Carlo estimators of `|det A|⁻¹` and `|det A|` built only on
//! matrix-vector products.
//!
//! | estimator                   | sample            | weight                 | estimates   |
//! |-----------------------------|-------------------|------------------------|-------------|
//! | [`inv_det_sphere`]          | `s ~ S^{n-1}`     | `‖A s‖⁻ⁿ`              | `|det A|⁻¹` |
//! | [`det_via_inverse_solves`]  | `s ~ S^{n-1}`     | `‖A⁻¹ s‖⁻ⁿ`            | `|det A|`   |
//! | [`inv_det_gaussian_ratio`]  | `x ~ N(0, I)`     | `exp((‖x‖²-‖Ax‖²)/2)`  | `|det A|⁻¹` |
//! | [`inv_det_importance`]      | `x ~ q`           | `p(A x) / q(x)`        | `|det A|⁻¹` |
//!
//! Every estimator is unbiased. The reported standard error comes from the
//! empirical second moment of the weights. For ill-conditioned `A` the weights
//! are heavy tailed (the Gaussian-ratio weights can even have infinite
//! variance), so the standard error is advisory only; [`EstimateResult::heavy_tail`]
//! flags the case where some `‖A s‖` fell below `1e-150`.
//!
//! Samples are split evenly over `num_streams` substreams, one
//! [`RngStream`] per substream keyed by `(seed, stream_id)`. Substreams run in
//! parallel and their accumulators are merged in `stream_id` order, so the
//! result is a pure function of the operator and the config.

use rayon::prelude::*;

use crate::linalg::{log_norm, lu_factorize, norm_sq, DenseMatrix, LuFactorization};
use crate::sampling::{
    fill_gaussian, log_density_isotropic_gaussian, DirectionSampler, RngStream, UniformSphere,
};
use crate::stats::StreamingAccumulator;
use crate::{Error, Result};

/// `‖A s‖` below this marks the result as heavy tailed.
pub const HEAVY_TAIL_NORM: f64 = 1e-150;

/// Whether an operator applies `A` or `A⁻¹`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Forward,
    Inverse,
}

/// Matrix-free access to a square linear map `v ↦ M v`.
///
/// `apply` must be deterministic. It is called concurrently from several
/// substreams when `num_streams > 1`; the `Sync` bound enforces that here,
/// and foreign callers that cannot guarantee it must run with one stream.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;

    /// `out = M x`. Both slices have length [`dim`](Self::dim).
    fn apply(&self, x: &[f64], out: &mut [f64]);

    fn kind(&self) -> OperatorKind {
        OperatorKind::Forward
    }
}

impl LinearOperator for DenseMatrix {
    fn dim(&self) -> usize {
        DenseMatrix::dim(self)
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.matvec_into(x, out)
    }
}

/// A factorization applies `A⁻¹` through triangular solves.
impl LinearOperator for LuFactorization {
    fn dim(&self) -> usize {
        LuFactorization::dim(self)
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.solve_into(x, out)
    }

    fn kind(&self) -> OperatorKind {
        OperatorKind::Inverse
    }
}

/// Wraps a closure as a [`LinearOperator`].
pub struct FnOperator<F> {
    dim: usize,
    kind: OperatorKind,
    f: F,
}

impl<F> FnOperator<F>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    pub fn new(dim: usize, kind: OperatorKind, f: F) -> Self {
        Self { dim, kind, f }
    }
}

impl<F> LinearOperator for FnOperator<F>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }

    fn kind(&self) -> OperatorKind {
        self.kind
    }
}

/// A target density `p` and a proposal `q` for [`inv_det_importance`].
///
/// `q` must have full support: `log_q` has to be finite on everything
/// `sample_q` produces.
pub trait DistributionPair: Sync {
    fn log_p(&self, x: &[f64]) -> f64;
    fn sample_q(&self, rng: &mut RngStream, out: &mut [f64]);
    fn log_q(&self, x: &[f64]) -> f64;
}

/// `p = N(0, σ_p² I)`, `q = N(0, σ_q² I)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsotropicGaussianPair {
    pub p_sigma: f64,
    pub q_sigma: f64,
}

impl IsotropicGaussianPair {
    pub fn new(p_sigma: f64, q_sigma: f64) -> Result<Self> {
        for (name, s) in [("p", p_sigma), ("q", q_sigma)] {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} standard deviation must be positive and finite, got {s}"
                )));
            }
        }
        Ok(Self { p_sigma, q_sigma })
    }

    pub fn standard() -> Self {
        Self {
            p_sigma: 1.0,
            q_sigma: 1.0,
        }
    }
}

impl DistributionPair for IsotropicGaussianPair {
    fn log_p(&self, x: &[f64]) -> f64 {
        log_density_isotropic_gaussian(x, self.p_sigma)
    }

    fn sample_q(&self, rng: &mut RngStream, out: &mut [f64]) {
        fill_gaussian(rng, out);
        if self.q_sigma != 1.0 {
            out.iter_mut().for_each(|x| *x *= self.q_sigma);
        }
    }

    fn log_q(&self, x: &[f64]) -> f64 {
        log_density_isotropic_gaussian(x, self.q_sigma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EstimatorConfig {
    pub num_samples: u64,
    pub seed: u64,
    pub num_streams: usize,
    /// 0 disables the trace; `k` records the running estimate every `k`
    /// samples (plus the final sample).
    pub trace_stride: u64,
}

impl EstimatorConfig {
    pub fn new(num_samples: u64, seed: u64) -> Self {
        Self {
            num_samples,
            seed,
            num_streams: 1,
            trace_stride: 0,
        }
    }

    pub fn with_streams(mut self, num_streams: usize) -> Self {
        self.num_streams = num_streams;
        self
    }

    pub fn with_trace_stride(mut self, stride: u64) -> Self {
        self.trace_stride = stride;
        self
    }

    /// Stride that keeps a trace at no more than 10⁴ points.
    pub fn default_trace_stride(num_samples: u64) -> u64 {
        if num_samples <= 10_000 {
            1
        } else {
            num_samples / 10_000
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_samples == 0 {
            return Err(Error::InvalidConfig("num_samples must be at least 1".into()));
        }
        if self.num_streams == 0 {
            return Err(Error::InvalidConfig("num_streams must be at least 1".into()));
        }
        if self.num_samples % self.num_streams as u64 != 0 {
            return Err(Error::InvalidConfig(format!(
                "num_samples ({}) must be divisible by num_streams ({})",
                self.num_samples, self.num_streams
            )));
        }
        Ok(())
    }
}

/// What an estimate converges to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// `|det A|⁻¹`
    InverseAbsDet,
    /// `|det A|`
    AbsDet,
}

impl Target {
    /// The target's logarithm given `log |det A|`.
    pub fn log_value(self, log_abs_det: f64) -> f64 {
        match self {
            Target::InverseAbsDet => -log_abs_det,
            Target::AbsDet => log_abs_det,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Target::InverseAbsDet => "inverse_abs_det",
            Target::AbsDet => "abs_det",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    /// Number of samples included, counting from 1.
    pub sample_index: u64,
    pub running_log_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    /// Log of the Monte Carlo mean weight. Authoritative; `mean` may overflow.
    pub log_mean: f64,
    pub mean: f64,
    /// Linear-domain standard error of the mean.
    pub std_error: f64,
    pub n_samples: u64,
    pub target: Target,
    pub trace: Option<Vec<TracePoint>>,
    /// Some sample had `‖A s‖ < 1e-150`.
    pub heavy_tail: bool,
    /// Only one sample; `std_error` is reported as 0.
    pub low_count: bool,
}

impl EstimateResult {
    /// Delta-method standard error of `log_mean`, i.e. `std_error / mean`,
    /// computed without forming `mean`.
    pub fn log_std_error(&self) -> f64 {
        if self.std_error == 0.0 {
            0.0
        } else {
            (self.std_error.ln() - self.log_mean).exp()
        }
    }
}

/// `|det A|⁻¹` from `‖A s‖⁻ⁿ` averaged over uniform unit vectors `s`.
///
/// Given an [`OperatorKind::Inverse`] operator the same average estimates
/// `|det A|`, and the result's target says so.
pub fn inv_det_sphere<O: LinearOperator + ?Sized>(
    op: &O,
    config: &EstimatorConfig,
) -> Result<EstimateResult> {
    inv_det_sphere_with(op, config, &UniformSphere)
}

/// [`inv_det_sphere`] with a caller-supplied direction sampler.
pub fn inv_det_sphere_with<O, S>(op: &O, config: &EstimatorConfig, sampler: &S) -> Result<EstimateResult>
where
    O: LinearOperator + ?Sized,
    S: DirectionSampler + ?Sized,
{
    let n = op.dim();
    run(n, config, inverse_target(op), |rng, buf, index| {
        let (s, y) = buf.split_at_mut(n);
        sampler.sample_into(rng, s);
        op.apply(s, y);
        let ln_norm = log_norm(y);
        if ln_norm == f64::NEG_INFINITY {
            return Err(Error::SingularDirection { sample: index });
        }
        Ok(Weight {
            log_weight: -(n as f64) * ln_norm,
            heavy_tail: ln_norm < HEAVY_TAIL_NORM.ln(),
        })
    })
}

/// Unbiased `|det A|` from `‖A⁻¹ s‖⁻ⁿ`, with one LU factorization reused for
/// every sample.
pub fn det_via_inverse_solves(m: &DenseMatrix, config: &EstimatorConfig) -> Result<EstimateResult> {
    det_via_inverse_solves_with(m, config, &UniformSphere)
}

pub fn det_via_inverse_solves_with<S>(
    m: &DenseMatrix,
    config: &EstimatorConfig,
    sampler: &S,
) -> Result<EstimateResult>
where
    S: DirectionSampler + ?Sized,
{
    config.validate()?;
    let lu = lu_factorize(m)?;
    inv_det_sphere_with(&lu, config, sampler)
}

/// `|det A|⁻¹` from `N(Ax)/N(x)` with `x ~ N(0, I)`.
///
/// This is the sphere estimator before the radius is integrated out; it is
/// mainly useful for cross-checking [`inv_det_sphere`]. Its weights have
/// finite variance only when every singular value of `A` exceeds `1/√2`.
pub fn inv_det_gaussian_ratio<O: LinearOperator + ?Sized>(
    op: &O,
    config: &EstimatorConfig,
) -> Result<EstimateResult> {
    let n = op.dim();
    run(n, config, inverse_target(op), |rng, buf, _| {
        let (x, y) = buf.split_at_mut(n);
        fill_gaussian(rng, x);
        op.apply(x, y);
        Ok(Weight {
            log_weight: 0.5 * (norm_sq(x) - norm_sq(y)),
            heavy_tail: false,
        })
    })
}

/// `|det A|⁻¹` from `p(A x) / q(x)` with `x ~ q`.
pub fn inv_det_importance<O, D>(op: &O, dist: &D, config: &EstimatorConfig) -> Result<EstimateResult>
where
    O: LinearOperator + ?Sized,
    D: DistributionPair + ?Sized,
{
    let n = op.dim();
    run(n, config, inverse_target(op), |rng, buf, index| {
        let (x, y) = buf.split_at_mut(n);
        dist.sample_q(rng, x);
        let log_q = dist.log_q(x);
        if !(log_q.is_finite()) {
            return Err(Error::UnsupportedSample { sample: index });
        }
        op.apply(x, y);
        Ok(Weight {
            log_weight: dist.log_p(y) - log_q,
            heavy_tail: false,
        })
    })
}

fn inverse_target<O: LinearOperator + ?Sized>(op: &O) -> Target {
    match op.kind() {
        OperatorKind::Forward => Target::InverseAbsDet,
        OperatorKind::Inverse => Target::AbsDet,
    }
}

struct Weight {
    log_weight: f64,
    heavy_tail: bool,
}

struct StreamOutcome {
    acc: StreamingAccumulator,
    /// Accumulator state at each global trace index inside this stream.
    snapshots: Vec<(u64, StreamingAccumulator)>,
    heavy_tail: bool,
}

/// Drives `weight` over all substreams and merges them in stream order.
///
/// `weight` receives the stream's generator, a `2n` scratch buffer, and the
/// global 1-based sample index. Stream `k` owns global indices
/// `k·m + 1 ..= (k+1)·m` where `m = num_samples / num_streams`.
fn run<W>(n: usize, config: &EstimatorConfig, target: Target, weight: W) -> Result<EstimateResult>
where
    W: Fn(&mut RngStream, &mut [f64], u64) -> Result<Weight> + Sync,
{
    config.validate()?;
    if n == 0 {
        return Err(Error::InvalidConfig("operator dimension must be at least 1".into()));
    }
    let per_stream = config.num_samples / config.num_streams as u64;
    let stride = config.trace_stride;
    let total = config.num_samples;

    let outcomes: Vec<Result<StreamOutcome>> = (0..config.num_streams)
        .into_par_iter()
        .map(|stream| {
            let mut rng = RngStream::new(config.seed, stream as u64);
            let mut buf = vec![0.0; 2 * n];
            let mut out = StreamOutcome {
                acc: StreamingAccumulator::new(),
                snapshots: Vec::new(),
                heavy_tail: false,
            };
            let first = stream as u64 * per_stream;
            for index in first + 1..=first + per_stream {
                let w = weight(&mut rng, &mut buf, index)?;
                out.heavy_tail |= w.heavy_tail;
                out.acc.update(w.log_weight)?;
                if stride > 0 && (index % stride == 0 || index == total) {
                    out.snapshots.push((index, out.acc));
                }
            }
            Ok(out)
        })
        .collect();

    let mut acc = StreamingAccumulator::new();
    let mut trace = (stride > 0).then(Vec::new);
    let mut heavy_tail = false;
    for outcome in outcomes {
        let outcome = outcome?;
        if let Some(trace) = trace.as_mut() {
            for (index, snap) in &outcome.snapshots {
                trace.push(TracePoint {
                    sample_index: *index,
                    running_log_mean: acc.merged(snap).log_mean()?,
                });
            }
        }
        acc.merge(&outcome.acc);
        heavy_tail |= outcome.heavy_tail;
    }

    let summary = acc.summarize()?;
    Ok(EstimateResult {
        log_mean: summary.log_mean,
        mean: summary.log_mean.exp(),
        std_error: summary.std_error,
        n_samples: summary.count,
        target,
        trace,
        heavy_tail,
        low_count: summary.low_count,
    })
}
