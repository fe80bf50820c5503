//! Acceptance criteria. Run with `cargo test -p stodet --test acceptance -- --nocapture`
//! to see one PASS/FAIL line per criterion.

use std::time::{Duration, Instant};

use stodet::cli;
use stodet::ensembles::{generate, EnsembleSpec};
use stodet::estimators::{
    det_via_inverse_solves, inv_det_gaussian_ratio, inv_det_importance, inv_det_sphere,
    EstimatorConfig, IsotropicGaussianPair,
};
use stodet::linalg::lu_factorize;
use stodet::sampling::{chi_sample, unit_sphere, RngStream};
use stodet::validate::{well_conditioned_matrix, CHI10_MEAN};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn within_budget(start: Instant, budget: Duration) -> (bool, String) {
    let elapsed = start.elapsed();
    (elapsed <= budget, format!("{:.2?} (budget {budget:?})", elapsed))
}

fn run_cli(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = cli::run(
        std::iter::once("stodet").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    assert!(code == 0, "stodet {args:?} exited {code}: {}", String::from_utf8_lossy(&err));
    (code, String::from_utf8(out).unwrap())
}

fn summary_field(summary: &str, key: &str) -> f64 {
    summary
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("no {key} in summary"))
        .parse()
        .unwrap()
}

/// 1. Gaussian convergence: 10×10 iid N(0,1) matrix, `convergence` with
/// inverse_solve_det, 10⁵ samples; final running log-estimate within 3
/// delta-method standard errors of the LU oracle for ≥ 17 of 20 seeds; < 10 s.
fn gaussian_convergence_run() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let mut hits = 0;
    let mut worst_z = 0.0f64;
    for seed in 0..20 {
        let path = dir.path().join(format!("trace_{seed}.csv"));
        let seed_arg = seed.to_string();
        let (_, summary) = run_cli(&[
            "convergence",
            "--estimator",
            "inverse_solve_det",
            "--ensemble",
            "gaussian_iid",
            "--n",
            "10",
            "--samples",
            "100000",
            "--seed",
            &seed_arg,
            "--out",
            path.to_str().unwrap(),
        ]);
        let csv = std::fs::read_to_string(&path).unwrap();
        let last = csv.lines().last().unwrap();
        let cols: Vec<&str> = last.split(',').collect();
        assert_eq!(cols[0], "100000");
        let final_log: f64 = cols[1].parse().unwrap();
        let oracle: f64 = cols[3].parse().unwrap();
        let log_se = summary_field(&summary, "log_std_error");
        let z = (final_log - oracle).abs() / log_se;
        worst_z = worst_z.max(z);
        if z <= 3.0 {
            hits += 1;
        }
    }
    let (fast, timing) = within_budget(start, Duration::from_secs(10));
    outcome(
        hits >= 17 && fast,
        format!("{hits}/20 seeds within 3 SE (worst z {worst_z:.2}); {timing}"),
    )
}

/// 2. Haar orthogonal matrices, n ∈ {2, 10, 50}, five each: all three
/// inverse-determinant estimators give mean 1 and std_error ≤ 1e-9 at 100
/// samples; < 1 s.
fn orthogonal_exactness() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let pair = IsotropicGaussianPair::standard();
    for n in [2usize, 10, 50] {
        for seed in 0..5u64 {
            let q = generate(&EnsembleSpec::orthogonal(n, 100 + seed)).unwrap();
            let cfg = EstimatorConfig::new(100, seed);
            for r in [
                inv_det_sphere(&q, &cfg).unwrap(),
                inv_det_gaussian_ratio(&q, &cfg).unwrap(),
                inv_det_importance(&q, &pair, &cfg).unwrap(),
            ] {
                worst = worst.max((r.mean - 1.0).abs()).max(r.std_error);
            }
        }
    }
    let (fast, timing) = within_budget(start, Duration::from_secs(1));
    outcome(
        worst <= 1e-9 && fast,
        format!("max(|mean - 1|, std_error) = {worst:.2e}; {timing}"),
    )
}

/// 3. A = 2I, n = 5: sphere → 2⁻⁵, inverse-solve → 32, std_error 0, tol 1e-12.
fn scaled_identity_exactness() -> Outcome {
    let a = generate(&EnsembleSpec::scaled_identity(5, 2.0)).unwrap();
    let cfg = EstimatorConfig::new(1000, 3);
    let inv = inv_det_sphere(&a, &cfg).unwrap();
    let det = det_via_inverse_solves(&a, &cfg).unwrap();
    let errs = [
        (inv.mean - 0.03125).abs(),
        (det.mean - 32.0).abs(),
        inv.std_error,
        det.std_error,
    ];
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    outcome(
        worst <= 1e-12,
        format!("sphere {:.17}, inverse-solve {:.17}, worst error {worst:.2e}", inv.mean, det.mean),
    )
}

/// 4. Seeded 8×8 matrix, c ∈ {0.5, 3}: sphere log-means for A and cA differ by
/// −n·log c within 1e-12 under the same seed; < 1 s.
fn scale_equivariance() -> Outcome {
    let start = Instant::now();
    let a = generate(&EnsembleSpec::gaussian_iid(8, 44)).unwrap();
    let cfg = EstimatorConfig::new(10_000, 45);
    let base = inv_det_sphere(&a, &cfg).unwrap().log_mean;
    let mut worst = 0.0f64;
    for c in [0.5f64, 3.0] {
        let scaled = inv_det_sphere(&a.scaled(c).unwrap(), &cfg).unwrap().log_mean;
        worst = worst.max((scaled - base + 8.0 * c.ln()).abs());
    }
    let (fast, timing) = within_budget(start, Duration::from_secs(1));
    outcome(worst <= 1e-12 && fast, format!("max deviation {worst:.2e}; {timing}"))
}

/// 5. Sphere vs Gaussian-ratio on a well-conditioned 4×4 matrix, 10⁶ samples
/// each: log-estimates within 3 combined standard errors; < 5 s.
fn cross_estimator_agreement() -> Outcome {
    let start = Instant::now();
    let a = well_conditioned_matrix(4, 55);
    let cfg = EstimatorConfig::new(1_000_000, 56).with_streams(8);
    let sphere = inv_det_sphere(&a, &cfg).unwrap();
    let ratio = inv_det_gaussian_ratio(&a, &cfg).unwrap();
    let se = sphere.log_std_error().hypot(ratio.log_std_error());
    let z = (sphere.log_mean - ratio.log_mean).abs() / se;
    let oracle = -lu_factorize(&a).unwrap().log_abs_det();
    let (fast, timing) = within_budget(start, Duration::from_secs(5));
    outcome(
        z <= 3.0 && fast,
        format!(
            "sphere {:.6}, gaussian-ratio {:.6} (oracle {oracle:.6}), z = {z:.2}; {timing}",
            sphere.log_mean, ratio.log_mean
        ),
    )
}

/// 6. Seeded 2×2 matrix, p = N(0, I), q = N(0, 4I), 10⁶ samples: within 3
/// standard errors of the cofactor 1/|det A|; < 5 s.
fn importance_generality() -> Outcome {
    let start = Instant::now();
    let a = well_conditioned_matrix(2, 66);
    let s = a.as_slice();
    let want = 1.0 / (s[0] * s[3] - s[1] * s[2]).abs();
    let pair = IsotropicGaussianPair::new(1.0, 2.0).unwrap();
    let r = inv_det_importance(&a, &pair, &EstimatorConfig::new(1_000_000, 67).with_streams(8))
        .unwrap();
    let z = (r.mean - want).abs() / r.std_error;
    let (fast, timing) = within_budget(start, Duration::from_secs(5));
    outcome(
        z <= 3.0 && fast,
        format!("{:.8} vs cofactor {want:.8}, z = {z:.2}; {timing}", r.mean),
    )
}

/// 7. Sphere norms within 1e-12 of 1; E[ssᵀ] within 0.01 of I/4 at n = 4 with
/// 10⁵ samples; chi(10) mean within 3 standard errors of √2·Γ(5.5)/Γ(5).
fn sampler_correctness() -> Outcome {
    let mut rng = RngStream::new(77, 0);
    let n = 4;
    let draws = 100_000;
    let mut worst_norm = 0.0f64;
    let mut second = vec![0.0; n * n];
    for _ in 0..draws {
        let s = unit_sphere(&mut rng, n).into_vec();
        let norm = s.iter().map(|x| x * x).sum::<f64>().sqrt();
        worst_norm = worst_norm.max((norm - 1.0).abs());
        for i in 0..n {
            for j in 0..n {
                second[i * n + j] += s[i] * s[j];
            }
        }
    }
    let mut worst_moment = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let want = if i == j { 0.25 } else { 0.0 };
            worst_moment = worst_moment.max((second[i * n + j] / draws as f64 - want).abs());
        }
    }

    let mut rng = RngStream::new(78, 0);
    let chi_draws = 1_000_000;
    let rs: Vec<f64> = (0..chi_draws).map(|_| chi_sample(&mut rng, 10)).collect();
    let mean = rs.iter().sum::<f64>() / chi_draws as f64;
    let var = rs.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (chi_draws - 1) as f64;
    let z = (mean - CHI10_MEAN).abs() / (var / chi_draws as f64).sqrt();

    outcome(
        worst_norm <= 1e-12 && worst_moment <= 0.01 && z <= 3.0,
        format!("norm dev {worst_norm:.1e}, E[ssᵀ] dev {worst_moment:.1e}, chi(10) z = {z:.2}"),
    )
}

/// 8. Identical convergence runs give byte-identical CSV; 1 vs 4 streams agree
/// within 3 combined standard errors.
fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let args = |path: &str| {
        vec![
            "convergence".to_string(),
            "--estimator".into(),
            "sphere_invdet".into(),
            "--ensemble".into(),
            "gaussian_iid".into(),
            "--n".into(),
            "6".into(),
            "--samples".into(),
            "40000".into(),
            "--streams".into(),
            "4".into(),
            "--seed".into(),
            "8".into(),
            "--out".into(),
            path.to_string(),
        ]
    };
    let p1 = dir.path().join("a.csv");
    let p2 = dir.path().join("b.csv");
    for p in [&p1, &p2] {
        let a = args(p.to_str().unwrap());
        run_cli(&a.iter().map(String::as_str).collect::<Vec<_>>());
    }
    let identical = std::fs::read(&p1).unwrap() == std::fs::read(&p2).unwrap();

    let a = well_conditioned_matrix(5, 88);
    let one = inv_det_sphere(&a, &EstimatorConfig::new(400_000, 89)).unwrap();
    let four = inv_det_sphere(&a, &EstimatorConfig::new(400_000, 89).with_streams(4)).unwrap();
    let z = (one.mean - four.mean).abs() / one.std_error.hypot(four.std_error);
    outcome(
        identical && z <= 3.0,
        format!("CSV byte-identical: {identical}; streams 1 vs 4 z = {z:.2}"),
    )
}

/// 9. LU matches the 2×2 cofactor formula on 100 seeded matrices and Σ log|dᵢ|
/// for diagonal ensembles, both within 1e-12.
fn oracle_integrity() -> Outcome {
    let mut worst_cofactor = 0.0f64;
    for seed in 0..100 {
        let a = generate(&EnsembleSpec::gaussian_iid(2, 900 + seed)).unwrap();
        let s = a.as_slice();
        let want = (s[0] * s[3] - s[1] * s[2]).abs().ln();
        worst_cofactor = worst_cofactor.max((lu_factorize(&a).unwrap().log_abs_det() - want).abs());
    }
    let mut worst_diag = 0.0f64;
    let mut rng = RngStream::new(99, 0);
    for n in [1usize, 3, 10, 40] {
        let d: Vec<f64> = (0..n).map(|_| rng.standard_normal() * 3.0 + 0.1).collect();
        let m = generate(&EnsembleSpec::diagonal(d.clone())).unwrap();
        let want: f64 = d.iter().map(|x| x.abs().ln()).sum();
        worst_diag = worst_diag.max((lu_factorize(&m).unwrap().log_abs_det() - want).abs());
    }
    outcome(
        worst_cofactor <= 1e-12 && worst_diag <= 1e-12,
        format!("cofactor {worst_cofactor:.1e}, diagonal {worst_diag:.1e}"),
    )
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 gaussian 10x10 convergence", gaussian_convergence_run),
        ("2 orthogonal exactness", orthogonal_exactness),
        ("3 scaled-identity exactness", scaled_identity_exactness),
        ("4 scale equivariance", scale_equivariance),
        ("5 cross-estimator agreement", cross_estimator_agreement),
        ("6 importance generality", importance_generality),
        ("7 sampler correctness", sampler_correctness),
        ("8 determinism", determinism),
        ("9 oracle integrity", oracle_integrity),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        let o = check();
        println!("{} criterion {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        if !o.passed {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
