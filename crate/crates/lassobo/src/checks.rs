//! Seeded property suites with independent oracles.
//!
//! Each suite re-derives expected values through a route that shares nothing
//! with the implementation path it checks: posterior predictions against a
//! dense Gaussian-elimination solve, likelihood gradients against central
//! finite differences, and the kernel-derivative distribution law against
//! Monte Carlo over prior sample paths. The CLI `check` subcommand prints one
//! line per property; the same functions back the acceptance tests.

use rand::{Rng, SeedableRng};

use crate::gp::{fit_posterior, kernel_eval, Dataset, KernelFamily, KernelHyperparams};
use crate::lasso::{grad_neg_log_marginal_lasso, neg_log_marginal_lasso};
use crate::selection::ImportanceState;
use crate::{Error, Result, RunRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Gradients,
    PosteriorOracle,
    Theorem1,
    Selection,
}

impl Suite {
    pub fn parse(s: &str) -> Result<Suite> {
        match s {
            "gradients" => Ok(Suite::Gradients),
            "posterior-oracle" => Ok(Suite::PosteriorOracle),
            "theorem1" => Ok(Suite::Theorem1),
            "selection" => Ok(Suite::Selection),
            _ => Err(Error::Config(format!(
                "unknown suite '{s}' (expected gradients|posterior-oracle|theorem1|selection)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Gradients => "gradients",
            Suite::PosteriorOracle => "posterior-oracle",
            Suite::Theorem1 => "theorem1",
            Suite::Selection => "selection",
        }
    }
}

/// Outcome of one checked property.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

pub fn run_suite(suite: Suite, seed: u64) -> Vec<CheckReport> {
    match suite {
        Suite::Gradients => check_gradients(seed),
        Suite::PosteriorOracle => check_posterior_oracle(seed),
        Suite::Theorem1 => check_theorem1(seed),
        Suite::Selection => check_selection(seed),
    }
}

fn family_for(i: usize) -> KernelFamily {
    if i % 2 == 0 {
        KernelFamily::SquaredExponential
    } else {
        KernelFamily::Matern52
    }
}

// ---------------------------------------------------------------------------
// Gradient oracle: central finite differences
// ---------------------------------------------------------------------------

/// 20 random instances (N <= 12, D <= 8, both kernels): every analytic
/// gradient component of the penalized objective must match central finite
/// differences with step `1e-5 * max(1, |theta|)` to relative tolerance 1e-4
/// (absolute 1e-6 near zero).
pub fn check_gradients(seed: u64) -> Vec<CheckReport> {
    let mut rng = RunRng::seed_from_u64(seed);
    let mut reports = Vec::new();
    for instance in 0..20 {
        let family = family_for(instance);
        let n = 3 + rng.gen_range(0..10); // <= 12
        let d = 1 + rng.gen_range(0..8); // <= 8
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen()).collect()).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
        let data = Dataset::from_rows(&rows, &ys).expect("valid random dataset");
        let rho: Vec<f64> = (0..d).map(|_| 0.1 + 6.0 * rng.gen::<f64>()).collect();
        let params = KernelHyperparams::new(family, rho, 0.3 + 2.0 * rng.gen::<f64>(), 0.05)
            .expect("valid params");
        let lambda = 1e-3;

        let grad = match grad_neg_log_marginal_lasso(&params, &data, lambda) {
            Ok(g) => g,
            Err(e) => {
                reports.push(CheckReport {
                    name: format!("gradient fd agreement [{} n={n} d={d}]", family.name()),
                    passed: false,
                    detail: format!("gradient failed: {e}"),
                });
                continue;
            }
        };

        let mut worst: f64 = 0.0;
        let mut ok = true;
        let mut fd_check = |analytic: f64, plus: &KernelHyperparams, minus: &KernelHyperparams, h: f64| {
            let up = neg_log_marginal_lasso(plus, &data, lambda).expect("value at theta+h");
            let dn = neg_log_marginal_lasso(minus, &data, lambda).expect("value at theta-h");
            let fd = (up - dn) / (2.0 * h);
            let err = (analytic - fd).abs();
            let rel = err / analytic.abs().max(1e-12);
            if err > 1e-6 && rel > 1e-4 {
                ok = false;
            }
            worst = worst.max(rel.min(err));
        };
        for j in 0..d {
            let h = 1e-5 * params.rho[j].abs().max(1.0);
            let mut plus = params.clone();
            plus.rho[j] += h;
            let mut minus = params.clone();
            minus.rho[j] -= h;
            fd_check(grad.d_rho[j], &plus, &minus, h);
        }
        let h = 1e-5 * params.sigma_k_sq.max(1.0);
        let mut plus = params.clone();
        plus.sigma_k_sq += h;
        let mut minus = params.clone();
        minus.sigma_k_sq -= h;
        fd_check(grad.d_sigma_k_sq, &plus, &minus, h);

        let h = 1e-5 * params.noise_sq.max(1.0);
        let mut plus = params.clone();
        plus.noise_sq += h;
        let mut minus = params.clone();
        minus.noise_sq -= h;
        fd_check(grad.d_noise_sq, &plus, &minus, h);

        reports.push(CheckReport {
            name: format!("gradient fd agreement [{} n={n} d={d}]", family.name()),
            passed: ok,
            detail: format!("worst component deviation {worst:.3e}"),
        });
    }
    reports
}

// ---------------------------------------------------------------------------
// Posterior oracle: dense Gaussian elimination
// ---------------------------------------------------------------------------

/// Solve `A x = b` by Gaussian elimination with partial pivoting. Kept
/// deliberately naive and independent of the Cholesky path under test.
fn gauss_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().cloned().collect();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .expect("nonempty column");
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        let diag = m[col][col];
        for row in col + 1..n {
            let factor = m[row][col] / diag;
            for k in col..n {
                m[row][k] -= factor * m[col][k];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for k in row + 1..n {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    x
}

/// Posterior mean/variance from an explicit dense solve, replicating the
/// output standardization of the fitted model.
fn dense_posterior_oracle(
    params: &KernelHyperparams,
    rows: &[Vec<f64>],
    ys: &[f64],
    x: &[f64],
) -> (f64, f64) {
    let n = rows.len();
    let mean_y = ys.iter().sum::<f64>() / n as f64;
    let var_y = ys.iter().map(|v| (v - mean_y).powi(2)).sum::<f64>() / n as f64;
    let scale = if n == 1 || var_y.sqrt() < 1e-12 { 1.0 } else { var_y.sqrt() };
    let y_std: Vec<f64> = ys.iter().map(|v| (v - mean_y) / scale).collect();

    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = kernel_eval(params, &rows[i], &rows[j]).expect("kernel eval");
            if i == j {
                a[i][j] += params.noise_sq;
            }
        }
    }
    let k_vec: Vec<f64> = rows.iter().map(|r| kernel_eval(params, x, r).expect("kernel eval")).collect();
    let alpha = gauss_solve(&a, &y_std);
    let w = gauss_solve(&a, &k_vec);
    let mean_std: f64 = k_vec.iter().zip(&alpha).map(|(k, a)| k * a).sum();
    let var_std = params.sigma_k_sq - k_vec.iter().zip(&w).map(|(k, w)| k * w).sum::<f64>();
    let var_std = var_std.clamp(0.0, params.sigma_k_sq);
    (mean_y + scale * mean_std, scale * scale * var_std)
}

/// 50 random datasets of size <= 6: `predict` must match the dense oracle to
/// relative tolerance 1e-10.
pub fn check_posterior_oracle(seed: u64) -> Vec<CheckReport> {
    let mut rng = RunRng::seed_from_u64(seed);
    let mut reports = Vec::new();
    for instance in 0..50 {
        let family = family_for(instance);
        let n = 1 + rng.gen_range(0..6); // <= 6
        let d = 1 + rng.gen_range(0..4);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen()).collect()).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 6.0 - 3.0).collect();
        let rho: Vec<f64> = (0..d).map(|_| 0.2 + 8.0 * rng.gen::<f64>()).collect();
        let params = KernelHyperparams::new(family, rho, 0.5 + rng.gen::<f64>(), 0.01)
            .expect("valid params");
        let data = Dataset::from_rows(&rows, &ys).expect("valid dataset");
        let model = fit_posterior(&data, &params).expect("posterior fit");

        let mut worst: f64 = 0.0;
        let mut ok = true;
        for _ in 0..5 {
            let x: Vec<f64> = (0..d).map(|_| rng.gen()).collect();
            let (mean, var) = model.predict(&x).expect("prediction");
            let (o_mean, o_var) = dense_posterior_oracle(&params, &rows, &ys, &x);
            for (got, want) in [(mean, o_mean), (var, o_var)] {
                let rel = (got - want).abs() / want.abs().max(1.0);
                worst = worst.max(rel);
                if rel > 1e-10 {
                    ok = false;
                }
            }
        }
        reports.push(CheckReport {
            name: format!("posterior dense-oracle [{} n={n} d={d}]", family.name()),
            passed: ok,
            detail: format!("worst relative deviation {worst:.3e}"),
        });
    }
    reports
}

// ---------------------------------------------------------------------------
// Theorem 1 / derivative-distribution law
// ---------------------------------------------------------------------------

/// Monte Carlo check of the prior derivative distribution: over 2000 sample
/// paths, the finite-difference derivative `(f(x+h) - f(x))/h` at `h = 1e-3`
/// must have variance `sigma_k^2 * rho` (SE) or `(5/3) sigma_k^2 * rho`
/// (Matern 5/2) within 10%, for `rho in {0.5, 2, 10}` and
/// `sigma_k^2 in {0.5, 1, 4}`.
pub fn check_theorem1(seed: u64) -> Vec<CheckReport> {
    const N_PATHS: u64 = 2000;
    const H: f64 = 1e-3;
    let x0 = 0.4;
    let grid = [x0, x0 + H];
    let mut reports = Vec::new();
    let mut combo = 0u64;
    for family in [KernelFamily::SquaredExponential, KernelFamily::Matern52] {
        for rho in [0.5, 2.0, 10.0] {
            for sigma_k_sq in [0.5, 1.0, 4.0] {
                let params = KernelHyperparams::new(family, vec![rho], sigma_k_sq, 0.0)
                    .expect("valid params");
                let mut sum = 0.0;
                let mut sumsq = 0.0;
                for i in 0..N_PATHS {
                    let path =
                        crate::gp::sample_gp_path_1d(&params, &grid, seed + combo * 1_000_000 + i)
                            .expect("path sample");
                    let deriv = (path[1] - path[0]) / H;
                    sum += deriv;
                    sumsq += deriv * deriv;
                }
                let mean = sum / N_PATHS as f64;
                let var = sumsq / N_PATHS as f64 - mean * mean;
                let theory = match family {
                    KernelFamily::SquaredExponential => sigma_k_sq * rho,
                    KernelFamily::Matern52 => 5.0 / 3.0 * sigma_k_sq * rho,
                };
                let ratio = var / theory;
                reports.push(CheckReport {
                    name: format!(
                        "derivative variance [{} rho={rho} sk2={sigma_k_sq}]",
                        family.name()
                    ),
                    passed: (ratio - 1.0).abs() <= 0.10,
                    detail: format!("empirical {var:.4} vs theory {theory:.4} (ratio {ratio:.3})"),
                });
                combo += 1;
            }
        }
    }
    reports
}

// ---------------------------------------------------------------------------
// Selection degeneracy
// ---------------------------------------------------------------------------

/// All-equal rho vectors must fall back to the singleton argmax, and the
/// partition must be nonempty for 10^4 random vectors.
pub fn check_selection(seed: u64) -> Vec<CheckReport> {
    let mut reports = Vec::new();

    let mut degenerate_ok = true;
    for c in [0.0, 1.0, 3.5, 1e4] {
        for d in [1usize, 2, 7, 50] {
            let mut st = ImportanceState::new(1).expect("window 1");
            let (i_t, d_t) = st.push_and_classify(&vec![c; d]).expect("classification");
            if i_t != vec![0] || d_t != 1 {
                degenerate_ok = false;
            }
        }
    }
    reports.push(CheckReport {
        name: "all-equal rho falls back to singleton".into(),
        passed: degenerate_ok,
        detail: "constant vectors across dimensions 1..50".into(),
    });

    let mut rng = RunRng::seed_from_u64(seed);
    let mut nonempty_ok = true;
    let mut bounded_ok = true;
    for _ in 0..10_000 {
        let d = 1 + rng.gen_range(0..30);
        let rho: Vec<f64> = (0..d).map(|_| rng.gen::<f64>() * 10.0).collect();
        let mut st = ImportanceState::new(1).expect("window 1");
        let (i_t, d_t) = st.push_and_classify(&rho).expect("classification");
        if i_t.is_empty() || d_t != i_t.len() {
            nonempty_ok = false;
        }
        if i_t.iter().any(|&i| i >= d) {
            bounded_ok = false;
        }
    }
    reports.push(CheckReport {
        name: "partition nonempty for random rho".into(),
        passed: nonempty_ok,
        detail: "10000 random vectors".into(),
    });
    reports.push(CheckReport {
        name: "partition indices in range".into(),
        passed: bounded_ok,
        detail: "10000 random vectors".into(),
    });
    reports
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_suite_passes() {
        let reports = run_suite(Suite::Gradients, 0);
        assert_eq!(reports.len(), 20);
        for r in &reports {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }

    #[test]
    fn posterior_suite_passes() {
        let reports = run_suite(Suite::PosteriorOracle, 0);
        assert_eq!(reports.len(), 50);
        for r in &reports {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }

    #[test]
    fn selection_suite_passes() {
        for r in run_suite(Suite::Selection, 0) {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }

    #[test]
    fn theorem1_suite_passes() {
        let reports = run_suite(Suite::Theorem1, 0);
        assert_eq!(reports.len(), 18);
        for r in &reports {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }

    #[test]
    fn suite_names_round_trip() {
        for s in [Suite::Gradients, Suite::PosteriorOracle, Suite::Theorem1, Suite::Selection] {
            assert_eq!(Suite::parse(s.name()).unwrap(), s);
        }
        assert!(Suite::parse("bogus").is_err());
    }
}
