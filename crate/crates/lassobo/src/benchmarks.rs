//! Padded synthetic objectives: a low-dimensional base function embedded in a
//! high-dimensional cube by adding inert dummy coordinates.
//!
//! All objectives are maximized; the classic minimization benchmarks are
//! negated. Inputs live on `[0,1]^D` and effective coordinates are affinely
//! mapped onto each base function's standard domain (Ackley
//! `[-32.768, 32.768]`, Levy `[-10, 10]`, Hartmann-6 and SumSquares `[0,1]`).

use rand_distr::{Distribution, StandardNormal};

use crate::engine::Objective;
use crate::{Error, Result, RunRng};

/// Base functions with known optima. `d_e` is the effective dimension.
#[derive(Debug, Clone, PartialEq)]
pub enum BaseFunction {
    Hartmann6,
    Ackley { d_e: usize },
    Levy { d_e: usize },
    /// `-sum alpha_i x_i^2` on `[0,1]^{d_e}` with positive weights.
    SumSquares { alpha: Vec<f64> },
}

impl BaseFunction {
    pub fn effective_dim(&self) -> usize {
        match self {
            BaseFunction::Hartmann6 => 6,
            BaseFunction::Ackley { d_e } | BaseFunction::Levy { d_e } => *d_e,
            BaseFunction::SumSquares { alpha } => alpha.len(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BaseFunction::Hartmann6 => "hartmann6",
            BaseFunction::Ackley { .. } => "ackley",
            BaseFunction::Levy { .. } => "levy",
            BaseFunction::SumSquares { .. } => "sumsq",
        }
    }
}

/// Where the effective coordinates sit inside the padded cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EffectivePlacement {
    /// Effective coordinates first: indices `0..d_e`.
    Prefix,
    /// A seeded random subset of size `d_e` (sorted).
    Scattered { seed: u64 },
}

/// A base function padded to `D` dimensions; evaluation depends only on the
/// effective coordinates.
#[derive(Debug, Clone)]
pub struct PaddedObjective {
    base: BaseFunction,
    dim: usize,
    effective: Vec<usize>,
    f_max: f64,
    noise_sd: f64,
}

impl PaddedObjective {
    pub fn new(base: BaseFunction, dim: usize, placement: EffectivePlacement) -> Result<Self> {
        let d_e = base.effective_dim();
        if d_e == 0 || d_e > dim {
            return Err(Error::Config(format!(
                "effective dimension {d_e} must lie in [1, {dim}]"
            )));
        }
        if let BaseFunction::SumSquares { alpha } = &base {
            if alpha.iter().any(|a| !(*a > 0.0)) {
                return Err(Error::Config("sum-squares weights must be positive".into()));
            }
        }
        let effective = match placement {
            EffectivePlacement::Prefix => (0..d_e).collect(),
            EffectivePlacement::Scattered { seed } => {
                use rand::SeedableRng;
                let mut rng = RunRng::seed_from_u64(seed);
                let mut idx = rand::seq::index::sample(&mut rng, dim, d_e).into_vec();
                idx.sort_unstable();
                idx
            }
        };
        let f_max = match &base {
            // value of the standard Hartmann-6 form at the literature
            // optimizer, frozen from a high-precision evaluation
            BaseFunction::Hartmann6 => 3.3223680113913386,
            _ => 0.0,
        };
        Ok(PaddedObjective { base, dim, effective, f_max, noise_sd: 0.0 })
    }

    pub fn with_noise(mut self, noise_sd: f64) -> Result<Self> {
        if noise_sd < 0.0 || !noise_sd.is_finite() {
            return Err(Error::Config("noise_sd must be finite and >= 0".into()));
        }
        self.noise_sd = noise_sd;
        Ok(self)
    }

    pub fn base(&self) -> &BaseFunction {
        &self.base
    }

    pub fn effective_indices(&self) -> &[usize] {
        &self.effective
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    /// Known maximum and the effective-coordinate optimizer mapped into
    /// `[0,1]^{d_e}`. Padded coordinates of the optimizer are unconstrained.
    pub fn optimum(&self) -> (f64, Vec<f64>) {
        let d_e = self.base.effective_dim();
        let x_star = match &self.base {
            BaseFunction::Hartmann6 => {
                vec![0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573]
            }
            BaseFunction::Ackley { .. } => vec![0.5; d_e],
            // Levy's minimizer is all-ones; preimage of 1 under [-10,10]
            BaseFunction::Levy { .. } => vec![0.55; d_e],
            BaseFunction::SumSquares { .. } => vec![0.0; d_e],
        };
        (self.f_max, x_star)
    }

    /// A full-dimensional optimizer: effective coordinates at the optimum,
    /// padded coordinates at 0.5.
    pub fn assembled_optimum(&self) -> Vec<f64> {
        let (_, x_star) = self.optimum();
        let mut x = vec![0.5; self.dim];
        for (&idx, &v) in self.effective.iter().zip(&x_star) {
            x[idx] = v;
        }
        x
    }

    /// Noiseless evaluation.
    pub fn evaluate_noiseless(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Contract("input must lie in [0,1]^D".into()));
        }
        let u: Vec<f64> = self.effective.iter().map(|&i| x[i]).collect();
        Ok(match &self.base {
            BaseFunction::Hartmann6 => -hartmann6(&u),
            BaseFunction::Ackley { .. } => {
                let z: Vec<f64> = u.iter().map(|&v| -32.768 + v * 65.536).collect();
                -ackley(&z)
            }
            BaseFunction::Levy { .. } => {
                let z: Vec<f64> = u.iter().map(|&v| -10.0 + v * 20.0).collect();
                -levy(&z)
            }
            BaseFunction::SumSquares { alpha } => {
                -u.iter().zip(alpha).map(|(v, a)| a * v * v).sum::<f64>()
            }
        })
    }
}

impl Objective for PaddedObjective {
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, x: &[f64], rng: &mut RunRng) -> Result<f64> {
        let v = self.evaluate_noiseless(x)?;
        if self.noise_sd > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            Ok(v + self.noise_sd * z)
        } else {
            Ok(v)
        }
    }

    fn optimum_value(&self) -> Option<f64> {
        Some(self.f_max)
    }
}

// ---------------------------------------------------------------------------
// Base formulas (minimization form, standard literature constants)
// ---------------------------------------------------------------------------

/// Ackley with a = 20, b = 0.2, c = 2 pi; minimum 0 at the origin.
fn ackley(x: &[f64]) -> f64 {
    let d = x.len() as f64;
    let a = 20.0;
    let b = 0.2;
    let c = 2.0 * std::f64::consts::PI;
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / d).sqrt();
    let mean_cos = x.iter().map(|v| (c * v).cos()).sum::<f64>() / d;
    -a * (-b * rms).exp() - mean_cos.exp() + a + std::f64::consts::E
}

/// Levy; minimum 0 at the all-ones point.
fn levy(x: &[f64]) -> f64 {
    let pi = std::f64::consts::PI;
    let w: Vec<f64> = x.iter().map(|v| 1.0 + (v - 1.0) / 4.0).collect();
    let n = w.len();
    let mut f = (pi * w[0]).sin().powi(2);
    for i in 0..n - 1 {
        f += (w[i] - 1.0).powi(2) * (1.0 + 10.0 * (pi * w[i] + 1.0).sin().powi(2));
    }
    f += (w[n - 1] - 1.0).powi(2) * (1.0 + (2.0 * pi * w[n - 1]).sin().powi(2));
    f
}

/// Hartmann-6; minimum -3.32237 near (0.2017, 0.15, 0.4769, 0.2753, 0.3117, 0.6573).
fn hartmann6(x: &[f64]) -> f64 {
    const ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
    const A: [[f64; 6]; 4] = [
        [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
        [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
        [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
        [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
    ];
    const P: [[f64; 6]; 4] = [
        [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
        [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
        [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
        [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
    ];
    let mut s = 0.0;
    for i in 0..4 {
        let inner: f64 = (0..6).map(|j| A[i][j] * (x[j] - P[i][j]).powi(2)).sum();
        s += ALPHA[i] * (-inner).exp();
    }
    -s
}

// ---------------------------------------------------------------------------
// Instrumentation and the registry
// ---------------------------------------------------------------------------

/// Pearson correlation between `sqrt(rho)` restricted to the effective
/// indices and the sum-squares weights `alpha`.
pub fn rho_alpha_correlation(
    fitted_rho: &[f64],
    alpha: &[f64],
    effective_indices: &[usize],
) -> Result<f64> {
    if alpha.len() != effective_indices.len() {
        return Err(Error::DimensionMismatch { expected: alpha.len(), got: effective_indices.len() });
    }
    if effective_indices.iter().any(|&i| i >= fitted_rho.len()) {
        return Err(Error::Contract("effective index out of range".into()));
    }
    let a: Vec<f64> = effective_indices.iter().map(|&i| fitted_rho[i].sqrt()).collect();
    pearson(&a, alpha)
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    if va <= 0.0 || vb <= 0.0 {
        return Err(Error::Degenerate("zero-variance input to correlation".into()));
    }
    Ok(cov / (va.sqrt() * vb.sqrt()))
}

/// Log-spaced sum-squares weights in `[0.1, 10]`, the diagnostic used when no
/// explicit weights are given.
pub fn log_spaced_alpha(d_e: usize) -> Vec<f64> {
    if d_e == 1 {
        return vec![1.0];
    }
    (0..d_e)
        .map(|i| 10f64.powf(-1.0 + 2.0 * i as f64 / (d_e as f64 - 1.0)))
        .collect()
}

/// Resolve a benchmark id like `levy-d300-e15`, `hartmann6-d300`,
/// `ackley-d60-e10`, or `sumsq-d50-e8`. An optional trailing
/// `-scatter<seed>` places the effective coordinates at a seeded random
/// subset instead of the prefix.
pub fn benchmark_by_id(id: &str) -> Result<PaddedObjective> {
    let bad = |msg: &str| Error::Config(format!("benchmark id '{id}': {msg}"));
    let parts: Vec<&str> = id.split('-').collect();
    if parts.len() < 2 {
        return Err(bad("expected <name>-d<D>[-e<de>][-scatter<seed>]"));
    }
    let name = parts[0];
    let mut dim: Option<usize> = None;
    let mut d_e: Option<usize> = None;
    let mut placement = EffectivePlacement::Prefix;
    for part in &parts[1..] {
        if let Some(rest) = part.strip_prefix("scatter") {
            let seed = rest.parse::<u64>().map_err(|_| bad("bad scatter seed"))?;
            placement = EffectivePlacement::Scattered { seed };
        } else if let Some(rest) = part.strip_prefix('d') {
            dim = Some(rest.parse().map_err(|_| bad("bad dimension"))?);
        } else if let Some(rest) = part.strip_prefix('e') {
            d_e = Some(rest.parse().map_err(|_| bad("bad effective dimension"))?);
        } else {
            return Err(bad("unrecognized segment"));
        }
    }
    let dim = dim.ok_or_else(|| bad("missing dimension segment d<D>"))?;
    let base = match name {
        "hartmann6" => {
            if d_e.is_some_and(|e| e != 6) {
                return Err(bad("hartmann6 has fixed effective dimension 6"));
            }
            BaseFunction::Hartmann6
        }
        "ackley" => BaseFunction::Ackley { d_e: d_e.ok_or_else(|| bad("missing e<de>"))? },
        "levy" => BaseFunction::Levy { d_e: d_e.ok_or_else(|| bad("missing e<de>"))? },
        "sumsq" => BaseFunction::SumSquares {
            alpha: log_spaced_alpha(d_e.ok_or_else(|| bad("missing e<de>"))?),
        },
        _ => return Err(bad("unknown base function")),
    };
    PaddedObjective::new(base, dim, placement)
}

/// Ids shown by the CLI's benchmark listing.
pub fn example_benchmark_ids() -> Vec<&'static str> {
    vec![
        "hartmann6-d300",
        "ackley-d300-e15",
        "levy-d300-e15",
        "levy-d60-e10",
        "levy-d60-e15",
        "sumsq-d50-e8",
    ]
}
