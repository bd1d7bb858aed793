//! Kernels and exact Gaussian-process posterior inference.
//!
//! Two stationary ARD kernels are provided, parametrized by inverse squared
//! lengthscales `rho` (one per input dimension, on the unit cube):
//!
//! - squared exponential: `k(x, x') = sigma_k^2 * exp(-1/2 * sum_i rho_i (x_i - x'_i)^2)`
//! - Matern 5/2: with `r = sqrt(sum_i rho_i (x_i - x'_i)^2)`,
//!   `k(x, x') = sigma_k^2 * (1 + sqrt(5) r + 5 r^2 / 3) * exp(-sqrt(5) r)`
//!
//! Posterior inference uses a Cholesky factorization of `K + noise * I` with
//! escalating diagonal jitter (1e-8 up to 1e-4) when the matrix is numerically
//! indefinite. Outputs are standardized to zero mean / unit variance before
//! fitting and predictions are mapped back, so the zero-mean GP assumption
//! holds without an explicit mean function.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result, RunRng};

pub const SQRT_5: f64 = 2.23606797749979;

/// Jitter levels tried in order when the Gram matrix is not positive definite.
const JITTER_LEVELS: [f64; 6] = [0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

/// Kernel family. Matern is implemented at `nu = 5/2` only (`p = 2`), the
/// lowest half-integer order with fully smooth closed-form derivatives that
/// still satisfies `nu > 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum KernelFamily {
    SquaredExponential,
    Matern52,
}

impl KernelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            KernelFamily::SquaredExponential => "se",
            KernelFamily::Matern52 => "matern52",
        }
    }
}

/// Kernel hyperparameters: family, inverse squared lengthscales `rho`
/// (nonnegative, dimensionless on the unit cube), signal variance
/// `sigma_k_sq > 0`, and observation-noise variance `noise_sq >= 0`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KernelHyperparams {
    pub family: KernelFamily,
    pub rho: Vec<f64>,
    pub sigma_k_sq: f64,
    pub noise_sq: f64,
}

impl KernelHyperparams {
    pub fn new(family: KernelFamily, rho: Vec<f64>, sigma_k_sq: f64, noise_sq: f64) -> Result<Self> {
        let p = Self { family, rho, sigma_k_sq, noise_sq };
        p.validate()?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.rho.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.rho.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::Contract("rho must be finite and nonnegative".into()));
        }
        if !(self.sigma_k_sq > 0.0 && self.sigma_k_sq <= 1e2) {
            return Err(Error::Contract(format!(
                "sigma_k_sq must lie in (0, 1e2], got {}",
                self.sigma_k_sq
            )));
        }
        if !(self.noise_sq >= 0.0 && self.noise_sq.is_finite()) {
            return Err(Error::Contract("noise_sq must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

/// Observed data: inputs in `[0,1]^D` with raw scalar outputs and the index of
/// the running best (maximum output, lowest index on ties).
#[derive(Debug, Clone)]
pub struct Dataset {
    dim: usize,
    inputs: Vec<f64>, // row-major, len = n * dim
    outputs: Vec<f64>,
    best_index: usize,
}

impl Dataset {
    pub fn new(dim: usize) -> Self {
        Dataset { dim, inputs: Vec::new(), outputs: Vec::new(), best_index: 0 }
    }

    pub fn from_rows(rows: &[Vec<f64>], outputs: &[f64]) -> Result<Self> {
        if rows.len() != outputs.len() {
            return Err(Error::Contract("inputs and outputs must have equal length".into()));
        }
        let dim = rows.first().map_or(0, |r| r.len());
        let mut d = Dataset::new(dim);
        for (x, &y) in rows.iter().zip(outputs) {
            d.push(x, y)?;
        }
        Ok(d)
    }

    pub fn push(&mut self, x: &[f64], y: f64) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Contract("input coordinates must lie in [0,1]".into()));
        }
        if !y.is_finite() {
            return Err(Error::Contract("output must be finite".into()));
        }
        self.inputs.extend_from_slice(x);
        self.outputs.push(y);
        // strict > keeps the lowest index on ties
        if y > self.outputs[self.best_index] {
            self.best_index = self.outputs.len() - 1;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn output(&self, i: usize) -> f64 {
        self.outputs[i]
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn best_index(&self) -> usize {
        self.best_index
    }

    pub fn best_input(&self) -> &[f64] {
        self.input(self.best_index)
    }

    pub fn best_output(&self) -> f64 {
        self.outputs[self.best_index]
    }

    /// Copy with outputs shifted/scaled to zero mean, unit variance.
    /// Returns (standardized dataset, shift, scale); scale falls back to 1
    /// for a single observation or constant outputs.
    pub fn standardized(&self) -> (Dataset, f64, f64) {
        let (shift, scale) = standardization_constants(&self.outputs);
        let mut out = self.clone();
        for y in &mut out.outputs {
            *y = (*y - shift) / scale;
        }
        (out, shift, scale)
    }
}

pub(crate) fn standardization_constants(y: &[f64]) -> (f64, f64) {
    let n = y.len();
    if n == 0 {
        return (0.0, 1.0);
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let sd = var.sqrt();
    if n == 1 || sd < 1e-12 {
        (mean, 1.0)
    } else {
        (mean, sd)
    }
}

// ---------------------------------------------------------------------------
// Kernel evaluation
// ---------------------------------------------------------------------------

/// rho-weighted squared distance `sum_i rho_i (x_i - x'_i)^2`.
#[inline]
pub(crate) fn weighted_sqdist(rho: &[f64], x: &[f64], x_prime: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..rho.len() {
        let d = x[i] - x_prime[i];
        s += rho[i] * d * d;
    }
    s
}

/// Kernel value as a function of the weighted squared distance `s`.
#[inline]
pub(crate) fn kernel_from_sqdist(family: KernelFamily, sigma_k_sq: f64, s: f64) -> f64 {
    match family {
        KernelFamily::SquaredExponential => sigma_k_sq * (-0.5 * s).exp(),
        KernelFamily::Matern52 => {
            let r = s.sqrt();
            let u = SQRT_5 * r;
            sigma_k_sq * (1.0 + u + 5.0 * s / 3.0) * (-u).exp()
        }
    }
}

/// Derivative of the kernel with respect to the weighted squared distance `s`.
/// Smooth for all `s >= 0` in both families, which is what makes the analytic
/// gradients exact even at coincident points:
/// `dk/dx_l = 2 rho_l (x_l - x'_l) * dk/ds` and `dk/drho_j = (x_j - x'_j)^2 * dk/ds`.
#[inline]
pub(crate) fn kernel_d_dsqdist(family: KernelFamily, sigma_k_sq: f64, s: f64) -> f64 {
    match family {
        KernelFamily::SquaredExponential => -0.5 * sigma_k_sq * (-0.5 * s).exp(),
        KernelFamily::Matern52 => {
            let r = s.sqrt();
            let u = SQRT_5 * r;
            -(5.0 / 6.0) * sigma_k_sq * (1.0 + u) * (-u).exp()
        }
    }
}

/// Evaluate the kernel at a pair of points. Symmetric; equals `sigma_k_sq`
/// at zero distance.
pub fn kernel_eval(params: &KernelHyperparams, x: &[f64], x_prime: &[f64]) -> Result<f64> {
    if x.len() != params.dim() {
        return Err(Error::DimensionMismatch { expected: params.dim(), got: x.len() });
    }
    if x_prime.len() != params.dim() {
        return Err(Error::DimensionMismatch { expected: params.dim(), got: x_prime.len() });
    }
    if params.rho.iter().any(|r| *r < 0.0) {
        return Err(Error::Contract("rho must be nonnegative".into()));
    }
    let s = weighted_sqdist(&params.rho, x, x_prime);
    Ok(kernel_from_sqdist(params.family, params.sigma_k_sq, s))
}

/// Build the Gram matrix `K` and the matrix of weighted squared distances `S`
/// over the rows of `inputs`.
pub(crate) fn build_gram(params: &KernelHyperparams, data: &Dataset) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = data.len();
    let mut k = DMatrix::zeros(n, n);
    let mut s = DMatrix::zeros(n, n);
    for i in 0..n {
        let xi = data.input(i);
        for j in 0..=i {
            let sij = weighted_sqdist(&params.rho, xi, data.input(j));
            let kij = kernel_from_sqdist(params.family, params.sigma_k_sq, sij);
            s[(i, j)] = sij;
            s[(j, i)] = sij;
            k[(i, j)] = kij;
            k[(j, i)] = kij;
        }
    }
    (k, s)
}

/// Cholesky with escalating diagonal jitter. Returns the factorization of
/// `a + jitter * I` together with the jitter actually applied.
pub(crate) fn cholesky_with_jitter(a: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let mut attempted = Vec::new();
    for &jitter in &JITTER_LEVELS {
        let mut m = a.clone();
        if jitter > 0.0 {
            for i in 0..m.nrows() {
                m[(i, i)] += jitter;
            }
        }
        match Cholesky::new(m) {
            Some(chol) => return Ok((chol, jitter)),
            None => attempted.push(jitter),
        }
    }
    Err(Error::Factorization { attempted })
}

// ---------------------------------------------------------------------------
// Posterior model
// ---------------------------------------------------------------------------

/// Fitted GP state: the Cholesky factor of `K + noise * I`, the weight vector
/// `alpha = (K + noise I)^{-1} y_std`, and the output standardization
/// constants. Immutable after construction.
#[derive(Debug, Clone)]
pub struct PosteriorModel {
    params: KernelHyperparams,
    train: Dataset, // standardized outputs
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    y_shift: f64,
    y_scale: f64,
    jitter: f64,
}

/// Fit the exact GP posterior. Outputs are standardized internally; the
/// factorization retries with diagonal jitter 1e-8..1e-4 before erroring.
pub fn fit_posterior(data: &Dataset, params: &KernelHyperparams) -> Result<PosteriorModel> {
    if data.is_empty() {
        return Err(Error::Contract("dataset must be nonempty".into()));
    }
    if data.dim() != params.dim() {
        return Err(Error::DimensionMismatch { expected: params.dim(), got: data.dim() });
    }
    params.validate()?;

    let (std_data, y_shift, y_scale) = data.standardized();
    let n = std_data.len();
    let (mut a, _) = build_gram(params, &std_data);
    for i in 0..n {
        a[(i, i)] += params.noise_sq;
    }
    let (chol, jitter) = cholesky_with_jitter(&a)?;
    let y = DVector::from_iterator(n, std_data.outputs().iter().copied());
    let alpha = chol.solve(&y);

    Ok(PosteriorModel {
        params: params.clone(),
        train: std_data,
        chol,
        alpha,
        y_shift,
        y_scale,
        jitter,
    })
}

impl PosteriorModel {
    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    pub fn hyperparams(&self) -> &KernelHyperparams {
        &self.params
    }

    pub fn y_shift(&self) -> f64 {
        self.y_shift
    }

    pub fn y_scale(&self) -> f64 {
        self.y_scale
    }

    /// Jitter added to the diagonal during factorization (0 when none was needed).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Lower-triangular Cholesky factor of `K + (noise + jitter) * I`.
    pub fn factor_l(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// Prior predictive variance on the raw output scale.
    pub fn prior_variance(&self) -> f64 {
        self.y_scale * self.y_scale * self.params.sigma_k_sq
    }

    fn kernel_vector(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_fn(self.train.len(), |i, _| {
            let s = weighted_sqdist(&self.params.rho, x, self.train.input(i));
            kernel_from_sqdist(self.params.family, self.params.sigma_k_sq, s)
        })
    }

    /// Posterior mean and variance at `x`, de-standardized to the raw output
    /// scale. The variance is clamped to `[0, sigma_k_sq]` on the standardized
    /// scale before rescaling, so it never exceeds the prior variance.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let (mean_std, var_std) = self.predict_standardized(x);
        let var_std = var_std.clamp(0.0, self.params.sigma_k_sq);
        Ok((
            self.y_shift + self.y_scale * mean_std,
            self.y_scale * self.y_scale * var_std,
        ))
    }

    /// Mean and *unclamped* variance on the standardized scale.
    pub(crate) fn predict_standardized(&self, x: &[f64]) -> (f64, f64) {
        let k = self.kernel_vector(x);
        let mean = k.dot(&self.alpha);
        let v = self.chol.solve(&k);
        let var = self.params.sigma_k_sq - k.dot(&v);
        (mean, var)
    }

    /// Gradients of the posterior mean and posterior standard deviation with
    /// respect to `x`, on the raw output scale. The standard-deviation
    /// gradient is defined as 0 where the variance vanishes (at noiseless
    /// training points).
    pub fn predict_gradient(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let d = self.dim();
        let n = self.train.len();
        let rho = &self.params.rho;

        let k = self.kernel_vector(x);
        let w = self.chol.solve(&k); // (K + noise I)^{-1} k
        let var_std = (self.params.sigma_k_sq - k.dot(&w)).clamp(0.0, self.params.sigma_k_sq);

        let mut d_mean = vec![0.0; d];
        let mut d_var = vec![0.0; d];
        for i in 0..n {
            let xi = self.train.input(i);
            let s = weighted_sqdist(rho, x, xi);
            let dk_ds = kernel_d_dsqdist(self.params.family, self.params.sigma_k_sq, s);
            let a_i = self.alpha[i];
            let w_i = w[i];
            for l in 0..d {
                // dk(x, x_i)/dx_l = 2 rho_l (x_l - x_i_l) * dk/ds
                let dk_dxl = 2.0 * rho[l] * (x[l] - xi[l]) * dk_ds;
                d_mean[l] += a_i * dk_dxl;
                d_var[l] += -2.0 * w_i * dk_dxl;
            }
        }

        let sd = var_std.sqrt();
        let mut d_std = vec![0.0; d];
        if sd > 1e-12 {
            for l in 0..d {
                d_std[l] = self.y_scale * d_var[l] / (2.0 * sd);
            }
        }
        for g in &mut d_mean {
            *g *= self.y_scale;
        }
        Ok((d_mean, d_std))
    }
}

// ---------------------------------------------------------------------------
// Prior path sampling
// ---------------------------------------------------------------------------

/// Draw one zero-mean GP prior sample on a 1-D grid: the jittered Cholesky
/// factor of the Gram matrix applied to a standard normal vector.
/// Deterministic given `seed`.
pub fn sample_gp_path_1d(params: &KernelHyperparams, grid: &[f64], seed: u64) -> Result<Vec<f64>> {
    if params.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: params.dim() });
    }
    params.validate()?;
    let m = grid.len();
    if m == 0 || m > 5000 {
        return Err(Error::Contract("grid must have between 1 and 5000 points".into()));
    }
    if grid.iter().any(|g| !(0.0..=1.0).contains(g)) {
        return Err(Error::Contract("grid points must lie in [0,1]".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Contract("grid must be strictly increasing".into()));
    }

    let mut gram = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let d = grid[i] - grid[j];
            let s = params.rho[0] * d * d;
            let v = kernel_from_sqdist(params.family, params.sigma_k_sq, s);
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    let (chol, _) = cholesky_with_jitter(&gram)?;
    let mut rng = RunRng::seed_from_u64(seed);
    let z = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
    let path = chol.l() * z;
    Ok(path.iter().copied().collect())
}

// ---------------------------------------------------------------------------
