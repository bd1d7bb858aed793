//! GP-UCB and its maximization over a multi-subspace search region.
//!
//! The acquisition at iteration `t` is `a_t(x) = mu(x) + sqrt(beta_t) sigma(x)`
//! with the practical schedule `beta_t = 2 log(pi^2 t^2 / (6 delta))`. The
//! maximizer splits a shared start budget evenly across the region's
//! imputations (remainder to the earliest), keeps the best starts per
//! imputation, and refines each with projected gradient ascent on the
//! important coordinates only, halving the step on non-improvement. The
//! incumbent's important coordinates are always included as a start under the
//! best-so-far imputation, so the returned value never falls below the
//! acquisition at the incumbent.

use rand::Rng;

use crate::gp::PosteriorModel;
use crate::search_space::SearchSpaceSpec;
use crate::{Error, Result, RunRng};

/// Acquisition configuration.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct AcqConfig {
    /// Confidence parameter in (0,1) for the beta schedule.
    pub delta: f64,
    /// Fixed beta for ablations; overrides the schedule when set.
    pub beta_override: Option<f64>,
    /// Random-start evaluation budget shared across imputations.
    pub restarts_total: usize,
    /// Local-ascent iterations per kept start.
    pub refine_steps: usize,
    /// Starts kept for refinement per imputation.
    pub n_keep: usize,
    /// Initial ascent step, halved on non-improvement.
    pub step_size: f64,
}

impl Default for AcqConfig {
    fn default() -> Self {
        AcqConfig {
            delta: 0.1,
            beta_override: None,
            restarts_total: 64,
            refine_steps: 50,
            n_keep: 4,
            step_size: 0.1,
        }
    }
}

impl AcqConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("delta must lie in (0,1), got {}", self.delta)));
        }
        if let Some(b) = self.beta_override {
            if !(b > 0.0) {
                return Err(Error::Config("beta_override must be positive".into()));
            }
        }
        if self.restarts_total == 0 || self.refine_steps == 0 || self.n_keep == 0 {
            return Err(Error::Config("acquisition budgets must be positive".into()));
        }
        if !(self.step_size > 0.0) {
            return Err(Error::Config("step_size must be positive".into()));
        }
        Ok(())
    }
}

/// Exploration weight at iteration `t >= 1`: `2 log(pi^2 t^2 / (6 delta))`,
/// unless overridden.
pub fn beta_t(t: u64, cfg: &AcqConfig) -> f64 {
    assert!(t >= 1, "beta_t requires t >= 1");
    if let Some(b) = cfg.beta_override {
        return b;
    }
    let t = t as f64;
    2.0 * (std::f64::consts::PI.powi(2) * t * t / (6.0 * cfg.delta)).ln()
}

/// Upper confidence bound `mu(x) + sqrt(beta) sigma(x)`.
pub fn ucb(model: &PosteriorModel, x: &[f64], beta: f64) -> Result<f64> {
    let (mean, var) = model.predict(x)?;
    Ok(mean + beta.sqrt() * var.sqrt())
}

/// Maximize the UCB over the multi-subspace region. Returns the best
/// assembled point and its acquisition value; ties break toward the earliest
/// (imputation index, start index). Deterministic given the rng state.
pub fn maximize_over_space(
    model: &PosteriorModel,
    spec: &SearchSpaceSpec,
    beta: f64,
    cfg: &AcqConfig,
    rng: &mut RunRng,
) -> Result<(Vec<f64>, f64)> {
    cfg.validate()?;
    if spec.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: spec.dim() });
    }
    let n_imp = spec.n_imputations();
    let n_free = spec.important().len();
    let base = cfg.restarts_total / n_imp;
    let remainder = cfg.restarts_total % n_imp;
    let sqrt_beta = beta.sqrt();

    let mut best: Option<(f64, (usize, usize), Vec<f64>)> = None;
    let consider = |val: f64, key: (usize, usize), x: &[f64], best: &mut Option<(f64, (usize, usize), Vec<f64>)>| {
        let take = match best {
            None => true,
            Some((bv, bk, _)) => val > *bv || (val == *bv && key < *bk),
        };
        if take {
            *best = Some((val, key, x.to_vec()));
        }
    };

    for imp in 0..n_imp {
        let n_starts = base + usize::from(imp < remainder);
        let mut starts: Vec<Vec<f64>> = Vec::with_capacity(n_starts + 1);
        if imp == 0 {
            starts.push(spec.incumbent_important().to_vec());
        }
        for _ in 0..n_starts {
            starts.push((0..n_free).map(|_| rng.gen::<f64>()).collect());
        }

        // evaluate all starts, then keep the best n_keep for refinement
        let mut evaluated: Vec<(usize, f64)> = Vec::with_capacity(starts.len());
        for (s_idx, v) in starts.iter().enumerate() {
            let x = spec.assemble_point(imp, v)?;
            let val = ucb(model, &x, beta)?;
            consider(val, (imp, s_idx), &x, &mut best);
            evaluated.push((s_idx, val));
        }
        evaluated.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));

        for &(s_idx, start_val) in evaluated.iter().take(cfg.n_keep) {
            let mut v = starts[s_idx].clone();
            let mut x = spec.assemble_point(imp, &v)?;
            let mut val = start_val;
            let mut step = cfg.step_size;
            let mut grad: Option<Vec<f64>> = None;
            for _ in 0..cfg.refine_steps {
                if step < 1e-12 {
                    break;
                }
                if grad.is_none() {
                    let (d_mean, d_std) = model.predict_gradient(&x)?;
                    let g: Vec<f64> = spec
                        .important()
                        .iter()
                        .map(|&dim| d_mean[dim] + sqrt_beta * d_std[dim])
                        .collect();
                    // ascend along the unit direction so `step` is the move
                    // length; flat ridges then still get traversed
                    let norm = g.iter().map(|gi| gi * gi).sum::<f64>().sqrt();
                    if norm == 0.0 {
                        break;
                    }
                    grad = Some(g.iter().map(|gi| gi / norm).collect());
                }
                let g = grad.as_ref().unwrap();
                let v_new: Vec<f64> =
                    v.iter().zip(g).map(|(vi, gi)| (vi + step * gi).clamp(0.0, 1.0)).collect();
                if v_new == v {
                    step *= 0.5;
                    continue;
                }
                let x_new = spec.assemble_point(imp, &v_new)?;
                let val_new = ucb(model, &x_new, beta)?;
                if val_new > val {
                    v = v_new;
                    x = x_new;
                    val = val_new;
                    grad = None;
                    step = (step * 2.0).min(1.0);
                } else {
                    step *= 0.5;
                }
            }
            consider(val, (imp, s_idx), &x, &mut best);
        }
    }

    let (val, _, x) = best.expect("at least the incumbent start is always evaluated");
    Ok((x, val))
}
