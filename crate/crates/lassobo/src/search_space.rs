//! Search-region construction: the important-coordinate box crossed with
//! `M_t + 1` fixed imputations of the unimportant coordinates (the incumbent's
//! values plus `M_t = ceil(t^{1/n})` uniform draws).

use rand::Rng;

use crate::{Error, Result, RunRng};

/// Where an imputation came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImputationSource {
    BestSoFar,
    Random,
}

/// The iteration-`t` search region. `imputations[0]` is always the incumbent's
/// unimportant coordinates; the rest are uniform draws. Immutable after
/// construction.
#[derive(Debug, Clone)]
pub struct SearchSpaceSpec {
    dim: usize,
    important: Vec<usize>,
    unimportant: Vec<usize>,
    imputations: Vec<Vec<f64>>,
    tags: Vec<ImputationSource>,
    incumbent_important: Vec<f64>,
}

impl SearchSpaceSpec {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn important(&self) -> &[usize] {
        &self.important
    }

    pub fn unimportant(&self) -> &[usize] {
        &self.unimportant
    }

    pub fn n_imputations(&self) -> usize {
        self.imputations.len()
    }

    pub fn imputation(&self, i: usize) -> &[f64] {
        &self.imputations[i]
    }

    pub fn tag(&self, i: usize) -> ImputationSource {
        self.tags[i]
    }

    /// The incumbent restricted to the important coordinates; used as an
    /// always-included acquisition start under the best-so-far imputation.
    pub fn incumbent_important(&self) -> &[f64] {
        &self.incumbent_important
    }

    /// Scatter important-coordinate values `v` and the chosen imputation into
    /// a full D-dimensional point.
    pub fn assemble_point(&self, imputation_index: usize, v: &[f64]) -> Result<Vec<f64>> {
        if imputation_index >= self.imputations.len() {
            return Err(Error::Contract(format!(
                "imputation index {imputation_index} out of range {}",
                self.imputations.len()
            )));
        }
        if v.len() != self.important.len() {
            return Err(Error::DimensionMismatch { expected: self.important.len(), got: v.len() });
        }
        let mut x = vec![0.0; self.dim];
        for (&idx, &val) in self.important.iter().zip(v) {
            x[idx] = val;
        }
        for (&idx, &val) in self.unimportant.iter().zip(&self.imputations[imputation_index]) {
            x[idx] = val;
        }
        Ok(x)
    }
}

/// Number of random imputations at iteration `t`: `ceil(t^(1/n))`, verified by
/// integer arithmetic against floating-point boundary error.
pub fn mt_schedule(t: u64, n: u32) -> u64 {
    assert!(t >= 1 && n >= 2, "mt_schedule requires t >= 1, n >= 2");
    let mut r = (t as f64).powf(1.0 / n as f64).ceil() as u64;
    r = r.max(1);
    // enforce (r-1)^n < t <= r^n
    while r > 1 && (r - 1).pow(n) >= t {
        r -= 1;
    }
    while r.pow(n) < t {
        r += 1;
    }
    r
}

/// Build the search region for iteration `t` with `M_t = mt_schedule(t, n)`
/// random imputations. Consumes `D - |I_t|` uniforms per random imputation
/// from `rng`, in imputation order.
pub fn build_search_space(
    important: &[usize],
    best_x: &[f64],
    t: u64,
    n: u32,
    rng: &mut RunRng,
) -> Result<SearchSpaceSpec> {
    build_search_space_with(important, best_x, mt_schedule(t, n), rng)
}

/// Build the search region with an explicit number of random imputations.
/// `m_random = 0` yields the incumbent-only region used by dropout-style
/// baselines. When every coordinate is important the region degenerates to a
/// single zero-length imputation and acquisition runs over the full cube once.
pub fn build_search_space_with(
    important: &[usize],
    best_x: &[f64],
    m_random: u64,
    rng: &mut RunRng,
) -> Result<SearchSpaceSpec> {
    let d = best_x.len();
    if important.is_empty() {
        return Err(Error::Contract("important set must be nonempty".into()));
    }
    if important.windows(2).any(|w| w[0] >= w[1]) || *important.last().unwrap() >= d {
        return Err(Error::Contract("important set must be sorted, unique, in range".into()));
    }
    if best_x.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Contract("best_x must lie in [0,1]^D".into()));
    }

    let unimportant: Vec<usize> = {
        let mut mask = vec![true; d];
        for &i in important {
            mask[i] = false;
        }
        (0..d).filter(|&i| mask[i]).collect()
    };
    let incumbent_important: Vec<f64> = important.iter().map(|&i| best_x[i]).collect();

    let mut imputations = Vec::new();
    let mut tags = Vec::new();
    imputations.push(unimportant.iter().map(|&i| best_x[i]).collect::<Vec<f64>>());
    tags.push(ImputationSource::BestSoFar);
    if !unimportant.is_empty() {
        for _ in 0..m_random {
            let z: Vec<f64> = unimportant.iter().map(|_| rng.gen::<f64>()).collect();
            imputations.push(z);
            tags.push(ImputationSource::Random);
        }
    }

    Ok(SearchSpaceSpec {
        dim: d,
        important: important.to_vec(),
        unimportant,
        imputations,
        tags,
        incumbent_important,
    })
}
