//! Important/unimportant variable partition from fitted inverse lengthscales.
//!
//! A dimension is important when its (windowed-median) rho exceeds the mean
//! over all D dimensions, strictly. A window of W = 1 uses the latest fit
//! directly; larger windows take the elementwise lower-median of the last W
//! fitted vectors, which damps iteration-to-iteration selection churn.

use std::collections::VecDeque;

use crate::{Error, Result};

/// Rolling window of fitted rho vectors plus the last computed partition.
/// Single-owner mutable state; not safe for concurrent mutation.
#[derive(Debug, Clone)]
pub struct ImportanceState {
    window: usize,
    history: VecDeque<Vec<f64>>,
    last_partition: Option<(Vec<usize>, usize)>,
    last_medians: Option<Vec<f64>>,
}

impl ImportanceState {
    pub fn new(window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::Config("window must be >= 1".into()));
        }
        Ok(ImportanceState { window, history: VecDeque::new(), last_partition: None, last_medians: None })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn last_partition(&self) -> Option<&(Vec<usize>, usize)> {
        self.last_partition.as_ref()
    }

    /// Elementwise windowed medians from the last classification.
    pub fn last_medians(&self) -> Option<&[f64]> {
        self.last_medians.as_deref()
    }

    /// Append a fitted rho vector (evicting beyond the window) and classify.
    /// Returns the sorted important index set and its size; never empty — when
    /// all medians are equal the single argmax dimension (lowest index on
    /// ties) is returned.
    pub fn push_and_classify(&mut self, rho_t: &[f64]) -> Result<(Vec<usize>, usize)> {
        if rho_t.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::Contract("rho entries must be finite and nonnegative".into()));
        }
        if let Some(front) = self.history.front() {
            if front.len() != rho_t.len() {
                return Err(Error::DimensionMismatch { expected: front.len(), got: rho_t.len() });
            }
        }
        self.history.push_back(rho_t.to_vec());
        while self.history.len() > self.window {
            self.history.pop_front();
        }

        let d = rho_t.len();
        let k = self.history.len();
        let mut medians = vec![0.0; d];
        let mut column = vec![0.0; k];
        for i in 0..d {
            for (slot, row) in column.iter_mut().zip(&self.history) {
                *slot = row[i];
            }
            column.sort_unstable_by(|a, b| a.total_cmp(b));
            // lower median: the ceil(k/2)-th order statistic
            medians[i] = column[k.div_ceil(2) - 1];
        }

        let mean = medians.iter().sum::<f64>() / d as f64;
        let mut important: Vec<usize> =
            (0..d).filter(|&i| medians[i] > mean).collect();
        if important.is_empty() {
            let argmax = medians
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
                .map(|(i, _)| i)
                .unwrap_or(0);
            important.push(argmax);
        }
        let d_t = important.len();
        self.last_partition = Some((important.clone(), d_t));
        self.last_medians = Some(medians);
        Ok((important, d_t))
    }
}

/// Precision and recall of a selected index set against the known effective
/// set.
pub fn selection_metrics(i_t: &[usize], effective: &[usize]) -> Result<(f64, f64)> {
    if effective.is_empty() {
        return Err(Error::Contract("effective set must be nonempty".into()));
    }
    let inter = i_t.iter().filter(|i| effective.contains(i)).count() as f64;
    let precision = if i_t.is_empty() { 0.0 } else { inter / i_t.len() as f64 };
    let recall = inter / effective.len() as f64;
    Ok((precision, recall))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn classify_above_mean() {
        let mut st = ImportanceState::new(1).unwrap();
        let (i, d) = st.push_and_classify(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(i, vec![0]);
        assert_eq!(d, 1);
    }

    #[test]
    fn all_equal_falls_back_to_first() {
        let mut st = ImportanceState::new(1).unwrap();
        let (i, d) = st.push_and_classify(&[4.0, 4.0, 4.0, 4.0]).unwrap();
        assert_eq!(i, vec![0]);
        assert_eq!(d, 1);
        // zeros too
        let mut st = ImportanceState::new(1).unwrap();
        let (i, _) = st.push_and_classify(&[0.0, 0.0]).unwrap();
        assert_eq!(i, vec![0]);
    }

    #[test]
    fn windowed_median_hand_case() {
        let mut st = ImportanceState::new(3).unwrap();
        st.push_and_classify(&[9.0, 0.0, 0.0]).unwrap();
        st.push_and_classify(&[0.0, 9.0, 0.0]).unwrap();
        // medians [1, 1, 0], mean 2/3
        let (i, d) = st.push_and_classify(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(i, vec![0, 1]);
        assert_eq!(d, 2);
    }

    #[test]
    fn window_evicts_oldest() {
        let mut st = ImportanceState::new(2).unwrap();
        st.push_and_classify(&[100.0, 0.0]).unwrap();
        st.push_and_classify(&[0.0, 1.0]).unwrap();
        // the [100, 0] entry is evicted here; history = [[0,1],[0,1]]
        let (i, _) = st.push_and_classify(&[0.0, 1.0]).unwrap();
        assert_eq!(i, vec![1]);
    }

    #[test]
    fn window_one_is_identity_on_latest() {
        let mut rng = crate::RunRng::seed_from_u64(5);
        for _ in 0..50 {
            let rho: Vec<f64> = (0..6).map(|_| rng.gen::<f64>() * 3.0).collect();
            let mut st = ImportanceState::new(1).unwrap();
            st.push_and_classify(&[9.0; 6]).unwrap();
            let (got, _) = st.push_and_classify(&rho).unwrap();
            let mean = rho.iter().sum::<f64>() / 6.0;
            let mut want: Vec<usize> = (0..6).filter(|&i| rho[i] > mean).collect();
            if want.is_empty() {
                let argmax = (0..6).max_by(|&a, &b| rho[a].total_cmp(&rho[b]).then(b.cmp(&a))).unwrap();
                want.push(argmax);
            }
            assert_eq!(got, want);
        }
    }

    #[test]
    fn partition_is_permutation_equivariant_and_scale_invariant() {
        let mut rng = crate::RunRng::seed_from_u64(8);
        for _ in 0..30 {
            let hist: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..5).map(|_| rng.gen::<f64>() * 4.0).collect())
                .collect();
            let mut base = ImportanceState::new(3).unwrap();
            let mut base_i = Vec::new();
            for h in &hist {
                base_i = base.push_and_classify(h).unwrap().0;
            }

            // scale everything by c > 0
            let c = 0.25 + rng.gen::<f64>() * 10.0;
            let mut scaled = ImportanceState::new(3).unwrap();
            let mut scaled_i = Vec::new();
            for h in &hist {
                let s: Vec<f64> = h.iter().map(|v| v * c).collect();
                scaled_i = scaled.push_and_classify(&s).unwrap().0;
            }
            assert_eq!(base_i, scaled_i);

            // reverse-permute coordinates
            let mut perm = ImportanceState::new(3).unwrap();
            let mut perm_i = Vec::new();
            for h in &hist {
                let p: Vec<f64> = h.iter().rev().copied().collect();
                perm_i = perm.push_and_classify(&p).unwrap().0;
            }
            let mut mapped: Vec<usize> = base_i.iter().map(|i| 4 - i).collect();
            mapped.sort_unstable();
            assert_eq!(perm_i, mapped);
        }
    }

    #[test]
    fn nonempty_for_random_vectors() {
        let mut rng = crate::RunRng::seed_from_u64(12);
        for _ in 0..1000 {
            let d = 1 + rng.gen_range(0..10);
            let rho: Vec<f64> = (0..d).map(|_| rng.gen::<f64>() * 5.0).collect();
            let mut st = ImportanceState::new(1).unwrap();
            let (i, _) = st.push_and_classify(&rho).unwrap();
            assert!(!i.is_empty());
        }
    }

    #[test]
    fn metrics_counting() {
        assert_eq!(selection_metrics(&[0, 1], &[0, 1]).unwrap(), (1.0, 1.0));
        assert_eq!(selection_metrics(&[2, 3], &[0, 1]).unwrap(), (0.0, 0.0));
        assert_eq!(
            selection_metrics(&[0, 1, 2, 3], &[0, 1, 10, 11]).unwrap(),
            (0.5, 0.5)
        );
        assert!(selection_metrics(&[0], &[]).is_err());
    }
}
