//! Online anisotropic kernel density over spatial states.
//!
//! Per-dimension moments are tracked with Welford's recurrence, the bandwidth
//! follows Scott's rule `h_j = sigma_j * N^(-1/(d+4))`, and every archived
//! state contributes a Gaussian similarity to the current one.

use std::collections::VecDeque;

use crate::error::{invalid, Error, Result};

/// Running per-dimension mean and sum of squared deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineMoments {
    n: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl OnlineMoments {
    pub fn new(dim: usize) -> Self {
        Self {
            n: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn m2(&self) -> &[f64] {
        &self.m2
    }

    pub fn update(&mut self, s: &[f64]) -> Result<()> {
        if s.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: s.len(),
            });
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("state"));
        }
        self.n += 1;
        let n = self.n as f64;
        for ((mean, m2), &x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(s) {
            let delta = x - *mean;
            *mean += delta / n;
            *m2 += delta * (x - *mean);
        }
        Ok(())
    }

    /// Sample variance of dimension `j` (`m2 / (n - 1)`), zero below two samples.
    pub fn variance(&self, j: usize) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2[j] / (self.n - 1) as f64).max(0.0)
        }
    }

    pub fn stddev(&self, j: usize) -> f64 {
        self.variance(j).sqrt()
    }
}

/// Returns the updated moments; see [`OnlineMoments::update`].
pub fn welford_update(mut m: OnlineMoments, s: &[f64]) -> Result<OnlineMoments> {
    m.update(s)?;
    Ok(m)
}

/// Online Scott bandwidth from the current moments, with each `sigma_j`
/// floored at `floor`.
pub fn bandwidth(m: &OnlineMoments, floor: f64) -> Result<Vec<f64>> {
    let sigma: Vec<f64> = (0..m.dim()).map(|j| m.stddev(j)).collect();
    scott_bandwidth(&sigma, m.count(), floor)
}

/// `h_j = max(sigma_j, floor) * n^(-1/(d+4))`.
pub fn scott_bandwidth(sigma: &[f64], n: u64, floor: f64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(invalid("moments", "bandwidth needs at least one sample"));
    }
    if !(floor > 0.0) {
        return Err(invalid("floor", format!("must be > 0, got {floor}")));
    }
    let d = sigma.len() as f64;
    let shrink = (n as f64).powf(-1.0 / (d + 4.0));
    Ok(sigma.iter().map(|s| s.max(floor) * shrink).collect())
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a,
            got: b,
        });
    }
    Ok(())
}

#[inline]
pub(crate) fn kernel_unchecked(s_t: &[f64], s_i: &[f64], h: &[f64]) -> f64 {
    let q: f64 = s_t
        .iter()
        .zip(s_i)
        .zip(h)
        .map(|((a, b), h)| {
            let z = (a - b) / h;
            z * z
        })
        .sum();
    (-0.5 * q).exp()
}

/// Gaussian similarity `exp(-1/2 sum_j ((s_t,j - s_i,j) / h_j)^2)`.
pub fn kernel_weight(s_t: &[f64], s_i: &[f64], h: &[f64]) -> Result<f64> {
    check_dims(s_t.len(), s_i.len())?;
    check_dims(s_t.len(), h.len())?;
    if h.iter().any(|&v| !(v > 0.0)) {
        return Err(invalid("h", "bandwidth must be positive"));
    }
    Ok(kernel_unchecked(s_t, s_i, h))
}

/// Archived states paired with the scores observed at them.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialArchive {
    dim: usize,
    states: VecDeque<Vec<f64>>,
    scores: VecDeque<f64>,
}

impl SpatialArchive {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            states: VecDeque::new(),
            scores: VecDeque::new(),
        }
    }

    pub fn push(&mut self, state: Vec<f64>, score: f64) -> Result<()> {
        check_dims(self.dim, state.len())?;
        if !(score >= 0.0 && score.is_finite()) {
            return Err(Error::NonFinite("score"));
        }
        self.states.push_back(state);
        self.scores.push_back(score);
        Ok(())
    }

    pub fn pop_oldest(&mut self) -> Option<(Vec<f64>, f64)> {
        Some((self.states.pop_front()?, self.scores.pop_front()?))
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.states.iter().map(Vec::as_slice)
    }

    pub fn scores(&self) -> impl Iterator<Item = f64> + '_ {
        self.scores.iter().copied()
    }

    /// Kernel weight of every archived state against `s_t`, in arrival order.
    pub fn kernel_weights(&self, s_t: &[f64], h: &[f64]) -> Result<Vec<f64>> {
        check_dims(self.dim, s_t.len())?;
        check_dims(self.dim, h.len())?;
        self.states
            .iter()
            .map(|s| kernel_weight(s_t, s, h))
            .collect()
    }

    /// Total evidence `D^S = sum_i K(s_t, s_i)`; zero for an empty archive.
    pub fn evidence(&self, s_t: &[f64], h: &[f64]) -> Result<f64> {
        Ok(self.kernel_weights(s_t, h)?.into_iter().sum())
    }

    /// Kernel-weighted empirical CDF of the paired scores.
    pub fn cdf(&self, s_t: &[f64], h: &[f64], r: f64) -> Result<f64> {
        let weights = self.kernel_weights(s_t, h)?;
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::ZeroEvidence);
        }
        let hit: f64 = weights
            .iter()
            .zip(&self.scores)
            .filter(|(_, &e)| e <= r)
            .map(|(w, _)| w)
            .sum();
        Ok(hit / total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn welford_first_sample() {
        let m = welford_update(OnlineMoments::new(1), &[5.0]).unwrap();
        assert_eq!((m.mean(), m.m2(), m.stddev(0)), (&[5.0][..], &[0.0][..], 0.0));
    }

    #[test]
    fn welford_two_samples() {
        let mut m = OnlineMoments::new(1);
        m.update(&[1.0]).unwrap();
        m.update(&[3.0]).unwrap();
        assert_eq!(m.mean(), &[2.0]);
        assert_eq!(m.m2(), &[2.0]);
        assert!((m.stddev(0) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn welford_constant_stream() {
        let mut m = OnlineMoments::new(1);
        for _ in 0..3 {
            m.update(&[0.7]).unwrap();
        }
        assert_eq!(m.stddev(0), 0.0);
    }

    #[test]
    fn welford_dimension_mismatch() {
        let mut m = OnlineMoments::new(2);
        assert!(matches!(
            m.update(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
        assert_eq!(m.count(), 0);
    }

    fn moments_with(dim: usize, samples: &[&[f64]]) -> OnlineMoments {
        let mut m = OnlineMoments::new(dim);
        for s in samples {
            m.update(s).unwrap();
        }
        m
    }

    #[test]
    fn bandwidth_examples() {
        assert_eq!(scott_bandwidth(&[1.0], 1, 1e-8).unwrap(), vec![1.0]);
        let h = scott_bandwidth(&[2.0], 32, 1e-8).unwrap()[0];
        assert!((h - 1.0).abs() < 1e-15, "h = {h}");

        // 32 samples with sample stddev 2: sixteen at -a and sixteen at +a,
        // m2 = 32 a^2, var = 32 a^2 / 31 = 4.
        let a = (4.0f64 * 31.0 / 32.0).sqrt();
        let mut m = OnlineMoments::new(1);
        for i in 0..32 {
            m.update(&[if i % 2 == 0 { a } else { -a }]).unwrap();
        }
        let h = bandwidth(&m, 1e-8).unwrap()[0];
        assert!((m.stddev(0) - 2.0).abs() < 1e-12);
        assert!((h - 1.0).abs() < 1e-12, "h = {h}");

        let m = moments_with(1, &[&[2.0], &[2.0], &[2.0]]);
        let h = bandwidth(&m, 1e-8).unwrap()[0];
        assert!((h - 1e-8 * 3f64.powf(-0.2)).abs() < 1e-22);
        assert!(h > 0.0);

        assert!(bandwidth(&OnlineMoments::new(1), 1e-8).is_err());
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(kernel_weight(&[1.0, 2.0], &[1.0, 2.0], &[0.3, 0.4]).unwrap(), 1.0);
        let w = kernel_weight(&[0.0], &[0.25], &[0.25]).unwrap();
        assert!((w - (-0.5f64).exp()).abs() < 1e-15);
        assert!((w - 0.606531).abs() < 5e-7);
        let w = kernel_weight(&[0.0, 0.0], &[0.5, 2.0], &[0.5, 2.0]).unwrap();
        assert!((w - (-1.0f64).exp()).abs() < 1e-15);
        assert!((w - 0.367879).abs() < 5e-7);
        assert!(kernel_weight(&[0.0], &[0.0, 1.0], &[1.0]).is_err());
    }

    #[test]
    fn evidence_examples() {
        let h = [0.5];
        let mut a = SpatialArchive::new(1);
        assert_eq!(a.evidence(&[1.0], &h).unwrap(), 0.0);
        for _ in 0..4 {
            a.push(vec![1.0], 0.3).unwrap();
        }
        assert_eq!(a.evidence(&[1.0], &h).unwrap(), 4.0);

        let mut b = SpatialArchive::new(1);
        b.push(vec![1.0], 1.0).unwrap();
        b.push(vec![1.5], 3.0).unwrap();
        let d = b.evidence(&[1.0], &h).unwrap();
        assert!((d - (1.0 + (-0.5f64).exp())).abs() < 1e-15);
        assert!((d - 1.606531).abs() < 5e-7);
    }

    #[test]
    fn cdf_examples() {
        let h = [0.5];
        let mut a = SpatialArchive::new(1);
        a.push(vec![0.0], 1.0).unwrap();
        assert_eq!(a.cdf(&[0.0], &h, 1.0).unwrap(), 1.0);

        let mut b = SpatialArchive::new(1);
        b.push(vec![0.0], 1.0).unwrap();
        b.push(vec![0.0], 3.0).unwrap();
        assert_eq!(b.cdf(&[0.0], &h, 2.0).unwrap(), 0.5);

        let mut c = SpatialArchive::new(1);
        c.push(vec![0.0], 1.0).unwrap();
        c.push(vec![0.5], 3.0).unwrap();
        let f = c.cdf(&[0.0], &h, 2.0).unwrap();
        assert!((f - 1.0 / (1.0 + (-0.5f64).exp())).abs() < 1e-15);
        assert!((f - 0.622459).abs() < 5e-7);
    }

    #[test]
    fn zero_evidence_cdf_is_an_error() {
        let a = SpatialArchive::new(1);
        assert!(matches!(a.cdf(&[0.0], &[1.0], 1.0), Err(Error::ZeroEvidence)));
    }

    fn two_pass(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
        (mean, if xs.len() > 1 { ss / (n - 1.0) } else { 0.0 })
    }

    proptest! {
        #[test]
        fn welford_matches_two_pass(xs in prop::collection::vec(-1e3f64..1e3, 1..2000)) {
            let mut m = OnlineMoments::new(1);
            for &x in &xs {
                m.update(&[x]).unwrap();
            }
            let (mean, var) = two_pass(&xs);
            prop_assert!((m.mean()[0] - mean).abs() <= 1e-9 * mean.abs().max(1.0));
            prop_assert!((m.variance(0) - var).abs() <= 1e-9 * var.max(1e-12));
        }

        #[test]
        fn evidence_never_decreases(
            states in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..50),
            q in (-3.0f64..3.0, -3.0f64..3.0),
        ) {
            let h = [0.7, 1.3];
            let mut a = SpatialArchive::new(2);
            let mut prev = 0.0;
            for (x, y) in states {
                a.push(vec![x, y], 1.0).unwrap();
                let d = a.evidence(&[q.0, q.1], &h).unwrap();
                prop_assert!(d >= prev);
                prop_assert!(d <= a.len() as f64);
                prev = d;
            }
        }

        #[test]
        fn kernel_scale_covariance(
            a in prop::collection::vec(-5.0f64..5.0, 3),
            b in prop::collection::vec(-5.0f64..5.0, 3),
            h in prop::collection::vec(0.1f64..3.0, 3),
            c in 0.01f64..100.0,
        ) {
            let w = kernel_weight(&a, &b, &h).unwrap();
            let scale = |v: &[f64]| v.iter().map(|x| x * c).collect::<Vec<_>>();
            let ws = kernel_weight(&scale(&a), &scale(&b), &scale(&h)).unwrap();
            prop_assert!((w - ws).abs() <= 1e-12 * w.max(1e-300) || (w - ws).abs() < 1e-300);
        }
    }
}
