//! Discounted temporal base: geometric recency weights over archived scores
//! and the weighted empirical CDF built from them.
//!
//! The functions here evaluate by direct summation. The engine uses the
//! sorted snapshot in [`crate::history`], which must agree with this path.

use std::collections::VecDeque;

use crate::error::{invalid, Error, Result};

/// Weight of the score archived at step `i` when forecasting step `t`: `beta^(t-1-i)`.
pub fn temporal_weight(i: u64, t: u64, beta: f64) -> Result<f64> {
    if i >= t {
        return Err(invalid("i", format!("must be < t ({t}), got {i}")));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(invalid("beta", format!("must lie in (0, 1), got {beta}")));
    }
    Ok(discount(beta, t - 1 - i))
}

pub(crate) fn discount(beta: f64, lag: u64) -> f64 {
    match i32::try_from(lag) {
        Ok(n) => beta.powi(n),
        Err(_) => beta.powf(lag as f64),
    }
}

/// Closed-form total weight `sum_{j<n} beta^j = (1 - beta^n) / (1 - beta)`.
pub fn total_weight(n: u64, beta: f64) -> f64 {
    (1.0 - discount(beta, n)) / (1.0 - beta)
}

/// Archived scores in arrival order together with the discount factor.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalArchive {
    scores: VecDeque<f64>,
    beta: f64,
}

impl TemporalArchive {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(invalid("beta", format!("must lie in (0, 1), got {beta}")));
        }
        Ok(Self {
            scores: VecDeque::new(),
            beta,
        })
    }

    pub fn from_scores(beta: f64, scores: impl IntoIterator<Item = f64>) -> Result<Self> {
        let mut a = Self::new(beta)?;
        for s in scores {
            a.push(s)?;
        }
        Ok(a)
    }

    pub fn push(&mut self, score: f64) -> Result<()> {
        if !(score >= 0.0 && score.is_finite()) {
            return Err(Error::NonFinite("score"));
        }
        self.scores.push_back(score);
        Ok(())
    }

    pub fn pop_oldest(&mut self) -> Option<f64> {
        self.scores.pop_front()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn scores(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.scores.iter().copied()
    }

    /// Weight of the `j`-th archived score (0 = oldest).
    pub fn weight(&self, j: usize) -> f64 {
        discount(self.beta, (self.scores.len() - 1 - j) as u64)
    }

    /// Direct sum of all weights.
    pub fn total(&self) -> f64 {
        (0..self.scores.len()).map(|j| self.weight(j)).sum()
    }

    /// `sum_i w_i 1(E_i <= r) / sum_i w_i`.
    pub fn cdf(&self, r: f64) -> Result<f64> {
        if self.scores.is_empty() {
            return Err(Error::EmptyArchive);
        }
        let (mut hit, mut total) = (0.0, 0.0);
        for (j, &e) in self.scores.iter().enumerate() {
            let w = self.weight(j);
            total += w;
            if e <= r {
                hit += w;
            }
        }
        Ok(hit / total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn weight_examples() {
        assert_eq!(temporal_weight(9, 10, 0.37).unwrap(), 1.0);
        assert_eq!(temporal_weight(0, 2, 0.5).unwrap(), 0.5);
        // 0.99^10 by repeated multiplication.
        let mut oracle = 1.0f64;
        for _ in 0..10 {
            oracle *= 0.99;
        }
        let w = temporal_weight(0, 11, 0.99).unwrap();
        assert!((w - oracle).abs() <= 1e-12 * oracle);
        assert!((w - 0.904382).abs() < 5e-7);
        assert!(temporal_weight(3, 3, 0.5).is_err());
        assert!(temporal_weight(0, 3, 1.0).is_err());
    }

    #[test]
    fn cdf_examples() {
        let one = TemporalArchive::from_scores(0.9, [1.0]).unwrap();
        assert_eq!(one.cdf(2.0).unwrap(), 1.0);

        let two = TemporalArchive::from_scores(0.5, [1.0, 3.0]).unwrap();
        assert!((two.cdf(2.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(two.cdf(0.5).unwrap(), 0.0);
        // A score equal to r counts as covered.
        assert_eq!(two.cdf(3.0).unwrap(), 1.0);
    }

    #[test]
    fn empty_archive_is_an_error() {
        let a = TemporalArchive::new(0.9).unwrap();
        assert!(matches!(a.cdf(1.0), Err(Error::EmptyArchive)));
    }

    #[test]
    fn arrival_order_matters() {
        let a = TemporalArchive::from_scores(0.5, [1.0, 3.0]).unwrap();
        let b = TemporalArchive::from_scores(0.5, [3.0, 1.0]).unwrap();
        assert_ne!(a.cdf(2.0).unwrap(), b.cdf(2.0).unwrap());
        assert!((b.cdf(2.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn total_weight_closed_form(n in 1u64..2000, beta in 0.01f64..0.999) {
            let a = TemporalArchive::from_scores(beta, (0..n).map(|_| 1.0)).unwrap();
            let direct = a.total();
            let closed = total_weight(n, beta);
            prop_assert!((direct - closed).abs() <= 1e-12 * closed);
        }

        #[test]
        fn cdf_is_monotone(
            scores in prop::collection::vec(0.0f64..10.0, 1..100),
            beta in 0.05f64..0.999,
            r1 in 0.0f64..12.0,
            dr in 0.0f64..5.0,
        ) {
            let a = TemporalArchive::from_scores(beta, scores).unwrap();
            let lo = a.cdf(r1).unwrap();
            let hi = a.cdf(r1 + dr).unwrap();
            prop_assert!(lo <= hi);
            prop_assert!((0.0..=1.0).contains(&lo));
            prop_assert_eq!(a.cdf(12.0).unwrap(), 1.0);
        }
    }
}
