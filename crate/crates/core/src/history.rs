//! The residual archive shared by both CDF estimators, and the per-step sorted
//! snapshot used to evaluate them in `O(log n)` per query.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::spatial::{kernel_unchecked, scott_bandwidth, OnlineMoments};

#[derive(Debug, Clone)]
struct Entry {
    score: f64,
    state: Option<Box<[f64]>>,
}

/// Ordered archive of `(E_i, S_i)` pairs.
///
/// Entries without a state (cold steps) take part in the temporal estimator
/// only. The bandwidth moments cover every state ever archived, including
/// those since evicted by `cap`.
#[derive(Debug, Clone)]
pub struct ResidualHistory {
    dim: usize,
    beta: f64,
    cap: Option<usize>,
    entries: VecDeque<Entry>,
    /// Sequence number of `entries[0]`.
    first_seq: u64,
    /// Sequence numbers ordered by `(score, seq)`.
    sorted: Vec<u64>,
    moments: OnlineMoments,
    stored_states: usize,
}

impl ResidualHistory {
    pub fn new(dim: usize, beta: f64, cap: Option<usize>) -> Self {
        Self {
            dim,
            beta,
            cap,
            entries: VecDeque::new(),
            first_seq: 0,
            sorted: Vec::new(),
            moments: OnlineMoments::new(dim),
            stored_states: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn moments(&self) -> &OnlineMoments {
        &self.moments
    }

    /// Number of archived entries carrying a state.
    pub fn spatial_len(&self) -> usize {
        self.stored_states
    }

    pub fn max_score(&self) -> Option<f64> {
        self.sorted.last().map(|&seq| self.entry(seq).score)
    }

    fn entry(&self, seq: u64) -> &Entry {
        &self.entries[(seq - self.first_seq) as usize]
    }

    fn key(&self, seq: u64) -> (f64, u64) {
        (self.entry(seq).score, seq)
    }

    fn sorted_position(&self, score: f64, seq: u64) -> usize {
        self.sorted.partition_point(|&s| {
            let (e, q) = self.key(s);
            e < score || (e == score && q < seq)
        })
    }

    pub fn push(&mut self, score: f64, state: Option<&[f64]>) -> Result<()> {
        if !(score >= 0.0 && score.is_finite()) {
            return Err(Error::NonFinite("score"));
        }
        if let Some(s) = state {
            self.moments.update(s)?;
            self.stored_states += 1;
        }
        let seq = self.first_seq + self.entries.len() as u64;
        let pos = self.sorted_position(score, seq);
        self.entries.push_back(Entry {
            score,
            state: state.map(Into::into),
        });
        self.sorted.insert(pos, seq);
        if let Some(cap) = self.cap {
            while self.entries.len() > cap {
                self.evict_oldest();
            }
        }
        Ok(())
    }

    fn evict_oldest(&mut self) {
        let seq = self.first_seq;
        let score = self.entries[0].score;
        let pos = self.sorted_position(score, seq);
        debug_assert_eq!(self.sorted[pos], seq);
        self.sorted.remove(pos);
        let gone = self.entries.pop_front().expect("non-empty");
        if gone.state.is_some() {
            self.stored_states -= 1;
        }
        self.first_seq += 1;
    }

    /// Current Scott bandwidth, or `None` before any state has been archived.
    pub fn bandwidth(&self, floor: f64) -> Option<Vec<f64>> {
        if self.moments.count() == 0 {
            return None;
        }
        let sigma: Vec<f64> = (0..self.dim).map(|j| self.moments.stddev(j)).collect();
        scott_bandwidth(&sigma, self.moments.count(), floor).ok()
    }

    /// Temporal weights `beta^(n-1-j)` in arrival order.
    fn temporal_weights(&self) -> Vec<f64> {
        let n = self.entries.len();
        let mut w = vec![0.0; n];
        let mut acc = 1.0;
        for slot in w.iter_mut().rev() {
            *slot = acc;
            acc *= self.beta;
        }
        w
    }

    /// Sorts the archive against the current query.
    ///
    /// With `query = Some((s_t, h))` the spatial CDF is built as well; when
    /// every kernel weight underflows the snapshot reports zero evidence.
    pub fn snapshot(&self, query: Option<(&[f64], &[f64])>) -> Result<CdfSnapshot> {
        if let Some((s, h)) = query {
            for len in [s.len(), h.len()] {
                if len != self.dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.dim,
                        got: len,
                    });
                }
            }
        }
        let n = self.entries.len();
        let tw = self.temporal_weights();
        let sw: Option<Vec<f64>> = query.map(|(s_t, h)| {
            self.entries
                .iter()
                .map(|e| match &e.state {
                    Some(s_i) => kernel_unchecked(s_t, s_i, h),
                    None => 0.0,
                })
                .collect()
        });

        let mut scores = Vec::with_capacity(n);
        let mut cum_t = Vec::with_capacity(n);
        let mut cum_s = Vec::with_capacity(if sw.is_some() { n } else { 0 });
        let (mut acc_t, mut acc_s) = (0.0, 0.0);
        for &seq in &self.sorted {
            let j = (seq - self.first_seq) as usize;
            scores.push(self.entries[j].score);
            acc_t += tw[j];
            cum_t.push(acc_t);
            if let Some(sw) = &sw {
                acc_s += sw[j];
                cum_s.push(acc_s);
            }
        }
        cum_t.iter_mut().for_each(|c| *c /= acc_t);
        let evidence = if sw.is_some() { acc_s } else { 0.0 };
        let spatial = if evidence > 0.0 {
            cum_s.iter_mut().for_each(|c| *c /= acc_s);
            Some(cum_s)
        } else {
            None
        };
        Ok(CdfSnapshot {
            scores,
            temporal: cum_t,
            spatial,
            evidence,
        })
    }
}

/// Archived scores in ascending order with the normalized cumulative
/// temporal (and optionally spatial) weight at each position.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfSnapshot {
    scores: Vec<f64>,
    temporal: Vec<f64>,
    spatial: Option<Vec<f64>>,
    evidence: f64,
}

impl CdfSnapshot {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn max_score(&self) -> Option<f64> {
        self.scores.last().copied()
    }

    /// Total spatial evidence `D^S` for the query state.
    pub fn evidence(&self) -> f64 {
        self.evidence
    }

    pub fn has_spatial(&self) -> bool {
        self.spatial.is_some()
    }

    fn covered(&self, r: f64) -> usize {
        self.scores.partition_point(|&e| e <= r)
    }

    fn read(cum: &[f64], k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            cum[k - 1]
        }
    }

    pub fn temporal_cdf(&self, r: f64) -> f64 {
        Self::read(&self.temporal, self.covered(r))
    }

    pub fn spatial_cdf(&self, r: f64) -> Option<f64> {
        self.spatial
            .as_deref()
            .map(|cum| Self::read(cum, self.covered(r)))
    }
}
