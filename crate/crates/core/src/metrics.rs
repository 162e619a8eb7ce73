//! Interval evaluation: coverage, high-volatility conditional coverage,
//! width, and the Winkler interval score.

use crate::error::{invalid, Error, Result};
use crate::types::IntervalForecast;

/// Winkler score: width plus `2/alpha` times the distance by which `y` misses.
pub fn winkler(lower: f64, upper: f64, y: f64, alpha: f64) -> Result<f64> {
    if !(upper >= lower) {
        return Err(Error::InvertedInterval { lower, upper });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    let penalty = 2.0 / alpha;
    let mut s = upper - lower;
    if y < lower {
        s += penalty * (lower - y);
    } else if y > upper {
        s += penalty * (y - upper);
    }
    Ok(s)
}

/// One evaluated step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: u64,
    pub y: f64,
    pub center: f64,
    pub lower: f64,
    pub upper: f64,
    pub covered: bool,
    pub width: f64,
    pub winkler: f64,
    pub quantile: f64,
    pub pi_s: f64,
    pub d_s: f64,
    pub lambda_t: f64,
}

impl StepRecord {
    pub fn new(t: u64, y: f64, f: &IntervalForecast, alpha: f64) -> Result<Self> {
        Ok(Self {
            t,
            y,
            center: f.center,
            lower: f.lower,
            upper: f.upper,
            covered: f.covers(y),
            width: f.width(),
            winkler: winkler(f.lower, f.upper, y, alpha)?,
            quantile: f.quantile,
            pi_s: f.pi_s,
            d_s: f.d_s,
            lambda_t: f.lambda_t,
        })
    }
}

/// How the top-decile threshold for `|y|` is ranked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HighVolRanking {
    /// Against the whole evaluation window.
    #[default]
    Hindsight,
    /// Against `|y_0..=y_t|` only.
    Expanding,
}

/// The `ceil(0.1 n)`-th largest value of `xs`.
fn top_decile_threshold(xs: &[f64]) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let k = ((0.1 * sorted.len() as f64).ceil() as usize).max(1);
    sorted[k - 1]
}

/// Marks steps whose `|y|` reaches the empirical 90th percentile; ties at the
/// threshold are all marked.
pub fn high_vol_mask(ys: &[f64]) -> Vec<bool> {
    high_vol_mask_with(ys, HighVolRanking::Hindsight)
}

pub fn high_vol_mask_with(ys: &[f64], ranking: HighVolRanking) -> Vec<bool> {
    let abs: Vec<f64> = ys.iter().map(|y| y.abs()).collect();
    if abs.is_empty() {
        return Vec::new();
    }
    match ranking {
        HighVolRanking::Hindsight => {
            let th = top_decile_threshold(&abs);
            abs.iter().map(|&a| a >= th).collect()
        }
        HighVolRanking::Expanding => (0..abs.len())
            .map(|t| abs[t] >= top_decile_threshold(&abs[..=t]))
            .collect(),
    }
}

/// Aggregate metrics over one evaluation window.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub marginal_coverage: f64,
    /// `None` when no step is marked high-volatility.
    pub high_vol_coverage: Option<f64>,
    pub avg_width: f64,
    pub avg_winkler: f64,
    pub n_steps: usize,
    pub n_high_vol: usize,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

fn as_rate(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

pub fn aggregate(records: &[StepRecord], mask: &[bool]) -> Result<RunReport> {
    if records.is_empty() {
        return Err(invalid("records", "nothing to aggregate"));
    }
    if mask.len() != records.len() {
        return Err(Error::DimensionMismatch {
            expected: records.len(),
            got: mask.len(),
        });
    }
    let n_high_vol = mask.iter().filter(|&&m| m).count();
    let high_vol_coverage = (n_high_vol > 0).then(|| {
        mean(
            records
                .iter()
                .zip(mask)
                .filter(|(_, &m)| m)
                .map(|(r, _)| as_rate(r.covered)),
        )
    });
    Ok(RunReport {
        marginal_coverage: mean(records.iter().map(|r| as_rate(r.covered))),
        high_vol_coverage,
        avg_width: mean(records.iter().map(|r| r.width)),
        avg_winkler: mean(records.iter().map(|r| r.winkler)),
        n_steps: records.len(),
        n_high_vol,
    })
}
