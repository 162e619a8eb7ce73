//! Evidence gate, decaying uniform prior, the mixture CDF and its quantile.

use crate::error::{invalid, Error, Result};
use crate::history::CdfSnapshot;

/// `d_s / (d_s + k)`: the share of the mixture routed to spatial memory.
pub fn spatial_proportion(d_s: f64, k: f64) -> Result<f64> {
    if !(d_s >= 0.0) {
        return Err(invalid("d_s", format!("must be >= 0, got {d_s}")));
    }
    if !(k > 0.0) {
        return Err(invalid("k", format!("must be > 0, got {k}")));
    }
    Ok(d_s / (d_s + k))
}

/// Weight of the uniform prior after `t` ingested observations: `1 / sqrt(1 + t)`.
pub fn prior_weight(t: u64) -> f64 {
    1.0 / (1.0 + t as f64).sqrt()
}

/// Bisection settings for [`solve_quantile`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stopping width relative to the search bound.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 200,
        }
    }
}

/// One step's mixture: gate, prior weight, prior bound and the archived
/// scores (absent on a cold start).
#[derive(Debug, Clone, Copy)]
pub struct MixtureQuery<'a> {
    pi_s: f64,
    lambda_t: f64,
    r_max: f64,
    snapshot: Option<&'a CdfSnapshot>,
}

impl<'a> MixtureQuery<'a> {
    pub fn new(
        pi_s: f64,
        lambda_t: f64,
        r_max: f64,
        snapshot: Option<&'a CdfSnapshot>,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&pi_s) {
            return Err(invalid("pi_s", format!("must lie in [0, 1], got {pi_s}")));
        }
        if !(lambda_t > 0.0 && lambda_t <= 1.0) {
            return Err(invalid(
                "lambda_t",
                format!("must lie in (0, 1], got {lambda_t}"),
            ));
        }
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(invalid("r_max", format!("must be > 0, got {r_max}")));
        }
        if pi_s > 0.0 && !snapshot.is_some_and(CdfSnapshot::has_spatial) {
            return Err(Error::ZeroEvidence);
        }
        let snapshot = snapshot.filter(|s| !s.is_empty());
        Ok(Self {
            pi_s,
            lambda_t,
            r_max,
            snapshot,
        })
    }

    /// Prior-only query of a cold start.
    pub fn prior_only(r_max: f64) -> Result<Self> {
        Self::new(0.0, 1.0, r_max, None)
    }

    pub fn pi_s(&self) -> f64 {
        self.pi_s
    }

    pub fn lambda_t(&self) -> f64 {
        self.lambda_t
    }

    /// Top of the bisection domain: `max(R, largest archived score)`.
    pub fn upper_bound(&self) -> f64 {
        self.snapshot
            .and_then(CdfSnapshot::max_score)
            .map_or(self.r_max, |m| m.max(self.r_max))
    }

    /// `(1 - lambda)[pi_s F_S(r) + (1 - pi_s) F_T(r)] + lambda min(r / R, 1)`.
    ///
    /// With no archived scores the bracketed term is taken as zero.
    pub fn cdf(&self, r: f64) -> f64 {
        let prior = (r / self.r_max).clamp(0.0, 1.0);
        let Some(snap) = self.snapshot else {
            return self.lambda_t * prior;
        };
        let temporal = snap.temporal_cdf(r);
        let empirical = if self.pi_s > 0.0 {
            let spatial = snap
                .spatial_cdf(r)
                .expect("spatial CDF checked at construction");
            self.pi_s * spatial + (1.0 - self.pi_s) * temporal
        } else {
            temporal
        };
        (1.0 - self.lambda_t) * empirical + self.lambda_t * prior
    }
}

/// See [`MixtureQuery::cdf`].
pub fn mixture_cdf(q: &MixtureQuery<'_>, r: f64) -> f64 {
    q.cdf(r)
}

/// Smallest `q` in `[0, U]` with `F(q) >= 1 - alpha`, found by bisection.
///
/// The returned point always satisfies the inequality. If it fails even at
/// `U`, `U` itself is returned.
pub fn solve_quantile(q: &MixtureQuery<'_>, alpha: f64, opts: SolverOptions) -> f64 {
    let target = 1.0 - alpha;
    let upper = q.upper_bound();
    if q.cdf(0.0) >= target {
        return 0.0;
    }
    if q.cdf(upper) < target {
        return upper;
    }
    let (mut lo, mut hi) = (0.0, upper);
    let width = opts.tol * upper;
    for _ in 0..opts.max_iter {
        if hi - lo <= width {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if q.cdf(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}
