//! The SA-BCP engine and its temporal-only specialization, BCP.

use crate::error::Result;
use crate::gate::{prior_weight, solve_quantile, spatial_proportion, MixtureQuery, SolverOptions};
use crate::history::ResidualHistory;
use crate::types::{
    validate_config, ConformalMethod, IntervalForecast, SabcpConfig, SpatialState, StepInput,
};

/// Diagnostics of one quantile solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assessment {
    pub quantile: f64,
    pub pi_s: f64,
    pub d_s: f64,
    pub lambda_t: f64,
}

/// State-adaptive Bayesian conformal predictor.
///
/// With the gate disabled ([`Sabcp::bcp`]) the spatial proportion is held at
/// zero and the engine is the discounted temporal baseline.
#[derive(Debug, Clone)]
pub struct Sabcp {
    cfg: SabcpConfig,
    history: ResidualHistory,
    /// Number of ingested observations; `t` of the next forecast.
    ingested: u64,
    spatial: bool,
}

impl Sabcp {
    pub fn new(cfg: SabcpConfig) -> Result<Self> {
        Self::build(cfg, true)
    }

    /// The temporal-only baseline sharing this engine's prior and solver.
    pub fn bcp(cfg: SabcpConfig) -> Result<Self> {
        Self::build(cfg, false)
    }

    fn build(cfg: SabcpConfig, spatial: bool) -> Result<Self> {
        let cfg = validate_config(cfg)?;
        Ok(Self {
            history: ResidualHistory::new(cfg.state_dim, cfg.beta, cfg.history_cap),
            cfg,
            ingested: 0,
            spatial,
        })
    }

    pub fn config(&self) -> &SabcpConfig {
        &self.cfg
    }

    pub fn history(&self) -> &ResidualHistory {
        &self.history
    }

    pub fn ingested(&self) -> u64 {
        self.ingested
    }

    pub fn is_spatial(&self) -> bool {
        self.spatial
    }

    fn solver(&self) -> SolverOptions {
        SolverOptions {
            tol: self.cfg.solver_tol,
            max_iter: self.cfg.solver_max_iter,
        }
    }

    /// Solve for the quantile at `state` without touching the archive.
    pub fn assess(&self, state: &SpatialState) -> Result<Assessment> {
        let lambda_t = prior_weight(self.ingested);
        if self.history.is_empty() {
            let q = MixtureQuery::prior_only(self.cfg.r_max)?;
            return Ok(Assessment {
                quantile: solve_quantile(&q, self.cfg.alpha, self.solver()),
                pi_s: 0.0,
                d_s: 0.0,
                lambda_t,
            });
        }
        let h = if self.spatial && !state.cold {
            self.history.bandwidth(self.cfg.bandwidth_floor)
        } else {
            None
        };
        let snap = self
            .history
            .snapshot(h.as_deref().map(|h| (state.values.as_slice(), h)))?;
        let d_s = snap.evidence();
        let pi_s = if snap.has_spatial() {
            spatial_proportion(d_s, self.cfg.k)?
        } else {
            0.0
        };
        let q = MixtureQuery::new(pi_s, lambda_t, self.cfg.r_max, Some(&snap))?;
        Ok(Assessment {
            quantile: solve_quantile(&q, self.cfg.alpha, self.solver()),
            pi_s,
            d_s,
            lambda_t,
        })
    }

    /// Archive the score observed at `state`.
    pub fn ingest(&mut self, score: f64, state: &SpatialState) -> Result<()> {
        let s = (!state.cold).then_some(state.values.as_slice());
        self.history.push(score, s)?;
        self.ingested += 1;
        Ok(())
    }
}

impl ConformalMethod for Sabcp {
    fn name(&self) -> &str {
        if self.spatial {
            "sabcp"
        } else {
            "bcp"
        }
    }

    fn forecast(&self, input: &StepInput) -> Result<IntervalForecast> {
        let a = self.assess(&input.state)?;
        let mut f = IntervalForecast::symmetric(input.center, input.scale, a.quantile);
        f.pi_s = a.pi_s;
        f.d_s = a.d_s;
        f.lambda_t = a.lambda_t;
        Ok(f)
    }

    fn observe(&mut self, input: &StepInput, _forecast: &IntervalForecast, y: f64) -> Result<()> {
        let e = input.score(y)?;
        self.ingest(e.value(), &input.state)
    }
}
