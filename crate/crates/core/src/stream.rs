//! The predict-then-update driver shared by every method: a base model
//! supplying `(center, scale)`, a state source, and input guards.

use crate::data::StateBuilder;
use crate::error::{Error, Result};
use crate::garch::GarchState;
use crate::types::{
    ConformalMethod, IntervalForecast, Observation, ScoreMode, SpatialState, StepInput,
};

/// Point forecast and volatility provider.
#[derive(Debug, Clone, PartialEq)]
pub enum BaseModel {
    /// Center 0, scale 1.
    ZeroMean,
    Garch(GarchState),
}

impl BaseModel {
    pub fn forecast(&self) -> (f64, f64) {
        match self {
            Self::ZeroMean => (0.0, 1.0),
            Self::Garch(g) => g.forecast(),
        }
    }

    fn update(&mut self, y: f64) {
        if let Self::Garch(g) = self {
            g.update(y);
        }
    }
}

/// Where the spatial state of each step comes from.
#[derive(Debug, Clone)]
pub enum StateSource {
    /// The observation's own features, which must be known before `y`.
    Features { dim: usize },
    /// Normalized absolute values of the preceding targets.
    LaggedAbsReturns(StateBuilder),
}

impl StateSource {
    pub fn lagged(dim: usize) -> Self {
        Self::LaggedAbsReturns(StateBuilder::new(dim))
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Features { dim } => *dim,
            Self::LaggedAbsReturns(b) => b.dim(),
        }
    }

    fn state(&self, obs: &Observation) -> Result<SpatialState> {
        match self {
            Self::Features { dim } => match &obs.features {
                None => Ok(SpatialState::cold(*dim)),
                Some(x) if x.len() != *dim => Err(Error::DimensionMismatch {
                    expected: *dim,
                    got: x.len(),
                }),
                Some(x) if x.iter().any(|v| !v.is_finite()) => Err(Error::NonFinite("feature")),
                Some(x) => Ok(SpatialState::new(x.clone())),
            },
            Self::LaggedAbsReturns(b) => Ok(b.current()),
        }
    }

    fn push(&mut self, y: f64) -> Result<()> {
        match self {
            Self::Features { .. } => Ok(()),
            Self::LaggedAbsReturns(b) => b.push(y),
        }
    }
}

/// One method driven step by step over a stream.
#[derive(Debug, Clone)]
pub struct OnlineStream<M> {
    method: M,
    base: BaseModel,
    states: StateSource,
    score_mode: ScoreMode,
    next_t: Option<u64>,
}

impl<M: ConformalMethod> OnlineStream<M> {
    pub fn new(method: M, base: BaseModel, states: StateSource, score_mode: ScoreMode) -> Self {
        Self {
            method,
            base,
            states,
            score_mode,
            next_t: None,
        }
    }

    pub fn method(&self) -> &M {
        &self.method
    }

    pub fn base(&self) -> &BaseModel {
        &self.base
    }

    /// The input the method would see for `obs`, computed without touching `y`.
    pub fn input(&self, obs: &Observation) -> Result<StepInput> {
        let (center, vol) = self.base.forecast();
        let scale = match self.score_mode {
            ScoreMode::Absolute => 1.0,
            ScoreMode::Scaled => vol,
        };
        Ok(StepInput {
            t: obs.t,
            center,
            scale,
            state: self.states.state(obs)?,
        })
    }

    /// Forecast step `obs.t`, then fold `obs.y` into every history.
    ///
    /// A rejected observation leaves the stream untouched.
    pub fn step(&mut self, obs: &Observation) -> Result<IntervalForecast> {
        if let Some(expected) = self.next_t {
            if obs.t != expected {
                return Err(Error::NonMonotoneStep {
                    expected,
                    got: obs.t,
                });
            }
        }
        if !obs.y.is_finite() {
            return Err(Error::NonFinite("y"));
        }
        let input = self.input(obs)?;
        let forecast = self.method.forecast(&input)?;
        input.score(obs.y)?;
        self.method.observe(&input, &forecast, obs.y)?;
        self.base.update(obs.y);
        self.states.push(obs.y)?;
        self.next_t = Some(obs.t + 1);
        Ok(forecast)
    }

    pub fn run(&mut self, obs: &[Observation]) -> Result<Vec<IntervalForecast>> {
        obs.iter().map(|o| self.step(o)).collect()
    }
}
