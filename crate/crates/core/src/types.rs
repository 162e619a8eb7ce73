//! Shared domain types, configuration and the predict-then-update contract
//! implemented by every conformal method.

use crate::error::{ConfigReport, Error, Result, Violation};

/// One time step of raw input entering a stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub t: u64,
    pub y: f64,
    /// Exogenous features known before `y` is revealed.
    pub features: Option<Vec<f64>>,
}

impl Observation {
    pub fn new(t: u64, y: f64) -> Self {
        Self {
            t,
            y,
            features: None,
        }
    }

    pub fn with_features(t: u64, y: f64, features: Vec<f64>) -> Self {
        Self {
            t,
            y,
            features: Some(features),
        }
    }
}

/// Normalized state vector summarizing the recent trajectory.
///
/// A `cold` state is emitted while the lag window is still filling; the gate
/// treats it as carrying no spatial evidence and it never enters the archive.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialState {
    pub values: Vec<f64>,
    pub cold: bool,
}

impl SpatialState {
    pub fn new(values: Vec<f64>) -> Self {
        Self {
            values,
            cold: false,
        }
    }

    pub fn cold(dim: usize) -> Self {
        Self {
            values: vec![0.0; dim],
            cold: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// A symmetric prediction interval with the diagnostics that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalForecast {
    /// Base model point forecast.
    pub center: f64,
    /// Half-width in target units (`quantile * scale`).
    pub margin: f64,
    pub lower: f64,
    pub upper: f64,
    /// The solved quantile in score units.
    pub quantile: f64,
    /// Spatial proportion of the gate. Zero for methods without spatial memory.
    pub pi_s: f64,
    /// Total spatial evidence behind `pi_s`.
    pub d_s: f64,
    /// Weight of the uniform prior. ACI-family methods have no prior and report 1.
    pub lambda_t: f64,
}

impl IntervalForecast {
    pub fn symmetric(center: f64, scale: f64, quantile: f64) -> Self {
        let margin = quantile * scale;
        Self {
            center,
            margin,
            lower: center - margin,
            upper: center + margin,
            quantile,
            pi_s: 0.0,
            d_s: 0.0,
            lambda_t: 1.0,
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Closed-interval membership.
    pub fn covers(&self, y: f64) -> bool {
        self.lower <= y && y <= self.upper
    }
}

/// How residuals are turned into nonconformity scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreMode {
    /// `|y - center|`.
    Absolute,
    /// `|y - center| / scale`, with `scale` the base model's conditional volatility.
    #[default]
    Scaled,
}

impl std::str::FromStr for ScoreMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "absolute" => Ok(Self::Absolute),
            "scaled" => Ok(Self::Scaled),
            other => Err(crate::error::invalid(
                "score_mode",
                format!("expected `absolute` or `scaled`, got `{other}`"),
            )),
        }
    }
}

impl std::fmt::Display for ScoreMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Absolute => "absolute",
            Self::Scaled => "scaled",
        })
    }
}

/// Nonconformity score `E_t`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct NonconformityScore(f64);

impl NonconformityScore {
    pub fn new(y: f64, center: f64, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(crate::error::invalid("scale", format!("must be > 0, got {scale}")));
        }
        let e = (y - center).abs() / scale;
        if !e.is_finite() {
            return Err(Error::NonFinite("score"));
        }
        Ok(Self(e))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Configuration of the SA-BCP engine (and of BCP, which ignores `k`).
#[derive(Debug, Clone, PartialEq)]
pub struct SabcpConfig {
    /// Target miscoverage.
    pub alpha: f64,
    /// Temporal discount.
    pub beta: f64,
    /// Target matching number: the evidence level at which the gate is at 1/2.
    pub k: f64,
    /// Upper end of the uniform score prior.
    pub r_max: f64,
    pub state_dim: usize,
    /// Drop the oldest residuals beyond this many.
    pub history_cap: Option<usize>,
    pub score_mode: ScoreMode,
    pub bandwidth_floor: f64,
    pub solver_tol: f64,
    pub solver_max_iter: usize,
}

impl Default for SabcpConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            beta: 0.99,
            k: 10.0,
            r_max: 10.0,
            state_dim: 1,
            history_cap: None,
            score_mode: ScoreMode::Scaled,
            bandwidth_floor: 1e-8,
            solver_tol: 1e-9,
            solver_max_iter: 200,
        }
    }
}

impl SabcpConfig {
    pub fn validate(self) -> Result<Self> {
        validate_config(self)
    }
}

fn open_unit(v: f64) -> bool {
    v > 0.0 && v < 1.0
}

fn positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

/// Returns the configuration unchanged iff every field is in range; otherwise
/// the error lists every violated field.
pub fn validate_config(cfg: SabcpConfig) -> Result<SabcpConfig> {
    let mut bad = Vec::new();
    let mut check = |ok: bool, field: &'static str, message: String| {
        if !ok {
            bad.push(Violation { field, message });
        }
    };
    check(
        open_unit(cfg.alpha),
        "alpha",
        format!("must lie in (0, 1), got {}", cfg.alpha),
    );
    check(
        open_unit(cfg.beta),
        "beta",
        format!("must lie in (0, 1), got {}", cfg.beta),
    );
    check(positive(cfg.k), "k", format!("must be > 0, got {}", cfg.k));
    check(
        positive(cfg.r_max),
        "r_max",
        format!("must be > 0, got {}", cfg.r_max),
    );
    check(cfg.state_dim > 0, "state_dim", "must be positive".into());
    check(
        cfg.history_cap != Some(0),
        "history_cap",
        "must be positive when set".into(),
    );
    check(
        positive(cfg.bandwidth_floor),
        "bandwidth_floor",
        format!("must be > 0, got {}", cfg.bandwidth_floor),
    );
    check(
        positive(cfg.solver_tol),
        "solver_tol",
        format!("must be > 0, got {}", cfg.solver_tol),
    );
    check(
        cfg.solver_max_iter > 0,
        "solver_max_iter",
        "must be positive".into(),
    );
    if bad.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::InvalidConfig(ConfigReport(bad)))
    }
}

/// Everything a method may see when forming the forecast for step `t`.
///
/// `scale` is already resolved against the score mode (1 in absolute mode).
#[derive(Debug, Clone, PartialEq)]
pub struct StepInput {
    pub t: u64,
    pub center: f64,
    pub scale: f64,
    pub state: SpatialState,
}

impl StepInput {
    pub fn score(&self, y: f64) -> Result<NonconformityScore> {
        NonconformityScore::new(y, self.center, self.scale)
    }
}

/// A conformal wrapper driven by the predict-then-update protocol.
///
/// `forecast` takes `&self`, so it cannot observe the target it is about to be
/// scored on; `observe` then folds the revealed target into the method's state.
pub trait ConformalMethod: Send {
    fn name(&self) -> &str;

    fn forecast(&self, input: &StepInput) -> Result<IntervalForecast>;

    fn observe(&mut self, input: &StepInput, forecast: &IntervalForecast, y: f64) -> Result<()>;
}

impl<M: ConformalMethod + ?Sized> ConformalMethod for Box<M> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn forecast(&self, input: &StepInput) -> Result<IntervalForecast> {
        (**self).forecast(input)
    }

    fn observe(&mut self, input: &StepInput, forecast: &IntervalForecast, y: f64) -> Result<()> {
        (**self).observe(input, forecast, y)
    }
}
