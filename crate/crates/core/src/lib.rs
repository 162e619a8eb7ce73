//! Online conformal prediction with a state-adaptive gate between a
//! discounted temporal residual distribution and a kernel-density spatial
//! memory, plus ACI-family baselines, a GARCH(1,1) base model, interval
//! metrics and data pipelines.

pub mod baselines;
pub mod data;
pub mod error;
pub mod garch;
pub mod gate;
pub mod history;
pub mod metrics;
pub mod sabcp;
pub mod spatial;
pub mod stream;
pub mod temporal;
pub mod theory;
pub mod types;

pub use baselines::{Aci, AciConfig, Aggregation, ExpertEnsemble};
pub use data::{load_prices, synth_stream, PriceTable, ReturnSeries, StateBuilder, SyntheticSpec};
pub use error::{Error, Result};
pub use garch::{garch_init, GarchState};
pub use metrics::{aggregate, high_vol_mask, winkler, RunReport, StepRecord};
pub use sabcp::Sabcp;
pub use stream::{BaseModel, OnlineStream, StateSource};
pub use types::{
    validate_config, ConformalMethod, IntervalForecast, NonconformityScore, Observation,
    SabcpConfig, ScoreMode, SpatialState, StepInput,
};
