//! Input pipelines: seeded synthetic regime streams, price CSV ingestion, and
//! construction of normalized lagged-return states.

use std::collections::VecDeque;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Error, Result};
use crate::spatial::OnlineMoments;
use crate::types::{Observation, SpatialState};

/// Minimum usable price rows: one warmup year plus an evaluation window.
pub const MIN_PRICE_ROWS: usize = 300;
pub const STATE_STD_FLOOR: f64 = 1e-8;

/// Mean and standard deviation of one Gaussian draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gauss {
    pub mean: f64,
    pub sd: f64,
}

impl Gauss {
    pub const fn new(mean: f64, sd: f64) -> Self {
        Self { mean, sd }
    }

    fn dist(self) -> Result<Normal<f64>> {
        Normal::new(self.mean, self.sd).map_err(|e| invalid("sd", e.to_string()))
    }
}

/// Feature and target distributions of one regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regime {
    pub x: Gauss,
    pub y: Gauss,
}

/// Stable regime interrupted by fixed-length shocks.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub total_steps: usize,
    pub shock_starts: Vec<usize>,
    pub shock_len: usize,
    pub seed: u64,
    pub normal: Regime,
    pub shock: Regime,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            total_steps: 900,
            shock_starts: vec![200, 450, 700],
            shock_len: 30,
            seed: 0,
            normal: Regime {
                x: Gauss::new(1.0, 0.1),
                y: Gauss::new(0.0, 0.5),
            },
            shock: Regime {
                x: Gauss::new(3.0, 0.1),
                y: Gauss::new(3.0, 0.5),
            },
        }
    }
}

impl SyntheticSpec {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_steps == 0 || self.shock_len == 0 {
            return Err(invalid("total_steps, shock_len", "must be positive"));
        }
        let mut starts = self.shock_starts.clone();
        starts.sort_unstable();
        for w in starts.windows(2) {
            if w[0] + self.shock_len > w[1] {
                return Err(Error::InvalidShocks(format!(
                    "windows starting at {} and {} overlap",
                    w[0], w[1]
                )));
            }
        }
        if let Some(&last) = starts.last() {
            if last + self.shock_len > self.total_steps {
                return Err(Error::InvalidShocks(format!(
                    "window starting at {last} runs past step {}",
                    self.total_steps
                )));
            }
        }
        for r in [self.normal, self.shock] {
            r.x.dist()?;
            r.y.dist()?;
        }
        Ok(())
    }

    pub fn is_shock(&self, t: usize) -> bool {
        self.shock_starts
            .iter()
            .any(|&s| t >= s && t < s + self.shock_len)
    }

    /// Index of the shock window containing `t`, in schedule order.
    pub fn shock_index(&self, t: usize) -> Option<usize> {
        self.shock_starts
            .iter()
            .position(|&s| t >= s && t < s + self.shock_len)
    }
}

/// Draw the stream. The single feature is the state itself.
pub fn synth_stream(spec: &SyntheticSpec) -> Result<Vec<Observation>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = (spec.normal.x.dist()?, spec.normal.y.dist()?);
    let shock = (spec.shock.x.dist()?, spec.shock.y.dist()?);
    Ok((0..spec.total_steps)
        .map(|t| {
            let (dx, dy) = if spec.is_shock(t) { &shock } else { &normal };
            let x = dx.sample(&mut rng);
            let y = dy.sample(&mut rng);
            Observation::with_features(t as u64, y, vec![x])
        })
        .collect())
}

/// Two-regime volatility switching observed through a noisy state.
///
/// A latent regime flips with probability `switch_prob` per step. The target
/// is `N(0, sd^2)` with `sd` either `low_sd` or `vol_ratio * low_sd`; each of
/// the `state_dim` features is the regime's level (0 or `level_gap`) plus
/// independent `N(0, noise_sd^2)` noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingVolSpec {
    pub total_steps: usize,
    pub seed: u64,
    pub low_sd: f64,
    pub vol_ratio: f64,
    pub switch_prob: f64,
    pub level_gap: f64,
    pub noise_sd: f64,
    pub state_dim: usize,
}

impl Default for SwitchingVolSpec {
    fn default() -> Self {
        Self {
            total_steps: 2000,
            seed: 0,
            low_sd: 1.0,
            vol_ratio: 3.0,
            switch_prob: 0.005,
            level_gap: 1.5,
            noise_sd: 0.5,
            state_dim: 1,
        }
    }
}

/// Returns the stream and the latent high-volatility flag of every step.
pub fn switching_vol_stream(spec: &SwitchingVolSpec) -> Result<(Vec<Observation>, Vec<bool>)> {
    if !(0.0..=1.0).contains(&spec.switch_prob) {
        return Err(invalid("switch_prob", "must lie in [0, 1]"));
    }
    if spec.state_dim == 0 {
        return Err(invalid("state_dim", "must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Gauss::new(0.0, spec.noise_sd).dist()?;
    let low = Gauss::new(0.0, spec.low_sd).dist()?;
    let high = Gauss::new(0.0, spec.low_sd * spec.vol_ratio).dist()?;
    let mut hot = false;
    let mut obs = Vec::with_capacity(spec.total_steps);
    let mut regimes = Vec::with_capacity(spec.total_steps);
    for t in 0..spec.total_steps {
        if rng.random::<f64>() < spec.switch_prob {
            hot = !hot;
        }
        let level = if hot { spec.level_gap } else { 0.0 };
        let x: Vec<f64> = (0..spec.state_dim)
            .map(|_| level + noise.sample(&mut rng))
            .collect();
        let y = if hot { high.sample(&mut rng) } else { low.sample(&mut rng) };
        obs.push(Observation::with_features(t as u64, y, x));
        regimes.push(hot);
    }
    Ok((obs, regimes))
}

/// Simulated daily closes whose percent log-returns follow a GARCH(1,1)
/// recursion modulated by a persistent two-state volatility regime.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSimSpec {
    pub days: usize,
    pub seed: u64,
    pub start: NaiveDate,
    pub start_price: f64,
    /// Unconditional daily return variance (percent squared) in the calm regime.
    pub base_variance: f64,
    pub arch: f64,
    pub garch: f64,
    /// Volatility multiplier of the turbulent regime.
    pub vol_ratio: f64,
    pub switch_prob: f64,
}

impl Default for PriceSimSpec {
    fn default() -> Self {
        Self {
            days: 2000,
            seed: 0,
            start: NaiveDate::from_ymd_opt(2015, 1, 2).expect("valid date"),
            start_price: 100.0,
            base_variance: 1.0,
            arch: 0.08,
            garch: 0.90,
            vol_ratio: 3.0,
            switch_prob: 0.01,
        }
    }
}

/// Business days (Monday to Friday) from `start`, inclusive.
fn business_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    use chrono::Datelike;
    start
        .iter_days()
        .filter(|d| d.weekday().number_from_monday() <= 5)
        .take(n)
        .collect()
}

pub fn simulate_prices(spec: &PriceSimSpec) -> Result<PriceTable> {
    if !(spec.arch >= 0.0 && spec.garch >= 0.0 && spec.arch + spec.garch < 1.0) {
        return Err(invalid("arch, garch", "must be non-negative with sum < 1"));
    }
    if !(spec.base_variance > 0.0 && spec.start_price > 0.0 && spec.vol_ratio > 0.0) {
        return Err(invalid("base_variance, start_price, vol_ratio", "must be > 0"));
    }
    if !(0.0..=1.0).contains(&spec.switch_prob) {
        return Err(invalid("switch_prob", "must lie in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let z = Gauss::new(0.0, 1.0).dist()?;
    let omega = spec.base_variance * (1.0 - spec.arch - spec.garch);
    let mut h = spec.base_variance;
    let mut hot = false;
    let mut price = spec.start_price;
    let mut closes = Vec::with_capacity(spec.days);
    closes.push(price);
    for _ in 1..spec.days {
        if rng.random::<f64>() < spec.switch_prob {
            hot = !hot;
        }
        let mult = if hot { spec.vol_ratio } else { 1.0 };
        let u = h.sqrt() * z.sample(&mut rng);
        h = omega + spec.arch * u * u + spec.garch * h;
        price *= (mult * u / 100.0).exp();
        closes.push(price);
    }
    Ok(PriceTable {
        dates: business_days(spec.start, spec.days),
        closes,
        dropped: 0,
    })
}

/// Cleaned daily closes in date order.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceTable {
    pub dates: Vec<NaiveDate>,
    pub closes: Vec<f64>,
    /// Rows dropped for a missing, non-numeric or non-positive close.
    pub dropped: usize,
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim().eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::Data(format!("missing column `{name}`")))
}

impl PriceTable {
    /// Parses `date,close` CSV (extra columns ignored), sorts by date, and
    /// rejects duplicate dates.
    pub fn read<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let (di, ci) = (column(&headers, "date")?, column(&headers, "close")?);
        let mut rows = Vec::new();
        let mut dropped = 0;
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let raw_date = rec.get(di).unwrap_or_default();
            let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d").map_err(|e| {
                Error::Data(format!("row {}: bad date `{raw_date}`: {e}", line + 2))
            })?;
            match rec.get(ci).and_then(|c| c.parse::<f64>().ok()) {
                Some(p) if p > 0.0 && p.is_finite() => rows.push((date, p)),
                _ => dropped += 1,
            }
        }
        rows.sort_by_key(|&(d, _)| d);
        if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::Data(format!("duplicate date {}", w[0].0)));
        }
        let (dates, closes) = rows.into_iter().unzip();
        Ok(Self {
            dates,
            closes,
            dropped,
        })
    }

    pub fn write<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["date", "close"])?;
        for (d, c) in self.dates.iter().zip(&self.closes) {
            w.write_record([d.format("%Y-%m-%d").to_string(), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.closes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.closes.is_empty()
    }
}

/// Percent log-returns `100 ln(P_t / P_{t-1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    pub asset: String,
    /// Date of each return (the later of its two prices).
    pub dates: Vec<NaiveDate>,
    pub returns: Vec<f64>,
}

impl ReturnSeries {
    pub fn from_prices(asset: impl Into<String>, prices: &PriceTable) -> Self {
        let returns = prices
            .closes
            .windows(2)
            .map(|w| 100.0 * (w[1] / w[0]).ln())
            .collect();
        Self {
            asset: asset.into(),
            dates: prices.dates.iter().skip(1).copied().collect(),
            returns,
        }
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    pub fn observations(&self) -> Vec<Observation> {
        self.returns
            .iter()
            .enumerate()
            .map(|(t, &r)| Observation::new(t as u64, r))
            .collect()
    }
}

/// Load a price CSV into percent log-returns; the asset id is the file stem.
pub fn load_prices(path: impl AsRef<Path>) -> Result<(ReturnSeries, PriceTable)> {
    let path = path.as_ref();
    let table = PriceTable::read(std::fs::File::open(path)?)?;
    if table.len() < MIN_PRICE_ROWS {
        return Err(Error::Data(format!(
            "{}: {} usable rows, need at least {MIN_PRICE_ROWS}",
            path.display(),
            table.len()
        )));
    }
    let asset = path
        .file_stem()
        .map_or_else(|| "asset".to_string(), |s| s.to_string_lossy().into_owned());
    Ok((ReturnSeries::from_prices(asset, &table), table))
}

/// Normalize the lag window `|r_{t-1}|, ..., |r_{t-d}|` (most recent first)
/// against the running moments of the `|r|` stream.
pub fn build_state(window: &[f64], d: usize, moments: &OnlineMoments) -> SpatialState {
    if window.len() < d {
        return SpatialState::cold(d);
    }
    let mean = moments.mean().first().copied().unwrap_or(0.0);
    let sd = moments.stddev(0).max(STATE_STD_FLOOR);
    SpatialState::new(window[..d].iter().map(|r| (r.abs() - mean) / sd).collect())
}

/// Rolling builder for lagged absolute-return states.
#[derive(Debug, Clone)]
pub struct StateBuilder {
    dim: usize,
    /// Most recent return first.
    window: VecDeque<f64>,
    moments: OnlineMoments,
}

impl StateBuilder {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            window: VecDeque::with_capacity(dim + 1),
            moments: OnlineMoments::new(1),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// State for the next step, from returns already pushed.
    pub fn current(&self) -> SpatialState {
        let window: Vec<f64> = self.window.iter().copied().collect();
        build_state(&window, self.dim, &self.moments)
    }

    pub fn push(&mut self, r: f64) -> Result<()> {
        self.moments.update(&[r.abs()])?;
        self.window.push_front(r);
        self.window.truncate(self.dim);
        Ok(())
    }
}
