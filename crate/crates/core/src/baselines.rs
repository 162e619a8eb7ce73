//! Comparison methods: ACI, its expert aggregations AgACI and DtACI, and the
//! temporal-only BCP.
//!
//! All of them consume the same `(center, scale, y)` stream as SA-BCP and
//! work on the same score scale.

use std::collections::VecDeque;

use crate::error::{invalid, Result};
use crate::sabcp::Sabcp;
use crate::types::{ConformalMethod, IntervalForecast, SabcpConfig, StepInput};

pub const ALPHA_FLOOR: f64 = 1e-3;
pub const DEFAULT_WINDOW: usize = 250;
pub const DEFAULT_GAMMA: f64 = 0.01;
pub const GAMMA_GRID: [f64; 5] = [0.001, 0.005, 0.01, 0.05, 0.1];
pub const EXPECTED_HORIZON: f64 = 2500.0;

/// Exponential-weights learning rate `sqrt(8 ln(n) / T)`.
pub fn default_eta(n_experts: usize) -> f64 {
    (8.0 * (n_experts.max(2) as f64).ln() / EXPECTED_HORIZON).sqrt()
}

/// The temporal-only discounted baseline.
pub fn bcp(cfg: SabcpConfig) -> Result<Sabcp> {
    Sabcp::bcp(cfg)
}

/// Pinball loss at level `tau` of predicting `q` for the realized `e`.
pub fn pinball(tau: f64, q: f64, e: f64) -> f64 {
    let d = e - q;
    if d >= 0.0 {
        tau * d
    } else {
        (tau - 1.0) * d
    }
}

/// Sliding calibration window of recent scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreWindow {
    scores: VecDeque<f64>,
    sorted: Vec<f64>,
    cap: usize,
}

impl ScoreWindow {
    pub fn new(cap: usize) -> Self {
        Self {
            scores: VecDeque::with_capacity(cap),
            sorted: Vec::with_capacity(cap),
            cap,
        }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn push(&mut self, e: f64) {
        let pos = self.sorted.partition_point(|&s| s < e);
        self.sorted.insert(pos, e);
        self.scores.push_back(e);
        if self.scores.len() > self.cap {
            let old = self.scores.pop_front().expect("non-empty");
            let pos = self.sorted.partition_point(|&s| s < old);
            self.sorted.remove(pos);
        }
    }

    pub fn max(&self) -> Option<f64> {
        self.sorted.last().copied()
    }

    /// Higher-interpolation empirical quantile: the smallest element whose
    /// rank is at least `ceil(level * n)`.
    pub fn quantile(&self, level: f64) -> Option<f64> {
        let n = self.sorted.len();
        if n == 0 {
            return None;
        }
        let rank = ((level * n as f64).ceil() as usize).clamp(1, n);
        Some(self.sorted[rank - 1])
    }
}

/// One ACI recursion `alpha_t <- clamp(alpha_t + gamma (alpha - err_t))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AciExpert {
    pub alpha_t: f64,
    pub gamma: f64,
}

impl AciExpert {
    pub fn new(alpha: f64, gamma: f64) -> Self {
        Self {
            alpha_t: alpha,
            gamma,
        }
    }

    pub fn update(&mut self, alpha: f64, missed: bool) {
        let err = if missed { 1.0 } else { 0.0 };
        self.alpha_t = (self.alpha_t + self.gamma * (alpha - err)).clamp(ALPHA_FLOOR, 1.0 - ALPHA_FLOOR);
    }
}

/// Settings shared by the ACI family.
#[derive(Debug, Clone, PartialEq)]
pub struct AciConfig {
    pub alpha: f64,
    pub window: usize,
    /// Margin used while the calibration window is empty.
    pub r_max: f64,
}

impl AciConfig {
    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid("alpha", format!("must lie in (0, 1), got {}", self.alpha)));
        }
        if self.window == 0 {
            return Err(invalid("window", "must be positive"));
        }
        if !(self.r_max > 0.0) {
            return Err(invalid("r_max", format!("must be > 0, got {}", self.r_max)));
        }
        Ok(())
    }

    /// Margin read at level `1 - alpha_t`, or the conservative bound when the
    /// window is empty.
    fn margin(&self, window: &ScoreWindow, alpha_t: f64) -> f64 {
        window
            .quantile(1.0 - alpha_t)
            .unwrap_or_else(|| window.max().map_or(self.r_max, |m| m.max(self.r_max)))
    }
}

/// Adaptive conformal inference with a single step size.
#[derive(Debug, Clone)]
pub struct Aci {
    cfg: AciConfig,
    expert: AciExpert,
    window: ScoreWindow,
}

impl Aci {
    pub fn new(cfg: AciConfig, gamma: f64) -> Result<Self> {
        cfg.validate()?;
        if !(gamma > 0.0) {
            return Err(invalid("gamma", format!("must be > 0, got {gamma}")));
        }
        Ok(Self {
            expert: AciExpert::new(cfg.alpha, gamma),
            window: ScoreWindow::new(cfg.window),
            cfg,
        })
    }

    pub fn alpha_t(&self) -> f64 {
        self.expert.alpha_t
    }

    pub fn window(&self) -> &ScoreWindow {
        &self.window
    }
}

impl ConformalMethod for Aci {
    fn name(&self) -> &str {
        "aci"
    }

    fn forecast(&self, input: &StepInput) -> Result<IntervalForecast> {
        let q = self.cfg.margin(&self.window, self.expert.alpha_t);
        Ok(IntervalForecast::symmetric(input.center, input.scale, q))
    }

    fn observe(&mut self, input: &StepInput, forecast: &IntervalForecast, y: f64) -> Result<()> {
        let e = input.score(y)?.value();
        self.expert.update(self.cfg.alpha, e > forecast.quantile);
        self.window.push(e);
        Ok(())
    }
}

/// What an expert ensemble aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    /// Weighted mean of expert margins (AgACI).
    Margin,
    /// Weighted mean of expert `alpha_t`, read once from the window (DtACI).
    Alpha,
}

/// ACI experts over a step-size grid, combined by exponential weights on the
/// pinball loss at level `1 - alpha`.
#[derive(Debug, Clone)]
pub struct ExpertEnsemble {
    cfg: AciConfig,
    experts: Vec<AciExpert>,
    weights: Vec<f64>,
    eta: f64,
    window: ScoreWindow,
    mode: Aggregation,
}

impl ExpertEnsemble {
    pub fn new(cfg: AciConfig, gammas: &[f64], eta: f64, mode: Aggregation) -> Result<Self> {
        cfg.validate()?;
        if gammas.is_empty() {
            return Err(invalid("gammas", "at least one expert is required"));
        }
        if gammas.iter().any(|&g| !(g > 0.0)) {
            return Err(invalid("gammas", "step sizes must be positive"));
        }
        if !(eta > 0.0) {
            return Err(invalid("eta", format!("must be > 0, got {eta}")));
        }
        let n = gammas.len();
        Ok(Self {
            experts: gammas.iter().map(|&g| AciExpert::new(cfg.alpha, g)).collect(),
            weights: vec![1.0 / n as f64; n],
            eta,
            window: ScoreWindow::new(cfg.window),
            cfg,
            mode,
        })
    }

    /// AgACI on the default grid.
    pub fn agaci(cfg: AciConfig) -> Result<Self> {
        Self::new(cfg, &GAMMA_GRID, default_eta(GAMMA_GRID.len()), Aggregation::Margin)
    }

    /// DtACI on the default grid.
    pub fn dtaci(cfg: AciConfig) -> Result<Self> {
        Self::new(cfg, &GAMMA_GRID, default_eta(GAMMA_GRID.len()), Aggregation::Alpha)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn experts(&self) -> &[AciExpert] {
        &self.experts
    }

    fn expert_margins(&self) -> Vec<f64> {
        self.experts
            .iter()
            .map(|x| self.cfg.margin(&self.window, x.alpha_t))
            .collect()
    }

    fn weighted(&self, values: impl Iterator<Item = f64>) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// The aggregated score-scale margin.
    pub fn margin(&self) -> f64 {
        match self.mode {
            Aggregation::Margin => self.weighted(self.expert_margins().into_iter()),
            Aggregation::Alpha => {
                let alpha = self.weighted(self.experts.iter().map(|x| x.alpha_t));
                self.cfg.margin(&self.window, alpha)
            }
        }
    }

    fn reweight(&mut self, losses: &[f64]) {
        for (w, l) in self.weights.iter_mut().zip(losses) {
            *w *= (-self.eta * l).exp();
        }
        let total: f64 = self.weights.iter().sum();
        if total > 0.0 && total.is_finite() {
            self.weights.iter_mut().for_each(|w| *w /= total);
        } else {
            let n = self.weights.len() as f64;
            self.weights.iter_mut().for_each(|w| *w = 1.0 / n);
        }
    }
}

impl ConformalMethod for ExpertEnsemble {
    fn name(&self) -> &str {
        match self.mode {
            Aggregation::Margin => "agaci",
            Aggregation::Alpha => "dtaci",
        }
    }

    fn forecast(&self, input: &StepInput) -> Result<IntervalForecast> {
        Ok(IntervalForecast::symmetric(input.center, input.scale, self.margin()))
    }

    fn observe(&mut self, input: &StepInput, _forecast: &IntervalForecast, y: f64) -> Result<()> {
        let e = input.score(y)?.value();
        let tau = 1.0 - self.cfg.alpha;
        let margins = self.expert_margins();
        let losses: Vec<f64> = margins.iter().map(|&m| pinball(tau, m, e)).collect();
        self.reweight(&losses);
        let alpha = self.cfg.alpha;
        for (x, &m) in self.experts.iter_mut().zip(&margins) {
            x.update(alpha, e > m);
        }
        self.window.push(e);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::SpatialState;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn cfg(alpha: f64) -> AciConfig {
        AciConfig {
            alpha,
            window: DEFAULT_WINDOW,
            r_max: 10.0,
        }
    }

    fn input(t: u64) -> StepInput {
        StepInput {
            t,
            center: 0.0,
            scale: 1.0,
            state: SpatialState::new(vec![0.0]),
        }
    }

    fn step<M: ConformalMethod>(m: &mut M, t: u64, y: f64) -> IntervalForecast {
        let x = input(t);
        let f = m.forecast(&x).unwrap();
        m.observe(&x, &f, y).unwrap();
        f
    }

    #[test]
    fn alpha_recursion() {
        let mut aci = Aci::new(cfg(0.1), 0.01).unwrap();
        for t in 0..5 {
            step(&mut aci, t, 0.5);
        }
        let before = aci.alpha_t();
        // Covered: margin is at least the window max.
        step(&mut aci, 5, 0.5);
        assert!((aci.alpha_t() - (before + 0.01 * 0.1)).abs() < 1e-15);
        let before = aci.alpha_t();
        step(&mut aci, 6, 100.0);
        assert!((aci.alpha_t() - (before - 0.01 * 0.9)).abs() < 1e-15);
    }

    #[test]
    fn clamps_alpha() {
        let mut x = AciExpert::new(0.1, 1.0);
        x.update(0.1, true);
        assert_eq!(x.alpha_t, ALPHA_FLOOR);
        for _ in 0..20 {
            x.update(0.1, false);
        }
        assert_eq!(x.alpha_t, 1.0 - ALPHA_FLOOR);
    }

    #[test]
    fn higher_interpolation_quantile() {
        let mut w = ScoreWindow::new(250);
        for i in 1..=100 {
            w.push(i as f64);
        }
        assert_eq!(w.quantile(0.9), Some(90.0));
        assert_eq!(w.quantile(0.901), Some(91.0));
        assert_eq!(w.quantile(0.0), Some(1.0));
        assert_eq!(w.quantile(1.0), Some(100.0));
    }

    #[test]
    fn window_truncates() {
        let mut w = ScoreWindow::new(3);
        for e in [5.0, 1.0, 2.0, 3.0] {
            w.push(e);
        }
        assert_eq!(w.len(), 3);
        assert_eq!(w.max(), Some(3.0));
    }

    #[test]
    fn empty_window_uses_conservative_bound() {
        let aci = Aci::new(cfg(0.1), 0.01).unwrap();
        assert_eq!(aci.forecast(&input(0)).unwrap().margin, 10.0);
    }

    #[test]
    fn uniform_initial_weights() {
        let e = ExpertEnsemble::agaci(cfg(0.1)).unwrap();
        assert_eq!(e.weights(), &[0.2; 5]);
    }

    fn stream(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(0.0, 1.0).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    #[test]
    fn single_expert_ensembles_equal_aci_bit_for_bit() {
        let ys = stream(3, 1500);
        let mut aci = Aci::new(cfg(0.1), 0.01).unwrap();
        let eta = default_eta(5);
        let mut ag = ExpertEnsemble::new(cfg(0.1), &[0.01], eta, Aggregation::Margin).unwrap();
        let mut dt = ExpertEnsemble::new(cfg(0.1), &[0.01], eta, Aggregation::Alpha).unwrap();
        for (t, &y) in ys.iter().enumerate() {
            let a = step(&mut aci, t as u64, y);
            let b = step(&mut ag, t as u64, y);
            let c = step(&mut dt, t as u64, y);
            assert_eq!(a, b);
            assert_eq!(a, c);
        }
    }

    #[test]
    fn identical_experts_match_single_aci() {
        let ys = stream(4, 800);
        let mut aci = Aci::new(cfg(0.2), 0.05).unwrap();
        let mut ag = ExpertEnsemble::new(cfg(0.2), &[0.05; 4], 0.3, Aggregation::Margin).unwrap();
        let mut dt = ExpertEnsemble::new(cfg(0.2), &[0.05; 4], 0.3, Aggregation::Alpha).unwrap();
        for (t, &y) in ys.iter().enumerate() {
            let a = step(&mut aci, t as u64, y);
            let b = step(&mut ag, t as u64, y);
            let c = step(&mut dt, t as u64, y);
            assert!((a.margin - b.margin).abs() <= 1e-12 * a.margin.max(1.0));
            assert!((a.margin - c.margin).abs() <= 1e-12 * a.margin.max(1.0));
        }
    }

    #[test]
    fn exponential_weights_ratio() {
        // Two experts with fixed margins: pre-fill the window so both read
        // deterministic quantiles, then check one update.
        let mut e = ExpertEnsemble::new(cfg(0.1), &[0.001, 0.1], 0.5, Aggregation::Alpha).unwrap();
        for i in 1..=100 {
            e.window.push(i as f64);
        }
        e.experts[1].alpha_t = 0.5;
        let margins = e.expert_margins();
        assert_eq!(margins, vec![90.0, 50.0]);
        let x = input(0);
        let f = e.forecast(&x).unwrap();
        e.observe(&x, &f, 90.0).unwrap();
        let l1 = pinball(0.9, 90.0, 90.0);
        let l2 = pinball(0.9, 50.0, 90.0);
        assert_eq!(l1, 0.0);
        let ratio = e.weights()[0] / e.weights()[1];
        assert!((ratio - (0.5 * l2).exp()).abs() <= 1e-12 * ratio);
        assert!((e.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_loss_expert_takes_over() {
        let mut e = ExpertEnsemble::new(cfg(0.1), &[0.01, 0.01], 0.2, Aggregation::Margin).unwrap();
        let mut prev = 0.5;
        for _ in 0..50 {
            // Expert 0 loss 0, expert 1 loss 1 each round.
            e.reweight(&[0.0, 1.0]);
            assert!(e.weights()[0] > prev);
            prev = e.weights()[0];
            let ratio = e.weights()[1] / e.weights()[0];
            assert!(ratio > 0.0);
        }
        assert!((e.weights()[1] / e.weights()[0] - (-0.2f64 * 50.0).exp()).abs() < 1e-12);
    }

    #[test]
    fn simplex_is_preserved() {
        let ys = stream(9, 2000);
        let mut ag = ExpertEnsemble::agaci(cfg(0.1)).unwrap();
        let mut dt = ExpertEnsemble::dtaci(cfg(0.1)).unwrap();
        for (t, &y) in ys.iter().enumerate() {
            step(&mut ag, t as u64, 3.0 * y);
            step(&mut dt, t as u64, 3.0 * y);
            for w in [ag.weights(), dt.weights()] {
                assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                assert!(w.iter().all(|&v| v > 0.0));
            }
        }
    }

    #[test]
    fn aci_long_run_coverage() {
        for seed in 0..5 {
            for alpha in [0.1, 0.2, 0.3] {
                let ys = stream(100 + seed, 5000);
                let mut aci = Aci::new(cfg(alpha), 0.01).unwrap();
                let misses = ys
                    .iter()
                    .enumerate()
                    .filter(|(t, &y)| !step(&mut aci, *t as u64, y).covers(y))
                    .count();
                let rate = misses as f64 / 5000.0;
                assert!((rate - alpha).abs() <= 0.03, "seed {seed} alpha {alpha}: {rate}");
            }
        }
    }

    #[test]
    fn pinball_loss() {
        assert_eq!(pinball(0.9, 1.0, 2.0), 0.9);
        assert!((pinball(0.9, 2.0, 1.0) - 0.1).abs() < 1e-15);
        assert_eq!(pinball(0.9, 1.0, 1.0), 0.0);
    }
}
