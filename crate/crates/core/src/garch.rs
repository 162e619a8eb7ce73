//! Fast online GARCH(1,1) base model: zero conditional mean, fixed
//! coefficients, variance targeted on a warmup window.

use crate::error::{invalid, Error, Result};

pub const MIN_WARMUP: usize = 30;
pub const VARIANCE_FLOOR: f64 = 1e-12;
pub const DEFAULT_ARCH: f64 = 0.05;
pub const DEFAULT_GARCH: f64 = 0.90;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GarchState {
    pub omega: f64,
    /// ARCH coefficient.
    pub a: f64,
    /// GARCH coefficient.
    pub b: f64,
    /// Conditional variance for the next return.
    pub sigma2: f64,
}

impl GarchState {
    pub fn new(omega: f64, a: f64, b: f64, sigma2: f64) -> Result<Self> {
        check_coefficients(a, b)?;
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(invalid("omega", format!("must be > 0, got {omega}")));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(invalid("sigma2", format!("must be > 0, got {sigma2}")));
        }
        Ok(Self { omega, a, b, sigma2 })
    }

    /// Point forecast and conditional volatility for the next return.
    pub fn forecast(&self) -> (f64, f64) {
        (0.0, self.sigma2.sqrt())
    }

    /// `sigma2 <- omega + a r^2 + b sigma2`, floored.
    pub fn update(&mut self, r: f64) {
        let next = self.omega + self.a * r * r + self.b * self.sigma2;
        self.sigma2 = if next.is_finite() {
            next.max(VARIANCE_FLOOR)
        } else {
            f64::MAX
        };
    }

    /// Emit `(center, scale)` from the current state, then fold `r` in.
    pub fn step(&mut self, r: f64) -> (f64, f64) {
        let out = self.forecast();
        self.update(r);
        out
    }

    /// Fixed point of the recursion under zero shocks.
    pub fn zero_shock_limit(&self) -> f64 {
        self.omega / (1.0 - self.b)
    }

    /// Unconditional variance `omega / (1 - a - b)`.
    pub fn long_run_variance(&self) -> f64 {
        self.omega / (1.0 - self.a - self.b)
    }
}

fn check_coefficients(a: f64, b: f64) -> Result<()> {
    if !(a >= 0.0 && b >= 0.0) {
        return Err(invalid("a, b", format!("must be non-negative, got ({a}, {b})")));
    }
    if !(a + b < 1.0) {
        return Err(invalid(
            "a + b",
            format!("must be < 1 for stationarity, got {}", a + b),
        ));
    }
    Ok(())
}

/// Variance targeting: `omega = v (1 - a - b)`, `sigma2 = v`, with `v` the
/// sample variance of the warmup returns.
pub fn garch_init(warmup: &[f64], a: f64, b: f64) -> Result<GarchState> {
    check_coefficients(a, b)?;
    if warmup.len() < MIN_WARMUP {
        return Err(Error::WarmupTooShort {
            got: warmup.len(),
            need: MIN_WARMUP,
        });
    }
    if warmup.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite("warmup return"));
    }
    let n = warmup.len() as f64;
    let mean = warmup.iter().sum::<f64>() / n;
    let var = warmup.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1.0);
    if !(var > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    GarchState::new(var * (1.0 - a - b), a, b, var)
}
