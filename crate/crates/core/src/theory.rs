//! Closed-form risk of the spatial/temporal mixture as a function of the
//! matching number `K`, and its minimizer.
//!
//! With spatial variance `V0 / D^S` and temporal squared bias `M^T`, the
//! pointwise MSE of the gated mixture is
//! `(D^S V0 + K^2 M^T) / (D^S + K)^2`, minimized at `K* = V0 / M^T`.

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskParams {
    /// Spatial evidence `D^S`.
    pub d_s: f64,
    /// Irreducible Bernoulli variance `V0`.
    pub v0: f64,
    /// Temporal squared structural bias `M^T`.
    pub m_t: f64,
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be > 0, got {v}")))
    }
}

impl RiskParams {
    pub fn new(d_s: f64, v0: f64, m_t: f64) -> Result<Self> {
        positive("d_s", d_s)?;
        positive("v0", v0)?;
        positive("m_t", m_t)?;
        Ok(Self { d_s, v0, m_t })
    }
}

pub fn mixture_mse(p: &RiskParams, k: f64) -> Result<f64> {
    positive("k", k)?;
    let RiskParams { d_s, v0, m_t } = *p;
    Ok((d_s * v0 + k * k * m_t) / ((d_s + k) * (d_s + k)))
}

pub fn optimal_k(v0: f64, m_t: f64) -> Result<f64> {
    positive("v0", v0)?;
    positive("m_t", m_t)?;
    Ok(v0 / m_t)
}
