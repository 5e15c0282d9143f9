//! Closed-form guarantees for the truncated detector.
//!
//! * concentration scale `μ = 2(l+1)‖φ‖/λ` from Doeblin constants `(l, λ)`,
//!   or the heuristic `μ = factor · M`;
//! * false-alarm lower bound `E∞[T(b)] ≥ (2√2/3)·exp(4δ(b−μ)/μ²)` for `b > μ`;
//! * delay quantity `n₀ = ⌊(b+μ)/I⌋` with `E₁[T(b)] ≤ 1 + n₀(1 + o(1))`;
//! * Hoeffding tail `2·exp(−2(nε − μ_f)²/(n μ_f²))` for `n > μ_f/ε`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_HEURISTIC_FACTOR: f64 = 2.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoeblinConstants {
    pub l: u32,
    pub lambda: f64,
}

impl DoeblinConstants {
    pub fn new(l: u32, lambda: f64) -> Result<Self> {
        let c = DoeblinConstants { l, lambda };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.l == 0 {
            return Err(Error::Usage("Doeblin constant l must be >= 1".into()));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::Usage(format!("Doeblin constant lambda must lie in (0, 1], got {}", self.lambda)));
        }
        Ok(())
    }
}

/// Inputs shared by the bound formulas. Field names follow the usual symbols.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundInputs {
    /// Pre-change drift magnitude, `−E∞[φ(s)]`.
    pub delta: f64,
    pub mu: f64,
    pub b: f64,
    /// Post-change drift `E₁[φ(s)]`.
    #[serde(rename = "I")]
    pub i: f64,
    /// Truncation level; when given, `delta ≤ M` and `I ≤ M` are enforced.
    #[serde(rename = "M", default)]
    pub m: Option<f64>,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Usage(format!("{name} must be positive and finite, got {v}")))
    }
}

impl BoundInputs {
    fn check_truncation(&self) -> Result<()> {
        if let Some(m) = self.m {
            positive("M", m)?;
            if self.delta > m || self.i > m {
                return Err(Error::Usage(format!(
                    "drifts of truncated increments cannot exceed M = {m} (delta = {}, I = {})",
                    self.delta, self.i
                )));
            }
        }
        Ok(())
    }
}

pub fn concentration_mu(norm_phi: f64, constants: &DoeblinConstants) -> Result<f64> {
    constants.validate()?;
    positive("norm_phi", norm_phi)?;
    Ok(2.0 * (constants.l as f64 + 1.0) * norm_phi / constants.lambda)
}

/// `factor · M`; the customary factor is [`DEFAULT_HEURISTIC_FACTOR`].
pub fn heuristic_mu(truncation_level: f64, factor: f64) -> Result<f64> {
    positive("truncation level", truncation_level)?;
    positive("heuristic factor", factor)?;
    Ok(factor * truncation_level)
}

/// Lower bound on the mean time to false alarm. Requires `b > μ` and `δ > 0`.
pub fn false_alarm_lower_bound(inputs: &BoundInputs) -> Result<f64> {
    positive("delta", inputs.delta)?;
    positive("mu", inputs.mu)?;
    positive("b", inputs.b)?;
    inputs.check_truncation()?;
    if inputs.b <= inputs.mu {
        return Err(Error::Domain(format!(
            "the false-alarm bound holds only for b > μ (got b = {}, μ = {})",
            inputs.b, inputs.mu
        )));
    }
    let exponent = 4.0 * inputs.delta * (inputs.b - inputs.mu) / (inputs.mu * inputs.mu);
    Ok(2.0 * std::f64::consts::SQRT_2 / 3.0 * exponent.exp())
}

/// Exponential growth rate of [`false_alarm_lower_bound`] in `b`: `4δ/μ²`.
pub fn false_alarm_rate(delta: f64, mu: f64) -> f64 {
    4.0 * delta / (mu * mu)
}

/// Delay quantities for the asymptotic bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DelayBound {
    pub n0: u64,
    /// Leading term `1 + n₀`; the true bound carries a `(1 + o(1))` factor on `n₀`.
    pub asymptotic_bound: f64,
}

pub fn delay_upper_bound(inputs: &BoundInputs) -> Result<DelayBound> {
    if !(inputs.i > 0.0 && inputs.i.is_finite()) {
        return Err(Error::Usage(format!(
            "post-change drift I must be positive for a finite delay bound, got {}",
            inputs.i
        )));
    }
    if !(inputs.b >= 0.0 && inputs.mu >= 0.0 && inputs.b.is_finite() && inputs.mu.is_finite()) {
        return Err(Error::Usage("b and mu must be finite and nonnegative".into()));
    }
    inputs.check_truncation()?;
    let n0 = ((inputs.b + inputs.mu) / inputs.i).floor() as u64;
    Ok(DelayBound {
        n0,
        asymptotic_bound: 1.0 + n0 as f64,
    })
}

/// Tail bound on `P(|S_n/n − E f| ≥ ε)` for a bounded function of a uniformly
/// ergodic chain. Requires `n > μ_f/ε`.
pub fn hoeffding_tail(n: u64, eps: f64, mu_f: f64) -> Result<f64> {
    positive("eps", eps)?;
    positive("mu_f", mu_f)?;
    if n == 0 {
        return Err(Error::Usage("n must be >= 1".into()));
    }
    let n_f = n as f64;
    if n_f <= mu_f / eps {
        return Err(Error::Domain(format!(
            "the tail bound holds only for n > μ_f/ε = {} (got n = {n})",
            mu_f / eps
        )));
    }
    let gap = n_f * eps - mu_f;
    Ok(2.0 * (-2.0 * gap * gap / (n_f * mu_f * mu_f)).exp())
}

/// `b,bound` rows of the false-alarm curve; thresholds with `b ≤ μ` are skipped.
pub fn false_alarm_curve(delta: f64, mu: f64, thresholds: &[f64]) -> Result<Vec<(f64, f64)>> {
    thresholds
        .iter()
        .filter(|&&b| b > mu)
        .map(|&b| {
            let bound = false_alarm_lower_bound(&BoundInputs {
                delta,
                mu,
                b,
                i: 1.0,
                m: None,
            })?;
            Ok((b, bound))
        })
        .collect()
}

pub fn write_bound_csv<W: Write>(out: W, rows: &[(f64, f64)]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["b", "bound"])?;
    for (b, bound) in rows {
        w.write_record([b.to_string(), bound.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
