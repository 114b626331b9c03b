//! Prior elicitation: Beta hyperparameters from an expert's plausible range,
//! and stick-breaking weight construction.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::model::BetaPrior;

/// An elicited plausible range for a rate, read as two quantiles of a Beta.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElicitedRange {
    pub low: f64,
    pub high: f64,
    #[serde(default = "default_quantile_low")]
    pub quantile_low: f64,
    #[serde(default = "default_quantile_high")]
    pub quantile_high: f64,
}

fn default_quantile_low() -> f64 {
    0.025
}

fn default_quantile_high() -> f64 {
    0.975
}

impl ElicitedRange {
    /// Range matched to the 2.5% and 97.5% quantiles.
    pub fn new(low: f64, high: f64) -> Result<Self> {
        Self::with_quantiles(low, high, default_quantile_low(), default_quantile_high())
    }

    pub fn with_quantiles(low: f64, high: f64, quantile_low: f64, quantile_high: f64) -> Result<Self> {
        let r = ElicitedRange {
            low,
            high,
            quantile_low,
            quantile_high,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.low && self.low < self.high && self.high < 1.0) {
            return Err(Error::Argument(format!(
                "elicited range needs 0 < low < high < 1, got ({}, {})",
                self.low, self.high
            )));
        }
        if !(0.0 < self.quantile_low && self.quantile_low < self.quantile_high && self.quantile_high < 1.0) {
            return Err(Error::Argument(format!(
                "quantile levels need 0 < q_low < q_high < 1, got ({}, {})",
                self.quantile_low, self.quantile_high
            )));
        }
        Ok(())
    }

    /// Shorthand for [`beta_from_quantiles`].
    pub fn to_beta(&self) -> Result<BetaPrior> {
        beta_from_quantiles(self)
    }
}

const QUANTILE_TOL: f64 = 1e-8;
const NEWTON_MAX_ITER: usize = 100;

fn residuals(r: &ElicitedRange, log_a: f64, log_b: f64) -> [f64; 2] {
    let (a, b) = (log_a.exp(), log_b.exp());
    [
        beta_reg(a, b, r.low) - r.quantile_low,
        beta_reg(a, b, r.high) - r.quantile_high,
    ]
}

fn norm(r: [f64; 2]) -> f64 {
    r[0].abs().max(r[1].abs())
}

/// Damped Newton on `(log a, log b)` with a finite-difference Jacobian.
fn newton(r: &ElicitedRange) -> Option<(f64, f64)> {
    let mean = 0.5 * (r.low + r.high);
    let var = ((r.high - r.low) / 4.0).powi(2);
    let mut conc = mean * (1.0 - mean) / var - 1.0;
    if !(conc > 0.0) {
        conc = 2.0;
    }
    let mut x = [(mean * conc).ln(), ((1.0 - mean) * conc).ln()];
    let mut res = residuals(r, x[0], x[1]);
    for _ in 0..NEWTON_MAX_ITER {
        if norm(res) < 1e-13 {
            break;
        }
        let h = 1e-6;
        let mut jac = [[0.0; 2]; 2];
        for c in 0..2 {
            let mut up = x;
            let mut dn = x;
            up[c] += h;
            dn[c] -= h;
            let (ru, rd) = (residuals(r, up[0], up[1]), residuals(r, dn[0], dn[1]));
            jac[0][c] = (ru[0] - rd[0]) / (2.0 * h);
            jac[1][c] = (ru[1] - rd[1]) / (2.0 * h);
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if !det.is_finite() || det.abs() < 1e-300 {
            return None;
        }
        let step = [
            (jac[1][1] * res[0] - jac[0][1] * res[1]) / det,
            (-jac[1][0] * res[0] + jac[0][0] * res[1]) / det,
        ];
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-8 {
            let cand = [x[0] - t * step[0], x[1] - t * step[1]];
            let rc = residuals(r, cand[0], cand[1]);
            if norm(rc).is_finite() && norm(rc) < norm(res) {
                x = cand;
                res = rc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (norm(res) < QUANTILE_TOL).then(|| (x[0].exp(), x[1].exp()))
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let f_lo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) > 0.0) == (f_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Nested bisection on (mean, log concentration). Slow but unconditional.
fn nested_bisection(r: &ElicitedRange) -> (f64, f64) {
    let mean_for = |conc: f64| {
        bisect(1e-12, 1.0 - 1e-12, |mu| {
            beta_reg(mu * conc, (1.0 - mu) * conc, r.low) - r.quantile_low
        })
    };
    let log_conc = bisect(-12.0, 25.0, |lc| {
        let conc = lc.exp();
        let mu = mean_for(conc);
        beta_reg(mu * conc, (1.0 - mu) * conc, r.high) - r.quantile_high
    });
    let conc = log_conc.exp();
    let mu = mean_for(conc);
    (mu * conc, (1.0 - mu) * conc)
}

/// Beta shape parameters whose `quantile_low` and `quantile_high` quantiles
/// sit at `low` and `high`.
pub fn beta_from_quantiles(range: &ElicitedRange) -> Result<BetaPrior> {
    range.validate()?;
    let (a, b) = match newton(range) {
        Some(ab) => ab,
        None => {
            log::debug!("Newton failed for {range:?}, falling back to bisection");
            nested_bisection(range)
        }
    };
    let res = residuals(range, a.ln(), b.ln());
    if norm(res) > QUANTILE_TOL || !a.is_finite() || !b.is_finite() {
        return Err(Error::NonConvergence {
            operation: "beta_from_quantiles",
            iterations: NEWTON_MAX_ITER,
            residual: norm(res),
        });
    }
    Ok(BetaPrior { a, b })
}

/// Stick-breaking weights from `K - 1` stick fractions; the last weight takes
/// the remaining length so the result sums to one.
pub fn stick_break(sticks: &[f64]) -> Vec<f64> {
    let mut weights = Vec::with_capacity(sticks.len() + 1);
    let mut remaining = 1.0;
    for &u in sticks {
        weights.push(u * remaining);
        remaining *= 1.0 - u;
    }
    let used: f64 = weights.iter().sum();
    weights.push((1.0 - used).max(0.0));
    weights
}

/// Inverse of [`stick_break`]: the stick fractions that produce `weights`.
pub fn sticks_from_weights(weights: &[f64]) -> Vec<f64> {
    let mut remaining = 1.0;
    let mut sticks = Vec::with_capacity(weights.len().saturating_sub(1));
    for &w in &weights[..weights.len().saturating_sub(1)] {
        let u = if remaining > 0.0 { (w / remaining).clamp(0.0, 1.0) } else { 1.0 };
        sticks.push(u);
        remaining *= 1.0 - u;
    }
    sticks
}
