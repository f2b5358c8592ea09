//! Conditional Black-Scholes reduction of a factor path.
//!
//! Given the paths of `V`, `r_d`, `r_f` and of `W~2..W~4`, the discretised
//! spot is log-normal with constant rate `r`, yield `q` and volatility
//! `sigma`, so path-independent payoffs have closed-form conditional prices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{in_the_money, CholeskyFactors, Contract, TimeGrid};
use crate::paths::FactorPaths;
use crate::special::norm_cdf;

/// Effective constant coefficients of the conditional problem, per year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalCoefficients {
    pub r: f64,
    pub q: f64,
    pub sigma: f64,
    pub maturity: f64,
}

/// Left-endpoint sums over the path, as used by the mixed estimator.
pub fn conditional_coefficients(
    paths: &FactorPaths,
    a: &CholeskyFactors,
    grid: &TimeGrid,
) -> ConditionalCoefficients {
    let n = paths.steps();
    let inv_n = 1.0 / n as f64;
    let inc = &paths.increments;
    let (w2, w3, w4) = (inc.dim(1), inc.dim(2), inc.dim(3));
    let (mut sum_rd, mut sum_rf, mut sum_v) = (0.0, 0.0, 0.0);
    let mut stoch = 0.0;
    for i in 0..n {
        let v = paths.v[i];
        sum_rd += paths.rd[i];
        sum_rf += paths.rf[i];
        sum_v += v;
        stoch += v.sqrt() * (a.a12 * w2[i] + a.a13 * w3[i] + a.a14 * w4[i]);
    }
    let t = grid.maturity();
    let a11_sq = a.a11 * a.a11;
    ConditionalCoefficients {
        r: sum_rd * inv_n,
        q: sum_rf * inv_n + 0.5 * (1.0 - a11_sq) * sum_v * inv_n - stoch / t,
        sigma: (a11_sq * sum_v * inv_n).sqrt(),
        maturity: t,
    }
}

/// `(d1, d2)`, or `None` when `sigma sqrt(T)` vanishes.
pub fn bs_d12(s0: f64, k: f64, r: f64, q: f64, sigma: f64, t: f64) -> Option<(f64, f64)> {
    let vol = sigma * t.sqrt();
    if !(vol > 0.0) {
        return None;
    }
    let d1 = ((s0 / k).ln() + (r - q + 0.5 * sigma * sigma) * t) / vol;
    Some((d1, d1 - vol))
}

/// Closed-form price given the conditional coefficients.
///
/// At `sigma = 0` the deterministic forward `S0 e^{(r-q)T}` is paid out; a
/// forward exactly at the strike counts as in the money for calls only.
pub fn conditional_price(contract: &Contract, coeffs: &ConditionalCoefficients, s0: f64) -> Result<f64> {
    let ConditionalCoefficients { r, q, sigma, maturity: t } = *coeffs;
    let k = contract.strike();
    let df = (-r * t).exp();
    let carry = s0 * (-q * t).exp();
    let Some((d1, d2)) = bs_d12(s0, k, r, q, sigma, t) else {
        let forward = s0 * ((r - q) * t).exp();
        return Ok(match *contract {
            Contract::European { option, .. } => df * (option.psi() * (forward - k)).max(0.0),
            Contract::CashOrNothing { option, .. } => {
                if in_the_money(option, forward, k) {
                    df
                } else {
                    0.0
                }
            }
            Contract::AssetOrNothing { option, .. } => {
                if in_the_money(option, forward, k) {
                    carry
                } else {
                    0.0
                }
            }
            Contract::UpAndOutPut { .. } => return Err(Error::UnsupportedContract("up_and_out_put")),
        });
    };
    Ok(match *contract {
        Contract::European { option, .. } => {
            let psi = option.psi();
            psi * carry * norm_cdf(psi * d1) - psi * k * df * norm_cdf(psi * d2)
        }
        Contract::CashOrNothing { option, .. } => df * norm_cdf(option.psi() * d2),
        Contract::AssetOrNothing { option, .. } => carry * norm_cdf(option.psi() * d1),
        Contract::UpAndOutPut { .. } => return Err(Error::UnsupportedContract("up_and_out_put")),
    })
}

/// Log-spot of the mixed scheme at the grid nodes, driven by `W~1` as well.
///
/// Uses the piecewise-constant drift `mu_n - a11^2 V_n / 2` and diffusion
/// `a11 sqrt(V_n)` of the conditional dynamics.
pub fn mixed_log_spot(paths: &FactorPaths, a: &CholeskyFactors, s0: f64) -> Vec<f64> {
    let n = paths.steps();
    let dt = paths.dt();
    let inc = &paths.increments;
    let mut x = Vec::with_capacity(n + 1);
    let mut cur = s0.ln();
    x.push(cur);
    for i in 0..n {
        let v = paths.v[i];
        let sv = v.sqrt();
        let mu = paths.rd[i] - paths.rf[i] - 0.5 * (1.0 - a.a11 * a.a11) * v
            + sv * (a.a12 * inc.dim(1)[i] + a.a13 * inc.dim(2)[i] + a.a14 * inc.dim(3)[i]) / dt;
        cur += (mu - 0.5 * a.a11 * a.a11 * v) * dt + a.a11 * sv * inc.dim(0)[i];
        x.push(cur);
    }
    x
}
