//! Log-Euler spot paths for the standard Monte Carlo estimator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CholeskyFactors, Contract};
use crate::paths::FactorPaths;

/// Log-spot at the grid nodes and the accumulated `sum r_d dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpotPath {
    pub log_spot: Vec<f64>,
    pub discount_integral: f64,
}

impl SpotPath {
    pub fn spot(&self, n: usize) -> f64 {
        self.log_spot[n].exp()
    }

    pub fn terminal_spot(&self) -> f64 {
        self.log_spot[self.log_spot.len() - 1].exp()
    }
}

/// Log-Euler recursion driven by `W^s = a11 W~1 + a12 W~2 + a13 W~3 + a14 W~4`.
pub fn simulate_spot(paths: &FactorPaths, a: &CholeskyFactors, s0: f64) -> SpotPath {
    let mut out = SpotPath { log_spot: Vec::with_capacity(paths.steps() + 1), discount_integral: 0.0 };
    fill_spot(paths, a, s0, &mut out);
    out
}

/// As [`simulate_spot`] but reusing the buffer in `out`.
pub fn fill_spot(paths: &FactorPaths, a: &CholeskyFactors, s0: f64, out: &mut SpotPath) {
    let n = paths.steps();
    let dt = paths.dt();
    let inc = &paths.increments;
    let (w1, w2, w3, w4) = (inc.dim(0), inc.dim(1), inc.dim(2), inc.dim(3));
    out.log_spot.clear();
    let mut x = s0.ln();
    out.log_spot.push(x);
    let mut disc = 0.0;
    for i in 0..n {
        let v = paths.v[i];
        let dws = a.a11 * w1[i] + a.a12 * w2[i] + a.a13 * w3[i] + a.a14 * w4[i];
        x += (paths.rd[i] - paths.rf[i] - 0.5 * v) * dt + v.sqrt() * dws;
        disc += paths.rd[i];
        out.log_spot.push(x);
    }
    out.discount_integral = disc * dt;
}

/// How the payoff of a simulated spot path is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayoffMode {
    Terminal,
    /// Knock-out checked at the grid nodes only.
    DiscreteBarrier,
    /// Node check plus per-step Brownian-bridge survival weights.
    BridgeBarrier,
}

/// Probability that the log-spot bridge between two nodes below the barrier
/// stays below it, with the step's frozen variance.
#[inline]
pub fn bridge_survival(log_barrier: f64, x0: f64, x1: f64, v: f64, dt: f64) -> f64 {
    let (d0, d1) = (log_barrier - x0, log_barrier - x1);
    if d0 <= 0.0 || d1 <= 0.0 {
        return 0.0;
    }
    let var = v * dt;
    if var <= 0.0 {
        return 1.0;
    }
    -(-2.0 * d0 * d1 / var).exp_m1()
}

/// Discounted payoff `e^{-sum r_d dt} f(S)` of one path.
pub fn payoff_discounted(
    spot: &SpotPath,
    paths: &FactorPaths,
    contract: &Contract,
    mode: PayoffMode,
) -> Result<f64> {
    let df = (-spot.discount_integral).exp();
    match (contract, mode) {
        (Contract::UpAndOutPut { strike, barrier, .. }, PayoffMode::DiscreteBarrier | PayoffMode::BridgeBarrier) => {
            let lb = barrier.ln();
            if spot.log_spot.iter().any(|&x| x >= lb) {
                return Ok(0.0);
            }
            let payoff = (strike - spot.terminal_spot()).max(0.0);
            if payoff == 0.0 {
                return Ok(0.0);
            }
            let mut weight = 1.0;
            if mode == PayoffMode::BridgeBarrier {
                let dt = paths.dt();
                for (n, w) in spot.log_spot.windows(2).enumerate() {
                    weight *= bridge_survival(lb, w[0], w[1], paths.v[n], dt);
                }
            }
            Ok(df * payoff * weight)
        }
        (Contract::UpAndOutPut { .. }, PayoffMode::Terminal) => Err(Error::InvalidArgument(
            "barrier contracts need a barrier monitoring mode".into(),
        )),
        (_, PayoffMode::Terminal) => Ok(df * contract.terminal_payoff(spot.terminal_spot())),
        _ => Err(Error::InvalidArgument("barrier monitoring needs a barrier contract".into())),
    }
}
