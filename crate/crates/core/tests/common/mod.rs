//! Closed-form oracles and helpers shared by the integration tests.
#![allow(dead_code)]

use hcmix::{CorrelationMatrix, ModelParams};

/// Normal CDF via the complementary error function of the C library.
pub fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Black-Scholes call and put with continuous yield.
pub fn black_scholes(s: f64, k: f64, r: f64, q: f64, sigma: f64, t: f64) -> (f64, f64) {
    let st = sigma * t.sqrt();
    let d1 = ((s / k).ln() + (r - q + 0.5 * sigma * sigma) * t) / st;
    let d2 = d1 - st;
    let dq = (-q * t).exp();
    let dr = (-r * t).exp();
    (s * dq * phi(d1) - k * dr * phi(d2), k * dr * phi(-d2) - s * dq * phi(-d1))
}

/// Continuously monitored up-and-out put with `K < B` and constant
/// coefficients, by the method of images on the log-spot density.
pub fn up_and_out_put(s0: f64, k: f64, b: f64, r: f64, q: f64, sigma: f64, t: f64) -> f64 {
    let st = sigma * t.sqrt();
    let mu = r - q - 0.5 * sigma * sigma;
    let lk = (k / s0).ln();
    let lb = (b / s0).ln();
    let (_, vanilla) = black_scholes(s0, k, r, q, sigma, t);
    // E[(K - S0 e^{Y + 2b})^+] with Y ~ N(mu t, sigma^2 t)
    let z = (lk - 2.0 * lb - mu * t) / st;
    let image = k * phi(z) - s0 * (2.0 * lb + (mu + 0.5 * sigma * sigma) * t).exp() * phi(z - st);
    vanilla - (2.0 * mu * lb / (sigma * sigma)).exp() * (-r * t).exp() * image
}

/// Random correlation matrix from normalised random Gram vectors, mapped to
/// the pairwise fields in `(s, f, d, v)` order.
pub fn correlation_from_vectors(rows: [[f64; 4]; 4]) -> Option<CorrelationMatrix> {
    let mut u = rows;
    for r in u.iter_mut() {
        let n = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n < 1e-3 {
            return None;
        }
        r.iter_mut().for_each(|x| *x /= n);
    }
    let dot = |i: usize, j: usize| (0..4).map(|c| u[i][c] * u[j][c]).sum::<f64>();
    Some(CorrelationMatrix {
        rho_sf: dot(0, 1),
        rho_sd: dot(0, 2),
        rho_sv: dot(0, 3),
        rho_df: dot(1, 2),
        rho_vf: dot(1, 3),
        rho_vd: dot(2, 3),
    })
}

pub fn base_european_model() -> ModelParams {
    ModelParams::base_case(105.0)
}

pub fn base_barrier_model() -> ModelParams {
    ModelParams::base_case(100.0)
}

/// Least-squares slope of `ln y` against `ln x`, with optional weights.
pub fn log_log_slope(x: &[f64], y: &[f64], w: Option<&[f64]>) -> f64 {
    let ones = vec![1.0; x.len()];
    let w = w.unwrap_or(&ones);
    let sw: f64 = w.iter().sum();
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = ly.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxy: f64 = (0..x.len()).map(|i| w[i] * (lx[i] - mx) * (ly[i] - my)).sum();
    let sxx: f64 = (0..x.len()).map(|i| w[i] * (lx[i] - mx).powi(2)).sum();
    sxy / sxx
}
