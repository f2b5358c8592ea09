//! Predictors of the variance reduction achieved by conditioning.
//!
//! Treating the factors as nearly deterministic, the mixed estimator's
//! variance depends on the correlations mainly through
//! `rho = sqrt(1 - a11^2)`, giving `Gamma_dev ~ (1 - a11^2)^{-1/2}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CorrelationMatrix, TimeGrid, ValidatedModel};
use crate::paths::FactorPaths;
use crate::special::{integrate, norm_cdf, INV_TWO_PI};
use crate::theory::ExtReal;

/// Mean and variance of `int_0^T v dt` for a CIR process.
pub fn integrated_variance_moments(v0: f64, k: f64, theta: f64, xi: f64, t: f64) -> Result<(f64, f64)> {
    if k == 0.0 {
        return Err(Error::KZero);
    }
    let e1 = (-k * t).exp();
    let e2 = (-2.0 * k * t).exp();
    let mean = theta * t + v0 / k - theta / k + e1 * (theta / k - v0 / k);
    let var = xi * xi / (k * k)
        * (theta * t + v0 / k - 2.5 * theta / k
            + 2.0 * e1 * (theta / k + theta * t - v0 * t)
            + e2 * (0.5 * theta / k - v0 / k));
    Ok((mean, var))
}

/// Owen's T function `phi(beta) int_0^theta phi(beta x) / (1 + x^2) dx`.
pub fn owen_t(beta: f64, vartheta: f64) -> f64 {
    let h2 = 0.5 * beta * beta;
    INV_TWO_PI * integrate(|x| (-h2 * (1.0 + x * x)).exp() / (1.0 + x * x), 0.0, vartheta, 1e-14)
}

/// `E[Phi(aZ + b)^2]` for standard normal `Z`.
pub fn expected_phi_squared(a: f64, b: f64) -> f64 {
    let s = (1.0 + a * a).sqrt();
    let beta = b / s;
    norm_cdf(beta) - 2.0 * owen_t(beta, 1.0 / (1.0 + 2.0 * a * a).sqrt())
}

/// Quantities of the nearly deterministic variance model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionGeometry {
    pub varrho: f64,
    pub sigma_tilde: f64,
    pub d_tilde: f64,
    pub forward: f64,
    pub strike: f64,
}

impl ReductionGeometry {
    /// Integrates the vol-of-vol-free FTE paths of the model on `steps` steps.
    pub fn from_model(model: &ValidatedModel, strike: f64, maturity: f64, steps: usize) -> Result<Self> {
        let det = model.params().deterministic().validate()?;
        let grid = TimeGrid::new(maturity, steps)?;
        let p = FactorPaths::simulate(&det, &grid, 0, 0);
        let dt = grid.dt();
        let n = grid.steps();
        let int_v: f64 = p.v[..n].iter().sum::<f64>() * dt;
        let int_d: f64 = p.rd[..n].iter().sum::<f64>() * dt;
        let int_f: f64 = p.rf[..n].iter().sum::<f64>() * dt;
        let a11 = model.factors().a11;
        Ok(ReductionGeometry {
            varrho: (1.0 - a11 * a11).max(0.0).sqrt(),
            sigma_tilde: int_v.sqrt(),
            d_tilde: (-int_d).exp(),
            forward: model.spot() * (int_d - int_f).exp(),
            strike,
        })
    }

    pub fn a(&self) -> f64 {
        self.varrho / (1.0 - self.varrho * self.varrho).sqrt()
    }

    pub fn b(&self) -> f64 {
        let r2 = self.varrho * self.varrho;
        ((self.forward / self.strike).ln() + (0.5 + r2) * self.sigma_tilde.powi(2))
            / ((1.0 - r2).sqrt() * self.sigma_tilde)
    }

    pub fn beta1(&self) -> f64 {
        (self.forward / self.strike).ln() / self.sigma_tilde
    }

    pub fn beta2(&self, varrho: f64) -> f64 {
        (0.5 + varrho * varrho) * self.sigma_tilde
    }

    pub fn vartheta(varrho: f64) -> f64 {
        ((1.0 - varrho * varrho) / (1.0 + varrho * varrho)).sqrt()
    }

    /// `E[Phi(aZ + b)^2]` written through `beta1 + beta2` and `vartheta`, valid up to `varrho = 1`.
    pub fn phi_squared(&self, varrho: f64) -> f64 {
        let beta = self.beta1() + self.beta2(varrho);
        norm_cdf(beta) - 2.0 * owen_t(beta, Self::vartheta(varrho))
    }
}

/// Approximate derivative of the mixed estimator's variance with respect to `varrho`.
pub fn variance_derivative(varrho: f64, g: &ReductionGeometry, m: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&varrho) {
        return Err(Error::InvalidArgument(format!("varrho must lie in [0, 1], got {varrho}")));
    }
    let s2 = g.sigma_tilde * g.sigma_tilde;
    if varrho == 0.0 || s2 == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 / m as f64
        * (g.d_tilde * g.forward).powi(2)
        * varrho
        * s2
        * (varrho * varrho * s2).exp()
        * g.phi_squared(varrho))
}

/// `(1 - a11^2)^{-1/2}`, equal to one at `a11 = 0` and infinite at `a11 = 1`.
pub fn gamma_dev_predicted(a11: f64) -> Result<ExtReal> {
    if !(0.0..=1.0).contains(&a11) {
        return Err(Error::InvalidArgument(format!("a11 must lie in [0, 1], got {a11}")));
    }
    if a11 == 0.0 {
        return Ok(ExtReal::Finite(1.0));
    }
    let rest = 1.0 - a11 * a11;
    if rest <= 0.0 {
        return Ok(ExtReal::Infinite);
    }
    Ok(ExtReal::Finite(rest.powf(-0.5)))
}

/// Approximate bounds on `Gamma_var`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaVarBounds {
    pub lower: f64,
    pub upper: f64,
    /// Limits of the bounds as `sigma_tilde -> 0`.
    pub lower_small_sigma: f64,
    pub upper_small_sigma: f64,
}

pub fn gamma_var_bounds(g: &ReductionGeometry) -> Result<GammaVarBounds> {
    if !(g.varrho > 0.0) {
        return Err(Error::InvalidArgument("bounds need varrho > 0".into()));
    }
    let r2 = g.varrho * g.varrho;
    let b1 = g.beta1();
    let lo = norm_cdf(b1 + 0.5 * g.sigma_tilde);
    let hi = norm_cdf(b1 + 1.5 * g.sigma_tilde);
    let p = norm_cdf(b1);
    Ok(GammaVarBounds {
        lower: lo * lo / hi / r2,
        upper: hi / (lo * lo) / r2,
        lower_small_sigma: p / r2,
        upper_small_sigma: 1.0 / (p * r2),
    })
}

const ZERO_TOL: f64 = 1e-12;

/// `Gamma_dev` approximation when the variance is uncorrelated with both rates.
pub fn gamma_dev_partial_approx(corr: &CorrelationMatrix) -> Result<f64> {
    if corr.rho_vd.abs() > ZERO_TOL || corr.rho_vf.abs() > ZERO_TOL {
        return Err(Error::AssumptionViolated(format!(
            "needs rho_vd = rho_vf = 0, got {} and {}",
            corr.rho_vd, corr.rho_vf
        )));
    }
    if corr.rho_df.abs() >= 1.0 {
        return Err(Error::AssumptionViolated("needs |rho_df| < 1".into()));
    }
    let c = corr;
    let rates = (c.rho_sd * c.rho_sd + c.rho_sf * c.rho_sf - 2.0 * c.rho_sd * c.rho_sf * c.rho_df)
        / (1.0 - c.rho_df * c.rho_df);
    Ok((c.rho_sv * c.rho_sv + rates).powf(-0.5))
}

/// Approximate `a11` for `rho_sd = rho_sf` and negligible variance-rate correlation.
pub fn a11_equal_rates_approx(rho_sv: f64, rho_sd: f64, rho_df: f64) -> f64 {
    (1.0 - rho_sv * rho_sv - 2.0 / (1.0 + rho_df) * rho_sd * rho_sd).max(0.0).sqrt()
}

/// Approximate `Gamma_dev` for `rho_sd = rho_sf` and negligible variance-rate correlation.
pub fn gamma_dev_equal_rates_approx(rho_sv: f64, rho_sd: f64, rho_df: f64) -> f64 {
    (rho_sv * rho_sv + 2.0 / (1.0 + rho_df) * rho_sd * rho_sd).powf(-0.5)
}

/// `rho_df` minimising the rate contribution, clamped into `[lo, hi]`.
///
/// Returns the value and whether clamping was applied.
pub fn optimal_rho_df(rho_sd: f64, rho_sf: f64, admissible: (f64, f64)) -> Result<(f64, bool)> {
    if rho_sd == 0.0 && rho_sf == 0.0 {
        return Err(Error::BothZero);
    }
    let star = if rho_sd.abs() >= rho_sf.abs() { rho_sf / rho_sd } else { rho_sd / rho_sf };
    let star = star + 0.0;
    let clamped = star.clamp(admissible.0, admissible.1);
    Ok((clamped, clamped != star))
}

/// Elliptic level set `mu^2 (rho_sv - c)^2 + coeff mu^2 rho_sd^2 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseContour {
    pub mu: f64,
    pub center: f64,
    pub coeff: f64,
}

impl EllipseContour {
    /// Iso-ratio curves of the European call study.
    pub fn european(mu: f64) -> Self {
        EllipseContour { mu, center: -0.05, coeff: 1.6 }
    }

    /// Region where the barrier study found `Gamma_dev > 4.5`.
    pub fn barrier() -> Self {
        EllipseContour { mu: 4.2, center: 0.05, coeff: 1.6 }
    }

    pub fn level(&self, rho_sv: f64, rho_sd: f64) -> f64 {
        let m2 = self.mu * self.mu;
        m2 * (rho_sv - self.center).powi(2) + self.coeff * m2 * rho_sd * rho_sd
    }

    pub fn contains(&self, rho_sv: f64, rho_sd: f64) -> bool {
        self.level(rho_sv, rho_sd) < 1.0
    }
}

pub fn ellipse_contour(mu: f64, rho_sv_center: f64, coeff: f64) -> Result<EllipseContour> {
    if !(mu >= 1.0) {
        return Err(Error::InvalidArgument(format!("mu must be >= 1, got {mu}")));
    }
    Ok(EllipseContour { mu, center: rho_sv_center, coeff })
}

/// Lower bounds `k^2 / (xi^2 (1 + e^{-kT}))` and `k^2 / (2 xi^2)` on
/// `Var(int sqrt(V) dW) / Var(int V dt)`.
pub fn stochastic_integral_variance_ratio_bound(k: f64, xi: f64, t: f64) -> Result<(f64, f64)> {
    if !(k > 0.0 && xi > 0.0) {
        return Err(Error::InvalidArgument("needs k > 0 and xi > 0".into()));
    }
    let r = k * k / (xi * xi);
    Ok((r / (1.0 + (-k * t).exp()), 0.5 * r))
}
