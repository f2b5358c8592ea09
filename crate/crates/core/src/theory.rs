//! Moment conditions and critical horizons for the model and its discretisation.
//!
//! All inequalities are strict. A comparison that fails only because both
//! sides agree to rounding is flagged with `boundary = true`.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::ValidatedModel;

/// Below this magnitude a Cholesky entry is treated as zero.
const DEGENERATE: f64 = 1e-12;

/// A non-negative horizon or exponent that may be infinite.
///
/// Serialises as a JSON number or the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum ExtReal {
    Finite(f64),
    Infinite,
}

impl ExtReal {
    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtReal::Infinite)
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            ExtReal::Finite(x) => Some(x),
            ExtReal::Infinite => None,
        }
    }

    /// `f64::INFINITY` for the infinite case.
    pub fn to_f64(&self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }

    pub fn min(self, other: ExtReal) -> ExtReal {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(x) => write!(f, "{x}"),
            ExtReal::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            ExtReal::Finite(x) => s.serialize_f64(x),
            ExtReal::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = ExtReal;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, x: f64) -> std::result::Result<ExtReal, E> {
                Ok(ExtReal::Finite(x))
            }
            fn visit_i64<E: de::Error>(self, x: i64) -> std::result::Result<ExtReal, E> {
                Ok(ExtReal::Finite(x as f64))
            }
            fn visit_u64<E: de::Error>(self, x: u64) -> std::result::Result<ExtReal, E> {
                Ok(ExtReal::Finite(x as f64))
            }
            fn visit_str<E: de::Error>(self, s: &str) -> std::result::Result<ExtReal, E> {
                if s == "inf" {
                    Ok(ExtReal::Infinite)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(s), &self))
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// One strict inequality `lhs > rhs` with both sides kept for inspection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inequality {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    pub boundary: bool,
}

impl Inequality {
    pub fn strict(lhs: f64, rhs: f64) -> Self {
        let scale = lhs.abs().max(rhs.abs()).max(1.0);
        let boundary = rhs.is_finite() && (lhs - rhs).abs() <= 1e-12 * scale;
        Inequality { lhs, rhs, holds: lhs > rhs && !boundary, boundary }
    }
}

/// Strict Feller condition `2 k theta > xi^2`.
pub fn feller(k: f64, theta: f64, xi: f64) -> bool {
    2.0 * k * theta > xi * xi
}

/// Exponential integrability of a square-root process: `E exp(lambda int y + mu int sqrt(y) dW)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpIntegrabilityQuery {
    pub lambda: f64,
    pub mu: f64,
    pub k: f64,
    pub xi: f64,
}

impl ExpIntegrabilityQuery {
    pub fn delta(&self) -> f64 {
        self.lambda + 0.5 * self.mu * self.mu
    }
}

/// Horizon up to which the exponential moment stays finite.
pub fn exp_integrability_horizon(q: &ExpIntegrabilityQuery) -> ExtReal {
    let delta = q.delta();
    if delta <= 0.0 || q.xi == 0.0 {
        return ExtReal::Infinite;
    }
    if q.k <= q.xi * (q.mu + (0.5 * delta).sqrt()) {
        ExtReal::Finite(1.0 / (q.xi * (q.mu + (2.0 * delta).sqrt()) - q.k))
    } else {
        ExtReal::Finite(2.0 * (q.k - q.mu * q.xi) / (q.xi * q.xi * delta))
    }
}

/// Hoelder exponents of the moment conditions; `None` marks the degenerate
/// correlation cases handled by dedicated conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QValues {
    pub q0: Option<ExtReal>,
    pub q1: Option<ExtReal>,
    pub q2: Option<ExtReal>,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("moment order must be >= 1, got {alpha}")))
    }
}

/// `q0`, `q1` and `q2` for moment order `alpha` over horizon `maturity`.
pub fn q_values(alpha: f64, model: &ValidatedModel, maturity: f64) -> Result<QValues> {
    check_alpha(alpha)?;
    let p = model.params();
    let a = model.factors();
    let (k, xi, rho) = (p.k, p.xi, p.corr.rho_sv);
    let t = maturity;

    let (q0, q1) = if xi == 0.0 {
        (Some(ExtReal::Infinite), Some(ExtReal::Infinite))
    } else if a.a13.abs() < DEGENERATE {
        (None, None)
    } else {
        let quad = alpha * alpha * xi * xi * a.a13 * a.a13;
        let lin = 2.0 * alpha * rho * xi * k + alpha * alpha * xi * xi * (a.a11 * a.a11 + a.a12 * a.a12)
            - alpha * xi * xi;
        let root = (lin * lin + 4.0 * quad * k * k).sqrt();
        // positive root of quad x^2 + lin x - k^2, in the cancellation-free form
        let q0 = if lin >= 0.0 { 2.0 * k * k / (root + lin) } else { (root - lin) / (2.0 * quad) };
        let q0 = ExtReal::Finite(q0);
        let q1 = if rho > 0.0 { q0.min(ExtReal::Finite(k / (alpha * rho * xi))) } else { q0 };
        (Some(q0), Some(q1))
    };

    let q2 = if xi == 0.0 {
        Some(ExtReal::Infinite)
    } else {
        let weight = a.a13 * a.a13 + a.a14 * a.a14;
        if weight < DEGENERATE * DEGENERATE {
            None
        } else {
            let d = t * alpha * alpha * xi * xi * weight;
            let c = alpha * rho * xi + t * alpha * alpha * xi * xi * (a.a11 * a.a11 + a.a12 * a.a12) / 4.0
                - t * alpha * xi * xi / 4.0;
            let root = (c * c + d * k).sqrt();
            let q2 = if c >= 0.0 { 2.0 * k / (root + c) } else { (root - c) * 2.0 / d };
            Some(ExtReal::Finite(q2))
        }
    };
    Ok(QValues { q0, q1, q2 })
}

/// `alpha q / (q - 1)`, infinite when `q <= 1`.
fn holder_bound(alpha: f64, q: ExtReal) -> f64 {
    match q {
        ExtReal::Infinite => alpha,
        ExtReal::Finite(q) if q > 1.0 => alpha * q / (q - 1.0),
        ExtReal::Finite(_) => f64::INFINITY,
    }
}

/// Outcome of a pair of moment conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    pub holds: bool,
    /// Condition on the variance parameters.
    pub variance: Inequality,
    /// Condition on the domestic-rate parameters.
    pub domestic: Inequality,
    /// Set when a degenerate correlation structure switched the formulas.
    pub special_case: Option<String>,
}

impl MomentCheck {
    fn new(variance: Inequality, domestic: Inequality, special_case: Option<&str>) -> Self {
        MomentCheck {
            holds: variance.holds && domestic.holds,
            variance,
            domestic,
            special_case: special_case.map(str::to_owned),
        }
    }
}

/// `k_d^2 / (2 xi_d^2)`, infinite for a deterministic domestic rate.
fn domestic_exact_lhs(k_d: f64, xi_d: f64) -> f64 {
    if xi_d == 0.0 {
        f64::INFINITY
    } else {
        k_d * k_d / (2.0 * xi_d * xi_d)
    }
}

/// `2 k_d / (T xi_d^2)`.
fn domestic_scheme_lhs(k_d: f64, xi_d: f64, t: f64) -> f64 {
    if xi_d == 0.0 {
        f64::INFINITY
    } else {
        2.0 * k_d / (t * xi_d * xi_d)
    }
}

/// Sufficient conditions for bounded moments of order slightly above `alpha` of the spot.
pub fn check_exact_moments(alpha: f64, model: &ValidatedModel) -> Result<MomentCheck> {
    check_alpha(alpha)?;
    let p = model.params();
    let a = model.factors();
    let (k, xi, rho) = (p.k, p.xi, p.corr.rho_sv);
    let spread = (alpha * (alpha - 1.0)).sqrt() * xi;
    let variance = Inequality::strict(k, alpha * rho * xi + spread);
    let lhs = domestic_exact_lhs(p.k_d, p.xi_d);
    if xi != 0.0 && a.a13.abs() < DEGENERATE {
        let gap = k - alpha * rho * xi;
        let denom = gap * gap - alpha * (alpha - 1.0) * xi * xi;
        let second = if gap > 0.0 { k / gap } else { f64::INFINITY };
        let third = if denom > 0.0 { k * k / denom } else { f64::INFINITY };
        let rhs = alpha * 1f64.max(second).max(third);
        return Ok(MomentCheck::new(variance, Inequality::strict(lhs, rhs), Some("a13 = 0")));
    }
    let q1 = q_values(alpha, model, 1.0)?.q1.expect("non-degenerate a13");
    Ok(MomentCheck::new(variance, Inequality::strict(lhs, holder_bound(alpha, q1)), None))
}

/// Sufficient conditions for bounded moments of the discretised spot over `[0, T]`.
pub fn check_scheme_moments(alpha: f64, model: &ValidatedModel, maturity: f64) -> Result<MomentCheck> {
    check_alpha(alpha)?;
    let p = model.params();
    let (k, xi, rho) = (p.k, p.xi, p.corr.rho_sv);
    let t = maturity;
    let growth = 0.25 * alpha * (alpha - 1.0) * t * xi * xi;
    match q_values(alpha, model, t)?.q2 {
        Some(q2) => {
            let variance = Inequality::strict(k, alpha * rho * xi + growth);
            let domestic = Inequality::strict(domestic_scheme_lhs(p.k_d, p.xi_d, t), holder_bound(alpha, q2));
            Ok(MomentCheck::new(variance, domestic, None))
        }
        None => {
            let variance = Inequality::strict(k, growth);
            let lhs = if p.xi_d == 0.0 { f64::INFINITY } else { p.k_d / (t * p.xi_d * p.xi_d) };
            let denom = 4.0 * k - alpha * (alpha - 1.0) * t * xi * xi;
            let rhs = if denom > 0.0 { 2.0 * alpha * k / denom } else { f64::INFINITY };
            Ok(MomentCheck::new(variance, Inequality::strict(lhs, rhs), Some("a13 = a14 = 0")))
        }
    }
}

/// Critical time for moments of the discounted spot with constant rates.
pub fn discounted_moment_horizon(alpha: f64, model: &ValidatedModel) -> Result<ExtReal> {
    check_alpha(alpha)?;
    if alpha == 1.0 {
        return Ok(ExtReal::Infinite);
    }
    let p = model.params();
    let (k, xi) = (p.k, p.xi);
    let a = alpha * p.corr.rho_sv * xi - k;
    let spread_sq = alpha * (alpha - 1.0) * xi * xi;
    let spread = spread_sq.sqrt();
    let lower = alpha * p.corr.rho_sv * xi - spread;
    let upper = alpha * p.corr.rho_sv * xi + spread;
    Ok(if k >= upper {
        ExtReal::Infinite
    } else if k < lower {
        let nu = (a * a - spread_sq).sqrt();
        ExtReal::Finite(((a + nu) / (a - nu)).ln() / nu)
    } else if k == lower {
        ExtReal::Finite(2.0 / a)
    } else {
        let nu_hat = (spread_sq - a * a).sqrt();
        ExtReal::Finite(2.0 / nu_hat * (FRAC_PI_2 - (a / nu_hat).atan()))
    })
}

/// Critical time for moments of the discretised discounted spot.
pub fn discounted_scheme_horizon(alpha: f64, model: &ValidatedModel) -> Result<ExtReal> {
    check_alpha(alpha)?;
    let p = model.params();
    let (k, xi) = (p.k, p.xi);
    let drift = alpha * p.corr.rho_sv * xi;
    let spread = (alpha * (alpha - 1.0)).sqrt() * xi;
    Ok(if k < drift + 0.5 * spread {
        ExtReal::Finite(1.0 / (drift + spread - k))
    } else if alpha == 1.0 || xi == 0.0 {
        ExtReal::Infinite
    } else {
        ExtReal::Finite(4.0 * (k - drift) / (alpha * (alpha - 1.0) * xi * xi))
    })
}

/// Critical time for strong L1 convergence of the discounted scheme.
pub fn l1_horizon(model: &ValidatedModel) -> ExtReal {
    let p = model.params();
    let edge = p.corr.rho_sv * p.xi;
    if p.k < edge {
        ExtReal::Finite(1.0 / (edge - p.k))
    } else {
        ExtReal::Infinite
    }
}

/// Every condition and horizon for one moment order and maturity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub alpha: f64,
    pub maturity: f64,
    pub feller_v: bool,
    pub feller_d: bool,
    pub feller_f: bool,
    pub good_correlation: bool,
    pub exact_moment_ok: bool,
    pub exact_moments: MomentCheck,
    pub scheme_moment_ok: bool,
    pub scheme_moments: MomentCheck,
    /// The combined sufficient condition for strong convergence in `L^alpha`.
    pub strong_convergence_ok: bool,
    pub strong_convergence_variance: Inequality,
    pub t_star_discounted_exact: ExtReal,
    pub t_star_discounted_scheme: ExtReal,
    pub t_star_l1: ExtReal,
    pub q0: Option<ExtReal>,
    pub q1: Option<ExtReal>,
    pub q2: Option<ExtReal>,
}

pub fn full_report(alpha: f64, model: &ValidatedModel, maturity: f64) -> Result<TheoryReport> {
    check_alpha(alpha)?;
    if !(maturity.is_finite() && maturity > 0.0) {
        return Err(Error::InvalidArgument(format!("maturity must be > 0, got {maturity}")));
    }
    let p = model.params();
    let q = q_values(alpha, model, maturity)?;
    let exact = check_exact_moments(alpha, model)?;
    let scheme = check_scheme_moments(alpha, model, maturity)?;
    let (k, xi) = (p.k, p.xi);
    let spread = (alpha * (alpha - 1.0)).sqrt() * xi;
    let growth = 0.25 * alpha * (alpha - 1.0) * maturity * xi * xi;
    let strong = Inequality::strict(k, alpha * p.corr.rho_sv * xi + spread.max(growth));
    let feller_f = feller(p.k_f, p.theta_f, p.xi_f);
    Ok(TheoryReport {
        alpha,
        maturity,
        feller_v: feller(k, p.theta, xi),
        feller_d: feller(p.k_d, p.theta_d, p.xi_d),
        feller_f,
        good_correlation: k >= p.corr.rho_sv * xi,
        exact_moment_ok: exact.holds,
        scheme_moment_ok: scheme.holds,
        strong_convergence_ok: strong.holds && exact.domestic.holds && scheme.domestic.holds && feller_f,
        strong_convergence_variance: strong,
        exact_moments: exact,
        scheme_moments: scheme,
        t_star_discounted_exact: discounted_moment_horizon(alpha, model)?,
        t_star_discounted_scheme: discounted_scheme_horizon(alpha, model)?,
        t_star_l1: l1_horizon(model),
        q0: q.q0,
        q1: q.q1,
        q2: q.q2,
    })
}
