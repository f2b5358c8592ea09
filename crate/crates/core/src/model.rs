//! Model parameters, correlation structure, contracts and time grids.
//!
//! The four Brownian drivers are ordered `(s, f, d, v)`. With `W = A W~` and
//! `A` upper triangular, the spot driver is the only one that loads on the
//! first independent motion, so conditioning on `W~2..W~4` leaves the spot
//! conditionally log-normal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible leading minor of the rate/variance correlation block.
pub const PD_TOLERANCE: f64 = 1e-10;

/// Pairwise correlations of the spot, variance and the two short rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationMatrix {
    pub rho_sv: f64,
    pub rho_sd: f64,
    pub rho_sf: f64,
    pub rho_vd: f64,
    pub rho_vf: f64,
    pub rho_df: f64,
}

impl CorrelationMatrix {
    pub const IDENTITY: CorrelationMatrix = CorrelationMatrix {
        rho_sv: 0.0,
        rho_sd: 0.0,
        rho_sf: 0.0,
        rho_vd: 0.0,
        rho_vf: 0.0,
        rho_df: 0.0,
    };

    /// Correlations of the base FX calibration.
    pub fn base_case() -> Self {
        CorrelationMatrix {
            rho_sv: -0.10,
            rho_sd: -0.15,
            rho_sf: -0.15,
            rho_vd: 0.12,
            rho_vf: 0.05,
            rho_df: 0.25,
        }
    }

    /// The 4x4 matrix in `(s, f, d, v)` order.
    pub fn to_matrix(&self) -> [[f64; 4]; 4] {
        let c = self;
        [
            [1.0, c.rho_sf, c.rho_sd, c.rho_sv],
            [c.rho_sf, 1.0, c.rho_df, c.rho_vf],
            [c.rho_sd, c.rho_df, 1.0, c.rho_vd],
            [c.rho_sv, c.rho_vf, c.rho_vd, 1.0],
        ]
    }

    fn entries(&self) -> [(&'static str, f64); 6] {
        [
            ("rho_sv", self.rho_sv),
            ("rho_sd", self.rho_sd),
            ("rho_sf", self.rho_sf),
            ("rho_vd", self.rho_vd),
            ("rho_vf", self.rho_vf),
            ("rho_df", self.rho_df),
        ]
    }

    /// Checks range, `|rho_vd| < 1` and positive definiteness.
    ///
    /// The `(f, d, v)` block must be strictly positive definite (its leading
    /// minors taken from the variance end must exceed [`PD_TOLERANCE`]). The
    /// full matrix may be singular only in the spot direction, i.e. `a11 = 0`
    /// is admissible while `a11^2 < -PD_TOLERANCE` is rejected.
    pub fn validate(&self) -> Result<()> {
        for (name, rho) in self.entries() {
            if !rho.is_finite() || rho.abs() > 1.0 {
                return Err(Error::CorrelationNotPositiveDefinite {
                    detail: format!("{name} = {rho} is outside [-1, 1]"),
                });
            }
        }
        if self.rho_vd.abs() >= 1.0 {
            return Err(Error::RhoVdDegenerate);
        }
        let minor_vd = 1.0 - self.rho_vd * self.rho_vd;
        if minor_vd <= PD_TOLERANCE {
            return Err(Error::CorrelationNotPositiveDefinite {
                detail: format!("minor(v,d) = {minor_vd:e}"),
            });
        }
        let minor_vdf = self.rate_block_determinant();
        if minor_vdf <= PD_TOLERANCE {
            return Err(Error::CorrelationNotPositiveDefinite {
                detail: format!("minor(v,d,f) = {minor_vdf:e}"),
            });
        }
        let det = determinant4(&self.to_matrix());
        if det / minor_vdf < -PD_TOLERANCE {
            return Err(Error::CorrelationNotPositiveDefinite {
                detail: format!("det(Sigma) = {det:e}"),
            });
        }
        Ok(())
    }

    /// Determinant of the `(f, d, v)` block.
    pub fn rate_block_determinant(&self) -> f64 {
        let (df, vf, vd) = (self.rho_df, self.rho_vf, self.rho_vd);
        1.0 - df * df - vf * vf - vd * vd + 2.0 * df * vf * vd
    }

    /// Both sides of the polynomial identity equivalent to `a11 = 0`.
    ///
    /// Returns `(lhs, rhs)`; `a11 = 0` exactly when they agree.
    pub fn a11_zero_identity(&self) -> (f64, f64) {
        let c = self;
        let lhs = self.rate_block_determinant();
        let rhs = c.rho_sv.powi(2) * (1.0 - c.rho_df.powi(2))
            + c.rho_sd.powi(2) * (1.0 - c.rho_vf.powi(2))
            + c.rho_sf.powi(2) * (1.0 - c.rho_vd.powi(2))
            + 2.0 * c.rho_sv * c.rho_sd * (c.rho_vf * c.rho_df - c.rho_vd)
            + 2.0 * c.rho_sv * c.rho_sf * (c.rho_vd * c.rho_df - c.rho_vf)
            + 2.0 * c.rho_sd * c.rho_sf * (c.rho_vd * c.rho_vf - c.rho_df);
        (lhs, rhs)
    }
}

/// Determinant by cofactor expansion along the first row.
pub fn determinant4(m: &[[f64; 4]; 4]) -> f64 {
    let det3 = |rows: [usize; 3], cols: [usize; 3]| -> f64 {
        let a = |i: usize, j: usize| m[rows[i]][cols[j]];
        a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1))
            - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0))
            + a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0))
    };
    let rows = [1, 2, 3];
    m[0][0] * det3(rows, [1, 2, 3]) - m[0][1] * det3(rows, [0, 2, 3])
        + m[0][2] * det3(rows, [0, 1, 3])
        - m[0][3] * det3(rows, [0, 1, 2])
}

/// Upper-triangular factor `A` with `Sigma = A A^T`; `a44 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CholeskyFactors {
    pub a11: f64,
    pub a12: f64,
    pub a13: f64,
    pub a14: f64,
    pub a22: f64,
    pub a23: f64,
    pub a24: f64,
    pub a33: f64,
    pub a34: f64,
}

impl CholeskyFactors {
    pub fn matrix(&self) -> [[f64; 4]; 4] {
        [
            [self.a11, self.a12, self.a13, self.a14],
            [0.0, self.a22, self.a23, self.a24],
            [0.0, 0.0, self.a33, self.a34],
            [0.0, 0.0, 0.0, 1.0],
        ]
    }

    /// `A A^T`.
    pub fn reconstruct(&self) -> [[f64; 4]; 4] {
        let a = self.matrix();
        let mut out = [[0.0; 4]; 4];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..4).map(|k| a[i][k] * a[j][k]).sum();
            }
        }
        out
    }

    /// Largest absolute entry of `A A^T - Sigma`.
    pub fn max_residual(&self, corr: &CorrelationMatrix) -> f64 {
        let sigma = corr.to_matrix();
        let rec = self.reconstruct();
        let mut worst = 0.0_f64;
        for i in 0..4 {
            for j in 0..4 {
                worst = worst.max((rec[i][j] - sigma[i][j]).abs());
            }
        }
        worst
    }

    /// Loadings of the spot driver on the conditioning motions `W~2..W~4`.
    #[inline]
    pub fn spot_loadings(&self) -> [f64; 3] {
        [self.a12, self.a13, self.a14]
    }
}

/// Closed-form Cholesky coefficients for the `(s, f, d, v)` ordering.
pub fn cholesky_coefficients(corr: &CorrelationMatrix) -> Result<CholeskyFactors> {
    if corr.rho_vd.abs() >= 1.0 {
        return Err(Error::RhoVdDegenerate);
    }
    let c = corr;
    let a14 = c.rho_sv;
    let a24 = c.rho_vf;
    let a34 = c.rho_vd;
    let a33 = (1.0 - c.rho_vd * c.rho_vd).sqrt();
    let a13 = (c.rho_sd - c.rho_sv * c.rho_vd) / a33;
    let a23 = (c.rho_df - c.rho_vf * c.rho_vd) / a33;
    let block = corr.rate_block_determinant();
    if block <= 0.0 {
        return Err(Error::CorrelationNotPositiveDefinite {
            detail: format!("minor(v,d,f) = {block:e}"),
        });
    }
    let a22 = block.sqrt() / a33;
    let a12 = (c.rho_sf - a13 * a23 - a14 * a24) / a22;
    let residual = 1.0 - a12 * a12 - a13 * a13 - a14 * a14;
    if residual < -PD_TOLERANCE {
        return Err(Error::RowOneDegenerate { residual });
    }
    let factors = CholeskyFactors {
        a11: residual.max(0.0).sqrt(),
        a12,
        a13,
        a14,
        a22,
        a23,
        a24,
        a33,
        a34,
    };
    let worst = factors.max_residual(corr);
    if worst > 1e-9 {
        return Err(Error::CorrelationNotPositiveDefinite {
            detail: format!("A A^T deviates from Sigma by {worst:e}"),
        });
    }
    Ok(factors)
}

/// Heston variance plus CIR domestic and foreign short rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    #[serde(rename = "S0")]
    pub s0: f64,
    pub v0: f64,
    pub r0_d: f64,
    pub r0_f: f64,
    pub k: f64,
    pub k_d: f64,
    pub k_f: f64,
    pub theta: f64,
    pub theta_d: f64,
    pub theta_f: f64,
    pub xi: f64,
    pub xi_d: f64,
    pub xi_f: f64,
    pub corr: CorrelationMatrix,
}

impl ModelParams {
    /// The base FX calibration with the given spot.
    pub fn base_case(s0: f64) -> Self {
        ModelParams {
            s0,
            v0: 0.0275,
            r0_d: 0.0524,
            r0_f: 0.0291,
            k: 1.70,
            k_d: 0.20,
            k_f: 0.32,
            theta: 0.0232,
            theta_d: 0.0475,
            theta_f: 0.0248,
            xi: 0.15,
            xi_d: 0.0352,
            xi_f: 0.0317,
            corr: CorrelationMatrix::base_case(),
        }
    }

    pub fn with_corr(mut self, corr: CorrelationMatrix) -> Self {
        self.corr = corr;
        self
    }

    /// Same model with every vol-of-vol set to zero.
    pub fn deterministic(mut self) -> Self {
        self.xi = 0.0;
        self.xi_d = 0.0;
        self.xi_f = 0.0;
        self
    }

    pub fn validate(self) -> Result<ValidatedModel> {
        let positive = |name, value: f64| {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(Error::NonPositiveParameter {
                    name,
                    requirement: "> 0",
                    value,
                })
            }
        };
        let non_negative = |name, value: f64| {
            if value.is_finite() && value >= 0.0 {
                Ok(())
            } else {
                Err(Error::NonPositiveParameter {
                    name,
                    requirement: ">= 0",
                    value,
                })
            }
        };
        positive("S0", self.s0)?;
        for (name, value) in [
            ("v0", self.v0),
            ("r0_d", self.r0_d),
            ("r0_f", self.r0_f),
            ("k", self.k),
            ("k_d", self.k_d),
            ("k_f", self.k_f),
            ("theta", self.theta),
            ("theta_d", self.theta_d),
            ("theta_f", self.theta_f),
            ("xi", self.xi),
            ("xi_d", self.xi_d),
            ("xi_f", self.xi_f),
        ] {
            non_negative(name, value)?;
        }
        self.corr.validate()?;
        let factors = cholesky_coefficients(&self.corr)?;
        Ok(ValidatedModel {
            params: self,
            factors,
        })
    }
}

/// Parameters that passed validation, together with their Cholesky factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidatedModel {
    params: ModelParams,
    factors: CholeskyFactors,
}

impl ValidatedModel {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn factors(&self) -> &CholeskyFactors {
        &self.factors
    }

    pub fn spot(&self) -> f64 {
        self.params.s0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionType {
    Call,
    Put,
}

impl OptionType {
    /// +1 for a call, -1 for a put.
    #[inline]
    pub fn psi(self) -> f64 {
        match self {
            OptionType::Call => 1.0,
            OptionType::Put => -1.0,
        }
    }
}

/// Option contracts priced by the engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Contract {
    European {
        option: OptionType,
        strike: f64,
        maturity: f64,
    },
    CashOrNothing {
        option: OptionType,
        strike: f64,
        maturity: f64,
    },
    AssetOrNothing {
        option: OptionType,
        strike: f64,
        maturity: f64,
    },
    /// Continuously monitored up-and-out put.
    UpAndOutPut {
        strike: f64,
        barrier: f64,
        maturity: f64,
    },
}

impl Contract {
    pub fn european_call(strike: f64, maturity: f64) -> Self {
        Contract::European {
            option: OptionType::Call,
            strike,
            maturity,
        }
    }

    pub fn european_put(strike: f64, maturity: f64) -> Self {
        Contract::European {
            option: OptionType::Put,
            strike,
            maturity,
        }
    }

    pub fn up_and_out_put(strike: f64, barrier: f64, maturity: f64) -> Self {
        Contract::UpAndOutPut {
            strike,
            barrier,
            maturity,
        }
    }

    pub fn strike(&self) -> f64 {
        match *self {
            Contract::European { strike, .. }
            | Contract::CashOrNothing { strike, .. }
            | Contract::AssetOrNothing { strike, .. }
            | Contract::UpAndOutPut { strike, .. } => strike,
        }
    }

    pub fn maturity(&self) -> f64 {
        match *self {
            Contract::European { maturity, .. }
            | Contract::CashOrNothing { maturity, .. }
            | Contract::AssetOrNothing { maturity, .. }
            | Contract::UpAndOutPut { maturity, .. } => maturity,
        }
    }

    pub fn barrier(&self) -> Option<f64> {
        match *self {
            Contract::UpAndOutPut { barrier, .. } => Some(barrier),
            _ => None,
        }
    }

    /// Whether the conditional price is available in closed form.
    pub fn is_path_independent(&self) -> bool {
        !matches!(self, Contract::UpAndOutPut { .. })
    }

    /// Terminal payoff, ignoring any barrier.
    pub fn terminal_payoff(&self, spot: f64) -> f64 {
        let k = self.strike();
        match *self {
            Contract::European { option, .. } => (option.psi() * (spot - k)).max(0.0),
            Contract::CashOrNothing { option, .. } => in_the_money(option, spot, k) as u8 as f64,
            Contract::AssetOrNothing { option, .. } => {
                if in_the_money(option, spot, k) {
                    spot
                } else {
                    0.0
                }
            }
            Contract::UpAndOutPut { .. } => (k - spot).max(0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.strike();
        let t = self.maturity();
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::InvalidContract(format!("strike must be > 0, got {k}")));
        }
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::InvalidContract(format!("maturity must be > 0, got {t}")));
        }
        if let Some(b) = self.barrier() {
            if !(b.is_finite() && b > 0.0) {
                return Err(Error::InvalidContract(format!("barrier must be > 0, got {b}")));
            }
        }
        Ok(())
    }
}

/// Binary exercise rule; an exact tie at the strike pays calls and not puts.
#[inline]
pub(crate) fn in_the_money(option: OptionType, spot: f64, strike: f64) -> bool {
    match option {
        OptionType::Call => spot >= strike,
        OptionType::Put => spot < strike,
    }
}

/// Uniform grid `t_n = n T / N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    maturity: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(maturity: f64, steps: usize) -> Result<Self> {
        if !(maturity.is_finite() && maturity > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "time grid horizon must be > 0, got {maturity}"
            )));
        }
        if steps == 0 {
            return Err(Error::InvalidArgument("time grid needs at least one step".into()));
        }
        Ok(TimeGrid { maturity, steps })
    }

    #[inline]
    pub fn maturity(&self) -> f64 {
        self.maturity
    }

    #[inline]
    pub fn steps(&self) -> usize {
        self.steps
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.maturity / self.steps as f64
    }

    #[inline]
    pub fn node(&self, n: usize) -> f64 {
        n as f64 * self.maturity / self.steps as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.steps).map(|n| self.node(n)).collect()
    }
}

/// Convenience wrapper matching the free-function style used elsewhere.
pub fn build_time_grid(maturity: f64, steps: usize) -> Result<TimeGrid> {
    TimeGrid::new(maturity, steps)
}
