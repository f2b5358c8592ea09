//! Crank-Nicolson solver for the conditional up-and-out put.
//!
//! On each time step the conditional price solves
//! `u_t + mu x u_x + D x^2 u_xx - r u = 0` on `[x_min, B]` with `u(B) = 0`
//! and `u_xx = 0` at `x_min`, with coefficients frozen over the step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CholeskyFactors, Contract};
use crate::paths::FactorPaths;

/// Pivots smaller than this abort the Thomas sweep.
pub const PIVOT_TOLERANCE: f64 = 1e-14;

/// Solves a tridiagonal system in place of `rhs`.
///
/// `sub[0]` and `sup[n-1]` are ignored.
pub fn tridiagonal_solve(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if sub.len() != n || sup.len() != n || rhs.len() != n {
        return Err(Error::InvalidArgument("tridiagonal bands must have equal length".into()));
    }
    let mut x = rhs.to_vec();
    let mut scratch = vec![0.0; n];
    thomas_in_place(sub, diag, sup, &mut x, &mut scratch)?;
    Ok(x)
}

/// Thomas algorithm; `x` holds the right-hand side on entry and the solution on exit.
fn thomas_in_place(sub: &[f64], diag: &[f64], sup: &[f64], x: &mut [f64], c: &mut [f64]) -> Result<()> {
    let n = diag.len();
    if n == 0 {
        return Ok(());
    }
    let mut pivot = diag[0];
    if pivot.abs() < PIVOT_TOLERANCE {
        return Err(Error::SingularSystem { row: 0, pivot });
    }
    c[0] = sup[0] / pivot;
    x[0] /= pivot;
    for i in 1..n {
        pivot = diag[i] - sub[i] * c[i - 1];
        if pivot.abs() < PIVOT_TOLERANCE || !pivot.is_finite() {
            return Err(Error::SingularSystem { row: i, pivot });
        }
        c[i] = sup[i] / pivot;
        x[i] = (x[i] - sub[i] * x[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(())
}

/// Uniform spatial grid ending at the barrier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdGrid {
    pub x_min: f64,
    pub x_max: f64,
    /// Number of spatial steps.
    pub steps: usize,
    pub shifted: bool,
}

impl FdGrid {
    /// Grid on `[0.7 S0, B]` with `steps` intervals.
    ///
    /// With `shift` the spacing is adjusted so the strike falls exactly
    /// halfway between two nodes while `B` stays a node; the lower end then
    /// lands as close to `0.7 S0` as the constraint allows.
    pub fn new(s0: f64, strike: f64, barrier: f64, steps: usize, shift: bool) -> Result<Self> {
        let lower = 0.7 * s0;
        if !(barrier > lower * (1.0 + 1e-12)) {
            return Err(Error::DomainError(format!(
                "barrier {barrier} leaves no room above the lower boundary {lower}"
            )));
        }
        if steps < 3 {
            return Err(Error::InvalidArgument(format!("need at least 3 spatial steps, got {steps}")));
        }
        let width = barrier - lower;
        let mut grid = FdGrid { x_min: lower, x_max: barrier, steps, shifted: false };
        if shift && strike > lower && strike < barrier {
            let frac = (barrier - strike) / width;
            let m = (frac * steps as f64 - 0.5).floor().max(0.0);
            let h = (barrier - strike) / (m + 0.5);
            grid.x_min = barrier - steps as f64 * h;
            grid.shifted = true;
        }
        if !(s0 >= grid.x_min && s0 <= grid.x_max) {
            return Err(Error::DomainError(format!(
                "spot {s0} outside the grid [{}, {}]",
                grid.x_min, grid.x_max
            )));
        }
        Ok(grid)
    }

    #[inline]
    pub fn h(&self) -> f64 {
        (self.x_max - self.x_min) / self.steps as f64
    }

    /// Node `i`, with the barrier reproduced exactly at `i = steps`.
    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        if i == self.steps {
            self.x_max
        } else {
            self.x_max - (self.steps - i) as f64 * self.h()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.steps).map(|i| self.node(i)).collect()
    }

    /// Linear interpolation of nodal values at `x`.
    pub fn interpolate(&self, values: &[f64], x: f64) -> Result<f64> {
        if !(x >= self.x_min && x <= self.x_max) {
            return Err(Error::DomainError(format!("{x} outside [{}, {}]", self.x_min, self.x_max)));
        }
        let pos = (x - self.x_min) / self.h();
        let i = (pos.floor() as usize).min(self.steps - 1);
        let w = pos - i as f64;
        Ok((1.0 - w) * values[i] + w * values[i + 1])
    }
}

/// Coefficients of one time step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdeCoefficients {
    pub drift: f64,
    /// `a11^2 V / 2`, the coefficient of `x^2 u_xx`.
    pub diffusion: f64,
    pub discount: f64,
}

impl PdeCoefficients {
    pub fn constant(r: f64, q: f64, sigma: f64) -> Self {
        PdeCoefficients { drift: r - q, diffusion: 0.5 * sigma * sigma, discount: r }
    }
}

/// Per-step coefficients of the conditional spot dynamics along a factor path.
pub fn pde_coefficients(paths: &FactorPaths, a: &CholeskyFactors) -> Vec<PdeCoefficients> {
    let dt = paths.dt();
    let inc = &paths.increments;
    let a11_sq = a.a11 * a.a11;
    (0..paths.steps())
        .map(|i| {
            let v = paths.v[i];
            let sv = v.sqrt();
            let noise = a.a12 * inc.dim(1)[i] + a.a13 * inc.dim(2)[i] + a.a14 * inc.dim(3)[i];
            PdeCoefficients {
                drift: paths.rd[i] - paths.rf[i] - 0.5 * (1.0 - a11_sq) * v + sv * noise / dt,
                diffusion: 0.5 * a11_sq * v,
                discount: paths.rd[i],
            }
        })
        .collect()
}

/// Solver options.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeSettings {
    /// Spatial steps.
    pub l: usize,
    #[serde(default = "default_true")]
    pub shift: bool,
    /// Replace the first backward step by two implicit half steps.
    #[serde(default)]
    pub implicit_startup: bool,
}

fn default_true() -> bool {
    true
}

impl PdeSettings {
    pub fn new(l: usize) -> Self {
        PdeSettings { l, shift: true, implicit_startup: false }
    }
}

/// Reusable buffers for repeated solves on one grid.
#[derive(Debug, Clone)]
pub struct PdeWorkspace {
    grid: FdGrid,
    nodes: Vec<f64>,
    u: Vec<f64>,
    rhs: Vec<f64>,
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
    scratch: Vec<f64>,
}

impl PdeWorkspace {
    pub fn new(grid: FdGrid) -> Self {
        let m = grid.steps - 1;
        PdeWorkspace {
            grid,
            nodes: grid.nodes(),
            u: vec![0.0; grid.steps + 1],
            rhs: vec![0.0; m],
            sub: vec![0.0; m],
            diag: vec![0.0; m],
            sup: vec![0.0; m],
            scratch: vec![0.0; m],
        }
    }

    pub fn grid(&self) -> &FdGrid {
        &self.grid
    }

    /// Nodal values after the last solve.
    pub fn values(&self) -> &[f64] {
        &self.u
    }

    /// Marches from maturity back to time zero and returns `u(0, s0)`.
    ///
    /// `coeffs[n]` applies on `[t_n, t_{n+1}]`.
    pub fn solve(
        &mut self,
        coeffs: &[PdeCoefficients],
        strike: f64,
        maturity: f64,
        s0: f64,
        implicit_startup: bool,
    ) -> Result<f64> {
        if coeffs.is_empty() {
            return Err(Error::InvalidArgument("no time steps".into()));
        }
        let dt = maturity / coeffs.len() as f64;
        for (u, &x) in self.u.iter_mut().zip(&self.nodes) {
            *u = (strike - x).max(0.0);
        }
        let last = self.grid.steps;
        self.u[last] = 0.0;
        for (step, c) in coeffs.iter().enumerate().rev() {
            if implicit_startup && step + 1 == coeffs.len() {
                self.step(c, 0.5 * dt, 1.0)?;
                self.step(c, 0.5 * dt, 1.0)?;
            } else {
                self.step(c, dt, 0.5)?;
            }
        }
        self.grid.interpolate(&self.u, s0)
    }

    /// One theta-scheme step from `t + dt` to `t`.
    fn step(&mut self, c: &PdeCoefficients, dt: f64, theta: f64) -> Result<()> {
        let h = self.grid.h();
        let m = self.grid.steps - 1;
        let u = &self.u;
        for row in 0..m {
            let i = row + 1;
            let x = self.nodes[i];
            let diff = c.diffusion * x * x / (h * h);
            let conv = c.drift * x / (2.0 * h);
            let mut lo = diff - conv;
            let mut mid = -2.0 * diff - c.discount;
            let mut hi = diff + conv;
            if row == 0 {
                // u_0 = 2 u_1 - u_2
                mid += 2.0 * lo;
                hi -= lo;
                lo = 0.0;
            }
            let lu = lo * u[i - 1] + mid * u[i] + hi * u[i + 1];
            self.rhs[row] = u[i] + (1.0 - theta) * dt * lu;
            self.sub[row] = -theta * dt * lo;
            self.diag[row] = 1.0 - theta * dt * mid;
            self.sup[row] = -theta * dt * hi;
        }
        thomas_in_place(&self.sub, &self.diag, &self.sup, &mut self.rhs, &mut self.scratch)?;
        self.u[1..=m].copy_from_slice(&self.rhs);
        self.u[0] = 2.0 * self.u[1] - self.u[2];
        self.u[m + 1] = 0.0;
        Ok(())
    }
}

/// Conditional up-and-out put value at `s0` for one coefficient sequence.
pub fn solve_conditional_pde(
    coeffs: &[PdeCoefficients],
    contract: &Contract,
    s0: f64,
    settings: &PdeSettings,
) -> Result<f64> {
    let Contract::UpAndOutPut { strike, barrier, maturity } = *contract else {
        return Err(Error::UnsupportedContract("the PDE solver prices up-and-out puts only"));
    };
    let grid = FdGrid::new(s0, strike, barrier, settings.l, settings.shift)?;
    PdeWorkspace::new(grid).solve(coeffs, strike, maturity, s0, settings.implicit_startup)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_system() {
        let b = [1.0, -2.0, 3.5];
        let x = tridiagonal_solve(&[0.0; 3], &[1.0; 3], &[0.0; 3], &b).unwrap();
        assert_eq!(x, b.to_vec());
    }

    #[test]
    fn two_by_two() {
        let x = tridiagonal_solve(&[0.0, 1.0], &[2.0, 2.0], &[1.0, 0.0], &[3.0, 3.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn singular_pivot() {
        let err = tridiagonal_solve(&[0.0, 1.0], &[1.0, 1.0], &[1.0, 0.0], &[1.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::SingularSystem { row: 1, .. }));
    }

    #[test]
    fn base_barrier_grid_is_already_shifted() {
        let g = FdGrid::new(100.0, 105.0, 110.0, 20, true).unwrap();
        assert!((g.h() - 2.0).abs() < 1e-14);
        assert!((g.x_min - 70.0).abs() < 1e-12);
        assert!((g.node(15) - 100.0).abs() < 1e-12);
        for l in [20, 40, 80, 160, 37] {
            let g = FdGrid::new(100.0, 105.0, 110.0, l, true).unwrap();
            let pos = (105.0 - g.x_min) / g.h();
            assert!((pos - pos.floor() - 0.5).abs() < 1e-9, "L = {l}");
            assert_eq!(g.node(l), 110.0);
        }
    }

    #[test]
    fn degenerate_domains() {
        assert!(matches!(FdGrid::new(100.0, 105.0, 70.0, 20, true), Err(Error::DomainError(_))));
        assert!(matches!(FdGrid::new(100.0, 90.0, 95.0, 20, false), Err(Error::DomainError(_))));
    }

    #[test]
    fn zero_time_returns_payoff() {
        let grid = FdGrid::new(100.0, 105.0, 110.0, 20, true).unwrap();
        let mut ws = PdeWorkspace::new(grid);
        let c = [PdeCoefficients::constant(0.05, 0.02, 0.0); 4];
        // with no diffusion, no drift and no discounting the payoff is stationary
        let c0 = [PdeCoefficients { drift: 0.0, diffusion: 0.0, discount: 0.0 }; 4];
        let v = ws.solve(&c0, 105.0, 0.25, 100.0, false).unwrap();
        assert!((v - 5.0).abs() < 1e-12);
        for (u, x) in ws.values().iter().zip(grid.nodes()) {
            let payoff = if x >= 110.0 { 0.0 } else { (105.0 - x).max(0.0) };
            assert!((u - payoff).abs() < 1e-12);
        }
        assert!(ws.solve(&c, 105.0, 0.25, 100.0, true).is_ok());
    }
}
