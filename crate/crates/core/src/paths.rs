//! Full-truncation Euler paths of the variance and the two short rates.

use std::io::Write;

use crate::error::Result;
use crate::model::{ModelParams, TimeGrid, ValidatedModel};
use crate::rng::PathRng;

/// Independent Brownian increments `dW~1..dW~4` of one path.
///
/// `dw[j][n]` is the increment of `W~(j+1)` over step `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Increments {
    dt: f64,
    dw: [Vec<f64>; 4],
}

impl Increments {
    pub fn zeros(grid: &TimeGrid) -> Self {
        let n = grid.steps();
        Increments {
            dt: grid.dt(),
            dw: [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]],
        }
    }

    /// Draws all four dimensions step by step from the path's stream.
    pub fn draw(&mut self, rng: &mut PathRng) {
        let sd = self.dt.sqrt();
        for n in 0..self.steps() {
            for j in 0..4 {
                self.dw[j][n] = sd * rng.normal();
            }
        }
    }

    /// Fresh increments for path `index` of the stream keyed by `seed`.
    pub fn sample(grid: &TimeGrid, seed: u64, index: u64) -> Self {
        let mut inc = Increments::zeros(grid);
        inc.draw(&mut PathRng::new(seed, index));
        inc
    }

    /// Overwrites `self` with `fine` summed over blocks of `factor` steps.
    pub fn coarsen_from(&mut self, fine: &Increments, factor: usize) {
        assert!(factor >= 1 && fine.steps().is_multiple_of(factor));
        let n = fine.steps() / factor;
        self.dt = fine.dt * factor as f64;
        for j in 0..4 {
            self.dw[j].clear();
            self.dw[j].extend(fine.dw[j].chunks_exact(factor).map(|c| c.iter().sum::<f64>()));
            debug_assert_eq!(self.dw[j].len(), n);
        }
    }

    #[inline]
    pub fn steps(&self) -> usize {
        self.dw[0].len()
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Increments of `W~(j+1)`, `j` in `0..4`.
    #[inline]
    pub fn dim(&self, j: usize) -> &[f64] {
        &self.dw[j]
    }

    pub fn dim_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.dw[j]
    }
}

/// One FTE update `y + k(theta - y+) dt + xi sqrt(y+) dW` of the auxiliary process.
#[inline]
pub fn fte_step(y: f64, k: f64, theta: f64, xi: f64, dw: f64, dt: f64) -> f64 {
    let yp = y.max(0.0);
    y + k * (theta - yp) * dt + xi * yp.sqrt() * dw
}

/// FTE update of the foreign rate including the quanto drift `-rho_sf xi_f sqrt(v+ rf+)`.
///
/// `v` is the auxiliary variance at the start of the step and `dw_f` the
/// correlated foreign-rate increment.
#[inline]
pub fn foreign_rate_step(rf: f64, v: f64, dw_f: f64, params: &ModelParams, dt: f64) -> f64 {
    let rp = rf.max(0.0);
    let vp = v.max(0.0);
    let drift = params.k_f * params.theta_f
        - params.k_f * rp
        - params.corr.rho_sf * params.xi_f * (vp * rp).sqrt();
    rf + drift * dt + params.xi_f * rp.sqrt() * dw_f
}

/// Node values of `V`, `r_d`, `r_f` (positive parts) with the driving increments.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPaths {
    pub v: Vec<f64>,
    pub rd: Vec<f64>,
    pub rf: Vec<f64>,
    pub increments: Increments,
    /// Grid nodes `t_1..t_N` at which the auxiliary variance was negative.
    pub negative_variance_nodes: usize,
}

impl FactorPaths {
    pub fn zeros(grid: &TimeGrid) -> Self {
        let n = grid.steps() + 1;
        FactorPaths {
            v: vec![0.0; n],
            rd: vec![0.0; n],
            rf: vec![0.0; n],
            increments: Increments::zeros(grid),
            negative_variance_nodes: 0,
        }
    }

    /// Simulates path `index` of the stream keyed by `seed`.
    pub fn simulate(model: &ValidatedModel, grid: &TimeGrid, seed: u64, index: u64) -> Self {
        let mut p = FactorPaths::zeros(grid);
        p.resimulate(model, seed, index);
        p
    }

    /// Redraws increments for path `index` and evolves in place.
    pub fn resimulate(&mut self, model: &ValidatedModel, seed: u64, index: u64) {
        let mut rng = PathRng::new(seed, index);
        self.increments.draw(&mut rng);
        self.evolve(model);
    }

    /// Recomputes the node values from the stored increments.
    pub fn evolve(&mut self, model: &ValidatedModel) {
        let p = model.params();
        let a = model.factors();
        let steps = self.increments.steps();
        let dt = self.increments.dt();
        self.v.resize(steps + 1, 0.0);
        self.rd.resize(steps + 1, 0.0);
        self.rf.resize(steps + 1, 0.0);

        let (mut v, mut rd, mut rf) = (p.v0, p.r0_d, p.r0_f);
        self.v[0] = v.max(0.0);
        self.rd[0] = rd.max(0.0);
        self.rf[0] = rf.max(0.0);
        let mut negative = 0;
        let [_, w2, w3, w4] = &self.increments.dw;
        for n in 0..steps {
            let dwv = w4[n];
            let dwd = a.a33 * w3[n] + a.a34 * w4[n];
            let dwf = a.a22 * w2[n] + a.a23 * w3[n] + a.a24 * w4[n];
            let v_next = fte_step(v, p.k, p.theta, p.xi, dwv, dt);
            let rd_next = fte_step(rd, p.k_d, p.theta_d, p.xi_d, dwd, dt);
            let rf_next = foreign_rate_step(rf, v, dwf, p, dt);
            v = v_next;
            rd = rd_next;
            rf = rf_next;
            if v < 0.0 {
                negative += 1;
            }
            self.v[n + 1] = v.max(0.0);
            self.rd[n + 1] = rd.max(0.0);
            self.rf[n + 1] = rf.max(0.0);
        }
        self.negative_variance_nodes = negative;
    }

    #[inline]
    pub fn steps(&self) -> usize {
        self.increments.steps()
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.increments.dt()
    }
}

/// Lazily simulated paths `0..m` of the stream keyed by `seed`.
pub fn simulate_factor_paths<'a>(
    model: &'a ValidatedModel,
    grid: &'a TimeGrid,
    seed: u64,
    m: usize,
) -> impl Iterator<Item = FactorPaths> + 'a {
    (0..m as u64).map(move |i| FactorPaths::simulate(model, grid, seed, i))
}

/// Writes paths as flat little-endian arrays for offline inspection.
///
/// Layout: `u64 M, u64 N, f64 T`, then per path `v, r_d, r_f` (N+1 values
/// each) followed by `dW~1..dW~4` (N values each).
pub fn write_path_dump<W, I>(mut out: W, grid: &TimeGrid, paths: I) -> Result<()>
where
    W: Write,
    I: ExactSizeIterator<Item = FactorPaths>,
{
    out.write_all(&(paths.len() as u64).to_le_bytes())?;
    out.write_all(&(grid.steps() as u64).to_le_bytes())?;
    out.write_all(&grid.maturity().to_le_bytes())?;
    for path in paths {
        for series in [&path.v, &path.rd, &path.rf] {
            for x in series.iter() {
                out.write_all(&x.to_le_bytes())?;
            }
        }
        for j in 0..4 {
            for x in path.increments.dim(j) {
                out.write_all(&x.to_le_bytes())?;
            }
        }
    }
    out.flush()?;
    Ok(())
}
