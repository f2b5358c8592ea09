//! Mixed Monte Carlo/PDE and standard Monte Carlo estimators.
//!
//! Paths are processed in fixed blocks of [`BLOCK_SIZE`]; each block keeps its
//! own running moments and the blocks are merged in index order, so results
//! are bit-identical for any number of worker threads.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{fill_spot, payoff_discounted, PayoffMode, SpotPath};
use crate::conditional::{conditional_coefficients, conditional_price};
use crate::error::{Error, Result};
use crate::model::{Contract, TimeGrid, ValidatedModel};
use crate::paths::{FactorPaths, Increments};
use crate::pde::{pde_coefficients, FdGrid, PdeSettings, PdeWorkspace};

pub const BLOCK_SIZE: usize = 1024;

/// Running count, mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Welford {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Welford {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Welford) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = self.count + other.count;
        let delta = other.mean - self.mean;
        self.mean += delta * (other.count as f64 / n as f64);
        self.m2 += other.m2 + delta * delta * (self.count as f64 * other.count as f64 / n as f64);
        self.count = n;
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        (self.variance() / self.count as f64).sqrt()
    }
}

/// Monte Carlo sample size, time grid resolution and reproducibility controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationSettings {
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
    /// Worker threads; 0 lets the runtime decide.
    pub threads: usize,
}

impl SimulationSettings {
    pub fn new(paths: usize, steps: usize, seed: u64) -> Self {
        SimulationSettings { paths, steps, seed, threads: 0 }
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }

    fn check(&self) -> Result<()> {
        if self.paths == 0 {
            return Err(Error::InvalidArgument("need at least one path".into()));
        }
        if self.steps == 0 {
            return Err(Error::InvalidArgument("need at least one time step".into()));
        }
        Ok(())
    }
}

/// Price estimate with its statistical error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorResult {
    pub mean: f64,
    pub stderr: f64,
    /// Per-sample variance.
    pub variance: f64,
    pub m: usize,
    pub n: usize,
    pub l: Option<usize>,
    pub seconds: f64,
    pub bias: Option<f64>,
}

impl EstimatorResult {
    fn from_stats(stats: &Welford, n: usize, l: Option<usize>, seconds: f64) -> Self {
        EstimatorResult {
            mean: stats.mean,
            stderr: stats.stderr(),
            variance: stats.variance(),
            m: stats.count as usize,
            n,
            l,
            seconds,
            bias: None,
        }
    }

    pub fn with_reference(mut self, reference: f64) -> Self {
        self.bias = Some(self.mean - reference);
        self
    }
}

/// Standard and mixed estimators on common random numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub gamma_var: f64,
    pub gamma_dev: f64,
    pub standard: EstimatorResult,
    pub mixed: EstimatorResult,
}

/// Estimator families exposed to the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Mixed,
    Standard,
    StandardBridge,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Mixed => "mixed",
            Method::Standard => "standard",
            Method::StandardBridge => "standard-bridge",
        }
    }
}

/// Runs `f` inside a pool with the requested number of threads.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Evaluates `sample` for paths `0..m` and accumulates `k` statistics per path.
///
/// `make` builds per-block scratch space; `sample` writes `k` values into
/// the output slice.
pub fn accumulate<W, M, F>(m: usize, k: usize, threads: usize, make: M, sample: F) -> Result<Vec<Welford>>
where
    M: Fn() -> W + Sync,
    F: Fn(&mut W, u64, &mut [f64]) -> Result<()> + Sync,
{
    let blocks = m.div_ceil(BLOCK_SIZE);
    let partial: Vec<Result<Vec<Welford>>> = with_threads(threads, || {
        (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut ws = make();
                let mut stats = vec![Welford::default(); k];
                let mut out = vec![0.0; k];
                let end = ((b + 1) * BLOCK_SIZE).min(m);
                for i in b * BLOCK_SIZE..end {
                    sample(&mut ws, i as u64, &mut out)?;
                    for (s, &x) in stats.iter_mut().zip(&out) {
                        s.push(x);
                    }
                }
                Ok(stats)
            })
            .collect()
    })?;
    let mut total = vec![Welford::default(); k];
    for block in partial {
        for (t, s) in total.iter_mut().zip(block?) {
            t.merge(&s);
        }
    }
    Ok(total)
}

fn check_path_independent(contract: &Contract) -> Result<()> {
    contract.validate()?;
    if contract.is_path_independent() {
        Ok(())
    } else {
        Err(Error::UnsupportedContract("barrier contracts need the barrier estimators"))
    }
}

fn check_barrier(contract: &Contract) -> Result<(f64, f64, f64)> {
    contract.validate()?;
    match *contract {
        Contract::UpAndOutPut { strike, barrier, maturity } => Ok((strike, barrier, maturity)),
        _ => Err(Error::UnsupportedContract("expected an up-and-out put")),
    }
}

struct SpotScratch {
    paths: FactorPaths,
    spot: SpotPath,
}

impl SpotScratch {
    fn new(grid: &TimeGrid) -> Self {
        SpotScratch {
            paths: FactorPaths::zeros(grid),
            spot: SpotPath { log_spot: Vec::with_capacity(grid.steps() + 1), discount_integral: 0.0 },
        }
    }
}

/// Average of conditional closed-form prices over simulated factor paths.
pub fn price_european_mixed(
    model: &ValidatedModel,
    contract: &Contract,
    settings: &SimulationSettings,
) -> Result<EstimatorResult> {
    check_path_independent(contract)?;
    settings.check()?;
    let grid = TimeGrid::new(contract.maturity(), settings.steps)?;
    let start = Instant::now();
    let s0 = model.spot();
    let stats = accumulate(
        settings.paths,
        1,
        settings.threads,
        || FactorPaths::zeros(&grid),
        |p, i, out| {
            p.resimulate(model, settings.seed, i);
            let cc = conditional_coefficients(p, model.factors(), &grid);
            out[0] = conditional_price(contract, &cc, s0)?;
            Ok(())
        },
    )?;
    Ok(EstimatorResult::from_stats(&stats[0], settings.steps, None, start.elapsed().as_secs_f64()))
}

/// Discounted terminal payoffs of log-Euler spot paths.
pub fn price_european_standard(
    model: &ValidatedModel,
    contract: &Contract,
    settings: &SimulationSettings,
) -> Result<EstimatorResult> {
    check_path_independent(contract)?;
    settings.check()?;
    let grid = TimeGrid::new(contract.maturity(), settings.steps)?;
    let start = Instant::now();
    let stats = accumulate(
        settings.paths,
        1,
        settings.threads,
        || SpotScratch::new(&grid),
        |w, i, out| {
            w.paths.resimulate(model, settings.seed, i);
            fill_spot(&w.paths, model.factors(), model.spot(), &mut w.spot);
            out[0] = payoff_discounted(&w.spot, &w.paths, contract, PayoffMode::Terminal)?;
            Ok(())
        },
    )?;
    Ok(EstimatorResult::from_stats(&stats[0], settings.steps, None, start.elapsed().as_secs_f64()))
}

struct PdeScratch {
    paths: FactorPaths,
    solver: PdeWorkspace,
}

/// Average of per-path Crank-Nicolson solutions of the conditional PDE.
pub fn price_barrier_mixed(
    model: &ValidatedModel,
    contract: &Contract,
    settings: &SimulationSettings,
    pde: &PdeSettings,
) -> Result<EstimatorResult> {
    let (strike, barrier, maturity) = check_barrier(contract)?;
    settings.check()?;
    let grid = TimeGrid::new(maturity, settings.steps)?;
    let s0 = model.spot();
    let fd = FdGrid::new(s0, strike, barrier, pde.l, pde.shift)?;
    let start = Instant::now();
    let stats = accumulate(
        settings.paths,
        1,
        settings.threads,
        || PdeScratch { paths: FactorPaths::zeros(&grid), solver: PdeWorkspace::new(fd) },
        |w, i, out| {
            w.paths.resimulate(model, settings.seed, i);
            let coeffs = pde_coefficients(&w.paths, model.factors());
            out[0] = w.solver.solve(&coeffs, strike, maturity, s0, pde.implicit_startup)?;
            Ok(())
        },
    )?;
    Ok(EstimatorResult::from_stats(&stats[0], settings.steps, Some(pde.l), start.elapsed().as_secs_f64()))
}

/// Standard Monte Carlo for the up-and-out put, node-monitored or bridge-weighted.
pub fn price_barrier_standard(
    model: &ValidatedModel,
    contract: &Contract,
    settings: &SimulationSettings,
    bridge: bool,
) -> Result<EstimatorResult> {
    let (_, _, maturity) = check_barrier(contract)?;
    settings.check()?;
    let grid = TimeGrid::new(maturity, settings.steps)?;
    let mode = if bridge { PayoffMode::BridgeBarrier } else { PayoffMode::DiscreteBarrier };
    let start = Instant::now();
    let stats = accumulate(
        settings.paths,
        1,
        settings.threads,
        || SpotScratch::new(&grid),
        |w, i, out| {
            w.paths.resimulate(model, settings.seed, i);
            fill_spot(&w.paths, model.factors(), model.spot(), &mut w.spot);
            out[0] = payoff_discounted(&w.spot, &w.paths, contract, mode)?;
            Ok(())
        },
    )?;
    Ok(EstimatorResult::from_stats(&stats[0], settings.steps, None, start.elapsed().as_secs_f64()))
}

/// Dispatches on contract and method.
pub fn estimate(
    model: &ValidatedModel,
    contract: &Contract,
    method: Method,
    settings: &SimulationSettings,
    pde: &PdeSettings,
) -> Result<EstimatorResult> {
    match (contract.is_path_independent(), method) {
        (true, Method::Mixed) => price_european_mixed(model, contract, settings),
        (true, Method::Standard) => price_european_standard(model, contract, settings),
        (true, Method::StandardBridge) => {
            Err(Error::InvalidArgument("bridge monitoring applies to barrier contracts only".into()))
        }
        (false, Method::Mixed) => price_barrier_mixed(model, contract, settings, pde),
        (false, Method::Standard) => price_barrier_standard(model, contract, settings, false),
        (false, Method::StandardBridge) => price_barrier_standard(model, contract, settings, true),
    }
}

/// Both arms on the same factor paths; the barrier standard arm is bridge-weighted.
pub fn variance_report(
    model: &ValidatedModel,
    contract: &Contract,
    settings: &SimulationSettings,
    pde: &PdeSettings,
) -> Result<VarianceReport> {
    contract.validate()?;
    settings.check()?;
    let grid = TimeGrid::new(contract.maturity(), settings.steps)?;
    let s0 = model.spot();
    let a = model.factors();
    let start = Instant::now();
    let stats = if contract.is_path_independent() {
        accumulate(
            settings.paths,
            2,
            settings.threads,
            || SpotScratch::new(&grid),
            |w, i, out| {
                w.paths.resimulate(model, settings.seed, i);
                fill_spot(&w.paths, a, s0, &mut w.spot);
                out[0] = payoff_discounted(&w.spot, &w.paths, contract, PayoffMode::Terminal)?;
                let cc = conditional_coefficients(&w.paths, a, &grid);
                out[1] = conditional_price(contract, &cc, s0)?;
                Ok(())
            },
        )?
    } else {
        let (strike, barrier, maturity) = check_barrier(contract)?;
        let fd = FdGrid::new(s0, strike, barrier, pde.l, pde.shift)?;
        accumulate(
            settings.paths,
            2,
            settings.threads,
            || (SpotScratch::new(&grid), PdeWorkspace::new(fd)),
            |(w, solver), i, out| {
                w.paths.resimulate(model, settings.seed, i);
                fill_spot(&w.paths, a, s0, &mut w.spot);
                out[0] = payoff_discounted(&w.spot, &w.paths, contract, PayoffMode::BridgeBarrier)?;
                let coeffs = pde_coefficients(&w.paths, a);
                out[1] = solver.solve(&coeffs, strike, maturity, s0, pde.implicit_startup)?;
                Ok(())
            },
        )?
    };
    let seconds = start.elapsed().as_secs_f64();
    let l = (!contract.is_path_independent()).then_some(pde.l);
    let standard = EstimatorResult::from_stats(&stats[0], settings.steps, None, seconds);
    let mixed = EstimatorResult::from_stats(&stats[1], settings.steps, l, seconds);
    let gamma_var = if mixed.variance > 0.0 {
        standard.variance / mixed.variance
    } else {
        f64::INFINITY
    };
    Ok(VarianceReport { gamma_var, gamma_dev: gamma_var.sqrt(), standard, mixed })
}

/// Estimated bias at one coarse resolution relative to a coupled fine grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoupledBias {
    pub n: usize,
    /// Mean of `Y_n - Y_fine` over paths.
    pub bias: f64,
    pub stderr: f64,
}

fn check_levels(levels: &[usize], fine: usize) -> Result<()> {
    for &n in levels {
        if n == 0 || !fine.is_multiple_of(n) {
            return Err(Error::InvalidArgument(format!("level {n} does not divide the fine grid {fine}")));
        }
    }
    Ok(())
}

fn coupled_stats(stats: &[Welford], levels: &[usize]) -> Vec<CoupledBias> {
    levels
        .iter()
        .zip(stats)
        .map(|(&n, s)| CoupledBias { n, bias: s.mean, stderr: s.stderr() })
        .collect()
}

/// Time-discretisation bias of the mixed European estimator at each level.
///
/// Every path is simulated once on the `fine` grid; coarse increments are
/// sums of fine ones, so `Y_n - Y_fine` has small variance and the bias is
/// resolved with far fewer paths than an uncoupled comparison needs.
pub fn european_bias_study(
    model: &ValidatedModel,
    contract: &Contract,
    levels: &[usize],
    fine: usize,
    paths: usize,
    seed: u64,
    threads: usize,
) -> Result<Vec<CoupledBias>> {
    check_path_independent(contract)?;
    check_levels(levels, fine)?;
    let t = contract.maturity();
    let fine_grid = TimeGrid::new(t, fine)?;
    let grids: Vec<TimeGrid> = levels.iter().map(|&n| TimeGrid::new(t, n)).collect::<Result<_>>()?;
    let a = model.factors();
    let s0 = model.spot();
    let stats = accumulate(
        paths,
        levels.len(),
        threads,
        || (FactorPaths::zeros(&fine_grid), FactorPaths::zeros(&fine_grid)),
        |(fp, cp), i, out| {
            fp.increments = Increments::sample(&fine_grid, seed, i);
            fp.evolve(model);
            let y_fine = conditional_price(contract, &conditional_coefficients(fp, a, &fine_grid), s0)?;
            for ((o, &n), g) in out.iter_mut().zip(levels).zip(&grids) {
                cp.increments.coarsen_from(&fp.increments, fine / n);
                cp.evolve(model);
                *o = conditional_price(contract, &conditional_coefficients(cp, a, g), s0)? - y_fine;
            }
            Ok(())
        },
    )?;
    Ok(coupled_stats(&stats, levels))
}

/// Coupled bias of the node-monitored and bridge-weighted barrier estimators.
///
/// The reference is the bridge-weighted estimator on the `fine` grid.
/// Returns `(discrete, bridge)` estimates per level.
pub fn barrier_bias_study(
    model: &ValidatedModel,
    contract: &Contract,
    levels: &[usize],
    fine: usize,
    paths: usize,
    seed: u64,
    threads: usize,
) -> Result<(Vec<CoupledBias>, Vec<CoupledBias>)> {
    let (_, _, t) = check_barrier(contract)?;
    check_levels(levels, fine)?;
    let fine_grid = TimeGrid::new(t, fine)?;
    let a = model.factors();
    let s0 = model.spot();
    let k = levels.len();
    let stats = accumulate(
        paths,
        2 * k,
        threads,
        || (SpotScratch::new(&fine_grid), FactorPaths::zeros(&fine_grid)),
        |(w, cp), i, out| {
            w.paths.increments = Increments::sample(&fine_grid, seed, i);
            w.paths.evolve(model);
            fill_spot(&w.paths, a, s0, &mut w.spot);
            let y_fine = payoff_discounted(&w.spot, &w.paths, contract, PayoffMode::BridgeBarrier)?;
            for (j, &n) in levels.iter().enumerate() {
                cp.increments.coarsen_from(&w.paths.increments, fine / n);
                cp.evolve(model);
                fill_spot(cp, a, s0, &mut w.spot);
                out[j] = payoff_discounted(&w.spot, cp, contract, PayoffMode::DiscreteBarrier)? - y_fine;
                out[k + j] = payoff_discounted(&w.spot, cp, contract, PayoffMode::BridgeBarrier)? - y_fine;
            }
            Ok(())
        },
    )?;
    Ok((coupled_stats(&stats[..k], levels), coupled_stats(&stats[k..], levels)))
}
