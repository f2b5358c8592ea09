//! Subcommand implementations, independent of argument parsing.

use hcmix::estimators::{estimate, variance_report, EstimatorResult};
use hcmix::theory::full_report;
use hcmix::variance::{gamma_dev_partial_approx, gamma_dev_predicted, gamma_var_bounds, optimal_rho_df, ReductionGeometry};
use hcmix::{Contract, CorrelationMatrix, Method, OptionType, PdeSettings, SimulationSettings, ValidatedModel};

use crate::config::{CorrRule, CorrRuleName, RunConfig, RunSize, SurfaceConfig};
use crate::error::CliError;

pub const PRICE_HEADER: [&str; 9] = ["contract", "method", "M", "N", "L", "mean", "stderr", "bias", "seconds"];

pub const SURFACE_HEADER: [&str; 15] = [
    "rho_sv",
    "rho_sd",
    "rho_sf",
    "rho_df",
    "valid",
    "a11",
    "gamma_dev",
    "gamma_var",
    "gamma_dev_predicted",
    "mu_partial",
    "bound_lower",
    "bound_upper",
    "stderr_standard",
    "stderr_mixed",
    "seconds",
];

/// Rows of a CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Table { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn write<W: std::io::Write>(&self, out: W) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn contract_label(contract: &Contract) -> String {
    let side = |o: &OptionType| match o {
        OptionType::Call => "call",
        OptionType::Put => "put",
    };
    match contract {
        Contract::European { option, .. } => format!("european_{}", side(option)),
        Contract::CashOrNothing { option, .. } => format!("cash_or_nothing_{}", side(option)),
        Contract::AssetOrNothing { option, .. } => format!("asset_or_nothing_{}", side(option)),
        Contract::UpAndOutPut { .. } => "up_and_out_put".into(),
    }
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn price_row(contract: &Contract, method: Method, r: &EstimatorResult) -> Vec<String> {
    vec![
        contract_label(contract),
        method.as_str().into(),
        r.m.to_string(),
        r.n.to_string(),
        opt(r.l),
        r.mean.to_string(),
        r.stderr.to_string(),
        opt(r.bias),
        format!("{:.3}", r.seconds),
    ]
}

fn settings(cfg: &RunConfig, size: RunSize) -> SimulationSettings {
    SimulationSettings::new(size.m, size.n, cfg.seed).with_threads(cfg.threads)
}

pub fn price(cfg: &RunConfig, model: &ValidatedModel) -> Result<Table, CliError> {
    let s = settings(cfg, RunSize { m: cfg.m, n: cfg.n });
    let mut r = estimate(model, &cfg.contract, cfg.method, &s, &cfg.pde())?;
    if let Some(reference) = cfg.reference {
        r = r.with_reference(reference);
    }
    let mut table = Table::new(&PRICE_HEADER);
    table.rows.push(price_row(&cfg.contract, cfg.method, &r));
    Ok(table)
}

/// Runs the schedule; returns the table and the reference the biases refer to.
pub fn convergence_study(cfg: &RunConfig, model: &ValidatedModel) -> Result<(Table, f64), CliError> {
    let study = cfg
        .convergence
        .as_ref()
        .ok_or_else(|| CliError::Config("convergence-study needs a `convergence` section".into()))?;
    let sweep: Vec<usize> = if study.l.is_empty() { vec![cfg.l] } else { study.l.clone() };
    let methods = if study.methods.is_empty() { vec![cfg.method] } else { study.methods.clone() };

    let reference = match cfg.reference {
        Some(r) => r,
        None => {
            let size = study.reference_run.unwrap_or_else(|| RunSize {
                m: study.schedule.iter().map(|s| s.m).max().unwrap_or(cfg.m),
                n: 4 * study.schedule.iter().map(|s| s.n).max().unwrap_or(cfg.n),
            });
            let pde = PdeSettings { l: *sweep.iter().max().unwrap(), ..cfg.pde() };
            estimate(model, &cfg.contract, Method::Mixed, &settings(cfg, size), &pde)?.mean
        }
    };

    let mut table = Table::new(&PRICE_HEADER);
    for &method in &methods {
        let uses_pde = method == Method::Mixed && !cfg.contract.is_path_independent();
        for &size in &study.schedule {
            let levels: &[usize] = if uses_pde { &sweep } else { &sweep[..1] };
            for &l in levels {
                let pde = PdeSettings { l, ..cfg.pde() };
                let r = estimate(model, &cfg.contract, method, &settings(cfg, size), &pde)?.with_reference(reference);
                table.rows.push(price_row(&cfg.contract, method, &r));
            }
        }
    }
    Ok((table, reference))
}

fn apply_rule(rule: CorrRule, base: f64, rho_sd: f64) -> f64 {
    match rule {
        CorrRule::Fixed(x) => x,
        CorrRule::Named(CorrRuleName::Base) => base,
        CorrRule::Named(CorrRuleName::EqualToRhoSd) => rho_sd,
        // resolved by the caller
        CorrRule::Named(CorrRuleName::Optimal) => base,
    }
}

fn grid_point(base: &CorrelationMatrix, s: &SurfaceConfig, rho_sv: f64, rho_sd: f64) -> CorrelationMatrix {
    let rho_sf = apply_rule(s.rho_sf, base.rho_sf, rho_sd);
    let rho_df = match s.rho_df {
        CorrRule::Named(CorrRuleName::Optimal) => match optimal_rho_df(rho_sd, rho_sf, s.rho_df_range) {
            Ok((v, _)) => v,
            // with both spot-rate correlations zero every rho_df is optimal
            Err(_) => 0.0,
        },
        rule => apply_rule(rule, base.rho_df, rho_sd),
    };
    CorrelationMatrix { rho_sv, rho_sd, rho_sf, rho_df, ..*base }
}

pub fn variance_surface(cfg: &RunConfig) -> Result<Table, CliError> {
    let s = cfg
        .surface
        .as_ref()
        .ok_or_else(|| CliError::Config("variance-surface needs a `surface` section".into()))?;
    let sim = settings(cfg, RunSize { m: cfg.m, n: cfg.n });
    let mut table = Table::new(&SURFACE_HEADER);
    for &rho_sv in &s.rho_sv {
        for &rho_sd in &s.rho_sd {
            let corr = grid_point(&cfg.model.corr, s, rho_sv, rho_sd);
            let mut row = vec![rho_sv.to_string(), rho_sd.to_string(), corr.rho_sf.to_string(), corr.rho_df.to_string()];
            let Ok(model) = cfg.model.with_corr(corr).validate() else {
                row.push("false".into());
                row.resize(SURFACE_HEADER.len(), String::new());
                table.rows.push(row);
                continue;
            };
            let rep = variance_report(&model, &cfg.contract, &sim, &cfg.pde())?;
            let a11 = model.factors().a11;
            let bounds = if cfg.contract.is_path_independent() {
                ReductionGeometry::from_model(&model, cfg.contract.strike(), cfg.contract.maturity(), cfg.n)
                    .and_then(|g| gamma_var_bounds(&g))
                    .ok()
            } else {
                None
            };
            row.extend([
                "true".into(),
                a11.to_string(),
                rep.gamma_dev.to_string(),
                rep.gamma_var.to_string(),
                gamma_dev_predicted(a11.min(1.0))?.to_string(),
                opt(gamma_dev_partial_approx(&corr).ok()),
                opt(bounds.map(|b| b.lower)),
                opt(bounds.map(|b| b.upper)),
                rep.standard.stderr.to_string(),
                rep.mixed.stderr.to_string(),
                format!("{:.3}", rep.mixed.seconds),
            ]);
            table.rows.push(row);
        }
    }
    Ok(table)
}

pub fn theory_check(cfg: &RunConfig, model: &ValidatedModel) -> Result<String, CliError> {
    let report = full_report(cfg.alpha, model, cfg.contract.maturity())?;
    serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))
}
