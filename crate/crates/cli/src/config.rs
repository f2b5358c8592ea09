//! Run configuration read from JSON.

use std::path::{Path, PathBuf};

use hcmix::{Contract, Method, ModelParams, PdeSettings, ValidatedModel};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Everything a run needs; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    pub contract: Contract,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L", default = "default_l")]
    pub l: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<f64>,
    /// Worker threads, 0 for one per core.
    #[serde(default)]
    pub threads: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default = "default_true")]
    pub grid_shift: bool,
    #[serde(default)]
    pub implicit_startup: bool,
    /// Moment order for `theory-check`.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface: Option<SurfaceConfig>,
}

fn default_method() -> Method {
    Method::Mixed
}

fn default_l() -> usize {
    20
}

fn default_true() -> bool {
    true
}

fn default_alpha() -> f64 {
    2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSize {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
}

/// Schedule for `convergence-study`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub schedule: Vec<RunSize>,
    /// Spatial steps to sweep at each schedule point; empty uses `L`.
    #[serde(rename = "L", default, skip_serializing_if = "Vec::is_empty")]
    pub l: Vec<usize>,
    /// Methods to run; defaults to the top-level method.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub methods: Vec<Method>,
    /// Size of the mixed run used as reference when none is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_run: Option<RunSize>,
}

/// How a correlation not on the grid axes is chosen at each grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CorrRule {
    Fixed(f64),
    Named(CorrRuleName),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrRuleName {
    /// Keep the value of the model section.
    Base,
    /// `rho_sf = rho_sd`.
    EqualToRhoSd,
    /// `rho_df` minimising the rate contribution to the variance.
    Optimal,
}

/// Correlation grid for `variance-surface`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceConfig {
    pub rho_sv: Vec<f64>,
    pub rho_sd: Vec<f64>,
    #[serde(default = "base_rule")]
    pub rho_sf: CorrRule,
    #[serde(default = "base_rule")]
    pub rho_df: CorrRule,
    /// Admissible interval for the optimal `rho_df`.
    #[serde(default = "default_df_range")]
    pub rho_df_range: (f64, f64),
}

fn base_rule() -> CorrRule {
    CorrRule::Named(CorrRuleName::Base)
}

fn default_df_range() -> (f64, f64) {
    (-0.85, 0.85)
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn pde(&self) -> PdeSettings {
        PdeSettings { l: self.l, shift: self.grid_shift, implicit_startup: self.implicit_startup }
    }

    /// Checks everything that can be checked without running a simulation.
    pub fn validate(&self) -> Result<ValidatedModel, CliError> {
        let model = self.model.validate().map_err(CliError::from_validation)?;
        self.contract.validate().map_err(CliError::from_validation)?;
        if self.m < 2 {
            return Err(CliError::Config(format!("M must be at least 2, got {}", self.m)));
        }
        if self.n == 0 {
            return Err(CliError::Config("N must be at least 1".into()));
        }
        if self.l < 3 {
            return Err(CliError::Config(format!("L must be at least 3, got {}", self.l)));
        }
        if !(self.alpha >= 1.0) {
            return Err(CliError::Config(format!("alpha must be >= 1, got {}", self.alpha)));
        }
        check_method(&self.contract, self.method)?;
        if let Some(c) = &self.convergence {
            if c.schedule.is_empty() {
                return Err(CliError::Config("convergence schedule is empty".into()));
            }
            for s in c.schedule.iter().chain(c.reference_run.iter()) {
                if s.m < 2 || s.n == 0 {
                    return Err(CliError::Config(format!("bad schedule entry M={} N={}", s.m, s.n)));
                }
            }
            if let Some(&l) = c.l.iter().find(|&&l| l < 3) {
                return Err(CliError::Config(format!("L must be at least 3, got {l}")));
            }
            for &method in &c.methods {
                check_method(&self.contract, method)?;
            }
        }
        if let Some(s) = &self.surface {
            if s.rho_sv.is_empty() || s.rho_sd.is_empty() {
                return Err(CliError::Config("surface axes must be non-empty".into()));
            }
            if s.rho_df_range.0 > s.rho_df_range.1 {
                return Err(CliError::Config("rho_df_range must be increasing".into()));
            }
            if matches!(s.rho_sf, CorrRule::Named(CorrRuleName::Optimal)) {
                return Err(CliError::Config("rho_sf has no optimal rule".into()));
            }
            if matches!(s.rho_df, CorrRule::Named(CorrRuleName::EqualToRhoSd)) {
                return Err(CliError::Config("equal_to_rho_sd applies to rho_sf only".into()));
            }
        }
        Ok(model)
    }
}

fn check_method(contract: &Contract, method: Method) -> Result<(), CliError> {
    if contract.is_path_independent() && method == Method::StandardBridge {
        return Err(CliError::Config("standard-bridge needs a barrier contract".into()));
    }
    Ok(())
}

/// Resolves `path` against `HCMIX_OUT_DIR` when it is relative.
pub fn resolve_output(path: &Path, out_dir: Option<&Path>) -> PathBuf {
    match out_dir {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path.to_path_buf(),
    }
}
