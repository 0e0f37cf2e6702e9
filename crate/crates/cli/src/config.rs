//! Run configuration: TOML sections, defaults and physics validation.

use std::path::PathBuf;

use qns_core::dynamics::{Formulation, InitialData, StepControl};
use qns_core::fields::PeriodicGrid;
use qns_core::{check_admissible, derived_mu, ModelParams};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config violates {hypothesis}: {detail}")]
    Validation { hypothesis: String, detail: String },
}

fn invalid<T>(hypothesis: &str, detail: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Validation {
        hypothesis: hypothesis.to_string(),
        detail: detail.into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Run,
    Compare,
    Sweep,
    Verify,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    pub nu: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    pub n: usize,
    #[serde(default = "one")]
    pub length: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    pub t_end: f64,
    #[serde(default = "default_cfl")]
    pub cfl_safety: f64,
    #[serde(default)]
    pub dt_fixed: Option<f64>,
    #[serde(default)]
    pub dt_max: Option<f64>,
    /// Diagnostics are recorded every `diag_cadence` steps and at the end.
    #[serde(default = "default_cadence")]
    pub diag_cadence: usize,
    /// Snapshots every `snapshot_cadence` steps and at the end; 0 writes none.
    #[serde(default)]
    pub snapshot_cadence: usize,
    #[serde(default = "default_floor")]
    pub positivity_floor: f64,
}

fn default_cfl() -> f64 {
    0.3
}

fn default_cadence() -> usize {
    10
}

fn default_floor() -> f64 {
    1e-10
}

impl ControlSection {
    pub fn step_control(&self) -> StepControl {
        StepControl {
            cfl_safety: self.cfl_safety,
            dt_max: self.dt_max.unwrap_or(f64::INFINITY),
            t_end: self.t_end,
            positivity_floor: self.positivity_floor,
            dt_fixed: self.dt_fixed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormulationKind {
    #[default]
    Primitive,
    Effective,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub formulation: FormulationKind,
    /// Transform constant of the effective formulation; defaults to `mu`.
    #[serde(default)]
    pub c: Option<f64>,
    /// Transform constant of the recorded entropy functional; defaults to the
    /// formulation's `c`, or `mu` for primitive runs.
    #[serde(default)]
    pub bd_c: Option<f64>,
    #[serde(default)]
    pub moment_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    #[serde(default)]
    pub c: Option<f64>,
    /// Fail when the final relative density difference exceeds this.
    #[serde(default)]
    pub max_rel_diff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub eps: Vec<f64>,
    /// Fail when any monitored run-maximum exceeds this multiple of the first entry's.
    #[serde(default)]
    pub max_growth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    #[serde(default = "default_resolutions")]
    pub resolutions: Vec<usize>,
    #[serde(default = "default_identity_eps")]
    pub eps: Vec<f64>,
    #[serde(default = "default_identity_tol")]
    pub tolerance: f64,
    #[serde(default = "default_pf_eps")]
    pub pf_eps: Vec<f64>,
    #[serde(default = "default_pf_gamma")]
    pub pf_gamma: Vec<f64>,
    #[serde(default = "default_pf_tol")]
    pub pf_tolerance: f64,
    #[serde(default = "default_samples")]
    pub coercivity_samples: usize,
    #[serde(default)]
    pub seed: u64,
    /// Grid size of the short run used for the weak-form check.
    #[serde(default = "default_weak_n")]
    pub weak_form_n: usize,
    #[serde(default = "default_weak_t")]
    pub weak_form_t_end: f64,
    #[serde(default = "default_weak_tol")]
    pub weak_form_tolerance: f64,
}

fn default_resolutions() -> Vec<usize> {
    vec![64, 128, 256]
}
fn default_identity_eps() -> Vec<f64> {
    vec![0.0, 0.3]
}
fn default_identity_tol() -> f64 {
    1e-7
}
fn default_pf_eps() -> Vec<f64> {
    vec![0.3, 0.4, 0.5, 0.6]
}
fn default_pf_gamma() -> Vec<f64> {
    vec![1.5, 2.0, 2.5]
}
fn default_pf_tol() -> f64 {
    1e-9
}
fn default_samples() -> usize {
    10_000
}
fn default_weak_n() -> usize {
    64
}
fn default_weak_t() -> f64 {
    0.002
}
fn default_weak_tol() -> f64 {
    1e-6
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            resolutions: default_resolutions(),
            eps: default_identity_eps(),
            tolerance: default_identity_tol(),
            pf_eps: default_pf_eps(),
            pf_gamma: default_pf_gamma(),
            pf_tolerance: default_pf_tol(),
            coercivity_samples: default_samples(),
            seed: 0,
            weak_form_n: default_weak_n(),
            weak_form_t_end: default_weak_t(),
            weak_form_tolerance: default_weak_tol(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

/// The file as written, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub mode: Option<Mode>,
    pub params: PhysicsSection,
    pub grid: GridSection,
    pub initial: InitialData,
    pub control: ControlSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub compare: CompareSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    pub fn model_params(&self) -> ModelParams {
        let p = &self.params;
        ModelParams::new(p.nu, p.kappa, p.gamma, p.eps, self.grid.dim)
    }

    pub fn grid(&self) -> qns_core::Result<PeriodicGrid> {
        PeriodicGrid::new(self.grid.dim, self.grid.n, self.grid.length)
    }

    pub fn mu(&self) -> f64 {
        derived_mu(self.params.nu, self.params.kappa).unwrap_or(f64::NAN)
    }

    pub fn formulation(&self) -> Formulation {
        match self.run.formulation {
            FormulationKind::Primitive => Formulation::Primitive,
            FormulationKind::Effective => Formulation::Effective(self.run.c.unwrap_or(self.mu())),
        }
    }

    /// Resolved configuration as TOML, embedded in every output file.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_else(|e| format!("unserializable config: {e}"))
    }

    /// Check every physics hypothesis and structural constraint.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let params = self.model_params();
        admissible(&params)?;
        if let Some(s) = &self.sweep {
            if s.eps.is_empty() {
                return invalid("sweep list", "sweep.eps is empty");
            }
            for &e in &s.eps {
                admissible(&params.with_eps(e))?;
            }
        }
        if let Err(e) = self.grid() {
            return invalid("grid", e.to_string());
        }
        let ini = &self.initial;
        let lower = ini.rho_mean - ini.rho_modes.iter().map(|m| m.amp.abs()).sum::<f64>();
        if !(ini.rho_min > 0.0) || lower < ini.rho_min {
            return invalid(
                "ρ⁰ ≥ ρ_min > 0",
                format!(
                    "rho_mean - sum |amp| = {lower} against rho_min = {}",
                    ini.rho_min
                ),
            );
        }
        if let Err(e) = ini.validate(self.grid.dim) {
            return invalid("initial data", e.to_string());
        }
        let c = &self.control;
        if !(c.t_end.is_finite() && c.t_end >= 0.0) {
            return invalid("t_end ≥ 0", format!("t_end = {}", c.t_end));
        }
        if !(c.cfl_safety > 0.0 && c.cfl_safety <= 1.0) {
            return invalid("0 < cfl_safety ≤ 1", format!("cfl_safety = {}", c.cfl_safety));
        }
        if c.dt_fixed.is_some_and(|dt| !(dt > 0.0)) {
            return invalid("dt_fixed > 0", format!("dt_fixed = {:?}", c.dt_fixed));
        }
        if c.diag_cadence == 0 {
            return invalid("diag_cadence ≥ 1", "diag_cadence = 0");
        }
        let mu = self.mu();
        for (what, val) in [
            ("run.c", self.run.c),
            ("run.bd_c", self.run.bd_c),
            ("compare.c", self.compare.c),
        ] {
            if let Some(v) = val {
                if !(v > 0.0 && v <= mu) {
                    return invalid("0 < c ≤ μ", format!("{what} = {v}, mu = {mu}"));
                }
            }
        }
        if let Some(d) = self.run.moment_delta {
            if !(d > 0.0 && d < 1.0) {
                return invalid("0 < δ < 1", format!("moment_delta = {d}"));
            }
        }
        Ok(())
    }
}

fn admissible(params: &ModelParams) -> Result<(), ConfigError> {
    let report = check_admissible(params);
    let first = report.failures().next().cloned();
    match first {
        None => Ok(()),
        Some(f) => invalid(&f.name, f.detail),
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parse and validate a TOML configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.span().map_or(0, |s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}
