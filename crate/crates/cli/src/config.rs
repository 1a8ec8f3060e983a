use std::path::Path;

use flywheel_core::engine::reduce;
use flywheel_core::{ControlSpec, EffectiveBath, EngineSpec, FlywheelError};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Steady,
    Sweep,
    Sme,
    Ensemble,
    Tripartite,
    Classical,
    Energy,
    Instability,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::Steady => "steady",
            Self::Sweep => "sweep",
            Self::Sme => "sme",
            Self::Ensemble => "ensemble",
            Self::Tripartite => "tripartite",
            Self::Classical => "classical",
            Self::Energy => "energy",
            Self::Instability => "instability",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathConfig {
    #[serde(rename = "Gamma_e")]
    pub gamma_e: f64,
    pub beta_e: f64,
    pub omega_o: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlConfig {
    #[serde(default)]
    pub eps_d: f64,
    #[serde(default)]
    pub gamma_m: f64,
    #[serde(default)]
    pub kappa_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Step size; the stability rule picks one when absent.
    pub dt: Option<f64>,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_n_traj")]
    pub n_traj: usize,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
    /// Start trajectories from the predicted stationary state instead of the vacuum.
    #[serde(default)]
    pub start_stationary: bool,
}

fn default_dim() -> usize {
    40
}
fn default_t_end() -> f64 {
    50.0
}
fn default_n_traj() -> usize {
    100
}
fn default_workers() -> usize {
    1
}
fn default_stride() -> usize {
    20
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            dim: default_dim(),
            dt: None,
            t_end: default_t_end(),
            n_traj: default_n_traj(),
            workers: default_workers(),
            seed: 0,
            record_stride: default_stride(),
            start_stationary: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_n_kappa")]
    pub n_kappa: usize,
    /// Largest kappa_f as a multiple of the threshold.
    #[serde(default = "default_kappa_span")]
    pub kappa_span: f64,
    #[serde(default = "default_n_ratio")]
    pub n_ratio: usize,
    /// gamma_m / kappa_f runs over [2/span, 2 span].
    #[serde(default = "default_ratio_span")]
    pub ratio_span: f64,
}

fn default_n_kappa() -> usize {
    30
}
fn default_kappa_span() -> f64 {
    100.0
}
fn default_n_ratio() -> usize {
    50
}
fn default_ratio_span() -> f64 {
    10.0
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            n_kappa: default_n_kappa(),
            kappa_span: default_kappa_span(),
            n_ratio: default_n_ratio(),
            ratio_span: default_ratio_span(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalConfig {
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out")]
    pub dir: String,
}

fn default_out() -> String {
    "out".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_out() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<Experiment>,
    pub engine: Option<EngineSpec>,
    pub bath: Option<BathConfig>,
    #[serde(default = "ControlConfig::off")]
    pub control: ControlConfig,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub sweep: SweepConfig,
    pub classical: Option<ClassicalConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    /// Weak-coupling margin above which a warning is printed.
    #[serde(default = "default_weak")]
    pub weak_coupling_threshold: f64,
}

fn default_weak() -> f64 {
    flywheel_core::engine::WEAK_COUPLING_THRESHOLD
}

impl ControlConfig {
    fn off() -> Self {
        Self {
            eps_d: 0.0,
            gamma_m: 0.0,
            kappa_f: 0.0,
        }
    }

    pub fn spec(&self) -> Result<ControlSpec, FlywheelError> {
        let c = ControlSpec {
            eps_d: self.eps_d,
            gamma_m: self.gamma_m,
            kappa_f: self.kappa_f,
        };
        c.validate()?;
        Ok(c)
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Effective bath from `[bath]` or reduced from `[engine]`; exactly one
    /// of them must be present.
    pub fn effective_bath(&self) -> Result<EffectiveBath, CliError> {
        match (&self.engine, &self.bath) {
            (Some(_), Some(_)) => Err(CliError::Config("give either [engine] or [bath], not both".into())),
            (Some(e), None) => Ok(reduce(e)?),
            (None, Some(b)) => Ok(EffectiveBath::direct(b.gamma_e, b.beta_e, b.omega_o)?),
            (None, None) => Err(CliError::Config("an [engine] or [bath] section is required".into())),
        }
    }

    pub fn engine_spec(&self) -> Result<EngineSpec, CliError> {
        let e = self
            .engine
            .ok_or_else(|| CliError::Config("an [engine] section is required".into()))?;
        e.validate()?;
        Ok(e)
    }

    pub fn check_numerics(&self) -> Result<(), CliError> {
        let n = &self.numerics;
        if n.dim < 2 {
            return Err(CliError::Config(format!("numerics.dim must be at least 2, got {}", n.dim)));
        }
        if !(n.t_end.is_finite() && n.t_end > 0.0) {
            return Err(CliError::Config(format!("numerics.t_end must be positive, got {}", n.t_end)));
        }
        if let Some(dt) = n.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(CliError::Config(format!("numerics.dt must be positive, got {dt}")));
            }
        }
        if n.workers == 0 || n.n_traj == 0 || n.record_stride == 0 {
            return Err(CliError::Config(
                "numerics.workers, n_traj and record_stride must be positive".into(),
            ));
        }
        Ok(())
    }
}
