//! Closed-form stationary state of the unconditional dynamics: a thermal
//! state at the composite temperature displaced to `c_inf = -eps_d/kappa`.

use serde::{Deserialize, Serialize};

use crate::engine::EffectiveBath;
use crate::error::{FlywheelError, Result};
use crate::lindblad::upward_total;
use crate::{ControlSpec, C64};

/// Points closer than this (relative) to the threshold are refused.
pub const NEAR_THRESHOLD_REL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyPrediction {
    /// Total downward rate.
    #[serde(rename = "Gamma")]
    pub gamma: f64,
    /// Total upward rate `Gamma exp(-beta omega_o)`.
    pub up: f64,
    /// Amplitude damping `kappa_f + kappa_e`.
    pub kappa: f64,
    pub beta: f64,
    pub beta_omega: f64,
    pub c_inf: C64,
    pub n_o: f64,
    pub work: f64,
    pub internal_energy: f64,
    pub efficiency: f64,
}

/// Smallest feedback gain giving a stationary state: `-kappa_e`.
pub fn threshold(bath: &EffectiveBath) -> f64 {
    -bath.kappa_e
}

pub(crate) fn check_above_threshold(bath: &EffectiveBath, kappa_f: f64) -> Result<()> {
    let th = threshold(bath);
    if (kappa_f - th).abs() <= NEAR_THRESHOLD_REL * th.abs() {
        return Err(FlywheelError::NearThreshold { kappa_f, threshold: th });
    }
    if kappa_f < th {
        return Err(FlywheelError::BelowThreshold { kappa_f, threshold: th });
    }
    Ok(())
}

fn ratio_efficiency(c_sq: f64, n_o: f64) -> f64 {
    if c_sq == 0.0 {
        0.0
    } else {
        c_sq / (n_o + c_sq)
    }
}

pub fn predict(bath: &EffectiveBath, control: &ControlSpec) -> Result<SteadyPrediction> {
    control.validate()?;
    check_above_threshold(bath, control.kappa_f)?;
    let kappa = control.kappa_f + bath.kappa_e;
    let up = upward_total(bath, control);
    let two_kappa = 2.0 * kappa;
    let beta_omega = if up == 0.0 {
        f64::INFINITY
    } else {
        (two_kappa / up).ln_1p()
    };
    let n_o = up / two_kappa;
    let c = -control.eps_d / kappa;
    let c_sq = c * c;
    let w = bath.omega_o;
    Ok(SteadyPrediction {
        gamma: up + two_kappa,
        up,
        kappa,
        beta: beta_omega / w,
        beta_omega,
        c_inf: C64::new(c, 0.0),
        n_o,
        work: w * c_sq,
        internal_energy: w * (n_o + c_sq),
        efficiency: ratio_efficiency(c_sq, n_o),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalMonitoring {
    pub gamma_m: f64,
    pub n_o_min: f64,
    pub efficiency: f64,
}

/// Measurement strength minimizing the thermal occupation at fixed feedback
/// gain, `gamma_m = 2 kappa_f`, with the resulting occupation and efficiency.
pub fn optimal_monitoring(bath: &EffectiveBath, kappa_f: f64, eps_d: f64) -> Result<OptimalMonitoring> {
    ControlSpec::new(eps_d, 2.0 * kappa_f, kappa_f)?;
    check_above_threshold(bath, kappa_f)?;
    let bw = bath.beta_e * bath.omega_o;
    let n_o_min = 1.0 / ((1.0 + 2.0 * kappa_f / bath.gamma_e) * bw.exp() - 1.0);
    let kappa = kappa_f + bath.kappa_e;
    let efficiency = if eps_d == 0.0 {
        0.0
    } else {
        1.0 / (1.0 + bath.up_rate() * kappa / (2.0 * eps_d * eps_d))
    };
    Ok(OptimalMonitoring {
        gamma_m: 2.0 * kappa_f,
        n_o_min,
        efficiency,
    })
}

/// Feedback gains and measurement-to-feedback ratios of a surface scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceGrid {
    pub kappa_f: Vec<f64>,
    /// `gamma_m / kappa_f` values, shared by every row.
    pub ratios: Vec<f64>,
}

impl SurfaceGrid {
    /// `n_kappa` gains from just above the threshold to `kappa_span` times it,
    /// geometrically spaced, and `n_ratio` ratios log-spaced on
    /// `[1/ratio_span, ratio_span]`.
    pub fn around_threshold(
        bath: &EffectiveBath,
        n_kappa: usize,
        kappa_span: f64,
        n_ratio: usize,
        ratio_span: f64,
    ) -> Result<Self> {
        let th = threshold(bath);
        if !(th > 0.0) {
            return Err(FlywheelError::InvalidParameter(
                "threshold grid needs an amplifying bath (kappa_e < 0)".into(),
            ));
        }
        if n_kappa == 0 || n_ratio < 2 || !(kappa_span > 1.0) || !(ratio_span > 1.0) {
            return Err(FlywheelError::InvalidParameter("degenerate surface grid".into()));
        }
        let kappa_f = (1..=n_kappa)
            .map(|k| th * kappa_span.powf(k as f64 / n_kappa as f64))
            .collect();
        let lo = -ratio_span.ln();
        let step = 2.0 * ratio_span.ln() / (n_ratio - 1) as f64;
        let ratios = (0..n_ratio).map(|k| (lo + step * k as f64).exp()).collect();
        Ok(Self { kappa_f, ratios })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub kappa_f: f64,
    pub gamma_m: f64,
    pub above_threshold: bool,
    pub efficiency: Option<f64>,
    pub work: Option<f64>,
    /// Closest ratio to `gamma_m = 2 kappa_f` in the row, measured as
    /// `|ln(gamma_m / 2 kappa_f)|` because the efficiency depends on the ratio
    /// only through `cosh` of that logarithm.
    pub ridge: bool,
}

/// Efficiency and extractable work over the grid; points not above the
/// threshold carry no values.
pub fn efficiency_surface(bath: &EffectiveBath, eps_d: f64, grid: &SurfaceGrid) -> Result<Vec<SurfacePoint>> {
    if grid.ratios.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(FlywheelError::InvalidParameter("ratios must be positive".into()));
    }
    let ridge_index = grid
        .ratios
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 / 2.0).ln().abs().total_cmp(&(b.1 / 2.0).ln().abs()))
        .map(|(i, _)| i);
    let mut out = Vec::with_capacity(grid.kappa_f.len() * grid.ratios.len());
    for &kappa_f in &grid.kappa_f {
        for (i, &ratio) in grid.ratios.iter().enumerate() {
            let gamma_m = ratio * kappa_f;
            let control = ControlSpec::new(eps_d, gamma_m, kappa_f)?;
            let p = match predict(bath, &control) {
                Ok(p) => Some(p),
                Err(FlywheelError::BelowThreshold { .. } | FlywheelError::NearThreshold { .. }) => None,
                Err(e) => return Err(e),
            };
            out.push(SurfacePoint {
                kappa_f,
                gamma_m,
                above_threshold: p.is_some(),
                efficiency: p.map(|p| p.efficiency),
                work: p.map(|p| p.work),
                ridge: Some(i) == ridge_index,
            });
        }
    }
    Ok(out)
}
