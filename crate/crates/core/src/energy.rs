//! Stationary energy currents into the flywheel.
//!
//! Heat currents are `tr[(L_i rho) omega_o c^dagger c]` per channel. The
//! feedback dissipator carries the whole averaged feedback flow, so only its
//! total is reported at the unconditional level. The deterministic feedback
//! power is estimated from conditional trajectories.

use serde::{Deserialize, Serialize};

use crate::engine::EffectiveBath;
use crate::error::{FlywheelError, Result};
use crate::fock::{number, DensityMatrix, FockSpace};
use crate::lindblad::{steady_state, unconditional, Channel, Generator};
use crate::sme::{EnsembleSummary, Estimate};
use crate::steady::{check_above_threshold, predict};
use crate::{ControlSpec, C64};

/// Fewer trajectories than this give no feedback power estimate.
pub const MIN_TRAJECTORIES: usize = 30;

/// `tr[(L_channel rho) omega_o c^dagger c]`.
pub fn dissipator_current(generator: &Generator, channel: Channel, rho: &DensityMatrix, omega_o: f64) -> Result<f64> {
    if rho.dim() != generator.dim() {
        return Err(FlywheelError::DimensionMismatch {
            expected: generator.dim(),
            found: rho.dim(),
        });
    }
    let flow = generator.apply_channel(channel, rho.matrix());
    Ok(omega_o * number_trace(&flow))
}

fn number_trace(m: &crate::fock::ComplexMatrix) -> f64 {
    (0..m.nrows()).map(|n| n as f64 * m[(n, n)].re).sum()
}

/// Driving power computed twice: from the lab-frame formula
/// `-2 eps_d omega_o Re c_inf` and from the rotating-frame commutator flow
/// `-eps_d tr([c^dagger - c, rho] omega_o c^dagger c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrivingPower {
    pub closed_form: f64,
    pub commutator: f64,
}

impl DrivingPower {
    pub fn relative_mismatch(&self) -> f64 {
        let scale = self.closed_form.abs().max(self.commutator.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.closed_form - self.commutator).abs() / scale
        }
    }
}

pub fn driving_power(rho: &DensityMatrix, c_inf: C64, eps_d: f64, omega_o: f64) -> Result<DrivingPower> {
    let d = rho.dim();
    let space = FockSpace::new(d)?;
    let c = crate::fock::annihilation(space);
    let gen_part = (c.adjoint() - &c) * rho.matrix() - rho.matrix() * (c.adjoint() - &c);
    let n = number(space);
    let commutator = -eps_d * omega_o * (gen_part * n).trace().re;
    Ok(DrivingPower {
        closed_form: -2.0 * eps_d * omega_o * c_inf.re,
        commutator,
    })
}

/// `-2 kappa_f omega_o M|<c>_sigma|^2` at the last checkpoint, with its
/// standard error.
pub fn feedback_power_estimate(ensemble: &EnsembleSummary, kappa_f: f64, omega_o: f64) -> Result<(f64, f64)> {
    let last = ensemble
        .checkpoints
        .last()
        .ok_or(FlywheelError::InsufficientTrajectories {
            required: MIN_TRAJECTORIES,
            available: 0,
        })?;
    let est = last.abs_c_sq;
    if est.count < MIN_TRAJECTORIES {
        return Err(FlywheelError::InsufficientTrajectories {
            required: MIN_TRAJECTORIES,
            available: est.count,
        });
    }
    let k = 2.0 * kappa_f * omega_o;
    Ok((-k * est.mean, k * est.se.unwrap_or(0.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    #[serde(rename = "J_e")]
    pub j_e: f64,
    #[serde(rename = "J_m")]
    pub j_m: f64,
    /// Averaged feedback flow, heat and power together.
    #[serde(rename = "J_f_total")]
    pub j_f_total: f64,
    #[serde(rename = "P_d")]
    pub p_d: DrivingPower,
    /// `2 kappa_f omega_o |c_inf|^2`
    #[serde(rename = "P_f_det_bound")]
    pub p_f_det_bound: f64,
    #[serde(rename = "P_f_det_est")]
    pub p_f_det_est: Option<Estimate>,
    /// `J_e` minus what an infinite-temperature bath of the same rate would
    /// deliver; vanishes with the inversion.
    pub j_e_excess: f64,
    /// Lower bound on `-P_d - P_f_det`.
    pub consumable_power_bound: f64,
    /// `J_e + J_m + J_f_total + P_d` using the commutator route.
    pub balance_residual: f64,
    /// `omega_o Gamma (n_o + |c_inf|^2)`
    pub balance_scale: f64,
}

impl EnergyLedger {
    /// `-P_d - P_f_det` from the trajectory estimate.
    pub fn consumable_power(&self) -> Option<Estimate> {
        self.p_f_det_est.map(|e| Estimate {
            mean: -self.p_d.closed_form - e.mean,
            ..e
        })
    }

    /// `|P_f_det| >= 2 kappa_f omega_o |c_inf|^2 - k SE`.
    pub fn feedback_bound_holds(&self, k: f64) -> Option<bool> {
        self.p_f_det_est
            .map(|e| -e.mean >= self.p_f_det_bound - k * e.se.unwrap_or(0.0))
    }
}

/// Currents at the numerical stationary state on `space`; the trajectory
/// estimate is added when an ensemble is supplied.
pub fn ledger(
    bath: &EffectiveBath,
    control: &ControlSpec,
    space: FockSpace,
    ensemble: Option<&EnsembleSummary>,
) -> Result<EnergyLedger> {
    control.validate()?;
    check_above_threshold(bath, control.kappa_f)?;
    let p = predict(bath, control)?;
    let w = bath.omega_o;
    let gen = unconditional(bath, control, space)?;
    let rho = steady_state(&gen)?;
    let j_e = dissipator_current(&gen, Channel::Engine, &rho, w)?;
    let j_m = dissipator_current(&gen, Channel::Monitoring, &rho, w)?;
    let j_f_total = dissipator_current(&gen, Channel::Feedback, &rho, w)?;
    let p_d = driving_power(&rho, p.c_inf, control.eps_d, w)?;
    let p_f_det_est = match ensemble {
        Some(e) => {
            let (mean, se) = feedback_power_estimate(e, control.kappa_f, w)?;
            let count = e.checkpoints.last().map_or(0, |c| c.abs_c_sq.count);
            Some(Estimate {
                mean,
                se: Some(se),
                count,
            })
        }
        None => None,
    };
    let kappa = control.kappa_f + bath.kappa_e;
    Ok(EnergyLedger {
        j_e,
        j_m,
        j_f_total,
        p_d,
        p_f_det_bound: 2.0 * control.kappa_f * w * p.c_inf.norm_sqr(),
        p_f_det_est,
        j_e_excess: j_e - w * bath.gamma_e,
        consumable_power_bound: 2.0 * w * control.eps_d.powi(2) * (-bath.kappa_e) / (kappa * kappa),
        balance_residual: j_e + j_m + j_f_total + p_d.commutator,
        balance_scale: w * p.gamma * (p.n_o + p.c_inf.norm_sqr()),
    })
}
