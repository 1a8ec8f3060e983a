use serde::{Deserialize, Serialize};

use crate::engine::EffectiveBath;
use crate::error::{FlywheelError, Result};
use crate::{ControlSpec, C64};

/// First and second moments of the oscillator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean_c: C64,
    pub occupation: f64,
}

impl Moments {
    /// Lab-frame moments from rotating-frame ones at time `t`.
    pub fn to_schroedinger(self, omega_o: f64, t: f64) -> Self {
        Self {
            mean_c: self.mean_c * C64::from_polar(1.0, -omega_o * t),
            occupation: self.occupation,
        }
    }
}

/// `(1 - exp(-k t)) / k`, continuous through `k = 0`.
fn phi(k: f64, t: f64) -> f64 {
    if k == 0.0 {
        t
    } else {
        -(-k * t).exp_m1() / k
    }
}

/// Closed-form rotating-frame moments at time `t` for the unconditional
/// dynamics with amplitude damping `kappa = kappa_f + kappa_e`, upward rate
/// `B` and drive `eps_d`:
///
/// `<c>(t) = c0 e^{-kappa t} - eps_d phi(kappa, t)`,
/// `n(t) = n0 e^{-2 kappa t} + B phi(2 kappa, t) - 2 eps_d Re(c0) e^{-kappa t} phi(kappa, t) + eps_d^2 phi(kappa, t)^2`.
///
/// Valid on both sides of the feedback threshold.
pub fn moment_flow(bath: &EffectiveBath, control: &ControlSpec, c0: C64, n0: f64, t: f64) -> Result<Moments> {
    control.validate()?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(FlywheelError::InvalidParameter(format!("t must be nonnegative, got {t}")));
    }
    let kappa = control.kappa_f + bath.kappa_e;
    let up = upward_total(bath, control);
    let decay = (-kappa * t).exp();
    let p1 = phi(kappa, t);
    let eps = control.eps_d;
    let mean_c = c0 * decay - eps * p1;
    let occupation = n0 * decay * decay + up * phi(2.0 * kappa, t) - 2.0 * eps * c0.re * decay * p1 + eps * eps * p1 * p1;
    Ok(Moments { mean_c, occupation })
}

/// Total upward rate `Gamma_e e^{-beta_e omega_o} + (gamma_m/2 - kappa_f)^2/gamma_m`,
/// written as a sum of nonnegative parts.
pub(crate) fn upward_total(bath: &EffectiveBath, control: &ControlSpec) -> f64 {
    let g = control.gamma_m;
    let measured = if g > 0.0 {
        (0.5 * g - control.kappa_f).powi(2) / g
    } else {
        0.0
    };
    bath.up_rate() + measured
}

/// Temperature `omega_o / ln(1 + 1/n)` of a thermal state with occupation `n`.
pub fn unstable_temperature(n_t: f64, omega_o: f64) -> Result<f64> {
    if !(n_t.is_finite() && n_t > 0.0) {
        return Err(FlywheelError::InvalidParameter(format!("occupation must be positive, got {n_t}")));
    }
    Ok(omega_o / (1.0 / n_t).ln_1p())
}
