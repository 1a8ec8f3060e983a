//! Two-qubit heat engine and its reduction to an effective bath on the
//! oscillator.

use serde::{Deserialize, Serialize};

use crate::error::{FlywheelError, Result};

/// Default ratio below which the weak-coupling condition is taken to hold.
pub const WEAK_COUPLING_THRESHOLD: f64 = 0.1;

/// Hot qubit (`omega_h`, bath at `beta_h`, rate `Gamma_h`), cold qubit
/// likewise, and the three-body coupling `g` to the oscillator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSpec {
    pub omega_h: f64,
    pub omega_c: f64,
    pub beta_h: f64,
    pub beta_c: f64,
    #[serde(rename = "Gamma_h")]
    pub gamma_h: f64,
    #[serde(rename = "Gamma_c")]
    pub gamma_c: f64,
    pub g: f64,
}

/// Operating regime of the engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Population inversion: `beta_h omega_h < beta_c omega_c`, negative effective temperature.
    Engine,
    /// `beta_h omega_h = beta_c omega_c`: infinite effective temperature.
    Degenerate,
    /// No inversion; the effective bath is an ordinary one.
    NoInversion,
}

impl EngineSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_c > 0.0 && self.omega_h > self.omega_c && self.omega_h.is_finite()) {
            return Err(FlywheelError::InvalidFrequencies {
                omega_h: self.omega_h,
                omega_c: self.omega_c,
            });
        }
        for (name, v) in [
            ("beta_h", self.beta_h),
            ("beta_c", self.beta_c),
            ("Gamma_h", self.gamma_h),
            ("Gamma_c", self.gamma_c),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(FlywheelError::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.g.is_finite() && self.g >= 0.0) {
            return Err(FlywheelError::InvalidParameter(format!("g must be nonnegative, got {}", self.g)));
        }
        Ok(())
    }

    /// Excited-state population of the hot qubit in equilibrium with its bath.
    pub fn n_h(&self) -> f64 {
        fermi(self.beta_h * self.omega_h)
    }

    pub fn n_c(&self) -> f64 {
        fermi(self.beta_c * self.omega_c)
    }

    /// Population of |1_h 0_c>.
    pub fn p_10(&self) -> f64 {
        self.n_h() * (1.0 - self.n_c())
    }

    /// Population of |0_h 1_c>.
    pub fn p_01(&self) -> f64 {
        self.n_c() * (1.0 - self.n_h())
    }

    pub fn omega_o(&self) -> f64 {
        self.omega_h - self.omega_c
    }

    pub fn regime(&self) -> Regime {
        let h = self.beta_h * self.omega_h;
        let c = self.beta_c * self.omega_c;
        if (h - c).abs() <= 1e-12 * h.abs().max(c.abs()) {
            Regime::Degenerate
        } else if h < c {
            Regime::Engine
        } else {
            Regime::NoInversion
        }
    }
}

fn fermi(x: f64) -> f64 {
    1.0 / (x.exp() + 1.0)
}

/// How an [`EffectiveBath`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BathProvenance {
    Reduced,
    Direct,
}

/// Effective bath on the oscillator: downward rate `Gamma_e`, upward rate
/// `Gamma_e exp(-beta_e omega_o)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveBath {
    pub omega_o: f64,
    #[serde(rename = "Gamma_e")]
    pub gamma_e: f64,
    pub beta_e: f64,
    pub kappa_e: f64,
    pub provenance: BathProvenance,
}

impl EffectiveBath {
    /// Build directly from rates, bypassing any engine.
    pub fn direct(gamma_e: f64, beta_e: f64, omega_o: f64) -> Result<Self> {
        if !(gamma_e.is_finite() && gamma_e >= 0.0) {
            return Err(FlywheelError::InvalidParameter(format!(
                "Gamma_e must be nonnegative, got {gamma_e}"
            )));
        }
        if !beta_e.is_finite() {
            return Err(FlywheelError::InvalidParameter(format!("beta_e must be finite, got {beta_e}")));
        }
        if !(omega_o.is_finite() && omega_o > 0.0) {
            return Err(FlywheelError::InvalidParameter(format!("omega_o must be positive, got {omega_o}")));
        }
        Ok(Self::assemble(gamma_e, beta_e, omega_o, BathProvenance::Direct))
    }

    fn assemble(gamma_e: f64, beta_e: f64, omega_o: f64, provenance: BathProvenance) -> Self {
        Self {
            omega_o,
            gamma_e,
            beta_e,
            kappa_e: amplitude_damping(gamma_e, beta_e * omega_o),
            provenance,
        }
    }

    /// Upward (excitation) rate.
    pub fn up_rate(&self) -> f64 {
        self.gamma_e * (-self.beta_e * self.omega_o).exp()
    }

    /// Recomputes `kappa_e` from the other fields and compares.
    pub fn is_consistent(&self) -> bool {
        let k = amplitude_damping(self.gamma_e, self.beta_e * self.omega_o);
        (k - self.kappa_e).abs() <= 1e-14 * k.abs().max(f64::MIN_POSITIVE)
    }
}

/// `Gamma (1 - exp(-beta_omega)) / 2` without cancellation near zero.
pub(crate) fn amplitude_damping(gamma: f64, beta_omega: f64) -> f64 {
    -0.5 * gamma * (-beta_omega).exp_m1()
}

/// Effective bath of the engine in the weak-coupling limit.
pub fn reduce(spec: &EngineSpec) -> Result<EffectiveBath> {
    spec.validate()?;
    let (n_h, n_c) = (spec.n_h(), spec.n_c());
    let num = (2.0 * spec.g).powi(2) * (1.0 - n_h).powi(2) * (1.0 - n_c) * n_c;
    let den = spec.gamma_h * (1.0 - n_c) + spec.gamma_c * (1.0 - n_h);
    let omega_o = spec.omega_o();
    let beta_e = (spec.beta_h * spec.omega_h - spec.beta_c * spec.omega_c) / omega_o;
    Ok(EffectiveBath::assemble(num / den, beta_e, omega_o, BathProvenance::Reduced))
}

/// `p_10 / p_01`, the up/down rate ratio the oscillator sees.
pub fn detailed_balance_ratio(spec: &EngineSpec) -> f64 {
    spec.p_10() / spec.p_01()
}

/// `g sqrt(n + 1) / min_l Gamma_l (1 + exp(-beta_l omega_l))`.
pub fn weak_coupling_margin(spec: &EngineSpec, occupation: f64) -> f64 {
    let hot = spec.gamma_h * (1.0 + (-spec.beta_h * spec.omega_h).exp());
    let cold = spec.gamma_c * (1.0 + (-spec.beta_c * spec.omega_c).exp());
    spec.g * (occupation.max(0.0) + 1.0).sqrt() / hot.min(cold)
}

/// Margin together with a verdict against a threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakCouplingCheck {
    pub margin: f64,
    pub threshold: f64,
    pub holds: bool,
    pub warning: Option<String>,
}

pub fn weak_coupling_check(spec: &EngineSpec, occupation: f64, threshold: f64) -> WeakCouplingCheck {
    let margin = weak_coupling_margin(spec, occupation);
    let holds = margin <= threshold;
    let warning = (!holds).then(|| {
        format!("weak-coupling margin {margin:.4} exceeds {threshold}; the effective-bath description may be inaccurate")
    });
    WeakCouplingCheck {
        margin,
        threshold,
        holds,
        warning,
    }
}
