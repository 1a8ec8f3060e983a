use serde::{Deserialize, Serialize};

use crate::error::{FlywheelError, Result};

/// Driving amplitude, measurement strength and feedback gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlSpec {
    pub eps_d: f64,
    pub gamma_m: f64,
    pub kappa_f: f64,
}

impl ControlSpec {
    pub fn new(eps_d: f64, gamma_m: f64, kappa_f: f64) -> Result<Self> {
        let c = Self {
            eps_d,
            gamma_m,
            kappa_f,
        };
        c.validate()?;
        Ok(c)
    }

    /// No driving, no monitoring, no feedback.
    pub fn off() -> Self {
        Self {
            eps_d: 0.0,
            gamma_m: 0.0,
            kappa_f: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("eps_d", self.eps_d), ("gamma_m", self.gamma_m), ("kappa_f", self.kappa_f)] {
            if !v.is_finite() || v < 0.0 {
                return Err(FlywheelError::InvalidParameter(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        if self.kappa_f > 0.0 && self.gamma_m == 0.0 {
            return Err(FlywheelError::FeedbackWithoutMeasurement {
                kappa_f: self.kappa_f,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(ControlSpec::new(0.02, 0.04, 0.02).is_ok());
        assert!(ControlSpec::new(0.0, 0.0, 0.0).is_ok());
        assert!(matches!(
            ControlSpec::new(0.0, 0.0, 0.1),
            Err(FlywheelError::FeedbackWithoutMeasurement { .. })
        ));
        assert!(ControlSpec::new(-1.0, 0.1, 0.0).is_err());
        assert!(ControlSpec::new(f64::NAN, 0.1, 0.0).is_err());
    }
}
