use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Position of the exponent relative to the mass-critical value `1 + 2/n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criticality {
    Subcritical,
    Critical,
    Supercritical,
}

/// Model parameters `(p, β, ω₁, ω₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub p: f64,
    pub beta: f64,
    pub omega1: f64,
    pub omega2: f64,
}

/// Tolerance used when deciding whether `p` sits exactly on `1 + 2/n`.
const CRITICAL_EPS: f64 = 1e-12;

impl SystemParams {
    pub fn new(p: f64, beta: f64, omega1: f64, omega2: f64) -> Result<Self> {
        let params = Self {
            p,
            beta,
            omega1,
            omega2,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p.is_finite() && self.p > 1.0) {
            return Err(Error::InvalidParams(format!(
                "exponent p must satisfy p > 1 (got {})",
                self.p
            )));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "coupling beta must be >= 0 (got {})",
                self.beta
            )));
        }
        for (name, w) in [("omega1", self.omega1), ("omega2", self.omega2)] {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be > 0 (got {w})")));
            }
        }
        Ok(())
    }

    /// Checks the energy-subcritical bound `p < n/(n-2)` (only binding for n = 3).
    pub fn validate_for_dim(&self, dim: usize) -> Result<()> {
        self.validate()?;
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidParams(format!("dimension must be 1, 2 or 3 (got {dim})")));
        }
        if let Some(bound) = Self::upper_exponent(dim) {
            if self.p >= bound {
                return Err(Error::InvalidParams(format!(
                    "exponent p = {} violates p < n/(n-2) = {} for n = {}",
                    self.p, bound, dim
                )));
            }
        }
        Ok(())
    }

    /// `n/(n-2)` for n > 2, unbounded otherwise.
    pub fn upper_exponent(dim: usize) -> Option<f64> {
        (dim > 2).then(|| dim as f64 / (dim as f64 - 2.0))
    }

    pub fn critical_exponent(dim: usize) -> f64 {
        1.0 + 2.0 / dim as f64
    }

    pub fn criticality(&self, dim: usize) -> Criticality {
        let pc = Self::critical_exponent(dim);
        if (self.p - pc).abs() <= CRITICAL_EPS {
            Criticality::Critical
        } else if self.p < pc {
            Criticality::Subcritical
        } else {
            Criticality::Supercritical
        }
    }

    pub fn omega(&self, component: usize) -> f64 {
        match component {
            0 => self.omega1,
            _ => self.omega2,
        }
    }

    pub fn equal_frequencies(&self) -> bool {
        self.omega1 == self.omega2
    }

    /// Conjugate exponent `p' = p/(p-1)`.
    pub fn conjugate(&self) -> f64 {
        self.p / (self.p - 1.0)
    }
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            p: 2.0,
            beta: 0.0,
            omega1: 1.0,
            omega2: 1.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification() {
        let mk = |p| SystemParams::new(p, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(mk(2.0).criticality(1), Criticality::Subcritical);
        assert_eq!(mk(3.0).criticality(1), Criticality::Critical);
        assert_eq!(mk(4.0).criticality(1), Criticality::Supercritical);
        assert_eq!(mk(2.0).criticality(2), Criticality::Critical);
        assert_eq!(mk(1.5).criticality(3), Criticality::Subcritical);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(SystemParams::new(1.0, 0.0, 1.0, 1.0).is_err());
        assert!(SystemParams::new(2.0, -0.1, 1.0, 1.0).is_err());
        assert!(SystemParams::new(2.0, 0.0, 0.0, 1.0).is_err());
        let p = SystemParams::new(3.0, 0.0, 1.0, 1.0).unwrap();
        let err = p.validate_for_dim(3).unwrap_err().to_string();
        assert!(err.contains("n/(n-2)"), "{err}");
        assert!(p.validate_for_dim(2).is_ok());
    }
}
