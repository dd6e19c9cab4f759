//! Sparsity penalties `p_f(|x|)` added coordinate-wise to the data-fit term.

use std::f64::consts::{FRAC_2_PI, FRAC_PI_2};

use serde::{Deserialize, Serialize};

use crate::dataset::Coefficients;
use crate::error::{Error, Result};

pub const DEFAULT_SCAD_A: f64 = 3.7;
pub const DEFAULT_MCP_GAMMA: f64 = 3.0;
pub const DEFAULT_ATAN_U: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyFamily {
    Lasso,
    Scad,
    Mcp,
    Atan,
}

impl PenaltyFamily {
    pub const ALL: [PenaltyFamily; 4] = [
        PenaltyFamily::Lasso,
        PenaltyFamily::Scad,
        PenaltyFamily::Mcp,
        PenaltyFamily::Atan,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PenaltyFamily::Lasso => "lasso",
            PenaltyFamily::Scad => "scad",
            PenaltyFamily::Mcp => "mcp",
            PenaltyFamily::Atan => "atan",
        }
    }
}

impl std::str::FromStr for PenaltyFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lasso" => Ok(PenaltyFamily::Lasso),
            "scad" => Ok(PenaltyFamily::Scad),
            "mcp" => Ok(PenaltyFamily::Mcp),
            "atan" => Ok(PenaltyFamily::Atan),
            other => Err(Error::Config(format!("unknown penalty '{other}'"))),
        }
    }
}

impl std::fmt::Display for PenaltyFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub family: PenaltyFamily,
    /// Overall penalty level.
    pub f: f64,
    /// Atan shape constant.
    pub u: f64,
    pub a_scad: f64,
    pub gamma_mcp: f64,
}

impl PenaltySpec {
    pub fn new(family: PenaltyFamily, f: f64) -> Self {
        Self {
            family,
            f,
            u: DEFAULT_ATAN_U,
            a_scad: DEFAULT_SCAD_A,
            gamma_mcp: DEFAULT_MCP_GAMMA,
        }
    }

    pub fn with_f(mut self, f: f64) -> Self {
        self.f = f;
        self
    }

    pub fn with_u(mut self, u: f64) -> Self {
        self.u = u;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f >= 0.0 && self.f.is_finite()) {
            return Err(Error::Config(format!("penalty level f must be >= 0, got {}", self.f)));
        }
        if !(self.u > 0.0 && self.u.is_finite()) {
            return Err(Error::Config(format!("atan u must be > 0, got {}", self.u)));
        }
        if !(self.a_scad > 2.0 && self.a_scad.is_finite()) {
            return Err(Error::Config(format!("scad a must be > 2, got {}", self.a_scad)));
        }
        if !(self.gamma_mcp > 0.0 && self.gamma_mcp.is_finite()) {
            return Err(Error::Config(format!("mcp gamma must be > 0, got {}", self.gamma_mcp)));
        }
        Ok(())
    }

    /// Supremum of the penalty over all `x`; infinite for Lasso.
    pub fn bound(&self) -> f64 {
        let f = self.f;
        match self.family {
            PenaltyFamily::Lasso => f64::INFINITY,
            PenaltyFamily::Scad => f * f * (self.a_scad + 1.0) / 2.0,
            PenaltyFamily::Mcp => self.gamma_mcp * f * f / 2.0,
            PenaltyFamily::Atan => f * (self.u + FRAC_2_PI) * FRAC_PI_2,
        }
    }

    pub(crate) fn value_unchecked(&self, x: f64) -> f64 {
        let t = x.abs();
        let f = self.f;
        match self.family {
            PenaltyFamily::Lasso => f * t,
            PenaltyFamily::Scad => {
                let a = self.a_scad;
                if t <= f {
                    f * t
                } else if t <= a * f {
                    (2.0 * a * f * t - t * t - f * f) / (2.0 * (a - 1.0))
                } else {
                    f * f * (a + 1.0) / 2.0
                }
            }
            PenaltyFamily::Mcp => {
                let g = self.gamma_mcp;
                if t <= g * f {
                    f * t - t * t / (2.0 * g)
                } else {
                    g * f * f / 2.0
                }
            }
            PenaltyFamily::Atan => f * (self.u + FRAC_2_PI) * (t / self.u).atan(),
        }
    }

    pub(crate) fn derivative_unchecked(&self, x: f64) -> f64 {
        let t = x.abs();
        let f = self.f;
        let slope = match self.family {
            PenaltyFamily::Lasso => f,
            PenaltyFamily::Scad => {
                let a = self.a_scad;
                if t <= f {
                    f
                } else if t <= a * f {
                    (a * f - t) / (a - 1.0)
                } else {
                    0.0
                }
            }
            PenaltyFamily::Mcp => {
                let g = self.gamma_mcp;
                if t <= g * f {
                    f - t / g
                } else {
                    0.0
                }
            }
            PenaltyFamily::Atan => {
                let u = self.u;
                f * (u + FRAC_2_PI) * u / (u * u + t * t)
            }
        };
        slope * x.signum()
    }
}

/// Penalty at `x`.
pub fn penalty_value(spec: &PenaltySpec, x: f64) -> Result<f64> {
    spec.validate()?;
    if !x.is_finite() {
        return Err(Error::Domain(format!("penalty argument {x} is not finite")));
    }
    Ok(spec.value_unchecked(x))
}

/// Derivative of the penalty at a nonzero `x`.
pub fn penalty_derivative(spec: &PenaltySpec, x: f64) -> Result<f64> {
    spec.validate()?;
    if x == 0.0 {
        return Err(Error::Domain(
            "penalty derivative is undefined at 0; use the zeroing threshold".into(),
        ));
    }
    if !x.is_finite() {
        return Err(Error::Domain(format!("penalty argument {x} is not finite")));
    }
    Ok(spec.derivative_unchecked(x))
}

/// Sum of the penalty over all coordinates.
pub fn penalty_total(spec: &PenaltySpec, omega: &Coefficients) -> Result<f64> {
    spec.validate()?;
    Ok(omega.as_slice().iter().map(|&x| spec.value_unchecked(x)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_at_origin() {
        for fam in PenaltyFamily::ALL {
            assert_eq!(penalty_value(&PenaltySpec::new(fam, 0.7), 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn atan_examples() {
        let spec = PenaltySpec::new(PenaltyFamily::Atan, 1.0).with_u(1.0);
        assert_relative_eq!(penalty_value(&spec, 1.0).unwrap(), 1.285_398_163_397_448_3, epsilon = 1e-15);
        assert_relative_eq!(penalty_value(&spec, 1e300).unwrap(), 2.570_796_326_794_896_6, epsilon = 1e-15);
        assert_relative_eq!(penalty_derivative(&spec, 1.0).unwrap(), 0.818_309_886_183_790_7, epsilon = 1e-15);
        assert_relative_eq!(penalty_derivative(&spec, -1.0).unwrap(), -0.818_309_886_183_790_7, epsilon = 1e-15);
    }

    #[test]
    fn lasso_and_scad_slopes() {
        assert_eq!(penalty_derivative(&PenaltySpec::new(PenaltyFamily::Lasso, 2.0), -3.0).unwrap(), -2.0);
        let scad = PenaltySpec::new(PenaltyFamily::Scad, 0.5);
        assert_eq!(penalty_derivative(&scad, 0.5 * 3.7 + 0.01).unwrap(), 0.0);
        assert_eq!(penalty_derivative(&scad, -10.0).unwrap(), 0.0);
    }

    #[test]
    fn scad_and_mcp_are_continuous_at_knots() {
        let f = 0.8;
        let scad = PenaltySpec::new(PenaltyFamily::Scad, f);
        for knot in [f, scad.a_scad * f] {
            let lo = scad.value_unchecked(knot - 1e-12);
            let hi = scad.value_unchecked(knot + 1e-12);
            assert!((lo - hi).abs() < 1e-9);
        }
        let mcp = PenaltySpec::new(PenaltyFamily::Mcp, f);
        let knot = mcp.gamma_mcp * f;
        assert!((mcp.value_unchecked(knot - 1e-12) - mcp.value_unchecked(knot + 1e-12)).abs() < 1e-9);
        assert_relative_eq!(mcp.value_unchecked(100.0), mcp.bound());
        assert_relative_eq!(scad.value_unchecked(100.0), scad.bound());
    }

    #[test]
    fn derivative_rejects_zero_and_bad_spec() {
        let spec = PenaltySpec::new(PenaltyFamily::Mcp, 1.0);
        assert!(penalty_derivative(&spec, 0.0).is_err());
        let mut bad = PenaltySpec::new(PenaltyFamily::Scad, 1.0);
        bad.a_scad = 2.0;
        assert!(penalty_value(&bad, 1.0).is_err());
        assert!(penalty_value(&PenaltySpec::new(PenaltyFamily::Lasso, -1.0), 1.0).is_err());
        assert!(penalty_value(&PenaltySpec::new(PenaltyFamily::Atan, 1.0).with_u(0.0), 1.0).is_err());
    }

    #[test]
    fn total_is_coordinate_sum() {
        let spec = PenaltySpec::new(PenaltyFamily::Scad, 0.3);
        assert_eq!(penalty_total(&spec, &Coefficients::zeros(4)).unwrap(), 0.0);
        let one = Coefficients::new(vec![0.0, -0.9, 0.0]).unwrap();
        assert_eq!(penalty_total(&spec, &one).unwrap(), penalty_value(&spec, -0.9).unwrap());
    }
}
