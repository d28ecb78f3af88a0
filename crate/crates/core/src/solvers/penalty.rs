//! Penalty families and their one-dimensional thresholding rules.
//!
//! Each rule returns the exact minimizer of
//! `0.5 * (b - z)^2 + pen_lambda(|b|)`, the subproblem solved for one
//! coordinate of a standardized design. For MCP with `gamma > 1` and SCAD with
//! `gamma > 2` this subproblem is strictly convex, so the minimizer is unique.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CsuvError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyFamily {
    Lasso,
    ElasticNet,
    Mcp,
    Scad,
}

/// A penalty family with its shape parameters.
///
/// `alpha` only matters for the elastic net; `concavity` (gamma) only for MCP
/// and SCAD.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub family: PenaltyFamily,
    pub alpha: f64,
    pub concavity: f64,
}

pub const DEFAULT_MCP_CONCAVITY: f64 = 3.0;
pub const DEFAULT_SCAD_CONCAVITY: f64 = 3.7;
pub const DEFAULT_ENET_ALPHA: f64 = 0.5;

/// Soft-thresholding operator `sign(z) * max(|z| - lambda, 0)`.
#[inline]
pub fn soft_threshold(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

impl PenaltySpec {
    pub fn lasso() -> Self {
        Self {
            family: PenaltyFamily::Lasso,
            alpha: 1.0,
            concavity: 0.0,
        }
    }

    pub fn elastic_net(alpha: f64) -> Self {
        Self {
            family: PenaltyFamily::ElasticNet,
            alpha,
            concavity: 0.0,
        }
    }

    pub fn mcp(gamma: f64) -> Self {
        Self {
            family: PenaltyFamily::Mcp,
            alpha: 1.0,
            concavity: gamma,
        }
    }

    pub fn scad(gamma: f64) -> Self {
        Self {
            family: PenaltyFamily::Scad,
            alpha: 1.0,
            concavity: gamma,
        }
    }

    /// The default constituent set: Lasso, MCP (gamma 3) and SCAD (gamma 3.7).
    pub fn default_constituents() -> Vec<Self> {
        vec![
            Self::lasso(),
            Self::mcp(DEFAULT_MCP_CONCAVITY),
            Self::scad(DEFAULT_SCAD_CONCAVITY),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        match self.family {
            PenaltyFamily::Lasso => Ok(()),
            PenaltyFamily::ElasticNet if self.alpha > 0.0 && self.alpha <= 1.0 => Ok(()),
            PenaltyFamily::ElasticNet => Err(CsuvError::InvalidPenalty(format!(
                "elastic-net alpha must lie in (0, 1], got {}",
                self.alpha
            ))),
            PenaltyFamily::Mcp if self.concavity > 1.0 => Ok(()),
            PenaltyFamily::Mcp => Err(CsuvError::InvalidPenalty(format!(
                "MCP concavity must exceed 1, got {}",
                self.concavity
            ))),
            PenaltyFamily::Scad if self.concavity > 2.0 => Ok(()),
            PenaltyFamily::Scad => Err(CsuvError::InvalidPenalty(format!(
                "SCAD concavity must exceed 2, got {}",
                self.concavity
            ))),
        }
    }

    /// Factor applied to the lasso `lambda_max` so the path starts at zero.
    pub fn lambda_max_factor(&self) -> f64 {
        match self.family {
            PenaltyFamily::ElasticNet => 1.0 / self.alpha,
            _ => 1.0,
        }
    }

    /// Minimizer of `0.5 * (b - z)^2 + pen_lambda(|b|)`.
    pub fn threshold(&self, z: f64, lambda: f64) -> f64 {
        let gamma = self.concavity;
        match self.family {
            PenaltyFamily::Lasso => soft_threshold(z, lambda),
            PenaltyFamily::ElasticNet => {
                soft_threshold(z, lambda * self.alpha) / (1.0 + lambda * (1.0 - self.alpha))
            }
            PenaltyFamily::Mcp => {
                if z.abs() <= gamma * lambda {
                    soft_threshold(z, lambda) / (1.0 - 1.0 / gamma)
                } else {
                    z
                }
            }
            PenaltyFamily::Scad => {
                let az = z.abs();
                if az <= 2.0 * lambda {
                    soft_threshold(z, lambda)
                } else if az <= gamma * lambda {
                    soft_threshold(z, gamma * lambda / (gamma - 1.0)) / (1.0 - 1.0 / (gamma - 1.0))
                } else {
                    z
                }
            }
        }
    }

    /// Penalty value `pen_lambda(|b|)`.
    pub fn value(&self, b: f64, lambda: f64) -> f64 {
        let a = b.abs();
        let gamma = self.concavity;
        match self.family {
            PenaltyFamily::Lasso => lambda * a,
            PenaltyFamily::ElasticNet => lambda * (self.alpha * a + 0.5 * (1.0 - self.alpha) * a * a),
            PenaltyFamily::Mcp => {
                if a <= gamma * lambda {
                    lambda * a - a * a / (2.0 * gamma)
                } else {
                    0.5 * gamma * lambda * lambda
                }
            }
            PenaltyFamily::Scad => {
                if a <= lambda {
                    lambda * a
                } else if a <= gamma * lambda {
                    (2.0 * gamma * lambda * a - a * a - lambda * lambda) / (2.0 * (gamma - 1.0))
                } else {
                    0.5 * lambda * lambda * (gamma + 1.0)
                }
            }
        }
    }

    /// Derivative of the penalty in `|b|` at `|b| > 0`.
    ///
    /// For a nonzero coefficient the stationarity condition reads
    /// `x_j' r / n = sign(b) * derivative(|b|)`.
    pub fn derivative(&self, magnitude: f64, lambda: f64) -> f64 {
        let gamma = self.concavity;
        match self.family {
            PenaltyFamily::Lasso => lambda,
            PenaltyFamily::ElasticNet => lambda * (self.alpha + (1.0 - self.alpha) * magnitude),
            PenaltyFamily::Mcp => (lambda - magnitude / gamma).max(0.0),
            PenaltyFamily::Scad => {
                if magnitude <= lambda {
                    lambda
                } else {
                    ((gamma * lambda - magnitude) / (gamma - 1.0)).max(0.0)
                }
            }
        }
    }

    /// The penalty derivative is affine on the piece of `(0, inf)` that
    /// contains `magnitude`: `derivative(t) = offset - slope * t` for `t` in
    /// `(lo, hi]`. Returns `(slope, offset, lo, hi)`.
    pub(crate) fn linearization(&self, magnitude: f64, lambda: f64) -> (f64, f64, f64, f64) {
        let gamma = self.concavity;
        let inf = f64::INFINITY;
        match self.family {
            PenaltyFamily::Lasso => (0.0, lambda, 0.0, inf),
            PenaltyFamily::ElasticNet => (-lambda * (1.0 - self.alpha), lambda * self.alpha, 0.0, inf),
            PenaltyFamily::Mcp if magnitude <= gamma * lambda => (1.0 / gamma, lambda, 0.0, gamma * lambda),
            PenaltyFamily::Mcp => (0.0, 0.0, gamma * lambda, inf),
            PenaltyFamily::Scad if magnitude <= lambda => (0.0, lambda, 0.0, lambda),
            PenaltyFamily::Scad if magnitude <= gamma * lambda => (
                1.0 / (gamma - 1.0),
                gamma * lambda / (gamma - 1.0),
                lambda,
                gamma * lambda,
            ),
            PenaltyFamily::Scad => (0.0, 0.0, gamma * lambda, inf),
        }
    }

    /// Half-width of the subgradient interval at zero.
    pub fn zero_bound(&self, lambda: f64) -> f64 {
        match self.family {
            PenaltyFamily::ElasticNet => lambda * self.alpha,
            _ => lambda,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.family {
            PenaltyFamily::Lasso => "lasso",
            PenaltyFamily::ElasticNet => "elastic_net",
            PenaltyFamily::Mcp => "mcp",
            PenaltyFamily::Scad => "scad",
        }
    }
}

impl fmt::Display for PenaltySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PenaltySpec {
    type Err = CsuvError;

    /// Parses `lasso`, `enet`/`elastic_net`, `mcp`, `scad` with default
    /// parameters.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lasso" => Ok(Self::lasso()),
            "enet" | "elastic_net" | "elasticnet" => Ok(Self::elastic_net(DEFAULT_ENET_ALPHA)),
            "mcp" => Ok(Self::mcp(DEFAULT_MCP_CONCAVITY)),
            "scad" => Ok(Self::scad(DEFAULT_SCAD_CONCAVITY)),
            other => Err(CsuvError::InvalidPenalty(format!("unknown method `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-0.5, 1.0), 0.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
    }

    #[test]
    fn validation() {
        assert!(PenaltySpec::mcp(1.0).validate().is_err());
        assert!(PenaltySpec::scad(2.0).validate().is_err());
        assert!(PenaltySpec::elastic_net(0.0).validate().is_err());
        for p in PenaltySpec::default_constituents() {
            p.validate().unwrap();
        }
    }

    fn all_penalties() -> Vec<PenaltySpec> {
        vec![
            PenaltySpec::lasso(),
            PenaltySpec::elastic_net(0.5),
            PenaltySpec::mcp(3.0),
            PenaltySpec::scad(3.7),
        ]
    }

    /// Brute-force minimization of the scalar subproblem on a fine grid.
    fn grid_minimizer(pen: &PenaltySpec, z: f64, lambda: f64) -> f64 {
        let obj = |b: f64| 0.5 * (b - z) * (b - z) + pen.value(b, lambda);
        let mut best = (0.0, obj(0.0));
        let steps = 200_000;
        let (lo, hi) = (-2.0 * z.abs() - 1.0, 2.0 * z.abs() + 1.0);
        for k in 0..=steps {
            let b = lo + (hi - lo) * k as f64 / steps as f64;
            let v = obj(b);
            if v < best.1 {
                best = (b, v);
            }
        }
        best.0
    }

    #[test]
    fn thresholds_match_grid_search() {
        for pen in all_penalties() {
            for &z in &[-5.0, -3.3, -2.1, -1.4, -0.6, 0.0, 0.3, 0.9, 1.7, 2.5, 3.6, 6.0] {
                let t = pen.threshold(z, 1.0);
                let g = grid_minimizer(&pen, z, 1.0);
                assert_abs_diff_eq!(t, g, epsilon = 1e-3);
            }
        }
    }

    #[test]
    fn thresholds_are_continuous_at_region_boundaries() {
        let lam = 0.7;
        for pen in [PenaltySpec::mcp(3.0), PenaltySpec::scad(3.7)] {
            let gamma = pen.concavity;
            for edge in [lam, 2.0 * lam, gamma * lam] {
                let a = pen.threshold(edge - 1e-9, lam);
                let b = pen.threshold(edge + 1e-9, lam);
                assert_abs_diff_eq!(a, b, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let lam = 0.8;
        for pen in all_penalties() {
            for &a in &[0.1, 0.5, 0.79, 1.2, 1.9, 2.6, 3.5] {
                let h = 1e-6;
                let fd = (pen.value(a + h, lam) - pen.value(a - h, lam)) / (2.0 * h);
                assert_abs_diff_eq!(pen.derivative(a, lam), fd, epsilon = 1e-5);
            }
        }
    }

    #[test]
    fn parses_method_names() {
        assert_eq!("MCP".parse::<PenaltySpec>().unwrap(), PenaltySpec::mcp(3.0));
        assert_eq!("enet".parse::<PenaltySpec>().unwrap().alpha, 0.5);
        assert!("ridge".parse::<PenaltySpec>().is_err());
    }
}
