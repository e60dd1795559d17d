use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Components this close to 0 or 1 are treated as boundary values.
pub const BOUNDARY_EPS: f64 = 1e-12;

/// Stand-in magnitude for the divergent derivative at a boundary component.
pub const BOUNDARY_SLOPE: f64 = 1e12;

/// Particle-hole symmetric occupation-number penalty `f(n) = Σ_i φ(n_i)`.
///
/// Each kind is Schur-concave, so `-κ f` in the functional is Schur-convex.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PenaltyFunctional {
    /// `φ(n) = -[n ln n + (1-n) ln(1-n)]`, so `f = S`.
    #[default]
    PhEntropy,
    /// `φ(n) = sqrt(n (1-n))`.
    SqrtPh,
    /// `φ(n) = n^p + (1-n)^p`, `0 < p < 1`.
    Power { p: f64 },
}

/// Value and gradient of a penalty at an occupation vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyEval {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Components evaluated at the boundary, whose gradient is a sentinel.
    pub boundary: Vec<usize>,
}

impl PenaltyFunctional {
    pub fn power(p: f64) -> Result<Self> {
        if p > 0.0 && p < 1.0 {
            Ok(Self::Power { p })
        } else {
            Err(Error::InvalidArgument(format!("power exponent {p} outside (0, 1)")))
        }
    }

    /// Per-component term `φ(n)`; boundary values by continuity.
    pub fn term(&self, n: f64) -> f64 {
        let n = n.clamp(0.0, 1.0);
        match *self {
            Self::PhEntropy => -(xlnx(n) + xlnx(1.0 - n)),
            Self::SqrtPh => (n * (1.0 - n)).sqrt(),
            Self::Power { p } => n.powf(p) + (1.0 - n).powf(p),
        }
    }

    /// `φ'(n)` on the open interval.
    pub fn term_derivative(&self, n: f64) -> f64 {
        match *self {
            Self::PhEntropy => (-n).ln_1p() - n.ln(),
            Self::SqrtPh => (1.0 - 2.0 * n) / (2.0 * (n * (1.0 - n)).sqrt()),
            Self::Power { p } => p * (n.powf(p - 1.0) - (1.0 - n).powf(p - 1.0)),
        }
    }

    /// `φ''(n)` on the open interval (always negative).
    pub fn term_curvature(&self, n: f64) -> f64 {
        match *self {
            Self::PhEntropy => -(1.0 / n + 1.0 / (1.0 - n)),
            Self::SqrtPh => {
                let s = (n * (1.0 - n)).sqrt();
                -1.0 / (4.0 * s * s * s)
            }
            Self::Power { p } => p * (p - 1.0) * (n.powf(p - 2.0) + (1.0 - n).powf(p - 2.0)),
        }
    }

    /// Solves `φ'(n) = y` for `n` in `(0, 1)`; `φ'` decreases from `+∞` to `-∞`.
    pub fn inverse_derivative(&self, y: f64) -> f64 {
        match *self {
            // ln((1-n)/n) = y
            Self::PhEntropy => logistic(-y),
            _ => {
                let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if self.term_derivative(mid) > y {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    pub fn value(&self, n: &[f64]) -> f64 {
        n.iter().map(|&x| self.term(x)).sum()
    }

    /// Value and gradient with boundary handling.
    pub fn value_grad(&self, n: &[f64]) -> Result<PenaltyEval> {
        let mut gradient = Vec::with_capacity(n.len());
        let mut boundary = Vec::new();
        let mut value = 0.0;
        for (i, &x) in n.iter().enumerate() {
            if !(-BOUNDARY_EPS..=1.0 + BOUNDARY_EPS).contains(&x) || !x.is_finite() {
                return Err(Error::InvalidOccupations(format!("component {i} = {x} outside [0, 1]")));
            }
            value += self.term(x);
            if x <= BOUNDARY_EPS {
                gradient.push(BOUNDARY_SLOPE);
                boundary.push(i);
            } else if x >= 1.0 - BOUNDARY_EPS {
                gradient.push(-BOUNDARY_SLOPE);
                boundary.push(i);
            } else {
                gradient.push(self.term_derivative(x));
            }
        }
        Ok(PenaltyEval {
            value,
            gradient,
            boundary,
        })
    }
}

impl fmt::Display for PenaltyFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PhEntropy => write!(f, "ph_entropy"),
            Self::SqrtPh => write!(f, "sqrt_ph"),
            Self::Power { p } => write!(f, "power:{p}"),
        }
    }
}

impl FromStr for PenaltyFunctional {
    type Err = Error;

    /// Accepts `ph_entropy`, `sqrt_ph`, `power` (p = 1/2) and `power:<p>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ph_entropy" | "entropy" => Ok(Self::PhEntropy),
            "sqrt_ph" | "sqrt" => Ok(Self::SqrtPh),
            "power" => Self::power(0.5),
            other => match other.strip_prefix("power:") {
                Some(p) => {
                    let p: f64 = p
                        .parse()
                        .map_err(|_| Error::InvalidArgument(format!("bad power exponent '{p}'")))?;
                    Self::power(p)
                }
                None => Err(Error::InvalidArgument(format!("unknown penalty '{other}'"))),
            },
        }
    }
}

#[inline]
fn xlnx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

#[inline]
pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
