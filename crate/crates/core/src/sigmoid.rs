//! Transition functions `φ_ε` that replace `sign(v)` in a regularized system.
//!
//! Each kind saturates to `sign(v)` (or to the unit step for the `[0, 1]`
//! kinds) as `|v|/ε → ∞`. Outside the switch the approach is described by a
//! tail expansion of the form
//!
//! ```text
//! φ_ε(v) ≈ sign(v)·(1 + e^{−κ|v/ε|^p} Σₙ cₙ (ε/|v|)ⁿ)
//! ```
//!
//! with kind-specific `κ`, `p`, `cₙ` (see [`TailCoefficients`]).

use core::f64::consts::{FRAC_2_PI, FRAC_PI_2, PI};

use crate::error::{Error, Result};

/// The family a sigmoid belongs to.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SigmoidKind {
    /// `v/ε` clamped to `[−1, 1]`; exactly `sign(v)` for `|v| ≥ ε`.
    PiecewiseLinear,
    /// `(2/π)·arctan(v/ε)`.
    ArctanUnit,
    /// `½ + (1/π)·arctan(v/ε)`, with range `[0, 1]`.
    Arctan01,
    Tanh,
    Erf,
    /// Hill function `Z(x) = x^{1/ε}/(x^{1/ε} + θ^{1/ε})` on `x > 0`, range `[0, 1]`.
    Hill {
        theta: f64,
    },
}

impl SigmoidKind {
    pub fn name(&self) -> &'static str {
        match self {
            SigmoidKind::PiecewiseLinear => "piecewise_linear",
            SigmoidKind::ArctanUnit => "arctan_unit",
            SigmoidKind::Arctan01 => "arctan_01",
            SigmoidKind::Tanh => "tanh",
            SigmoidKind::Erf => "erf",
            SigmoidKind::Hill { .. } => "hill",
        }
    }
}

/// Range of a sigmoid's values.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SigmoidRange {
    /// `[−1, 1]`, saturating to `sign(v)`.
    Symmetric,
    /// `[0, 1]`, saturating to `step(v)`.
    Unit,
}

/// Coefficients of the exponential-algebraic tail expansion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailCoefficients {
    pub kappa: f64,
    pub p: f64,
    /// `c₀ … c₃`, relative to the saturation value on the `[−1, 1]` scale.
    pub c: [f64; 4],
    pub max_order: usize,
}

/// A regularizing sigmoid with stiffness `ε`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigmoidSpec {
    kind: SigmoidKind,
    eps: f64,
}

impl SigmoidSpec {
    pub fn new(kind: SigmoidKind, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParameter("sigmoid stiffness must be positive"));
        }
        if let SigmoidKind::Hill { theta } = kind {
            if !(theta > 0.0 && theta.is_finite()) {
                return Err(Error::InvalidParameter("Hill threshold must be positive"));
            }
        }
        Ok(SigmoidSpec { kind, eps })
    }

    pub fn kind(&self) -> SigmoidKind {
        self.kind
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn range(&self) -> SigmoidRange {
        match self.kind {
            SigmoidKind::Arctan01 | SigmoidKind::Hill { .. } => SigmoidRange::Unit,
            _ => SigmoidRange::Symmetric,
        }
    }

    /// `φ_ε(v)`. For Hill functions `v` is the (positive) concentration argument.
    pub fn evaluate(&self, v: f64) -> Result<f64> {
        let u = v / self.eps;
        Ok(match self.kind {
            SigmoidKind::PiecewiseLinear => u.clamp(-1.0, 1.0),
            SigmoidKind::ArctanUnit => FRAC_2_PI * libm::atan(u),
            SigmoidKind::Arctan01 => 0.5 + libm::atan(u) / PI,
            SigmoidKind::Tanh => libm::tanh(u),
            SigmoidKind::Erf => libm::erf(u),
            SigmoidKind::Hill { theta } => {
                if !(v > 0.0) {
                    return Err(Error::SigmoidDomain(v));
                }
                // Z = 1 / (1 + (θ/x)^{1/ε}), evaluated in log space.
                logistic((libm::log(v) - libm::log(theta)) / self.eps)
            }
        })
    }

    /// The switching multiplier `λ ∈ [−1, 1]` produced at surface value `v`.
    ///
    /// `[0, 1]` kinds are rescaled by `2φ − 1`; Hill functions are applied
    /// through the reparameterization `x = θ·e^{v/ε}`.
    pub fn multiplier(&self, v: f64) -> f64 {
        let u = v / self.eps;
        match self.kind {
            SigmoidKind::PiecewiseLinear => u.clamp(-1.0, 1.0),
            SigmoidKind::ArctanUnit | SigmoidKind::Arctan01 => FRAC_2_PI * libm::atan(u),
            SigmoidKind::Tanh => libm::tanh(u),
            SigmoidKind::Erf => libm::erf(u),
            // 2Z(θe^{v/ε}) − 1 with log(x/θ)/ε = v/ε².
            SigmoidKind::Hill { .. } => 2.0 * logistic(u / self.eps) - 1.0,
        }
    }

    /// Inverse of [`multiplier`](Self::multiplier) on the open interval `(−1, 1)`.
    ///
    /// `None` for `|λ| ≥ 1` and for the error function, whose inverse is not provided.
    pub fn inverse_multiplier(&self, lambda: f64) -> Option<f64> {
        if !(lambda > -1.0 && lambda < 1.0) {
            return None;
        }
        let eps = self.eps;
        match self.kind {
            SigmoidKind::PiecewiseLinear => Some(eps * lambda),
            SigmoidKind::ArctanUnit | SigmoidKind::Arctan01 => Some(eps * libm::tan(FRAC_PI_2 * lambda)),
            SigmoidKind::Tanh => Some(eps * libm::atanh(lambda)),
            SigmoidKind::Hill { .. } => {
                let z = 0.5 * (lambda + 1.0);
                Some(eps * eps * libm::log(z / (1.0 - z)))
            }
            SigmoidKind::Erf => None,
        }
    }

    /// Tail coefficients for the kinds that have an expansion.
    pub fn tail_coefficients(&self) -> TailCoefficients {
        const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;
        match self.kind {
            SigmoidKind::PiecewiseLinear => TailCoefficients { kappa: 0.0, p: 1.0, c: [0.0; 4], max_order: 3 },
            // tanh u = sign(u)(1 − 2e^{−2|u|} + O(e^{−4|u|})).
            SigmoidKind::Tanh => TailCoefficients { kappa: 2.0, p: 1.0, c: [-2.0, 0.0, 0.0, 0.0], max_order: 3 },
            // erf u = sign(u)(1 − e^{−u²}(1/|u| − 1/(2|u|³) + ...)/√π).
            SigmoidKind::Erf => TailCoefficients {
                kappa: 1.0,
                p: 2.0,
                c: [0.0, -FRAC_1_SQRT_PI, 0.0, 0.5 * FRAC_1_SQRT_PI],
                max_order: 3,
            },
            // arctan u = sign(u)π/2 − 1/u + O(u⁻³), so (2/π)arctan u ≈ sign(u)(1 − (2/π)/|u|).
            SigmoidKind::ArctanUnit | SigmoidKind::Arctan01 => {
                TailCoefficients { kappa: 0.0, p: 1.0, c: [0.0, -FRAC_2_PI, 0.0, 0.0], max_order: 1 }
            }
            // Z ≈ step(x − θ) ∓ e^{−|log(x/θ)|/ε}; on the 2Z − 1 scale c₀ = −2.
            SigmoidKind::Hill { .. } => TailCoefficients { kappa: 1.0, p: 1.0, c: [-2.0, 0.0, 0.0, 0.0], max_order: 0 },
        }
    }

    /// Truncated tail expansion of `φ_ε(v)` keeping `c₀ … c_order`.
    ///
    /// Requires `|v| ≥ 3ε`. The result is on the sigmoid's own range
    /// (`[0, 1]` kinds saturate to the unit step). For Hill functions `v` is the
    /// concentration argument and the exponent uses `|log(v/θ)|`.
    pub fn tail_expansion(&self, v: f64, order: usize) -> Result<f64> {
        let coeffs = self.tail_coefficients();
        if order > coeffs.max_order {
            return Err(Error::UnsupportedExpansion { kind: self.kind.name(), order });
        }
        let eps = self.eps;
        let (offset, exponent, sign) = match self.kind {
            SigmoidKind::Hill { theta } => {
                if !(v > 0.0) {
                    return Err(Error::SigmoidDomain(v));
                }
                if libm::fabs(v - theta) < 3.0 * eps {
                    return Err(Error::OutsideTailRegion { v: v - theta, eps });
                }
                let r = libm::fabs(libm::log(v / theta)) / eps;
                (v - theta, coeffs.kappa * r, signum(v - theta))
            }
            _ => {
                if !(libm::fabs(v) >= 3.0 * eps) {
                    return Err(Error::OutsideTailRegion { v, eps });
                }
                let r = libm::fabs(v) / eps;
                (v, coeffs.kappa * libm::pow(r, coeffs.p), signum(v))
            }
        };
        let ratio = eps / libm::fabs(offset);
        let mut series = 0.0;
        let mut power = 1.0;
        for c in coeffs.c.iter().take(order + 1) {
            series += c * power;
            power *= ratio;
        }
        let symmetric = sign * (1.0 + libm::exp(-exponent) * series);
        Ok(match self.range() {
            SigmoidRange::Symmetric => symmetric,
            SigmoidRange::Unit => 0.5 * (symmetric + 1.0),
        })
    }
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

fn signum(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}
