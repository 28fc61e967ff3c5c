//! The worked example systems.
//!
//! All systems use adapted coordinates with the switching surface `x₁ = 0`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::{SwitchedField, SwitchingSurface};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Example1Variant {
    Filippov,
    Nonlinear,
}

/// `f₊ = (1, −1)`, `f₋ = (−1, −1)`.
///
/// The Filippov variant has `f = (λ, −1)`; the nonlinear one `f = (λ, 1 − 2λ²)`.
/// Both sides flow away from `x₁ = 0`, so the sliding mode `λ = 0` repels.
pub fn make_example1(variant: Example1Variant) -> SwitchedField {
    let sys = SwitchedField::new(
        2,
        |_, _, out: &mut [f64]| out.copy_from_slice(&[1.0, -1.0]),
        |_, _, out: &mut [f64]| out.copy_from_slice(&[-1.0, -1.0]),
        SwitchingSurface::first_coordinate(),
    );
    match variant {
        Example1Variant::Filippov => sys,
        Example1Variant::Nonlinear => sys.with_hidden(|_, _, _, out: &mut [f64]| out.copy_from_slice(&[0.0, -2.0])),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Example2Variant {
    Continuous,
    Nonlinear,
}

/// `f₊ = f₋ = (1, 1)`.
///
/// The continuous variant is the constant field; the nonlinear one is
/// `f = (2λ² − 1, 1)` with sliding modes at `λ = ±1/√2`.
pub fn make_example2(variant: Example2Variant) -> SwitchedField {
    let sys = SwitchedField::new(
        2,
        |_, _, out: &mut [f64]| out.copy_from_slice(&[1.0, 1.0]),
        |_, _, out: &mut [f64]| out.copy_from_slice(&[1.0, 1.0]),
        SwitchingSurface::first_coordinate(),
    );
    match variant {
        Example2Variant::Continuous => sys,
        Example2Variant::Nonlinear => sys.with_hidden(|_, _, _, out: &mut [f64]| out.copy_from_slice(&[2.0, 0.0])),
    }
}

/// A relay-switched RLC circuit with a nonlinear switching element.
///
/// ```text
/// RC·dV/dt = −V + R·p(μ)·I,   L·dI/dt = V₀ − μ·V,   p(μ) = μ − σ(1 − μ)μ
/// ```
///
/// where `μ = 1` ("on") for `V < V_b` and `μ = 0` ("off") for `V > V_b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CircuitParams {
    pub l: f64,
    pub c: f64,
    pub r: f64,
    pub v0: f64,
    pub vb: f64,
    pub sigma: f64,
}

impl Default for CircuitParams {
    fn default() -> Self {
        CircuitParams { l: 5.0, c: 2.0 / 3.0, r: 3.75, v0: 5.0, vb: 6.0, sigma: 0.0 }
    }
}

impl CircuitParams {
    pub fn with_sigma(self, sigma: f64) -> Self {
        CircuitParams { sigma, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.l, self.c, self.r, self.v0, self.vb].iter().all(|v| *v > 0.0 && v.is_finite());
        if !positive {
            return Err(Error::InvalidParameter("circuit L, C, R, V0 and Vb must be positive"));
        }
        if !(libm::fabs(self.sigma) < 1.0) {
            return Err(Error::InvalidParameter("circuit sigma must satisfy |sigma| < 1"));
        }
        Ok(())
    }

    pub fn rc(&self) -> f64 {
        self.r * self.c
    }

    pub fn p(&self, mu: f64) -> f64 {
        mu - self.sigma * (1.0 - mu) * mu
    }

    /// Adapted state `(V_b − V, I)` for physical `(I, V)`.
    pub fn to_adapted(&self, i: f64, v: f64) -> Vec<f64> {
        alloc::vec![self.vb - v, i]
    }

    /// Physical `(I, V)` from the adapted state.
    pub fn to_physical(&self, x: &[f64]) -> (f64, f64) {
        (x[1], self.vb - x[0])
    }

    /// The pseudo-equilibrium `(μ, I)` of the layer: `μ = V₀/V_b`, `I·R·p(μ) = V_b`.
    pub fn saddle(&self) -> (f64, f64) {
        let mu = self.v0 / self.vb;
        let i =
            self.vb * self.vb * self.vb / (self.r * (self.v0 * self.vb - self.sigma * self.v0 * (self.vb - self.v0)));
        (mu, i)
    }

    /// Equilibrium `(I, V) = (V₀/R, V₀)` of the "on" branch.
    pub fn on_focus(&self) -> (f64, f64) {
        (self.v0 / self.r, self.v0)
    }
}

pub fn mu_from_lambda(lambda: f64) -> f64 {
    0.5 * (1.0 + lambda)
}

pub fn lambda_from_mu(mu: f64) -> f64 {
    2.0 * mu - 1.0
}

/// The circuit in adapted coordinates `x = (v, I)` with `v = V_b − V`.
///
/// `λ = 2μ − 1`, so the plus side `v > 0` is the "on" branch and `λ`
/// increases with `μ`. The `σ` term of `p` is the hidden part:
/// `p = ½(1 + λ) + σ(λ² − 1)/4`.
pub fn make_circuit(p: CircuitParams) -> Result<SwitchedField> {
    p.validate()?;
    let CircuitParams { l, r, v0, vb, sigma, .. } = p;
    let rc = p.rc();
    let on = move |_t: f64, x: &[f64], out: &mut [f64]| {
        let v = vb - x[0];
        out[0] = (v - x[1] * r) / rc;
        out[1] = (v0 - v) / l;
    };
    let off = move |_t: f64, x: &[f64], out: &mut [f64]| {
        let v = vb - x[0];
        out[0] = v / rc;
        out[1] = v0 / l;
    };
    let sys = SwitchedField::new(2, on, off, SwitchingSurface::first_coordinate());
    if sigma == 0.0 {
        return Ok(sys);
    }
    Ok(sys.with_hidden(move |_, x: &[f64], _, out: &mut [f64]| {
        out[0] = -x[1] * r * sigma / (4.0 * rc);
        out[1] = 0.0;
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DuffingVariant {
    /// Restoring force `−λ³`.
    NonlinearCubic,
    /// Restoring force `−λ`.
    Linear,
}

/// A forced oscillator whose restoring force switches across `x₁ = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DuffingParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub variant: DuffingVariant,
    /// Time constant of the optional third state `dx₃/dt = (λ − x₃)/μ`.
    pub tracker_mu: Option<f64>,
}

impl Default for DuffingParams {
    fn default() -> Self {
        DuffingParams { a: 0.15, b: 0.05, c: 0.1, variant: DuffingVariant::NonlinearCubic, tracker_mu: None }
    }
}

impl DuffingParams {
    pub fn validate(&self) -> Result<()> {
        if !([self.a, self.b, self.c].iter().all(|v| *v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter("Duffing a, b and c must be positive"));
        }
        if let Some(mu) = self.tracker_mu {
            if !(mu > 0.0 && mu.is_finite()) {
                return Err(Error::InvalidParameter("tracker time constant must be positive"));
            }
        }
        Ok(())
    }
}

/// `dx₁/dt = x₂ − c·x₁`, `dx₂/dt = −λᵏ − b·x₂ + a·cos t` with `k = 3` or `k = 1`.
///
/// The cubic is split as `−λ³ = −λ + (λ² − 1)(−λ)`, so the hidden multiplier is
/// `g = (0, −λ)`.
pub fn make_duffing(p: DuffingParams) -> Result<SwitchedField> {
    p.validate()?;
    let DuffingParams { a, b, c, variant, tracker_mu } = p;
    let dim = if tracker_mu.is_some() { 3 } else { 2 };
    let branch = move |lambda: f64| {
        move |t: f64, x: &[f64], out: &mut [f64]| {
            out[0] = x[1] - c * x[0];
            out[1] = -lambda - b * x[1] + a * libm::cos(t);
            if let Some(mu) = tracker_mu {
                out[2] = (lambda - x[2]) / mu;
            }
        }
    };
    let sys = SwitchedField::new(dim, branch(1.0), branch(-1.0), SwitchingSurface::first_coordinate())
        .with_time_dependence(true);
    Ok(match variant {
        DuffingVariant::Linear => sys,
        DuffingVariant::NonlinearCubic => sys.with_hidden(|_, _, lambda, out: &mut [f64]| {
            out.fill(0.0);
            out[1] = -lambda;
        }),
    })
}
