//! Switched vector fields in canonical hidden-term form.
//!
//! A [`SwitchedField`] stores the two smooth branches `f₊`, `f₋`, the
//! switching surface `v`, and the hidden multiplier `g` such that the full
//! field on the surface is
//!
//! ```text
//! f(x; λ) = ½(f₊ + f₋) + ½(f₊ − f₋)λ + (λ² − 1)·g(x, λ).
//! ```
//!
//! Storing `g` rather than the hidden term `E = (λ² − 1)g` makes `E(x; ±1) = 0`
//! hold by construction.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// Vector field `(t, x, out)`.
pub type VectorFn = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;
/// Hidden multiplier `(t, x, λ, out)`.
pub type HiddenFn = Arc<dyn Fn(f64, &[f64], f64, &mut [f64]) + Send + Sync>;
/// Scalar function of state.
pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Gradient of a scalar function of state, written into `out`.
pub type GradientFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

pub const DEFAULT_SURFACE_TOLERANCE: f64 = 1e-9;

/// A point in the (possibly non-autonomous) phase space.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub t: f64,
    pub x: Vec<f64>,
}

impl State {
    pub fn new(t: f64, x: Vec<f64>) -> Self {
        State { t, x }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// Side of the switching surface a state lies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Region {
    Plus,
    Minus,
    OnSurface,
}

impl Region {
    /// The value of `sign(v)` on this side (zero on the surface).
    pub fn sign(self) -> f64 {
        match self {
            Region::Plus => 1.0,
            Region::Minus => -1.0,
            Region::OnSurface => 0.0,
        }
    }

    pub fn opposite(self) -> Region {
        match self {
            Region::Plus => Region::Minus,
            Region::Minus => Region::Plus,
            Region::OnSurface => Region::OnSurface,
        }
    }
}

/// The zero set of a scalar function `v`, with its gradient.
#[derive(Clone)]
pub struct SwitchingSurface {
    value: ScalarFn,
    gradient: GradientFn,
    tolerance: f64,
    adapted: bool,
}

impl fmt::Debug for SwitchingSurface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SwitchingSurface")
            .field("tolerance", &self.tolerance)
            .field("adapted", &self.adapted)
            .finish_non_exhaustive()
    }
}

impl SwitchingSurface {
    pub fn new<V, G>(value: V, gradient: G) -> Self
    where
        V: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        SwitchingSurface {
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            tolerance: DEFAULT_SURFACE_TOLERANCE,
            adapted: false,
        }
    }

    /// The surface `x₁ = 0`, i.e. `v(x) = x₁` with `∇v = (1, 0, ..., 0)`.
    pub fn first_coordinate() -> Self {
        let mut s = SwitchingSurface::new(
            |x: &[f64]| x[0],
            |_x: &[f64], out: &mut [f64]| {
                out.fill(0.0);
                out[0] = 1.0;
            },
        );
        s.adapted = true;
        s
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Result<Self> {
        if !(tolerance > 0.0 && tolerance.is_finite()) {
            return Err(Error::InvalidParameter("surface tolerance must be positive"));
        }
        self.tolerance = tolerance;
        Ok(self)
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        (self.gradient)(x, out)
    }

    /// Classifies `x` against the surface using the absolute tolerance band.
    pub fn regime_of(&self, x: &[f64]) -> Region {
        let v = self.value(x);
        if v > self.tolerance {
            Region::Plus
        } else if v < -self.tolerance {
            Region::Minus
        } else {
            Region::OnSurface
        }
    }

    /// Largest relative deviation between `∇v` and a central finite difference of `v`.
    pub fn gradient_error(&self, x: &[f64]) -> f64 {
        let n = x.len();
        let mut grad = vec![0.0; n];
        self.gradient(x, &mut grad);
        let mut probe = x.to_vec();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let h = 1e-6 * (1.0 + libm::fabs(x[i]));
            probe[i] = x[i] + h;
            let up = self.value(&probe);
            probe[i] = x[i] - h;
            let down = self.value(&probe);
            probe[i] = x[i];
            let fd = (up - down) / (2.0 * h);
            let scale = libm::fmax(libm::fabs(grad[i]), 1.0);
            worst = libm::fmax(worst, libm::fabs(fd - grad[i]) / scale);
        }
        worst
    }

    /// Whether `∇v(x) = (1, 0, ..., 0)`, the coordinate form layer analysis works in.
    pub fn is_adapted_at(&self, x: &[f64]) -> bool {
        if self.adapted {
            return true;
        }
        let mut grad = vec![0.0; x.len()];
        self.gradient(x, &mut grad);
        grad.iter().enumerate().all(|(i, g)| libm::fabs(g - if i == 0 { 1.0 } else { 0.0 }) <= 1e-12)
            && libm::fabs(self.value(x) - x[0]) <= 1e-12 * (1.0 + libm::fabs(x[0]))
    }
}

/// A piecewise-smooth vector field with an optional hidden term.
///
/// Immutable once built; clones share the underlying closures.
#[derive(Clone)]
pub struct SwitchedField {
    dim: usize,
    f_plus: VectorFn,
    f_minus: VectorFn,
    surface: SwitchingSurface,
    hidden: Option<HiddenFn>,
    time_dependent: bool,
}

impl fmt::Debug for SwitchedField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SwitchedField")
            .field("dim", &self.dim)
            .field("surface", &self.surface)
            .field("hidden", &self.hidden.is_some())
            .field("time_dependent", &self.time_dependent)
            .finish_non_exhaustive()
    }
}

impl SwitchedField {
    pub fn new<P, M>(dim: usize, f_plus: P, f_minus: M, surface: SwitchingSurface) -> Self
    where
        P: Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
        M: Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        SwitchedField::from_parts(dim, Arc::new(f_plus), Arc::new(f_minus), surface)
    }

    pub fn from_parts(dim: usize, f_plus: VectorFn, f_minus: VectorFn, surface: SwitchingSurface) -> Self {
        SwitchedField { dim, f_plus, f_minus, surface, hidden: None, time_dependent: false }
    }

    /// Attaches the hidden multiplier `g`, so that `E = (λ² − 1)·g`.
    pub fn with_hidden<G>(mut self, g: G) -> Self
    where
        G: Fn(f64, &[f64], f64, &mut [f64]) + Send + Sync + 'static,
    {
        self.hidden = Some(Arc::new(g));
        self
    }

    pub fn with_hidden_fn(mut self, g: Option<HiddenFn>) -> Self {
        self.hidden = g;
        self
    }

    pub fn with_time_dependence(mut self, time_dependent: bool) -> Self {
        self.time_dependent = time_dependent;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn surface(&self) -> &SwitchingSurface {
        &self.surface
    }

    pub fn is_time_dependent(&self) -> bool {
        self.time_dependent
    }

    pub fn has_hidden_term(&self) -> bool {
        self.hidden.is_some()
    }

    pub fn regime_of(&self, state: &State) -> Result<Region> {
        self.check_dim(state.x.len())?;
        Ok(self.surface.regime_of(&state.x))
    }

    /// `f(x; λ)` for `λ ∈ [−1, 1]`; at `λ = ±1` this is the branch value itself.
    pub fn eval_field(&self, state: &State, lambda: f64) -> Result<Vec<f64>> {
        check_lambda(lambda)?;
        let mut out = vec![0.0; self.dim];
        self.evaluator().eval(state.t, &state.x, lambda, &mut out)?;
        Ok(out)
    }

    /// The hidden term `E(x; λ) = (λ² − 1)·g(x, λ)`.
    pub fn hidden_term(&self, state: &State, lambda: f64) -> Result<Vec<f64>> {
        check_lambda(lambda)?;
        self.check_dim(state.x.len())?;
        let mut out = vec![0.0; self.dim];
        if let Some(g) = &self.hidden {
            g(state.t, &state.x, lambda, &mut out);
            check_finite(&out)?;
            let factor = lambda * lambda - 1.0;
            out.iter_mut().for_each(|e| *e *= factor);
        }
        Ok(out)
    }

    /// The hidden multiplier `g(x, λ)` (zero when the system has no hidden term).
    pub fn hidden_multiplier(&self, state: &State, lambda: f64) -> Result<Vec<f64>> {
        self.check_dim(state.x.len())?;
        let mut out = vec![0.0; self.dim];
        if let Some(g) = &self.hidden {
            g(state.t, &state.x, lambda, &mut out);
            check_finite(&out)?;
        }
        Ok(out)
    }

    pub fn f_plus(&self, state: &State) -> Result<Vec<f64>> {
        self.check_dim(state.x.len())?;
        let mut out = vec![0.0; self.dim];
        (self.f_plus)(state.t, &state.x, &mut out);
        check_finite(&out)?;
        Ok(out)
    }

    pub fn f_minus(&self, state: &State) -> Result<Vec<f64>> {
        self.check_dim(state.x.len())?;
        let mut out = vec![0.0; self.dim];
        (self.f_minus)(state.t, &state.x, &mut out);
        check_finite(&out)?;
        Ok(out)
    }

    /// Reusable evaluation context holding scratch buffers.
    pub fn evaluator(&self) -> Evaluator<'_> {
        Evaluator { field: self, minus: vec![0.0; self.dim], hidden: vec![0.0; self.dim] }
    }

    /// The same system run backwards in time: `dx/ds = −f(x, −s)`.
    ///
    /// Repelling sliding modes become attracting under reversal.
    pub fn reversed(&self) -> SwitchedField {
        let fp = self.f_plus.clone();
        let fm = self.f_minus.clone();
        let f_plus: VectorFn = Arc::new(move |t, x, out| {
            fp(-t, x, out);
            out.iter_mut().for_each(|o| *o = -*o);
        });
        let f_minus: VectorFn = Arc::new(move |t, x, out| {
            fm(-t, x, out);
            out.iter_mut().for_each(|o| *o = -*o);
        });
        let hidden = self.hidden.clone().map(|g| {
            let h: HiddenFn = Arc::new(move |t, x, l, out| {
                g(-t, x, l, out);
                out.iter_mut().for_each(|o| *o = -*o);
            });
            h
        });
        SwitchedField {
            dim: self.dim,
            f_plus,
            f_minus,
            surface: self.surface.clone(),
            hidden,
            time_dependent: self.time_dependent,
        }
    }

    pub(crate) fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found });
        }
        Ok(())
    }
}

/// Evaluates a [`SwitchedField`] without allocating.
///
/// Unlike [`SwitchedField::eval_field`] this accepts any real `λ`, extending
/// the field polynomially in the multiplier; layer continuation relies on it.
pub struct Evaluator<'a> {
    field: &'a SwitchedField,
    minus: Vec<f64>,
    hidden: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    pub fn field(&self) -> &'a SwitchedField {
        self.field
    }

    pub fn eval(&mut self, t: f64, x: &[f64], lambda: f64, out: &mut [f64]) -> Result<()> {
        let sys = self.field;
        sys.check_dim(x.len())?;
        sys.check_dim(out.len())?;
        if lambda == 1.0 {
            (sys.f_plus)(t, x, out);
            return check_finite(out);
        }
        if lambda == -1.0 {
            (sys.f_minus)(t, x, out);
            return check_finite(out);
        }
        (sys.f_plus)(t, x, out);
        (sys.f_minus)(t, x, &mut self.minus);
        for (o, m) in out.iter_mut().zip(&self.minus) {
            *o = 0.5 * (*o + m) + 0.5 * (*o - m) * lambda;
        }
        if let Some(g) = &sys.hidden {
            g(t, x, lambda, &mut self.hidden);
            check_finite(&self.hidden)?;
            let factor = lambda * lambda - 1.0;
            for (o, h) in out.iter_mut().zip(&self.hidden) {
                *o += factor * h;
            }
        }
        check_finite(out)
    }

    /// Branch field `f₊` (`side > 0`) or `f₋` (`side < 0`).
    pub fn eval_branch(&mut self, t: f64, x: &[f64], side: f64, out: &mut [f64]) -> Result<()> {
        self.eval(t, x, if side > 0.0 { 1.0 } else { -1.0 }, out)
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&lambda) {
        return Err(Error::LambdaOutOfRange(lambda));
    }
    Ok(())
}

fn check_finite(v: &[f64]) -> Result<()> {
    match v.iter().position(|c| !c.is_finite()) {
        Some(component) => Err(Error::NonFiniteField { component, value: v[component] }),
        None => Ok(()),
    }
}
