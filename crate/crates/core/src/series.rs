//! Sigmoid-series expansions `f(x; λ) = Σₙ αₙ(x) λⁿ`.
//!
//! The even and odd partial sums recover the branches,
//! `Σ αₙ = f₊` and `Σ (−1)ⁿ αₙ = f₋`, while coefficients beyond `α₁` carry
//! the hidden nonlinearity. [`SeriesExpansion::to_hidden_form`] factors the
//! expansion into canonical `½(f₊+f₋) + ½(f₊−f₋)λ + (λ²−1)·g` form.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::{HiddenFn, State, SwitchedField, SwitchingSurface, VectorFn};

/// Truncated coefficient list `α₀ … α_N` of the λ-power series.
#[derive(Clone)]
pub struct SeriesExpansion {
    dim: usize,
    coefficients: Vec<VectorFn>,
}

impl core::fmt::Debug for SeriesExpansion {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("SeriesExpansion")
            .field("dim", &self.dim)
            .field("truncation_order", &self.truncation_order())
            .finish()
    }
}

impl SeriesExpansion {
    /// Builds an expansion from explicit coefficient functions (at least `α₀`, `α₁`).
    pub fn from_coefficients(dim: usize, coefficients: Vec<VectorFn>) -> Result<Self> {
        if coefficients.len() < 2 {
            return Err(Error::InvalidParameter("a sigmoid series needs at least alpha_0 and alpha_1"));
        }
        Ok(SeriesExpansion { dim, coefficients })
    }

    /// The order-2 expansion fixed by the branches and the midpoint value `r = f(x; 0)`:
    /// `α₀ = r`, `α₁ = ½(f₊ − f₋)`, `α₂ = ½(f₊ + f₋) − r`.
    pub fn expand_from_midpoint(dim: usize, f_plus: VectorFn, f_minus: VectorFn, r: VectorFn) -> Self {
        let alpha0 = r.clone();
        let (p1, m1) = (f_plus.clone(), f_minus.clone());
        let alpha1 = combine(dim, move |t, x, out, tmp| {
            p1(t, x, out);
            m1(t, x, tmp);
            out.iter_mut().zip(tmp.iter()).for_each(|(o, m)| *o = 0.5 * (*o - m));
        });
        let (p2, m2, r2) = (f_plus, f_minus, r);
        let alpha2 = combine(dim, move |t, x, out, tmp| {
            p2(t, x, out);
            m2(t, x, tmp);
            out.iter_mut().zip(tmp.iter()).for_each(|(o, m)| *o = 0.5 * (*o + m));
            r2(t, x, tmp);
            out.iter_mut().zip(tmp.iter()).for_each(|(o, r)| *o -= r);
        });
        SeriesExpansion { dim, coefficients: vec![alpha0, alpha1, alpha2] }
    }

    /// The order-3 expansion that additionally matches the slope `f_λ(x; 0)`:
    /// `α₁ = f_λ(x; 0)` and `α₃ = ½(f₊ − f₋) − f_λ(x; 0)`.
    pub fn expand_with_slope(dim: usize, f_plus: VectorFn, f_minus: VectorFn, r: VectorFn, r_slope: VectorFn) -> Self {
        let mut e = SeriesExpansion::expand_from_midpoint(dim, f_plus.clone(), f_minus.clone(), r);
        let s3 = r_slope.clone();
        let alpha3 = combine(dim, move |t, x, out, tmp| {
            f_plus(t, x, out);
            f_minus(t, x, tmp);
            out.iter_mut().zip(tmp.iter()).for_each(|(o, m)| *o = 0.5 * (*o - m));
            s3(t, x, tmp);
            out.iter_mut().zip(tmp.iter()).for_each(|(o, s)| *o -= s);
        });
        e.coefficients[1] = r_slope;
        e.coefficients.push(alpha3);
        e
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn truncation_order(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// `αₙ(x)` evaluated at `state`.
    pub fn coefficient(&self, n: usize, state: &State) -> Result<Vec<f64>> {
        self.check_dim(state)?;
        let mut out = vec![0.0; self.dim];
        if let Some(alpha) = self.coefficients.get(n) {
            alpha(state.t, &state.x, &mut out);
        }
        Ok(out)
    }

    /// `Σ αₙ(x) λⁿ`, evaluated by Horner's rule.
    pub fn reconstruct(&self, state: &State, lambda: f64) -> Result<Vec<f64>> {
        self.check_dim(state)?;
        let mut acc = vec![0.0; self.dim];
        let mut term = vec![0.0; self.dim];
        for alpha in self.coefficients.iter().rev() {
            alpha(state.t, &state.x, &mut term);
            acc.iter_mut().zip(&term).for_each(|(a, c)| *a = *a * lambda + c);
        }
        Ok(acc)
    }

    /// The branch `f₊ = Σ αₙ` as a vector field.
    pub fn plus_branch(&self) -> VectorFn {
        self.partial_sum(1.0)
    }

    /// The branch `f₋ = Σ (−1)ⁿ αₙ` as a vector field.
    pub fn minus_branch(&self) -> VectorFn {
        self.partial_sum(-1.0)
    }

    /// Factors the expansion into canonical hidden-term form on `surface`.
    ///
    /// The hidden multiplier is
    /// `g(x, λ) = Σ_{n≥1} Σ_{j=0}^{n−1} (α₂ₙ + λ α₂ₙ₊₁) λ^{2j}`, which is
    /// identically zero for expansions of order 1.
    pub fn to_hidden_form(&self, surface: SwitchingSurface) -> SwitchedField {
        let field = SwitchedField::from_parts(self.dim, self.plus_branch(), self.minus_branch(), surface);
        if self.truncation_order() < 2 {
            return field;
        }
        let coefficients = self.coefficients.clone();
        let dim = self.dim;
        let g: HiddenFn = Arc::new(move |t, x, lambda, out| {
            let mut even = vec![0.0; dim];
            let mut odd = vec![0.0; dim];
            out.fill(0.0);
            let l2 = lambda * lambda;
            let pairs = (coefficients.len() - 1) / 2;
            for n in 1..=pairs {
                coefficients[2 * n](t, x, &mut even);
                match coefficients.get(2 * n + 1) {
                    Some(a) => a(t, x, &mut odd),
                    None => odd.fill(0.0),
                }
                // Σ_{j<n} λ^{2j}
                let mut geometric = 0.0;
                let mut p = 1.0;
                for _ in 0..n {
                    geometric += p;
                    p *= l2;
                }
                for i in 0..dim {
                    out[i] += (even[i] + lambda * odd[i]) * geometric;
                }
            }
        });
        field.with_hidden_fn(Some(g))
    }

    fn partial_sum(&self, sign: f64) -> VectorFn {
        let coefficients = self.coefficients.clone();
        let dim = self.dim;
        Arc::new(move |t, x, out| {
            let mut term = vec![0.0; dim];
            out.fill(0.0);
            let mut s = 1.0;
            for alpha in &coefficients {
                alpha(t, x, &mut term);
                out.iter_mut().zip(&term).for_each(|(o, c)| *o += s * c);
                s *= sign;
            }
        })
    }

    fn check_dim(&self, state: &State) -> Result<()> {
        if state.x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: state.x.len() });
        }
        Ok(())
    }
}

fn combine<F>(dim: usize, f: F) -> VectorFn
where
    F: Fn(f64, &[f64], &mut [f64], &mut [f64]) + Send + Sync + 'static,
{
    Arc::new(move |t, x, out| {
        let mut tmp = vec![0.0; dim];
        f(t, x, out, &mut tmp);
    })
}

/// Measured departure data used to match `α₂`, `α₃` from asymptotics.
///
/// The directions are the vectors `g₊`, `g₋` at the point of interest; the
/// leading series coefficients are paired as `(g₊, β₀⁽ᵃ⁾)` and `(g₋, β₀⁽ᵇ⁾)`.
/// One exponent pair `(κ, p)` serves both sides (symmetric asymptotics).
#[derive(Clone, Debug, PartialEq)]
pub struct AsymptoticData {
    pub g_plus: Vec<f64>,
    pub g_minus: Vec<f64>,
    pub b0_plus: f64,
    pub b0_minus: f64,
    /// Leading tail coefficient `c₀` of the sigmoid.
    pub c0: f64,
    pub kappa: f64,
    pub p: f64,
}

/// Matches `α₂`, `α₃` at a fixed state from asymptotic departure data.
///
/// ```text
/// α₂ = (g₊β₀⁽ᵃ⁾ + g₋β₀⁽ᵇ⁾)/(4c₀) − Σ_{m≥2} m α₂ₘ
/// α₃ = (g₊β₀⁽ᵃ⁾ − g₋β₀⁽ᵇ⁾)/(4c₀) − ¼(f₊ − f₋) − Σ_{m≥2} m α₂ₘ₊₁
/// ```
///
/// `tail_even[k]` holds `α₂ₘ` and `tail_odd[k]` holds `α₂ₘ₊₁` for `m = k + 2`;
/// empty slices correspond to truncation at order 3.
pub fn match_alpha23(
    f_plus: &[f64],
    f_minus: &[f64],
    data: &AsymptoticData,
    tail_even: &[Vec<f64>],
    tail_odd: &[Vec<f64>],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = f_plus.len();
    let lens = [f_minus.len(), data.g_plus.len(), data.g_minus.len()];
    if let Some(&found) = lens.iter().find(|&&l| l != n) {
        return Err(Error::DimensionMismatch { expected: n, found });
    }
    if let Some(v) = tail_even.iter().chain(tail_odd).find(|v| v.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, found: v.len() });
    }
    if data.c0 == 0.0 || !data.c0.is_finite() {
        return Err(Error::MatchingUndefined);
    }
    if !(data.kappa >= 0.0) || !(data.p > 0.0) {
        return Err(Error::InvalidParameter("asymptotic exponents need kappa >= 0 and p > 0"));
    }
    let scale = 0.25 / data.c0;
    let mut alpha2 = vec![0.0; n];
    let mut alpha3 = vec![0.0; n];
    for i in 0..n {
        let a = data.g_plus[i] * data.b0_plus;
        let b = data.g_minus[i] * data.b0_minus;
        alpha2[i] = scale * (a + b);
        alpha3[i] = scale * (a - b) - 0.25 * (f_plus[i] - f_minus[i]);
    }
    for (k, v) in tail_even.iter().enumerate() {
        let m = (k + 2) as f64;
        alpha2.iter_mut().zip(v).for_each(|(a, t)| *a -= m * t);
    }
    for (k, v) in tail_odd.iter().enumerate() {
        let m = (k + 2) as f64;
        alpha3.iter_mut().zip(v).for_each(|(a, t)| *a -= m * t);
    }
    Ok((alpha2, alpha3))
}
