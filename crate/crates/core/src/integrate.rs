//! Adaptive integration of smooth, branch-restricted and regularized flows.
//!
//! Everything is driven by one embedded Dormand–Prince 5(4) stepper with
//! PI step-size control and a 4th-order continuous extension. State events
//! (a scalar function changing sign) are localized on the continuous
//! extension with Brent's method.

use alloc::vec;
use alloc::vec::Vec;
use core::cell::RefCell;

use crate::error::{Error, Result};
use crate::field::{Region, State, SwitchedField};
use crate::roots;
use crate::sigmoid::SigmoidSpec;

/// Step-size and event tolerances.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Width in `t` to which event times are localized.
    pub event_tol: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig { rel_tol: 1e-8, abs_tol: 1e-10, max_step: 1e-2, event_tol: 1e-10, max_steps: 10_000_000 }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !(positive(self.rel_tol) && positive(self.abs_tol)) {
            return Err(Error::InvalidParameter("tolerances must be positive"));
        }
        if !positive(self.max_step) || !positive(self.event_tol) {
            return Err(Error::InvalidParameter("max_step and event_tol must be positive"));
        }
        if self.event_tol >= self.max_step {
            return Err(Error::InvalidParameter("event_tol must be smaller than max_step"));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidParameter("max_steps must be positive"));
        }
        Ok(())
    }
}

/// How a trajectory segment was generated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Regime {
    FreePlus,
    FreeMinus,
    Sliding,
    LayerTransit,
    Regularized,
    /// A plain smooth flow with no switching logic.
    Smooth,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::FreePlus => "free_plus",
            Regime::FreeMinus => "free_minus",
            Regime::Sliding => "sliding",
            Regime::LayerTransit => "layer_transit",
            Regime::Regularized => "regularized",
            Regime::Smooth => "smooth",
        }
    }

    pub fn free(side: Region) -> Regime {
        if side == Region::Minus {
            Regime::FreeMinus
        } else {
            Regime::FreePlus
        }
    }
}

/// Time-ordered samples produced under a single regime.
///
/// States are stored contiguously; `lambda`, when tracked, has one entry per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySegment {
    pub regime: Regime,
    dim: usize,
    times: Vec<f64>,
    states: Vec<f64>,
    lambda: Option<Vec<f64>>,
    /// Times at which the surface was approached within tolerance without a crossing.
    pub grazes: Vec<f64>,
}

impl TrajectorySegment {
    pub fn new(regime: Regime, dim: usize, track_lambda: bool) -> Self {
        TrajectorySegment {
            regime,
            dim,
            times: Vec::new(),
            states: Vec::new(),
            lambda: track_lambda.then(Vec::new),
            grazes: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn t(&self, i: usize) -> f64 {
        self.times[i]
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn lambda(&self) -> Option<&[f64]> {
        self.lambda.as_deref()
    }

    pub fn first_state(&self) -> Option<State> {
        (!self.is_empty()).then(|| State::new(self.t(0), self.x(0).to_vec()))
    }

    pub fn last_state(&self) -> Option<State> {
        let n = self.len();
        (n > 0).then(|| State::new(self.t(n - 1), self.x(n - 1).to_vec()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.times.iter().copied().zip(self.states.chunks_exact(self.dim))
    }

    /// Appends a sample; a sample at the current end time replaces the last one.
    pub fn push(&mut self, t: f64, x: &[f64], lambda: Option<f64>) {
        debug_assert_eq!(x.len(), self.dim);
        if let Some(&last) = self.times.last() {
            if t <= last {
                self.times.pop();
                self.states.truncate(self.states.len() - self.dim);
                if let Some(l) = self.lambda.as_mut() {
                    l.pop();
                }
            }
        }
        self.times.push(t);
        self.states.extend_from_slice(x);
        if let Some(l) = self.lambda.as_mut() {
            l.push(lambda.unwrap_or(f64::NAN));
        }
    }

    pub(crate) fn pop(&mut self) {
        if self.times.pop().is_some() {
            self.states.truncate(self.states.len() - self.dim);
            if let Some(l) = self.lambda.as_mut() {
                l.pop();
            }
        }
    }
}

/// Where a branch flow met the switching surface.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceHit {
    pub state: State,
    /// Width of the final bracket in `t` around the crossing.
    pub bracket_width: f64,
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Continuous extension.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Right-hand side `dy/dt` written into `out`.
pub(crate) trait Rhs {
    fn eval(&mut self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()>;
}

impl<F> Rhs for F
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    fn eval(&mut self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        self(t, y, out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Direction {
    /// Positive to non-positive.
    Falling,
    Either,
}

pub(crate) struct Event<'e> {
    pub g: &'e mut dyn FnMut(f64, &[f64]) -> f64,
    pub direction: Direction,
}

pub(crate) struct EventHit {
    pub t: f64,
    pub y: Vec<f64>,
    pub width: f64,
}

pub(crate) struct Outcome {
    pub event: Option<EventHit>,
    /// The observer asked to stop at `t`.
    pub halted: bool,
}

/// Observer verdict after each accepted step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Flow {
    Continue,
    Halt,
}

struct Stepper {
    k: [Vec<f64>; 7],
    stage: Vec<f64>,
    y_new: Vec<f64>,
    err: Vec<f64>,
    rcont: [Vec<f64>; 5],
}

impl Stepper {
    fn new(n: usize) -> Self {
        Stepper {
            k: core::array::from_fn(|_| vec![0.0; n]),
            stage: vec![0.0; n],
            y_new: vec![0.0; n],
            err: vec![0.0; n],
            rcont: core::array::from_fn(|_| vec![0.0; n]),
        }
    }

    /// Attempts a step of size `h` from `(t, y)`; `k[0]` must hold `f(t, y)`.
    /// Returns the scaled error norm; `k[6]` holds `f(t + h, y_new)`.
    fn attempt<R: Rhs>(&mut self, rhs: &mut R, t: f64, y: &[f64], h: f64, cfg: &IntegratorConfig) -> Result<f64> {
        let n = y.len();
        macro_rules! stage {
            ($dst:expr, $c:expr, [$($coef:expr => $idx:expr),*]) => {{
                for i in 0..n {
                    self.stage[i] = y[i] + h * (0.0 $(+ $coef * self.k[$idx][i])*);
                }
                let (stage, k) = (&self.stage, &mut self.k);
                rhs.eval(t + $c * h, stage, &mut k[$dst])?;
            }};
        }
        stage!(1, C2, [A21 => 0]);
        stage!(2, C3, [A31 => 0, A32 => 1]);
        stage!(3, C4, [A41 => 0, A42 => 1, A43 => 2]);
        stage!(4, C5, [A51 => 0, A52 => 1, A53 => 2, A54 => 3]);
        stage!(5, 1.0, [A61 => 0, A62 => 1, A63 => 2, A64 => 3, A65 => 4]);
        for i in 0..n {
            self.y_new[i] = y[i]
                + h * (A71 * self.k[0][i]
                    + A73 * self.k[2][i]
                    + A74 * self.k[3][i]
                    + A75 * self.k[4][i]
                    + A76 * self.k[5][i]);
        }
        rhs.eval(t + h, &self.y_new, &mut self.k[6])?;
        let mut sum = 0.0;
        for i in 0..n {
            self.err[i] = h
                * (E1 * self.k[0][i]
                    + E3 * self.k[2][i]
                    + E4 * self.k[3][i]
                    + E5 * self.k[4][i]
                    + E6 * self.k[5][i]
                    + E7 * self.k[6][i]);
            let sc = cfg.abs_tol + cfg.rel_tol * libm::fmax(libm::fabs(y[i]), libm::fabs(self.y_new[i]));
            let r = self.err[i] / sc;
            sum += r * r;
        }
        let norm = libm::sqrt(sum / n as f64);
        Ok(if norm.is_finite() { norm } else { f64::INFINITY })
    }

    /// Prepares the continuous extension of the last accepted step.
    fn prepare_dense(&mut self, y: &[f64], h: f64) {
        for i in 0..y.len() {
            let ydiff = self.y_new[i] - y[i];
            let bspl = h * self.k[0][i] - ydiff;
            self.rcont[0][i] = y[i];
            self.rcont[1][i] = ydiff;
            self.rcont[2][i] = bspl;
            self.rcont[3][i] = ydiff - h * self.k[6][i] - bspl;
            self.rcont[4][i] = h
                * (D1 * self.k[0][i]
                    + D3 * self.k[2][i]
                    + D4 * self.k[3][i]
                    + D5 * self.k[4][i]
                    + D6 * self.k[5][i]
                    + D7 * self.k[6][i]);
        }
    }

    fn dense(&self, theta: f64, out: &mut [f64]) {
        let t1 = 1.0 - theta;
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.rcont[0][i]
                + theta
                    * (self.rcont[1][i] + t1 * (self.rcont[2][i] + theta * (self.rcont[3][i] + t1 * self.rcont[4][i])));
        }
    }
}

fn initial_step<R: Rhs>(rhs: &mut R, t: f64, y: &[f64], f0: &[f64], span: f64, cfg: &IntegratorConfig) -> Result<f64> {
    let n = y.len();
    let sc = |i: usize| cfg.abs_tol + cfg.rel_tol * libm::fabs(y[i]);
    let norm = |v: &dyn Fn(usize) -> f64| libm::sqrt((0..n).map(|i| v(i) * v(i)).sum::<f64>() / n as f64);
    let d0 = norm(&|i| y[i] / sc(i));
    let d1 = norm(&|i| f0[i] / sc(i));
    let mut h0 = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = libm::fmin(h0, libm::fmin(cfg.max_step, span));
    let y1: Vec<f64> = (0..n).map(|i| y[i] + h0 * f0[i]).collect();
    let mut f1 = vec![0.0; n];
    match rhs.eval(t + h0, &y1, &mut f1) {
        Ok(()) => {}
        Err(e) if e.is_recoverable() => return Ok(h0 * 1e-3),
        Err(e) => return Err(e),
    }
    let d2 = norm(&|i| (f1[i] - f0[i]) / sc(i)) / h0;
    let dmax = libm::fmax(d1, d2);
    let h1 = if dmax <= 1e-15 { libm::fmax(1e-6, h0 * 1e-3) } else { libm::pow(0.01 / dmax, 0.2) };
    Ok(libm::fmin(libm::fmin(100.0 * h0, h1), libm::fmin(cfg.max_step, span)))
}

/// Integrates `dy/dt = rhs` from `(t0, y0)` toward `t_end`.
///
/// Stops early at the first event (localized on the continuous extension)
/// or when the observer halts. `cap(t, y)` bounds the step taken from `(t, y)`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn solve<R: Rhs>(
    rhs: &mut R,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    cfg: &IntegratorConfig,
    mut event: Option<Event<'_>>,
    cap: &dyn Fn(f64, &[f64]) -> f64,
    observer: &mut dyn FnMut(f64, &[f64]) -> Flow,
) -> Result<Outcome> {
    let n = y0.len();
    let mut t = t0;
    let mut y = y0.to_vec();
    if observer(t, &y) == Flow::Halt {
        return Ok(Outcome { event: None, halted: true });
    }
    if !(t_end > t0) {
        return Ok(Outcome { event: None, halted: false });
    }

    let mut st = Stepper::new(n);
    rhs.eval(t, &y, &mut st.k[0])?;
    let mut h = initial_step(rhs, t, &y, &st.k[0].clone(), t_end - t, cfg)?;

    let mut g_prev = event.as_mut().map(|e| (e.g)(t, &y)).unwrap_or(0.0);
    let mut sign_ref = if g_prev != 0.0 { Some(g_prev > 0.0) } else { None };

    const SAFE: f64 = 0.9;
    const BETA: f64 = 0.04;
    let expo1 = 0.2 - BETA * 0.75;
    let mut fac_old: f64 = 1e-4;
    let mut steps = 0usize;
    let mut rejected_last = false;

    loop {
        if steps >= cfg.max_steps {
            return Err(Error::MaxStepsExceeded { t, steps });
        }
        steps += 1;

        let remaining = t_end - t;
        let mut step = libm::fmin(h, libm::fmin(cfg.max_step, cap(t, &y)));
        let last = step >= remaining * (1.0 - 1e-12);
        if last {
            step = remaining;
        }
        let hmin = 16.0 * f64::EPSILON * libm::fmax(libm::fabs(t), 1.0);
        if step < hmin && !last {
            return Err(Error::StepSizeUnderflow { t });
        }

        let err = match st.attempt(rhs, t, &y, step, cfg) {
            Ok(e) => e,
            Err(e) if e.is_recoverable() => {
                if step <= hmin {
                    return Err(e);
                }
                h = step * 0.25;
                rejected_last = true;
                continue;
            }
            Err(e) => return Err(e),
        };

        let fac11 = if err > 0.0 { libm::pow(err, expo1) } else { 0.0 };
        if err <= 1.0 {
            let mut fac = fac11 / libm::pow(fac_old, BETA);
            fac = (fac / SAFE).clamp(0.1, 5.0);
            let mut h_new = step / fac;
            if rejected_last {
                h_new = libm::fmin(h_new, step);
            }
            fac_old = libm::fmax(err, 1e-4);
            rejected_last = false;

            let t_new = if last { t_end } else { t + step };
            st.prepare_dense(&y, step);

            if let Some(ev) = event.as_mut() {
                let g_new = (ev.g)(t_new, &st.y_new);
                let crossed = match sign_ref {
                    None => false,
                    Some(pos) => {
                        let flipped = if pos { g_new <= 0.0 } else { g_new >= 0.0 };
                        flipped && (ev.direction == Direction::Either || pos)
                    }
                };
                if crossed {
                    let mut buf = vec![0.0; n];
                    let hit = locate(&st, ev, t, step, g_prev, g_new, cfg.event_tol, &mut buf);
                    return Ok(Outcome { event: Some(hit), halted: false });
                }
                if g_new != 0.0 {
                    sign_ref = Some(g_new > 0.0);
                }
                g_prev = g_new;
            }

            t = t_new;
            y.copy_from_slice(&st.y_new);
            st.k.swap(0, 6);
            if observer(t, &y) == Flow::Halt {
                return Ok(Outcome { event: None, halted: true });
            }
            if last {
                return Ok(Outcome { event: None, halted: false });
            }
            h = h_new;
        } else {
            h = step / libm::fmin(5.0, fac11 / SAFE);
            rejected_last = true;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn locate(
    st: &Stepper,
    ev: &mut Event<'_>,
    t0: f64,
    h: f64,
    g0: f64,
    g1: f64,
    event_tol: f64,
    buf: &mut [f64],
) -> EventHit {
    let mut g_at = |theta: f64| {
        st.dense(theta, buf);
        (ev.g)(t0 + theta * h, buf)
    };
    let (lo, width) = if g1 == 0.0 {
        (1.0, 0.0)
    } else if g0 == 0.0 {
        (0.0, 0.0)
    } else {
        let b = roots::brent(&mut g_at, 0.0, 1.0, g0, g1, event_tol / h, 0.0);
        (b.lo, b.width() * h)
    };
    let mut y = vec![0.0; buf.len()];
    st.dense(lo, &mut y);
    EventHit { t: t0 + lo * h, y, width }
}

/// Integrates a smooth field with no switching logic.
pub fn integrate_smooth<F>(field: F, x0: &State, t_end: f64, cfg: &IntegratorConfig) -> Result<TrajectorySegment>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    cfg.validate()?;
    let n = x0.dim();
    let mut rhs = |t: f64, y: &[f64], out: &mut [f64]| -> Result<()> {
        field(t, y, out);
        match out.iter().position(|v| !v.is_finite()) {
            Some(component) => Err(Error::NonFiniteField { component, value: out[component] }),
            None => Ok(()),
        }
    };
    let mut seg = TrajectorySegment::new(Regime::Smooth, n, false);
    let mut obs = |t: f64, y: &[f64]| {
        seg.push(t, y, None);
        Flow::Continue
    };
    solve(&mut rhs, x0.t, &x0.x, t_end, cfg, None, &|_, _| f64::INFINITY, &mut obs)?;
    Ok(seg)
}

/// Integrates the active branch from an off-surface state until `v(x)` changes sign.
///
/// The hit is localized to `cfg.event_tol` in `t`; the reported state is the
/// end of the final bracket on the starting side, so `|v(x*)|` stays within
/// the surface tolerance. Tangential approaches without a sign change are
/// recorded in [`TrajectorySegment::grazes`] and integration continues.
pub fn advance_to_surface(
    sys: &SwitchedField,
    x0: &State,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<(TrajectorySegment, Option<SurfaceHit>)> {
    let side = sys.regime_of(x0)?;
    if side == Region::OnSurface {
        return Err(Error::StartsOnSurface);
    }
    advance_branch(sys, x0, side, t_end, cfg)
}

/// Flows along the `side` branch; the start may lie on the surface (departure).
pub(crate) fn advance_branch(
    sys: &SwitchedField,
    x0: &State,
    side: Region,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<(TrajectorySegment, Option<SurfaceHit>)> {
    cfg.validate()?;
    sys.check_dim(x0.dim())?;
    let surface = sys.surface();
    let tol = surface.tolerance();
    let sign = side.sign();
    let mut ev = sys.evaluator();
    let mut rhs = |t: f64, y: &[f64], out: &mut [f64]| ev.eval_branch(t, y, sign, out);

    let mut seg = TrajectorySegment::new(Regime::free(side), x0.dim(), false);
    let mut departed = sign * surface.value(&x0.x) > tol;
    let mut near = !departed;
    let mut wrong_side = false;
    let mut observer = |t: f64, y: &[f64]| {
        let g = sign * surface.value(y);
        if !departed {
            if g > tol {
                departed = true;
                near = false;
            } else if g < -tol {
                wrong_side = true;
                return Flow::Halt;
            }
        } else if g <= tol {
            if !near {
                seg.grazes.push(t);
            }
            near = true;
        } else {
            near = false;
        }
        seg.push(t, y, None);
        Flow::Continue
    };
    let mut g = |_t: f64, y: &[f64]| sign * surface.value(y);
    let event = Event { g: &mut g, direction: Direction::Falling };
    let out = solve(&mut rhs, x0.t, &x0.x, t_end, cfg, Some(event), &|_, _| f64::INFINITY, &mut observer)?;

    if wrong_side {
        // The branch flow points back into the surface immediately.
        let mut seg = TrajectorySegment::new(Regime::free(side), x0.dim(), false);
        seg.push(x0.t, &x0.x, None);
        return Ok((seg, Some(SurfaceHit { state: x0.clone(), bracket_width: 0.0 })));
    }
    match out.event {
        Some(hit) => {
            let mut y = hit.y;
            let mut width = hit.width;
            if libm::fabs(surface.value(&y)) > tol {
                // Steep surfaces: tighten the localization until |v| is within tolerance.
                let (t, refined, w) = refine_hit(sys, &seg, side, &y, hit.t, cfg)?;
                y = refined;
                width = w;
                seg.push(t, &y, None);
                return Ok((seg, Some(SurfaceHit { state: State::new(t, y), bracket_width: width })));
            }
            seg.push(hit.t, &y, None);
            Ok((seg, Some(SurfaceHit { state: State::new(hit.t, y), bracket_width: width })))
        }
        None => Ok((seg, None)),
    }
}

/// Re-integrates the last step of a branch flow with a much tighter event tolerance.
fn refine_hit(
    sys: &SwitchedField,
    seg: &TrajectorySegment,
    side: Region,
    y_hit: &[f64],
    t_hit: f64,
    cfg: &IntegratorConfig,
) -> Result<(f64, Vec<f64>, f64)> {
    let start = seg.last_state().unwrap_or_else(|| State::new(t_hit, y_hit.to_vec()));
    let tight = IntegratorConfig {
        event_tol: libm::fmax(cfg.event_tol * 1e-4, 1e-15),
        rel_tol: libm::fmin(cfg.rel_tol, 1e-12),
        abs_tol: libm::fmin(cfg.abs_tol, 1e-14),
        ..*cfg
    };
    let surface = sys.surface();
    let sign = side.sign();
    let mut ev = sys.evaluator();
    let mut rhs = |t: f64, y: &[f64], out: &mut [f64]| ev.eval_branch(t, y, sign, out);
    let mut g = |_t: f64, y: &[f64]| sign * surface.value(y);
    let event = Event { g: &mut g, direction: Direction::Falling };
    let t_stop = t_hit + 2.0 * cfg.max_step;
    let out = solve(&mut rhs, start.t, &start.x, t_stop, &tight, Some(event), &|_, _| f64::INFINITY, &mut |_, _| {
        Flow::Continue
    })?;
    match out.event {
        Some(hit) => Ok((hit.t, hit.y, hit.width)),
        None => Ok((t_hit, y_hit.to_vec(), 0.0)),
    }
}

/// Integrates the regularized system `dx/dt = f(x; φ_ε(v(x)))` as one smooth flow.
///
/// Inside the transition band `|v| < ε` the step is capped at `ε/4`; outside
/// it, steps are short enough not to jump over the band. The
/// multiplier `φ_ε(v(x(t)))` is recorded with every sample.
pub fn integrate_regularized(
    sys: &SwitchedField,
    sigmoid: &SigmoidSpec,
    x0: &State,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<TrajectorySegment> {
    cfg.validate()?;
    sys.check_dim(x0.dim())?;
    let surface = sys.surface();
    let eps = sigmoid.eps();
    let mut ev = sys.evaluator();
    let mut rhs = |t: f64, y: &[f64], out: &mut [f64]| {
        let lambda = sigmoid.multiplier(surface.value(y));
        ev.eval(t, y, lambda, out)
    };
    let probe = RefCell::new((sys.evaluator(), vec![0.0; x0.dim()], vec![0.0; x0.dim()]));
    let cap = |t: f64, y: &[f64]| {
        let v = libm::fabs(surface.value(y));
        if v < eps {
            return 0.25 * eps;
        }
        // Approach speed ∇v·f: never step clean across the band.
        let mut guard = probe.borrow_mut();
        let (ev, f, grad) = &mut *guard;
        if ev.eval(t, y, sigmoid.multiplier(surface.value(y)), f).is_err() {
            return 0.25 * eps;
        }
        surface.gradient(y, grad);
        let speed = libm::fabs(f.iter().zip(grad.iter()).map(|(a, b)| a * b).sum::<f64>());
        if speed > 0.0 {
            libm::fmax(0.25 * eps, v / speed)
        } else {
            f64::INFINITY
        }
    };
    let mut seg = TrajectorySegment::new(Regime::Regularized, x0.dim(), true);
    let mut obs = |t: f64, y: &[f64]| {
        seg.push(t, y, Some(sigmoid.multiplier(surface.value(y))));
        Flow::Continue
    };
    solve(&mut rhs, x0.t, &x0.x, t_end, cfg, None, &cap, &mut obs)?;
    Ok(seg)
}
