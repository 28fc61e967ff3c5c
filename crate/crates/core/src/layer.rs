//! The switching layer: sliding multipliers, layer equilibria and hybrid trajectories.
//!
//! On the surface `x₁ = 0` the multiplier becomes a fast variable,
//!
//! ```text
//! dλ/dτ = f₁(0, x₂..xₙ; λ),    dxᵢ/dt = fᵢ(0, x₂..xₙ; λ)  (i ≥ 2)
//! ```
//!
//! Roots of `f₁` in `[−1, 1]` are sliding modes; a trajectory reaching the
//! surface sticks to the first root the λ-flow meets from the entry boundary,
//! or crosses if there is none. All operations here require adapted
//! coordinates (`v(x) = x₁`).

use alloc::vec;
use alloc::vec::Vec;
use core::cell::Cell;

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::field::{Evaluator, Region, State, SwitchedField};
use crate::integrate::{self, Direction, Event, Flow, IntegratorConfig, Regime, TrajectorySegment};
use crate::roots;

/// Residual below which `f₁` counts as zero.
pub const ROOT_TOL: f64 = 1e-12;
/// `|∂f₁/∂λ|` below which a sliding mode is marginal.
pub const DERIV_TOL: f64 = 1e-8;
/// Grid size of the sign-change scan over `λ ∈ [−1, 1]`.
pub const SCAN_POINTS: usize = 512;
/// Default time-scale separation for layer transits.
pub const DEFAULT_EPS_LAYER: f64 = 1e-5;

const DERIV_STEP: f64 = 1e-6;
const MERGE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stability {
    Attracting,
    Repelling,
    Marginal,
}

impl Stability {
    fn from_slope(d: f64) -> Self {
        if libm::fabs(d) <= DERIV_TOL {
            Stability::Marginal
        } else if d < 0.0 {
            Stability::Attracting
        } else {
            Stability::Repelling
        }
    }
}

/// A sliding mode `f₁(x; λˢ) = 0` with the induced motion along the surface.
#[derive(Clone, Debug, PartialEq)]
pub struct SlidingSolution {
    pub lambda: f64,
    pub stability: Stability,
    /// `∂f₁/∂λ` at the root.
    pub slope: f64,
    /// `(f₂, ..., fₙ)(x; λˢ)`.
    pub sliding_field: Vec<f64>,
}

/// Result of resolving the layer at a surface point.
#[derive(Clone, Debug, PartialEq)]
pub enum SurfaceOutcome {
    Cross,
    Stick(SlidingSolution),
    /// The layer is driven on the slow time scale and must be integrated.
    LayerDynamic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EquilibriumKind {
    Saddle,
    Node,
    Focus,
    Nonhyperbolic,
}

/// An equilibrium of the full layer system `(dλ/dτ, dx_rest/dt) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerEquilibrium {
    pub lambda: f64,
    pub x_rest: Vec<f64>,
    pub residual: f64,
    /// Eigenvalues of `∂(f₁, f_rest)/∂(λ, x_rest)`.
    pub eigenvalues: Vec<Complex<f64>>,
    pub kind: EquilibriumKind,
}

/// Seed region for [`find_layer_equilibria`].
#[derive(Clone, Debug, PartialEq)]
pub struct SearchBox {
    pub lambda: (f64, f64),
    /// Bounds for `x₂, ..., xₙ`.
    pub rest: Vec<(f64, f64)>,
    /// Seeds per axis.
    pub points_per_axis: usize,
}

impl SearchBox {
    pub fn new(rest: Vec<(f64, f64)>) -> Self {
        SearchBox { lambda: (-1.0, 1.0), rest, points_per_axis: 9 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransitionKind {
    CrossUp,
    CrossDown,
    Stick,
    ExitSlide,
    LayerEnter,
    LayerExit,
}

impl TransitionKind {
    pub fn name(self) -> &'static str {
        match self {
            TransitionKind::CrossUp => "cross_up",
            TransitionKind::CrossDown => "cross_down",
            TransitionKind::Stick => "stick",
            TransitionKind::ExitSlide => "exit_slide",
            TransitionKind::LayerEnter => "layer_enter",
            TransitionKind::LayerExit => "layer_exit",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub t: f64,
    pub kind: TransitionKind,
}

/// Time-ordered segments of a piecewise-smooth solution and the events joining them.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HybridTrajectory {
    pub segments: Vec<TrajectorySegment>,
    pub transitions: Vec<Transition>,
}

impl HybridTrajectory {
    pub fn final_state(&self) -> Option<State> {
        self.segments.iter().rev().find_map(|s| s.last_state())
    }

    pub fn count(&self, kind: TransitionKind) -> usize {
        self.transitions.iter().filter(|tr| tr.kind == kind).count()
    }

    /// Largest state mismatch between the end of one segment and the start of the next.
    pub fn max_junction_gap(&self) -> f64 {
        self.segments
            .windows(2)
            .filter_map(|w| {
                let a = w[0].last_state()?;
                let b = w[1].first_state()?;
                let gap = a.x.iter().zip(&b.x).map(|(p, q)| libm::fabs(p - q)).fold(0.0, f64::max);
                Some(if a.t == b.t { gap } else { f64::INFINITY })
            })
            .fold(0.0, f64::max)
    }

    fn push(&mut self, seg: TrajectorySegment) {
        if !seg.is_empty() {
            self.segments.push(seg);
        }
    }
}

fn require_adapted(sys: &SwitchedField, x: &[f64]) -> Result<()> {
    if !sys.surface().is_adapted_at(x) {
        return Err(Error::NonAdaptedCoordinates);
    }
    Ok(())
}

fn surface_point(sys: &SwitchedField, x_rest: &[f64]) -> Result<Vec<f64>> {
    sys.check_dim(x_rest.len() + 1)?;
    let mut x = Vec::with_capacity(x_rest.len() + 1);
    x.push(0.0);
    x.extend_from_slice(x_rest);
    require_adapted(sys, &x)?;
    Ok(x)
}

/// Layer evaluation at a fixed surface point.
struct LayerProbe<'a> {
    ev: Evaluator<'a>,
    x: Vec<f64>,
    out: Vec<f64>,
    t: f64,
}

impl<'a> LayerProbe<'a> {
    fn new(sys: &'a SwitchedField, x_rest: &[f64], t: f64) -> Result<Self> {
        let x = surface_point(sys, x_rest)?;
        Ok(LayerProbe { ev: sys.evaluator(), out: vec![0.0; x.len()], x, t })
    }

    fn f1(&mut self, lambda: f64) -> Result<f64> {
        self.ev.eval(self.t, &self.x, lambda, &mut self.out)?;
        Ok(self.out[0])
    }

    fn slope(&mut self, lambda: f64) -> Result<f64> {
        Ok((self.f1(lambda + DERIV_STEP)? - self.f1(lambda - DERIV_STEP)?) / (2.0 * DERIV_STEP))
    }

    fn solution(&mut self, lambda: f64) -> Result<SlidingSolution> {
        let slope = self.slope(lambda)?;
        self.ev.eval(self.t, &self.x, lambda, &mut self.out)?;
        Ok(SlidingSolution {
            lambda,
            stability: Stability::from_slope(slope),
            slope,
            sliding_field: self.out[1..].to_vec(),
        })
    }
}

/// The layer vector field: `(dλ/dτ, dx_rest/dt)` at `x₁ = 0`.
pub fn layer_field(sys: &SwitchedField, x_rest: &[f64], t: f64, lambda: f64) -> Result<(f64, Vec<f64>)> {
    let x = surface_point(sys, x_rest)?;
    let mut out = vec![0.0; x.len()];
    sys.evaluator().eval(t, &x, lambda, &mut out)?;
    let rest = out.split_off(1);
    Ok((out[0], rest))
}

fn scan_roots(probe: &mut LayerProbe<'_>) -> Result<Vec<f64>> {
    let grid: Vec<f64> = (0..SCAN_POINTS)
        .map(|i| if i + 1 == SCAN_POINTS { 1.0 } else { -1.0 + 2.0 * i as f64 / (SCAN_POINTS - 1) as f64 })
        .collect();
    let values = grid.iter().map(|&l| probe.f1(l)).collect::<Result<Vec<f64>>>()?;

    let mut run = 0usize;
    for (i, v) in values.iter().enumerate() {
        if libm::fabs(*v) <= ROOT_TOL {
            run += 1;
            if run >= 3 {
                let start = i + 1 - run;
                let mut end = i;
                while end + 1 < values.len() && libm::fabs(values[end + 1]) <= ROOT_TOL {
                    end += 1;
                }
                return Err(Error::DegenerateInclusion { lambda_lo: grid[start], lambda_hi: grid[end] });
            }
        } else {
            run = 0;
        }
    }

    let mut found = Vec::new();
    for i in 0..grid.len() {
        if libm::fabs(values[i]) <= ROOT_TOL {
            found.push(grid[i]);
        }
        if i + 1 < grid.len() && values[i] * values[i + 1] < 0.0 {
            let mut residual_err = None;
            let b = roots::brent(
                |l| match probe.f1(l) {
                    Ok(v) => v,
                    Err(e) => {
                        residual_err = Some(e);
                        0.0
                    }
                },
                grid[i],
                grid[i + 1],
                values[i],
                values[i + 1],
                4.0 * f64::EPSILON,
                0.0,
            );
            if let Some(e) = residual_err {
                return Err(e);
            }
            found.push(b.root);
        }
    }
    found.sort_by(f64::total_cmp);
    found.dedup_by(|a, b| libm::fabs(*a - *b) <= MERGE_TOL);
    Ok(found)
}

/// All sliding modes `λˢ ∈ [−1, 1]` at the surface point `(0, x_rest)`, in increasing order.
///
/// An empty list means the layer is crossed.
pub fn find_sliding_modes(sys: &SwitchedField, x_rest: &[f64], t: f64) -> Result<Vec<SlidingSolution>> {
    let mut probe = LayerProbe::new(sys, x_rest, t)?;
    scan_roots(&mut probe)?.into_iter().map(|l| probe.solution(l)).collect()
}

/// Follows the layer flow `dλ/dτ = f₁` from `lambda0` to the first root or boundary it reaches.
fn follow_layer(probe: &mut LayerProbe<'_>, roots_found: &[f64], lambda0: f64) -> Result<SurfaceOutcome> {
    if let Some(&r) = roots_found.iter().find(|&&r| libm::fabs(r - lambda0) <= MERGE_TOL) {
        return probe.solution(r).map(SurfaceOutcome::Stick);
    }
    let dir = probe.f1(lambda0)?;
    let next = if dir > 0.0 {
        roots_found.iter().copied().find(|&r| r > lambda0)
    } else {
        roots_found.iter().rev().copied().find(|&r| r < lambda0)
    };
    match next {
        Some(r) => probe.solution(r).map(SurfaceOutcome::Stick),
        None => Ok(SurfaceOutcome::Cross),
    }
}

/// Decides what a trajectory reaching the surface from `entry` does next.
///
/// The layer flow starts at `λ = ±1` on the entry side and either crosses
/// to the opposite boundary or sticks to the first root it meets. When the
/// entry-side flow points away from the surface there is nothing to follow;
/// the nearest root, if any, is then returned as the (repelling) invariant set.
pub fn classify_surface_point(sys: &SwitchedField, x_rest: &[f64], t: f64, entry: Region) -> Result<SurfaceOutcome> {
    let mut probe = LayerProbe::new(sys, x_rest, t)?;
    if sys.is_time_dependent() {
        return Ok(SurfaceOutcome::LayerDynamic);
    }
    let lambda0 = entry.sign();
    let found = scan_roots(&mut probe)?;
    let inward = probe.f1(lambda0)? * -lambda0;
    if inward < 0.0 {
        let nearest = found.iter().copied().min_by(|a, b| libm::fabs(a - lambda0).total_cmp(&libm::fabs(b - lambda0)));
        return match nearest {
            Some(r) => probe.solution(r).map(SurfaceOutcome::Stick),
            None => Ok(SurfaceOutcome::Cross),
        };
    }
    follow_layer(&mut probe, &found, lambda0)
}

fn newton_system<F>(mut f: F, z0: &[f64], tol: f64) -> Option<(Vec<f64>, f64)>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<()>,
{
    let n = z0.len();
    let mut z = z0.to_vec();
    let mut fz = vec![0.0; n];
    let mut probe = vec![0.0; n];
    let mut fp = vec![0.0; n];
    let norm = |v: &[f64]| v.iter().fold(0.0, |m: f64, x| m.max(libm::fabs(*x)));
    f(&z, &mut fz).ok()?;
    let mut res = norm(&fz);
    for _ in 0..60 {
        if res <= tol {
            return Some((z, res));
        }
        let mut jac = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let h = 1e-7 * (1.0 + libm::fabs(z[j]));
            probe.copy_from_slice(&z);
            probe[j] += h;
            f(&probe, &mut fp).ok()?;
            for i in 0..n {
                jac[(i, j)] = (fp[i] - fz[i]) / h;
            }
        }
        let rhs = DMatrix::from_iterator(n, 1, fz.iter().map(|v| -v));
        let step = jac.lu().solve(&rhs)?;
        let mut damping = 1.0;
        loop {
            for j in 0..n {
                probe[j] = z[j] + damping * step[j];
            }
            if f(&probe, &mut fp).is_ok() {
                let r = norm(&fp);
                if r < res || damping < 1e-3 {
                    z.copy_from_slice(&probe);
                    fz.copy_from_slice(&fp);
                    res = r;
                    break;
                }
            }
            damping *= 0.5;
            if damping < 1e-3 {
                return None;
            }
        }
        if z.iter().any(|v| !v.is_finite() || libm::fabs(*v) > 1e12) {
            return None;
        }
    }
    (res <= tol).then_some((z, res))
}

fn classify_eigenvalues(eig: &[Complex<f64>]) -> EquilibriumKind {
    let scale = eig.iter().map(|c| libm::hypot(c.re, c.im)).fold(1e-300, f64::max);
    let tol = 1e-9 * scale.max(1.0);
    if eig.iter().any(|c| libm::fabs(c.re) <= tol) {
        return EquilibriumKind::Nonhyperbolic;
    }
    let positive = eig.iter().filter(|c| c.re > 0.0).count();
    if positive != 0 && positive != eig.len() {
        EquilibriumKind::Saddle
    } else if eig.iter().any(|c| libm::fabs(c.im) > tol) {
        EquilibriumKind::Focus
    } else {
        EquilibriumKind::Node
    }
}

/// Equilibria of the autonomous layer system with `λ ∈ [−1, 1]`.
///
/// Newton's method is seeded from a grid over `search`; solutions closer
/// than `10⁻⁶` are merged.
pub fn find_layer_equilibria(sys: &SwitchedField, search: &SearchBox, t: f64) -> Result<Vec<LayerEquilibrium>> {
    if sys.is_time_dependent() {
        return Err(Error::TimeDependentLayer);
    }
    let n = sys.dim();
    if search.rest.len() + 1 != n {
        return Err(Error::DimensionMismatch { expected: n - 1, found: search.rest.len() });
    }
    if search.points_per_axis == 0 {
        return Err(Error::InvalidParameter("search grid needs at least one point per axis"));
    }
    let mut x = vec![0.0; n];
    require_adapted(sys, &x)?;

    let mut ev = sys.evaluator();
    let mut residual = |z: &[f64], out: &mut [f64]| -> Result<()> {
        x[1..].copy_from_slice(&z[1..]);
        ev.eval(t, &x, z[0], out)
    };

    let bounds: Vec<(f64, f64)> = core::iter::once(search.lambda).chain(search.rest.iter().copied()).collect();
    let k = search.points_per_axis;
    let axis = |(lo, hi): (f64, f64), i: usize| {
        if k == 1 {
            0.5 * (lo + hi)
        } else {
            lo + (hi - lo) * i as f64 / (k - 1) as f64
        }
    };
    let total = k.pow(n as u32);
    let mut found: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut seed = vec![0.0; n];
    for idx in 0..total {
        let mut rem = idx;
        for (j, b) in bounds.iter().enumerate() {
            seed[j] = axis(*b, rem % k);
            rem /= k;
        }
        if let Some((z, res)) = newton_system(&mut residual, &seed, ROOT_TOL) {
            if !(-1.0 - 1e-12..=1.0 + 1e-12).contains(&z[0]) {
                continue;
            }
            let dup = found.iter().any(|(w, _)| w.iter().zip(&z).all(|(a, b)| libm::fabs(a - b) <= 1e-6));
            if !dup {
                found.push((z, res));
            }
        }
    }

    let mut out = Vec::with_capacity(found.len());
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    for (z, res) in found {
        let mut jac = DMatrix::<f64>::zeros(n, n);
        let mut probe = z.clone();
        for j in 0..n {
            let h = 1e-6 * (1.0 + libm::fabs(z[j]));
            probe[j] = z[j] + h;
            residual(&probe, &mut fp)?;
            probe[j] = z[j] - h;
            residual(&probe, &mut fm)?;
            probe[j] = z[j];
            for i in 0..n {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let eigenvalues: Vec<Complex<f64>> = jac.complex_eigenvalues().iter().copied().collect();
        let kind = classify_eigenvalues(&eigenvalues);
        out.push(LayerEquilibrium { lambda: z[0], x_rest: z[1..].to_vec(), residual: res, eigenvalues, kind });
    }
    out.sort_by(|a, b| a.lambda.total_cmp(&b.lambda).then(a.x_rest[0].total_cmp(&b.x_rest[0])));
    Ok(out)
}

/// How a layer transit ended.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerRun {
    pub segment: TrajectorySegment,
    /// Side through which `λ` left `[−1, 1]`, if it did before the end time.
    pub exit: Option<Region>,
}

/// Integrates the layer on the slow time scale:
/// `dλ/dt = f₁/ε_layer`, `dx_rest/dt = f_rest`, with `x₁ = 0`.
///
/// Stops when `λ` leaves `[−1, 1]`; samples carry `x₁ = 0` and the λ column.
pub fn integrate_layer(
    sys: &SwitchedField,
    lambda0: f64,
    start: &State,
    t_end: f64,
    cfg: &IntegratorConfig,
    eps_layer: f64,
) -> Result<LayerRun> {
    cfg.validate()?;
    if !(eps_layer > 0.0 && eps_layer.is_finite()) {
        return Err(Error::InvalidParameter("eps_layer must be positive"));
    }
    if !(-1.0..=1.0).contains(&lambda0) {
        return Err(Error::LambdaOutOfRange(lambda0));
    }
    let n = sys.dim();
    let x0 = surface_point(sys, start.x.get(1..).unwrap_or(&[]))?;

    let mut ev = sys.evaluator();
    let mut x = x0.clone();
    let mut rhs = |t: f64, z: &[f64], out: &mut [f64]| -> Result<()> {
        x[1..].copy_from_slice(&z[1..]);
        ev.eval(t, &x, z[0], out)?;
        out[0] /= eps_layer;
        Ok(())
    };

    let mut seg = TrajectorySegment::new(Regime::LayerTransit, n, true);
    let mut state = x0.clone();
    let mut inside = libm::fabs(lambda0) < 1.0;
    let mut immediate_exit = None;
    let mut observer = |t: f64, z: &[f64]| {
        let g = 1.0 - z[0] * z[0];
        if !inside {
            if g > 0.0 {
                inside = true;
            } else if libm::fabs(z[0]) > 1.0 + 1e-12 {
                immediate_exit = Some(if z[0] > 0.0 { Region::Plus } else { Region::Minus });
                return Flow::Halt;
            }
        }
        state[1..].copy_from_slice(&z[1..]);
        seg.push(t, &state, Some(z[0]));
        Flow::Continue
    };
    let mut g = |_t: f64, z: &[f64]| 1.0 - z[0] * z[0];
    let event = Event { g: &mut g, direction: Direction::Falling };
    let mut z0 = x0.clone();
    z0[0] = lambda0;
    let out = integrate::solve(&mut rhs, start.t, &z0, t_end, cfg, Some(event), &|_, _| f64::INFINITY, &mut observer)?;

    if let Some(side) = immediate_exit {
        seg.pop();
        let mut s = x0.clone();
        s[0] = 0.0;
        if seg.is_empty() {
            seg.push(start.t, &s, Some(lambda0));
        }
        return Ok(LayerRun { segment: seg, exit: Some(side) });
    }
    match out.event {
        Some(hit) => {
            let mut s = hit.y.clone();
            let lambda = s[0].clamp(-1.0, 1.0);
            s[0] = 0.0;
            seg.push(hit.t, &s, Some(lambda));
            let side = if lambda > 0.0 { Region::Plus } else { Region::Minus };
            Ok(LayerRun { segment: seg, exit: Some(side) })
        }
        None => Ok(LayerRun { segment: seg, exit: None }),
    }
}

/// How a sliding segment ended.
enum SlideEnd {
    /// `λˢ` reached the boundary on this side.
    Boundary(Region),
    /// The root lost stability or vanished; the layer must be re-resolved at `λ`.
    Fold(f64),
    Finished,
}

/// Newton continuation of a sliding multiplier.
fn track_root(ev: &mut Evaluator<'_>, t: f64, x: &[f64], out: &mut [f64], warm: f64) -> Result<(f64, f64)> {
    let mut lambda = warm;
    for _ in 0..50 {
        ev.eval(t, x, lambda, out)?;
        let f = out[0];
        ev.eval(t, x, lambda + DERIV_STEP, out)?;
        let up = out[0];
        ev.eval(t, x, lambda - DERIV_STEP, out)?;
        let d = (up - out[0]) / (2.0 * DERIV_STEP);
        if libm::fabs(f) <= ROOT_TOL {
            ev.eval(t, x, lambda, out)?;
            return Ok((lambda, d));
        }
        if libm::fabs(d) <= 1e-14 {
            break;
        }
        lambda -= f / d;
        if !lambda.is_finite() || libm::fabs(lambda - warm) > 0.25 {
            break;
        }
    }
    Err(Error::ContinuationFailed { t })
}

fn slide(
    sys: &SwitchedField,
    start: &State,
    sol: &SlidingSolution,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<(TrajectorySegment, SlideEnd)> {
    let n = sys.dim();
    let warm = Cell::new(sol.lambda);
    // Orientation of the stability margin: stays positive while the root keeps its type.
    let margin_sign = match sol.stability {
        Stability::Attracting => -1.0,
        Stability::Repelling => 1.0,
        Stability::Marginal => 0.0,
    };

    let mut ev_rhs = sys.evaluator();
    let mut x_rhs = vec![0.0; n];
    let mut out_rhs = vec![0.0; n];
    let mut rhs = |t: f64, z: &[f64], out: &mut [f64]| -> Result<()> {
        x_rhs[1..].copy_from_slice(z);
        track_root(&mut ev_rhs, t, &x_rhs, &mut out_rhs, warm.get())?;
        out.copy_from_slice(&out_rhs[1..]);
        Ok(())
    };

    let mut ev_g = sys.evaluator();
    let mut x_g = vec![0.0; n];
    let mut out_g = vec![0.0; n];
    let mut g = |t: f64, z: &[f64]| -> f64 {
        x_g[1..].copy_from_slice(z);
        match track_root(&mut ev_g, t, &x_g, &mut out_g, warm.get()) {
            Ok((l, d)) => {
                let boundary = 1.0 - l * l;
                if margin_sign == 0.0 {
                    boundary
                } else {
                    boundary.min(margin_sign * d)
                }
            }
            Err(_) => -1.0,
        }
    };

    let mut ev_obs = sys.evaluator();
    let mut x_obs = vec![0.0; n];
    let mut out_obs = vec![0.0; n];
    let mut seg = TrajectorySegment::new(Regime::Sliding, n, true);
    let mut last: Option<(f64, Vec<f64>, f64)> = None;
    let mut observer = |t: f64, z: &[f64]| {
        x_obs[1..].copy_from_slice(z);
        match track_root(&mut ev_obs, t, &x_obs, &mut out_obs, warm.get()) {
            Ok((l, _)) => {
                warm.set(l);
                seg.push(t, &x_obs, Some(l));
                last = Some((t, z.to_vec(), l));
                Flow::Continue
            }
            Err(_) => Flow::Halt,
        }
    };

    let event = Event { g: &mut g, direction: Direction::Falling };
    let z0 = start.x[1..].to_vec();
    let result =
        integrate::solve(&mut rhs, start.t, &z0, t_end, cfg, Some(event), &|_, _| f64::INFINITY, &mut observer);
    let fold_at_last = |seg: TrajectorySegment, last: Option<(f64, Vec<f64>, f64)>| match last {
        Some((_, _, l)) => Ok((seg, SlideEnd::Fold(l))),
        None => Err(Error::ContinuationFailed { t: start.t }),
    };
    let out = match result {
        Ok(out) => out,
        Err(Error::ContinuationFailed { .. }) | Err(Error::StepSizeUnderflow { .. }) => {
            return fold_at_last(seg, last);
        }
        Err(e) => return Err(e),
    };
    if out.halted {
        return fold_at_last(seg, last);
    }
    let Some(hit) = out.event else {
        return Ok((seg, SlideEnd::Finished));
    };

    x_obs[1..].copy_from_slice(&hit.y);
    let (l, _) = match track_root(&mut ev_obs, hit.t, &x_obs, &mut out_obs, warm.get()) {
        Ok(v) => v,
        Err(_) => return fold_at_last(seg, last),
    };
    let l_clamped = l.clamp(-1.0, 1.0);
    seg.push(hit.t, &x_obs, Some(l_clamped));
    if libm::fabs(l) >= 1.0 - 1e-6 {
        let side = if l > 0.0 { Region::Plus } else { Region::Minus };
        Ok((seg, SlideEnd::Boundary(side)))
    } else {
        Ok((seg, SlideEnd::Fold(l_clamped)))
    }
}

/// Builds a piecewise-smooth trajectory: free flight on either side,
/// crossings, sliding along attracting sliding modes and, for time-dependent
/// systems, transits through the switching layer on the time scale `eps_layer`.
///
/// A start on the surface sticks to an attracting sliding mode if there is
/// one, otherwise to any sliding mode; time-dependent systems start a layer
/// transit at `λ = 0`.
pub fn integrate_hybrid(
    sys: &SwitchedField,
    x0: &State,
    t_end: f64,
    cfg: &IntegratorConfig,
    eps_layer: f64,
) -> Result<HybridTrajectory> {
    cfg.validate()?;
    sys.check_dim(x0.dim())?;
    require_adapted(sys, &x0.x)?;
    if !(eps_layer > 0.0 && eps_layer.is_finite()) {
        return Err(Error::InvalidParameter("eps_layer must be positive"));
    }

    let mut traj = HybridTrajectory::default();
    let mut state = x0.clone();
    let mut stalled = 0usize;
    let mut last_t = state.t;

    // What to do next from the current state.
    enum Next {
        Free(Region),
        Resolve(Region),
        Slide(SlidingSolution),
        Layer(f64),
        Depart(Region),
    }

    let mut next = match sys.regime_of(&state)? {
        Region::OnSurface => {
            state.x[0] = 0.0;
            if sys.is_time_dependent() {
                Next::Layer(0.0)
            } else {
                let modes = find_sliding_modes(sys, &state.x[1..], state.t)?;
                let pick =
                    modes.iter().find(|m| m.stability == Stability::Attracting).or_else(|| modes.first()).cloned();
                match pick {
                    Some(sol) => Next::Slide(sol),
                    None => {
                        let (f1, _) = layer_field(sys, &state.x[1..], state.t, 0.0)?;
                        Next::Depart(if f1 > 0.0 { Region::Plus } else { Region::Minus })
                    }
                }
            }
        }
        side => Next::Free(side),
    };

    while state.t < t_end {
        if state.t > last_t {
            stalled = 0;
            last_t = state.t;
        } else {
            stalled += 1;
            if stalled > 64 {
                return Err(Error::Stalled { t: state.t });
            }
        }

        next = match next {
            Next::Free(side) | Next::Depart(side) => {
                let (seg, hit) = integrate::advance_branch(sys, &state, side, t_end, cfg)?;
                traj.push(seg);
                match hit {
                    Some(hit) => {
                        state = hit.state;
                        state.x[0] = 0.0;
                        Next::Resolve(side)
                    }
                    None => break,
                }
            }
            Next::Resolve(entry) => match classify_surface_point(sys, &state.x[1..], state.t, entry)? {
                SurfaceOutcome::Cross => {
                    let kind = if entry == Region::Minus { TransitionKind::CrossUp } else { TransitionKind::CrossDown };
                    traj.transitions.push(Transition { t: state.t, kind });
                    Next::Depart(entry.opposite())
                }
                SurfaceOutcome::Stick(sol) => {
                    traj.transitions.push(Transition { t: state.t, kind: TransitionKind::Stick });
                    Next::Slide(sol)
                }
                SurfaceOutcome::LayerDynamic => {
                    traj.transitions.push(Transition { t: state.t, kind: TransitionKind::LayerEnter });
                    Next::Layer(entry.sign())
                }
            },
            Next::Slide(sol) => {
                let (seg, end) = slide(sys, &state, &sol, t_end, cfg)?;
                if let Some(last) = seg.last_state() {
                    state = last;
                }
                traj.push(seg);
                match end {
                    SlideEnd::Finished => break,
                    SlideEnd::Boundary(side) => {
                        traj.transitions.push(Transition { t: state.t, kind: TransitionKind::ExitSlide });
                        Next::Depart(side)
                    }
                    SlideEnd::Fold(lambda) => {
                        let mut probe = LayerProbe::new(sys, &state.x[1..], state.t)?;
                        let found = scan_roots(&mut probe)?;
                        // Nudge off the folded root in the direction of the layer flow.
                        let dir = if probe.f1(lambda)? >= 0.0 { 1.0 } else { -1.0 };
                        let start = (lambda + dir * 1e-6).clamp(-1.0, 1.0);
                        let remaining: Vec<f64> = found.into_iter().filter(|r| libm::fabs(r - lambda) > 1e-6).collect();
                        match follow_layer(&mut probe, &remaining, start)? {
                            SurfaceOutcome::Stick(next_sol) => {
                                traj.transitions.push(Transition { t: state.t, kind: TransitionKind::Stick });
                                Next::Slide(next_sol)
                            }
                            _ => {
                                traj.transitions.push(Transition { t: state.t, kind: TransitionKind::ExitSlide });
                                Next::Depart(if dir > 0.0 { Region::Plus } else { Region::Minus })
                            }
                        }
                    }
                }
            }
            Next::Layer(lambda0) => {
                let run = integrate_layer(sys, lambda0, &state, t_end, cfg, eps_layer)?;
                if let Some(last) = run.segment.last_state() {
                    state = last;
                }
                traj.push(run.segment);
                match run.exit {
                    Some(side) => {
                        traj.transitions.push(Transition { t: state.t, kind: TransitionKind::LayerExit });
                        Next::Depart(side)
                    }
                    None => break,
                }
            }
        };
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::SwitchingSurface;

    fn poly_field(coeffs: &'static [f64]) -> SwitchedField {
        // f₁(λ) = Σ cₖ λᵏ realized through the hidden term; f₂ = 1.
        let eval = |c: &[f64], l: f64| c.iter().rev().fold(0.0, |acc, ck| acc * l + ck);
        let fp = eval(coeffs, 1.0);
        let fm = eval(coeffs, -1.0);
        SwitchedField::new(
            2,
            move |_, _, out: &mut [f64]| out.copy_from_slice(&[fp, 1.0]),
            move |_, _, out: &mut [f64]| out.copy_from_slice(&[fm, 1.0]),
            SwitchingSurface::first_coordinate(),
        )
        .with_hidden(move |_, _, l, out: &mut [f64]| {
            let linear = 0.5 * (fp + fm) + 0.5 * (fp - fm) * l;
            let denom = l * l - 1.0;
            out[0] = if libm::fabs(denom) < 1e-300 { 0.0 } else { (eval(coeffs, l) - linear) / denom };
            out[1] = 0.0;
        })
    }

    #[test]
    fn quadratic_roots_and_stability() {
        // 2λ² − 1
        let sys = poly_field(&[-1.0, 0.0, 2.0]);
        let modes = find_sliding_modes(&sys, &[0.0], 0.0).unwrap();
        assert_eq!(modes.len(), 2);
        assert!((modes[0].lambda + core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert_eq!(modes[0].stability, Stability::Attracting);
        assert_eq!(modes[1].stability, Stability::Repelling);
        assert_eq!(modes[0].sliding_field, vec![1.0]);
    }

    #[test]
    fn constant_sign_layer_crosses() {
        let sys = poly_field(&[1.0]);
        assert!(find_sliding_modes(&sys, &[0.0], 0.0).unwrap().is_empty());
        assert_eq!(classify_surface_point(&sys, &[0.0], 0.0, Region::Minus).unwrap(), SurfaceOutcome::Cross);
    }

    #[test]
    fn first_root_along_flow() {
        // (λ + 0.5)(λ − 0.5)·(−1): f₁(−1) < 0, so entry from plus moves λ down to 0.5.
        let sys = poly_field(&[0.25, 0.0, -1.0]);
        match classify_surface_point(&sys, &[0.0], 0.0, Region::Plus).unwrap() {
            SurfaceOutcome::Stick(s) => {
                assert!((s.lambda - 0.5).abs() < 1e-12);
                assert_eq!(s.stability, Stability::Attracting);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn degenerate_inclusion() {
        let sys = SwitchedField::new(
            2,
            |_, _, out: &mut [f64]| out.copy_from_slice(&[0.0, 1.0]),
            |_, _, out: &mut [f64]| out.copy_from_slice(&[0.0, 1.0]),
            SwitchingSurface::first_coordinate(),
        );
        assert!(matches!(find_sliding_modes(&sys, &[0.0], 0.0), Err(Error::DegenerateInclusion { .. })));
    }

    #[test]
    fn non_adapted_surface_rejected() {
        let sys = SwitchedField::new(
            2,
            |_, _, out: &mut [f64]| out.copy_from_slice(&[1.0, 1.0]),
            |_, _, out: &mut [f64]| out.copy_from_slice(&[1.0, 1.0]),
            SwitchingSurface::new(|x: &[f64]| x[0] + x[1], |_, out: &mut [f64]| out.copy_from_slice(&[1.0, 1.0])),
        );
        assert_eq!(find_sliding_modes(&sys, &[0.3], 0.0).unwrap_err(), Error::NonAdaptedCoordinates);
    }

    #[test]
    fn layer_equilibrium_of_linear_layer() {
        // f₁ = x₂ − λ, f₂ = −λ − x₂ (via Filippov combination): equilibrium at the origin.
        let sys = SwitchedField::new(
            2,
            |_, x: &[f64], out: &mut [f64]| out.copy_from_slice(&[x[1] - 1.0, -1.0 - x[1]]),
            |_, x: &[f64], out: &mut [f64]| out.copy_from_slice(&[x[1] + 1.0, 1.0 - x[1]]),
            SwitchingSurface::first_coordinate(),
        );
        let eq = find_layer_equilibria(&sys, &SearchBox::new(vec![(-1.0, 1.0)]), 0.0).unwrap();
        assert_eq!(eq.len(), 1);
        assert!(eq[0].lambda.abs() < 1e-10 && eq[0].x_rest[0].abs() < 1e-10);
        // Jacobian [[-1, 1], [-1, -1]]: eigenvalues −1 ± i.
        assert_eq!(eq[0].kind, EquilibriumKind::Focus);
    }

    #[test]
    fn sliding_exits_at_boundary() {
        // f₁ = x₂ − λ, f₂ = 1: λˢ = x₂ drifts up and leaves through +1 at t = 1.
        let sys = SwitchedField::new(
            2,
            |_, x: &[f64], out: &mut [f64]| out.copy_from_slice(&[x[1] - 1.0, 1.0]),
            |_, x: &[f64], out: &mut [f64]| out.copy_from_slice(&[x[1] + 1.0, 1.0]),
            SwitchingSurface::first_coordinate(),
        );
        let traj =
            integrate_hybrid(&sys, &State::new(0.0, vec![0.0, 0.0]), 2.0, &IntegratorConfig::default(), 1e-5).unwrap();
        assert_eq!(traj.segments[0].regime, Regime::Sliding);
        let exit = traj.transitions.iter().find(|t| t.kind == TransitionKind::ExitSlide).unwrap();
        assert!((exit.t - 1.0).abs() < 1e-8);
        assert_eq!(traj.segments[1].regime, Regime::FreePlus);
        assert!(traj.max_junction_gap() <= 1e-8);
        let end = traj.final_state().unwrap();
        assert_eq!(end.t, 2.0);
        assert!(end.x[0] > 0.0);
    }

    #[test]
    fn layer_transit_leaves_through_boundary() {
        // f₁ = 1 everywhere: λ rises from −1 and leaves at +1 after 2·ε_layer.
        let sys = SwitchedField::new(
            2,
            |_, _, out: &mut [f64]| out.copy_from_slice(&[1.0, 0.0]),
            |_, _, out: &mut [f64]| out.copy_from_slice(&[1.0, 0.0]),
            SwitchingSurface::first_coordinate(),
        )
        .with_time_dependence(true);
        let run =
            integrate_layer(&sys, -1.0, &State::new(0.0, vec![0.0, 0.0]), 1.0, &IntegratorConfig::default(), 1e-3)
                .unwrap();
        assert_eq!(run.exit, Some(Region::Plus));
        let end = run.segment.last_state().unwrap();
        assert!((end.t - 2e-3).abs() < 1e-9);
        assert_eq!(end.x[0], 0.0);
    }
}
