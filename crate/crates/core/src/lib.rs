//! Piecewise-smooth dynamical systems with nonlinear ("hidden") dependence on
//! the switching multiplier.
//!
//! A system is written in canonical hidden-term form
//!
//! ```text
//! dx/dt = ½(f₊ + f₋) + ½(f₊ − f₋)λ + (λ² − 1)·g(x, λ),   λ = sign(v(x))
//! ```
//!
//! so that off the switching surface `v = 0` it reduces to `f₊` or `f₋`,
//! while on the surface the multiplier `λ ∈ [−1, 1]` is resolved by the fast
//! switching-layer dynamics `dλ/dτ = f₁(x; λ)`.
//!
//! Modules:
//!
//! - [`field`]: switched vector fields, switching surfaces and evaluation.
//! - [`sigmoid`]: transition functions used to regularize the switch.
//! - [`series`]: sigmoid-series expansions `f = Σ αₙ λⁿ` and asymptotic matching.
//! - [`integrate`]: adaptive Dormand–Prince integration with surface events.
//! - [`layer`]: sliding modes, layer equilibria and hybrid trajectories.
//! - [`scenarios`]: the example systems with their reference parameters.
//!
//! The crate is `no_std` (it needs `alloc`).
#![no_std]
// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod error;
pub mod field;
pub mod integrate;
pub mod layer;
pub mod roots;
pub mod scenarios;
pub mod series;
pub mod sigmoid;

pub use error::{Error, Result};
pub use field::{Region, State, SwitchedField, SwitchingSurface};
pub use integrate::{IntegratorConfig, Regime, TrajectorySegment};
pub use layer::{HybridTrajectory, LayerEquilibrium, SlidingSolution, SurfaceOutcome};
pub use series::{AsymptoticData, SeriesExpansion};
pub use sigmoid::{SigmoidKind, SigmoidSpec};
