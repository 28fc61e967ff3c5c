use layerdyn_core::integrate::{advance_to_surface, integrate_regularized, integrate_smooth, IntegratorConfig, Regime};
use layerdyn_core::layer::{
    classify_surface_point, find_layer_equilibria, find_sliding_modes, integrate_hybrid, layer_field, EquilibriumKind,
    SearchBox, Stability, TransitionKind,
};
use layerdyn_core::scenarios::*;
use layerdyn_core::series::SeriesExpansion;
use layerdyn_core::sigmoid::{SigmoidKind, SigmoidSpec};
use layerdyn_core::{Region, State, SurfaceOutcome};
use std::sync::Arc;

const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn at(x: &[f64]) -> State {
    State::new(0.0, x.to_vec())
}

fn cfg() -> IntegratorConfig {
    IntegratorConfig::default()
}

#[test]
fn example2_sliding_value() {
    let sys = make_example2(Example2Variant::Nonlinear);
    let f = sys.eval_field(&at(&[0.0, 0.0]), INV_SQRT2).unwrap();
    assert!(f[0].abs() < 1e-15);
    assert_eq!(f[1], 1.0);
    assert_eq!(sys.hidden_term(&at(&[0.0, 0.0]), 0.0).unwrap(), vec![-2.0, 0.0]);
}

#[test]
fn midpoint_expansions_reproduce_examples() {
    let c = |v: [f64; 2]| -> layerdyn_core::field::VectorFn {
        Arc::new(move |_, _, out: &mut [f64]| out.copy_from_slice(&v))
    };
    let e1 = SeriesExpansion::expand_from_midpoint(2, c([1.0, -1.0]), c([-1.0, -1.0]), c([0.0, 1.0]));
    let sys = e1.to_hidden_form(layerdyn_core::SwitchingSurface::first_coordinate());
    let reference = make_example1(Example1Variant::Nonlinear);
    let e2 = SeriesExpansion::expand_from_midpoint(2, c([1.0, 1.0]), c([1.0, 1.0]), c([-1.0, 1.0]));
    let sys2 = e2.to_hidden_form(layerdyn_core::SwitchingSurface::first_coordinate());
    let reference2 = make_example2(Example2Variant::Nonlinear);
    for k in 0..=20 {
        let l = -1.0 + 0.1 * k as f64;
        let s = at(&[0.2, -0.4]);
        assert_eq!(sys.eval_field(&s, l).unwrap(), reference.eval_field(&s, l).unwrap());
        assert_eq!(sys2.eval_field(&s, l).unwrap(), reference2.eval_field(&s, l).unwrap());
    }
    let r = e2.reconstruct(&at(&[0.0, 0.0]), INV_SQRT2).unwrap();
    assert!(r[0].abs() < 1e-15 && r[1] == 1.0);
}

#[test]
fn smooth_flow_at_on_branch_equilibrium() {
    let p = CircuitParams::default();
    let sys = make_circuit(p).unwrap();
    let x0 = State::new(0.0, p.to_adapted(4.0 / 3.0, 5.0));
    let seg = integrate_smooth(
        |t, x, out| {
            sys.evaluator().eval_branch(t, x, 1.0, out).unwrap();
        },
        &x0,
        10.0,
        &cfg(),
    )
    .unwrap();
    let (i, v) = p.to_physical(&seg.last_state().unwrap().x);
    assert!((i - 4.0 / 3.0).abs() < 1e-12 && (v - 5.0).abs() < 1e-12);
}

#[test]
fn surface_search_examples() {
    let e1 = make_example1(Example1Variant::Nonlinear);
    let (seg, hit) = advance_to_surface(&e1, &at(&[-0.5, 0.0]), 1.0, &cfg()).unwrap();
    assert!(hit.is_none());
    let end = seg.last_state().unwrap();
    assert!((end.x[0] + 1.5).abs() < 1e-9);

    let e2 = make_example2(Example2Variant::Nonlinear);
    let (_, hit) = advance_to_surface(&e2, &at(&[-0.5, 0.0]), 1.0, &cfg()).unwrap();
    let hit = hit.unwrap();
    assert!((hit.state.t - 0.5).abs() <= 1e-10);
    assert!((hit.state.x[1] - 0.5).abs() <= 1e-9);

    // The "off" branch from (I, V) = (0, 0) keeps V ≡ 0 and never reaches V_b.
    let p = CircuitParams::default();
    let sys = make_circuit(p).unwrap();
    let seg = integrate_smooth(
        |t, x, out| {
            sys.evaluator().eval_branch(t, x, -1.0, out).unwrap();
        },
        &State::new(0.0, p.to_adapted(0.0, 0.0)),
        10.0,
        &cfg(),
    )
    .unwrap();
    assert!(seg.iter().all(|(_, x)| p.to_physical(x).1 == 0.0));
}

#[test]
fn example2_regularized_locks_on_attracting_set() {
    let sys = make_example2(Example2Variant::Nonlinear);
    let s = SigmoidSpec::new(SigmoidKind::PiecewiseLinear, 1e-3).unwrap();
    let seg = integrate_regularized(&sys, &s, &at(&[-0.5, 0.0]), 2.0, &cfg()).unwrap();
    let lambda = seg.lambda().unwrap();
    let n = seg.len();
    assert!((lambda[n - 1] + INV_SQRT2).abs() < 1e-6, "{}", lambda[n - 1]);
    let i0 = seg.times().iter().position(|t| *t >= 1.0).unwrap();
    let slope = (seg.x(n - 1)[1] - seg.x(i0)[1]) / (seg.t(n - 1) - seg.t(i0));
    assert!((slope - 1.0).abs() < 1e-6);
    assert!(seg.x(n - 1)[0].abs() <= 1e-3);
}

#[test]
fn layer_field_examples() {
    let duffing = make_duffing(DuffingParams::default()).unwrap();
    let (dl, rest) = layer_field(&duffing, &[0.0], 0.0, 0.0).unwrap();
    assert_eq!(dl, 0.0);
    assert!((rest[0] - 0.15).abs() < 1e-15);

    let e2 = make_example2(Example2Variant::Nonlinear);
    assert_eq!(layer_field(&e2, &[0.0], 0.0, 0.0).unwrap().0, -1.0);

    let p = CircuitParams::default();
    let circuit = make_circuit(p).unwrap();
    let i = p.vb * p.vb / (p.v0 * p.r);
    let (dl, rest) = layer_field(&circuit, &[i], 0.0, lambda_from_mu(p.v0 / p.vb)).unwrap();
    assert!(dl.abs() < 1e-14 && rest[0].abs() < 1e-14);
}

#[test]
fn sliding_mode_examples() {
    for (variant, expected) in [(Example1Variant::Nonlinear, 1.0), (Example1Variant::Filippov, -1.0)] {
        let modes = find_sliding_modes(&make_example1(variant), &[0.3], 0.0).unwrap();
        assert_eq!(modes.len(), 1);
        assert!(modes[0].lambda.abs() < 1e-12);
        assert_eq!(modes[0].sliding_field, vec![expected]);
        assert_eq!(modes[0].stability, Stability::Repelling);
    }

    let modes = find_sliding_modes(&make_example2(Example2Variant::Nonlinear), &[0.0], 0.0).unwrap();
    assert_eq!(modes.len(), 2);
    assert!((modes[0].lambda + INV_SQRT2).abs() < 1e-10);
    assert!((modes[1].lambda - INV_SQRT2).abs() < 1e-10);
    assert_eq!(modes[0].stability, Stability::Attracting);
    assert_eq!(modes[1].stability, Stability::Repelling);
    assert!(modes.iter().all(|m| m.sliding_field == vec![1.0]));

    assert!(find_sliding_modes(&make_example2(Example2Variant::Continuous), &[0.0], 0.0).unwrap().is_empty());
}

#[test]
fn surface_classification_examples() {
    let e2 = make_example2(Example2Variant::Nonlinear);
    match classify_surface_point(&e2, &[0.0], 0.0, Region::Minus).unwrap() {
        SurfaceOutcome::Stick(s) => assert!((s.lambda + INV_SQRT2).abs() < 1e-10),
        other => panic!("expected stick, got {other:?}"),
    }

    // Both sides of Example 1 flow away; the repelling invariant set is reported.
    let e1 = make_example1(Example1Variant::Filippov);
    for side in [Region::Plus, Region::Minus] {
        match classify_surface_point(&e1, &[0.0], 0.0, side).unwrap() {
            SurfaceOutcome::Stick(s) => {
                assert_eq!(s.lambda, 0.0);
                assert_eq!(s.stability, Stability::Repelling);
            }
            other => panic!("expected stick, got {other:?}"),
        }
    }

    // Below I·R = V_b the layer is crossed from the "off" side.
    let p = CircuitParams::default();
    let circuit = make_circuit(p).unwrap();
    assert_eq!(classify_surface_point(&circuit, &[1.0], 0.0, Region::Minus).unwrap(), SurfaceOutcome::Cross);

    let duffing = make_duffing(DuffingParams::default()).unwrap();
    assert_eq!(classify_surface_point(&duffing, &[0.0], 0.0, Region::Plus).unwrap(), SurfaceOutcome::LayerDynamic);
}

/// Integrates `dλ/dτ = f₁` directly with explicit Euler to confirm the first-root rule.
#[test]
fn classification_agrees_with_layer_ode() {
    let e2 = make_example2(Example2Variant::Nonlinear);
    let mut lambda = -1.0;
    for _ in 0..200_000 {
        lambda += 1e-4 * layer_field(&e2, &[0.0], 0.0, lambda).unwrap().0;
    }
    match classify_surface_point(&e2, &[0.0], 0.0, Region::Minus).unwrap() {
        SurfaceOutcome::Stick(s) => assert!((s.lambda - lambda).abs() < 1e-6),
        other => panic!("expected stick, got {other:?}"),
    }
}

#[test]
fn circuit_layer_crosses_below_threshold() {
    let p = CircuitParams::default().with_sigma(0.5);
    let circuit = make_circuit(p).unwrap();
    // I·R < V_b: the layer flow is monotone in μ, so there is nothing to stick to.
    for k in 0..=100 {
        let mu = k as f64 / 100.0;
        let (dl, _) = layer_field(&circuit, &[1.5], 0.0, lambda_from_mu(mu)).unwrap();
        assert!(dl > 0.0);
    }
}

#[test]
fn layer_equilibria_examples() {
    for sigma in [0.0, 0.1, 0.25, 0.5] {
        let p = CircuitParams::default().with_sigma(sigma);
        let eq = find_layer_equilibria(&make_circuit(p).unwrap(), &SearchBox::new(vec![(0.0, 30.0)]), 0.0).unwrap();
        assert_eq!(eq.len(), 1, "sigma {sigma}");
        let (mu, i) = p.saddle();
        assert!((mu_from_lambda(eq[0].lambda) - mu).abs() < 1e-8);
        assert!((eq[0].x_rest[0] - i).abs() < 1e-8);
        assert_eq!(eq[0].kind, EquilibriumKind::Saddle);
    }
    let e1 = make_example1(Example1Variant::Nonlinear);
    assert!(find_layer_equilibria(&e1, &SearchBox::new(vec![(-2.0, 2.0)]), 0.0).unwrap().is_empty());
    let duffing = make_duffing(DuffingParams::default()).unwrap();
    assert!(find_layer_equilibria(&duffing, &SearchBox::new(vec![(-1.0, 1.0)]), 0.0).is_err());
}

#[test]
fn example1_forward_from_origin_stays_on_line() {
    let sys = make_example1(Example1Variant::Nonlinear);
    let traj = integrate_hybrid(&sys, &at(&[0.0, 0.0]), 1.0, &cfg(), 1e-5).unwrap();
    assert_eq!(traj.segments.len(), 1);
    assert_eq!(traj.segments[0].regime, Regime::Sliding);
    let end = traj.final_state().unwrap();
    assert_eq!(end.x[0], 0.0);
    assert!((end.x[1] - 1.0).abs() < 1e-9);
}

#[test]
fn example2_hybrid_sticks_at_attracting_mode() {
    let sys = make_example2(Example2Variant::Nonlinear);
    let traj = integrate_hybrid(&sys, &at(&[-0.5, 0.0]), 2.0, &cfg(), 1e-5).unwrap();
    assert_eq!(traj.transitions.len(), 1);
    assert_eq!(traj.transitions[0].kind, TransitionKind::Stick);
    let sliding = &traj.segments[1];
    assert!(sliding.lambda().unwrap().iter().all(|l| (l + INV_SQRT2).abs() < 1e-10));
    let end = traj.final_state().unwrap();
    assert!((end.x[1] - 2.0).abs() < 1e-8);

    let cont = make_example2(Example2Variant::Continuous);
    let traj = integrate_hybrid(&cont, &at(&[-0.5, 0.0]), 2.0, &cfg(), 1e-5).unwrap();
    assert_eq!(traj.count(TransitionKind::CrossUp), 1);
    let end = traj.final_state().unwrap();
    assert!((end.x[0] - 1.5).abs() < 1e-8);
}

#[test]
fn duffing_hybrid_enters_layer() {
    let sys = make_duffing(DuffingParams::default()).unwrap();
    let traj = integrate_hybrid(&sys, &at(&[0.3, 0.0]), 20.0, &cfg(), 1e-5).unwrap();
    assert!(traj.count(TransitionKind::LayerEnter) >= 1);
    let layer = traj.segments.iter().find(|s| s.regime == Regime::LayerTransit).unwrap();
    assert!(layer.lambda().unwrap().iter().all(|l| l.abs() <= 1.0));
    assert!(layer.iter().all(|(_, x)| x[0] == 0.0));
}

#[test]
fn regularization_converges_to_layer_prediction() {
    // Time-reversed Example 1: the sliding mode attracts, x₂ follows the sliding field.
    let sys = make_example1(Example1Variant::Nonlinear).reversed();
    let layer = integrate_hybrid(&sys, &at(&[0.5, 0.0]), 1.0, &cfg(), 1e-5).unwrap();
    let target = layer.final_state().unwrap().x[1];
    let errors: Vec<f64> = [1e-1, 1e-2, 1e-3]
        .iter()
        .map(|&eps| {
            let s = SigmoidSpec::new(SigmoidKind::PiecewiseLinear, eps).unwrap();
            let seg = integrate_regularized(&sys, &s, &at(&[0.5, 0.0]), 1.0, &cfg()).unwrap();
            (seg.last_state().unwrap().x[1] - target).abs()
        })
        .collect();
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
}
