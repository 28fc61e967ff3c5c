use layerdyn_core::field::VectorFn;
use layerdyn_core::integrate::{integrate_regularized, IntegratorConfig, Regime};
use layerdyn_core::layer::{classify_surface_point, find_sliding_modes, integrate_hybrid, Stability, ROOT_TOL};
use layerdyn_core::scenarios::*;
use layerdyn_core::series::SeriesExpansion;
use layerdyn_core::sigmoid::{SigmoidKind, SigmoidSpec};
use layerdyn_core::{Region, State, SurfaceOutcome, SwitchedField, SwitchingSurface};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

fn all_scenarios() -> Vec<(&'static str, SwitchedField)> {
    vec![
        ("example1-filippov", make_example1(Example1Variant::Filippov)),
        ("example1-nonlinear", make_example1(Example1Variant::Nonlinear)),
        ("example2-continuous", make_example2(Example2Variant::Continuous)),
        ("example2-nonlinear", make_example2(Example2Variant::Nonlinear)),
        ("circuit-0", make_circuit(CircuitParams::default()).unwrap()),
        ("circuit-0.5", make_circuit(CircuitParams::default().with_sigma(0.5)).unwrap()),
        ("duffing-cubic", make_duffing(DuffingParams::default()).unwrap()),
        (
            "duffing-linear",
            make_duffing(DuffingParams { variant: DuffingVariant::Linear, ..Default::default() }).unwrap(),
        ),
        ("duffing-tracker", make_duffing(DuffingParams { tracker_mu: Some(1e-3), ..Default::default() }).unwrap()),
    ]
}

fn random_state(rng: &mut ChaCha8Rng, dim: usize) -> State {
    State::new(rng.gen_range(-10.0..10.0), (0..dim).map(|_| rng.gen_range(-5.0..5.0)).collect())
}

#[test]
fn hidden_term_vanishes_off_the_layer() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (name, sys) in all_scenarios() {
        for _ in 0..1000 {
            let s = random_state(&mut rng, sys.dim());
            for side in [1.0, -1.0] {
                assert!(sys.hidden_term(&s, side).unwrap().iter().all(|e| *e == 0.0), "{name}");
            }
            assert_eq!(sys.eval_field(&s, 1.0).unwrap(), sys.f_plus(&s).unwrap(), "{name}");
            assert_eq!(sys.eval_field(&s, -1.0).unwrap(), sys.f_minus(&s).unwrap(), "{name}");
        }
    }
}

fn random_coefficient(rng: &mut ChaCha8Rng) -> VectorFn {
    let a: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
    Arc::new(move |t, x: &[f64], out: &mut [f64]| {
        out[0] = a[0] + a[1] * x[1] + a[2] * libm::sin(t);
        out[1] = a[1] * x[0] - a[2] * x[1] * x[1];
    })
}

#[test]
fn series_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let orders = [2usize, 3, 4, 5];
    for &n in &orders {
        let coefficients: Vec<VectorFn> = (0..=n).map(|_| random_coefficient(&mut rng)).collect();
        let e = SeriesExpansion::from_coefficients(2, coefficients).unwrap();
        let sys = e.to_hidden_form(SwitchingSurface::first_coordinate());
        for _ in 0..1000 {
            let s = random_state(&mut rng, 2);
            let l = rng.gen_range(-1.0..=1.0);
            let a = e.reconstruct(&s, l).unwrap();
            let b = sys.eval_field(&s, l).unwrap();
            for (p, q) in a.iter().zip(&b) {
                assert!((p - q).abs() <= 1e-12 * (1.0 + p.abs()), "order {n}: {p} vs {q}");
            }
        }
        let s = random_state(&mut rng, 2);
        let fp = sys.f_plus(&s).unwrap();
        let fm = sys.f_minus(&s).unwrap();
        let sp = e.reconstruct(&s, 1.0).unwrap();
        let sm = e.reconstruct(&s, -1.0).unwrap();
        for i in 0..2 {
            assert!((fp[i] - sp[i]).abs() <= 1e-10 && (fm[i] - sm[i]).abs() <= 1e-10);
        }
    }
    let c = |v: [f64; 2]| -> VectorFn { Arc::new(move |_, _, out: &mut [f64]| out.copy_from_slice(&v)) };
    let filippov = SeriesExpansion::expand_from_midpoint(2, c([1.0, 3.0]), c([-2.0, 1.0]), c([-0.5, 2.0]));
    let sys = filippov.to_hidden_form(SwitchingSurface::first_coordinate());
    let s = State::new(0.0, vec![0.1, 0.2]);
    assert!(sys.hidden_term(&s, 0.3).unwrap().iter().all(|e| *e == 0.0));
}

/// A field whose normal component is the polynomial `Σ cₖ λᵏ`.
fn polynomial_layer(coeffs: Vec<f64>) -> SwitchedField {
    let eval = |c: &[f64], l: f64| c.iter().rev().fold(0.0, |acc, ck| acc * l + ck);
    let fp = eval(&coeffs, 1.0);
    let fm = eval(&coeffs, -1.0);
    SwitchedField::new(
        2,
        move |_, _, out: &mut [f64]| out.copy_from_slice(&[fp, 1.0]),
        move |_, _, out: &mut [f64]| out.copy_from_slice(&[fm, 1.0]),
        SwitchingSurface::first_coordinate(),
    )
    .with_hidden(move |_, _, l, out: &mut [f64]| {
        // Synthetic division of p(λ) − linear part by (λ² − 1).
        let mut rem: Vec<f64> = coeffs.clone();
        rem.resize(rem.len().max(2), 0.0);
        rem[0] -= 0.5 * (fp + fm);
        rem[1] -= 0.5 * (fp - fm);
        let deg = rem.len() - 1;
        let mut q = vec![0.0; deg.saturating_sub(1)];
        for k in (2..=deg).rev() {
            q[k - 2] = rem[k];
            rem[k - 2] += rem[k];
        }
        out[0] = eval(&q, l);
        out[1] = 0.0;
    })
}

fn brute_force_roots(f: impl Fn(f64) -> f64) -> Vec<f64> {
    let n = 10_000;
    let grid: Vec<f64> = (0..=n).map(|i| -1.0 + 2.0 * i as f64 / n as f64).collect();
    let mut roots: Vec<f64> = Vec::new();
    for (i, &a0) in grid.iter().enumerate() {
        let fa = f(a0);
        if fa.abs() <= 1e-12 {
            roots.push(a0);
            continue;
        }
        let Some(&b0) = grid.get(i + 1) else { break };
        let fb = f(b0);
        if fa * fb < 0.0 && fb.abs() > 1e-12 {
            let (mut a, mut b) = (a0, b0);
            while b - a > 1e-12 {
                let m = 0.5 * (a + b);
                if f(m) * fa > 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            roots.push(0.5 * (a + b));
        }
    }
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-10);
    roots
}

#[test]
fn sliding_solver_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0;
    let mut cases: Vec<Vec<f64>> = vec![vec![-1.0, 0.0, 2.0], vec![0.0, 1.0], vec![1.0], vec![0.1, -1.3, 0.2, 1.0]];
    for _ in 0..100 {
        let deg = rng.gen_range(1..=5);
        cases.push((0..=deg).map(|_| rng.gen_range(-1.0..1.0)).collect());
    }
    for coeffs in cases {
        let eval = |l: f64| coeffs.iter().rev().fold(0.0, |acc, ck| acc * l + ck);
        let expected = brute_force_roots(eval);
        let sys = polynomial_layer(coeffs.clone());
        let found = find_sliding_modes(&sys, &[0.0], 0.0).unwrap();
        assert_eq!(found.len(), expected.len(), "{coeffs:?}: {found:?} vs {expected:?}");
        for (s, r) in found.iter().zip(&expected) {
            assert!((s.lambda - r).abs() <= 1e-8, "{coeffs:?}");
            assert!(eval(s.lambda).abs() <= ROOT_TOL * 10.0);
        }
        checked += 1;
    }
    assert_eq!(checked, 104);
}

#[test]
fn filippov_sign_test_reduction() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let fp: f64 = rng.gen_range(-2.0..2.0);
        let fm: f64 = rng.gen_range(-2.0..2.0);
        let sys = SwitchedField::new(
            2,
            move |_, _, out: &mut [f64]| out.copy_from_slice(&[fp, 1.0]),
            move |_, _, out: &mut [f64]| out.copy_from_slice(&[fm, -1.0]),
            SwitchingSurface::first_coordinate(),
        );
        if fp < 0.0 && 0.0 < fm {
            for side in [Region::Plus, Region::Minus] {
                match classify_surface_point(&sys, &[0.0], 0.0, side).unwrap() {
                    SurfaceOutcome::Stick(s) => {
                        assert_eq!(s.stability, Stability::Attracting);
                        assert!((s.lambda - (fp + fm) / (fm - fp)).abs() < 1e-12);
                    }
                    other => panic!("{fp} {fm}: {other:?}"),
                }
            }
        } else if fp * fm > 0.0 {
            let entry = if fm > 0.0 { Region::Minus } else { Region::Plus };
            assert_eq!(classify_surface_point(&sys, &[0.0], 0.0, entry).unwrap(), SurfaceOutcome::Cross);
        }
    }
}

#[test]
fn hybrid_continuity() {
    let cfg = IntegratorConfig::default();
    let runs: Vec<(SwitchedField, State, f64, f64)> = vec![
        (make_circuit(CircuitParams::default()).unwrap(), State::new(0.0, vec![6.0, 0.0]), 20.0, 1e-9),
        (make_circuit(CircuitParams::default().with_sigma(0.5)).unwrap(), State::new(0.0, vec![6.0, 0.0]), 60.0, 1e-9),
        (make_example1(Example1Variant::Nonlinear).reversed(), State::new(0.0, vec![0.5, 0.0]), 1.0, 1e-9),
        (make_example2(Example2Variant::Nonlinear), State::new(0.0, vec![-0.5, 0.0]), 2.0, 1e-9),
        (make_example2(Example2Variant::Continuous), State::new(0.0, vec![-0.5, 0.0]), 2.0, 1e-9),
        (make_duffing(DuffingParams::default()).unwrap(), State::new(0.0, vec![0.3, 0.0]), 30.0, 1e-9),
    ];
    for (sys, x0, t_end, tol) in runs {
        let traj = integrate_hybrid(&sys, &x0, t_end, &cfg, 1e-5).unwrap();
        assert!(traj.max_junction_gap() <= 10.0 * tol, "gap {}", traj.max_junction_gap());
        for seg in &traj.segments {
            assert!(seg.times().windows(2).all(|w| w[1] > w[0]));
            let interior = seg.len().saturating_sub(1);
            match seg.regime {
                Regime::FreePlus => {
                    assert!(seg.iter().skip(1).take(interior.saturating_sub(1)).all(|(_, x)| x[0] > 0.0))
                }
                Regime::FreeMinus => {
                    assert!(seg.iter().skip(1).take(interior.saturating_sub(1)).all(|(_, x)| x[0] < 0.0))
                }
                Regime::Sliding => {
                    let lambda = seg.lambda().unwrap();
                    for (i, (t, x)) in seg.iter().enumerate() {
                        assert!(x[0].abs() <= tol);
                        let f = sys.evaluator();
                        let mut out = vec![0.0; x.len()];
                        let mut f = f;
                        f.eval(t, x, lambda[i], &mut out).unwrap();
                        assert!(out[0].abs() <= 10.0 * ROOT_TOL, "f1 = {}", out[0]);
                    }
                }
                _ => {}
            }
        }
        let last = traj.final_state().unwrap();
        assert!((last.t - t_end).abs() < 1e-12);
    }
}

fn sigmoid_kind() -> impl Strategy<Value = SigmoidKind> {
    prop_oneof![
        Just(SigmoidKind::PiecewiseLinear),
        Just(SigmoidKind::ArctanUnit),
        Just(SigmoidKind::Arctan01),
        Just(SigmoidKind::Tanh),
        Just(SigmoidKind::Erf),
    ]
}

proptest! {
    #[test]
    fn sigmoids_are_monotone(kind in sigmoid_kind(), eps in 1e-4f64..1.0, a in -10.0f64..10.0, b in -10.0f64..10.0) {
        let s = SigmoidSpec::new(kind, eps).unwrap();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(s.evaluate(lo * eps).unwrap() <= s.evaluate(hi * eps).unwrap());
    }

    #[test]
    fn symmetric_sigmoids_are_odd(eps in 1e-4f64..1.0, u in -20.0f64..20.0) {
        for kind in [SigmoidKind::PiecewiseLinear, SigmoidKind::Tanh, SigmoidKind::Erf, SigmoidKind::ArctanUnit] {
            let s = SigmoidSpec::new(kind, eps).unwrap();
            prop_assert_eq!(s.evaluate(-u * eps).unwrap(), -s.evaluate(u * eps).unwrap());
        }
    }

    #[test]
    fn field_is_quadratic_in_lambda_for_examples(x1 in -3.0f64..3.0, x2 in -3.0f64..3.0, l in -1.0f64..=1.0) {
        let s = State::new(0.0, vec![x1, x2]);
        let e1 = make_example1(Example1Variant::Nonlinear).eval_field(&s, l).unwrap();
        prop_assert!((e1[0] - l).abs() < 1e-15);
        prop_assert!((e1[1] - (1.0 - 2.0 * l * l)).abs() < 1e-15);
        let e2 = make_example2(Example2Variant::Nonlinear).eval_field(&s, l).unwrap();
        prop_assert!((e2[0] - (2.0 * l * l - 1.0)).abs() < 1e-15);
        prop_assert_eq!(e2[1], 1.0);
    }

    #[test]
    fn regularized_samples_are_ordered(x1 in -1.0f64..1.0, x2 in -1.0f64..1.0, eps in 1e-3f64..1e-1) {
        let sys = make_example2(Example2Variant::Nonlinear);
        let s = SigmoidSpec::new(SigmoidKind::Tanh, eps).unwrap();
        let seg = integrate_regularized(&sys, &s, &State::new(0.0, vec![x1, x2]), 0.5, &IntegratorConfig::default()).unwrap();
        prop_assert!(seg.times().windows(2).all(|w| w[1] > w[0]));
        let lambda = seg.lambda().unwrap();
        for (i, (_, x)) in seg.iter().enumerate() {
            prop_assert_eq!(lambda[i], s.multiplier(x[0]));
        }
    }
}
