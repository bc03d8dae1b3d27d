use carfollow_ident::directtest::{distance, solve, solve_warm, DirectTestProblem, OptimizerSettings};
use carfollow_ident::models::{builtin_model, ModelSpec, State, BUILTIN_MODELS};
use carfollow_ident::simulate::{output_error, simulate, InputProfile, Scenario, Simulator};
use carfollow_ident::structural::OutputMode;
use proptest::prelude::*;

/// Classical RK4 on the same vector field, with the input interpolated at
/// the stage times.
fn rk4(m: &ModelSpec, sc: &Scenario, theta: &[f64], dt: f64) -> State {
    let f = |t: f64, x: State| {
        let u = sc.input.value(t);
        (u - x.v, m.acceleration(x, u, theta).unwrap())
    };
    let steps = (sc.horizon / dt).round() as usize;
    let mut x = sc.x0;
    for k in 0..steps {
        let t = k as f64 * dt;
        let k1 = f(t, x);
        let k2 = f(t + dt / 2.0, State::new(x.s + dt / 2.0 * k1.0, x.v + dt / 2.0 * k1.1));
        let k3 = f(t + dt / 2.0, State::new(x.s + dt / 2.0 * k2.0, x.v + dt / 2.0 * k2.1));
        let k4 = f(t + dt, State::new(x.s + dt * k3.0, x.v + dt * k3.1));
        x = State::new(
            x.s + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
            x.v + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
        );
    }
    x
}

#[test]
fn euler_converges_at_first_order() {
    let sc_at = |dt: f64| Scenario::new(State::new(40.0, 28.0), InputProfile::shipped(), 20.0, dt, OutputMode::GapOnly).unwrap();
    let cases: [(&str, &[f64]); 4] = [
        ("CTH-RV", &[0.05, 0.3, 1.5]),
        ("OV", &[0.8, 20.0, 10.0, 30.0]),
        ("FTL", &[200.0, 1.5]),
        ("IDM", &[5.0, 33.0, 1.2, 1.0, 2.0]),
    ];
    for (name, theta) in cases {
        let m = builtin_model(name).unwrap();
        let reference = rk4(&m, &sc_at(0.1), theta, 0.001);
        let errors: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&dt| {
                let t = simulate(&m, &sc_at(dt), theta).unwrap();
                (t.s[t.len() - 1] - reference.s).abs() + (t.v[t.len() - 1] - reference.v).abs()
            })
            .collect();
        for w in errors.windows(2) {
            let ratio = w[0] / w[1];
            assert!((1.6..2.6).contains(&ratio), "{name}: error ratio {ratio} ({errors:?})");
        }
    }
}

#[test]
fn rk4_reference_is_converged() {
    let m = builtin_model("CTH-RV").unwrap();
    let sc = Scenario::new(State::new(40.0, 28.0), InputProfile::shipped(), 20.0, 0.1, OutputMode::GapOnly).unwrap();
    let theta = [0.05, 0.3, 1.5];
    let a = rk4(&m, &sc, &theta, 0.001);
    let b = rk4(&m, &sc, &theta, 0.0005);
    assert!((a.s - b.s).abs() < 1e-8 && (a.v - b.v).abs() < 1e-8);
}

#[test]
fn lockstep_error_matches_separate_runs() {
    let m = builtin_model("IDM").unwrap();
    let sc = Scenario::direct_default();
    let (a, b) = ([5.0, 33.0, 1.2, 1.0, 2.0], [6.0, 30.0, 1.1, 1.4, 2.5]);
    let e = output_error(&m, &sc, &a, &b).unwrap();
    let mut sim = Simulator::new(&m, &sc).unwrap();
    let samples = (sc.steps() + 1) as f64;
    let lockstep = sim.pair_sq_error(&a, &b, f64::INFINITY).unwrap() / samples;
    assert_eq!(e, lockstep);
}

fn scaled(m: &ModelSpec, unit: &[f64]) -> Vec<f64> {
    m.params().iter().zip(unit).map(|(p, t)| p.lower + t * p.width()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn output_error_is_a_symmetric_nonnegative_discrepancy(
        which in 0usize..4,
        ua in prop::collection::vec(0.0f64..1.0, 5),
        ub in prop::collection::vec(0.0f64..1.0, 5),
        speed in prop::bool::ANY,
    ) {
        let m = builtin_model(BUILTIN_MODELS[which]).unwrap();
        let output = if speed { OutputMode::GapAndSpeed } else { OutputMode::GapOnly };
        let sc = Scenario { output, ..Scenario::direct_default() };
        let (a, b) = (scaled(&m, &ua), scaled(&m, &ub));
        let (Ok(ta), Ok(tb)) = (simulate(&m, &sc, &a), simulate(&m, &sc, &b)) else { return Ok(()) };
        let ab = output_error(&m, &sc, &a, &b).unwrap();
        let ba = output_error(&m, &sc, &b, &a).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!(ab > 0.0 || (ta.s == tb.s && (!speed || ta.v == tb.v)));
        prop_assert_eq!(output_error(&m, &sc, &a, &a).unwrap(), 0.0);
    }

    #[test]
    fn distance_is_a_normalized_metric(
        a in prop::collection::vec(0.0f64..1.0, 3),
        b in prop::collection::vec(0.0f64..1.0, 3),
        c in prop::collection::vec(0.0f64..1.0, 3),
    ) {
        let m = builtin_model("CTH-RV").unwrap();
        let (lo, hi) = (m.lower_bounds(), m.upper_bounds());
        let scale = |x: &[f64]| -> Vec<f64> { x.iter().zip(&lo).zip(&hi).map(|((t, l), h)| l + t * (h - l)).collect() };
        let (a, b, c) = (scale(&a), scale(&b), scale(&c));
        let ab = distance(&a, &b, &lo, &hi);
        prop_assert_eq!(ab, distance(&b, &a, &lo, &hi));
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!(ab <= distance(&a, &c, &lo, &hi) + distance(&c, &b, &lo, &hi) + 1e-15);
    }
}

#[test]
fn swapping_the_optimal_pair_changes_nothing() {
    let m = builtin_model("FTL").unwrap();
    let sc = Scenario::new(State::new(50.0, 30.0), InputProfile::shipped(), 30.0, 0.1, OutputMode::GapOnly).unwrap();
    let settings = OptimizerSettings {
        starts: 2,
        max_evals: 1500,
        ..Default::default()
    };
    let p = DirectTestProblem::new(m.clone(), sc.clone(), 1e-4, settings).unwrap();
    let r = solve(&p).unwrap();
    let (lo, hi) = (m.lower_bounds(), m.upper_bounds());
    assert_eq!(distance(&r.theta2, &r.theta1, &lo, &hi), r.delta);
    assert_eq!(output_error(&m, &sc, &r.theta2, &r.theta1).unwrap(), r.error);
    let swapped = solve_warm(&p, &[(r.theta2.clone(), r.theta1.clone())]).unwrap();
    assert!(swapped.feasible);
    assert!(swapped.delta >= r.delta - 1e-12, "{} < {}", swapped.delta, r.delta);
}
