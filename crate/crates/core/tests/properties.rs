use fhn_core::descent::{square_wave, Descent, DescentConfig, StepOutcome};
use fhn_core::grid::{norm_h1exp_sq, shift_grid};
use fhn_core::parabolic::{EvolveOptions, MovingWindow, PhysicalState};
use fhn_core::speed::{regula_falsi, Probe};
use fhn_core::{Grid, ModelParams, Profile};
use proptest::prelude::*;

const GAMMA: f64 = 1.0 / 16.0;
const BETA: f64 = 0.25;

fn relative_ulps(a: f64, b: f64) -> f64 {
    (a - b).abs() / (b.abs() * f64::EPSILON)
}

fn profile_strategy() -> impl Strategy<Value = (f64, f64, usize, Vec<f64>)> {
    (-120.0..-5.0f64, 0.005..0.1f64, 20usize..400).prop_flat_map(|(origin, h, n)| {
        (Just(origin), Just(h), Just(n), prop::collection::vec(-1.0..1.0f64, n + 1))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn shift_scales_the_norm((origin, h, n, samples) in profile_strategy(), offset in -10.0..10.0f64) {
        let p = Profile::new(Grid::line(origin, h, n).unwrap(), samples).unwrap();
        let before = norm_h1exp_sq(&p).unwrap();
        let after = norm_h1exp_sq(&shift_grid(&p, offset).unwrap()).unwrap();
        prop_assume!(before > 0.0);
        let ulps = relative_ulps(after, offset.exp() * before);
        prop_assert!(ulps <= 8.0, "{ulps} ulps");
    }

    #[test]
    fn regula_falsi_lands_on_affine_roots(root in -50.0..50.0f64, slope in prop_oneof![-1e3..-1e-3f64, 1e-3..1e3f64],
                                          left in 0.1..20.0f64, right in 0.1..20.0f64) {
        let f = |x: f64| Probe { value: slope * (x - root), tolerance: 1e-9 * slope.abs(), payload: () };
        let (lo, hi) = (root - left, root + right);
        let out = regula_falsi((lo, f(lo)), (hi, f(hi)), 1e-12, 10, 50, |x, _| Ok(f(x))).unwrap();
        prop_assert_eq!(out.evaluations, 1);
        prop_assert!((out.x - root).abs() <= 1e-12 * (1.0 + root.abs() + left + right));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn descent_stays_on_the_manifold_and_descends(c in 4.0..16.0f64, d in 2e-4..1e-3f64) {
        let params = ModelParams::line(d, GAMMA, BETA, c).unwrap();
        let w0 = square_wave(0.02, 3000).unwrap();
        let descent = Descent::new(&params, w0.grid(), DescentConfig::line()).unwrap();
        let mut state = descent.initial_state(&w0).unwrap();
        let mut prev = state.energy.total;
        for _ in 0..100 {
            state = match descent.step(&state).unwrap() {
                StepOutcome::Accepted { state, .. } => state,
                StepOutcome::Critical(state) => state,
            };
            let gap = (norm_h1exp_sq(&state.w).unwrap() - 2.0).abs();
            prop_assert!(gap <= 1e-10, "norm gap {gap}");
            prop_assert!(state.energy.total <= prev, "J rose from {prev} to {}", state.energy.total);
            prev = state.energy.total;
        }
    }

    #[test]
    fn zero_state_is_an_equilibrium(c in 1.0..20.0f64, d in 1e-4..2e-3f64, steps in 1usize..40) {
        let params = ModelParams::line(d, GAMMA, BETA, c).unwrap();
        let g = Grid::line(-8.0, 0.02, 400).unwrap();
        let out = MovingWindow::new(&params, c, &g, EvolveOptions::default())
            .unwrap()
            .run(&PhysicalState::zeros(g.clone()), steps, None)
            .unwrap();
        prop_assert!(out.state.u.samples().iter().all(|&x| x == 0.0));
        prop_assert!(out.state.v.samples().iter().all(|&x| x == 0.0));
    }
}

// Raising d adds (d2 - d1) c^2 / 2 times the gradient term, which is at most 1
// on the manifold.
#[test]
fn energy_ordering_in_d() {
    let c = 5.0;
    let (d1, d2) = (3e-4, 5e-4);
    let w0 = square_wave(0.02, 8000).unwrap();
    let j = |d: f64| {
        let p = ModelParams::line(d, GAMMA, BETA, c).unwrap();
        let r = Descent::new(&p, w0.grid(), DescentConfig::line()).unwrap().minimize(&w0).unwrap();
        assert!(r.converged, "d = {d}: {:?}", r.reason);
        r.j()
    };
    let (j1, j2) = (j(d1), j(d2));
    let slack = 1e-6 * c * c;
    println!("J(c; d1) = {j1:e}, J(c; d2) = {j2:e}, bound {:e}", j1 + (d2 - d1) * c * c);
    assert!(j1 <= j2 + slack);
    assert!(j2 <= j1 + (d2 - d1) * c * c + slack);
}

#[test]
fn oracle_suite_passes() {
    for report in fhn_core::verification::run_all().unwrap() {
        println!("{report}");
        assert!(report.pass, "{report}");
    }
}
