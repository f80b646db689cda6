//! Property tests for the invariants of grids, sign patterns, spectra,
//! the solver and the moment cone.

use std::f64::consts::PI;

use proptest::prelude::*;

use bilinear_steer::grid::{inner_product, l2_norm};
use bilinear_steer::sign::{detect_pattern, same_pattern};
use bilinear_steer::solver::{simulate, SimOptions};
use bilinear_steer::spectral::solve_1d;
use bilinear_steer::synthesis::{solve_moment_cone, MomentProblemSpec};
use bilinear_steer::{ControlSchedule, Grid1D, GridFunction, Stage};

fn sorted_zeros(raw: Vec<f64>) -> Vec<f64> {
    let mut z = raw;
    z.sort_by(f64::total_cmp);
    z
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn detected_pattern_recovers_product_zeros(
        raw in prop::collection::vec(0.1f64..0.9, 1..4),
        flip in any::<bool>(),
    ) {
        let z = sorted_zeros(raw);
        prop_assume!(z.windows(2).all(|w| w[1] - w[0] > 0.05));
        let g = Grid1D::unit(400).unwrap();
        let s = if flip { -1.0 } else { 1.0 };
        let zc = z.clone();
        let f = GridFunction::from_fn_1d(&g, move |x| s * (PI * x).sin() * zc.iter().map(|c| c - x).product::<f64>());
        let p = detect_pattern(&f.with_dirichlet(), None).unwrap();
        prop_assert_eq!(p.counts(), vec![z.len()]);
        for (a, b) in p.changes(0).iter().zip(&z) {
            prop_assert!((a - b).abs() <= g.dx());
        }
        let q = detect_pattern(&f.scale(-2.5).with_dirichlet(), None).unwrap();
        prop_assert!(!same_pattern(&p, &q, g.dx()) && q.first_sign() == -p.first_sign());
    }

    #[test]
    fn spectra_are_sorted_orthonormal_and_oscillate(a in -30.0f64..30.0, b in -30.0f64..30.0, k0 in 1.0f64..6.0) {
        let g = Grid1D::unit(120).unwrap();
        let v = GridFunction::from_fn_1d(&g, move |x| a * (k0 * x).sin() + b * x);
        let basis = solve_1d(&v, 5).unwrap();
        for k in 1..=5 {
            prop_assert_eq!(basis.zeros(k).len(), k - 1);
            if k > 1 {
                prop_assert!(basis.lambda(k) < basis.lambda(k - 1));
            }
            for j in 1..=5 {
                let ip = inner_product(basis.mode(k), basis.mode(j)).unwrap();
                let want = if j == k { 1.0 } else { 0.0 };
                prop_assert!((ip - want).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn nonnegative_data_stays_nonnegative(amp in 0.0f64..300.0, freq in 0.5f64..12.0, t in 0.001f64..0.05) {
        let g = Grid1D::unit(100).unwrap();
        let u0 = GridFunction::from_fn_1d(&g, |x| (PI * x).sin() * (1.0 + x * x)).with_dirichlet();
        let v = GridFunction::from_fn_1d(&g, move |x| amp * (freq * x).cos());
        let stage = Stage::new(v, t, "v").unwrap();
        let traj = simulate(&u0, &ControlSchedule::single(stage), &SimOptions::new(1e-3)).unwrap();
        let r = traj.max_principle();
        prop_assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn interface_counts_never_increase(z in 0.2f64..0.8, amp in -100.0f64..100.0) {
        let g = Grid1D::unit(100).unwrap();
        let u0 = GridFunction::from_fn_1d(&g, move |x| (PI * x).sin() * (z - x)).with_dirichlet();
        let v = GridFunction::from_fn_1d(&g, move |x| amp * x * (1.0 - x));
        let stage = Stage::new(v, 0.02, "v").unwrap();
        let opts = SimOptions::new(1e-3);
        let traj = simulate(&u0, &ControlSchedule::single(stage), &opts).unwrap();
        prop_assert!(traj.max_principle().counts_monotone);
    }

    #[test]
    fn simulation_is_linear_in_data(c in -5.0f64..5.0) {
        let g = Grid1D::unit(60).unwrap();
        let u0 = GridFunction::from_fn_1d(&g, |x| (PI * x).sin() + 0.3 * (3.0 * PI * x).sin()).with_dirichlet();
        let v = GridFunction::from_fn_1d(&g, |x| 10.0 * x);
        let sched = ControlSchedule::single(Stage::new(v, 0.03, "v").unwrap());
        let opts = SimOptions::new(1e-3);
        let a = simulate(&u0, &sched, &opts).unwrap();
        let b = simulate(&u0.scale(c), &sched, &opts).unwrap();
        let diff = b.final_state().sub(&a.final_state().scale(c)).unwrap();
        prop_assert!(l2_norm(&diff) <= 1e-10 * (1.0 + c.abs()));
    }

    #[test]
    fn moment_cone_has_unit_payoff_and_cone_signs(x0 in 0.3f64..0.7, off in 0.1f64..0.2, h in 0.005f64..0.03, first in prop::bool::ANY) {
        let g = Grid1D::unit(400).unwrap();
        let basis = solve_1d(&GridFunction::from_fn_1d(&g, |_| 0.0), 4).unwrap();
        let probe = if x0 > 0.5 { x0 - off - 2.0 * h } else { x0 + off + h };
        let sign = if first { 1 } else { -1 };
        let spec = MomentProblemSpec::new(0, basis, vec![x0], probe, h, sign).unwrap();
        let sol = solve_moment_cone(&spec).unwrap();
        prop_assert!((sol.payoff.abs() - 1.0).abs() < 1e-9);
        prop_assert!(sol.sign_compatible());
    }
}
