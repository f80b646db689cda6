//! Independent oracles: closed-form discrete spectra and a dense
//! eigensolver for the same three-point operator.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;

use bilinear_steer::grid::{inner_product, l2_norm};
use bilinear_steer::solver::{simulate, SimOptions};
use bilinear_steer::spectral::{assemble_nd, solve_1d};
use bilinear_steer::{ControlSchedule, Grid, Grid1D, GridFunction, Stage};

/// Eigenvalues of `D2 + diag(v)` on interior nodes, descending.
fn dense_eigenvalues(g: &Grid1D, v: impl Fn(f64) -> f64) -> Vec<f64> {
    let n = g.cells() - 1;
    let d = g.dx();
    let m = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            -2.0 / (d * d) + v(g.node(i + 1))
        } else if i.abs_diff(j) == 1 {
            1.0 / (d * d)
        } else {
            0.0
        }
    });
    let mut e: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    e.sort_by(|a, b| b.total_cmp(a));
    e
}

#[test]
fn free_spectrum_matches_closed_form() {
    let g = Grid1D::unit(200).unwrap();
    let b = solve_1d(&GridFunction::from_fn_1d(&g, |_| 0.0), 8).unwrap();
    let d = g.dx();
    for k in 1..=8 {
        let exact = -4.0 / (d * d) * (k as f64 * PI * d / 2.0).sin().powi(2);
        assert!((b.lambda(k) - exact).abs() < 1e-9 * exact.abs(), "k = {k}");
        // discrete eigenvector is the sampled sine
        let s = GridFunction::from_fn_1d(&g, move |x| (k as f64 * PI * x).sin());
        let c = inner_product(b.mode(k), &s).unwrap() / l2_norm(&s);
        assert!((c.abs() - 1.0).abs() < 1e-9, "k = {k}: {c}");
    }
}

#[test]
fn dense_oracle_for_nonconstant_potential() {
    let g = Grid1D::unit(800).unwrap();
    let v = |x: f64| 40.0 * (3.0 * PI * x).cos() + 25.0 * x * x;
    let b = solve_1d(&GridFunction::from_fn_1d(&g, v), 6).unwrap();
    let dense = dense_eigenvalues(&g, v);
    for k in 1..=6 {
        let e = dense[k - 1];
        assert!(
            (b.lambda(k) - e).abs() < 1e-8 * e.abs().max(1.0),
            "k = {k}: {} vs {e}",
            b.lambda(k)
        );
    }
}

#[test]
fn box_spectrum_is_sum_of_axis_spectra() {
    let grid = Grid::new(vec![
        Grid1D::new(0.0, 1.0, 40).unwrap(),
        Grid1D::new(0.0, 2.0, 60).unwrap(),
    ])
    .unwrap();
    let bx = solve_1d(&GridFunction::from_fn_1d(grid.axis(0), |_| 0.0), 4).unwrap();
    let by = solve_1d(&GridFunction::from_fn_1d(grid.axis(1), |_| 0.0), 4).unwrap();
    let nd = assemble_nd(&[bx.clone(), by.clone()], 6).unwrap();
    let mut all: Vec<f64> = (1..=4)
        .flat_map(|i| (1..=4).map(move |j| (i, j)))
        .map(|(i, j)| bx.lambda(i) + by.lambda(j))
        .collect();
    all.sort_by(|a, b| b.total_cmp(a));
    for (l, want) in all.iter().take(6).enumerate() {
        assert!((nd.eigenvalues()[l] - want).abs() < 1e-9 * want.abs());
    }
    // functions are orthonormal in the product quadrature
    for a in 0..6 {
        for c in 0..6 {
            let ip = inner_product(nd.function(a), nd.function(c)).unwrap();
            let want = if a == c { 1.0 } else { 0.0 };
            assert!((ip - want).abs() < 1e-9);
        }
    }
}

#[test]
fn two_dimensional_heat_matches_product_decay() {
    let grid = Arc::new(Grid::unit(2, 40).unwrap());
    let u0 = GridFunction::from_fn(grid.clone(), |p| (PI * p[0]).sin() * (2.0 * PI * p[1]).sin()).with_dirichlet();
    let d = grid.axis(0).dx();
    let lam = |k: f64| -4.0 / (d * d) * (k * PI * d / 2.0).sin().powi(2);
    let t = 0.02;
    let stage = Stage::new(GridFunction::zeros(grid.clone()), t, "heat").unwrap();
    let traj = simulate(&u0, &ControlSchedule::single(stage), &SimOptions::new(1e-4)).unwrap();
    let ratio = l2_norm(traj.final_state()) / l2_norm(&u0);
    let want = ((lam(1.0) + lam(2.0)) * t).exp();
    assert!((ratio - want).abs() < 1e-4 * want, "{ratio} vs {want}");
}

#[test]
fn constant_potential_shifts_decay() {
    let g = Grid1D::unit(100).unwrap();
    let b = solve_1d(&GridFunction::from_fn_1d(&g, |_| 0.0), 1).unwrap();
    let u0 = b.mode(1).clone();
    let c = 3.0;
    let stage = Stage::new(GridFunction::constant(u0.grid().clone(), c), 0.1, "const").unwrap();
    let traj = simulate(&u0, &ControlSchedule::single(stage), &SimOptions::new(1e-4)).unwrap();
    let got = inner_product(traj.final_state(), &u0).unwrap();
    let want = ((b.lambda(1) + c) * 0.1).exp();
    assert!((got - want).abs() < 1e-5 * want);
}
