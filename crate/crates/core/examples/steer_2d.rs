//! Unit square, one vertical sign-change line moved from 1/3 to 2/3.

use std::f64::consts::PI;
use std::sync::Arc;

use bilinear_steer::pipeline::{monotone_errors, sweep, PlanParams, SweepPoint};
use bilinear_steer::{Grid, GridFunction};

fn main() -> bilinear_steer::Result<()> {
    let grid = Arc::new(Grid::unit(2, 100)?);
    let line = |c: f64| {
        GridFunction::from_fn(grid.clone(), move |p| {
            (PI * p[0]).sin() * (PI * p[1]).sin() * (c - p[0])
        })
        .with_dirichlet()
    };
    let (u0, u1) = (line(1.0 / 3.0), line(2.0 / 3.0));
    let points = [
        SweepPoint {
            h: 0.02,
            t_star: 1e-6,
            t_shift: 2.0,
            t_final: 1e-4,
        },
        SweepPoint {
            h: 0.01,
            t_star: 3e-7,
            t_shift: 4.0,
            t_final: 3e-5,
        },
        SweepPoint {
            h: 0.005,
            t_star: 1e-7,
            t_shift: 8.0,
            t_final: 1e-5,
        },
    ];
    let reports = sweep(&u0, &u1, &PlanParams::default(), &points)?;
    let mut errors = Vec::new();
    for (i, r) in reports.into_iter().enumerate() {
        let r = r?;
        println!("--- index {i}\n{}", r.to_text());
        errors.push(r.final_error);
    }
    println!("errors {errors:?} monotone {}", monotone_errors(&errors));
    Ok(())
}
