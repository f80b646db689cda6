//! One sign change moved from 0.3 to 0.6 on (0, 1), three sweep indices.

use std::f64::consts::PI;

use bilinear_steer::pipeline::{monotone_errors, sweep, PlanParams, SweepPoint};
use bilinear_steer::{Grid1D, GridFunction};

fn main() -> bilinear_steer::Result<()> {
    let g = Grid1D::unit(200)?;
    let u0 = GridFunction::from_fn_1d(&g, |x| (PI * x).sin() * (0.3 - x)).with_dirichlet();
    let u1 = GridFunction::from_fn_1d(&g, |x| (PI * x).sin() * (0.6 - x)).with_dirichlet();
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
