//! Static log control between two same-pattern states over shrinking horizons.

use std::f64::consts::PI;

use bilinear_steer::grid::relative_l2;
use bilinear_steer::solver::{simulate, SimOptions};
use bilinear_steer::synthesis::{static_log_control, LOG_BAND};
use bilinear_steer::{ControlSchedule, Grid1D, GridFunction};

fn main() -> bilinear_steer::Result<()> {
    let g = Grid1D::unit(200)?;
    let u0 = GridFunction::from_fn_1d(&g, |x| 2.0 * (2.0 * PI * x).sin() * (1.0 + 0.1 * x)).with_dirichlet();
    let u1 = GridFunction::from_fn_1d(&g, |x| (2.0 * PI * x).sin()).with_dirichlet();
    for t in [0.2, 0.1, 0.05, 0.01, 0.001] {
        let stage = static_log_control(&u0, &u1, t, LOG_BAND)?;
        let traj = simulate(&u0, &ControlSchedule::single(stage), &SimOptions::new(1e-4))?;
        println!(
            "T = {t:<6} relative error = {:.6}",
            relative_l2(traj.final_state(), &u1)?
        );
    }
    Ok(())
}
