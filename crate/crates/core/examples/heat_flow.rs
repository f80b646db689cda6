//! Uncontrolled heat flow of sin(πx): the L² norm decays like e^{-π²t}.

use std::f64::consts::PI;

use bilinear_steer::grid::l2_norm;
use bilinear_steer::solver::{simulate, uniform_times, SimOptions};
use bilinear_steer::{ControlSchedule, Grid1D, GridFunction, Stage};

fn main() -> bilinear_steer::Result<()> {
    let g = Grid1D::unit(200)?;
    let u0 = GridFunction::from_fn_1d(&g, |x| (PI * x).sin()).with_dirichlet();
    let t = 0.1;
    let stage = Stage::new(GridFunction::zeros(u0.grid().clone()), t, "heat")?;
    let opts = SimOptions::new(1e-4).with_record_times(uniform_times(t, 5));
    let traj = simulate(&u0, &ControlSchedule::single(stage), &opts)?;
    let n0 = l2_norm(&u0);
    for (time, u) in traj.times.iter().zip(&traj.snapshots) {
        println!(
            "t = {time:.3}  norm ratio = {:.9}  e^-pi^2 t = {:.9}",
            l2_norm(u) / n0,
            (-PI * PI * time).exp()
        );
    }
    println!("max principle: {}", traj.max_principle().passed());
    Ok(())
}
