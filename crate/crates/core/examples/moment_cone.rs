//! Moment cone profiles for one and two change points, with the assumption
//! diagnostics and the residual as h halves.

use bilinear_steer::spectral::solve_1d;
use bilinear_steer::synthesis::{
    mode_off_span_residual, point_rank_ratio, select_probe_point, solve_moment_cone, MomentProblemSpec,
};
use bilinear_steer::{Grid1D, GridFunction};

fn main() -> bilinear_steer::Result<()> {
    let g = Grid1D::unit(800)?;
    let basis = solve_1d(&GridFunction::from_fn_1d(&g, |x| 4.0 * x), 6)?;
    for points in [vec![0.4], vec![0.3, 0.65]] {
        let k = points.len() + 1;
        println!("points {points:?}");
        println!("  sigma ratio {:.3e}", point_rank_ratio(&basis, &points));
        println!(
            "  mode-{k} residual outside the span {:.3e}",
            mode_off_span_residual(&basis, &points, k)
        );
        let probe = select_probe_point(&basis, &points, k, 64)?.s;
        for h in [0.02, 0.01, 0.005] {
            let spec = MomentProblemSpec::new(0, basis.clone(), points.clone(), probe, h, 1)?;
            let sol = solve_moment_cone(&spec)?;
            println!(
                "  h = {h:<6} probe = {probe:.4} payoff = {:.6} max residual = {:.3e}",
                sol.payoff,
                sol.max_residual()
            );
        }
    }
    Ok(())
}
