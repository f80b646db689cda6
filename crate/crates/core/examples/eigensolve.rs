//! Eigenpairs of -d²/dx² - v on (0, 1) for a flank-profile potential with
//! zeros at 0.3 and 0.7. The third mode reproduces the profile's sign pattern.

use bilinear_steer::profile::FlankProfile;
use bilinear_steer::spectral::{potential_from_target, solve_1d};
use bilinear_steer::Grid1D;

fn main() -> bilinear_steer::Result<()> {
    let g = Grid1D::unit(400)?;
    let w = FlankProfile::default().build(&g, &[0.3, 0.7])?;
    let v = potential_from_target(&w, Some(3.0 * g.dx()), None)?;
    let basis = solve_1d(&v, 5)?;
    for k in 1..=basis.len() {
        println!("k = {k}  lambda = {:.9}  zeros = {:?}", basis.lambda(k), basis.zeros(k));
    }
    Ok(())
}
