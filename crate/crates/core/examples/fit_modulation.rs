//! Recovers the modulation shifts of a sampled breather from a poor guess.

use breather_lab::breather;
use breather_lab::modulation::fit_modulation;
use breather_lab::{BreatherParams, Grid, Shifts};

fn main() -> breather_lab::Result<()> {
    let p = BreatherParams::centered(3.0, 1.0)?;
    let grid = Grid::half_line(-120.0, 4001)?;
    let truth = (0.35, -2.1);
    let u = breather::sample(&p.shifted(Shifts::new(truth.0, truth.1, 30.0)), &grid, 0.4);
    let s = fit_modulation(&u, 0.4, &p, 30.0, (0.0, -1.6))?;
    println!("truth ({}, {})", truth.0, truth.1);
    println!("fit   ({:.12}, {:.12}) after {} iterations", s.rho1, s.rho2, s.newton_iters);
    println!("∫B₁z = {:.2e}, ∫B₂z = {:.2e}, det 𝔍 = {:.3e}", s.residual_j[0], s.residual_j[1], s.det_j);
    Ok(())
}
