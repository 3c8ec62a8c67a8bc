//! M, E, F and H of the restricted breather, and the balance between their
//! change over [0, 1] and the time integral of the boundary fluxes.

use breather_lab::functionals::{exact_functionals, flux_balance_check, Derivatives};
use breather_lab::{BreatherParams, Grid, Shifts};

fn main() -> breather_lab::Result<()> {
    let p = BreatherParams::centered(3.0, 1.0)?;
    let s = Shifts::at_distance(30.0);
    let grid = Grid::half_line(-120.0, 8001)?;
    let r = exact_functionals(&p, s, &grid, 0.0)?;
    println!("M = {:.12}  (4β = {})", r.mass, 4.0 * p.beta());
    println!("E = {:.12}", r.energy);
    println!("F = {:.12}", r.second_energy);
    println!("H = {:.12}", r.lyapunov);

    for (n, nt) in [(2001, 501), (4001, 1001), (8001, 2001)] {
        let g = Grid::half_line(-120.0, n)?;
        let fb = flux_balance_check(&p, s, 0.0, 1.0, &g, nt, Derivatives::Exact)?;
        println!("n = {n:5}: res_M {:.2e} res_E {:.2e} res_F {:.2e}", fb.res_m, fb.res_e, fb.res_f);
    }
    Ok(())
}
