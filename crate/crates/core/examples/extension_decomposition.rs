//! Splitting of the full-line form of the extended perturbation into its
//! half-line part and the exponentially small remainder.

use breather_lab::functionals::extension_decomposition;
use breather_lab::modulation::perturbation;
use breather_lab::{BreatherParams, Grid, Shifts};

fn main() -> breather_lab::Result<()> {
    let p = BreatherParams::centered(1.0, 1.0)?;
    for l in [20.0, 30.0, 40.0] {
        let grid = Grid::half_line(-80.0, 4001)?;
        let z = perturbation(&grid, 3, 1e-2)?;
        let r = extension_decomposition(&z, &p, Shifts::at_distance(l), 0.0, 3.0 * l)?;
        println!(
            "L = {l}: Q̃ = {:+.6e}  Q₋ = {:+.6e}  𝓔 = {:+.3e}  𝓔·e^(βL/2) = {:.3e}",
            r.q_tilde, r.q_half, r.err_e, r.bound_constant
        );
    }
    Ok(())
}
