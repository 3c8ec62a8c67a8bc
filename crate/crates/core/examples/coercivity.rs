//! Smallest constrained Rayleigh quotients of the linearized quadratic form.

use breather_lab::spectral::{coercivity_check, DiscreteForm};
use breather_lab::{BreatherParams, Grid};

fn main() -> breather_lab::Result<()> {
    let grid = Grid::new(-45.0, 45.0, 1201)?;
    for (a, b) in [(1.0, 1.0), (2.0, 1.0), (3.0, 1.0)] {
        let p = BreatherParams::centered(a, b)?;
        for t in [0.0, 0.25] {
            let form = DiscreteForm::assemble(&p, t, &grid)?;
            let r = coercivity_check(&form)?;
            println!(
                "α = {a}, β = {b}, t = {t}: min ⊥B₁,B₂ {:+.4e}  min ⊥B₁,B₂,B {:+.4e}  kernel {:.2e} {:.2e}",
                r.min_eig_constrained,
                r.min_eig_triple,
                form.kernel_quotient(0)?,
                form.kernel_quotient(1)?
            );
        }
    }
    Ok(())
}
