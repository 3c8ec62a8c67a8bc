//! Second-order expansion of H around the breather: the cubic remainder for
//! shrinking perturbations and the boundary terms of the first variation.

use breather_lab::functionals::lyapunov_expansion_check;
use breather_lab::{BreatherParams, Field, Grid, Shifts};

fn main() -> breather_lab::Result<()> {
    let p = BreatherParams::centered(1.0, 1.0)?;
    let s = Shifts::at_distance(4.0);
    let grid = Grid::half_line(-40.0, 8001)?;
    let shape = Field::from_fn(grid, |x| x.sin() * (-(x + 3.0).powi(2) / 8.0).exp());
    let mut prev = None;
    for eps in [1e-1, 1e-2, 1e-3] {
        let e = lyapunov_expansion_check(&p, s, 0.0, &shape.scaled(eps))?;
        let ratio = prev.map(|r: f64| r / e.remainder_n.abs());
        println!(
            "ε = {eps:.0e}: remainder {:+.3e}  boundary {:+.3e}  ratio {}",
            e.remainder_n,
            e.rhs_boundary,
            ratio.map_or("-".into(), |r| format!("{r:.1}"))
        );
        prev = Some(e.remainder_n.abs());
    }
    Ok(())
}
