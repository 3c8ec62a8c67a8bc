//! Decay of the breather traces at x = 0 as the breather moves away.

use breather_lab::breather::boundary_traces;
use breather_lab::{BreatherParams, Shifts};

fn main() -> breather_lab::Result<()> {
    let p = BreatherParams::centered(3.0, 1.0)?;
    println!("{:>5} {:>12} {:>12}", "L", "max|trace|", "ratio");
    for l in [10.0, 20.0, 30.0, 40.0, 50.0, 60.0] {
        let tr = boundary_traces(&p, Shifts::at_distance(l), 0.0);
        println!("{l:>5} {:>12.4e} {:>12.4}", tr.max_abs, tr.decay_ratio);
    }
    Ok(())
}
