//! Evolves the breather on [−120, 0] with homogeneous data at x = 0 and
//! prints the conservation diagnostics.

use breather_lab::breather;
use breather_lab::solver::{conservation_report, simulate, SolverConfig};
use breather_lab::{BreatherParams, Grid, Shifts};

fn main() -> breather_lab::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2001);
    let p = BreatherParams::centered(3.0, 1.0)?;
    let grid = Grid::half_line(-120.0, n)?;
    let cfg = SolverConfig::new(grid, 0.5)?.with_records(5, 50);
    println!("dt = {:.3e}, {} steps", cfg.dt, cfg.steps());
    let u0 = breather::sample(&p.shifted(Shifts::at_distance(30.0)), &grid, 0.0);
    let traj = simulate(&cfg, &u0, &p)?;
    let c = conservation_report(&traj, 1.0)?;
    println!("drift M {:.2e}  F {:.2e}", c.drift_m, c.drift_f);
    println!("E decrease {:.2e}  H increase {:.2e}", c.monotone_e_violation, c.monotone_h_violation);
    println!("left edge max |u| {:.2e}", traj.left_edge_max);
    Ok(())
}
