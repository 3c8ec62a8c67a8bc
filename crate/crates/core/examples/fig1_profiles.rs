//! Breather profiles with α = 3, β = 1, x₂ = 30 at t = 0, 0.5, 1, written as
//! `x,u` CSV files into the directory given on the command line (default `fig1`).

use std::path::PathBuf;

use breather_lab::breather;
use breather_lab::cli::{fig1_params, peak};
use breather_lab::io::write_csv;
use breather_lab::Grid;

fn main() -> breather_lab::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fig1".into()));
    let p = fig1_params();
    let grid = Grid::new(-80.0, 0.0, 8001)?;
    for (i, t) in [0.0, 0.5, 1.0].into_iter().enumerate() {
        let f = breather::sample(&p, &grid, t);
        let (x, amp) = peak(&f);
        println!("t = {t:4}  peak at x = {x:8.3}  |u| = {amp:.4}");
        let rows = grid.nodes().zip(f.u.iter()).map(|(x, u)| [x, *u]);
        write_csv(&dir.join(format!("profile_{i}.csv")), &["x", "u"], rows)?;
    }
    println!("expected drift over t ∈ [0, 1]: -γ = {}", -p.gamma());
    Ok(())
}
