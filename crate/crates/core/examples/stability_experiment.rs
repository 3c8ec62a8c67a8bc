//! Perturbed breather evolved to t = 1 with the modulation refitted along
//! the way. Runs two seeds at η and one at η/2.

use breather_lab::modulation::{fit_bound_constants, stability_batch};
use breather_lab::solver::SolverConfig;
use breather_lab::{BreatherParams, Grid};

fn main() -> breather_lab::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(4001);
    let p = BreatherParams::centered(3.0, 1.0)?;
    let grid = Grid::half_line(-240.0, n)?;
    let cfg = SolverConfig::new(grid, 1.0)?.with_records(1, 50);
    let runs = [(1e-2, 1), (1e-2, 2), (5e-3, 1)];
    let mut points = Vec::new();
    for r in stability_batch(&p, 30.0, &runs, &cfg) {
        let r = r?;
        let last = r.path.last().map(|q| (q.rho1, q.rho2)).unwrap_or_default();
        println!(
            "η = {:.0e} seed {}: sup ‖z‖ = {:.4e}, final ρ = ({:.4}, {:.4}), {:?}",
            r.eta, r.seed, r.sup_z_h2, last.0, last.1, r.verdict
        );
        points.push((r.eta, r.sup_z_h2));
    }
    let fit = fit_bound_constants(&points, p.beta(), 30.0);
    println!("A₀ = {:.3}, K = {:.3e}", fit.a0, fit.k);
    Ok(())
}
