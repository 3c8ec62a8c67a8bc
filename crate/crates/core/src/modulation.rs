//! Modulation fit of (ρ₁, ρ₂), BC-compatible random perturbations and the
//! stability experiment built on them.

use std::f64::consts::FRAC_PI_2;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::breather::{self, BreatherParams, Shifts};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::solver::{self, SolverConfig};

pub const MAX_NEWTON_ITERATIONS: usize = 50;
/// Convergence when `max|𝓙ⱼ| < FIT_TOLERANCE · ‖B‖_{L²}`.
pub const FIT_TOLERANCE: f64 = 1e-10;
/// Singular when `|det 𝔍| < DET_TOLERANCE · ∫B₁² ∫B₂²`.
pub const DET_TOLERANCE: f64 = 1e-10;
const MAX_HALVINGS: usize = 30;

#[derive(Clone, Debug, Serialize)]
pub struct ModulationState {
    pub rho1: f64,
    pub rho2: f64,
    /// `𝓙ⱼ = ∫(u − B)Bⱼ`, which equals `∫Bⱼ z`.
    pub residual_j: [f64; 2],
    #[serde(skip)]
    pub z: Field,
    pub z_h2: f64,
    pub newton_iters: usize,
    pub det_j: f64,
    /// `|∫Bⱼ z| / (‖Bⱼ‖‖z‖ + 1e-300)`
    pub normalized_orthogonality: [f64; 2],
}

impl ModulationState {
    pub fn shifts(&self, distance: f64) -> Shifts {
        Shifts::new(self.rho1, self.rho2, distance)
    }

    pub fn max_orthogonality(&self) -> f64 {
        self.residual_j[0].abs().max(self.residual_j[1].abs())
    }
}

struct Evaluation {
    j: [f64; 2],
    jac: [[f64; 2]; 2],
    gram: [[f64; 2]; 2],
    b: Vec<f64>,
    b_norm: f64,
    /// `½‖u − B‖²`
    misfit: f64,
}

fn evaluate(u: &Field, t: f64, p: &BreatherParams, shifts: Shifts, w: &[f64]) -> Evaluation {
    let q = p.shifted(shifts);
    let d = breather::parameter_derivatives_on(&q, u.grid(), t);
    let mut j = [0.0; 2];
    let mut gram = [[0.0; 2]; 2];
    let mut second = [[0.0; 2]; 2];
    let mut bb = 0.0;
    let mut misfit = 0.0;
    for (i, row) in d.iter().enumerate() {
        let [b, b1, b2, b11, b12, b22] = *row;
        let r = w[i] * (u.u[i] - b);
        j[0] += r * b1;
        j[1] += r * b2;
        gram[0][0] += w[i] * b1 * b1;
        gram[0][1] += w[i] * b1 * b2;
        gram[1][1] += w[i] * b2 * b2;
        second[0][0] += r * b11;
        second[0][1] += r * b12;
        second[1][1] += r * b22;
        bb += w[i] * b * b;
        misfit += 0.5 * w[i] * (u.u[i] - b).powi(2);
    }
    gram[1][0] = gram[0][1];
    second[1][0] = second[0][1];
    let jac = std::array::from_fn(|a| std::array::from_fn(|c| -gram[a][c] + second[a][c]));
    Evaluation {
        j,
        jac,
        gram,
        b: d.iter().map(|r| r[0]).collect(),
        b_norm: bb.max(0.0).sqrt(),
        misfit,
    }
}

/// Jacobian `∂ₖ𝓙ⱼ = −∫BₖBⱼ + ∫(u − B)∂ₖⱼB` at the given shifts.
pub fn modulation_jacobian(u: &Field, t: f64, p: &BreatherParams, shifts: Shifts) -> Result<[[f64; 2]; 2]> {
    let w = u.grid().simpson_weights()?;
    Ok(evaluate(u, t, p, shifts, &w).jac)
}

/// Newton solve of `𝓙₁ = 𝓙₂ = 0` for the shifts of `B(·, t; ρ₁, ρ₂ + L)`.
///
/// `𝓙` is minus the gradient of `Φ(ρ) = ½‖u − B(ρ)‖²`, so the full Newton
/// step is taken whenever `−𝔍` is positive definite and the Gauss–Newton
/// step (Gram matrix of B₁, B₂) otherwise; steps are capped and halved
/// until Φ or `|𝓙|` decreases.
pub fn fit_modulation(
    u: &Field,
    t: f64,
    p: &BreatherParams,
    distance: f64,
    guess: (f64, f64),
) -> Result<ModulationState> {
    u.validate()?;
    let w = u.grid().simpson_weights()?;
    let half = distance / 2.0;
    let check_range = |rho2: f64| {
        if rho2.abs() >= half {
            Err(Error::ShiftOutOfRange { rho2, half })
        } else {
            Ok(())
        }
    };
    let mut rho = [guess.0, guess.1];
    check_range(rho[1])?;
    let mut ev = evaluate(u, t, p, Shifts::new(rho[0], rho[1], distance), &w);
    let size = |e: &Evaluation| e.j[0].abs().max(e.j[1].abs());
    let norm = |e: &Evaluation| e.j[0].hypot(e.j[1]);
    for iter in 0..=MAX_NEWTON_ITERATIONS {
        let det = det2(&ev.jac);
        let gram_det = det2(&ev.gram);
        let scale = ev.gram[0][0] * ev.gram[1][1];
        if !(gram_det.abs() >= DET_TOLERANCE * scale) {
            return Err(Error::SingularJacobian { det });
        }
        if size(&ev) < FIT_TOLERANCE * ev.b_norm {
            if !(det.abs() >= DET_TOLERANCE * scale) {
                return Err(Error::SingularJacobian { det });
            }
            return finish(u, rho, ev, iter);
        }
        if iter == MAX_NEWTON_ITERATIONS {
            break;
        }
        let hess = [[-ev.jac[0][0], -ev.jac[0][1]], [-ev.jac[1][0], -ev.jac[1][1]]];
        let newton_ok = hess[0][0] > 0.0 && det2(&hess) > DET_TOLERANCE * scale;
        let mut step = if newton_ok { solve2(&hess, ev.j) } else { solve2(&ev.gram, ev.j) };
        // at most a quarter carrier period in ρ₁ and one envelope width in ρ₂
        let cap = (FRAC_PI_2 / p.alpha() / step[0].abs()).min(1.0 / p.beta() / step[1].abs());
        if cap < 1.0 {
            step = [step[0] * cap, step[1] * cap];
        }
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial = [rho[0] + lambda * step[0], rho[1] + lambda * step[1]];
            if trial[1].abs() < half {
                let e = evaluate(u, t, p, Shifts::new(trial[0], trial[1], distance), &w);
                if e.misfit < ev.misfit || norm(&e) < 0.5 * norm(&ev) {
                    accepted = Some((trial, e));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((trial, e)) => {
                rho = trial;
                ev = e;
            }
            None => {
                check_range(rho[1] + step[1])?;
                return Err(Error::NoConvergence {
                    iterations: iter + 1,
                    residual: size(&ev),
                });
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_NEWTON_ITERATIONS,
        residual: size(&ev),
    })
}

fn det2(m: &[[f64; 2]; 2]) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

fn solve2(m: &[[f64; 2]; 2], b: [f64; 2]) -> [f64; 2] {
    let d = det2(m);
    [(m[1][1] * b[0] - m[0][1] * b[1]) / d, (-m[1][0] * b[0] + m[0][0] * b[1]) / d]
}

fn finish(u: &Field, rho: [f64; 2], ev: Evaluation, iter: usize) -> Result<ModulationState> {
    let det = det2(&ev.jac);
    let b = Field::from_parts(*u.grid(), ev.b);
    let z = u.minus(&b);
    let z_l2 = z.l2_norm()?;
    let normalized = [
        ev.j[0].abs() / (ev.gram[0][0].sqrt() * z_l2 + 1e-300),
        ev.j[1].abs() / (ev.gram[1][1].sqrt() * z_l2 + 1e-300),
    ];
    Ok(ModulationState {
        rho1: rho[0],
        rho2: rho[1],
        residual_j: ev.j,
        z_h2: z.h2_norm()?,
        z,
        newton_iters: iter,
        det_j: det,
        normalized_orthogonality: normalized,
    })
}

pub const PERTURBATION_BUMPS: usize = 8;

/// Seeded smooth field with `z(0) = z_x(0) = 0`, rescaled to H² norm `eta`.
/// Bump centers lie in `[x_left + 10, −5]`, widths in `[0.5, 2]`.
pub fn perturbation(grid: &Grid, seed: u64, eta: f64) -> Result<Field> {
    perturbation_in(grid, grid.x_left() + 10.0, seed, eta)
}

/// Left end of the bump window used by [`stability_experiment`]: the right
/// half of the grid, so that leftward dispersion stays clear of the
/// truncated edge.
pub fn experiment_window_left(grid: &Grid) -> f64 {
    (0.5 * grid.x_left()).max(grid.x_left() + 10.0).min(-5.0 - 1e-9)
}

/// As [`perturbation`] with bump centers in `[lo, −5]`.
pub fn perturbation_in(grid: &Grid, lo: f64, seed: u64, eta: f64) -> Result<Field> {
    if !grid.is_half_line() {
        return Err(Error::InvalidGrid("perturbations live on a half-line grid".into()));
    }
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::InvalidField(format!("eta must be nonnegative, got {eta}")));
    }
    if lo >= -5.0 || lo < grid.x_left() {
        return Err(Error::InvalidGrid("perturbation window does not fit the grid".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bumps: Vec<(f64, f64, f64)> = (0..PERTURBATION_BUMPS)
        .map(|_| {
            let c = rng.random_range(lo..-5.0);
            let w = rng.random_range(0.5..2.0);
            let a = rng.random_range(-1.0..1.0);
            (c, w, a)
        })
        .collect();
    let g = |x: f64| bumps.iter().map(|&(c, w, a)| a * (-((x - c) / w).powi(2)).exp()).sum::<f64>();
    let g0 = g(0.0);
    let g1: f64 = bumps
        .iter()
        .map(|&(c, w, a)| a * (-(c / w).powi(2)).exp() * 2.0 * c / (w * w))
        .sum();
    let raw = Field::from_fn(*grid, |x| g(x) - (g0 + g1 * x) * (-x * x).exp());
    let norm = raw.h2_norm()?;
    let mut z = if eta == 0.0 || norm == 0.0 {
        Field::zeros(*grid)
    } else {
        raw.scaled(eta / norm)
    };
    let last = grid.len() - 1;
    z.u[last] = 0.0;
    Ok(z)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PathPoint {
    pub t: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub z_h2: f64,
    #[serde(rename = "detJ")]
    pub det_j: f64,
}

impl PathPoint {
    pub const COLUMNS: [&'static str; 5] = ["t", "rho1", "rho2", "z_h2", "detJ"];

    pub fn values(&self) -> [f64; 5] {
        [self.t, self.rho1, self.rho2, self.z_h2, self.det_j]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Bounded,
    Unbounded,
    /// ρ₂ reached ±L/2 or a fit failed.
    Invalid,
    BlowUp,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundFit {
    #[serde(rename = "A0")]
    pub a0: f64,
    #[serde(rename = "K")]
    pub k: f64,
}

/// Boundedness threshold for the verdict: `sup ‖z‖ ≤ VERDICT_FACTOR · η + VERDICT_FLOOR`.
pub const VERDICT_FACTOR: f64 = 10.0;
pub const VERDICT_FLOOR: f64 = 1e-6;
/// Path continuity: `|Δρ| < CONTINUITY_FACTOR · Δt · max(|δ|, |γ|)`.
pub const CONTINUITY_FACTOR: f64 = 10.0;

#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub params: BreatherParams,
    #[serde(rename = "L")]
    pub distance: f64,
    pub eta: f64,
    pub seed: u64,
    pub sup_z_h2: f64,
    /// `A₀η + Ke^{−βL}` with the fitted constants.
    pub bound_rhs: f64,
    pub bound_fit: BoundFit,
    pub verdict: Verdict,
    /// Outside β ≤ α no verdict is expected.
    pub lyapunov_regime: bool,
    pub continuous: bool,
    pub max_orthogonality: f64,
    pub min_abs_det_j: f64,
    pub failure: Option<String>,
    #[serde(skip)]
    pub path: Vec<PathPoint>,
    #[serde(skip)]
    pub initial_perturbation_h2: f64,
}

impl StabilityReport {
    /// Replaces the constants (e.g. after an ensemble fit) and recomputes
    /// the bound.
    pub fn with_bound_fit(mut self, fit: BoundFit) -> Self {
        self.bound_fit = fit;
        self.bound_rhs = fit.a0 * self.eta + fit.k * (-self.params.beta() * self.distance).exp();
        self
    }
}

/// Perturbs `B(·, 0; 0, L)` by a seeded field of H² norm `eta`, evolves it
/// and refits the modulation at every diagnostics record. Snapshots are
/// taken at the diagnostics stride.
pub fn stability_experiment(
    p: &BreatherParams,
    distance: f64,
    eta: f64,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<StabilityReport> {
    if !p.is_leftward() {
        return Err(Error::InvalidParams(
            "rightward-moving breather: unsupported (right half-line setting)".into(),
        ));
    }
    let grid = cfg.grid;
    let mut cfg = *cfg;
    cfg.snapshot_stride = cfg.diagnostics_stride;
    let b0 = breather::sample(&p.shifted(Shifts::at_distance(distance)), &grid, 0.0);
    let z0 = perturbation_in(&grid, experiment_window_left(&grid), seed, eta)?;
    let mut u0 = b0.plus(&z0);
    let last = grid.len() - 1;
    u0.u[last] = 0.0;
    let traj = solver::simulate(&cfg, &u0, p)?;

    let mut path = Vec::with_capacity(traj.times.len());
    let mut guess = (0.0, 0.0);
    let mut failure = None;
    let mut max_orth = 0.0f64;
    let mut min_det = f64::INFINITY;
    for (t, f) in traj.times.iter().zip(&traj.snapshots) {
        match fit_modulation(f, *t, p, distance, guess) {
            Ok(s) => {
                guess = (s.rho1, s.rho2);
                max_orth = max_orth.max(s.max_orthogonality());
                min_det = min_det.min(s.det_j.abs());
                path.push(PathPoint {
                    t: *t,
                    rho1: s.rho1,
                    rho2: s.rho2,
                    z_h2: s.z_h2,
                    det_j: s.det_j,
                });
            }
            Err(e) => {
                failure = Some(format!("fit failed at t = {t}: {e}"));
                break;
            }
        }
    }
    let speed = p.delta().abs().max(p.gamma().abs());
    let continuous = path.windows(2).all(|w| {
        let lim = CONTINUITY_FACTOR * (w[1].t - w[0].t) * speed;
        (w[1].rho1 - w[0].rho1).abs() < lim && (w[1].rho2 - w[0].rho2).abs() < lim
    });
    let sup = path.iter().map(|q| q.z_h2).fold(0.0, f64::max);
    let verdict = if traj.blow_up.is_some() {
        Verdict::BlowUp
    } else if failure.is_some() {
        Verdict::Invalid
    } else if sup <= VERDICT_FACTOR * eta + VERDICT_FLOOR {
        Verdict::Bounded
    } else {
        Verdict::Unbounded
    };
    if let Some(t) = traj.blow_up {
        failure.get_or_insert(format!("blow-up at t = {t}"));
    }
    let fit = fit_bound_constants(&[(eta, sup)], p.beta(), distance);
    Ok(StabilityReport {
        params: *p,
        distance,
        eta,
        seed,
        sup_z_h2: sup,
        bound_rhs: 0.0,
        bound_fit: fit,
        verdict,
        lyapunov_regime: p.is_lyapunov_admissible(),
        continuous,
        max_orthogonality: max_orth,
        min_abs_det_j: min_det,
        failure,
        path,
        initial_perturbation_h2: z0.h2_norm()?,
    }
    .with_bound_fit(fit))
}

/// Smallest-squares fit of `sup ≈ A₀η + Ke^{−βL}` over `(η, sup)` pairs at
/// one L, with both constants kept nonnegative. With a single distinct η
/// the offset is not identifiable and `K = 0`.
pub fn fit_bound_constants(points: &[(f64, f64)], beta: f64, distance: f64) -> BoundFit {
    let decay = (-beta * distance).exp();
    let n = points.len() as f64;
    if points.is_empty() {
        return BoundFit { a0: 0.0, k: 0.0 };
    }
    let mean_e = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_s = points.iter().map(|p| p.1).sum::<f64>() / n;
    let var = points.iter().map(|p| (p.0 - mean_e).powi(2)).sum::<f64>();
    let ratio_fit = || {
        let num: f64 = points.iter().map(|p| p.0 * p.1).sum();
        let den: f64 = points.iter().map(|p| p.0 * p.0).sum();
        BoundFit {
            a0: if den > 0.0 { (num / den).max(0.0) } else { 0.0 },
            k: if den > 0.0 { 0.0 } else { mean_s / decay },
        }
    };
    if var <= 1e-300 * n {
        return ratio_fit();
    }
    let cov: f64 = points.iter().map(|p| (p.0 - mean_e) * (p.1 - mean_s)).sum();
    let slope = cov / var;
    let offset = mean_s - slope * mean_e;
    if slope < 0.0 {
        return BoundFit { a0: 0.0, k: mean_s.max(0.0) / decay };
    }
    if offset < 0.0 {
        return ratio_fit();
    }
    BoundFit {
        a0: slope,
        k: offset / decay,
    }
}

/// Runs several experiments concurrently; results keep the input order.
pub fn stability_batch(
    p: &BreatherParams,
    distance: f64,
    runs: &[(f64, u64)],
    cfg: &SolverConfig,
) -> Vec<Result<StabilityReport>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = runs
            .iter()
            .map(|&(eta, seed)| s.spawn(move || stability_experiment(p, distance, eta, cfg, seed)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::InvalidSolverConfig("worker panicked".into()))))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> BreatherParams {
        BreatherParams::centered(3.0, 1.0).unwrap()
    }

    #[test]
    fn exact_breather_is_a_fixed_point() {
        let g = Grid::half_line(-80.0, 2001).unwrap();
        let p = params();
        let b = breather::sample(&p.shifted(Shifts::new(0.2, -0.3, 30.0)), &g, 0.0);
        let s = fit_modulation(&b, 0.0, &p, 30.0, (0.2, -0.3)).unwrap();
        assert_eq!(s.newton_iters, 0);
        assert!(s.z.max_abs() == 0.0);
    }

    #[test]
    fn perturbation_is_reproducible_and_admissible() {
        let g = Grid::half_line(-80.0, 2001).unwrap();
        let a = perturbation(&g, 7, 1e-2).unwrap();
        let b = perturbation(&g, 7, 1e-2).unwrap();
        assert_eq!(a.u, b.u);
        assert!((a.h2_norm().unwrap() - 1e-2).abs() < 1e-12);
        let last = g.len() - 1;
        assert_eq!(a.u[last], 0.0);
        assert!(a.derivative_at(1, last).abs() < 1e-10);
        assert_ne!(a.u, perturbation(&g, 8, 1e-2).unwrap().u);
        assert_eq!(perturbation(&g, 7, 0.0).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn bound_fit_recovers_linear_law() {
        let decay = (-30.0f64).exp();
        let pts = [(1e-2, 3e-2 + 5.0 * decay), (5e-3, 1.5e-2 + 5.0 * decay)];
        let f = fit_bound_constants(&pts, 1.0, 30.0);
        assert!((f.a0 - 3.0).abs() < 1e-9);
        assert!((f.k - 5.0).abs() < 1e-3);
        let f = fit_bound_constants(&[(1e-2, 4e-2)], 1.0, 30.0);
        assert!((f.a0 - 4.0).abs() < 1e-12 && f.k == 0.0);
    }

    #[test]
    fn rejects_rightward_breathers() {
        let p = BreatherParams::centered(1.0, 2.0).unwrap();
        let g = Grid::half_line(-60.0, 401).unwrap();
        let cfg = SolverConfig::new(g, 1e-3).unwrap();
        assert!(matches!(stability_experiment(&p, 30.0, 0.0, &cfg, 1), Err(Error::InvalidParams(_))));
    }
}
