//! Method-of-lines RK4 integrator for mKdV on `[x_left, 0]` with
//! `u(0) = u_x(0) = 0`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functionals::{self, FunctionalReport};
use crate::grid::{Field, Grid};
use crate::breather::BreatherParams;

/// `dt ≤ cfl_safety · dx³ / CFL_DIVISOR`
pub const CFL_DIVISOR: f64 = 4.0;
pub const DEFAULT_CFL: f64 = 0.9;
pub const MAX_STEPS: f64 = 1e8;
/// Boundary data is considered homogeneous below this.
pub const BOUNDARY_TOLERANCE: f64 = 1e-8;
/// Nodes monitored at the truncated left edge.
pub const LEFT_EDGE_NODES: usize = 10;
pub const LEFT_EDGE_TOLERANCE: f64 = 1e-10;
/// Values beyond this are treated as blow-up.
pub const BLOW_UP_LEVEL: f64 = 1e6;

const D3: [f64; 7] = [0.125, -1.0, 1.625, 0.0, -1.625, 1.0, -0.125];
const D1: [f64; 5] = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
const LEFT_GHOSTS: usize = 3;
const RIGHT_GHOSTS: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolverConfig {
    pub grid: Grid,
    pub dt: f64,
    pub t_final: f64,
    pub cfl_safety: f64,
    pub snapshot_stride: usize,
    pub diagnostics_stride: usize,
    /// Only zero is supported.
    pub boundary_value: f64,
    /// Only zero is supported.
    pub boundary_slope: f64,
}

impl SolverConfig {
    /// Largest admissible step that divides `t_final` evenly.
    pub fn with_cfl(grid: Grid, t_final: f64, cfl_safety: f64) -> Result<Self> {
        if !(cfl_safety > 0.0 && cfl_safety <= 1.0) {
            return Err(Error::InvalidSolverConfig(format!(
                "cfl_safety must lie in (0, 1], got {cfl_safety}"
            )));
        }
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::InvalidSolverConfig(format!("t_final must be positive, got {t_final}")));
        }
        let limit = Self::dt_limit(&grid, cfl_safety);
        let steps = (t_final / limit).ceil().max(1.0);
        let cfg = Self {
            grid,
            dt: t_final / steps,
            t_final,
            cfl_safety,
            snapshot_stride: usize::MAX,
            diagnostics_stride: usize::MAX,
            boundary_value: 0.0,
            boundary_slope: 0.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn new(grid: Grid, t_final: f64) -> Result<Self> {
        Self::with_cfl(grid, t_final, DEFAULT_CFL)
    }

    pub fn dt_limit(grid: &Grid, cfl_safety: f64) -> f64 {
        cfl_safety * grid.dx().powi(3) / CFL_DIVISOR
    }

    /// Sets both strides so that roughly `count` records are kept.
    pub fn with_records(mut self, snapshots: usize, diagnostics: usize) -> Self {
        let steps = self.steps();
        self.snapshot_stride = (steps / snapshots.max(1)).max(1);
        self.diagnostics_stride = (steps / diagnostics.max(1)).max(1);
        self
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !self.grid.is_half_line() {
            return Err(Error::InvalidSolverConfig("solver grid must end at x = 0".into()));
        }
        if self.boundary_value != 0.0 || self.boundary_slope != 0.0 {
            return Err(Error::NonHomogeneousBoundary {
                value: self.boundary_value,
                slope: self.boundary_slope,
            });
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::InvalidSolverConfig(format!(
                "cfl_safety must lie in (0, 1], got {}",
                self.cfl_safety
            )));
        }
        if !(self.dt > 0.0 && self.t_final > 0.0 && self.dt.is_finite() && self.t_final.is_finite()) {
            return Err(Error::InvalidSolverConfig("dt and t_final must be positive".into()));
        }
        let limit = Self::dt_limit(&self.grid, self.cfl_safety);
        if self.dt > limit * (1.0 + 1e-12) {
            return Err(Error::CflViolation { dt: self.dt, limit });
        }
        if self.t_final / self.dt > MAX_STEPS {
            return Err(Error::InvalidSolverConfig(format!(
                "t_final / dt = {:e} exceeds {MAX_STEPS:e}",
                self.t_final / self.dt
            )));
        }
        let steps = self.t_final / self.dt;
        if (steps - steps.round()).abs() > 1e-6 * steps.max(1.0) {
            return Err(Error::InvalidSolverConfig("t_final must be a multiple of dt".into()));
        }
        if self.snapshot_stride == 0 || self.diagnostics_stride == 0 {
            return Err(Error::InvalidSolverConfig("strides must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DiagnosticsRow {
    pub report: FunctionalReport,
    pub h2_norm: f64,
    pub uxx_l2: f64,
    /// Running `∫ τ_E(0, s) ds`.
    pub boundary_flux_integral: f64,
}

impl DiagnosticsRow {
    pub const COLUMNS: [&'static str; 10] = [
        "t",
        "mass",
        "energy",
        "second_energy",
        "lyapunov",
        "tau_M",
        "tau_E",
        "tau_F",
        "h2_norm",
        "uxx_l2",
    ];

    pub fn values(&self) -> [f64; 10] {
        let r = self.report.values();
        [r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], self.h2_norm, self.uxx_l2]
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub config: SolverConfig,
    pub params: BreatherParams,
    pub times: Vec<f64>,
    pub snapshots: Vec<Field>,
    pub diagnostics: Vec<DiagnosticsRow>,
    /// Time of the first non-finite or runaway state.
    pub blow_up: Option<f64>,
    /// Largest `|u|` seen on the leftmost nodes.
    pub left_edge_max: f64,
}

impl Trajectory {
    pub fn final_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn left_edge_ok(&self) -> bool {
        self.left_edge_max < LEFT_EDGE_TOLERANCE
    }
}

/// Reusable buffers for the right-hand side.
struct Workspace {
    ext: Vec<f64>,
    cube: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        let len = n + LEFT_GHOSTS + RIGHT_GHOSTS;
        Self {
            ext: vec![0.0; len],
            cube: vec![0.0; len],
        }
    }

    /// `out = −(D3 u + D1 u³)`; the boundary node stays fixed.
    fn rhs(&mut self, u: &[f64], h: f64, out: &mut [f64]) {
        let n = u.len();
        let g = LEFT_GHOSTS;
        self.ext[g..g + n].copy_from_slice(u);
        self.ext[g + n - 1] = 0.0;
        let (u1, u2, u3) = (u[n - 2], u[n - 3], u[n - 4]);
        self.ext[g + n] = 6.0 * u1 - 2.0 * u2 + u3 / 3.0;
        self.ext[g + n + 1] = 40.0 * u1 - 15.0 * u2 + 8.0 / 3.0 * u3;
        for (c, &v) in self.cube.iter_mut().zip(&self.ext) {
            *c = v * v * v;
        }
        let s3 = 1.0 / (h * h * h);
        let s1 = 1.0 / h;
        for i in 0..n - 1 {
            let c = g + i;
            let e = &self.ext[c - 3..=c + 3];
            let q = &self.cube[c - 2..=c + 2];
            let d3 = D3[0] * (e[0] - e[6]) + D3[1] * (e[1] - e[5]) + D3[2] * (e[2] - e[4]);
            let d1 = D1[3] * (q[3] - q[1]) + D1[4] * (q[4] - q[0]);
            out[i] = -(d3 * s3 + d1 * s1);
        }
        out[n - 1] = 0.0;
    }
}

/// Right-hand side `−∂ₓ(u_xx + u³)` with the ghost closure used by the solver.
pub fn rhs(f: &Field) -> Result<Field> {
    f.validate()?;
    let n = f.grid().len();
    let mut ws = Workspace::new(n);
    let mut out = vec![0.0; n];
    ws.rhs(&f.u, f.grid().dx(), &mut out);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::BlowUp { t: 0.0 });
    }
    Ok(Field::from_parts(*f.grid(), out))
}

fn check_initial(cfg: &SolverConfig, u0: &Field) -> Result<()> {
    if u0.grid() != &cfg.grid {
        return Err(Error::InvalidSolverConfig("initial data lives on a different grid".into()));
    }
    u0.validate()?;
    let last = cfg.grid.len() - 1;
    let value = u0.u[last];
    let slope = u0.derivative_at(1, last);
    if value.abs() > BOUNDARY_TOLERANCE || slope.abs() > BOUNDARY_TOLERANCE {
        return Err(Error::NonHomogeneousBoundary { value, slope });
    }
    Ok(())
}

fn diagnostics_row(u: &Field, p: &BreatherParams, t: f64, flux: f64) -> Result<DiagnosticsRow> {
    let report = functionals::evaluate_functionals(u, p)?.at_time(t);
    let uxx = u.derivative(2);
    let sq: Vec<f64> = uxx.iter().map(|v| v * v).collect();
    Ok(DiagnosticsRow {
        report,
        h2_norm: u.h2_norm()?,
        uxx_l2: u.grid().integrate(&sq)?.sqrt(),
        boundary_flux_integral: flux,
    })
}

fn tau_e_at_boundary(u: &Field) -> f64 {
    functionals::right_boundary_derivatives(u).tau_e()
}

/// Classical RK4. Blow-up stops the run and is flagged on the trajectory.
/// `p` only enters the Lyapunov combination in the diagnostics.
pub fn simulate(cfg: &SolverConfig, u0: &Field, p: &BreatherParams) -> Result<Trajectory> {
    cfg.validate()?;
    check_initial(cfg, u0)?;
    let grid = cfg.grid;
    let n = grid.len();
    let h = grid.dx();
    let dt = cfg.dt;
    let steps = cfg.steps();

    let mut u = u0.u.clone();
    u[n - 1] = 0.0;
    let mut ws = Workspace::new(n);
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut stage = vec![0.0; n];

    let edge = LEFT_EDGE_NODES.min(n);
    let edge_max = |u: &[f64]| u[..edge].iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let first = Field::from_parts(grid, u.clone());
    let mut tau_prev = tau_e_at_boundary(&first);
    let mut flux = 0.0;
    let mut traj = Trajectory {
        config: *cfg,
        params: *p,
        times: vec![0.0],
        diagnostics: vec![diagnostics_row(&first, p, 0.0, 0.0)?],
        snapshots: vec![first],
        blow_up: None,
        left_edge_max: edge_max(&u),
    };
    let mut last_diag = 0;
    let mut last_snap = 0;

    for step in 1..=steps {
        let t = step as f64 * dt;
        ws.rhs(&u, h, &mut k1);
        for i in 0..n {
            stage[i] = u[i] + 0.5 * dt * k1[i];
        }
        ws.rhs(&stage, h, &mut k2);
        for i in 0..n {
            stage[i] = u[i] + 0.5 * dt * k2[i];
        }
        ws.rhs(&stage, h, &mut k3);
        for i in 0..n {
            stage[i] = u[i] + dt * k3[i];
        }
        ws.rhs(&stage, h, &mut k4);
        let mut finite = true;
        for i in 0..n {
            u[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            finite &= u[i].is_finite() && u[i].abs() < BLOW_UP_LEVEL;
        }
        if !finite {
            traj.blow_up = Some(t);
            break;
        }
        traj.left_edge_max = traj.left_edge_max.max(edge_max(&u));

        let current = Field::from_parts(grid, u.clone());
        let tau = tau_e_at_boundary(&current);
        flux += 0.5 * dt * (tau + tau_prev);
        tau_prev = tau;

        let is_last = step == steps;
        let want_snap = step % cfg.snapshot_stride == 0 || is_last;
        let want_diag = step % cfg.diagnostics_stride == 0 || is_last;
        if want_diag && last_diag != step {
            traj.diagnostics.push(diagnostics_row(&current, p, t, flux)?);
            last_diag = step;
        }
        if want_snap && last_snap != step {
            traj.times.push(t);
            traj.snapshots.push(current);
            last_snap = step;
        }
    }
    Ok(traj)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConservationReport {
    pub drift_m: f64,
    pub drift_e: f64,
    pub drift_f: f64,
    pub drift_h: f64,
    /// Largest drop of E below its running maximum.
    pub monotone_e_violation: f64,
    /// Largest rise of H above its running minimum.
    pub monotone_h_violation: f64,
    /// `min_t (F[u₀] + C₂‖u₀‖¹⁰ − ¼‖u_xx(t)‖²)`
    pub apriori_margin: f64,
    pub c2: f64,
    /// Smallest C₂ keeping the margin nonnegative.
    pub c2_required: f64,
    /// `|E(T) − E(0) − ∫τ_E|` normalized like the drifts.
    pub energy_flux_residual: f64,
}

/// Drifts are `max_t |X(t) − X(0)| / max(|X(0)|, 1)`; monotonicity
/// violations use the same normalization.
pub fn conservation_report(traj: &Trajectory, c2: f64) -> Result<ConservationReport> {
    let d = &traj.diagnostics;
    let Some(first) = d.first() else {
        return Err(Error::InvalidSolverConfig("empty trajectory".into()));
    };
    let r0 = first.report;
    let norm = |x: f64| x.abs().max(1.0);
    let drift = |f: fn(&FunctionalReport) -> f64| {
        let x0 = f(&r0);
        d.iter().map(|row| (f(&row.report) - x0).abs()).fold(0.0, f64::max) / norm(x0)
    };
    let mut e_max = f64::NEG_INFINITY;
    let mut h_min = f64::INFINITY;
    let mut ve = 0.0f64;
    let mut vh = 0.0f64;
    for row in d {
        e_max = e_max.max(row.report.energy);
        h_min = h_min.min(row.report.lyapunov);
        ve = ve.max(e_max - row.report.energy);
        vh = vh.max(row.report.lyapunov - h_min);
    }
    let m0 = traj.snapshots.first().map(|f| f.l2_norm()).transpose()?.unwrap_or(0.0);
    let m10 = m0.powi(10);
    let mut margin = f64::INFINITY;
    let mut need = 0.0f64;
    for row in d {
        let q = 0.25 * row.uxx_l2 * row.uxx_l2;
        margin = margin.min(r0.second_energy + c2 * m10 - q);
        if m10 > 0.0 {
            need = need.max((q - r0.second_energy) / m10);
        }
    }
    let last = d.last().unwrap_or(first);
    Ok(ConservationReport {
        drift_m: drift(|r| r.mass),
        drift_e: drift(|r| r.energy),
        drift_f: drift(|r| r.second_energy),
        drift_h: drift(|r| r.lyapunov),
        monotone_e_violation: ve / norm(r0.energy),
        monotone_h_violation: vh / norm(r0.lyapunov),
        apriori_margin: margin,
        c2,
        c2_required: need.max(0.0),
        energy_flux_residual: (last.report.energy - r0.energy - last.boundary_flux_integral).abs()
            / norm(r0.energy),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> BreatherParams {
        BreatherParams::centered(3.0, 1.0).unwrap()
    }

    #[test]
    fn ghosts_reproduce_admissible_quartics() {
        // p(s) = a s² + b s³ + c s⁴ in units of h
        let p = |s: f64| 0.7 * s * s - 1.3 * s.powi(3) + 0.4 * s.powi(4);
        let (u1, u2, u3) = (p(-1.0), p(-2.0), p(-3.0));
        assert!((6.0 * u1 - 2.0 * u2 + u3 / 3.0 - p(1.0)).abs() < 1e-12);
        assert!((40.0 * u1 - 15.0 * u2 + 8.0 / 3.0 * u3 - p(2.0)).abs() < 1e-11);
    }

    #[test]
    fn rhs_is_exact_on_admissible_quartics() {
        // u = x²(x + 1)² vanishes to first order at 0; u_t = −(u_xxx + 3u²u_x)
        let g = Grid::half_line(-1.0, 41).unwrap();
        let u = |x: f64| x * x * (x + 1.0) * (x + 1.0);
        let du = |x: f64| 2.0 * x * (x + 1.0) * (2.0 * x + 1.0);
        let d3u = |x: f64| 24.0 * x + 12.0;
        let f = Field::from_fn(g, u);
        let r = rhs(&f).unwrap();
        for i in 3..g.len() - 1 {
            let x = g.node(i);
            let want = -(d3u(x) + 3.0 * u(x) * u(x) * du(x));
            // u³ is degree 12, so only the linear part is exact
            assert!((r.u[i] - want).abs() < 0.05, "{i} {} {want}", r.u[i]);
        }
        let lin = Field::from_fn(g, |x| 1e-6 * u(x));
        let r = rhs(&lin).unwrap();
        for i in 3..g.len() - 1 {
            assert!((r.u[i] + 1e-6 * d3u(g.node(i))).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = Grid::half_line(-10.0, 101).unwrap();
        let cfg = SolverConfig::new(g, 1e-3).unwrap().with_records(2, 2);
        let tr = simulate(&cfg, &Field::zeros(g), &params()).unwrap();
        assert!(tr.snapshots.iter().all(|f| f.max_abs() == 0.0));
        let r = conservation_report(&tr, 1.0).unwrap();
        assert_eq!((r.drift_m, r.drift_f, r.monotone_e_violation), (0.0, 0.0, 0.0));
    }

    #[test]
    fn rejects_large_steps_and_inhomogeneous_data() {
        let g = Grid::half_line(-10.0, 101).unwrap();
        let mut cfg = SolverConfig::new(g, 1e-3).unwrap();
        cfg.dt *= 2.0;
        assert!(matches!(cfg.validate(), Err(Error::CflViolation { .. })));
        let mut cfg = SolverConfig::new(g, 1e-3).unwrap();
        cfg.boundary_value = 0.1;
        assert!(matches!(cfg.validate(), Err(Error::NonHomogeneousBoundary { .. })));
        let cfg = SolverConfig::new(g, 1e-3).unwrap();
        let u0 = Field::from_fn(g, |x| (-(x + 0.5) * (x + 0.5)).exp());
        assert!(matches!(simulate(&cfg, &u0, &params()), Err(Error::NonHomogeneousBoundary { .. })));
    }

    #[test]
    fn times_increase_and_end_at_t_final() {
        let g = Grid::half_line(-10.0, 101).unwrap();
        let cfg = SolverConfig::new(g, 2e-3).unwrap().with_records(3, 5);
        let u0 = Field::from_fn(g, |x| 0.1 * (-(x + 5.0) * (x + 5.0)).exp());
        let tr = simulate(&cfg, &u0, &params()).unwrap();
        assert!(tr.times.windows(2).all(|w| w[0] < w[1]));
        assert!((tr.final_time() - 2e-3).abs() < 1e-15);
        assert!((tr.diagnostics.last().unwrap().report.t - 2e-3).abs() < 1e-15);
    }
}
