//! Config-driven command runner: executes one command, writes its report
//! and data files, and maps the outcome to an exit code.
//!
//! Exit codes: 0 all checks pass, 1 a check failed, 2 usage or config
//! error, 3 numerical blow-up.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::breather::{self, BoundaryTraces, BreatherParams, IdentityResiduals};
use crate::config::{Command, RunConfig};
use crate::error::{Error, Result};
use crate::functionals::{self, FluxBalance, FunctionalReport};
use crate::grid::{Field, Grid};
use crate::io::{self, Snapshots};
use crate::modulation::{self, ModulationState, PathPoint, StabilityReport, Verdict};
use crate::solver::{self, ConservationReport, DiagnosticsRow};
use crate::spectral::{self, CoercivityReport, DiscreteForm};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_BLOW_UP: i32 = 3;

/// Result of a completed command.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub command: Command,
    pub failures: Vec<String>,
    pub blow_up: bool,
    pub report: PathBuf,
    pub artifacts: Vec<PathBuf>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && !self.blow_up
    }

    pub fn exit_code(&self) -> i32 {
        if self.blow_up {
            EXIT_BLOW_UP
        } else if self.failures.is_empty() {
            EXIT_PASS
        } else {
            EXIT_CHECK_FAILED
        }
    }
}

pub fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::BlowUp { .. } => EXIT_BLOW_UP,
        Error::NoConvergence { .. }
        | Error::SingularJacobian { .. }
        | Error::ShiftOutOfRange { .. }
        | Error::Eigensolver(_) => EXIT_CHECK_FAILED,
        _ => EXIT_USAGE,
    }
}

/// One-line reason for the error stream.
pub fn reason(e: &Error) -> String {
    let s = match e {
        Error::Config(m) | Error::InvalidParams(m) => m.clone(),
        other => other.to_string(),
    };
    s.replace('\n', " ")
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    command: Command,
    pass: bool,
    failures: &'a [String],
    result: &'a T,
    config: &'a BTreeMap<String, String>,
}

struct Run<'a> {
    cfg: &'a RunConfig,
    failures: Vec<String>,
    blow_up: bool,
    artifacts: Vec<PathBuf>,
}

impl<'a> Run<'a> {
    fn new(cfg: &'a RunConfig) -> Self {
        Self {
            cfg,
            failures: Vec::new(),
            blow_up: false,
            artifacts: Vec::new(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.cfg.output.join(name)
    }

    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(msg());
        }
    }

    fn csv<const N: usize>(&mut self, name: &str, header: &[&str; N], rows: impl IntoIterator<Item = [f64; N]>) -> Result<()> {
        let p = self.path(name);
        io::write_csv(&p, header, rows)?;
        self.artifacts.push(p);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let p = self.path(name);
        io::write_json(&p, value)?;
        self.artifacts.push(p);
        Ok(())
    }

    fn finish<T: Serialize>(mut self, result: &T) -> Result<Outcome> {
        let report = self.path("report.json");
        io::write_json(
            &report,
            &Report {
                command: self.cfg.command,
                pass: self.failures.is_empty() && !self.blow_up,
                failures: &self.failures,
                result,
                config: &self.cfg.resolved,
            },
        )?;
        self.artifacts.push(report.clone());
        Ok(Outcome {
            command: self.cfg.command,
            failures: self.failures,
            blow_up: self.blow_up,
            report,
            artifacts: self.artifacts,
        })
    }
}

/// Executes the configured command.
pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    match cfg.command {
        Command::VerifyIdentities => verify_identities(cfg),
        Command::Traces => traces(cfg),
        Command::Functionals => functionals_cmd(cfg),
        Command::Simulate => simulate(cfg),
        Command::Fit => fit(cfg),
        Command::Stability => stability(cfg),
        Command::Coercivity => coercivity(cfg),
        Command::Plot => plot(cfg),
    }
}

/// Loads, executes and reports; returns the process exit code.
pub fn run(config_path: &Path, overrides: &[String]) -> i32 {
    let outcome = RunConfig::load(config_path, overrides).and_then(|cfg| execute(&cfg));
    match outcome {
        Ok(o) => {
            if let Some(first) = o.failures.first() {
                eprintln!("{}", first.replace('\n', " "));
            } else if o.blow_up {
                eprintln!("numerical blow-up");
            }
            o.exit_code()
        }
        Err(e) => {
            eprintln!("{}", reason(&e));
            error_exit_code(&e)
        }
    }
}

#[derive(Serialize)]
struct IdentitySummary {
    points: usize,
    max: IdentityResiduals,
    max_abs: f64,
}

fn uniform(rng: &mut ChaCha8Rng, (a, b): (f64, f64)) -> f64 {
    a + (b - a) * rng.random::<f64>()
}

fn verify_identities(cfg: &RunConfig) -> Result<Outcome> {
    let p = cfg.params()?;
    let mut run = Run::new(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.sample_seed);
    let mut rows = Vec::with_capacity(cfg.samples);
    let mut max = [0.0f64; 5];
    for _ in 0..cfg.samples {
        let x = uniform(&mut rng, cfg.x_range);
        let t = uniform(&mut rng, cfg.t_range);
        let r = breather::identity_residuals(&p, x, t);
        let v = [r.r_pde, r.r_bt, r.r_bxt, r.r_g, r.r_bt_routes];
        for (m, v) in max.iter_mut().zip(v) {
            *m = m.max(v.abs());
        }
        rows.push([x, t, v[0], v[1], v[2], v[3], v[4]]);
    }
    run.csv("identities.csv", &["x", "t", "r_pde", "r_bt", "r_bxt", "r_g", "r_bt_routes"], rows)?;
    let max = IdentityResiduals {
        r_pde: max[0],
        r_bt: max[1],
        r_bxt: max[2],
        r_g: max[3],
        r_bt_routes: max[4],
    };
    let tol = cfg.tolerances.identity;
    run.check(max.max_abs() < tol, || format!("identity residual {:e} exceeds {tol:e}", max.max_abs()));
    run.finish(&IdentitySummary {
        points: cfg.samples,
        max_abs: max.max_abs(),
        max,
    })
}

#[derive(Serialize)]
struct TraceSummary {
    t: f64,
    envelope: f64,
    traces: BoundaryTraces,
}

fn traces(cfg: &RunConfig) -> Result<Outcome> {
    let p = cfg.params()?;
    let mut run = Run::new(cfg);
    let tr = breather::boundary_traces(&p, cfg.shifts(), cfg.t);
    let rows = (0..3).flat_map(|j| (0..4).map(move |k| (j, k))).map(|(j, k)| [j as f64, k as f64, tr.trace[j][k]]);
    run.csv("traces.csv", &["j", "k", "value"], rows)?;
    let tol = cfg.tolerances.trace;
    run.check(tr.decay_ratio <= tol, || {
        format!("trace envelope ratio {:e} exceeds {tol:e}", tr.decay_ratio)
    });
    run.finish(&TraceSummary {
        t: cfg.t,
        envelope: (-p.beta() * cfg.distance / 2.0).exp(),
        traces: tr,
    })
}

#[derive(Serialize)]
struct FunctionalSummary {
    exact: FunctionalReport,
    finite_difference: FunctionalReport,
    flux_balance: FluxBalance,
}

fn functionals_cmd(cfg: &RunConfig) -> Result<Outcome> {
    let p = cfg.params()?;
    let grid = cfg.grid.grid()?;
    let shifts = cfg.shifts();
    let mut run = Run::new(cfg);
    let q = p.shifted(shifts);
    let exact = functionals::exact_functionals(&p, shifts, &grid, cfg.t)?;
    let fd = functionals::evaluate_functionals(&breather::sample(&q, &grid, cfg.t), &p)?.at_time(cfg.t);
    let flux = functionals::flux_balance_check(&p, shifts, cfg.t0, cfg.t1, &grid, cfg.time_points, cfg.derivatives)?;
    let records = cfg.solver.diagnostics.max(1);
    let mut rows = Vec::with_capacity(records + 1);
    for i in 0..=records {
        let t = cfg.t0 + (cfg.t1 - cfg.t0) * i as f64 / records as f64;
        rows.push(functionals::exact_functionals(&p, shifts, &grid, t)?.values());
    }
    run.csv("functionals.csv", &FunctionalReport::COLUMNS, rows)?;
    let tol = cfg.tolerances.flux;
    run.check(flux.max_residual() < tol, || {
        format!("flux balance residual {:e} exceeds {tol:e}", flux.max_residual())
    });
    run.finish(&FunctionalSummary {
        exact,
        finite_difference: fd,
        flux_balance: flux,
    })
}

/// Breather at distance L with the configured shifts, plus the first
/// configured perturbation.
fn initial_data(cfg: &RunConfig, p: &BreatherParams, grid: &Grid) -> Result<Field> {
    let b = breather::sample(&p.shifted(cfg.shifts()), grid, 0.0);
    let z = modulation::perturbation_in(grid, modulation::experiment_window_left(grid), cfg.seed[0], cfg.eta[0])?;
    let mut u = b.plus(&z);
    let last = grid.len() - 1;
    u.u[last] = 0.0;
    Ok(u)
}

#[derive(Serialize)]
struct SimulationSummary {
    dt: f64,
    steps: usize,
    final_time: f64,
    blow_up: Option<f64>,
    left_edge_max: f64,
    conservation: Option<ConservationReport>,
}

fn simulate(cfg: &RunConfig) -> Result<Outcome> {
    let p = cfg.params()?;
    let scfg = cfg.solver_config()?;
    let u0 = initial_data(cfg, &p, &scfg.grid)?;
    let traj = solver::simulate(&scfg, &u0, &p)?;
    let mut run = Run::new(cfg);
    run.csv("diagnostics.csv", &DiagnosticsRow::COLUMNS, traj.diagnostics.iter().map(DiagnosticsRow::values))?;
    let snaps = Snapshots::new(scfg.grid, traj.times.clone(), traj.snapshots.clone())?;
    let sp = run.path("snapshots.txt");
    snaps.write(&sp)?;
    run.artifacts.push(sp);

    let conservation = solver::conservation_report(&traj, cfg.c2).ok();
    if let Some(t) = traj.blow_up {
        run.blow_up = true;
        run.failures.push(format!("numerical blow-up at t = {t}"));
    }
    if let Some(c) = &conservation {
        let tol = &cfg.tolerances;
        run.check(c.drift_m < tol.drift_m, || format!("mass drift {:e} exceeds {:e}", c.drift_m, tol.drift_m));
        run.check(c.drift_f < tol.drift_f, || format!("F drift {:e} exceeds {:e}", c.drift_f, tol.drift_f));
        run.check(c.monotone_e_violation <= tol.monotone, || {
            format!("E decreased by {:e} (tolerance {:e})", c.monotone_e_violation, tol.monotone)
        });
        if p.is_lyapunov_admissible() {
            run.check(c.monotone_h_violation <= tol.monotone, || {
                format!("H increased by {:e} (tolerance {:e})", c.monotone_h_violation, tol.monotone)
            });
        }
    }
    run.check(traj.left_edge_ok(), || {
        format!(
            "left-edge amplitude {:e} exceeds {:e}",
            traj.left_edge_max,
            solver::LEFT_EDGE_TOLERANCE
        )
    });
    run.finish(&SimulationSummary {
        dt: scfg.dt,
        steps: scfg.steps(),
        final_time: traj.final_time(),
        blow_up: traj.blow_up,
        left_edge_max: traj.left_edge_max,
        conservation,
    })
}

/// Signed distance of ρ₁ values modulo the period `2π/α`.
pub fn rho1_distance(p: &BreatherParams, a: f64, b: f64) -> f64 {
    let period = std::f64::consts::TAU / p.alpha();
    let d = a - b;
    d - period * (d / period).round()
}

#[derive(Serialize)]
struct FitSummary {
    truth: Option<(f64, f64)>,
    error: Option<(f64, f64)>,
    fits: Vec<ModulationState>,
    rho_path_file: Option<String>,
}

fn fit(cfg: &RunConfig) -> Result<Outcome> {
    let p = cfg.params()?;
    let mut run = Run::new(cfg);
    let tol = cfg.tolerances.clone();
    let summary = if let Some(input) = &cfg.input {
        let snaps = Snapshots::read(input)?;
        if snaps.is_empty() {
            return Err(Error::Config("empty trajectory".into()));
        }
        let mut guess = cfg.guess;
        let mut fits = Vec::with_capacity(snaps.times.len());
        for (t, f) in snaps.times.iter().zip(&snaps.fields) {
            let s = modulation::fit_modulation(f, *t, &p, cfg.distance, guess)?;
            guess = (s.rho1, s.rho2);
            fits.push(s);
        }
        let path = snaps.times.iter().zip(&fits).map(|(t, s)| {
            PathPoint {
                t: *t,
                rho1: s.rho1,
                rho2: s.rho2,
                z_h2: s.z_h2,
                det_j: s.det_j,
            }
            .values()
        });
        run.csv("rho_path.csv", &PathPoint::COLUMNS, path)?;
        FitSummary {
            truth: None,
            error: None,
            fits,
            rho_path_file: Some("rho_path.csv".into()),
        }
    } else {
        let grid = cfg.grid.grid()?;
        let mut u = breather::sample(&p.shifted(cfg.shifts()), &grid, cfg.t);
        if cfg.eta[0] > 0.0 {
            let z = modulation::perturbation_in(&grid, modulation::experiment_window_left(&grid), cfg.seed[0], cfg.eta[0])?;
            u = u.plus(&z);
        }
        let s = modulation::fit_modulation(&u, cfg.t, &p, cfg.distance, cfg.guess)?;
        let err = (rho1_distance(&p, s.rho1, cfg.rho1), s.rho2 - cfg.rho2);
        if cfg.eta[0] == 0.0 {
            run.check(err.0.abs().max(err.1.abs()) <= tol.fit, || {
                format!("shift error ({:e}, {:e}) exceeds {:e}", err.0, err.1, tol.fit)
            });
        }
        FitSummary {
            truth: Some((cfg.rho1, cfg.rho2)),
            error: Some(err),
            fits: vec![s],
            rho_path_file: None,
        }
    };
    for s in &summary.fits {
        run.check(s.max_orthogonality() < tol.orthogonality, || {
            format!("orthogonality residual {:e} exceeds {:e}", s.max_orthogonality(), tol.orthogonality)
        });
    }
    run.finish(&summary)
}

#[derive(Serialize)]
struct RunRecord {
    #[serde(flatten)]
    report: StabilityReport,
    rho_path_file: String,
}

#[derive(Serialize)]
struct StabilitySummary {
    bound_fit: modulation::BoundFit,
    runs: Vec<RunRecord>,
    errors: Vec<String>,
}

fn stability(cfg: &RunConfig) -> Result<Outcome> {
    let p = cfg.params()?;
    if !p.is_leftward() {
        return Err(Error::InvalidParams(
            "rightward-moving breather: unsupported (right half-line setting)".into(),
        ));
    }
    let scfg = cfg.solver_config()?;
    let runs: Vec<(f64, u64)> = cfg
        .eta
        .iter()
        .flat_map(|&e| cfg.seed.iter().map(move |&s| (e, s)))
        .collect();
    let results = modulation::stability_batch(&p, cfg.distance, &runs, &scfg);
    let mut run = Run::new(cfg);
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (&(eta, seed), r) in runs.iter().zip(results) {
        match r {
            Ok(rep) => records.push(rep),
            Err(e) => errors.push(format!("eta = {eta}, seed = {seed}: {}", reason(&e))),
        }
    }
    let points: Vec<(f64, f64)> = records.iter().map(|r| (r.eta, r.sup_z_h2)).collect();
    let fit = modulation::fit_bound_constants(&points, p.beta(), cfg.distance);
    let tol = cfg.tolerances.orthogonality;
    let mut out = Vec::with_capacity(records.len());
    for rep in records {
        let rep = rep.with_bound_fit(fit);
        let stem = format!("stability_eta{}_seed{}", rep.eta, rep.seed);
        let path_file = format!("{stem}_rho_path.csv");
        run.csv(&path_file, &PathPoint::COLUMNS, rep.path.iter().map(PathPoint::values))?;
        let label = format!("eta = {}, seed = {}", rep.eta, rep.seed);
        match rep.verdict {
            Verdict::BlowUp => {
                run.blow_up = true;
                run.failures.push(format!("{label}: numerical blow-up"));
            }
            Verdict::Invalid => run.failures.push(format!(
                "{label}: {}",
                rep.failure.clone().unwrap_or_else(|| "invalid modulation path".into())
            )),
            Verdict::Unbounded if rep.lyapunov_regime => run
                .failures
                .push(format!("{label}: sup ‖z‖ = {:e} exceeds the bound", rep.sup_z_h2)),
            _ => {}
        }
        run.check(rep.max_orthogonality < tol, || {
            format!("{label}: orthogonality residual {:e} exceeds {tol:e}", rep.max_orthogonality)
        });
        let record = RunRecord {
            report: rep,
            rho_path_file: path_file,
        };
        run.json(&format!("{stem}.json"), &record)?;
        out.push(record);
    }
    run.failures.extend(errors.iter().cloned());
    run.finish(&StabilitySummary {
        bound_fit: fit,
        runs: out,
        errors,
    })
}

#[derive(Serialize)]
struct CoercivitySummary {
    n: usize,
    t: f64,
    coercivity: CoercivityReport,
    kernel_quotients: [f64; 2],
}

fn coercivity(cfg: &RunConfig) -> Result<Outcome> {
    let p = cfg.params()?;
    let grid = cfg.grid.grid()?;
    let form = DiscreteForm::assemble(&p, cfg.t, &grid)?;
    let report = spectral::coercivity_check(&form)?;
    let kernel = [form.kernel_quotient(0)?, form.kernel_quotient(1)?];
    let mut run = Run::new(cfg);
    let rows = report
        .smallest
        .iter()
        .enumerate()
        .map(|(i, q)| [p.alpha(), p.beta(), cfg.t, grid.len() as f64, i as f64, *q]);
    run.csv("spectrum.csv", &["alpha", "beta", "t", "n", "index", "quotient"], rows)?;
    run.check(report.mu0_estimate > 0.0, || {
        format!("constrained minimum {:e} is not positive", report.mu0_estimate)
    });
    run.finish(&CoercivitySummary {
        n: grid.len(),
        t: cfg.t,
        coercivity: report,
        kernel_quotients: kernel,
    })
}

/// Parameters of the `fig1` preset.
pub fn fig1_params() -> BreatherParams {
    BreatherParams::new(3.0, 1.0, 0.0, 30.0).expect("valid preset")
}

#[derive(Clone, Debug, Serialize)]
pub struct Profile {
    pub t: f64,
    pub file: String,
    pub peak_x: f64,
    pub peak_abs: f64,
}

/// Location and size of `max |u|`.
pub fn peak(f: &Field) -> (f64, f64) {
    let (i, v) = f
        .u
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |(bi, bv), (i, v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) });
    (f.grid().node(i), v)
}

#[derive(Serialize)]
struct PlotSummary {
    preset: Option<String>,
    profiles: Vec<Profile>,
    peak_shift: Option<f64>,
    expected_shift: Option<f64>,
}

fn plot(cfg: &RunConfig) -> Result<Outcome> {
    let mut run = Run::new(cfg);
    let (times, fields, preset) = if let Some(input) = &cfg.input {
        let s = Snapshots::read(input)?;
        if s.is_empty() {
            return Err(Error::Config("empty trajectory".into()));
        }
        (s.times, s.fields, None)
    } else {
        let p = fig1_params();
        let grid = cfg.grid.grid()?;
        if cfg.times.is_empty() {
            return Err(Error::Config("times needs at least one value".into()));
        }
        let fields = cfg.times.iter().map(|&t| breather::sample(&p, &grid, t)).collect();
        (cfg.times.clone(), fields, Some(p))
    };
    let mut profiles = Vec::with_capacity(times.len());
    for (i, (t, f)) in times.iter().zip(&fields).enumerate() {
        let file = format!("profile_{i:03}.csv");
        let xs: Vec<f64> = f.grid().nodes().collect();
        run.csv(&file, &["x", "u"], xs.iter().zip(&f.u).map(|(x, u)| [*x, *u]))?;
        let (peak_x, peak_abs) = peak(f);
        profiles.push(Profile {
            t: *t,
            file,
            peak_x,
            peak_abs,
        });
    }
    let (first, last) = (&profiles[0], &profiles[profiles.len() - 1]);
    let shift = (profiles.len() > 1).then_some(last.peak_x - first.peak_x);
    let expected = preset.map(|p| -p.gamma() * (last.t - first.t));
    if let Some(p) = preset {
        if let (Some(s), Some(e)) = (shift, expected) {
            run.check((s - e).abs() <= 1.0 / p.beta(), || {
                format!("peak shift {s} differs from {e} by more than 1/β")
            });
        }
        let bound = 2.0 * std::f64::consts::SQRT_2 * p.beta();
        for pr in &profiles {
            run.check(pr.peak_abs <= bound * (1.0 + 1e-12), || {
                format!("profile at t = {} exceeds the envelope bound", pr.t)
            });
        }
    }
    run.finish(&PlotSummary {
        preset: preset.map(|_| "fig1".to_string()),
        profiles,
        peak_shift: shift,
        expected_shift: expected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho1_distance_wraps_the_period() {
        let p = BreatherParams::centered(2.0, 1.0).unwrap();
        let period = std::f64::consts::PI;
        assert!((rho1_distance(&p, 0.1 + period, 0.1)).abs() < 1e-15);
        assert!((rho1_distance(&p, 0.3, 0.1) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn exit_codes_follow_the_contract() {
        assert_eq!(error_exit_code(&Error::Config("x".into())), EXIT_USAGE);
        assert_eq!(error_exit_code(&Error::BlowUp { t: 0.1 }), EXIT_BLOW_UP);
        assert_eq!(error_exit_code(&Error::NoConvergence { iterations: 3, residual: 1.0 }), EXIT_CHECK_FAILED);
        assert_eq!(reason(&Error::Config("missing required key: beta".into())), "missing required key: beta");
    }
}
