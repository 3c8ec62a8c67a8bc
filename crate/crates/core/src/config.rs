//! Key-value run configuration.
//!
//! One `key = value` pair per line; `#` starts a comment. Every key has a
//! documented default except `command`, `alpha` and `beta`. Unknown keys are
//! rejected. Lists are comma separated.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::breather::{BreatherParams, Shifts};
use crate::error::{Error, Result};
use crate::functionals::Derivatives;
use crate::grid::Grid;
use crate::solver::SolverConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    VerifyIdentities,
    Traces,
    Functionals,
    Simulate,
    Fit,
    Stability,
    Coercivity,
    Plot,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::VerifyIdentities,
        Command::Traces,
        Command::Functionals,
        Command::Simulate,
        Command::Fit,
        Command::Stability,
        Command::Coercivity,
        Command::Plot,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::VerifyIdentities => "verify-identities",
            Command::Traces => "traces",
            Command::Functionals => "functionals",
            Command::Simulate => "simulate",
            Command::Fit => "fit",
            Command::Stability => "stability",
            Command::Coercivity => "coercivity",
            Command::Plot => "plot",
        }
    }

    fn needs_params(self) -> bool {
        self != Command::Plot
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown command: {s}")))
    }
}

pub struct KeySpec {
    pub key: &'static str,
    /// `None` marks a required key.
    pub default: Option<&'static str>,
    pub doc: &'static str,
}

const fn key(key: &'static str, default: Option<&'static str>, doc: &'static str) -> KeySpec {
    KeySpec { key, default, doc }
}

/// The documented schema.
pub const KEYS: &[KeySpec] = &[
    key("command", None, "verify-identities | traces | functionals | simulate | fit | stability | coercivity | plot"),
    key("alpha", None, "breather frequency α > 0"),
    key("beta", None, "breather amplitude β > 0"),
    key("x1", Some("0"), "phase shift of y₁"),
    key("x2", Some("0"), "phase shift of y₂"),
    key("L", Some("30"), "distance of the breather from x = 0"),
    key("rho1", Some("0"), "modulation shift ρ₁"),
    key("rho2", Some("0"), "modulation shift ρ₂"),
    key("t", Some("0"), "evaluation time"),
    key("t0", Some("0"), "start of the flux-balance window"),
    key("t1", Some("1"), "end of the flux-balance window"),
    key("x_left", Some("-120"), "left end of the grid (coercivity: -45; plot: -80; stability: -240)"),
    key("x_right", Some("0"), "right end of the grid (coercivity: 45)"),
    key("n", Some("4001"), "grid nodes, odd (coercivity: 1201; plot, stability: 8001)"),
    key("t_final", Some("0.5"), "simulation horizon (stability: 1)"),
    key("cfl", Some("0.9"), "fraction of the stable step dx³/4"),
    key("snapshots", Some("10"), "approximate number of stored snapshots"),
    key("diagnostics", Some("100"), "approximate number of diagnostics rows"),
    key("eta", Some("0"), "perturbation H² size, list allowed (stability: 0.01)"),
    key("seed", Some("1"), "perturbation seed, list allowed"),
    key("c2", Some("1"), "constant of the a priori bound on ‖u_xx‖"),
    key("samples", Some("1000"), "random points of the identity sweep"),
    key("sample_seed", Some("1"), "seed of the identity sweep"),
    key("x_range", Some("-50,0"), "x interval of the identity sweep"),
    key("t_range", Some("0,2"), "t interval of the identity sweep"),
    key("time_points", Some("401"), "odd number of time samples for trace integrals"),
    key("derivatives", Some("exact"), "exact | finite-difference, for functionals"),
    key("guess", Some("0,0"), "initial (ρ₁, ρ₂) of the modulation fit"),
    key("input", Some(""), "snapshot file (fit, plot)"),
    key("preset", Some(""), "plot preset: fig1"),
    key("times", Some("0,0.5,1"), "profile times for plot"),
    key("output", Some("out"), "output directory"),
    key("tol_identity", Some("1e-8"), "identity residual tolerance"),
    key("tol_trace", Some("100"), "largest accepted max|trace| / e^{-βL/2}"),
    key("tol_flux", Some("1e-6"), "flux-balance residual tolerance"),
    key("tol_drift_m", Some("1e-6"), "relative mass drift tolerance"),
    key("tol_drift_f", Some("1e-5"), "relative F drift tolerance"),
    key("tol_monotone", Some("1e-7"), "E / H monotonicity tolerance"),
    key("tol_fit", Some("1e-9"), "shift recovery tolerance"),
    key("tol_orthogonality", Some("1e-8"), "orthogonality residual tolerance"),
];

fn command_default(command: Option<Command>, key: &str) -> Option<&'static str> {
    match (command?, key) {
        (Command::Coercivity, "x_left") => Some("-45"),
        (Command::Coercivity, "x_right") => Some("45"),
        (Command::Coercivity, "n") => Some("1201"),
        (Command::Plot, "x_left") => Some("-80"),
        (Command::Plot, "n") => Some("8001"),
        (Command::Stability, "x_left") => Some("-240"),
        (Command::Stability, "n") => Some("8001"),
        (Command::Stability, "t_final") => Some("1"),
        (Command::Stability, "eta") => Some("0.01"),
        _ => None,
    }
}

fn key_spec(key: &str) -> Option<&'static KeySpec> {
    KEYS.iter().find(|k| k.key == key)
}

/// Parses `key = value` text into raw entries, rejecting unknown and repeated keys.
pub fn parse_entries(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = split_pair(line).map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        if out.insert(k.clone(), v).is_some() {
            return Err(Error::Config(format!("duplicate key: {k}")));
        }
    }
    Ok(out)
}

fn split_pair(s: &str) -> std::result::Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key = value, got {s:?}"))?;
    let k = k.trim();
    if key_spec(k).is_none() {
        return Err(format!("unknown key: {k}"));
    }
    Ok((k.to_string(), v.trim().to_string()))
}

/// Parses a `key=value` override.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    split_pair(s).map_err(Error::Config)
}

/// Fills defaults; every schema key appears in the result.
pub fn resolve(mut entries: BTreeMap<String, String>) -> Result<BTreeMap<String, String>> {
    let command = match entries.get("command") {
        Some(c) => Some(c.parse::<Command>()?),
        None => None,
    };
    for k in KEYS {
        if entries.contains_key(k.key) {
            continue;
        }
        let missing_ok = k.key != "command" && !command.is_some_and(Command::needs_params);
        match command_default(command, k.key).or(k.default) {
            Some(d) => {
                entries.insert(k.key.to_string(), d.to_string());
            }
            None if missing_ok => {}
            None => return Err(Error::Config(format!("missing required key: {}", k.key))),
        }
    }
    Ok(entries)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridSpec {
    pub x_left: f64,
    pub x_right: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.x_left, self.x_right, self.n)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverSpec {
    pub t_final: f64,
    pub cfl: f64,
    pub snapshots: usize,
    pub diagnostics: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    pub identity: f64,
    pub trace: f64,
    pub flux: f64,
    pub drift_m: f64,
    pub drift_f: f64,
    pub monotone: f64,
    pub fit: f64,
    pub orthogonality: f64,
}

/// Validated configuration of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    /// `None` only for plot runs that read a snapshot file.
    pub params: Option<BreatherParams>,
    pub distance: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub t: f64,
    pub t0: f64,
    pub t1: f64,
    pub grid: GridSpec,
    pub solver: SolverSpec,
    pub eta: Vec<f64>,
    pub seed: Vec<u64>,
    pub c2: f64,
    pub samples: usize,
    pub sample_seed: u64,
    pub x_range: (f64, f64),
    pub t_range: (f64, f64),
    pub time_points: usize,
    pub derivatives: Derivatives,
    pub guess: (f64, f64),
    pub input: Option<PathBuf>,
    pub preset: Option<String>,
    pub times: Vec<f64>,
    pub output: PathBuf,
    pub tolerances: Tolerances,
    /// Every key with defaults expanded.
    pub resolved: BTreeMap<String, String>,
}

fn value<T: FromStr>(m: &BTreeMap<String, String>, k: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    let raw = m.get(k).ok_or_else(|| Error::Config(format!("missing required key: {k}")))?;
    raw.parse::<T>()
        .map_err(|e| Error::Config(format!("invalid value for {k}: {raw:?} ({e})")))
}

fn list<T: FromStr>(m: &BTreeMap<String, String>, k: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    let raw = m.get(k).map(String::as_str).unwrap_or("");
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|e| Error::Config(format!("invalid value for {k}: {s:?} ({e})")))
        })
        .collect()
}

fn pair(m: &BTreeMap<String, String>, k: &str) -> Result<(f64, f64)> {
    match list::<f64>(m, k)?.as_slice() {
        &[a, b] => Ok((a, b)),
        _ => Err(Error::Config(format!("{k} needs exactly two values"))),
    }
}

fn optional(m: &BTreeMap<String, String>, k: &str) -> Option<String> {
    m.get(k).filter(|v| !v.is_empty()).cloned()
}

impl RunConfig {
    pub fn from_entries(entries: BTreeMap<String, String>) -> Result<Self> {
        let m = resolve(entries)?;
        let command: Command = value(&m, "command")?;
        let params = if m.contains_key("alpha") && m.contains_key("beta") {
            Some(BreatherParams::new(
                value(&m, "alpha")?,
                value(&m, "beta")?,
                value(&m, "x1")?,
                value(&m, "x2")?,
            )?)
        } else {
            None
        };
        let derivatives = match m["derivatives"].as_str() {
            "exact" => Derivatives::Exact,
            "finite-difference" => Derivatives::FiniteDifference,
            other => return Err(Error::Config(format!("invalid value for derivatives: {other:?}"))),
        };
        let cfg = Self {
            command,
            params,
            distance: value(&m, "L")?,
            rho1: value(&m, "rho1")?,
            rho2: value(&m, "rho2")?,
            t: value(&m, "t")?,
            t0: value(&m, "t0")?,
            t1: value(&m, "t1")?,
            grid: GridSpec {
                x_left: value(&m, "x_left")?,
                x_right: value(&m, "x_right")?,
                n: value(&m, "n")?,
            },
            solver: SolverSpec {
                t_final: value(&m, "t_final")?,
                cfl: value(&m, "cfl")?,
                snapshots: value(&m, "snapshots")?,
                diagnostics: value(&m, "diagnostics")?,
            },
            eta: list(&m, "eta")?,
            seed: list(&m, "seed")?,
            c2: value(&m, "c2")?,
            samples: value(&m, "samples")?,
            sample_seed: value(&m, "sample_seed")?,
            x_range: pair(&m, "x_range")?,
            t_range: pair(&m, "t_range")?,
            time_points: value(&m, "time_points")?,
            derivatives,
            guess: pair(&m, "guess")?,
            input: optional(&m, "input").map(PathBuf::from),
            preset: optional(&m, "preset"),
            times: list(&m, "times")?,
            output: PathBuf::from(&m["output"]),
            tolerances: Tolerances {
                identity: value(&m, "tol_identity")?,
                trace: value(&m, "tol_trace")?,
                flux: value(&m, "tol_flux")?,
                drift_m: value(&m, "tol_drift_m")?,
                drift_f: value(&m, "tol_drift_f")?,
                monotone: value(&m, "tol_monotone")?,
                fit: value(&m, "tol_fit")?,
                orthogonality: value(&m, "tol_orthogonality")?,
            },
            resolved: m,
        };
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        if self.eta.is_empty() || self.seed.is_empty() {
            return Err(Error::Config("eta and seed need at least one value".into()));
        }
        if self.eta.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
            return Err(Error::Config("eta must be finite and nonnegative".into()));
        }
        if !(self.distance > 0.0 && self.distance.is_finite()) {
            return Err(Error::Config(format!("L must be positive, got {}", self.distance)));
        }
        if self.command == Command::Plot && self.preset.is_none() && self.input.is_none() {
            return Err(Error::Config("plot needs preset = fig1 or an input snapshot file".into()));
        }
        if let Some(p) = self.preset.as_deref() {
            if p != "fig1" {
                return Err(Error::Config(format!("unknown preset: {p}")));
            }
        }
        if self.command == Command::Plot && self.input.is_none() && self.params.is_none() {
            // fig1 supplies its own parameters.
            return Ok(());
        }
        if self.command.needs_params() && self.params.is_none() {
            return Err(Error::Config("missing required key: beta".into()));
        }
        Ok(())
    }

    /// Reads a config file and applies `key=value` overrides on top.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_text(&text, overrides)
    }

    pub fn from_text(text: &str, overrides: &[String]) -> Result<Self> {
        let mut entries = parse_entries(text)?;
        for o in overrides {
            let (k, v) = parse_override(o)?;
            entries.insert(k, v);
        }
        Self::from_entries(entries)
    }

    pub fn params(&self) -> Result<BreatherParams> {
        self.params.ok_or_else(|| Error::Config("missing required key: alpha".into()))
    }

    pub fn shifts(&self) -> Shifts {
        Shifts::new(self.rho1, self.rho2, self.distance)
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        let g = self.grid.grid()?;
        Ok(SolverConfig::with_cfl(g, self.solver.t_final, self.solver.cfl)?
            .with_records(self.solver.snapshots, self.solver.diagnostics))
    }

    /// Resolved config as `key = value` text.
    pub fn to_text(&self) -> String {
        self.resolved.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

/// Schema listing for `--help`-style output.
pub fn schema_text() -> String {
    let mut out = String::new();
    for k in KEYS {
        let d = match k.default {
            Some("") => "(empty)".to_string(),
            Some(d) => d.to_string(),
            None => "(required)".to_string(),
        };
        out.push_str(&format!("{:<18} {:<12} {}\n", k.key, d, k.doc));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_expand_and_comments_are_ignored() {
        let c = RunConfig::from_text("# run\ncommand = traces\nalpha = 3 # freq\nbeta=1\n", &[]).unwrap();
        assert_eq!(c.command, Command::Traces);
        assert_eq!(c.distance, 30.0);
        assert_eq!(c.resolved.len(), KEYS.len());
        assert_eq!(c.grid.n, 4001);
    }

    #[test]
    fn missing_beta_is_reported_by_name() {
        let e = RunConfig::from_text("command = traces\nalpha = 3\n", &[]).unwrap_err();
        assert_eq!(e.to_string(), "config error: missing required key: beta");
    }

    #[test]
    fn unknown_and_duplicate_keys_are_rejected() {
        assert!(RunConfig::from_text("command = traces\nalpha=1\nbeta=1\ngamma=2\n", &[]).is_err());
        assert!(RunConfig::from_text("command = traces\nalpha=1\nalpha=2\nbeta=1\n", &[]).is_err());
        assert!(RunConfig::from_text("command = traces\nalpha=1\nbeta=1\n", &["bogus=1".into()]).is_err());
    }

    #[test]
    fn overrides_win_and_command_defaults_apply() {
        let c = RunConfig::from_text("command = coercivity\nalpha=1\nbeta=1\n", &["n=601".into()]).unwrap();
        assert_eq!(c.grid, GridSpec { x_left: -45.0, x_right: 45.0, n: 601 });
        let c = RunConfig::from_text("command = stability\nalpha=3\nbeta=1\nseed=1,2,3\n", &[]).unwrap();
        assert_eq!(c.eta, vec![0.01]);
        assert_eq!(c.seed, vec![1, 2, 3]);
    }

    #[test]
    fn plot_preset_needs_no_parameters() {
        let c = RunConfig::from_text("command = plot\npreset = fig1\n", &[]).unwrap();
        assert!(c.params.is_none());
        assert!(RunConfig::from_text("command = plot\n", &[]).is_err());
    }

    #[test]
    fn resolved_text_round_trips() {
        let c = RunConfig::from_text("command = fit\nalpha=2\nbeta=1\neta=0.001\n", &[]).unwrap();
        assert_eq!(RunConfig::from_text(&c.to_text(), &[]).unwrap(), c);
    }
}
