//! Half-line conservation-law functionals, their boundary trace terms, the
//! linearized operator around the breather and its quadratic forms.

use serde::Serialize;

use crate::breather::{self, BreatherParams, Jet, Shifts};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

/// Values of u and the derivatives entering the trace terms at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct PointDerivatives {
    pub u: f64,
    pub ux: f64,
    pub uxx: f64,
    pub uxxx: f64,
    pub ut: f64,
    pub uxt: f64,
}

impl PointDerivatives {
    /// Time derivatives reconstructed from the equation,
    /// `u_t = −(u_xxx + 3u²u_x)`, `u_xt = −(u_xxxx + 6u u_x² + 3u² u_xx)`.
    pub fn from_spatial(u: f64, ux: f64, uxx: f64, uxxx: f64, uxxxx: f64) -> Self {
        Self {
            u,
            ux,
            uxx,
            uxxx,
            ut: -(uxxx + 3.0 * u * u * ux),
            uxt: -(uxxxx + 6.0 * u * ux * ux + 3.0 * u * u * uxx),
        }
    }

    pub fn from_jet(j: &Jet) -> Self {
        Self {
            u: j.value,
            ux: j.dx[1],
            uxx: j.dx[2],
            uxxx: j.dx[3],
            ut: j.dt,
            uxt: j.dxt,
        }
    }

    pub fn tau_m(&self) -> f64 {
        let Self { u, ux, uxx, .. } = *self;
        0.5 * ux * ux - uxx * u - 0.75 * u.powi(4)
    }

    pub fn tau_e(&self) -> f64 {
        let Self { u, ux, uxx, uxxx, .. } = *self;
        0.5 * u.powi(6) + u.powi(3) * uxx + 0.5 * uxx * uxx - uxxx * ux - 3.0 * u * u * ux * ux
    }

    pub fn tau_f(&self) -> f64 {
        let Self {
            u,
            ux,
            uxx,
            uxxx,
            ut,
            uxt,
        } = *self;
        let cube_x = 3.0 * u * u * ux;
        -ut * cube_x - 4.5 * u.powi(4) * ux * ux + 0.5 * uxxx * uxxx + uxx * uxt
            - u * u * uxx * uxx
            - 2.0 * ut * u * u * ux
            + 0.75 * u.powi(4) * ux * ux
            - 0.25 * ux.powi(4)
            + u * ux * ux * uxx
            - 1.5 * u.powi(5) * uxx
            - 0.5625 * u.powi(8)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct FunctionalReport {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub second_energy: f64,
    pub lyapunov: f64,
    #[serde(rename = "tau_M")]
    pub tau_m: f64,
    #[serde(rename = "tau_E")]
    pub tau_e: f64,
    #[serde(rename = "tau_F")]
    pub tau_f: f64,
}

impl FunctionalReport {
    pub const COLUMNS: [&'static str; 8] = [
        "t",
        "mass",
        "energy",
        "second_energy",
        "lyapunov",
        "tau_M",
        "tau_E",
        "tau_F",
    ];

    pub fn at_time(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    pub fn values(&self) -> [f64; 8] {
        [
            self.t,
            self.mass,
            self.energy,
            self.second_energy,
            self.lyapunov,
            self.tau_m,
            self.tau_e,
            self.tau_f,
        ]
    }
}

/// `F + 2(β² − α²) E + (α² + β²)² M`
pub fn lyapunov_combination(p: &BreatherParams, mass: f64, energy: f64, second_energy: f64) -> f64 {
    second_energy + 2.0 * p.beta2_minus_alpha2() * energy + p.sum_squares_sq() * mass
}

/// Derivatives at the right end node from off-centered stencils.
pub fn right_boundary_derivatives(f: &Field) -> PointDerivatives {
    let last = f.grid().len() - 1;
    let d: [f64; 5] = std::array::from_fn(|k| {
        if k == 0 {
            f.u[last]
        } else {
            f.derivative_at(k, last)
        }
    });
    PointDerivatives::from_spatial(d[0], d[1], d[2], d[3], d[4])
}

/// M, E, F, H by composite Simpson with 4th-order derivatives; trace terms
/// at the right end node (x = 0 on half-line grids).
pub fn evaluate_functionals(f: &Field, p: &BreatherParams) -> Result<FunctionalReport> {
    f.validate()?;
    let ux = f.derivative(1);
    let uxx = f.derivative(2);
    let mut r = integrate_densities(f.grid(), p, &f.u, &ux, &uxx)?;
    let bd = right_boundary_derivatives(f);
    r.tau_m = bd.tau_m();
    r.tau_e = bd.tau_e();
    r.tau_f = bd.tau_f();
    Ok(r)
}

/// Functionals of the exact (shifted) breather: closed-form derivatives at
/// every node, Simpson in space, traces from the jet at the right end.
pub fn exact_functionals(p: &BreatherParams, shifts: Shifts, grid: &Grid, t: f64) -> Result<FunctionalReport> {
    let q = p.shifted(shifts);
    let jets = breather::jets_on(&q, grid, t);
    let u: Vec<f64> = jets.iter().map(|j| j.value).collect();
    let ux: Vec<f64> = jets.iter().map(|j| j.dx[1]).collect();
    let uxx: Vec<f64> = jets.iter().map(|j| j.dx[2]).collect();
    let mut r = integrate_densities(grid, p, &u, &ux, &uxx)?;
    let bd = PointDerivatives::from_jet(&breather::breather_jet(&q, grid.x_right(), t));
    r.tau_m = bd.tau_m();
    r.tau_e = bd.tau_e();
    r.tau_f = bd.tau_f();
    Ok(r.at_time(t))
}

fn integrate_densities(
    grid: &Grid,
    p: &BreatherParams,
    uv: &[f64],
    ux: &[f64],
    uxx: &[f64],
) -> Result<FunctionalReport> {
    let n = grid.len();
    let mut m = vec![0.0; n];
    let mut e = vec![0.0; n];
    let mut s = vec![0.0; n];
    for i in 0..n {
        let (u, a, b) = (uv[i], ux[i], uxx[i]);
        let u2 = u * u;
        m[i] = 0.5 * u2;
        e[i] = 0.5 * a * a - 0.25 * u2 * u2;
        s[i] = 0.5 * b * b - 2.5 * u2 * a * a + 0.25 * u2 * u2 * u2;
    }
    let mass = grid.integrate(&m)?;
    let energy = grid.integrate(&e)?;
    let second_energy = grid.integrate(&s)?;
    Ok(FunctionalReport {
        t: 0.0,
        mass,
        energy,
        second_energy,
        lyapunov: lyapunov_combination(p, mass, energy, second_energy),
        ..Default::default()
    })
}

/// Coefficients of the linearized operator at every node:
/// `L[z] = z⁗ − 2(β²−α²) z'' + (α²+β²)² z + a2 z'' + a1 z' + a0 z`.
#[derive(Clone, Debug)]
pub struct OperatorCoefficients {
    pub a2: Vec<f64>,
    pub a1: Vec<f64>,
    pub a0: Vec<f64>,
    /// Weak-form weight of `z_x²`: `2(β²−α²) − 5B²`.
    pub w1: Vec<f64>,
    /// Weak-form weight of `z²`:
    /// `(α²+β²)² + 5B_x² + 10BB_xx + 15/2 B⁴ − 6(β²−α²)B²`.
    pub w0: Vec<f64>,
    k: f64,
    s2: f64,
}

impl OperatorCoefficients {
    pub fn new(grid: &Grid, p: &BreatherParams, shifts: Shifts, t: f64) -> Self {
        let q = p.shifted(shifts);
        Self::from_jets(p, &breather::jets_on(&q, grid, t))
    }

    /// Coefficients with the breather removed (constant-coefficient operator).
    pub fn without_breather(grid: &Grid, p: &BreatherParams) -> Self {
        Self::from_jets(p, &vec![Jet::zero(); grid.len()])
    }

    fn from_jets(p: &BreatherParams, jets: &[Jet]) -> Self {
        let k = p.beta2_minus_alpha2();
        let s2 = p.sum_squares_sq();
        let n = jets.len();
        let mut out = Self {
            a2: Vec::with_capacity(n),
            a1: Vec::with_capacity(n),
            a0: Vec::with_capacity(n),
            w1: Vec::with_capacity(n),
            w0: Vec::with_capacity(n),
            k,
            s2,
        };
        for j in jets {
            let (b, bx, bxx) = (j.value, j.dx[1], j.dx[2]);
            let b2 = b * b;
            let pot = 5.0 * bx * bx + 10.0 * b * bxx + 7.5 * b2 * b2 - 6.0 * k * b2;
            out.a2.push(5.0 * b2);
            out.a1.push(10.0 * b * bx);
            out.a0.push(pot);
            out.w1.push(2.0 * k - 5.0 * b2);
            out.w0.push(s2 + pot);
        }
        out
    }
}

/// `L[z]` with 4th-order finite differences and exact breather coefficients.
pub fn apply_operator_l(z: &Field, p: &BreatherParams, shifts: Shifts, t: f64) -> Result<Field> {
    z.validate()?;
    let c = OperatorCoefficients::new(z.grid(), p, shifts, t);
    Ok(apply_with(z, &c))
}

fn apply_with(z: &Field, c: &OperatorCoefficients) -> Field {
    let zx = z.derivative(1);
    let zxx = z.derivative(2);
    let z4 = z.derivative(4);
    let u = (0..z.u.len())
        .map(|i| {
            z4[i] - 2.0 * c.k * zxx[i] + c.s2 * z.u[i] + c.a2[i] * zxx[i] + c.a1[i] * zx[i] + c.a0[i] * z.u[i]
        })
        .collect();
    Field::from_parts(*z.grid(), u)
}

/// Weak-form integrand `z_xx² + w1 z_x² + w0 z²` at every node.
pub fn weak_density(z: &Field, c: &OperatorCoefficients) -> Vec<f64> {
    let zx = z.derivative(1);
    let zxx = z.derivative(2);
    (0..z.u.len())
        .map(|i| zxx[i] * zxx[i] + c.w1[i] * zx[i] * zx[i] + c.w0[i] * z.u[i] * z.u[i])
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Half,
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuadraticForms {
    pub q_weak: f64,
    pub q_strong: f64,
    /// `|q_weak − q_strong|` exceeded the tolerance: the profile is not
    /// admissible (boundary values) or the grid is under-resolved.
    pub mismatch: bool,
}

pub const QUADRATIC_FORM_TOLERANCE: f64 = 1e-6;

/// Strong (`∫ z L[z]`) and expanded weak forms over the grid.
pub fn quadratic_form(
    z: &Field,
    p: &BreatherParams,
    shifts: Shifts,
    t: f64,
    domain: Domain,
) -> Result<QuadraticForms> {
    z.validate()?;
    if domain == Domain::Half && !z.grid().is_half_line() {
        return Err(Error::InvalidGrid("half-line form needs a grid ending at x = 0".into()));
    }
    let c = OperatorCoefficients::new(z.grid(), p, shifts, t);
    let lz = apply_with(z, &c);
    let strong: Vec<f64> = z.u.iter().zip(&lz.u).map(|(a, b)| a * b).collect();
    let q_strong = z.grid().integrate(&strong)?;
    let q_weak = z.grid().integrate(&weak_density(z, &c))?;
    Ok(QuadraticForms {
        q_weak,
        q_strong,
        mismatch: (q_weak - q_strong).abs() > QUADRATIC_FORM_TOLERANCE * q_weak.abs().max(1.0),
    })
}

/// Weak quadratic form only.
pub fn weak_quadratic_form(z: &Field, p: &BreatherParams, shifts: Shifts, t: f64) -> Result<f64> {
    let c = OperatorCoefficients::new(z.grid(), p, shifts, t);
    z.grid().integrate(&weak_density(z, &c))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExtensionReport {
    /// Full-line form of `z̃ = ũ − B̃`.
    pub q_tilde: f64,
    /// Half-line form of `z`.
    pub q_half: f64,
    /// `q_tilde − q_half`, the weak form of `z̃` over x > 0.
    pub err_e: f64,
    /// `∫_{x>0} z̃ L[z̃]` in strong form, an independent route to `err_e`.
    pub err_e_strong: f64,
    /// `|err_e| / exp(−βL/2)`
    pub bound_constant: f64,
}

pub const HOMOGENEOUS_BC_TOLERANCE: f64 = 1e-8;

fn check_homogeneous(z: &Field) -> Result<()> {
    let last = z.grid().len() - 1;
    let v = z.u[last];
    let s = z.derivative_at(1, last);
    if v.abs() > HOMOGENEOUS_BC_TOLERANCE || s.abs() > HOMOGENEOUS_BC_TOLERANCE {
        return Err(Error::BoundaryConditions(format!(
            "z(0) = {v:e}, z_x(0) = {s:e} exceed {HOMOGENEOUS_BC_TOLERANCE:e}"
        )));
    }
    Ok(())
}

/// Compares the full-line form of the zero-extended perturbation with the
/// half-line form. `x_ext` is the right end of the extension (rounded to
/// keep the grid spacing and an odd node count).
pub fn extension_decomposition(
    z_half: &Field,
    p: &BreatherParams,
    shifts: Shifts,
    t: f64,
    x_ext: f64,
) -> Result<ExtensionReport> {
    z_half.validate()?;
    let grid = z_half.grid();
    if !grid.is_half_line() {
        return Err(Error::InvalidGrid("perturbation must live on a half-line grid".into()));
    }
    check_homogeneous(z_half)?;
    let h = grid.dx();
    let mut intervals = (x_ext / h).round().max(16.0) as usize;
    if intervals % 2 == 1 {
        intervals += 1;
    }
    let right = Grid::new(0.0, intervals as f64 * h, intervals + 1)?;

    // On x ≤ 0 the extension minus the breather is z itself; on x > 0 it is −B̃.
    let q_half = weak_quadratic_form(z_half, p, shifts, t)?;
    let q = p.shifted(shifts);
    let minus_b = breather::sample(&q, &right, t).scaled(-1.0);
    let c_right = OperatorCoefficients::new(&right, p, shifts, t);
    let right_weak = right.integrate(&weak_density(&minus_b, &c_right))?;
    let lz = apply_with(&minus_b, &c_right);
    let strong: Vec<f64> = minus_b.u.iter().zip(&lz.u).map(|(a, b)| a * b).collect();
    let err_e_strong = right.integrate(&strong)?;

    // Taken directly rather than as q_tilde − q_half, which cancels to
    // roundoff once B̃ is tiny on x > 0.
    let err_e = right_weak;
    let q_tilde = q_half + err_e;
    Ok(ExtensionReport {
        q_tilde,
        q_half,
        err_e,
        err_e_strong,
        bound_constant: err_e.abs() / (-p.beta() * shifts.distance / 2.0).exp(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LyapunovExpansion {
    /// `H[B + z] − H[B]`
    pub lhs: f64,
    /// `½ Q[z]`
    pub rhs_quadratic: f64,
    /// Boundary terms of the first variation at x = 0.
    pub rhs_boundary: f64,
    /// `lhs − rhs_quadratic − rhs_boundary`
    pub remainder_n: f64,
    pub z_h2: f64,
    /// `|remainder_n| / ‖z‖³_{H²}`
    pub k_ratio: f64,
}

/// First-variation boundary terms
/// `B_xx z_x − B_xxx z − 5B²B_x z + 2(β²−α²) B_x z`, all at x = 0.
pub fn expansion_boundary_terms(p: &BreatherParams, b: &Jet, z0: f64, zx0: f64) -> f64 {
    let (bv, bx, bxx, bxxx) = (b.value, b.dx[1], b.dx[2], b.dx[3]);
    bxx * zx0 - bxxx * z0 - 5.0 * bv * bv * bx * z0 + 2.0 * p.beta2_minus_alpha2() * bx * z0
}

pub fn lyapunov_expansion_check(
    p: &BreatherParams,
    shifts: Shifts,
    t: f64,
    z: &Field,
) -> Result<LyapunovExpansion> {
    z.validate()?;
    if !z.grid().is_half_line() {
        return Err(Error::InvalidGrid("expansion check needs a half-line grid".into()));
    }
    let q = p.shifted(shifts);
    let b = breather::sample(&q, z.grid(), t);
    let u = b.plus(z);
    let lhs = evaluate_functionals(&u, p)?.lyapunov - evaluate_functionals(&b, p)?.lyapunov;
    let rhs_quadratic = 0.5 * weak_quadratic_form(z, p, shifts, t)?;
    let last = z.grid().len() - 1;
    let b0 = breather::breather_jet(&q, 0.0, t);
    let rhs_boundary = expansion_boundary_terms(p, &b0, z.u[last], z.derivative_at(1, last));
    let remainder_n = lhs - rhs_quadratic - rhs_boundary;
    let z_h2 = z.h2_norm()?;
    Ok(LyapunovExpansion {
        lhs,
        rhs_quadratic,
        rhs_boundary,
        remainder_n,
        z_h2,
        k_ratio: if z_h2 > 0.0 { remainder_n.abs() / z_h2.powi(3) } else { 0.0 },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FluxBalance {
    pub res_m: f64,
    pub res_e: f64,
    pub res_f: f64,
    pub flux_m: f64,
    pub flux_e: f64,
    pub flux_f: f64,
    pub start: FunctionalReport,
    pub end: FunctionalReport,
}

impl FluxBalance {
    pub fn max_residual(&self) -> f64 {
        self.res_m.max(self.res_e).max(self.res_f)
    }
}

/// How spatial derivatives inside the functionals are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Derivatives {
    /// Closed-form jets.
    Exact,
    /// 4th-order stencils on the sampled field.
    FiniteDifference,
}

/// Checks `X(t1) − X(t0) = ∫ τ_X(0, s) ds` for X ∈ {M, E, F} on the exact
/// restricted breather. Functionals are Simpson quadratures on `grid`,
/// trace integrals are Simpson sums over `time_points` samples of exact jets.
pub fn flux_balance_check(
    p: &BreatherParams,
    shifts: Shifts,
    t0: f64,
    t1: f64,
    grid: &Grid,
    time_points: usize,
    derivatives: Derivatives,
) -> Result<FluxBalance> {
    if !grid.is_half_line() {
        return Err(Error::InvalidGrid("flux balance needs a half-line grid".into()));
    }
    let q = p.shifted(shifts);
    let at = |t: f64| match derivatives {
        Derivatives::Exact => exact_functionals(p, shifts, grid, t),
        Derivatives::FiniteDifference => {
            evaluate_functionals(&breather::sample(&q, grid, t), p).map(|r| r.at_time(t))
        }
    };
    let start = at(t0)?;
    let end = at(t1)?;
    let (flux_m, flux_e, flux_f) = if t1 == t0 {
        (0.0, 0.0, 0.0)
    } else {
        let tg = Grid::new(t0.min(t1), t0.max(t1), time_points)?;
        let mut tm = Vec::with_capacity(time_points);
        let mut te = Vec::with_capacity(time_points);
        let mut tf = Vec::with_capacity(time_points);
        for s in tg.nodes() {
            let d = PointDerivatives::from_jet(&breather::breather_jet(&q, 0.0, s));
            tm.push(d.tau_m());
            te.push(d.tau_e());
            tf.push(d.tau_f());
        }
        let sign = if t1 > t0 { 1.0 } else { -1.0 };
        (
            sign * tg.integrate(&tm)?,
            sign * tg.integrate(&te)?,
            sign * tg.integrate(&tf)?,
        )
    };
    Ok(FluxBalance {
        res_m: (end.mass - start.mass - flux_m).abs(),
        res_e: (end.energy - start.energy - flux_e).abs(),
        res_f: (end.second_energy - start.second_energy - flux_f).abs(),
        flux_m,
        flux_e,
        flux_f,
        start,
        end,
    })
}
