//! Closed-form mKdV breather, its primitive and mass primitive.
//!
//! Everything here is evaluated through truncated Taylor arithmetic in the
//! two phase variables `y1 = x + δt + x1`, `y2 = x + γt + x2`. Since the
//! breather depends on `(x, t, x1, x2)` only through `(y1, y2)`, every mixed
//! partial follows from the bivariate expansion by the chain rule
//! `∂x = ∂1 + ∂2`, `∂t = δ∂1 + γ∂2`, `∂x1 = ∂1`, `∂x2 = ∂2`.

use std::f64::consts::SQRT_2;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::taylor::{binomial, Bivariate};

/// Beyond this value of `|β y2|` all breather derivatives are returned as
/// exact zeros (true magnitudes are below 1e-130).
pub const OVERFLOW_THRESHOLD: f64 = 300.0;

/// Default expansion size: derivatives of total order up to 5.
pub const DEFAULT_TERMS: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BreatherParams {
    alpha: f64,
    beta: f64,
    x1: f64,
    x2: f64,
}

/// Modulation shifts and distance to the boundary: the breather is placed
/// at `(x1 + rho1, x2 + rho2 + distance)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Shifts {
    pub rho1: f64,
    pub rho2: f64,
    pub distance: f64,
}

impl Shifts {
    pub fn at_distance(distance: f64) -> Self {
        Self {
            rho1: 0.0,
            rho2: 0.0,
            distance,
        }
    }

    pub fn new(rho1: f64, rho2: f64, distance: f64) -> Self {
        Self {
            rho1,
            rho2,
            distance,
        }
    }
}

impl BreatherParams {
    pub fn new(alpha: f64, beta: f64, x1: f64, x2: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParams(format!("alpha must be > 0, got {alpha}")));
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidParams(format!("beta must be > 0, got {beta}")));
        }
        if !(x1.is_finite() && x2.is_finite()) {
            return Err(Error::InvalidParams("shifts must be finite".into()));
        }
        Ok(Self {
            alpha,
            beta,
            x1,
            x2,
        })
    }

    /// Centered breather, `x1 = x2 = 0`.
    pub fn centered(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(alpha, beta, 0.0, 0.0)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }

    pub fn x2(&self) -> f64 {
        self.x2
    }

    /// Phase speed of the oscillation, `α² − 3β²`.
    pub fn delta(&self) -> f64 {
        self.alpha * self.alpha - 3.0 * self.beta * self.beta
    }

    /// Envelope speed parameter, `3α² − β²`; the envelope moves with velocity `−γ`.
    pub fn gamma(&self) -> f64 {
        3.0 * self.alpha * self.alpha - self.beta * self.beta
    }

    pub fn is_leftward(&self) -> bool {
        self.gamma() > 0.0
    }

    /// `β ≤ α`: the Lyapunov functional is monotone under homogeneous data.
    pub fn is_lyapunov_admissible(&self) -> bool {
        self.beta <= self.alpha
    }

    /// `β² − α²`
    pub fn beta2_minus_alpha2(&self) -> f64 {
        self.beta * self.beta - self.alpha * self.alpha
    }

    /// `(α² + β²)²`
    pub fn sum_squares_sq(&self) -> f64 {
        let s = self.alpha * self.alpha + self.beta * self.beta;
        s * s
    }

    pub fn with_shifts(&self, x1: f64, x2: f64) -> Self {
        Self { x1, x2, ..*self }
    }

    pub fn shifted(&self, shifts: Shifts) -> Self {
        Self {
            x1: self.x1 + shifts.rho1,
            x2: self.x2 + shifts.rho2 + shifts.distance,
            ..*self
        }
    }

    pub fn phases(&self, x: f64, t: f64) -> (f64, f64) {
        (x + self.delta() * t + self.x1, x + self.gamma() * t + self.x2)
    }

    /// Abscissa of the envelope center at time `t`.
    pub fn center(&self, t: f64) -> f64 {
        -(self.gamma() * t + self.x2)
    }
}

/// Taylor expansion of a breather-derived quantity in `(y1, y2)` together
/// with the phase speeds needed to map it to `(x, t, x1, x2)` derivatives.
#[derive(Clone, Copy, Debug)]
pub struct Expansion<const D: usize = DEFAULT_TERMS> {
    pub taylor: Bivariate<D>,
    delta: f64,
    gamma: f64,
}

impl<const D: usize> Expansion<D> {
    fn new(taylor: Bivariate<D>, p: &BreatherParams) -> Self {
        Self {
            taylor,
            delta: p.delta(),
            gamma: p.gamma(),
        }
    }

    pub fn value(&self) -> f64 {
        self.taylor.value()
    }

    /// `∂x^nx ∂t^nt ∂x1^n1 ∂x2^n2`; zero when the total order is not carried.
    pub fn partial(&self, nx: usize, nt: usize, n1: usize, n2: usize) -> f64 {
        let mut acc = 0.0;
        for i in 0..=nx {
            for j in 0..=nt {
                let w = binomial(nx, i)
                    * binomial(nt, j)
                    * self.delta.powi(j as i32)
                    * self.gamma.powi((nt - j) as i32);
                acc += w * self.taylor.partial(i + j + n1, nx - i + nt - j + n2);
            }
        }
        acc
    }

    pub fn dx(&self, k: usize) -> f64 {
        self.partial(k, 0, 0, 0)
    }
}

/// Value and partial derivatives of a scalar field at one point.
/// `dx[k]` is the k-th spatial derivative (`dx[0]` equals `value`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Jet {
    pub value: f64,
    pub dx: [f64; 5],
    pub dt: f64,
    pub dxt: f64,
    pub dx1: f64,
    pub dx2: f64,
}

impl Jet {
    pub fn zero() -> Self {
        Self {
            value: 0.0,
            dx: [0.0; 5],
            dt: 0.0,
            dxt: 0.0,
            dx1: 0.0,
            dx2: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.dx.iter().all(|v| v.is_finite())
            && [self.dt, self.dxt, self.dx1, self.dx2].iter().all(|v| v.is_finite())
    }
}

impl<const D: usize> From<&Expansion<D>> for Jet {
    fn from(e: &Expansion<D>) -> Self {
        Self {
            value: e.value(),
            dx: std::array::from_fn(|k| e.dx(k)),
            dt: e.partial(0, 1, 0, 0),
            dxt: e.partial(1, 1, 0, 0),
            dx1: e.partial(0, 0, 1, 0),
            dx2: e.partial(0, 0, 0, 1),
        }
    }
}

fn overflowed(p: &BreatherParams, y2: f64) -> bool {
    (p.beta * y2).abs() > OVERFLOW_THRESHOLD
}

fn breather_taylor<const D: usize>(p: &BreatherParams, y1: f64, y2: f64) -> Bivariate<D> {
    let (a, b) = (p.alpha, p.beta);
    let r = b / a;
    let ay1 = Bivariate::<D>::first(y1).scale(a);
    let by2 = Bivariate::<D>::second(y2).scale(b);
    let (sn, cs) = (ay1.sin(), ay1.cos());
    let (sech, tanh) = (by2.sech(), by2.tanh());
    let numer = cs - sn * tanh * r;
    let denom = (sn * sech).square().scale(r * r).add_scalar(1.0);
    (sech * numer).div(&denom).scale(2.0 * SQRT_2 * b)
}

fn primitive_taylor<const D: usize>(p: &BreatherParams, y1: f64, y2: f64) -> Bivariate<D> {
    let (a, b) = (p.alpha, p.beta);
    let sn = Bivariate::<D>::first(y1).scale(a).sin();
    let sech = Bivariate::<D>::second(y2).scale(b).sech();
    (sn * sech).scale(b / a).atan().scale(2.0 * SQRT_2)
}

fn mass_taylor<const D: usize>(p: &BreatherParams, y1: f64, y2: f64) -> Bivariate<D> {
    // Closed form rescaled by exp(-2β|y2|) so that neither numerator nor
    // denominator overflows; the limits 0 and 4β come out exactly.
    let (a, b) = (p.alpha, p.beta);
    let (a2, b2) = (a * a, b * b);
    let two_ay1 = Bivariate::<D>::first(y1).scale(2.0 * a);
    let (s, c) = (two_ay1.sin(), two_ay1.cos());
    let pp = (s.scale(a * b) - c.scale(b2)).add_scalar(a2 + b2);
    let qq = c.scale(-b2).add_scalar(a2 + b2);
    let y2v = Bivariate::<D>::second(y2);
    let (e, x) = if y2 >= 0.0 {
        (y2v.scale(-2.0 * b).exp(), Bivariate::constant(1.0))
    } else {
        let e = y2v.scale(2.0 * b).exp();
        (e, e.square())
    };
    let numer = (pp * e + x.scale(a2)).scale(2.0 * b);
    let denom = qq * e + e.square().add_scalar(1.0).scale(0.5 * a2);
    numer.div(&denom)
}

pub fn breather_expansion_with<const D: usize>(
    p: &BreatherParams,
    x: f64,
    t: f64,
) -> Expansion<D> {
    let (y1, y2) = p.phases(x, t);
    if overflowed(p, y2) {
        return Expansion::new(Bivariate::zero(), p);
    }
    Expansion::new(breather_taylor(p, y1, y2), p)
}

pub fn breather_expansion(p: &BreatherParams, x: f64, t: f64) -> Expansion {
    breather_expansion_with::<DEFAULT_TERMS>(p, x, t)
}

pub fn primitive_expansion(p: &BreatherParams, x: f64, t: f64) -> Expansion {
    let (y1, y2) = p.phases(x, t);
    if overflowed(p, y2) {
        return Expansion::new(Bivariate::zero(), p);
    }
    Expansion::new(primitive_taylor(p, y1, y2), p)
}

pub fn mass_expansion_with<const D: usize>(p: &BreatherParams, x: f64, t: f64) -> Expansion<D> {
    let (y1, y2) = p.phases(x, t);
    Expansion::new(mass_taylor(p, y1, y2), p)
}

/// Breather value and derivatives at `(x, t)`.
pub fn breather_jet(p: &BreatherParams, x: f64, t: f64) -> Jet {
    Jet::from(&breather_expansion(p, x, t))
}

/// Primitive `2√2 arctan((β/α) sin(αy1) / cosh(βy2))`; its `dx[1]` is the breather.
pub fn primitive_jet(p: &BreatherParams, x: f64, t: f64) -> Jet {
    Jet::from(&primitive_expansion(p, x, t))
}

/// `½ ∫_{-∞}^x B²(s, t) ds` in closed form.
pub fn mass_primitive(p: &BreatherParams, x: f64, t: f64) -> f64 {
    mass_expansion_with::<1>(p, x, t).value()
}

/// `∂x B` from the expanded rational form `4√2 αβ h1 / D²`. Independent of
/// the jet machinery; returns 0 for `|β y2| > 150`.
pub fn slope_closed_form(p: &BreatherParams, x: f64, t: f64) -> f64 {
    let (a, b) = (p.alpha, p.beta);
    let (y1, y2) = p.phases(x, t);
    if (b * y2).abs() > 150.0 {
        return 0.0;
    }
    let denom = a * a + b * b + a * a * (2.0 * b * y2).cosh() - b * b * (2.0 * a * y1).cos();
    let h1 = -(a * a + b * b) * (b * y2).cosh() * (a * y1).sin() * denom
        - 2.0
            * a
            * b
            * (a * (a * y1).cos() * (b * y2).cosh() - b * (a * y1).sin() * (b * y2).sinh())
            * (b * (2.0 * a * y1).sin() + a * (2.0 * b * y2).sinh());
    4.0 * SQRT_2 * a * b * h1 / (denom * denom)
}

/// Left-minus-right sides of the breather identities at one point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IdentityResiduals {
    /// `B_t + (B_xx + B³)_x`
    pub r_pde: f64,
    /// `B_xx + 𝔅_t + B³`
    pub r_bt: f64,
    /// `B_xt + 2 M_t B − 2(β²−α²) 𝔅_t − (α²+β²)² B`
    pub r_bxt: f64,
    /// Stationary equation `G[B]`.
    pub r_g: f64,
    /// `B_t` from the direct jet minus `∂x 𝔅_t`.
    pub r_bt_routes: f64,
}

impl IdentityResiduals {
    pub fn max_abs(&self) -> f64 {
        [self.r_pde, self.r_bt, self.r_bxt, self.r_g, self.r_bt_routes]
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

pub fn identity_residuals(p: &BreatherParams, x: f64, t: f64) -> IdentityResiduals {
    let b = breather_expansion(p, x, t);
    let prim = primitive_expansion(p, x, t);
    let mass = mass_expansion_with::<3>(p, x, t);

    let (u, ux, uxx, uxxx, u4x) = (b.dx(0), b.dx(1), b.dx(2), b.dx(3), b.dx(4));
    let ut = b.partial(0, 1, 0, 0);
    let uxt = b.partial(1, 1, 0, 0);
    let prim_t = prim.partial(0, 1, 0, 0);
    let mass_t = mass.partial(0, 1, 0, 0);
    let k = p.beta2_minus_alpha2();
    let s2 = p.sum_squares_sq();

    let r_pde = ut + uxxx + 3.0 * u * u * ux;
    let r_bt = uxx + prim_t + u * u * u;
    let r_bxt = uxt + 2.0 * mass_t * u - 2.0 * k * prim_t - s2 * u;
    let r_g = u4x - 2.0 * k * (uxx + u * u * u)
        + s2 * u
        + 5.0 * u * ux * ux
        + 5.0 * u * u * uxx
        + 1.5 * u.powi(5);
    let r_bt_routes = ut - prim.partial(1, 1, 0, 0);
    IdentityResiduals {
        r_pde,
        r_bt,
        r_bxt,
        r_g,
        r_bt_routes,
    }
}

/// Derivatives `∂j ∂x^k B(0, t; ρ1, ρ2 + L)` for `j ∈ {none, ρ1, ρ2}`, `k ≤ 3`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundaryTraces {
    pub trace: [[f64; 4]; 3],
    pub max_abs: f64,
    /// `max_abs / exp(−βL/2)`
    pub decay_ratio: f64,
}

pub fn boundary_traces(p: &BreatherParams, shifts: Shifts, t: f64) -> BoundaryTraces {
    let q = p.shifted(shifts);
    let e = breather_expansion(&q, 0.0, t);
    let trace: [[f64; 4]; 3] = std::array::from_fn(|j| {
        std::array::from_fn(|k| e.partial(k, 0, usize::from(j == 1), usize::from(j == 2)))
    });
    let max_abs = trace.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    let envelope = (-p.beta * shifts.distance / 2.0).exp();
    BoundaryTraces {
        trace,
        max_abs,
        decay_ratio: max_abs / envelope,
    }
}

/// Breather sampled on a grid.
pub fn sample(p: &BreatherParams, grid: &Grid, t: f64) -> Field {
    let u = grid
        .nodes()
        .map(|x| breather_expansion_with::<1>(p, x, t).value())
        .collect();
    Field::from_parts(*grid, u)
}

/// Breather jets at every node of a grid.
pub fn jets_on(p: &BreatherParams, grid: &Grid, t: f64) -> Vec<Jet> {
    grid.nodes().map(|x| breather_jet(p, x, t)).collect()
}

/// The breather and its first and second parameter derivatives at every node,
/// as `[B, B1, B2, B11, B12, B22]`.
pub fn parameter_derivatives_on(p: &BreatherParams, grid: &Grid, t: f64) -> Vec<[f64; 6]> {
    grid.nodes()
        .map(|x| {
            let e = breather_expansion_with::<3>(p, x, t);
            [
                e.value(),
                e.partial(0, 0, 1, 0),
                e.partial(0, 0, 0, 1),
                e.partial(0, 0, 2, 0),
                e.partial(0, 0, 1, 1),
                e.partial(0, 0, 0, 2),
            ]
        })
        .collect()
}
