//! Discrete quadratic form of the linearized operator on the full line and
//! its constrained Rayleigh-quotient spectrum.

use dyn_stack::{MemBuffer, MemStack};
use faer::linalg::householder;
use faer::linalg::triangular_solve::solve_lower_triangular_in_place;
use faer::{Conj, Mat, Side};
use serde::Serialize;

use crate::breather::{self, BreatherParams, Shifts};
use crate::error::{Error, Result};
use crate::functionals::OperatorCoefficients;
use crate::grid::{fornberg_weights, Field, Grid};

/// Required `β · (distance from breather center to either edge)`.
pub const MIN_EDGE_DECAY: f64 = 30.0;
/// Largest admissible `(α + β) · dx`.
pub const MAX_RESOLUTION: f64 = 0.5;
/// Zero nodes padded on either side of the grid.
const HALO: usize = 2;
/// Smallest quotients reported.
pub const REPORTED_EIGENVALUES: usize = 10;

#[derive(Clone, Debug)]
pub struct DiscreteForm {
    pub grid: Grid,
    pub params: BreatherParams,
    pub t: f64,
    /// `Σ w [(D2z)² + c1 (D1z)² + c0 z²]` as a symmetric matrix.
    pub q_matrix: Mat<f64>,
    /// `Σ w [z² + (D1z)² + (D2z)²]`
    pub s_matrix: Mat<f64>,
    /// Sampled B₁, B₂, B.
    pub constraints: [Vec<f64>; 3],
    weights: Vec<f64>,
}

fn check_grid(grid: &Grid, p: &BreatherParams, t: f64) -> Result<()> {
    let c = p.center(t);
    let room = (c - grid.x_left()).min(grid.x_right() - c);
    if p.beta() * room < MIN_EDGE_DECAY {
        return Err(Error::InvalidGrid(format!(
            "breather center {c:.3} is within {:.1}/β of an edge",
            MIN_EDGE_DECAY
        )));
    }
    let r = (p.alpha() + p.beta()) * grid.dx();
    if r > MAX_RESOLUTION {
        return Err(Error::UnderResolved(format!(
            "(α + β)·dx = {r:.3} exceeds {MAX_RESOLUTION}"
        )));
    }
    Ok(())
}

/// Centered stencils for `z`, `z_x`, `z_xx` with half width 2.
fn centered_rows(dx: f64) -> [[f64; 5]; 3] {
    let xs = [-2.0, -1.0, 0.0, 1.0, 2.0];
    let w = fornberg_weights(0.0, &xs, 2);
    let mut out = [[0.0; 5]; 3];
    for (m, row) in out.iter_mut().enumerate() {
        for j in 0..5 {
            row[j] = w[m][j] / dx.powi(m as i32);
        }
    }
    out
}

/// Adds `scale · (r·z)²` for the stencil `r` centered at extended node `k`;
/// unknowns are the grid nodes, extended nodes `0..HALO` lie left of the grid.
fn add_outer(m: &mut Mat<f64>, n: usize, k: usize, row: &[f64; 5], scale: f64) {
    let cols: Vec<(usize, f64)> = (0..5)
        .filter_map(|j| {
            let e = k + j;
            (e >= 2 * HALO && e < n + 2 * HALO).then(|| (e - 2 * HALO, row[j]))
        })
        .collect();
    for &(a, wa) in &cols {
        for &(b, wb) in &cols {
            m[(a, b)] += scale * wa * wb;
        }
    }
}

fn symmetrize(m: &mut Mat<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

impl DiscreteForm {
    /// Weak-form assembly around the breather `p` (its own shifts) at time `t`.
    pub fn assemble(p: &BreatherParams, t: f64, grid: &Grid) -> Result<Self> {
        check_grid(grid, p, t)?;
        let c = OperatorCoefficients::new(grid, p, Shifts::default(), t);
        Self::from_coefficients(p, t, grid, &c)
    }

    /// Same assembly with the breather coefficients removed.
    pub fn assemble_without_breather(p: &BreatherParams, t: f64, grid: &Grid) -> Result<Self> {
        check_grid(grid, p, t)?;
        let c = OperatorCoefficients::without_breather(grid, p);
        Self::from_coefficients(p, t, grid, &c)
    }

    fn from_coefficients(p: &BreatherParams, t: f64, grid: &Grid, c: &OperatorCoefficients) -> Result<Self> {
        let n = grid.len();
        let dx = grid.dx();
        let rows = centered_rows(dx);
        let mut q = Mat::<f64>::zeros(n, n);
        let mut s = Mat::<f64>::zeros(n, n);
        // Extended node k sits at grid index k - HALO; its stencil starts at k - 2·HALO.
        for k in 0..n + 2 * HALO {
            let i = k.min(n + HALO - 1).saturating_sub(HALO);
            add_outer(&mut q, n, k, &rows[2], dx);
            add_outer(&mut q, n, k, &rows[1], dx * c.w1[i]);
            add_outer(&mut s, n, k, &rows[2], dx);
            add_outer(&mut s, n, k, &rows[1], dx);
            if (HALO..n + HALO).contains(&k) {
                q[(i, i)] += dx * c.w0[i];
                s[(i, i)] += dx;
            }
        }
        symmetrize(&mut q);
        symmetrize(&mut s);
        let d = breather::parameter_derivatives_on(p, grid, t);
        let constraints = [
            d.iter().map(|r| r[1]).collect(),
            d.iter().map(|r| r[2]).collect(),
            d.iter().map(|r| r[0]).collect(),
        ];
        Ok(Self {
            grid: *grid,
            params: *p,
            t,
            q_matrix: q,
            s_matrix: s,
            constraints,
            weights: vec![dx; n],
        })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.len() == 0
    }

    fn quadratic(m: &Mat<f64>, z: &[f64]) -> f64 {
        let n = z.len();
        let mut acc = 0.0;
        for j in 0..n {
            if z[j] == 0.0 {
                continue;
            }
            let mut col = 0.0;
            for i in 0..n {
                col += m[(i, j)] * z[i];
            }
            acc += col * z[j];
        }
        acc
    }

    /// `zᵀQz / zᵀSz`
    pub fn rayleigh_quotient(&self, z: &Field) -> Result<f64> {
        if z.grid() != &self.grid {
            return Err(Error::InvalidGrid("field and form live on different grids".into()));
        }
        z.validate()?;
        let den = Self::quadratic(&self.s_matrix, &z.u);
        if den <= 0.0 {
            return Err(Error::InvalidField("zero field has no Rayleigh quotient".into()));
        }
        Ok(Self::quadratic(&self.q_matrix, &z.u) / den)
    }

    /// Rayleigh quotient of the sampled kernel direction B₁ (`j = 0`) or B₂ (`j = 1`).
    pub fn kernel_quotient(&self, j: usize) -> Result<f64> {
        let f = Field::new(self.grid, self.constraints[j].clone())?;
        self.rayleigh_quotient(&f)
    }

    /// Largest `|Q − Qᵀ|` entry.
    pub fn asymmetry(&self) -> f64 {
        let n = self.len();
        let mut m = 0.0f64;
        for i in 0..n {
            for j in 0..i {
                m = m.max((self.q_matrix[(i, j)] - self.q_matrix[(j, i)]).abs());
            }
        }
        m
    }

    /// Ascending Rayleigh quotients of Q relative to S on
    /// `{z : Σ wᵢ aᵢ zᵢ = 0}` for the chosen constraint rows.
    pub fn constrained_spectrum(&self, constraints: &[usize]) -> Result<Vec<f64>> {
        let n = self.len();
        let m = constraints.len();
        let (q, s) = if m == 0 {
            (self.q_matrix.clone(), self.s_matrix.clone())
        } else {
            let a = Mat::from_fn(n, m, |i, j| self.weights[i] * self.constraints[constraints[j]][i]);
            let qr = a.qr();
            let basis = qr.Q_basis();
            let coeff = qr.Q_coeff();
            let par = faer::get_global_parallelism();
            let project = |src: &Mat<f64>| {
                let mut x = src.clone();
                let left = householder::apply_block_householder_sequence_transpose_on_the_left_in_place_scratch::<f64>(
                    n,
                    coeff.nrows(),
                    n,
                );
                let right =
                    householder::apply_block_householder_sequence_on_the_right_in_place_scratch::<f64>(n, coeff.nrows(), n);
                let mut buf = MemBuffer::new(left.or(right));
                householder::apply_block_householder_sequence_transpose_on_the_left_in_place_with_conj(
                    basis,
                    coeff,
                    Conj::No,
                    x.as_mut(),
                    par,
                    MemStack::new(&mut buf),
                );
                householder::apply_block_householder_sequence_on_the_right_in_place_with_conj(
                    basis,
                    coeff,
                    Conj::No,
                    x.as_mut(),
                    par,
                    MemStack::new(&mut buf),
                );
                let mut r = x.get(m.., m..).to_owned();
                symmetrize(&mut r);
                r
            };
            (project(&self.q_matrix), project(&self.s_matrix))
        };
        generalized_eigenvalues(&q, &s)
    }
}

/// Eigenvalues of `L⁻¹ Q L⁻ᵀ` with `S = LLᵀ`, ascending.
fn generalized_eigenvalues(q: &Mat<f64>, s: &Mat<f64>) -> Result<Vec<f64>> {
    let llt = s
        .llt(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("S is not positive definite: {e:?}")))?;
    let l = llt.L();
    let par = faer::get_global_parallelism();
    let mut x = q.clone();
    solve_lower_triangular_in_place(l, x.as_mut(), par);
    let mut y = x.transpose().to_owned();
    solve_lower_triangular_in_place(l, y.as_mut(), par);
    symmetrize(&mut y);
    let mut ev = y
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoercivityReport {
    /// Smallest quotient under the B₁, B₂ constraints.
    pub min_eig_constrained: f64,
    /// Smallest quotient with B added to the constraints.
    pub min_eig_triple: f64,
    pub mu0_estimate: f64,
    pub correction_needed: bool,
    /// Smallest quotients of the subspace that defines `mu0_estimate`.
    pub smallest: Vec<f64>,
}

pub fn coercivity_check(form: &DiscreteForm) -> Result<CoercivityReport> {
    let double = form.constrained_spectrum(&[0, 1])?;
    let triple = form.constrained_spectrum(&[0, 1, 2])?;
    let min_double = double.first().copied().unwrap_or(f64::NAN);
    let min_triple = triple.first().copied().unwrap_or(f64::NAN);
    let correction_needed = !(min_double > 0.0);
    let chosen = if correction_needed { &triple } else { &double };
    Ok(CoercivityReport {
        min_eig_constrained: min_double,
        min_eig_triple: min_triple,
        mu0_estimate: if correction_needed { min_triple } else { min_double },
        correction_needed,
        smallest: chosen.iter().take(REPORTED_EIGENVALUES).copied().collect(),
    })
}

/// Fourier symbol of the constant-coefficient operator,
/// `k⁴ + 2(β² − α²)k² + (α² + β²)²`.
pub fn constant_symbol(p: &BreatherParams, k: f64) -> f64 {
    let k2 = k * k;
    k2 * k2 + 2.0 * p.beta2_minus_alpha2() * k2 + p.sum_squares_sq()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_narrow_or_coarse_grids() {
        let p = BreatherParams::centered(1.0, 1.0).unwrap();
        let g = Grid::new(-20.0, 20.0, 401).unwrap();
        assert!(matches!(DiscreteForm::assemble(&p, 0.0, &g), Err(Error::InvalidGrid(_))));
        let g = Grid::new(-60.0, 60.0, 101).unwrap();
        assert!(matches!(DiscreteForm::assemble(&p, 0.0, &g), Err(Error::UnderResolved(_))));
    }

    #[test]
    fn matrices_are_symmetric_by_construction() {
        let p = BreatherParams::centered(1.0, 1.0).unwrap();
        let g = Grid::new(-40.0, 40.0, 321).unwrap();
        let f = DiscreteForm::assemble(&p, 0.0, &g).unwrap();
        assert_eq!(f.asymmetry(), 0.0);
    }

    #[test]
    fn constraints_only_raise_the_minimum() {
        let p = BreatherParams::centered(1.0, 1.0).unwrap();
        let g = Grid::new(-40.0, 40.0, 321).unwrap();
        let f = DiscreteForm::assemble(&p, 0.0, &g).unwrap();
        let free = f.constrained_spectrum(&[]).unwrap()[0];
        let two = f.constrained_spectrum(&[0, 1]).unwrap()[0];
        let three = f.constrained_spectrum(&[0, 1, 2]).unwrap()[0];
        assert!(free <= two + 1e-12 && two <= three + 1e-12, "{free} {two} {three}");
    }

    #[test]
    fn breather_free_form_is_positive() {
        let p = BreatherParams::centered(3.0, 1.0).unwrap();
        let g = Grid::new(-40.0, 40.0, 801).unwrap();
        let f = DiscreteForm::assemble_without_breather(&p, 0.0, &g).unwrap();
        let low = f.constrained_spectrum(&[]).unwrap()[0];
        let floor = (0..400)
            .map(|i| {
                let k = 0.05 * i as f64;
                constant_symbol(&p, k) / (1.0 + k * k + k.powi(4))
            })
            .fold(f64::INFINITY, f64::min);
        assert!(low > 0.0 && low > 0.9 * floor, "{low} {floor}");
    }

    #[test]
    fn symbol_is_positive() {
        for (a, b) in [(1.0, 1.0), (3.0, 1.0), (1.0, 3.0)] {
            let p = BreatherParams::centered(a, b).unwrap();
            for k in [0.0, 0.5, 1.0, 2.0, 3.0, 5.0] {
                assert!(constant_symbol(&p, k) > 0.0);
            }
        }
    }
}
