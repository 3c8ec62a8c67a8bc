//! Uniform grids, sampled fields, finite-difference operators and
//! composite Simpson quadrature.

use serde::Serialize;

use crate::error::{Error, Result};

pub const MIN_NODES: usize = 16;

/// Formal accuracy of every finite-difference stencil used in the crate.
pub const STENCIL_ACCURACY: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Grid {
    x_left: f64,
    x_right: f64,
    n: usize,
    dx: f64,
}

impl Grid {
    pub fn new(x_left: f64, x_right: f64, n: usize) -> Result<Self> {
        if !(x_left.is_finite() && x_right.is_finite() && x_left < x_right) {
            return Err(Error::InvalidGrid(format!(
                "need finite x_left < x_right, got [{x_left}, {x_right}]"
            )));
        }
        if n < MIN_NODES {
            return Err(Error::InvalidGrid(format!("need n >= {MIN_NODES}, got {n}")));
        }
        Ok(Self {
            x_left,
            x_right,
            n,
            dx: (x_right - x_left) / (n - 1) as f64,
        })
    }

    /// Grid on `[x_left, 0]`.
    pub fn half_line(x_left: f64, n: usize) -> Result<Self> {
        if x_left >= 0.0 {
            return Err(Error::InvalidGrid(format!("half-line grid needs x_left < 0, got {x_left}")));
        }
        Self::new(x_left, 0.0, n)
    }

    pub fn x_left(&self) -> f64 {
        self.x_left
    }

    pub fn x_right(&self) -> f64 {
        self.x_right
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn is_half_line(&self) -> bool {
        self.x_right == 0.0
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.x_right
        } else {
            self.x_left + i as f64 * self.dx
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.node(i))
    }

    /// Same spacing, twice as many intervals.
    pub fn refined(&self) -> Self {
        Self::new(self.x_left, self.x_right, 2 * self.n - 1).expect("refinement of a valid grid")
    }

    /// Composite Simpson weights; requires an odd node count.
    pub fn simpson_weights(&self) -> Result<Vec<f64>> {
        if self.n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "Simpson quadrature needs an odd node count, got {}",
                self.n
            )));
        }
        let h3 = self.dx / 3.0;
        Ok((0..self.n)
            .map(|i| {
                if i == 0 || i + 1 == self.n {
                    h3
                } else if i % 2 == 1 {
                    4.0 * h3
                } else {
                    2.0 * h3
                }
            })
            .collect())
    }

    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        debug_assert_eq!(values.len(), self.n);
        let w = self.simpson_weights()?;
        Ok(w.iter().zip(values).map(|(w, v)| w * v).sum())
    }
}

/// Real samples on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    pub u: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, u: Vec<f64>) -> Result<Self> {
        if u.len() != grid.len() {
            return Err(Error::InvalidField(format!(
                "{} samples for a grid of {} nodes",
                u.len(),
                grid.len()
            )));
        }
        if let Some(i) = u.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!("non-finite sample at node {i}")));
        }
        Ok(Self { grid, u })
    }

    pub(crate) fn from_parts(grid: Grid, u: Vec<f64>) -> Self {
        Self { grid, u }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            u: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let u = grid.nodes().map(f).collect();
        Self { grid, u }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn validate(&self) -> Result<()> {
        if self.u.len() != self.grid.len() {
            return Err(Error::InvalidField("length does not match grid".into()));
        }
        if let Some(i) = self.u.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!("non-finite sample at node {i}")));
        }
        Ok(())
    }

    pub fn derivative(&self, order: usize) -> Vec<f64> {
        DiffOperator::new(&self.grid, order).apply(&self.u)
    }

    /// Derivative with stencils of the given (even) accuracy order.
    pub fn derivative_with(&self, order: usize, accuracy: usize) -> Vec<f64> {
        DiffOperator::with_accuracy(&self.grid, order, accuracy).apply(&self.u)
    }

    /// `order`-th derivative at one node.
    pub fn derivative_at(&self, order: usize, node: usize) -> f64 {
        DiffOperator::new(&self.grid, order).apply_at(&self.u, node)
    }

    /// `(∫ z² + z_x² + z_xx²)^½`
    pub fn h2_norm(&self) -> Result<f64> {
        let zx = self.derivative(1);
        let zxx = self.derivative(2);
        let dens: Vec<f64> = (0..self.u.len())
            .map(|i| self.u[i].powi(2) + zx[i].powi(2) + zxx[i].powi(2))
            .collect();
        Ok(self.grid.integrate(&dens)?.max(0.0).sqrt())
    }

    pub fn l2_norm(&self) -> Result<f64> {
        let dens: Vec<f64> = self.u.iter().map(|v| v * v).collect();
        Ok(self.grid.integrate(&dens)?.max(0.0).sqrt())
    }

    pub fn max_abs(&self) -> f64 {
        self.u.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            grid: self.grid,
            u: self.u.iter().map(|v| v * s).collect(),
        }
    }

    pub fn plus(&self, other: &Field) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            u: self.u.iter().zip(&other.u).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn minus(&self, other: &Field) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            u: self.u.iter().zip(&other.u).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Finite-difference weights for derivatives of order `0..=max_order` at `z`
/// from the points `xs` (Fornberg's recursion). `w[m][j]` weights `f(xs[j])`.
pub fn fornberg_weights(z: f64, xs: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - z;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - z;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

#[derive(Clone, Debug)]
struct Stencil {
    start: usize,
    weights: Vec<f64>,
}

/// Derivative operator on a uniform grid: centered stencils in the interior,
/// off-centered stencils of `order + accuracy` points near either end.
/// Accuracy is 4 unless chosen otherwise.
#[derive(Clone, Debug)]
pub struct DiffOperator {
    n: usize,
    order: usize,
    half_width: usize,
    central: Vec<f64>,
    left: Vec<Stencil>,
    right: Vec<Stencil>,
}

impl DiffOperator {
    pub fn new(grid: &Grid, order: usize) -> Self {
        Self::with_accuracy(grid, order, STENCIL_ACCURACY)
    }

    /// `accuracy` must be even and at least 2.
    pub fn with_accuracy(grid: &Grid, order: usize, accuracy: usize) -> Self {
        assert!(accuracy >= 2 && accuracy.is_multiple_of(2), "accuracy must be even and ≥ 2");
        let n = grid.len();
        let h = grid.dx();
        let half_width = if order == 0 { 0 } else { order.div_ceil(2) - 1 + accuracy / 2 };
        let offsets: Vec<f64> = (-(half_width as i64)..=half_width as i64).map(|k| k as f64).collect();
        let central = scaled_weights(0.0, &offsets, order, h);

        let width = if order == 0 { 1 } else { order + accuracy };
        let edge = half_width.min(n);
        let left = (0..edge)
            .map(|i| {
                let xs: Vec<f64> = (0..width).map(|j| j as f64).collect();
                Stencil {
                    start: 0,
                    weights: scaled_weights(i as f64, &xs, order, h),
                }
            })
            .collect();
        let right = (0..edge)
            .map(|k| {
                // k-th node from the right end
                let i = n - 1 - k;
                let start = n - width;
                let xs: Vec<f64> = (0..width).map(|j| j as f64).collect();
                Stencil {
                    start,
                    weights: scaled_weights((i - start) as f64, &xs, order, h),
                }
            })
            .collect();
        Self {
            n,
            order,
            half_width,
            central,
            left,
            right,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Start index and weights used at `node`.
    pub fn row(&self, node: usize) -> (usize, &[f64]) {
        if node < self.half_width {
            let s = &self.left[node];
            (s.start, &s.weights)
        } else if node + self.half_width >= self.n {
            let s = &self.right[self.n - 1 - node];
            (s.start, &s.weights)
        } else {
            (node - self.half_width, &self.central)
        }
    }

    pub fn apply_at(&self, u: &[f64], node: usize) -> f64 {
        let (start, w) = self.row(node);
        w.iter().zip(&u[start..start + w.len()]).map(|(w, v)| w * v).sum()
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        debug_assert_eq!(u.len(), self.n);
        (0..self.n).map(|i| self.apply_at(u, i)).collect()
    }
}

fn scaled_weights(z: f64, xs: &[f64], order: usize, h: f64) -> Vec<f64> {
    let w = fornberg_weights(z, xs, order);
    let scale = h.powi(order as i32);
    w[order].iter().map(|v| v / scale).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(Grid::new(-1.0, 0.0, 15).is_err());
        assert!(Grid::new(0.0, -1.0, 33).is_err());
        assert!(Grid::half_line(1.0, 33).is_err());
        let g = Grid::half_line(-8.0, 17).unwrap();
        assert_eq!(g.dx(), 0.5);
        assert_eq!(g.node(16), 0.0);
        assert!(g.is_half_line());
        assert!(Grid::new(-1.0, 0.0, 16).unwrap().simpson_weights().is_err());
    }

    #[test]
    fn field_rejects_non_finite() {
        let g = Grid::half_line(-1.0, 17).unwrap();
        let mut u = vec![0.0; 17];
        u[3] = f64::NAN;
        assert!(Field::new(g, u).is_err());
        assert!(Field::new(g, vec![0.0; 16]).is_err());
    }

    #[test]
    fn fornberg_central_third_derivative() {
        let xs: Vec<f64> = (-3..=3).map(|k| k as f64).collect();
        let w = fornberg_weights(0.0, &xs, 3);
        let expect = [1.0 / 8.0, -1.0, 13.0 / 8.0, 0.0, -13.0 / 8.0, 1.0, -1.0 / 8.0];
        for (a, b) in w[3].iter().zip(expect) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn simpson_is_exact_on_cubics() {
        let g = Grid::new(-2.0, 1.0, 17).unwrap();
        let v: Vec<f64> = g.nodes().map(|x| x * x * x - 2.0 * x + 1.0).collect();
        let exact = (1.0 / 4.0 - 1.0 + 1.0) - (4.0 - 4.0 - 2.0);
        assert!((g.integrate(&v).unwrap() - exact).abs() < 1e-13);
    }

    #[test]
    fn derivatives_exact_on_quartics_everywhere() {
        // 4th-order stencils differentiate degree-4 polynomials exactly,
        // including the off-centered rows at both ends.
        let g = Grid::new(-1.0, 2.0, 31).unwrap();
        let f = Field::from_fn(g, |x| 1.0 + x - 2.0 * x * x + 0.5 * x.powi(3) + 0.25 * x.powi(4));
        let exact: [fn(f64) -> f64; 4] = [
            |x| 1.0 - 4.0 * x + 1.5 * x * x + x.powi(3),
            |x| -4.0 + 3.0 * x + 3.0 * x * x,
            |x| 3.0 + 6.0 * x,
            |_| 6.0,
        ];
        for (m, e) in exact.iter().enumerate() {
            let d = f.derivative(m + 1);
            for (i, x) in g.nodes().enumerate() {
                assert!((d[i] - e(x)).abs() < 1e-8, "order {} node {i}", m + 1);
            }
        }
    }

    #[test]
    fn derivative_converges_at_fourth_order() {
        let err = |n| {
            let g = Grid::new(0.0, 1.0, n).unwrap();
            let f = Field::from_fn(g, |x| (3.0 * x).sin());
            let d = f.derivative(3);
            g.nodes()
                .enumerate()
                .map(|(i, x)| (d[i] + 27.0 * (3.0 * x).cos()).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(41) / err(81);
        assert!(ratio > 12.0, "ratio {ratio}");
    }
}
