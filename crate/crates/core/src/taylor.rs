//! Truncated Taylor arithmetic.
//!
//! [`Series`] holds the Taylor coefficients of a function of one variable
//! around a point; [`Bivariate`] holds the coefficients of a function of two
//! variables, truncated at total degree `D - 1`. Elementary functions are
//! applied to a [`Bivariate`] by composing the univariate expansion of the
//! function around the constant term with the non-constant part, so every
//! derivative carried by the result is exact up to rounding.

use std::ops::{Add, Mul, Neg, Sub};

/// Univariate truncated Taylor series: `c[k]` is the k-th coefficient
/// (the k-th derivative divided by k!).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Series<const D: usize> {
    pub c: [f64; D],
}

impl<const D: usize> Series<D> {
    pub fn zero() -> Self {
        Self { c: [0.0; D] }
    }

    pub fn constant(value: f64) -> Self {
        let mut c = [0.0; D];
        c[0] = value;
        Self { c }
    }

    /// The identity function expanded around `at`.
    pub fn variable(at: f64) -> Self {
        let mut c = [0.0; D];
        c[0] = at;
        if D > 1 {
            c[1] = 1.0;
        }
        Self { c }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut c = [0.0; D];
        for (i, a) in self.c.iter().enumerate() {
            for (j, b) in other.c[..D - i].iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Self { c }
    }

    /// Series reciprocal; the constant term must be nonzero.
    pub fn recip(&self) -> Self {
        let mut r = [0.0; D];
        r[0] = 1.0 / self.c[0];
        for k in 1..D {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += self.c[j] * r[k - j];
            }
            r[k] = -acc * r[0];
        }
        Self { c: r }
    }

    /// The k-th derivative at the expansion point.
    pub fn derivative(&self, k: usize) -> f64 {
        self.c[k] * factorial(k)
    }
}

/// Taylor coefficients of elementary functions around a point.
pub mod coeffs {
    use super::{factorial, Series};
    use std::f64::consts::FRAC_PI_2;

    pub fn sin<const D: usize>(a: f64) -> [f64; D] {
        std::array::from_fn(|k| (a + k as f64 * FRAC_PI_2).sin() / factorial(k))
    }

    pub fn cos<const D: usize>(a: f64) -> [f64; D] {
        std::array::from_fn(|k| (a + k as f64 * FRAC_PI_2).cos() / factorial(k))
    }

    pub fn sinh<const D: usize>(a: f64) -> [f64; D] {
        let (s, c) = (a.sinh(), a.cosh());
        std::array::from_fn(|k| if k % 2 == 0 { s } else { c } / factorial(k))
    }

    pub fn cosh<const D: usize>(a: f64) -> [f64; D] {
        let (s, c) = (a.sinh(), a.cosh());
        std::array::from_fn(|k| if k % 2 == 0 { c } else { s } / factorial(k))
    }

    pub fn exp<const D: usize>(a: f64) -> [f64; D] {
        let e = a.exp();
        std::array::from_fn(|k| e / factorial(k))
    }

    /// Coefficients of `sech` and `tanh` from `sech' = -sech tanh`,
    /// `tanh' = sech^2`. Both stay bounded for any `a`.
    pub fn sech_tanh<const D: usize>(a: f64) -> ([f64; D], [f64; D]) {
        let mut s = [0.0; D];
        let mut t = [0.0; D];
        s[0] = 1.0 / a.cosh();
        t[0] = a.tanh();
        for k in 0..D - 1 {
            let mut st = 0.0;
            let mut ss = 0.0;
            for j in 0..=k {
                st += s[j] * t[k - j];
                ss += s[j] * s[k - j];
            }
            s[k + 1] = -st / (k + 1) as f64;
            t[k + 1] = ss / (k + 1) as f64;
        }
        (s, t)
    }

    pub fn atan<const D: usize>(a: f64) -> [f64; D] {
        // atan'(a + h) = 1 / (1 + (a + h)^2)
        let mut q = Series::<D>::zero();
        q.c[0] = 1.0 + a * a;
        if D > 1 {
            q.c[1] = 2.0 * a;
        }
        if D > 2 {
            q.c[2] = 1.0;
        }
        let r = q.recip();
        let mut out = [0.0; D];
        out[0] = a.atan();
        for k in 1..D {
            out[k] = r.c[k - 1] / k as f64;
        }
        out
    }

    pub fn recip<const D: usize>(a: f64) -> [f64; D] {
        let inv = 1.0 / a;
        let mut out = [0.0; D];
        let mut p = inv;
        for (k, o) in out.iter_mut().enumerate() {
            *o = if k % 2 == 0 { p } else { -p };
            p *= inv;
        }
        out
    }
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Bivariate truncated Taylor polynomial: `c[i][j]` multiplies
/// `h1^i h2^j`, kept for `i + j < D`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bivariate<const D: usize> {
    pub c: [[f64; D]; D],
}

impl<const D: usize> Bivariate<D> {
    pub fn zero() -> Self {
        Self { c: [[0.0; D]; D] }
    }

    pub fn constant(value: f64) -> Self {
        let mut out = Self::zero();
        out.c[0][0] = value;
        out
    }

    /// First coordinate expanded around `at`.
    pub fn first(at: f64) -> Self {
        let mut out = Self::constant(at);
        if D > 1 {
            out.c[1][0] = 1.0;
        }
        out
    }

    /// Second coordinate expanded around `at`.
    pub fn second(at: f64) -> Self {
        let mut out = Self::constant(at);
        if D > 1 {
            out.c[0][1] = 1.0;
        }
        out
    }

    pub fn value(&self) -> f64 {
        self.c[0][0]
    }

    /// `∂1^i ∂2^j` at the expansion point; zero beyond the truncation.
    pub fn partial(&self, i: usize, j: usize) -> f64 {
        if i + j >= D {
            return 0.0;
        }
        self.c[i][j] * factorial(i) * factorial(j)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        out.c.iter_mut().flatten().for_each(|v| *v *= s);
        out
    }

    pub fn add_scalar(&self, s: f64) -> Self {
        let mut out = *self;
        out.c[0][0] += s;
        out
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().flatten().all(|v| v.is_finite())
    }

    /// `f(self)` where `f` has Taylor coefficients `f` around `self.value()`.
    pub fn compose(&self, f: &[f64; D]) -> Self {
        let mut h = *self;
        h.c[0][0] = 0.0;
        let mut out = Self::constant(f[D - 1]);
        for k in (0..D - 1).rev() {
            out = (out * h).add_scalar(f[k]);
        }
        out
    }

    pub fn sin(&self) -> Self {
        self.compose(&coeffs::sin(self.value()))
    }

    pub fn cos(&self) -> Self {
        self.compose(&coeffs::cos(self.value()))
    }

    pub fn sinh(&self) -> Self {
        self.compose(&coeffs::sinh(self.value()))
    }

    pub fn cosh(&self) -> Self {
        self.compose(&coeffs::cosh(self.value()))
    }

    pub fn exp(&self) -> Self {
        self.compose(&coeffs::exp(self.value()))
    }

    pub fn sech(&self) -> Self {
        self.compose(&coeffs::sech_tanh(self.value()).0)
    }

    pub fn tanh(&self) -> Self {
        self.compose(&coeffs::sech_tanh(self.value()).1)
    }

    pub fn atan(&self) -> Self {
        self.compose(&coeffs::atan(self.value()))
    }

    pub fn recip(&self) -> Self {
        self.compose(&coeffs::recip(self.value()))
    }

    pub fn div(&self, other: &Self) -> Self {
        *self * other.recip()
    }

    pub fn square(&self) -> Self {
        *self * *self
    }
}

impl<const D: usize> Add for Bivariate<D> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for (a, b) in self.c.iter_mut().flatten().zip(rhs.c.iter().flatten()) {
            *a += b;
        }
        self
    }
}

impl<const D: usize> Sub for Bivariate<D> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for (a, b) in self.c.iter_mut().flatten().zip(rhs.c.iter().flatten()) {
            *a -= b;
        }
        self
    }
}

impl<const D: usize> Neg for Bivariate<D> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl<const D: usize> Mul for Bivariate<D> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut out = Self::zero();
        for i1 in 0..D {
            for j1 in 0..D - i1 {
                let a = self.c[i1][j1];
                if a == 0.0 {
                    continue;
                }
                for i2 in 0..D - i1 - j1 {
                    for j2 in 0..D - i1 - j1 - i2 {
                        out.c[i1 + i2][j1 + j2] += a * rhs.c[i2][j2];
                    }
                }
            }
        }
        out
    }
}

impl<const D: usize> Mul<f64> for Bivariate<D> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self.scale(rhs)
    }
}
