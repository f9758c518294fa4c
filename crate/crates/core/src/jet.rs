//! Third-order jets: a scalar value together with all of its partial
//! derivatives through order three at a single point.
//!
//! Every component function of a structure is evaluated on jets seeded at
//! the coordinates of a point, so Christoffel symbols, curvature and the
//! covariant derivative of curvature come out at machine precision without
//! finite differencing.
//!
//! A jet carries the highest order it is valid to (`order()`). Taking a
//! partial derivative lowers it by one; binary operations keep the minimum of
//! their operands. Second and third derivative blocks are stored densely but
//! are filled from the sorted index tuple and mirrored, so they are exactly
//! symmetric.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

/// Highest derivative order tracked by a jet.
pub const MAX_ORDER: usize = 3;

/// Failure of an elementary function on a jet whose value lies outside the
/// function's domain.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum JetError {
    #[error("{function} undefined at argument {argument} (argument depends on coordinate(s) {coords:?})")]
    Domain {
        function: &'static str,
        argument: f64,
        /// Coordinate slots the offending argument varies with.
        coords: Vec<usize>,
    },
}

#[derive(Clone, PartialEq)]
pub struct Jet3 {
    dim: usize,
    order: usize,
    value: f64,
    d1: Vec<f64>,
    d2: Vec<f64>,
    d3: Vec<f64>,
}

impl fmt::Debug for Jet3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet3")
            .field("dim", &self.dim)
            .field("order", &self.order)
            .field("value", &self.value)
            .field("d1", &self.d1)
            .finish_non_exhaustive()
    }
}

#[inline]
fn i2(dim: usize, i: usize, j: usize) -> usize {
    i * dim + j
}

#[inline]
fn i3(dim: usize, i: usize, j: usize, k: usize) -> usize {
    (i * dim + j) * dim + k
}

/// Fills a dense symmetric `dim x dim` block from `entry(i, j)` with `i <= j`.
fn fill_sym2(dim: usize, mut entry: impl FnMut(usize, usize) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in i..dim {
            let v = entry(i, j);
            out[i2(dim, i, j)] = v;
            out[i2(dim, j, i)] = v;
        }
    }
    out
}

/// Fills a dense fully symmetric `dim^3` block from `entry(i, j, k)` with
/// `i <= j <= k`.
fn fill_sym3(dim: usize, mut entry: impl FnMut(usize, usize, usize) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; dim * dim * dim];
    for i in 0..dim {
        for j in i..dim {
            for k in j..dim {
                let v = entry(i, j, k);
                for (a, b, c) in [(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)] {
                    out[i3(dim, a, b, c)] = v;
                }
            }
        }
    }
    out
}

impl Jet3 {
    /// A constant: all derivatives vanish (valid to every order).
    pub fn constant(value: f64, dim: usize) -> Self {
        Self {
            dim,
            order: MAX_ORDER,
            value,
            d1: vec![0.0; dim],
            d2: vec![0.0; dim * dim],
            d3: vec![0.0; dim * dim * dim],
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::constant(0.0, dim)
    }

    /// The coordinate function `x^index`, seeded at `value`.
    pub fn variable(value: f64, index: usize, dim: usize) -> Self {
        assert!(index < dim, "variable index {index} out of range for dim {dim}");
        let mut jet = Self::constant(value, dim);
        jet.d1[index] = 1.0;
        jet
    }

    /// Seeds one variable jet per coordinate of `coords`.
    pub fn variables(coords: &[f64]) -> Vec<Self> {
        let dim = coords.len();
        coords
            .iter()
            .enumerate()
            .map(|(i, &x)| Self::variable(x, i, dim))
            .collect()
    }

    /// Builds a jet from raw derivative blocks. Blocks beyond `order` are
    /// ignored; the second and third blocks are symmetrized from their
    /// sorted-index entries.
    pub fn from_parts(value: f64, d1: &[f64], d2: &[f64], d3: &[f64]) -> Self {
        let dim = d1.len();
        assert_eq!(d2.len(), dim * dim, "second-derivative block has wrong length");
        assert_eq!(d3.len(), dim * dim * dim, "third-derivative block has wrong length");
        Self {
            dim,
            order: MAX_ORDER,
            value,
            d1: d1.to_vec(),
            d2: fill_sym2(dim, |i, j| d2[i2(dim, i, j)]),
            d3: fill_sym3(dim, |i, j, k| d3[i3(dim, i, j, k)]),
        }
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.value
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Highest derivative order this jet carries valid data for.
    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn gradient(&self) -> &[f64] {
        assert!(self.order >= 1, "gradient requested from an order-0 jet");
        &self.d1
    }

    pub fn d1(&self, i: usize) -> f64 {
        assert!(self.order >= 1);
        self.d1[i]
    }

    pub fn d2(&self, i: usize, j: usize) -> f64 {
        assert!(self.order >= 2);
        self.d2[i2(self.dim, i, j)]
    }

    pub fn d3(&self, i: usize, j: usize, k: usize) -> f64 {
        assert!(self.order >= 3);
        self.d3[i3(self.dim, i, j, k)]
    }

    /// True when the value and every valid derivative block vanish.
    pub fn is_zero(&self) -> bool {
        self.value == 0.0
            && (self.order < 1 || self.d1.iter().all(|&d| d == 0.0))
            && (self.order < 2 || self.d2.iter().all(|&d| d == 0.0))
            && (self.order < 3 || self.d3.iter().all(|&d| d == 0.0))
    }

    /// The partial derivative `∂_index` as a jet one order lower.
    pub fn partial(&self, index: usize) -> Self {
        assert!(self.order >= 1, "cannot differentiate an order-0 jet");
        let dim = self.dim;
        let order = self.order - 1;
        let mut out = Self::empty(dim, order, self.d1[index]);
        if order >= 1 {
            for j in 0..dim {
                out.d1[j] = self.d2[i2(dim, index, j)];
            }
        }
        if order >= 2 {
            out.d2 = self.d3[i3(dim, index, 0, 0)..i3(dim, index + 1, 0, 0)].to_vec();
        }
        out
    }

    /// Drops derivative data above `order`.
    pub fn truncated(&self, order: usize) -> Self {
        let mut out = self.clone();
        out.order = out.order.min(order);
        if out.order < 3 {
            out.d3 = Vec::new();
        }
        if out.order < 2 {
            out.d2 = Vec::new();
        }
        if out.order < 1 {
            out.d1 = Vec::new();
        }
        out
    }

    fn check_dim(&self, other: &Self) {
        assert_eq!(self.dim, other.dim, "jet dimension mismatch");
    }

    /// A jet with only the first-derivative block allocated (zeroed) when
    /// `order >= 1`; higher blocks are left for the caller to fill.
    fn empty(dim: usize, order: usize, value: f64) -> Self {
        Self {
            dim,
            order,
            value,
            d1: if order >= 1 { vec![0.0; dim] } else { Vec::new() },
            d2: Vec::new(),
            d3: Vec::new(),
        }
    }

    /// Coordinates this jet's first derivative is non-zero in.
    fn support(&self) -> Vec<usize> {
        if self.order == 0 {
            return Vec::new();
        }
        (0..self.dim).filter(|&i| self.d1[i] != 0.0).collect()
    }

    fn domain_error(&self, function: &'static str) -> JetError {
        JetError::Domain {
            function,
            argument: self.value,
            coords: self.support(),
        }
    }

    /// Composes a univariate function, given its value and first three
    /// derivatives at `self.value()`, with this jet (Faà di Bruno to order 3).
    pub fn compose(&self, f: [f64; 4]) -> Self {
        let dim = self.dim;
        let [f0, f1, f2, f3] = f;
        let mut out = Self::empty(dim, self.order, f0);
        let a1 = &self.d1;
        if self.order >= 1 {
            for i in 0..dim {
                out.d1[i] = f1 * a1[i];
            }
        }
        if self.order >= 2 {
            let a2 = &self.d2;
            out.d2 = fill_sym2(dim, |i, j| f2 * a1[i] * a1[j] + f1 * a2[i2(dim, i, j)]);
        }
        if self.order >= 3 {
            let a2 = &self.d2;
            let a3 = &self.d3;
            out.d3 = fill_sym3(dim, |i, j, k| {
                f3 * a1[i] * a1[j] * a1[k]
                    + f2 * (a2[i2(dim, i, j)] * a1[k] + a2[i2(dim, i, k)] * a1[j] + a2[i2(dim, j, k)] * a1[i])
                    + f1 * a3[i3(dim, i, j, k)]
            });
        }
        out
    }

    pub fn exp(&self) -> Self {
        let e = self.value.exp();
        self.compose([e, e, e, e])
    }

    pub fn ln(&self) -> Result<Self, JetError> {
        let v = self.value;
        if !(v > 0.0) {
            return Err(self.domain_error("ln"));
        }
        let r = 1.0 / v;
        Ok(self.compose([v.ln(), r, -r * r, 2.0 * r * r * r]))
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.compose([s, c, -s, -c])
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.compose([c, -s, -c, s])
    }

    pub fn atan(&self) -> Self {
        let v = self.value;
        let q = 1.0 / (1.0 + v * v);
        self.compose([v.atan(), q, -2.0 * v * q * q, (6.0 * v * v - 2.0) * q * q * q])
    }

    pub fn recip(&self) -> Result<Self, JetError> {
        let v = self.value;
        if v == 0.0 || !v.is_finite() {
            return Err(self.domain_error("reciprocal"));
        }
        let r = 1.0 / v;
        Ok(self.compose([r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r]))
    }

    /// Integer power; defined everywhere except at zero for negative
    /// exponents.
    pub fn powi(&self, n: i32) -> Result<Self, JetError> {
        let v = self.value;
        if v == 0.0 && n < 0 {
            return Err(self.domain_error("powi"));
        }
        let nf = n as f64;
        let term = |m: i32, coeff: f64| if coeff == 0.0 { 0.0 } else { coeff * v.powi(n - m) };
        Ok(self.compose([
            v.powi(n),
            term(1, nf),
            term(2, nf * (nf - 1.0)),
            term(3, nf * (nf - 1.0) * (nf - 2.0)),
        ]))
    }

    /// Real power of a positive base.
    pub fn powf(&self, p: f64) -> Result<Self, JetError> {
        if p.fract() == 0.0 && p.abs() < i32::MAX as f64 {
            return self.powi(p as i32);
        }
        let v = self.value;
        if !(v > 0.0) {
            return Err(self.domain_error("powf"));
        }
        Ok(self.compose([
            v.powf(p),
            p * v.powf(p - 1.0),
            p * (p - 1.0) * v.powf(p - 2.0),
            p * (p - 1.0) * (p - 2.0) * v.powf(p - 3.0),
        ]))
    }

    pub fn sqrt(&self) -> Result<Self, JetError> {
        if !(self.value > 0.0) {
            return Err(self.domain_error("sqrt"));
        }
        self.powf(0.5)
    }

    /// `self^other` for a jet-valued exponent, via `exp(other * ln self)`.
    pub fn pow(&self, other: &Self) -> Result<Self, JetError> {
        if (other.clone() - other.value).is_zero() {
            // constant exponent keeps negative bases usable for integer powers
            return self.powf(other.value);
        }
        Ok((other * &self.ln()?).exp())
    }

    pub fn try_div(&self, other: &Self) -> Result<Self, JetError> {
        Ok(self * &other.recip()?)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.value *= s;
        out.d1.iter_mut().for_each(|x| *x *= s);
        out.d2.iter_mut().for_each(|x| *x *= s);
        out.d3.iter_mut().for_each(|x| *x *= s);
        out
    }

    fn zip(&self, other: &Self, op: impl Fn(f64, f64) -> f64) -> Self {
        self.check_dim(other);
        let order = self.order.min(other.order);
        let mut out = Self::empty(self.dim, 0, op(self.value, other.value));
        out.order = order;
        let blocks: [(&mut Vec<f64>, &Vec<f64>, &Vec<f64>); 3] = [
            (&mut out.d1, &self.d1, &other.d1),
            (&mut out.d2, &self.d2, &other.d2),
            (&mut out.d3, &self.d3, &other.d3),
        ];
        for (level, (dst, a, b)) in blocks.into_iter().enumerate() {
            if order > level {
                *dst = a.iter().zip(b.iter()).map(|(&x, &y)| op(x, y)).collect();
            }
        }
        out
    }

    fn product(&self, other: &Self) -> Self {
        self.check_dim(other);
        let dim = self.dim;
        let order = self.order.min(other.order);
        let (a, b) = (self.value, other.value);
        let mut out = Self::empty(dim, order, a * b);
        let (a1, b1) = (&self.d1, &other.d1);
        if order >= 1 {
            for i in 0..dim {
                out.d1[i] = a1[i] * b + a * b1[i];
            }
        }
        if order >= 2 {
            let (a2, b2) = (&self.d2, &other.d2);
            out.d2 = fill_sym2(dim, |i, j| {
                let ij = i2(dim, i, j);
                a2[ij] * b + a1[i] * b1[j] + a1[j] * b1[i] + a * b2[ij]
            });
        }
        if order >= 3 {
            let (a2, b2) = (&self.d2, &other.d2);
            let (a3, b3) = (&self.d3, &other.d3);
            out.d3 = fill_sym3(dim, |i, j, k| {
                let (ij, ik, jk) = (i2(dim, i, j), i2(dim, i, k), i2(dim, j, k));
                let ijk = i3(dim, i, j, k);
                a3[ijk] * b
                    + a2[ij] * b1[k]
                    + a2[ik] * b1[j]
                    + a2[jk] * b1[i]
                    + a1[i] * b2[jk]
                    + a1[j] * b2[ik]
                    + a1[k] * b2[ij]
                    + a * b3[ijk]
            });
        }
        out
    }
}

impl Add<&Jet3> for &Jet3 {
    type Output = Jet3;
    fn add(self, rhs: &Jet3) -> Jet3 {
        self.zip(rhs, |x, y| x + y)
    }
}

impl Sub<&Jet3> for &Jet3 {
    type Output = Jet3;
    fn sub(self, rhs: &Jet3) -> Jet3 {
        self.zip(rhs, |x, y| x - y)
    }
}

impl Mul<&Jet3> for &Jet3 {
    type Output = Jet3;
    fn mul(self, rhs: &Jet3) -> Jet3 {
        self.product(rhs)
    }
}

macro_rules! forward_owned {
    ($trait:ident, $method:ident) => {
        impl $trait<Jet3> for Jet3 {
            type Output = Jet3;
            fn $method(self, rhs: Jet3) -> Jet3 {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Jet3> for Jet3 {
            type Output = Jet3;
            fn $method(self, rhs: &Jet3) -> Jet3 {
                (&self).$method(rhs)
            }
        }
        impl $trait<Jet3> for &Jet3 {
            type Output = Jet3;
            fn $method(self, rhs: Jet3) -> Jet3 {
                self.$method(&rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Add<f64> for &Jet3 {
    type Output = Jet3;
    fn add(self, rhs: f64) -> Jet3 {
        let mut out = self.clone();
        out.value += rhs;
        out
    }
}

impl Add<f64> for Jet3 {
    type Output = Jet3;
    fn add(mut self, rhs: f64) -> Jet3 {
        self.value += rhs;
        self
    }
}

impl Sub<f64> for Jet3 {
    type Output = Jet3;
    fn sub(mut self, rhs: f64) -> Jet3 {
        self.value -= rhs;
        self
    }
}

impl Mul<f64> for &Jet3 {
    type Output = Jet3;
    fn mul(self, rhs: f64) -> Jet3 {
        self.scale(rhs)
    }
}

impl Mul<f64> for Jet3 {
    type Output = Jet3;
    fn mul(self, rhs: f64) -> Jet3 {
        self.scale(rhs)
    }
}

impl Div<f64> for Jet3 {
    type Output = Jet3;
    fn div(self, rhs: f64) -> Jet3 {
        self.scale(1.0 / rhs)
    }
}

impl Neg for &Jet3 {
    type Output = Jet3;
    fn neg(self) -> Jet3 {
        self.scale(-1.0)
    }
}

impl Neg for Jet3 {
    type Output = Jet3;
    fn neg(self) -> Jet3 {
        self.scale(-1.0)
    }
}

impl AddAssign<&Jet3> for Jet3 {
    fn add_assign(&mut self, rhs: &Jet3) {
        *self = &*self + rhs;
    }
}

impl SubAssign<&Jet3> for Jet3 {
    fn sub_assign(&mut self, rhs: &Jet3) {
        *self = &*self - rhs;
    }
}

/// `sum_i a_i * b_i`, accumulated in index order.
pub fn dot(a: &[Jet3], b: &[Jet3]) -> Jet3 {
    assert_eq!(a.len(), b.len());
    let dim = a.first().map_or(0, Jet3::dim);
    a.iter()
        .zip(b)
        .fold(Jet3::zero(dim), |acc, (x, y)| acc + x * y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constant_has_no_derivatives() {
        let c = Jet3::constant(7.0, 3);
        assert_eq!(c.value(), 7.0);
        assert!(c.gradient().iter().all(|&d| d == 0.0));
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(c.d2(i, j), 0.0);
                for k in 0..3 {
                    assert_eq!(c.d3(i, j, k), 0.0);
                }
            }
        }
    }

    #[test]
    fn cubic_monomial() {
        // x^2 y at (2, 3)
        let v = Jet3::variables(&[2.0, 3.0]);
        let f = &(&v[0] * &v[0]) * &v[1];
        assert_eq!(f.value(), 12.0);
        assert_eq!(f.d1(0), 12.0);
        assert_eq!(f.d1(1), 4.0);
        assert_eq!(f.d2(0, 0), 6.0);
        assert_eq!(f.d2(0, 1), 4.0);
        assert_eq!(f.d2(1, 1), 0.0);
        assert_eq!(f.d3(0, 0, 1), 2.0);
        assert_eq!(f.d3(1, 0, 0), 2.0);
        assert_eq!(f.d3(0, 0, 0), 0.0);
    }

    #[test]
    fn elementary_functions_match_closed_form_derivatives() {
        let t = Jet3::variable(0.7, 0, 1);
        let l = t.ln().unwrap();
        assert_relative_eq!(l.d3(0, 0, 0), 2.0 / 0.7f64.powi(3), max_relative = 1e-14);
        let a = t.atan();
        let q = 1.0 / (1.0 + 0.49);
        assert_relative_eq!(a.d1(0), q, max_relative = 1e-14);
        assert_relative_eq!(a.d2(0, 0), -2.0 * 0.7 * q * q, max_relative = 1e-14);
        let s = t.sin();
        assert_relative_eq!(s.d3(0, 0, 0), -(0.7f64.cos()), max_relative = 1e-14);
        let p = t.powf(2.5).unwrap();
        assert_relative_eq!(p.d3(0, 0, 0), 2.5 * 1.5 * 0.5 * 0.7f64.powf(-0.5), max_relative = 1e-14);
    }

    #[test]
    fn ln_domain_error_names_coordinate() {
        let v = Jet3::variables(&[1.0, -2.0, 0.5]);
        let err = v[1].ln().unwrap_err();
        match err {
            JetError::Domain { function, coords, .. } => {
                assert_eq!(function, "ln");
                assert_eq!(coords, vec![1]);
            }
        }
    }

    #[test]
    fn reciprocal_of_zero_fails() {
        let z = Jet3::variable(0.0, 0, 2);
        assert!(z.recip().is_err());
        assert!(z.powi(-2).is_err());
        assert_eq!(z.powi(2).unwrap().d2(0, 0), 2.0);
    }

    #[test]
    fn partial_lowers_order() {
        let v = Jet3::variables(&[1.5, 0.5]);
        let f = (&v[0] * &v[1]).exp();
        let fx = f.partial(0);
        assert_eq!(fx.order(), 2);
        // d/dx exp(xy) = y exp(xy); d/dy of that = (1 + xy) exp(xy)
        let e = (0.75f64).exp();
        assert_relative_eq!(fx.value(), 0.5 * e, max_relative = 1e-15);
        assert_relative_eq!(fx.d1(1), 1.75 * e, max_relative = 1e-15);
        let fxy = fx.partial(1);
        assert_relative_eq!(fxy.d1(0), f.d3(0, 1, 0), max_relative = 1e-15);
        let sum = &fx + &f;
        assert_eq!(sum.order(), 2);
    }

    #[test]
    fn blocks_are_exactly_symmetric() {
        let v = Jet3::variables(&[0.3, -1.1, 2.0]);
        let f = (&(&v[0] * &v[1]).sin() * &v[2].ln().unwrap()).atan();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(f.d2(i, j).to_bits(), f.d2(j, i).to_bits());
                for k in 0..3 {
                    let x = f.d3(i, j, k).to_bits();
                    assert_eq!(x, f.d3(j, k, i).to_bits());
                    assert_eq!(x, f.d3(k, j, i).to_bits());
                }
            }
        }
    }
}
