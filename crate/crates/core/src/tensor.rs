//! Points of a chart and dense tensor components.
//!
//! Components are stored row-major over slots with every contravariant slot
//! listed before every covariant slot, so a metric is `(0,2)`, its inverse
//! `(2,0)` and an endomorphism `φ^a_b` is `(1,1)` with the output index first.

use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Jet3;
use crate::linalg;

/// Condition numbers above this are treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// A point of a `(2n+1)`-dimensional chart, ordered
/// `(x^1..x^n; x^{n+1}..x^{2n}; t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 3 || coords.len().is_multiple_of(2) {
            return Err(Error::Usage(format!(
                "a point needs 2n+1 >= 3 coordinates, got {}",
                coords.len()
            )));
        }
        Ok(Point(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn n(&self) -> usize {
        (self.0.len() - 1) / 2
    }

    /// The vertical coordinate `t` (last slot).
    pub fn t(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    /// `p + eps * direction` in coordinates.
    pub fn displaced(&self, direction: &[f64], eps: f64) -> Point {
        assert_eq!(direction.len(), self.dim());
        Point(self.0.iter().zip(direction).map(|(x, d)| x + eps * d).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Valence {
    /// Contravariant slot count.
    pub up: usize,
    /// Covariant slot count.
    pub down: usize,
}

impl Valence {
    pub const SCALAR: Valence = Valence::new(0, 0);
    pub const VECTOR: Valence = Valence::new(1, 0);
    pub const COVECTOR: Valence = Valence::new(0, 1);
    pub const ENDOMORPHISM: Valence = Valence::new(1, 1);
    pub const BILINEAR: Valence = Valence::new(0, 2);

    pub const fn new(up: usize, down: usize) -> Self {
        Valence { up, down }
    }

    pub fn rank(self) -> usize {
        self.up + self.down
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Raise,
    Lower,
}

fn flat_index(dim: usize, idx: &[usize]) -> usize {
    idx.iter().fold(0, |acc, &i| {
        debug_assert!(i < dim);
        acc * dim + i
    })
}

fn multi_index(dim: usize, rank: usize, mut flat: usize, out: &mut [usize]) {
    for slot in (0..rank).rev() {
        out[slot] = flat % dim;
        flat /= dim;
    }
}

/// Dense components of a tensor at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorComponents {
    valence: Valence,
    dim: usize,
    data: Vec<f64>,
}

impl TensorComponents {
    pub fn new(valence: Valence, dim: usize, data: Vec<f64>) -> Result<Self> {
        let expected = dim.pow(valence.rank() as u32);
        if data.len() != expected {
            return Err(Error::Usage(format!(
                "valence ({},{}) in dim {dim} needs {expected} components, got {}",
                valence.up,
                valence.down,
                data.len()
            )));
        }
        Ok(Self { valence, dim, data })
    }

    pub fn zeros(valence: Valence, dim: usize) -> Self {
        Self {
            valence,
            dim,
            data: vec![0.0; dim.pow(valence.rank() as u32)],
        }
    }

    pub fn scalar(value: f64, dim: usize) -> Self {
        Self {
            valence: Valence::SCALAR,
            dim,
            data: vec![value],
        }
    }

    pub fn vector(components: &[f64]) -> Self {
        Self {
            valence: Valence::VECTOR,
            dim: components.len(),
            data: components.to_vec(),
        }
    }

    pub fn covector(components: &[f64]) -> Self {
        Self {
            valence: Valence::COVECTOR,
            dim: components.len(),
            data: components.to_vec(),
        }
    }

    /// A rank-2 tensor from a square matrix, rows indexing the first slot.
    pub fn from_matrix(valence: Valence, m: &DMatrix<f64>) -> Result<Self> {
        if valence.rank() != 2 || !m.is_square() {
            return Err(Error::Usage("from_matrix needs a rank-2 valence and a square matrix".into()));
        }
        let dim = m.nrows();
        let data = (0..dim * dim).map(|f| m[(f / dim, f % dim)]).collect();
        Ok(Self { valence, dim, data })
    }

    pub fn identity(dim: usize) -> Self {
        let mut out = Self::zeros(Valence::ENDOMORPHISM, dim);
        for i in 0..dim {
            out.data[i * dim + i] = 1.0;
        }
        out
    }

    pub fn valence(&self) -> Valence {
        self.valence
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        assert_eq!(idx.len(), self.valence.rank(), "index rank mismatch");
        self.data[flat_index(self.dim, idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        assert_eq!(idx.len(), self.valence.rank(), "index rank mismatch");
        let f = flat_index(self.dim, idx);
        self.data[f] = value;
    }

    /// Value of a rank-0 tensor.
    pub fn as_scalar(&self) -> f64 {
        assert_eq!(self.valence.rank(), 0, "not a scalar");
        self.data[0]
    }

    /// Rank-2 components as a matrix (first slot = row).
    pub fn matrix(&self) -> DMatrix<f64> {
        assert_eq!(self.valence.rank(), 2, "matrix view needs rank 2");
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Componentwise inner product (coordinate Frobenius pairing).
    pub fn frobenius_dot(&self, other: &Self) -> f64 {
        self.assert_same_shape(other);
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            valence: self.valence,
            dim: self.dim,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    fn assert_same_shape(&self, other: &Self) {
        assert_eq!(self.valence, other.valence, "valence mismatch");
        assert_eq!(self.dim, other.dim, "dimension mismatch");
    }

    /// Tensor product; slots of `self` precede those of `other` within each
    /// variance group.
    pub fn outer(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let dim = self.dim;
        let valence = Valence::new(self.valence.up + other.valence.up, self.valence.down + other.valence.down);
        let rank = valence.rank();
        let mut out = Self::zeros(valence, dim);
        let (ra, rb) = (self.valence, other.valence);
        let mut idx = vec![0; rank];
        let mut ia = vec![0; ra.rank()];
        let mut ib = vec![0; rb.rank()];
        for f in 0..out.data.len() {
            multi_index(dim, rank, f, &mut idx);
            ia[..ra.up].copy_from_slice(&idx[..ra.up]);
            ib[..rb.up].copy_from_slice(&idx[ra.up..valence.up]);
            ia[ra.up..].copy_from_slice(&idx[valence.up..valence.up + ra.down]);
            ib[rb.up..].copy_from_slice(&idx[valence.up + ra.down..]);
            out.data[f] = self.get(&ia) * other.get(&ib);
        }
        out
    }

    /// Sums out a contravariant slot against a covariant one. Slot numbers
    /// count over all slots, contravariant first.
    pub fn contract(&self, slot_up: usize, slot_down: usize) -> Result<Self> {
        let Valence { up, down } = self.valence;
        if slot_up >= up {
            return Err(Error::Usage(format!(
                "slot {slot_up} is not contravariant in a ({up},{down}) tensor"
            )));
        }
        if slot_down < up || slot_down >= up + down {
            return Err(Error::Usage(format!(
                "slot {slot_down} is not covariant in a ({up},{down}) tensor"
            )));
        }
        let dim = self.dim;
        let valence = Valence::new(up - 1, down - 1);
        let rank = valence.rank();
        let mut out = Self::zeros(valence, dim);
        let mut idx = vec![0; rank];
        let mut full = vec![0; rank + 2];
        for f in 0..out.data.len() {
            multi_index(dim, rank, f, &mut idx);
            let mut it = idx.iter();
            for (s, slot) in full.iter_mut().enumerate() {
                if s != slot_up && s != slot_down {
                    *slot = *it.next().unwrap();
                }
            }
            let mut acc = 0.0;
            for k in 0..dim {
                full[slot_up] = k;
                full[slot_down] = k;
                acc += self.get(&full);
            }
            out.data[f] = acc;
        }
        Ok(out)
    }

    /// Lowers a contravariant slot with `g` (0,2), or raises a covariant slot
    /// with `g⁻¹` (2,0). A lowered slot becomes the first covariant slot; a
    /// raised slot becomes the last contravariant slot, so lowering then
    /// raising the same index is the identity.
    pub fn musical(&self, metric: &Self, slot: usize, direction: Direction) -> Result<Self> {
        let Valence { up, down } = self.valence;
        let wanted = match direction {
            Direction::Lower => Valence::new(0, 2),
            Direction::Raise => Valence::new(2, 0),
        };
        if metric.valence != wanted || metric.dim != self.dim {
            return Err(Error::Usage(format!(
                "{direction:?} needs a ({},{}) metric of dim {}",
                wanted.up, wanted.down, self.dim
            )));
        }
        let m = metric.matrix();
        let condition = linalg::condition_number(&m);
        if !(condition < SINGULAR_CONDITION) {
            return Err(Error::SingularMetric { condition });
        }
        let dim = self.dim;
        let (valence, src_slot, dst_slot) = match direction {
            Direction::Lower => {
                if slot >= up {
                    return Err(Error::Usage(format!("slot {slot} is not contravariant")));
                }
                (Valence::new(up - 1, down + 1), slot, up - 1)
            }
            Direction::Raise => {
                if slot < up || slot >= up + down {
                    return Err(Error::Usage(format!("slot {slot} is not covariant")));
                }
                (Valence::new(up + 1, down - 1), slot, up)
            }
        };
        let rank = valence.rank();
        let mut out = Self::zeros(valence, dim);
        let mut idx = vec![0; rank];
        let mut src = vec![0; rank];
        for f in 0..out.data.len() {
            multi_index(dim, rank, f, &mut idx);
            let new_index = idx[dst_slot];
            // remaining slots in order, then re-insert the summed slot
            let rest: Vec<usize> = idx
                .iter()
                .enumerate()
                .filter(|&(s, _)| s != dst_slot)
                .map(|(_, &i)| i)
                .collect();
            let mut it = rest.iter();
            for (s, slot_val) in src.iter_mut().enumerate() {
                if s != src_slot {
                    *slot_val = *it.next().unwrap();
                }
            }
            let mut acc = 0.0;
            for a in 0..dim {
                src[src_slot] = a;
                acc += m[(new_index, a)] * self.get(&src);
            }
            out.data[f] = acc;
        }
        Ok(out)
    }
}

impl Add<&TensorComponents> for &TensorComponents {
    type Output = TensorComponents;
    fn add(self, rhs: &TensorComponents) -> TensorComponents {
        self.assert_same_shape(rhs);
        TensorComponents {
            valence: self.valence,
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub<&TensorComponents> for &TensorComponents {
    type Output = TensorComponents;
    fn sub(self, rhs: &TensorComponents) -> TensorComponents {
        self.assert_same_shape(rhs);
        TensorComponents {
            valence: self.valence,
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul<f64> for &TensorComponents {
    type Output = TensorComponents;
    fn mul(self, rhs: f64) -> TensorComponents {
        self.scale(rhs)
    }
}

/// Tensor components carried as jets, so they can be differentiated again.
#[derive(Debug, Clone)]
pub struct JetTensor {
    valence: Valence,
    dim: usize,
    comps: Vec<Jet3>,
}

impl JetTensor {
    pub fn new(valence: Valence, dim: usize, comps: Vec<Jet3>) -> Result<Self> {
        let expected = dim.pow(valence.rank() as u32);
        if comps.len() != expected {
            return Err(Error::Usage(format!(
                "valence ({},{}) in dim {dim} needs {expected} jets, got {}",
                valence.up,
                valence.down,
                comps.len()
            )));
        }
        Ok(Self { valence, dim, comps })
    }

    pub fn valence(&self) -> Valence {
        self.valence
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn comps(&self) -> &[Jet3] {
        &self.comps
    }

    pub fn get(&self, idx: &[usize]) -> &Jet3 {
        assert_eq!(idx.len(), self.valence.rank(), "index rank mismatch");
        &self.comps[flat_index(self.dim, idx)]
    }

    /// Lowest valid derivative order over all components.
    pub fn order(&self) -> usize {
        self.comps.iter().map(Jet3::order).min().unwrap_or(crate::jet::MAX_ORDER)
    }

    pub fn value(&self) -> TensorComponents {
        TensorComponents {
            valence: self.valence,
            dim: self.dim,
            data: self.comps.iter().map(Jet3::value).collect(),
        }
    }

    pub fn partial(&self, index: usize) -> Self {
        Self {
            valence: self.valence,
            dim: self.dim,
            comps: self.comps.iter().map(|c| c.partial(index)).collect(),
        }
    }

    pub fn truncated(&self, order: usize) -> Self {
        Self {
            valence: self.valence,
            dim: self.dim,
            comps: self.comps.iter().map(|c| c.truncated(order)).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(&Jet3) -> Jet3) -> Self {
        Self {
            valence: self.valence,
            dim: self.dim,
            comps: self.comps.iter().map(f).collect(),
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(&Jet3, &Jet3) -> Jet3) -> Self {
        assert_eq!(self.valence, other.valence, "valence mismatch");
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        Self {
            valence: self.valence,
            dim: self.dim,
            comps: self.comps.iter().zip(&other.comps).map(|(a, b)| f(a, b)).collect(),
        }
    }
}
