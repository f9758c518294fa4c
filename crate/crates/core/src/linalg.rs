//! Small dense linear algebra shared by the geometric modules.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::jet::Jet3;
use crate::tensor::{TensorComponents, SINGULAR_CONDITION};

/// 2-norm condition number; infinite when the matrix is singular.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Inverts a square matrix of jets by Gauss-Jordan elimination, pivoting on
/// the values. `comps` is row-major `dim x dim`.
pub fn invert_jet_matrix(comps: &[Jet3], dim: usize) -> Result<Vec<Jet3>> {
    assert_eq!(comps.len(), dim * dim);
    let values = DMatrix::from_row_slice(dim, dim, &comps.iter().map(Jet3::value).collect::<Vec<_>>());
    let condition = condition_number(&values);
    if !(condition < SINGULAR_CONDITION) {
        return Err(Error::SingularMetric { condition });
    }
    let jdim = comps[0].dim();
    let mut a: Vec<Jet3> = comps.to_vec();
    let mut inv: Vec<Jet3> = (0..dim * dim)
        .map(|f| Jet3::constant(if f / dim == f % dim { 1.0 } else { 0.0 }, jdim))
        .collect();
    for col in 0..dim {
        let pivot = (col..dim)
            .max_by(|&i, &j| a[i * dim + col].value().abs().total_cmp(&a[j * dim + col].value().abs()))
            .unwrap();
        if pivot != col {
            for c in 0..dim {
                a.swap(pivot * dim + c, col * dim + c);
                inv.swap(pivot * dim + c, col * dim + c);
            }
        }
        let p = a[col * dim + col].recip().map_err(|_| Error::SingularMetric { condition })?;
        for c in 0..dim {
            a[col * dim + c] = &a[col * dim + c] * &p;
            inv[col * dim + c] = &inv[col * dim + c] * &p;
        }
        for r in 0..dim {
            if r == col {
                continue;
            }
            let factor = a[r * dim + col].clone();
            if factor.is_zero() {
                continue;
            }
            for c in 0..dim {
                let da = &factor * &a[col * dim + c];
                a[r * dim + c] -= &da;
                let di = &factor * &inv[col * dim + c];
                inv[r * dim + c] -= &di;
            }
        }
    }
    Ok(inv)
}

/// Smallest admissible eigenvalue of a normalized fit Gram matrix.
pub const GRAM_FLOOR: f64 = 1e-14;

/// Coefficients and relative residual of a least-squares fit of `target`
/// against a three-element tensor basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpanFit {
    pub coeffs: [f64; 3],
    /// `‖target − Σ cᵢ bᵢ‖_F / max(1, ‖target‖_F)`.
    pub residual: f64,
}

/// Normal-equation fit on a three-element span with an explicit 3x3 Gram
/// solve followed by two steps of iterative refinement on the remainder, so
/// a basis that is nearly dependent in the Frobenius metric (but still spans
/// three dimensions) loses accuracy like `cond(B)` rather than `cond(B)²`.
/// The basis is degenerate when the smallest eigenvalue of its normalized
/// Gram matrix is at most [`GRAM_FLOOR`].
pub fn fit_span3(target: &TensorComponents, basis: [&TensorComponents; 3]) -> Result<SpanFit> {
    let norms: Vec<f64> = basis.iter().map(|b| b.frobenius()).collect();
    let mut gram = Matrix3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            gram[(i, j)] = basis[i].frobenius_dot(basis[j]);
        }
    }
    let mut normalized = gram;
    for i in 0..3 {
        for j in 0..3 {
            normalized[(i, j)] /= norms[i] * norms[j];
        }
    }
    let determinant = normalized.determinant();
    let smallest = if norms.iter().all(|&n| n > 0.0 && n.is_finite()) {
        normalized.symmetric_eigenvalues().min()
    } else {
        f64::NAN
    };
    if !(smallest > GRAM_FLOOR) {
        return Err(Error::DegenerateGram { determinant });
    }
    let inv = gram.try_inverse().ok_or(Error::DegenerateGram { determinant })?;
    let remainder_of = |c: &Vector3<f64>| {
        let mut r = target.clone();
        for (i, b) in basis.iter().enumerate() {
            r = &r - &b.scale(c[i]);
        }
        r
    };
    let project = |r: &TensorComponents| Vector3::new(basis[0].frobenius_dot(r), basis[1].frobenius_dot(r), basis[2].frobenius_dot(r));
    let mut c = inv * project(target);
    for _ in 0..2 {
        c += inv * project(&remainder_of(&c));
    }
    let remainder = remainder_of(&c);
    Ok(SpanFit {
        coeffs: [c[0], c[1], c[2]],
        residual: remainder.frobenius() / target.frobenius().max(1.0),
    })
}

/// Least-squares solution of `a x = b` via SVD together with the residual
/// norm `‖a x − b‖`.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, f64) {
    let svd = a.clone().svd(true, true);
    let x = svd.solve(b, 1e-14).expect("SVD computed with U and V");
    let r = (a * &x - b).norm();
    (x, r)
}
