//! Levi-Civita connection and curvature of a structure's metric.
//!
//! Conventions:
//! - `Γ^k_{ij} = ½ g^{kl}(∂_i g_{jl} + ∂_j g_{il} − ∂_l g_{ij})`, stored `[k, i, j]`.
//! - `R(x,y)z = ∇_x∇_y z − ∇_y∇_x z − ∇_{[x,y]}z`, stored as `R^a_{bcd}` with
//!   `R(∂_c, ∂_d)∂_b = R^a_{bcd} ∂_a`, layout `[a, b, c, d]`.
//! - `R(x,y,z,w) = g(R(x,y)z, w)`, layout `[x, y, z, w]`.
//! - `ρ(y,z) = tr(x ↦ R(x,y)z)`, `τ = g^{ij}ρ_{ij}`, `τ* = g^{ij}ρ(e_i, φe_j)`.
//! - A covariant derivative adds one covariant slot, placed first among the
//!   covariant slots: `(∇T)^{a…}_{c b…} = ∇_c T^{a…}_{b…}`.

use crate::error::{Error, Result};
use crate::field::TensorField;
use crate::jet::Jet3;
use crate::linalg;
use crate::structure::{associated_metric_jets, ManifoldSpec};
use crate::tensor::{JetTensor, Point, TensorComponents, Valence};

/// Relative threshold below which a 2-plane counts as degenerate.
pub const DEGENERATE_PLANE: f64 = 1e-12;

/// Metric, inverse, structure fields and Christoffel symbols as jets at one
/// point. With seeds of order `s` the Christoffel symbols carry order `s − 1`.
#[derive(Debug, Clone)]
pub struct Connection {
    pub n: usize,
    pub point: Point,
    pub g: JetTensor,
    pub ginv: JetTensor,
    pub phi: JetTensor,
    pub xi: JetTensor,
    pub eta: JetTensor,
    pub gamma: JetTensor,
}

impl Connection {
    /// Full-order connection (Christoffel symbols to order 2).
    pub fn at(m: &ManifoldSpec, p: &Point) -> Result<Self> {
        Self::at_order(m, p, crate::jet::MAX_ORDER)
    }

    /// Connection from structure jets seeded to `order >= 1`.
    pub fn at_order(m: &ManifoldSpec, p: &Point, order: usize) -> Result<Self> {
        assert!(order >= 1, "the connection needs first derivatives of the metric");
        let jets = m.jets(p, order)?;
        let dim = m.dim();
        let ginv = JetTensor::new(
            Valence::new(2, 0),
            dim,
            linalg::invert_jet_matrix(jets.g.comps(), dim)?,
        )?;
        let gamma = christoffel_jets(&jets.g, &ginv);
        Ok(Self {
            n: m.n(),
            point: p.clone(),
            g: jets.g,
            ginv,
            phi: jets.phi,
            xi: jets.xi,
            eta: jets.eta,
            gamma,
        })
    }

    pub fn dim(&self) -> usize {
        2 * self.n + 1
    }

    pub fn christoffel(&self) -> TensorComponents {
        self.gamma.value()
    }

    /// `∇T` on jets; the result carries order `min(order(T) − 1, order(Γ))`.
    pub fn covariant_derivative(&self, t: &JetTensor) -> Result<JetTensor> {
        covariant_derivative_jets(t, &self.gamma)
    }

    /// Values of the associated metric at the point.
    pub fn associated_metric(&self) -> JetTensor {
        associated_metric_jets(&self.g, &self.phi, &self.eta)
    }

    /// `(L_ϑ g)(x,y) = g(∇_xϑ, y) + g(x, ∇_yϑ)` as jets.
    pub fn lie_metric(&self, theta: &JetTensor) -> Result<JetTensor> {
        if theta.valence() != Valence::VECTOR {
            return Err(Error::Usage("the Lie derivative of g needs a vector field".into()));
        }
        let dim = self.dim();
        let nabla = self.covariant_derivative(theta)?; // [a, x]
        let order = nabla.order();
        let g = self.g.truncated(order);
        let mut comps = Vec::with_capacity(dim * dim);
        for x in 0..dim {
            for y in 0..dim {
                let mut acc = Jet3::zero(dim).truncated(order);
                for a in 0..dim {
                    acc += &(nabla.get(&[a, x]) * g.get(&[a, y]));
                    acc += &(g.get(&[x, a]) * nabla.get(&[a, y]));
                }
                comps.push(acc);
            }
        }
        JetTensor::new(Valence::BILINEAR, dim, comps)
    }
}

fn christoffel_jets(g: &JetTensor, ginv: &JetTensor) -> JetTensor {
    let dim = g.dim();
    let order = g.order() - 1;
    let dg: Vec<JetTensor> = (0..dim).map(|l| g.partial(l)).collect();
    let ginv = ginv.truncated(order);
    // first kind: [i j, l] = ½(∂_i g_jl + ∂_j g_il − ∂_l g_ij)
    let mut first = vec![Jet3::zero(dim); dim * dim * dim];
    for i in 0..dim {
        for j in i..dim {
            for l in 0..dim {
                let v = (dg[i].get(&[j, l]) + dg[j].get(&[i, l]) - dg[l].get(&[i, j])).scale(0.5);
                first[(i * dim + j) * dim + l] = v.clone();
                first[(j * dim + i) * dim + l] = v;
            }
        }
    }
    let mut comps = vec![Jet3::zero(dim); dim * dim * dim];
    for k in 0..dim {
        for i in 0..dim {
            for j in i..dim {
                let mut acc = Jet3::zero(dim).truncated(order);
                for l in 0..dim {
                    acc += &(ginv.get(&[k, l]) * &first[(i * dim + j) * dim + l]);
                }
                comps[(k * dim + i) * dim + j] = acc.clone();
                comps[(k * dim + j) * dim + i] = acc;
            }
        }
    }
    JetTensor::new(Valence::new(1, 2), dim, comps).expect("shape fixed above")
}

/// `∇T` for tensors of total rank at most 2. The derivative slot becomes the
/// first covariant slot.
pub fn covariant_derivative_jets(t: &JetTensor, gamma: &JetTensor) -> Result<JetTensor> {
    let Valence { up, down } = t.valence();
    if up + down > 2 {
        return Err(Error::Usage(format!(
            "covariant derivative supports rank <= 2, got ({up},{down})"
        )));
    }
    if t.order() == 0 {
        return Err(Error::Usage("covariant derivative needs first derivatives of the field".into()));
    }
    let dim = t.dim();
    let order = (t.order() - 1).min(gamma.order());
    let gamma = gamma.truncated(order);
    let tt = t.truncated(order);
    let partials: Vec<JetTensor> = (0..dim).map(|c| t.partial(c).truncated(order)).collect();
    let out_valence = Valence::new(up, down + 1);
    let rank = out_valence.rank();
    let total = dim.pow(rank as u32);
    let mut comps = Vec::with_capacity(total);
    let mut idx = vec![0usize; rank];
    let mut src = vec![0usize; up + down];
    for flat in 0..total {
        let mut f = flat;
        for s in (0..rank).rev() {
            idx[s] = f % dim;
            f /= dim;
        }
        let c = idx[up];
        src[..up].copy_from_slice(&idx[..up]);
        src[up..].copy_from_slice(&idx[up + 1..]);
        let mut acc = partials[c].get(&src).clone();
        for s in 0..up {
            let a = src[s];
            let mut moved = src.clone();
            for e in 0..dim {
                moved[s] = e;
                acc += &(gamma.get(&[a, c, e]) * tt.get(&moved));
            }
        }
        for s in up..up + down {
            let b = src[s];
            let mut moved = src.clone();
            for e in 0..dim {
                moved[s] = e;
                acc -= &(gamma.get(&[e, c, b]) * tt.get(&moved));
            }
        }
        comps.push(acc);
    }
    JetTensor::new(out_valence, dim, comps)
}

/// Christoffel symbols `Γ^k_{ij}` at `p`, layout `[k, i, j]`.
pub fn christoffel(m: &ManifoldSpec, p: &Point) -> Result<TensorComponents> {
    Ok(Connection::at_order(m, p, 1)?.christoffel())
}

/// `∇T` of a field of valence (1,0), (0,1), (1,1) or (0,2) at `p`.
pub fn covariant_derivative(field: &TensorField, m: &ManifoldSpec, p: &Point) -> Result<TensorComponents> {
    let supported = [Valence::VECTOR, Valence::COVECTOR, Valence::ENDOMORPHISM, Valence::BILINEAR];
    if !supported.contains(&field.valence()) {
        let v = field.valence();
        return Err(Error::Usage(format!("unsupported valence ({},{})", v.up, v.down)));
    }
    let conn = Connection::at_order(m, p, 1)?;
    let jets = field.jets(p)?.truncated(1);
    Ok(conn.covariant_derivative(&jets)?.value())
}

/// Connection plus Riemann and Ricci tensors as first-order jets.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub conn: Connection,
    /// `R^a_{bcd}`, layout `[a, b, c, d]`.
    pub riemann: JetTensor,
    /// `ρ_{yz}`, layout `[y, z]`.
    pub ricci: JetTensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvaturePack {
    pub gamma: TensorComponents,
    pub riemann04: TensorComponents,
    pub ricci: TensorComponents,
    pub tau: f64,
    pub tau_star: f64,
}

impl Geometry {
    pub fn at(m: &ManifoldSpec, p: &Point) -> Result<Self> {
        Ok(Self::from_connection(Connection::at(m, p)?))
    }

    /// Curvature of a connection whose Christoffel symbols carry order >= 1.
    pub fn from_connection(conn: Connection) -> Self {
        let riemann = riemann_jets(&conn.gamma);
        let ricci = ricci_jets(&riemann);
        Self { conn, riemann, ricci }
    }

    pub fn dim(&self) -> usize {
        self.conn.dim()
    }

    pub fn n(&self) -> usize {
        self.conn.n
    }

    /// `R(x,y,z,w)` with layout `[x, y, z, w]`.
    pub fn riemann04(&self) -> TensorComponents {
        let dim = self.dim();
        let g = self.conn.g.value();
        let r = self.riemann.value();
        let mut out = TensorComponents::zeros(Valence::new(0, 4), dim);
        for x in 0..dim {
            for y in 0..dim {
                for z in 0..dim {
                    for w in 0..dim {
                        let v: f64 = (0..dim).map(|a| g.get(&[a, w]) * r.get(&[a, z, x, y])).sum();
                        out.set(&[x, y, z, w], v);
                    }
                }
            }
        }
        out
    }

    pub fn tau(&self) -> f64 {
        let ginv = self.conn.ginv.value();
        let rho = self.ricci.value();
        ginv.data().iter().zip(rho.data()).map(|(a, b)| a * b).sum()
    }

    /// `τ* = g^{ij} ρ(e_i, φe_j)`.
    pub fn tau_star(&self) -> f64 {
        let dim = self.dim();
        let ginv = self.conn.ginv.value();
        let rho = self.ricci.value();
        let phi = self.conn.phi.value();
        let mut acc = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                let rho_phi: f64 = (0..dim).map(|k| rho.get(&[i, k]) * phi.get(&[k, j])).sum();
                acc += ginv.get(&[i, j]) * rho_phi;
            }
        }
        acc
    }

    /// `τ` as the double trace `g^{bd} R^a_{b a d}` of the curvature tensor.
    pub fn tau_from_riemann(&self) -> f64 {
        let dim = self.dim();
        let ginv = self.conn.ginv.value();
        let r = self.riemann.value();
        let mut acc = 0.0;
        for b in 0..dim {
            for d in 0..dim {
                let tr: f64 = (0..dim).map(|a| r.get(&[a, b, a, d])).sum();
                acc += ginv.get(&[d, b]) * tr;
            }
        }
        acc
    }

    pub fn pack(&self) -> CurvaturePack {
        CurvaturePack {
            gamma: self.conn.christoffel(),
            riemann04: self.riemann04(),
            ricci: self.ricci.value(),
            tau: self.tau(),
            tau_star: self.tau_star(),
        }
    }

    /// `K(x,y) = R(x,y,y,x) / (g(x,x)g(y,y) − g(x,y)²)`.
    pub fn sectional(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        sectional_from(&self.riemann04(), &self.conn.g.value(), x, y)
    }
}

pub(crate) fn sectional_from(r04: &TensorComponents, g: &TensorComponents, x: &[f64], y: &[f64]) -> Result<f64> {
    let dim = g.dim();
    if x.len() != dim || y.len() != dim {
        return Err(Error::Usage("sectional curvature needs two vectors of the manifold dimension".into()));
    }
    let gm = g.matrix();
    let xv = nalgebra::DVector::from_column_slice(x);
    let yv = nalgebra::DVector::from_column_slice(y);
    let gxx = xv.dot(&(&gm * &xv));
    let gyy = yv.dot(&(&gm * &yv));
    let gxy = xv.dot(&(&gm * &yv));
    let denominator = gxx * gyy - gxy * gxy;
    let threshold = DEGENERATE_PLANE * xv.norm_squared() * yv.norm_squared();
    if !(denominator.abs() >= threshold) || denominator == 0.0 {
        return Err(Error::DegeneratePlane { denominator, threshold });
    }
    let mut num = 0.0;
    for a in 0..dim {
        for b in 0..dim {
            for c in 0..dim {
                for d in 0..dim {
                    num += r04.get(&[a, b, c, d]) * x[a] * y[b] * y[c] * x[d];
                }
            }
        }
    }
    Ok(num / denominator)
}

fn riemann_jets(gamma: &JetTensor) -> JetTensor {
    let dim = gamma.dim();
    let order = gamma.order().saturating_sub(1);
    let dgamma: Vec<JetTensor> = (0..dim).map(|c| gamma.partial(c)).collect();
    let gam = gamma.truncated(order);
    let mut comps = vec![Jet3::zero(dim).truncated(order); dim * dim * dim * dim];
    let at = |a: usize, b: usize, c: usize, d: usize| ((a * dim + b) * dim + c) * dim + d;
    for a in 0..dim {
        for b in 0..dim {
            for c in 0..dim {
                for d in (c + 1)..dim {
                    let mut acc = dgamma[c].get(&[a, d, b]) - dgamma[d].get(&[a, c, b]);
                    for e in 0..dim {
                        acc += &(gam.get(&[a, c, e]) * gam.get(&[e, d, b]));
                        acc -= &(gam.get(&[a, d, e]) * gam.get(&[e, c, b]));
                    }
                    comps[at(a, b, d, c)] = -&acc;
                    comps[at(a, b, c, d)] = acc;
                }
            }
        }
    }
    JetTensor::new(Valence::new(1, 3), dim, comps).expect("shape fixed above")
}

fn ricci_jets(riemann: &JetTensor) -> JetTensor {
    let dim = riemann.dim();
    let order = riemann.order();
    let mut comps = Vec::with_capacity(dim * dim);
    for y in 0..dim {
        for z in 0..dim {
            let mut acc = Jet3::zero(dim).truncated(order);
            for a in 0..dim {
                acc += riemann.get(&[a, z, a, y]);
            }
            comps.push(acc);
        }
    }
    JetTensor::new(Valence::BILINEAR, dim, comps).expect("shape fixed above")
}

pub fn riemann(m: &ManifoldSpec, p: &Point) -> Result<CurvaturePack> {
    Ok(Geometry::at(m, p)?.pack())
}

pub fn sectional(m: &ManifoldSpec, p: &Point, x: &[f64], y: &[f64]) -> Result<f64> {
    Geometry::at(m, p)?.sectional(x, y)
}

/// `L_ϑ g` at `p` for a vector field `ϑ`.
pub fn lie_metric(m: &ManifoldSpec, theta: &TensorField, p: &Point) -> Result<TensorComponents> {
    let conn = Connection::at_order(m, p, 1)?;
    let jets = theta.jets(p)?.truncated(1);
    Ok(conn.lie_metric(&jets)?.value())
}

/// Residuals of the algebraic curvature identities, each relative to
/// `max(1, ‖R‖_max)` (Ricci symmetry and metric compatibility absolute).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetryResiduals {
    pub antisym_first_pair: f64,
    pub antisym_second_pair: f64,
    pub pair_swap: f64,
    pub first_bianchi: f64,
    pub ricci_symmetry: f64,
    pub metric_compatibility: f64,
    pub gamma_symmetry: f64,
}

impl SymmetryResiduals {
    pub fn worst(&self) -> f64 {
        [
            self.antisym_first_pair,
            self.antisym_second_pair,
            self.pair_swap,
            self.first_bianchi,
            self.ricci_symmetry,
            self.metric_compatibility,
            self.gamma_symmetry,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

pub fn symmetry_residuals(geom: &Geometry) -> Result<SymmetryResiduals> {
    let dim = geom.dim();
    let r = geom.riemann04();
    let scale = r.max_abs().max(1.0);
    let mut s = SymmetryResiduals {
        antisym_first_pair: 0.0,
        antisym_second_pair: 0.0,
        pair_swap: 0.0,
        first_bianchi: 0.0,
        ricci_symmetry: 0.0,
        metric_compatibility: 0.0,
        gamma_symmetry: 0.0,
    };
    for x in 0..dim {
        for y in 0..dim {
            for z in 0..dim {
                for w in 0..dim {
                    let v = r.get(&[x, y, z, w]);
                    s.antisym_first_pair = s.antisym_first_pair.max((v + r.get(&[y, x, z, w])).abs() / scale);
                    s.antisym_second_pair = s.antisym_second_pair.max((v + r.get(&[x, y, w, z])).abs() / scale);
                    s.pair_swap = s.pair_swap.max((v - r.get(&[z, w, x, y])).abs() / scale);
                    let cyc = v + r.get(&[y, z, x, w]) + r.get(&[z, x, y, w]);
                    s.first_bianchi = s.first_bianchi.max(cyc.abs() / scale);
                }
            }
        }
    }
    let rho = geom.ricci.value();
    let gamma = geom.conn.christoffel();
    for i in 0..dim {
        for j in 0..dim {
            s.ricci_symmetry = s.ricci_symmetry.max((rho.get(&[i, j]) - rho.get(&[j, i])).abs());
            for k in 0..dim {
                s.gamma_symmetry = s.gamma_symmetry.max((gamma.get(&[k, i, j]) - gamma.get(&[k, j, i])).abs());
            }
        }
    }
    s.metric_compatibility = geom.conn.covariant_derivative(&geom.conn.g)?.value().max_abs();
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ScalarField;

    /// Round 2-sphere of radius `r` in (θ, ϕ) padded with a flat third
    /// coordinate; only used to pin the curvature sign convention.
    fn sphere_metric(r: f64) -> TensorField {
        TensorField::new(Valence::BILINEAR, 3, move |x| {
            let s = x[0].sin();
            let zero = Jet3::zero(3);
            let one = Jet3::constant(1.0, 3);
            Ok(vec![
                Jet3::constant(r * r, 3),
                zero.clone(),
                zero.clone(),
                zero.clone(),
                (&s * &s).scale(r * r),
                zero.clone(),
                zero.clone(),
                zero,
                one,
            ])
        })
    }

    fn with_metric(g: TensorField) -> ManifoldSpec {
        let zero = || ScalarField::constant(0.0);
        let phi = TensorField::from_scalars(Valence::ENDOMORPHISM, 3, (0..9).map(|_| zero()).collect()).unwrap();
        let xi = TensorField::constant(TensorComponents::vector(&[0.0, 0.0, 1.0]));
        let eta = TensorField::constant(TensorComponents::covector(&[0.0, 0.0, 1.0]));
        ManifoldSpec::new(1, g, phi, xi, eta).unwrap()
    }

    #[test]
    fn sphere_has_positive_sectional_curvature() {
        let m = with_metric(sphere_metric(2.0));
        let p = Point::new(vec![0.7, 0.3, 0.0]).unwrap();
        let k = sectional(&m, &p, &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).unwrap();
        assert!((k - 0.25).abs() < 1e-13, "K = {k}");
        let pack = riemann(&m, &p).unwrap();
        // ρ = (1/r²) g on the sphere block
        assert!((pack.ricci.get(&[0, 0]) - 1.0).abs() < 1e-13);
        assert!((pack.tau - 0.5).abs() < 1e-13);
    }

    #[test]
    fn flat_metric_has_zero_christoffels() {
        let g = TensorField::constant(
            TensorComponents::new(Valence::BILINEAR, 3, vec![-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap(),
        );
        let m = with_metric(g);
        let p = Point::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(christoffel(&m, &p).unwrap().max_abs(), 0.0);
        let pack = riemann(&m, &p).unwrap();
        assert_eq!(pack.riemann04.max_abs(), 0.0);
        assert_eq!(pack.tau, 0.0);
    }

    #[test]
    fn degenerate_plane_is_an_error() {
        let m = with_metric(sphere_metric(1.0));
        let p = Point::new(vec![0.7, 0.3, 0.0]).unwrap();
        assert!(matches!(
            sectional(&m, &p, &[1.0, 0.0, 0.0], &[2.0, 0.0, 0.0]),
            Err(Error::DegeneratePlane { .. })
        ));
    }

    #[test]
    fn unsupported_valence() {
        let m = with_metric(sphere_metric(1.0));
        let p = Point::new(vec![0.7, 0.3, 0.0]).unwrap();
        let t = TensorField::constant(TensorComponents::zeros(Valence::new(1, 2), 3));
        assert!(matches!(covariant_derivative(&t, &m, &p), Err(Error::Usage(_))));
    }
}
