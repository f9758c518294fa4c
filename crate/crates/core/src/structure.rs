//! Almost contact B-metric structures `(φ, ξ, η, g)` on a chart: pointwise
//! axiom checks, the associated metric, the fundamental tensor `F`, the Lee
//! forms and the class flags derived from `F`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::curvature::Connection;
use crate::error::{Error, Result};
use crate::field::TensorField;
use crate::jet::{Jet3, JetError};
use crate::tensor::{JetTensor, Point, TensorComponents, Valence};

/// Eigenvalues with magnitude below this count as zero in the signature.
pub const SIGNATURE_THRESHOLD: f64 = 1e-10;

type Guard = dyn Fn(&Point) -> std::result::Result<(), String> + Send + Sync;

/// A `(2n+1)`-dimensional structure given by component functions of `g`,
/// `φ`, `ξ` and `η` on one chart, together with a predicate describing the
/// part of the chart the functions are valid on.
#[derive(Clone)]
pub struct ManifoldSpec {
    n: usize,
    g: TensorField,
    phi: TensorField,
    xi: TensorField,
    eta: TensorField,
    guard: Arc<Guard>,
}

impl fmt::Debug for ManifoldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ManifoldSpec").field("n", &self.n).finish_non_exhaustive()
    }
}

impl ManifoldSpec {
    pub fn new(n: usize, g: TensorField, phi: TensorField, xi: TensorField, eta: TensorField) -> Result<Self> {
        if n == 0 {
            return Err(Error::Usage("n must be at least 1".into()));
        }
        let dim = 2 * n + 1;
        for (name, field, valence) in [
            ("g", &g, Valence::BILINEAR),
            ("phi", &phi, Valence::ENDOMORPHISM),
            ("xi", &xi, Valence::VECTOR),
            ("eta", &eta, Valence::COVECTOR),
        ] {
            if field.valence() != valence || field.dim() != dim {
                return Err(Error::Usage(format!(
                    "{name} must have valence ({},{}) in dim {dim}",
                    valence.up, valence.down
                )));
            }
        }
        Ok(Self {
            n,
            g,
            phi,
            xi,
            eta,
            guard: Arc::new(|_| Ok(())),
        })
    }

    pub fn with_guard(mut self, guard: impl Fn(&Point) -> std::result::Result<(), String> + Send + Sync + 'static) -> Self {
        self.guard = Arc::new(guard);
        self
    }

    /// The same structure with the metric replaced.
    pub fn with_metric(&self, g: TensorField) -> Result<Self> {
        let mut out = Self::new(self.n, g, self.phi.clone(), self.xi.clone(), self.eta.clone())?;
        out.guard = self.guard.clone();
        Ok(out)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n + 1
    }

    pub fn metric(&self) -> &TensorField {
        &self.g
    }

    pub fn phi(&self) -> &TensorField {
        &self.phi
    }

    pub fn xi(&self) -> &TensorField {
        &self.xi
    }

    pub fn eta(&self) -> &TensorField {
        &self.eta
    }

    /// Checks the point's dimension and the domain guard.
    pub fn admit(&self, p: &Point) -> Result<()> {
        if p.dim() != self.dim() {
            return Err(Error::Usage(format!(
                "point of dim {} on a manifold of dim {}",
                p.dim(),
                self.dim()
            )));
        }
        (self.guard)(p).map_err(|reason| Error::Domain {
            point: p.coords().to_vec(),
            reason,
        })
    }

    /// Jets of all structure components at `p`, seeded to `order`.
    pub fn jets(&self, p: &Point, order: usize) -> Result<StructureJets> {
        self.admit(p)?;
        let vars: Vec<Jet3> = Jet3::variables(p.coords())
            .into_iter()
            .map(|v| v.truncated(order))
            .collect();
        let dim = self.dim();
        let eval = |field: &TensorField| -> Result<JetTensor> {
            let comps = field.eval_jets(&vars).map_err(|e| Error::eval(p.coords(), e))?;
            JetTensor::new(field.valence(), dim, comps)
        };
        Ok(StructureJets {
            g: eval(&self.g)?,
            phi: eval(&self.phi)?,
            xi: eval(&self.xi)?,
            eta: eval(&self.eta)?,
        })
    }
}

/// Jets of `g`, `φ`, `ξ`, `η` at one point.
#[derive(Debug, Clone)]
pub struct StructureJets {
    pub g: JetTensor,
    pub phi: JetTensor,
    pub xi: JetTensor,
    pub eta: JetTensor,
}

/// `g̃_{ij} = g_{ia} φ^a_j + η_i η_j` on jets.
pub(crate) fn associated_metric_jets(g: &JetTensor, phi: &JetTensor, eta: &JetTensor) -> JetTensor {
    let dim = g.dim();
    let mut comps = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        for j in 0..dim {
            let mut acc = eta.get(&[i]) * eta.get(&[j]);
            for a in 0..dim {
                acc += &(g.get(&[i, a]) * phi.get(&[a, j]));
            }
            comps.push(acc);
        }
    }
    JetTensor::new(Valence::BILINEAR, dim, comps).expect("shape fixed above")
}

/// The associated metric `g̃(x,y) = g(x,φy) + η(x)η(y)` as a field.
pub fn associated_metric(m: &ManifoldSpec) -> TensorField {
    let (g, phi, eta) = (m.g.clone(), m.phi.clone(), m.eta.clone());
    let dim = m.dim();
    TensorField::new(Valence::BILINEAR, dim, move |x| -> std::result::Result<Vec<Jet3>, JetError> {
        let g = JetTensor::new(Valence::BILINEAR, dim, g.eval_jets(x)?).expect("validated valence");
        let phi = JetTensor::new(Valence::ENDOMORPHISM, dim, phi.eval_jets(x)?).expect("validated valence");
        let eta = JetTensor::new(Valence::COVECTOR, dim, eta.eval_jets(x)?).expect("validated valence");
        Ok(associated_metric_jets(&g, &phi, &eta).comps().to_vec())
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axiom {
    PhiXi,
    PhiSquared,
    EtaPhi,
    EtaXi,
    BMetric,
    MetricXiIsEta,
    MetricXiXi,
    MetricSymmetric,
}

impl Axiom {
    pub const ALL: [Axiom; 8] = [
        Axiom::PhiXi,
        Axiom::PhiSquared,
        Axiom::EtaPhi,
        Axiom::EtaXi,
        Axiom::BMetric,
        Axiom::MetricXiIsEta,
        Axiom::MetricXiXi,
        Axiom::MetricSymmetric,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Axiom::PhiXi => "phi xi = 0",
            Axiom::PhiSquared => "phi^2 = -id + eta (x) xi",
            Axiom::EtaPhi => "eta o phi = 0",
            Axiom::EtaXi => "eta(xi) = 1",
            Axiom::BMetric => "g(phi x, phi y) = -g(x,y) + eta(x)eta(y)",
            Axiom::MetricXiIsEta => "g(x, xi) = eta(x)",
            Axiom::MetricXiXi => "g(xi, xi) = 1",
            Axiom::MetricSymmetric => "g symmetric",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureReport {
    /// Max-abs residual per axiom, in `Axiom::ALL` order.
    pub residuals: Vec<(Axiom, f64)>,
    pub signature: Signature,
    /// The signature is `(n+1, n)`.
    pub signature_ok: bool,
    pub pass: bool,
}

impl StructureReport {
    pub fn residual(&self, axiom: Axiom) -> f64 {
        self.residuals.iter().find(|(a, _)| *a == axiom).map_or(f64::NAN, |r| r.1)
    }

    pub fn worst(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(r.1))
    }
}

pub fn signature_of(g: &DMatrix<f64>) -> Signature {
    let sym = (g + g.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut s = Signature {
        positive: 0,
        negative: 0,
        zero: 0,
    };
    for &ev in eig.eigenvalues.iter() {
        if ev > SIGNATURE_THRESHOLD {
            s.positive += 1;
        } else if ev < -SIGNATURE_THRESHOLD {
            s.negative += 1;
        } else {
            s.zero += 1;
        }
    }
    s
}

/// Residuals of the structure axioms from component values at a point.
pub fn axiom_residuals(
    n: usize,
    g: &TensorComponents,
    phi: &TensorComponents,
    xi: &TensorComponents,
    eta: &TensorComponents,
    tol: f64,
) -> StructureReport {
    let dim = 2 * n + 1;
    let gm = g.matrix();
    let pm = phi.matrix();
    let xv = nalgebra::DVector::from_column_slice(xi.data());
    let ev = nalgebra::DVector::from_column_slice(eta.data());
    let max_abs = |m: &DMatrix<f64>| m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));

    let phi_xi = (&pm * &xv).amax();
    let phi_sq = max_abs(&(&pm * &pm + DMatrix::identity(dim, dim) - &xv * ev.transpose()));
    let eta_phi = (ev.transpose() * &pm).amax();
    let eta_xi = (ev.dot(&xv) - 1.0).abs();
    let b_metric = max_abs(&(pm.transpose() * &gm * &pm + &gm - &ev * ev.transpose()));
    let g_xi = (&gm * &xv - &ev).amax();
    let g_xi_xi = (xv.dot(&(&gm * &xv)) - 1.0).abs();
    let symmetric = max_abs(&(&gm - gm.transpose()));

    let residuals = vec![
        (Axiom::PhiXi, phi_xi),
        (Axiom::PhiSquared, phi_sq),
        (Axiom::EtaPhi, eta_phi),
        (Axiom::EtaXi, eta_xi),
        (Axiom::BMetric, b_metric),
        (Axiom::MetricXiIsEta, g_xi),
        (Axiom::MetricXiXi, g_xi_xi),
        (Axiom::MetricSymmetric, symmetric),
    ];
    let signature = signature_of(&gm);
    let signature_ok = signature.positive == n + 1 && signature.negative == n && signature.zero == 0;
    let pass = signature_ok && residuals.iter().all(|(_, r)| *r <= tol);
    StructureReport {
        residuals,
        signature,
        signature_ok,
        pass,
    }
}

/// Pointwise residuals of every structure axiom and the signature check.
pub fn verify_axioms(m: &ManifoldSpec, p: &Point, tol: f64) -> Result<StructureReport> {
    let jets = m.jets(p, 0)?;
    Ok(axiom_residuals(
        m.n(),
        &jets.g.value(),
        &jets.phi.value(),
        &jets.xi.value(),
        &jets.eta.value(),
        tol,
    ))
}

/// `F(x,y,z) = g((∇_x φ)y, z)` from a connection; layout `[x, y, z]`.
pub fn fundamental_f_from(conn: &Connection) -> Result<TensorComponents> {
    let dim = conn.dim();
    let nabla_phi = conn.covariant_derivative(&conn.phi)?.value(); // [a, x, y]
    let g = conn.g.value();
    let mut f = TensorComponents::zeros(Valence::new(0, 3), dim);
    for x in 0..dim {
        for y in 0..dim {
            for z in 0..dim {
                let v: f64 = (0..dim).map(|a| g.get(&[a, z]) * nabla_phi.get(&[a, x, y])).sum();
                f.set(&[x, y, z], v);
            }
        }
    }
    Ok(f)
}

pub fn fundamental_f(m: &ManifoldSpec, p: &Point) -> Result<TensorComponents> {
    fundamental_f_from(&Connection::at_order(m, p, 1)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeeForms {
    pub theta: TensorComponents,
    pub theta_star: TensorComponents,
    pub omega: TensorComponents,
}

impl LeeForms {
    /// Max of `|ω(ξ)|` and `|θ*∘φ + θ∘φ²|` componentwise.
    pub fn identity_residual(&self, phi: &TensorComponents, xi: &TensorComponents) -> f64 {
        let dim = phi.dim();
        let omega_xi: f64 = (0..dim).map(|a| self.omega.get(&[a]) * xi.get(&[a])).sum();
        let mut worst = omega_xi.abs();
        for z in 0..dim {
            let mut acc = 0.0;
            for a in 0..dim {
                acc += self.theta_star.get(&[a]) * phi.get(&[a, z]);
                let phi2: f64 = (0..dim).map(|b| phi.get(&[a, b]) * phi.get(&[b, z])).sum();
                acc += self.theta.get(&[a]) * phi2;
            }
            worst = worst.max(acc.abs());
        }
        worst
    }
}

/// Lee forms from `F`, traced with `g⁻¹` in the coordinate basis.
pub fn lee_forms_from(
    f: &TensorComponents,
    ginv: &TensorComponents,
    phi: &TensorComponents,
    xi: &TensorComponents,
) -> LeeForms {
    let dim = f.dim();
    let mut theta = vec![0.0; dim];
    let mut theta_star = vec![0.0; dim];
    let mut omega = vec![0.0; dim];
    for z in 0..dim {
        for i in 0..dim {
            for j in 0..dim {
                let gij = ginv.get(&[i, j]);
                theta[z] += gij * f.get(&[i, j, z]);
                let f_phi: f64 = (0..dim).map(|a| f.get(&[i, a, z]) * phi.get(&[a, j])).sum();
                theta_star[z] += gij * f_phi;
                omega[z] += xi.get(&[i]) * xi.get(&[j]) * f.get(&[i, j, z]);
            }
        }
    }
    LeeForms {
        theta: TensorComponents::covector(&theta),
        theta_star: TensorComponents::covector(&theta_star),
        omega: TensorComponents::covector(&omega),
    }
}

pub fn lee_forms(m: &ManifoldSpec, p: &Point) -> Result<LeeForms> {
    let conn = Connection::at_order(m, p, 1)?;
    let f = fundamental_f_from(&conn)?;
    Ok(lee_forms_from(&f, &conn.ginv.value(), &conn.phi.value(), &conn.xi.value()))
}

/// The torse-forming template `−{g(x,φy)η(z) + g(x,φz)η(y)}`.
pub fn f5_template(g: &TensorComponents, phi: &TensorComponents, eta: &TensorComponents) -> TensorComponents {
    let dim = g.dim();
    let g_phi = |x: usize, y: usize| -> f64 { (0..dim).map(|a| g.get(&[x, a]) * phi.get(&[a, y])).sum() };
    let mut t = TensorComponents::zeros(Valence::new(0, 3), dim);
    for x in 0..dim {
        for y in 0..dim {
            for z in 0..dim {
                t.set(&[x, y, z], -(g_phi(x, y) * eta.get(&[z]) + g_phi(x, z) * eta.get(&[y])));
            }
        }
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassFlags {
    pub is_f0: bool,
    pub matches_f5_torse_form: bool,
    /// Fitted scale `s = f/k` of the template.
    pub fitted_f_over_k: f64,
    /// `‖F‖_F`.
    pub f_norm: f64,
    /// `‖F − s·T‖_F / ‖F‖_F` (zero when `F` vanishes).
    pub template_residual: f64,
}

pub fn class_flags_from(f: &TensorComponents, g: &TensorComponents, phi: &TensorComponents, eta: &TensorComponents, tol: f64) -> ClassFlags {
    let template = f5_template(g, phi, eta);
    let f_norm = f.frobenius();
    let tt = template.frobenius_dot(&template);
    let s = if tt > 0.0 { template.frobenius_dot(f) / tt } else { 0.0 };
    let remainder = (f - &template.scale(s)).frobenius();
    let template_residual = if f_norm > 0.0 { remainder / f_norm } else { 0.0 };
    ClassFlags {
        is_f0: f_norm <= tol,
        matches_f5_torse_form: template_residual <= tol,
        fitted_f_over_k: s,
        f_norm,
        template_residual,
    }
}

pub fn class_flags(m: &ManifoldSpec, p: &Point, tol: f64) -> Result<ClassFlags> {
    let conn = Connection::at_order(m, p, 1)?;
    let f = fundamental_f_from(&conn)?;
    Ok(class_flags_from(&f, &conn.g.value(), &conn.phi.value(), &conn.eta.value(), tol))
}

/// Max residual of `F(x,y,z) = F(x,z,y)` and of
/// `F(x,y,z) = F(x,φy,φz) + η(y)F(x,ξ,z) + η(z)F(x,y,ξ)`.
pub fn f_property_residual(f: &TensorComponents, phi: &TensorComponents, xi: &TensorComponents, eta: &TensorComponents) -> f64 {
    let dim = f.dim();
    let mut worst = 0.0f64;
    for x in 0..dim {
        for y in 0..dim {
            for z in 0..dim {
                let fxyz = f.get(&[x, y, z]);
                worst = worst.max((fxyz - f.get(&[x, z, y])).abs());
                let mut rhs = 0.0;
                for a in 0..dim {
                    for b in 0..dim {
                        rhs += phi.get(&[a, y]) * phi.get(&[b, z]) * f.get(&[x, a, b]);
                    }
                    rhs += eta.get(&[y]) * xi.get(&[a]) * f.get(&[x, a, z]);
                    rhs += eta.get(&[z]) * xi.get(&[a]) * f.get(&[x, y, a]);
                }
                worst = worst.max((fxyz - rhs).abs());
            }
        }
    }
    worst
}
