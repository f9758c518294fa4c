//! Torse-forming potentials, regularity, pointwise Einstein-like and
//! Ricci-like soliton fits, the scalar relations tying them together and
//! the parallel-tensor check.
//!
//! A vector field `ϑ` is torse-forming when `∇_xϑ = f·x + γ(x)ϑ`. Since `f`
//! is only available as a fitted number at each point, its differential is
//! obtained by refitting `f` at displaced points.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::{Connection, Geometry};
use crate::error::{Error, Result};
use crate::field::{ScalarField, TensorField};
use crate::jet::Jet3;
use crate::linalg::{fit_span3, least_squares};
use crate::structure::ManifoldSpec;
use crate::tensor::{JetTensor, Point, TensorComponents, Valence};

/// Step of the refit stencil used for derivatives of the conformal scalar.
pub const REFIT_STEP: f64 = 1e-4;
/// `ϑ(p)` with all components at or below this counts as zero.
pub const POTENTIAL_FLOOR: f64 = 1e-14;
/// Planes with `|g(x,x)g(y,y) − g(x,y)²| < SAMPLE_PLANE_FLOOR·|x|²|y|²` are
/// too close to null to sample sectional curvature on.
pub const SAMPLE_PLANE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorseFormingReport {
    pub is_torse_forming: bool,
    /// Conformal scalar.
    pub f: f64,
    /// Generating form.
    pub gamma: Vec<f64>,
    /// `η(ϑ)`.
    pub k: f64,
    pub residual: f64,
    /// `f` within tolerance of zero.
    pub is_trivial: bool,
}

/// Least-squares solve of `∇ϑ = f·id + ϑ⊗γ` for `(f, γ)` from the jets of
/// `ϑ` and a connection at the same point.
pub fn torse_fit(conn: &Connection, theta: &JetTensor, tol: f64) -> Result<TorseFormingReport> {
    if theta.valence() != Valence::VECTOR {
        return Err(Error::Usage("a torse-forming potential must be a vector field".into()));
    }
    let dim = conn.dim();
    let th = theta.value();
    if th.max_abs() <= POTENTIAL_FLOOR {
        return Err(Error::DegeneratePotential {
            point: conn.point.coords().to_vec(),
        });
    }
    let nabla = conn.covariant_derivative(&theta.truncated(1))?.value();
    let mut a = DMatrix::zeros(dim * dim, dim + 1);
    let mut b = DVector::zeros(dim * dim);
    for r in 0..dim {
        for c in 0..dim {
            let row = r * dim + c;
            if r == c {
                a[(row, 0)] = 1.0;
            }
            a[(row, 1 + c)] = th.get(&[r]);
            b[row] = nabla.get(&[r, c]);
        }
    }
    let (x, res) = least_squares(&a, &b);
    let residual = res / b.norm().max(1.0);
    let eta = conn.eta.value();
    let k = (0..dim).map(|i| eta.get(&[i]) * th.get(&[i])).sum();
    let f = x[0];
    Ok(TorseFormingReport {
        is_torse_forming: residual <= tol,
        f,
        gamma: x.iter().skip(1).copied().collect(),
        k,
        residual,
        is_trivial: f.abs() <= tol,
    })
}

pub fn detect_torse_forming(m: &ManifoldSpec, theta: &TensorField, p: &Point, tol: f64) -> Result<TorseFormingReport> {
    m.admit(p)?;
    let conn = Connection::at_order(m, p, 1)?;
    torse_fit(&conn, &theta.jets(p)?, tol)
}

fn conformal_scalar(m: &ManifoldSpec, theta: &TensorField, p: &Point) -> Result<f64> {
    Ok(detect_torse_forming(m, theta, p, 0.0)?.f)
}

/// Derivative of the fitted conformal scalar along `direction`, from refits
/// at `p ± h·d` and `p ± 2h·d` combined into a fourth-order central stencil.
pub fn refit_derivative(m: &ManifoldSpec, theta: &TensorField, p: &Point, direction: &[f64]) -> Result<f64> {
    let h = REFIT_STEP;
    let f_at = |s: f64| conformal_scalar(m, theta, &p.displaced(direction, s));
    let near = (f_at(h)? - f_at(-h)?) / (2.0 * h);
    let far = (f_at(2.0 * h)? - f_at(-2.0 * h)?) / (4.0 * h);
    Ok((4.0 * near - far) / 3.0)
}

/// Torse-forming data of a potential together with `df` in coordinates and
/// `df(ξ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialAnalysis {
    pub torse: TorseFormingReport,
    pub df: Vec<f64>,
    pub df_xi: f64,
    pub xi: Vec<f64>,
    pub eta: Vec<f64>,
}

impl PotentialAnalysis {
    /// `k·df(ξ) + f²`.
    pub fn regularity_value(&self) -> f64 {
        self.torse.k * self.df_xi + self.torse.f * self.torse.f
    }

    /// Largest `|df(x − η(x)ξ)|` over coordinate vectors `x`.
    pub fn horizontal_gradient(&self) -> f64 {
        self.df
            .iter()
            .zip(&self.eta)
            .map(|(d, e)| (d - e * self.df_xi).abs())
            .fold(0.0, f64::max)
    }
}

pub fn analyze_potential(m: &ManifoldSpec, theta: &TensorField, p: &Point, tol: f64) -> Result<PotentialAnalysis> {
    m.admit(p)?;
    let conn = Connection::at_order(m, p, 1)?;
    let torse = torse_fit(&conn, &theta.jets(p)?, tol)?;
    let dim = m.dim();
    let df = (0..dim)
        .map(|i| {
            let mut e = vec![0.0; dim];
            e[i] = 1.0;
            refit_derivative(m, theta, p, &e)
        })
        .collect::<Result<Vec<_>>>()?;
    let xi = conn.xi.value().into_data();
    let df_xi = refit_derivative(m, theta, p, &xi)?;
    Ok(PotentialAnalysis {
        torse,
        df,
        df_xi,
        xi,
        eta: conn.eta.value().into_data(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub f: f64,
    pub k: f64,
    pub df_xi: f64,
    pub kdfxi_plus_f2: f64,
    pub is_regular: bool,
}

impl RegularityReport {
    pub fn from_values(f: f64, k: f64, df_xi: f64, tol: f64) -> Self {
        let value = k * df_xi + f * f;
        Self {
            f,
            k,
            df_xi,
            kdfxi_plus_f2: value,
            is_regular: value.abs() > tol,
        }
    }
}

pub fn regularity(m: &ManifoldSpec, theta: &TensorField, p: &Point, tol: f64) -> Result<RegularityReport> {
    let torse = detect_torse_forming(m, theta, p, tol)?;
    let xi = m.xi().at(p)?.into_data();
    let df_xi = refit_derivative(m, theta, p, &xi)?;
    Ok(RegularityReport::from_values(torse.f, torse.k, df_xi, tol))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EinsteinClass {
    Einstein,
    EtaEinstein,
    EinsteinLike,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolitonClass {
    Ricci,
    EtaRicci,
    RicciLike,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolitonTrend {
    Shrinking,
    Steady,
    Expanding,
}

/// Coefficients on `{g, g̃, η⊗η}` at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub coeffs: [f64; 3],
    pub residual: f64,
    pub pointwise: bool,
    /// Distance of the closest classification quantity to the tolerance.
    pub margin: f64,
}

fn margin(residual: f64, coeffs: &[f64; 3], tol: f64) -> f64 {
    [residual, coeffs[1].abs(), coeffs[2].abs()]
        .iter()
        .map(|v| (v - tol).abs())
        .fold(f64::INFINITY, f64::min)
}

impl FitResult {
    fn new(coeffs: [f64; 3], residual: f64, tol: f64) -> Self {
        Self {
            coeffs,
            residual,
            pointwise: true,
            margin: margin(residual, &coeffs, tol),
        }
    }

    pub fn einstein_class(&self, tol: f64) -> EinsteinClass {
        let [_, b, c] = self.coeffs;
        if self.residual > tol {
            EinsteinClass::None
        } else if b.abs() <= tol && c.abs() <= tol {
            EinsteinClass::Einstein
        } else if b.abs() <= tol {
            EinsteinClass::EtaEinstein
        } else {
            EinsteinClass::EinsteinLike
        }
    }

    pub fn soliton_class(&self, tol: f64) -> SolitonClass {
        match self.einstein_class(tol) {
            EinsteinClass::Einstein => SolitonClass::Ricci,
            EinsteinClass::EtaEinstein => SolitonClass::EtaRicci,
            EinsteinClass::EinsteinLike => SolitonClass::RicciLike,
            EinsteinClass::None => SolitonClass::None,
        }
    }

    pub fn trend(&self, tol: f64) -> SolitonTrend {
        let lambda = self.coeffs[0];
        if lambda < -tol {
            SolitonTrend::Shrinking
        } else if lambda > tol {
            SolitonTrend::Expanding
        } else {
            SolitonTrend::Steady
        }
    }
}

fn span_basis(conn: &Connection) -> [TensorComponents; 3] {
    let eta = conn.eta.value();
    [conn.g.value(), conn.associated_metric().value(), eta.outer(&eta)]
}

/// `ρ = a·g + b·g̃ + c·η⊗η` from precomputed curvature.
pub fn einstein_like_fit_from(geom: &Geometry, tol: f64) -> Result<FitResult> {
    let [g, gt, ee] = span_basis(&geom.conn);
    let fit = fit_span3(&geom.ricci.value(), [&g, &gt, &ee])?;
    Ok(FitResult::new(fit.coeffs, fit.residual, tol))
}

pub fn einstein_like_fit(m: &ManifoldSpec, p: &Point, tol: f64) -> Result<FitResult> {
    m.admit(p)?;
    einstein_like_fit_from(&Geometry::at(m, p)?, tol)
}

/// `½L_ϑg + ρ` as jets.
pub fn soliton_target(geom: &Geometry, theta: &JetTensor) -> Result<JetTensor> {
    let lie = geom.conn.lie_metric(theta)?;
    let order = lie.order().min(geom.ricci.order());
    let lie = lie.truncated(order);
    let rho = geom.ricci.truncated(order);
    Ok(lie.zip_with(&rho, |l, r| &l.scale(0.5) + r))
}

/// `½L_ϑg + ρ + λg + μg̃ + νη⊗η = 0`, solved for `(λ, μ, ν)`.
pub fn soliton_fit_from(geom: &Geometry, theta: &JetTensor, tol: f64) -> Result<FitResult> {
    let target = soliton_target(geom, theta)?.value();
    let [g, gt, ee] = span_basis(&geom.conn);
    let fit = fit_span3(&target, [&g, &gt, &ee])?;
    let coeffs = fit.coeffs.map(|c| -c);
    Ok(FitResult::new(coeffs, fit.residual, tol))
}

pub fn soliton_fit(m: &ManifoldSpec, theta: &TensorField, p: &Point, tol: f64) -> Result<FitResult> {
    m.admit(p)?;
    soliton_fit_from(&Geometry::at(m, p)?, &theta.jets(p)?, tol)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relation {
    pub name: String,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationReport {
    pub relations: Vec<Relation>,
    pub pass: bool,
}

impl RelationReport {
    fn new(items: Vec<(&str, f64)>, tol: f64) -> Self {
        let pass = items.iter().all(|(_, r)| *r <= tol);
        Self {
            relations: items
                .into_iter()
                .map(|(name, residual)| Relation {
                    name: name.to_string(),
                    residual,
                })
                .collect(),
            pass,
        }
    }

    pub fn worst(&self) -> f64 {
        self.relations.iter().map(|r| r.residual).fold(0.0, f64::max)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.relations.iter().find(|r| r.name == name).map(|r| r.residual)
    }
}

/// Scalar relations between the Einstein-like coefficients `(a, b, c)` and
/// the soliton coefficients `(λ, μ, ν)` of a vertical torse-forming
/// potential.
pub fn verify_coefficient_relations(einstein: [f64; 3], soliton: [f64; 3], f: f64, k: f64, df_xi: f64, n: usize, tol: f64) -> RelationReport {
    let [a, b, c] = einstein;
    let [l, m, v] = soliton;
    let sum = l + m + v;
    let rhs = 2.0 * n as f64 / (k * k) * (k * df_xi + f * f);
    RelationReport::new(
        vec![
            ("a+lambda+f", (a + l + f).abs()),
            ("b+mu", (b + m).abs()),
            ("c+nu-f", (c + v - f).abs()),
            ("sum+einstein_sum", (sum + a + b + c).abs()),
            ("sum-regularity", (sum - rhs).abs()),
        ],
        tol,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReebInputs {
    pub f: f64,
    pub f_prime: f64,
    pub k: f64,
    pub a: f64,
    pub tau: f64,
    pub n: usize,
    /// Sectional curvature of a `ξ`-section, when one was available.
    pub k_xi: Option<f64>,
    /// Largest `|df|` on horizontal vectors.
    pub horizontal_gradient: f64,
}

/// `kf′ + f² = k²(a − τ/2n)`, `K_ξ = τ/2n − a` and verticality of `grad f`.
pub fn verify_reeb_relations(x: &ReebInputs, tol: f64) -> RelationReport {
    let two_n = 2.0 * x.n as f64;
    let mut items = vec![(
        "ode",
        (x.k * x.f_prime + x.f * x.f - x.k * x.k * (x.a - x.tau / two_n)).abs(),
    )];
    if let Some(kx) = x.k_xi {
        items.push(("k_xi", (kx - (x.tau / two_n - x.a)).abs()));
    }
    items.push(("horizontal_gradient", x.horizontal_gradient));
    RelationReport::new(items, tol)
}

/// `R(e_c, e_d)v` as a matrix of vectors, layout `[a, c, d]`.
fn curvature_on(riemann: &TensorComponents, v: &[f64]) -> Vec<f64> {
    let dim = v.len();
    let mut out = vec![0.0; dim * dim * dim];
    for a in 0..dim {
        for c in 0..dim {
            for d in 0..dim {
                out[(a * dim + c) * dim + d] = (0..dim).map(|b| riemann.get(&[a, b, c, d]) * v[b]).sum();
            }
        }
    }
    out
}

fn rel_diff(lhs: &[f64], rhs: &[f64]) -> f64 {
    let scale = rhs.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    lhs.iter().zip(rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerticalCurvatureReport {
    /// `R(x,y)ξ` against its closed form, over basis vectors.
    pub r_xy_xi: f64,
    pub r_x_xi_xi: f64,
    pub rho_y_xi: f64,
    pub rho_xi_xi: f64,
    /// `K(ξ,x)` against its closed form, over horizontal basis vectors.
    pub k_xi: Option<f64>,
    /// Common value of `K(ξ,x)` when it was sampled.
    pub k_xi_value: Option<f64>,
    pub notice: Option<String>,
    /// `|∇_ξξ|`.
    pub geodesic: f64,
    /// `|dη|`.
    pub d_eta: f64,
    /// `ξ` torse-forming with scalar `f/k` and form `−(f/k)η`.
    pub xi_torse_forming: f64,
    pub pass: bool,
}

impl VerticalCurvatureReport {
    pub fn worst(&self) -> f64 {
        [
            self.r_xy_xi,
            self.r_x_xi_xi,
            self.rho_y_xi,
            self.rho_xi_xi,
            self.k_xi.unwrap_or(0.0),
            self.geodesic,
            self.d_eta,
            self.xi_torse_forming,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// `(|∇_ξξ|, |dη|)` at the connection's point.
pub fn geodesic_residuals(conn: &Connection) -> Result<(f64, f64)> {
    let dim = conn.dim();
    let nabla_xi = conn.covariant_derivative(&conn.xi.truncated(1))?.value();
    let xi = conn.xi.value();
    let geodesic = (0..dim)
        .map(|a| (0..dim).map(|c| nabla_xi.get(&[a, c]) * xi.get(&[c])).sum::<f64>().abs())
        .fold(0.0, f64::max);
    let mut d_eta = 0.0f64;
    for i in 0..dim {
        for j in 0..dim {
            d_eta = d_eta.max((conn.eta.get(&[j]).d1(i) - conn.eta.get(&[i]).d1(j)).abs());
        }
    }
    Ok((geodesic, d_eta))
}

/// Sectional curvature of `(ξ, x)` for each sample `x`, skipping planes that
/// are too close to null. Returns the values and the number skipped.
pub fn xi_sectional_samples(geom: &Geometry, xs: &[Vec<f64>]) -> Result<(Vec<f64>, usize)> {
    let r04 = geom.riemann04();
    let g = geom.conn.g.value();
    let xi = geom.conn.xi.value().into_data();
    let mut values = Vec::new();
    let mut skipped = 0;
    for x in xs {
        let gxx = quad(&g, x, x);
        let gxy = quad(&g, x, &xi);
        let den = gxx * quad(&g, &xi, &xi) - gxy * gxy;
        let norms = x.iter().map(|v| v * v).sum::<f64>() * xi.iter().map(|v| v * v).sum::<f64>();
        if norms == 0.0 || den.abs() < SAMPLE_PLANE_FLOOR * norms {
            skipped += 1;
            continue;
        }
        values.push(crate::curvature::sectional_from(&r04, &g, &xi, x)?);
    }
    Ok((values, skipped))
}

fn quad(g: &TensorComponents, x: &[f64], y: &[f64]) -> f64 {
    let dim = x.len();
    let mut acc = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            acc += g.get(&[i, j]) * x[i] * y[j];
        }
    }
    acc
}

/// The curvature equalities of a vertical torse-forming potential, from
/// precomputed curvature and potential data.
pub fn vertical_curvature_from(geom: &Geometry, pa: &PotentialAnalysis, tol: f64) -> Result<VerticalCurvatureReport> {
    let dim = geom.dim();
    let n = geom.n() as f64;
    let (f, k) = (pa.torse.f, pa.torse.k);
    if k.abs() <= POTENTIAL_FLOOR {
        return Err(Error::Usage("the potential must have a non-zero vertical part".into()));
    }
    let k2 = k * k;
    let df = &pa.df;
    let eta = &pa.eta;
    let xi = &pa.xi;
    let phi = geom.conn.phi.value();
    let phi2 = |a: usize, b: usize| -> f64 { (0..dim).map(|c| phi.get(&[a, c]) * phi.get(&[c, b])).sum() };
    let weight = |i: usize| k * df[i] + f * f * eta[i];
    let riemann = geom.riemann.value();

    let lhs = curvature_on(&riemann, xi);
    let mut rhs = vec![0.0; dim * dim * dim];
    for a in 0..dim {
        for c in 0..dim {
            for d in 0..dim {
                rhs[(a * dim + c) * dim + d] = -(weight(c) * phi2(a, d) - weight(d) * phi2(a, c)) / k2;
            }
        }
    }
    let r_xy_xi = rel_diff(&lhs, &rhs);

    let reg = k * pa.df_xi + f * f;
    let mut lhs2 = vec![0.0; dim * dim];
    let mut rhs2 = vec![0.0; dim * dim];
    for a in 0..dim {
        for c in 0..dim {
            lhs2[a * dim + c] = (0..dim).map(|d| lhs[(a * dim + c) * dim + d] * xi[d]).sum();
            rhs2[a * dim + c] = reg * phi2(a, c) / k2;
        }
    }
    let r_x_xi_xi = rel_diff(&lhs2, &rhs2);

    let rho = geom.ricci.value();
    let rho_y: Vec<f64> = (0..dim)
        .map(|y| (0..dim).map(|b| rho.get(&[y, b]) * xi[b]).sum())
        .collect();
    let rho_y_rhs: Vec<f64> = (0..dim)
        .map(|y| -((2.0 * n - 1.0) * k * df[y] + (k * pa.df_xi + 2.0 * n * f * f) * eta[y]) / k2)
        .collect();
    let rho_y_xi = rel_diff(&rho_y, &rho_y_rhs);
    let rho_xx: f64 = (0..dim).map(|y| rho_y[y] * xi[y]).sum();
    let rho_xi_xi = rel_diff(&[rho_xx], &[-2.0 * n / k2 * reg]);

    let mut notice = None;
    let (mut k_xi, mut k_xi_value) = (None, None);
    if reg.abs() <= tol {
        notice = Some("non-regular: R(x,xi)xi vanishes, xi-section curvature skipped".to_string());
    } else {
        let basis: Vec<Vec<f64>> = (0..dim)
            .map(|i| {
                let mut e = vec![0.0; dim];
                e[i] = 1.0;
                e.iter().zip(xi).map(|(v, x)| v - eta[i] * x).collect()
            })
            .collect();
        let (values, _) = xi_sectional_samples(geom, &basis)?;
        if values.is_empty() {
            notice = Some("every sampled xi-section is degenerate".to_string());
        } else {
            let want = -reg / k2;
            k_xi = Some(rel_diff(&values, &vec![want; values.len()]));
            k_xi_value = Some(values[0]);
        }
    }

    let (geodesic, d_eta) = geodesic_residuals(&geom.conn)?;
    let xi_fit = torse_fit(&geom.conn, &geom.conn.xi, tol)?;
    let mut xi_torse = (xi_fit.f - f / k).abs().max(xi_fit.residual);
    for (gm, e) in xi_fit.gamma.iter().zip(eta) {
        xi_torse = xi_torse.max((gm + f / k * e).abs());
    }

    let mut report = VerticalCurvatureReport {
        r_xy_xi,
        r_x_xi_xi,
        rho_y_xi,
        rho_xi_xi,
        k_xi,
        k_xi_value,
        notice,
        geodesic,
        d_eta,
        xi_torse_forming: xi_torse,
        pass: false,
    };
    report.pass = report.worst() <= tol;
    Ok(report)
}

pub fn vertical_curvature_checks(m: &ManifoldSpec, theta: &TensorField, p: &Point, tol: f64) -> Result<VerticalCurvatureReport> {
    let pa = analyze_potential(m, theta, p, tol)?;
    vertical_curvature_from(&Geometry::at(m, p)?, &pa, tol)
}

/// A symmetric `(0,2)` field whose parallelism is checked.
#[derive(Debug, Clone)]
pub enum SymmetricTensor {
    /// `c·g`.
    MetricMultiple(f64),
    /// `½L_ϑg + ρ + μg̃ + νη⊗η`.
    SolitonCombination {
        potential: TensorField,
        mu: ScalarField,
        nu: ScalarField,
    },
    Field(TensorField),
}

impl SymmetricTensor {
    /// Jets of `h` at the geometry's point, to order at least 1.
    pub fn jets(&self, geom: &Geometry) -> Result<JetTensor> {
        let conn = &geom.conn;
        let p = &conn.point;
        match self {
            SymmetricTensor::MetricMultiple(c) => Ok(conn.g.map(|j| j.scale(*c))),
            SymmetricTensor::Field(h) => {
                if h.valence() != Valence::BILINEAR {
                    return Err(Error::Usage("h must be a (0,2) field".into()));
                }
                h.jets(p)
            }
            SymmetricTensor::SolitonCombination { potential, mu, nu } => {
                let target = soliton_target(geom, &potential.jets(p)?)?;
                let vars = Jet3::variables(p.coords());
                let mu = mu.eval_jets(&vars).map_err(|e| Error::Eval {
                    point: p.coords().to_vec(),
                    source: e,
                })?;
                let nu = nu.eval_jets(&vars).map_err(|e| Error::Eval {
                    point: p.coords().to_vec(),
                    source: e,
                })?;
                let gt = conn.associated_metric();
                let dim = conn.dim();
                let order = target.order().min(mu.order()).min(nu.order());
                let mut comps = Vec::with_capacity(dim * dim);
                for i in 0..dim {
                    for j in 0..dim {
                        let ee = conn.eta.get(&[i]) * conn.eta.get(&[j]);
                        let v = target.get(&[i, j]) + &(&mu * gt.get(&[i, j])) + (&nu * &ee);
                        comps.push(v.truncated(order));
                    }
                }
                JetTensor::new(Valence::BILINEAR, dim, comps)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelPoint {
    pub point: Point,
    pub nabla_h: f64,
    /// `⟨h, g⟩ / ⟨g, g⟩`.
    pub multiple: f64,
    /// `‖h − multiple·g‖ / max(1, ‖h‖)`.
    pub multiple_residual: f64,
    /// `max |h(R(x,y)ξ, ξ)|` over basis vectors.
    pub h_r_xi: f64,
    /// `max |h(x,ξ) − h(ξ,ξ)η(x)|` over basis vectors.
    pub h_vertical: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelReport {
    pub max_nabla_h: f64,
    pub is_parallel: bool,
    pub constant_multiple: Option<f64>,
    /// Worst pointwise fit of `h = c·g` combined with the spread of `c`.
    pub fit_residual: f64,
    pub max_h_r_xi: f64,
    pub max_h_vertical: f64,
    pub points: Vec<ParallelPoint>,
}

fn parallel_point(m: &ManifoldSpec, h: &SymmetricTensor, p: &Point) -> Result<ParallelPoint> {
    m.admit(p)?;
    let geom = Geometry::at(m, p)?;
    let dim = geom.dim();
    let hj = h.jets(&geom)?;
    let nabla = geom.conn.covariant_derivative(&hj)?.value();
    let hv = hj.value();
    let g = geom.conn.g.value();
    let multiple = hv.frobenius_dot(&g) / g.frobenius_dot(&g);
    let multiple_residual = (&hv - &g.scale(multiple)).frobenius() / hv.frobenius().max(1.0);
    let xi = geom.conn.xi.value().into_data();
    let eta = geom.conn.eta.value().into_data();
    let rxi = curvature_on(&geom.riemann.value(), &xi);
    let h_xi: Vec<f64> = (0..dim).map(|a| quad_row(&hv, a, &xi)).collect();
    let mut h_r_xi = 0.0f64;
    for c in 0..dim {
        for d in 0..dim {
            let v: f64 = (0..dim).map(|a| rxi[(a * dim + c) * dim + d] * h_xi[a]).sum();
            h_r_xi = h_r_xi.max(v.abs());
        }
    }
    let h_xixi: f64 = (0..dim).map(|a| h_xi[a] * xi[a]).sum();
    let h_vertical = (0..dim)
        .map(|x| (h_xi[x] - h_xixi * eta[x]).abs())
        .fold(0.0, f64::max);
    Ok(ParallelPoint {
        point: p.clone(),
        nabla_h: nabla.frobenius(),
        multiple,
        multiple_residual,
        h_r_xi,
        h_vertical,
    })
}

fn quad_row(h: &TensorComponents, a: usize, v: &[f64]) -> f64 {
    v.iter().enumerate().map(|(b, x)| h.get(&[a, b]) * x).sum()
}

/// Checks `∇h = 0` over a grid and, when it holds, fits `h = c·g`.
pub fn parallel_check(m: &ManifoldSpec, h: &SymmetricTensor, grid: &[Point], tol: f64) -> Result<ParallelReport> {
    let points = grid
        .par_iter()
        .map(|p| parallel_point(m, h, p))
        .collect::<Result<Vec<_>>>()?;
    let max = |f: fn(&ParallelPoint) -> f64| points.iter().map(f).fold(0.0, f64::max);
    let max_nabla_h = max(|q| q.nabla_h);
    let is_parallel = !points.is_empty() && max_nabla_h <= tol;
    let (constant_multiple, fit_residual) = if is_parallel {
        let c = points.iter().map(|q| q.multiple).sum::<f64>() / points.len() as f64;
        let spread = points.iter().map(|q| (q.multiple - c).abs()).fold(0.0, f64::max);
        (Some(c), max(|q| q.multiple_residual).max(spread / c.abs().max(1.0)))
    } else {
        (None, max(|q| q.multiple_residual))
    };
    Ok(ParallelReport {
        max_nabla_h,
        is_parallel,
        constant_multiple,
        fit_residual,
        max_h_r_xi: max(|q| q.h_r_xi),
        max_h_vertical: max(|q| q.h_vertical),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::example::{build_example, oracles, EllProfile};

    fn p(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    #[test]
    fn torse_forming_on_log_profile_with_k2() {
        let e = build_example(1, EllProfile::Log { c: 1.0 }, 2.0).unwrap();
        let r = detect_torse_forming(&e.transformed, &e.potential(), &p(&[1.0, 1.0, 1.0]), 1e-10).unwrap();
        assert!(r.is_torse_forming && !r.is_trivial);
        assert!((r.f - 2.0).abs() < 1e-12, "{r:?}");
        assert!((r.k - 2.0).abs() < 1e-15);
        assert!(r.gamma[0].abs() < 1e-12 && r.gamma[1].abs() < 1e-12);
        assert!((r.gamma[2] + 1.0).abs() < 1e-12);
        assert!(r.residual <= 1e-10);
    }

    #[test]
    fn parallel_field_on_flat_base_is_trivial() {
        let e = build_example(1, EllProfile::ScaledLog, 1.0).unwrap();
        let theta = TensorField::constant(TensorComponents::vector(&[1.0, 2.0, 3.0]));
        let r = detect_torse_forming(&e.base, &theta, &p(&[1.0, 1.0, 1.0]), 1e-12).unwrap();
        assert!(r.is_torse_forming && r.is_trivial);
        assert!(r.f.abs() < 1e-15 && r.gamma.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn zero_potential_is_rejected() {
        let e = build_example(1, EllProfile::ScaledLog, 1.0).unwrap();
        let theta = TensorField::constant(TensorComponents::vector(&[0.0, 0.0, 0.0]));
        let err = detect_torse_forming(&e.base, &theta, &p(&[1.0, 1.0, 1.0]), 1e-12).unwrap_err();
        assert!(matches!(err, Error::DegeneratePotential { .. }));
    }

    #[test]
    fn scaled_log_conformal_scalar_at_t2() {
        let e = build_example(1, EllProfile::ScaledLog, 1.0).unwrap();
        let r = detect_torse_forming(&e.transformed, &e.potential(), &p(&[0.5, -1.0, 2.0]), 1e-10).unwrap();
        assert!((r.f - (1.0 + 3f64.sqrt()) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn regularity_presets() {
        let q = p(&[1.0, 1.0, 1.0]);
        let e = build_example(1, EllProfile::ScaledLog, 1.0).unwrap();
        let r = regularity(&e.transformed, &e.potential(), &q, 1e-6).unwrap();
        assert!(r.is_regular && (r.kdfxi_plus_f2 - 0.5).abs() < 1e-8, "{r:?}");
        let e = build_example(1, EllProfile::Log { c: 1.0 }, 1.0).unwrap();
        let r = regularity(&e.transformed, &e.potential(), &q, 1e-6).unwrap();
        assert!(!r.is_regular && r.kdfxi_plus_f2.abs() < 1e-8, "{r:?}");
        let e = build_example(1, EllProfile::Linear { alpha: 0.7 }, 1.0).unwrap();
        let r = regularity(&e.transformed, &e.potential(), &q, 1e-6).unwrap();
        assert!(r.is_regular && (r.kdfxi_plus_f2 - 0.49).abs() < 1e-8, "{r:?}");
    }

    #[test]
    fn fits_reproduce_closed_forms() {
        let q = p(&[1.0, 1.0, 1.0]);
        let e = build_example(1, EllProfile::Log { c: 1.0 }, 1.0).unwrap();
        let fit = einstein_like_fit(&e.transformed, &q, 1e-9).unwrap();
        let want = [-1.0, 0.0, 1.0];
        for (a, b) in fit.coeffs.iter().zip(want) {
            assert!((a - b).abs() < 1e-9, "{fit:?}");
        }
        assert!(fit.residual <= 1e-9);
        assert_eq!(fit.einstein_class(1e-9), EinsteinClass::EtaEinstein);

        let e = build_example(1, EllProfile::ScaledLog, 1.0).unwrap();
        let fit = soliton_fit(&e.transformed, &e.potential(), &q, 1e-9).unwrap();
        for (a, b) in fit.coeffs.iter().zip([1.0, 0.0, 0.0]) {
            assert!((a - b).abs() < 1e-9, "{fit:?}");
        }
        assert_eq!(fit.soliton_class(1e-9), SolitonClass::Ricci);
        assert_eq!(fit.trend(1e-9), SolitonTrend::Expanding);

        let e = build_example(1, EllProfile::Linear { alpha: 1.0 }, 1.0).unwrap();
        let fit = einstein_like_fit(&e.transformed, &p(&[-0.5, 2.0, 0.5]), 1e-9).unwrap();
        for (a, b) in fit.coeffs.iter().zip([-2.0, 0.0, 0.0]) {
            assert!((a - b).abs() < 1e-9, "{fit:?}");
        }
        assert_eq!(fit.einstein_class(1e-9), EinsteinClass::Einstein);
    }

    #[test]
    fn flat_base_fits_vanish() {
        let e = build_example(1, EllProfile::ScaledLog, 1.0).unwrap();
        let q = p(&[1.0, 1.0, 1.0]);
        let fit = einstein_like_fit(&e.base, &q, 1e-12).unwrap();
        assert!(fit.coeffs.iter().all(|c| c.abs() < 1e-15) && fit.residual == 0.0);
        let zero = TensorField::constant(TensorComponents::vector(&[0.0; 3]));
        let fit = soliton_fit(&e.base, &zero, &q, 1e-12).unwrap();
        assert!(fit.coeffs.iter().all(|c| c.abs() < 1e-15));
    }

    #[test]
    fn coefficient_relation_spot_values() {
        let s3 = 3f64.sqrt();
        let f = (1.0 + s3) / 2.0;
        let r = verify_coefficient_relations([-(3.0 + s3) / 2.0, 0.0, f], [1.0, 0.0, 0.0], f, 1.0, -f, 1, 1e-12);
        assert!(r.pass, "{r:?}");
        let r = verify_coefficient_relations([-1.0, 0.0, 1.0], [0.0, 0.0, 0.0], 1.0, 1.0, -1.0, 1, 1e-12);
        assert!(r.pass, "{r:?}");
        let r = verify_coefficient_relations([-2.0, 0.0, 0.0], [1.0, 0.0, 1.0], 1.0, 1.0, 0.0, 1, 1e-12);
        assert!(r.pass);
        let r = verify_coefficient_relations([-2.0, 0.0, 0.0], [1.0, 0.5, 1.0], 1.0, 1.0, 0.0, 1, 1e-12);
        assert!(!r.pass && r.get("b+mu") == Some(0.5));
    }

    #[test]
    fn vertical_curvature_and_reeb_relations_on_regular_preset() {
        let e = build_example(1, EllProfile::ScaledLog, 1.0).unwrap();
        let q = p(&[0.5, 2.0, 1.0]);
        let r = vertical_curvature_checks(&e.transformed, &e.potential(), &q, 1e-8).unwrap();
        assert!(r.pass, "{r:?}");
        assert!((r.k_xi_value.unwrap() + 0.5).abs() < 1e-8);
        let geom = Geometry::at(&e.transformed, &q).unwrap();
        let rho_xixi = geom.ricci.value().get(&[2, 2]);
        assert!((rho_xixi + 1.0).abs() < 1e-12);

        let o = oracles(&e, &q).unwrap();
        let pa = analyze_potential(&e.transformed, &e.potential(), &q, 1e-8).unwrap();
        let fit = einstein_like_fit_from(&geom, 1e-8).unwrap();
        let c = verify_reeb_relations(
            &ReebInputs {
                f: pa.torse.f,
                f_prime: pa.df_xi,
                k: 1.0,
                a: fit.coeffs[0],
                tau: geom.tau(),
                n: 1,
                k_xi: r.k_xi_value,
                horizontal_gradient: pa.horizontal_gradient(),
            },
            1e-8,
        );
        assert!(c.pass, "{c:?}");
        assert!((pa.df_xi - o.f_prime).abs() < 1e-9);
    }

    #[test]
    fn non_regular_preset_skips_xi_section() {
        let e = build_example(1, EllProfile::Log { c: 1.0 }, 1.0).unwrap();
        let r = vertical_curvature_checks(&e.transformed, &e.potential(), &p(&[1.0, 1.0, 1.0]), 1e-8).unwrap();
        assert!(r.pass && r.k_xi.is_none() && r.notice.is_some(), "{r:?}");
    }

    #[test]
    fn vertical_curvature_on_flat_base() {
        let e = build_example(1, EllProfile::ScaledLog, 1.0).unwrap();
        let r = vertical_curvature_checks(&e.base, &e.base.xi().scaled(2.0), &p(&[1.0, 1.0, 1.0]), 1e-12).unwrap();
        assert_eq!(r.worst(), 0.0);
    }

    #[test]
    fn metric_multiple_is_parallel() {
        let e = build_example(1, EllProfile::ScaledLog, 1.0).unwrap();
        let grid = [p(&[1.0, 1.0, 1.0]), p(&[0.5, -1.0, 2.0])];
        let r = parallel_check(&e.transformed, &SymmetricTensor::MetricMultiple(5.0), &grid, 1e-10).unwrap();
        assert!(r.is_parallel);
        assert!((r.constant_multiple.unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn einstein_combination_is_parallel() {
        let e = build_example(1, EllProfile::Linear { alpha: 1.0 }, 1.0).unwrap();
        let h = SymmetricTensor::SolitonCombination {
            potential: e.potential(),
            mu: ScalarField::constant(0.0),
            nu: e.conformal_scalar_field(),
        };
        let grid = [p(&[1.0, 1.0, 1.0]), p(&[0.5, -1.0, 2.0]), p(&[-1.0, 0.5, 0.5])];
        let r = parallel_check(&e.transformed, &h, &grid, 1e-7).unwrap();
        assert!(r.is_parallel, "{r:?}");
        assert!((r.constant_multiple.unwrap() + 1.0).abs() < 1e-9);
        assert!(r.max_h_r_xi < 1e-9 && r.max_h_vertical < 1e-9);

        let e = build_example(1, EllProfile::ScaledLog, 1.0).unwrap();
        let h = SymmetricTensor::SolitonCombination {
            potential: e.potential(),
            mu: ScalarField::constant(0.0),
            nu: e.conformal_scalar_field(),
        };
        let r = parallel_check(&e.transformed, &h, &grid, 1e-7).unwrap();
        assert!(!r.is_parallel && r.max_nabla_h > 1e-3 && r.constant_multiple.is_none());
    }
}
