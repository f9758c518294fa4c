//! Grid-wide verification: every check runs at every grid point, failures
//! become records instead of aborting, and the report is assembled in a
//! fixed order so repeated runs serialize identically.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::{symmetry_residuals, Connection, Geometry};
use crate::error::{Error, Result};
use crate::example::{default_grid, AngleOrientation, default_grid_size, oracles, ExampleManifold, Oracles};
use crate::field::{ScalarField, TensorField};
use crate::soliton::{
    analyze_potential, einstein_like_fit_from, geodesic_residuals, parallel_check, soliton_fit_from,
    verify_coefficient_relations, verify_reeb_relations, vertical_curvature_from, xi_sectional_samples, FitResult,
    PotentialAnalysis, ReebInputs, SymmetricTensor,
};
use crate::structure::{
    class_flags_from, f_property_residual, fundamental_f_from, lee_forms_from, verify_axioms, ManifoldSpec,
};
use crate::tensor::{Point, TensorComponents};

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Identities computed from jets alone.
    pub jet_exact: f64,
    /// Identities involving refit derivatives of the conformal scalar.
    pub refit_derivative: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            jet_exact: 1e-8,
            refit_derivative: 1e-6,
        }
    }
}

impl Tolerances {
    pub fn uniform(tol: f64) -> Self {
        Self {
            jet_exact: tol,
            refit_derivative: tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Axioms,
    ClassFlags,
    CurvatureOracle,
    CurvatureSymmetries,
    ScalarConsistency,
    TorseForming,
    Regularity,
    EinsteinLikeFit,
    SolitonFit,
    CoefficientRelations,
    ReebRelations,
    VerticalCurvature,
    XiSectionSpread,
    Geodesic,
    RegularityEquivalence,
    Parallel,
}

impl Check {
    pub const ALL: [Check; 16] = [
        Check::Axioms,
        Check::ClassFlags,
        Check::CurvatureOracle,
        Check::CurvatureSymmetries,
        Check::ScalarConsistency,
        Check::TorseForming,
        Check::Regularity,
        Check::EinsteinLikeFit,
        Check::SolitonFit,
        Check::CoefficientRelations,
        Check::ReebRelations,
        Check::VerticalCurvature,
        Check::XiSectionSpread,
        Check::Geodesic,
        Check::RegularityEquivalence,
        Check::Parallel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Axioms => "axioms",
            Check::ClassFlags => "class_flags",
            Check::CurvatureOracle => "curvature_oracle",
            Check::CurvatureSymmetries => "curvature_symmetries",
            Check::ScalarConsistency => "scalar_consistency",
            Check::TorseForming => "torse_forming",
            Check::Regularity => "regularity",
            Check::EinsteinLikeFit => "einstein_like_fit",
            Check::SolitonFit => "soliton_fit",
            Check::CoefficientRelations => "coefficient_relations",
            Check::ReebRelations => "reeb_relations",
            Check::VerticalCurvature => "vertical_curvature",
            Check::XiSectionSpread => "xi_section_spread",
            Check::Geodesic => "geodesic",
            Check::RegularityEquivalence => "regularity_equivalence",
            Check::Parallel => "parallel",
        }
    }

    pub fn from_name(name: &str) -> Option<Check> {
        Check::ALL.into_iter().find(|c| c.name() == name)
    }

    /// Checks that compare against closed forms of the example family.
    pub fn needs_example(self) -> bool {
        matches!(self, Check::CurvatureOracle | Check::Parallel)
    }

    pub fn needs_potential(self) -> bool {
        !matches!(
            self,
            Check::Axioms
                | Check::ClassFlags
                | Check::CurvatureOracle
                | Check::CurvatureSymmetries
                | Check::ScalarConsistency
                | Check::EinsteinLikeFit
        )
    }

    fn uses_refit(self) -> bool {
        matches!(
            self,
            Check::Regularity
                | Check::CoefficientRelations
                | Check::ReebRelations
                | Check::VerticalCurvature
                | Check::RegularityEquivalence
        )
    }

    pub fn tolerance(self, tol: &Tolerances) -> f64 {
        if self.uses_refit() {
            tol.refit_derivative
        } else {
            tol.jet_exact
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// NaN residuals (failed evaluations) serialize as `null`.
mod nullable {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_nan() {
            s.serialize_none()
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckRecord {
    pub check: Check,
    /// `None` for grid-level checks.
    pub point: Option<Point>,
    #[serde(with = "nullable")]
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub detail: String,
}

impl PartialEq for CheckRecord {
    fn eq(&self, o: &Self) -> bool {
        let same_residual = self.residual == o.residual || (self.residual.is_nan() && o.residual.is_nan());
        self.check == o.check
            && self.point == o.point
            && same_residual
            && self.tolerance == o.tolerance
            && self.pass == o.pass
            && self.detail == o.detail
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub check: Check,
    #[serde(with = "nullable")]
    pub worst_residual: f64,
    pub passed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub engine_version: String,
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub subject: String,
    pub pass: bool,
    pub summary: Vec<CheckSummary>,
    pub records: Vec<CheckRecord>,
    pub provenance: Provenance,
}

impl SuiteReport {
    pub fn summary_for(&self, check: Check) -> Option<&CheckSummary> {
        self.summary.iter().find(|s| s.check == check)
    }

    pub fn records_for(&self, check: Check) -> impl Iterator<Item = &CheckRecord> {
        self.records.iter().filter(move |r| r.check == check)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.records.iter().filter(|r| !r.pass)
    }
}

/// What the suite runs on: a structure, optionally a potential, and the
/// example family it came from when closed forms are available.
#[derive(Debug, Clone)]
pub struct Subject {
    pub name: String,
    pub manifold: ManifoldSpec,
    pub potential: Option<TensorField>,
    pub example: Option<ExampleManifold>,
}

impl Subject {
    pub fn from_example(e: &ExampleManifold) -> Self {
        Self {
            name: format!(
                "example n={} profile={} k={} orientation={:?}",
                e.n,
                e.profile.name(),
                e.k,
                e.orientation
            ),
            manifold: e.transformed.clone(),
            potential: Some(e.potential()),
            example: Some(e.clone()),
        }
    }
}

struct Outcome {
    residual: f64,
    pass: Option<bool>,
    detail: String,
}

impl Outcome {
    fn residual(residual: f64, detail: impl Into<String>) -> Self {
        Self {
            residual,
            pass: None,
            detail: detail.into(),
        }
    }

    fn with_pass(mut self, pass: bool) -> Self {
        self.pass = Some(pass);
        self
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn rel_frobenius(a: &TensorComponents, b: &TensorComponents) -> f64 {
    (a - b).frobenius() / b.frobenius().max(1e-300)
}

/// Everything computed once per point and shared between checks.
struct PointData<'a> {
    subject: &'a Subject,
    point: &'a Point,
    tol: Tolerances,
    geom: Result<Geometry>,
    potential: Option<Result<PotentialAnalysis>>,
    oracle: Option<Result<Oracles>>,
}

impl PointData<'_> {
    fn geom(&self) -> Result<&Geometry> {
        self.geom.as_ref().map_err(Clone::clone)
    }

    fn potential(&self) -> Result<&PotentialAnalysis> {
        match &self.potential {
            Some(r) => r.as_ref().map_err(Clone::clone),
            None => Err(Error::Usage("no potential supplied".into())),
        }
    }

    fn oracle(&self) -> Result<&Oracles> {
        match &self.oracle {
            Some(r) => r.as_ref().map_err(Clone::clone),
            None => Err(Error::Usage("closed forms need the example family".into())),
        }
    }

    fn einstein(&self) -> Result<FitResult> {
        einstein_like_fit_from(self.geom()?, self.tol.jet_exact)
    }

    fn soliton(&self) -> Result<FitResult> {
        let potential = self
            .subject
            .potential
            .as_ref()
            .ok_or_else(|| Error::Usage("no potential supplied".into()))?;
        soliton_fit_from(self.geom()?, &potential.jets(self.point)?, self.tol.jet_exact)
    }

    fn n(&self) -> usize {
        self.subject.manifold.n()
    }

    fn run(&self, check: Check) -> Result<Outcome> {
        let tol = check.tolerance(&self.tol);
        match check {
            Check::Axioms => self.axioms(tol),
            Check::ClassFlags => self.class_flags(tol),
            Check::CurvatureOracle => self.curvature_oracle(),
            Check::CurvatureSymmetries => {
                let s = symmetry_residuals(self.geom()?)?;
                Ok(Outcome::residual(
                    s.worst(),
                    format!(
                        "bianchi {:.3e}, pair swap {:.3e}, nabla g {:.3e}, ricci symmetry {:.3e}",
                        s.first_bianchi, s.pair_swap, s.metric_compatibility, s.ricci_symmetry
                    ),
                ))
            }
            Check::ScalarConsistency => self.scalar_consistency(tol),
            Check::TorseForming => self.torse_forming(),
            Check::Regularity => self.regularity(tol),
            Check::EinsteinLikeFit => {
                let fit = self.einstein()?;
                let mut residual = fit.residual;
                if let Ok(o) = self.oracle() {
                    residual = residual.max(coeff_error(&fit, [o.a, o.b, o.c]));
                }
                Ok(Outcome::residual(
                    residual,
                    format!(
                        "{:?} (a,b,c) = ({:.10}, {:.10}, {:.10}), fit residual {:.3e}, margin {:.3e}",
                        fit.einstein_class(tol),
                        fit.coeffs[0],
                        fit.coeffs[1],
                        fit.coeffs[2],
                        fit.residual,
                        fit.margin
                    ),
                ))
            }
            Check::SolitonFit => {
                let fit = self.soliton()?;
                let mut residual = fit.residual;
                if let Ok(o) = self.oracle() {
                    residual = residual.max(coeff_error(&fit, [o.lambda, o.mu, o.nu]));
                }
                Ok(Outcome::residual(
                    residual,
                    format!(
                        "{:?} {:?} (lambda,mu,nu) = ({:.10}, {:.10}, {:.10}), fit residual {:.3e}, margin {:.3e}",
                        fit.soliton_class(tol),
                        fit.trend(tol),
                        fit.coeffs[0],
                        fit.coeffs[1],
                        fit.coeffs[2],
                        fit.residual,
                        fit.margin
                    ),
                ))
            }
            Check::CoefficientRelations => {
                let (e, s) = (self.einstein()?, self.soliton()?);
                let pa = self.potential()?;
                let r = verify_coefficient_relations(e.coeffs, s.coeffs, pa.torse.f, pa.torse.k, pa.df_xi, self.n(), tol);
                let jet = self.tol.jet_exact;
                let equivalent = (e.residual <= jet) == (s.residual <= jet);
                Ok(Outcome::residual(
                    r.worst(),
                    format!(
                        "einstein-like {} soliton {}",
                        e.residual <= jet,
                        s.residual <= jet
                    ),
                )
                .with_pass(r.pass && equivalent))
            }
            Check::ReebRelations => {
                let geom = self.geom()?;
                let pa = self.potential()?;
                let e = self.einstein()?;
                let horizontal = horizontal_basis(pa);
                let (values, _) = xi_sectional_samples(geom, &horizontal)?;
                let r = verify_reeb_relations(
                    &ReebInputs {
                        f: pa.torse.f,
                        f_prime: pa.df_xi,
                        k: pa.torse.k,
                        a: e.coeffs[0],
                        tau: geom.tau(),
                        n: self.n(),
                        k_xi: values.first().copied(),
                        horizontal_gradient: pa.horizontal_gradient(),
                    },
                    tol,
                );
                let detail = r
                    .relations
                    .iter()
                    .map(|x| format!("{} {:.3e}", x.name, x.residual))
                    .collect::<Vec<_>>()
                    .join(", ");
                Ok(Outcome::residual(r.worst(), detail))
            }
            Check::VerticalCurvature => {
                let r = vertical_curvature_from(self.geom()?, self.potential()?, tol)?;
                let detail = match (&r.notice, r.k_xi_value) {
                    (Some(n), _) => n.clone(),
                    (None, Some(k)) => format!("K(xi,x) = {k:.10}"),
                    (None, None) => String::new(),
                };
                Ok(Outcome::residual(r.worst(), detail))
            }
            Check::XiSectionSpread => {
                let geom = self.geom()?;
                let (values, skipped) = xi_sectional_samples(geom, &sample_vectors(geom.dim()))?;
                if values.is_empty() {
                    return Ok(Outcome::residual(0.0, format!("all {skipped} sampled sections degenerate")));
                }
                let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
                Ok(Outcome::residual(
                    (hi - lo) / lo.abs().max(hi.abs()).max(1.0),
                    format!("{} sections, {skipped} degenerate skipped, K in [{lo:.10}, {hi:.10}]", values.len()),
                ))
            }
            Check::Geodesic => {
                let (geo, d_eta) = geodesic_residuals(&self.geom()?.conn)?;
                Ok(Outcome::residual(geo.max(d_eta), format!("nabla_xi xi {geo:.3e}, d eta {d_eta:.3e}")))
            }
            Check::RegularityEquivalence => {
                let (e, s) = (self.einstein()?, self.soliton()?);
                let value = self.potential()?.regularity_value();
                let sum_e: f64 = e.coeffs.iter().sum();
                let sum_s: f64 = s.coeffs.iter().sum();
                let flags = [value.abs() > tol, sum_e.abs() > tol, sum_s.abs() > tol];
                let consistent = flags.iter().all(|f| *f == flags[0]);
                Ok(Outcome::residual(
                    (sum_s + sum_e).abs(),
                    format!(
                        "{} (k df(xi)+f^2 = {value:.3e}, a+b+c = {sum_e:.3e}, lambda+mu+nu = {sum_s:.3e})",
                        if flags[0] { "regular" } else { "non-regular" }
                    ),
                )
                .with_pass(consistent && (sum_s + sum_e).abs() <= tol))
            }
            Check::Parallel => Err(Error::Usage("parallel is a grid-level check".into())),
        }
    }

    fn axioms(&self, tol: f64) -> Result<Outcome> {
        let r = verify_axioms(&self.subject.manifold, self.point, tol)?;
        let mut residual = r.worst();
        let mut pass = r.pass;
        let mut detail = format!("signature ({}, {})", r.signature.positive, r.signature.negative);
        if let Some(e) = &self.subject.example {
            let b = verify_axioms(&e.base, self.point, tol)?;
            residual = residual.max(b.worst());
            pass &= b.pass;
            detail.push_str(&format!(", base {:.3e}", b.worst()));
        }
        Ok(Outcome::residual(residual, detail).with_pass(pass && residual <= tol))
    }

    fn class_flags(&self, tol: f64) -> Result<Outcome> {
        let conn = &self.geom()?.conn;
        let (g, phi, xi, eta) = (conn.g.value(), conn.phi.value(), conn.xi.value(), conn.eta.value());
        let f = fundamental_f_from(conn)?;
        let flags = class_flags_from(&f, &g, &phi, &eta, tol);
        let lee = lee_forms_from(&f, &conn.ginv.value(), &phi, &xi);
        let scale = flags.f_norm.max(1.0);
        let mut residual = (f_property_residual(&f, &phi, &xi, &eta) / scale).max(lee.identity_residual(&phi, &xi) / scale);
        let mut pass = true;
        let mut detail = format!(
            "F0 {}, torse form {} (f/k = {:.10}, template residual {:.3e})",
            flags.is_f0, flags.matches_f5_torse_form, flags.fitted_f_over_k, flags.template_residual
        );
        if let (Some(e), Ok(o)) = (&self.subject.example, self.oracle()) {
            let base = Connection::at_order(&e.base, self.point, 1)?;
            let base_f = fundamental_f_from(&base)?.frobenius();
            let theta_star_xi: f64 = (0..conn.dim()).map(|a| lee.theta_star.get(&[a]) * xi.get(&[a])).sum();
            residual = residual
                .max(base_f)
                .max(rel(flags.fitted_f_over_k, o.ell_prime))
                .max(rel(theta_star_xi, o.theta_star_xi));
            if e.orientation == AngleOrientation::Reversed {
                residual = residual.max(flags.template_residual);
            }
            pass = !flags.is_f0;
            detail.push_str(&format!(", base |F| {base_f:.3e}, theta*(xi) = {theta_star_xi:.10}"));
        }
        Ok(Outcome::residual(residual, detail).with_pass(pass && residual <= tol))
    }

    fn curvature_oracle(&self) -> Result<Outcome> {
        let o = self.oracle()?;
        let geom = self.geom()?;
        let r = rel_frobenius(&geom.riemann04(), &o.r04);
        let rho = rel_frobenius(&geom.ricci.value(), &o.rho);
        let tau = rel(geom.tau(), o.tau);
        let tau_star = geom.tau_star().abs();
        Ok(Outcome::residual(
            r.max(rho).max(tau).max(tau_star),
            format!("R {r:.3e}, rho {rho:.3e}, tau {tau:.3e}, tau* {tau_star:.3e}"),
        ))
    }

    fn scalar_consistency(&self, tol: f64) -> Result<Outcome> {
        let geom = self.geom()?;
        let fit = self.einstein()?;
        let [a, b, c] = fit.coeffs;
        let n = self.n() as f64;
        let tau = geom.tau();
        let tau_star = geom.tau_star();
        let mut residual = rel(tau, (2.0 * n + 1.0) * a + b + c).max(rel(tau_star, -2.0 * n * b));
        if self.subject.example.is_some() {
            residual = residual.max(b.abs());
        }
        let mut out = Outcome::residual(
            residual,
            format!("tau = {tau:.10}, tau* = {tau_star:.3e}, b = {b:.3e}"),
        );
        if fit.residual > tol {
            out.detail.push_str(", Ricci tensor outside the span");
            out = out.with_pass(false);
        }
        Ok(out)
    }

    fn torse_forming(&self) -> Result<Outcome> {
        let pa = self.potential()?;
        let t = &pa.torse;
        let mut residual = t.residual;
        if t.k.abs() > 0.0 {
            for (gm, e) in t.gamma.iter().zip(&pa.eta) {
                residual = residual.max((gm + t.f / t.k * e).abs());
            }
        }
        if let Ok(o) = self.oracle() {
            residual = residual.max(rel(t.f, o.f));
        }
        let trivial = if t.is_trivial { ", trivial (f = 0)" } else { "" };
        Ok(Outcome::residual(
            residual,
            format!("f = {:.10}, k = {:.10}{trivial}", t.f, t.k),
        ))
    }

    fn regularity(&self, tol: f64) -> Result<Outcome> {
        let value = self.potential()?.regularity_value();
        let regular = value.abs() > tol;
        let verdict = if regular { "regular" } else { "non-regular" };
        let detail = format!("{verdict}, k df(xi)+f^2 = {value:.6e}");
        match self.oracle() {
            Ok(o) => {
                let expected = o.regularity.abs() > tol;
                Ok(Outcome::residual((value - o.regularity).abs(), detail).with_pass(
                    regular == expected && (value - o.regularity).abs() <= tol,
                ))
            }
            Err(_) => Ok(Outcome::residual(0.0, detail)),
        }
    }
}

fn coeff_error(fit: &FitResult, want: [f64; 3]) -> f64 {
    fit.coeffs
        .iter()
        .zip(want)
        .map(|(c, w)| rel(*c, w))
        .fold(0.0, f64::max)
}

fn horizontal_basis(pa: &PotentialAnalysis) -> Vec<Vec<f64>> {
    let dim = pa.xi.len();
    (0..dim)
        .map(|i| (0..dim).map(|j| f64::from(u8::from(i == j)) - pa.eta[i] * pa.xi[j]).collect())
        .collect()
}

/// Ten fixed vectors in general position.
pub fn sample_vectors(dim: usize) -> Vec<Vec<f64>> {
    (0..10)
        .map(|j| {
            (0..dim)
                .map(|i| (12.9898 * (j + 1) as f64 + 78.233 * (i + 1) as f64).sin())
                .collect()
        })
        .collect()
}

fn record(check: Check, point: Option<&Point>, tol: f64, outcome: Result<Outcome>) -> CheckRecord {
    match outcome {
        Ok(o) => CheckRecord {
            check,
            point: point.cloned(),
            residual: o.residual,
            tolerance: tol,
            pass: o.pass.unwrap_or(o.residual <= tol) && !o.residual.is_nan(),
            detail: o.detail,
        },
        Err(e) => CheckRecord {
            check,
            point: point.cloned(),
            residual: f64::NAN,
            tolerance: tol,
            pass: false,
            detail: e.to_string(),
        },
    }
}

fn point_records(subject: &Subject, p: &Point, checks: &[Check], tol: Tolerances) -> Vec<CheckRecord> {
    let admitted = subject.manifold.admit(p);
    let want_potential = checks.iter().any(|c| c.needs_potential());
    let data = PointData {
        subject,
        point: p,
        tol,
        geom: admitted.clone().and_then(|_| Geometry::at(&subject.manifold, p)),
        potential: match (&subject.potential, want_potential) {
            (Some(theta), true) => Some(analyze_potential(&subject.manifold, theta, p, tol.jet_exact)),
            _ => None,
        },
        oracle: subject.example.as_ref().map(|e| oracles(e, p)),
    };
    checks
        .iter()
        .filter(|c| **c != Check::Parallel)
        .map(|&c| record(c, Some(p), c.tolerance(&tol), data.run(c)))
        .collect()
}

fn parallel_record(subject: &Subject, grid: &[Point], tol: Tolerances) -> CheckRecord {
    let t = Check::Parallel.tolerance(&tol);
    let Some(e) = &subject.example else {
        return record(Check::Parallel, None, t, Err(Error::Usage("closed forms need the example family".into())));
    };
    if !e.profile.has_constant_coefficients() {
        return record(
            Check::Parallel,
            None,
            t,
            Ok(Outcome::residual(0.0, "not applicable: soliton coefficients vary over the grid")),
        );
    }
    let outcome = (|| {
        let h = SymmetricTensor::SolitonCombination {
            potential: e.potential(),
            mu: ScalarField::constant(0.0),
            nu: e.conformal_scalar_field(),
        };
        let report = parallel_check(&e.transformed, &h, grid, t)?;
        let o = oracles(e, grid.first().ok_or_else(|| Error::Usage("empty grid".into()))?)?;
        let n = e.n as f64;
        let multiple = report.constant_multiple.unwrap_or(f64::NAN);
        let sum = o.lambda + o.mu + o.nu;
        let residual = report
            .max_nabla_h
            .max(report.fit_residual)
            .max(rel(multiple, -o.lambda))
            .max(rel(sum, 2.0 * n * o.f * o.f))
            .max(report.max_h_r_xi)
            .max(report.max_h_vertical);
        Ok(Outcome::residual(
            residual,
            format!(
                "max |nabla h| {:.3e}, h = {multiple:.10} g, lambda+mu+nu = {sum:.10}",
                report.max_nabla_h
            ),
        )
        .with_pass(report.is_parallel && residual <= t))
    })();
    record(Check::Parallel, None, t, outcome)
}

/// Runs `checks` over `grid`. Per-point failures are recorded, never
/// propagated; only requests that cannot be meaningful are rejected.
pub fn run_suite(
    subject: &Subject,
    grid: &[Point],
    checks: &[Check],
    tol: Tolerances,
    config: serde_json::Value,
) -> Result<SuiteReport> {
    for c in checks {
        if c.needs_example() && subject.example.is_none() {
            return Err(Error::Usage(format!("check `{c}` needs the example family")));
        }
        if c.needs_potential() && subject.potential.is_none() {
            return Err(Error::Usage(format!("check `{c}` needs a potential vector field")));
        }
    }
    let mut checks: Vec<Check> = checks.to_vec();
    checks.sort();
    checks.dedup();
    let per_point: Vec<Vec<CheckRecord>> = grid
        .par_iter()
        .map(|p| point_records(subject, p, &checks, tol))
        .collect();
    let mut records = Vec::new();
    for &c in &checks {
        if c == Check::Parallel {
            records.push(parallel_record(subject, grid, tol));
            continue;
        }
        records.extend(per_point.iter().flatten().filter(|r| r.check == c).cloned());
    }
    let summary = checks
        .iter()
        .map(|&c| {
            let rs: Vec<&CheckRecord> = records.iter().filter(|r| r.check == c).collect();
            let worst = rs.iter().map(|r| r.residual).fold(0.0, |m: f64, v| {
                if m.is_nan() || v.is_nan() {
                    f64::NAN
                } else {
                    m.max(v)
                }
            });
            let passed = rs.iter().filter(|r| r.pass).count();
            CheckSummary {
                check: c,
                worst_residual: worst,
                passed,
                failed: rs.len() - passed,
            }
        })
        .collect::<Vec<_>>();
    Ok(SuiteReport {
        subject: subject.name.clone(),
        pass: records.iter().all(|r| r.pass),
        summary,
        records,
        provenance: Provenance {
            engine_version: ENGINE_VERSION.to_string(),
            config,
        },
    })
}

/// Every check on the default grid of an example.
pub fn paper_suite(e: &ExampleManifold, tol: Tolerances) -> Result<SuiteReport> {
    let grid = default_grid(e, default_grid_size(e.n))?;
    let config = serde_json::json!({
        "n": e.n,
        "k": e.k,
        "profile": e.profile.name(),
        "grid_size": grid.len(),
        "tolerances": tol,
    });
    run_suite(&Subject::from_example(e), &grid, &Check::ALL, tol, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::example::{build_example, EllProfile};

    #[test]
    fn check_names_round_trip() {
        for c in Check::ALL {
            assert_eq!(Check::from_name(c.name()), Some(c));
            let json = serde_json::to_string(&c).unwrap();
            assert_eq!(json, format!("\"{}\"", c.name()));
        }
        assert_eq!(Check::from_name("nope"), None);
    }

    #[test]
    fn nan_residuals_serialize_as_null() {
        let r = CheckRecord {
            check: Check::Axioms,
            point: None,
            residual: f64::NAN,
            tolerance: 1e-8,
            pass: false,
            detail: "x".into(),
        };
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("\"residual\":null"));
        let back: CheckRecord = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn scaled_log_suite_passes() {
        let e = build_example(1, EllProfile::ScaledLog, 1.0).unwrap();
        let report = paper_suite(&e, Tolerances::default()).unwrap();
        let failures: Vec<_> = report.failures().collect();
        assert!(report.pass, "{failures:#?}");
        assert!(report
            .records_for(Check::Regularity)
            .all(|r| r.detail.starts_with("regular")));
        let total: usize = report.summary.iter().map(|s| s.passed + s.failed).sum();
        assert_eq!(total, report.records.len());
    }

    #[test]
    fn log_suite_is_non_regular() {
        let e = build_example(1, EllProfile::Log { c: 1.0 }, 1.0).unwrap();
        let report = paper_suite(&e, Tolerances::default()).unwrap();
        let failures: Vec<_> = report.failures().collect();
        assert!(report.pass, "{failures:#?}");
        assert!(report
            .records_for(Check::Regularity)
            .all(|r| r.detail.starts_with("non-regular")));
    }

    #[test]
    fn impossible_tolerance_fails_without_aborting() {
        let e = build_example(1, EllProfile::ScaledLog, 1.0).unwrap();
        let report = paper_suite(&e, Tolerances::uniform(1e-300)).unwrap();
        assert!(!report.pass);
        assert_eq!(report.records.len(), 27 * 15 + 1);
    }

    #[test]
    fn oracle_checks_need_the_example() {
        let e = build_example(1, EllProfile::ScaledLog, 1.0).unwrap();
        let subject = Subject {
            name: "bare".into(),
            manifold: e.transformed.clone(),
            potential: None,
            example: None,
        };
        assert!(run_suite(&subject, &[], &[Check::CurvatureOracle], Tolerances::default(), serde_json::Value::Null).is_err());
        assert!(run_suite(&subject, &[], &[Check::Regularity], Tolerances::default(), serde_json::Value::Null).is_err());
        let ok = run_suite(&subject, &[], &[Check::Axioms], Tolerances::default(), serde_json::Value::Null).unwrap();
        assert!(ok.pass && ok.records.is_empty());
    }

    #[test]
    fn points_outside_the_chart_become_failed_records() {
        let e = build_example(1, EllProfile::ScaledLog, 1.0).unwrap();
        let grid = [Point::new(vec![1.0, 0.0, 1.0]).unwrap()];
        let r = run_suite(&Subject::from_example(&e), &grid, &[Check::Axioms, Check::Regularity], Tolerances::default(), serde_json::Value::Null).unwrap();
        assert_eq!(r.records.len(), 2);
        assert!(r.records.iter().all(|x| !x.pass && x.residual.is_nan()));
    }
}
