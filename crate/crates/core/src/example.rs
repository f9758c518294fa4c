//! The `(2n+1)`-dimensional example family: a flat cosymplectic structure on
//! a subset of `R^{2n+1}` and its contact conformal deformation
//!
//! ```text
//! ḡ = e^{2u}cos2v·g + e^{2u}sin2v·g̃ + (1 − e^{2u}cos2v − e^{2u}sin2v)·η⊗η,
//! u = ½ Σ ln((x^i)² + (x^{n+i})²) + ℓ(t),   v = Σ arctan(x^i / x^{n+i}),
//! ```
//!
//! parameterized by `n`, the profile `ℓ(t)` and the potential scale `k` of
//! `ϑ = kξ`. Closed forms for every curvature and soliton quantity of the
//! deformed structure are available through [`oracles`].

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ScalarField, TensorField};
use crate::jet::{Jet3, JetError};
use crate::structure::ManifoldSpec;
use crate::tensor::{Point, TensorComponents, Valence};

/// Horizontal coordinate values of the default grid.
pub const DEFAULT_COORD_VALUES: [f64; 5] = [-1.0, -0.5, 0.5, 1.0, 2.0];
/// Values of `t` on the default grid.
pub const DEFAULT_T_VALUES: [f64; 3] = [0.5, 1.0, 2.0];

pub fn default_grid_size(n: usize) -> usize {
    match n {
        1 => 27,
        2 => 32,
        _ => 64,
    }
}

type ProfileFn = dyn Fn(&Jet3) -> Result<Jet3, JetError> + Send + Sync;

/// A user profile `ℓ(t)` built from jet arithmetic on `t`.
#[derive(Clone)]
pub struct CustomProfile {
    pub label: String,
    f: Arc<ProfileFn>,
    positive_t: bool,
}

impl CustomProfile {
    pub fn new(
        label: impl Into<String>,
        positive_t: bool,
        f: impl Fn(&Jet3) -> Result<Jet3, JetError> + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            f: Arc::new(f),
            positive_t,
        }
    }
}

impl CustomProfile {
    /// A profile from an expression in `t`, e.g. `"t^2 + ln(t)"`.
    pub fn from_expression(src: &str, positive_t: bool) -> Result<Self> {
        let e = crate::expr::Expr::parse(src, &["t"]).map_err(|e| Error::Profile(e.to_string()))?;
        Ok(Self::new(src, positive_t, move |t| e.eval(std::slice::from_ref(t))))
    }
}

impl fmt::Debug for CustomProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CustomProfile({})", self.label)
    }
}

/// The profile `ℓ(t)` of the deformation.
#[derive(Debug, Clone)]
pub enum EllProfile {
    /// `ℓ = c·ln t`; `c = 1` gives the non-regular `f = k/t`.
    Log { c: f64 },
    /// `ℓ = ((1+√3)/2)·ln t`, the regular `f = (1+√3)k/(2t)`.
    ScaledLog,
    /// `ℓ = αt`: an Einstein (hyperbolic space form) deformation.
    Linear { alpha: f64 },
    /// `ℓ = A·exp(−r t)`.
    Exp { amplitude: f64, rate: f64 },
    Custom(CustomProfile),
}

pub fn scaled_log_coefficient() -> f64 {
    (1.0 + 3f64.sqrt()) / 2.0
}

impl EllProfile {
    /// The exponential profile whose conformal scalar is
    /// `f = q·exp(−kt/(2n−1))`.
    pub fn exp_for(q: f64, n: usize, k: f64) -> Self {
        let m = (2 * n - 1) as f64;
        EllProfile::Exp {
            amplitude: -q * m / (k * k),
            rate: k / m,
        }
    }

    pub fn name(&self) -> String {
        match self {
            EllProfile::Log { .. } => "log".into(),
            EllProfile::ScaledLog => "scaled_log".into(),
            EllProfile::Linear { .. } => "linear".into(),
            EllProfile::Exp { .. } => "exp".into(),
            EllProfile::Custom(c) => format!("custom({})", c.label),
        }
    }

    /// Profiles built on `ln t` live on the `t > 0` branch.
    pub fn requires_positive_t(&self) -> bool {
        match self {
            EllProfile::Log { .. } | EllProfile::ScaledLog => true,
            EllProfile::Custom(c) => c.positive_t,
            _ => false,
        }
    }

    /// True when `ℓ′` is constant, so every soliton coefficient is constant.
    pub fn has_constant_coefficients(&self) -> bool {
        matches!(self, EllProfile::Linear { .. })
    }

    /// `[ℓ, ℓ′, ℓ″, ℓ‴]` at `t`.
    pub fn derivatives(&self, t: f64) -> Result<[f64; 4], JetError> {
        let log = |c: f64| -> Result<[f64; 4], JetError> {
            if !(t > 0.0) {
                return Err(JetError::Domain {
                    function: "ln",
                    argument: t,
                    coords: vec![],
                });
            }
            Ok([c * t.ln(), c / t, -c / (t * t), 2.0 * c / (t * t * t)])
        };
        match self {
            EllProfile::Log { c } => log(*c),
            EllProfile::ScaledLog => log(scaled_log_coefficient()),
            EllProfile::Linear { alpha } => Ok([alpha * t, *alpha, 0.0, 0.0]),
            EllProfile::Exp { amplitude, rate } => {
                let e = amplitude * (-rate * t).exp();
                Ok([e, -rate * e, rate * rate * e, -rate * rate * rate * e])
            }
            EllProfile::Custom(c) => {
                let jet = (c.f)(&Jet3::variable(t, 0, 1))?;
                Ok([jet.value(), jet.d1(0), jet.d2(0, 0), jet.d3(0, 0, 0)])
            }
        }
    }

    /// `ℓ(t)` composed with a jet of `t`.
    pub fn jet(&self, t: &Jet3) -> Result<Jet3, JetError> {
        match self {
            EllProfile::Custom(c) => (c.f)(t),
            _ => Ok(t.compose(self.derivatives(t.value())?)),
        }
    }

    /// `ℓ′(t)` composed with a jet of `t`, valid to order 2.
    pub fn derivative_jet(&self, t: &Jet3) -> Result<Jet3, JetError> {
        let [_, d1, d2, d3] = self.derivatives(t.value())?;
        Ok(t.compose([d1, d2, d3, 0.0]).truncated(2))
    }
}

/// The flat cosymplectic base: `g = diag(−1…, +1…, 1)`, `φ∂_i = ∂_{n+i}`,
/// `φ∂_{n+i} = −∂_i`, `ξ = ∂_t`, `η = dt`.
pub fn base_components(n: usize) -> (TensorComponents, TensorComponents, TensorComponents, TensorComponents, TensorComponents) {
    let dim = 2 * n + 1;
    let mut g = TensorComponents::zeros(Valence::BILINEAR, dim);
    let mut gt = TensorComponents::zeros(Valence::BILINEAR, dim);
    let mut phi = TensorComponents::zeros(Valence::ENDOMORPHISM, dim);
    for i in 0..n {
        g.set(&[i, i], -1.0);
        g.set(&[n + i, n + i], 1.0);
        gt.set(&[i, n + i], 1.0);
        gt.set(&[n + i, i], 1.0);
        phi.set(&[n + i, i], 1.0);
        phi.set(&[i, n + i], -1.0);
    }
    g.set(&[2 * n, 2 * n], 1.0);
    gt.set(&[2 * n, 2 * n], 1.0);
    let mut e = vec![0.0; dim];
    e[2 * n] = 1.0;
    (g, gt, phi, TensorComponents::vector(&e), TensorComponents::covector(&e))
}

/// Sign of the angle function `v = ±Σ arctan(x^i / x^{n+i})`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleOrientation {
    /// `v = Σ arctan(x^i / x^{n+i})`.
    #[default]
    Standard,
    /// `v = −Σ arctan(x^i / x^{n+i})`, for which `F` has the torse-forming
    /// form exactly.
    Reversed,
}

impl AngleOrientation {
    fn sign(self) -> f64 {
        match self {
            AngleOrientation::Standard => 1.0,
            AngleOrientation::Reversed => -1.0,
        }
    }
}

/// Horizontal scalars `(u − ℓ, v)` on jets.
fn u_and_v(n: usize, orientation: AngleOrientation, x: &[Jet3]) -> Result<(Jet3, Jet3), JetError> {
    let dim = x.len();
    let mut u = Jet3::zero(dim);
    let mut v = Jet3::zero(dim);
    for i in 0..n {
        let (a, b) = (&x[i], &x[n + i]);
        let r2 = &(a * a) + &(b * b);
        u += &r2.ln()?.scale(0.5);
        v += &a.try_div(b)?.atan();
    }
    Ok((u, v.scale(orientation.sign())))
}

fn guard_for(n: usize, positive_t: bool) -> impl Fn(&Point) -> std::result::Result<(), String> + Send + Sync {
    move |p: &Point| {
        let x = p.coords();
        for i in 0..n {
            if x[n + i] == 0.0 {
                return Err(format!("x^{} must be non-zero", n + i + 1));
            }
        }
        let t = p.t();
        if t == 0.0 {
            return Err("t must be non-zero".into());
        }
        if positive_t && t < 0.0 {
            return Err("t must be positive for a logarithmic profile".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ExampleManifold {
    pub n: usize,
    pub k: f64,
    pub profile: EllProfile,
    pub orientation: AngleOrientation,
    pub base: ManifoldSpec,
    pub transformed: ManifoldSpec,
    pub u: ScalarField,
    pub v: ScalarField,
}

/// Builds the base and deformed structures. The profile must have
/// `ℓ′ ≠ 0` on the default `t` values.
pub fn build_example(n: usize, profile: EllProfile, k: f64) -> Result<ExampleManifold> {
    build_example_oriented(n, profile, k, AngleOrientation::Standard)
}

pub fn build_example_oriented(
    n: usize,
    profile: EllProfile,
    k: f64,
    orientation: AngleOrientation,
) -> Result<ExampleManifold> {
    if n == 0 {
        return Err(Error::Usage("n must be at least 1".into()));
    }
    if k == 0.0 || !k.is_finite() {
        return Err(Error::Usage("the potential scale k must be a non-zero number".into()));
    }
    check_profile(&profile, &DEFAULT_T_VALUES)?;
    let dim = 2 * n + 1;
    let (g, gt, phi, xi, eta) = base_components(n);
    let positive_t = profile.requires_positive_t();
    let phi_f = TensorField::constant(phi);
    let xi_f = TensorField::constant(xi);
    let eta_f = TensorField::constant(eta);
    let base = ManifoldSpec::new(n, TensorField::constant(g.clone()), phi_f.clone(), xi_f.clone(), eta_f.clone())?
        .with_guard(guard_for(n, positive_t));

    let ell = profile.clone();
    let metric = TensorField::new(Valence::BILINEAR, dim, move |x| {
        let (u_h, v) = u_and_v(n, orientation, x)?;
        let u = &u_h + &ell.jet(&x[2 * n])?;
        let e2u = u.scale(2.0).exp();
        let two_v = v.scale(2.0);
        let a = &e2u * &two_v.cos();
        let b = &e2u * &two_v.sin();
        let mut comps = vec![Jet3::zero(dim); dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                let (gij, gtij) = (g.get(&[i, j]), gt.get(&[i, j]));
                let c = &mut comps[i * dim + j];
                if i == 2 * n && j == 2 * n {
                    // A·1 + B·1 + (1 − A − B)·1
                    *c = Jet3::constant(1.0, dim);
                    continue;
                }
                if gij != 0.0 {
                    *c += &a.scale(gij);
                }
                if gtij != 0.0 {
                    *c += &b.scale(gtij);
                }
            }
        }
        Ok(comps)
    });
    let transformed = ManifoldSpec::new(n, metric, phi_f, xi_f, eta_f)?.with_guard(guard_for(n, positive_t));

    let ell = profile.clone();
    let u = ScalarField::new(move |x| Ok(&u_and_v(n, orientation, x)?.0 + &ell.jet(&x[2 * n])?));
    let v = ScalarField::new(move |x| Ok(u_and_v(n, orientation, x)?.1));
    Ok(ExampleManifold {
        n,
        k,
        profile,
        orientation,
        base,
        transformed,
        u,
        v,
    })
}

/// Rejects profiles with `ℓ′ = 0` (or undefined) at any of `t_values`.
pub fn check_profile(profile: &EllProfile, t_values: &[f64]) -> Result<()> {
    for &t in t_values {
        if profile.requires_positive_t() && t <= 0.0 {
            return Err(Error::Profile(format!("{} needs t > 0, grid has t = {t}", profile.name())));
        }
        let d = profile
            .derivatives(t)
            .map_err(|e| Error::Profile(format!("{} undefined at t = {t}: {e}", profile.name())))?;
        if d[1] == 0.0 || !d[1].is_finite() {
            return Err(Error::Profile(format!("{}: l'({t}) = {} must be non-zero", profile.name(), d[1])));
        }
    }
    Ok(())
}

impl ExampleManifold {
    pub fn dim(&self) -> usize {
        2 * self.n + 1
    }

    /// The potential `ϑ = kξ` as a field.
    pub fn potential(&self) -> TensorField {
        self.transformed.xi().scaled(self.k)
    }

    /// `f = kℓ′(t)` as a scalar field (valid to order 2).
    pub fn conformal_scalar_field(&self) -> ScalarField {
        let ell = self.profile.clone();
        let (k, t_slot) = (self.k, 2 * self.n);
        ScalarField::new(move |x| Ok(ell.derivative_jet(&x[t_slot])?.scale(k)))
    }
}

/// Closed-form values of every curvature and soliton quantity of the
/// deformed structure, built from `ℓ′`, `ℓ″` and `ḡ` only.
#[derive(Debug, Clone, PartialEq)]
pub struct Oracles {
    pub ell_prime: f64,
    pub ell_second: f64,
    pub r04: TensorComponents,
    pub rho: TensorComponents,
    pub tau: f64,
    pub tau_star: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub lambda: f64,
    pub mu: f64,
    pub nu: f64,
    /// `f = kℓ′`.
    pub f: f64,
    /// `f′ = df(ξ) = kℓ″`.
    pub f_prime: f64,
    /// `k·df(ξ) + f²`.
    pub regularity: f64,
    /// Sectional curvature of any `ξ`-section.
    pub k_xi: f64,
    /// `θ*(ξ) = 2nℓ′`.
    pub theta_star_xi: f64,
}

pub fn oracles(e: &ExampleManifold, p: &Point) -> Result<Oracles> {
    e.transformed.admit(p)?;
    let n = e.n;
    let nf = n as f64;
    let k = e.k;
    let dim = e.dim();
    let [_, l1, l2, _] = e
        .profile
        .derivatives(p.t())
        .map_err(|err| Error::eval(p.coords(), err))?;
    let gbar = e.transformed.metric().jets(p)?.value();
    let eta = |i: usize| if i == 2 * n { 1.0 } else { 0.0 };
    let g = |i: usize, j: usize| gbar.get(&[i, j]);

    let mut r04 = TensorComponents::zeros(Valence::new(0, 4), dim);
    for x in 0..dim {
        for y in 0..dim {
            for z in 0..dim {
                for w in 0..dim {
                    let first = eta(y) * eta(z) * g(x, w) - eta(x) * eta(z) * g(y, w) + eta(x) * eta(w) * g(y, z)
                        - eta(y) * eta(w) * g(x, z);
                    let second = g(y, z) * g(x, w) - g(x, z) * g(y, w);
                    r04.set(&[x, y, z, w], -l2 * first - l1 * l1 * second);
                }
            }
        }
    }
    let mut rho = TensorComponents::zeros(Valence::BILINEAR, dim);
    for i in 0..dim {
        for j in 0..dim {
            rho.set(
                &[i, j],
                -(l2 + 2.0 * nf * l1 * l1) * g(i, j) - (2.0 * nf - 1.0) * l2 * eta(i) * eta(j),
            );
        }
    }
    let f = k * l1;
    let fp = k * l2;
    let core = (k * fp + 2.0 * nf * f * f) / (k * k);
    Ok(Oracles {
        ell_prime: l1,
        ell_second: l2,
        r04,
        rho,
        tau: -4.0 * nf * l2 - 2.0 * nf * (2.0 * nf + 1.0) * l1 * l1,
        tau_star: 0.0,
        a: -core,
        b: 0.0,
        c: (1.0 - 2.0 * nf) / k * fp,
        lambda: core - f,
        mu: 0.0,
        nu: (2.0 * nf - 1.0) / k * fp + f,
        f,
        f_prime: fp,
        regularity: k * fp + f * f,
        k_xi: -(k * fp + f * f) / (k * k),
        theta_star_xi: 2.0 * nf * l1,
    })
}

/// Deterministic grid over the product of `coord_values` (for the first
/// `2n` slots) and `t_values` (last slot), keeping admitted points and
/// picking `size` of them at evenly spaced positions of the lexicographic
/// order.
pub fn grid_points(m: &ManifoldSpec, coord_values: &[f64], t_values: &[f64], size: usize) -> Result<Vec<Point>> {
    if size == 0 {
        return Err(Error::Usage("grid size must be at least 1".into()));
    }
    if coord_values.is_empty() || t_values.is_empty() {
        return Err(Error::Usage("grid value lists must be non-empty".into()));
    }
    let dim = m.dim();
    let nc = coord_values.len();
    let total = nc.pow((dim - 1) as u32) * t_values.len();
    let mut admitted = Vec::new();
    let mut coords = vec![0.0; dim];
    for flat in 0..total {
        let mut f = flat;
        coords[dim - 1] = t_values[f % t_values.len()];
        f /= t_values.len();
        for slot in (0..dim - 1).rev() {
            coords[slot] = coord_values[f % nc];
            f /= nc;
        }
        let p = Point::new(coords.clone())?;
        if m.admit(&p).is_ok() {
            admitted.push(p);
        }
    }
    let count = admitted.len();
    if size >= count {
        return Ok(admitted);
    }
    Ok((0..size).map(|j| admitted[j * count / size].clone()).collect())
}

/// The default grid: coordinates from `{±0.5, ±1, 2}`, `t` from
/// `{0.5, 1, 2}`.
pub fn default_grid(e: &ExampleManifold, size: usize) -> Result<Vec<Point>> {
    grid_points(&e.transformed, &DEFAULT_COORD_VALUES, &DEFAULT_T_VALUES, size)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::verify_axioms;

    fn p(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    #[test]
    fn transformed_metric_at_unit_point() {
        let e = build_example(1, EllProfile::Log { c: 1.0 }, 1.0).unwrap();
        let g = e.transformed.metric().at(&p(&[1.0, 1.0, 1.0])).unwrap();
        let want = [0.0, 2.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        for (a, b) in g.data().iter().zip(want) {
            assert!((a - b).abs() < 1e-14, "{:?}", g.data());
        }
    }

    #[test]
    fn base_metric_for_n2() {
        let e = build_example(2, EllProfile::ScaledLog, 1.0).unwrap();
        assert_eq!(e.dim(), 5);
        let g = e.base.metric().at(&p(&[1.0, 2.0, 0.5, -1.0, 1.0])).unwrap();
        let diag: Vec<f64> = (0..5).map(|i| g.get(&[i, i])).collect();
        assert_eq!(diag, vec![-1.0, -1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn inadmissible_profiles_are_rejected() {
        assert!(matches!(
            build_example(1, EllProfile::Linear { alpha: 0.0 }, 1.0),
            Err(Error::Profile(_))
        ));
        assert!(build_example(1, EllProfile::ScaledLog, 0.0).is_err());
        assert!(build_example(0, EllProfile::ScaledLog, 1.0).is_err());
    }

    #[test]
    fn guard_excludes_singular_loci() {
        let e = build_example(1, EllProfile::Log { c: 1.0 }, 1.0).unwrap();
        assert!(e.transformed.admit(&p(&[1.0, 0.0, 1.0])).is_err());
        assert!(e.transformed.admit(&p(&[1.0, 1.0, -1.0])).is_err());
        let lin = build_example(1, EllProfile::Linear { alpha: 1.0 }, 1.0).unwrap();
        assert!(lin.transformed.admit(&p(&[1.0, 1.0, -1.0])).is_ok());
        assert!(lin.transformed.admit(&p(&[1.0, 1.0, 0.0])).is_err());
    }

    #[test]
    fn grid_sizes_and_determinism() {
        let e1 = build_example(1, EllProfile::ScaledLog, 1.0).unwrap();
        let g1 = default_grid(&e1, 27).unwrap();
        assert_eq!(g1.len(), 27);
        assert!(g1.iter().all(|q| q.coords()[1] != 0.0 && q.t() != 0.0));
        assert_eq!(g1, default_grid(&e1, 27).unwrap());
        let e2 = build_example(2, EllProfile::ScaledLog, 1.0).unwrap();
        let g2 = default_grid(&e2, 32).unwrap();
        assert_eq!(g2.len(), 32);
        assert!(g2.iter().all(|q| e2.transformed.admit(q).is_ok()));
        for t in DEFAULT_T_VALUES {
            assert!(g1.iter().any(|q| q.t() == t));
        }
    }

    #[test]
    fn grid_hits_special_and_generic_angles() {
        let e = build_example(1, EllProfile::ScaledLog, 1.0).unwrap();
        let grid = default_grid(&e, 27).unwrap();
        let cos2v: Vec<f64> = grid
            .iter()
            .map(|q| (2.0 * (q.coords()[0] / q.coords()[1]).atan()).cos())
            .collect();
        assert!(cos2v.iter().any(|c| c.abs() < 1e-12));
        assert!(cos2v.iter().any(|c| c.abs() > 1e-3 && (c.abs() - 1.0).abs() > 1e-3));
    }

    #[test]
    fn both_structures_pass_axioms_on_grid() {
        for n in 1..=2 {
            let e = build_example(n, EllProfile::ScaledLog, 1.0).unwrap();
            for q in default_grid(&e, default_grid_size(n)).unwrap() {
                assert!(verify_axioms(&e.base, &q, 1e-12).unwrap().pass);
                let r = verify_axioms(&e.transformed, &q, 1e-10).unwrap();
                assert!(r.pass, "{r:?} at {q:?}");
            }
        }
    }

    #[test]
    fn oracle_spot_values() {
        let e = build_example(1, EllProfile::Log { c: 1.0 }, 1.0).unwrap();
        let o = oracles(&e, &p(&[1.0, 1.0, 1.0])).unwrap();
        assert_eq!((o.a, o.b, o.c), (-1.0, 0.0, 1.0));
        assert_eq!(o.tau, -2.0);
        assert_eq!(o.tau_star, 0.0);

        let e = build_example(1, EllProfile::ScaledLog, 1.0).unwrap();
        let o = oracles(&e, &p(&[1.0, 1.0, 1.0])).unwrap();
        let s3 = 3f64.sqrt();
        assert!((o.a + (3.0 + s3) / 2.0).abs() < 1e-14);
        assert!((o.c - (1.0 + s3) / 2.0).abs() < 1e-14);
        assert!((o.lambda - 1.0).abs() < 1e-14);
        assert!(o.nu.abs() < 1e-14);

        let e = build_example(1, EllProfile::Linear { alpha: 1.0 }, 1.0).unwrap();
        let o = oracles(&e, &p(&[0.5, 2.0, 1.0])).unwrap();
        assert_eq!((o.a, o.b, o.c), (-2.0, 0.0, 0.0));
        assert_eq!((o.lambda, o.mu, o.nu), (1.0, 0.0, 1.0));
        assert_eq!(o.lambda + o.mu + o.nu, 2.0 * o.f * o.f);
    }

    #[test]
    fn reversed_angle_gives_the_torse_form() {
        use crate::structure::class_flags;
        let q = p(&[0.5, 2.0, 1.0]);
        let rev = build_example_oriented(1, EllProfile::Log { c: 1.0 }, 1.0, AngleOrientation::Reversed).unwrap();
        let flags = class_flags(&rev.transformed, &q, 1e-10).unwrap();
        assert!(!flags.is_f0 && flags.matches_f5_torse_form, "{flags:?}");
        assert!((flags.fitted_f_over_k - 1.0).abs() < 1e-12);
        assert!(class_flags(&rev.base, &q, 1e-12).unwrap().is_f0);

        // With the standard angle the fitted scale is still l' but F carries
        // purely horizontal components, e.g. F(d1, d1, d1) = -8 here.
        let std = build_example(1, EllProfile::Log { c: 1.0 }, 1.0).unwrap();
        let flags = class_flags(&std.transformed, &q, 1e-10).unwrap();
        assert!(!flags.matches_f5_torse_form && flags.template_residual > 0.1);
        assert!((flags.fitted_f_over_k - 1.0).abs() < 1e-12);
        let f = crate::structure::fundamental_f(&std.transformed, &q).unwrap();
        assert!((f.get(&[0, 0, 0]) + 8.0).abs() < 1e-12);
        assert!((f.get(&[0, 1, 2]) + 3.75).abs() < 1e-12);
    }

    #[test]
    fn exp_profile_gives_exponential_conformal_scalar() {
        let (q, n, k) = (0.8, 2, 1.5);
        let prof = EllProfile::exp_for(q, n, k);
        let t = 0.7;
        let d = prof.derivatives(t).unwrap();
        let want = q * (-k * t / 3.0).exp();
        assert!((k * d[1] - want).abs() < 1e-15);
    }

    #[test]
    fn custom_profile_matches_preset() {
        let custom = EllProfile::Custom(CustomProfile::new("ln t", true, |t| t.ln()));
        let preset = EllProfile::Log { c: 1.0 };
        let a = custom.derivatives(1.7).unwrap();
        let b = preset.derivatives(1.7).unwrap();
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn expression_profile_builds_the_same_manifold() {
        let custom = EllProfile::Custom(CustomProfile::from_expression("2*ln(t)", true).unwrap());
        let e = build_example(1, custom, 1.0).unwrap();
        let p = Point::new(vec![0.5, 2.0, 1.5]).unwrap();
        let preset = build_example(1, EllProfile::Log { c: 2.0 }, 1.0).unwrap();
        let a = e.transformed.metric().at(&p).unwrap();
        let b = preset.transformed.metric().at(&p).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-13);
        }
        assert!(CustomProfile::from_expression("2*ln(", true).is_err());
    }
}
