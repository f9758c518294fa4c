//! Component functions over a coordinate chart, evaluated on jets.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::jet::{Jet3, JetError};
use crate::tensor::{JetTensor, Point, TensorComponents, Valence};

type ScalarFn = dyn Fn(&[Jet3]) -> Result<Jet3, JetError> + Send + Sync;
type ComponentFn = dyn Fn(&[Jet3]) -> Result<Vec<Jet3>, JetError> + Send + Sync;

/// A scalar function of the coordinates. It receives one seeded jet per
/// coordinate and must build its result from jet arithmetic.
#[derive(Clone)]
pub struct ScalarField(Arc<ScalarFn>);

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ScalarField(..)")
    }
}

impl ScalarField {
    pub fn new(f: impl Fn(&[Jet3]) -> Result<Jet3, JetError> + Send + Sync + 'static) -> Self {
        ScalarField(Arc::new(f))
    }

    pub fn constant(value: f64) -> Self {
        Self::new(move |x| Ok(Jet3::constant(value, x.len())))
    }

    /// The coordinate function `x^index`.
    pub fn coordinate(index: usize) -> Self {
        Self::new(move |x| Ok(x[index].clone()))
    }

    pub fn eval_jets(&self, vars: &[Jet3]) -> Result<Jet3, JetError> {
        (self.0)(vars)
    }
}

/// Evaluates `field` at `p`, returning its value and partial derivatives
/// through order three.
pub fn evaluate_jet(field: &ScalarField, p: &Point) -> Result<Jet3> {
    field
        .eval_jets(&Jet3::variables(p.coords()))
        .map_err(|e| Error::eval(p.coords(), e))
}

/// A tensor field given by a function producing all components at once, so
/// shared subexpressions are evaluated a single time.
#[derive(Clone)]
pub struct TensorField {
    valence: Valence,
    dim: usize,
    eval: Arc<ComponentFn>,
}

impl fmt::Debug for TensorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TensorField")
            .field("valence", &self.valence)
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

impl TensorField {
    pub fn new(
        valence: Valence,
        dim: usize,
        f: impl Fn(&[Jet3]) -> Result<Vec<Jet3>, JetError> + Send + Sync + 'static,
    ) -> Self {
        Self {
            valence,
            dim,
            eval: Arc::new(f),
        }
    }

    pub fn constant(components: TensorComponents) -> Self {
        let valence = components.valence();
        let dim = components.dim();
        let data = components.into_data();
        Self::new(valence, dim, move |x| {
            Ok(data.iter().map(|&v| Jet3::constant(v, x.len())).collect())
        })
    }

    /// One scalar field per component, row-major.
    pub fn from_scalars(valence: Valence, dim: usize, comps: Vec<ScalarField>) -> Result<Self> {
        let expected = dim.pow(valence.rank() as u32);
        if comps.len() != expected {
            return Err(Error::Usage(format!(
                "expected {expected} component functions, got {}",
                comps.len()
            )));
        }
        Ok(Self::new(valence, dim, move |x| {
            comps.iter().map(|c| c.eval_jets(x)).collect()
        }))
    }

    /// `s · self` for a constant `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let inner = self.clone();
        Self::new(self.valence, self.dim, move |x| {
            Ok(inner.eval_jets(x)?.iter().map(|c| c.scale(s)).collect())
        })
    }

    pub fn valence(&self) -> Valence {
        self.valence
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval_jets(&self, vars: &[Jet3]) -> Result<Vec<Jet3>, JetError> {
        (self.eval)(vars)
    }

    pub fn jets(&self, p: &Point) -> Result<JetTensor> {
        if p.dim() != self.dim {
            return Err(Error::Usage(format!(
                "field of dim {} evaluated at a point of dim {}",
                self.dim,
                p.dim()
            )));
        }
        let comps = self
            .eval_jets(&Jet3::variables(p.coords()))
            .map_err(|e| Error::eval(p.coords(), e))?;
        JetTensor::new(self.valence, self.dim, comps)
    }

    pub fn at(&self, p: &Point) -> Result<TensorComponents> {
        Ok(self.jets(p)?.value())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn log_radius_plus_log_t() {
        // u = ½ ln((x¹)² + (x²)²) + ln t at (1,1,1)
        let u = ScalarField::new(|x| {
            let r2 = &(&x[0] * &x[0]) + &(&x[1] * &x[1]);
            Ok(&r2.ln()?.scale(0.5) + &x[2].ln()?)
        });
        let jet = evaluate_jet(&u, &Point::new(vec![1.0, 1.0, 1.0]).unwrap()).unwrap();
        assert_relative_eq!(jet.value(), 0.5 * 2f64.ln(), max_relative = 1e-15);
        assert_relative_eq!(jet.d1(0), 0.5, max_relative = 1e-15);
        assert_relative_eq!(jet.d1(1), 0.5, max_relative = 1e-15);
        assert_relative_eq!(jet.d1(2), 1.0, max_relative = 1e-15);
        // ∂²u/∂x¹∂x¹ = (y² − x²)/(x²+y²)² = 0 here; ∂²u/∂x¹∂x² = −2xy/(x²+y²)² = −½
        assert_relative_eq!(jet.d2(0, 1), -0.5, max_relative = 1e-15);
        assert!(jet.d2(0, 0).abs() < 1e-15);
        assert_relative_eq!(jet.d2(2, 2), -1.0, max_relative = 1e-15);
    }

    #[test]
    fn constant_field_everywhere() {
        let c = ScalarField::constant(7.0);
        let jet = evaluate_jet(&c, &Point::new(vec![-3.0, 0.2, 9.0]).unwrap()).unwrap();
        assert_eq!(jet.value(), 7.0);
        assert!(!jet.is_zero() && (jet.clone() - 7.0).is_zero());
    }

    #[test]
    fn reeb_profile_derivative() {
        // ℓ(t) = ln t: du(ξ) = ℓ′(1) = 1
        let ell = ScalarField::new(|x| x[2].ln());
        let jet = evaluate_jet(&ell, &Point::new(vec![0.5, 2.0, 1.0]).unwrap()).unwrap();
        assert_eq!(jet.d1(2), 1.0);
        assert_eq!(jet.d1(0), 0.0);
    }

    #[test]
    fn domain_violation_reports_coordinate() {
        let ell = ScalarField::new(|x| x[2].ln());
        let err = evaluate_jet(&ell, &Point::new(vec![0.5, 2.0, -1.0]).unwrap()).unwrap_err();
        match err {
            Error::Eval {
                source: JetError::Domain { coords, .. },
                ..
            } => assert_eq!(coords, vec![2]),
            other => panic!("unexpected {other:?}"),
        }
    }
}
