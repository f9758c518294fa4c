//! User-defined structures given as a table of component expressions over
//! named coordinates.
//!
//! ```json
//! {
//!   "n": 1,
//!   "coordinates": ["x", "y", "t"],
//!   "metric": [["-exp(2*t)", 0, 0], [0, "exp(2*t)", 0], [0, 0, 1]],
//!   "phi": [[0, -1, 0], [1, 0, 0], [0, 0, 0]],
//!   "xi": [0, 0, 1],
//!   "eta": [0, 0, 1],
//!   "potential": [0, 0, 2],
//!   "positive": ["t"]
//! }
//! ```
//!
//! `phi[i][j]` is the component `φ^i_j`. Entries are strings in the
//! expression grammar of [`crate::expr`] or plain numbers. `nonzero` and
//! `positive` expressions describe the part of the chart the components are
//! valid on.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Expr, ExprError};
use crate::field::{ScalarField, TensorField};
use crate::jet::Jet3;
use crate::structure::ManifoldSpec;
use crate::tensor::Valence;

/// One table entry: an expression or a literal number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Component {
    Number(f64),
    Expression(String),
}

impl Component {
    fn source(&self) -> String {
        match self {
            Component::Number(v) => format!("{v:?}"),
            Component::Expression(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpressionTable {
    pub n: usize,
    /// Coordinate names; defaults to `x1 … x{2n}, t`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coordinates: Option<Vec<String>>,
    pub metric: Vec<Vec<Component>>,
    pub phi: Vec<Vec<Component>>,
    pub xi: Vec<Component>,
    pub eta: Vec<Component>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<Vec<Component>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nonzero: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub positive: Vec<String>,
}

/// A parsed table.
#[derive(Debug, Clone)]
pub struct UserManifold {
    pub manifold: ManifoldSpec,
    pub potential: Option<TensorField>,
    pub coordinates: Vec<String>,
}

fn table_error(path: &str, e: ExprError) -> Error {
    Error::Usage(format!("{path}: {e}"))
}

impl ExpressionTable {
    pub fn coordinate_names(&self) -> Vec<String> {
        self.coordinates.clone().unwrap_or_else(|| {
            (1..=2 * self.n)
                .map(|i| format!("x{i}"))
                .chain(std::iter::once("t".to_string()))
                .collect()
        })
    }

    /// Parses every entry and assembles the structure.
    pub fn build(&self) -> Result<UserManifold> {
        if self.n == 0 {
            return Err(Error::Usage("n: must be at least 1".into()));
        }
        let dim = 2 * self.n + 1;
        let names = self.coordinate_names();
        if names.len() != dim {
            return Err(Error::Usage(format!(
                "coordinates: expected {dim} names, got {}",
                names.len()
            )));
        }
        for (i, a) in names.iter().enumerate() {
            if names[..i].contains(a) {
                return Err(Error::Usage(format!("coordinates: `{a}` listed twice")));
            }
        }
        let vars: Vec<&str> = names.iter().map(String::as_str).collect();
        let parse = |path: String, c: &Component| -> Result<Expr> {
            match c {
                Component::Number(v) => Ok(Expr::Num(*v)),
                Component::Expression(s) => Expr::parse(s, &vars).map_err(|e| table_error(&path, e)),
            }
        };
        let matrix = |name: &str, rows: &[Vec<Component>], valence: Valence| -> Result<TensorField> {
            if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                return Err(Error::Usage(format!("{name}: expected a {dim}x{dim} table")));
            }
            let mut exprs = Vec::with_capacity(dim * dim);
            for (i, row) in rows.iter().enumerate() {
                for (j, c) in row.iter().enumerate() {
                    exprs.push(parse(format!("{name}[{i}][{j}]"), c)?);
                }
            }
            Ok(tensor_field(valence, dim, exprs))
        };
        let vector = |name: &str, comps: &[Component], valence: Valence| -> Result<TensorField> {
            if comps.len() != dim {
                return Err(Error::Usage(format!("{name}: expected {dim} components, got {}", comps.len())));
            }
            let exprs = comps
                .iter()
                .enumerate()
                .map(|(i, c)| parse(format!("{name}[{i}]"), c))
                .collect::<Result<Vec<_>>>()?;
            Ok(tensor_field(valence, dim, exprs))
        };
        let g = matrix("metric", &self.metric, Valence::BILINEAR)?;
        let phi = matrix("phi", &self.phi, Valence::ENDOMORPHISM)?;
        let xi = vector("xi", &self.xi, Valence::VECTOR)?;
        let eta = vector("eta", &self.eta, Valence::COVECTOR)?;
        let potential = self
            .potential
            .as_ref()
            .map(|p| vector("potential", p, Valence::VECTOR))
            .transpose()?;
        let mut guards = Vec::new();
        for (kind, list) in [("nonzero", &self.nonzero), ("positive", &self.positive)] {
            for (i, s) in list.iter().enumerate() {
                let e = Expr::parse(s, &vars).map_err(|e| table_error(&format!("{kind}[{i}]"), e))?;
                guards.push((kind == "positive", s.clone(), e));
            }
        }
        let manifold = ManifoldSpec::new(self.n, g, phi, xi, eta)?.with_guard(move |p| {
            let x = Jet3::variables(p.coords());
            for (positive, src, e) in &guards {
                let v = e.eval(&x).map_err(|err| format!("{src}: {err}"))?.value();
                if *positive && !(v > 0.0) {
                    return Err(format!("{src} = {v} must be positive"));
                }
                if !positive && (v == 0.0 || !v.is_finite()) {
                    return Err(format!("{src} = {v} must be nonzero"));
                }
            }
            Ok(())
        });
        Ok(UserManifold {
            manifold,
            potential,
            coordinates: names,
        })
    }

    /// Echo of every entry as source text, row-major.
    pub fn sources(&self) -> Vec<String> {
        self.metric
            .iter()
            .chain(&self.phi)
            .flatten()
            .chain(&self.xi)
            .chain(&self.eta)
            .map(Component::source)
            .collect()
    }
}

fn tensor_field(valence: Valence, dim: usize, exprs: Vec<Expr>) -> TensorField {
    let exprs = Arc::new(exprs);
    TensorField::new(valence, dim, move |x| exprs.iter().map(|e| e.eval(x)).collect())
}

/// A scalar field from one expression over the named coordinates.
pub fn scalar_from_expression(src: &str, coordinates: &[&str]) -> Result<ScalarField> {
    Expr::parse(src, coordinates)
        .map(Expr::into_field)
        .map_err(|e| table_error("expression", e))
}
