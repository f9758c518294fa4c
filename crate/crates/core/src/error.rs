use crate::jet::JetError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("evaluation failed at {point:?}: {source}")]
    Eval {
        point: Vec<f64>,
        #[source]
        source: JetError,
    },

    #[error("point {point:?} outside the chart: {reason}")]
    Domain { point: Vec<f64>, reason: String },

    #[error("usage: {0}")]
    Usage(String),

    #[error("singular metric (condition estimate {condition:e})")]
    SingularMetric { condition: f64 },

    #[error("degenerate plane: |g(x,x)g(y,y) - g(x,y)^2| = {denominator:e} below {threshold:e}")]
    DegeneratePlane { denominator: f64, threshold: f64 },

    #[error("degenerate potential: vector field vanishes at {point:?}")]
    DegeneratePotential { point: Vec<f64> },

    #[error("degenerate fit basis (Gram determinant {determinant:e})")]
    DegenerateGram { determinant: f64 },

    #[error("inadmissible profile: {0}")]
    Profile(String),
}

impl Error {
    pub(crate) fn eval(point: &[f64], source: JetError) -> Self {
        Error::Eval {
            point: point.to_vec(),
            source,
        }
    }
}
