use thiserror::Error;

use crate::fields::expr::{EvalError, ParseError};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("point ({x}, {y}) lies outside the domain")]
    OutOfDomain { x: f64, y: f64 },

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Eval(#[from] EvalError),

    #[error("field `{field}` = {value} at t={t}, p=({x}, {y}) violates {constraint}")]
    FieldRange {
        field: &'static str,
        value: f64,
        constraint: &'static str,
        t: f64,
        x: f64,
        y: f64,
    },

    #[error("the metric is undefined at the zero vector")]
    ZeroVector,

    #[error("ellipse term degenerates (alpha - eps*omega = {0} <= 0)")]
    DegenerateWindTerm(f64),

    #[error("fire speed denominator is not positive ({0}); slope term overwhelms fuel term")]
    NonPositiveSpeed(f64),

    #[error("slope convexity condition only applies without wind (eps = {0})")]
    NotApplicable(f64),

    #[error("fundamental tensor is singular (det = {0})")]
    SingularTensor(f64),

    #[error("no F-orthogonal unit vector found for tangent ({0}, {1})")]
    NoRoot(f64, f64),

    #[error("{0} sign changes of g(v, w) found; indicatrix is not strongly convex")]
    AmbiguousRoot(usize),

    #[error("metric is not strongly convex at t={t}, p=({x}, {y}), direction {theta}")]
    NonConvexMetric { t: f64, x: f64, y: f64, theta: f64 },

    #[error("ignition curve is degenerate: {0}")]
    DegenerateCurve(String),

    #[error("no live trajectories at t={0}")]
    EmptyFront(f64),

    #[error("metric depends on time (field `{0}`); the grid oracle needs a static metric")]
    TimeDependentMetric(&'static str),

    #[error("{key}: {message}")]
    Config { key: String, message: String },

    #[error("DEM format error at line {line}: {message}")]
    Dem { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
