//! Multiplier (abc) estimate: the matrix `M`, the quadratic-form coefficients,
//! certification of the energy inequality and boundary-term bookkeeping.

mod cases;
mod certify;
mod testfield;

pub use cases::{
    multiplier_eval, pair_ab, quad_coeffs, CaseKind, CoefficientTriple, MultiplierCase,
    MultiplierMatrix,
};
pub use certify::{
    boundary_terms, certify_lemma4, check_pointwise_bounds, coercivity_ratio, epsilon_mult_bound,
    form_split, test_field_boundary_terms, BoundaryTerms, CertificationReport, FormSplit,
    PointwiseFailure, PointwiseReport,
};
pub use testfield::{make_test_field, ShapeParams, TestField, TestFieldFn};

#[derive(Debug, thiserror::Error)]
pub enum MultiplierError {
    #[error("K = {k} outside [{lo}, {hi}] for case {case}")]
    KOutOfRange { case: &'static str, k: f64, lo: f64, hi: f64 },
    #[error("case {0} requires sigma(y) = y^2")]
    RequiresParabola(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("test field degenerate after {attempts} attempts")]
    DegenerateTestField { attempts: usize },
    #[error("trace condition violated: {0}")]
    TraceViolation(String),
    #[error(transparent)]
    Operator(#[from] crate::operators::OperatorError),
}
