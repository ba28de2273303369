//! Domain construction: sonic curve, the elliptic arc `C₁`, the characteristic
//! `Γ`, the closing arc `C₂` and the enclosing rectangle.

mod c1;
mod characteristic;
mod domain;
pub mod polygon;
mod sonic;

pub use c1::{c1_epsilon_bounds, intersect_c1_sonic, C1Spec, EpsilonBounds, RectangleSpec};
pub use characteristic::{
    hermite_simpson_residual, midpoint_slope_residual, trace_characteristic, CharacteristicTrace,
    Stop,
};
pub use domain::{
    build_domain, classify_point, validate_domain, Domain, DomainSpec, PointClass,
    ValidationReport, Variant,
};
pub use sonic::{eval_sonic, SonicCurve, SonicSpec};

pub type Point = [f64; 2];

#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    #[error("invalid sonic curve: {0}")]
    InvalidSonic(String),
    #[error("sonic curve evaluated at negative ordinate y = {0}")]
    NegativeOrdinate(f64),
    #[error("ordinate y = {y} beyond tabulated range (max {y_max})")]
    OutsideTable { y: f64, y_max: f64 },
    #[error("invalid rectangle: {0}")]
    InvalidRectangle(String),
    #[error("invalid C1 curve: {0}")]
    InvalidC1(String),
    #[error("C1 does not meet the sonic curve in (0, {ell}]")]
    NoIntersection { ell: f64 },
    #[error("characteristic start ({x}, {y}) is not on the sonic curve (radicand {radicand})")]
    StartOffSonic { x: f64, y: f64, radicand: f64 },
    #[error("characteristic stop condition not reached before y = {guard}")]
    StopUnreachable { guard: f64 },
    #[error("invalid step {0}")]
    InvalidStep(f64),
    #[error("C2 monotonicity violated at segment {segment} (dx = {dx}, dy = {dy})")]
    C2NotMonotone { segment: usize, dx: f64, dy: f64 },
    #[error("boundary polygon self-intersects (segments {first} and {second})")]
    SelfIntersection { first: usize, second: usize },
    #[error("domain reaches x = {sup_x} beyond l - delta = {limit}")]
    ExceedsRectangle { sup_x: f64, limit: f64 },
    #[error("condition (a dy/dx + b < 0) fails on C1 at x = {x} (margin {margin})")]
    Condition4 { x: f64, margin: f64 },
    #[error("invalid variant: {0}")]
    InvalidVariant(String),
}
