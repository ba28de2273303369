//! Mixed elliptic-hyperbolic cold plasma system: domain construction,
//! discrete first-order operators, multiplier estimates, similarity
//! solutions and weighted least-squares solves.

pub mod driver;
pub mod geometry;
pub mod multiplier;
pub mod numeric;
pub mod operators;
pub mod similarity;
pub mod solver;
