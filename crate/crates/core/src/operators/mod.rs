//! Discrete `L`, `L*`, the weighted norms and the integral identities they
//! satisfy.

mod grid;
mod ops;
pub mod sparse;
mod trace;

pub use grid::{BoxField, Grid, GridMeta};
pub use ops::{
    apply_l, apply_lstar, green_identity_gap, inner_with_weights, riesz_recover, weak_residual, weighted_inner,
    weighted_norm, FirstOrder, GreenGap, NormMode,
};
pub use trace::BoundaryQuadrature;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum OperatorError {
    #[error("grid resolution {nx}x{ny} too small")]
    InvalidResolution { nx: usize, ny: usize },
    #[error("no cell centre falls inside the polygon")]
    EmptyMask,
    #[error("field length {got} does not match grid with {expected} cells")]
    GridMismatch { expected: usize, got: usize },
    #[error("weight sigma' vanishes at quadrature node y = {y}")]
    Degenerate { y: f64 },
    #[error("non-finite value in field")]
    NonFinite,
}

/// Two-component field on the masked cells of a [`Grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
}

impl GridField {
    pub fn zeros(n: usize) -> Self {
        Self { u1: vec![0.0; n], u2: vec![0.0; n] }
    }

    pub fn from_fn<F: Fn(f64, f64) -> (f64, f64)>(grid: &Grid, f: F) -> Self {
        let (u1, u2) = grid.centers().iter().map(|p| f(p[0], p[1])).unzip();
        Self { u1, u2 }
    }

    /// Stacked `(u1, u2)`.
    pub fn from_stacked(v: &[f64]) -> Self {
        let n = v.len() / 2;
        Self { u1: v[..n].to_vec(), u2: v[n..].to_vec() }
    }

    pub fn stacked(&self) -> Vec<f64> {
        let mut v = self.u1.clone();
        v.extend_from_slice(&self.u2);
        v
    }

    pub fn len(&self) -> usize {
        self.u1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u1.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.u1.iter().chain(&self.u2).all(|v| v.is_finite())
    }

    pub fn check(&self, grid: &Grid) -> Result<(), OperatorError> {
        if self.u1.len() != grid.len() || self.u2.len() != grid.len() {
            return Err(OperatorError::GridMismatch { expected: grid.len(), got: self.u1.len().min(self.u2.len()) });
        }
        Ok(())
    }

    pub fn sub(&self, other: &GridField) -> GridField {
        GridField {
            u1: self.u1.iter().zip(&other.u1).map(|(a, b)| a - b).collect(),
            u2: self.u2.iter().zip(&other.u2).map(|(a, b)| a - b).collect(),
        }
    }

    /// CSV rows `i,j,x,y,u1,u2` for the masked cells.
    pub fn to_csv(&self, grid: &Grid, header: Option<&str>) -> String {
        let mut s = String::new();
        if let Some(h) = header {
            s.push_str("# ");
            s.push_str(h);
            s.push('\n');
        }
        s.push_str("i,j,x,y,u1,u2\n");
        for (k, (&(i, j), p)) in grid.cells().iter().zip(grid.centers()).enumerate() {
            s.push_str(&format!("{i},{j},{},{},{},{}\n", p[0], p[1], self.u1[k], self.u2[k]));
        }
        s
    }
}
