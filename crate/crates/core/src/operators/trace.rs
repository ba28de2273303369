use crate::geometry::{polygon, Point};

/// Trapezoid quadrature on polylines resampled at spacing `≤ h`. Every
/// resampled segment contributes both endpoints with weight `ds/2` and the
/// segment's unit tangent, so `Σ ωₖ Fₖ tₖ` approximates `∫ F dl`.
#[derive(Debug, Clone, Default)]
pub struct BoundaryQuadrature {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub tangents: Vec<Point>,
    /// Index of the source polyline for every node.
    pub piece: Vec<usize>,
}

impl BoundaryQuadrature {
    pub fn new(lines: &[&[Point]], h: f64) -> Self {
        let mut q = Self::default();
        for (id, line) in lines.iter().enumerate() {
            let r = polygon::resample(line, h);
            for w in r.windows(2) {
                let (a, b) = (w[0], w[1]);
                let ds = (b[0] - a[0]).hypot(b[1] - a[1]);
                if ds == 0.0 {
                    continue;
                }
                let t = [(b[0] - a[0]) / ds, (b[1] - a[1]) / ds];
                for p in [a, b] {
                    q.points.push(p);
                    q.weights.push(0.5 * ds);
                    q.tangents.push(t);
                    q.piece.push(id);
                }
            }
        }
        q
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `(∫ F dx, ∫ F dy)` for nodal values `F`.
    pub fn integrate_dxdy(&self, values: &[f64]) -> (f64, f64) {
        let mut sx = crate::numeric::CompensatedSum::new();
        let mut sy = crate::numeric::CompensatedSum::new();
        for k in 0..self.len() {
            let w = self.weights[k] * values[k];
            sx.add(w * self.tangents[k][0]);
            sy.add(w * self.tangents[k][1]);
        }
        (sx.value(), sy.value())
    }

    /// `∫ F ds`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        crate::numeric::compensated_sum(self.weights.iter().zip(values).map(|(w, v)| w * v))
    }
}
