use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::sparse::{Csr, CsrBuilder};
use super::OperatorError;
use crate::geometry::{polygon, Domain, Point};

const UNMASKED: usize = usize::MAX;

/// Cell-centred structured grid over the bounding box of a polygon, restricted
/// to the cells whose centre lies inside.
#[derive(Debug, Clone)]
pub struct Grid {
    pub x_min: f64,
    pub y_min: f64,
    pub hx: f64,
    pub hy: f64,
    pub nx: usize,
    pub ny: usize,
    index: Vec<usize>,
    cells: Vec<(usize, usize)>,
    centers: Vec<Point>,
    weights: Vec<f64>,
    centroids: Vec<Point>,
    dx: Csr,
    dy: Csr,
    lost_area: f64,
}

/// Grid dimensions for metadata headers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub nx: usize,
    pub ny: usize,
    pub x_min: f64,
    pub y_min: f64,
    pub hx: f64,
    pub hy: f64,
    pub cells: usize,
}

fn bounds(poly: &[Point]) -> (f64, f64, f64, f64) {
    poly.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), p| (a.min(p[0]), b.max(p[0]), c.min(p[1]), d.max(p[1])),
    )
}

impl Grid {
    pub fn for_domain(domain: &Domain, nx: usize, ny: usize) -> Result<Self, OperatorError> {
        Self::from_polygon(&domain.polygon(), nx, ny)
    }

    /// Mask by the even-odd rule at cell centres. Quadrature weights are the
    /// areas of the polygon inside each cell; slivers of cells whose centre is
    /// outside are lumped onto the nearest masked neighbour.
    pub fn from_polygon(poly: &[Point], nx: usize, ny: usize) -> Result<Self, OperatorError> {
        if nx < 2 || ny < 2 {
            return Err(OperatorError::InvalidResolution { nx, ny });
        }
        let (x0, x1, y0, y1) = bounds(poly);
        let hx = (x1 - x0) / nx as f64;
        let hy = (y1 - y0) / ny as f64;
        let n = poly.len();

        let mut inside = vec![false; nx * ny];
        let mut crossings = Vec::new();
        for j in 0..ny {
            let py = y0 + (j as f64 + 0.5) * hy;
            crossings.clear();
            let mut prev = n - 1;
            for k in 0..n {
                let [xi, yi] = poly[k];
                let [xj, yj] = poly[prev];
                if (yi > py) != (yj > py) {
                    crossings.push(xj + (py - yj) * (xi - xj) / (yi - yj));
                }
                prev = k;
            }
            crossings.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for i in 0..nx {
                let px = x0 + (i as f64 + 0.5) * hx;
                let right = crossings.len() - crossings.partition_point(|&c| c <= px);
                inside[i + nx * j] = right % 2 == 1;
            }
        }

        // cells touched by the boundary need clipping
        let mut touched = vec![false; nx * ny];
        let fine = 0.5 * hx.min(hy);
        let mut closed = poly.to_vec();
        closed.push(poly[0]);
        for p in polygon::resample(&closed, fine) {
            let i = (((p[0] - x0) / hx).floor() as isize).clamp(0, nx as isize - 1);
            let j = (((p[1] - y0) / hy).floor() as isize).clamp(0, ny as isize - 1);
            for di in -1..=1 {
                for dj in -1..=1 {
                    let (ii, jj) = (i + di, j + dj);
                    if ii >= 0 && jj >= 0 && (ii as usize) < nx && (jj as usize) < ny {
                        touched[ii as usize + nx * jj as usize] = true;
                    }
                }
            }
        }

        let mut index = vec![UNMASKED; nx * ny];
        let mut cells = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                if inside[i + nx * j] {
                    index[i + nx * j] = cells.len();
                    cells.push((i, j));
                }
            }
        }
        if cells.is_empty() {
            return Err(OperatorError::EmptyMask);
        }
        let centers: Vec<Point> = cells
            .iter()
            .map(|&(i, j)| [x0 + (i as f64 + 0.5) * hx, y0 + (j as f64 + 0.5) * hy])
            .collect();

        let mut weights = vec![0.0; cells.len()];
        let mut moments = vec![[0.0; 2]; cells.len()];
        let mut lost_area = 0.0;
        for j in 0..ny {
            for i in 0..nx {
                let id = i + nx * j;
                let cx0 = x0 + i as f64 * hx;
                let cy0 = y0 + j as f64 * hy;
                let (area, centroid) = if touched[id] {
                    polygon::area_centroid(&polygon::clip_to_box(poly, cx0, cx0 + hx, cy0, cy0 + hy))
                } else if inside[id] {
                    (hx * hy, [cx0 + 0.5 * hx, cy0 + 0.5 * hy])
                } else {
                    (0.0, [0.0, 0.0])
                };
                if area <= 0.0 {
                    continue;
                }
                let mut add = |c: usize| {
                    weights[c] += area;
                    moments[c][0] += area * centroid[0];
                    moments[c][1] += area * centroid[1];
                };
                if index[id] != UNMASKED {
                    add(index[id]);
                    continue;
                }
                let mut best: Option<(f64, usize)> = None;
                for di in -1isize..=1 {
                    for dj in -1isize..=1 {
                        let (ii, jj) = (i as isize + di, j as isize + dj);
                        if ii < 0 || jj < 0 || ii as usize >= nx || jj as usize >= ny {
                            continue;
                        }
                        let c = index[ii as usize + nx * jj as usize];
                        if c == UNMASKED {
                            continue;
                        }
                        let d = (di * di) as f64 * hx * hx + (dj * dj) as f64 * hy * hy;
                        if best.is_none_or(|(bd, _)| d < bd) {
                            best = Some((d, c));
                        }
                    }
                }
                match best {
                    Some((_, c)) => add(c),
                    None => lost_area += area,
                }
            }
        }

        let centroids = moments
            .iter()
            .zip(&weights)
            .zip(&centers)
            .map(|((m, &w), c)| if w > 0.0 { [m[0] / w, m[1] / w] } else { *c })
            .collect();
        let mut g = Grid {
            x_min: x0,
            y_min: y0,
            hx,
            hy,
            nx,
            ny,
            index,
            cells,
            centers,
            weights,
            centroids,
            dx: Csr::default(),
            dy: Csr::default(),
            lost_area,
        };
        g.build_stencils();
        Ok(g)
    }

    /// Fully masked rectangle with plain midpoint weights.
    pub fn rectangle(x0: f64, x1: f64, y0: f64, y1: f64, nx: usize, ny: usize) -> Result<Self, OperatorError> {
        let poly = [[x0, y0], [x1, y0], [x1, y1], [x0, y1]];
        Self::from_polygon(&poly, nx, ny)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn h(&self) -> f64 {
        self.hx.max(self.hy)
    }

    pub fn meta(&self) -> GridMeta {
        GridMeta {
            nx: self.nx,
            ny: self.ny,
            x_min: self.x_min,
            y_min: self.y_min,
            hx: self.hx,
            hy: self.hy,
            cells: self.len(),
        }
    }

    pub fn cells(&self) -> &[(usize, usize)] {
        &self.cells
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Centroid of the polygon area attributed to each masked cell.
    pub fn centroids(&self) -> &[Point] {
        &self.centroids
    }

    /// `∫ g` with the centroid offset of every cell corrected through the
    /// discrete gradient of `g`.
    pub fn integrate(&self, g: &[f64]) -> f64 {
        let gx = self.dx.matvec(g);
        let gy = self.dy.matvec(g);
        let mut s = crate::numeric::CompensatedSum::new();
        for k in 0..self.len() {
            let [cx, cy] = self.centers[k];
            let [mx, my] = self.centroids[k];
            s.add(self.weights[k] * (g[k] + gx[k] * (mx - cx) + gy[k] * (my - cy)));
        }
        s.value()
    }

    /// Polygon area not attributed to any masked cell.
    pub fn lost_area(&self) -> f64 {
        self.lost_area
    }

    pub fn dx(&self) -> &Csr {
        &self.dx
    }

    pub fn dy(&self) -> &Csr {
        &self.dy
    }

    pub fn cell_index(&self, i: isize, j: isize) -> Option<usize> {
        if i < 0 || j < 0 || i as usize >= self.nx || j as usize >= self.ny {
            return None;
        }
        let c = self.index[i as usize + self.nx * j as usize];
        (c != UNMASKED).then_some(c)
    }

    pub fn is_masked(&self, i: usize, j: usize) -> bool {
        self.index[i + self.nx * j] != UNMASKED
    }

    /// Centre of box cell `(i, j)`, masked or not.
    pub fn center_of(&self, i: usize, j: usize) -> Point {
        [self.x_min + (i as f64 + 0.5) * self.hx, self.y_min + (j as f64 + 0.5) * self.hy]
    }

    fn build_stencils(&mut self) {
        let n = self.len();
        let mut bx = CsrBuilder::new(n);
        let mut by = CsrBuilder::new(n);
        for k in 0..n {
            let (i, j) = self.cells[k];
            let (i, j) = (i as isize, j as isize);
            let xn = (self.cell_index(i + 1, j), self.cell_index(i - 1, j));
            let yn = (self.cell_index(i, j + 1), self.cell_index(i, j - 1));
            let fit = if xn.0.is_none() || xn.1.is_none() || yn.0.is_none() || yn.1.is_none() {
                Some(self.local_fit(i, j))
            } else {
                None
            };
            match (xn, &fit) {
                ((Some(p), Some(m)), _) => {
                    bx.push(p, 0.5 / self.hx);
                    bx.push(m, -0.5 / self.hx);
                }
                (_, Some(f)) => {
                    for &(c, gx, _) in f {
                        bx.push(c, gx / self.hx);
                    }
                }
                _ => unreachable!(),
            }
            bx.end_row();
            match (yn, &fit) {
                ((Some(p), Some(m)), _) => {
                    by.push(p, 0.5 / self.hy);
                    by.push(m, -0.5 / self.hy);
                }
                (_, Some(f)) => {
                    for &(c, _, gy) in f {
                        by.push(c, gy / self.hy);
                    }
                }
                _ => unreachable!(),
            }
            by.end_row();
        }
        self.dx = bx.finish();
        self.dy = by.finish();
    }

    /// Least-squares polynomial through masked cells around `(i, j)`, cubic
    /// where the window allows, lower degree otherwise; returns
    /// `(cell, ∂/∂ξ weight, ∂/∂η weight)` in index units.
    fn local_fit(&self, i: isize, j: isize) -> Vec<(usize, f64, f64)> {
        let plan = [(2isize, 3usize), (3, 3), (2, 2), (3, 2), (4, 2), (5, 2), (3, 1), (5, 1)];
        for (radius, degree) in plan {
            let mut pts = Vec::new();
            for dj in -radius..=radius {
                for di in -radius..=radius {
                    if let Some(c) = self.cell_index(i + di, j + dj) {
                        pts.push((c, di as f64, dj as f64));
                    }
                }
            }
            let ncol = (degree + 1) * (degree + 2) / 2;
            if pts.len() < ncol + if degree > 1 { 4 } else { 1 } {
                continue;
            }
            let a = DMatrix::from_fn(pts.len(), ncol, |r, c| {
                let (_, u, v) = pts[r];
                [1.0, u, v, u * u, u * v, v * v, u * u * u, u * u * v, u * v * v, v * v * v][c]
            });
            let svd = a.clone().svd(true, true);
            let smax = svd.singular_values.max();
            if svd.singular_values.iter().any(|&s| s <= 1e-10 * smax) {
                continue;
            }
            let pinv = svd.pseudo_inverse(0.0).expect("full rank");
            return pts
                .iter()
                .enumerate()
                .map(|(r, &(c, _, _))| (c, pinv[(1, r)], pinv[(2, r)]))
                .collect();
        }
        Vec::new()
    }

    /// Interpolation weights at `p` over masked cells: bilinear when the four
    /// surrounding centres are masked, a Gaussian-weighted linear
    /// least-squares fit otherwise.
    pub fn interp_weights(&self, p: Point) -> Vec<(usize, f64)> {
        let fx = (p[0] - self.x_min) / self.hx - 0.5;
        let fy = (p[1] - self.y_min) / self.hy - 0.5;
        let (i0, j0) = (fx.floor() as isize, fy.floor() as isize);
        let (tx, ty) = (fx - i0 as f64, fy - j0 as f64);
        if let (Some(c00), Some(c10), Some(c01), Some(c11)) = (
            self.cell_index(i0, j0),
            self.cell_index(i0 + 1, j0),
            self.cell_index(i0, j0 + 1),
            self.cell_index(i0 + 1, j0 + 1),
        ) {
            return vec![
                (c00, (1.0 - tx) * (1.0 - ty)),
                (c10, tx * (1.0 - ty)),
                (c01, (1.0 - tx) * ty),
                (c11, tx * ty),
            ];
        }
        for radius in [2.5f64, 3.5, 5.0, 8.0] {
            let r = radius.ceil() as isize + 1;
            let mut sel = Vec::new();
            for dj in -r..=r {
                for di in -r..=r {
                    let (ii, jj) = (i0 + di, j0 + dj);
                    if let Some(c) = self.cell_index(ii, jj) {
                        let [cx, cy] = self.centers[c];
                        let u = (cx - p[0]) / self.hx;
                        let v = (cy - p[1]) / self.hy;
                        let d2 = u * u + v * v;
                        if d2 <= radius * radius {
                            sel.push((c, u, v, (-d2).exp()));
                        }
                    }
                }
            }
            let mut m = Matrix3::zeros();
            for &(_, u, v, w) in &sel {
                let row = Vector3::new(1.0, u, v);
                m += w * row * row.transpose();
            }
            let Some(inv) = m.try_inverse() else { continue };
            if m.norm() * inv.norm() > 1e10 {
                continue;
            }
            let e = inv.column(0).into_owned();
            return sel
                .iter()
                .map(|&(c, u, v, w)| (c, w * (e[0] + e[1] * u + e[2] * v)))
                .collect();
        }
        Vec::new()
    }
}

/// Two fields sampled at every centre of the bounding box, for bilinear
/// evaluation anywhere in it.
#[derive(Debug, Clone)]
pub struct BoxField {
    nx: usize,
    ny: usize,
    x_min: f64,
    y_min: f64,
    hx: f64,
    hy: f64,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
}

impl BoxField {
    pub fn sample<F: Fn(f64, f64) -> (f64, f64)>(grid: &Grid, f: F) -> Self {
        let (nx, ny) = (grid.nx, grid.ny);
        let mut v1 = vec![0.0; nx * ny];
        let mut v2 = vec![0.0; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let [x, y] = grid.center_of(i, j);
                let (a, b) = f(x, y);
                v1[i + nx * j] = a;
                v2[i + nx * j] = b;
            }
        }
        Self { nx, ny, x_min: grid.x_min, y_min: grid.y_min, hx: grid.hx, hy: grid.hy, v1, v2 }
    }

    /// Bilinear interpolation, linear extrapolation within half a cell of
    /// the box edge.
    pub fn eval(&self, p: Point) -> (f64, f64) {
        let fx = (p[0] - self.x_min) / self.hx - 0.5;
        let fy = (p[1] - self.y_min) / self.hy - 0.5;
        let i0 = (fx.floor() as isize).clamp(0, self.nx as isize - 2) as usize;
        let j0 = (fy.floor() as isize).clamp(0, self.ny as isize - 2) as usize;
        let (tx, ty) = (fx - i0 as f64, fy - j0 as f64);
        let at = |v: &[f64], i: usize, j: usize| v[i + self.nx * j];
        let lerp = |v: &[f64]| {
            (1.0 - tx) * (1.0 - ty) * at(v, i0, j0)
                + tx * (1.0 - ty) * at(v, i0 + 1, j0)
                + (1.0 - tx) * ty * at(v, i0, j0 + 1)
                + tx * ty * at(v, i0 + 1, j0 + 1)
        };
        (lerp(&self.v1), lerp(&self.v2))
    }

    /// Restriction to the masked cells.
    pub fn masked(&self, grid: &Grid) -> super::GridField {
        let (u1, u2) = grid
            .cells()
            .iter()
            .map(|&(i, j)| (self.v1[i + self.nx * j], self.v2[i + self.nx * j]))
            .unzip();
        super::GridField { u1, u2 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rectangle_grid_has_full_mask_and_midpoint_weights() {
        let g = Grid::rectangle(0.0, 1.0, 0.0, 1.0, 8, 4).unwrap();
        assert_eq!(g.len(), 32);
        assert!(g.weights().iter().all(|&w| (w - 1.0 / 32.0).abs() < 1e-15));
        assert!(g.centers().iter().all(|c| c[1] > 0.0));
    }

    #[test]
    fn triangle_weights_sum_to_area() {
        let tri = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let g = Grid::from_polygon(&tri, 37, 29).unwrap();
        let total: f64 = g.weights().iter().sum::<f64>() + g.lost_area();
        assert!((total - 0.5).abs() < 1e-13, "{total}");
        for (k, c) in g.centers().iter().enumerate() {
            assert!(c[0] + c[1] < 1.0, "cell {k} outside");
        }
    }

    #[test]
    fn centroid_quadrature_is_exact_for_linears() {
        let poly = [[0.0, 0.0], [1.0, 0.2], [0.7, 1.1], [-0.1, 0.6]];
        let area = polygon::signed_area(&poly).abs();
        let (_, c) = polygon::area_centroid(&poly);
        for n in [16, 33] {
            let g = Grid::from_polygon(&poly, n, n).unwrap();
            let f: Vec<f64> = g.centers().iter().map(|p| 1.0 + 2.0 * p[0] - 3.0 * p[1]).collect();
            let exact = area * (1.0 + 2.0 * c[0] - 3.0 * c[1]);
            assert!(g.lost_area() == 0.0);
            assert!((g.integrate(&f) - exact).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn stencils_differentiate_quadratics_exactly() {
        let tri = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let g = Grid::from_polygon(&tri, 24, 24).unwrap();
        let f: Vec<f64> = g.centers().iter().map(|p| p[0] * p[0] + 3.0 * p[0] * p[1] - p[1] * p[1]).collect();
        let fx = g.dx().matvec(&f);
        let fy = g.dy().matvec(&f);
        // acute corners fall back to a linear fit
        let h = g.hx;
        let corner = |p: &Point| tri.iter().any(|v| (p[0] - v[0]).hypot(p[1] - v[1]) < 6.0 * h);
        for (k, p) in g.centers().iter().enumerate().filter(|(_, p)| !corner(p)) {
            assert!((fx[k] - (2.0 * p[0] + 3.0 * p[1])).abs() < 1e-9, "dx at {p:?}");
            assert!((fy[k] - (3.0 * p[0] - 2.0 * p[1])).abs() < 1e-9, "dy at {p:?}");
        }
    }

    #[test]
    fn interpolation_reproduces_linear_functions() {
        let tri = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let g = Grid::from_polygon(&tri, 20, 20).unwrap();
        let f: Vec<f64> = g.centers().iter().map(|p| 1.0 + 2.0 * p[0] - p[1]).collect();
        for p in [[0.3, 0.3], [0.5, 0.5], [0.0, 0.2], [0.99, 0.005]] {
            let w = g.interp_weights(p);
            let v: f64 = w.iter().map(|&(c, a)| a * f[c]).sum();
            assert!((v - (1.0 + 2.0 * p[0] - p[1])).abs() < 1e-12, "{p:?}");
        }
        let b = BoxField::sample(&g, |x, y| (x * y, 2.0 * x - y));
        let (v1, v2) = b.eval([0.0, 1.0]);
        assert!(v1.abs() < 1e-12 && (v2 + 1.0).abs() < 1e-12);
    }
}
