//! Planar polygon and polyline helpers. Polygons are vertex lists with an
//! implicit closing edge.

use super::Point;

/// Shoelace signed area; positive for counterclockwise vertex order.
pub fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    let mut s = crate::numeric::CompensatedSum::new();
    for k in 0..n {
        let [x0, y0] = poly[k];
        let [x1, y1] = poly[(k + 1) % n];
        s.add(x0 * y1 - x1 * y0);
    }
    0.5 * s.value()
}

/// Even-odd crossing test.
pub fn contains(poly: &[Point], p: Point) -> bool {
    let [px, py] = p;
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let [xi, yi] = poly[i];
        let [xj, yj] = poly[j];
        if (yi > py) != (yj > py) {
            let xc = xj + (py - yj) * (xi - xj) / (yi - yj);
            if px < xc {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

pub fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = [a[0] + t * d[0], a[1] + t * d[1]];
    (p[0] - q[0]).hypot(p[1] - q[1])
}

/// Distance from `p` to the closed boundary of `poly`.
pub fn boundary_distance(poly: &[Point], p: Point) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|k| segment_distance(p, poly[k], poly[(k + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

/// Closed-segment intersection test (touching counts).
pub fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0)) && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0)) {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

/// First pair of non-adjacent edges that intersect, if any.
pub fn first_self_intersection(poly: &[Point]) -> Option<(usize, usize)> {
    let n = poly.len();
    if n < 4 {
        return None;
    }
    let edge = |k: usize| (poly[k], poly[(k + 1) % n]);
    let bbox = |k: usize| {
        let (a, b) = edge(k);
        [a[0].min(b[0]), a[0].max(b[0]), a[1].min(b[1]), a[1].max(b[1])]
    };
    let boxes: Vec<[f64; 4]> = (0..n).map(bbox).collect();
    for i in 0..n {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (bi, bj) = (boxes[i], boxes[j]);
            if bi[1] < bj[0] || bj[1] < bi[0] || bi[3] < bj[2] || bj[3] < bi[2] {
                continue;
            }
            let (a, b) = edge(i);
            let (c, d) = edge(j);
            if segments_intersect(a, b, c, d) {
                return Some((i, j));
            }
        }
    }
    None
}

/// Subdivide each segment uniformly so no piece is longer than `h`.
pub fn resample(line: &[Point], h: f64) -> Vec<Point> {
    let mut out = Vec::with_capacity(line.len());
    if let Some(&first) = line.first() {
        out.push(first);
    }
    for w in line.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        if len == 0.0 {
            continue;
        }
        let n = ((len / h).ceil() as usize).max(1);
        for k in 1..=n {
            let t = k as f64 / n as f64;
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

pub fn polyline_length(line: &[Point]) -> f64 {
    line.windows(2).map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1])).sum()
}

/// Area of `poly` inside the axis-aligned box `[x0, x1] × [y0, y1]`
/// (Sutherland–Hodgman clipping).
pub fn clipped_area(poly: &[Point], x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    area_centroid(&clip_to_box(poly, x0, x1, y0, y1)).0
}

/// Sutherland–Hodgman clip of `poly` against the box.
pub fn clip_to_box(poly: &[Point], x0: f64, x1: f64, y0: f64, y1: f64) -> Vec<Point> {
    let mut cur: Vec<Point> = poly.to_vec();
    // each half-plane is (axis, bound, keep_greater)
    for (axis, bound, greater) in [(0, x0, true), (0, x1, false), (1, y0, true), (1, y1, false)] {
        if cur.is_empty() {
            break;
        }
        let inside = |p: &Point| if greater { p[axis] >= bound } else { p[axis] <= bound };
        let mut next = Vec::with_capacity(cur.len() + 4);
        let n = cur.len();
        for k in 0..n {
            let a = cur[k];
            let b = cur[(k + 1) % n];
            let (ia, ib) = (inside(&a), inside(&b));
            if ia {
                next.push(a);
            }
            if ia != ib {
                let t = (bound - a[axis]) / (b[axis] - a[axis]);
                let mut p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                p[axis] = bound;
                next.push(p);
            }
        }
        cur = next;
    }
    cur
}

/// Unsigned area and centroid; `(0, [0, 0])` for degenerate input.
pub fn area_centroid(poly: &[Point]) -> (f64, Point) {
    let n = poly.len();
    if n < 3 {
        return (0.0, [0.0, 0.0]);
    }
    // shift to the first vertex for accuracy on small cells
    let o = poly[0];
    let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for k in 0..n {
        let (x0, y0) = (poly[k][0] - o[0], poly[k][1] - o[1]);
        let (x1, y1) = (poly[(k + 1) % n][0] - o[0], poly[(k + 1) % n][1] - o[1]);
        let c = x0 * y1 - x1 * y0;
        a += c;
        cx += (x0 + x1) * c;
        cy += (y0 + y1) * c;
    }
    if a == 0.0 {
        return (0.0, [0.0, 0.0]);
    }
    (0.5 * a.abs(), [o[0] + cx / (3.0 * a), o[1] + cy / (3.0 * a)])
}
