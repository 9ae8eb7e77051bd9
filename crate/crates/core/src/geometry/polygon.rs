//! Planar polygon utilities used on cotangent-coordinate images.

use nalgebra::Vector2;

pub type Vec2 = Vector2<f64>;

fn cross(o: &Vec2, a: &Vec2, b: &Vec2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Convex hull by Andrew's monotone chain, counterclockwise, without
/// collinear points.
pub fn convex_hull(points: &[Vec2]) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Vec2> = Vec::with_capacity(2 * pts.len());
    for p in pts.iter() {
        while hull.len() >= 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(*p);
    }
    let lower = hull.len() + 1;
    for p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0
        {
            hull.pop();
        }
        hull.push(*p);
    }
    hull.pop();
    hull
}

/// Perimeter of a closed polygon (a segment counts twice, a point zero).
pub fn perimeter(poly: &[Vec2]) -> f64 {
    if poly.len() < 2 {
        return 0.0;
    }
    (0..poly.len())
        .map(|k| (poly[(k + 1) % poly.len()] - poly[k]).norm())
        .sum()
}

/// Tests whether the closed polygon traced by `poly` (in order) is convex:
/// every turn has the same sign, turns smaller than `rel_tol * |e1| |e2|`
/// count as straight, and the boundary winds exactly once.
pub fn is_convex_polygon(poly: &[Vec2], rel_tol: f64) -> bool {
    let n = poly.len();
    if n < 3 {
        return true;
    }
    let mut sign = 0.0f64;
    let mut turning = 0.0f64;
    for k in 0..n {
        let a = poly[k];
        let b = poly[(k + 1) % n];
        let c = poly[(k + 2) % n];
        let e1 = b - a;
        let e2 = c - b;
        if e1.norm() == 0.0 || e2.norm() == 0.0 {
            continue;
        }
        let z = e1.x * e2.y - e1.y * e2.x;
        turning += z.atan2(e1.dot(&e2));
        if z.abs() <= rel_tol * e1.norm() * e2.norm() {
            continue;
        }
        if sign == 0.0 {
            sign = z.signum();
        } else if z.signum() != sign {
            return false;
        }
    }
    (turning.abs() - std::f64::consts::TAU).abs() < 1e-6
}

/// Point-in-convex-polygon for a counterclockwise polygon, with absolute tolerance.
pub fn convex_contains(poly: &[Vec2], p: &Vec2, tol: f64) -> bool {
    let n = poly.len();
    match n {
        0 => false,
        1 => (poly[0] - p).norm() <= tol,
        2 => {
            let d = poly[1] - poly[0];
            let t = ((p - poly[0]).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
            (poly[0] + d * t - p).norm() <= tol
        }
        _ => (0..n).all(|k| {
            let a = poly[k];
            let b = poly[(k + 1) % n];
            let e = b - a;
            let z = e.x * (p.y - a.y) - e.y * (p.x - a.x);
            z >= -tol * e.norm()
        }),
    }
}
