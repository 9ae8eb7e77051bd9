//! Source domains, their grid discretization and the source measure.
//!
//! Two kinds of domain are supported: axis-aligned rectangles in the plane and
//! spherical caps on the unit sphere. Points are stored in ambient
//! coordinates (planar points have `z = 0`); intrinsic two-dimensional
//! quantities are expressed in an orthonormal tangent frame obtained from
//! [`Surface::frame`].

pub mod polygon;

use std::f64::consts::PI;

use nalgebra::{Matrix3x2, Vector2, Vector3};
use rand::Rng;

use crate::error::{Error, Result};
use crate::expr::Expression;

const SPHERE_NORM_TOL: f64 = 1e-12;

/// Ambient surface carrying a domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Surface {
    Plane,
    Sphere,
}

/// A point of the plane or of the unit sphere, in ambient coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point(Vector3<f64>);

impl Point {
    pub fn planar(x: f64, y: f64) -> Self {
        Point(Vector3::new(x, y, 0.0))
    }

    /// Projects a nonzero vector onto the unit sphere.
    pub fn on_sphere(v: [f64; 3]) -> Result<Self> {
        let v = Vector3::from(v);
        let n = v.norm();
        if !n.is_finite() || n == 0.0 {
            return Err(Error::Geometry(format!(
                "cannot place {v:?} on the unit sphere"
            )));
        }
        Ok(Point(v / n))
    }

    pub(crate) fn from_ambient(v: Vector3<f64>) -> Self {
        Point(v)
    }

    pub fn ambient(&self) -> &Vector3<f64> {
        &self.0
    }

    pub fn x(&self) -> f64 {
        self.0.x
    }

    pub fn y(&self) -> f64 {
        self.0.y
    }

    pub fn z(&self) -> f64 {
        self.0.z
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.0 - other.0).norm()
    }

    /// Coordinates as written to files: two for the plane, three on the sphere.
    pub fn coords(&self, surface: Surface) -> Vec<f64> {
        match surface {
            Surface::Plane => vec![self.0.x, self.0.y],
            Surface::Sphere => vec![self.0.x, self.0.y, self.0.z],
        }
    }

    pub fn is_valid_on(&self, surface: Surface) -> bool {
        let finite = self.0.iter().all(|c| c.is_finite());
        match surface {
            Surface::Plane => finite && self.0.z == 0.0,
            Surface::Sphere => finite && (self.0.norm() - 1.0).abs() <= SPHERE_NORM_TOL,
        }
    }
}

impl Surface {
    /// Orthonormal basis of the tangent plane at `p`, as ambient columns.
    pub fn frame(&self, p: &Point) -> Matrix3x2<f64> {
        match self {
            Surface::Plane => Matrix3x2::new(1.0, 0.0, 0.0, 1.0, 0.0, 0.0),
            Surface::Sphere => {
                let n = p.0;
                // least aligned coordinate axis
                let a = if n.x.abs() <= n.y.abs() && n.x.abs() <= n.z.abs() {
                    Vector3::x()
                } else if n.y.abs() <= n.z.abs() {
                    Vector3::y()
                } else {
                    Vector3::z()
                };
                let e1 = (a - n * a.dot(&n)).normalize();
                let e2 = n.cross(&e1);
                Matrix3x2::from_columns(&[e1, e2])
            }
        }
    }

    /// Chart centred at `p` with orthonormal differential at the origin.
    /// On the sphere this is the gnomonic chart `u -> (p + E u)/|p + E u|`.
    pub fn chart(&self, p: &Point, u: &Vector2<f64>) -> Point {
        let q = p.0 + self.frame(p) * u;
        match self {
            Surface::Plane => Point(q),
            Surface::Sphere => Point(q / q.norm()),
        }
    }

    /// Jacobian of [`Surface::chart`] at `u`.
    pub fn chart_jacobian(&self, p: &Point, u: &Vector2<f64>) -> Matrix3x2<f64> {
        let e = self.frame(p);
        match self {
            Surface::Plane => e,
            Surface::Sphere => {
                let q = p.0 + e * u;
                let len = q.norm();
                let r = q / len;
                (nalgebra::Matrix3::identity() - r * r.transpose()) * e / len
            }
        }
    }

    /// Tangent-plane coordinates of `v` at `p` (inverse of the chart differential).
    pub fn to_tangent(&self, p: &Point, v: &Vector3<f64>) -> Vector2<f64> {
        self.frame(p).transpose() * v
    }
}

/// Source domain Ω.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Rectangle { min: [f64; 2], max: [f64; 2] },
    Cap { center: Point, radius: f64 },
}

impl Domain {
    pub fn rectangle(min: [f64; 2], max: [f64; 2]) -> Result<Self> {
        let d = Domain::Rectangle { min, max };
        d.validate()?;
        Ok(d)
    }

    pub fn unit_square() -> Self {
        Domain::Rectangle {
            min: [0.0, 0.0],
            max: [1.0, 1.0],
        }
    }

    pub fn cap(center: [f64; 3], radius: f64) -> Result<Self> {
        let d = Domain::Cap {
            center: Point::on_sphere(center)?,
            radius,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Domain::Rectangle { min, max } => {
                let ok = min.iter().chain(max).all(|c| c.is_finite())
                    && max[0] > min[0]
                    && max[1] > min[1];
                if !ok {
                    return Err(Error::Geometry(format!(
                        "degenerate rectangle {min:?}..{max:?}: sides must be positive and finite"
                    )));
                }
            }
            Domain::Cap { center, radius } => {
                if !center.is_valid_on(Surface::Sphere) {
                    return Err(Error::Geometry("cap center must be a unit vector".into()));
                }
                if !(*radius > 0.0 && *radius < PI / 2.0) {
                    return Err(Error::Geometry(format!(
                        "cap radius {radius} outside (0, pi/2)"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn surface(&self) -> Surface {
        match self {
            Domain::Rectangle { .. } => Surface::Plane,
            Domain::Cap { .. } => Surface::Sphere,
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Domain::Rectangle { min, max } => (max[0] - min[0]) * (max[1] - min[1]),
            Domain::Cap { radius, .. } => 2.0 * PI * (1.0 - radius.cos()),
        }
    }

    pub fn contains(&self, p: &Point, tol: f64) -> bool {
        match self {
            Domain::Rectangle { min, max } => {
                p.x() >= min[0] - tol
                    && p.x() <= max[0] + tol
                    && p.y() >= min[1] - tol
                    && p.y() <= max[1] + tol
            }
            Domain::Cap { center, radius } => angle_between(center, p) <= radius + tol,
        }
    }

    /// Point of the cap at colatitude `theta` and azimuth `phi` around its center.
    fn cap_point(center: &Point, theta: f64, phi: f64) -> Point {
        let e = Surface::Sphere.frame(center);
        let dir = e.column(0) * phi.cos() + e.column(1) * phi.sin();
        Point(center.0 * theta.cos() + dir * theta.sin())
    }

    /// `count` points on ∂Ω in counterclockwise order (rectangle corners included).
    pub fn boundary_samples(&self, count: usize) -> Vec<Point> {
        let count = count.max(8);
        match self {
            Domain::Rectangle { min, max } => {
                let (w, h) = (max[0] - min[0], max[1] - min[1]);
                let per = 2.0 * (w + h);
                let corners = [
                    [min[0], min[1]],
                    [max[0], min[1]],
                    [max[0], max[1]],
                    [min[0], max[1]],
                ];
                let mut out = Vec::with_capacity(count + 4);
                for k in 0..4 {
                    let a = corners[k];
                    let b = corners[(k + 1) % 4];
                    let len = if k % 2 == 0 { w } else { h };
                    let m = ((count as f64 * len / per).round() as usize).max(1);
                    for s in 0..m {
                        let t = s as f64 / m as f64;
                        out.push(Point::planar(
                            a[0] + t * (b[0] - a[0]),
                            a[1] + t * (b[1] - a[1]),
                        ));
                    }
                }
                out
            }
            Domain::Cap { center, radius } => (0..count)
                .map(|k| {
                    let phi = 2.0 * PI * k as f64 / count as f64;
                    Self::cap_point(center, *radius, phi)
                })
                .collect(),
        }
    }

    /// Uniform (area-measure) random point of Ω.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match self {
            Domain::Rectangle { min, max } => Point::planar(
                rng.gen_range(min[0]..max[0]),
                rng.gen_range(min[1]..max[1]),
            ),
            Domain::Cap { center, radius } => {
                let cos_t = rng.gen_range(radius.cos()..1.0);
                let phi = rng.gen_range(0.0..2.0 * PI);
                Self::cap_point(center, cos_t.acos(), phi)
            }
        }
    }

    /// Cell spacing of a resolution-`n` grid: the larger side over `n` for
    /// rectangles, the band width `radius / n` for caps.
    pub fn spacing(&self, n: usize) -> f64 {
        match self {
            Domain::Rectangle { min, max } => (max[0] - min[0]).max(max[1] - min[1]) / n as f64,
            Domain::Cap { radius, .. } => radius / n as f64,
        }
    }

    pub fn center(&self) -> Point {
        match self {
            Domain::Rectangle { min, max } => {
                Point::planar(0.5 * (min[0] + max[0]), 0.5 * (min[1] + max[1]))
            }
            Domain::Cap { center, .. } => *center,
        }
    }
}

/// Great-circle angle between two points of the sphere.
pub fn angle_between(a: &Point, b: &Point) -> f64 {
    // atan2 form stays accurate near 0 and pi
    let cross = a.0.cross(&b.0).norm();
    cross.atan2(a.0.dot(&b.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub center: Point,
    pub volume: f64,
}

/// Midpoint-rule discretization of a domain.
#[derive(Debug, Clone)]
pub struct Grid {
    domain: Domain,
    resolution: usize,
    cells: Vec<Cell>,
    /// Row lengths for raster export; rows are stored consecutively.
    rows: Vec<usize>,
}

/// Builds the quadrature grid. Rectangles get `n x n` uniform cells in
/// row-major order (row = second coordinate). Caps are cut into `n` bands of
/// equal angular width, each band split into azimuthal cells of equal area
/// whose count follows the band circumference, so cells stay roughly square.
/// Cap cell volumes are the exact spherical areas.
pub fn build_grid(domain: &Domain, resolution: usize) -> Result<Grid> {
    domain.validate()?;
    if resolution < 2 {
        return Err(Error::Geometry(format!(
            "grid resolution must be at least 2, got {resolution}"
        )));
    }
    let n = resolution;
    let (cells, rows) = match domain {
        Domain::Rectangle { min, max } => {
            let hx = (max[0] - min[0]) / n as f64;
            let hy = (max[1] - min[1]) / n as f64;
            let mut cells = Vec::with_capacity(n * n);
            for r in 0..n {
                let cy = min[1] + (r as f64 + 0.5) * hy;
                for c in 0..n {
                    let cx = min[0] + (c as f64 + 0.5) * hx;
                    cells.push(Cell {
                        center: Point::planar(cx, cy),
                        volume: hx * hy,
                    });
                }
            }
            (cells, vec![n; n])
        }
        Domain::Cap { center, radius } => {
            let dtheta = radius / n as f64;
            let mut cells = Vec::new();
            let mut rows = Vec::with_capacity(n);
            for b in 0..n {
                let (t0, t1) = (b as f64 * dtheta, (b + 1) as f64 * dtheta);
                let (c0, c1) = (t0.cos(), t1.cos());
                let band_area = 2.0 * PI * (c0 - c1);
                let mid = 0.5 * (t0 + t1);
                let m = ((2.0 * PI * mid.sin() / dtheta).round() as usize).max(3);
                // colatitude splitting the band into two equal areas
                let tc = (0.5 * (c0 + c1)).acos();
                for k in 0..m {
                    let phi = 2.0 * PI * (k as f64 + 0.5) / m as f64;
                    cells.push(Cell {
                        center: Domain::cap_point(center, tc, phi),
                        volume: band_area / m as f64,
                    });
                }
                rows.push(m);
            }
            (cells, rows)
        }
    };
    Ok(Grid {
        domain: domain.clone(),
        resolution,
        cells,
        rows,
    })
}

impl Grid {
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn spacing(&self) -> f64 {
        self.domain.spacing(self.resolution)
    }

    pub fn total_volume(&self) -> f64 {
        self.cells.iter().map(|c| c.volume).sum()
    }

    pub fn centers(&self) -> impl Iterator<Item = &Point> {
        self.cells.iter().map(|c| &c.center)
    }

    /// Boundary sample count used for suprema over Ω.
    pub fn boundary_sample_count(&self) -> usize {
        (8 * self.resolution).max(400)
    }

    /// Grid centers followed by a dense boundary sampling; the set over
    /// which suprema and infima over Ω are approximated.
    pub fn sup_samples(&self) -> Vec<Point> {
        let mut pts: Vec<Point> = self.centers().copied().collect();
        pts.extend(self.domain.boundary_samples(self.boundary_sample_count()));
        pts
    }
}

/// Density input: a closed-form expression of `x1, x2[, x3]` or one value
/// per grid cell in grid order.
#[derive(Debug, Clone)]
pub enum Density {
    Expression(Expression),
    Tabulated(Vec<f64>),
}

impl Density {
    pub fn uniform() -> Self {
        Density::Expression(Expression::source("1").expect("constant parses"))
    }
}

/// μ = I dVol discretized on a grid and normalized to total mass one.
#[derive(Debug, Clone)]
pub struct SourceMeasure {
    grid: Grid,
    density: Vec<f64>,
    cell_mass: Vec<f64>,
    scale: f64,
    total_before: f64,
    sup_density: f64,
}

/// Evaluates the density on the grid, checks positivity, and rescales it to
/// unit total mass.
pub fn normalize_measure(grid: Grid, density: &Density) -> Result<SourceMeasure> {
    let raw: Vec<f64> = match density {
        Density::Expression(e) => grid
            .cells
            .iter()
            .map(|c| e.eval_source(c.center.ambient()))
            .collect::<Result<_>>()?,
        Density::Tabulated(v) => {
            if v.len() != grid.len() {
                return Err(Error::Geometry(format!(
                    "tabulated density has {} values but the grid has {} cells",
                    v.len(),
                    grid.len()
                )));
            }
            v.clone()
        }
    };
    if let Some((j, v)) = raw
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.is_finite() && **v > 0.0))
    {
        let c = grid.cells[j].center;
        return Err(Error::Geometry(format!(
            "density must be strictly positive; got {v} at cell {j} centred at {:?}",
            c.coords(grid.domain.surface())
        )));
    }
    let total_before: f64 = raw.iter().zip(&grid.cells).map(|(i, c)| i * c.volume).sum();
    let scale = 1.0 / total_before;
    let values: Vec<f64> = raw.iter().map(|v| v * scale).collect();
    let cell_mass: Vec<f64> = values
        .iter()
        .zip(&grid.cells)
        .map(|(i, c)| i * c.volume)
        .collect();

    let mut sup = values.iter().cloned().fold(0.0, f64::max);
    if let Density::Expression(e) = density {
        for p in grid.domain.boundary_samples(grid.boundary_sample_count()) {
            let v = e.eval_source(p.ambient())? * scale;
            if v.is_finite() {
                sup = sup.max(v);
            }
        }
    }
    Ok(SourceMeasure {
        grid,
        density: values,
        cell_mass,
        scale,
        total_before,
        sup_density: sup,
    })
}

impl SourceMeasure {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Normalized density at each cell center.
    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// `I * volume` per cell.
    pub fn cell_masses(&self) -> &[f64] {
        &self.cell_mass
    }

    /// Factor applied to the raw density (1 / raw total).
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Raw total mass before normalization.
    pub fn total_before(&self) -> f64 {
        self.total_before
    }

    pub fn total(&self) -> f64 {
        self.cell_mass.iter().sum()
    }

    /// sup I over cell centers (and boundary samples for expression densities).
    pub fn sup_density(&self) -> f64 {
        self.sup_density
    }

    /// Mass of the cells whose center satisfies `indicator`.
    pub fn integrate_indicator<F: Fn(&Point) -> bool>(&self, indicator: F) -> f64 {
        self.grid
            .cells
            .iter()
            .zip(&self.cell_mass)
            .filter(|(c, _)| indicator(&c.center))
            .map(|(_, m)| m)
            .sum()
    }

    /// Mass of the cells flagged in `mask` (grid order).
    pub fn integrate_mask(&self, mask: &[bool]) -> f64 {
        assert_eq!(mask.len(), self.cell_mass.len(), "mask length must match grid");
        mask.iter()
            .zip(&self.cell_mass)
            .filter(|(b, _)| **b)
            .map(|(_, m)| m)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_measure(n: usize, density: &str) -> SourceMeasure {
        let grid = build_grid(&Domain::unit_square(), n).unwrap();
        normalize_measure(grid, &Density::Expression(Expression::source(density).unwrap()))
            .unwrap()
    }

    #[test]
    fn unit_square_two_by_two() {
        let g = build_grid(&Domain::unit_square(), 2).unwrap();
        assert_eq!(g.len(), 4);
        let expect = [(0.25, 0.25), (0.75, 0.25), (0.25, 0.75), (0.75, 0.75)];
        for (c, (x, y)) in g.cells().iter().zip(expect) {
            assert_eq!(c.volume, 0.25);
            assert_eq!((c.center.x(), c.center.y()), (x, y));
        }
    }

    #[test]
    fn unit_square_volumes_partition() {
        let g = build_grid(&Domain::unit_square(), 100).unwrap();
        assert!((g.total_volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cap_area_matches_closed_form() {
        let d = Domain::cap([0.0, 0.0, 1.0], PI / 6.0).unwrap();
        let g = build_grid(&d, 32).unwrap();
        let exact = 2.0 * PI * (1.0 - (PI / 6.0).cos());
        assert!((g.total_volume() - exact).abs() < 1e-6);
        for c in g.cells() {
            assert!(d.contains(&c.center, 1e-12));
            assert!(c.center.is_valid_on(Surface::Sphere));
        }
    }

    #[test]
    fn cap_quadrature_error_decreases_under_refinement() {
        // ∫_cap z² dA around the north pole = 2π(1 - cos³R)/3
        let r = PI / 5.0;
        let d = Domain::cap([0.0, 0.0, 1.0], r).unwrap();
        let exact = 2.0 * PI * (1.0 - r.cos().powi(3)) / 3.0;
        let mut prev = f64::INFINITY;
        for n in [8, 16, 32, 64] {
            let g = build_grid(&d, n).unwrap();
            let q: f64 = g.cells().iter().map(|c| c.center.z().powi(2) * c.volume).sum();
            let err = (q - exact).abs();
            assert!(err <= 1.1 * prev, "n={n}: {err} vs {prev}");
            prev = err;
        }
        assert!(prev < 1e-4);
    }

    #[test]
    fn degenerate_domains_rejected() {
        assert!(Domain::rectangle([0.0, 0.0], [0.0, 1.0]).is_err());
        assert!(Domain::cap([0.0, 0.0, 1.0], 0.0).is_err());
        assert!(Domain::cap([0.0, 0.0, 1.0], 2.0).is_err());
        assert!(build_grid(&Domain::unit_square(), 1).is_err());
    }

    #[test]
    fn normalization_constant_density() {
        let m = unit_measure(10, "1");
        assert!((m.scale() - 1.0).abs() < 1e-12);
        let m = unit_measure(10, "3");
        assert!(m.density().iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!((m.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalization_linear_density_total() {
        let m = unit_measure(200, "1 + x1");
        assert!((m.total_before() - 1.5).abs() < 1e-4);
    }

    #[test]
    fn nonpositive_density_rejected() {
        let grid = build_grid(&Domain::unit_square(), 10).unwrap();
        let e = Density::Expression(Expression::source("x1 - 0.5").unwrap());
        let err = normalize_measure(grid, &e).unwrap_err().to_string();
        assert!(err.contains("strictly positive"), "{err}");
    }

    #[test]
    fn tabulated_density_length_checked() {
        let grid = build_grid(&Domain::unit_square(), 4).unwrap();
        assert!(normalize_measure(grid.clone(), &Density::Tabulated(vec![1.0; 15])).is_err());
        let m = normalize_measure(grid, &Density::Tabulated(vec![2.0; 16])).unwrap();
        assert!((m.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn indicator_integrals() {
        let m = unit_measure(40, "1");
        assert!((m.integrate_indicator(|_| true) - 1.0).abs() < 1e-12);
        assert_eq!(m.integrate_indicator(|_| false), 0.0);
    }

    #[test]
    fn half_slab_converges_at_first_order() {
        for n in [50, 100, 200, 400, 77, 333] {
            let m = unit_measure(n, "1");
            let h = 1.0 / n as f64;
            let v = m.integrate_indicator(|p| p.x() <= 0.75);
            assert!((v - 0.75).abs() <= h, "n={n}: {v}");
        }
    }

    #[test]
    fn cap_samples_inside_and_boundary_on_rim() {
        let d = Domain::cap([1.0, 1.0, 1.0], 0.4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            assert!(d.contains(&d.sample(&mut rng), 1e-12));
        }
        let Domain::Cap { center, .. } = &d else { unreachable!() };
        for p in d.boundary_samples(64) {
            assert!((angle_between(center, &p) - 0.4).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_chart_has_orthonormal_differential() {
        let p = Point::on_sphere([0.3, -0.5, 0.8]).unwrap();
        let e = Surface::Sphere.frame(&p);
        assert!((e.transpose() * e - nalgebra::Matrix2::identity()).norm() < 1e-14);
        assert!((e.transpose() * p.ambient()).norm() < 1e-14);
        // finite-difference check of the chart jacobian away from the origin
        let u = Vector2::new(0.1, -0.2);
        let j = Surface::Sphere.chart_jacobian(&p, &u);
        let h = 1e-6;
        for k in 0..2 {
            let mut du = Vector2::zeros();
            du[k] = h;
            let fd = (Surface::Sphere.chart(&p, &(u + du)).ambient()
                - Surface::Sphere.chart(&p, &(u - du)).ambient())
                / (2.0 * h);
            assert!((fd - j.column(k)).norm() < 1e-8);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn partition_additivity(cut_x in 0.0f64..1.0, cut_y in 0.0f64..1.0) {
                let m = unit_measure(30, "1 + x1*x2");
                let a = |p: &Point| p.x() < cut_x;
                let b = |p: &Point| p.x() >= cut_x && p.y() < cut_y;
                let union = m.integrate_indicator(|p| a(p) || b(p));
                let sum = m.integrate_indicator(a) + m.integrate_indicator(b);
                // exact up to the rounding of reordered summation
                prop_assert!((union - sum).abs() <= 1e-14);
            }
        }
    }
}
