//! Built-in cost models.

use nalgebra::{Matrix3, Vector3};

use super::{CostFunction, Covector};
use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::geometry::{Point, Surface};

fn lift(p: &Covector) -> Vector3<f64> {
    Vector3::new(p.x, p.y, 0.0)
}

/// `½|x - x̄|²` on the plane. Its MTW tensor vanishes identically.
#[derive(Debug, Clone, Copy)]
pub struct Quadratic;

impl CostFunction for Quadratic {
    fn name(&self) -> String {
        "quadratic".into()
    }

    fn surface(&self) -> Surface {
        Surface::Plane
    }

    fn value(&self, x: &Point, y: &Point) -> Result<f64> {
        Ok(0.5 * (x.ambient() - y.ambient()).norm_squared())
    }

    fn grad_x(&self, x: &Point, y: &Point) -> Result<Vector3<f64>> {
        Ok(x.ambient() - y.ambient())
    }

    fn grad_y(&self, x: &Point, y: &Point) -> Result<Vector3<f64>> {
        Ok(y.ambient() - x.ambient())
    }

    fn mixed(&self, _x: &Point, _y: &Point) -> Result<Matrix3<f64>> {
        Ok(-Matrix3::identity())
    }

    fn c_exp_source_closed(&self, x: &Point, p: &Covector) -> Option<Point> {
        Some(Point::from_ambient(x.ambient() + lift(p)))
    }

    fn c_exp_target_closed(&self, y: &Point, p: &Covector) -> Option<Point> {
        Some(Point::from_ambient(y.ambient() + lift(p)))
    }
}

/// `-log|x - x̄|` on separated planar domains.
#[derive(Debug, Clone, Copy)]
pub struct LogDistance {
    /// Minimal admissible distance between source and target points.
    pub s_min: f64,
}

impl LogDistance {
    fn offset(x: &Point, y: &Point) -> Result<(Vector3<f64>, f64)> {
        let r = x.ambient() - y.ambient();
        let q = r.norm_squared();
        if !(q > 0.0) {
            return Err(Error::Cost(format!(
                "log cost undefined at coincident points {:?}",
                x.coords(Surface::Plane)
            )));
        }
        Ok((r, q))
    }
}

impl CostFunction for LogDistance {
    fn name(&self) -> String {
        "log".into()
    }

    fn surface(&self) -> Surface {
        Surface::Plane
    }

    fn value(&self, x: &Point, y: &Point) -> Result<f64> {
        let (_, q) = Self::offset(x, y)?;
        Ok(-0.5 * q.ln())
    }

    fn grad_x(&self, x: &Point, y: &Point) -> Result<Vector3<f64>> {
        let (r, q) = Self::offset(x, y)?;
        Ok(-r / q)
    }

    fn grad_y(&self, x: &Point, y: &Point) -> Result<Vector3<f64>> {
        let (r, q) = Self::offset(x, y)?;
        Ok(r / q)
    }

    fn mixed(&self, x: &Point, y: &Point) -> Result<Matrix3<f64>> {
        let (r, q) = Self::offset(x, y)?;
        Ok(Matrix3::identity() / q - r * r.transpose() * (2.0 / (q * q)))
    }

    fn admissible(&self, x: &Point, y: &Point) -> bool {
        x.distance(y) >= self.s_min
    }

    fn c_exp_source_closed(&self, x: &Point, p: &Covector) -> Option<Point> {
        // -Dc = r/|r|², so r = p̄/|p̄|²
        let q = p.norm_squared();
        (q > 0.0).then(|| Point::from_ambient(x.ambient() - lift(p) / q))
    }

    fn c_exp_target_closed(&self, y: &Point, p: &Covector) -> Option<Point> {
        // -D̄c = -r/|r|², so r = -p/|p|²
        let q = p.norm_squared();
        (q > 0.0).then(|| Point::from_ambient(y.ambient() - lift(p) / q))
    }
}

/// `-log(1 - ⟨x, x̄⟩)` on the unit sphere (far-field reflector cost).
#[derive(Debug, Clone, Copy)]
pub struct Reflector {
    /// Admissible pairs satisfy `⟨x, x̄⟩ ≤ 1 - s_min`.
    pub s_min: f64,
}

impl Reflector {
    fn gap(x: &Point, y: &Point) -> Result<f64> {
        let g = 1.0 - x.ambient().dot(y.ambient());
        if !(g > 0.0) {
            return Err(Error::Cost(format!(
                "reflector cost undefined: 1 - <x, x̄> = {g} <= 0"
            )));
        }
        Ok(g)
    }

    /// Point at angle `2 atan(1/|p|)` from `base`, in direction `-p`.
    fn exp_from(base: &Point, p: &Covector) -> Point {
        let e = Surface::Sphere.frame(base);
        let n = p.norm();
        let theta = 2.0 * 1.0f64.atan2(n);
        let dir = if n > 0.0 {
            -(e * p) / n
        } else {
            e.column(0).into_owned()
        };
        Point::from_ambient(base.ambient() * theta.cos() + dir * theta.sin())
    }
}

impl CostFunction for Reflector {
    fn name(&self) -> String {
        "reflector".into()
    }

    fn surface(&self) -> Surface {
        Surface::Sphere
    }

    fn value(&self, x: &Point, y: &Point) -> Result<f64> {
        Ok(-Self::gap(x, y)?.ln())
    }

    fn grad_x(&self, x: &Point, y: &Point) -> Result<Vector3<f64>> {
        Ok(y.ambient() / Self::gap(x, y)?)
    }

    fn grad_y(&self, x: &Point, y: &Point) -> Result<Vector3<f64>> {
        Ok(x.ambient() / Self::gap(x, y)?)
    }

    fn mixed(&self, x: &Point, y: &Point) -> Result<Matrix3<f64>> {
        let g = Self::gap(x, y)?;
        Ok(Matrix3::identity() / g + y.ambient() * x.ambient().transpose() / (g * g))
    }

    fn admissible(&self, x: &Point, y: &Point) -> bool {
        x.ambient().dot(y.ambient()) <= 1.0 - self.s_min
    }

    fn c_exp_source_closed(&self, x: &Point, p: &Covector) -> Option<Point> {
        Some(Self::exp_from(x, p))
    }

    fn c_exp_target_closed(&self, y: &Point, p: &Covector) -> Option<Point> {
        Some(Self::exp_from(y, p))
    }
}

/// A user cost given as an expression of `x1, x2[, x3]` and `y1, y2[, y3]`.
/// Derivatives are taken by central differences.
#[derive(Debug, Clone)]
pub struct ExpressionCost {
    expr: Expression,
    surface: Surface,
}

const GRAD_STEP: f64 = 1e-6;
const MIXED_STEP: f64 = 1e-4;

impl ExpressionCost {
    pub fn new(text: &str, surface: Surface) -> Result<Self> {
        Ok(Self {
            expr: Expression::pair(text)?,
            surface,
        })
    }

    pub fn planar(text: &str) -> Result<Self> {
        Self::new(text, Surface::Plane)
    }

    pub fn spherical(text: &str) -> Result<Self> {
        Self::new(text, Surface::Sphere)
    }

    fn eval(&self, x: &Vector3<f64>, y: &Vector3<f64>) -> Result<f64> {
        let v = self.expr.eval_pair(x, y)?;
        if !v.is_finite() {
            return Err(Error::Cost(format!(
                "cost expression {:?} is not finite at x={x:?}, y={y:?}",
                self.expr.text()
            )));
        }
        Ok(v)
    }

    fn dims(&self) -> usize {
        match self.surface {
            Surface::Plane => 2,
            Surface::Sphere => 3,
        }
    }
}

impl CostFunction for ExpressionCost {
    fn name(&self) -> String {
        format!("expression({})", self.expr.text())
    }

    fn surface(&self) -> Surface {
        self.surface
    }

    fn value(&self, x: &Point, y: &Point) -> Result<f64> {
        self.eval(x.ambient(), y.ambient())
    }

    fn grad_x(&self, x: &Point, y: &Point) -> Result<Vector3<f64>> {
        let mut g = Vector3::zeros();
        for a in 0..self.dims() {
            let mut e = Vector3::zeros();
            e[a] = GRAD_STEP;
            g[a] = (self.eval(&(x.ambient() + e), y.ambient())?
                - self.eval(&(x.ambient() - e), y.ambient())?)
                / (2.0 * GRAD_STEP);
        }
        Ok(g)
    }

    fn grad_y(&self, x: &Point, y: &Point) -> Result<Vector3<f64>> {
        let mut g = Vector3::zeros();
        for a in 0..self.dims() {
            let mut e = Vector3::zeros();
            e[a] = GRAD_STEP;
            g[a] = (self.eval(x.ambient(), &(y.ambient() + e))?
                - self.eval(x.ambient(), &(y.ambient() - e))?)
                / (2.0 * GRAD_STEP);
        }
        Ok(g)
    }

    fn mixed(&self, x: &Point, y: &Point) -> Result<Matrix3<f64>> {
        let h = MIXED_STEP;
        let mut m = Matrix3::zeros();
        for a in 0..self.dims() {
            let mut ea = Vector3::zeros();
            ea[a] = h;
            for b in 0..self.dims() {
                let mut eb = Vector3::zeros();
                eb[b] = h;
                let (xa, xb) = (x.ambient() + ea, x.ambient() - ea);
                let (ya, yb) = (y.ambient() + eb, y.ambient() - eb);
                m[(a, b)] = (self.eval(&xa, &ya)? - self.eval(&xa, &yb)? - self.eval(&xb, &ya)?
                    + self.eval(&xb, &yb)?)
                    / (4.0 * h * h);
            }
        }
        Ok(m)
    }

    fn mtw_step(&self) -> f64 {
        1e-2
    }
}
