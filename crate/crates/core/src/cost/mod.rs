//! Cost functions `c(x, x̄)` and the derived first-order geometry.
//!
//! A [`CostFunction`] supplies values and *ambient* derivatives. [`CostModel`]
//! turns them into intrinsic objects expressed in the orthonormal tangent
//! frames of [`Surface::frame`]:
//!
//! * `Dc(x, x̄)` and `D̄c(x, x̄)`: covectors at `x` and `x̄`,
//! * `-DD̄c(x, x̄)`: the 2x2 cross matrix, rows indexed by the source frame,
//! * the c-exponential maps inverting `x̄ ↦ -Dc(x, x̄)` and `x ↦ -D̄c(x, x̄)`.

pub mod checks;
pub mod models;

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{Point, Surface};

pub use models::{ExpressionCost, LogDistance, Quadratic, Reflector};

pub type Covector = Vector2<f64>;

const CEXP_MAX_ITER: usize = 50;
const CEXP_RESIDUAL: f64 = 1e-9;
/// Cross matrices with a larger condition number make MTW samples unreliable.
pub const MAX_CROSS_CONDITION: f64 = 1e10;

/// Value and ambient derivatives of a cost.
pub trait CostFunction: Send + Sync + Debug {
    fn name(&self) -> String;

    fn surface(&self) -> Surface;

    fn value(&self, x: &Point, y: &Point) -> Result<f64>;

    /// Ambient gradient in the source slot.
    fn grad_x(&self, x: &Point, y: &Point) -> Result<Vector3<f64>>;

    /// Ambient gradient in the target slot.
    fn grad_y(&self, x: &Point, y: &Point) -> Result<Vector3<f64>>;

    /// Ambient mixed Hessian, `H[a][b] = ∂²c / ∂x_a ∂y_b`.
    fn mixed(&self, x: &Point, y: &Point) -> Result<Matrix3<f64>>;

    /// Whether `(x, y)` respects the model's separation requirement.
    fn admissible(&self, _x: &Point, _y: &Point) -> bool {
        true
    }

    /// Closed-form `cExp_x(p̄)` when the model has one.
    fn c_exp_source_closed(&self, _x: &Point, _p: &Covector) -> Option<Point> {
        None
    }

    /// Closed-form `cExp_x̄(p)` when the model has one.
    fn c_exp_target_closed(&self, _y: &Point, _p: &Covector) -> Option<Point> {
        None
    }

    /// Default step for the finite-difference MTW evaluation.
    fn mtw_step(&self) -> f64 {
        1e-3
    }
}

/// One MTW contraction sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MtwValue {
    pub value: f64,
    pub cross_condition: f64,
    pub reliable: bool,
}

/// Shareable handle on a cost with the intrinsic operations built on top.
#[derive(Debug, Clone)]
pub struct CostModel {
    inner: Arc<dyn CostFunction>,
    mtw_step: f64,
}

impl CostModel {
    pub fn new<C: CostFunction + 'static>(cost: C) -> Self {
        let mtw_step = cost.mtw_step();
        Self {
            inner: Arc::new(cost),
            mtw_step,
        }
    }

    pub fn quadratic() -> Self {
        Self::new(Quadratic)
    }

    pub fn log_distance(s_min: f64) -> Self {
        Self::new(LogDistance { s_min })
    }

    pub fn reflector(s_min: f64) -> Self {
        Self::new(Reflector { s_min })
    }

    pub fn with_mtw_step(mut self, step: f64) -> Self {
        self.mtw_step = step;
        self
    }

    pub fn name(&self) -> String {
        self.inner.name()
    }

    pub fn surface(&self) -> Surface {
        self.inner.surface()
    }

    pub fn mtw_step(&self) -> f64 {
        self.mtw_step
    }

    pub fn function(&self) -> &dyn CostFunction {
        self.inner.as_ref()
    }

    pub fn admissible(&self, x: &Point, y: &Point) -> bool {
        self.inner.admissible(x, y)
    }

    pub fn evaluate(&self, x: &Point, y: &Point) -> Result<f64> {
        self.inner.value(x, y)
    }

    /// `Dc(x, x̄)` in the frame at `x`.
    pub fn dx(&self, x: &Point, y: &Point) -> Result<Covector> {
        let s = self.surface();
        Ok(s.to_tangent(x, &self.inner.grad_x(x, y)?))
    }

    /// `D̄c(x, x̄)` in the frame at `x̄`.
    pub fn dy(&self, x: &Point, y: &Point) -> Result<Covector> {
        let s = self.surface();
        Ok(s.to_tangent(y, &self.inner.grad_y(x, y)?))
    }

    /// `-DD̄c(x, x̄)` in the frames at `x` (rows) and `x̄` (columns).
    pub fn cross(&self, x: &Point, y: &Point) -> Result<Matrix2<f64>> {
        Ok(-self.mixed_in_charts(x, y, &Vector2::zeros(), &Vector2::zeros())?)
    }

    /// `∂²/∂u∂v c(chart_x(u), chart_x̄(v))`.
    pub fn mixed_in_charts(
        &self,
        x: &Point,
        y: &Point,
        u: &Vector2<f64>,
        v: &Vector2<f64>,
    ) -> Result<Matrix2<f64>> {
        let s = self.surface();
        let xu = s.chart(x, u);
        let yv = s.chart(y, v);
        let h = self.inner.mixed(&xu, &yv)?;
        let jx = s.chart_jacobian(x, u);
        let jy = s.chart_jacobian(y, v);
        Ok(jx.transpose() * h * jy)
    }

    /// `cExp_x(p̄)`: the target point with `-Dc(x, x̄) = p̄`. Uses the model's
    /// closed form when available, Newton iteration from `guess` otherwise.
    pub fn c_exp_source(&self, x: &Point, p: &Covector, guess: &Point) -> Result<Point> {
        let y = match self.inner.c_exp_source_closed(x, p) {
            Some(y) => y,
            None => return self.c_exp_source_newton(x, p, guess),
        };
        let r = (-self.dx(x, &y)? - p).norm();
        if r > CEXP_RESIDUAL * p.norm().max(1.0) {
            return Err(Error::CExp(format!(
                "closed form residual {r:e} exceeds tolerance; p̄ outside admissible cotangent image"
            )));
        }
        Ok(y)
    }

    /// `cExp_x̄(p)`: the source point with `-D̄c(x, x̄) = p`.
    pub fn c_exp_target(&self, y: &Point, p: &Covector, guess: &Point) -> Result<Point> {
        let x = match self.inner.c_exp_target_closed(y, p) {
            Some(x) => x,
            None => return self.c_exp_target_newton(y, p, guess),
        };
        let r = (-self.dy(&x, y)? - p).norm();
        if r > CEXP_RESIDUAL * p.norm().max(1.0) {
            return Err(Error::CExp(format!(
                "closed form residual {r:e} exceeds tolerance; p outside admissible cotangent image"
            )));
        }
        Ok(x)
    }

    /// Newton solve of `-Dc(x, x̄) = p̄` in charts re-centred at each iterate.
    pub fn c_exp_source_newton(&self, x: &Point, p: &Covector, guess: &Point) -> Result<Point> {
        newton(
            *guess,
            p,
            self.surface(),
            |y| Ok(-self.dx(x, y)?),
            |y| self.cross(x, y),
            "p̄",
        )
    }

    /// Newton solve of `-D̄c(x, x̄) = p`.
    pub fn c_exp_target_newton(&self, y: &Point, p: &Covector, guess: &Point) -> Result<Point> {
        newton(
            *guess,
            p,
            self.surface(),
            |x| Ok(-self.dy(x, y)?),
            |x| Ok(self.cross(x, y)?.transpose()),
            "p",
        )
    }

    /// `[E]_x̄ = -D̄c(E, x̄)` pointwise.
    pub fn cotangent_coords(&self, points: &[Point], y: &Point) -> Result<Vec<Covector>> {
        points.iter().map(|x| Ok(-self.dy(x, y)?)).collect()
    }

    /// MTW tensor contraction
    /// `(c_{ij,r̄} c^{r̄,s} c_{s,k̄l̄} - c_{ij,k̄l̄}) c^{k̄,p} c^{l̄,q} V^i V^j η_p η_q`
    /// at `(x, x̄)`, evaluated with central differences of the chart mixed
    /// Hessian using the model's default step.
    pub fn mtw_contraction(
        &self,
        x: &Point,
        y: &Point,
        v: &Vector2<f64>,
        eta: &Covector,
    ) -> Result<MtwValue> {
        self.mtw_contraction_with_step(x, y, v, eta, self.mtw_step)
    }

    pub fn mtw_contraction_with_step(
        &self,
        x: &Point,
        y: &Point,
        v: &Vector2<f64>,
        eta: &Covector,
        step: f64,
    ) -> Result<MtwValue> {
        let vn = v.norm();
        if vn == 0.0 {
            return Err(Error::Cost("MTW direction V must be nonzero".into()));
        }
        let v = v / vn;
        // enforce η(V) = 0
        let eta = eta - v * eta.dot(&v);
        let en = eta.norm();
        if en < 1e-12 {
            return Err(Error::Cost(
                "η has no component orthogonal to V; cannot form the MTW contraction".into(),
            ));
        }
        let eta = eta / en;

        let zero = Vector2::zeros();
        let b0 = self.mixed_in_charts(x, y, &zero, &zero)?;
        let sv = b0.singular_values();
        let cond = sv.max() / sv.min();
        let Some(b0_inv) = b0.try_inverse().filter(|_| cond.is_finite() && cond < MAX_CROSS_CONDITION)
        else {
            return Ok(MtwValue {
                value: f64::NAN,
                cross_condition: cond,
                reliable: false,
            });
        };
        let w = b0_inv * eta;
        let wn = w.norm();
        let wdir = w / wn;
        let h = step;
        let b = |u: Vector2<f64>, t: Vector2<f64>| self.mixed_in_charts(x, y, &u, &t);

        // a_r = ∂_s (Vᵀ B(sV, 0))_r
        let a = (b(v * h, zero)?.transpose() * v - b(-v * h, zero)?.transpose() * v) / (2.0 * h);
        // b_s = ∂_t (B(0, t w) w)_s
        // (the t-step is h / |w| so the chart displacement stays h)
        let bb = (b(zero, wdir * h)? * w - b(zero, -wdir * h)? * w) * (wn / (2.0 * h));
        // g = ∂_s ∂_t Vᵀ B(sV, t w) w
        let f = |s: f64, r: f64| -> Result<f64> { Ok((v.transpose() * b(v * s, wdir * r)? * w)[0]) };
        let g = (f(h, h)? - f(h, -h)? - f(-h, h)? + f(-h, -h)?) * (wn / (4.0 * h * h));

        let value = (a.transpose() * b0_inv * bb)[0] - g;
        Ok(MtwValue {
            value,
            cross_condition: cond,
            reliable: value.is_finite(),
        })
    }
}

fn newton<R, J>(
    start: Point,
    target: &Covector,
    surface: Surface,
    residual_map: R,
    jacobian: J,
    label: &str,
) -> Result<Point>
where
    R: Fn(&Point) -> Result<Covector>,
    J: Fn(&Point) -> Result<Matrix2<f64>>,
{
    let scale = target.norm().max(1.0);
    let mut z = start;
    let mut r = residual_map(&z)? - target;
    for _ in 0..CEXP_MAX_ITER {
        if r.norm() <= 1e-13 * scale {
            return Ok(z);
        }
        let jac = jacobian(&z)?;
        let Some(step) = jac.try_inverse().map(|ji| -(ji * r)) else {
            break;
        };
        // backtracking keeps iterates in the model's domain
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand = surface.chart(&z, &(step * lambda));
            if let Ok(rc) = residual_map(&cand).map(|m| m - target) {
                if rc.norm().is_finite() && rc.norm() < r.norm() {
                    z = cand;
                    r = rc;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if r.norm() <= CEXP_RESIDUAL * scale {
        return Ok(z);
    }
    Err(Error::CExp(format!(
        "Newton did not converge in {CEXP_MAX_ITER} iterations (residual {:e}); {label} outside admissible cotangent image",
        r.norm()
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;

    fn p(x: f64, y: f64) -> Point {
        Point::planar(x, y)
    }

    #[test]
    fn quadratic_values() {
        let c = CostModel::quadratic();
        assert_eq!(c.evaluate(&p(0.0, 0.0), &p(1.0, 0.0)).unwrap(), 0.5);
        assert_eq!(c.evaluate(&p(0.3, 0.7), &p(0.3, 0.7)).unwrap(), 0.0);
    }

    #[test]
    fn reflector_orthogonal_directions() {
        let c = CostModel::reflector(0.01);
        let x = Point::on_sphere([0.0, 0.0, 1.0]).unwrap();
        let y = Point::on_sphere([1.0, 0.0, 0.0]).unwrap();
        assert_eq!(c.evaluate(&x, &y).unwrap(), 0.0);
    }

    #[test]
    fn log_costs_reject_nonpositive_argument() {
        let c = CostModel::log_distance(0.1);
        assert!(c.evaluate(&p(0.2, 0.2), &p(0.2, 0.2)).is_err());
        let r = CostModel::reflector(0.01);
        let x = Point::on_sphere([0.0, 0.0, 1.0]).unwrap();
        assert!(r.evaluate(&x, &x).is_err());
    }

    #[test]
    fn quadratic_closed_forms() {
        let c = CostModel::quadratic();
        let x = p(0.2, 0.3);
        let y = c.c_exp_source(&x, &Vector2::new(0.1, -0.1), &x).unwrap();
        assert!((y.x() - 0.3).abs() < 1e-15 && (y.y() - 0.2).abs() < 1e-15);
        let y0 = c.c_exp_source(&x, &Vector2::zeros(), &x).unwrap();
        assert_eq!(y0, x);
        assert_eq!(c.cross(&x, &p(0.9, -0.4)).unwrap(), Matrix2::identity());
    }

    #[test]
    fn log_cost_exponential_example() {
        let c = CostModel::log_distance(0.1);
        let x = p(0.0, 0.0);
        let pbar = Vector2::new(1.0, 0.0);
        let y = c.c_exp_source(&x, &pbar, &p(-0.5, 0.3)).unwrap();
        assert!((y.x() + 1.0).abs() < 1e-12 && y.y().abs() < 1e-12);
        let r = (-c.dx(&x, &y).unwrap() - pbar).norm();
        assert!(r < 1e-9);
        // Newton from a rough guess lands on the same point
        let yn = c.c_exp_source_newton(&x, &pbar, &p(-0.7, 0.2)).unwrap();
        assert!(yn.distance(&y) < 1e-9);
    }

    #[test]
    fn newton_matches_closed_form_on_sphere() {
        let c = CostModel::reflector(0.01);
        let x = Point::on_sphere([0.1, 0.2, 1.0]).unwrap();
        let y = Point::on_sphere([0.2, -0.1, -1.0]).unwrap();
        let pbar = -c.dx(&x, &y).unwrap();
        let guess = Point::on_sphere([0.0, 0.0, -1.0]).unwrap();
        let yn = c.c_exp_source_newton(&x, &pbar, &guess).unwrap();
        assert!(yn.distance(&y) < 1e-9, "{yn:?} vs {y:?}");
        let ycf = c.c_exp_source(&x, &pbar, &guess).unwrap();
        assert!(ycf.distance(&y) < 1e-9);

        let p = -c.dy(&x, &y).unwrap();
        let guess = Point::on_sphere([0.0, 0.0, 1.0]).unwrap();
        let xn = c.c_exp_target_newton(&y, &p, &guess).unwrap();
        assert!(xn.distance(&x) < 1e-9);
        let xcf = c.c_exp_target(&y, &p, &guess).unwrap();
        assert!(xcf.distance(&x) < 1e-9);
    }

    #[test]
    fn newton_failure_is_reported() {
        // constant cost: -Dc ≡ 0, so any nonzero p̄ is unreachable
        let c = CostModel::new(ExpressionCost::planar("0*x1 + 0*y1").unwrap());
        let err = c
            .c_exp_source(&p(0.0, 0.0), &Vector2::new(1.0, 0.0), &p(1.0, 1.0))
            .unwrap_err()
            .to_string();
        assert!(err.contains("outside admissible"), "{err}");
    }

    #[test]
    fn cotangent_coordinates_quadratic() {
        let c = CostModel::quadratic();
        let corners = [p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0), p(0.0, 1.0)];
        let img = c.cotangent_coords(&corners, &p(0.0, 0.0)).unwrap();
        for (q, x) in img.iter().zip(&corners) {
            assert_eq!((q.x, q.y), (x.x(), x.y()));
        }
        let img = c.cotangent_coords(&corners, &p(0.5, 0.5)).unwrap();
        for (q, x) in img.iter().zip(&corners) {
            assert_eq!((q.x, q.y), (x.x() - 0.5, x.y() - 0.5));
        }
    }

    #[test]
    fn log_cost_breaks_collinearity() {
        let c = CostModel::log_distance(0.1);
        let y = p(-1.0, 0.3);
        let pts = [p(0.0, 0.0), p(0.5, 0.5), p(1.0, 1.0)];
        let q = c.cotangent_coords(&pts, &y).unwrap();
        let area = (q[1] - q[0]).perp(&(q[2] - q[0]));
        assert!(area.abs() > 1e-3, "{area}");
    }

    #[test]
    fn mtw_vanishes_for_quadratic() {
        let c = CostModel::quadratic();
        let m = c
            .mtw_contraction(&p(0.2, 0.4), &p(0.7, 0.1), &Vector2::new(1.0, 0.3), &Vector2::new(-0.3, 1.0))
            .unwrap();
        assert!(m.value.abs() < 1e-8, "{m:?}");
    }

    #[test]
    fn mtw_positive_for_known_regular_cost() {
        // sqrt(1 + |x - y|^2) is a classical strictly MTW-regular cost
        let c = CostModel::new(
            ExpressionCost::planar("sqrt(1 + (x1-y1)^2 + (x2-y2)^2)").unwrap(),
        );
        for (x, y, v) in [
            (p(0.1, 0.2), p(0.6, 0.5), Vector2::new(1.0, 0.0)),
            (p(0.0, 0.0), p(-0.4, 0.3), Vector2::new(0.3, 1.0)),
            (p(0.5, 0.5), p(0.5, 0.0), Vector2::new(1.0, 1.0)),
        ] {
            let eta = Vector2::new(-v.y, v.x);
            let m = c.mtw_contraction(&x, &y, &v, &eta).unwrap();
            assert!(m.value > 1e-3, "{m:?}");
        }
    }

    #[test]
    fn mtw_positive_for_reflector() {
        let c = CostModel::reflector(0.01);
        let x = Point::on_sphere([0.2, 0.1, 1.0]).unwrap();
        let y = Point::on_sphere([-0.1, 0.3, -1.0]).unwrap();
        for k in 0..8 {
            let a = k as f64 * 0.4;
            let v = Vector2::new(a.cos(), a.sin());
            let eta = Vector2::new(-v.y, v.x);
            let m = c.mtw_contraction(&x, &y, &v, &eta).unwrap();
            let m2 = c.mtw_contraction_with_step(&x, &y, &v, &eta, c.mtw_step() / 2.0).unwrap();
            assert!(m.value > 0.0, "{m:?}");
            assert!((m.value - m2.value).abs() <= 0.1 * m.value.abs());
        }
    }
}
