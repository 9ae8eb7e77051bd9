//! Sampled numerical checks of the structural conditions on a cost.
//!
//! Every check draws admissible pairs `(x, x̄)` with `x` in the source domain
//! and `x̄` in a target region (see [`target_region`]). Results are sampled
//! estimates, never certificates.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;

use nalgebra::{Matrix2, Vector2};
use rand::Rng;

use super::{CostModel, Covector};
use crate::error::{Error, Result};
use crate::geometry::polygon::{convex_hull, is_convex_polygon, perimeter, Vec2};
use crate::geometry::{angle_between, Domain, Point, Surface};

pub const TWIST_THRESHOLD: f64 = 1e-8;
pub const NONDEG_THRESHOLD: f64 = 1e-10;
pub const MTW_WEAK_TOLERANCE: f64 = 1e-4;
pub const GRADIENT_TOLERANCE: f64 = 1e-5;
pub const CEXP_TOLERANCE: f64 = 1e-9;
const CROSS_FD_STEP: f64 = 1e-4;
pub const CONVEXITY_REL_TOL: f64 = 1e-9;
const FD_STEP: f64 = 1e-6;
const MAX_TRIES_PER_SAMPLE: usize = 1000;

/// Region of target points used when sampling pairs: the padded bounding box
/// of the targets in the plane, a cap around their mean direction on the sphere.
pub fn target_region(surface: Surface, targets: &[Point]) -> Result<Domain> {
    if targets.is_empty() {
        return Err(Error::Cost("target region needs at least one target".into()));
    }
    match surface {
        Surface::Plane => {
            let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for t in targets {
                lo = [lo[0].min(t.x()), lo[1].min(t.y())];
                hi = [hi[0].max(t.x()), hi[1].max(t.y())];
            }
            let pad = 0.1 * (hi[0] - lo[0]).max(hi[1] - lo[1]).max(0.5);
            Domain::rectangle([lo[0] - pad, lo[1] - pad], [hi[0] + pad, hi[1] + pad])
        }
        Surface::Sphere => {
            let sum = targets
                .iter()
                .fold(nalgebra::Vector3::zeros(), |acc, t| acc + t.ambient());
            let mean = Point::on_sphere([sum.x, sum.y, sum.z])?;
            let spread = targets
                .iter()
                .map(|t| angle_between(&mean, t))
                .fold(0.0, f64::max);
            let radius = (spread + 0.1).clamp(0.05, FRAC_PI_2 - 1e-3);
            Domain::cap([mean.x(), mean.y(), mean.z()], radius)
        }
    }
}

/// Draws an admissible pair, or `None` after too many rejections.
fn admissible_pair<R: Rng + ?Sized>(
    cost: &CostModel,
    source: &Domain,
    target: &Domain,
    rng: &mut R,
) -> Option<(Point, Point)> {
    for _ in 0..MAX_TRIES_PER_SAMPLE {
        let x = source.sample(rng);
        let y = target.sample(rng);
        if cost.admissible(&x, &y) {
            return Some((x, y));
        }
    }
    None
}

fn unit_direction<R: Rng + ?Sized>(rng: &mut R) -> Vector2<f64> {
    let a = rng.gen_range(0.0..std::f64::consts::TAU);
    Vector2::new(a.cos(), a.sin())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwistCheck {
    /// min ‖Dc(x, x̄_a) − Dc(x, x̄_b)‖ / ‖x̄_a − x̄_b‖ over samples.
    pub min_ratio: f64,
    /// ‖x̄_a − x̄_b‖ at the worst sample.
    pub worst_distance: f64,
    pub samples: usize,
    pub pass: bool,
}

pub fn check_twist<R: Rng + ?Sized>(
    cost: &CostModel,
    source: &Domain,
    target: &Domain,
    samples: usize,
    rng: &mut R,
) -> Result<TwistCheck> {
    let mut out = TwistCheck {
        min_ratio: f64::INFINITY,
        worst_distance: f64::NAN,
        samples: 0,
        pass: false,
    };
    for _ in 0..samples {
        let Some((x, ya)) = admissible_pair(cost, source, target, rng) else {
            continue;
        };
        let yb = target.sample(rng);
        let dist = ya.distance(&yb);
        if dist == 0.0 || !cost.admissible(&x, &yb) {
            continue;
        }
        let ratio = (cost.dx(&x, &ya)? - cost.dx(&x, &yb)?).norm() / dist;
        out.samples += 1;
        if ratio < out.min_ratio {
            out.min_ratio = ratio;
            out.worst_distance = dist;
        }
    }
    out.pass = out.samples > 0 && out.min_ratio >= TWIST_THRESHOLD;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NondegCheck {
    /// min |det(−DD̄c)| over samples.
    pub min_abs_det: f64,
    pub samples: usize,
    pub pass: bool,
}

pub fn check_nondeg<R: Rng + ?Sized>(
    cost: &CostModel,
    source: &Domain,
    target: &Domain,
    samples: usize,
    rng: &mut R,
) -> Result<NondegCheck> {
    let mut min = f64::INFINITY;
    let mut used = 0;
    for _ in 0..samples {
        let Some((x, y)) = admissible_pair(cost, source, target, rng) else {
            continue;
        };
        min = min.min(cost.cross(&x, &y)?.determinant().abs());
        used += 1;
    }
    Ok(NondegCheck {
        min_abs_det: min,
        samples: used,
        pass: used > 0 && min > NONDEG_THRESHOLD,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MtwCheck {
    /// Minimum contraction over reliable samples.
    pub delta0: f64,
    pub max_abs: f64,
    pub positive: usize,
    pub negative: usize,
    pub unreliable: usize,
    /// Samples with |value| > 1e-3 whose step-halved value differs by more than 10%.
    pub step_disagreements: usize,
    pub samples: usize,
}

impl MtwCheck {
    /// No sample below `-MTW_WEAK_TOLERANCE`.
    pub fn weak_pass(&self) -> bool {
        self.samples > self.unreliable && self.delta0 >= -MTW_WEAK_TOLERANCE
    }

    /// Every sample above `MTW_WEAK_TOLERANCE`.
    pub fn strict_pass(&self) -> bool {
        self.samples > self.unreliable && self.delta0 > MTW_WEAK_TOLERANCE
    }
}

pub fn sample_mtw<R: Rng + ?Sized>(
    cost: &CostModel,
    source: &Domain,
    target: &Domain,
    samples: usize,
    rng: &mut R,
) -> Result<MtwCheck> {
    let mut out = MtwCheck {
        delta0: f64::INFINITY,
        max_abs: 0.0,
        positive: 0,
        negative: 0,
        unreliable: 0,
        step_disagreements: 0,
        samples: 0,
    };
    for _ in 0..samples {
        let Some((x, y)) = admissible_pair(cost, source, target, rng) else {
            continue;
        };
        let v = unit_direction(rng);
        let eta = Vector2::new(-v.y, v.x);
        out.samples += 1;
        let m = cost.mtw_contraction(&x, &y, &v, &eta)?;
        if !m.reliable {
            out.unreliable += 1;
            continue;
        }
        let half = cost.mtw_contraction_with_step(&x, &y, &v, &eta, cost.mtw_step() / 2.0)?;
        if m.value.abs() > 1e-3 && (m.value - half.value).abs() > 0.1 * m.value.abs() {
            out.step_disagreements += 1;
        }
        out.delta0 = out.delta0.min(m.value);
        out.max_abs = out.max_abs.max(m.value.abs());
        if m.value > 0.0 {
            out.positive += 1;
        } else if m.value < 0.0 {
            out.negative += 1;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    pub max_rel_error_x: f64,
    pub max_rel_error_y: f64,
    pub max_rel_error_cross: f64,
    pub samples: usize,
}

impl GradientCheck {
    pub fn max_rel_error(&self) -> f64 {
        self.max_rel_error_x
            .max(self.max_rel_error_y)
            .max(self.max_rel_error_cross)
    }

    pub fn pass(&self) -> bool {
        self.samples > 0 && self.max_rel_error() <= GRADIENT_TOLERANCE
    }
}

fn rel_err_vec(fd: &Vector2<f64>, an: &Vector2<f64>) -> f64 {
    (fd - an).norm() / an.norm().max(1.0)
}

/// Compares `Dc`, `D̄c` and `-DD̄c` with central differences taken in the
/// charts of [`Surface::chart`].
pub fn check_gradients<R: Rng + ?Sized>(
    cost: &CostModel,
    source: &Domain,
    target: &Domain,
    samples: usize,
    rng: &mut R,
) -> Result<GradientCheck> {
    let s = cost.surface();
    let h = FD_STEP;
    let mut out = GradientCheck {
        max_rel_error_x: 0.0,
        max_rel_error_y: 0.0,
        max_rel_error_cross: 0.0,
        samples: 0,
    };
    for _ in 0..samples {
        let Some((x, y)) = admissible_pair(cost, source, target, rng) else {
            continue;
        };
        let mut fdx = Vector2::zeros();
        let mut fdy = Vector2::zeros();
        let mut fd_cross = Matrix2::zeros();
        for k in 0..2 {
            let mut e = Vector2::zeros();
            e[k] = h;
            fdx[k] = (cost.evaluate(&s.chart(&x, &e), &y)? - cost.evaluate(&s.chart(&x, &-e), &y)?)
                / (2.0 * h);
            fdy[k] = (cost.evaluate(&x, &s.chart(&y, &e))? - cost.evaluate(&x, &s.chart(&y, &-e))?)
                / (2.0 * h);
            // column k: -∂/∂v_k Dc(x, chart_y(v)); a wider step since Dc may itself be a difference quotient
            let mut w = Vector2::zeros();
            w[k] = CROSS_FD_STEP;
            let col = -(cost.dx(&x, &s.chart(&y, &w))? - cost.dx(&x, &s.chart(&y, &-w))?) / (2.0 * CROSS_FD_STEP);
            fd_cross.set_column(k, &col);
        }
        let an_cross = cost.cross(&x, &y)?;
        out.max_rel_error_x = out.max_rel_error_x.max(rel_err_vec(&fdx, &cost.dx(&x, &y)?));
        out.max_rel_error_y = out.max_rel_error_y.max(rel_err_vec(&fdy, &cost.dy(&x, &y)?));
        out.max_rel_error_cross = out
            .max_rel_error_cross
            .max((fd_cross - an_cross).norm() / an_cross.norm().max(1.0));
        out.samples += 1;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundTripCheck {
    /// Largest relative residual of either c-exponential map.
    pub max_residual: f64,
    pub failures: usize,
    pub samples: usize,
}

impl RoundTripCheck {
    pub fn pass(&self) -> bool {
        self.samples > 0 && self.failures == 0 && self.max_residual <= CEXP_TOLERANCE
    }
}

/// `cExp_x(-Dc(x, x̄))` and `cExp_x̄(-D̄c(x, x̄))` residuals on random pairs.
/// Newton-based models start from the centre of the opposite region.
pub fn check_c_exp_roundtrip<R: Rng + ?Sized>(
    cost: &CostModel,
    source: &Domain,
    target: &Domain,
    samples: usize,
    rng: &mut R,
) -> Result<RoundTripCheck> {
    let (src_guess, tgt_guess) = (source.center(), target.center());
    let mut out = RoundTripCheck {
        max_residual: 0.0,
        failures: 0,
        samples: 0,
    };
    for _ in 0..samples {
        let Some((x, y)) = admissible_pair(cost, source, target, rng) else {
            continue;
        };
        out.samples += 1;
        let pbar: Covector = -cost.dx(&x, &y)?;
        let p: Covector = -cost.dy(&x, &y)?;
        let (Ok(y2), Ok(x2)) = (
            cost.c_exp_source(&x, &pbar, &tgt_guess),
            cost.c_exp_target(&y, &p, &src_guess),
        ) else {
            out.failures += 1;
            continue;
        };
        let r1 = (-cost.dx(&x, &y2)? - pbar).norm() / pbar.norm().max(1.0);
        let r2 = (-cost.dy(&x2, &y)? - p).norm() / p.norm().max(1.0);
        out.max_residual = out.max_residual.max(r1).max(r2);
    }
    Ok(out)
}

/// Convexity of the cotangent image `[Ω]_x̄` for one target.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainConvexity {
    pub target_index: usize,
    pub convex: bool,
    /// Perimeter of the hull of the image.
    pub hull_perimeter: f64,
}

/// Maps an ordered closed boundary into `[·]_x̄` for each target and tests
/// the image polygon for convexity.
pub fn check_c_convexity_of_boundary(
    cost: &CostModel,
    boundary: &[Point],
    targets: &[Point],
) -> Result<Vec<DomainConvexity>> {
    targets
        .iter()
        .enumerate()
        .map(|(k, y)| {
            let img: Vec<Vec2> = cost.cotangent_coords(boundary, y)?;
            Ok(DomainConvexity {
                target_index: k,
                convex: is_convex_polygon(&img, CONVEXITY_REL_TOL),
                hull_perimeter: perimeter(&convex_hull(&img)),
            })
        })
        .collect()
}

pub fn check_c_convexity_of_domain(
    cost: &CostModel,
    domain: &Domain,
    targets: &[Point],
    boundary_samples: usize,
) -> Result<Vec<DomainConvexity>> {
    check_c_convexity_of_boundary(cost, &domain.boundary_samples(boundary_samples), targets)
}

/// Sample counts for [`verify_conditions`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckSettings {
    pub samples: usize,
    pub gradient_samples: usize,
    pub boundary_samples: usize,
}

impl Default for CheckSettings {
    fn default() -> Self {
        Self {
            samples: 200,
            gradient_samples: 1000,
            boundary_samples: 400,
        }
    }
}

/// One line of the condition report.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub check: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
    /// Whether a failure of this row fails a strict run.
    pub gating: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub cost: String,
    pub twist: TwistCheck,
    pub nondeg: NondegCheck,
    pub mtw: MtwCheck,
    pub gradients: GradientCheck,
    pub roundtrip: RoundTripCheck,
    pub domain_convexity: Vec<DomainConvexity>,
    pub rows: Vec<CheckRow>,
}

impl ConditionReport {
    pub fn twist_ok(&self) -> bool {
        self.twist.pass
    }

    pub fn nondeg_min_det(&self) -> f64 {
        self.nondeg.min_abs_det
    }

    pub fn mtw_delta0_estimate(&self) -> f64 {
        self.mtw.delta0
    }

    pub fn samples_used(&self) -> usize {
        self.twist.samples + self.nondeg.samples + self.mtw.samples
    }

    /// All gating rows pass.
    pub fn all_pass(&self) -> bool {
        self.rows.iter().filter(|r| r.gating).all(|r| r.pass)
    }

    pub fn failures(&self) -> Vec<&CheckRow> {
        self.rows.iter().filter(|r| r.gating && !r.pass).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("check,value,threshold,pass\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{:e},{:e},{}", r.check, r.value, r.threshold, r.pass);
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("condition report for cost {}\n", self.cost);
        for r in &self.rows {
            let tag = match (r.pass, r.gating) {
                (true, _) => "pass",
                (false, true) => "FAIL",
                (false, false) => "note",
            };
            let _ = writeln!(
                s,
                "  {:<32} {:>14.6e}  threshold {:>10.3e}  {tag}",
                r.check, r.value, r.threshold
            );
        }
        let _ = writeln!(
            s,
            "  MTW sign pattern: {} positive, {} negative, {} unreliable of {} samples",
            self.mtw.positive, self.mtw.negative, self.mtw.unreliable, self.mtw.samples
        );
        s
    }
}

/// Runs every sampled check plus domain c-convexity for each target.
pub fn verify_conditions<R: Rng + ?Sized>(
    cost: &CostModel,
    source: &Domain,
    targets: &[Point],
    settings: &CheckSettings,
    rng: &mut R,
) -> Result<ConditionReport> {
    let region = target_region(cost.surface(), targets)?;
    let twist = check_twist(cost, source, &region, settings.samples, rng)?;
    let nondeg = check_nondeg(cost, source, &region, settings.samples, rng)?;
    let mtw = sample_mtw(cost, source, &region, settings.samples, rng)?;
    let gradients = check_gradients(cost, source, &region, settings.gradient_samples, rng)?;
    let roundtrip = check_c_exp_roundtrip(cost, source, &region, settings.samples, rng)?;
    let domain_convexity =
        check_c_convexity_of_domain(cost, source, targets, settings.boundary_samples)?;

    let row = |check: &str, value: f64, threshold: f64, pass: bool, gating: bool| CheckRow {
        check: check.to_string(),
        value,
        threshold,
        pass,
        gating,
    };
    let mut rows = vec![
        row("twist_min_ratio", twist.min_ratio, TWIST_THRESHOLD, twist.pass, true),
        row("nondeg_min_det", nondeg.min_abs_det, NONDEG_THRESHOLD, nondeg.pass, true),
        row("mtw_delta0", mtw.delta0, -MTW_WEAK_TOLERANCE, mtw.weak_pass(), true),
        row("mtw_strictly_positive", mtw.delta0, MTW_WEAK_TOLERANCE, mtw.strict_pass(), false),
        row("mtw_unreliable_samples", mtw.unreliable as f64, 0.0, mtw.unreliable == 0, false),
        row(
            "mtw_step_halving_disagreements",
            mtw.step_disagreements as f64,
            0.0,
            mtw.step_disagreements == 0,
            false,
        ),
        row(
            "gradient_max_rel_error",
            gradients.max_rel_error(),
            GRADIENT_TOLERANCE,
            gradients.pass(),
            true,
        ),
        row("cexp_max_residual", roundtrip.max_residual, CEXP_TOLERANCE, roundtrip.pass(), true),
    ];
    for d in &domain_convexity {
        rows.push(row(
            &format!("c_convex_domain_target_{}", d.target_index + 1),
            if d.convex { 1.0 } else { 0.0 },
            1.0,
            d.convex,
            true,
        ));
    }
    Ok(ConditionReport {
        cost: cost.name(),
        twist,
        nondeg,
        mtw,
        gradients,
        roundtrip,
        domain_convexity,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::ExpressionCost;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    fn square() -> Domain {
        Domain::unit_square()
    }

    fn reflector_setup() -> (CostModel, Domain, Vec<Point>) {
        let cost = CostModel::reflector(0.05);
        let src = Domain::cap([0.0, 0.0, 1.0], std::f64::consts::PI / 6.0).unwrap();
        let targets = vec![
            Point::on_sphere([0.3, 0.0, -1.0]).unwrap(),
            Point::on_sphere([-0.2, 0.25, -1.0]).unwrap(),
        ];
        (cost, src, targets)
    }

    #[test]
    fn quadratic_twist_ratio_is_one() {
        let c = CostModel::quadratic();
        let t = check_twist(&c, &square(), &square(), 200, &mut rng()).unwrap();
        assert!(t.pass);
        assert!((t.min_ratio - 1.0).abs() < 1e-12, "{t:?}");
    }

    #[test]
    fn constant_cost_fails_twist() {
        let c = CostModel::new(ExpressionCost::planar("0*x1 + 0*y1").unwrap());
        let t = check_twist(&c, &square(), &square(), 100, &mut rng()).unwrap();
        assert!(!t.pass);
        assert_eq!(t.min_ratio, 0.0);
    }

    #[test]
    fn reflector_twist_positive() {
        let (c, src, targets) = reflector_setup();
        let region = target_region(Surface::Sphere, &targets).unwrap();
        let t = check_twist(&c, &src, &region, 200, &mut rng()).unwrap();
        assert!(t.pass && t.min_ratio > 0.0, "{t:?}");
    }

    #[test]
    fn nondeg_quadratic_rank_one_and_log() {
        let q = check_nondeg(&CostModel::quadratic(), &square(), &square(), 100, &mut rng()).unwrap();
        assert!(q.pass && (q.min_abs_det - 1.0).abs() < 1e-12);

        let r1 = CostModel::new(ExpressionCost::planar("x1*y1").unwrap());
        let r = check_nondeg(&r1, &square(), &square(), 100, &mut rng()).unwrap();
        assert!(!r.pass, "{r:?}");

        let log = CostModel::log_distance(0.1);
        let far = Domain::rectangle([2.0, 0.0], [3.0, 1.0]).unwrap();
        let l = check_nondeg(&log, &square(), &far, 100, &mut rng()).unwrap();
        assert!(l.pass && l.min_abs_det > 0.0, "{l:?}");
    }

    #[test]
    fn mtw_samples_quadratic_and_reflector() {
        let q = sample_mtw(&CostModel::quadratic(), &square(), &square(), 100, &mut rng()).unwrap();
        assert_eq!(q.samples, 100);
        assert!(q.max_abs <= 1e-4, "{q:?}");
        assert!(q.weak_pass() && !q.strict_pass());

        let (c, src, targets) = reflector_setup();
        let region = target_region(Surface::Sphere, &targets).unwrap();
        let m = sample_mtw(&c, &src, &region, 100, &mut rng()).unwrap();
        assert!(m.delta0 > 0.0 && m.strict_pass(), "{m:?}");
        assert_eq!(m.step_disagreements, 0);
    }

    #[test]
    fn gradients_match_finite_differences() {
        for (c, src, tgt) in [
            (CostModel::quadratic(), square(), square()),
            (
                CostModel::log_distance(0.1),
                square(),
                Domain::rectangle([1.5, 0.0], [2.5, 1.0]).unwrap(),
            ),
        ] {
            let g = check_gradients(&c, &src, &tgt, 300, &mut rng()).unwrap();
            assert!(g.pass(), "{}: {g:?}", c.name());
        }
        let (c, src, targets) = reflector_setup();
        let region = target_region(Surface::Sphere, &targets).unwrap();
        let g = check_gradients(&c, &src, &region, 300, &mut rng()).unwrap();
        assert!(g.pass(), "{g:?}");
    }

    #[test]
    fn roundtrip_all_models() {
        let (c, src, targets) = reflector_setup();
        let region = target_region(Surface::Sphere, &targets).unwrap();
        let r = check_c_exp_roundtrip(&c, &src, &region, 200, &mut rng()).unwrap();
        assert!(r.pass(), "{r:?}");
        let log = CostModel::log_distance(0.1);
        let far = Domain::rectangle([1.5, 0.0], [2.5, 1.0]).unwrap();
        let r = check_c_exp_roundtrip(&log, &square(), &far, 200, &mut rng()).unwrap();
        assert!(r.pass(), "{r:?}");
        // Newton path for a user cost equal to the quadratic one
        let e = CostModel::new(ExpressionCost::planar("0.5*((x1-y1)^2 + (x2-y2)^2)").unwrap());
        let r = check_c_exp_roundtrip(&e, &square(), &square(), 50, &mut rng()).unwrap();
        assert!(r.failures == 0 && r.max_residual <= 1e-9, "{r:?}");
    }

    #[test]
    fn domain_convexity() {
        let q = CostModel::quadratic();
        let t = [Point::planar(0.3, 0.8), Point::planar(5.0, -2.0)];
        let flags = check_c_convexity_of_domain(&q, &square(), &t, 200).unwrap();
        assert!(flags.iter().all(|f| f.convex));
        assert!((flags[0].hull_perimeter - 4.0).abs() < 1e-12);

        let l: Vec<Point> = [(0.0, 0.0), (2.0, 0.0), (2.0, 1.0), (1.0, 1.0), (1.0, 2.0), (0.0, 2.0)]
            .iter()
            .map(|&(a, b)| Point::planar(a, b))
            .collect();
        let flags = check_c_convexity_of_boundary(&q, &l, &t).unwrap();
        assert!(flags.iter().all(|f| !f.convex));

        let (c, src, targets) = reflector_setup();
        let flags = check_c_convexity_of_domain(&c, &src, &targets, 400).unwrap();
        assert!(flags.iter().all(|f| f.convex), "{flags:?}");
    }

    #[test]
    fn report_rows_and_csv() {
        let q = CostModel::quadratic();
        let targets = [Point::planar(0.25, 0.5), Point::planar(0.75, 0.5)];
        let settings = CheckSettings {
            samples: 100,
            gradient_samples: 100,
            boundary_samples: 100,
        };
        let rep = verify_conditions(&q, &square(), &targets, &settings, &mut rng()).unwrap();
        assert!(rep.all_pass(), "{}", rep.to_text());
        assert!(rep.mtw_delta0_estimate().abs() <= 1e-4);
        let csv = rep.to_csv();
        assert!(csv.starts_with("check,value,threshold,pass\n"));
        assert!(csv.contains("mtw_strictly_positive"));

        let r1 = CostModel::new(ExpressionCost::planar("x1*y1").unwrap());
        let rep = verify_conditions(&r1, &square(), &targets, &settings, &mut rng()).unwrap();
        assert!(!rep.all_pass());
        assert!(rep.failures().iter().any(|r| r.check == "nondeg_min_det"));
    }
}
