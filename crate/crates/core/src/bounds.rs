//! Constants of the worst-case iteration bound and the run certificate.
//!
//! Suprema and infima over Ω are taken over the grid centers plus a dense
//! sampling of ∂Ω ([`Grid::sup_samples`]); the extrema of the built-in
//! models sit on the boundary.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::cost::CostModel;
use crate::error::{Error, Result};
use crate::geometry::polygon::{convex_contains, convex_hull, is_convex_polygon, perimeter, Vec2};
use crate::geometry::{Domain, Grid, Point, SourceMeasure};
use crate::partition::TargetSpec;

const CONTAINMENT_TOL: f64 = 1e-12;
const PERIMETER_TOL: f64 = 1e-12;
/// Denominators of `C` below this count as coincident targets.
const MIN_GRADIENT_GAP: f64 = 1e-12;

fn require_pairs(targets: &TargetSpec) -> Result<()> {
    if targets.len() < 2 {
        return Err(Error::Bounds("constants need at least two targets".into()));
    }
    Ok(())
}

/// `C = max_{k≠l} sup_x |det A| / |A⁻¹(−Dc(x, x̄_l) + Dc(x, x̄_k))|` with
/// `A = −DD̄c(x, x̄_l)`, norms in orthonormal frames.
pub fn constant_c(cost: &CostModel, targets: &TargetSpec, grid: &Grid) -> Result<f64> {
    require_pairs(targets)?;
    let pts = targets.points();
    let k = pts.len();
    let samples = grid.sup_samples();
    let per_point: Vec<f64> = samples
        .par_iter()
        .map(|x| -> Result<f64> {
            let grads: Vec<_> = pts.iter().map(|y| cost.dx(x, y)).collect::<Result<_>>()?;
            let mut best = 0.0f64;
            for l in 0..k {
                let a = cost.cross(x, &pts[l])?;
                let inv = a.try_inverse().ok_or_else(|| {
                    Error::Bounds(format!(
                        "cross matrix singular at {:?} for target {}",
                        x.ambient(),
                        l + 1
                    ))
                })?;
                for (kk, gk) in grads.iter().enumerate() {
                    if kk == l {
                        continue;
                    }
                    let den = (inv * (gk - grads[l])).norm();
                    if den < MIN_GRADIENT_GAP {
                        return Err(Error::Bounds(format!(
                            "targets {} and {} are nearly coincident (min pairwise distance {:e})",
                            l + 1,
                            kk + 1,
                            targets.min_pairwise_distance()
                        )));
                    }
                    best = best.max(a.determinant().abs() / den);
                }
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    Ok(per_point.into_iter().fold(0.0, f64::max))
}

/// `(M, Λ)`: `M = max_k sup_x e^{c(x,x̄_1) − c(x,x̄_k)} + 1` and
/// `Λ = min_k inf_x e^{c(x,x̄_1) − c(x,x̄_k)}` over `k ≥ 2`.
pub fn constants_m_lambda(cost: &CostModel, targets: &TargetSpec, grid: &Grid) -> Result<(f64, f64)> {
    require_pairs(targets)?;
    let pts = targets.points();
    let samples = grid.sup_samples();
    let extremes: Vec<(f64, f64)> = samples
        .par_iter()
        .map(|x| -> Result<(f64, f64)> {
            let c1 = cost.evaluate(x, &pts[0])?;
            let mut hi = f64::NEG_INFINITY;
            let mut lo = f64::INFINITY;
            for y in &pts[1..] {
                let e = c1 - cost.evaluate(x, y)?;
                hi = hi.max(e);
                lo = lo.min(e);
            }
            Ok((hi, lo))
        })
        .collect::<Result<_>>()?;
    let hi = extremes.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max);
    let lo = extremes.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
    Ok((hi.exp() + 1.0, lo.exp()))
}

fn boundary_image(cost: &CostModel, domain: &Domain, y: &Point, samples: usize) -> Result<Vec<Vec2>> {
    cost.cotangent_coords(&domain.boundary_samples(samples), y)
}

/// Perimeter of `[∂Ω]_x̄` as the hull perimeter of the mapped boundary
/// samples. The image must be convex.
pub fn surface_measure(cost: &CostModel, domain: &Domain, y: &Point, boundary_samples: usize) -> Result<f64> {
    let img = boundary_image(cost, domain, y, boundary_samples)?;
    if !is_convex_polygon(&img, crate::cost::checks::CONVEXITY_REL_TOL) {
        return Err(Error::Bounds(format!(
            "image of the domain boundary in cotangent coordinates at {:?} is not convex; \
             the domain fails the c-convexity check for this target",
            y.ambient()
        )));
    }
    Ok(perimeter(&convex_hull(&img)))
}

/// Hull perimeter of `[∂Ω]_x̄` without the convexity requirement.
pub fn hull_perimeter(cost: &CostModel, domain: &Domain, y: &Point, boundary_samples: usize) -> Result<f64> {
    Ok(perimeter(&convex_hull(&boundary_image(cost, domain, y, boundary_samples)?)))
}

/// `K [K C M sup I σ_max / (δ Λ) + 1]`.
pub fn iteration_bound(c: f64, m: f64, lambda: f64, delta: f64, sup_i: f64, sigma_max: f64, k: usize) -> f64 {
    let k = k as f64;
    k * (k * c * m * sup_i * sigma_max / (delta * lambda) + 1.0)
}

/// Whether perimeter(A) ≤ perimeter(B) for convex polygons with A ⊆ B.
/// Both inputs are vertex lists; their hulls are used.
pub fn convex_perimeter_monotonicity(a: &[Vec2], b: &[Vec2]) -> Result<bool> {
    let ha = convex_hull(a);
    let hb = convex_hull(b);
    if let Some(v) = ha.iter().find(|v| !convex_contains(&hb, v, CONTAINMENT_TOL)) {
        return Err(Error::Bounds(format!(
            "precondition A ⊆ B violated: vertex ({}, {}) of A lies outside B",
            v.x, v.y
        )));
    }
    Ok(perimeter(&ha) <= perimeter(&hb) + PERIMETER_TOL)
}

/// Every constant of the iteration bound plus the observed count, once known.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub k: usize,
    pub epsilon: f64,
    pub c: f64,
    pub m: f64,
    pub lambda: f64,
    pub delta: f64,
    pub sup_i: f64,
    pub sigma: Vec<f64>,
    pub boundary_samples: usize,
    pub sup_samples: usize,
    pub n_eps_bound: f64,
    pub observed_outer_iterations: Option<usize>,
}

impl BoundReport {
    /// Computes all constants. Requires `K ≥ 2`.
    pub fn compute(
        cost: &CostModel,
        targets: &TargetSpec,
        measure: &SourceMeasure,
        epsilon: f64,
    ) -> Result<Self> {
        require_pairs(targets)?;
        let grid = measure.grid();
        let k = targets.len();
        let delta = crate::scheme::compute_delta(epsilon, k, targets.masses()[0])
            .ok_or_else(|| Error::Bounds("δ undefined".into()))?;
        let c = constant_c(cost, targets, grid)?;
        let (m, lambda) = constants_m_lambda(cost, targets, grid)?;
        let boundary_samples = grid.boundary_sample_count();
        let sigma = targets
            .points()
            .iter()
            .map(|y| surface_measure(cost, grid.domain(), y, boundary_samples))
            .collect::<Result<Vec<_>>>()?;
        let sup_i = measure.sup_density();
        let sigma_max = sigma.iter().cloned().fold(0.0, f64::max);
        Ok(Self {
            k,
            epsilon,
            c,
            m,
            lambda,
            delta,
            sup_i,
            boundary_samples,
            sup_samples: grid.len() + boundary_samples,
            n_eps_bound: iteration_bound(c, m, lambda, delta, sup_i, sigma_max, k),
            sigma,
            observed_outer_iterations: None,
        })
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma.iter().cloned().fold(0.0, f64::max)
    }

    /// Observed count within the bound; `None` until a run is recorded.
    pub fn pass(&self) -> Option<bool> {
        self.observed_outer_iterations
            .map(|n| n as f64 <= self.n_eps_bound)
    }

    pub fn record(&mut self, outer_iterations: usize) {
        self.observed_outer_iterations = Some(outer_iterations);
    }

    /// `|G^i(…, d_i + t, …) − G^i(d)| ≤ lipschitz(i, d_i) |t|` (continuum bound).
    pub fn lipschitz(&self, i: usize, d_i: f64) -> f64 {
        self.k as f64 * self.c * self.sup_i * self.sigma[i] / d_i
    }

    /// Smallest admissible decrease of a weight in one accepted step, with
    /// the mass increase `δ` reduced by `2h` for quadrature error.
    pub fn decrease_lower_bound(&self, h: f64) -> f64 {
        (self.delta - 2.0 * h).max(0.0) * self.lambda
            / (self.k as f64 * self.c * self.sup_i * self.sigma_max())
    }

    pub fn to_csv(&self) -> String {
        let sup = format!(
            "sup over {} grid centers + {} boundary samples",
            self.sup_samples - self.boundary_samples,
            self.boundary_samples
        );
        let mut s = String::from("constant,value,method\n");
        let mut row = |name: &str, v: f64, method: &str| {
            let _ = writeln!(s, "{name},{v:.12e},{method}");
        };
        row(
            "C",
            self.c,
            &format!("{sup}; covector norm in orthonormal tangent frames (Euclidean plane / round sphere)"),
        );
        row("M", self.m, &sup);
        row("Lambda", self.lambda, &sup.replace("sup", "inf"));
        row("delta", self.delta, "min(epsilon/(K-1), f_1/K)");
        row("sup_I", self.sup_i, "normalized density at centers and boundary samples");
        for (i, sg) in self.sigma.iter().enumerate() {
            row(
                &format!("sigma_{}", i + 1),
                *sg,
                &format!("hull perimeter of {} mapped boundary samples", self.boundary_samples),
            );
        }
        let _ = writeln!(s, "n_eps_bound,observed,pass");
        match self.observed_outer_iterations {
            Some(n) => {
                let _ = writeln!(s, "{:.12e},{n},{}", self.n_eps_bound, self.pass().unwrap_or(false));
            }
            None => {
                let _ = writeln!(s, "{:.12e},,", self.n_eps_bound);
            }
        }
        s
    }
}
