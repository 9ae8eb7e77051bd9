//! Exact discrete reference: the source grid becomes a cloud of atoms, the
//! transport linear program between atoms and targets is solved exactly, and
//! the result is compared against a partition produced by the scheme.

pub mod simplex;

use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;

use crate::cost::CostModel;
use crate::error::{Error, Result};
use crate::geometry::{Point, SourceMeasure};
use crate::partition::{PartitionResult, TargetSpec};

pub use simplex::{solve_transport, solve_transport_brute_force, TransportSolution};

/// Largest `N·K` accepted by [`solve_exact`].
pub const MAX_PROBLEM_SIZE: usize = 1_000_000;
/// Slack in the pairwise exchange inequality.
pub const C_MONOTONICITY_TOL: f64 = 1e-9;
/// Flows below this are treated as zero when reading off the plan support.
const FLOW_ZERO: f64 = 1e-15;

/// Atoms with masses.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedCloud {
    pub points: Vec<Point>,
    pub masses: Vec<f64>,
}

impl WeightedCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// One atom per grid cell at its center, carrying the cell's mass.
pub fn discretize_source(measure: &SourceMeasure) -> WeightedCloud {
    WeightedCloud {
        points: measure.grid().centers().copied().collect(),
        masses: measure.cell_masses().to_vec(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePlan {
    pub sources: WeightedCloud,
    pub targets: WeightedCloud,
    /// Row-major `N x K`.
    pub flow: Vec<f64>,
    pub total_cost: f64,
}

impl DiscretePlan {
    pub fn n(&self) -> usize {
        self.sources.len()
    }

    pub fn k(&self) -> usize {
        self.targets.len()
    }

    pub fn flow_at(&self, n: usize, k: usize) -> f64 {
        self.flow[n * self.k() + k]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.flow.chunks(self.k()).map(|r| r.iter().sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.k()];
        for row in self.flow.chunks(self.k()) {
            for (acc, x) in c.iter_mut().zip(row) {
                *acc += x;
            }
        }
        c
    }

    /// Target receiving the largest share of each atom (smallest index on ties).
    pub fn destinations(&self) -> Vec<usize> {
        self.flow
            .chunks(self.k())
            .map(|row| {
                let mut arg = 0;
                for (k, x) in row.iter().enumerate() {
                    if *x > row[arg] {
                        arg = k;
                    }
                }
                arg
            })
            .collect()
    }

    /// `(atom, target)` pairs carrying positive flow.
    pub fn support(&self) -> Vec<(usize, usize)> {
        (0..self.flow.len())
            .filter(|e| self.flow[*e] > FLOW_ZERO)
            .map(|e| (e / self.k(), e % self.k()))
            .collect()
    }

    /// Largest deviation of row and column sums from the prescribed masses.
    pub fn feasibility_error(&self) -> f64 {
        let rows = self.row_sums().into_iter().zip(&self.sources.masses);
        let cols = self.column_sums().into_iter().zip(&self.targets.masses);
        rows.chain(cols)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `source_idx,target_idx,mass` for every positive entry, 1-based.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("source_idx,target_idx,mass\n");
        for (n, k) in self.support() {
            let _ = writeln!(out, "{},{},{}", n + 1, k + 1, self.flow_at(n, k));
        }
        out
    }
}

fn cost_matrix(sources: &WeightedCloud, targets: &[Point], cost: &CostModel) -> Result<Vec<f64>> {
    let k = targets.len();
    (0..sources.len() * k)
        .into_par_iter()
        .map(|e| cost.evaluate(&sources.points[e / k], &targets[e % k]))
        .collect()
}

/// Exact optimal plan for arbitrary target masses.
pub fn solve_exact_with_masses(
    sources: &WeightedCloud,
    targets: &[Point],
    target_masses: &[f64],
    cost: &CostModel,
) -> Result<DiscretePlan> {
    if targets.len() != target_masses.len() {
        return Err(Error::Oracle("target points and masses differ in length".into()));
    }
    let size = sources.len() * targets.len();
    if size > MAX_PROBLEM_SIZE {
        return Err(Error::Oracle(format!(
            "problem size N·K = {size} exceeds {MAX_PROBLEM_SIZE}; use a coarser oracle grid"
        )));
    }
    let c = cost_matrix(sources, targets, cost)?;
    let sol = solve_transport(&sources.masses, target_masses, &c)?;
    Ok(DiscretePlan {
        sources: sources.clone(),
        targets: WeightedCloud {
            points: targets.to_vec(),
            masses: target_masses.to_vec(),
        },
        flow: sol.flow,
        total_cost: sol.cost,
    })
}

/// Exact optimal plan onto the prescribed target measure.
pub fn solve_exact(sources: &WeightedCloud, targets: &TargetSpec, cost: &CostModel) -> Result<DiscretePlan> {
    solve_exact_with_masses(sources, targets.points(), targets.masses(), cost)
}

/// Scheme cost `Σ mass_n · c(atom_n, x̄_{assigned})`.
pub fn assignment_cost(sources: &WeightedCloud, targets: &[Point], assignment: &[usize], cost: &CostModel) -> Result<f64> {
    let mut total = 0.0;
    for ((p, m), a) in sources.points.iter().zip(&sources.masses).zip(assignment) {
        total += m * cost.evaluate(p, &targets[*a])?;
    }
    Ok(total)
}

/// `max |Dc(x, x̄_k)|` over the atoms, a Lipschitz constant for every `φ_d`.
pub fn potential_lipschitz(sources: &WeightedCloud, targets: &[Point], cost: &CostModel) -> Result<f64> {
    let mut lip: f64 = 0.0;
    for p in &sources.points {
        for y in targets {
            lip = lip.max(cost.dx(p, y)?.norm());
        }
    }
    Ok(lip)
}

/// Scheme partition measured against the exact plans.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleComparison {
    /// LP optimum onto the prescribed masses.
    pub lp_cost: f64,
    pub scheme_cost: f64,
    /// `scheme_cost − lp_cost`.
    pub cost_gap: f64,
    pub relative_gap: f64,
    /// LP optimum onto the partition's own masses.
    pub matched_lp_cost: f64,
    /// `scheme_cost − matched_lp_cost`; the LP is a relaxation so this is ≥ −1e−12.
    pub matched_gap: f64,
    pub disagreeing_atoms: usize,
    pub disagreement_fraction: f64,
    /// Largest partition margin among disagreeing atoms.
    pub max_disagreement_margin: f64,
    /// `2·Lip·h`.
    pub boundary_band: f64,
    /// Fraction of atoms with margin inside the band.
    pub boundary_fraction: f64,
    /// `‖G − column sums‖∞`.
    pub mass_discrepancy: f64,
    pub lp_feasibility_error: f64,
}

impl OracleComparison {
    pub fn relaxation_holds(&self) -> bool {
        self.matched_gap >= -1e-12
    }

    pub fn disagreement_in_band(&self) -> bool {
        self.disagreeing_atoms == 0 || self.max_disagreement_margin <= self.boundary_band
    }

    pub fn pass(&self, relative_tolerance: f64) -> bool {
        self.relative_gap.abs() <= relative_tolerance && self.disagreement_in_band() && self.relaxation_holds()
    }

    /// `metric,value` rows.
    pub fn to_csv(&self) -> String {
        let rows: [(&str, f64); 13] = [
            ("lp_cost", self.lp_cost),
            ("scheme_cost", self.scheme_cost),
            ("cost_gap", self.cost_gap),
            ("relative_gap", self.relative_gap),
            ("matched_lp_cost", self.matched_lp_cost),
            ("matched_gap", self.matched_gap),
            ("disagreeing_atoms", self.disagreeing_atoms as f64),
            ("disagreement_fraction", self.disagreement_fraction),
            ("max_disagreement_margin", self.max_disagreement_margin),
            ("boundary_band", self.boundary_band),
            ("boundary_fraction", self.boundary_fraction),
            ("mass_discrepancy", self.mass_discrepancy),
            ("lp_feasibility_error", self.lp_feasibility_error),
        ];
        let mut out = String::from("metric,value\n");
        for (name, v) in rows {
            let _ = writeln!(out, "{name},{v}");
        }
        out
    }
}

/// Compares a partition of the atoms in `plan` (cell `n` is atom `n`) with
/// the plan. `spacing` is the grid spacing `h` that produced the atoms.
pub fn compare_with_scheme(
    plan: &DiscretePlan,
    partition: &PartitionResult,
    cost: &CostModel,
    spacing: f64,
) -> Result<OracleComparison> {
    if partition.assignment.len() != plan.n() || partition.masses.len() != plan.k() {
        return Err(Error::Oracle("partition does not match the plan's atoms and targets".into()));
    }
    let targets = &plan.targets.points;
    let scheme_cost = assignment_cost(&plan.sources, targets, &partition.assignment, cost)?;
    let matched = solve_exact_with_masses(&plan.sources, targets, &partition.masses, cost)?;
    let lip = potential_lipschitz(&plan.sources, targets, cost)?;
    let band = 2.0 * lip * spacing;
    let dest = plan.destinations();
    let mut disagreeing = 0;
    let mut max_margin: f64 = 0.0;
    for ((lp, sc), m) in dest.iter().zip(&partition.assignment).zip(&partition.margin) {
        if lp != sc {
            disagreeing += 1;
            max_margin = max_margin.max(*m);
        }
    }
    let n = plan.n().max(1) as f64;
    let in_band = partition.margin.iter().filter(|m| **m <= band).count();
    let mass_discrepancy = partition
        .masses
        .iter()
        .zip(plan.column_sums())
        .map(|(g, c)| (g - c).abs())
        .fold(0.0, f64::max);
    let gap = scheme_cost - plan.total_cost;
    Ok(OracleComparison {
        lp_cost: plan.total_cost,
        scheme_cost,
        cost_gap: gap,
        relative_gap: gap / plan.total_cost.abs().max(f64::MIN_POSITIVE),
        matched_lp_cost: matched.total_cost,
        matched_gap: scheme_cost - matched.total_cost,
        disagreeing_atoms: disagreeing,
        disagreement_fraction: disagreeing as f64 / n,
        max_disagreement_margin: max_margin,
        boundary_band: band,
        boundary_fraction: in_band as f64 / n,
        mass_discrepancy,
        lp_feasibility_error: plan.feasibility_error(),
    })
}

/// Result of the sampled pairwise exchange test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonotonicityCheck {
    pub pairs: usize,
    pub violations: usize,
}

/// Samples pairs `(a → i, b → j)` from `pairs` and counts those with
/// `c(a,x̄_i) + c(b,x̄_j) > c(a,x̄_j) + c(b,x̄_i) + 1e−9`. Every pair is
/// tested when `pair_samples` covers all of them.
pub fn check_c_monotonicity<R: Rng + ?Sized>(
    pairs: &[(Point, usize)],
    targets: &[Point],
    cost: &CostModel,
    pair_samples: usize,
    rng: &mut R,
) -> Result<MonotonicityCheck> {
    let n = pairs.len();
    let total = n * n.saturating_sub(1) / 2;
    let test = |a: usize, b: usize| -> Result<bool> {
        let ((pa, i), (pb, j)) = (&pairs[a], &pairs[b]);
        if i == j {
            return Ok(false);
        }
        let (ti, tj) = (&targets[*i], &targets[*j]);
        let lhs = cost.evaluate(pa, ti)? + cost.evaluate(pb, tj)?;
        let rhs = cost.evaluate(pa, tj)? + cost.evaluate(pb, ti)?;
        Ok(lhs > rhs + C_MONOTONICITY_TOL)
    };
    let mut out = MonotonicityCheck { pairs: 0, violations: 0 };
    if total <= pair_samples {
        for a in 0..n {
            for b in a + 1..n {
                out.pairs += 1;
                out.violations += test(a, b)? as usize;
            }
        }
    } else {
        for _ in 0..pair_samples {
            let a = rng.gen_range(0..n);
            let mut b = rng.gen_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            out.pairs += 1;
            out.violations += test(a, b)? as usize;
        }
    }
    Ok(out)
}

/// Atom/target pairs of the plan support.
pub fn plan_pairs(plan: &DiscretePlan) -> Vec<(Point, usize)> {
    plan.support()
        .into_iter()
        .map(|(n, k)| (plan.sources.points[n], k))
        .collect()
}

/// Atom/target pairs of a partition, optionally restricted to margins above `min_margin`.
pub fn assignment_pairs(sources: &WeightedCloud, partition: &PartitionResult, min_margin: f64) -> Vec<(Point, usize)> {
    sources
        .points
        .iter()
        .zip(&partition.assignment)
        .zip(&partition.margin)
        .filter(|(_, m)| **m > min_margin)
        .map(|((p, a), _)| (*p, *a))
        .collect()
}
