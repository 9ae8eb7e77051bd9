//! The potential `φ_d(x) = max_i [-c(x, x̄_i) - log d_i]`, the induced
//! assignment of grid cells to targets, and the cell masses `G^i(d)`.
//!
//! Cells are kept implicit: every grid cell is labelled by the target that
//! attains the maximum at its center (smallest index on ties).

use rand::Rng;
use rayon::prelude::*;

use crate::bounds;
use crate::cost::CostModel;
use crate::error::{Error, Result};
use crate::geometry::{Point, SourceMeasure, Surface};

/// Allowed deviation of `Σ f_i` from one.
pub const MASS_SUM_TOL: f64 = 1e-12;

/// Target points `x̄_i` with prescribed masses `f_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSpec {
    surface: Surface,
    points: Vec<Point>,
    masses: Vec<f64>,
    min_distance: f64,
}

impl TargetSpec {
    pub fn new(surface: Surface, points: Vec<Point>, masses: Vec<f64>) -> Result<Self> {
        let problems = Self::violations(surface, &points, &masses);
        if !problems.is_empty() {
            return Err(Error::Partition(problems.join("; ")));
        }
        let min_distance = min_pairwise_distance(&points);
        Ok(Self {
            surface,
            points,
            masses,
            min_distance,
        })
    }

    /// Every violated constraint, for reporting all of them at once.
    pub fn violations(surface: Surface, points: &[Point], masses: &[f64]) -> Vec<String> {
        let mut out = Vec::new();
        let k = points.len();
        if k == 0 {
            out.push("at least one target is required".to_string());
        }
        if masses.len() != k {
            out.push(format!("{} target points but {} masses", k, masses.len()));
        }
        for (i, p) in points.iter().enumerate() {
            if !p.is_valid_on(surface) {
                out.push(format!("target {} is not a valid point of the {surface:?}", i + 1));
            }
        }
        for (i, &f) in masses.iter().enumerate() {
            let ok = if k == 1 { f == 1.0 } else { f > 0.0 && f < 1.0 };
            if !ok {
                out.push(format!(
                    "mass f_{} = {f} must lie in (0, 1) (or equal 1 for a single target)",
                    i + 1
                ));
            }
        }
        let sum: f64 = masses.iter().sum();
        if (sum - 1.0).abs() > MASS_SUM_TOL {
            out.push(format!("masses must sum to 1 within {MASS_SUM_TOL:e}; they sum to {sum}"));
        }
        for a in 0..k {
            for b in a + 1..k {
                if points[a].distance(&points[b]) == 0.0 {
                    out.push(format!("targets {} and {} coincide", a + 1, b + 1));
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn surface(&self) -> Surface {
        self.surface
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn min_pairwise_distance(&self) -> f64 {
        self.min_distance
    }
}

fn min_pairwise_distance(points: &[Point]) -> f64 {
    let mut m = f64::INFINITY;
    for a in 0..points.len() {
        for b in a + 1..points.len() {
            m = m.min(points[a].distance(&points[b]));
        }
    }
    m
}

/// Positive weights `d`; the scheme keeps `d_1 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(d: Vec<f64>) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::Partition("weight vector is empty".into()));
        }
        if let Some((i, v)) = d.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Partition(format!(
                "weight d_{} = {v} must be positive and finite",
                i + 1
            )));
        }
        Ok(Self(d))
    }

    pub fn ones(k: usize) -> Self {
        Self(vec![1.0; k])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `d_i`, zero-based.
    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, value: f64) {
        assert!(value.is_finite() && value > 0.0, "weights must be positive");
        self.0[i] = value;
    }

    pub fn with(&self, i: usize, value: f64) -> Self {
        let mut w = self.clone();
        w.set(i, value);
        w
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self(self.0.iter().map(|v| v * lambda).collect())
    }

    /// `log(d_k / d_1)` for each `k`: the potential shift relative to target 1.
    fn relative_logs(&self) -> Vec<f64> {
        self.0.iter().map(|v| (v / self.0[0]).ln()).collect()
    }
}

/// `φ_d(x)` and the smallest index attaining it (zero-based).
pub fn potential_at(
    cost: &CostModel,
    targets: &TargetSpec,
    d: &WeightVector,
    x: &Point,
) -> Result<(f64, usize)> {
    check_len(targets, d)?;
    let mut best = (f64::NEG_INFINITY, 0);
    for (k, y) in targets.points().iter().enumerate() {
        let v = -cost.evaluate(x, y)? - d.get(k).ln();
        if v > best.0 {
            best = (v, k);
        }
    }
    Ok(best)
}

fn check_len(targets: &TargetSpec, d: &WeightVector) -> Result<()> {
    if targets.len() != d.len() {
        return Err(Error::Partition(format!(
            "{} targets but {} weights",
            targets.len(),
            d.len()
        )));
    }
    Ok(())
}

/// Per-cell labels, masses and margins for one weight vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionResult {
    /// Winning target per grid cell, zero-based.
    pub assignment: Vec<usize>,
    /// `G^i(d)` for each target.
    pub masses: Vec<f64>,
    /// Best minus second-best potential value per cell (`+∞` when `K = 1`).
    pub margin: Vec<f64>,
}

impl PartitionResult {
    pub fn cell_count(&self, i: usize) -> usize {
        self.assignment.iter().filter(|&&a| a == i).count()
    }
}

/// Cost table `c(center_n, x̄_k)` over a fixed grid and target set, for fast
/// repeated mass evaluation at varying weights.
#[derive(Debug, Clone)]
pub struct Partitioner<'a> {
    cost: &'a CostModel,
    targets: &'a TargetSpec,
    measure: &'a SourceMeasure,
    table: Vec<f64>,
}

impl<'a> Partitioner<'a> {
    pub fn new(cost: &'a CostModel, targets: &'a TargetSpec, measure: &'a SourceMeasure) -> Result<Self> {
        if cost.surface() != measure.grid().domain().surface()
            || targets.surface() != cost.surface()
        {
            return Err(Error::Partition(format!(
                "cost lives on the {:?} but the domain is on the {:?} and targets on the {:?}",
                cost.surface(),
                measure.grid().domain().surface(),
                targets.surface()
            )));
        }
        let k = targets.len();
        let table = measure
            .grid()
            .cells()
            .par_iter()
            .map(|c| {
                targets
                    .points()
                    .iter()
                    .map(|y| cost.evaluate(&c.center, y))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<Vec<f64>>>>()?
            .into_iter()
            .flatten()
            .collect::<Vec<f64>>();
        debug_assert_eq!(table.len(), k * measure.grid().len());
        Ok(Self {
            cost,
            targets,
            measure,
            table,
        })
    }

    pub fn cost(&self) -> &CostModel {
        self.cost
    }

    pub fn targets(&self) -> &TargetSpec {
        self.targets
    }

    pub fn measure(&self) -> &SourceMeasure {
        self.measure
    }

    pub fn k(&self) -> usize {
        self.targets.len()
    }

    /// `c(center_n, x̄_k)`.
    pub fn cost_at(&self, n: usize, k: usize) -> f64 {
        self.table[n * self.k() + k]
    }

    /// (label, margin) of one cell. Values are shifted by `log d_1`, which
    /// leaves the comparison unchanged and makes it depend on weight ratios only.
    fn classify(&self, n: usize, shifts: &[f64]) -> (usize, f64) {
        let k = self.k();
        let row = &self.table[n * k..(n + 1) * k];
        let mut best = f64::NEG_INFINITY;
        let mut second = f64::NEG_INFINITY;
        let mut arg = 0;
        for (j, (c, s)) in row.iter().zip(shifts).enumerate() {
            let v = -c - s;
            if v > best {
                second = best;
                best = v;
                arg = j;
            } else if v > second {
                second = v;
            }
        }
        (arg, best - second)
    }

    fn labels(&self, d: &WeightVector) -> Vec<(usize, f64)> {
        assert_eq!(d.len(), self.k(), "weight vector length must match targets");
        let shifts = d.relative_logs();
        (0..self.measure.grid().len())
            .into_par_iter()
            .map(|n| self.classify(n, &shifts))
            .collect()
    }

    /// `G(d)`, summed in grid order.
    pub fn masses(&self, d: &WeightVector) -> Vec<f64> {
        let mut g = vec![0.0; self.k()];
        for ((label, _), m) in self.labels(d).into_iter().zip(self.measure.cell_masses()) {
            g[label] += m;
        }
        g
    }

    pub fn assign(&self, d: &WeightVector) -> PartitionResult {
        let labels = self.labels(d);
        let mut masses = vec![0.0; self.k()];
        for ((label, _), m) in labels.iter().zip(self.measure.cell_masses()) {
            masses[*label] += m;
        }
        let (assignment, margin) = labels.into_iter().unzip();
        PartitionResult {
            assignment,
            masses,
            margin,
        }
    }

    /// Margin of target `i` at an arbitrary point: `v_i - max_{k≠i} v_k`.
    pub fn margin_of(&self, d: &WeightVector, i: usize, x: &Point) -> Result<f64> {
        let shifts = d.relative_logs();
        let mut own = f64::NAN;
        let mut other = f64::NEG_INFINITY;
        for (k, y) in self.targets.points().iter().enumerate() {
            let v = -self.cost.evaluate(x, y)? - shifts[k];
            if k == i {
                own = v;
            } else {
                other = other.max(v);
            }
        }
        Ok(own - other)
    }
}

/// Assignment of every grid cell by its center.
pub fn assign_cells(
    measure: &SourceMeasure,
    cost: &CostModel,
    targets: &TargetSpec,
    d: &WeightVector,
) -> Result<PartitionResult> {
    check_len(targets, d)?;
    Ok(Partitioner::new(cost, targets, measure)?.assign(d))
}

/// Masses at the two ends of the `d_i` range (others held at 1):
/// `d_i = 1e-8 Λ̂` and `d_i = 1e8 M̂`.
pub fn masses_limit_probe(p: &Partitioner, i: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let k = p.k();
    if k < 2 {
        return Err(Error::Partition("limit probe needs at least two targets".into()));
    }
    if i >= k {
        return Err(Error::Partition(format!("target index {} out of range", i + 1)));
    }
    let (m, lambda) = bounds::constants_m_lambda(p.cost(), p.targets(), p.measure().grid())?;
    let base = WeightVector::ones(k);
    let tiny = p.masses(&base.with(i, 1e-8 * lambda));
    let huge = p.masses(&base.with(i, 1e8 * m));
    Ok((tiny, huge))
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellConvexityStatus {
    /// No grid cell is assigned to the target.
    EmptyCell,
    Checked,
}

/// Sampled c-segment test of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellConvexityReport {
    pub target_index: usize,
    pub status: CellConvexityStatus,
    pub pairs: usize,
    pub violating_pairs: usize,
    pub unreliable_pairs: usize,
    pub points_checked: usize,
    /// Smallest own-cell margin seen along the c-segments.
    pub worst_margin: f64,
}

impl CellConvexityReport {
    pub fn violation_fraction(&self) -> f64 {
        if self.pairs == 0 {
            0.0
        } else {
            self.violating_pairs as f64 / self.pairs as f64
        }
    }
}

/// Interior points per sampled c-segment.
pub const C_SEGMENT_POINTS: usize = 16;

/// Samples pairs of cell centers assigned to target `i`, joins them by the
/// c-segment with respect to `x̄_i` and checks that the interior points stay
/// in cell `i` up to a margin of `-h`.
pub fn check_cell_c_convexity<R: Rng + ?Sized>(
    p: &Partitioner,
    partition: &PartitionResult,
    d: &WeightVector,
    i: usize,
    pair_samples: usize,
    rng: &mut R,
) -> Result<CellConvexityReport> {
    let members: Vec<usize> = partition
        .assignment
        .iter()
        .enumerate()
        .filter(|(_, &a)| a == i)
        .map(|(n, _)| n)
        .collect();
    let mut rep = CellConvexityReport {
        target_index: i,
        status: CellConvexityStatus::EmptyCell,
        pairs: 0,
        violating_pairs: 0,
        unreliable_pairs: 0,
        points_checked: 0,
        worst_margin: f64::INFINITY,
    };
    if members.is_empty() {
        return Ok(rep);
    }
    rep.status = CellConvexityStatus::Checked;
    let cost = p.cost();
    let y = &p.targets().points()[i];
    let cells = p.measure().grid().cells();
    let tol = p.measure().grid().spacing();
    'pairs: for _ in 0..pair_samples {
        let xa = cells[members[rng.gen_range(0..members.len())]].center;
        let xb = cells[members[rng.gen_range(0..members.len())]].center;
        let pa = -cost.dy(&xa, y)?;
        let pb = -cost.dy(&xb, y)?;
        let mut worst = f64::INFINITY;
        let mut guess = xa;
        for s in 1..=C_SEGMENT_POINTS {
            let t = s as f64 / (C_SEGMENT_POINTS + 1) as f64;
            let q = pa * (1.0 - t) + pb * t;
            let Ok(x) = cost.c_exp_target(y, &q, &guess) else {
                rep.unreliable_pairs += 1;
                continue 'pairs;
            };
            worst = worst.min(p.margin_of(d, i, &x)?);
            guess = x;
        }
        rep.pairs += 1;
        rep.points_checked += C_SEGMENT_POINTS;
        rep.worst_margin = rep.worst_margin.min(worst);
        if worst < -tol {
            rep.violating_pairs += 1;
        }
    }
    Ok(rep)
}
