//! Coordinate-wise weight adjustment.
//!
//! Starting from `d = (1, M, …, M)`, every outer sweep visits `i = 2..K` in
//! order. An index whose mass is within `δ` of its target is left alone;
//! otherwise its mass is at most `f_i − δ` and `d_i` is lowered until
//! `G^i(d) ∈ (f_i, f_i + δ)`. The run stops after the first sweep that
//! changes nothing.

use crate::bounds;
use crate::error::{Error, Result};
use crate::partition::{Partitioner, WeightVector};

/// `δ = min{ε/(K−1), f_1/K}`; `None` when `K < 2`.
pub fn compute_delta(epsilon: f64, k: usize, f1: f64) -> Option<f64> {
    (k >= 2).then(|| (epsilon / (k - 1) as f64).min(f1 / k as f64))
}

/// All `|α̂_i − f_i| < ε` (strict).
pub fn verify_error_bound(alpha: &[f64], f: &[f64], epsilon: f64) -> bool {
    alpha.len() == f.len() && alpha.iter().zip(f).all(|(a, b)| (a - b).abs() < epsilon)
}

/// Rejects grids whose spacing exceeds `δ / factor`.
pub fn check_resolution(h: f64, resolution: usize, delta: f64, factor: f64) -> Result<()> {
    let limit = delta / factor;
    if h > limit {
        let needed = (resolution as f64 * h / limit).ceil() as usize;
        return Err(Error::Scheme(format!(
            "grid spacing h = {h:.3e} exceeds δ/{factor} = {limit:.3e}; use resolution ≥ {needed}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub epsilon: f64,
    /// Safety cap on outer sweeps.
    pub max_outer_iterations: usize,
    /// Grid spacing must satisfy `h ≤ δ / resolution_factor`.
    pub resolution_factor: f64,
    /// Allowed quadrature noise, as a fraction of `δ`, before a mass
    /// observation counts as non-monotone.
    pub bisection_tolerance: f64,
    pub max_halvings: usize,
    pub max_bisections: usize,
}

impl SchemeConfig {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            max_outer_iterations: 10_000,
            resolution_factor: 4.0,
            bisection_tolerance: 0.1,
            max_halvings: 200,
            max_bisections: 200,
        }
    }
}

/// One inner step `(n, i)`; skipped indices have `d_old == d_new`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub outer: usize,
    /// Position in the sweep, 1-based.
    pub inner: usize,
    /// Target index, zero-based.
    pub target_index: usize,
    pub d_old: f64,
    pub d_new: f64,
    pub g_before: f64,
    pub g_after: f64,
    pub adjusted: bool,
    /// Mass evaluations spent in this step.
    pub evaluations: usize,
    /// Full mass vector after the step.
    pub masses_after: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SchemeTrace {
    pub initial_d: Vec<f64>,
    pub initial_masses: Vec<f64>,
    pub steps: Vec<TraceStep>,
    /// Sweeps that changed at least one weight (`n_ε` on success).
    pub outer_iterations: usize,
    /// Sweeps run, including the final unchanged one.
    pub sweeps: usize,
    /// Accepted decreases per target.
    pub decreases: Vec<usize>,
    pub mass_evaluations: usize,
    pub nonmonotone_observations: usize,
    pub final_d: Vec<f64>,
    pub final_alpha: Vec<f64>,
}

impl SchemeTrace {
    /// Total inner steps that changed a weight.
    pub fn total_decreases(&self) -> usize {
        self.decreases.iter().sum()
    }

    /// Violations of `Φ_δ` membership, weight monotonicity and `d_1 = 1`.
    pub fn invariant_violations(&self, f: &[f64], delta: f64) -> Vec<String> {
        let mut out = Vec::new();
        let mut last = self.initial_d.clone();
        for s in &self.steps {
            for (k, g) in s.masses_after.iter().enumerate().skip(1) {
                if *g > f[k] + delta {
                    out.push(format!(
                        "step ({}, {}): G^{} = {g} > f + δ = {}",
                        s.outer,
                        s.inner,
                        k + 1,
                        f[k] + delta
                    ));
                }
            }
            let i = s.target_index;
            if i == 0 {
                out.push("d_1 was modified".into());
            }
            if s.d_old != last[i] || s.d_new > s.d_old {
                out.push(format!(
                    "step ({}, {}): d_{} went {} -> {} (previous {})",
                    s.outer,
                    s.inner,
                    i + 1,
                    s.d_old,
                    s.d_new,
                    last[i]
                ));
            }
            last[i] = s.d_new;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeResult {
    pub d: WeightVector,
    pub alpha: Vec<f64>,
    pub delta: Option<f64>,
    pub trace: SchemeTrace,
}

/// `d = (1, M, …, M)` with `M` from [`bounds::constants_m_lambda`]; checks
/// that every cell other than the first is empty.
pub fn initial_weights(p: &Partitioner) -> Result<WeightVector> {
    let k = p.k();
    if k < 2 {
        return Ok(WeightVector::ones(k));
    }
    let (m, _) = bounds::constants_m_lambda(p.cost(), p.targets(), p.measure().grid())?;
    let mut d = vec![m; k];
    d[0] = 1.0;
    let d = WeightVector::new(d)?;
    let g = p.masses(&d);
    if let Some((i, gi)) = g.iter().enumerate().skip(1).find(|(_, g)| **g != 0.0) {
        return Err(Error::Scheme(format!(
            "M underestimated; refine sup sampling (G^{} = {gi} after initialization)",
            i + 1
        )));
    }
    Ok(d)
}

/// Outcome of one weight decrease.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjustment {
    pub d_new: f64,
    pub masses: Vec<f64>,
    pub evaluations: usize,
    pub nonmonotone: usize,
}

/// Lowers `d_i` until `G^i ∈ (f_i, f_i + δ)`.
///
/// Requires `G^i(d) ≤ f_i − δ`. Works on `s = log d_i`: `s` drops by `log 2`
/// until `G^i > f_i`, then the bracket is bisected toward `f_i + δ/2`, stopping
/// at the first iterate strictly inside the window.
pub fn adjust_weight(
    p: &Partitioner,
    d: &WeightVector,
    i: usize,
    f_i: f64,
    delta: f64,
    cfg: &SchemeConfig,
) -> Result<Adjustment> {
    if i == 0 || i >= p.k() {
        return Err(Error::Scheme(format!("cannot adjust weight {}", i + 1)));
    }
    let g0 = p.masses(d);
    if g0[i] > f_i - delta {
        return Err(Error::Scheme(format!(
            "adjust_weight needs G^{} ≤ f - δ = {}, found {}",
            i + 1,
            f_i - delta,
            g0[i]
        )));
    }
    let noise = cfg.bisection_tolerance * delta;
    let mut evaluations = 1;
    let mut nonmonotone = 0;
    let eval = |s: f64, evaluations: &mut usize| -> Result<(f64, Vec<f64>)> {
        let di = s.exp();
        let w = WeightVector::new(d.as_slice().to_vec())?.with(i, di);
        *evaluations += 1;
        Ok((di, p.masses(&w)))
    };
    let inside = |g: f64| g > f_i && g < f_i + delta;

    let mut s_hi = d.get(i).ln();
    let mut g_hi = g0[i];
    let mut s_lo = s_hi;
    let mut lo = None;
    for _ in 0..cfg.max_halvings {
        s_lo -= std::f64::consts::LN_2;
        let (di, g) = eval(s_lo, &mut evaluations)?;
        if g[i] < g_hi - noise {
            nonmonotone += 1;
        }
        if g[i] > f_i {
            if inside(g[i]) {
                return Ok(Adjustment {
                    d_new: di,
                    masses: g,
                    evaluations,
                    nonmonotone,
                });
            }
            lo = Some(g[i]);
            break;
        }
        s_hi = s_lo;
        g_hi = g[i];
    }
    let Some(mut g_lo) = lo else {
        return Err(Error::Scheme(format!(
            "target mass unreachable: G^{} stayed ≤ {f_i} after {} halvings of d_{}",
            i + 1,
            cfg.max_halvings,
            i + 1
        )));
    };

    let target = f_i + 0.5 * delta;
    for _ in 0..cfg.max_bisections {
        let s_mid = 0.5 * (s_lo + s_hi);
        if s_mid <= s_lo || s_mid >= s_hi {
            break;
        }
        let (di, g) = eval(s_mid, &mut evaluations)?;
        if g[i] > g_lo + noise || g[i] < g_hi - noise {
            nonmonotone += 1;
        }
        if inside(g[i]) {
            return Ok(Adjustment {
                d_new: di,
                masses: g,
                evaluations,
                nonmonotone,
            });
        }
        if g[i] > target {
            s_lo = s_mid;
            g_lo = g[i];
        } else {
            s_hi = s_mid;
            g_hi = g[i];
        }
    }
    Err(Error::Scheme(format!(
        "mass jump exceeds window: G^{} jumps from {g_hi} (d = {:e}) to {g_lo} (d = {:e}) \
         across ({f_i}, {}); refine the grid",
        i + 1,
        s_hi.exp(),
        s_lo.exp(),
        f_i + delta
    )))
}

/// Runs the scheme on the partitioner's grid.
pub fn run_scheme(p: &Partitioner, cfg: &SchemeConfig) -> Result<SchemeResult> {
    let k = p.k();
    let f = p.targets().masses().to_vec();
    if k == 1 {
        let d = WeightVector::ones(1);
        let alpha = p.masses(&d);
        let trace = SchemeTrace {
            initial_d: vec![1.0],
            initial_masses: alpha.clone(),
            decreases: vec![0],
            mass_evaluations: 1,
            final_d: vec![1.0],
            final_alpha: alpha.clone(),
            ..SchemeTrace::default()
        };
        return Ok(SchemeResult {
            d,
            alpha,
            delta: None,
            trace,
        });
    }
    let f_min = f.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(cfg.epsilon > 0.0 && cfg.epsilon < f_min) {
        return Err(Error::Scheme(format!(
            "epsilon = {} must lie in (0, min f_i = {f_min})",
            cfg.epsilon
        )));
    }
    let delta = compute_delta(cfg.epsilon, k, f[0]).expect("K ≥ 2");
    let grid = p.measure().grid();
    check_resolution(grid.spacing(), grid.resolution(), delta, cfg.resolution_factor)?;

    let mut d = initial_weights(p)?;
    let mut masses = p.masses(&d);
    let mut trace = SchemeTrace {
        initial_d: d.as_slice().to_vec(),
        initial_masses: masses.clone(),
        decreases: vec![0; k],
        mass_evaluations: 1,
        ..SchemeTrace::default()
    };

    let mut n = 0;
    loop {
        let mut changed = false;
        for (inner, i) in (1..k).enumerate() {
            let g_before = masses[i];
            let d_old = d.get(i);
            if (g_before - f[i]).abs() < delta {
                trace.steps.push(TraceStep {
                    outer: n,
                    inner: inner + 1,
                    target_index: i,
                    d_old,
                    d_new: d_old,
                    g_before,
                    g_after: g_before,
                    adjusted: false,
                    evaluations: 0,
                    masses_after: masses.clone(),
                });
                continue;
            }
            let adj = match adjust_weight(p, &d, i, f[i], delta, cfg) {
                Ok(a) => a,
                Err(e) => {
                    trace.sweeps = n + 1;
                    trace.outer_iterations = n;
                    trace.final_d = d.as_slice().to_vec();
                    trace.final_alpha = masses.clone();
                    return Err(Error::SchemeAbort {
                        reason: e.to_string(),
                        trace: Box::new(trace),
                    });
                }
            };
            d.set(i, adj.d_new);
            masses = adj.masses;
            trace.mass_evaluations += adj.evaluations;
            trace.nonmonotone_observations += adj.nonmonotone;
            trace.decreases[i] += 1;
            trace.steps.push(TraceStep {
                outer: n,
                inner: inner + 1,
                target_index: i,
                d_old,
                d_new: adj.d_new,
                g_before,
                g_after: masses[i],
                adjusted: true,
                evaluations: adj.evaluations,
                masses_after: masses.clone(),
            });
            changed = true;
        }
        trace.sweeps = n + 1;
        if !changed {
            break;
        }
        n += 1;
        trace.outer_iterations = n;
        // with two targets the single adjustment already lands in the window
        if k == 2 {
            break;
        }
        if n >= cfg.max_outer_iterations {
            trace.final_d = d.as_slice().to_vec();
            trace.final_alpha = masses.clone();
            return Err(Error::SchemeAbort {
                reason: format!(
                    "no convergence after {n} outer iterations; the quadrature is likely too coarse for ε = {}",
                    cfg.epsilon
                ),
                trace: Box::new(trace),
            });
        }
    }
    trace.final_d = d.as_slice().to_vec();
    trace.final_alpha = masses.clone();
    if !verify_error_bound(&masses, &f, cfg.epsilon) {
        return Err(Error::SchemeAbort {
            reason: format!("terminated with masses {masses:?} outside ε = {} of {f:?}", cfg.epsilon),
            trace: Box::new(trace),
        });
    }
    Ok(SchemeResult {
        d,
        alpha: masses,
        delta: Some(delta),
        trace,
    })
}
