//! Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero if any
//! criterion fails.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semidot::bounds::{convex_perimeter_monotonicity, BoundReport};
use semidot::cost::checks::{check_gradients, sample_mtw, target_region};
use semidot::export::assignment_pgm;
use semidot::geometry::polygon::Vec2;
use semidot::oracle::{compare_with_scheme, discretize_source, solve_exact};
use semidot::partition::{check_cell_c_convexity, masses_limit_probe, CellConvexityStatus};
use semidot::scheme::verify_error_bound;
use semidot::{
    assign_cells, build_grid, normalize_measure, run_scheme, CostModel, Density, Domain, Partitioner, Point,
    SchemeResult, Surface, TargetSpec, WeightVector,
};
use semidot_cli::config::Problem;
use semidot_cli::parse_config;

type Outcome = Result<(bool, String), String>;

struct Case {
    name: &'static str,
    problem: Problem,
    result: SchemeResult,
    seconds: f64,
}

fn load(name: &'static str) -> Result<Case, String> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(format!("{name}.toml"));
    let cfg = parse_config(&path).map_err(|e| e.to_string())?;
    let problem = cfg.build().map_err(|e| e.to_string())?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let result = pool.install(|| {
        let p = Partitioner::new(&problem.cost, &problem.targets, &problem.measure)?;
        run_scheme(&p, &problem.scheme)
    });
    let seconds = start.elapsed().as_secs_f64();
    let result = result.map_err(|e| format!("{name}: {e}"))?;
    Ok(Case {
        name,
        problem,
        result,
        seconds,
    })
}

fn error_bound(k4: &Case) -> Outcome {
    let f = k4.problem.targets.masses();
    let worst = k4.result.alpha.iter().zip(f).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let ok = verify_error_bound(&k4.result.alpha, f, 0.01) && k4.seconds < 60.0;
    Ok((ok, format!("max |alpha - f| = {worst:.3e} < 0.01, single-threaded run {:.1} s", k4.seconds)))
}

fn certificate(cases: &[Case]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for c in cases {
        let p = &c.problem;
        let mut b = BoundReport::compute(&p.cost, &p.targets, &p.measure, p.scheme.epsilon).map_err(|e| e.to_string())?;
        b.record(c.result.trace.outer_iterations);
        ok &= b.pass() == Some(true);
        parts.push(format!("{}: {} <= {:.3e}", c.name, c.result.trace.outer_iterations, b.n_eps_bound));
    }
    Ok((ok, parts.join(", ")))
}

fn unit_square(n: usize) -> Result<semidot::SourceMeasure, String> {
    let grid = build_grid(&Domain::unit_square(), n).map_err(|e| e.to_string())?;
    normalize_measure(grid, &Density::uniform()).map_err(|e| e.to_string())
}

fn planar_targets(points: &[(f64, f64)], masses: &[f64]) -> Result<TargetSpec, String> {
    TargetSpec::new(
        Surface::Plane,
        points.iter().map(|(x, y)| Point::planar(*x, *y)).collect(),
        masses.to_vec(),
    )
    .map_err(|e| e.to_string())
}

fn forced_masses() -> Outcome {
    let cost = CostModel::quadratic();
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for n in [100, 400] {
        let m = unit_square(n)?;
        let h = 1.0 / n as f64;
        let cases = [
            ((0.0, 0.5), (1.0, 0.5), 0.25f64.exp(), [0.75, 0.25]),
            ((0.25, 0.5), (0.75, 0.5), 1.0, [0.5, 0.5]),
        ];
        for (a, b, d2, expected) in cases {
            let t = planar_targets(&[a, b], &[0.5, 0.5])?;
            let d = WeightVector::new(vec![1.0, d2]).map_err(|e| e.to_string())?;
            let g = assign_cells(&m, &cost, &t, &d).map_err(|e| e.to_string())?.masses;
            for (x, e) in g.iter().zip(expected) {
                worst = worst.max((x - e).abs() / h);
                ok &= (x - e).abs() <= h;
            }
        }
    }
    Ok((ok, format!("max |G - G_exact| = {worst:.3} h at n in {{100, 400}}")))
}

fn monotonicity(cases: &[Case]) -> Outcome {
    let mut violations = 0;
    let mut sweeps = 0;
    for c in cases {
        let p = &c.problem;
        let part = Partitioner::new(&p.cost, &p.targets, &p.measure).map_err(|e| e.to_string())?;
        let h = p.measure.grid().spacing();
        let k = part.k();
        let (m, lambda) = semidot::bounds::constants_m_lambda(&p.cost, &p.targets, p.measure.grid())
            .map_err(|e| e.to_string())?;
        let (lo, hi) = ((0.01 * lambda.min(1.0 / m)).ln(), (100.0 * m.max(1.0 / lambda)).ln());
        for i in 0..k {
            let base = WeightVector::ones(k);
            let mut prev: Option<Vec<f64>> = None;
            for s in 0..20 {
                let di = (lo + (hi - lo) * s as f64 / 19.0).exp();
                let g = part.masses(&base.with(i, di));
                if let Some(pg) = &prev {
                    for j in 0..k {
                        let bad = if j == i { g[j] > pg[j] + 2.0 * h } else { g[j] < pg[j] - 2.0 * h };
                        violations += bad as usize;
                    }
                }
                prev = Some(g);
            }
            let (tiny, huge) = masses_limit_probe(&part, i).map_err(|e| e.to_string())?;
            violations += (tiny[i] < 1.0 - 2.0 * h) as usize + (huge[i] > 2.0 * h) as usize;
            sweeps += 1;
        }
    }
    Ok((violations == 0, format!("{sweeps} sweeps of 20 weights plus limit probes on 3 configs, {violations} violations")))
}

fn scaling(cases: &[Case]) -> Outcome {
    let mut ok = true;
    let mut compared = 0;
    for c in cases {
        let p = &c.problem;
        let part = Partitioner::new(&p.cost, &p.targets, &p.measure).map_err(|e| e.to_string())?;
        let grid = p.measure.grid();
        let reference = assignment_pgm(grid, &part.assign(&c.result.d), part.k());
        for lambda in [0.5, 2.0, 10.0] {
            let scaled = assignment_pgm(grid, &part.assign(&c.result.d.scaled(lambda)), part.k());
            ok &= scaled.as_bytes() == reference.as_bytes();
            compared += 1;
        }
    }
    Ok((ok, format!("{compared} rasters byte-identical to their unscaled reference")))
}

fn oracle(cases: &[&Case]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for c in cases {
        let start = Instant::now();
        let p = &c.problem;
        let measure = p.measure_at(40).map_err(|e| e.to_string())?;
        let plan = solve_exact(&discretize_source(&measure), &p.targets, &p.cost).map_err(|e| e.to_string())?;
        let part = assign_cells(&measure, &p.cost, &p.targets, &c.result.d).map_err(|e| e.to_string())?;
        let cmp = compare_with_scheme(&plan, &part, &p.cost, measure.grid().spacing()).map_err(|e| e.to_string())?;
        let seconds = c.seconds + start.elapsed().as_secs_f64();
        ok &= cmp.relative_gap.abs() <= 0.02 && cmp.disagreement_in_band() && seconds < 30.0;
        parts.push(format!(
            "K={}: gap {:.2}%, disagreeing margins <= {:.2e} (band {:.2e}), {:.1} s",
            p.targets.len(),
            100.0 * cmp.relative_gap,
            cmp.max_disagreement_margin,
            cmp.boundary_band,
            seconds
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn closed_form_constants(pair: &Case) -> Outcome {
    let p = &pair.problem;
    let b = BoundReport::compute(&p.cost, &p.targets, &p.measure, p.scheme.epsilon).map_err(|e| e.to_string())?;
    let rel = |x: f64, e: f64| ((x - e) / e).abs();
    let checks = [
        ("C", b.c, 2.0),
        ("M", b.m, 0.25f64.exp() + 1.0),
        ("Lambda", b.lambda, (-0.25f64).exp()),
        ("sigma_1", b.sigma[0], 4.0),
        ("sigma_2", b.sigma[1], 4.0),
    ];
    let worst = checks.iter().map(|(_, x, e)| rel(*x, *e)).fold(0.0, f64::max);
    let detail = checks
        .iter()
        .map(|(n, x, _)| format!("{n} = {x:.6}"))
        .collect::<Vec<_>>()
        .join(", ");
    Ok((worst <= 5e-3, format!("{detail}; worst relative error {worst:.2e}")))
}

fn conditions() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let e = |e: semidot::Error| e.to_string();
    let square = Domain::unit_square();
    let quad = CostModel::quadratic();
    let quad_targets = [Point::planar(0.2, 0.3), Point::planar(0.8, 0.7)];
    let quad_region = target_region(Surface::Plane, &quad_targets).map_err(e)?;
    let qm = sample_mtw(&quad, &square, &quad_region, 100, &mut rng).map_err(e)?;

    let cap = Domain::cap([0.0, 0.0, 1.0], std::f64::consts::PI / 6.0).map_err(e)?;
    let refl = CostModel::reflector(0.05);
    let refl_targets = [
        Point::on_sphere([0.3, 0.0, -1.0]).map_err(e)?,
        Point::on_sphere([-0.2, 0.25, -1.0]).map_err(e)?,
    ];
    let refl_region = target_region(Surface::Sphere, &refl_targets).map_err(e)?;
    let rm = sample_mtw(&refl, &cap, &refl_region, 100, &mut rng).map_err(e)?;

    let log = CostModel::log_distance(0.1);
    let log_targets = [Point::planar(1.6, 0.5), Point::planar(-0.7, 0.2)];
    let log_region = target_region(Surface::Plane, &log_targets).map_err(e)?;
    let mut grad: f64 = 0.0;
    let mut pairs = Vec::new();
    for (cost, source, region) in [(&quad, &square, &quad_region), (&refl, &cap, &refl_region), (&log, &square, &log_region)] {
        let g = check_gradients(cost, source, region, 1000, &mut rng).map_err(e)?;
        grad = grad.max(g.max_rel_error());
        pairs.push(g.samples);
    }
    let ok = qm.samples == 100
        && qm.max_abs <= 1e-4
        && rm.samples == 100
        && rm.unreliable == 0
        && rm.delta0 > 0.0
        && pairs.iter().all(|n| *n == 1000)
        && grad <= 1e-5;
    Ok((
        ok,
        format!(
            "quadratic max |MTW| = {:.1e}, reflector min MTW = {:.3} over {} samples, gradient rel error {grad:.1e} on {pairs:?} pairs",
            qm.max_abs, rm.delta0, rm.samples
        ),
    ))
}

fn cell_convexity(cases: &[&Case]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut violating = 0;
    let mut unreliable = 0;
    let mut cells = 0;
    for c in cases {
        let p = &c.problem;
        let part = Partitioner::new(&p.cost, &p.targets, &p.measure).map_err(|e| e.to_string())?;
        let assignment = part.assign(&c.result.d);
        for i in 0..part.k() {
            let r = check_cell_c_convexity(&part, &assignment, &c.result.d, i, 500, &mut rng).map_err(|e| e.to_string())?;
            if r.status == CellConvexityStatus::Checked {
                cells += 1;
            }
            violating += r.violating_pairs;
            unreliable += r.unreliable_pairs;
        }
    }
    Ok((
        violating == 0 && unreliable == 0 && cells > 0,
        format!("{cells} cells x 500 pairs: {violating} violating, {unreliable} unreliable"),
    ))
}

fn perimeter_monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut violations = 0;
    for trial in 0..100 {
        let n = rng.gen_range(3..60);
        let outer: Vec<Vec2> = (0..n)
            .map(|_| Vec2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-1.0..1.0)))
            .collect();
        // inner set: vertex subset or convex combinations of the outer points
        let inner: Vec<Vec2> = if trial % 2 == 0 {
            let mut s: Vec<Vec2> = outer.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect();
            s.push(outer[0]);
            s
        } else {
            (0..rng.gen_range(3..30))
                .map(|_| {
                    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
                    let total: f64 = w.iter().sum();
                    outer.iter().zip(&w).map(|(p, w)| p * (w / total)).sum()
                })
                .collect()
        };
        if !convex_perimeter_monotonicity(&inner, &outer).map_err(|e| e.to_string())? {
            violations += 1;
        }
    }
    Ok((violations == 0, format!("100 nested hull pairs, {violations} violations")))
}

fn report(n: usize, name: &str, outcome: Outcome, failed: &mut bool) {
    let (ok, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    *failed |= !ok;
    println!("criterion {n:>2} {}: {name}: {detail}", if ok { "PASS" } else { "FAIL" });
}

fn main() -> ExitCode {
    let mut failed = false;
    let cases: Result<Vec<Case>, String> = ["symmetric_pair", "quadratic_k4", "reflector_pair"].into_iter().map(load).collect();
    let cases = match cases {
        Ok(c) => c,
        Err(e) => {
            for n in 1..=10 {
                report(n, "shipped configs", Err(e.clone()), &mut failed);
            }
            return ExitCode::FAILURE;
        }
    };
    let (pair, k4, refl) = (&cases[0], &cases[1], &cases[2]);
    report(1, "error bound on the K=4 config", error_bound(k4), &mut failed);
    report(2, "iteration certificate", certificate(&cases), &mut failed);
    report(3, "analytically forced masses", forced_masses(), &mut failed);
    report(4, "monotonicity and limits", monotonicity(&cases), &mut failed);
    report(5, "scaling invariance", scaling(&cases), &mut failed);
    report(6, "oracle equivalence at n = 40", oracle(&[pair, k4]), &mut failed);
    report(7, "closed-form quadratic constants", closed_form_constants(pair), &mut failed);
    report(8, "condition checks", conditions(), &mut failed);
    report(9, "cell c-convexity", cell_convexity(&[k4, refl]), &mut failed);
    report(10, "perimeter monotonicity", perimeter_monotonicity(), &mut failed);
    if failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
