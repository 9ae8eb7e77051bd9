//! Subcommands. Each writes its artifacts into the output directory and
//! returns `Ok` only when every check it owns passed.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use semidot::bounds::BoundReport;
use semidot::cost::checks::{verify_conditions, CheckSettings, ConditionReport};
use semidot::oracle::{
    assignment_pairs, check_c_monotonicity, compare_with_scheme, discretize_source, plan_pairs, solve_exact,
    OracleComparison,
};
use semidot::scheme::verify_error_bound;
use semidot::{assign_cells, export, Error, Partitioner, SchemeResult, WeightVector};

use crate::config::{Problem, RunConfig};
use crate::CliError;

/// Command-line overrides.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Options {
    pub strict: bool,
    pub no_oracle: bool,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

struct Run<'a> {
    cfg: &'a RunConfig,
    out: PathBuf,
    strict: bool,
    seed: u64,
}

impl<'a> Run<'a> {
    fn new(cfg: &'a RunConfig, opts: &Options) -> Result<Self, CliError> {
        let out = opts.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
        fs::create_dir_all(&out)?;
        Ok(Self {
            cfg,
            out,
            strict: opts.strict || cfg.checks.strict,
            seed: opts.seed.unwrap_or(cfg.output.seed),
        })
    }

    fn write(&self, name: &str, content: &str) -> Result<(), CliError> {
        fs::write(self.out.join(name), content)?;
        Ok(())
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    fn settings(&self) -> CheckSettings {
        CheckSettings {
            samples: self.cfg.checks.samples,
            gradient_samples: self.cfg.checks.gradient_samples,
            boundary_samples: self.cfg.checks.boundary_samples,
        }
    }

    fn conditions(&self, problem: &Problem) -> Result<ConditionReport, CliError> {
        let report = verify_conditions(
            &problem.cost,
            &problem.domain,
            problem.targets.points(),
            &self.settings(),
            &mut self.rng(),
        )
        .map_err(other)?;
        self.write("conditions.csv", &report.to_csv())?;
        Ok(report)
    }

    fn bounds(&self, problem: &Problem) -> Option<BoundReport> {
        if problem.targets.len() < 2 {
            return None;
        }
        match BoundReport::compute(&problem.cost, &problem.targets, &problem.measure, self.cfg.scheme.epsilon) {
            Ok(r) => Some(r),
            Err(e) => {
                eprintln!("warning: iteration bound unavailable: {e}");
                None
            }
        }
    }

    /// Comparison plus the sampled exchange-violation counts of the LP plan
    /// and of the scheme assignment.
    fn oracle(&self, problem: &Problem, d: &WeightVector) -> Result<(OracleComparison, usize), CliError> {
        let measure = problem.measure_at(self.cfg.oracle.resolution)?;
        let sources = discretize_source(&measure);
        let plan = solve_exact(&sources, &problem.targets, &problem.cost).map_err(other)?;
        let partition = assign_cells(&measure, &problem.cost, &problem.targets, d).map_err(other)?;
        let cmp = compare_with_scheme(&plan, &partition, &problem.cost, measure.grid().spacing()).map_err(other)?;
        let mut rng = self.rng();
        let samples = self.cfg.oracle.pair_samples;
        let targets = problem.targets.points();
        let lp = check_c_monotonicity(&plan_pairs(&plan), targets, &problem.cost, samples, &mut rng).map_err(other)?;
        let pairs = assignment_pairs(&sources, &partition, f64::NEG_INFINITY);
        let scheme = check_c_monotonicity(&pairs, targets, &problem.cost, samples, &mut rng).map_err(other)?;
        let mut report = cmp.to_csv();
        report.push_str(&format!(
            "lp_monotonicity_violations,{}\nscheme_monotonicity_violations,{}\n",
            lp.violations, scheme.violations
        ));
        self.write("plan.csv", &plan.to_csv())?;
        self.write("oracle.csv", &report)?;
        println!(
            "oracle (n = {}): LP cost {:.6e}, scheme cost {:.6e}, relative gap {:.3e}, disagreement {:.3}% (max margin {:.3e}, band {:.3e})",
            self.cfg.oracle.resolution,
            cmp.lp_cost,
            cmp.scheme_cost,
            cmp.relative_gap,
            100.0 * cmp.disagreement_fraction,
            cmp.max_disagreement_margin,
            cmp.boundary_band
        );
        Ok((cmp, lp.violations + scheme.violations))
    }

    /// Runs the scheme and writes its artifacts, including the bound report
    /// when the scheme aborts.
    fn solve(&self, problem: &Problem) -> Result<(SchemeResult, Option<BoundReport>), CliError> {
        let p = Partitioner::new(&problem.cost, &problem.targets, &problem.measure).map_err(other)?;
        let mut bound = self.bounds(problem);
        let result = semidot::run_scheme(&p, &problem.scheme);
        let observed = match &result {
            Ok(r) => r.trace.outer_iterations,
            Err(Error::SchemeAbort { trace, .. }) => trace.outer_iterations,
            Err(_) => 0,
        };
        if let Some(b) = bound.as_mut() {
            b.record(observed);
            self.write("bounds.csv", &b.to_csv())?;
        }
        let result = match result {
            Ok(r) => r,
            Err(Error::SchemeAbort { reason, trace }) => {
                self.write("trace.csv", &export::trace_csv(&trace))?;
                return Err(CliError::Abort(format!("[scheme] aborted: {reason}")));
            }
            Err(e) => return Err(CliError::Abort(e.to_string())),
        };
        let partition = p.assign(&result.d);
        let grid = problem.measure.grid();
        self.write("results.csv", &export::results_csv(&problem.targets, &result))?;
        self.write("trace.csv", &export::trace_csv(&result.trace))?;
        self.write("assignment.csv", &export::assignment_csv(grid, &partition))?;
        self.write("assignment.pgm", &export::assignment_pgm(grid, &partition, problem.targets.len()))?;
        println!(
            "solved K = {} on {} cells: {} outer iterations, {} mass evaluations",
            problem.targets.len(),
            grid.len(),
            result.trace.outer_iterations,
            result.trace.mass_evaluations
        );
        for (i, (a, f)) in result.alpha.iter().zip(problem.targets.masses()).enumerate() {
            println!("  target {}: alpha = {a:.6}, f = {f}, d = {:.6e}", i + 1, result.d.get(i));
        }
        Ok((result, bound))
    }

    fn strict_or_warn(&self, failures: &[String]) -> Result<(), CliError> {
        if failures.is_empty() {
            return Ok(());
        }
        if self.strict {
            return Err(CliError::Failure(failures.join("; ")));
        }
        for f in failures {
            eprintln!("warning: {f}");
        }
        Ok(())
    }
}

fn other(e: Error) -> CliError {
    CliError::Other(e.to_string())
}

fn certificate_failure(bound: &Option<BoundReport>, k: usize) -> Option<String> {
    match bound {
        Some(b) => match b.pass() {
            Some(true) => None,
            _ => Some(format!(
                "iteration certificate failed: observed {:?} outer iterations, bound {:.3e}",
                b.observed_outer_iterations, b.n_eps_bound
            )),
        },
        None if k >= 2 => Some("iteration certificate unavailable".into()),
        None => None,
    }
}

/// Solves, certifies the iteration count and, unless disabled, compares
/// with the exact oracle.
pub fn cmd_solve(cfg: &RunConfig, opts: &Options) -> Result<(), CliError> {
    let run = Run::new(cfg, opts)?;
    let problem = cfg.build()?;
    if run.strict {
        let report = run.conditions(&problem)?;
        if !report.all_pass() {
            let names: Vec<&str> = report.failures().iter().map(|r| r.check.as_str()).collect();
            return Err(CliError::Failure(format!("condition checks failed: {}", names.join(", "))));
        }
    }
    let (result, bound) = run.solve(&problem)?;
    if !verify_error_bound(&result.alpha, problem.targets.masses(), cfg.scheme.epsilon) {
        return Err(CliError::Failure("masses outside the error bound".into()));
    }
    let mut failures: Vec<String> = certificate_failure(&bound, problem.targets.len()).into_iter().collect();
    if let Some(b) = &bound {
        println!(
            "iteration bound {:.3e}, observed {}",
            b.n_eps_bound,
            b.observed_outer_iterations.unwrap_or(0)
        );
    }
    if cfg.oracle.enabled && !opts.no_oracle {
        let (cmp, violations) = run.oracle(&problem, &result.d)?;
        if !cmp.pass(cfg.oracle.relative_tolerance) || violations > 0 {
            failures.push("oracle comparison outside tolerance".into());
        }
    }
    run.strict_or_warn(&failures)
}

/// Runs the cost condition checks and the domain c-convexity check.
pub fn cmd_verify(cfg: &RunConfig, opts: &Options) -> Result<(), CliError> {
    let run = Run::new(cfg, opts)?;
    let problem = cfg.build()?;
    let report = run.conditions(&problem)?;
    print!("{}", report.to_text());
    if run.strict && !report.all_pass() {
        let names: Vec<&str> = report.failures().iter().map(|r| r.check.as_str()).collect();
        return Err(CliError::Failure(format!("condition checks failed: {}", names.join(", "))));
    }
    Ok(())
}

/// Computes the constants of the iteration bound without solving.
pub fn cmd_bounds(cfg: &RunConfig, opts: &Options) -> Result<(), CliError> {
    let run = Run::new(cfg, opts)?;
    let problem = cfg.build()?;
    if problem.targets.len() < 2 {
        println!("a single target needs no iterations; no bound to report");
        return Ok(());
    }
    let report = BoundReport::compute(&problem.cost, &problem.targets, &problem.measure, cfg.scheme.epsilon)
        .map_err(other)?;
    run.write("bounds.csv", &report.to_csv())?;
    println!(
        "C = {:.6}, M = {:.6}, Lambda = {:.6}, delta = {:.6}, sup I = {:.6}, sigma_max = {:.6}, bound = {:.3e}",
        report.c,
        report.m,
        report.lambda,
        report.delta,
        report.sup_i,
        report.sigma_max(),
        report.n_eps_bound
    );
    Ok(())
}

/// Solves, then compares the result against the exact transport LP.
pub fn cmd_oracle(cfg: &RunConfig, opts: &Options) -> Result<(), CliError> {
    if opts.no_oracle {
        return Err(CliError::Validation(vec![
            "--no-oracle cannot be combined with the oracle subcommand".into(),
        ]));
    }
    let run = Run::new(cfg, opts)?;
    let problem = cfg.build()?;
    let (result, _) = run.solve(&problem)?;
    let (cmp, violations) = run.oracle(&problem, &result.d)?;
    if !cmp.pass(cfg.oracle.relative_tolerance) || violations > 0 {
        return Err(CliError::Failure(format!(
            "oracle comparison failed: relative gap {:.3e} (tolerance {}), disagreement in band: {}, relaxation holds: {}, exchange violations: {violations}",
            cmp.relative_gap,
            cfg.oracle.relative_tolerance,
            cmp.disagreement_in_band(),
            cmp.relaxation_holds()
        )));
    }
    Ok(())
}

/// Reads a config and applies the subcommand; used by the binary.
pub fn run_file(command: &str, path: &Path, opts: &Options) -> Result<(), CliError> {
    let cfg = crate::config::parse_config(path)?;
    match command {
        "solve" => cmd_solve(&cfg, opts),
        "verify" => cmd_verify(&cfg, opts),
        "bounds" => cmd_bounds(&cfg, opts),
        "oracle" => cmd_oracle(&cfg, opts),
        other => Err(CliError::Other(format!("unknown command {other}"))),
    }
}
