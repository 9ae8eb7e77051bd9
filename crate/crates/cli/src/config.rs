//! Run configuration: TOML schema, validation and construction of the
//! solver objects. Validation reports every violated constraint, each
//! prefixed with the path of the offending field.

use std::path::Path;

use serde::Deserialize;

use semidot::cost::ExpressionCost;
use semidot::expr::Expression;
use semidot::geometry::angle_between;
use semidot::oracle::MAX_PROBLEM_SIZE;
use semidot::scheme::compute_delta;
use semidot::{build_grid, normalize_measure, CostModel, Density, Domain, Point, SchemeConfig, SourceMeasure, Surface, TargetSpec};

use crate::CliError;

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub cost: CostSection,
    pub domain: DomainSection,
    #[serde(default)]
    pub source: SourceSection,
    pub targets: Vec<TargetEntry>,
    pub scheme: SchemeSection,
    #[serde(default)]
    pub checks: ChecksSection,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum CostKind {
    Quadratic,
    Log,
    Reflector,
    Expression,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceKind {
    Plane,
    Sphere,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CostSection {
    pub model: CostKind,
    /// Minimum separation for `log` and `reflector`.
    pub s_min: Option<f64>,
    /// Formula in `x1, x2, x3, y1, y2, y3` for `expression`.
    pub expression: Option<String>,
    /// Surface of an `expression` cost.
    pub surface: Option<SurfaceKind>,
    /// Finite-difference step of the MTW contraction.
    pub mtw_step: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Rectangle,
    Cap,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub kind: DomainKind,
    pub min: Option<[f64; 2]>,
    pub max: Option<[f64; 2]>,
    pub center: Option<[f64; 3]>,
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    /// Density in `x1, x2, x3`; normalized to unit mass.
    #[serde(default = "default_density")]
    pub density: String,
}

impl Default for SourceSection {
    fn default() -> Self {
        Self {
            density: default_density(),
        }
    }
}

fn default_density() -> String {
    "1".into()
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TargetEntry {
    pub point: Vec<f64>,
    pub mass: f64,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    pub epsilon: f64,
    pub resolution: usize,
    #[serde(default = "default_resolution_factor")]
    pub resolution_factor: f64,
    #[serde(default = "default_max_outer")]
    pub max_outer_iterations: usize,
}

fn default_resolution_factor() -> f64 {
    4.0
}

fn default_max_outer() -> usize {
    10_000
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ChecksSection {
    pub strict: bool,
    pub samples: usize,
    pub gradient_samples: usize,
    pub boundary_samples: usize,
}

impl Default for ChecksSection {
    fn default() -> Self {
        Self {
            strict: false,
            samples: 200,
            gradient_samples: 1000,
            boundary_samples: 400,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    pub enabled: bool,
    pub resolution: usize,
    pub relative_tolerance: f64,
    pub pair_samples: usize,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            enabled: true,
            resolution: 40,
            relative_tolerance: 0.02,
            pair_samples: 5000,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
    pub seed: u64,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            seed: 0,
        }
    }
}

/// Solver objects built from a validated configuration.
#[derive(Debug)]
pub struct Problem {
    pub cost: CostModel,
    pub domain: Domain,
    pub density: Density,
    pub targets: TargetSpec,
    pub measure: SourceMeasure,
    pub scheme: SchemeConfig,
}

impl Problem {
    /// Source measure on a different grid (used by the oracle).
    pub fn measure_at(&self, resolution: usize) -> Result<SourceMeasure, CliError> {
        let grid = build_grid(&self.domain, resolution).map_err(|e| CliError::Validation(vec![e.to_string()]))?;
        normalize_measure(grid, &self.density).map_err(|e| CliError::Validation(vec![e.to_string()]))
    }
}

/// Reads and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(vec![format!("{}: {e}", path.display())]))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig, CliError> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Validation(vec![format!("schema: {e}")]))?;
    let errors = cfg.violations();
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(CliError::Validation(errors))
    }
}

impl RunConfig {
    pub fn surface(&self) -> Surface {
        match self.domain.kind {
            DomainKind::Rectangle => Surface::Plane,
            DomainKind::Cap => Surface::Sphere,
        }
    }

    fn cost_surface(&self) -> Surface {
        match self.cost.model {
            CostKind::Quadratic | CostKind::Log => Surface::Plane,
            CostKind::Reflector => Surface::Sphere,
            CostKind::Expression => match self.cost.surface {
                Some(SurfaceKind::Sphere) => Surface::Sphere,
                _ => Surface::Plane,
            },
        }
    }

    /// Every violated constraint; empty when the configuration is usable.
    pub fn violations(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let domain = self.build_domain();
        if let Err(e) = &domain {
            errs.push(format!("domain: {e}"));
        }
        if let Err(e) = self.build_cost() {
            errs.push(format!("cost: {e}"));
        }
        if self.cost_surface() != self.surface() {
            errs.push(format!(
                "cost.model: {:?} cost lives on the {:?} but domain.kind is {:?}",
                self.cost.model,
                self.cost_surface(),
                self.domain.kind
            ));
        }
        if let Err(e) = Expression::source(&self.source.density) {
            errs.push(format!("source.density: {e}"));
        }

        let surface = self.surface();
        let dim = match surface {
            Surface::Plane => 2,
            Surface::Sphere => 3,
        };
        let mut points = Vec::new();
        for (i, t) in self.targets.iter().enumerate() {
            if t.point.len() != dim {
                errs.push(format!(
                    "targets[{i}].point: expected {dim} coordinates, found {}",
                    t.point.len()
                ));
                continue;
            }
            match point_from(surface, &t.point) {
                Ok(p) => points.push(p),
                Err(e) => errs.push(format!("targets[{i}].point: {e}")),
            }
        }
        let masses: Vec<f64> = self.targets.iter().map(|t| t.mass).collect();
        if points.len() == self.targets.len() {
            for v in TargetSpec::violations(surface, &points, &masses) {
                errs.push(format!("targets: {v}"));
            }
            if let Ok(domain) = &domain {
                for (i, p) in points.iter().enumerate() {
                    if let Some(msg) = self.separation_violation(domain, p) {
                        errs.push(format!("targets[{i}].point: {msg}"));
                    }
                }
            }
        } else if self.targets.is_empty() {
            errs.push("targets: at least one target is required".into());
        }

        let k = self.targets.len();
        let eps = self.scheme.epsilon;
        let f_min = masses.iter().cloned().fold(f64::INFINITY, f64::min);
        if k >= 2 && !(eps > 0.0 && eps < f_min) {
            errs.push(format!(
                "scheme.epsilon: {eps} must satisfy 0 < epsilon < min f_i; use a value in (0, {f_min})"
            ));
        }
        if self.scheme.resolution == 0 {
            errs.push("scheme.resolution: must be positive".into());
        }
        if !(self.scheme.resolution_factor >= 1.0) {
            errs.push(format!(
                "scheme.resolution_factor: {} must be at least 1",
                self.scheme.resolution_factor
            ));
        }
        if self.scheme.max_outer_iterations == 0 {
            errs.push("scheme.max_outer_iterations: must be positive".into());
        }
        if let (Ok(domain), true) = (&domain, k >= 2 && eps > 0.0 && eps < f_min && self.scheme.resolution > 0) {
            if let Some(delta) = compute_delta(eps, k, masses[0]) {
                let h = domain.spacing(self.scheme.resolution);
                let factor = self.scheme.resolution_factor;
                if h > delta / factor {
                    let needed = (domain.spacing(1) * factor / delta).ceil() as usize;
                    errs.push(format!(
                        "scheme.resolution: spacing h = {h:.3e} exceeds delta/{factor} = {:.3e}; use resolution >= {needed}",
                        delta / factor
                    ));
                }
            }
        }

        if self.checks.samples == 0 || self.checks.gradient_samples == 0 || self.checks.boundary_samples < 3 {
            errs.push("checks: sample counts must be positive (boundary_samples >= 3)".into());
        }
        if self.oracle.resolution == 0 {
            errs.push("oracle.resolution: must be positive".into());
        } else if let Ok(domain) = &domain {
            if let Ok(grid) = build_grid(domain, self.oracle.resolution) {
                let size = grid.len() * k.max(1);
                if size > MAX_PROBLEM_SIZE {
                    errs.push(format!(
                        "oracle.resolution: N*K = {size} exceeds {MAX_PROBLEM_SIZE}; use resolution <= {}",
                        max_oracle_resolution(domain, k.max(1))
                    ));
                }
            }
        }
        if !(self.oracle.relative_tolerance > 0.0) {
            errs.push("oracle.relative_tolerance: must be positive".into());
        }
        errs
    }

    /// Sources and target must be separated for the singular costs.
    fn separation_violation(&self, domain: &Domain, y: &Point) -> Option<String> {
        let s_min = self.cost.s_min.unwrap_or(0.0);
        match (self.cost.model, domain) {
            (CostKind::Log, Domain::Rectangle { min, max }) => {
                let dx = (min[0] - y.x()).max(0.0).max(y.x() - max[0]);
                let dy = (min[1] - y.y()).max(0.0).max(y.y() - max[1]);
                let dist = dx.hypot(dy);
                (dist < s_min.max(f64::MIN_POSITIVE)).then(|| {
                    format!("distance {dist:.4} to the source domain is below cost.s_min = {s_min}")
                })
            }
            (CostKind::Reflector, Domain::Cap { center, radius }) => {
                let gap = (angle_between(center, y) - radius).max(0.0);
                let largest = gap.cos();
                (largest > 1.0 - s_min).then(|| {
                    format!("<x, y> reaches {largest:.4} on the source cap, above 1 - cost.s_min = {}", 1.0 - s_min)
                })
            }
            _ => None,
        }
    }

    pub fn build_domain(&self) -> semidot::Result<Domain> {
        let d = &self.domain;
        let missing = |f: &str| semidot::Error::Geometry(format!("{f} is required for this domain kind"));
        match d.kind {
            DomainKind::Rectangle => Domain::rectangle(d.min.ok_or_else(|| missing("min"))?, d.max.ok_or_else(|| missing("max"))?),
            DomainKind::Cap => Domain::cap(d.center.ok_or_else(|| missing("center"))?, d.radius.ok_or_else(|| missing("radius"))?),
        }
    }

    pub fn build_cost(&self) -> semidot::Result<CostModel> {
        let c = &self.cost;
        let s_min = || {
            c.s_min
                .filter(|s| *s > 0.0 && s.is_finite())
                .ok_or_else(|| semidot::Error::Cost("s_min must be given and positive".into()))
        };
        let model = match c.model {
            CostKind::Quadratic => CostModel::quadratic(),
            CostKind::Log => CostModel::log_distance(s_min()?),
            CostKind::Reflector => CostModel::reflector(s_min()?),
            CostKind::Expression => {
                let text = c
                    .expression
                    .as_deref()
                    .ok_or_else(|| semidot::Error::Cost("expression is required for model = \"expression\"".into()))?;
                let surface = match c.surface.unwrap_or(SurfaceKind::Plane) {
                    SurfaceKind::Plane => Surface::Plane,
                    SurfaceKind::Sphere => Surface::Sphere,
                };
                CostModel::new(ExpressionCost::new(text, surface)?)
            }
        };
        Ok(match c.mtw_step {
            Some(step) => model.with_mtw_step(step),
            None => model,
        })
    }

    pub fn build_targets(&self) -> semidot::Result<TargetSpec> {
        let surface = self.surface();
        let points = self
            .targets
            .iter()
            .map(|t| point_from(surface, &t.point))
            .collect::<semidot::Result<Vec<_>>>()?;
        TargetSpec::new(surface, points, self.targets.iter().map(|t| t.mass).collect())
    }

    pub fn scheme_config(&self) -> SchemeConfig {
        SchemeConfig {
            resolution_factor: self.scheme.resolution_factor,
            max_outer_iterations: self.scheme.max_outer_iterations,
            ..SchemeConfig::new(self.scheme.epsilon)
        }
    }

    /// Builds every solver object; errors map to validation failures.
    pub fn build(&self) -> Result<Problem, CliError> {
        let wrap = |e: semidot::Error| CliError::Validation(vec![e.to_string()]);
        let domain = self.build_domain().map_err(wrap)?;
        let density = Density::Expression(Expression::source(&self.source.density).map_err(wrap)?);
        let grid = build_grid(&domain, self.scheme.resolution).map_err(wrap)?;
        let measure = normalize_measure(grid, &density).map_err(wrap)?;
        Ok(Problem {
            cost: self.build_cost().map_err(wrap)?,
            targets: self.build_targets().map_err(wrap)?,
            domain,
            density,
            measure,
            scheme: self.scheme_config(),
        })
    }
}

fn point_from(surface: Surface, c: &[f64]) -> semidot::Result<Point> {
    match surface {
        Surface::Plane => Ok(Point::planar(c[0], c[1])),
        Surface::Sphere => Point::on_sphere([c[0], c[1], c[2]]),
    }
}

/// Largest oracle resolution keeping `N·K` within the cap.
pub fn max_oracle_resolution(domain: &Domain, k: usize) -> usize {
    let (mut lo, mut hi) = (1usize, 2usize);
    let fits = |n: usize| build_grid(domain, n).map_or(false, |g| g.len() * k <= MAX_PROBLEM_SIZE);
    while fits(hi) {
        lo = hi;
        hi *= 2;
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}
