//! Semi-discrete optimal transport by coordinate-wise weight adjustment.
//!
//! Given a positive density on a source domain, `K` target points with
//! masses `f_i` and a cost `c`, the solver finds weights `d` such that the
//! cells of `φ_d(x) = max_i [-c(x, x̄_i) - log d_i]` carry masses within `ε` of
//! `f`. Each run is checked against a worst-case iteration bound and, on small
//! grids, against an exact transportation LP.
//!
//! Module map:
//! * [`geometry`]: domains, quadrature grids, the source measure;
//! * [`cost`]: cost models, c-exponential maps, sampled condition checks;
//! * [`partition`]: the potential, cell assignment and masses `G^i(d)`;
//! * [`scheme`]: the weight-adjustment iteration and its trace;
//! * [`bounds`]: constants of the iteration bound;
//! * [`oracle`]: exact discrete transport for comparison;
//! * [`export`]: CSV and PGM writers.

pub mod bounds;
pub mod cost;
pub mod error;
pub mod export;
pub mod expr;
pub mod geometry;
pub mod oracle;
pub mod partition;
pub mod scheme;

pub use cost::CostModel;
pub use error::{Error, Result};
pub use geometry::{build_grid, normalize_measure, Density, Domain, Point, SourceMeasure, Surface};
pub use partition::{assign_cells, PartitionResult, Partitioner, TargetSpec, WeightVector};
pub use scheme::{run_scheme, SchemeConfig, SchemeResult, SchemeTrace};
