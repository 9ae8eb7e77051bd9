//! Text exports. Every writer returns a `String`; callers decide where it goes.
//! Number formatting is Rust's shortest round-trip form, so identical inputs
//! give byte-identical files.

use std::fmt::Write as _;

use crate::geometry::{Grid, SourceMeasure, Surface};
use crate::partition::{PartitionResult, TargetSpec};
use crate::scheme::{SchemeResult, SchemeTrace};

fn coord_header(surface: Surface, prefix: &str) -> String {
    let n = match surface {
        Surface::Plane => 2,
        Surface::Sphere => 3,
    };
    let names = ["x", "y", "z"];
    (0..n)
        .map(|k| format!("{prefix}{}", names[k]))
        .collect::<Vec<_>>()
        .join(",")
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// `cx,cy[,cz],volume,density`.
pub fn grid_csv(measure: &SourceMeasure) -> String {
    let s = measure.grid().domain().surface();
    let mut out = format!("{},volume,density\n", coord_header(s, "c"));
    for (cell, rho) in measure.grid().cells().iter().zip(measure.density()) {
        let _ = writeln!(out, "{},{},{}", join(&cell.center.coords(s)), cell.volume, rho);
    }
    out
}

/// `cx,cy[,cz],index,margin` with 1-based target indices.
pub fn assignment_csv(grid: &Grid, partition: &PartitionResult) -> String {
    let s = grid.domain().surface();
    let mut out = format!("{},index,margin\n", coord_header(s, "c"));
    for ((cell, a), m) in grid.cells().iter().zip(&partition.assignment).zip(&partition.margin) {
        let _ = writeln!(out, "{},{},{}", join(&cell.center.coords(s)), a + 1, m);
    }
    out
}

/// Plain (P2) graymap with one 1-based label per cell. Grid rows are written
/// top row first; cap bands are padded on the right with 0.
pub fn assignment_pgm(grid: &Grid, partition: &PartitionResult, k: usize) -> String {
    let rows = grid.rows();
    let width = rows.iter().copied().max().unwrap_or(0);
    let mut starts = Vec::with_capacity(rows.len());
    let mut acc = 0;
    for r in rows {
        starts.push(acc);
        acc += r;
    }
    let mut out = format!("P2\n{width} {}\n{}\n", rows.len(), k.max(1));
    for (start, len) in starts.iter().zip(rows).rev() {
        let line: Vec<String> = (0..width)
            .map(|c| {
                if c < *len {
                    (partition.assignment[start + c] + 1).to_string()
                } else {
                    "0".to_string()
                }
            })
            .collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

/// `outer,inner,target_index,d_old,d_new,G_before,G_after`, 1-based indices.
pub fn trace_csv(trace: &SchemeTrace) -> String {
    let mut out = String::from("outer,inner,target_index,d_old,d_new,G_before,G_after\n");
    for s in &trace.steps {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            s.outer,
            s.inner,
            s.target_index + 1,
            s.d_old,
            s.d_new,
            s.g_before,
            s.g_after
        );
    }
    out
}

/// `index,x[,y,z],f,alpha,d,log_d`, one row per target.
pub fn results_csv(targets: &TargetSpec, result: &SchemeResult) -> String {
    let s = targets.surface();
    let mut out = format!("index,{},f,alpha,d,log_d\n", coord_header(s, ""));
    for (i, p) in targets.points().iter().enumerate() {
        let d = result.d.get(i);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            i + 1,
            join(&p.coords(s)),
            targets.masses()[i],
            result.alpha[i],
            d,
            d.ln()
        );
    }
    out
}
