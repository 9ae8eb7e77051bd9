//! Closed-form expressions for densities and user costs.
//!
//! Parsing and evaluation are delegated to `exmex`. This module only fixes the
//! variable vocabulary: source coordinates are `x1, x2, x3` and target
//! coordinates are `y1, y2, y3`. Supported syntax is whatever `exmex` accepts
//! for floats, which covers `+ - * / ^`, `exp`, `log`/`ln`, `sqrt` and the
//! usual trigonometric functions.

use exmex::prelude::*;
use nalgebra::Vector3;

use crate::error::{Error, Result};

const SOURCE_VARS: [&str; 3] = ["x1", "x2", "x3"];
const TARGET_VARS: [&str; 3] = ["y1", "y2", "y3"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Source(usize),
    Target(usize),
}

/// A parsed expression together with the mapping from its variables to
/// coordinate slots.
#[derive(Clone)]
pub struct Expression {
    text: String,
    flat: FlatEx<f64>,
    slots: Vec<Slot>,
}

impl std::fmt::Debug for Expression {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_tuple("Expression").field(&self.text).finish()
    }
}

impl Expression {
    /// Parses an expression of the source coordinates only (densities).
    pub fn source(text: &str) -> Result<Self> {
        Self::parse(text, false)
    }

    /// Parses an expression of source and target coordinates (costs).
    pub fn pair(text: &str) -> Result<Self> {
        Self::parse(text, true)
    }

    fn parse(text: &str, allow_target: bool) -> Result<Self> {
        let flat = exmex::parse::<f64>(text)
            .map_err(|e| Error::Expression(format!("cannot parse {text:?}: {e}")))?;
        let mut slots = Vec::with_capacity(flat.var_names().len());
        for name in flat.var_names() {
            let slot = if let Some(k) = SOURCE_VARS.iter().position(|v| v == name) {
                Slot::Source(k)
            } else if let Some(k) = TARGET_VARS.iter().position(|v| v == name) {
                if !allow_target {
                    return Err(Error::Expression(format!(
                        "variable {name:?} is not available here; use x1, x2, x3"
                    )));
                }
                Slot::Target(k)
            } else {
                let allowed = if allow_target {
                    "x1, x2, x3, y1, y2, y3"
                } else {
                    "x1, x2, x3"
                };
                return Err(Error::Expression(format!(
                    "unknown variable {name:?} in {text:?}; allowed: {allowed}"
                )));
            };
            slots.push(slot);
        }
        Ok(Self {
            text: text.to_string(),
            flat,
            slots,
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Evaluates at a source point (target slots read as zero).
    pub fn eval_source(&self, x: &Vector3<f64>) -> Result<f64> {
        self.eval_pair(x, &Vector3::zeros())
    }

    pub fn eval_pair(&self, x: &Vector3<f64>, y: &Vector3<f64>) -> Result<f64> {
        let mut vals = [0.0; 6];
        for (v, slot) in vals.iter_mut().zip(&self.slots) {
            *v = match *slot {
                Slot::Source(k) => x[k],
                Slot::Target(k) => y[k],
            };
        }
        self.flat
            .eval(&vals[..self.slots.len()])
            .map_err(|e| Error::Expression(format!("evaluating {:?}: {e}", self.text)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_in_source_coordinates() {
        let e = Expression::source("1 + x1").unwrap();
        let v = e.eval_source(&Vector3::new(0.25, 0.7, 0.0)).unwrap();
        assert!((v - 1.25).abs() < 1e-15);
    }

    #[test]
    fn pair_variables_are_mapped_by_name_not_position() {
        // exmex orders variables alphabetically; make sure y1 still reads the target.
        let e = Expression::pair("y1 - 2*x2 + exp(0*x1)").unwrap();
        let v = e
            .eval_pair(&Vector3::new(5.0, 1.0, 0.0), &Vector3::new(3.0, 0.0, 0.0))
            .unwrap();
        assert!((v - 2.0).abs() < 1e-15);
    }

    #[test]
    fn target_variable_rejected_in_density() {
        assert!(Expression::source("x1 + y1").is_err());
    }

    #[test]
    fn unknown_variable_rejected() {
        let err = Expression::pair("x1 + z").unwrap_err().to_string();
        assert!(err.contains("unknown variable"), "{err}");
    }

    #[test]
    fn log_and_powers() {
        let e = Expression::source("log(x1)^2").unwrap();
        let v = e.eval_source(&Vector3::new(std::f64::consts::E, 0.0, 0.0)).unwrap();
        assert!((v - 1.0).abs() < 1e-14);
    }
}
