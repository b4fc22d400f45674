//! Coordinate charts: named variables plus an optional excluded locus.

use crate::error::{Error, Result};
use crate::poly::Rat;
use crate::ratfunc::{parse_expr, RF};
use num::Zero;

/// Open coordinate domain. Points where any excluded polynomial vanishes are
/// outside the chart; denominators of chart data may only vanish there.
#[derive(Clone, Debug, PartialEq)]
pub struct Chart {
    vars: Vec<String>,
    excluded: Vec<RF>,
}

impl Chart {
    pub fn new(vars: Vec<String>) -> Result<Self> {
        Self::with_excluded(vars, Vec::new())
    }

    pub fn with_excluded(vars: Vec<String>, excluded: Vec<RF>) -> Result<Self> {
        if vars.is_empty() {
            return Err(Error::Invalid("chart needs at least one variable".into()));
        }
        for (i, v) in vars.iter().enumerate() {
            if vars[..i].contains(v) {
                return Err(Error::Invalid(format!("duplicate chart variable '{v}'")));
            }
            if !v.chars().next().map(|c| c.is_ascii_alphabetic() || c == '_').unwrap_or(false)
                || !v.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
            {
                return Err(Error::Invalid(format!("invalid variable name '{v}'")));
            }
        }
        for e in &excluded {
            if e.nvars() != vars.len() {
                return Err(Error::DimensionMismatch(
                    "excluded polynomial lives on a different chart".into(),
                ));
            }
            if e.is_zero() {
                return Err(Error::Invalid("excluded locus polynomial must be nonzero".into()));
            }
        }
        Ok(Chart { vars, excluded })
    }

    /// Convenience constructor from simple names, panicking on invalid input.
    pub fn of(names: &[&str]) -> Chart {
        Chart::new(names.iter().map(|s| s.to_string()).collect()).expect("valid chart names")
    }

    pub fn dim(&self) -> usize {
        self.vars.len()
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == name)
    }

    pub fn excluded(&self) -> &[RF] {
        &self.excluded
    }

    /// Parses an expression in this chart's variables.
    pub fn expr(&self, src: &str) -> Result<RF> {
        parse_expr(src, &self.vars)
    }

    /// Whether a rational point lies in the chart (off the excluded locus).
    pub fn contains_rat(&self, point: &[Rat]) -> bool {
        point.len() == self.dim()
            && self.excluded.iter().all(|e| {
                e.eval_rat(point).map(|v| !v.is_zero()).unwrap_or(false)
            })
    }

    /// Whether a floating point lies in the chart.
    pub fn contains_f64(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && self.excluded.iter().all(|e| e.eval_f64(point).map(|v| v != 0.0).unwrap_or(false))
    }

    pub fn describe(&self) -> String {
        self.vars.join(",")
    }

    /// Deterministic rational sample points inside the chart, avoiding the
    /// excluded locus. Used by pointwise certificates.
    pub fn sample_points(&self, count: usize) -> Vec<Vec<Rat>> {
        use crate::poly::rat;
        let base: [(i64, i64); 7] = [(1, 1), (1, 2), (-1, 3), (2, 1), (-3, 2), (1, 5), (3, 1)];
        let mut out = Vec::new();
        let mut k = 0usize;
        while out.len() < count && k < 40 {
            let pt: Vec<Rat> = (0..self.dim())
                .map(|i| {
                    let (n, d) = base[(k + i * 2 + i * i) % base.len()];
                    rat(n + (k / base.len()) as i64, d)
                })
                .collect();
            if self.contains_rat(&pt) && !out.contains(&pt) {
                out.push(pt);
            }
            k += 1;
        }
        out
    }
}
