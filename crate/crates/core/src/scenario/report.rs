//! Report assembly and serialization.
//!
//! A report is deterministic: given the same scenario text, seed, and
//! settings, both the structured (JSON) and the text rendering are
//! byte-identical across runs and thread counts.  Per-check wall time
//! is recorded on [`CheckReport`] for programmatic use but deliberately
//! kept out of both renderings; total elapsed time is something for the
//! caller to print to stderr if wanted.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::chart::Chart;
use crate::form::{Form, ValueKind};
use crate::scenario::{Scenario, Settings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Error,
    Blocked,
}

impl Status {
    fn tag(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "FAIL",
            Status::Error => "ERROR",
            Status::Blocked => "blocked",
        }
    }
}

/// One certificate line within a check.
#[derive(Debug, Clone, Serialize)]
pub struct ReportItem {
    pub name: String,
    pub ok: bool,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

/// A computed symbolic form, serialized in the expression grammar.
///
/// `terms` maps a wedge key (`"1"` for degree zero, else
/// `"dx^dy"`-style differentials in ascending variable order) to one
/// expression per value slot.  `value` names the slot basis: `scalar`,
/// `vector(n)`, `algebra(e1 e2 ...)`, or `tangent`.
#[derive(Debug, Clone, Serialize)]
pub struct SerializedForm {
    pub name: String,
    pub chart: String,
    pub degree: usize,
    pub value: String,
    pub terms: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub kind: String,
    pub status: Status,
    /// True when the verdict is certified in exact rational arithmetic.
    pub exact: bool,
    pub summary: String,
    pub items: Vec<ReportItem>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub forms: Vec<SerializedForm>,
    /// Wall time of the check body; excluded from serializations so
    /// report bytes stay deterministic.
    #[serde(skip)]
    pub wall_micros: u128,
}

/// Settings the run actually used, echoed for reproducibility.
#[derive(Debug, Clone, Serialize)]
pub struct SettingsEcho {
    pub ode_steps: usize,
    pub richardson: bool,
    pub richardson_tol: f64,
    pub tol: f64,
    pub seed: u64,
}

impl SettingsEcho {
    pub(crate) fn of(s: &Settings) -> Self {
        SettingsEcho {
            ode_steps: s.ode.steps_per_unit_time,
            richardson: s.ode.richardson_check,
            richardson_tol: s.ode.richardson_tol,
            tol: s.tol,
            seed: s.seed,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub settings: SettingsEcho,
    pub checks: Vec<CheckReport>,
    pub passed: bool,
}

impl Report {
    /// True when every check passed (blocked and errored checks count
    /// as not passing).
    pub fn all_passed(&self) -> bool {
        self.passed
    }

    /// Machine-readable rendering; byte-deterministic.
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serializes");
        out.push('\n');
        out
    }

    /// Human rendering; also byte-deterministic.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let s = &self.settings;
        let _ = writeln!(
            out,
            "settings: ode_steps={} richardson={} tol={:e} seed={}",
            s.ode_steps, s.richardson, s.tol, s.seed
        );
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0).min(48);
        for c in &self.checks {
            let mode = if c.exact { "exact" } else { "numeric" };
            let _ = writeln!(
                out,
                "[{:<7}] {:<w$}  {:<7}  {}",
                c.status.tag(),
                c.name,
                mode,
                c.summary,
                w = width
            );
            for item in c.items.iter().filter(|i| !i.ok) {
                let _ = writeln!(out, "          ! {}: {}", item.name, item.detail);
            }
            for f in &c.forms {
                let _ = writeln!(
                    out,
                    "          form {}: degree {} on {}, values {}",
                    f.name, f.degree, f.chart, f.value
                );
                for (key, comps) in &f.terms {
                    let _ = writeln!(out, "            {} : [{}]", key, comps.join(", "));
                }
            }
        }
        let passed = self.checks.iter().filter(|c| c.status == Status::Pass).count();
        let _ = writeln!(
            out,
            "result: {} ({}/{} checks passed)",
            if self.passed { "PASS" } else { "FAIL" },
            passed,
            self.checks.len()
        );
        out
    }
}

/// Renders the wedge key of a term: `"1"` for the empty wedge, else
/// `"dx^dy"` from the chart's variable names.
pub(crate) fn wedge_key(chart: &Chart, idx: &[u8]) -> String {
    if idx.is_empty() {
        return "1".into();
    }
    idx.iter().map(|&i| format!("d{}", chart.vars()[i as usize])).collect::<Vec<_>>().join("^")
}

/// Parses a wedge key back into ascending variable indices.
pub(crate) fn parse_wedge_key(chart: &Chart, key: &str) -> Result<Vec<usize>, String> {
    let k = key.trim();
    if k == "1" {
        return Ok(Vec::new());
    }
    let mut idx = Vec::new();
    for part in k.split('^') {
        let p = part.trim();
        let var = p
            .strip_prefix('d')
            .and_then(|name| chart.var_index(name))
            .ok_or_else(|| format!("unknown coordinate differential '{p}'"))?;
        idx.push(var);
    }
    Ok(idx)
}

fn value_label(form: &Form) -> String {
    match form.value_kind() {
        ValueKind::Scalar => "scalar".into(),
        ValueKind::Vector { dim, algebra: None } => format!("vector({dim})"),
        ValueKind::Vector { algebra: Some(a), .. } => format!("algebra({})", a.names().join(" ")),
        ValueKind::Tangent => "tangent".into(),
    }
}

/// Serializes a computed form for the report.  The chart is named by its
/// scenario id when one matches, otherwise by its variable list.
pub(crate) fn serialize_form(scenario: &Scenario, name: &str, form: &Form) -> SerializedForm {
    let chart = form.chart();
    let chart_name = scenario
        .charts
        .iter()
        .find(|(_, c)| *c == chart)
        .map(|(id, _)| id.clone())
        .unwrap_or_else(|| chart.describe());
    let names = chart.vars();
    let mut terms = BTreeMap::new();
    for (idx, comps) in form.terms() {
        terms.insert(
            wedge_key(chart, idx),
            comps.iter().map(|c| c.to_expr(names)).collect::<Vec<String>>(),
        );
    }
    SerializedForm {
        name: name.into(),
        chart: chart_name,
        degree: form.degree(),
        value: value_label(form),
        terms,
    }
}

impl SerializedForm {
    /// Rebuilds the form on the given chart with the given value kind;
    /// the round-trip partner of [`serialize_form`].
    pub fn reparse(&self, chart: &Chart, value: ValueKind) -> crate::error::Result<Form> {
        let mut out = Form::zero(chart.clone(), self.degree, value);
        for (key, comps) in &self.terms {
            let idx = parse_wedge_key(chart, key)
                .map_err(crate::error::Error::Invalid)?;
            let parsed: crate::error::Result<Vec<_>> =
                comps.iter().map(|c| chart.expr(c)).collect();
            out.set_term(&idx, parsed?)?;
        }
        Ok(out)
    }
}
