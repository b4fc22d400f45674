//! Itemized pass/fail certificates returned by verification operations.

use serde::Serialize;

/// One named check with an exact or numeric outcome.
#[derive(Clone, Debug, Serialize)]
pub struct CheckItem {
    pub name: String,
    pub ok: bool,
    /// Residual summary or counterexample; empty when nothing to report.
    pub detail: String,
}

/// Bundle of check items; passes iff every item passes.
#[derive(Clone, Debug, Serialize)]
pub struct Certificate {
    pub label: String,
    pub items: Vec<CheckItem>,
}

impl Certificate {
    pub fn new(label: impl Into<String>) -> Self {
        Certificate { label: label.into(), items: Vec::new() }
    }

    pub fn push(&mut self, name: impl Into<String>, ok: bool, detail: impl Into<String>) {
        self.items.push(CheckItem { name: name.into(), ok, detail: detail.into() });
    }

    /// Records an exact zero-residual check: ok iff `zero` is true.
    pub fn exact(&mut self, name: impl Into<String>, zero: bool, residual: impl Into<String>) {
        let detail = if zero { String::new() } else { residual.into() };
        self.items.push(CheckItem { name: name.into(), ok: zero, detail });
    }

    pub fn passed(&self) -> bool {
        self.items.iter().all(|i| i.ok)
    }

    pub fn first_failure(&self) -> Option<&CheckItem> {
        self.items.iter().find(|i| !i.ok)
    }

    /// Short textual summary: "pass" or the first failing item.
    pub fn summary(&self) -> String {
        match self.first_failure() {
            None => format!("pass ({} checks)", self.items.len()),
            Some(item) => {
                if item.detail.is_empty() {
                    format!("FAIL at {}", item.name)
                } else {
                    format!("FAIL at {}: {}", item.name, item.detail)
                }
            }
        }
    }

    pub fn merge(&mut self, other: Certificate) {
        self.items.extend(other.items);
    }
}
