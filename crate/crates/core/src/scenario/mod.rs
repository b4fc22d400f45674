//! Scenario-driven batch checking.
//!
//! A scenario is a TOML document that declares named algebras, charts,
//! actions, forms, connection forms, bundles, matrix group charts,
//! curves, and invariant polynomials, followed by an ordered list of
//! checks over those declarations:
//!
//! ```toml
//! [algebras.nil]
//! basis = ["e1", "e2", "e3"]
//! brackets = [{ i = 0, j = 1, value = [0, 0, 1] }]
//!
//! [charts.space]
//! vars = ["x", "y", "z"]
//!
//! [actions.heis]
//! algebra = "nil"
//! chart = "space"
//! fields = [["1", "0", "0"], ["0", "1", "x"], ["0", "0", "1"]]
//!
//! [[checks]]
//! kind = "homomorphism"
//! action = "heis"
//! ```
//!
//! [`Scenario::parse`] fully validates the document — reference
//! resolution, algebra axioms, form well-formedness — and reports the
//! line and column of the offending construct.  [`Scenario::run`]
//! executes the checks and assembles a [`report::Report`]:
//!
//! * A failing or erroring `homomorphism` check marks its action as
//!   unreliable, and a failing `connection` check marks its connection
//!   form likewise; every later check that references the marked
//!   declaration (directly or through other declarations) is reported
//!   as `blocked` instead of running on data known to be bad.
//! * Checks whose declarations are disjoint run concurrently (bounded
//!   by the `jobs` override), but the report lists results in
//!   declaration order and its serialized bytes depend only on the
//!   scenario text, the seed, and the settings.
//! * Exact checks certify identities in rational arithmetic with zero
//!   tolerance; numeric checks (`transport`, `holonomy`, `develop`,
//!   `lift`) integrate with the configured step density and compare
//!   against expectations with an explicit tolerance.

mod parse;
mod report;
mod run;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::action::GAction;
use crate::chart::Chart;
use crate::connection::{ConnectionForm, LocalBundle};
use crate::error::Result;
use crate::form::Form;
use crate::homogeneous::MatrixGroupChart;
use crate::lie::{InvariantPolynomial, LieAlgebra};
use crate::poly::Rat;
use crate::transport::{CurveSpec, OdeSettings};

pub use report::{CheckReport, Report, ReportItem, SerializedForm, SettingsEcho, Status};

/// Execution knobs shared by every check in a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    /// ODE integration controls for the numeric checks.
    pub ode: OdeSettings,
    /// Default tolerance for numeric comparisons.
    pub tol: f64,
    /// Seed for the randomized exact suites.
    pub seed: u64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings { ode: OdeSettings::default(), tol: 1e-6, seed: 0 }
    }
}

/// Command-line overrides applied on top of a scenario's own settings.
#[derive(Debug, Clone, Default)]
pub struct RunOverrides {
    pub ode_steps: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    /// Maximum number of worker threads; `None` picks a sensible default.
    pub jobs: Option<usize>,
}

/// A parsed, fully validated scenario.
pub struct Scenario {
    pub settings: Settings,
    pub(crate) charts: BTreeMap<String, Chart>,
    pub(crate) algebras: BTreeMap<String, Arc<LieAlgebra>>,
    pub(crate) polynomials: BTreeMap<String, InvariantPolynomial>,
    pub(crate) actions: BTreeMap<String, GAction>,
    pub(crate) forms: BTreeMap<String, Form>,
    pub(crate) curves: BTreeMap<String, CurveSpec>,
    pub(crate) group_charts: BTreeMap<String, MatrixGroupChart>,
    pub(crate) connections: BTreeMap<String, ConnectionForm>,
    pub(crate) bundles: BTreeMap<String, LocalBundle>,
    /// Transitive reference closure per declaration id (`kind.name`),
    /// including the declaration itself.
    pub(crate) deps: BTreeMap<String, BTreeSet<String>>,
    pub(crate) checks: Vec<Check>,
}

impl Scenario {
    /// Parses and fully validates a scenario document.  Errors name the
    /// offending declaration and carry the line and column where the
    /// problem sits.
    pub fn parse(text: &str) -> Result<Scenario> {
        parse::parse(text)
    }

    /// Runs every check and assembles the report.
    pub fn run(&self, overrides: &RunOverrides) -> Report {
        run::run(self, overrides)
    }

    pub fn check_count(&self) -> usize {
        self.checks.len()
    }
}

/// One resolved check invocation.
pub(crate) struct Check {
    /// Display name: either user-chosen or `kind(refs)`.
    pub label: String,
    pub kind: CheckKind,
    /// Transitive closure of every declaration id this check reads.
    pub inputs: BTreeSet<String>,
    /// Declaration id this check certifies; a failure marks it so later
    /// checks that read it report `blocked`.
    pub subject: Option<String>,
    /// Whether the verdict is exact (rational arithmetic, zero
    /// tolerance) as opposed to numeric.
    pub exact: bool,
    /// Per-check tolerance override for numeric comparisons.
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ZeroExpect {
    Zero,
    Nonzero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum RepChoice {
    Trivial,
    Adjoint,
}

pub(crate) enum CheckKind {
    Homomorphism {
        action: String,
    },
    Classification {
        action: String,
        samples: usize,
        expect_free: Option<bool>,
        expect_transitive: Option<bool>,
    },
    Connection {
        connection: String,
    },
    Curvature {
        connection: String,
        expect: Option<ZeroExpect>,
    },
    MaurerCartan {
        action: String,
    },
    Basic {
        action: String,
        form: String,
        rep: RepChoice,
    },
    Invariance {
        polynomial: String,
        algebra: String,
    },
    ChernWeil {
        polynomial: String,
        connection: String,
    },
    Transgression {
        polynomial: String,
        from: String,
        to: String,
    },
    OperatorBattery {
        action: String,
        phi: String,
        psi: String,
        omega: Option<String>,
    },
    CovDerivBattery {
        connection: String,
        psi: String,
        big_psi: String,
        rep: RepChoice,
    },
    InsertionBattery {
        connection: String,
        forms: Vec<String>,
    },
    DualAction {
        action: String,
        dual: String,
    },
    Reductive {
        action: String,
        point: Vec<Rat>,
        expect_found: bool,
    },
    Asystatic {
        action: String,
        point: Vec<Rat>,
        expect: bool,
    },
    BracketSuite {
        chart: String,
        samples: usize,
        max_degree: usize,
    },
    BundleCurvature {
        bundle: String,
    },
    Transport {
        bundle: String,
        curve: String,
        start: Vec<Rat>,
        expect: Option<Vec<f64>>,
    },
    Holonomy {
        bundle: String,
        curve: String,
        start: Vec<Rat>,
        expect: Option<Vec<f64>>,
    },
    Develop {
        action: String,
        group_chart: String,
        curve: String,
        expect: Option<Vec<f64>>,
    },
    Lift {
        action: String,
        curve: String,
    },
}

impl CheckKind {
    pub(crate) fn name(&self) -> &'static str {
        match self {
            CheckKind::Homomorphism { .. } => "homomorphism",
            CheckKind::Classification { .. } => "classification",
            CheckKind::Connection { .. } => "connection",
            CheckKind::Curvature { .. } => "curvature",
            CheckKind::MaurerCartan { .. } => "maurer_cartan",
            CheckKind::Basic { .. } => "basic",
            CheckKind::Invariance { .. } => "invariance",
            CheckKind::ChernWeil { .. } => "chern_weil",
            CheckKind::Transgression { .. } => "transgression",
            CheckKind::OperatorBattery { .. } => "operator_battery",
            CheckKind::CovDerivBattery { .. } => "cov_deriv_battery",
            CheckKind::InsertionBattery { .. } => "insertion_battery",
            CheckKind::DualAction { .. } => "dual_action",
            CheckKind::Reductive { .. } => "reductive",
            CheckKind::Asystatic { .. } => "asystatic",
            CheckKind::BracketSuite { .. } => "bracket_suite",
            CheckKind::BundleCurvature { .. } => "bundle_curvature",
            CheckKind::Transport { .. } => "transport",
            CheckKind::Holonomy { .. } => "holonomy",
            CheckKind::Develop { .. } => "develop",
            CheckKind::Lift { .. } => "lift",
        }
    }
}

/// A scenario bundled into the binary, available to `fixtures list` and
/// `fixtures dump` without touching the filesystem.
pub struct BuiltinScenario {
    pub name: &'static str,
    pub summary: &'static str,
    pub text: &'static str,
}

/// The bundled scenarios, in menu order.
pub fn builtin_scenarios() -> &'static [BuiltinScenario] {
    &[
        BuiltinScenario {
            name: "heisenberg",
            summary: "free transitive nilpotent action: coframe, flat connection, developing map",
            text: include_str!("../../fixtures/heisenberg.toml"),
        },
        BuiltinScenario {
            name: "translations",
            summary: "vertical translations with a curved connection: curvature, characteristic forms, transgression",
            text: include_str!("../../fixtures/translations.toml"),
        },
        BuiltinScenario {
            name: "rotations",
            summary: "plane rotations on the punctured plane: classification and orbit lifting",
            text: include_str!("../../fixtures/rotations.toml"),
        },
        BuiltinScenario {
            name: "affine",
            summary: "affine line action: reductive complement and invariant connection data",
            text: include_str!("../../fixtures/affine.toml"),
        },
        BuiltinScenario {
            name: "shear-bundle",
            summary: "line bundle over the plane with a shear connection: transport and holonomy",
            text: include_str!("../../fixtures/shear-bundle.toml"),
        },
        BuiltinScenario {
            name: "all",
            summary: "the full gate: every bundled declaration and every check kind in one run",
            text: include_str!("../../fixtures/all.toml"),
        },
        BuiltinScenario {
            name: "tampered",
            summary: "deliberately broken bracket relations: the homomorphism check fails and dependents are blocked",
            text: include_str!("../../fixtures/tampered.toml"),
        },
    ]
}

/// Looks up a bundled scenario by name.
pub fn builtin(name: &str) -> Option<&'static BuiltinScenario> {
    builtin_scenarios().iter().find(|b| b.name == name)
}
