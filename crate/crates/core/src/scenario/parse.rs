//! Scenario parsing: TOML text to a fully validated [`Scenario`].
//!
//! Every declaration is resolved and validated here — algebra axioms,
//! expression well-formedness, reference resolution, arity — before any
//! check runs.  Errors name the offending declaration and, wherever the
//! source position is known, the line and column.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use num::{BigInt, Zero};
use serde::Deserialize;
use toml::Spanned;

use crate::action::GAction;
use crate::chart::Chart;
use crate::connection::{ConnectionForm, LocalBundle};
use crate::error::{Error, Result};
use crate::form::{Form, ValueKind};
use crate::homogeneous::MatrixGroupChart;
use crate::lie::{InvariantPolynomial, LieAlgebra};
use crate::linalg::QVec;
use crate::poly::{rat_int, Rat};
use crate::ratfunc::RF;
use crate::scenario::{Check, CheckKind, RepChoice, Scenario, Settings, ZeroExpect};
use crate::transport::CurveSpec;

// ---------------------------------------------------------------- raw model

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(default)]
    settings: RawSettings,
    #[serde(default)]
    algebras: BTreeMap<String, RawAlgebra>,
    #[serde(default)]
    charts: BTreeMap<String, RawChart>,
    #[serde(default)]
    polynomials: BTreeMap<String, RawPolynomial>,
    #[serde(default)]
    actions: BTreeMap<String, RawAction>,
    #[serde(default)]
    forms: BTreeMap<String, RawForm>,
    #[serde(default)]
    curves: BTreeMap<String, RawCurve>,
    #[serde(default)]
    group_charts: BTreeMap<String, RawGroupChart>,
    #[serde(default)]
    connections: BTreeMap<String, RawConnection>,
    #[serde(default)]
    bundles: BTreeMap<String, RawBundle>,
    #[serde(default)]
    checks: Vec<RawCheck>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSettings {
    ode_steps: Option<usize>,
    richardson: Option<bool>,
    richardson_tol: Option<f64>,
    tol: Option<f64>,
    seed: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAlgebra {
    basis: Vec<String>,
    #[serde(default)]
    brackets: Vec<Spanned<RawBracket>>,
    rep: Option<Vec<Vec<Vec<RawRat>>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBracket {
    i: usize,
    j: usize,
    value: Vec<RawRat>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawRat {
    Int(i64),
    Expr(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChart {
    vars: Vec<String>,
    #[serde(default)]
    excluded: Vec<Spanned<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolynomial {
    dim: Option<usize>,
    degree: Option<usize>,
    #[serde(default)]
    coeffs: Vec<RawCoeff>,
    trace: Option<RawTrace>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoeff {
    idx: Vec<usize>,
    value: RawRat,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrace {
    algebra: String,
    k: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAction {
    algebra: String,
    chart: String,
    fields: Vec<Vec<Spanned<String>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawForm {
    chart: String,
    degree: usize,
    value: RawValueKind,
    #[serde(default)]
    terms: BTreeMap<String, Vec<Spanned<String>>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawValueKind {
    Tag(String),
    Vector { vector: usize },
    Algebra { algebra: String },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCurve {
    chart: String,
    polynomial: Option<Vec<Spanned<String>>>,
    breakpoints: Option<Vec<RawRat>>,
    pieces: Option<Vec<Vec<Spanned<String>>>>,
    segments: Option<Vec<Vec<RawRat>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGroupChart {
    algebra: String,
    chart: String,
    param: Vec<Vec<Spanned<String>>>,
    param_inv: Vec<Vec<Spanned<String>>>,
    entries: Vec<Vec<usize>>,
    identity: Vec<RawRat>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConnection {
    action: String,
    form: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBundle {
    base: String,
    fiber_action: String,
    christoffel: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCheck {
    kind: Spanned<String>,
    name: Option<String>,
    action: Option<String>,
    dual: Option<String>,
    algebra: Option<String>,
    chart: Option<String>,
    connection: Option<String>,
    from: Option<String>,
    to: Option<String>,
    form: Option<String>,
    phi: Option<String>,
    psi: Option<String>,
    big_psi: Option<String>,
    omega: Option<String>,
    forms: Option<Vec<String>>,
    polynomial: Option<String>,
    bundle: Option<String>,
    curve: Option<String>,
    group_chart: Option<String>,
    point: Option<Vec<RawRat>>,
    start: Option<Vec<RawRat>>,
    samples: Option<usize>,
    max_degree: Option<usize>,
    expect_free: Option<bool>,
    expect_transitive: Option<bool>,
    rep: Option<Spanned<String>>,
    expect: Option<Spanned<toml::Value>>,
    tol: Option<f64>,
}

// ------------------------------------------------------------- entry point

pub(super) fn parse(text: &str) -> Result<Scenario> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| {
        let place = match e.span() {
            Some(r) => {
                let (l, c) = line_col(text, r.start);
                format!("line {l}, column {c} (syntax)")
            }
            None => "syntax".into(),
        };
        Error::Scenario { place, msg: e.message().to_string() }
    })?;
    Resolver::new(text, raw).finish()
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let mut line = 1;
    let mut col = 1;
    for (i, ch) in text.char_indices() {
        if i >= offset {
            break;
        }
        if ch == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    (line, col)
}

fn plain(place: impl Into<String>, msg: impl Into<String>) -> Error {
    Error::Scenario { place: place.into(), msg: msg.into() }
}

// --------------------------------------------------------------- resolver

struct Resolver<'t> {
    text: &'t str,
    raw: RawScenario,
    sc: Scenario,
}

impl<'t> Resolver<'t> {
    fn new(text: &'t str, raw: RawScenario) -> Self {
        let settings = Settings::default();
        Resolver {
            text,
            raw,
            sc: Scenario {
                settings,
                charts: BTreeMap::new(),
                algebras: BTreeMap::new(),
                polynomials: BTreeMap::new(),
                actions: BTreeMap::new(),
                forms: BTreeMap::new(),
                curves: BTreeMap::new(),
                group_charts: BTreeMap::new(),
                connections: BTreeMap::new(),
                bundles: BTreeMap::new(),
                deps: BTreeMap::new(),
                checks: Vec::new(),
            },
        }
    }

    fn at(&self, span: std::ops::Range<usize>, place: &str, msg: impl Into<String>) -> Error {
        let (l, c) = line_col(self.text, span.start);
        Error::Scenario {
            place: format!("line {l}, column {c} ({place})"),
            msg: msg.into(),
        }
    }

    /// Parses an expression on a chart, pinning the source position.
    fn expr(&self, chart: &Chart, s: &Spanned<String>, place: &str) -> Result<RF> {
        chart.expr(s.get_ref()).map_err(|e| {
            let msg = match e {
                Error::DivisionByZero => "zero denominator after canonicalization".to_string(),
                Error::ExprParse { pos, msg } if msg.contains("division by zero") => {
                    format!("zero denominator after canonicalization (offset {pos} in the expression)")
                }
                Error::ExprParse { pos, msg } => format!("{msg} (offset {pos} in the expression)"),
                other => other.to_string(),
            };
            self.at(s.span(), place, msg)
        })
    }

    fn rat(&self, r: &RawRat, place: &str) -> Result<Rat> {
        match r {
            RawRat::Int(n) => Ok(rat_int(*n)),
            RawRat::Expr(s) => {
                let parts: Vec<&str> = s.split('/').collect();
                let bad = || plain(place, format!("'{s}' is not an integer or p/q rational"));
                match parts.as_slice() {
                    [p] => Ok(Rat::from(BigInt::from_str(p.trim()).map_err(|_| bad())?)),
                    [p, q] => {
                        let num = BigInt::from_str(p.trim()).map_err(|_| bad())?;
                        let den = BigInt::from_str(q.trim()).map_err(|_| bad())?;
                        if den.is_zero() {
                            return Err(plain(place, format!("'{s}' has a zero denominator")));
                        }
                        Ok(Rat::new(num, den))
                    }
                    _ => Err(bad()),
                }
            }
        }
    }

    fn rats(&self, rs: &[RawRat], place: &str) -> Result<Vec<Rat>> {
        rs.iter().map(|r| self.rat(r, place)).collect()
    }

    /// Registers a declaration's transitive dependency closure.
    fn add_decl(&mut self, id: &str, direct: &[String]) {
        let mut set = BTreeSet::new();
        set.insert(id.to_string());
        for d in direct {
            if let Some(prev) = self.sc.deps.get(d) {
                set.extend(prev.iter().cloned());
            }
        }
        self.sc.deps.insert(id.to_string(), set);
    }

    fn finish(mut self) -> Result<Scenario> {
        self.settings()?;
        self.charts()?;
        self.algebras()?;
        self.polynomials()?;
        self.actions()?;
        self.forms()?;
        self.curves()?;
        self.group_charts()?;
        self.connections()?;
        self.bundles()?;
        self.checks()?;
        Ok(self.sc)
    }

    fn settings(&mut self) -> Result<()> {
        let s = &self.raw.settings;
        let mut out = Settings::default();
        if let Some(n) = s.ode_steps {
            if n == 0 {
                return Err(plain("settings.ode_steps", "must be at least 1"));
            }
            out.ode.steps_per_unit_time = n;
        }
        if let Some(r) = s.richardson {
            out.ode.richardson_check = r;
        }
        if let Some(t) = s.richardson_tol {
            out.ode.richardson_tol = t;
        }
        if let Some(t) = s.tol {
            if t <= 0.0 || !t.is_finite() {
                return Err(plain("settings.tol", "tolerance must be positive"));
            }
            out.tol = t;
        }
        if let Some(seed) = s.seed {
            out.seed = seed;
        }
        self.sc.settings = out;
        Ok(())
    }

    fn charts(&mut self) -> Result<()> {
        let raws = std::mem::take(&mut self.raw.charts);
        for (name, rc) in raws {
            let place = format!("charts.{name}");
            let bare = Chart::new(rc.vars.clone())
                .map_err(|e| plain(&place, e.to_string()))?;
            let mut excluded = Vec::new();
            for (k, ex) in rc.excluded.iter().enumerate() {
                excluded.push(self.expr(&bare, ex, &format!("{place}.excluded[{k}]"))?);
            }
            let chart = if excluded.is_empty() {
                bare
            } else {
                Chart::with_excluded(rc.vars, excluded)
                    .map_err(|e| plain(&place, e.to_string()))?
            };
            self.sc.charts.insert(name.clone(), chart);
            self.add_decl(&place, &[]);
        }
        Ok(())
    }

    fn algebras(&mut self) -> Result<()> {
        let raws = std::mem::take(&mut self.raw.algebras);
        for (name, ra) in raws {
            let place = format!("algebras.{name}");
            let n = ra.basis.len();
            // Fold sparse entries, rejecting antisymmetry violations with
            // the offending (i, j, k).
            let mut seen: BTreeMap<(usize, usize), (usize, QVec)> = BTreeMap::new();
            let mut sparse: Vec<(usize, usize, QVec)> = Vec::new();
            for (ei, sb) in ra.brackets.iter().enumerate() {
                let eplace = format!("{place}.brackets[{ei}]");
                let b = sb.get_ref();
                if b.i >= n || b.j >= n {
                    return Err(self.at(
                        sb.span(),
                        &eplace,
                        format!("generator index out of range (basis has {n} elements)"),
                    ));
                }
                if b.value.len() != n {
                    return Err(self.at(
                        sb.span(),
                        &eplace,
                        format!("bracket value needs {n} coordinates"),
                    ));
                }
                let v = self.rats(&b.value, &eplace)?;
                if b.i == b.j {
                    if let Some(k) = v.iter().position(|x| !x.is_zero()) {
                        return Err(self.at(
                            sb.span(),
                            &eplace,
                            format!(
                                "antisymmetry violated at (i, j, k) = ({}, {}, {k}): a bracket of a generator with itself must vanish",
                                b.i, b.j
                            ),
                        ));
                    }
                    continue;
                }
                let (lo, hi) = (b.i.min(b.j), b.i.max(b.j));
                let canon: QVec =
                    if b.i < b.j { v } else { v.into_iter().map(|x| -x).collect() };
                if let Some((prev_ei, prev)) = seen.get(&(lo, hi)) {
                    if *prev != canon {
                        let k = prev
                            .iter()
                            .zip(&canon)
                            .position(|(a, b)| a != b)
                            .unwrap_or(0);
                        return Err(self.at(
                            sb.span(),
                            &eplace,
                            format!(
                                "antisymmetry violated at (i, j, k) = ({}, {}, {k}): conflicts with brackets[{prev_ei}]",
                                b.i, b.j
                            ),
                        ));
                    }
                    continue;
                }
                seen.insert((lo, hi), (ei, canon.clone()));
                sparse.push((lo, hi, canon));
            }
            let alg = LieAlgebra::from_sparse(ra.basis, &sparse)
                .map_err(|e| plain(&place, e.to_string()))?;
            let jacobi = alg.check_jacobi();
            if !jacobi.passed() {
                let detail = jacobi
                    .first_failure()
                    .map(|i| i.name.clone())
                    .unwrap_or_default();
                return Err(plain(&place, format!("jacobi identity violated at {detail}")));
            }
            let alg = match ra.rep {
                None => alg,
                Some(raw_rep) => {
                    let rep_place = format!("{place}.rep");
                    let mut rep = Vec::with_capacity(raw_rep.len());
                    for mat in &raw_rep {
                        let mut rows = Vec::with_capacity(mat.len());
                        for row in mat {
                            rows.push(self.rats(row, &rep_place)?);
                        }
                        rep.push(rows);
                    }
                    alg.with_matrix_rep(rep).map_err(|e| plain(&rep_place, e.to_string()))?
                }
            };
            self.sc.algebras.insert(name.clone(), std::sync::Arc::new(alg));
            self.add_decl(&place, &[]);
        }
        Ok(())
    }

    fn polynomials(&mut self) -> Result<()> {
        let raws = std::mem::take(&mut self.raw.polynomials);
        for (name, rp) in raws {
            let place = format!("polynomials.{name}");
            let (poly, deps) = match (&rp.trace, rp.dim, rp.degree) {
                (Some(tr), None, None) => {
                    let alg_id = format!("algebras.{}", tr.algebra);
                    let alg = self
                        .sc
                        .algebras
                        .get(&tr.algebra)
                        .ok_or_else(|| plain(&place, format!("unresolved reference to {alg_id}")))?;
                    let p = InvariantPolynomial::trace_polynomial(alg, tr.k)
                        .map_err(|e| plain(&place, e.to_string()))?;
                    (p, vec![alg_id])
                }
                (None, Some(dim), Some(degree)) => {
                    let mut entries = Vec::new();
                    for (ci, c) in rp.coeffs.iter().enumerate() {
                        let v = self.rat(&c.value, &format!("{place}.coeffs[{ci}]"))?;
                        entries.push((c.idx.clone(), v));
                    }
                    let p = InvariantPolynomial::new(dim, degree, &entries)
                        .map_err(|e| plain(&place, e.to_string()))?;
                    (p, Vec::new())
                }
                _ => {
                    return Err(plain(
                        &place,
                        "give either trace = { algebra, k } or dim + degree + coeffs",
                    ))
                }
            };
            self.sc.polynomials.insert(name.clone(), poly);
            self.add_decl(&place, &deps);
        }
        Ok(())
    }

    fn actions(&mut self) -> Result<()> {
        let raws = std::mem::take(&mut self.raw.actions);
        for (name, ra) in raws {
            let place = format!("actions.{name}");
            let alg_id = format!("algebras.{}", ra.algebra);
            let chart_id = format!("charts.{}", ra.chart);
            let alg = self
                .sc
                .algebras
                .get(&ra.algebra)
                .ok_or_else(|| plain(&place, format!("unresolved reference to {alg_id}")))?
                .clone();
            let chart = self
                .sc
                .charts
                .get(&ra.chart)
                .ok_or_else(|| plain(&place, format!("unresolved reference to {chart_id}")))?
                .clone();
            let mut fields = Vec::with_capacity(ra.fields.len());
            for (fi, row) in ra.fields.iter().enumerate() {
                let fplace = format!("{place}.fields[{fi}]");
                let comps: Result<Vec<RF>> =
                    row.iter().map(|s| self.expr(&chart, s, &fplace)).collect();
                fields.push(
                    crate::form::VectorField::new(chart.clone(), comps?)
                        .map_err(|e| plain(&fplace, e.to_string()))?,
                );
            }
            let action = GAction::new(alg, chart, fields)
                .map_err(|e| plain(&place, e.to_string()))?;
            self.sc.actions.insert(name.clone(), action);
            self.add_decl(&place, &[alg_id, chart_id]);
        }
        Ok(())
    }

    fn forms(&mut self) -> Result<()> {
        let raws = std::mem::take(&mut self.raw.forms);
        for (name, rf) in raws {
            let place = format!("forms.{name}");
            let chart_id = format!("charts.{}", rf.chart);
            let chart = self
                .sc
                .charts
                .get(&rf.chart)
                .ok_or_else(|| plain(&place, format!("unresolved reference to {chart_id}")))?
                .clone();
            let mut deps = vec![chart_id];
            let kind = match &rf.value {
                RawValueKind::Tag(t) if t == "scalar" => ValueKind::Scalar,
                RawValueKind::Tag(t) if t == "tangent" => ValueKind::Tangent,
                RawValueKind::Tag(t) => {
                    return Err(plain(
                        format!("{place}.value"),
                        format!("unknown value kind '{t}' (expected \"scalar\", \"tangent\", {{ vector = n }}, or {{ algebra = name }})"),
                    ))
                }
                RawValueKind::Vector { vector } => ValueKind::vector(*vector),
                RawValueKind::Algebra { algebra } => {
                    let alg_id = format!("algebras.{algebra}");
                    let alg = self.sc.algebras.get(algebra).ok_or_else(|| {
                        plain(&place, format!("unresolved reference to {alg_id}"))
                    })?;
                    deps.push(alg_id);
                    ValueKind::algebra_valued(alg.clone())
                }
            };
            let mut form = Form::zero(chart.clone(), rf.degree, kind);
            for (key, comps) in &rf.terms {
                let tplace = format!("{place}.terms[{key}]");
                let idx = super::report::parse_wedge_key(&chart, key).map_err(|msg| {
                    match comps.first() {
                        Some(anchor) => self.at(anchor.span(), &tplace, msg),
                        None => plain(&tplace, msg),
                    }
                })?;
                let parsed: Result<Vec<RF>> =
                    comps.iter().map(|s| self.expr(&chart, s, &tplace)).collect();
                form.set_term(&idx, parsed?).map_err(|e| match comps.first() {
                    Some(anchor) => self.at(anchor.span(), &tplace, e.to_string()),
                    None => plain(&tplace, e.to_string()),
                })?;
            }
            self.sc.forms.insert(name.clone(), form);
            self.add_decl(&place, &deps);
        }
        Ok(())
    }

    fn curves(&mut self) -> Result<()> {
        let raws = std::mem::take(&mut self.raw.curves);
        for (name, rc) in raws {
            let place = format!("curves.{name}");
            let chart_id = format!("charts.{}", rc.chart);
            let target = self
                .sc
                .charts
                .get(&rc.chart)
                .ok_or_else(|| plain(&place, format!("unresolved reference to {chart_id}")))?
                .clone();
            let tchart = Chart::of(&["t"]);
            let curve = match (&rc.polynomial, &rc.breakpoints, &rc.pieces, &rc.segments) {
                (Some(comps), None, None, None) => {
                    let parsed: Result<Vec<RF>> = comps
                        .iter()
                        .map(|s| self.expr(&tchart, s, &format!("{place}.polynomial")))
                        .collect();
                    CurveSpec::polynomial(target, parsed?)
                }
                (None, Some(bps), Some(pieces), None) => {
                    let breakpoints = self.rats(bps, &format!("{place}.breakpoints"))?;
                    let mut parsed_pieces = Vec::with_capacity(pieces.len());
                    for (pi, piece) in pieces.iter().enumerate() {
                        let pplace = format!("{place}.pieces[{pi}]");
                        let comps: Result<Vec<RF>> =
                            piece.iter().map(|s| self.expr(&tchart, s, &pplace)).collect();
                        parsed_pieces.push(comps?);
                    }
                    CurveSpec::new(target, breakpoints, parsed_pieces)
                }
                (None, None, None, Some(pts)) => {
                    let mut points = Vec::with_capacity(pts.len());
                    for (pi, p) in pts.iter().enumerate() {
                        points.push(self.rats(p, &format!("{place}.segments[{pi}]"))?);
                    }
                    CurveSpec::segments(target, &points)
                }
                _ => {
                    return Err(plain(
                        &place,
                        "give exactly one of polynomial, breakpoints + pieces, or segments",
                    ))
                }
            }
            .map_err(|e| plain(&place, e.to_string()))?;
            self.sc.curves.insert(name.clone(), curve);
            self.add_decl(&place, &[chart_id]);
        }
        Ok(())
    }

    fn group_charts(&mut self) -> Result<()> {
        let raws = std::mem::take(&mut self.raw.group_charts);
        for (name, rg) in raws {
            let place = format!("group_charts.{name}");
            let alg_id = format!("algebras.{}", rg.algebra);
            let chart_id = format!("charts.{}", rg.chart);
            let alg = self
                .sc
                .algebras
                .get(&rg.algebra)
                .ok_or_else(|| plain(&place, format!("unresolved reference to {alg_id}")))?
                .clone();
            let chart = self
                .sc
                .charts
                .get(&rg.chart)
                .ok_or_else(|| plain(&place, format!("unresolved reference to {chart_id}")))?
                .clone();
            let parse_mat = |label: &str, mat: &Vec<Vec<Spanned<String>>>| -> Result<Vec<Vec<RF>>> {
                let mplace = format!("{place}.{label}");
                mat.iter()
                    .map(|row| row.iter().map(|s| self.expr(&chart, s, &mplace)).collect())
                    .collect()
            };
            let param = parse_mat("param", &rg.param)?;
            let param_inv = parse_mat("param_inv", &rg.param_inv)?;
            let mut entries = Vec::with_capacity(rg.entries.len());
            for (k, e) in rg.entries.iter().enumerate() {
                if e.len() != 2 {
                    return Err(plain(
                        format!("{place}.entries[{k}]"),
                        "each entry coordinate is a [row, column] pair",
                    ));
                }
                entries.push((e[0], e[1]));
            }
            let identity = self.rats(&rg.identity, &format!("{place}.identity"))?;
            let gc = MatrixGroupChart::new(alg, chart, param, param_inv, entries, identity)
                .map_err(|e| plain(&place, e.to_string()))?;
            self.sc.group_charts.insert(name.clone(), gc);
            self.add_decl(&place, &[alg_id, chart_id]);
        }
        Ok(())
    }

    fn connections(&mut self) -> Result<()> {
        let raws = std::mem::take(&mut self.raw.connections);
        for (name, rc) in raws {
            let place = format!("connections.{name}");
            let action_id = format!("actions.{}", rc.action);
            let form_id = format!("forms.{}", rc.form);
            let action = self
                .sc
                .actions
                .get(&rc.action)
                .ok_or_else(|| plain(&place, format!("unresolved reference to {action_id}")))?
                .clone();
            let form = self
                .sc
                .forms
                .get(&rc.form)
                .ok_or_else(|| plain(&place, format!("unresolved reference to {form_id}")))?
                .clone();
            let omc = ConnectionForm::new(action, form)
                .map_err(|e| plain(&place, e.to_string()))?;
            self.sc.connections.insert(name.clone(), omc);
            self.add_decl(&place, &[action_id, form_id]);
        }
        Ok(())
    }

    fn bundles(&mut self) -> Result<()> {
        let raws = std::mem::take(&mut self.raw.bundles);
        for (name, rb) in raws {
            let place = format!("bundles.{name}");
            let base_id = format!("charts.{}", rb.base);
            let action_id = format!("actions.{}", rb.fiber_action);
            let form_id = format!("forms.{}", rb.christoffel);
            let base = self
                .sc
                .charts
                .get(&rb.base)
                .ok_or_else(|| plain(&place, format!("unresolved reference to {base_id}")))?
                .clone();
            let fiber_action = self
                .sc
                .actions
                .get(&rb.fiber_action)
                .ok_or_else(|| plain(&place, format!("unresolved reference to {action_id}")))?
                .clone();
            let christoffel = self
                .sc
                .forms
                .get(&rb.christoffel)
                .ok_or_else(|| plain(&place, format!("unresolved reference to {form_id}")))?
                .clone();
            let bundle = LocalBundle::new(base, fiber_action, christoffel)
                .map_err(|e| plain(&place, e.to_string()))?;
            self.sc.bundles.insert(name.clone(), bundle);
            self.add_decl(&place, &[base_id, action_id, form_id]);
        }
        Ok(())
    }

    // ------------------------------------------------------------- checks

    fn checks(&mut self) -> Result<()> {
        let raws = std::mem::take(&mut self.raw.checks);
        for (ci, rc) in raws.iter().enumerate() {
            let place = format!("checks[{ci}]");
            let check = self.one_check(rc, &place)?;
            self.sc.checks.push(check);
        }
        Ok(())
    }

    fn one_check(&self, rc: &RawCheck, place: &str) -> Result<Check> {
        let kind_name = rc.kind.get_ref().as_str();
        let mut refs: Vec<String> = Vec::new();
        let mut inputs: BTreeSet<String> = BTreeSet::new();
        let mut subject = None;

        // Reference helpers: resolve a name in one declaration kind,
        // record the dependency closure, and remember the display name.
        macro_rules! lookup {
            ($field:expr, $map:ident, $kind:literal) => {{
                let name = req($field, concat!($kind, " reference"), place)?;
                let id = format!(concat!($kind, "s.{}"), name);
                if !self.sc.$map.contains_key(name) {
                    return Err(plain(place, format!("unresolved reference to {id}")));
                }
                if let Some(closure) = self.sc.deps.get(&id) {
                    inputs.extend(closure.iter().cloned());
                }
                refs.push(name.clone());
                (name.clone(), id)
            }};
        }

        let kind = match kind_name {
            "homomorphism" => {
                let (a, id) = lookup!(&rc.action, actions, "action");
                subject = Some(id);
                CheckKind::Homomorphism { action: a }
            }
            "classification" => {
                let (a, _) = lookup!(&rc.action, actions, "action");
                CheckKind::Classification {
                    action: a,
                    samples: rc.samples.unwrap_or(5).max(1),
                    expect_free: rc.expect_free,
                    expect_transitive: rc.expect_transitive,
                }
            }
            "connection" => {
                let (c, id) = lookup!(&rc.connection, connections, "connection");
                subject = Some(id);
                CheckKind::Connection { connection: c }
            }
            "curvature" => {
                let (c, _) = lookup!(&rc.connection, connections, "connection");
                let expect = match self.expect_str(rc, place)? {
                    None => None,
                    Some(s) if s == "zero" => Some(ZeroExpect::Zero),
                    Some(s) if s == "nonzero" => Some(ZeroExpect::Nonzero),
                    Some(s) => {
                        return Err(plain(
                            place,
                            format!("expect must be \"zero\" or \"nonzero\", got '{s}'"),
                        ))
                    }
                };
                CheckKind::Curvature { connection: c, expect }
            }
            "maurer_cartan" => {
                let (a, _) = lookup!(&rc.action, actions, "action");
                CheckKind::MaurerCartan { action: a }
            }
            "basic" => {
                let (a, _) = lookup!(&rc.action, actions, "action");
                let (f, _) = lookup!(&rc.form, forms, "form");
                self.same_chart(
                    self.sc.actions[&a].chart(),
                    self.sc.forms[&f].chart(),
                    place,
                )?;
                CheckKind::Basic { action: a, form: f, rep: self.rep_choice(rc, place)? }
            }
            "invariance" => {
                let (p, _) = lookup!(&rc.polynomial, polynomials, "polynomial");
                let (al, _) = lookup!(&rc.algebra, algebras, "algebra");
                if self.sc.polynomials[&p].dim() != self.sc.algebras[&al].dim() {
                    return Err(plain(
                        place,
                        "the polynomial's slot dimension differs from the algebra dimension",
                    ));
                }
                CheckKind::Invariance { polynomial: p, algebra: al }
            }
            "chern_weil" => {
                let (p, _) = lookup!(&rc.polynomial, polynomials, "polynomial");
                let (c, _) = lookup!(&rc.connection, connections, "connection");
                if self.sc.polynomials[&p].dim()
                    != self.sc.connections[&c].action().algebra().dim()
                {
                    return Err(plain(
                        place,
                        "the polynomial's slot dimension differs from the algebra dimension",
                    ));
                }
                CheckKind::ChernWeil { polynomial: p, connection: c }
            }
            "transgression" => {
                let (p, _) = lookup!(&rc.polynomial, polynomials, "polynomial");
                let (f, _) = lookup!(&rc.from, connections, "connection");
                let (t, _) = lookup!(&rc.to, connections, "connection");
                CheckKind::Transgression { polynomial: p, from: f, to: t }
            }
            "operator_battery" => {
                let (a, _) = lookup!(&rc.action, actions, "action");
                let (phi, _) = lookup!(&rc.phi, forms, "form");
                let (psi, _) = lookup!(&rc.psi, forms, "form");
                let omega = match &rc.omega {
                    None => None,
                    Some(_) => Some(lookup!(&rc.omega, forms, "form").0),
                };
                CheckKind::OperatorBattery { action: a, phi, psi, omega }
            }
            "cov_deriv_battery" => {
                let (c, _) = lookup!(&rc.connection, connections, "connection");
                let (psi, _) = lookup!(&rc.psi, forms, "form");
                let (big, _) = lookup!(&rc.big_psi, forms, "form");
                CheckKind::CovDerivBattery {
                    connection: c,
                    psi,
                    big_psi: big,
                    rep: self.rep_choice(rc, place)?,
                }
            }
            "insertion_battery" => {
                let (c, _) = lookup!(&rc.connection, connections, "connection");
                let names = rc
                    .forms
                    .as_ref()
                    .ok_or_else(|| plain(place, "missing forms list"))?;
                let mut forms = Vec::with_capacity(names.len());
                for n in names {
                    let id = format!("forms.{n}");
                    if !self.sc.forms.contains_key(n) {
                        return Err(plain(place, format!("unresolved reference to {id}")));
                    }
                    if let Some(closure) = self.sc.deps.get(&id) {
                        inputs.extend(closure.iter().cloned());
                    }
                    forms.push(n.clone());
                }
                CheckKind::InsertionBattery { connection: c, forms }
            }
            "dual_action" => {
                let (a, _) = lookup!(&rc.action, actions, "action");
                let (d, _) = lookup!(&rc.dual, actions, "action");
                CheckKind::DualAction { action: a, dual: d }
            }
            "reductive" => {
                let (a, _) = lookup!(&rc.action, actions, "action");
                let point = self.check_point(rc, &rc.point, &self.sc.actions[&a], place)?;
                let expect_found = match self.expect_str(rc, place)?.as_deref() {
                    None | Some("found") => true,
                    Some("none") => false,
                    Some(s) => {
                        return Err(plain(
                            place,
                            format!("expect must be \"found\" or \"none\", got '{s}'"),
                        ))
                    }
                };
                CheckKind::Reductive { action: a, point, expect_found }
            }
            "asystatic" => {
                let (a, _) = lookup!(&rc.action, actions, "action");
                let point = self.check_point(rc, &rc.point, &self.sc.actions[&a], place)?;
                let expect = self.expect_bool(rc, place)?.unwrap_or(true);
                CheckKind::Asystatic { action: a, point, expect }
            }
            "bracket_suite" => {
                let (c, _) = lookup!(&rc.chart, charts, "chart");
                CheckKind::BracketSuite {
                    chart: c,
                    samples: rc.samples.unwrap_or(25).max(1),
                    max_degree: rc.max_degree.unwrap_or(2),
                }
            }
            "bundle_curvature" => {
                let (b, _) = lookup!(&rc.bundle, bundles, "bundle");
                CheckKind::BundleCurvature { bundle: b }
            }
            "transport" => {
                let (b, _) = lookup!(&rc.bundle, bundles, "bundle");
                let (cv, _) = lookup!(&rc.curve, curves, "curve");
                let bundle = &self.sc.bundles[&b];
                self.same_chart(bundle.base_chart(), self.sc.curves[&cv].target(), place)?;
                let start = self.fiber_point(rc, bundle, place)?;
                CheckKind::Transport { bundle: b, curve: cv, start, expect: self.expect_f64s(rc, place)? }
            }
            "holonomy" => {
                let (b, _) = lookup!(&rc.bundle, bundles, "bundle");
                let (cv, _) = lookup!(&rc.curve, curves, "curve");
                let bundle = &self.sc.bundles[&b];
                let curve = &self.sc.curves[&cv];
                self.same_chart(bundle.base_chart(), curve.target(), place)?;
                if !curve.is_closed().map_err(|e| plain(place, e.to_string()))? {
                    return Err(plain(place, "holonomy needs a closed loop"));
                }
                let start = self.fiber_point(rc, bundle, place)?;
                CheckKind::Holonomy { bundle: b, curve: cv, start, expect: self.expect_f64s(rc, place)? }
            }
            "develop" => {
                let (a, _) = lookup!(&rc.action, actions, "action");
                let (g, _) = lookup!(&rc.group_chart, group_charts, "group_chart");
                let (cv, _) = lookup!(&rc.curve, curves, "curve");
                self.same_chart(
                    self.sc.actions[&a].chart(),
                    self.sc.curves[&cv].target(),
                    place,
                )?;
                CheckKind::Develop {
                    action: a,
                    group_chart: g,
                    curve: cv,
                    expect: self.expect_f64s(rc, place)?,
                }
            }
            "lift" => {
                let (a, _) = lookup!(&rc.action, actions, "action");
                let (cv, _) = lookup!(&rc.curve, curves, "curve");
                self.same_chart(
                    self.sc.actions[&a].chart(),
                    self.sc.curves[&cv].target(),
                    place,
                )?;
                CheckKind::Lift { action: a, curve: cv }
            }
            other => {
                return Err(self.at(
                    rc.kind.span(),
                    place,
                    format!("unknown check kind '{other}'"),
                ))
            }
        };

        let exact = !matches!(
            kind,
            CheckKind::Transport { .. }
                | CheckKind::Holonomy { .. }
                | CheckKind::Develop { .. }
                | CheckKind::Lift { .. }
        );
        let label = match &rc.name {
            Some(n) => n.clone(),
            None => format!("{}({})", kind.name(), refs.join(", ")),
        };
        if let Some(t) = rc.tol {
            if t <= 0.0 || !t.is_finite() {
                return Err(plain(place, "tolerance must be positive"));
            }
        }
        Ok(Check { label, kind, inputs, subject, exact, tol: rc.tol })
    }

    fn same_chart(&self, a: &Chart, b: &Chart, place: &str) -> Result<()> {
        if a != b {
            return Err(plain(
                place,
                format!("chart mismatch: {} vs {}", a.describe(), b.describe()),
            ));
        }
        Ok(())
    }

    fn rep_choice(&self, rc: &RawCheck, place: &str) -> Result<RepChoice> {
        match &rc.rep {
            None => Ok(RepChoice::Trivial),
            Some(s) => match s.get_ref().as_str() {
                "trivial" => Ok(RepChoice::Trivial),
                "adjoint" => Ok(RepChoice::Adjoint),
                other => Err(self.at(
                    s.span(),
                    place,
                    format!("rep must be \"trivial\" or \"adjoint\", got '{other}'"),
                )),
            },
        }
    }

    fn check_point(
        &self,
        _rc: &RawCheck,
        point: &Option<Vec<RawRat>>,
        action: &GAction,
        place: &str,
    ) -> Result<Vec<Rat>> {
        let raw = point.as_ref().ok_or_else(|| plain(place, "missing point"))?;
        let p = self.rats(raw, &format!("{place}.point"))?;
        if p.len() != action.chart().dim() {
            return Err(plain(
                format!("{place}.point"),
                format!("point needs {} coordinates", action.chart().dim()),
            ));
        }
        if !action.chart().contains_rat(&p) {
            return Err(plain(format!("{place}.point"), "point lies on an excluded locus"));
        }
        Ok(p)
    }

    fn fiber_point(
        &self,
        rc: &RawCheck,
        bundle: &LocalBundle,
        place: &str,
    ) -> Result<Vec<Rat>> {
        let raw = rc.start.as_ref().ok_or_else(|| plain(place, "missing start"))?;
        let p = self.rats(raw, &format!("{place}.start"))?;
        if p.len() != bundle.fiber_dim() {
            return Err(plain(
                format!("{place}.start"),
                format!("start needs {} fiber coordinates", bundle.fiber_dim()),
            ));
        }
        Ok(p)
    }

    fn expect_str(&self, rc: &RawCheck, place: &str) -> Result<Option<String>> {
        match &rc.expect {
            None => Ok(None),
            Some(v) => match v.get_ref().as_str() {
                Some(s) => Ok(Some(s.to_string())),
                None => Err(self.at(v.span(), place, "expect must be a string here")),
            },
        }
    }

    fn expect_bool(&self, rc: &RawCheck, place: &str) -> Result<Option<bool>> {
        match &rc.expect {
            None => Ok(None),
            Some(v) => match v.get_ref().as_bool() {
                Some(b) => Ok(Some(b)),
                None => Err(self.at(v.span(), place, "expect must be a boolean here")),
            },
        }
    }

    fn expect_f64s(&self, rc: &RawCheck, place: &str) -> Result<Option<Vec<f64>>> {
        match &rc.expect {
            None => Ok(None),
            Some(v) => {
                let arr = v.get_ref().as_array().ok_or_else(|| {
                    self.at(v.span(), place, "expect must be an array of numbers here")
                })?;
                let mut out = Vec::with_capacity(arr.len());
                for x in arr {
                    let f = match x {
                        toml::Value::Float(f) => *f,
                        toml::Value::Integer(n) => *n as f64,
                        _ => {
                            return Err(self.at(
                                v.span(),
                                place,
                                "expect must be an array of numbers here",
                            ))
                        }
                    };
                    out.push(f);
                }
                Ok(Some(out))
            }
        }
    }
}

fn req<'a, T>(opt: &'a Option<T>, what: &str, place: &str) -> Result<&'a T> {
    opt.as_ref().ok_or_else(|| plain(place, format!("missing {what}")))
}
