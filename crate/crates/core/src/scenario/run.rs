//! Check execution: blocked-dependency semantics, bounded concurrency,
//! deterministic report assembly.

use std::collections::BTreeMap;
use std::time::Instant;

use crate::cert::Certificate;
use crate::chernweil;
use crate::error::Result;
use crate::form::Form;
use crate::homogeneous;
use crate::lie;
use crate::poly::{rat_int, rat_to_f64};
use crate::sampler::Sampler;
use crate::scenario::report::{
    serialize_form, CheckReport, Report, ReportItem, SerializedForm, SettingsEcho, Status,
};
use crate::scenario::{Check, CheckKind, RepChoice, RunOverrides, Scenario, Settings, ZeroExpect};
use crate::transport;

pub(super) fn run(sc: &Scenario, overrides: &RunOverrides) -> Report {
    let mut settings = sc.settings.clone();
    if let Some(n) = overrides.ode_steps {
        settings.ode.steps_per_unit_time = n.max(1);
    }
    if let Some(t) = overrides.tol {
        settings.tol = t;
    }
    if let Some(seed) = overrides.seed {
        settings.seed = seed;
    }

    let groups = group_checks(sc);
    let jobs = overrides
        .jobs
        .unwrap_or_else(|| {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        })
        .max(1)
        .min(groups.len().max(1));

    let mut slots: Vec<Option<CheckReport>> = Vec::new();
    slots.resize_with(sc.checks.len(), || None);

    if jobs <= 1 {
        for group in &groups {
            for (ci, rep) in run_group(sc, &settings, group) {
                slots[ci] = Some(rep);
            }
        }
    } else {
        let mut buckets: Vec<Vec<&[usize]>> = vec![Vec::new(); jobs];
        for (gi, group) in groups.iter().enumerate() {
            buckets[gi % jobs].push(group);
        }
        let settings_ref = &settings;
        let results: Vec<Vec<(usize, CheckReport)>> = std::thread::scope(|scope| {
            let handles: Vec<_> = buckets
                .iter()
                .map(|bucket| {
                    scope.spawn(move || {
                        bucket
                            .iter()
                            .flat_map(|group| run_group(sc, settings_ref, group))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("check worker panicked")).collect()
        });
        for bucket in results {
            for (ci, rep) in bucket {
                slots[ci] = Some(rep);
            }
        }
    }

    let checks: Vec<CheckReport> =
        slots.into_iter().map(|s| s.expect("every check produced a report")).collect();
    let passed = checks.iter().all(|c| c.status == Status::Pass);
    Report { settings: SettingsEcho::of(&settings), checks, passed }
}

/// Partitions check indices into maximal groups with overlapping
/// declaration closures.  Checks in different groups share no
/// declarations, so they can run concurrently; dependency blocking only
/// ever acts within a group.
fn group_checks(sc: &Scenario) -> Vec<Vec<usize>> {
    let n = sc.checks.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let root = find(parent, parent[i]);
            parent[i] = root;
        }
        parent[i]
    }
    let mut owner: BTreeMap<&str, usize> = BTreeMap::new();
    for ci in 0..n {
        for id in &sc.checks[ci].inputs {
            match owner.get(id.as_str()) {
                Some(&prev) => {
                    let a = find(&mut parent, prev);
                    let b = find(&mut parent, ci);
                    parent[a.max(b)] = a.min(b);
                }
                None => {
                    owner.insert(id, ci);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for ci in 0..n {
        let root = find(&mut parent, ci);
        groups.entry(root).or_default().push(ci);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort_by_key(|g| g[0]);
    out
}

fn run_group(sc: &Scenario, settings: &Settings, group: &[usize]) -> Vec<(usize, CheckReport)> {
    let mut tainted: BTreeMap<&str, String> = BTreeMap::new();
    let mut out = Vec::with_capacity(group.len());
    for &ci in group {
        let check = &sc.checks[ci];
        let blocked = check
            .inputs
            .iter()
            .find_map(|id| tainted.get(id.as_str()).map(|by| (id.clone(), by.clone())));
        let rep = if let Some((id, by)) = blocked {
            CheckReport {
                name: check.label.clone(),
                kind: check.kind.name().into(),
                status: Status::Blocked,
                exact: check.exact,
                summary: format!("blocked: '{id}' did not pass '{by}'"),
                items: Vec::new(),
                forms: Vec::new(),
                wall_micros: 0,
            }
        } else {
            let start = Instant::now();
            let outcome = execute(sc, settings, check, ci as u64);
            let wall_micros = start.elapsed().as_micros();
            let (status, summary, items, forms) = match outcome {
                Ok(o) => (
                    if o.ok { Status::Pass } else { Status::Fail },
                    o.summary,
                    o.items,
                    o.forms,
                ),
                Err(e) => (Status::Error, e.to_string(), Vec::new(), Vec::new()),
            };
            CheckReport {
                name: check.label.clone(),
                kind: check.kind.name().into(),
                status,
                exact: check.exact,
                summary,
                items,
                forms,
                wall_micros,
            }
        };
        if rep.status != Status::Pass {
            if let Some(subject) = &check.subject {
                tainted.entry(subject.as_str()).or_insert_with(|| check.label.clone());
            }
        }
        out.push((ci, rep));
    }
    out
}

struct Outcome {
    ok: bool,
    summary: String,
    items: Vec<ReportItem>,
    forms: Vec<SerializedForm>,
}

impl Outcome {
    fn from_cert(cert: Certificate) -> Outcome {
        Outcome {
            ok: cert.passed(),
            summary: cert.summary(),
            items: cert
                .items
                .into_iter()
                .map(|i| ReportItem { name: i.name, ok: i.ok, detail: i.detail })
                .collect(),
            forms: Vec::new(),
        }
    }

    fn finish(mut self) -> Outcome {
        self.ok = self.items.iter().all(|i| i.ok);
        self.summary = match self.items.iter().find(|i| !i.ok) {
            None => format!("pass ({} checks)", self.items.len()),
            Some(bad) => format!("FAIL at {}: {}", bad.name, bad.detail),
        };
        self
    }
}

fn item(items: &mut Vec<ReportItem>, name: impl Into<String>, ok: bool, detail: String) {
    items.push(ReportItem { name: name.into(), ok, detail: if ok { String::new() } else { detail } });
}

fn note(items: &mut Vec<ReportItem>, name: impl Into<String>, detail: impl Into<String>) {
    items.push(ReportItem { name: name.into(), ok: true, detail: detail.into() });
}

fn fmt_vec(xs: &[f64]) -> String {
    let comps: Vec<String> = xs.iter().map(|x| format!("{x:.12e}")).collect();
    format!("[{}]", comps.join(", "))
}

fn compare_expected(
    items: &mut Vec<ReportItem>,
    got: &[f64],
    expect: &Option<Vec<f64>>,
    tol: f64,
) {
    if let Some(want) = expect {
        if want.len() != got.len() {
            item(
                items,
                "expected value arity",
                false,
                format!("expected {} components, computed {}", want.len(), got.len()),
            );
            return;
        }
        let dev = got
            .iter()
            .zip(want)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        item(
            items,
            format!("matches expectation within {tol:e}"),
            dev <= tol,
            format!("max deviation {dev:.3e} from {}", fmt_vec(want)),
        );
    }
}

fn execute(sc: &Scenario, settings: &Settings, check: &Check, index: u64) -> Result<Outcome> {
    let tol = check.tol.unwrap_or(settings.tol);
    match &check.kind {
        CheckKind::Homomorphism { action } => {
            Ok(Outcome::from_cert(sc.actions[action].check_homomorphism()?))
        }

        CheckKind::Classification { action, samples, expect_free, expect_transitive } => {
            let act = &sc.actions[action];
            let cls = act.classify(&act.chart().sample_points(*samples))?;
            let mut items = Vec::new();
            note(
                &mut items,
                "effectiveness",
                format!("kernel dimension {}", cls.kernel.dim()),
            );
            note(
                &mut items,
                "sample ranks",
                format!(
                    "generic rank {}, constant on sample: {}",
                    cls.generic_rank, cls.constant_rank_on_sample
                ),
            );
            if let Some(want) = expect_free {
                item(
                    &mut items,
                    format!("expected free = {want}"),
                    cls.free_on_sample == *want,
                    format!("free on sample: {}", cls.free_on_sample),
                );
            }
            if let Some(want) = expect_transitive {
                item(
                    &mut items,
                    format!("expected transitive = {want}"),
                    cls.transitive_on_sample == *want,
                    format!("transitive on sample: {}", cls.transitive_on_sample),
                );
            }
            let mut o = Outcome { ok: true, summary: String::new(), items, forms: Vec::new() }
                .finish();
            if o.ok {
                o.summary = format!(
                    "free={} transitive={} generic rank {}",
                    cls.free_on_sample, cls.transitive_on_sample, cls.generic_rank
                );
            }
            Ok(o)
        }

        CheckKind::Connection { connection } => {
            Ok(Outcome::from_cert(sc.connections[connection].verify()?))
        }

        CheckKind::Curvature { connection, expect } => {
            let omc = &sc.connections[connection];
            let curv = omc.curvature_form()?;
            let mut out = Outcome::from_cert(omc.bianchi()?);
            if let Some(e) = expect {
                let want_zero = *e == ZeroExpect::Zero;
                item(
                    &mut out.items,
                    format!("curvature expected {}", if want_zero { "zero" } else { "nonzero" }),
                    curv.is_zero() == want_zero,
                    format!("curvature is_zero = {}", curv.is_zero()),
                );
            }
            out.forms.push(serialize_form(sc, "curvature", &curv));
            Ok(out.finish())
        }

        CheckKind::MaurerCartan { action } => {
            let act = &sc.actions[action];
            let kappa = homogeneous::maurer_cartan_from_action(act)?;
            let residual = homogeneous::mc_residual(&kappa)?;
            let mut items = Vec::new();
            item(
                &mut items,
                "structure residual vanishes",
                residual.is_zero(),
                "d(coframe) + (1/2)[coframe, coframe] is nonzero".into(),
            );
            let mut forms = vec![serialize_form(sc, "coframe", &kappa)];
            if !residual.is_zero() {
                forms.push(serialize_form(sc, "structure residual", &residual));
            }
            Ok(Outcome { ok: true, summary: String::new(), items, forms }.finish())
        }

        CheckKind::Basic { action, form, rep } => {
            let act = &sc.actions[action];
            let f = &sc.forms[form];
            let rho = match rep {
                RepChoice::Trivial => act.trivial_rep(f.value_dim()),
                RepChoice::Adjoint => act.adjoint_rep(),
            };
            Ok(Outcome::from_cert(act.is_basic(f, &rho)?))
        }

        CheckKind::Invariance { polynomial, algebra } => Ok(Outcome::from_cert(
            lie::check_invariance(&sc.polynomials[polynomial], &sc.algebras[algebra])?,
        )),

        CheckKind::ChernWeil { polynomial, connection } => {
            let f = chernweil::chern_weil_form(
                &sc.polynomials[polynomial],
                &sc.connections[connection],
            )?;
            let mut items = Vec::new();
            note(
                &mut items,
                "characteristic form",
                "closedness, invariance, and horizontality certified exactly",
            );
            let forms = vec![serialize_form(sc, "characteristic form", &f)];
            Ok(Outcome { ok: true, summary: String::new(), items, forms }.finish())
        }

        CheckKind::Transgression { polynomial, from, to } => {
            let rep = chernweil::transgression(
                &sc.polynomials[polynomial],
                &sc.connections[from],
                &sc.connections[to],
            )?;
            let mut items = Vec::new();
            note(
                &mut items,
                "exact primitive",
                "difference of characteristic forms equals d(primitive) exactly",
            );
            let forms = vec![
                serialize_form(sc, "difference", &rep.difference),
                serialize_form(sc, "primitive", &rep.primitive),
            ];
            Ok(Outcome { ok: true, summary: String::new(), items, forms }.finish())
        }

        CheckKind::OperatorBattery { action, phi, psi, omega } => {
            let om = omega.as_ref().map(|n| &sc.forms[n]);
            Ok(Outcome::from_cert(sc.actions[action].check_prop_battery(
                &sc.forms[phi],
                &sc.forms[psi],
                om,
            )?))
        }

        CheckKind::CovDerivBattery { connection, psi, big_psi, rep } => {
            let omc = &sc.connections[connection];
            let conn = omc.connection()?;
            let big = &sc.forms[big_psi];
            let rho = match rep {
                RepChoice::Trivial => omc.action().trivial_rep(big.value_dim()),
                RepChoice::Adjoint => omc.action().adjoint_rep(),
            };
            Ok(Outcome::from_cert(crate::connection::check_cov_deriv_battery(
                &conn,
                omc.omega(),
                &sc.forms[psi],
                big,
                &rho,
            )?))
        }

        CheckKind::InsertionBattery { connection, forms } => {
            let psis: Vec<Form> = forms.iter().map(|n| sc.forms[n].clone()).collect();
            Ok(Outcome::from_cert(crate::connection::check_insertion_battery(
                &sc.connections[connection],
                &psis,
            )?))
        }

        CheckKind::DualAction { action, dual } => {
            Ok(Outcome::from_cert(sc.actions[action].verify_dual_action(&sc.actions[dual])?))
        }

        CheckKind::Reductive { action, point, expect_found } => {
            let act = &sc.actions[action];
            let data = act.analyze_point(point)?;
            let dec = homogeneous::find_reductive_complement(act.algebra(), &data.isotropy, point)?;
            let mut items = Vec::new();
            note(
                &mut items,
                "isotropy",
                format!("dimension {} at the base point", data.isotropy.dim()),
            );
            let found = dec.is_some();
            item(
                &mut items,
                format!("reductive complement expected {}", if *expect_found { "found" } else { "none" }),
                found == *expect_found,
                format!("search returned {}", if found { "a complement" } else { "none" }),
            );
            if let Some(d) = &dec {
                note(&mut items, "complement", format!("dimension {}", d.m().dim()));
            }
            Ok(Outcome { ok: true, summary: String::new(), items, forms: Vec::new() }.finish())
        }

        CheckKind::Asystatic { action, point, expect } => {
            let got = crate::connection::is_asystatic(&sc.actions[action], point)?;
            let mut items = Vec::new();
            item(
                &mut items,
                format!("expected asystatic = {expect}"),
                got == *expect,
                format!("normalizer comparison returned {got}"),
            );
            Ok(Outcome { ok: true, summary: String::new(), items, forms: Vec::new() }.finish())
        }

        CheckKind::BracketSuite { chart, samples, max_degree } => {
            bracket_suite(sc, settings, index, chart, *samples, *max_degree)
        }

        CheckKind::BundleCurvature { bundle } => {
            let b = &sc.bundles[bundle];
            let via_christoffel = b.curvature_via_christoffel()?;
            let via_projector = b.connection()?.curvature()?;
            let mut items = Vec::new();
            item(
                &mut items,
                "Christoffel route matches the projector route",
                via_christoffel == via_projector,
                "the two curvature computations disagree".into(),
            );
            let forms = vec![serialize_form(sc, "curvature", &via_christoffel)];
            Ok(Outcome { ok: true, summary: String::new(), items, forms }.finish())
        }

        CheckKind::Transport { bundle, curve, start, expect } => {
            let u0: Vec<f64> = start.iter().map(rat_to_f64).collect();
            let end = transport::parallel_transport(
                &sc.bundles[bundle],
                &sc.curves[curve],
                &u0,
                &settings.ode,
            )?;
            let mut items = Vec::new();
            note(&mut items, "endpoint", fmt_vec(&end));
            compare_expected(&mut items, &end, expect, tol);
            Ok(Outcome { ok: true, summary: String::new(), items, forms: Vec::new() }.finish())
        }

        CheckKind::Holonomy { bundle, curve, start, expect } => {
            let u0: Vec<f64> = start.iter().map(rat_to_f64).collect();
            let disp = transport::holonomy_loop(
                &sc.bundles[bundle],
                &sc.curves[curve],
                &u0,
                &settings.ode,
            )?;
            let mut items = Vec::new();
            note(&mut items, "fiber displacement", fmt_vec(&disp));
            compare_expected(&mut items, &disp, expect, tol);
            Ok(Outcome { ok: true, summary: String::new(), items, forms: Vec::new() }.finish())
        }

        CheckKind::Develop { action, group_chart, curve, expect } => {
            let end = transport::cartan_develop(
                &sc.actions[action],
                &sc.group_charts[group_chart],
                &sc.curves[curve],
                &settings.ode,
            )?;
            let mut items = Vec::new();
            note(&mut items, "group coordinates at the endpoint", fmt_vec(&end));
            compare_expected(&mut items, &end, expect, tol);
            Ok(Outcome { ok: true, summary: String::new(), items, forms: Vec::new() }.finish())
        }

        CheckKind::Lift { action, curve } => {
            let samples =
                transport::lift_curve(&sc.actions[action], &sc.curves[curve], tol, &settings.ode)?;
            let mut items = Vec::new();
            item(
                &mut items,
                "curve stays tangent to the orbit distribution",
                true,
                String::new(),
            );
            note(&mut items, "sampled lifts", format!("{} grid points", samples.len()));
            Ok(Outcome { ok: true, summary: String::new(), items, forms: Vec::new() }.finish())
        }
    }
}

/// Randomized exact suite for the bracket of tangent-valued forms: the
/// global formula against the decomposable one, graded antisymmetry,
/// centrality of the identity tensor, and the graded Jacobi identity.
fn bracket_suite(
    sc: &Scenario,
    settings: &Settings,
    index: u64,
    chart: &str,
    samples: usize,
    max_degree: usize,
) -> Result<Outcome> {
    let c = &sc.charts[chart];
    let mut s = Sampler::new(settings.seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let id = Form::identity_tangent(c.clone());

    let mut eq_fail = None;
    let mut anti_fail = None;
    let mut id_fail = None;
    for k in 0..samples {
        let dk = k % 3;
        let dl = (k / 3) % 3;
        let (phi, x, kf) = s.decomposable(c, dk, max_degree);
        let (psi, y, lf) = s.decomposable(c, dl, max_degree);
        let direct = crate::brackets::fn_bracket_decomposable(&phi, &x, &psi, &y)?;
        let global = crate::brackets::fn_bracket_global(&kf, &lf)?;
        if eq_fail.is_none() && !direct.sub(&global)?.is_zero() {
            eq_fail = Some(k);
        }
        let reversed = crate::brackets::fn_bracket_global(&lf, &kf)?;
        let sign = if (dk * dl) % 2 == 0 { 1 } else { -1 };
        if anti_fail.is_none()
            && !global.add(&reversed.scale_rat(&rat_int(sign)))?.is_zero()
        {
            anti_fail = Some(k);
        }
        if id_fail.is_none() && !crate::brackets::fn_bracket_global(&id, &kf)?.is_zero() {
            id_fail = Some(k);
        }
    }

    let jacobi_trials = samples.min(5);
    let mut jacobi_fail = None;
    for k in 0..jacobi_trials {
        let d1 = k % 2;
        let d2 = (k + 1) % 2;
        let d3 = 1;
        let (_, _, k1) = s.decomposable(c, d1, 1);
        let (_, _, k2) = s.decomposable(c, d2, 1);
        let (_, _, k3) = s.decomposable(c, d3, 1);
        let t1 = crate::brackets::fn_bracket_global(
            &crate::brackets::fn_bracket_global(&k1, &k2)?,
            &k3,
        )?
        .scale_rat(&rat_int(if (d1 * d3) % 2 == 0 { 1 } else { -1 }));
        let t2 = crate::brackets::fn_bracket_global(
            &crate::brackets::fn_bracket_global(&k2, &k3)?,
            &k1,
        )?
        .scale_rat(&rat_int(if (d2 * d1) % 2 == 0 { 1 } else { -1 }));
        let t3 = crate::brackets::fn_bracket_global(
            &crate::brackets::fn_bracket_global(&k3, &k1)?,
            &k2,
        )?
        .scale_rat(&rat_int(if (d3 * d2) % 2 == 0 { 1 } else { -1 }));
        if jacobi_fail.is_none() && !t1.add(&t2)?.add(&t3)?.is_zero() {
            jacobi_fail = Some(k);
        }
    }

    let mut items = Vec::new();
    let fail_text = |k: Option<usize>| match k {
        Some(i) => format!("first failure at sample {i}"),
        None => String::new(),
    };
    item(
        &mut items,
        format!("global formula matches the decomposable formula ({samples} samples)"),
        eq_fail.is_none(),
        fail_text(eq_fail),
    );
    item(
        &mut items,
        format!("graded antisymmetry ({samples} samples)"),
        anti_fail.is_none(),
        fail_text(anti_fail),
    );
    item(
        &mut items,
        format!("identity tensor is central ({samples} samples)"),
        id_fail.is_none(),
        fail_text(id_fail),
    );
    item(
        &mut items,
        format!("graded Jacobi identity ({jacobi_trials} triples)"),
        jacobi_fail.is_none(),
        fail_text(jacobi_fail),
    );
    Ok(Outcome { ok: true, summary: String::new(), items, forms: Vec::new() }.finish())
}
