//! Characteristic forms from invariant symmetric polynomials: contraction
//! against curvature, exact closedness and basicness, the basic-complex
//! stability of the exterior derivative, and the exact transgression
//! primitive connecting the characteristic forms of two connections.
//!
//! Everything here is exact rational arithmetic.  The curvature of the
//! interpolated connection family is a quadratic polynomial in the
//! interpolation parameter with form coefficients, so the homotopy
//! integral is a finite rational computation; the final
//! difference-minus-derivative residual is asserted to be the exact zero
//! form, which also pins the combinatorial constant in the primitive.

use itertools::Itertools;
use num::Zero;

use crate::action::GAction;
use crate::brackets::{alg_bracket, tensor_wedge};
use crate::cert::Certificate;
use crate::connection::ConnectionForm;
use crate::error::{Error, Result};
use crate::form::{Form, ValueKind};
use crate::lie::{check_invariance, InvariantPolynomial};
use crate::poly::rat;

/// Contraction of a symmetric k-linear form against k algebra-valued
/// forms: the scalar form `sum f(e_{i1},..,e_{ik}) psi_1^{i1} ^ .. ^
/// psi_k^{ik}`, built by contracting the iterated tensor wedge of the
/// slots against the coefficient tensor.
pub fn apply_invariant(f: &InvariantPolynomial, slots: &[&Form]) -> Result<Form> {
    let k = f.degree();
    if slots.len() != k {
        return Err(Error::DimensionMismatch(
            "one algebra-valued form per symmetric slot".into(),
        ));
    }
    let chart = slots[0].chart();
    let d = f.dim();
    for psi in slots {
        if psi.chart() != chart {
            return Err(Error::ChartMismatch {
                expected: chart.describe(),
                found: psi.chart().describe(),
            });
        }
        match psi.value_kind() {
            ValueKind::Vector { dim, .. } if *dim == d => {}
            _ => {
                return Err(Error::ValueMismatch(
                    "slot forms must take values in the symmetric form's algebra".into(),
                ))
            }
        }
    }
    let total_degree: usize = slots.iter().map(|p| p.degree()).sum();
    let mut out = Form::zero(chart.clone(), total_degree, ValueKind::Scalar);
    if f.coeffs().is_empty() {
        return Ok(out);
    }
    let mut tensor = slots[0].clone();
    for psi in &slots[1..] {
        tensor = tensor_wedge(&tensor, psi)?;
    }
    for tuple in (0..k).map(|_| 0..d).multi_cartesian_product() {
        let c = f.get(&tuple);
        if c.is_zero() {
            continue;
        }
        let flat = tuple.iter().fold(0usize, |acc, &i| acc * d + i);
        out = out.add(&tensor.component(flat).scale_rat(&c))?;
    }
    Ok(out)
}

/// The characteristic form of an invariant symmetric polynomial and a
/// connection: `f` contracted against k copies of the curvature.  The
/// result is exactly closed and g-invariant (both asserted), and exactly
/// horizontal whenever the action is generically free (asserted in that
/// case); non-invariant `f` is rejected with the offending residual.
pub fn chern_weil_form(f: &InvariantPolynomial, omc: &ConnectionForm) -> Result<Form> {
    let action = omc.action();
    let inv = check_invariance(f, action.algebra())?;
    if !inv.passed() {
        return Err(Error::Invalid(format!(
            "the symmetric form is not ad-invariant: {}",
            inv.summary()
        )));
    }
    let curv = omc.curvature_form()?;
    let slots: Vec<&Form> = std::iter::repeat_n(&curv, f.degree()).collect();
    let out = apply_invariant(f, &slots)?;
    if !out.exterior_derivative().is_zero() {
        return Err(Error::RouteDisagreement(
            "characteristic form fails to be closed".into(),
        ));
    }
    let invariance = action.is_equivariant(&out, &action.trivial_rep(1))?;
    if !invariance.passed() {
        return Err(Error::RouteDisagreement(format!(
            "characteristic form fails g-invariance: {}",
            invariance.summary()
        )));
    }
    let cls = action.classify(&action.chart().sample_points(3))?;
    if cls.generic_rank == action.algebra().dim() {
        let hor = action.is_horizontal(&out)?;
        if !hor.passed() {
            return Err(Error::RouteDisagreement(format!(
                "characteristic form of a generically free action fails horizontality: {}",
                hor.summary()
            )));
        }
    }
    Ok(out)
}

/// Exact homotopy data connecting the characteristic forms of two
/// connections on the same action.
#[derive(Clone, Debug)]
pub struct TransgressionReport {
    pub f: InvariantPolynomial,
    pub omega0: Form,
    pub omega1: Form,
    /// `f^{curv(omega1)} - f^{curv(omega0)}`.
    pub difference: Form,
    /// Exact interpolation integral; its exterior derivative equals the
    /// difference.
    pub primitive: Form,
    /// `difference - d(primitive)`; the exact zero form on valid inputs.
    pub residual: Form,
}

/// Integrates the interpolation family between two connection forms: with
/// `omega_t = omega0 + t (omega1 - omega0)`, the curvature is quadratic
/// in t, the slot-by-slot expansion of `k f(omega1 - omega0, curv_t, ..)`
/// integrates to a rational combination, and the resulting primitive's
/// exterior derivative must reproduce the difference of characteristic
/// forms exactly.
pub fn transgression(
    f: &InvariantPolynomial,
    w0: &ConnectionForm,
    w1: &ConnectionForm,
) -> Result<TransgressionReport> {
    if w0.action().chart() != w1.action().chart()
        || w0.action().fundamentals() != w1.action().fundamentals()
    {
        return Err(Error::Invalid(
            "the two connection forms must live on the same action".into(),
        ));
    }
    let action = w0.action();
    let inv = check_invariance(f, action.algebra())?;
    if !inv.passed() {
        return Err(Error::Invalid(format!(
            "the symmetric form is not ad-invariant: {}",
            inv.summary()
        )));
    }
    let diff = w1.omega().sub(w0.omega())?;
    let hor = action.is_horizontal(&diff)?;
    if !hor.passed() {
        return Err(Error::Invalid(
            "difference of connection forms must be horizontal".into(),
        ));
    }
    let k = f.degree();
    // curv_t = a0 + t a1 + t^2 a2.
    let a0 = w0.curvature_form()?;
    let symmetric_cross = alg_bracket(w0.omega(), &diff)?
        .add(&alg_bracket(&diff, w0.omega())?)?
        .scale_rat(&rat(1, 2));
    let a1 = diff.exterior_derivative().add(&symmetric_cross)?;
    let a2 = alg_bracket(&diff, &diff)?.scale_rat(&rat(1, 2));
    let powers = [a0, a1, a2];

    let chart = action.chart().clone();
    let mut primitive = Form::zero(chart, 2 * k - 1, ValueKind::Scalar);
    let assignments: Vec<Vec<usize>> = if k == 1 {
        vec![Vec::new()]
    } else {
        (0..k - 1).map(|_| 0..3usize).multi_cartesian_product().collect()
    };
    for assignment in assignments {
        let t_power: usize = assignment.iter().sum();
        let mut slots: Vec<&Form> = Vec::with_capacity(k);
        slots.push(&diff);
        for &m in &assignment {
            slots.push(&powers[m]);
        }
        let term = apply_invariant(f, &slots)?;
        // integral of k t^j dt over [0, 1] = k / (j + 1).
        primitive = primitive.add(&term.scale_rat(&rat(k as i64, t_power as i64 + 1)))?;
    }

    let f0 = chern_weil_form(f, w0)?;
    let f1 = chern_weil_form(f, w1)?;
    let difference = f1.sub(&f0)?;
    let residual = difference.sub(&primitive.exterior_derivative())?;
    if !residual.is_zero() {
        return Err(Error::RouteDisagreement(
            "transgression residual is nonzero: the primitive fails to reproduce the difference"
                .into(),
        ));
    }
    Ok(TransgressionReport {
        f: f.clone(),
        omega0: w0.omega().clone(),
        omega1: w1.omega().clone(),
        difference,
        primitive,
        residual,
    })
}

/// Checks that the exterior derivative maps basic scalar forms to basic
/// scalar forms.  A non-basic input is reported as a failed precondition
/// item, not an error.
pub fn basic_complex_check(action: &GAction, psi: &Form) -> Result<Certificate> {
    if psi.chart() != action.chart() {
        return Err(Error::ChartMismatch {
            expected: action.chart().describe(),
            found: psi.chart().describe(),
        });
    }
    if !matches!(psi.value_kind(), ValueKind::Scalar) {
        return Err(Error::ValueMismatch("the basic complex holds scalar forms".into()));
    }
    let rho = action.trivial_rep(1);
    let mut cert = Certificate::new("basic complex stability");
    let pre = action.is_basic(psi, &rho)?;
    cert.push("precondition: the form is basic", pre.passed(), pre.summary());
    if !pre.passed() {
        return Ok(cert);
    }
    let dpsi = psi.exterior_derivative();
    let post = action.is_basic(&dpsi, &rho)?;
    cert.push("the derivative is basic", post.passed(), post.summary());
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::Chart;
    use crate::form::VectorField;
    use crate::lie::LieAlgebra;
    use crate::poly::{rat_int, Rat};
    use crate::ratfunc::RF;
    use num::{One, Zero};
    use std::sync::Arc;

    fn rf(c: &Chart, src: &str) -> RF {
        c.expr(src).unwrap()
    }

    fn vf(c: &Chart, comps: &[&str]) -> VectorField {
        VectorField::new(c.clone(), comps.iter().map(|s| rf(c, s)).collect()).unwrap()
    }

    fn transz_action() -> GAction {
        let alg = Arc::new(LieAlgebra::from_sparse(vec!["e1".into()], &[]).unwrap());
        let c = Chart::of(&["x", "y", "z"]);
        GAction::new(alg, c.clone(), vec![vf(&c, &["0", "0", "1"])]).unwrap()
    }

    fn heis3_action() -> GAction {
        let e3 = vec![Rat::zero(), Rat::zero(), Rat::one()];
        let alg = Arc::new(
            LieAlgebra::from_sparse(
                vec!["e1".into(), "e2".into(), "e3".into()],
                &[(0, 1, e3)],
            )
            .unwrap(),
        );
        let c = Chart::of(&["x", "y", "z"]);
        GAction::new(
            alg,
            c.clone(),
            vec![vf(&c, &["1", "0", "0"]), vf(&c, &["0", "1", "x"]), vf(&c, &["0", "0", "1"])],
        )
        .unwrap()
    }

    /// Canonical coframe of the three-dimensional nilpotent action:
    /// e1 (x) dx + e2 (x) dy + e3 (x) (dz - x dy).
    fn heis3_kappa(c: &Chart) -> Form {
        let mut k = Form::zero(c.clone(), 1, ValueKind::vector(3));
        k.set_term(&[0], vec![rf(c, "1"), rf(c, "0"), rf(c, "0")]).unwrap();
        k.set_term(&[1], vec![rf(c, "0"), rf(c, "1"), rf(c, "-x")]).unwrap();
        k.set_term(&[2], vec![rf(c, "0"), rf(c, "0"), rf(c, "1")]).unwrap();
        k
    }

    fn scalar_form(c: &Chart, degree: usize, entries: &[(&[usize], &str)]) -> Form {
        let mut f = Form::zero(c.clone(), degree, ValueKind::Scalar);
        for (idx, src) in entries {
            f.set_term(idx, vec![rf(c, src)]).unwrap();
        }
        f
    }

    fn transz_connection(a: &GAction, dz_extra: &[(&[usize], &str)]) -> ConnectionForm {
        let c = a.chart().clone();
        let mut omega = Form::zero(c.clone(), 1, ValueKind::vector(1));
        omega.set_term(&[2], vec![rf(&c, "1")]).unwrap();
        for (idx, src) in dz_extra {
            omega.set_term(idx, vec![rf(&c, src)]).unwrap();
        }
        ConnectionForm::new(a.clone(), omega).unwrap()
    }

    fn line_f() -> InvariantPolynomial {
        InvariantPolynomial::new(1, 1, &[(vec![0], Rat::one())]).unwrap()
    }

    #[test]
    fn invariant_contraction_matches_hand_values() {
        let a = transz_action();
        let c = a.chart().clone();
        let f = line_f();
        let mut omega_big = Form::zero(c.clone(), 2, ValueKind::vector(1));
        omega_big.set_term(&[0, 1], vec![rf(&c, "1")]).unwrap();
        let out = apply_invariant(&f, &[&omega_big]).unwrap();
        assert_eq!(out, scalar_form(&c, 2, &[(&[0, 1], "1")]));

        let zero_f = InvariantPolynomial::new(1, 2, &[]).unwrap();
        let out = apply_invariant(&zero_f, &[&omega_big, &omega_big]).unwrap();
        assert!(out.is_zero());

        // Two-slot contraction on the nilpotent algebra: only the single
        // populated shuffle term survives.
        let h = heis3_action();
        let ch = h.chart().clone();
        let f2 = InvariantPolynomial::new(3, 2, &[(vec![0, 1], rat(5, 1))]).unwrap();
        let mut psi1 = Form::zero(ch.clone(), 1, ValueKind::vector(3));
        psi1.set_term(&[0], vec![rf(&ch, "1"), rf(&ch, "0"), rf(&ch, "0")]).unwrap();
        let mut psi2 = Form::zero(ch.clone(), 1, ValueKind::vector(3));
        psi2.set_term(&[1], vec![rf(&ch, "0"), rf(&ch, "1"), rf(&ch, "0")]).unwrap();
        let out = apply_invariant(&f2, &[&psi1, &psi2]).unwrap();
        assert_eq!(out, scalar_form(&ch, 2, &[(&[0, 1], "5")]));
    }

    #[test]
    fn characteristic_form_of_the_curved_connection() {
        let a = transz_action();
        let c = a.chart().clone();
        let omc = transz_connection(&a, &[(&[0], "-y")]);
        let f = line_f();
        let cw = chern_weil_form(&f, &omc).unwrap();
        assert_eq!(cw, scalar_form(&c, 2, &[(&[0, 1], "1")]));
        // Closed, horizontal, invariant: basic.
        assert!(a.is_basic(&cw, &a.trivial_rep(1)).unwrap().passed());

        // Flat connection: zero characteristic form.
        let flat = transz_connection(&a, &[]);
        assert!(chern_weil_form(&f, &flat).unwrap().is_zero());

        // The canonical coframe of a free transitive action is flat in
        // this sense: its curvature vanishes identically.
        let h = heis3_action();
        let kappa = ConnectionForm::new(h.clone(), heis3_kappa(h.chart())).unwrap();
        let f_inv = InvariantPolynomial::new(3, 1, &[(vec![0], Rat::one())]).unwrap();
        assert!(chern_weil_form(&f_inv, &kappa).unwrap().is_zero());
    }

    #[test]
    fn non_invariant_polynomials_are_rejected() {
        let h = heis3_action();
        let kappa = ConnectionForm::new(h.clone(), heis3_kappa(h.chart())).unwrap();
        // The dual of the center fails invariance: the bracket of the two
        // generators hits it.
        let bad = InvariantPolynomial::new(3, 1, &[(vec![2], Rat::one())]).unwrap();
        let err = chern_weil_form(&bad, &kappa);
        assert!(matches!(err, Err(Error::Invalid(ref m)) if m.contains("ad-invariant")));
    }

    #[test]
    fn transgression_reproduces_the_hand_primitive() {
        let a = transz_action();
        let c = a.chart().clone();
        let w0 = transz_connection(&a, &[]);
        let w1 = transz_connection(&a, &[(&[0], "-y")]);
        let f = line_f();
        let report = transgression(&f, &w0, &w1).unwrap();
        assert_eq!(report.difference, scalar_form(&c, 2, &[(&[0, 1], "1")]));
        assert_eq!(report.primitive, scalar_form(&c, 1, &[(&[0], "-y")]));
        assert!(report.residual.is_zero());

        // Equal endpoints: everything collapses.
        let report = transgression(&f, &w0, &w0).unwrap();
        assert!(report.difference.is_zero());
        assert!(report.primitive.is_zero());

        // Degree-two symmetric form: the characteristic forms live in
        // degree four on a three-variable chart, so difference and
        // primitive collapse to zero while the machinery still balances.
        let f2 = InvariantPolynomial::new(1, 2, &[(vec![0, 0], Rat::one())]).unwrap();
        let report = transgression(&f2, &w0, &w1).unwrap();
        assert!(report.difference.is_zero());
        assert!(report.primitive.is_zero());
        assert!(report.residual.is_zero());
    }

    #[test]
    fn transgression_balances_on_polynomial_perturbations() {
        let a = transz_action();
        let w0 = transz_connection(&a, &[]);
        let f = line_f();
        let perturbations: [&[(&[usize], &str)]; 3] = [
            &[(&[0], "x^2"), (&[1], "y")],
            &[(&[0], "x*y"), (&[1], "-x")],
            &[(&[0], "y^2-x"), (&[1], "x*y^2")],
        ];
        for extra in perturbations {
            let w1 = transz_connection(&a, extra);
            let report = transgression(&f, &w0, &w1).unwrap();
            assert!(report.residual.is_zero());
            assert_eq!(
                report.difference,
                report.primitive.exterior_derivative(),
                "primitive must integrate the difference exactly"
            );
        }
    }

    #[test]
    fn transgression_rejects_vertical_differences() {
        let a = transz_action();
        let w0 = transz_connection(&a, &[]);
        let c = a.chart().clone();
        // Scaling the dz component changes the value on the generator:
        // the difference is vertical, not horizontal.
        let mut omega = Form::zero(c.clone(), 1, ValueKind::vector(1));
        omega.set_term(&[2], vec![rf(&c, "2")]).unwrap();
        let w_bad = ConnectionForm::new(a.clone(), omega).unwrap();
        let err = transgression(&line_f(), &w0, &w_bad);
        assert!(matches!(err, Err(Error::Invalid(_))));
    }

    #[test]
    fn derivative_preserves_basic_forms() {
        let a = transz_action();
        let c = a.chart().clone();
        let basic = scalar_form(&c, 1, &[(&[1], "x")]);
        let cert = basic_complex_check(&a, &basic).unwrap();
        assert!(cert.passed(), "{}", cert.summary());

        let constant = scalar_form(&c, 0, &[(&[], "1")]);
        let cert = basic_complex_check(&a, &constant).unwrap();
        assert!(cert.passed(), "{}", cert.summary());

        // z dx is not even invariant: the precondition item fails and the
        // check reports rather than errors.
        let not_basic = scalar_form(&c, 1, &[(&[0], "z")]);
        let cert = basic_complex_check(&a, &not_basic).unwrap();
        assert!(!cert.passed());
        assert!(cert.items[0].name.contains("precondition"));
    }

    #[test]
    fn contraction_is_natural_under_pullback() {
        use crate::form::RationalMap;
        let a = transz_action();
        let c = a.chart().clone();
        let omc = transz_connection(&a, &[(&[0], "-y")]);
        let f = line_f();
        let curv = omc.curvature_form().unwrap();
        let cw = chern_weil_form(&f, &omc).unwrap();

        let source = Chart::of(&["u", "v", "w"]);
        let p = RationalMap::new(
            source.clone(),
            c,
            vec![rf(&source, "u+v"), rf(&source, "u*v"), rf(&source, "w")],
        )
        .unwrap();
        let pulled_then_applied = apply_invariant(&f, &[&p.pullback(&curv).unwrap()]).unwrap();
        let applied_then_pulled = p.pullback(&cw).unwrap();
        assert_eq!(pulled_then_applied, applied_then_pulled);

        // Two-slot naturality on the nilpotent algebra.
        let h = heis3_action();
        let ch = h.chart().clone();
        let f2 = InvariantPolynomial::new(3, 2, &[(vec![0, 1], rat_int(1))]).unwrap();
        let mut psi1 = Form::zero(ch.clone(), 1, ValueKind::vector(3));
        psi1.set_term(&[0], vec![rf(&ch, "y"), rf(&ch, "0"), rf(&ch, "0")]).unwrap();
        let mut psi2 = Form::zero(ch.clone(), 1, ValueKind::vector(3));
        psi2.set_term(&[1], vec![rf(&ch, "0"), rf(&ch, "x"), rf(&ch, "0")]).unwrap();
        let q = RationalMap::new(
            source.clone(),
            ch,
            vec![rf(&source, "u^2"), rf(&source, "v-w"), rf(&source, "w")],
        )
        .unwrap();
        let lhs = apply_invariant(
            &f2,
            &[&q.pullback(&psi1).unwrap(), &q.pullback(&psi2).unwrap()],
        )
        .unwrap();
        let rhs = q.pullback(&apply_invariant(&f2, &[&psi1, &psi2]).unwrap()).unwrap();
        assert_eq!(lhs, rhs);
    }
}
