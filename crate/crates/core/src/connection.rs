//! Principal connections in two equivalent guises: tangent-valued
//! projection forms and algebra-valued connection forms.
//!
//! Curvature is always computed along two independent routes (half the
//! graded bracket of the projection with itself, and the projected bracket
//! of horizontal parts) and the routes must agree exactly; a disagreement
//! is surfaced as an error, never reconciled silently.  The sign
//! orientation between the two guises is pinned by the exact assertion
//! `R = -zeta(Omega)` inside `curvature_form`, and every downstream sign
//! (transgression, holonomy) inherits it.

use std::collections::BTreeMap;

use num::Zero;

use crate::action::GAction;
use crate::brackets::{alg_bracket, fn_bracket, rho_wedge};
use crate::cert::Certificate;
use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::form::{insert_tangent, Form, ValueKind, VectorField};
use crate::lie::normalizer;
use crate::linalg::{f_mat_mul, f_mat_vec, row_space_basis, FMat, QMat};
use crate::poly::{rat, Rat};
use crate::ratfunc::RF;

fn transpose(m: &QMat) -> QMat {
    if m.is_empty() {
        return Vec::new();
    }
    (0..m[0].len()).map(|j| m.iter().map(|row| row[j].clone()).collect()).collect()
}

fn eval_fmat(m: &FMat, x: &[Rat]) -> Result<QMat> {
    m.iter().map(|row| row.iter().map(|f| f.eval_rat(x)).collect()).collect()
}

/// Field of projections of tangent spaces onto the orbit distribution,
/// stored as a tangent-valued 1-form over the acted-on chart.
#[derive(Clone, Debug)]
pub struct Connection {
    action: GAction,
    phi: Form,
}

impl Connection {
    pub fn new(action: GAction, phi: Form) -> Result<Self> {
        if phi.chart() != action.chart() {
            return Err(Error::ChartMismatch {
                expected: action.chart().describe(),
                found: phi.chart().describe(),
            });
        }
        if phi.degree() != 1 || !matches!(phi.value_kind(), ValueKind::Tangent) {
            return Err(Error::Invalid(
                "a connection is a tangent-valued 1-form".into(),
            ));
        }
        Ok(Connection { action, phi })
    }

    pub fn action(&self) -> &GAction {
        &self.action
    }

    pub fn phi(&self) -> &Form {
        &self.phi
    }

    /// Coefficient matrix P with P[m][j] = component m of the value on d/dx_j.
    pub fn phi_matrix(&self) -> FMat {
        let n = self.action.chart().dim();
        let cols: Vec<Vec<RF>> = (0..n).map(|j| self.phi.value_on(&[j as u8])).collect();
        (0..n).map(|m| (0..n).map(|j| cols[j][m].clone()).collect()).collect()
    }

    /// Horizontal projection matrix I - P.
    pub fn chi_matrix(&self) -> FMat {
        let n = self.action.chart().dim();
        let p = self.phi_matrix();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let neg = p[i][j].neg();
                        if i == j {
                            neg.add(&RF::one(n))
                        } else {
                            neg
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Vertical part of a vector field.
    pub fn vertical(&self, xi: &VectorField) -> Result<VectorField> {
        self.project(xi, &self.phi_matrix())
    }

    /// Horizontal part of a vector field.
    pub fn horizontal(&self, xi: &VectorField) -> Result<VectorField> {
        self.project(xi, &self.chi_matrix())
    }

    fn project(&self, xi: &VectorField, m: &FMat) -> Result<VectorField> {
        if xi.chart() != self.action.chart() {
            return Err(Error::ChartMismatch {
                expected: self.action.chart().describe(),
                found: xi.chart().describe(),
            });
        }
        VectorField::new(self.action.chart().clone(), f_mat_vec(m, xi.components()))
    }

    /// Itemized certificate: idempotence as a matrix of rational functions,
    /// image equal to the orbit span at sampled points, and exact
    /// equivariance against every fundamental field.
    pub fn verify(&self) -> Result<Certificate> {
        let mut cert = Certificate::new("connection");
        let p = self.phi_matrix();
        cert.exact(
            "projection idempotent",
            f_mat_mul(&p, &p) == p,
            "composing the projection with itself changes it".to_string(),
        );
        let samples = self.action.chart().sample_points(4);
        if samples.is_empty() {
            cert.push("sample points", false, "no rational sample point found in the chart");
        }
        for (k, x) in samples.iter().enumerate() {
            let pm = eval_fmat(&p, x)?;
            let zm = self.action.zeta_matrix_at(x)?;
            let image = row_space_basis(&transpose(&pm));
            let orbit = row_space_basis(&transpose(&zm));
            cert.exact(
                format!("image equals orbit span at sample {k}"),
                image == orbit,
                "projection image differs from the span of the fundamental fields".to_string(),
            );
        }
        for (i, name) in self.action.algebra().names().iter().enumerate() {
            let br = fn_bracket(&self.action.fundamental(i).to_form(), &self.phi)?;
            cert.exact(
                format!("equivariance against zeta({name})"),
                br.is_zero(),
                "the projection moves under the flow of a fundamental field".to_string(),
            );
        }
        Ok(cert)
    }

    /// Curvature by both routes: half the graded self-bracket of the
    /// projection, and the projected bracket of horizontal coordinate
    /// fields.  Errors if the routes disagree.
    pub fn curvature(&self) -> Result<Form> {
        let chart = self.action.chart();
        let n = chart.dim();
        let via_bracket =
            fn_bracket(&self.phi, &self.phi)?.scale_rat(&rat(1, 2));
        let p = self.phi_matrix();
        let chi = self.chi_matrix();
        let column = |m: &FMat, j: usize| -> Vec<RF> { m.iter().map(|row| row[j].clone()).collect() };
        let mut via_projection = Form::zero(chart.clone(), 2, ValueKind::Tangent);
        for i in 0..n {
            for j in (i + 1)..n {
                let hi = VectorField::new(chart.clone(), column(&chi, i))?;
                let hj = VectorField::new(chart.clone(), column(&chi, j))?;
                let w = hi.bracket(&hj)?;
                let v = f_mat_vec(&p, w.components());
                if v.iter().any(|c| !c.is_zero()) {
                    via_projection.set_term(&[i, j], v)?;
                }
            }
        }
        if via_bracket != via_projection {
            return Err(Error::RouteDisagreement(
                "curvature: graded self-bracket differs from the projected horizontal bracket"
                    .into(),
            ));
        }
        Ok(via_bracket)
    }

    /// Covariant exterior derivative: exterior derivative followed by
    /// precomposition of every argument with the horizontal projection.
    pub fn cov_deriv(&self, psi: &Form) -> Result<Form> {
        if matches!(psi.value_kind(), ValueKind::Tangent) {
            return Err(Error::Invalid(
                "the covariant exterior derivative acts on scalar or vector values; \
                 tangent-valued forms use the graded bracket"
                    .into(),
            ));
        }
        psi.exterior_derivative().precompose(&self.chi_matrix())
    }

    /// The graded bracket of the projection with its own curvature is zero.
    pub fn bianchi(&self) -> Result<Certificate> {
        let r = self.curvature()?;
        let mut cert = Certificate::new("differential identity of the curvature");
        let br = fn_bracket(&self.phi, &r)?;
        cert.exact(
            "[Phi, R] = 0",
            br.is_zero(),
            "the projection does not annihilate its curvature".to_string(),
        );
        Ok(cert)
    }
}

/// Algebra-valued 1-form reproducing the generator of every fundamental
/// field; the dual description of a `Connection`.
#[derive(Clone, Debug)]
pub struct ConnectionForm {
    action: GAction,
    omega: Form,
}

impl ConnectionForm {
    /// Accepts algebra-dimension vector values; an absent algebra tag is
    /// filled in from the action so that value brackets are available.
    pub fn new(action: GAction, omega: Form) -> Result<Self> {
        if omega.chart() != action.chart() {
            return Err(Error::ChartMismatch {
                expected: action.chart().describe(),
                found: omega.chart().describe(),
            });
        }
        if omega.degree() != 1 {
            return Err(Error::Invalid(
                "a connection form is an algebra-valued 1-form".into(),
            ));
        }
        let omega = match omega.value_kind() {
            ValueKind::Vector { dim, algebra } if *dim == action.algebra().dim() => {
                match algebra {
                    Some(a) if a.as_ref() != action.algebra().as_ref() => {
                        return Err(Error::ValueMismatch(
                            "algebra tag differs from the action".into(),
                        ));
                    }
                    Some(_) => omega,
                    None => {
                        let kind = ValueKind::algebra_valued(action.algebra().clone());
                        let mut tagged = Form::zero(omega.chart().clone(), 1, kind);
                        for (k, v) in omega.terms() {
                            let idx: Vec<usize> = k.iter().map(|&i| i as usize).collect();
                            tagged.set_term(&idx, v.clone())?;
                        }
                        tagged
                    }
                }
            }
            _ => {
                return Err(Error::Invalid(
                    "a connection form is an algebra-valued 1-form".into(),
                ))
            }
        };
        Ok(ConnectionForm { action, omega })
    }

    pub fn action(&self) -> &GAction {
        &self.action
    }

    pub fn omega(&self) -> &Form {
        &self.omega
    }

    /// Itemized certificate for the two defining conditions: equivariance
    /// for the adjoint values and the reproduction identity
    /// zeta . omega . zeta = zeta as a matrix of rational functions.
    pub fn verify(&self) -> Result<Certificate> {
        let mut cert = Certificate::new("connection form");
        let eq = self.action.is_equivariant(&self.omega, &self.action.adjoint_rep())?;
        cert.push(
            "(1) adjoint equivariance",
            eq.passed(),
            if eq.passed() { String::new() } else { eq.summary() },
        );
        let n = self.action.chart().dim();
        let d = self.action.algebra().dim();
        let zmat: FMat = (0..n)
            .map(|i| (0..d).map(|j| self.action.fundamental(j).components()[i].clone()).collect())
            .collect();
        let ocols: Vec<Vec<RF>> = (0..n).map(|i| self.omega.value_on(&[i as u8])).collect();
        let omat: FMat = (0..d).map(|a| (0..n).map(|i| ocols[i][a].clone()).collect()).collect();
        let reproduced = f_mat_mul(&zmat, &f_mat_mul(&omat, &zmat));
        cert.exact(
            "(2) zeta.omega.zeta = zeta",
            reproduced == zmat,
            "the form fails to reproduce the fundamental fields".to_string(),
        );
        Ok(cert)
    }

    /// The induced projection: generators of the form's values fed back
    /// through the action.
    pub fn connection(&self) -> Result<Connection> {
        Connection::new(self.action.clone(), self.action.zeta_of_form(&self.omega)?)
    }

    /// Curvature form d(omega) + (1/2)[omega, omega]; asserts exactly that
    /// the induced projection's curvature equals minus its generator field.
    pub fn curvature_form(&self) -> Result<Form> {
        let half_sq = alg_bracket(&self.omega, &self.omega)?.scale_rat(&rat(1, 2));
        let big = self.omega.exterior_derivative().add(&half_sq)?;
        let r = self.connection()?.curvature()?;
        if r != self.action.zeta_of_form(&big)?.neg() {
            return Err(Error::RouteDisagreement(
                "curvature orientation: projection curvature differs from -zeta(Omega)".into(),
            ));
        }
        Ok(big)
    }

    /// Twisted exterior derivative d(psi) + rho^wedge(omega) psi for a
    /// representation rho of the acting algebra on the value space.
    pub fn cov_deriv(&self, psi: &Form, rho: &[QMat]) -> Result<Form> {
        psi.exterior_derivative().add(&rho_wedge(&self.omega, rho, psi)?)
    }

    /// The curvature form is closed for the twisted derivative.
    pub fn bianchi(&self) -> Result<Certificate> {
        let big = self.curvature_form()?;
        let mut cert = Certificate::new("differential identity of the curvature form");
        let residual = big.exterior_derivative().add(&alg_bracket(&self.omega, &big)?)?;
        cert.exact(
            "d Omega + [omega, Omega] = 0",
            residual.is_zero(),
            "the twisted derivative of the curvature form is nonzero".to_string(),
        );
        Ok(cert)
    }
}

fn sampled_free(action: &GAction) -> Result<bool> {
    let samples = action.chart().sample_points(4);
    if samples.is_empty() {
        return Ok(false);
    }
    Ok(action.classify(&samples)?.free_on_sample)
}

/// Function-coefficient matrix of rho(omega(zeta_i) - e_i).
fn representation_gap(
    action: &GAction,
    omega: &Form,
    i: usize,
    rho: &[QMat],
) -> Result<FMat> {
    let nvars = action.chart().dim();
    let w = omega.value_on_fields(&[action.fundamental(i)])?;
    let m = rho[0].len();
    let mut out = vec![vec![RF::zero(nvars); m]; m];
    for (a, coeff) in w.iter().enumerate() {
        let coeff = if a == i { coeff.sub(&RF::one(nvars)) } else { coeff.clone() };
        if coeff.is_zero() {
            continue;
        }
        for r in 0..m {
            for c in 0..m {
                if !rho[a][r][c].is_zero() {
                    out[r][c] = out[r][c].add(&coeff.scale(&rho[a][r][c]));
                }
            }
        }
    }
    Ok(out)
}

/// Battery for the covariant exterior derivative on basic forms:
/// (1) bracketing the projection with a vertical-valued basic form stays
///     horizontal, invariant, and vertical-valued;
/// (2) the covariant derivative preserves basic forms;
/// (3) the tangent and algebra pictures agree up to sign,
///     zeta(cov_deriv(psi)) = -[Phi, zeta_psi];
/// (4) inserting a fundamental field into the twisted derivative reduces
///     to the representation gap, and for free actions the projected and
///     twisted derivatives agree on basic forms.
///
/// `psi` carries algebra values (adjoint representation); `big_psi`
/// carries values in the representation `rho`.
pub fn check_cov_deriv_battery(
    conn: &Connection,
    omega: &Form,
    psi: &Form,
    big_psi: &Form,
    rho: &[QMat],
) -> Result<Certificate> {
    let action = conn.action();
    let ad = action.adjoint_rep();
    let mut cert = Certificate::new("covariant derivative battery");
    for (tag, f, rep) in [("psi", psi, ad.as_slice()), ("Psi", big_psi, rho)] {
        let pre = action.is_basic(f, rep)?;
        cert.push(
            format!("precondition: {tag} basic"),
            pre.passed(),
            if pre.passed() { String::new() } else { pre.summary() },
        );
    }
    let zpsi = action.zeta_of_form(psi)?;
    let bracket = fn_bracket(conn.phi(), &zpsi)?;
    let hor = action.is_horizontal(&bracket)?;
    cert.push(
        "(1) [Phi, zeta_psi] horizontal",
        hor.passed(),
        if hor.passed() { String::new() } else { hor.summary() },
    );
    let invariant = {
        let mut ok = true;
        for i in 0..action.algebra().dim() {
            if !fn_bracket(&action.fundamental(i).to_form(), &bracket)?.is_zero() {
                ok = false;
                break;
            }
        }
        ok
    };
    cert.exact(
        "(1) [Phi, zeta_psi] invariant",
        invariant,
        "the bracket moves under a fundamental field".to_string(),
    );
    let refixed = bracket.apply_fn_matrix(&conn.phi_matrix(), ValueKind::Tangent)?;
    cert.exact(
        "(1) [Phi, zeta_psi] vertical-valued",
        refixed == bracket,
        "values leave the orbit distribution".to_string(),
    );
    let dpsi = conn.cov_deriv(psi)?;
    let basic1 = action.is_basic(&dpsi, &ad)?;
    cert.push(
        "(2) cov_deriv(psi) basic",
        basic1.passed(),
        if basic1.passed() { String::new() } else { basic1.summary() },
    );
    let dbig = conn.cov_deriv(big_psi)?;
    let basic2 = action.is_basic(&dbig, rho)?;
    cert.push(
        "(2) cov_deriv(Psi) basic",
        basic2.passed(),
        if basic2.passed() { String::new() } else { basic2.summary() },
    );
    cert.exact(
        "(3) zeta(cov_deriv(psi)) = -[Phi, zeta_psi]",
        action.zeta_of_form(&dpsi)? == bracket.neg(),
        "tangent and algebra pictures disagree".to_string(),
    );
    let dom = big_psi.exterior_derivative().add(&rho_wedge(omega, rho, big_psi)?)?;
    for (i, name) in action.algebra().names().iter().enumerate() {
        let lhs = dom.interior_product(action.fundamental(i))?;
        let gap = representation_gap(action, omega, i, rho)?;
        let rhs = big_psi.apply_fn_matrix(&gap, big_psi.value_kind().clone())?;
        cert.exact(
            format!("(4) vertical insertion of zeta({name})"),
            lhs == rhs,
            "insertion differs from the representation gap".to_string(),
        );
    }
    let form_ok = action.connection_form_conditions(omega)?.passed()
        && action.zeta_of_form(omega)? == *conn.phi();
    if sampled_free(action)? && form_ok {
        cert.exact(
            "(4) free case: cov_deriv(Psi) by projection = by twist",
            conn.cov_deriv(big_psi)? == dom,
            "projected and twisted derivatives differ on a basic form".to_string(),
        );
    }
    Ok(cert)
}

/// Battery for the insertion identities tying the covariant derivative to
/// the curvature:
/// (1) cov_deriv after horizontal pullback minus cov_deriv equals the
///     horizontal pullback of curvature insertion;
/// (2) the square of cov_deriv equals horizontal pullback of curvature
///     insertion after d;
/// (3) inserting a fundamental field into the curvature form equals the
///     bracket against the value gap minus the derivative of the value;
/// for free actions additionally the curvature form is horizontal and
/// equals both covariant derivatives of the connection form.
pub fn check_insertion_battery(omc: &ConnectionForm, psis: &[Form]) -> Result<Certificate> {
    let conn = omc.connection()?;
    let action = conn.action();
    let chart = action.chart();
    let nvars = chart.dim();
    let mut cert = Certificate::new("insertion identity battery");
    let r = conn.curvature()?;
    let chi = conn.chi_matrix();
    for (k, psi) in psis.iter().enumerate() {
        let lhs1 = conn.cov_deriv(&psi.precompose(&chi)?)?.sub(&conn.cov_deriv(psi)?)?;
        let rhs1 = insert_tangent(&r, psi)?.precompose(&chi)?;
        cert.exact(
            format!("(1) pullback commutator on sample form {k}"),
            lhs1.sub(&rhs1)?.is_zero(),
            "horizontal pullback commutator differs from curvature insertion".to_string(),
        );
        let lhs2 = conn.cov_deriv(&conn.cov_deriv(psi)?)?;
        let rhs2 = insert_tangent(&r, &psi.exterior_derivative())?.precompose(&chi)?;
        cert.exact(
            format!("(2) curvature square on sample form {k}"),
            lhs2.sub(&rhs2)?.is_zero(),
            "square of the covariant derivative differs from curvature insertion".to_string(),
        );
    }
    let big = omc.curvature_form()?;
    let omega = omc.omega();
    for (i, name) in action.algebra().names().iter().enumerate() {
        let lhs = big.interior_product(action.fundamental(i))?;
        let w = omega.value_on_fields(&[action.fundamental(i)])?;
        let mut value = Form::zero(chart.clone(), 0, omega.value_kind().clone());
        value.set_term(&[], w.clone())?;
        let mut gap_comps = w;
        gap_comps[i] = gap_comps[i].sub(&RF::one(nvars));
        let mut gap = Form::zero(chart.clone(), 0, omega.value_kind().clone());
        gap.set_term(&[], gap_comps)?;
        let rhs = alg_bracket(&gap, omega)?.sub(&value.exterior_derivative())?;
        cert.exact(
            format!("(3) vertical insertion at {name}"),
            lhs == rhs,
            "insertion into the curvature form misses the gap identity".to_string(),
        );
    }
    if sampled_free(action)? {
        let hor = action.is_horizontal(&big)?;
        cert.push(
            "free case: curvature form horizontal",
            hor.passed(),
            if hor.passed() { String::new() } else { hor.summary() },
        );
        cert.exact(
            "free case: Omega = cov_deriv(omega) by projection",
            big == conn.cov_deriv(omega)?,
            "structure identity fails".to_string(),
        );
        let twisted = omc.cov_deriv(omega, &action.adjoint_rep())?.precompose(&chi)?;
        cert.exact(
            "free case: Omega = horizontal part of the twisted derivative",
            big == twisted,
            "twisted structure identity fails".to_string(),
        );
    }
    Ok(cert)
}

/// Trivialized bundle patch: a base chart, an action on the fiber chart,
/// and a Christoffel 1-form on the base whose values are fiber fields
/// commuting with every fundamental field.
#[derive(Clone, Debug)]
pub struct LocalBundle {
    base: Chart,
    fiber_action: GAction,
    product: Chart,
    christoffel: Form,
}

impl LocalBundle {
    /// Chart with the base variables followed by the fiber variables;
    /// excluded loci carry over.
    pub fn product_chart_of(base: &Chart, fiber: &Chart) -> Result<Chart> {
        let vars: Vec<String> =
            base.vars().iter().chain(fiber.vars().iter()).cloned().collect();
        let n = vars.len();
        let b = base.dim();
        let mut excluded = Vec::new();
        for e in base.excluded() {
            let args: Vec<RF> = (0..b).map(|i| RF::var(n, i)).collect();
            excluded.push(e.subst(&args)?);
        }
        for e in fiber.excluded() {
            let args: Vec<RF> = (0..fiber.dim()).map(|i| RF::var(n, b + i)).collect();
            excluded.push(e.subst(&args)?);
        }
        if excluded.is_empty() {
            Chart::new(vars)
        } else {
            Chart::with_excluded(vars, excluded)
        }
    }

    /// The Christoffel form lives on the product chart, has degree 1 with
    /// base keys only, and its values are fiber fields (coefficients may
    /// depend on base variables) commuting with the fiber action.
    pub fn new(base: Chart, fiber_action: GAction, christoffel: Form) -> Result<Self> {
        let product = Self::product_chart_of(&base, fiber_action.chart())?;
        if christoffel.chart() != &product {
            return Err(Error::ChartMismatch {
                expected: product.describe(),
                found: christoffel.chart().describe(),
            });
        }
        let f = fiber_action.chart().dim();
        let ok = christoffel.degree() == 1
            && matches!(christoffel.value_kind(),
                        ValueKind::Vector { dim, algebra } if *dim == f && algebra.is_none());
        if !ok {
            return Err(Error::Invalid(
                "a Christoffel form is a fiber-field-valued 1-form".into(),
            ));
        }
        let b = base.dim();
        for key in christoffel.terms().keys() {
            if key[0] as usize >= b {
                return Err(Error::Invalid(
                    "Christoffel keys must be base directions".into(),
                ));
            }
        }
        let bundle = LocalBundle { base, fiber_action, product, christoffel };
        let lifted = bundle.lifted_fundamentals()?;
        for (key, vals) in bundle.christoffel.terms() {
            let value = bundle.embed_fiber_values(vals)?;
            for (i, zeta) in lifted.iter().enumerate() {
                if !value.bracket(zeta)?.is_zero() {
                    return Err(Error::Invalid(format!(
                        "Christoffel value on direction {} fails to commute with \
                         fundamental field {}",
                        bundle.product.vars()[key[0] as usize],
                        bundle.fiber_action.algebra().names()[i],
                    )));
                }
            }
        }
        Ok(bundle)
    }

    pub fn base_chart(&self) -> &Chart {
        &self.base
    }

    pub fn fiber_action(&self) -> &GAction {
        &self.fiber_action
    }

    pub fn product_chart(&self) -> &Chart {
        &self.product
    }

    pub fn christoffel(&self) -> &Form {
        &self.christoffel
    }

    pub fn base_dim(&self) -> usize {
        self.base.dim()
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber_action.chart().dim()
    }

    /// Fiber field with product-chart coefficients, padded with zero base
    /// components.
    fn embed_fiber_values(&self, vals: &[RF]) -> Result<VectorField> {
        let n = self.product.dim();
        let b = self.base.dim();
        let mut comps = vec![RF::zero(n); n];
        for (k, c) in vals.iter().enumerate() {
            comps[b + k] = c.clone();
        }
        VectorField::new(self.product.clone(), comps)
    }

    /// Fundamental fields of the fiber action rewritten on the product chart.
    pub fn lifted_fundamentals(&self) -> Result<Vec<VectorField>> {
        let n = self.product.dim();
        let b = self.base.dim();
        let f = self.fiber_dim();
        let args: Vec<RF> = (0..f).map(|i| RF::var(n, b + i)).collect();
        self.fiber_action
            .fundamentals()
            .iter()
            .map(|field| {
                let mut comps = vec![RF::zero(n); n];
                for (k, c) in field.components().iter().enumerate() {
                    comps[b + k] = c.subst(&args)?;
                }
                VectorField::new(self.product.clone(), comps)
            })
            .collect()
    }

    /// The fiber action acting on the product chart.
    pub fn product_action(&self) -> Result<GAction> {
        GAction::new(
            self.fiber_action.algebra().clone(),
            self.product.clone(),
            self.lifted_fundamentals()?,
        )
    }

    /// Lifted Christoffel value in a base direction (zero when absent).
    pub fn christoffel_field(&self, base_index: usize) -> Result<VectorField> {
        if base_index >= self.base.dim() {
            return Err(Error::Invalid("Christoffel direction outside the base".into()));
        }
        self.embed_fiber_values(&self.christoffel.value_on(&[base_index as u8]))
    }

    /// Connection projecting onto the fiber directions: the vertical
    /// identity minus the Christoffel form.
    pub fn connection(&self) -> Result<Connection> {
        let n = self.product.dim();
        let b = self.base.dim();
        let f = self.fiber_dim();
        let mut phi = Form::zero(self.product.clone(), 1, ValueKind::Tangent);
        for k in 0..f {
            let mut v = vec![RF::zero(n); n];
            v[b + k] = RF::one(n);
            phi.set_term(&[b + k], v)?;
        }
        for (key, vals) in self.christoffel.terms() {
            let mut v = vec![RF::zero(n); n];
            for (k, c) in vals.iter().enumerate() {
                v[b + k] = c.neg();
            }
            phi.set_term(&[key[0] as usize], v)?;
        }
        Connection::new(self.product_action()?, phi)
    }

    /// Curvature from the Christoffel data alone: base-direction exterior
    /// derivative plus the pairwise bracket of values, embedded as a
    /// tangent-valued 2-form for comparison with `connection().curvature()`.
    pub fn curvature_via_christoffel(&self) -> Result<Form> {
        let n = self.product.dim();
        let b = self.base.dim();
        let mut acc: BTreeMap<(usize, usize), Vec<RF>> = BTreeMap::new();
        let mut add_into = |i: usize, j: usize, sign: i64, vals: Vec<RF>| {
            let slot = acc.entry((i, j)).or_insert_with(|| vec![RF::zero(n); n]);
            for (m, v) in vals.into_iter().enumerate() {
                let signed = if sign < 0 { v.neg() } else { v };
                slot[m] = slot[m].add(&signed);
            }
        };
        for (key, vals) in self.christoffel.terms() {
            let alpha = key[0] as usize;
            for beta in 0..b {
                if beta == alpha {
                    continue;
                }
                let mut dv = vec![RF::zero(n); n];
                let mut nonzero = false;
                for (k, c) in vals.iter().enumerate() {
                    let d = c.deriv(beta);
                    if !d.is_zero() {
                        nonzero = true;
                    }
                    dv[b + k] = d;
                }
                if !nonzero {
                    continue;
                }
                if beta < alpha {
                    add_into(beta, alpha, 1, dv);
                } else {
                    add_into(alpha, beta, -1, dv);
                }
            }
        }
        let keys: Vec<usize> = self.christoffel.terms().keys().map(|k| k[0] as usize).collect();
        for (a, &alpha) in keys.iter().enumerate() {
            for &beta in keys.iter().skip(a + 1) {
                let va = self.christoffel_field(alpha)?;
                let vb = self.christoffel_field(beta)?;
                let w = va.bracket(&vb)?;
                add_into(alpha, beta, 1, w.components().to_vec());
            }
        }
        let mut out = Form::zero(self.product.clone(), 2, ValueKind::Tangent);
        for ((i, j), vals) in acc {
            if vals.iter().any(|v| !v.is_zero()) {
                out.set_term(&[i, j], vals)?;
            }
        }
        Ok(out)
    }
}

/// Whether the isotropy algebra at a point equals its own normalizer,
/// which forces uniqueness of the principal connection.
pub fn is_asystatic(action: &GAction, x: &[Rat]) -> Result<bool> {
    let data = action.analyze_point(x)?;
    let norm = normalizer(action.algebra().as_ref(), &data.isotropy)?;
    Ok(norm.basis() == data.isotropy.basis())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::LieAlgebra;
    use crate::poly::rat_int;
    use std::sync::Arc;

    fn rf(c: &Chart, s: &str) -> RF {
        c.expr(s).unwrap()
    }

    fn vf(c: &Chart, comps: &[&str]) -> VectorField {
        VectorField::new(c.clone(), comps.iter().map(|s| rf(c, s)).collect()).unwrap()
    }

    fn scalar_one_form(c: &Chart, comps: &[&str]) -> Form {
        let mut f = Form::zero(c.clone(), 1, ValueKind::Scalar);
        for (i, s) in comps.iter().enumerate() {
            let v = rf(c, s);
            if !v.is_zero() {
                f.set_term(&[i], vec![v]).unwrap();
            }
        }
        f
    }

    fn vector_one_form(c: &Chart, dim: usize, entries: &[(usize, usize, &str)]) -> Form {
        let mut acc: BTreeMap<usize, Vec<RF>> = BTreeMap::new();
        for (key, slot, expr) in entries {
            acc.entry(*key).or_insert_with(|| vec![RF::zero(c.dim()); dim])[*slot] =
                rf(c, expr);
        }
        let mut f = Form::zero(c.clone(), 1, ValueKind::vector(dim));
        for (key, vals) in acc {
            f.set_term(&[key], vals).unwrap();
        }
        f
    }

    fn transz_action() -> GAction {
        let c = Chart::of(&["x", "y", "z"]);
        let g = Arc::new(LieAlgebra::new(vec!["e1".into()], vec![vec![vec![rat_int(0)]]]).unwrap());
        GAction::new(g, c.clone(), vec![vf(&c, &["0", "0", "1"])]).unwrap()
    }

    fn transz_form() -> ConnectionForm {
        let a = transz_action();
        let c = a.chart().clone();
        let omega = vector_one_form(&c, 1, &[(0, 0, "-y"), (2, 0, "1")]);
        ConnectionForm::new(a, omega).unwrap()
    }

    fn heis3_action() -> GAction {
        let c = Chart::of(&["x", "y", "z"]);
        let g = Arc::new(
            LieAlgebra::from_sparse(
                vec!["e1".into(), "e2".into(), "e3".into()],
                &[(0, 1, vec![rat_int(0), rat_int(0), rat_int(1)])],
            )
            .unwrap(),
        );
        GAction::new(
            g,
            c.clone(),
            vec![vf(&c, &["1", "0", "0"]), vf(&c, &["0", "1", "x"]), vf(&c, &["0", "0", "1"])],
        )
        .unwrap()
    }

    fn heis3_kappa(a: &GAction) -> Form {
        let c = a.chart().clone();
        vector_one_form(&c, 3, &[(0, 0, "1"), (1, 1, "1"), (1, 2, "-x"), (2, 2, "1")])
    }

    fn aff1_action() -> GAction {
        let c = Chart::of(&["x"]);
        let g = Arc::new(
            LieAlgebra::from_sparse(
                vec!["e1".into(), "e2".into()],
                &[(0, 1, vec![rat_int(1), rat_int(0)])],
            )
            .unwrap(),
        );
        GAction::new(g, c.clone(), vec![vf(&c, &["1"]), vf(&c, &["x"])]).unwrap()
    }

    fn sl2_action() -> GAction {
        let c = Chart::of(&["x"]);
        let g = Arc::new(
            LieAlgebra::from_sparse(
                vec!["h".into(), "e".into(), "f".into()],
                &[
                    (0, 1, vec![rat_int(0), rat_int(2), rat_int(0)]),
                    (0, 2, vec![rat_int(0), rat_int(0), rat_int(-2)]),
                    (1, 2, vec![rat_int(1), rat_int(0), rat_int(0)]),
                ],
            )
            .unwrap(),
        );
        GAction::new(g, c.clone(), vec![vf(&c, &["-2*x"]), vf(&c, &["1"]), vf(&c, &["-x^2"])])
            .unwrap()
    }

    fn rot2_action() -> GAction {
        let c = Chart::of(&["x", "y"]);
        let c = Chart::with_excluded(c.vars().to_vec(), vec![c.expr("x^2 + y^2").unwrap()])
            .unwrap();
        let g = Arc::new(LieAlgebra::new(vec!["e1".into()], vec![vec![vec![rat_int(0)]]]).unwrap());
        GAction::new(g, c.clone(), vec![vf(&c, &["-y", "x"])]).unwrap()
    }

    fn bund1() -> LocalBundle {
        let base = Chart::of(&["x", "y"]);
        let fiber = Chart::of(&["s"]);
        let g = Arc::new(LieAlgebra::new(vec!["e1".into()], vec![vec![vec![rat_int(0)]]]).unwrap());
        let fiber_action = GAction::new(g, fiber.clone(), vec![vf(&fiber, &["1"])]).unwrap();
        let product = LocalBundle::product_chart_of(&base, &fiber).unwrap();
        let gamma = vector_one_form(&product, 1, &[(0, 0, "-y")]);
        LocalBundle::new(base, fiber_action, gamma).unwrap()
    }

    #[test]
    fn translation_connection_form_verifies_and_induces_projection() {
        let omc = transz_form();
        assert!(omc.verify().unwrap().passed());
        let conn = omc.connection().unwrap();
        assert!(conn.verify().unwrap().passed());
        let c = conn.action().chart().clone();
        let mut expected = Form::zero(c.clone(), 1, ValueKind::Tangent);
        expected.set_term(&[0], vec![rf(&c, "0"), rf(&c, "0"), rf(&c, "-y")]).unwrap();
        expected.set_term(&[2], vec![rf(&c, "0"), rf(&c, "0"), rf(&c, "1")]).unwrap();
        assert_eq!(*conn.phi(), expected);
    }

    #[test]
    fn curvature_routes_agree_and_orientation_is_pinned() {
        let omc = transz_form();
        let conn = omc.connection().unwrap();
        let r = conn.curvature().unwrap();
        let c = conn.action().chart().clone();
        let mut expected = Form::zero(c.clone(), 2, ValueKind::Tangent);
        expected.set_term(&[0, 1], vec![rf(&c, "0"), rf(&c, "0"), rf(&c, "-1")]).unwrap();
        assert_eq!(r, expected);
        let big = omc.curvature_form().unwrap();
        let mut expected_form = Form::zero(c.clone(), 2, omc.omega().value_kind().clone());
        expected_form.set_term(&[0, 1], vec![rf(&c, "1")]).unwrap();
        assert_eq!(big, expected_form);
        assert!(conn.bianchi().unwrap().passed());
        assert!(omc.bianchi().unwrap().passed());
    }

    #[test]
    fn flat_and_homogeneous_connections_are_flat() {
        let a = transz_action();
        let c = a.chart().clone();
        let flat = vector_one_form(&c, 1, &[(2, 0, "1")]);
        let omc = ConnectionForm::new(a, flat).unwrap();
        assert!(omc.verify().unwrap().passed());
        assert!(omc.curvature_form().unwrap().is_zero());

        let h = heis3_action();
        let kappa = heis3_kappa(&h);
        let omc = ConnectionForm::new(h.clone(), kappa).unwrap();
        assert!(omc.verify().unwrap().passed());
        let conn = omc.connection().unwrap();
        assert_eq!(*conn.phi(), Form::identity_tangent(h.chart().clone()));
        assert!(conn.curvature().unwrap().is_zero());
        assert!(omc.curvature_form().unwrap().is_zero());
    }

    #[test]
    fn angular_connection_on_punctured_plane_is_closed() {
        let a = rot2_action();
        let c = a.chart().clone();
        let omega = vector_one_form(&c, 1, &[(0, 0, "-y/(x^2+y^2)"), (1, 0, "x/(x^2+y^2)")]);
        let omc = ConnectionForm::new(a, omega).unwrap();
        assert!(omc.verify().unwrap().passed());
        assert!(omc.connection().unwrap().verify().unwrap().passed());
        assert!(omc.curvature_form().unwrap().is_zero());
        assert!(omc.connection().unwrap().curvature().unwrap().is_zero());
    }

    #[test]
    fn image_failure_probe_is_reported() {
        let a = transz_action();
        let c = a.chart().clone();
        let mut phi = Form::zero(c.clone(), 1, ValueKind::Tangent);
        phi.set_term(&[0], vec![rf(&c, "1"), rf(&c, "0"), rf(&c, "0")]).unwrap();
        phi.set_term(&[2], vec![rf(&c, "0"), rf(&c, "0"), rf(&c, "1")]).unwrap();
        let conn = Connection::new(a, phi).unwrap();
        let cert = conn.verify().unwrap();
        assert!(!cert.passed());
        assert!(cert.first_failure().unwrap().name.contains("image"));
        let idem = cert.items.iter().find(|i| i.name == "projection idempotent").unwrap();
        assert!(idem.ok);
    }

    #[test]
    fn reproduction_failure_probe_is_reported() {
        let a = transz_action();
        let c = a.chart().clone();
        let omega = vector_one_form(&c, 1, &[(2, 0, "z")]);
        let omc = ConnectionForm::new(a, omega).unwrap();
        let cert = omc.verify().unwrap();
        assert!(!cert.passed());
        let repro = cert.items.iter().find(|i| i.name.starts_with("(2)")).unwrap();
        assert!(!repro.ok);
    }

    #[test]
    fn covariant_derivative_collapses_to_horizontal_components() {
        let omc = transz_form();
        let conn = omc.connection().unwrap();
        let c = conn.action().chart().clone();
        let z = Form::function(c.clone(), rf(&c, "z")).unwrap();
        assert_eq!(conn.cov_deriv(&z).unwrap(), scalar_one_form(&c, &["y", "0", "0"]));

        let a = transz_action();
        let flat = vector_one_form(&c, 1, &[(2, 0, "1")]);
        let flat_conn = ConnectionForm::new(a, flat).unwrap().connection().unwrap();
        let psi = scalar_one_form(&c, &["0", "x", "0"]);
        assert_eq!(flat_conn.cov_deriv(&psi).unwrap(), psi.exterior_derivative());
    }

    #[test]
    fn twisted_derivative_matches_hand_expansion() {
        let h = heis3_action();
        let omc = ConnectionForm::new(h.clone(), heis3_kappa(&h)).unwrap();
        let c = h.chart().clone();
        let psi = vector_one_form(&c, 3, &[(0, 0, "1")]);
        let out = omc.cov_deriv(&psi, &h.adjoint_rep()).unwrap();
        let mut expected = Form::zero(c.clone(), 2, ValueKind::vector(3));
        expected.set_term(&[0, 1], vec![rf(&c, "0"), rf(&c, "0"), rf(&c, "1")]).unwrap();
        assert_eq!(out, expected);

        let trivial = h.trivial_rep(1);
        let vec1 = {
            let mut f = Form::zero(c.clone(), 1, ValueKind::vector(1));
            f.set_term(&[1], vec![rf(&c, "x")]).unwrap();
            f
        };
        assert_eq!(omc.cov_deriv(&vec1, &trivial).unwrap(), vec1.exterior_derivative());
    }

    #[test]
    fn christoffel_bundle_matches_hand_curvature() {
        let b = bund1();
        let conn = b.connection().unwrap();
        assert!(conn.verify().unwrap().passed());
        let pc = b.product_chart().clone();
        let mut expected_phi = Form::zero(pc.clone(), 1, ValueKind::Tangent);
        expected_phi.set_term(&[0], vec![rf(&pc, "0"), rf(&pc, "0"), rf(&pc, "y")]).unwrap();
        expected_phi.set_term(&[2], vec![rf(&pc, "0"), rf(&pc, "0"), rf(&pc, "1")]).unwrap();
        assert_eq!(*conn.phi(), expected_phi);
        let r = conn.curvature().unwrap();
        let mut expected_r = Form::zero(pc.clone(), 2, ValueKind::Tangent);
        expected_r.set_term(&[0, 1], vec![rf(&pc, "0"), rf(&pc, "0"), rf(&pc, "1")]).unwrap();
        assert_eq!(r, expected_r);
        assert_eq!(b.curvature_via_christoffel().unwrap(), r);
    }

    #[test]
    fn zero_christoffel_is_flat() {
        let base = Chart::of(&["x", "y"]);
        let fiber = Chart::of(&["s"]);
        let g = Arc::new(LieAlgebra::new(vec!["e1".into()], vec![vec![vec![rat_int(0)]]]).unwrap());
        let fa = GAction::new(g, fiber.clone(), vec![vf(&fiber, &["1"])]).unwrap();
        let product = LocalBundle::product_chart_of(&base, &fiber).unwrap();
        let gamma = Form::zero(product.clone(), 1, ValueKind::vector(1));
        let b = LocalBundle::new(base, fa, gamma).unwrap();
        let conn = b.connection().unwrap();
        assert!(conn.curvature().unwrap().is_zero());
        assert!(b.curvature_via_christoffel().unwrap().is_zero());
    }

    #[test]
    fn christoffel_centralizer_violation_is_rejected() {
        let base = Chart::of(&["x", "y"]);
        let fiber = Chart::of(&["s"]);
        let g = Arc::new(LieAlgebra::new(vec!["e1".into()], vec![vec![vec![rat_int(0)]]]).unwrap());
        let fa = GAction::new(g, fiber.clone(), vec![vf(&fiber, &["1"])]).unwrap();
        let product = LocalBundle::product_chart_of(&base, &fiber).unwrap();
        let gamma = vector_one_form(&product, 1, &[(0, 0, "s")]);
        assert!(LocalBundle::new(base, fa, gamma).is_err());
    }

    #[test]
    fn asystatic_flags_match_hand_normalizers() {
        assert!(is_asystatic(&sl2_action(), &[rat_int(0)]).unwrap());
        assert!(is_asystatic(&aff1_action(), &[rat_int(0)]).unwrap());
        assert!(!is_asystatic(&heis3_action(), &[rat_int(0), rat_int(0), rat_int(0)]).unwrap());
    }

    #[test]
    fn cov_deriv_battery_passes_on_translation_fixture() {
        let omc = transz_form();
        let conn = omc.connection().unwrap();
        let c = conn.action().chart().clone();
        let psi = vector_one_form(&c, 1, &[(1, 0, "x")]);
        let big_psi = {
            let mut f = Form::zero(c.clone(), 1, ValueKind::vector(1));
            f.set_term(&[1], vec![rf(&c, "x")]).unwrap();
            f
        };
        let rho = conn.action().trivial_rep(1);
        let cert =
            check_cov_deriv_battery(&conn, omc.omega(), &psi, &big_psi, &rho).unwrap();
        assert!(cert.passed(), "{}", cert.summary());
        assert!(cert.items.iter().any(|i| i.name.contains("free case")));
    }

    #[test]
    fn cov_deriv_battery_cancels_on_affine_fixture() {
        let a = aff1_action();
        let c = a.chart().clone();
        let omega = vector_one_form(&c, 2, &[(0, 0, "1")]);
        let omc = ConnectionForm::new(a.clone(), omega).unwrap();
        assert!(omc.verify().unwrap().passed());
        let conn = omc.connection().unwrap();
        let mut psi = Form::zero(c.clone(), 0, ValueKind::vector(2));
        psi.set_term(&[], vec![rf(&c, "-x"), rf(&c, "1")]).unwrap();
        let rho = a.adjoint_rep();
        let cert = check_cov_deriv_battery(&conn, omc.omega(), &psi, &psi, &rho).unwrap();
        assert!(cert.passed(), "{}", cert.summary());
        assert!(!cert.items.iter().any(|i| i.name.contains("free case")));
    }

    #[test]
    fn cov_deriv_battery_skips_free_case_on_overdetermined_action() {
        let a = sl2_action();
        let c = a.chart().clone();
        let phi = Form::identity_tangent(c.clone());
        let conn = Connection::new(a.clone(), phi).unwrap();
        assert!(conn.verify().unwrap().passed());
        let omega = vector_one_form(&c, 3, &[(0, 1, "1")]);
        let psi = Form::zero(c.clone(), 1, ValueKind::vector(3));
        let mut big_psi = Form::zero(c.clone(), 0, ValueKind::vector(1));
        big_psi.set_term(&[], vec![rf(&c, "5")]).unwrap();
        let rho = a.trivial_rep(1);
        let cert = check_cov_deriv_battery(&conn, &omega, &psi, &big_psi, &rho).unwrap();
        assert!(cert.passed(), "{}", cert.summary());
        assert!(!cert.items.iter().any(|i| i.name.contains("free case")));
    }

    #[test]
    fn insertion_battery_on_translation_and_affine_fixtures() {
        let omc = transz_form();
        let c = omc.action().chart().clone();
        let psis = vec![
            Form::function(c.clone(), rf(&c, "z")).unwrap(),
            scalar_one_form(&c, &["0", "x", "0"]),
            scalar_one_form(&c, &["z", "0", "x"]),
        ];
        let cert = check_insertion_battery(&omc, &psis).unwrap();
        assert!(cert.passed(), "{}", cert.summary());
        assert!(cert.items.iter().any(|i| i.name.contains("free case")));

        let a = aff1_action();
        let ca = a.chart().clone();
        let omega = vector_one_form(&ca, 2, &[(0, 0, "1")]);
        let omc = ConnectionForm::new(a, omega).unwrap();
        let psis = vec![
            Form::function(ca.clone(), rf(&ca, "x^2")).unwrap(),
            scalar_one_form(&ca, &["x"]),
        ];
        let cert = check_insertion_battery(&omc, &psis).unwrap();
        assert!(cert.passed(), "{}", cert.summary());
        assert!(!cert.items.iter().any(|i| i.name.contains("free case")));
    }

    #[test]
    fn insertion_battery_on_homogeneous_fixture() {
        let h = heis3_action();
        let omc = ConnectionForm::new(h.clone(), heis3_kappa(&h)).unwrap();
        let c = h.chart().clone();
        let psis = vec![
            Form::function(c.clone(), rf(&c, "x*y")).unwrap(),
            scalar_one_form(&c, &["0", "z", "0"]),
        ];
        let cert = check_insertion_battery(&omc, &psis).unwrap();
        assert!(cert.passed(), "{}", cert.summary());
        assert!(cert.items.iter().any(|i| i.name.contains("free case")));
    }
}
