//! Canonical coframes of free transitive actions, reductive complements of
//! isotropy subalgebras, and connection forms lifted to matrix-group charts.
//!
//! Conventions pinned here, each frozen by an exact example in the tests:
//! the canonical coframe of a free transitive action is the inverse of the
//! fundamental-field matrix and satisfies `d k + 1/2 [k, k] = 0`; on a
//! matrix-group chart the lift of a coset connection form subtracts the
//! adjoint-twisted pullback from the right-invariant coframe `dg . g^{-1}`,
//! and the lift's curvature obeys `d w - 1/2 [w, w] = -Ad . p*(Omega)`.
//! The bracket sign on the lifted side flips relative to the coset side
//! because the structure subgroup acts by left translations; the identity
//! follows from the product rule applied to `dg . g^{-1}`, and the trivial
//! subgroup case (where the lift must vanish identically) cross-checks the
//! adjoint twist against the coframe convention.

use std::collections::BTreeMap;
use std::sync::Arc;

use num::{One, Zero};

use crate::action::GAction;
use crate::brackets::alg_bracket;
use crate::cert::Certificate;
use crate::chart::Chart;
use crate::connection::ConnectionForm;
use crate::error::{Error, Result};
use crate::form::{Form, RationalMap, ValueKind, VectorField};
use crate::lie::{ExpAdVec, LieAlgebra, Subalgebra};
use crate::linalg::{
    self, f_mat_mul, f_mat_vec, f_rank, rank, row_space_basis, FMat, QMat, QVec,
};
use crate::poly::{rat, Monomial, Poly, Rat};
use crate::ratfunc::RF;

fn transpose_q(m: &QMat) -> QMat {
    if m.is_empty() {
        return Vec::new();
    }
    (0..m[0].len()).map(|j| m.iter().map(|row| row[j].clone()).collect()).collect()
}

/// Whether a vector with function entries lies in the row space of a
/// reduced rational basis (pivot entries are 1 by convention).
fn rf_in_rowspace(basis: &QMat, v: &[RF]) -> bool {
    let mut w = v.to_vec();
    for row in basis {
        let Some(p) = row.iter().position(|c| !c.is_zero()) else { continue };
        let c = w[p].clone();
        if c.is_zero() {
            continue;
        }
        for (wj, rj) in w.iter_mut().zip(row) {
            if !rj.is_zero() {
                *wj = wj.sub(&c.scale(rj));
            }
        }
    }
    w.iter().all(|x| x.is_zero())
}

/// The coefficient matrix of the fundamental fields over the function
/// field: entry `[j][i]` is component `j` of the `i`-th field.
fn fundamental_matrix(action: &GAction) -> FMat {
    let n = action.chart().dim();
    (0..n)
        .map(|j| action.fundamentals().iter().map(|f| f.components()[j].clone()).collect())
        .collect()
}

/// The unique algebra-valued coframe dual to the fundamental fields of a
/// free transitive action: its coefficient matrix is the exact inverse of
/// the fundamental-field matrix, so it reproduces every generator.
///
/// Fails when the field matrix is not square (field count != chart
/// dimension) or is singular over the function field, and when the
/// inverted coframe does not close under the structure equation (the
/// supplied fields then do not realize the declared algebra).
pub fn maurer_cartan_from_action(action: &GAction) -> Result<Form> {
    let chart = action.chart();
    let n = chart.dim();
    let d = action.algebra().dim();
    if d != n {
        return Err(Error::DimensionMismatch(format!(
            "a canonical coframe needs one field per chart variable (got {d} fields on a {n}-variable chart)"
        )));
    }
    let z = fundamental_matrix(action);
    let o = linalg::f_invert(&z).map_err(|_| {
        Error::Singular(
            "fundamental-field matrix is singular over the function field; \
             the action is not free and transitive on this chart"
                .into(),
        )
    })?;
    let kind = ValueKind::algebra_valued(action.algebra().clone());
    let mut kappa = Form::zero(chart.clone(), 1, kind);
    for j in 0..n {
        let vals: Vec<RF> = (0..n).map(|a| o[a][j].clone()).collect();
        kappa.set_term(&[j], vals)?;
    }
    let residual = mc_residual(&kappa)?;
    if !residual.is_zero() {
        return Err(Error::RouteDisagreement(
            "canonical coframe fails its structure equation; the fields do not \
             realize the declared algebra"
                .into(),
        ));
    }
    Ok(kappa)
}

/// Structure-equation residual `d k + 1/2 [k, k]` of an algebra-valued
/// one-form.  It vanishes exactly when the inverse of the coefficient
/// matrix defines fundamental fields realizing the algebra.
pub fn mc_residual(kappa: &Form) -> Result<Form> {
    if kappa.degree() != 1 {
        return Err(Error::Invalid("structure-equation residual needs a one-form".into()));
    }
    let half = alg_bracket(kappa, kappa)?.scale_rat(&rat(1, 2));
    kappa.exterior_derivative().add(&half)
}

/// Inverts an algebra-valued coframe back into candidate fundamental
/// fields.  No homomorphism law is assumed: the returned action carries
/// whatever fields the inverse matrix dictates, and `check_homomorphism`
/// on it fails exactly when the coframe's structure-equation residual is
/// nonzero.
pub fn action_from_maurer_cartan(kappa: &Form) -> Result<GAction> {
    let chart = kappa.chart().clone();
    let n = chart.dim();
    let Some(algebra) = kappa.value_kind().algebra().cloned() else {
        return Err(Error::ValueMismatch("inverting a coframe needs algebra-valued input".into()));
    };
    if kappa.degree() != 1 {
        return Err(Error::Invalid("inverting a coframe needs a one-form".into()));
    }
    if algebra.dim() != n {
        return Err(Error::DimensionMismatch(
            "coframe inversion needs matching algebra and chart dimensions".into(),
        ));
    }
    let o: FMat = (0..n)
        .map(|a| (0..n).map(|j| kappa.value_on(&[j as u8])[a].clone()).collect())
        .collect();
    let z = linalg::f_invert(&o)
        .map_err(|_| Error::Singular("coefficient matrix of the coframe is singular".into()))?;
    let fields: Vec<VectorField> = (0..n)
        .map(|i| VectorField::new(chart.clone(), (0..n).map(|j| z[j][i].clone()).collect()))
        .collect::<Result<_>>()?;
    GAction::new(algebra, chart, fields)
}

/// A direct-sum splitting of an algebra into an isotropy subalgebra and a
/// bracket-invariant complement, anchored at a base point of the chart
/// the isotropy belongs to.
#[derive(Clone, Debug)]
pub struct ReductiveDecomposition {
    h: Subalgebra,
    m: Subalgebra,
    base_point: Vec<Rat>,
}

impl ReductiveDecomposition {
    pub fn new(
        parent: &LieAlgebra,
        h: Subalgebra,
        m: Subalgebra,
        base_point: Vec<Rat>,
    ) -> Result<Self> {
        let n = parent.dim();
        if h.dim_parent() != n || m.dim_parent() != n {
            return Err(Error::DimensionMismatch(
                "both parts must be subspaces of the declared algebra".into(),
            ));
        }
        if !h.is_subalgebra(parent) {
            return Err(Error::Invalid(
                "the isotropy part must be closed under the bracket".into(),
            ));
        }
        if h.dim() + m.dim() != n {
            return Err(Error::Invalid("the two parts must have complementary dimensions".into()));
        }
        let mut stacked: QMat = h.basis().clone();
        stacked.extend(m.basis().iter().cloned());
        if rank(&stacked) != n {
            return Err(Error::Invalid("the two parts overlap; the sum is not direct".into()));
        }
        for (b, hb) in h.basis().iter().enumerate() {
            for (s, mb) in m.basis().iter().enumerate() {
                let br = parent.bracket(hb, mb);
                if !m.contains(&br) {
                    return Err(Error::Invalid(format!(
                        "bracket of isotropy generator {b} with complement generator {s} \
                         leaves the complement"
                    )));
                }
            }
        }
        Ok(ReductiveDecomposition { h, m, base_point })
    }

    pub fn h(&self) -> &Subalgebra {
        &self.h
    }

    pub fn m(&self) -> &Subalgebra {
        &self.m
    }

    pub fn base_point(&self) -> &[Rat] {
        &self.base_point
    }

    /// Certifies that exponentials of isotropy generators keep the
    /// complement invariant, exactly, for every supplied parameter value.
    /// Generators whose adjoint is not nilpotent have no exact
    /// exponential and are outside this check's scope.
    pub fn exp_invariance(&self, parent: &LieAlgebra, ts: &[Rat]) -> Result<Certificate> {
        let mut cert = Certificate::new("complement invariance under exponentials");
        for (b, w) in self.h.basis().iter().enumerate() {
            for t in ts {
                for (s, v) in self.m.basis().iter().enumerate() {
                    match parent.exp_ad_apply(w, t, v) {
                        ExpAdVec::Exact(img) => cert.exact(
                            format!("exp(t ad h{b}) keeps generator m{s} at t={t}"),
                            self.m.contains(&img),
                            "exponential image leaves the complement".to_string(),
                        ),
                        ExpAdVec::Numeric(_) => {}
                    }
                }
            }
        }
        Ok(cert)
    }
}

/// Searches for a bracket-invariant complement to a subalgebra by solving
/// the linear system over complements parametrized as graphs of linear
/// maps from the coordinate complement into the subalgebra.  Returns a
/// verified decomposition, or `None` when the system is inconsistent.
pub fn find_reductive_complement(
    parent: &LieAlgebra,
    h: &Subalgebra,
    base_point: &[Rat],
) -> Result<Option<ReductiveDecomposition>> {
    let n = parent.dim();
    if h.dim_parent() != n {
        return Err(Error::DimensionMismatch("subalgebra lives in a different algebra".into()));
    }
    if !h.is_subalgebra(parent) {
        return Err(Error::Invalid("the isotropy part must be closed under the bracket".into()));
    }
    let hb = h.basis();
    let dh = h.dim();
    let pivots: Vec<usize> = hb
        .iter()
        .map(|row| row.iter().position(|c| !c.is_zero()).expect("basis rows are nonzero"))
        .collect();
    let comp_cols: Vec<usize> = (0..n).filter(|c| !pivots.contains(c)).collect();
    let q = comp_cols.len();
    let unknowns = q * dh;

    // Decomposes y under g = h + c (c = coordinate complement): the
    // subalgebra coordinates sit at the pivot positions of the reduced
    // basis, and what remains lies in the coordinate complement.
    let split = |y: &QVec| -> (QVec, QVec) {
        let beta: QVec = pivots.iter().map(|&p| y[p].clone()).collect();
        let mut yc = y.clone();
        for (a, row) in hb.iter().enumerate() {
            if beta[a].is_zero() {
                continue;
            }
            for (k, r) in yc.iter_mut().zip(row) {
                *k -= &beta[a] * r;
            }
        }
        let mu: QVec = comp_cols.iter().map(|&c| yc[c].clone()).collect();
        (beta, mu)
    };

    let mut rows: QMat = Vec::new();
    let mut rhs: QVec = Vec::new();
    for b in 0..dh {
        for j in 0..q {
            let mut vj = vec![Rat::zero(); n];
            vj[comp_cols[j]] = Rat::one();
            let y = parent.bracket(&hb[b], &vj);
            let (beta, mu) = split(&y);
            for a2 in 0..dh {
                let mut row = vec![Rat::zero(); unknowns];
                for a in 0..dh {
                    let br = parent.bracket(&hb[b], &hb[a]);
                    let (hcoords, _) = split(&br);
                    row[j * dh + a] += &hcoords[a2];
                }
                for jp in 0..q {
                    row[jp * dh + a2] -= &mu[jp];
                }
                rows.push(row);
                rhs.push(-beta[a2].clone());
            }
        }
    }
    let Some(lambda) = linalg::solve(&rows, &rhs) else {
        return Ok(None);
    };
    let mvecs: Vec<QVec> = (0..q)
        .map(|j| {
            let mut v = vec![Rat::zero(); n];
            v[comp_cols[j]] = Rat::one();
            for (a, row) in hb.iter().enumerate() {
                let c = &lambda[j * dh + a];
                if c.is_zero() {
                    continue;
                }
                for (vk, rk) in v.iter_mut().zip(row) {
                    *vk += c * rk;
                }
            }
            v
        })
        .collect();
    let m = Subalgebra::span(n, &mvecs)?;
    ReductiveDecomposition::new(parent, h.clone(), m, base_point.to_vec()).map(Some)
}

/// Degree bound for the polynomial coefficient space searched by
/// `connection_form_from_reductive`.
#[derive(Clone, Copy, Debug)]
pub struct AnsatzSettings {
    pub max_degree: u32,
}

impl Default for AnsatzSettings {
    fn default() -> Self {
        AnsatzSettings { max_degree: 4 }
    }
}

fn monomials_up_to(nvars: usize, max_degree: u32) -> Vec<Poly> {
    let mut expos: Vec<Vec<u16>> = vec![Vec::new()];
    for _ in 0..nvars {
        let mut next = Vec::new();
        for e in &expos {
            let used: u32 = e.iter().map(|&x| x as u32).sum();
            for extra in 0..=(max_degree - used) as u16 {
                let mut ee = e.clone();
                ee.push(extra);
                next.push(ee);
            }
        }
        expos = next;
    }
    expos.sort();
    expos
        .into_iter()
        .map(|e| {
            let mut terms = BTreeMap::new();
            terms.insert(Monomial(e), Rat::one());
            Poly { nvars, terms }
        })
        .collect()
}

fn candidate_denominators(chart: &Chart, max_degree: u32) -> Vec<Poly> {
    let n = chart.dim();
    let mut out = vec![Poly::one(n)];
    if chart.excluded().is_empty() {
        return out;
    }
    let mut product = Poly::one(n);
    for e in chart.excluded() {
        product = product.mul(e.numer());
    }
    let mut power = product.clone();
    while power.total_degree() <= max_degree {
        out.push(power.clone());
        power = power.mul(&product);
    }
    out
}

/// Solves the linear system "equivariant + pinned base-point value" over
/// one-forms with polynomial numerators of bounded degree over a fixed
/// denominator.  Returns the canonical solution, or `None` when the
/// system is inconsistent in this coefficient space.
fn solve_equivariant_extension(
    action: &GAction,
    target: &QMat,
    base_point: &[Rat],
    max_degree: u32,
    den: &Poly,
) -> Result<Option<Form>> {
    let chart = action.chart();
    let n = chart.dim();
    let d = action.algebra().dim();
    let monos = monomials_up_to(n, max_degree);
    let nm = monos.len();
    let unknowns = d * n * nm;
    let ad = action.adjoint_rep();
    let den_rf = RF::new(den.clone(), Poly::one(n))?;
    let kind = ValueKind::vector(d);

    type RowKey = (usize, Vec<u8>, usize, Vec<u16>);
    let mut row_index: BTreeMap<RowKey, usize> = BTreeMap::new();
    let mut cols: Vec<Vec<(usize, Rat)>> = vec![Vec::new(); unknowns];
    for a in 0..d {
        for j in 0..n {
            for (k, mono) in monos.iter().enumerate() {
                let u = (a * n + j) * nm + k;
                let mut basis_form = Form::zero(chart.clone(), 1, kind.clone());
                let mut vals = vec![RF::zero(n); d];
                vals[a] = RF::from_poly(mono.clone());
                basis_form.set_term(&[j], vals)?;
                for i in 0..d {
                    let zeta_i = action.fundamental(i);
                    let lie = basis_form.lie_derivative(zeta_i)?.scale_fn(&den_rf);
                    let den_flow = basis_form.scale_fn(&zeta_i.apply(&den_rf));
                    let twist =
                        basis_form.apply_matrix(&ad[i], kind.clone())?.scale_fn(&den_rf);
                    let residual = lie.sub(&den_flow)?.add(&twist)?;
                    for (key, rvals) in residual.terms() {
                        for (a2, v) in rvals.iter().enumerate() {
                            if v.is_zero() {
                                continue;
                            }
                            if !v.is_polynomial() {
                                return Err(Error::Invalid(
                                    "bounded-degree search needs polynomial fundamental fields"
                                        .into(),
                                ));
                            }
                            for (m2, c) in &v.numer().terms {
                                let rk = (i, key.clone(), a2, m2.0.clone());
                                let next = row_index.len();
                                let r = *row_index.entry(rk).or_insert(next);
                                cols[u].push((r, c.clone()));
                            }
                        }
                    }
                }
            }
        }
    }
    let nres = row_index.len();
    let total_rows = nres + d * n;
    let mut mat = vec![vec![Rat::zero(); unknowns]; total_rows];
    let mut rhs = vec![Rat::zero(); total_rows];
    for (u, col) in cols.iter().enumerate() {
        for (r, c) in col {
            mat[*r][u] += c;
        }
    }
    let den_at_base = den.eval_rat(base_point);
    for a in 0..d {
        for j in 0..n {
            let r = nres + a * n + j;
            for (k, mono) in monos.iter().enumerate() {
                mat[r][(a * n + j) * nm + k] = mono.eval_rat(base_point);
            }
            rhs[r] = &den_at_base * &target[a][j];
        }
    }
    let Some(coeffs) = linalg::solve(&mat, &rhs) else {
        return Ok(None);
    };
    let mut omega = Form::zero(chart.clone(), 1, kind);
    for j in 0..n {
        let mut vals = vec![RF::zero(n); d];
        for a in 0..d {
            let mut num = Poly::zero(n);
            for (k, mono) in monos.iter().enumerate() {
                let c = &coeffs[(a * n + j) * nm + k];
                if !c.is_zero() {
                    num = num.add(&mono.scale(c));
                }
            }
            vals[a] = RF::new(num, den.clone())?;
        }
        omega.set_term(&[j], vals)?;
    }
    Ok(Some(omega))
}

/// Extends the base-point value determined by a reductive splitting to an
/// equivariant connection form, searching rational coefficients of
/// bounded degree.  The extension, when found, is verified in full; at
/// the base point its image is exactly the complement.
pub fn connection_form_from_reductive(
    action: &GAction,
    dec: &ReductiveDecomposition,
    settings: &AnsatzSettings,
) -> Result<ConnectionForm> {
    let chart = action.chart();
    let n = chart.dim();
    let d = action.algebra().dim();
    let data = action.analyze_point(dec.base_point())?;
    if data.isotropy.basis() != dec.h().basis() {
        return Err(Error::Invalid(
            "declared isotropy part differs from the isotropy at the base point".into(),
        ));
    }
    if data.rank != n {
        return Err(Error::Invalid("the action is not transitive at the base point".into()));
    }
    if dec.m().dim() != n {
        return Err(Error::DimensionMismatch(
            "complement dimension must equal the chart dimension".into(),
        ));
    }
    // Base-point value: send each coordinate direction to the unique
    // complement element whose fundamental field realizes it.
    let mbasis = dec.m().basis();
    let zm: QMat = (0..n)
        .map(|j| {
            (0..n)
                .map(|s| {
                    (0..d)
                        .map(|i| &data.zeta_matrix[j][i] * &mbasis[s][i])
                        .fold(Rat::zero(), |acc, x| acc + x)
                })
                .collect()
        })
        .collect();
    let zm_inv = linalg::invert(&zm).map_err(|_| {
        Error::Singular("complement fields are dependent at the base point".into())
    })?;
    let mut target = vec![vec![Rat::zero(); n]; d];
    for (a, row) in target.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            for s in 0..n {
                *cell += &zm_inv[s][j] * &mbasis[s][a];
            }
        }
    }
    for den in candidate_denominators(chart, settings.max_degree) {
        let Some(omega) =
            solve_equivariant_extension(action, &target, dec.base_point(), settings.max_degree, &den)?
        else {
            continue;
        };
        let omc = ConnectionForm::new(action.clone(), omega)?;
        let cert = omc.verify()?;
        if !cert.passed() {
            continue;
        }
        // Image at the base point must be the complement.
        let value_rows: QMat = (0..n)
            .map(|j| {
                (0..d)
                    .map(|a| omc.omega().value_on(&[j as u8])[a].eval_rat(dec.base_point()))
                    .collect::<Result<Vec<Rat>>>()
            })
            .collect::<Result<QMat>>()?;
        if row_space_basis(&value_rows) != *dec.m().basis() {
            return Err(Error::RouteDisagreement(
                "extension verified but its base-point image is not the complement".into(),
            ));
        }
        return Ok(omc);
    }
    Err(Error::Invalid(
        "no equivariant extension exists in the bounded-degree rational coefficient space".into(),
    ))
}

/// A group realized as a chart with an explicit matrix parametrization:
/// `param` maps chart coordinates to an invertible matrix, `param_inv` is
/// its exact matrix inverse, and `entry_coords` lists one matrix entry
/// per coordinate that recovers it.  The algebra must carry a faithful
/// matrix realization compatible with its bracket table.
#[derive(Clone, Debug)]
pub struct MatrixGroupChart {
    algebra: Arc<LieAlgebra>,
    chart: Chart,
    param: FMat,
    param_inv: FMat,
    entry_coords: Vec<(usize, usize)>,
    identity_coords: Vec<Rat>,
    rep: Vec<QMat>,
    coord_recovery: QMat,
}

impl MatrixGroupChart {
    pub fn new(
        algebra: Arc<LieAlgebra>,
        chart: Chart,
        param: FMat,
        param_inv: FMat,
        entry_coords: Vec<(usize, usize)>,
        identity_coords: Vec<Rat>,
    ) -> Result<Self> {
        let n = chart.dim();
        if algebra.dim() != n {
            return Err(Error::DimensionMismatch(
                "group chart dimension must equal the algebra dimension".into(),
            ));
        }
        let Some(rep) = algebra.matrix_rep().cloned() else {
            return Err(Error::Invalid(
                "group chart needs an algebra with a matrix realization".into(),
            ));
        };
        let k = rep[0].len();
        for m in [&param, &param_inv] {
            if m.len() != k || m.iter().any(|row| row.len() != k) {
                return Err(Error::DimensionMismatch(
                    "parametrization must match the matrix realization size".into(),
                ));
            }
            for row in m {
                for entry in row {
                    if entry.nvars() != n {
                        return Err(Error::DimensionMismatch(
                            "parametrization entries must be functions of the chart variables"
                                .into(),
                        ));
                    }
                }
            }
        }
        if f_mat_mul(&param, &param_inv) != linalg::f_identity(k, n) {
            return Err(Error::Invalid(
                "parametrization times its declared inverse is not the identity".into(),
            ));
        }
        if identity_coords.len() != n {
            return Err(Error::DimensionMismatch("identity coordinates arity".into()));
        }
        for (r, row) in param.iter().enumerate() {
            for (c, entry) in row.iter().enumerate() {
                let v = entry.eval_rat(&identity_coords)?;
                let expected = if r == c { Rat::one() } else { Rat::zero() };
                if v != expected {
                    return Err(Error::Invalid(
                        "identity coordinates do not parametrize the identity matrix".into(),
                    ));
                }
            }
        }
        if entry_coords.len() != n {
            return Err(Error::DimensionMismatch(
                "one recovery entry per chart variable required".into(),
            ));
        }
        for (j, &(r, c)) in entry_coords.iter().enumerate() {
            if r >= k || c >= k {
                return Err(Error::DimensionMismatch("recovery entry out of range".into()));
            }
            if param[r][c] != RF::var(n, j) {
                return Err(Error::Invalid(
                    "recovery entries must reproduce the chart variables".into(),
                ));
            }
        }
        let jac: FMat = (0..k * k)
            .map(|idx| (0..n).map(|j| param[idx / k][idx % k].deriv(j)).collect())
            .collect();
        if f_rank(&jac) != n {
            return Err(Error::Invalid("parametrization is degenerate".into()));
        }
        // Faithfulness and exact coordinate recovery on the realization span.
        let stacked: QMat =
            (0..k * k).map(|idx| (0..n).map(|a| rep[a][idx / k][idx % k].clone()).collect()).collect();
        if rank(&stacked) != n {
            return Err(Error::Invalid("matrix realization must be faithful".into()));
        }
        let st = transpose_q(&stacked);
        let mut coord_recovery: QMat = Vec::with_capacity(n);
        for a in 0..n {
            let mut e = vec![Rat::zero(); n];
            e[a] = Rat::one();
            let l = linalg::solve(&st, &e)
                .ok_or_else(|| Error::Singular("realization span has no coordinate functional".into()))?;
            coord_recovery.push(l);
        }
        Ok(MatrixGroupChart {
            algebra,
            chart,
            param,
            param_inv,
            entry_coords,
            identity_coords,
            rep,
            coord_recovery,
        })
    }

    pub fn algebra(&self) -> &Arc<LieAlgebra> {
        &self.algebra
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn identity_coords(&self) -> &[Rat] {
        &self.identity_coords
    }

    pub fn param(&self) -> &FMat {
        &self.param
    }

    pub fn entry_coords(&self) -> &[(usize, usize)] {
        &self.entry_coords
    }

    fn matrix_size(&self) -> usize {
        self.rep[0].len()
    }

    /// Algebra coordinates of a matrix with function entries; fails when
    /// the matrix leaves the span of the realization.
    fn rep_coords(&self, m: &FMat) -> Result<Vec<RF>> {
        let n = self.chart.dim();
        let k = self.matrix_size();
        let flat: Vec<RF> = (0..k * k).map(|idx| m[idx / k][idx % k].clone()).collect();
        let coords: Vec<RF> = self
            .coord_recovery
            .iter()
            .map(|l| {
                flat.iter()
                    .zip(l)
                    .filter(|(_, c)| !c.is_zero())
                    .fold(RF::zero(n), |acc, (f, c)| acc.add(&f.scale(c)))
            })
            .collect();
        for (idx, f) in flat.iter().enumerate() {
            let mut back = RF::zero(n);
            for (a, x) in coords.iter().enumerate() {
                let c = &self.rep[a][idx / k][idx % k];
                if !c.is_zero() {
                    back = back.add(&x.scale(c));
                }
            }
            if back != *f {
                return Err(Error::ValueMismatch(
                    "matrix does not lie in the span of the algebra realization".into(),
                ));
            }
        }
        Ok(coords)
    }

    /// The right-invariant coframe `dg . g^{-1}` expressed in algebra
    /// coordinates.
    pub fn right_maurer_cartan(&self) -> Result<Form> {
        let n = self.chart.dim();
        let k = self.matrix_size();
        let kind = ValueKind::algebra_valued(self.algebra.clone());
        let mut out = Form::zero(self.chart.clone(), 1, kind);
        for j in 0..n {
            let dg_j: FMat = (0..k)
                .map(|r| (0..k).map(|c| self.param[r][c].deriv(j)).collect())
                .collect();
            let mj = f_mat_mul(&dg_j, &self.param_inv);
            let coords = self.rep_coords(&mj)?;
            out.set_term(&[j], coords)?;
        }
        Ok(out)
    }

    /// Adjoint twist `g X g^{-1}` of the parametrized element, as a
    /// matrix of functions acting on algebra coordinates.
    pub fn adjoint_matrix(&self) -> Result<FMat> {
        let n = self.chart.dim();
        let mut out = vec![vec![RF::zero(n); n]; n];
        for a in 0..n {
            let lifted = self.lift_constant(&self.rep[a]);
            let m = f_mat_mul(&f_mat_mul(&self.param, &lifted), &self.param_inv);
            let col = self.rep_coords(&m)?;
            for (b, entry) in col.into_iter().enumerate() {
                out[b][a] = entry;
            }
        }
        Ok(out)
    }

    fn lift_constant(&self, m: &QMat) -> FMat {
        let n = self.chart.dim();
        m.iter()
            .map(|row| row.iter().map(|c| RF::constant(n, c.clone())).collect())
            .collect()
    }

    /// Exact exponential of `t` times an algebra element in the matrix
    /// realization; defined only for nilpotent arguments, where the
    /// series terminates.
    pub fn matrix_exponential(&self, w: &[Rat], t: &Rat) -> Result<QMat> {
        let k = self.matrix_size();
        let mut arg = vec![vec![Rat::zero(); k]; k];
        for (a, c) in w.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let scale = c * t;
            for (row, rrow) in arg.iter_mut().zip(&self.rep[a]) {
                for (x, r) in row.iter_mut().zip(rrow) {
                    *x += r * &scale;
                }
            }
        }
        let mut acc = linalg::identity(k);
        let mut power = linalg::identity(k);
        let mut fact = Rat::one();
        for m in 1..=k {
            power = linalg::mat_mul(&power, &arg);
            if power.iter().all(|row| row.iter().all(|x| x.is_zero())) {
                return Ok(acc);
            }
            fact *= rat(m as i64, 1);
            for (arow, prow) in acc.iter_mut().zip(&power) {
                for (x, p) in arow.iter_mut().zip(prow) {
                    *x += p / &fact;
                }
            }
        }
        Err(Error::Numeric("exact exponential needs a nilpotent argument".into()))
    }

    /// The right-invariant field generated by an algebra element,
    /// expressed in chart coordinates: the unique solution of pushing
    /// `W . g(u)` through the parametrization.
    pub fn right_invariant_field(&self, w: &[Rat]) -> Result<VectorField> {
        let n = self.chart.dim();
        let k = self.matrix_size();
        let mut wmat = vec![vec![Rat::zero(); k]; k];
        for (a, c) in w.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            for (row, rrow) in wmat.iter_mut().zip(&self.rep[a]) {
                for (x, r) in row.iter_mut().zip(rrow) {
                    *x += r * c;
                }
            }
        }
        let wg = f_mat_mul(&self.lift_constant(&wmat), &self.param);
        let jac: FMat = (0..k * k)
            .map(|idx| (0..n).map(|j| self.param[idx / k][idx % k].deriv(j)).collect())
            .collect();
        let b: Vec<RF> = (0..k * k).map(|idx| wg[idx / k][idx % k].clone()).collect();
        let jt: FMat = (0..n).map(|j| jac.iter().map(|row| row[j].clone()).collect()).collect();
        let jtj = f_mat_mul(&jt, &jac);
        let jtb = f_mat_vec(&jt, &b);
        let xdot = linalg::f_solve(&jtj, &jtb)
            .ok_or_else(|| Error::Singular("parametrization moment matrix is singular".into()))?;
        if f_mat_vec(&jac, &xdot) != b {
            return Err(Error::Invalid(
                "generated field does not stay tangent to the parametrized chart".into(),
            ));
        }
        VectorField::new(self.chart.clone(), xdot)
    }

    /// Coordinates of left translation by a fixed group element, as a
    /// rational self-map of the chart.  The recovery entries must
    /// reproduce the translated matrix exactly.
    pub fn left_translation(&self, h0: &QMat) -> Result<RationalMap> {
        let m = f_mat_mul(&self.lift_constant(h0), &self.param);
        let v: Vec<RF> = self.entry_coords.iter().map(|&(r, c)| m[r][c].clone()).collect();
        for (r, row) in self.param.iter().enumerate() {
            for (c, entry) in row.iter().enumerate() {
                if entry.subst(&v)? != m[r][c] {
                    return Err(Error::Invalid(
                        "coordinate recovery fails for the translated parametrization".into(),
                    ));
                }
            }
        }
        RationalMap::new(self.chart.clone(), self.chart.clone(), v)
    }
}

/// Lifts a coset connection form to the group chart: the right-invariant
/// coframe minus the adjoint-twisted pullback along the projection.  The
/// result takes values in the structure subalgebra, reproduces its
/// right-invariant generators, and is equivariant under sampled
/// structure-subgroup translations; each postcondition is checked
/// exactly and a failure is an error, not a warning.
pub fn lift_connection(
    gc: &MatrixGroupChart,
    h: &Subalgebra,
    omega: &ConnectionForm,
    p: &RationalMap,
) -> Result<Form> {
    if p.source() != gc.chart() {
        return Err(Error::ChartMismatch {
            expected: gc.chart().describe(),
            found: p.source().describe(),
        });
    }
    if p.target() != omega.action().chart() {
        return Err(Error::ChartMismatch {
            expected: omega.action().chart().describe(),
            found: p.target().describe(),
        });
    }
    if **omega.action().algebra() != **gc.algebra() {
        return Err(Error::Invalid(
            "coset connection must use the same algebra as the group chart".into(),
        ));
    }
    if h.dim_parent() != gc.algebra().dim() {
        return Err(Error::DimensionMismatch(
            "structure subalgebra lives in a different algebra".into(),
        ));
    }
    let n = gc.chart().dim();
    let kappa = gc.right_maurer_cartan()?;
    let adj = gc.adjoint_matrix()?;
    let pulled = p.pullback(omega.omega())?;
    let twisted = pulled.apply_fn_matrix(&adj, kappa.value_kind().clone())?;
    let tilde = kappa.sub(&twisted)?;
    for (key, vals) in tilde.terms() {
        if !rf_in_rowspace(h.basis(), vals) {
            return Err(Error::ValueMismatch(format!(
                "lifted form leaves the structure subalgebra on coordinate direction {}",
                key[0]
            )));
        }
    }
    for (b, w) in h.basis().iter().enumerate() {
        let field = gc.right_invariant_field(w)?;
        let vals = tilde.value_on_fields(&[&field])?;
        for (a, val) in vals.iter().enumerate() {
            if *val != RF::constant(n, w[a].clone()) {
                return Err(Error::RouteDisagreement(format!(
                    "lifted form fails to reproduce structure generator {b}"
                )));
            }
        }
    }
    for w in h.basis() {
        for t in [rat(1, 1), rat(-1, 2)] {
            let h0 = gc.matrix_exponential(w, &t)?;
            let h0_inv = gc.matrix_exponential(w, &(-t.clone()))?;
            let mu = gc.left_translation(&h0)?;
            for comp in p.components() {
                if comp.subst(mu.components())? != *comp {
                    return Err(Error::Invalid(
                        "projection is not invariant under the sampled structure translation"
                            .into(),
                    ));
                }
            }
            let lhs = mu.pullback(&tilde)?;
            let d = gc.algebra().dim();
            let mut adh = vec![vec![Rat::zero(); d]; d];
            for a in 0..d {
                let m = linalg::mat_mul(&linalg::mat_mul(&h0, &gc.rep[a]), &h0_inv);
                let col = gc.rep_coords(&gc.lift_constant(&m))?;
                for (b2, entry) in col.into_iter().enumerate() {
                    adh[b2][a] = entry.as_constant().ok_or_else(|| {
                        Error::Invalid("constant adjoint twist has nonconstant coordinates".into())
                    })?;
                }
            }
            let rhs = tilde.apply_matrix(&adh, tilde.value_kind().clone())?;
            if lhs != rhs {
                return Err(Error::RouteDisagreement(
                    "sampled equivariance fails for the lifted form".into(),
                ));
            }
        }
    }
    Ok(tilde)
}

/// Certifies the exact curvature relation between a lifted form and the
/// coset curvature: `d w - 1/2 [w, w] = -Ad . p*(Omega)`.
pub fn lifted_curvature_relation(
    gc: &MatrixGroupChart,
    omega: &ConnectionForm,
    p: &RationalMap,
    tilde: &Form,
) -> Result<Certificate> {
    let mut cert = Certificate::new("lifted curvature relation");
    let big = omega.curvature_form()?;
    let adj = gc.adjoint_matrix()?;
    let rhs = p.pullback(&big)?.apply_fn_matrix(&adj, tilde.value_kind().clone())?.neg();
    let half = alg_bracket(tilde, tilde)?.scale_rat(&rat(1, 2));
    let lhs = tilde.exterior_derivative().sub(&half)?;
    cert.exact(
        "curvature of the lift matches the twisted pullback",
        lhs.sub(&rhs)?.is_zero(),
        "two-form residual is nonzero".to_string(),
    );
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::rat_int;

    fn rf(c: &Chart, src: &str) -> RF {
        c.expr(src).unwrap()
    }

    fn vf(c: &Chart, comps: &[&str]) -> VectorField {
        VectorField::new(c.clone(), comps.iter().map(|s| rf(c, s)).collect()).unwrap()
    }

    fn heis3_algebra() -> Arc<LieAlgebra> {
        let e3 = vec![Rat::zero(), Rat::zero(), Rat::one()];
        Arc::new(
            LieAlgebra::from_sparse(
                vec!["e1".into(), "e2".into(), "e3".into()],
                &[(0, 1, e3)],
            )
            .unwrap(),
        )
    }

    fn heis3_matrix_algebra() -> Arc<LieAlgebra> {
        let e3 = vec![Rat::zero(), Rat::zero(), Rat::one()];
        let alg = LieAlgebra::from_sparse(
            vec!["e1".into(), "e2".into(), "e3".into()],
            &[(0, 1, e3)],
        )
        .unwrap();
        let zero = || vec![vec![Rat::zero(); 3]; 3];
        let mut r1 = zero();
        r1[0][1] = Rat::one();
        let mut r2 = zero();
        r2[1][2] = Rat::one();
        let mut r3 = zero();
        r3[0][2] = Rat::one();
        Arc::new(alg.with_matrix_rep(vec![r1, r2, r3]).unwrap())
    }

    fn heis3_action() -> GAction {
        let c = Chart::of(&["x", "y", "z"]);
        GAction::new(
            heis3_algebra(),
            c.clone(),
            vec![vf(&c, &["1", "0", "0"]), vf(&c, &["0", "1", "x"]), vf(&c, &["0", "0", "1"])],
        )
        .unwrap()
    }

    fn sl2_algebra() -> Arc<LieAlgebra> {
        let two_e = vec![Rat::zero(), rat_int(2), Rat::zero()];
        let minus_two_f = vec![Rat::zero(), Rat::zero(), rat_int(-2)];
        let h = vec![Rat::one(), Rat::zero(), Rat::zero()];
        Arc::new(
            LieAlgebra::from_sparse(
                vec!["h".into(), "e".into(), "f".into()],
                &[(0, 1, two_e), (0, 2, minus_two_f), (1, 2, h)],
            )
            .unwrap(),
        )
    }

    fn aff1_algebra() -> Arc<LieAlgebra> {
        let e1 = vec![Rat::one(), Rat::zero()];
        Arc::new(
            LieAlgebra::from_sparse(vec!["e1".into(), "e2".into()], &[(0, 1, e1)]).unwrap(),
        )
    }

    fn aff1_action() -> GAction {
        let c = Chart::of(&["x"]);
        GAction::new(aff1_algebra(), c.clone(), vec![vf(&c, &["1"]), vf(&c, &["x"])]).unwrap()
    }

    fn abelian3_action() -> GAction {
        let c = Chart::of(&["x", "y", "z"]);
        let alg = Arc::new(
            LieAlgebra::from_sparse(vec!["e1".into(), "e2".into(), "e3".into()], &[]).unwrap(),
        );
        GAction::new(
            alg,
            c.clone(),
            vec![vf(&c, &["1", "0", "0"]), vf(&c, &["0", "1", "0"]), vf(&c, &["0", "0", "1"])],
        )
        .unwrap()
    }

    fn heis3_kappa(action: &GAction) -> Form {
        let c = action.chart().clone();
        let kind = ValueKind::algebra_valued(action.algebra().clone());
        let mut k = Form::zero(c.clone(), 1, kind);
        k.set_term(&[0], vec![rf(&c, "1"), rf(&c, "0"), rf(&c, "0")]).unwrap();
        k.set_term(&[1], vec![rf(&c, "0"), rf(&c, "1"), rf(&c, "-x")]).unwrap();
        k.set_term(&[2], vec![rf(&c, "0"), rf(&c, "0"), rf(&c, "1")]).unwrap();
        k
    }

    fn coset_action(alg: Arc<LieAlgebra>) -> GAction {
        let c = Chart::of(&["x", "y"]);
        GAction::new(
            alg,
            c.clone(),
            vec![vf(&c, &["1", "0"]), vf(&c, &["0", "1"]), vf(&c, &["0", "0"])],
        )
        .unwrap()
    }

    fn heisenberg_group_chart() -> MatrixGroupChart {
        let alg = heis3_matrix_algebra();
        let c = Chart::of(&["u1", "u2", "u3"]);
        let param: FMat = vec![
            vec![rf(&c, "1"), rf(&c, "u1"), rf(&c, "u3")],
            vec![rf(&c, "0"), rf(&c, "1"), rf(&c, "u2")],
            vec![rf(&c, "0"), rf(&c, "0"), rf(&c, "1")],
        ];
        let param_inv: FMat = vec![
            vec![rf(&c, "1"), rf(&c, "-u1"), rf(&c, "u1*u2-u3")],
            vec![rf(&c, "0"), rf(&c, "1"), rf(&c, "-u2")],
            vec![rf(&c, "0"), rf(&c, "0"), rf(&c, "1")],
        ];
        MatrixGroupChart::new(
            alg,
            c,
            param,
            param_inv,
            vec![(0, 1), (1, 2), (0, 2)],
            vec![Rat::zero(), Rat::zero(), Rat::zero()],
        )
        .unwrap()
    }

    #[test]
    fn canonical_form_inverts_the_fundamental_matrix() {
        let a = heis3_action();
        let kappa = maurer_cartan_from_action(&a).unwrap();
        assert_eq!(kappa, heis3_kappa(&a));

        let ab = abelian3_action();
        let kab = maurer_cartan_from_action(&ab).unwrap();
        let c = ab.chart().clone();
        let kind = ValueKind::algebra_valued(ab.algebra().clone());
        let mut expected = Form::zero(c.clone(), 1, kind);
        expected.set_term(&[0], vec![rf(&c, "1"), rf(&c, "0"), rf(&c, "0")]).unwrap();
        expected.set_term(&[1], vec![rf(&c, "0"), rf(&c, "1"), rf(&c, "0")]).unwrap();
        expected.set_term(&[2], vec![rf(&c, "0"), rf(&c, "0"), rf(&c, "1")]).unwrap();
        assert_eq!(kab, expected);

        let c1 = Chart::of(&["x"]);
        let sl2 = GAction::new(
            sl2_algebra(),
            c1.clone(),
            vec![vf(&c1, &["-2*x"]), vf(&c1, &["1"]), vf(&c1, &["-x^2"])],
        )
        .unwrap();
        assert!(matches!(
            maurer_cartan_from_action(&sl2),
            Err(Error::DimensionMismatch(_))
        ));

        let c2 = Chart::of(&["x", "y"]);
        let alg2 = Arc::new(
            LieAlgebra::from_sparse(vec!["e1".into(), "e2".into()], &[]).unwrap(),
        );
        let dependent = GAction::new(
            alg2,
            c2.clone(),
            vec![vf(&c2, &["1", "0"]), vf(&c2, &["2", "0"])],
        )
        .unwrap();
        assert!(matches!(maurer_cartan_from_action(&dependent), Err(Error::Singular(_))));
    }

    #[test]
    fn structure_residual_vanishes_iff_inverse_is_homomorphism() {
        let a = heis3_action();
        let kappa = heis3_kappa(&a);
        assert!(mc_residual(&kappa).unwrap().is_zero());
        let back = action_from_maurer_cartan(&kappa).unwrap();
        assert!(back.check_homomorphism().unwrap().passed());

        let c = a.chart().clone();
        let kind = ValueKind::algebra_valued(a.algebra().clone());

        // Third component flattened to an exact differential.
        let mut t1 = kappa.clone();
        t1.set_term(&[1], vec![rf(&c, "0"), rf(&c, "1"), rf(&c, "0")]).unwrap();
        let r1 = mc_residual(&t1).unwrap();
        let mut expected = Form::zero(c.clone(), 2, kind.clone());
        expected.set_term(&[0, 1], vec![rf(&c, "0"), rf(&c, "0"), rf(&c, "1")]).unwrap();
        assert_eq!(r1, expected);
        assert!(!action_from_maurer_cartan(&t1).unwrap().check_homomorphism().unwrap().passed());

        // Shear moved onto the wrong variable.
        let mut t2 = kappa.clone();
        t2.set_term(&[1], vec![rf(&c, "0"), rf(&c, "1"), rf(&c, "-y")]).unwrap();
        assert!(!mc_residual(&t2).unwrap().is_zero());
        assert!(!action_from_maurer_cartan(&t2).unwrap().check_homomorphism().unwrap().passed());

        // First two components swapped.
        let mut t3 = kappa.clone();
        t3.set_term(&[0], vec![rf(&c, "0"), rf(&c, "1"), rf(&c, "0")]).unwrap();
        t3.set_term(&[1], vec![rf(&c, "1"), rf(&c, "0"), rf(&c, "-x")]).unwrap();
        assert!(!mc_residual(&t3).unwrap().is_zero());
        assert!(!action_from_maurer_cartan(&t3).unwrap().check_homomorphism().unwrap().passed());
    }

    #[test]
    fn roundtrip_action_to_coframe_to_action() {
        for action in [heis3_action(), abelian3_action()] {
            let kappa = maurer_cartan_from_action(&action).unwrap();
            let back = action_from_maurer_cartan(&kappa).unwrap();
            assert_eq!(back.fundamentals(), action.fundamentals());
        }
    }

    #[test]
    fn reductive_complement_search_matches_hand_solutions() {
        let aff = aff1_algebra();
        let h = Subalgebra::span(2, &[vec![Rat::zero(), Rat::one()]]).unwrap();
        let dec = find_reductive_complement(&aff, &h, &[Rat::zero()]).unwrap().unwrap();
        assert_eq!(dec.m().basis(), &vec![vec![Rat::one(), Rat::zero()]]);

        let sl2 = sl2_algebra();
        let iso = Subalgebra::span(
            3,
            &[
                vec![Rat::one(), Rat::zero(), Rat::zero()],
                vec![Rat::zero(), Rat::zero(), Rat::one()],
            ],
        )
        .unwrap();
        assert!(find_reductive_complement(&sl2, &iso, &[Rat::zero()]).unwrap().is_none());

        let ab = abelian3_action();
        let h1 = Subalgebra::span(3, &[vec![Rat::one(), Rat::zero(), Rat::zero()]]).unwrap();
        let dec = find_reductive_complement(ab.algebra(), &h1, &vec![Rat::zero(); 3])
            .unwrap()
            .unwrap();
        assert_eq!(dec.m().dim(), 2);
        assert!(dec.m().contains(&[Rat::zero(), Rat::one(), Rat::zero()]));
        assert!(dec.m().contains(&[Rat::zero(), Rat::zero(), Rat::one()]));
    }

    #[test]
    fn complement_invariance_extends_to_nilpotent_exponentials() {
        let alg = heis3_algebra();
        let h = Subalgebra::span(3, &[vec![Rat::one(), Rat::zero(), Rat::zero()]]).unwrap();
        let m = Subalgebra::span(
            3,
            &[
                vec![Rat::zero(), Rat::one(), Rat::zero()],
                vec![Rat::zero(), Rat::zero(), Rat::one()],
            ],
        )
        .unwrap();
        let dec = ReductiveDecomposition::new(&alg, h, m, vec![Rat::zero(); 3]).unwrap();
        let cert = dec.exp_invariance(&alg, &[rat_int(1), rat_int(2), rat_int(-3)]).unwrap();
        assert!(cert.passed());
        assert!(!cert.items.is_empty());
    }

    #[test]
    fn decomposition_rejects_overlapping_or_leaky_parts() {
        let alg = heis3_algebra();
        let h = Subalgebra::span(3, &[vec![Rat::one(), Rat::zero(), Rat::zero()]]).unwrap();
        let overlapping = Subalgebra::span(
            3,
            &[
                vec![Rat::one(), Rat::zero(), Rat::zero()],
                vec![Rat::zero(), Rat::one(), Rat::zero()],
            ],
        )
        .unwrap();
        assert!(ReductiveDecomposition::new(&alg, h, overlapping, vec![Rat::zero(); 3])
            .is_err());
        // In sl2 with h = span(e) and m = span(h, f): [e, f] = h stays in
        // m but [e, h] = -2e leaks out.
        let sl2 = sl2_algebra();
        let he = Subalgebra::span(3, &[vec![Rat::zero(), Rat::one(), Rat::zero()]]).unwrap();
        let mm = Subalgebra::span(
            3,
            &[
                vec![Rat::one(), Rat::zero(), Rat::zero()],
                vec![Rat::zero(), Rat::zero(), Rat::one()],
            ],
        )
        .unwrap();
        assert!(ReductiveDecomposition::new(&sl2, he, mm, vec![Rat::zero()]).is_err());
    }

    #[test]
    fn equivariant_extension_reproduces_hand_connection_forms() {
        // One-dimensional affine patch: the found form is constant.
        let a = aff1_action();
        let data = a.analyze_point(&[Rat::zero()]).unwrap();
        let dec =
            find_reductive_complement(a.algebra(), &data.isotropy, &[Rat::zero()]).unwrap().unwrap();
        let omc = connection_form_from_reductive(&a, &dec, &AnsatzSettings::default()).unwrap();
        let c = a.chart().clone();
        let kind = ValueKind::algebra_valued(a.algebra().clone());
        let mut expected = Form::zero(c.clone(), 1, kind);
        expected.set_term(&[0], vec![rf(&c, "1"), rf(&c, "0")]).unwrap();
        assert_eq!(*omc.omega(), expected);
        assert!(omc.verify().unwrap().passed());

        // Free transitive case: the extension is the canonical coframe.
        let h = heis3_action();
        let free_dec = find_reductive_complement(h.algebra(), &Subalgebra::zero(3), &[
            Rat::zero(),
            Rat::zero(),
            Rat::zero(),
        ])
        .unwrap()
        .unwrap();
        let omc =
            connection_form_from_reductive(&h, &free_dec, &AnsatzSettings { max_degree: 2 })
                .unwrap();
        assert_eq!(*omc.omega(), heis3_kappa(&h));
    }

    #[test]
    fn coset_extension_matches_two_variable_form() {
        let alg = heis3_algebra();
        let a = coset_action(alg.clone());
        let data = a.analyze_point(&[Rat::zero(), Rat::zero()]).unwrap();
        assert_eq!(data.isotropy.dim(), 1);
        let dec = find_reductive_complement(&alg, &data.isotropy, &[Rat::zero(), Rat::zero()])
            .unwrap()
            .unwrap();
        let omc =
            connection_form_from_reductive(&a, &dec, &AnsatzSettings { max_degree: 2 }).unwrap();
        let c = a.chart().clone();
        let kind = ValueKind::algebra_valued(alg.clone());
        let mut expected = Form::zero(c.clone(), 1, kind);
        expected.set_term(&[0], vec![rf(&c, "1"), rf(&c, "0"), rf(&c, "y")]).unwrap();
        expected.set_term(&[1], vec![rf(&c, "0"), rf(&c, "1"), rf(&c, "-x")]).unwrap();
        assert_eq!(*omc.omega(), expected);
    }

    #[test]
    fn extension_rejects_mismatched_isotropy() {
        let alg = heis3_algebra();
        let a = coset_action(alg.clone());
        let dec = ReductiveDecomposition::new(
            &alg,
            Subalgebra::zero(3),
            Subalgebra::full(3),
            vec![Rat::zero(), Rat::zero()],
        )
        .unwrap();
        assert!(matches!(
            connection_form_from_reductive(&a, &dec, &AnsatzSettings::default()),
            Err(Error::Invalid(_))
        ));
    }

    #[test]
    fn matrix_chart_validates_and_produces_invariant_data() {
        let gc = heisenberg_group_chart();
        let c = gc.chart().clone();
        let kappa = gc.right_maurer_cartan().unwrap();
        let kind = ValueKind::algebra_valued(gc.algebra().clone());
        let mut expected = Form::zero(c.clone(), 1, kind);
        expected.set_term(&[0], vec![rf(&c, "1"), rf(&c, "0"), rf(&c, "-u2")]).unwrap();
        expected.set_term(&[1], vec![rf(&c, "0"), rf(&c, "1"), rf(&c, "0")]).unwrap();
        expected.set_term(&[2], vec![rf(&c, "0"), rf(&c, "0"), rf(&c, "1")]).unwrap();
        assert_eq!(kappa, expected);

        let x1 = gc.right_invariant_field(&[Rat::one(), Rat::zero(), Rat::zero()]).unwrap();
        assert_eq!(x1, vf(&c, &["1", "0", "u2"]));
        let x3 = gc.right_invariant_field(&[Rat::zero(), Rat::zero(), Rat::one()]).unwrap();
        assert_eq!(x3, vf(&c, &["0", "0", "1"]));

        // A broken inverse is rejected up front.
        let bad_inv: FMat = vec![
            vec![rf(&c, "1"), rf(&c, "-u1"), rf(&c, "-u3")],
            vec![rf(&c, "0"), rf(&c, "1"), rf(&c, "-u2")],
            vec![rf(&c, "0"), rf(&c, "0"), rf(&c, "1")],
        ];
        assert!(MatrixGroupChart::new(
            gc.algebra().clone(),
            c.clone(),
            gc.param().clone(),
            bad_inv,
            vec![(0, 1), (1, 2), (0, 2)],
            vec![Rat::zero(); 3],
        )
        .is_err());
    }

    #[test]
    fn lifted_form_matches_hand_computation() {
        let alg = heis3_matrix_algebra();
        let gc = heisenberg_group_chart();
        let a = coset_action(alg.clone());
        let cc = a.chart().clone();
        let kind = ValueKind::algebra_valued(alg.clone());
        let mut omega = Form::zero(cc.clone(), 1, kind.clone());
        omega.set_term(&[0], vec![rf(&cc, "1"), rf(&cc, "0"), rf(&cc, "y")]).unwrap();
        omega.set_term(&[1], vec![rf(&cc, "0"), rf(&cc, "1"), rf(&cc, "-x")]).unwrap();
        let omc = ConnectionForm::new(a, omega).unwrap();
        let gcc = gc.chart().clone();
        let p = RationalMap::new(gcc.clone(), cc.clone(), vec![rf(&gcc, "u1"), rf(&gcc, "u2")])
            .unwrap();
        let h = Subalgebra::span(3, &[vec![Rat::zero(), Rat::zero(), Rat::one()]]).unwrap();
        let tilde = lift_connection(&gc, &h, &omc, &p).unwrap();
        let kind_g = ValueKind::algebra_valued(gc.algebra().clone());
        let mut expected = Form::zero(gcc.clone(), 1, kind_g);
        expected.set_term(&[0], vec![rf(&gcc, "0"), rf(&gcc, "0"), rf(&gcc, "-u2")]).unwrap();
        expected.set_term(&[2], vec![rf(&gcc, "0"), rf(&gcc, "0"), rf(&gcc, "1")]).unwrap();
        assert_eq!(tilde, expected);

        let cert = lifted_curvature_relation(&gc, &omc, &p, &tilde).unwrap();
        assert!(cert.passed(), "{}", cert.summary());
    }

    #[test]
    fn trivial_subgroup_lift_vanishes() {
        let alg = heis3_matrix_algebra();
        let gc = heisenberg_group_chart();
        let c = gc.chart().clone();
        let action = GAction::new(
            alg.clone(),
            c.clone(),
            vec![vf(&c, &["1", "0", "0"]), vf(&c, &["0", "1", "u1"]), vf(&c, &["0", "0", "1"])],
        )
        .unwrap();
        let kappa = maurer_cartan_from_action(&action).unwrap();
        let omc = ConnectionForm::new(action, kappa).unwrap();
        let p = RationalMap::new(
            c.clone(),
            c.clone(),
            vec![rf(&c, "u1"), rf(&c, "u2"), rf(&c, "u3")],
        )
        .unwrap();
        let tilde = lift_connection(&gc, &Subalgebra::zero(3), &omc, &p).unwrap();
        assert!(tilde.is_zero());

        let cert = lifted_curvature_relation(&gc, &omc, &p, &tilde).unwrap();
        assert!(cert.passed(), "{}", cert.summary());
    }

    #[test]
    fn lift_rejects_values_outside_the_structure_subalgebra() {
        let alg = heis3_matrix_algebra();
        let gc = heisenberg_group_chart();
        let a = coset_action(alg.clone());
        let cc = a.chart().clone();
        let kind = ValueKind::algebra_valued(alg.clone());
        let mut omega = Form::zero(cc.clone(), 1, kind);
        omega.set_term(&[0], vec![rf(&cc, "1"), rf(&cc, "0"), rf(&cc, "y")]).unwrap();
        omega.set_term(&[1], vec![rf(&cc, "0"), rf(&cc, "1"), rf(&cc, "-x")]).unwrap();
        let omc = ConnectionForm::new(a, omega).unwrap();
        let gcc = gc.chart().clone();
        let p = RationalMap::new(gcc.clone(), cc.clone(), vec![rf(&gcc, "u1"), rf(&gcc, "u2")])
            .unwrap();
        // Structure subalgebra declared too small: the honest lift values
        // land in span(e3), so claiming span(e2) must fail loudly.
        let wrong = Subalgebra::span(3, &[vec![Rat::zero(), Rat::one(), Rat::zero()]]).unwrap();
        assert!(matches!(
            lift_connection(&gc, &wrong, &omc, &p),
            Err(Error::ValueMismatch(_))
        ));
    }
}
