//! Ready-made example data shared by integration tests and the bundled
//! scenario files: a nilpotent action, a rank-one projective action, an
//! affine action, plane rotations, vertical translations, a shear
//! bundle, and the upper-triangular matrix group chart with its plane
//! coset.
//!
//! Every builder returns validated data; the constructions are constants,
//! so construction failures are programming errors and panic.

use std::sync::Arc;

use num::Zero;

use crate::action::GAction;
use crate::chart::Chart;
use crate::connection::{ConnectionForm, LocalBundle};
use crate::form::{Form, RationalMap, ValueKind, VectorField};
use crate::homogeneous::MatrixGroupChart;
use crate::lie::{LieAlgebra, Subalgebra};
use crate::linalg::{QMat, QVec};
use crate::poly::{rat_int, Rat};
use crate::ratfunc::RF;

fn rf(c: &Chart, src: &str) -> RF {
    c.expr(src).expect("fixture expression parses")
}

fn vf(c: &Chart, comps: &[&str]) -> VectorField {
    VectorField::new(c.clone(), comps.iter().map(|s| rf(c, s)).collect())
        .expect("fixture field is well-formed")
}

fn qvec(entries: &[i64]) -> QVec {
    entries.iter().map(|&n| rat_int(n)).collect()
}

fn qmat(entries: &[&[i64]]) -> QMat {
    entries.iter().map(|row| qvec(row)).collect()
}

/// Three-dimensional nilpotent algebra `[e1, e2] = e3`, carrying its
/// strictly-upper-triangular 3x3 realization.
pub fn heisenberg_algebra() -> Arc<LieAlgebra> {
    let alg = LieAlgebra::from_sparse(
        vec!["e1".into(), "e2".into(), "e3".into()],
        &[(0, 1, qvec(&[0, 0, 1]))],
    )
    .expect("structure table is antisymmetric");
    let rep = vec![
        qmat(&[&[0, 1, 0], &[0, 0, 0], &[0, 0, 0]]),
        qmat(&[&[0, 0, 0], &[0, 0, 1], &[0, 0, 0]]),
        qmat(&[&[0, 0, 1], &[0, 0, 0], &[0, 0, 0]]),
    ];
    Arc::new(alg.with_matrix_rep(rep).expect("realization matches the brackets"))
}

/// Free transitive nilpotent action on the 3-space: `∂x`, `∂y + x ∂z`,
/// `∂z`.
pub fn heisenberg3() -> GAction {
    let c = Chart::of(&["x", "y", "z"]);
    GAction::new(
        heisenberg_algebra(),
        c.clone(),
        vec![vf(&c, &["1", "0", "0"]), vf(&c, &["0", "1", "x"]), vf(&c, &["0", "0", "1"])],
    )
    .expect("fundamental fields live on the chart")
}

/// Canonical coframe of [`heisenberg3`]: the algebra-valued 1-form
/// inverting the fundamental fields, `e1 ⊗ dx + e2 ⊗ dy + e3 ⊗ (dz − x dy)`.
pub fn heisenberg_kappa() -> Form {
    let a = heisenberg3();
    let c = a.chart().clone();
    let kind = ValueKind::algebra_valued(a.algebra().clone());
    let mut k = Form::zero(c.clone(), 1, kind);
    k.set_term(&[0], vec![rf(&c, "1"), rf(&c, "0"), rf(&c, "0")]).unwrap();
    k.set_term(&[1], vec![rf(&c, "0"), rf(&c, "1"), rf(&c, "-x")]).unwrap();
    k.set_term(&[2], vec![rf(&c, "0"), rf(&c, "0"), rf(&c, "1")]).unwrap();
    k
}

/// The split three-dimensional simple algebra `[h,e] = 2e, [h,f] = −2f,
/// [e,f] = h` acting on the line by `−2x ∂x`, `∂x`, `−x² ∂x`, carrying
/// its standard 2x2 realization.
pub fn sl2_line() -> GAction {
    let alg = LieAlgebra::from_sparse(
        vec!["h".into(), "e".into(), "f".into()],
        &[
            (0, 1, qvec(&[0, 2, 0])),
            (0, 2, qvec(&[0, 0, -2])),
            (1, 2, qvec(&[1, 0, 0])),
        ],
    )
    .expect("structure table is antisymmetric");
    let rep = vec![
        qmat(&[&[1, 0], &[0, -1]]),
        qmat(&[&[0, 1], &[0, 0]]),
        qmat(&[&[0, 0], &[1, 0]]),
    ];
    let alg = Arc::new(alg.with_matrix_rep(rep).expect("realization matches the brackets"));
    let c = Chart::of(&["x"]);
    GAction::new(
        alg,
        c.clone(),
        vec![vf(&c, &["-2*x"]), vf(&c, &["1"]), vf(&c, &["-x^2"])],
    )
    .expect("fundamental fields live on the chart")
}

/// The affine line algebra `[e1, e2] = e1` acting by `∂x`, `x ∂x`.
pub fn affine_line() -> GAction {
    let alg = Arc::new(
        LieAlgebra::from_sparse(
            vec!["e1".into(), "e2".into()],
            &[(0, 1, qvec(&[1, 0]))],
        )
        .expect("structure table is antisymmetric"),
    );
    let c = Chart::of(&["x"]);
    GAction::new(alg, c.clone(), vec![vf(&c, &["1"]), vf(&c, &["x"])])
        .expect("fundamental fields live on the chart")
}

/// One-dimensional rotation action `−y ∂x + x ∂y` on the punctured
/// plane (origin excluded by the locus `x² + y²`).
pub fn plane_rotations() -> GAction {
    let alg = Arc::new(LieAlgebra::from_sparse(vec!["r".into()], &[]).unwrap());
    let locus = Chart::of(&["x", "y"]).expr("x^2+y^2").unwrap();
    let c = Chart::with_excluded(vec!["x".into(), "y".into()], vec![locus])
        .expect("locus is a valid expression");
    GAction::new(alg, c.clone(), vec![vf(&c, &["-y", "x"])])
        .expect("fundamental fields live on the chart")
}

/// One-dimensional translation action `∂z` on the 3-space.
pub fn vertical_translations() -> GAction {
    let alg = Arc::new(LieAlgebra::from_sparse(vec!["e1".into()], &[]).unwrap());
    let c = Chart::of(&["x", "y", "z"]);
    GAction::new(alg, c.clone(), vec![vf(&c, &["0", "0", "1"])])
        .expect("fundamental fields live on the chart")
}

/// The curved connection form `e1 ⊗ (dz − y dx)` on
/// [`vertical_translations`]: reproduces the generator, with curvature
/// `e1 ⊗ dx∧dy`.
pub fn translation_connection() -> ConnectionForm {
    let a = vertical_translations();
    let c = a.chart().clone();
    let mut omega = Form::zero(c.clone(), 1, ValueKind::vector(1));
    omega.set_term(&[0], vec![rf(&c, "-y")]).unwrap();
    omega.set_term(&[2], vec![rf(&c, "1")]).unwrap();
    ConnectionForm::new(a, omega).expect("the form reproduces the generator")
}

/// Trivial line bundle over the plane with the shear Christoffel form
/// `−y dx ⊗ ∂s`: curvature `dx∧dy ⊗ ∂s`, unit holonomy density.
pub fn shear_bundle() -> LocalBundle {
    let base = Chart::of(&["x", "y"]);
    let fiber = Chart::of(&["s"]);
    let alg = Arc::new(LieAlgebra::from_sparse(vec!["v".into()], &[]).unwrap());
    let action = GAction::new(alg, fiber.clone(), vec![vf(&fiber, &["1"])])
        .expect("fiber translation is well-formed");
    let product = LocalBundle::product_chart_of(&base, &fiber).unwrap();
    let mut gamma = Form::zero(product.clone(), 1, ValueKind::vector(1));
    gamma.set_term(&[0], vec![rf(&product, "-y")]).unwrap();
    LocalBundle::new(base, action, gamma).expect("Christoffel data is fiber-invariant")
}

/// Upper-triangular unipotent group chart `(u1, u2, u3) ↦
/// [[1, u1, u3], [0, 1, u2], [0, 0, 1]]` over [`heisenberg_algebra`].
pub fn heisenberg_group_chart() -> MatrixGroupChart {
    let alg = heisenberg_algebra();
    let c = Chart::of(&["u1", "u2", "u3"]);
    let param = vec![
        vec![rf(&c, "1"), rf(&c, "u1"), rf(&c, "u3")],
        vec![rf(&c, "0"), rf(&c, "1"), rf(&c, "u2")],
        vec![rf(&c, "0"), rf(&c, "0"), rf(&c, "1")],
    ];
    let param_inv = vec![
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
    .expect("parametrization inverts exactly")
}

/// Plane coset data for the unipotent group: the nilpotent algebra acts
/// on the plane through its quotient, with an invariant connection form
/// and the coordinate projection from the group chart.
pub struct PlaneCoset {
    /// `e1 ↦ ∂x, e2 ↦ ∂y, e3 ↦ 0` on the plane.
    pub action: GAction,
    /// `e1 ⊗ dx + e2 ⊗ dy + e3 ⊗ (y dx − x dy)`.
    pub connection: ConnectionForm,
    /// `(u1, u2, u3) ↦ (u1, u2)` from the group chart.
    pub projection: RationalMap,
    /// The isotropy of the plane action: the center `span(e3)`.
    pub isotropy: Subalgebra,
}

/// The plane coset fixture for [`heisenberg_group_chart`].
pub fn heisenberg_plane_coset() -> PlaneCoset {
    let alg = heisenberg_algebra();
    let c = Chart::of(&["x", "y"]);
    let action = GAction::new(
        alg.clone(),
        c.clone(),
        vec![vf(&c, &["1", "0"]), vf(&c, &["0", "1"]), vf(&c, &["0", "0"])],
    )
    .expect("fundamental fields live on the chart");
    let kind = ValueKind::algebra_valued(alg);
    let mut omega = Form::zero(c.clone(), 1, kind);
    omega.set_term(&[0], vec![rf(&c, "1"), rf(&c, "0"), rf(&c, "y")]).unwrap();
    omega.set_term(&[1], vec![rf(&c, "0"), rf(&c, "1"), rf(&c, "-x")]).unwrap();
    let connection =
        ConnectionForm::new(action.clone(), omega).expect("the form reproduces the generators");
    let gc = heisenberg_group_chart();
    let gchart = gc.chart().clone();
    let projection = RationalMap::new(gchart.clone(), c, vec![rf(&gchart, "u1"), rf(&gchart, "u2")])
        .expect("projection components live on the group chart");
    let isotropy = Subalgebra::span(3, &[qvec(&[0, 0, 1])]).unwrap();
    PlaneCoset { action, connection, projection, isotropy }
}
