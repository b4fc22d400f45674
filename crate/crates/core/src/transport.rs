//! The numeric layer: flows of vector fields, composite flow words,
//! adjoint transport along flows, curve lifting into the algebra, group
//! developing of curves, horizontal lifts, parallel transport, and
//! holonomy measurements.
//!
//! Numerical conventions, pinned for reproducibility: integration is
//! fixed-step fourth-order Runge–Kutta with a step-halving consistency
//! check (the halved run must agree to a declared relative tolerance,
//! and the finer endpoint is returned); piecewise curves are integrated
//! piece by piece so steps never straddle a breakpoint, which keeps the
//! integrator exact on piecewise-polynomial data of low degree; tangent
//! maps of numeric flows use central differences with step `1e-5`;
//! least-squares curve lifting uses exact rational arithmetic (the
//! minimal-norm solution for the standard inner product on the algebra)
//! and only then converts to floating point.  Holonomy displacements are
//! oriented by forward integration around the declared loop; the tests
//! pin the resulting sign on a counterclockwise square.  Convergence
//! orders are measured only when errors sit above `ERROR_FLOOR`; exact
//! cases report errors below the floor instead of a fake order.

use std::collections::BTreeMap;

use num::{One, Zero};

use crate::action::GAction;
use crate::cert::Certificate;
use crate::chart::Chart;
use crate::connection::LocalBundle;
use crate::error::{Error, Result};
use crate::form::VectorField;
use crate::homogeneous::MatrixGroupChart;
use crate::linalg::{self, QMat, QVec};
use crate::poly::{rat, rat_to_f64, Rat};
use crate::ratfunc::RF;

/// Step-size and verification policy for all integrators in this module.
#[derive(Clone, Debug, PartialEq)]
pub struct OdeSettings {
    /// Fixed steps per unit of integration time (at least one step is
    /// always taken).
    pub steps_per_unit_time: usize,
    /// When set, every integration is repeated with doubled step count
    /// and the two endpoints must agree to `richardson_tol`.
    pub richardson_check: bool,
    /// Relative agreement required between a run and its halved-step run.
    pub richardson_tol: f64,
}

impl Default for OdeSettings {
    fn default() -> Self {
        OdeSettings { steps_per_unit_time: 1000, richardson_check: true, richardson_tol: 1e-6 }
    }
}

/// Residual bound used by the group developing map when inverting the
/// fundamental-field matrix along the curve.
pub const LIFT_RESIDUAL_TOL: f64 = 1e-8;

/// Displacement magnitudes below this floor count as exactly reproduced;
/// convergence orders are only measured above it.
pub const ERROR_FLOOR: f64 = 1e-9;

const TANGENT_STEP: f64 = 1e-5;

/// A composite of fundamental-field flows: the letters are applied in
/// order, each flowing for its own time.  An empty word is the identity.
#[derive(Clone, Debug, Default)]
pub struct Word {
    pub letters: Vec<(QVec, f64)>,
}

impl Word {
    pub fn new(letters: Vec<(QVec, f64)>) -> Self {
        Word { letters }
    }

    pub fn empty() -> Self {
        Word { letters: Vec::new() }
    }
}

/// A curve on the unit interval with piecewise rational-function
/// components: strictly increasing breakpoints from 0 to 1, one list of
/// component functions of the single parameter per piece, continuity
/// required exactly at every interior breakpoint.  Derivatives are exact
/// per piece; corners are allowed.
#[derive(Clone, Debug)]
pub struct CurveSpec {
    target: Chart,
    breakpoints: Vec<Rat>,
    pieces: Vec<Vec<RF>>,
    derivs: Vec<Vec<RF>>,
}

impl CurveSpec {
    pub fn new(target: Chart, breakpoints: Vec<Rat>, pieces: Vec<Vec<RF>>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::Invalid("a curve needs at least the two endpoints 0 and 1".into()));
        }
        if breakpoints[0] != Rat::zero() || breakpoints[breakpoints.len() - 1] != Rat::one() {
            return Err(Error::Invalid("curve breakpoints must run from 0 to 1".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid("curve breakpoints must increase strictly".into()));
        }
        if pieces.len() + 1 != breakpoints.len() {
            return Err(Error::Invalid("one curve piece per breakpoint interval".into()));
        }
        for piece in &pieces {
            if piece.len() != target.dim() {
                return Err(Error::DimensionMismatch(
                    "each curve piece needs one component per chart variable".into(),
                ));
            }
            for comp in piece {
                if comp.nvars() != 1 {
                    return Err(Error::Invalid(
                        "curve components are functions of one parameter".into(),
                    ));
                }
            }
        }
        for (i, w) in breakpoints.windows(2).enumerate().skip(1) {
            let t = &w[0];
            for (a, b) in pieces[i - 1].iter().zip(&pieces[i]) {
                if a.eval_rat(std::slice::from_ref(t))? != b.eval_rat(std::slice::from_ref(t))? {
                    return Err(Error::Invalid(format!(
                        "curve is discontinuous at breakpoint {t}"
                    )));
                }
            }
        }
        let derivs = pieces
            .iter()
            .map(|piece| piece.iter().map(|c| c.deriv(0)).collect())
            .collect();
        Ok(CurveSpec { target, breakpoints, pieces, derivs })
    }

    /// A single-piece curve given by component functions on [0, 1].
    pub fn polynomial(target: Chart, comps: Vec<RF>) -> Result<Self> {
        CurveSpec::new(target, vec![Rat::zero(), Rat::one()], vec![comps])
    }

    /// The piecewise-linear curve through the given points, with equally
    /// spaced breakpoints.
    pub fn segments(target: Chart, points: &[Vec<Rat>]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Invalid("a segment curve needs at least two points".into()));
        }
        let m = points.len() - 1;
        let breakpoints: Vec<Rat> = (0..=m).map(|j| rat(j as i64, m as i64)).collect();
        let tvar = RF::var(1, 0);
        let mut pieces = Vec::with_capacity(m);
        for j in 0..m {
            if points[j].len() != target.dim() || points[j + 1].len() != target.dim() {
                return Err(Error::DimensionMismatch("segment point arity".into()));
            }
            let speed = rat(m as i64, 1);
            let piece: Vec<RF> = (0..target.dim())
                .map(|i| {
                    let slope = (&points[j + 1][i] - &points[j][i]) * &speed;
                    let start = &points[j][i] - &breakpoints[j] * &slope;
                    tvar.scale(&slope).add(&RF::constant(1, start))
                })
                .collect();
            pieces.push(piece);
        }
        CurveSpec::new(target, breakpoints, pieces)
    }

    pub fn target(&self) -> &Chart {
        &self.target
    }

    pub fn breakpoints(&self) -> &[Rat] {
        &self.breakpoints
    }

    pub fn is_closed(&self) -> Result<bool> {
        Ok(self.value_rat(&Rat::zero())? == self.value_rat(&Rat::one())?)
    }

    fn piece_for(&self, t: &Rat) -> Result<usize> {
        if *t < self.breakpoints[0] || *t > self.breakpoints[self.breakpoints.len() - 1] {
            return Err(Error::Invalid(format!("curve parameter {t} outside [0, 1]")));
        }
        let mut i = 0;
        while i + 2 < self.breakpoints.len() && *t >= self.breakpoints[i + 1] {
            i += 1;
        }
        Ok(i)
    }

    pub fn value_rat(&self, t: &Rat) -> Result<Vec<Rat>> {
        let i = self.piece_for(t)?;
        self.value_rat_piece(i, t)
    }

    pub fn deriv_rat(&self, t: &Rat) -> Result<Vec<Rat>> {
        let i = self.piece_for(t)?;
        self.deriv_rat_piece(i, t)
    }

    fn value_rat_piece(&self, i: usize, t: &Rat) -> Result<Vec<Rat>> {
        self.pieces[i].iter().map(|c| c.eval_rat(std::slice::from_ref(t))).collect()
    }

    /// One-sided derivative taken from a specific piece: at a breakpoint
    /// the limits from the two sides may differ (corners are allowed).
    fn deriv_rat_piece(&self, i: usize, t: &Rat) -> Result<Vec<Rat>> {
        self.derivs[i].iter().map(|c| c.eval_rat(std::slice::from_ref(t))).collect()
    }

    /// Reparametrizes a single-piece curve by an endpoint-preserving map
    /// of [0, 1]; the caller is responsible for monotonicity.
    pub fn reparametrize(&self, f: &RF) -> Result<CurveSpec> {
        if self.pieces.len() != 1 {
            return Err(Error::Invalid(
                "reparametrization is supported for single-piece curves".into(),
            ));
        }
        if f.nvars() != 1 {
            return Err(Error::Invalid("reparametrization map takes one parameter".into()));
        }
        if f.eval_rat(&[Rat::zero()])? != Rat::zero() || f.eval_rat(&[Rat::one()])? != Rat::one()
        {
            return Err(Error::Invalid("reparametrization must fix the endpoints".into()));
        }
        let comps: Vec<RF> = self.pieces[0]
            .iter()
            .map(|c| c.subst(std::slice::from_ref(f)))
            .collect::<Result<_>>()?;
        CurveSpec::polynomial(self.target.clone(), comps)
    }
}

/// The counterclockwise coordinate square with the given corner and side,
/// traversed along `axes.0` first.
pub fn square_loop(chart: &Chart, corner: &[Rat], side: &Rat, axes: (usize, usize)) -> Result<CurveSpec> {
    if corner.len() != chart.dim() {
        return Err(Error::DimensionMismatch("square corner arity".into()));
    }
    if axes.0 >= chart.dim() || axes.1 >= chart.dim() || axes.0 == axes.1 {
        return Err(Error::Invalid("square axes must be two distinct chart directions".into()));
    }
    let p0 = corner.to_vec();
    let mut p1 = corner.to_vec();
    p1[axes.0] += side;
    let mut p2 = p1.clone();
    p2[axes.1] += side;
    let mut p3 = corner.to_vec();
    p3[axes.1] += side;
    CurveSpec::segments(chart.clone(), &[p0.clone(), p1, p2, p3, p0])
}

fn assert_finite(x: &[f64]) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(
            "trajectory left the chart: coordinates are no longer finite".into(),
        ));
    }
    Ok(())
}

fn rk4_integrate<F>(f: &F, t0: f64, t1: f64, x0: &[f64], steps: usize) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>>,
{
    let h = (t1 - t0) / steps as f64;
    let dim = x0.len();
    let mut x = x0.to_vec();
    let mut scratch = vec![0.0; dim];
    for k in 0..steps {
        let t = t0 + h * k as f64;
        let k1 = f(t, &x)?;
        for i in 0..dim {
            scratch[i] = x[i] + 0.5 * h * k1[i];
        }
        let k2 = f(t + 0.5 * h, &scratch)?;
        for i in 0..dim {
            scratch[i] = x[i] + 0.5 * h * k2[i];
        }
        let k3 = f(t + 0.5 * h, &scratch)?;
        for i in 0..dim {
            scratch[i] = x[i] + h * k3[i];
        }
        let k4 = f(t + h, &scratch)?;
        for i in 0..dim {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        assert_finite(&x)?;
    }
    Ok(x)
}

fn steps_for(span: f64, s: &OdeSettings) -> usize {
    ((span.abs() * s.steps_per_unit_time as f64).ceil() as usize).max(1)
}

fn rel_disc(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / f64::max(1.0, y.abs()))
        .fold(0.0, f64::max)
}

fn rk4_checked<F>(f: &F, t0: f64, t1: f64, x0: &[f64], s: &OdeSettings) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>>,
{
    let n = steps_for(t1 - t0, s);
    let coarse = rk4_integrate(f, t0, t1, x0, n)?;
    if !s.richardson_check {
        return Ok(coarse);
    }
    let fine = rk4_integrate(f, t0, t1, x0, 2 * n)?;
    let disc = rel_disc(&coarse, &fine);
    if disc >= s.richardson_tol {
        return Err(Error::Numeric(format!(
            "step-halving disagreement {disc:.3e} exceeds tolerance {:.3e}",
            s.richardson_tol
        )));
    }
    Ok(fine)
}

/// Endpoint of the flow of a vector field from `x0` over time `t`.
pub fn flow(xi: &VectorField, x0: &[f64], t: f64, s: &OdeSettings) -> Result<Vec<f64>> {
    if x0.len() != xi.chart().dim() {
        return Err(Error::DimensionMismatch("flow start point arity".into()));
    }
    let f = |_t: f64, x: &[f64]| xi.eval_f64(x);
    rk4_checked(&f, 0.0, t, x0, s)
}

/// Applies a word of fundamental-field flows in order.
pub fn word_apply(action: &GAction, w: &Word, x0: &[f64], s: &OdeSettings) -> Result<Vec<f64>> {
    let mut x = x0.to_vec();
    for (gvec, t) in &w.letters {
        if gvec.len() != action.algebra().dim() {
            return Err(Error::DimensionMismatch("word letter arity".into()));
        }
        let field = action.zeta(gvec);
        x = flow(&field, &x, *t, s)?;
    }
    Ok(x)
}

fn zeta_numeric(action: &GAction, coeffs: &[f64], p: &[f64]) -> Result<Vec<f64>> {
    let n = action.chart().dim();
    let mut out = vec![0.0; n];
    for (a, c) in coeffs.iter().enumerate() {
        if *c == 0.0 {
            continue;
        }
        let v = action.fundamental(a).eval_f64(p)?;
        for (o, vi) in out.iter_mut().zip(&v) {
            *o += c * vi;
        }
    }
    Ok(out)
}

/// Compares the pullback of a fundamental field along a flow against the
/// exponential-adjoint prediction, probe point by probe point: the
/// tangent map of the backward flow is applied by central differences to
/// the field at the forward image, and the result must match the field
/// of the adjoint-transported algebra element to the given relative
/// tolerance.
pub fn ad_via_flow(
    action: &GAction,
    x: &QVec,
    y: &QVec,
    t: &Rat,
    probes: &[Vec<f64>],
    tol: f64,
    s: &OdeSettings,
) -> Result<Certificate> {
    let d = action.algebra().dim();
    if x.len() != d || y.len() != d {
        return Err(Error::DimensionMismatch("algebra vector arity".into()));
    }
    let zeta_x = action.zeta(x);
    let zeta_y = action.zeta(y);
    let transported = action.algebra().exp_ad_apply(x, t, y).to_f64();
    let tf = rat_to_f64(t);
    let mut cert = Certificate::new("adjoint transport along the flow");
    for (pi, p) in probes.iter().enumerate() {
        let q = flow(&zeta_x, p, tf, s)?;
        let v = zeta_y.eval_f64(&q)?;
        let mut plus = q.clone();
        let mut minus = q.clone();
        for i in 0..q.len() {
            plus[i] += TANGENT_STEP * v[i];
            minus[i] -= TANGENT_STEP * v[i];
        }
        let back_plus = flow(&zeta_x, &plus, -tf, s)?;
        let back_minus = flow(&zeta_x, &minus, -tf, s)?;
        let lhs: Vec<f64> = back_plus
            .iter()
            .zip(&back_minus)
            .map(|(a, b)| (a - b) / (2.0 * TANGENT_STEP))
            .collect();
        let rhs = zeta_numeric(action, &transported, p)?;
        let scale = rhs.iter().fold(1.0f64, |m, r| m.max(r.abs()));
        let err = lhs
            .iter()
            .zip(&rhs)
            .map(|(a, b)| (a - b).abs() / scale)
            .fold(0.0, f64::max);
        cert.push(
            format!("probe {pi}"),
            err < tol,
            format!("relative error {err:.3e} against tolerance {tol:.1e}"),
        );
    }
    Ok(cert)
}

/// Minimal-norm exact least-squares solution of `Z b = v` for the
/// fundamental-field matrix `Z` at the curve point, together with the
/// exact residual `Z b - v`.
pub fn lift_curve_at(action: &GAction, c: &CurveSpec, t: &Rat) -> Result<(QVec, QVec)> {
    let piece = c.piece_for(t)?;
    lift_curve_at_piece(action, c, piece, t)
}

/// Piece-aware variant: at a corner the velocity depends on which side
/// the integrator is coming from.
fn lift_curve_at_piece(
    action: &GAction,
    c: &CurveSpec,
    piece: usize,
    t: &Rat,
) -> Result<(QVec, QVec)> {
    if c.target() != action.chart() {
        return Err(Error::ChartMismatch {
            expected: action.chart().describe(),
            found: c.target().describe(),
        });
    }
    let p = c.value_rat_piece(piece, t)?;
    let v = c.deriv_rat_piece(piece, t)?;
    let n = action.chart().dim();
    let d = action.algebra().dim();
    let z: QMat = (0..n)
        .map(|j| {
            (0..d)
                .map(|i| action.fundamental(i).components()[j].eval_rat(&p))
                .collect::<Result<Vec<Rat>>>()
        })
        .collect::<Result<QMat>>()?;
    let b = pseudo_solve(&z, &v);
    let residual: QVec = (0..n)
        .map(|j| {
            let mut acc = -v[j].clone();
            for i in 0..d {
                acc += &z[j][i] * &b[i];
            }
            acc
        })
        .collect();
    Ok((b, residual))
}

/// Minimal-norm least-squares solution via an exact full-rank
/// factorization (the pseudoinverse for the standard inner product):
/// with `z = c · f` where `f` holds the nonzero reduced rows and `c` the
/// pivot columns, the pseudoinverse is
/// `f' (f f')^{-1} (c' c)^{-1} c'`.
fn pseudo_solve(z: &QMat, v: &QVec) -> QVec {
    let n = z.len();
    let d = if n == 0 { 0 } else { z[0].len() };
    let (red, pivots) = linalg::rref(z);
    let r = pivots.len();
    if r == 0 {
        return vec![Rat::zero(); d];
    }
    let f_mat: QMat = red.into_iter().take(r).collect();
    let c_mat: QMat = (0..n).map(|j| pivots.iter().map(|&p| z[j][p].clone()).collect()).collect();
    let ctc = linalg::mat_mul(&transpose(&c_mat), &c_mat);
    let fft = linalg::mat_mul(&f_mat, &transpose(&f_mat));
    let ctc_inv = linalg::invert(&ctc).expect("gram matrix of independent columns");
    let fft_inv = linalg::invert(&fft).expect("gram matrix of independent rows");
    let ctv = linalg::mat_vec(&transpose(&c_mat), v);
    let step1 = linalg::mat_vec(&ctc_inv, &ctv);
    let step2 = linalg::mat_vec(&fft_inv, &step1);
    linalg::mat_vec(&transpose(&f_mat), &step2)
}

fn transpose(m: &QMat) -> QMat {
    if m.is_empty() {
        return Vec::new();
    }
    (0..m[0].len()).map(|j| m.iter().map(|row| row[j].clone()).collect()).collect()
}

/// Samples the algebra-valued lift of a curve on the integration grid,
/// requiring the least-squares residual to stay below `tol` (the curve
/// must follow the orbit distribution).
pub fn lift_curve(
    action: &GAction,
    c: &CurveSpec,
    tol: f64,
    s: &OdeSettings,
) -> Result<Vec<(Rat, QVec)>> {
    let n = s.steps_per_unit_time.max(1);
    let mut out = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let t = rat(k as i64, n as i64);
        let (b, residual) = lift_curve_at(action, c, &t)?;
        let res_norm = residual.iter().map(|x| rat_to_f64(x).abs()).fold(0.0, f64::max);
        if res_norm >= tol {
            return Err(Error::Invalid(format!(
                "curve leaves the orbit distribution at t = {t}: residual {res_norm:.3e}"
            )));
        }
        out.push((t, b));
    }
    Ok(out)
}

/// Develops a curve of a one-chart transitive free action into the group
/// chart: integrates the matrix equation `G' = G . B(t)` from the
/// identity, where `B(t)` realizes the exact algebra lift of the curve
/// velocity, and reads off the chart coordinates of the endpoint.  The
/// endpoint depends only on the curve's endpoint; the tests pin this
/// path independence.
pub fn cartan_develop(
    action: &GAction,
    gc: &MatrixGroupChart,
    c: &CurveSpec,
    s: &OdeSettings,
) -> Result<Vec<f64>> {
    if c.target() != action.chart() {
        return Err(Error::ChartMismatch {
            expected: action.chart().describe(),
            found: c.target().describe(),
        });
    }
    let d = action.algebra().dim();
    if d != gc.algebra().dim()
        || (0..d).any(|i| {
            (0..d).any(|j| action.algebra().structure(i, j) != gc.algebra().structure(i, j))
        })
    {
        return Err(Error::Invalid(
            "group chart algebra differs from the action algebra".into(),
        ));
    }
    if d != action.chart().dim() {
        return Err(Error::DimensionMismatch(
            "developing needs a free transitive action: algebra and chart dimensions differ"
                .into(),
        ));
    }
    let start = c.value_rat(&Rat::zero())?;
    if action.analyze_point(&start)?.rank != d {
        return Err(Error::Invalid(
            "developing needs a free transitive action: fields are dependent at the start"
                .into(),
        ));
    }
    let rep = gc.algebra().matrix_rep().expect("group chart carries a realization");
    let rep_f: Vec<Vec<Vec<f64>>> = rep
        .iter()
        .map(|m| m.iter().map(|row| row.iter().map(rat_to_f64).collect()).collect())
        .collect();
    let k = rep_f[0].len();
    let mut cache: BTreeMap<(usize, Rat), Vec<f64>> = BTreeMap::new();
    let mut b_matrix = |piece: usize, t: &Rat| -> Result<Vec<f64>> {
        if let Some(hit) = cache.get(&(piece, t.clone())) {
            return Ok(hit.clone());
        }
        let (b, residual) = lift_curve_at_piece(action, c, piece, t)?;
        let res_norm = residual.iter().map(|x| rat_to_f64(x).abs()).fold(0.0, f64::max);
        if res_norm >= LIFT_RESIDUAL_TOL {
            return Err(Error::Invalid(format!(
                "curve velocity leaves the orbit span at t = {t}: residual {res_norm:.3e}"
            )));
        }
        let mut mat = vec![0.0; k * k];
        for (a, coeff) in b.iter().enumerate() {
            let cf = rat_to_f64(coeff);
            if cf == 0.0 {
                continue;
            }
            for r in 0..k {
                for cc in 0..k {
                    mat[r * k + cc] += cf * rep_f[a][r][cc];
                }
            }
        }
        cache.insert((piece, t.clone()), mat.clone());
        Ok(mat)
    };
    let mut develop = |steps_scale: usize| -> Result<Vec<f64>> {
        let mut g = vec![0.0; k * k];
        for i in 0..k {
            g[i * k + i] = 1.0;
        }
        let breaks = c.breakpoints().to_vec();
        for (pi, w) in breaks.windows(2).enumerate() {
            let span = rat_to_f64(&(&w[1] - &w[0]));
            let n = steps_for(span, s) * steps_scale;
            let h = span / n as f64;
            for step in 0..n {
                let frac = |num: i64, den: i64| -> Rat {
                    &w[0] + (&w[1] - &w[0]) * rat(num, den)
                };
                let t0 = frac(step as i64, n as i64);
                let tm = frac(2 * step as i64 + 1, 2 * n as i64);
                let t1 = frac(step as i64 + 1, n as i64);
                let b0 = b_matrix(pi, &t0)?;
                let bm = b_matrix(pi, &tm)?;
                let b1 = b_matrix(pi, &t1)?;
                let mul = |gm: &[f64], bm: &[f64]| -> Vec<f64> {
                    let mut out = vec![0.0; k * k];
                    for r in 0..k {
                        for m in 0..k {
                            let grm = gm[r * k + m];
                            if grm == 0.0 {
                                continue;
                            }
                            for cc in 0..k {
                                out[r * k + cc] += grm * bm[m * k + cc];
                            }
                        }
                    }
                    out
                };
                let k1 = mul(&g, &b0);
                let g2: Vec<f64> = g.iter().zip(&k1).map(|(a, b)| a + 0.5 * h * b).collect();
                let k2 = mul(&g2, &bm);
                let g3: Vec<f64> = g.iter().zip(&k2).map(|(a, b)| a + 0.5 * h * b).collect();
                let k3 = mul(&g3, &bm);
                let g4: Vec<f64> = g.iter().zip(&k3).map(|(a, b)| a + h * b).collect();
                let k4 = mul(&g4, &b1);
                for i in 0..k * k {
                    g[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
                assert_finite(&g)?;
            }
        }
        Ok(g)
    };
    let coarse = develop(1)?;
    let g_final = if s.richardson_check {
        let fine = develop(2)?;
        let disc = rel_disc(&coarse, &fine);
        if disc >= s.richardson_tol {
            return Err(Error::Numeric(format!(
                "step-halving disagreement {disc:.3e} in the developing map"
            )));
        }
        fine
    } else {
        coarse
    };
    Ok(gc.entry_coords().iter().map(|&(r, cc)| g_final[r * k + cc]).collect())
}

/// The unique horizontal field over a base field: the base components
/// carried to the product chart plus the bundle's horizontal correction.
/// Commutation with every fundamental field is checked symbolically and
/// exactly.
pub fn horizontal_lift(bundle: &LocalBundle, xi: &VectorField) -> Result<VectorField> {
    if xi.chart() != bundle.base_chart() {
        return Err(Error::ChartMismatch {
            expected: bundle.base_chart().describe(),
            found: xi.chart().describe(),
        });
    }
    let n = bundle.product_chart().dim();
    let b = bundle.base_dim();
    let args: Vec<RF> = (0..b).map(|i| RF::var(n, i)).collect();
    let mut comps = vec![RF::zero(n); n];
    for (j, comp) in xi.components().iter().enumerate() {
        comps[j] = comp.subst(&args)?;
    }
    let extended = VectorField::new(bundle.product_chart().clone(), comps)?;
    let lifted = bundle.connection()?.horizontal(&extended)?;
    for (i, zeta) in bundle.lifted_fundamentals()?.iter().enumerate() {
        if !lifted.bracket(zeta)?.is_zero() {
            return Err(Error::RouteDisagreement(format!(
                "horizontal lift fails to commute with fundamental field {}",
                bundle.fiber_action().algebra().names()[i]
            )));
        }
    }
    Ok(lifted)
}

/// Integrates the fiber equation `u' = Gamma(c'(t))(u)` along a base
/// curve, piece by piece so breakpoints never sit inside a step.
pub fn parallel_transport(
    bundle: &LocalBundle,
    c: &CurveSpec,
    u0: &[f64],
    s: &OdeSettings,
) -> Result<Vec<f64>> {
    if c.target() != bundle.base_chart() {
        return Err(Error::ChartMismatch {
            expected: bundle.base_chart().describe(),
            found: c.target().describe(),
        });
    }
    let f = bundle.fiber_dim();
    if u0.len() != f {
        return Err(Error::DimensionMismatch("fiber start point arity".into()));
    }
    let b = bundle.base_dim();
    let gamma: Vec<Option<Vec<RF>>> = (0..b)
        .map(|j| {
            let vals = bundle.christoffel().value_on(&[j as u8]);
            if vals.iter().all(|v| v.is_zero()) {
                None
            } else {
                Some(vals)
            }
        })
        .collect();
    let mut u = u0.to_vec();
    let breaks = c.breakpoints().to_vec();
    for (pi, w) in breaks.windows(2).enumerate() {
        let t0 = rat_to_f64(&w[0]);
        let t1 = rat_to_f64(&w[1]);
        let piece = &c.pieces[pi];
        let dpiece = &c.derivs[pi];
        let rhs = |t: f64, uf: &[f64]| -> Result<Vec<f64>> {
            let ts = [t];
            let mut point = Vec::with_capacity(b + f);
            for comp in piece {
                point.push(comp.eval_f64(&ts)?);
            }
            point.extend_from_slice(uf);
            let mut du = vec![0.0; f];
            for (j, slot) in gamma.iter().enumerate() {
                let Some(vals) = slot else { continue };
                let cj = dpiece[j].eval_f64(&ts)?;
                if cj == 0.0 {
                    continue;
                }
                for (a, val) in vals.iter().enumerate() {
                    du[a] += cj * val.eval_f64(&point)?;
                }
            }
            Ok(du)
        };
        u = rk4_checked(&rhs, t0, t1, &u, s)?;
    }
    Ok(u)
}

/// Fiber displacement after parallel transport around a closed loop.
pub fn holonomy_loop(
    bundle: &LocalBundle,
    lp: &CurveSpec,
    u0: &[f64],
    s: &OdeSettings,
) -> Result<Vec<f64>> {
    if !lp.is_closed()? {
        return Err(Error::Invalid("holonomy needs a closed loop".into()));
    }
    let u1 = parallel_transport(bundle, lp, u0, s)?;
    Ok(u1.iter().zip(u0).map(|(a, b)| a - b).collect())
}

/// Line integral of the Christoffel form along a base curve with the
/// fiber coordinates frozen: the exact holonomy predictor whenever the
/// Christoffel values do not depend on the fiber.  Composite Simpson
/// quadrature per piece.
pub fn christoffel_line_integral(
    bundle: &LocalBundle,
    c: &CurveSpec,
    u_frozen: &[f64],
    s: &OdeSettings,
) -> Result<Vec<f64>> {
    if c.target() != bundle.base_chart() {
        return Err(Error::ChartMismatch {
            expected: bundle.base_chart().describe(),
            found: c.target().describe(),
        });
    }
    let f = bundle.fiber_dim();
    let b = bundle.base_dim();
    let mut acc = vec![0.0; f];
    let breaks = c.breakpoints().to_vec();
    for (pi, w) in breaks.windows(2).enumerate() {
        let t0 = rat_to_f64(&w[0]);
        let t1 = rat_to_f64(&w[1]);
        let n = steps_for(t1 - t0, s);
        let h = (t1 - t0) / n as f64;
        let piece = &c.pieces[pi];
        let dpiece = &c.derivs[pi];
        let integrand = |t: f64| -> Result<Vec<f64>> {
            let ts = [t];
            let mut point = Vec::with_capacity(b + f);
            for comp in piece {
                point.push(comp.eval_f64(&ts)?);
            }
            point.extend_from_slice(u_frozen);
            let mut g = vec![0.0; f];
            for j in 0..b {
                let cj = dpiece[j].eval_f64(&ts)?;
                if cj == 0.0 {
                    continue;
                }
                let vals = bundle.christoffel().value_on(&[j as u8]);
                for (a, val) in vals.iter().enumerate() {
                    g[a] += cj * val.eval_f64(&point)?;
                }
            }
            Ok(g)
        };
        for step in 0..n {
            let a = t0 + h * step as f64;
            let ga = integrand(a)?;
            let gm = integrand(a + 0.5 * h)?;
            let gb = integrand(a + h)?;
            for i in 0..f {
                acc[i] += h / 6.0 * (ga[i] + 4.0 * gm[i] + gb[i]);
            }
        }
    }
    Ok(acc)
}

/// One square side length with its worst-case deviation between measured
/// holonomy and the curvature prediction.
#[derive(Clone, Debug)]
pub struct HolonomyRow {
    pub h: f64,
    pub max_abs_err: f64,
    pub max_rel_err: f64,
}

/// Holonomy-versus-curvature comparison across a sequence of square side
/// lengths.  `orders[i]` is the decay order of the absolute deviation
/// between rows `i` and `i+1` (so an order of `p` here means the
/// `h^2`-normalized displacement converges at order `p - 2`); it is only
/// measured when both errors sit above the floor, since below the floor
/// only roundoff is left and no order is observable.
#[derive(Clone, Debug)]
pub struct HolonomyReport {
    pub rows: Vec<HolonomyRow>,
    pub orders: Vec<Option<f64>>,
    pub floor: f64,
}

impl HolonomyReport {
    /// Every consecutive pair must either show the demanded convergence
    /// order or have at least one error already below the floor.
    pub fn passed(&self, min_order: f64) -> bool {
        self.orders.iter().all(|o| match o {
            Some(order) => *order >= min_order,
            None => true,
        }) && !self.rows.is_empty()
    }

    pub fn summary(&self) -> String {
        let rows: Vec<String> = self
            .rows
            .iter()
            .map(|r| format!("h={:.4}: abs {:.3e}, rel {:.3e}", r.h, r.max_abs_err, r.max_rel_err))
            .collect();
        let orders: Vec<String> = self
            .orders
            .iter()
            .map(|o| match o {
                Some(v) => format!("{v:.2}"),
                None => "below floor".into(),
            })
            .collect();
        format!("{}; orders: [{}]", rows.join("; "), orders.join(", "))
    }
}

/// Measures square-loop holonomy against the curvature prediction
/// `h^2 . R(e_a, e_b)` evaluated at the square's center, for each side
/// length and each sampled fiber point.  Counterclockwise orientation in
/// the `axes` plane; displacement and prediction are compared with
/// matching signs (the orientation convention is pinned by the tests).
pub fn holonomy_curvature_check(
    bundle: &LocalBundle,
    base_point: &[Rat],
    sides: &[Rat],
    fiber_points: &[Vec<Rat>],
    axes: (usize, usize),
    s: &OdeSettings,
) -> Result<HolonomyReport> {
    if base_point.len() != bundle.base_dim() {
        return Err(Error::DimensionMismatch("base point arity".into()));
    }
    if sides.is_empty() || fiber_points.is_empty() {
        return Err(Error::Invalid("need at least one side length and one fiber point".into()));
    }
    let curvature = bundle.curvature_via_christoffel()?;
    let b = bundle.base_dim();
    let f = bundle.fiber_dim();
    let key = if axes.0 < axes.1 {
        vec![axes.0 as u8, axes.1 as u8]
    } else {
        vec![axes.1 as u8, axes.0 as u8]
    };
    let orientation = if axes.0 < axes.1 { 1.0 } else { -1.0 };
    let mut rows = Vec::new();
    for side in sides {
        let lp = square_loop(bundle.base_chart(), base_point, side, axes)?;
        let mut center = base_point.to_vec();
        let half = side * rat(1, 2);
        center[axes.0] += &half;
        center[axes.1] += &half;
        let hf = rat_to_f64(side);
        let mut max_abs = 0.0f64;
        let mut max_rel = 0.0f64;
        for u in fiber_points {
            if u.len() != f {
                return Err(Error::DimensionMismatch("fiber point arity".into()));
            }
            let uf: Vec<f64> = u.iter().map(rat_to_f64).collect();
            let disp = holonomy_loop(bundle, &lp, &uf, s)?;
            let mut total = center.clone();
            total.extend(u.iter().cloned());
            let values = curvature.eval_rat(&total)?;
            let rv: Vec<f64> = match values.get(&key) {
                Some(vals) => vals[b..].iter().map(rat_to_f64).collect(),
                None => vec![0.0; f],
            };
            let scale = rv.iter().fold(0.0f64, |m, r| m.max(r.abs())) * hf * hf;
            for a in 0..f {
                let predicted = orientation * hf * hf * rv[a];
                let abs_err = (disp[a] - predicted).abs();
                max_abs = max_abs.max(abs_err);
                max_rel = max_rel.max(abs_err / f64::max(scale, ERROR_FLOOR));
            }
        }
        rows.push(HolonomyRow { h: hf, max_abs_err: max_abs, max_rel_err: max_rel });
    }
    let mut orders = Vec::new();
    for w in rows.windows(2) {
        let (a, b2) = (&w[0], &w[1]);
        if a.max_abs_err > ERROR_FLOOR && b2.max_abs_err > ERROR_FLOOR {
            let order = (a.max_abs_err / b2.max_abs_err).ln() / (a.h / b2.h).ln();
            orders.push(Some(order));
        } else {
            orders.push(None);
        }
    }
    Ok(HolonomyReport { rows, orders, floor: ERROR_FLOOR })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::form::{Form, ValueKind};
    use crate::lie::LieAlgebra;
    use std::sync::Arc;

    fn rf(c: &Chart, src: &str) -> RF {
        c.expr(src).unwrap()
    }

    fn vf(c: &Chart, comps: &[&str]) -> VectorField {
        VectorField::new(c.clone(), comps.iter().map(|s| rf(c, s)).collect()).unwrap()
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

    fn sl2_action() -> GAction {
        let two_e = vec![Rat::zero(), crate::poly::rat_int(2), Rat::zero()];
        let minus_two_f = vec![Rat::zero(), Rat::zero(), crate::poly::rat_int(-2)];
        let hv = vec![Rat::one(), Rat::zero(), Rat::zero()];
        let alg = Arc::new(
            LieAlgebra::from_sparse(
                vec!["h".into(), "e".into(), "f".into()],
                &[(0, 1, two_e), (0, 2, minus_two_f), (1, 2, hv)],
            )
            .unwrap(),
        );
        let c = Chart::of(&["x"]);
        GAction::new(
            alg,
            c.clone(),
            vec![vf(&c, &["-2*x"]), vf(&c, &["1"]), vf(&c, &["-x^2"])],
        )
        .unwrap()
    }

    fn rot2_action() -> GAction {
        let alg = Arc::new(LieAlgebra::from_sparse(vec!["r".into()], &[]).unwrap());
        let c = Chart::with_excluded(
            vec!["x".into(), "y".into()],
            vec![Chart::of(&["x", "y"]).expr("x^2+y^2").unwrap()],
        )
        .unwrap();
        GAction::new(alg, c.clone(), vec![vf(&c, &["-y", "x"])]).unwrap()
    }

    fn translations2() -> GAction {
        let alg = Arc::new(
            LieAlgebra::from_sparse(vec!["e1".into(), "e2".into()], &[]).unwrap(),
        );
        let c = Chart::of(&["x", "y"]);
        GAction::new(alg, c.clone(), vec![vf(&c, &["1", "0"]), vf(&c, &["0", "1"])]).unwrap()
    }

    fn bund1() -> LocalBundle {
        let base = Chart::of(&["x", "y"]);
        let fiber = Chart::of(&["s"]);
        let alg = Arc::new(LieAlgebra::from_sparse(vec!["v".into()], &[]).unwrap());
        let action = GAction::new(alg, fiber.clone(), vec![vf(&fiber, &["1"])]).unwrap();
        let product = LocalBundle::product_chart_of(&base, &fiber).unwrap();
        let mut gamma = Form::zero(product.clone(), 1, ValueKind::vector(1));
        gamma.set_term(&[0], vec![rf(&product, "-y")]).unwrap();
        LocalBundle::new(base, action, gamma).unwrap()
    }

    fn bundle_with_gamma(expr_dx: &str) -> LocalBundle {
        let base = Chart::of(&["x", "y"]);
        let fiber = Chart::of(&["s"]);
        let alg = Arc::new(LieAlgebra::from_sparse(vec!["v".into()], &[]).unwrap());
        let action = GAction::new(alg, fiber.clone(), vec![vf(&fiber, &["1"])]).unwrap();
        let product = LocalBundle::product_chart_of(&base, &fiber).unwrap();
        let mut gamma = Form::zero(product.clone(), 1, ValueKind::vector(1));
        gamma.set_term(&[0], vec![rf(&product, expr_dx)]).unwrap();
        LocalBundle::new(base, action, gamma).unwrap()
    }

    fn flat_bundle() -> LocalBundle {
        let base = Chart::of(&["x", "y"]);
        let fiber = Chart::of(&["s"]);
        let alg = Arc::new(LieAlgebra::from_sparse(vec!["v".into()], &[]).unwrap());
        let action = GAction::new(alg, fiber.clone(), vec![vf(&fiber, &["1"])]).unwrap();
        let product = LocalBundle::product_chart_of(&base, &fiber).unwrap();
        let gamma = Form::zero(product.clone(), 1, ValueKind::vector(1));
        LocalBundle::new(base, action, gamma).unwrap()
    }

    fn settings(steps: usize) -> OdeSettings {
        OdeSettings { steps_per_unit_time: steps, ..OdeSettings::default() }
    }

    #[test]
    fn flow_moves_along_constant_and_polynomial_fields() {
        let c3 = Chart::of(&["x", "y", "z"]);
        let s = OdeSettings::default();
        let end = flow(&vf(&c3, &["1", "0", "0"]), &[0.0, 0.0, 0.0], 1.0, &s).unwrap();
        assert!((end[0] - 1.0).abs() < 1e-12 && end[1].abs() < 1e-12);

        let c1 = Chart::of(&["x"]);
        let end = flow(&vf(&c1, &["x"]), &[1.0], std::f64::consts::LN_2, &s).unwrap();
        assert!((end[0] - 2.0).abs() < 1e-9);

        let a = heis3_action();
        let end = flow(a.fundamental(1), &[3.0, 0.0, 0.0], 1.0, &s).unwrap();
        assert!((end[0] - 3.0).abs() < 1e-9);
        assert!((end[1] - 1.0).abs() < 1e-9);
        assert!((end[2] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn flow_detects_blowup() {
        let c1 = Chart::of(&["x"]);
        let quad = vf(&c1, &["x^2"]);
        assert!(flow(&quad, &[1.0], 2.0, &OdeSettings::default()).is_err());
    }

    #[test]
    fn word_apply_composes_flows_in_order() {
        let a = heis3_action();
        let s = OdeSettings::default();
        let origin = [0.0, 0.0, 0.0];
        let id = word_apply(&a, &Word::empty(), &origin, &s).unwrap();
        assert_eq!(id, vec![0.0, 0.0, 0.0]);

        let e1 = vec![Rat::one(), Rat::zero(), Rat::zero()];
        let e2 = vec![Rat::zero(), Rat::one(), Rat::zero()];
        let forward = Word::new(vec![(e1.clone(), 1.0), (e2.clone(), 1.0)]);
        let end = word_apply(&a, &forward, &origin, &s).unwrap();
        assert!((end[0] - 1.0).abs() < 1e-9);
        assert!((end[1] - 1.0).abs() < 1e-9);
        assert!((end[2] - 1.0).abs() < 1e-9);

        let reversed = Word::new(vec![(e2.clone(), 1.0), (e1.clone(), 1.0)]);
        let end = word_apply(&a, &reversed, &origin, &s).unwrap();
        assert!((end[2] - 0.0).abs() < 1e-9, "commutator defect lives in z");

        let cancel = Word::new(vec![(e1.clone(), 1.0), (e1, -1.0)]);
        let end = word_apply(&a, &cancel, &origin, &s).unwrap();
        assert!(end.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn adjoint_transport_matches_exponential_prediction() {
        let s = OdeSettings::default();
        let tr = translations2();
        let cert = ad_via_flow(
            &tr,
            &vec![Rat::one(), Rat::zero()],
            &vec![Rat::zero(), Rat::one()],
            &rat(1, 1),
            &[vec![0.0, 0.0], vec![0.4, -1.2]],
            1e-9,
            &s,
        )
        .unwrap();
        assert!(cert.passed(), "{}", cert.summary());

        let a = heis3_action();
        let probes = vec![
            vec![0.0, 0.0, 0.0],
            vec![0.3, -0.2, 0.1],
            vec![1.0, 2.0, -1.0],
            vec![-0.5, 0.4, 0.0],
            vec![2.0, -1.0, 3.0],
        ];
        let cert = ad_via_flow(
            &a,
            &vec![Rat::one(), Rat::zero(), Rat::zero()],
            &vec![Rat::zero(), Rat::one(), Rat::zero()],
            &rat(1, 1),
            &probes,
            1e-6,
            &s,
        )
        .unwrap();
        assert!(cert.passed(), "{}", cert.summary());

        let sl2 = sl2_action();
        let cert = ad_via_flow(
            &sl2,
            &vec![Rat::one(), Rat::zero(), Rat::zero()],
            &vec![Rat::zero(), Rat::one(), Rat::zero()],
            &rat(1, 10),
            &[vec![0.5], vec![1.0], vec![-0.3]],
            1e-5,
            &s,
        )
        .unwrap();
        assert!(cert.passed(), "{}", cert.summary());
    }

    #[test]
    fn curve_lift_solves_the_orbit_equation_exactly() {
        let a = heis3_action();
        let c3 = a.chart().clone();
        let t = RF::var(1, 0);
        let diag = CurveSpec::polynomial(c3, vec![t.clone(), t.clone(), RF::zero(1)]).unwrap();
        let (b, residual) = lift_curve_at(&a, &diag, &rat(1, 2)).unwrap();
        assert!(residual.iter().all(|r| r.is_zero()));
        assert_eq!(b, vec![Rat::one(), Rat::one(), rat(-1, 2)]);

        let samples = lift_curve(&a, &diag, 1e-8, &settings(4)).unwrap();
        for (tt, bb) in &samples {
            assert_eq!(bb[0], Rat::one());
            assert_eq!(bb[1], Rat::one());
            assert_eq!(bb[2], -tt.clone());
        }

        let stationary = CurveSpec::polynomial(
            a.chart().clone(),
            vec![RF::constant(1, rat(2, 1)), RF::constant(1, rat(-1, 1)), RF::zero(1)],
        )
        .unwrap();
        let (b, _) = lift_curve_at(&a, &stationary, &rat(1, 3)).unwrap();
        assert!(b.iter().all(|x| x.is_zero()));

        let rot = rot2_action();
        let cr = rot.chart().clone();
        let one = RF::one(1);
        let t2 = t.mul(&t);
        let den = one.add(&t2);
        let circle = CurveSpec::polynomial(
            cr,
            vec![one.sub(&t2).div(&den).unwrap(), t.scale(&rat(2, 1)).div(&den).unwrap()],
        )
        .unwrap();
        let (b, residual) = lift_curve_at(&rot, &circle, &Rat::zero()).unwrap();
        assert!(residual.iter().all(|r| r.is_zero()));
        assert_eq!(b, vec![rat(2, 1)]);
        let (b, _) = lift_curve_at(&rot, &circle, &rat(1, 2)).unwrap();
        assert_eq!(b, vec![rat(8, 5)]);
        let (b, _) = lift_curve_at(&rot, &circle, &Rat::one()).unwrap();
        assert_eq!(b, vec![Rat::one()]);
    }

    #[test]
    fn curve_lift_rejects_off_orbit_motion() {
        let rot = rot2_action();
        let t = RF::var(1, 0);
        let radial = CurveSpec::polynomial(
            rot.chart().clone(),
            vec![RF::one(1).add(&t), RF::zero(1)],
        )
        .unwrap();
        let err = lift_curve(&rot, &radial, 1e-8, &settings(4));
        assert!(err.is_err());
    }

    #[test]
    fn developing_reaches_group_coordinates() {
        let a = heis3_action();
        let gc = heisenberg_group_chart();
        let t = RF::var(1, 0);
        let s = settings(200);
        let diag = CurveSpec::polynomial(
            a.chart().clone(),
            vec![t.clone(), t.clone(), RF::zero(1)],
        )
        .unwrap();
        let end = cartan_develop(&a, &gc, &diag, &s).unwrap();
        assert!((end[0] - 1.0).abs() < 1e-6);
        assert!((end[1] - 1.0).abs() < 1e-6);
        assert!(end[2].abs() < 1e-6);

        let still = CurveSpec::polynomial(
            a.chart().clone(),
            vec![RF::zero(1), RF::zero(1), RF::zero(1)],
        )
        .unwrap();
        let end = cartan_develop(&a, &gc, &still, &s).unwrap();
        assert!(end.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn developing_is_path_independent() {
        let a = heis3_action();
        let gc = heisenberg_group_chart();
        let s = settings(200);
        let t = RF::var(1, 0);
        let zero = Rat::zero();
        let one = Rat::one();
        let diag = CurveSpec::polynomial(
            a.chart().clone(),
            vec![t.clone(), t.clone(), RF::zero(1)],
        )
        .unwrap();
        let two_leg = CurveSpec::segments(
            a.chart().clone(),
            &[
                vec![zero.clone(), zero.clone(), zero.clone()],
                vec![one.clone(), zero.clone(), zero.clone()],
                vec![one.clone(), one.clone(), zero.clone()],
            ],
        )
        .unwrap();
        let curved = CurveSpec::polynomial(
            a.chart().clone(),
            vec![t.clone(), t.mul(&t), RF::zero(1)],
        )
        .unwrap();
        let ends: Vec<Vec<f64>> = [&diag, &two_leg, &curved]
            .iter()
            .map(|c| cartan_develop(&a, &gc, c, &s).unwrap())
            .collect();
        for pair in ends.windows(2) {
            for (x, y) in pair[0].iter().zip(&pair[1]) {
                assert!((x - y).abs() < 1e-6, "paths develop to different group points");
            }
        }
    }

    fn heisenberg_group_chart() -> MatrixGroupChart {
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
        let alg = Arc::new(alg.with_matrix_rep(vec![r1, r2, r3]).unwrap());
        let c = Chart::of(&["x", "y", "z"]);
        let param = vec![
            vec![rf(&c, "1"), rf(&c, "x"), rf(&c, "z")],
            vec![rf(&c, "0"), rf(&c, "1"), rf(&c, "y")],
            vec![rf(&c, "0"), rf(&c, "0"), rf(&c, "1")],
        ];
        let param_inv = vec![
            vec![rf(&c, "1"), rf(&c, "-x"), rf(&c, "x*y-z")],
            vec![rf(&c, "0"), rf(&c, "1"), rf(&c, "-y")],
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
    fn horizontal_lift_commutes_with_fundamentals() {
        let b = bund1();
        let base = b.base_chart().clone();
        let lifted = horizontal_lift(&b, &vf(&base, &["1", "0"])).unwrap();
        let product = b.product_chart().clone();
        assert_eq!(lifted, vf(&product, &["1", "0", "-y"]));

        let lifted_y = horizontal_lift(&b, &vf(&base, &["0", "1"])).unwrap();
        assert_eq!(lifted_y, vf(&product, &["0", "1", "0"]));

        let flat = flat_bundle();
        let lifted_flat = horizontal_lift(&flat, &vf(&base, &["x", "y"])).unwrap();
        assert_eq!(lifted_flat, vf(&product, &["x", "y", "0"]));
    }

    #[test]
    fn parallel_transport_integrates_the_fiber_equation() {
        // One-dimensional base u, Christoffel u du (x) d/ds: transporting
        // from s = 0 along u = t accumulates the integral of t, one half.
        let base = Chart::of(&["u"]);
        let fiber = Chart::of(&["s"]);
        let alg = Arc::new(LieAlgebra::from_sparse(vec!["v".into()], &[]).unwrap());
        let action = GAction::new(alg, fiber.clone(), vec![vf(&fiber, &["1"])]).unwrap();
        let product = LocalBundle::product_chart_of(&base, &fiber).unwrap();
        let mut gamma = Form::zero(product.clone(), 1, ValueKind::vector(1));
        gamma.set_term(&[0], vec![rf(&product, "u")]).unwrap();
        let b = LocalBundle::new(base.clone(), action, gamma).unwrap();
        let t = RF::var(1, 0);
        let line = CurveSpec::polynomial(base, vec![t.clone()]).unwrap();
        let end = parallel_transport(&b, &line, &[0.0], &OdeSettings::default()).unwrap();
        assert!((end[0] - 0.5).abs() < 1e-8);

        let flat = flat_bundle();
        let c2 = flat.base_chart().clone();
        let wiggly = CurveSpec::polynomial(c2.clone(), vec![t.clone(), t.mul(&t)]).unwrap();
        let end = parallel_transport(&flat, &wiggly, &[0.7], &OdeSettings::default()).unwrap();
        assert!((end[0] - 0.7).abs() < 1e-12);

        let b1 = bund1();
        let straight = CurveSpec::polynomial(c2, vec![t.clone(), RF::zero(1)]).unwrap();
        let end = parallel_transport(&b1, &straight, &[0.3], &OdeSettings::default()).unwrap();
        assert!((end[0] - 0.3).abs() < 1e-12, "y = 0 kills the Christoffel term");
    }

    #[test]
    fn holonomy_around_the_unit_square() {
        let b = bund1();
        let s = OdeSettings::default();
        let square = square_loop(
            b.base_chart(),
            &[Rat::zero(), Rat::zero()],
            &Rat::one(),
            (0, 1),
        )
        .unwrap();
        let disp = holonomy_loop(&b, &square, &[0.0], &s).unwrap();
        assert!((disp[0] - 1.0).abs() < 1e-6, "counterclockwise unit square displaces by +1");

        // Sign oracle: the frozen-fiber line integral agrees in sign and value.
        let quad = christoffel_line_integral(&b, &square, &[0.0], &s).unwrap();
        assert!((quad[0] - disp[0]).abs() < 1e-9);
        assert!(quad[0].signum() == disp[0].signum());

        let flat = flat_bundle();
        let disp = holonomy_loop(&flat, &square, &[0.4], &s).unwrap();
        assert!(disp[0].abs() < 1e-12);
    }

    #[test]
    fn holonomy_report_matches_curvature_scaling() {
        let b = bund1();
        let s = OdeSettings::default();
        let report = holonomy_curvature_check(
            &b,
            &[Rat::zero(), Rat::zero()],
            &[rat(1, 5), rat(1, 10), rat(1, 20)],
            &[vec![Rat::zero()], vec![rat(1, 2)]],
            (0, 1),
            &s,
        )
        .unwrap();
        // Constant curvature: the prediction is exact, every error sits
        // below the floor and the report passes by the floor rule.
        assert!(report.rows.iter().all(|r| r.max_abs_err < report.floor), "{}", report.summary());
        assert!(report.passed(1.9), "{}", report.summary());

        // Exact derivative data: zero curvature, zero displacement.
        let flat_form = bundle_with_gamma("x");
        let report = holonomy_curvature_check(
            &flat_form,
            &[rat(1, 2), rat(1, 3)],
            &[rat(1, 5), rat(1, 10)],
            &[vec![Rat::zero()]],
            (0, 1),
            &s,
        )
        .unwrap();
        assert!(report.rows.iter().all(|r| r.max_abs_err < report.floor), "{}", report.summary());

        // Cubic coefficient: the absolute deviation is exactly h^4 / 4
        // (the center evaluation makes the h^3 term cancel), so the
        // measured order is a genuine 4.
        let cubic = bundle_with_gamma("-y^3");
        let report = holonomy_curvature_check(
            &cubic,
            &[rat(1, 2), rat(1, 3)],
            &[rat(1, 5), rat(1, 10), rat(1, 20)],
            &[vec![Rat::zero()]],
            (0, 1),
            &s,
        )
        .unwrap();
        assert!(report.passed(1.9), "{}", report.summary());
        for o in &report.orders {
            let measured = o.expect("cubic curvature errors are measurable");
            assert!((measured - 4.0).abs() < 0.2, "{}", report.summary());
        }

        // Abelian fiber: displacement equals the line integral to solver
        // accuracy on a shifted square.
        let square = square_loop(b.base_chart(), &[rat(1, 3), rat(-1, 2)], &rat(1, 2), (0, 1))
            .unwrap();
        let disp = holonomy_loop(&b, &square, &[0.25], &s).unwrap();
        let quad = christoffel_line_integral(&b, &square, &[0.25], &s).unwrap();
        assert!((disp[0] - quad[0]).abs() < 1e-9);
    }

    #[test]
    fn transport_invariants_hold() {
        let b = bund1();
        let s = OdeSettings::default();
        let t = RF::var(1, 0);
        // Reparametrization invariance.
        let c = CurveSpec::polynomial(
            b.base_chart().clone(),
            vec![t.clone(), t.sub(&t.mul(&t))],
        )
        .unwrap();
        let direct = parallel_transport(&b, &c, &[0.3], &s).unwrap();
        let slowed = c.reparametrize(&t.mul(&t)).unwrap();
        let re = parallel_transport(&b, &slowed, &[0.3], &s).unwrap();
        assert!((direct[0] - re[0]).abs() < 1e-7);

        // Transport is related to the fiber generator: pushing the
        // generator through the transport map reproduces it.
        let eps = TANGENT_STEP;
        let gen_at = 1.0;
        let up = parallel_transport(&b, &c, &[0.3 + eps * gen_at], &s).unwrap();
        let down = parallel_transport(&b, &c, &[0.3 - eps * gen_at], &s).unwrap();
        let pushed = (up[0] - down[0]) / (2.0 * eps);
        assert!((pushed - gen_at).abs() < 1e-6);

        // Commuting flows commute.
        let tr = translations2();
        let e1 = vec![Rat::one(), Rat::zero()];
        let e2 = vec![Rat::zero(), Rat::one()];
        let ab = word_apply(
            &tr,
            &Word::new(vec![(e1.clone(), 0.7), (e2.clone(), -0.4)]),
            &[0.1, 0.2],
            &s,
        )
        .unwrap();
        let ba = word_apply(
            &tr,
            &Word::new(vec![(e2, -0.4), (e1, 0.7)]),
            &[0.1, 0.2],
            &s,
        )
        .unwrap();
        assert!(ab.iter().zip(&ba).all(|(x, y)| (x - y).abs() < 1e-8));
    }

    #[test]
    fn integrator_shows_fourth_order_convergence() {
        let c1 = Chart::of(&["x"]);
        let field = vf(&c1, &["x"]);
        let exact = std::f64::consts::E;
        let run = |steps: usize| -> f64 {
            let s = OdeSettings {
                steps_per_unit_time: steps,
                richardson_check: false,
                richardson_tol: 1e-6,
            };
            let end = flow(&field, &[1.0], 1.0, &s).unwrap();
            (end[0] - exact).abs()
        };
        let coarse = run(8);
        let fine = run(16);
        assert!(coarse / fine >= 8.0, "error ratio {} under step halving", coarse / fine);
    }

    #[test]
    fn curve_validation_rejects_bad_specs() {
        let c2 = Chart::of(&["x", "y"]);
        let t = RF::var(1, 0);
        // Discontinuous pieces.
        let jump = CurveSpec::new(
            c2.clone(),
            vec![Rat::zero(), rat(1, 2), Rat::one()],
            vec![
                vec![t.clone(), RF::zero(1)],
                vec![t.clone().add(&RF::one(1)), RF::zero(1)],
            ],
        );
        assert!(jump.is_err());
        // Breakpoints must cover [0, 1].
        let short = CurveSpec::new(
            c2.clone(),
            vec![Rat::zero(), rat(1, 2)],
            vec![vec![t.clone(), RF::zero(1)]],
        );
        assert!(short.is_err());
        // Reparametrization endpoints are checked.
        let c = CurveSpec::polynomial(c2.clone(), vec![t.clone(), t.clone()]).unwrap();
        assert!(c.reparametrize(&t.scale(&rat(1, 2))).is_err());
        assert!(c.reparametrize(&t.mul(&t)).is_ok());
        // Closure detection.
        let square =
            square_loop(&c2, &[Rat::zero(), Rat::zero()], &Rat::one(), (0, 1)).unwrap();
        assert!(square.is_closed().unwrap());
        assert!(!c.is_closed().unwrap());
    }
}
