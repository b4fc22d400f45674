//! Graded brackets on valued forms.
//!
//! Two independent evaluation routes are provided for the bracket of
//! tangent-valued forms: a decomposable-piece expansion and a global
//! insertion formula summed over coordinate fields. Exact agreement of the
//! two routes is used as a correctness certificate throughout.

use crate::error::{Error, Result};
use crate::form::{sort_sign, Form, ValueKind, VectorField};
use crate::lie::LieAlgebra;
use crate::linalg::QMat;
use crate::poly::{rat_int, Rat};
use crate::ratfunc::RF;
use itertools::Itertools;
use num::Zero;

fn factorial(n: usize) -> Rat {
    let mut f = rat_int(1);
    for i in 2..=n {
        f *= rat_int(i as i64);
    }
    f
}

/// Bracket of two coefficient vectors in a Lie algebra, extended bilinearly
/// over chart functions.
pub fn bracket_values(alg: &LieAlgebra, u: &[RF], v: &[RF], nvars: usize) -> Vec<RF> {
    let d = alg.dim();
    let mut out = vec![RF::zero(nvars); d];
    for i in 0..d {
        if u[i].is_zero() {
            continue;
        }
        for j in 0..d {
            if v[j].is_zero() {
                continue;
            }
            let c = alg.structure(i, j);
            let uv = u[i].mul(&v[j]);
            for (m, ck) in c.iter().enumerate() {
                if !ck.is_zero() {
                    out[m] = out[m].add(&uv.scale(ck));
                }
            }
        }
    }
    out
}

/// Simple tensor: scalar form times a vector field, as a tangent-valued form.
pub fn tensor_field(phi: &Form, x: &VectorField) -> Result<Form> {
    if !matches!(phi.value_kind(), ValueKind::Scalar) {
        return Err(Error::ValueMismatch("tensor_field needs a scalar form".into()));
    }
    if phi.chart() != x.chart() {
        return Err(Error::ChartMismatch {
            expected: phi.chart().describe(),
            found: x.chart().describe(),
        });
    }
    let mut out = Form::zero(phi.chart().clone(), phi.degree(), ValueKind::Tangent);
    for (k, v) in phi.terms() {
        let c = &v[0];
        let vals: Vec<RF> = x.components().iter().map(|xm| xm.mul(c)).collect();
        let idx: Vec<usize> = k.iter().map(|&i| i as usize).collect();
        let prev = out.value_on(k);
        let summed: Vec<RF> = prev.iter().zip(&vals).map(|(a, b)| a.add(b)).collect();
        out.set_term(&idx, summed)?;
    }
    Ok(out)
}

/// Algebra-valued wedge bracket: expand on the basis and bracket the values.
pub fn alg_bracket(phi: &Form, psi: &Form) -> Result<Form> {
    let alg = phi
        .value_kind()
        .algebra()
        .ok_or_else(|| Error::ValueMismatch("left form carries no algebra tag".into()))?
        .clone();
    let alg2 = psi
        .value_kind()
        .algebra()
        .ok_or_else(|| Error::ValueMismatch("right form carries no algebra tag".into()))?;
    if alg.as_ref() != alg2.as_ref() {
        return Err(Error::ValueMismatch("algebra tags differ".into()));
    }
    if phi.chart() != psi.chart() {
        return Err(Error::ChartMismatch {
            expected: phi.chart().describe(),
            found: psi.chart().describe(),
        });
    }
    let n = phi.chart().dim();
    let mut out = Form::zero(
        phi.chart().clone(),
        phi.degree() + psi.degree(),
        ValueKind::algebra_valued(alg.clone()),
    );
    let mut comps: Vec<Form> = (0..alg.dim())
        .map(|_| Form::zero(phi.chart().clone(), phi.degree() + psi.degree(), ValueKind::Scalar))
        .collect();
    for i in 0..alg.dim() {
        let pi = phi.component(i);
        if pi.is_zero() {
            continue;
        }
        for j in 0..alg.dim() {
            let pj = psi.component(j);
            if pj.is_zero() {
                continue;
            }
            let w = pi.wedge(&pj)?;
            if w.is_zero() {
                continue;
            }
            let c = alg.structure(i, j);
            for (m, ck) in c.iter().enumerate() {
                if !ck.is_zero() {
                    comps[m] = comps[m].add(&w.scale_rat(ck))?;
                }
            }
        }
    }
    let _ = n;
    out = Form::from_components(
        phi.chart().clone(),
        phi.degree() + psi.degree(),
        out.value_kind().clone(),
        &comps,
    )?;
    Ok(out)
}

/// Shuffle-summed oracle for the algebra-valued bracket (any degrees).
pub fn alg_bracket_shuffle(phi: &Form, psi: &Form) -> Result<Form> {
    let alg = phi
        .value_kind()
        .algebra()
        .ok_or_else(|| Error::ValueMismatch("left form carries no algebra tag".into()))?
        .clone();
    let (k, l) = (phi.degree(), psi.degree());
    let n = phi.chart().dim();
    let norm = factorial(k) * factorial(l);
    let norm = rat_int(1) / norm;
    let mut out = Form::zero(
        phi.chart().clone(),
        k + l,
        ValueKind::algebra_valued(alg.clone()),
    );
    if k + l > n {
        return Ok(out);
    }
    for tuple in (0..n as u8).combinations(k + l) {
        let mut acc = vec![RF::zero(n); alg.dim()];
        for perm in tuple.iter().copied().permutations(k + l) {
            let (sign, _) = sort_sign(&perm).expect("distinct indices");
            let u = phi.value_on(&perm[..k]);
            if u.iter().all(|x| x.is_zero()) {
                continue;
            }
            let v = psi.value_on(&perm[k..]);
            let b = bracket_values(&alg, &u, &v, n);
            for (a, x) in acc.iter_mut().zip(&b) {
                *a = if sign > 0 { a.add(x) } else { a.sub(x) };
            }
        }
        if acc.iter().any(|x| !x.is_zero()) {
            let idx: Vec<usize> = tuple.iter().map(|&i| i as usize).collect();
            let vals: Vec<RF> = acc.iter().map(|x| x.scale(&norm)).collect();
            out.set_term(&idx, vals)?;
        }
    }
    Ok(out)
}

/// Representation-twisted wedge action: sum_i phi^i wedge (rho(e_i) psi).
/// `matrices` lists rho(e_i) for the basis of the value algebra of phi.
pub fn rho_wedge(phi: &Form, matrices: &[QMat], psi: &Form) -> Result<Form> {
    let d = phi.value_dim();
    if matrices.len() != d {
        return Err(Error::DimensionMismatch("one matrix per basis element".into()));
    }
    let mut out = Form::zero(
        psi.chart().clone(),
        phi.degree() + psi.degree(),
        psi.value_kind().clone(),
    );
    for i in 0..d {
        let pi = phi.component(i);
        if pi.is_zero() {
            continue;
        }
        let acted = psi.apply_matrix(&matrices[i], psi.value_kind().clone())?;
        if acted.is_zero() {
            continue;
        }
        out = out.add(&pi.wedge(&acted)?)?;
    }
    Ok(out)
}

/// Wedge of a vector(a)-valued and a vector(b)-valued form with values in the
/// tensor product, flattened so value index (i, j) lands at i*b + j.
pub fn tensor_wedge(phi: &Form, psi: &Form) -> Result<Form> {
    let a = phi.value_dim();
    let b = psi.value_dim();
    if matches!(phi.value_kind(), ValueKind::Tangent) || matches!(psi.value_kind(), ValueKind::Tangent)
    {
        return Err(Error::ValueMismatch("tensor_wedge expects fixed-vector values".into()));
    }
    let kind = ValueKind::vector(a * b);
    let mut comps: Vec<Form> = Vec::with_capacity(a * b);
    for i in 0..a {
        let pi = phi.component(i);
        for j in 0..b {
            let pj = psi.component(j);
            comps.push(if pi.is_zero() || pj.is_zero() {
                Form::zero(phi.chart().clone(), phi.degree() + psi.degree(), ValueKind::Scalar)
            } else {
                pi.wedge(&pj)?
            });
        }
    }
    Form::from_components(phi.chart().clone(), phi.degree() + psi.degree(), kind, &comps)
}

/// Bracket of decomposable tangent-valued pieces phi (x) X and psi (x) Y.
pub fn fn_bracket_decomposable(
    phi: &Form,
    x: &VectorField,
    psi: &Form,
    y: &VectorField,
) -> Result<Form> {
    let k = phi.degree();
    let ksign = k % 2 == 0;
    // phi ^ psi (x) [X, Y]
    let mut out = tensor_field(&phi.wedge(psi)?, &x.bracket(y)?)?;
    // + phi ^ (L_X psi) (x) Y
    out = out.add(&tensor_field(&phi.wedge(&psi.lie_derivative(x)?)?, y)?)?;
    // - (L_Y phi) ^ psi (x) X
    out = out.sub(&tensor_field(&phi.lie_derivative(y)?.wedge(psi)?, x)?)?;
    // + (-1)^k ( dphi ^ (i_X psi) (x) Y + (i_Y phi) ^ dpsi (x) X )
    let t4 = tensor_field(&phi.exterior_derivative().wedge(&psi.interior_product(x)?)?, y)?;
    let t5 = tensor_field(&phi.interior_product(y)?.wedge(&psi.exterior_derivative())?, x)?;
    let tail = t4.add(&t5)?;
    out = if ksign { out.add(&tail)? } else { out.sub(&tail)? };
    Ok(out)
}

/// Bracket of tangent-valued forms by expanding both sides into
/// coordinate-field pieces.
pub fn fn_bracket(kf: &Form, lf: &Form) -> Result<Form> {
    if !matches!(kf.value_kind(), ValueKind::Tangent) || !matches!(lf.value_kind(), ValueKind::Tangent)
    {
        return Err(Error::ValueMismatch("bracket needs tangent-valued forms".into()));
    }
    if kf.chart() != lf.chart() {
        return Err(Error::ChartMismatch {
            expected: kf.chart().describe(),
            found: lf.chart().describe(),
        });
    }
    let chart = kf.chart().clone();
    let n = chart.dim();
    let deg = kf.degree() + lf.degree();
    let mut out = Form::zero(chart.clone(), deg, ValueKind::Tangent);
    for (ki, kv) in kf.terms() {
        for m in 0..n {
            if kv[m].is_zero() {
                continue;
            }
            let mut phi = Form::zero(chart.clone(), kf.degree(), ValueKind::Scalar);
            let idx: Vec<usize> = ki.iter().map(|&i| i as usize).collect();
            phi.set_term(&idx, vec![kv[m].clone()])?;
            let x = VectorField::coordinate(chart.clone(), m);
            for (li, lv) in lf.terms() {
                for r in 0..n {
                    if lv[r].is_zero() {
                        continue;
                    }
                    let mut psi = Form::zero(chart.clone(), lf.degree(), ValueKind::Scalar);
                    let jdx: Vec<usize> = li.iter().map(|&i| i as usize).collect();
                    psi.set_term(&jdx, vec![lv[r].clone()])?;
                    let y = VectorField::coordinate(chart.clone(), r);
                    out = out.add(&fn_bracket_decomposable(&phi, &x, &psi, &y)?)?;
                }
            }
        }
    }
    Ok(out)
}

/// Same bracket through the global insertion formula, evaluated on
/// coordinate fields (whose pairwise brackets vanish).
pub fn fn_bracket_global(kf: &Form, lf: &Form) -> Result<Form> {
    if !matches!(kf.value_kind(), ValueKind::Tangent) || !matches!(lf.value_kind(), ValueKind::Tangent)
    {
        return Err(Error::ValueMismatch("bracket needs tangent-valued forms".into()));
    }
    let chart = kf.chart().clone();
    let n = chart.dim();
    let (k, l) = (kf.degree(), lf.degree());
    let deg = k + l;
    let mut out = Form::zero(chart.clone(), deg, ValueKind::Tangent);
    if deg > n {
        return Ok(out);
    }
    let c1 = rat_int(1) / (factorial(k) * factorial(l));
    let c2 = if l >= 1 {
        Some(rat_int(-1) / (factorial(k) * factorial(l - 1)))
    } else {
        None
    };
    let c3 = if k >= 1 {
        let s = if (k * l) % 2 == 0 { 1 } else { -1 };
        Some(rat_int(s) / (factorial(k - 1) * factorial(l)))
    } else {
        None
    };
    let field_on = |f: &Form, idx: &[u8]| -> Result<VectorField> {
        VectorField::new(chart.clone(), f.value_on(idx))
    };
    for tuple in (0..n as u8).combinations(deg) {
        let mut acc = vec![RF::zero(n); n];
        for perm in tuple.iter().copied().permutations(deg) {
            let (sign, _) = sort_sign(&perm).expect("distinct indices");
            let s = rat_int(sign as i64);
            // [K(..), L(..)]
            let kvf = field_on(kf, &perm[..k])?;
            let lvf = field_on(lf, &perm[k..])?;
            if !kvf.is_zero() || !lvf.is_zero() {
                let br = kvf.bracket(&lvf)?;
                let w = c1.clone() * s.clone();
                for (a, b) in acc.iter_mut().zip(br.components()) {
                    if !b.is_zero() {
                        *a = a.add(&b.scale(&w));
                    }
                }
            }
            // - L([K(..), xi], ..)
            if let Some(ref c2) = c2 {
                let kvf = field_on(kf, &perm[..k])?;
                if !kvf.is_zero() {
                    let xi = VectorField::coordinate(chart.clone(), perm[k] as usize);
                    let br = kvf.bracket(&xi)?;
                    if !br.is_zero() {
                        let rest: Vec<VectorField> = perm[k + 1..]
                            .iter()
                            .map(|&i| VectorField::coordinate(chart.clone(), i as usize))
                            .collect();
                        let mut args: Vec<&VectorField> = vec![&br];
                        args.extend(rest.iter());
                        let val = lf.value_on_fields(&args)?;
                        let w = c2.clone() * s.clone();
                        for (a, b) in acc.iter_mut().zip(&val) {
                            if !b.is_zero() {
                                *a = a.add(&b.scale(&w));
                            }
                        }
                    }
                }
            }
            // + (-1)^{kl} K([L(..), xi], ..)
            if let Some(ref c3) = c3 {
                let lvf = field_on(lf, &perm[..l])?;
                if !lvf.is_zero() {
                    let xi = VectorField::coordinate(chart.clone(), perm[l] as usize);
                    let br = lvf.bracket(&xi)?;
                    if !br.is_zero() {
                        let rest: Vec<VectorField> = perm[l + 1..]
                            .iter()
                            .map(|&i| VectorField::coordinate(chart.clone(), i as usize))
                            .collect();
                        let mut args: Vec<&VectorField> = vec![&br];
                        args.extend(rest.iter());
                        let val = kf.value_on_fields(&args)?;
                        let w = c3.clone() * s.clone();
                        for (a, b) in acc.iter_mut().zip(&val) {
                            if !b.is_zero() {
                                *a = a.add(&b.scale(&w));
                            }
                        }
                    }
                }
            }
        }
        if acc.iter().any(|x| !x.is_zero()) {
            let idx: Vec<usize> = tuple.iter().map(|&i| i as usize).collect();
            out.set_term(&idx, acc)?;
        }
    }
    Ok(out)
}

/// Lie derivative along a field for any value kind: tangent values go through
/// the degree-(0,k) bracket, the rest through the Cartan formula.
pub fn lie_derivative_any(form: &Form, xi: &VectorField) -> Result<Form> {
    if matches!(form.value_kind(), ValueKind::Tangent) {
        fn_bracket(&xi.to_form(), form)
    } else {
        form.lie_derivative(xi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::Chart;
    use std::sync::Arc;

    fn chart3() -> Chart {
        Chart::of(&["x", "y", "z"])
    }

    fn rf(c: &Chart, s: &str) -> RF {
        c.expr(s).unwrap()
    }

    fn heis3() -> Arc<LieAlgebra> {
        let names = vec!["e1".into(), "e2".into(), "e3".into()];
        Arc::new(
            LieAlgebra::from_sparse(names, &[(0, 1, vec![rat_int(0), rat_int(0), rat_int(1)])])
                .unwrap(),
        )
    }

    fn tangent1(c: &Chart, rows: [[&str; 3]; 3]) -> Form {
        let mut f = Form::zero(c.clone(), 1, ValueKind::Tangent);
        for (i, row) in rows.iter().enumerate() {
            let vals: Vec<RF> = row.iter().map(|s| rf(c, s)).collect();
            f.set_term(&[i], vals).unwrap();
        }
        f
    }

    #[test]
    fn frozen_curvature_tensor_on_shifted_vertical_projection() {
        // Phi = (dz - y dx) (x) d/dz; [Phi, Phi] = -2 (dx^dy) (x) d/dz.
        let c = chart3();
        let mut phi = Form::zero(c.clone(), 1, ValueKind::Tangent);
        phi.set_term(&[0], vec![rf(&c, "0"), rf(&c, "0"), rf(&c, "-y")]).unwrap();
        phi.set_term(&[2], vec![rf(&c, "0"), rf(&c, "0"), rf(&c, "1")]).unwrap();
        let br = fn_bracket(&phi, &phi).unwrap();
        let mut expected = Form::zero(c.clone(), 2, ValueKind::Tangent);
        expected
            .set_term(&[0, 1], vec![rf(&c, "0"), rf(&c, "0"), rf(&c, "-2")])
            .unwrap();
        assert_eq!(br, expected);
        assert_eq!(fn_bracket_global(&phi, &phi).unwrap(), expected);
    }

    #[test]
    fn both_routes_agree_on_mixed_degrees() {
        let c = chart3();
        let k = tangent1(&c, [["y", "0", "x*z"], ["1", "x", "0"], ["0", "y^2", "x"]]);
        let mut l = Form::zero(c.clone(), 2, ValueKind::Tangent);
        l.set_term(&[0, 1], vec![rf(&c, "z"), rf(&c, "0"), rf(&c, "x")]).unwrap();
        l.set_term(&[1, 2], vec![rf(&c, "0"), rf(&c, "x*y"), rf(&c, "1")]).unwrap();
        let a = fn_bracket(&k, &l).unwrap();
        let b = fn_bracket_global(&k, &l).unwrap();
        assert_eq!(a, b);
        // and for a 0-form against a 1-form
        let xi = VectorField::new(c.clone(), vec![rf(&c, "y"), rf(&c, "z"), rf(&c, "0")]).unwrap();
        let a = fn_bracket(&xi.to_form(), &k).unwrap();
        let b = fn_bracket_global(&xi.to_form(), &k).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn graded_antisymmetry() {
        let c = chart3();
        let k = tangent1(&c, [["y", "0", "0"], ["0", "x", "0"], ["0", "0", "1"]]);
        let mut l = Form::zero(c.clone(), 2, ValueKind::Tangent);
        l.set_term(&[0, 2], vec![rf(&c, "x"), rf(&c, "0"), rf(&c, "y")]).unwrap();
        // [K, L] = -(-1)^{kl} [L, K]; for k=1, l=2 that is [K,L] = -[L,K]
        let kl = fn_bracket(&k, &l).unwrap();
        let lk = fn_bracket(&l, &k).unwrap();
        assert_eq!(kl, lk.neg());
        // degree (1,1): odd-odd brackets are symmetric, [K,K'] = [K',K]
        let k2 = tangent1(&c, [["0", "z", "0"], ["x^2", "0", "0"], ["0", "0", "y"]]);
        let a = fn_bracket(&k, &k2).unwrap();
        let b = fn_bracket(&k2, &k).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn identity_tensor_is_central() {
        let c = chart3();
        let id = Form::identity_tangent(c.clone());
        let k = tangent1(&c, [["y", "0", "x*z"], ["1", "x", "0"], ["0", "y^2", "x"]]);
        assert!(fn_bracket(&id, &k).unwrap().is_zero());
        assert!(fn_bracket(&k, &id).unwrap().is_zero());
        assert!(fn_bracket(&id, &id).unwrap().is_zero());
    }

    #[test]
    fn graded_jacobi_for_one_forms() {
        let c = chart3();
        let k1 = tangent1(&c, [["y", "0", "0"], ["0", "0", "x"], ["1", "0", "0"]]);
        let k2 = tangent1(&c, [["0", "z", "0"], ["x", "0", "0"], ["0", "1", "0"]]);
        let k3 = tangent1(&c, [["0", "0", "1"], ["0", "y", "0"], ["0", "0", "x*y"]]);
        // all degrees 1: [[K1,K2],K3] + [[K2,K3],K1] + [[K3,K1],K2] = 0
        let a = fn_bracket(&fn_bracket(&k1, &k2).unwrap(), &k3).unwrap();
        let b = fn_bracket(&fn_bracket(&k2, &k3).unwrap(), &k1).unwrap();
        let d = fn_bracket(&fn_bracket(&k3, &k1).unwrap(), &k2).unwrap();
        assert!(a.add(&b).unwrap().add(&d).unwrap().is_zero());
    }

    #[test]
    fn lie_derivative_matches_zero_form_bracket() {
        let c = chart3();
        let xi = VectorField::new(c.clone(), vec![rf(&c, "1"), rf(&c, "x"), rf(&c, "0")]).unwrap();
        let k = tangent1(&c, [["y", "0", "0"], ["0", "x", "0"], ["0", "0", "z"]]);
        let via_bracket = lie_derivative_any(&k, &xi).unwrap();
        assert_eq!(via_bracket, fn_bracket(&xi.to_form(), &k).unwrap());
        // identity tensor is invariant under every flow
        let id = Form::identity_tangent(c.clone());
        assert!(lie_derivative_any(&id, &xi).unwrap().is_zero());
    }

    #[test]
    fn algebra_bracket_and_shuffle_oracle() {
        let c = chart3();
        let g = heis3();
        // om = e1 (x) dx + e2 (x) dy + e3 (x) (dz - x dy)
        let mut om = Form::zero(c.clone(), 1, ValueKind::algebra_valued(g.clone()));
        om.set_term(&[0], vec![rf(&c, "1"), rf(&c, "0"), rf(&c, "0")]).unwrap();
        om.set_term(&[1], vec![rf(&c, "0"), rf(&c, "1"), rf(&c, "-x")]).unwrap();
        om.set_term(&[2], vec![rf(&c, "0"), rf(&c, "0"), rf(&c, "1")]).unwrap();
        let br = alg_bracket(&om, &om).unwrap();
        // [om, om] = 2 dx^dy (x) e3 since [e1,e2] = e3
        let mut expected = Form::zero(c.clone(), 2, ValueKind::algebra_valued(g.clone()));
        expected
            .set_term(&[0, 1], vec![rf(&c, "0"), rf(&c, "0"), rf(&c, "2")])
            .unwrap();
        assert_eq!(br, expected);
        assert_eq!(alg_bracket_shuffle(&om, &om).unwrap(), expected);

        // graded anticommutativity for degrees (1, 2)
        let mut two = Form::zero(c.clone(), 2, ValueKind::algebra_valued(g.clone()));
        two.set_term(&[0, 1], vec![rf(&c, "y"), rf(&c, "0"), rf(&c, "0")]).unwrap();
        two.set_term(&[1, 2], vec![rf(&c, "0"), rf(&c, "x"), rf(&c, "0")]).unwrap();
        let ab = alg_bracket(&om, &two).unwrap();
        let ba = alg_bracket(&two, &om).unwrap();
        // [phi,psi] = -(-1)^{kl}[psi,phi] with k=1, l=2
        assert_eq!(ab, ba.neg());
        assert_eq!(alg_bracket_shuffle(&om, &two).unwrap(), ab);
    }

    #[test]
    fn rho_wedge_with_adjoint_matches_algebra_bracket() {
        let c = chart3();
        let g = heis3();
        let mut om = Form::zero(c.clone(), 1, ValueKind::algebra_valued(g.clone()));
        om.set_term(&[0], vec![rf(&c, "1"), rf(&c, "0"), rf(&c, "0")]).unwrap();
        om.set_term(&[1], vec![rf(&c, "0"), rf(&c, "1"), rf(&c, "-x")]).unwrap();
        om.set_term(&[2], vec![rf(&c, "0"), rf(&c, "0"), rf(&c, "1")]).unwrap();
        let ad: Vec<QMat> = (0..3).map(|i| g.ad_matrix(&g.basis_vec(i))).collect();
        let via_rho = rho_wedge(&om, &ad, &om).unwrap();
        assert_eq!(via_rho, alg_bracket(&om, &om).unwrap());
    }

    #[test]
    fn tensor_wedge_flattens_row_major() {
        let c = Chart::of(&["x", "y"]);
        let mut a = Form::zero(c.clone(), 1, ValueKind::vector(2));
        a.set_term(&[0], vec![rf(&c, "1"), rf(&c, "y")]).unwrap();
        let mut b = Form::zero(c.clone(), 1, ValueKind::vector(2));
        b.set_term(&[1], vec![rf(&c, "x"), rf(&c, "2")]).unwrap();
        let t = tensor_wedge(&a, &b).unwrap();
        assert_eq!(t.value_dim(), 4);
        let vals = &t.terms()[&vec![0u8, 1u8]];
        // (i,j) -> i*2 + j: values (1*x, 1*2, y*x, y*2)
        assert_eq!(vals[0], rf(&c, "x"));
        assert_eq!(vals[1], rf(&c, "2"));
        assert_eq!(vals[2], rf(&c, "x*y"));
        assert_eq!(vals[3], rf(&c, "2*y"));
    }
}
