//! Finite-dimensional Lie algebras over the rationals.
//!
//! Structure constants are exact; subalgebras are stored as reduced echelon
//! bases so equal subspaces are structurally equal.

use crate::cert::Certificate;
use crate::error::{Error, Result};
use crate::linalg::{self, QMat, QVec};
use crate::poly::{rat_int, rat_to_f64, Rat};
use num::{One, Zero};
use std::collections::BTreeMap;

/// Lie algebra given by structure constants in a fixed basis.
#[derive(Clone, Debug, PartialEq)]
pub struct LieAlgebra {
    names: Vec<String>,
    /// c[i][j] = coordinates of [e_i, e_j].
    table: Vec<Vec<QVec>>,
    /// Optional faithful matrix realization, one matrix per basis element.
    matrix_rep: Option<Vec<QMat>>,
}

impl LieAlgebra {
    /// Builds from a full bracket table; rejects antisymmetry violations.
    /// Dimension zero is allowed (it arises as a quotient).
    pub fn new(names: Vec<String>, table: Vec<Vec<QVec>>) -> Result<Self> {
        let n = names.len();
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(Error::Invalid(format!("duplicate basis name '{name}'")));
            }
        }
        if table.len() != n || table.iter().any(|row| row.len() != n || row.iter().any(|v| v.len() != n)) {
            return Err(Error::DimensionMismatch("bracket table must be n x n x n".into()));
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if table[i][j][k] != -table[j][i][k].clone() {
                        return Err(Error::Invalid(format!(
                            "bracket table violates antisymmetry at ({}, {}, {})",
                            names[i], names[j], names[k]
                        )));
                    }
                }
            }
        }
        Ok(LieAlgebra { names, table, matrix_rep: None })
    }

    /// Builds from sparse upper-triangular data: entries (i, j, coords of [e_i,e_j]) with i < j.
    pub fn from_sparse(names: Vec<String>, entries: &[(usize, usize, QVec)]) -> Result<Self> {
        let n = names.len();
        let mut table = vec![vec![vec![Rat::zero(); n]; n]; n];
        for (i, j, v) in entries {
            if *i >= n || *j >= n || v.len() != n {
                return Err(Error::DimensionMismatch("sparse bracket entry out of range".into()));
            }
            if i == j {
                return Err(Error::Invalid("diagonal bracket entries must vanish".into()));
            }
            table[*i][*j] = v.clone();
            table[*j][*i] = v.iter().map(|x| -x.clone()).collect();
        }
        Self::new(names, table)
    }

    /// Attaches a matrix realization; each basis bracket must match exactly.
    pub fn with_matrix_rep(mut self, rep: Vec<QMat>) -> Result<Self> {
        let n = self.dim();
        if rep.len() != n {
            return Err(Error::DimensionMismatch("one matrix per basis element required".into()));
        }
        let m = rep[0].len();
        for mat in &rep {
            if mat.len() != m || mat.iter().any(|row| row.len() != m) {
                return Err(Error::DimensionMismatch("matrices must be square of equal size".into()));
            }
        }
        for i in 0..n {
            for j in 0..n {
                let comm = mat_sub(&linalg::mat_mul(&rep[i], &rep[j]), &linalg::mat_mul(&rep[j], &rep[i]));
                let expected = self.combine_matrices(&rep, &self.table[i][j]);
                if comm != expected {
                    return Err(Error::Invalid(format!(
                        "matrix realization breaks [{}, {}]",
                        self.names[i], self.names[j]
                    )));
                }
            }
        }
        self.matrix_rep = Some(rep);
        Ok(self)
    }

    fn combine_matrices(&self, rep: &[QMat], coords: &QVec) -> QMat {
        let m = rep[0].len();
        let mut out = vec![vec![Rat::zero(); m]; m];
        for (mat, c) in rep.iter().zip(coords) {
            if c.is_zero() {
                continue;
            }
            for (oi, mi) in out.iter_mut().zip(mat) {
                for (o, x) in oi.iter_mut().zip(mi) {
                    *o += x * c;
                }
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn matrix_rep(&self) -> Option<&Vec<QMat>> {
        self.matrix_rep.as_ref()
    }

    pub fn structure(&self, i: usize, j: usize) -> &QVec {
        &self.table[i][j]
    }

    /// Bracket of coefficient vectors.
    pub fn bracket(&self, x: &QVec, y: &QVec) -> QVec {
        let n = self.dim();
        let mut out = vec![Rat::zero(); n];
        for i in 0..n {
            if x[i].is_zero() {
                continue;
            }
            for j in 0..n {
                if y[j].is_zero() {
                    continue;
                }
                let f = &x[i] * &y[j];
                for k in 0..n {
                    if !self.table[i][j][k].is_zero() {
                        out[k] += &self.table[i][j][k] * &f;
                    }
                }
            }
        }
        out
    }

    /// Basis vector e_i as a coefficient vector.
    pub fn basis_vec(&self, i: usize) -> QVec {
        let mut v = vec![Rat::zero(); self.dim()];
        v[i] = Rat::one();
        v
    }

    /// ad(x) as a matrix acting on coefficient vectors.
    pub fn ad_matrix(&self, x: &QVec) -> QMat {
        let n = self.dim();
        let mut a = vec![vec![Rat::zero(); n]; n];
        for j in 0..n {
            let col = self.bracket(x, &self.basis_vec(j));
            for k in 0..n {
                a[k][j] = col[k].clone();
            }
        }
        a
    }

    /// Jacobi identity over all basis triples; reports the first offender.
    pub fn check_jacobi(&self) -> Certificate {
        let n = self.dim();
        let mut cert = Certificate::new("jacobi");
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let ei = self.basis_vec(i);
                    let ej = self.basis_vec(j);
                    let ek = self.basis_vec(k);
                    let mut s = self.bracket(&ei, &self.bracket(&ej, &ek));
                    for (a, b) in s.iter_mut().zip(self.bracket(&ej, &self.bracket(&ek, &ei))) {
                        *a += b;
                    }
                    for (a, b) in s.iter_mut().zip(self.bracket(&ek, &self.bracket(&ei, &ej))) {
                        *a += b;
                    }
                    let zero = s.iter().all(|x| x.is_zero());
                    cert.exact(
                        format!("jacobi({}, {}, {})", self.names[i], self.names[j], self.names[k]),
                        zero,
                        format!("cyclic sum = {}", fmt_vec(&s, &self.names)),
                    );
                }
            }
        }
        if cert.items.is_empty() {
            cert.push("jacobi(trivial)", true, "no triples in dimension < 3");
        }
        cert
    }

    /// exp(t ad x): exact finite series when ad(x) is nilpotent, else numeric.
    pub fn exp_ad(&self, x: &QVec, t: &Rat) -> ExpAd {
        let n = self.dim();
        let a = self.ad_matrix(x);
        // Nilpotency test: a^n = 0 exactly.
        let mut pow = linalg::identity(n);
        let mut powers = vec![pow.clone()];
        let mut nilpotent = false;
        for _ in 0..n {
            pow = linalg::mat_mul(&pow, &a);
            if mat_is_zero(&pow) {
                nilpotent = true;
                break;
            }
            powers.push(pow.clone());
        }
        if nilpotent {
            let mut out = vec![vec![Rat::zero(); n]; n];
            let mut factorial = Rat::one();
            let mut tp = Rat::one();
            for (m, p) in powers.iter().enumerate() {
                if m > 0 {
                    factorial *= rat_int(m as i64);
                    tp *= t;
                }
                let c = tp.clone() / factorial.clone();
                for i in 0..n {
                    for j in 0..n {
                        out[i][j] += &p[i][j] * &c;
                    }
                }
            }
            ExpAd::Exact(out)
        } else {
            let af: Vec<Vec<f64>> = a
                .iter()
                .map(|row| row.iter().map(rat_to_f64).collect())
                .collect();
            ExpAd::Numeric(expm(&af, rat_to_f64(t)))
        }
    }

    /// Applies exp(t ad x) to a coefficient vector, exact when possible.
    pub fn exp_ad_apply(&self, x: &QVec, t: &Rat, y: &QVec) -> ExpAdVec {
        match self.exp_ad(x, t) {
            ExpAd::Exact(m) => ExpAdVec::Exact(linalg::mat_vec(&m, y)),
            ExpAd::Numeric(m) => {
                let yf: Vec<f64> = y.iter().map(rat_to_f64).collect();
                ExpAdVec::Numeric(matf_vec(&m, &yf))
            }
        }
    }
}

/// Matrix exponential result with an exactness flag.
#[derive(Clone, Debug)]
pub enum ExpAd {
    Exact(QMat),
    Numeric(Vec<Vec<f64>>),
}

impl ExpAd {
    pub fn is_exact(&self) -> bool {
        matches!(self, ExpAd::Exact(_))
    }

    pub fn to_f64(&self) -> Vec<Vec<f64>> {
        match self {
            ExpAd::Exact(m) => m.iter().map(|r| r.iter().map(rat_to_f64).collect()).collect(),
            ExpAd::Numeric(m) => m.clone(),
        }
    }
}

#[derive(Clone, Debug)]
pub enum ExpAdVec {
    Exact(QVec),
    Numeric(Vec<f64>),
}

impl ExpAdVec {
    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            ExpAdVec::Exact(v) => v.iter().map(rat_to_f64).collect(),
            ExpAdVec::Numeric(v) => v.clone(),
        }
    }
}

fn mat_sub(a: &QMat, b: &QMat) -> QMat {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x - y).collect())
        .collect()
}

fn mat_is_zero(a: &QMat) -> bool {
    a.iter().all(|r| r.iter().all(|x| x.is_zero()))
}

fn matf_vec(a: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

/// Dense matrix exponential by scaling and squaring with a Taylor core.
fn expm(a: &[Vec<f64>], t: f64) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut at: Vec<Vec<f64>> = a.iter().map(|row| row.iter().map(|x| x * t).collect()).collect();
    let norm: f64 = at
        .iter()
        .map(|row| row.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scale = 2f64.powi(-s);
    for row in at.iter_mut() {
        for x in row.iter_mut() {
            *x *= scale;
        }
    }
    let mut out = idf(n);
    let mut term = idf(n);
    for k in 1..30 {
        term = matf_mul(&term, &at);
        for row in term.iter_mut() {
            for x in row.iter_mut() {
                *x /= k as f64;
            }
        }
        let mut max = 0.0f64;
        for (oi, ti) in out.iter_mut().zip(&term) {
            for (o, v) in oi.iter_mut().zip(ti) {
                *o += v;
                max = max.max(v.abs());
            }
        }
        if max < 1e-18 {
            break;
        }
    }
    for _ in 0..s {
        out = matf_mul(&out, &out);
    }
    out
}

fn idf(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn matf_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let m = b[0].len();
    let k = b.len();
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| (0..k).map(|t| a[i][t] * b[t][j]).sum())
                .collect()
        })
        .collect()
}

fn fmt_vec(v: &QVec, names: &[String]) -> String {
    let mut parts = Vec::new();
    for (c, name) in v.iter().zip(names) {
        if !c.is_zero() {
            parts.push(format!("{}*{}", c, name));
        }
    }
    if parts.is_empty() {
        "0".into()
    } else {
        parts.join(" + ")
    }
}

// ---------------------------------------------------------------------------
// Subalgebras, normalizers, quotients
// ---------------------------------------------------------------------------

/// Subspace of a Lie algebra stored as a reduced echelon basis.
#[derive(Clone, Debug, PartialEq)]
pub struct Subalgebra {
    dim_parent: usize,
    basis: QMat,
}

impl Subalgebra {
    /// Span of the given vectors; the stored basis is canonical (rref).
    pub fn span(dim_parent: usize, vectors: &[QVec]) -> Result<Self> {
        for v in vectors {
            if v.len() != dim_parent {
                return Err(Error::DimensionMismatch("subalgebra vector length".into()));
            }
        }
        let basis = if vectors.is_empty() {
            Vec::new()
        } else {
            linalg::row_space_basis(&vectors.to_vec())
        };
        Ok(Subalgebra { dim_parent, basis })
    }

    pub fn zero(dim_parent: usize) -> Self {
        Subalgebra { dim_parent, basis: Vec::new() }
    }

    pub fn full(dim_parent: usize) -> Self {
        Subalgebra { dim_parent, basis: linalg::identity(dim_parent) }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn dim_parent(&self) -> usize {
        self.dim_parent
    }

    pub fn basis(&self) -> &QMat {
        &self.basis
    }

    pub fn contains(&self, v: &[Rat]) -> bool {
        linalg::in_row_space(&self.basis, v)
    }

    /// Whether the subspace is closed under the bracket of the parent algebra.
    pub fn is_subalgebra(&self, parent: &LieAlgebra) -> bool {
        for a in &self.basis {
            for b in &self.basis {
                if !self.contains(&parent.bracket(a, b)) {
                    return false;
                }
            }
        }
        true
    }
}

/// Infinitesimal normalizer n(S) = { x : [x, S] is contained in S }.
pub fn normalizer(parent: &LieAlgebra, sub: &Subalgebra) -> Result<Subalgebra> {
    let n = parent.dim();
    if sub.dim_parent() != n {
        return Err(Error::DimensionMismatch("subalgebra belongs to another algebra".into()));
    }
    if sub.dim() == 0 {
        return Subalgebra::span(n, &linalg::identity(n));
    }
    // Row r of conditions: for each generator s and each non-pivot coordinate
    // of the quotient, the reduced component of [x, s] must vanish.
    let mut rows: QMat = Vec::new();
    for s in sub.basis() {
        // columns of ad(-, s): bracket(e_i, s)
        let cols: Vec<QVec> = (0..n).map(|i| parent.bracket(&parent.basis_vec(i), s)).collect();
        for coord in 0..n {
            // reduced residual of [x,s] at output coordinate `coord` is linear in x
            let mut row = vec![Rat::zero(); n];
            let mut nontrivial = false;
            for (i, col) in cols.iter().enumerate() {
                let reduced = linalg::reduce_mod_rows(sub.basis(), col);
                if !reduced[coord].is_zero() {
                    row[i] = reduced[coord].clone();
                    nontrivial = true;
                }
            }
            if nontrivial {
                rows.push(row);
            }
        }
    }
    if rows.is_empty() {
        return Subalgebra::span(n, &linalg::identity(n));
    }
    let ns = linalg::nullspace(&rows);
    Subalgebra::span(n, &ns)
}

/// Quotient n(S)/S: returns the quotient algebra together with the chosen
/// complement representatives (rows, in parent coordinates).
pub fn weyl_algebra(parent: &LieAlgebra, sub: &Subalgebra) -> Result<(LieAlgebra, QMat)> {
    if !sub.is_subalgebra(parent) {
        return Err(Error::Invalid("quotient base is not a subalgebra".into()));
    }
    let nz = normalizer(parent, sub)?;
    // Complement representatives: reduce normalizer basis mod S, keep nonzero.
    let mut reps: QMat = Vec::new();
    for v in nz.basis() {
        let r = linalg::reduce_mod_rows(sub.basis(), v);
        if r.iter().any(|x| !x.is_zero()) {
            reps.push(r);
        }
    }
    let reps = if reps.is_empty() { reps } else { linalg::row_space_basis(&reps) };
    let q = reps.len();
    if q == 0 {
        return Ok((LieAlgebra::new(Vec::new(), Vec::new())?, reps));
    }
    // Solve [r_a, r_b] = s + sum_c gamma^c r_c with s in S.
    let n = parent.dim();
    let mut solve_cols: QMat = Vec::new();
    for s in sub.basis() {
        solve_cols.push(s.clone());
    }
    for r in &reps {
        solve_cols.push(r.clone());
    }
    // transpose to columns
    let cols = solve_cols.len();
    let mat: QMat = (0..n)
        .map(|row| (0..cols).map(|c| solve_cols[c][row].clone()).collect())
        .collect();
    let mut table = vec![vec![vec![Rat::zero(); q]; q]; q];
    for a in 0..q {
        for b in 0..q {
            let w = parent.bracket(&reps[a], &reps[b]);
            let sol = linalg::solve(&mat, &w).ok_or_else(|| {
                Error::Invalid("normalizer bracket escaped normalizer span".into())
            })?;
            for c in 0..q {
                table[a][b][c] = sol[sub.dim() + c].clone();
            }
        }
    }
    let names: Vec<String> = (0..q).map(|i| format!("q{}", i + 1)).collect();
    Ok((LieAlgebra::new(names, table)?, reps))
}

// ---------------------------------------------------------------------------
// Invariant symmetric polynomials
// ---------------------------------------------------------------------------

/// Symmetric k-linear form on the algebra, stored by sorted basis multi-index.
#[derive(Clone, Debug, PartialEq)]
pub struct InvariantPolynomial {
    dim: usize,
    degree: usize,
    coeffs: BTreeMap<Vec<usize>, Rat>,
}

impl InvariantPolynomial {
    pub fn new(dim: usize, degree: usize, entries: &[(Vec<usize>, Rat)]) -> Result<Self> {
        if degree == 0 {
            return Err(Error::Invalid("symmetric form degree must be positive".into()));
        }
        let mut coeffs = BTreeMap::new();
        for (idx, c) in entries {
            if idx.len() != degree {
                return Err(Error::DimensionMismatch("index tuple length != degree".into()));
            }
            if idx.iter().any(|&i| i >= dim) {
                return Err(Error::DimensionMismatch("index out of range".into()));
            }
            let mut s = idx.clone();
            s.sort_unstable();
            if c.is_zero() {
                continue;
            }
            if coeffs.insert(s, c.clone()).is_some() {
                return Err(Error::Invalid("duplicate symmetric index tuple".into()));
            }
        }
        Ok(InvariantPolynomial { dim, degree, coeffs })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeffs(&self) -> &BTreeMap<Vec<usize>, Rat> {
        &self.coeffs
    }

    /// Value on a basis tuple (any order).
    pub fn get(&self, idx: &[usize]) -> Rat {
        let mut s = idx.to_vec();
        s.sort_unstable();
        self.coeffs.get(&s).cloned().unwrap_or_else(Rat::zero)
    }

    /// Full polarization of X -> tr(rho(X)^k).
    pub fn trace_polynomial(algebra: &LieAlgebra, k: usize) -> Result<Self> {
        use itertools::Itertools;
        let rep = algebra
            .matrix_rep()
            .ok_or_else(|| Error::Invalid("trace polynomial needs a matrix realization".into()))?;
        if k == 0 {
            return Err(Error::Invalid("trace polynomial degree must be positive".into()));
        }
        let n = algebra.dim();
        let mut entries = Vec::new();
        for idx in (0..n).combinations_with_replacement(k) {
            let mut total = Rat::zero();
            let mut count = 0;
            for perm in idx.iter().cloned().permutations(k).unique() {
                let mut prod = rep[perm[0]].clone();
                for &p in &perm[1..] {
                    prod = linalg::mat_mul(&prod, &rep[p]);
                }
                let tr: Rat = (0..prod.len()).map(|i| prod[i][i].clone()).fold(Rat::zero(), |a, b| a + b);
                total += tr;
                count += 1;
            }
            // Mean over distinct orderings equals (1/k!) over all orderings:
            // repeated orderings contribute equal traces with equal multiplicity.
            let value = total / rat_int(count as i64);
            if !value.is_zero() {
                entries.push((idx, value));
            }
        }
        InvariantPolynomial::new(n, k, &entries)
    }
}

/// ad-invariance: sum over slots of f(.., [x, v_m], ..) vanishes for all basis
/// x and all basis tuples. Exact; reports the first offending pair.
pub fn check_invariance(f: &InvariantPolynomial, algebra: &LieAlgebra) -> Result<Certificate> {
    use itertools::Itertools;
    if f.dim() != algebra.dim() {
        return Err(Error::DimensionMismatch("form and algebra dimensions differ".into()));
    }
    let n = algebra.dim();
    let k = f.degree();
    let mut cert = Certificate::new("ad-invariance");
    for x in 0..n {
        for idx in (0..n).combinations_with_replacement(k) {
            let mut total = Rat::zero();
            for slot in 0..k {
                // replace slot by [e_x, e_idx[slot]]
                let br = algebra.structure(x, idx[slot]);
                for (r, c) in br.iter().enumerate() {
                    if c.is_zero() {
                        continue;
                    }
                    let mut tuple = idx.clone();
                    tuple[slot] = r;
                    total += c * &f.get(&tuple);
                }
            }
            let ok = total.is_zero();
            if !ok {
                cert.exact(
                    format!(
                        "invariance(x={}, tuple=({}))",
                        algebra.names()[x],
                        idx.iter().map(|&i| algebra.names()[i].clone()).join(", ")
                    ),
                    false,
                    format!("residual {}", total),
                );
                return Ok(cert);
            }
        }
    }
    cert.push("invariance", true, format!("all slots vanish for degree {k}"));
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::rat;

    pub fn heis3() -> LieAlgebra {
        let names = vec!["e1".into(), "e2".into(), "e3".into()];
        let e3 = vec![Rat::zero(), Rat::zero(), Rat::one()];
        LieAlgebra::from_sparse(names, &[(0, 1, e3)]).unwrap()
    }

    pub fn sl2() -> LieAlgebra {
        // basis (h, e, f): [h,e] = 2e, [h,f] = -2f, [e,f] = h
        let names = vec!["h".into(), "e".into(), "f".into()];
        LieAlgebra::from_sparse(
            names,
            &[
                (0, 1, vec![rat_int(0), rat_int(2), rat_int(0)]),
                (0, 2, vec![rat_int(0), rat_int(0), rat_int(-2)]),
                (1, 2, vec![rat_int(1), rat_int(0), rat_int(0)]),
            ],
        )
        .unwrap()
        .with_matrix_rep(vec![
            vec![vec![rat_int(1), rat_int(0)], vec![rat_int(0), rat_int(-1)]],
            vec![vec![rat_int(0), rat_int(1)], vec![rat_int(0), rat_int(0)]],
            vec![vec![rat_int(0), rat_int(0)], vec![rat_int(1), rat_int(0)]],
        ])
        .unwrap()
    }

    #[test]
    fn antisymmetry_rejected_with_location() {
        let names = vec!["a".into(), "b".into()];
        let mut table = vec![vec![vec![Rat::zero(); 2]; 2]; 2];
        table[0][1][0] = Rat::one();
        // deliberately break antisymmetry
        table[1][0][0] = Rat::one();
        let err = LieAlgebra::new(names, table).unwrap_err();
        assert!(err.to_string().contains("antisymmetry"));
    }

    #[test]
    fn jacobi_passes_for_heisenberg_and_sl2() {
        assert!(heis3().check_jacobi().passed());
        assert!(sl2().check_jacobi().passed());
    }

    #[test]
    fn jacobi_fails_with_offending_triple() {
        // [a,b]=c, [a,c]=a breaks Jacobi.
        let names = vec!["a".into(), "b".into(), "c".into()];
        let alg = LieAlgebra::from_sparse(
            names,
            &[
                (0, 1, vec![rat_int(0), rat_int(0), rat_int(1)]),
                (0, 2, vec![rat_int(1), rat_int(0), rat_int(0)]),
            ],
        )
        .unwrap();
        let cert = alg.check_jacobi();
        assert!(!cert.passed());
        assert!(cert.summary().contains("jacobi(a, b, c)"));
    }

    #[test]
    fn exp_ad_nilpotent_is_exact() {
        let h = heis3();
        let m = h.exp_ad(&h.basis_vec(0), &Rat::one());
        assert!(m.is_exact());
        match m {
            ExpAd::Exact(m) => {
                // e2 maps to e2 + e3, e1 and e3 fixed
                let col: Vec<Rat> = (0..3).map(|k| m[k][1].clone()).collect();
                assert_eq!(col, vec![Rat::zero(), Rat::one(), Rat::one()]);
                assert_eq!(m[0][0], Rat::one());
                assert_eq!(m[2][2], Rat::one());
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn exp_ad_semisimple_is_numeric() {
        let s = sl2();
        let m = s.exp_ad(&s.basis_vec(0), &rat(1, 2));
        assert!(!m.is_exact());
        let mf = m.to_f64();
        // e^{t ad h} e = e^{2t} e with t = 1/2
        assert!((mf[1][1] - (1.0f64).exp()).abs() < 1e-12);
        assert!((mf[2][2] - (-1.0f64).exp()).abs() < 1e-12);
        assert!((mf[0][0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalizer_cases() {
        let h = heis3();
        let center = Subalgebra::span(3, &[h.basis_vec(2)]).unwrap();
        let n = normalizer(&h, &center).unwrap();
        assert_eq!(n.dim(), 3);

        let s = sl2();
        let borel = Subalgebra::span(3, &[s.basis_vec(0), s.basis_vec(2)]).unwrap();
        let n = normalizer(&s, &borel).unwrap();
        assert_eq!(n, borel);
    }

    #[test]
    fn weyl_algebra_of_free_point_is_whole_algebra() {
        let h = heis3();
        let (q, reps) = weyl_algebra(&h, &Subalgebra::zero(3)).unwrap();
        assert_eq!(q.dim(), 3);
        assert_eq!(reps.len(), 3);
        // quotient of zero ideal preserves the bracket table
        assert_eq!(q.structure(0, 1), &vec![Rat::zero(), Rat::zero(), Rat::one()]);
    }

    #[test]
    fn weyl_algebra_borel_is_zero() {
        let s = sl2();
        let borel = Subalgebra::span(3, &[s.basis_vec(0), s.basis_vec(2)]).unwrap();
        let (_, reps) = weyl_algebra(&s, &borel).unwrap();
        assert!(reps.is_empty());
    }

    #[test]
    fn weyl_algebra_abelian_line() {
        let names = vec!["e1".into(), "e2".into()];
        let ab = LieAlgebra::from_sparse(names, &[]).unwrap();
        let line = Subalgebra::span(2, &[ab.basis_vec(0)]).unwrap();
        let (q, reps) = weyl_algebra(&ab, &line).unwrap();
        assert_eq!(reps.len(), 1);
        assert_eq!(q.dim(), 1);
        assert!(q.structure(0, 0).iter().all(|x| x.is_zero()));
    }

    #[test]
    fn trace_polynomial_sl2_degree2() {
        let s = sl2();
        let f = InvariantPolynomial::trace_polynomial(&s, 2).unwrap();
        assert_eq!(f.get(&[0, 0]), rat_int(2));
        assert_eq!(f.get(&[1, 2]), rat_int(1));
        assert_eq!(f.get(&[1, 1]), Rat::zero());
        assert!(check_invariance(&f, &s).unwrap().passed());
    }

    #[test]
    fn invariance_counterexample_on_heisenberg_dual() {
        let h = heis3();
        // e3* fails: f([e1,e2]) = 1
        let f = InvariantPolynomial::new(3, 1, &[(vec![2], Rat::one())]).unwrap();
        let cert = check_invariance(&f, &h).unwrap();
        assert!(!cert.passed());
        // e1* passes
        let f = InvariantPolynomial::new(3, 1, &[(vec![0], Rat::one())]).unwrap();
        assert!(check_invariance(&f, &h).unwrap().passed());
    }
}
