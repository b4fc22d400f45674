//! Exact linear algebra over the rationals and over the rational-function field.

use crate::error::{Error, Result};
use crate::poly::Rat;
use crate::ratfunc::RF;
use num::{One, Zero};

pub type QMat = Vec<Vec<Rat>>;
pub type QVec = Vec<Rat>;

/// Reduced row echelon form; returns (rref, pivot columns).
pub fn rref(mat: &QMat) -> (QMat, Vec<usize>) {
    let mut m = mat.clone();
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r >= rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else { continue };
        m.swap(r, p);
        let inv = Rat::one() / m[r][c].clone();
        for x in m[r].iter_mut() {
            *x *= &inv;
        }
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for j in 0..cols {
                    let t = &m[r][j] * &f;
                    m[i][j] -= t;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    m.truncate(r);
    while m.len() < rows {
        m.push(vec![Rat::zero(); cols]);
    }
    (m, pivots)
}

pub fn rank(mat: &QMat) -> usize {
    rref(mat).1.len()
}

/// Nonzero rows of the rref: a canonical basis of the row space.
pub fn row_space_basis(mat: &QMat) -> QMat {
    let (m, pivots) = rref(mat);
    m.into_iter().take(pivots.len()).collect()
}

/// Canonical basis of the solution space of M x = 0.
pub fn nullspace(mat: &QMat) -> QMat {
    let rows = mat.len();
    let cols = if rows == 0 { return Vec::new() } else { mat[0].len() };
    let (m, pivots) = rref(mat);
    let mut base = Vec::new();
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    for &f in &free {
        let mut v = vec![Rat::zero(); cols];
        v[f] = Rat::one();
        for (r, &p) in pivots.iter().enumerate() {
            v[p] = -m[r][f].clone();
        }
        base.push(v);
    }
    base
}

/// One solution of M x = b, if any.
pub fn solve(mat: &QMat, b: &QVec) -> Option<QVec> {
    let rows = mat.len();
    let cols = if rows == 0 { 0 } else { mat[0].len() };
    let mut aug: QMat = mat
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(bi.clone());
            r
        })
        .collect();
    if rows == 0 {
        return Some(vec![Rat::zero(); cols]);
    }
    let (m, pivots) = rref(&aug);
    aug = m;
    if pivots.contains(&cols) {
        return None;
    }
    let mut x = vec![Rat::zero(); cols];
    for (r, &p) in pivots.iter().enumerate() {
        x[p] = aug[r][cols].clone();
    }
    Some(x)
}

/// Whether v lies in the row space spanned by a rref basis.
pub fn in_row_space(basis: &QMat, v: &[Rat]) -> bool {
    reduce_mod_rows(basis, v).iter().all(|x| x.is_zero())
}

/// Reduces v modulo the span of rref rows; zero iff v is in the span.
pub fn reduce_mod_rows(basis: &QMat, v: &[Rat]) -> QVec {
    let mut w = v.to_vec();
    for row in basis {
        let Some(p) = row.iter().position(|x| !x.is_zero()) else { continue };
        debug_assert!(row[p].is_one(), "basis rows must be in rref");
        if !w[p].is_zero() {
            let f = w[p].clone();
            for (wi, ri) in w.iter_mut().zip(row) {
                let t = ri * &f;
                *wi -= t;
            }
        }
    }
    w
}

pub fn mat_mul(a: &QMat, b: &QMat) -> QMat {
    let n = a.len();
    let m = if n == 0 { 0 } else { a[0].len() };
    let k = if b.is_empty() { 0 } else { b[0].len() };
    assert!(b.len() == m, "matrix product shape mismatch");
    (0..n)
        .map(|i| {
            (0..k)
                .map(|j| {
                    let mut s = Rat::zero();
                    for t in 0..m {
                        s += &a[i][t] * &b[t][j];
                    }
                    s
                })
                .collect()
        })
        .collect()
}

pub fn mat_vec(a: &QMat, v: &QVec) -> QVec {
    a.iter()
        .map(|row| {
            let mut s = Rat::zero();
            for (x, y) in row.iter().zip(v) {
                s += x * y;
            }
            s
        })
        .collect()
}

pub fn identity(n: usize) -> QMat {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { Rat::one() } else { Rat::zero() }).collect())
        .collect()
}

/// Inverse of a square rational matrix.
pub fn invert(mat: &QMat) -> Result<QMat> {
    let n = mat.len();
    let mut aug: QMat = mat
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { Rat::one() } else { Rat::zero() }));
            r
        })
        .collect();
    let (m, pivots) = rref(&aug);
    aug = m;
    if pivots.len() < n || pivots.iter().take(n).enumerate().any(|(i, &p)| p != i) {
        return Err(Error::Singular("rational matrix is not invertible".into()));
    }
    Ok(aug.into_iter().take(n).map(|row| row[n..].to_vec()).collect())
}

// ---------------------------------------------------------------------------
// Matrices over the rational-function field
// ---------------------------------------------------------------------------

pub type FMat = Vec<Vec<RF>>;

pub fn f_identity(n: usize, nvars: usize) -> FMat {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { RF::one(nvars) } else { RF::zero(nvars) })
                .collect()
        })
        .collect()
}

pub fn f_mat_mul(a: &FMat, b: &FMat) -> FMat {
    let n = a.len();
    let m = if n == 0 { 0 } else { a[0].len() };
    let k = if b.is_empty() { 0 } else { b[0].len() };
    assert!(b.len() == m, "matrix product shape mismatch");
    (0..n)
        .map(|i| {
            (0..k)
                .map(|j| {
                    let mut s = if m == 0 { RF::zero(0) } else { RF::zero(a[i][0].nvars()) };
                    for t in 0..m {
                        s = s.add(&a[i][t].mul(&b[t][j]));
                    }
                    s
                })
                .collect()
        })
        .collect()
}

pub fn f_mat_vec(a: &FMat, v: &[RF]) -> Vec<RF> {
    a.iter()
        .map(|row| {
            let mut s = RF::zero(row[0].nvars());
            for (x, y) in row.iter().zip(v) {
                s = s.add(&x.mul(y));
            }
            s
        })
        .collect()
}

/// Inverse of a square matrix over the rational-function field.
pub fn f_invert(mat: &FMat) -> Result<FMat> {
    let n = mat.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let nvars = mat[0][0].nvars();
    let mut aug: Vec<Vec<RF>> = mat
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { RF::one(nvars) } else { RF::zero(nvars) }));
            r
        })
        .collect();
    for c in 0..n {
        let Some(p) = (c..n).find(|&i| !aug[i][c].is_zero()) else {
            return Err(Error::Singular(format!("column {c} has no pivot")));
        };
        aug.swap(c, p);
        let inv = aug[c][c].inv()?;
        for j in 0..2 * n {
            aug[c][j] = aug[c][j].mul(&inv);
        }
        for i in 0..n {
            if i != c && !aug[i][c].is_zero() {
                let f = aug[i][c].clone();
                for j in 0..2 * n {
                    let t = aug[c][j].mul(&f);
                    aug[i][j] = aug[i][j].sub(&t);
                }
            }
        }
    }
    Ok(aug.into_iter().map(|row| row[n..].to_vec()).collect())
}

/// Rank of a matrix over the rational-function field.
pub fn f_rank(mat: &FMat) -> usize {
    let mut m = mat.to_vec();
    let rows = m.len();
    if rows == 0 {
        return 0;
    }
    let cols = m[0].len();
    let mut r = 0;
    for c in 0..cols {
        if r >= rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else { continue };
        m.swap(r, p);
        let inv = m[r][c].inv().expect("pivot is nonzero");
        for j in 0..cols {
            m[r][j] = m[r][j].mul(&inv);
        }
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for j in 0..cols {
                    let t = m[r][j].mul(&f);
                    m[i][j] = m[i][j].sub(&t);
                }
            }
        }
        r += 1;
    }
    r
}

/// One solution of M x = b over the rational-function field, if any.
pub fn f_solve(mat: &FMat, b: &[RF]) -> Option<Vec<RF>> {
    let rows = mat.len();
    if rows == 0 {
        return Some(Vec::new());
    }
    let cols = mat[0].len();
    let nvars = mat[0][0].nvars();
    let mut aug: Vec<Vec<RF>> = mat
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(bi.clone());
            r
        })
        .collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols + 1 {
        if r >= rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !aug[i][c].is_zero()) else { continue };
        if c == cols {
            return None; // pivot in the augmented column
        }
        aug.swap(r, p);
        let inv = aug[r][c].inv().expect("pivot is nonzero");
        for j in 0..cols + 1 {
            aug[r][j] = aug[r][j].mul(&inv);
        }
        for i in 0..rows {
            if i != r && !aug[i][c].is_zero() {
                let f = aug[i][c].clone();
                for j in 0..cols + 1 {
                    let t = aug[r][j].mul(&f);
                    aug[i][j] = aug[i][j].sub(&t);
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    let mut x = vec![RF::zero(nvars); cols];
    for (r, &p) in pivots.iter().enumerate() {
        x[p] = aug[r][cols].clone();
    }
    Some(x)
}

/// Determinant of a square matrix over the rational-function field.
pub fn f_det(mat: &FMat) -> RF {
    let n = mat.len();
    if n == 0 {
        return RF::one(1);
    }
    let nvars = mat[0][0].nvars();
    let mut m = mat.to_vec();
    let mut det = RF::one(nvars);
    for c in 0..n {
        let Some(p) = (c..n).find(|&i| !m[i][c].is_zero()) else {
            return RF::zero(nvars);
        };
        if p != c {
            m.swap(c, p);
            det = det.neg();
        }
        det = det.mul(&m[c][c]);
        let inv = m[c][c].inv().expect("pivot is nonzero");
        for i in c + 1..n {
            if !m[i][c].is_zero() {
                let f = m[i][c].mul(&inv);
                for j in c..n {
                    let t = m[c][j].mul(&f);
                    m[i][j] = m[i][j].sub(&t);
                }
            }
        }
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{rat, rat_int};
    use crate::ratfunc::parse_expr;

    fn qm(rows: &[&[i64]]) -> QMat {
        rows.iter().map(|r| r.iter().map(|&x| rat_int(x)).collect()).collect()
    }

    #[test]
    fn rref_and_rank() {
        let m = qm(&[&[1, 2, 3], &[2, 4, 6], &[1, 0, 1]]);
        let (r, pivots) = rref(&m);
        assert_eq!(pivots, vec![0, 1]);
        assert_eq!(rank(&m), 2);
        assert_eq!(r[0][0], rat_int(1));
    }

    #[test]
    fn nullspace_matches_kernel() {
        let m = qm(&[&[1, 2, 3], &[0, 1, 1]]);
        let ns = nullspace(&m);
        assert_eq!(ns.len(), 1);
        for v in &ns {
            let mv = mat_vec(&m, v);
            assert!(mv.iter().all(|x| x.is_zero()));
        }
    }

    #[test]
    fn solve_and_invert() {
        let m = qm(&[&[2, 1], &[1, 1]]);
        let b = vec![rat_int(3), rat_int(2)];
        let x = solve(&m, &b).unwrap();
        assert_eq!(mat_vec(&m, &x), b);
        let inv = invert(&m).unwrap();
        assert_eq!(mat_mul(&m, &inv), identity(2));
        assert!(invert(&qm(&[&[1, 2], &[2, 4]])).is_err());
    }

    #[test]
    fn row_space_membership() {
        let basis = row_space_basis(&qm(&[&[1, 0, 2], &[0, 1, 1]]));
        assert!(in_row_space(&basis, &[rat_int(2), rat_int(3), rat_int(7)]));
        assert!(!in_row_space(&basis, &[rat_int(0), rat_int(0), rat_int(1)]));
    }

    #[test]
    fn rational_function_inverse() {
        let names = vec!["x".to_string()];
        let e = |s: &str| parse_expr(s, &names).unwrap();
        let m = vec![vec![e("1"), e("0")], vec![e("x"), e("1")]];
        let inv = f_invert(&m).unwrap();
        assert_eq!(inv[1][0], e("-x"));
        let prod = f_mat_mul(&m, &inv);
        assert!(prod[0][0].is_one() && prod[1][1].is_one());
        assert!(prod[0][1].is_zero() && prod[1][0].is_zero());
        assert_eq!(f_det(&m), e("1"));
        assert_eq!(f_rank(&m), 2);
    }

    #[test]
    fn rational_scale() {
        assert_eq!(rat(2, 4), rat(1, 2));
    }
}
