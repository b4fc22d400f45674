//! Sparse multivariate polynomials with exact rational coefficients.
//!
//! Monomials are exponent vectors ordered graded-lexicographically in the
//! chart's variable order. Zero coefficients are never stored, so two equal
//! polynomials are structurally identical.

use num::{BigInt, BigRational, One, Signed, Zero};
use std::collections::BTreeMap;

/// Arbitrary-precision rational scalar used throughout the crate.
pub type Rat = BigRational;

/// Builds a rational from an integer.
pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Builds the rational n/d. Panics when d = 0.
pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// Exponent vector of a monomial.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial(pub Vec<u16>);

impl Monomial {
    pub fn constant(nvars: usize) -> Self {
        Monomial(vec![0; nvars])
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        Monomial(e)
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().map(|&e| e as u32).sum()
    }

    pub fn is_constant(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn mul(&self, o: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }

    /// Whether self divides o componentwise.
    pub fn divides(&self, o: &Monomial) -> bool {
        self.0.iter().zip(&o.0).all(|(a, b)| a <= b)
    }

    /// Componentwise quotient; requires self.divides(o) on the caller.
    pub fn div_into(&self, o: &Monomial) -> Monomial {
        Monomial(o.0.iter().zip(&self.0).map(|(b, a)| b - a).collect())
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Multivariate polynomial over the rationals.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Poly {
    pub nvars: usize,
    pub terms: BTreeMap<Monomial, Rat>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Poly { nvars, terms: BTreeMap::new() }
    }

    pub fn one(nvars: usize) -> Self {
        Poly::constant(nvars, Rat::one())
    }

    pub fn constant(nvars: usize, c: Rat) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Monomial::constant(nvars), c);
        }
        Poly { nvars, terms }
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        assert!(i < nvars, "variable index out of range");
        let mut terms = BTreeMap::new();
        terms.insert(Monomial::var(nvars, i), Rat::one());
        Poly { nvars, terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty() || (self.terms.len() == 1 && self.terms.keys().next().unwrap().is_constant())
    }

    pub fn is_one(&self) -> bool {
        self.is_constant() && self.as_constant().map(|c| c.is_one()).unwrap_or(false)
    }

    /// Constant value when the polynomial has no variable dependence.
    pub fn as_constant(&self) -> Option<Rat> {
        if self.terms.is_empty() {
            return Some(Rat::zero());
        }
        if self.is_constant() {
            return Some(self.terms.values().next().unwrap().clone());
        }
        None
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|m| m.total_degree()).max().unwrap_or(0)
    }

    pub fn degree_in(&self, v: usize) -> u16 {
        self.terms.keys().map(|m| m.0[v]).max().unwrap_or(0)
    }

    /// Leading (monomial, coefficient) in graded-lex order.
    pub fn leading(&self) -> Option<(&Monomial, &Rat)> {
        self.terms.iter().next_back()
    }

    fn insert_term(terms: &mut BTreeMap<Monomial, Rat>, m: Monomial, c: Rat) {
        if c.is_zero() {
            return;
        }
        match terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let s = e.get().clone() + c;
                if s.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    pub fn add(&self, o: &Poly) -> Poly {
        assert_eq!(self.nvars, o.nvars, "variable count mismatch");
        let mut terms = self.terms.clone();
        for (m, c) in &o.terms {
            Self::insert_term(&mut terms, m.clone(), c.clone());
        }
        Poly { nvars: self.nvars, terms }
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> Poly {
        Poly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c.clone())).collect(),
        }
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        assert_eq!(self.nvars, o.nvars, "variable count mismatch");
        let mut terms = BTreeMap::new();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &o.terms {
                Self::insert_term(&mut terms, m1.mul(m2), c1 * c2);
            }
        }
        Poly { nvars: self.nvars, terms }
    }

    pub fn scale(&self, c: &Rat) -> Poly {
        if c.is_zero() {
            return Poly::zero(self.nvars);
        }
        Poly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(m, k)| (m.clone(), k * c)).collect(),
        }
    }

    pub fn pow(&self, e: u32) -> Poly {
        let mut acc = Poly::one(self.nvars);
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    /// Partial derivative with respect to variable v.
    pub fn deriv(&self, v: usize) -> Poly {
        let mut terms = BTreeMap::new();
        for (m, c) in &self.terms {
            let e = m.0[v];
            if e > 0 {
                let mut em = m.clone();
                em.0[v] = e - 1;
                Self::insert_term(&mut terms, em, c * rat_int(e as i64));
            }
        }
        Poly { nvars: self.nvars, terms }
    }

    pub fn eval_rat(&self, point: &[Rat]) -> Rat {
        assert_eq!(point.len(), self.nvars, "evaluation point arity mismatch");
        let mut acc = Rat::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (v, &e) in m.0.iter().enumerate() {
                for _ in 0..e {
                    t *= &point[v];
                }
            }
            acc += t;
        }
        acc
    }

    pub fn eval_f64(&self, point: &[f64]) -> f64 {
        assert_eq!(point.len(), self.nvars, "evaluation point arity mismatch");
        let mut acc = 0.0;
        for (m, c) in &self.terms {
            let mut t = rat_to_f64(c);
            for (v, &e) in m.0.iter().enumerate() {
                t *= point[v].powi(e as i32);
            }
            acc += t;
        }
        acc
    }

    /// Variables that actually occur.
    pub fn vars_present(&self) -> Vec<usize> {
        let mut seen = vec![false; self.nvars];
        for m in self.terms.keys() {
            for (v, &e) in m.0.iter().enumerate() {
                if e > 0 {
                    seen[v] = true;
                }
            }
        }
        (0..self.nvars).filter(|&v| seen[v]).collect()
    }

    /// Coefficients as univariate in v: exponent -> polynomial with v cleared.
    fn univariate_in(&self, v: usize) -> BTreeMap<u16, Poly> {
        let mut out: BTreeMap<u16, Poly> = BTreeMap::new();
        for (m, c) in &self.terms {
            let e = m.0[v];
            let mut rm = m.clone();
            rm.0[v] = 0;
            let entry = out.entry(e).or_insert_with(|| Poly::zero(self.nvars));
            Self::insert_term(&mut entry.terms, rm, c.clone());
        }
        out.retain(|_, p| !p.is_zero());
        out
    }

    fn from_univariate(nvars: usize, v: usize, coeffs: &BTreeMap<u16, Poly>) -> Poly {
        let mut terms = BTreeMap::new();
        for (&e, p) in coeffs {
            for (m, c) in &p.terms {
                let mut em = m.clone();
                em.0[v] += e;
                Self::insert_term(&mut terms, em, c.clone());
            }
        }
        Poly { nvars, terms }
    }

    /// Exact quotient; panics if the division is not exact (internal use only).
    pub fn exact_div(&self, d: &Poly) -> Poly {
        assert!(!d.is_zero(), "division by zero polynomial");
        let mut rem = self.clone();
        let mut quo = Poly::zero(self.nvars);
        let (dm, dc) = {
            let (m, c) = d.leading().unwrap();
            (m.clone(), c.clone())
        };
        while !rem.is_zero() {
            let (rm, rc) = {
                let (m, c) = rem.leading().unwrap();
                (m.clone(), c.clone())
            };
            assert!(dm.divides(&rm), "inexact polynomial division");
            let qm = dm.div_into(&rm);
            let qc = rc / &dc;
            let mut t = BTreeMap::new();
            t.insert(qm, qc);
            let tp = Poly { nvars: self.nvars, terms: t };
            rem = rem.sub(&tp.mul(d));
            quo = quo.add(&tp);
        }
        quo
    }

    /// Content with respect to variable v: gcd of the univariate coefficients.
    fn content_in(&self, v: usize) -> Poly {
        let uni = self.univariate_in(v);
        let mut acc = Poly::zero(self.nvars);
        for p in uni.values() {
            acc = poly_gcd(&acc, p);
            if acc.is_one() {
                break;
            }
        }
        acc
    }

    /// Divides out the leading coefficient, making the polynomial monic in graded-lex order.
    pub fn monic(&self) -> Poly {
        match self.leading() {
            None => self.clone(),
            Some((_, c)) => {
                let inv = Rat::one() / c.clone();
                self.scale(&inv)
            }
        }
    }
}

/// Pseudo-remainder of a by b with respect to variable v.
fn pseudo_rem(a: &Poly, b: &Poly, v: usize) -> Poly {
    let nvars = a.nvars;
    let mut r = a.univariate_in(v);
    let bu = b.univariate_in(v);
    let db = *bu.keys().next_back().unwrap();
    let lcb = bu[&db].clone();
    loop {
        let dr = match r.keys().next_back() {
            None => return Poly::zero(nvars),
            Some(&d) => d,
        };
        if dr < db {
            return Poly::from_univariate(nvars, v, &r);
        }
        let lcr = r[&dr].clone();
        // r := lc(b) * r - lc(r) * x^(dr-db) * b
        let mut nr: BTreeMap<u16, Poly> = BTreeMap::new();
        for (&e, p) in &r {
            nr.insert(e, p.mul(&lcb));
        }
        for (&e, p) in &bu {
            let shifted = e + dr - db;
            let t = p.mul(&lcr);
            let entry = nr.entry(shifted).or_insert_with(|| Poly::zero(nvars));
            *entry = entry.sub(&t);
        }
        nr.retain(|_, p| !p.is_zero());
        nr.remove(&dr);
        r = nr;
    }
}

/// Gcd of multivariate polynomials over the rationals, normalized monic.
///
/// Primitive PRS: contents recurse on one fewer active variable, so small
/// inputs stay small. The unit normalization makes the result canonical.
pub fn poly_gcd(a: &Poly, b: &Poly) -> Poly {
    if a.is_zero() {
        return b.monic();
    }
    if b.is_zero() {
        return a.monic();
    }
    if a.is_constant() || b.is_constant() {
        return Poly::one(a.nvars);
    }
    let va = a.vars_present();
    let vb = b.vars_present();
    let v = va[0].min(vb[0]);
    if !va.contains(&v) {
        return poly_gcd(&b.content_in(v), a).monic();
    }
    if !vb.contains(&v) {
        return poly_gcd(&a.content_in(v), b).monic();
    }
    let ca = a.content_in(v);
    let cb = b.content_in(v);
    let c = poly_gcd(&ca, &cb);
    let mut pa = a.exact_div(&ca);
    let mut pb = b.exact_div(&cb);
    if pa.degree_in(v) < pb.degree_in(v) {
        std::mem::swap(&mut pa, &mut pb);
    }
    loop {
        let r = pseudo_rem(&pa, &pb, v);
        if r.is_zero() {
            return c.mul(&pb).monic();
        }
        if r.degree_in(v) == 0 {
            return c.monic();
        }
        let rc = r.content_in(v);
        pa = pb;
        pb = r.exact_div(&rc);
    }
}

/// Least common multiple, normalized monic.
pub fn poly_lcm(a: &Poly, b: &Poly) -> Poly {
    if a.is_zero() || b.is_zero() {
        return Poly::zero(a.nvars);
    }
    let g = poly_gcd(a, b);
    a.mul(b).exact_div(&g).monic()
}

pub fn rat_to_f64(c: &Rat) -> f64 {
    use num::ToPrimitive;
    c.to_f64().unwrap_or_else(|| {
        // Fall back to a quotient of truncated parts for extreme magnitudes.
        let n = c.numer().to_f64().unwrap_or(f64::NAN);
        let d = c.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Formats a rational in the expression grammar (integer or a/b).
pub fn rat_to_expr(c: &Rat) -> String {
    if c.denom().is_one() {
        format!("{}", c.numer())
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

impl Poly {
    /// Renders the polynomial in the expression grammar using the given variable names.
    pub fn to_expr(&self, names: &[String]) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let mut out = String::new();
        for (i, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            let abs = c.abs();
            if i == 0 {
                if neg {
                    out.push('-');
                }
            } else if neg {
                out.push_str(" - ");
            } else {
                out.push_str(" + ");
            }
            let mut factors: Vec<String> = Vec::new();
            if !abs.is_one() || m.is_constant() {
                factors.push(rat_to_expr(&abs));
            }
            for (v, &e) in m.0.iter().enumerate() {
                if e == 1 {
                    factors.push(names[v].clone());
                } else if e > 1 {
                    factors.push(format!("{}^{}", names[v], e));
                }
            }
            out.push_str(&factors.join("*"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p_xy() -> (Poly, Poly) {
        (Poly::var(2, 0), Poly::var(2, 1))
    }

    #[test]
    fn grlex_order_ranks_by_degree_then_lex() {
        let m1 = Monomial(vec![2, 0]);
        let m2 = Monomial(vec![0, 3]);
        let m3 = Monomial(vec![1, 1]);
        assert!(m2 > m1);
        assert!(m1 > m3);
    }

    #[test]
    fn arithmetic_is_canonical() {
        let (x, y) = p_xy();
        let a = x.add(&y).mul(&x.sub(&y));
        let b = x.mul(&x).sub(&y.mul(&y));
        assert_eq!(a, b);
        assert!(a.sub(&b).is_zero());
    }

    #[test]
    fn derivative_and_eval() {
        let (x, y) = p_xy();
        let p = x.pow(2).mul(&y).add(&y.pow(3));
        let px = p.deriv(0);
        assert_eq!(px, x.mul(&y).scale(&rat_int(2)));
        let v = p.eval_rat(&[rat_int(2), rat_int(3)]);
        assert_eq!(v, rat_int(4 * 3 + 27));
    }

    #[test]
    fn gcd_of_common_factor() {
        let (x, y) = p_xy();
        let f = x.add(&y);
        let a = f.mul(&x);
        let b = f.mul(&y.sub(&x));
        let g = poly_gcd(&a, &b);
        assert_eq!(g, f.monic());
    }

    #[test]
    fn gcd_coprime_is_one() {
        let (x, y) = p_xy();
        let g = poly_gcd(&x.pow(2).add(&Poly::one(2)), &y);
        assert!(g.is_one());
    }

    #[test]
    fn exact_division_roundtrip() {
        let (x, y) = p_xy();
        let a = x.pow(3).add(&y.pow(2).scale(&rat(1, 2)));
        let b = x.add(&y).pow(2);
        let prod = a.mul(&b);
        assert_eq!(prod.exact_div(&b), a);
    }

    #[test]
    fn expr_rendering() {
        let names = vec!["x".to_string(), "y".to_string()];
        let (x, y) = p_xy();
        let p = x.pow(2).scale(&rat_int(3)).sub(&y.scale(&rat(1, 2))).add(&Poly::one(2));
        assert_eq!(p.to_expr(&names), "3*x^2 - 1/2*y + 1");
    }
}
