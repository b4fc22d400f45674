//! Rational functions in canonical form, plus the expression grammar.
//!
//! Canonical form: numerator and denominator share no factor (gcd 1), the
//! denominator is monic in graded-lex order, and zero is 0/1. Structural
//! equality therefore coincides with mathematical equality.
//!
//! Grammar accepted by [`parse_expr`]:
//!   expr   := term { ('+'|'-') term }
//!   term   := unary { ('*'|'/') unary }
//!   unary  := '-' unary | power
//!   power  := atom [ '^' uint ]
//!   atom   := integer | variable | '(' expr ')'

use crate::error::{Error, Result};
use crate::poly::{poly_gcd, rat_to_f64, Poly, Rat};
use num::{One, Zero};

/// Quotient of two polynomials, always held in canonical form.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RationalFunction {
    num: Poly,
    den: Poly,
}

pub type RF = RationalFunction;

impl RationalFunction {
    /// Canonicalizes num/den. Errors when den = 0.
    pub fn new(num: Poly, den: Poly) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(Self::reduced(num, den))
    }

    fn reduced(num: Poly, den: Poly) -> Self {
        if num.is_zero() {
            return RationalFunction { num: Poly::zero(den.nvars), den: Poly::one(den.nvars) };
        }
        let g = poly_gcd(&num, &den);
        let (mut n, mut d) = if g.is_one() { (num, den) } else { (num.exact_div(&g), den.exact_div(&g)) };
        let lc = d.leading().unwrap().1.clone();
        if !lc.is_one() {
            let inv = Rat::one() / lc;
            n = n.scale(&inv);
            d = d.scale(&inv);
        }
        RationalFunction { num: n, den: d }
    }

    pub fn from_poly(p: Poly) -> Self {
        let n = p.nvars;
        RationalFunction { num: p, den: Poly::one(n) }
    }

    pub fn zero(nvars: usize) -> Self {
        Self::from_poly(Poly::zero(nvars))
    }

    pub fn one(nvars: usize) -> Self {
        Self::from_poly(Poly::one(nvars))
    }

    pub fn constant(nvars: usize, c: Rat) -> Self {
        Self::from_poly(Poly::constant(nvars, c))
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        Self::from_poly(Poly::var(nvars, i))
    }

    pub fn nvars(&self) -> usize {
        self.num.nvars
    }

    pub fn numer(&self) -> &Poly {
        &self.num
    }

    pub fn denom(&self) -> &Poly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.num.is_one() && self.den.is_one()
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_one()
    }

    pub fn as_constant(&self) -> Option<Rat> {
        if self.den.is_one() {
            self.num.as_constant()
        } else {
            None
        }
    }

    pub fn add(&self, o: &RF) -> RF {
        Self::reduced(
            self.num.mul(&o.den).add(&o.num.mul(&self.den)),
            self.den.mul(&o.den),
        )
    }

    pub fn sub(&self, o: &RF) -> RF {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> RF {
        RationalFunction { num: self.num.neg(), den: self.den.clone() }
    }

    pub fn mul(&self, o: &RF) -> RF {
        Self::reduced(self.num.mul(&o.num), self.den.mul(&o.den))
    }

    pub fn scale(&self, c: &Rat) -> RF {
        if c.is_zero() {
            return RF::zero(self.nvars());
        }
        RationalFunction { num: self.num.scale(c), den: self.den.clone() }
    }

    pub fn div(&self, o: &RF) -> Result<RF> {
        if o.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(Self::reduced(self.num.mul(&o.den), self.den.mul(&o.num)))
    }

    pub fn inv(&self) -> Result<RF> {
        RF::one(self.nvars()).div(self)
    }

    pub fn pow(&self, e: u32) -> RF {
        let mut acc = RF::one(self.nvars());
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    /// Partial derivative (quotient rule), canonical.
    pub fn deriv(&self, v: usize) -> RF {
        let dn = self.num.deriv(v);
        let dd = self.den.deriv(v);
        if dd.is_zero() {
            return Self::reduced(dn, self.den.clone());
        }
        Self::reduced(
            dn.mul(&self.den).sub(&self.num.mul(&dd)),
            self.den.mul(&self.den),
        )
    }

    /// Exact evaluation; errors when the denominator vanishes at the point.
    pub fn eval_rat(&self, point: &[Rat]) -> Result<Rat> {
        let d = self.den.eval_rat(point);
        if d.is_zero() {
            return Err(Error::PoleAtPoint);
        }
        Ok(self.num.eval_rat(point) / d)
    }

    /// Floating evaluation; errors when the denominator is numerically zero.
    pub fn eval_f64(&self, point: &[f64]) -> Result<f64> {
        let d = self.den.eval_f64(point);
        if d == 0.0 {
            return Err(Error::PoleAtPoint);
        }
        Ok(self.num.eval_f64(point) / d)
    }

    /// Substitutes args[i] for variable i. Arguments live on the target chart.
    pub fn subst(&self, args: &[RF]) -> Result<RF> {
        let n = self.num.subst_poly(args)?;
        let d = self.den.subst_poly(args)?;
        n.div(&d)
    }

    /// Renders in the expression grammar; round-trips through [`parse_expr`].
    pub fn to_expr(&self, names: &[String]) -> String {
        if self.den.is_one() {
            self.num.to_expr(names)
        } else {
            format!("({})/({})", self.num.to_expr(names), self.den.to_expr(names))
        }
    }
}

impl Poly {
    /// Evaluates the polynomial at rational-function arguments.
    pub fn subst_poly(&self, args: &[RF]) -> Result<RF> {
        assert!(!args.is_empty() || self.nvars == 0);
        let target_nvars = args.first().map(|a| a.nvars()).unwrap_or(0);
        assert_eq!(args.len(), self.nvars, "substitution arity mismatch");
        let mut acc = RF::zero(target_nvars);
        for (m, c) in &self.terms {
            let mut t = RF::constant(target_nvars, c.clone());
            for (v, &e) in m.0.iter().enumerate() {
                if e > 0 {
                    t = t.mul(&args[v].pow(e as u32));
                }
            }
            acc = acc.add(&t);
        }
        Ok(acc)
    }
}

/// Converts a rational scalar to f64 (shared helper re-export).
pub fn rf_to_f64(c: &Rat) -> f64 {
    rat_to_f64(c)
}

// ---------------------------------------------------------------------------
// Expression grammar
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(num::BigInt),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>> {
    let mut toks = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                toks.push((Tok::Plus, i));
                i += 1;
            }
            '-' => {
                toks.push((Tok::Minus, i));
                i += 1;
            }
            '*' => {
                toks.push((Tok::Star, i));
                i += 1;
            }
            '/' => {
                toks.push((Tok::Slash, i));
                i += 1;
            }
            '^' => {
                toks.push((Tok::Caret, i));
                i += 1;
            }
            '(' => {
                toks.push((Tok::LParen, i));
                i += 1;
            }
            ')' => {
                toks.push((Tok::RParen, i));
                i += 1;
            }
            '0'..='9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let n: num::BigInt = src[start..i].parse().expect("digit run parses");
                toks.push((Tok::Int(n), start));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                toks.push((Tok::Ident(src[start..i].to_string()), start));
            }
            _ => {
                return Err(Error::ExprParse { pos: i, msg: format!("unexpected character '{c}'") });
            }
        }
    }
    Ok(toks)
}

struct Parser<'a> {
    toks: &'a [(Tok, usize)],
    pos: usize,
    names: &'a [String],
    src_len: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map(|(_, p)| *p).unwrap_or(self.src_len)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<RF> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.bump();
                    acc = acc.add(&self.term()?);
                }
                Some(Tok::Minus) => {
                    self.bump();
                    acc = acc.sub(&self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<RF> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.bump();
                    acc = acc.mul(&self.unary()?);
                }
                Some(Tok::Slash) => {
                    let at = self.here();
                    self.bump();
                    let rhs = self.unary()?;
                    acc = acc
                        .div(&rhs)
                        .map_err(|_| Error::ExprParse { pos: at, msg: "division by zero".into() })?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<RF> {
        if let Some(Tok::Minus) = self.peek() {
            self.bump();
            return Ok(self.unary()?.neg());
        }
        self.power()
    }

    fn power(&mut self) -> Result<RF> {
        let base = self.atom()?;
        if let Some(Tok::Caret) = self.peek() {
            let at = self.here();
            self.bump();
            match self.bump() {
                Some(Tok::Int(n)) => {
                    use num::ToPrimitive;
                    let e = n.to_u32().ok_or_else(|| Error::ExprParse {
                        pos: at,
                        msg: "exponent out of range".into(),
                    })?;
                    return Ok(base.pow(e));
                }
                _ => {
                    return Err(Error::ExprParse {
                        pos: at,
                        msg: "exponent must be a nonnegative integer literal".into(),
                    })
                }
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<RF> {
        let at = self.here();
        match self.bump() {
            Some(Tok::Int(n)) => Ok(RF::from_poly(Poly::constant(
                self.names.len(),
                Rat::from_integer(n),
            ))),
            Some(Tok::Ident(name)) => {
                match self.names.iter().position(|v| *v == name) {
                    Some(i) => Ok(RF::var(self.names.len(), i)),
                    None => Err(Error::ExprParse {
                        pos: at,
                        msg: format!("unknown variable '{name}' (chart has {})", self.names.join(", ")),
                    }),
                }
            }
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                match self.bump() {
                    Some(Tok::RParen) => Ok(inner),
                    _ => Err(Error::ExprParse { pos: at, msg: "unclosed parenthesis".into() }),
                }
            }
            other => Err(Error::ExprParse {
                pos: at,
                msg: format!("expected integer, variable, or '(' but found {:?}", other),
            }),
        }
    }
}

/// Parses an expression over the named variables into canonical form.
pub fn parse_expr(src: &str, names: &[String]) -> Result<RF> {
    let toks = lex(src)?;
    let mut p = Parser { toks: &toks, pos: 0, names, src_len: src.len() };
    let rf = p.expr()?;
    if p.pos != toks.len() {
        return Err(Error::ExprParse {
            pos: p.here(),
            msg: "trailing input after expression".into(),
        });
    }
    Ok(rf)
}
