//! Differential forms and vector fields on a chart.
//!
//! A form stores coefficients on strictly increasing index tuples. Values are
//! scalars, vectors in a fixed m-dimensional space (optionally tagged with a
//! Lie algebra), or tangent vectors. Denominator zero sets are required to lie
//! inside the chart's excluded locus; this is checked at evaluation time.

use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::lie::LieAlgebra;
use crate::linalg::FMat;
use crate::poly::Rat;
use crate::ratfunc::RF;
use num::Zero;
use std::collections::BTreeMap;
use std::sync::Arc;

/// Value space of a form.
#[derive(Clone, Debug)]
pub enum ValueKind {
    Scalar,
    Vector { dim: usize, algebra: Option<Arc<LieAlgebra>> },
    Tangent,
}

impl PartialEq for ValueKind {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (ValueKind::Scalar, ValueKind::Scalar) => true,
            (ValueKind::Tangent, ValueKind::Tangent) => true,
            (
                ValueKind::Vector { dim: d1, algebra: a1 },
                ValueKind::Vector { dim: d2, algebra: a2 },
            ) => {
                d1 == d2
                    && match (a1, a2) {
                        (None, None) => true,
                        (Some(x), Some(y)) => x.as_ref() == y.as_ref(),
                        _ => false,
                    }
            }
            _ => false,
        }
    }
}

impl ValueKind {
    pub fn vector(dim: usize) -> Self {
        ValueKind::Vector { dim, algebra: None }
    }

    pub fn algebra_valued(algebra: Arc<LieAlgebra>) -> Self {
        ValueKind::Vector { dim: algebra.dim(), algebra: Some(algebra) }
    }

    pub fn dim_on(&self, chart: &Chart) -> usize {
        match self {
            ValueKind::Scalar => 1,
            ValueKind::Vector { dim, .. } => *dim,
            ValueKind::Tangent => chart.dim(),
        }
    }

    pub fn algebra(&self) -> Option<&Arc<LieAlgebra>> {
        match self {
            ValueKind::Vector { algebra, .. } => algebra.as_ref(),
            _ => None,
        }
    }

    fn describe(&self) -> String {
        match self {
            ValueKind::Scalar => "scalar".into(),
            ValueKind::Vector { dim, algebra: None } => format!("vector({dim})"),
            ValueKind::Vector { dim, algebra: Some(_) } => format!("algebra({dim})"),
            ValueKind::Tangent => "tangent".into(),
        }
    }
}

/// Differential form of fixed degree with values in a fixed space.
#[derive(Clone, Debug, PartialEq)]
pub struct Form {
    chart: Chart,
    degree: usize,
    value: ValueKind,
    terms: BTreeMap<Vec<u8>, Vec<RF>>,
}

/// Polynomial or rational vector field on a chart.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    chart: Chart,
    comps: Vec<RF>,
}

impl VectorField {
    pub fn new(chart: Chart, comps: Vec<RF>) -> Result<Self> {
        if comps.len() != chart.dim() {
            return Err(Error::DimensionMismatch("vector field component count".into()));
        }
        for c in &comps {
            if c.nvars() != chart.dim() {
                return Err(Error::DimensionMismatch("vector field component arity".into()));
            }
        }
        Ok(VectorField { chart, comps })
    }

    pub fn zero(chart: Chart) -> Self {
        let n = chart.dim();
        VectorField { chart, comps: vec![RF::zero(n); n] }
    }

    /// Coordinate field for variable i.
    pub fn coordinate(chart: Chart, i: usize) -> Self {
        let n = chart.dim();
        let mut comps = vec![RF::zero(n); n];
        comps[i] = RF::one(n);
        VectorField { chart, comps }
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn components(&self) -> &[RF] {
        &self.comps
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(|c| c.is_zero())
    }

    pub fn add(&self, o: &VectorField) -> Result<VectorField> {
        same_chart(&self.chart, &o.chart)?;
        Ok(VectorField {
            chart: self.chart.clone(),
            comps: self.comps.iter().zip(&o.comps).map(|(a, b)| a.add(b)).collect(),
        })
    }

    pub fn sub(&self, o: &VectorField) -> Result<VectorField> {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> VectorField {
        VectorField { chart: self.chart.clone(), comps: self.comps.iter().map(|c| c.neg()).collect() }
    }

    pub fn scale(&self, f: &RF) -> VectorField {
        VectorField { chart: self.chart.clone(), comps: self.comps.iter().map(|c| c.mul(f)).collect() }
    }

    /// Directional derivative of a chart function.
    pub fn apply(&self, f: &RF) -> RF {
        let mut acc = RF::zero(self.chart.dim());
        for (j, c) in self.comps.iter().enumerate() {
            if !c.is_zero() {
                acc = acc.add(&c.mul(&f.deriv(j)));
            }
        }
        acc
    }

    /// Lie bracket of vector fields.
    pub fn bracket(&self, o: &VectorField) -> Result<VectorField> {
        same_chart(&self.chart, &o.chart)?;
        let n = self.chart.dim();
        let mut comps = Vec::with_capacity(n);
        for k in 0..n {
            let mut acc = RF::zero(n);
            for j in 0..n {
                if !self.comps[j].is_zero() {
                    acc = acc.add(&self.comps[j].mul(&o.comps[k].deriv(j)));
                }
                if !o.comps[j].is_zero() {
                    acc = acc.sub(&o.comps[j].mul(&self.comps[k].deriv(j)));
                }
            }
            comps.push(acc);
        }
        Ok(VectorField { chart: self.chart.clone(), comps })
    }

    /// The field as a tangent-valued 0-form.
    pub fn to_form(&self) -> Form {
        let mut f = Form::zero(self.chart.clone(), 0, ValueKind::Tangent);
        f.set_term(&[], self.comps.clone()).expect("degree-0 term is valid");
        f
    }

    pub fn eval_f64(&self, point: &[f64]) -> Result<Vec<f64>> {
        self.comps.iter().map(|c| c.eval_f64(point)).collect()
    }

    pub fn eval_rat(&self, point: &[Rat]) -> Result<Vec<Rat>> {
        self.comps.iter().map(|c| c.eval_rat(point)).collect()
    }
}

fn same_chart(a: &Chart, b: &Chart) -> Result<()> {
    if a != b {
        return Err(Error::ChartMismatch { expected: a.describe(), found: b.describe() });
    }
    Ok(())
}

/// Sign of merging two disjoint increasing tuples, and the merged tuple.
fn merge_sign(a: &[u8], b: &[u8]) -> Option<(i32, Vec<u8>)> {
    let mut inversions = 0usize;
    for &i in a {
        for &j in b {
            if i == j {
                return None;
            }
            if i > j {
                inversions += 1;
            }
        }
    }
    let mut merged: Vec<u8> = a.iter().chain(b).copied().collect();
    merged.sort_unstable();
    Some((if inversions % 2 == 0 { 1 } else { -1 }, merged))
}

/// Parity of the permutation sorting `idxs` (None if there are repeats).
pub fn sort_sign(idxs: &[u8]) -> Option<(i32, Vec<u8>)> {
    let mut v = idxs.to_vec();
    let mut sign = 1i32;
    for i in 0..v.len() {
        for j in (i + 1..v.len()).rev() {
            if v[j - 1] > v[j] {
                v.swap(j - 1, j);
                sign = -sign;
            }
        }
    }
    for w in v.windows(2) {
        if w[0] == w[1] {
            return None;
        }
    }
    Some((sign, v))
}

impl Form {
    pub fn zero(chart: Chart, degree: usize, value: ValueKind) -> Form {
        Form { chart, degree, value, terms: BTreeMap::new() }
    }

    /// Scalar 0-form from a chart function.
    pub fn function(chart: Chart, f: RF) -> Result<Form> {
        let mut out = Form::zero(chart, 0, ValueKind::Scalar);
        out.set_term(&[], vec![f])?;
        Ok(out)
    }

    /// Coordinate 1-form dx_i.
    pub fn dx(chart: Chart, i: usize) -> Form {
        let n = chart.dim();
        assert!(i < n, "coordinate index out of range");
        let mut out = Form::zero(chart, 1, ValueKind::Scalar);
        out.set_term(&[i], vec![RF::one(n)]).expect("valid term");
        out
    }

    /// The identity (1,1) tensor: sum of dx_i tensor d/dx_i.
    pub fn identity_tangent(chart: Chart) -> Form {
        let n = chart.dim();
        let mut out = Form::zero(chart.clone(), 1, ValueKind::Tangent);
        for i in 0..n {
            let mut v = vec![RF::zero(n); n];
            v[i] = RF::one(n);
            out.set_term(&[i], v).expect("valid term");
        }
        out
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn value_kind(&self) -> &ValueKind {
        &self.value
    }

    pub fn value_dim(&self) -> usize {
        self.value.dim_on(&self.chart)
    }

    pub fn terms(&self) -> &BTreeMap<Vec<u8>, Vec<RF>> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Sets the coefficient vector on a strictly increasing index tuple.
    pub fn set_term(&mut self, idx: &[usize], values: Vec<RF>) -> Result<()> {
        if idx.len() != self.degree {
            return Err(Error::DimensionMismatch(format!(
                "index tuple length {} != degree {}",
                idx.len(),
                self.degree
            )));
        }
        let n = self.chart.dim();
        for w in idx.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::Invalid("index tuple must be strictly increasing".into()));
            }
        }
        if idx.iter().any(|&i| i >= n) {
            return Err(Error::DimensionMismatch("index out of chart range".into()));
        }
        if values.len() != self.value_dim() {
            return Err(Error::DimensionMismatch(format!(
                "value vector length {} != {}",
                values.len(),
                self.value_dim()
            )));
        }
        for v in &values {
            if v.nvars() != n {
                return Err(Error::DimensionMismatch("coefficient arity != chart dim".into()));
            }
        }
        let key: Vec<u8> = idx.iter().map(|&i| i as u8).collect();
        if values.iter().all(|v| v.is_zero()) {
            self.terms.remove(&key);
        } else {
            self.terms.insert(key, values);
        }
        Ok(())
    }

    /// Adds into the coefficient vector on a sorted tuple with a sign.
    fn accumulate(&mut self, key: Vec<u8>, sign: i32, values: &[RF]) {
        debug_assert_eq!(key.len(), self.degree);
        let dim = self.value_dim();
        let entry = self
            .terms
            .entry(key.clone())
            .or_insert_with(|| vec![RF::zero(self.chart.dim()); dim]);
        for (e, v) in entry.iter_mut().zip(values) {
            *e = if sign >= 0 { e.add(v) } else { e.sub(v) };
        }
        if entry.iter().all(|v| v.is_zero()) {
            self.terms.remove(&key);
        }
    }

    fn prune(&mut self) {
        self.terms.retain(|_, v| v.iter().any(|x| !x.is_zero()));
    }

    /// Antisymmetric coefficient lookup for an arbitrary index tuple.
    pub fn value_on(&self, idxs: &[u8]) -> Vec<RF> {
        let n = self.chart.dim();
        let dim = self.value_dim();
        debug_assert_eq!(idxs.len(), self.degree);
        match sort_sign(idxs) {
            None => vec![RF::zero(n); dim],
            Some((sign, sorted)) => match self.terms.get(&sorted) {
                None => vec![RF::zero(n); dim],
                Some(vals) => {
                    if sign > 0 {
                        vals.clone()
                    } else {
                        vals.iter().map(|v| v.neg()).collect()
                    }
                }
            },
        }
    }

    /// Value on a list of vector fields (full multilinear extension).
    pub fn value_on_fields(&self, fields: &[&VectorField]) -> Result<Vec<RF>> {
        if fields.len() != self.degree {
            return Err(Error::DimensionMismatch("wrong number of arguments".into()));
        }
        let n = self.chart.dim();
        let dim = self.value_dim();
        let mut out = vec![RF::zero(n); dim];
        let mut idx = vec![0u8; self.degree];
        self.value_on_fields_rec(fields, 0, &mut idx, &RF::one(n), &mut out);
        Ok(out)
    }

    fn value_on_fields_rec(
        &self,
        fields: &[&VectorField],
        slot: usize,
        idx: &mut Vec<u8>,
        coeff: &RF,
        out: &mut Vec<RF>,
    ) {
        if coeff.is_zero() {
            return;
        }
        if slot == fields.len() {
            let vals = self.value_on(idx);
            for (o, v) in out.iter_mut().zip(&vals) {
                *o = o.add(&coeff.mul(v));
            }
            return;
        }
        for (m, c) in fields[slot].components().iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            idx[slot] = m as u8;
            let next = coeff.mul(c);
            self.value_on_fields_rec(fields, slot + 1, idx, &next, out);
        }
    }

    pub fn add(&self, o: &Form) -> Result<Form> {
        same_chart(&self.chart, &o.chart)?;
        if self.degree != o.degree {
            // the zero form belongs to every degree
            let value = unify_values(&self.value, &o.value)?;
            if self.is_zero() {
                let mut out = o.clone();
                out.value = value;
                return Ok(out);
            }
            if o.is_zero() {
                let mut out = self.clone();
                out.value = value;
                return Ok(out);
            }
            return Err(Error::DimensionMismatch("cannot add forms of different degree".into()));
        }
        let value = unify_values(&self.value, &o.value)?;
        let mut out = Form { chart: self.chart.clone(), degree: self.degree, value, terms: self.terms.clone() };
        for (k, v) in &o.terms {
            out.accumulate(k.clone(), 1, v);
        }
        out.prune();
        Ok(out)
    }

    pub fn sub(&self, o: &Form) -> Result<Form> {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> Form {
        Form {
            chart: self.chart.clone(),
            degree: self.degree,
            value: self.value.clone(),
            terms: self
                .terms
                .iter()
                .map(|(k, v)| (k.clone(), v.iter().map(|x| x.neg()).collect()))
                .collect(),
        }
    }

    /// Multiplies all coefficients by a chart function.
    pub fn scale_fn(&self, f: &RF) -> Form {
        if f.is_zero() {
            return Form::zero(self.chart.clone(), self.degree, self.value.clone());
        }
        let mut out = Form {
            chart: self.chart.clone(),
            degree: self.degree,
            value: self.value.clone(),
            terms: self
                .terms
                .iter()
                .map(|(k, v)| (k.clone(), v.iter().map(|x| x.mul(f)).collect()))
                .collect(),
        };
        out.prune();
        out
    }

    pub fn scale_rat(&self, c: &Rat) -> Form {
        self.scale_fn(&RF::constant(self.chart.dim(), c.clone()))
    }

    /// Applies a constant matrix to the value vectors.
    pub fn apply_matrix(&self, m: &[Vec<Rat>], out_kind: ValueKind) -> Result<Form> {
        let dim = self.value_dim();
        let out_dim = out_kind.dim_on(&self.chart);
        if m.len() != out_dim || m.iter().any(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch("matrix shape vs value dims".into()));
        }
        let n = self.chart.dim();
        let mut out = Form::zero(self.chart.clone(), self.degree, out_kind);
        for (k, v) in &self.terms {
            let vals: Vec<RF> = m
                .iter()
                .map(|row| {
                    let mut acc = RF::zero(n);
                    for (c, x) in row.iter().zip(v) {
                        if !c.is_zero() {
                            acc = acc.add(&x.scale(c));
                        }
                    }
                    acc
                })
                .collect();
            out.accumulate(k.clone(), 1, &vals);
        }
        out.prune();
        Ok(out)
    }

    /// Applies a matrix of chart functions to the value vectors.
    pub fn apply_fn_matrix(&self, m: &FMat, out_kind: ValueKind) -> Result<Form> {
        let dim = self.value_dim();
        let out_dim = out_kind.dim_on(&self.chart);
        if m.len() != out_dim || m.iter().any(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch("matrix shape vs value dims".into()));
        }
        let n = self.chart.dim();
        let mut out = Form::zero(self.chart.clone(), self.degree, out_kind);
        for (k, v) in &self.terms {
            let vals: Vec<RF> = m
                .iter()
                .map(|row| {
                    let mut acc = RF::zero(n);
                    for (c, x) in row.iter().zip(v) {
                        if !c.is_zero() && !x.is_zero() {
                            acc = acc.add(&x.mul(c));
                        }
                    }
                    acc
                })
                .collect();
            out.accumulate(k.clone(), 1, &vals);
        }
        out.prune();
        Ok(out)
    }

    /// Extracts value component m as a scalar form.
    pub fn component(&self, m: usize) -> Form {
        let mut out = Form::zero(self.chart.clone(), self.degree, ValueKind::Scalar);
        for (k, v) in &self.terms {
            if !v[m].is_zero() {
                out.terms.insert(k.clone(), vec![v[m].clone()]);
            }
        }
        out
    }

    /// Rebuilds a valued form from scalar component forms.
    pub fn from_components(
        chart: Chart,
        degree: usize,
        value: ValueKind,
        comps: &[Form],
    ) -> Result<Form> {
        let mut out = Form::zero(chart.clone(), degree, value);
        let dim = out.value_dim();
        if comps.len() != dim {
            return Err(Error::DimensionMismatch("component count".into()));
        }
        let n = chart.dim();
        for (m, c) in comps.iter().enumerate() {
            same_chart(&chart, &c.chart)?;
            if c.degree != degree && !c.is_zero() {
                return Err(Error::DimensionMismatch("component degree".into()));
            }
            for (k, v) in &c.terms {
                let mut vals = vec![RF::zero(n); dim];
                vals[m] = v[0].clone();
                out.accumulate(k.clone(), 1, &vals);
            }
        }
        out.prune();
        Ok(out)
    }

    /// Wedge of a scalar form with any form; the result takes the right kind.
    pub fn wedge(&self, o: &Form) -> Result<Form> {
        same_chart(&self.chart, &o.chart)?;
        if !matches!(self.value, ValueKind::Scalar) {
            return Err(Error::ValueMismatch(format!(
                "wedge left factor must be scalar, found {}",
                self.value.describe()
            )));
        }
        let degree = self.degree + o.degree;
        let mut out = Form::zero(self.chart.clone(), degree, o.value.clone());
        if degree > self.chart.dim() {
            return Ok(out);
        }
        for (ka, va) in &self.terms {
            let a = &va[0];
            for (kb, vb) in &o.terms {
                if let Some((sign, merged)) = merge_sign(ka, kb) {
                    let vals: Vec<RF> = vb.iter().map(|x| x.mul(a)).collect();
                    out.accumulate(merged, sign, &vals);
                }
            }
        }
        out.prune();
        Ok(out)
    }

    /// Exterior derivative, taken componentwise on value vectors.
    pub fn exterior_derivative(&self) -> Form {
        let n = self.chart.dim();
        let mut out = Form::zero(self.chart.clone(), self.degree + 1, self.value.clone());
        if self.degree + 1 > n {
            return out;
        }
        for (k, v) in &self.terms {
            for var in 0..n as u8 {
                if k.contains(&var) {
                    continue;
                }
                let pos = k.iter().filter(|&&i| i < var).count();
                let sign = if pos % 2 == 0 { 1 } else { -1 };
                let dv: Vec<RF> = v.iter().map(|x| x.deriv(var as usize)).collect();
                if dv.iter().all(|x| x.is_zero()) {
                    continue;
                }
                let mut key = k.clone();
                key.push(var);
                key.sort_unstable();
                out.accumulate(key, sign, &dv);
            }
        }
        out.prune();
        out
    }

    /// Interior product with a vector field.
    pub fn interior_product(&self, xi: &VectorField) -> Result<Form> {
        same_chart(&self.chart, &xi.chart)?;
        if self.degree == 0 {
            return Ok(Form::zero(self.chart.clone(), 0, self.value.clone()));
        }
        let mut out = Form::zero(self.chart.clone(), self.degree - 1, self.value.clone());
        for (k, v) in &self.terms {
            for (r, &i) in k.iter().enumerate() {
                let c = &xi.comps[i as usize];
                if c.is_zero() {
                    continue;
                }
                let sign = if r % 2 == 0 { 1 } else { -1 };
                let vals: Vec<RF> = v.iter().map(|x| x.mul(c)).collect();
                let mut key = k.clone();
                key.remove(r);
                out.accumulate(key, sign, &vals);
            }
        }
        out.prune();
        Ok(out)
    }

    /// Lie derivative along a vector field via the Cartan formula.
    /// Valid for scalar and fixed-vector values; tangent values take the
    /// degree-(0,k) graded bracket instead (see the brackets module).
    pub fn lie_derivative(&self, xi: &VectorField) -> Result<Form> {
        if matches!(self.value, ValueKind::Tangent) {
            return Err(Error::ValueMismatch(
                "tangent-valued forms use the graded bracket for Lie derivatives".into(),
            ));
        }
        let d_then_i = self.exterior_derivative().interior_product(xi)?;
        let i_then_d = self.interior_product(xi)?.exterior_derivative();
        d_then_i.add(&i_then_d)
    }

    /// Precomposition with a tangent endomorphism: (X*phi)(v_1,..) = phi(Xv_1,..).
    /// The matrix columns are the images of the coordinate fields.
    pub fn precompose(&self, x: &FMat) -> Result<Form> {
        let n = self.chart.dim();
        if x.len() != n || x.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch("endomorphism matrix must be n x n".into()));
        }
        if self.degree == 0 {
            return Ok(self.clone());
        }
        use itertools::Itertools;
        let mut out = Form::zero(self.chart.clone(), self.degree, self.value.clone());
        let p = self.degree;
        for cols in (0..n as u8).combinations(p) {
            let mut vals_acc: Option<Vec<RF>> = None;
            for (rows, v) in &self.terms {
                // minor determinant det(x[rows, cols])
                let sub: FMat = rows
                    .iter()
                    .map(|&r| cols.iter().map(|&c| x[r as usize][c as usize].clone()).collect())
                    .collect();
                let det = crate::linalg::f_det(&sub);
                if det.is_zero() {
                    continue;
                }
                let scaled: Vec<RF> = v.iter().map(|t| t.mul(&det)).collect();
                vals_acc = Some(match vals_acc {
                    None => scaled,
                    Some(acc) => acc.iter().zip(&scaled).map(|(a, b)| a.add(b)).collect(),
                });
            }
            if let Some(vals) = vals_acc {
                out.accumulate(cols.clone(), 1, &vals);
            }
        }
        out.prune();
        Ok(out)
    }

    /// Exact evaluation of all coefficients at a rational point.
    pub fn eval_rat(&self, point: &[Rat]) -> Result<BTreeMap<Vec<u8>, Vec<Rat>>> {
        if !self.chart.contains_rat(point) {
            return Err(Error::Invalid("evaluation point is outside the chart".into()));
        }
        let mut out = BTreeMap::new();
        for (k, v) in &self.terms {
            let vals: Result<Vec<Rat>> = v.iter().map(|x| x.eval_rat(point)).collect();
            out.insert(k.clone(), vals?);
        }
        Ok(out)
    }

    /// Floating evaluation of all coefficients.
    pub fn eval_f64(&self, point: &[f64]) -> Result<BTreeMap<Vec<u8>, Vec<f64>>> {
        if !self.chart.contains_f64(point) {
            return Err(Error::Invalid("evaluation point is outside the chart".into()));
        }
        let mut out = BTreeMap::new();
        for (k, v) in &self.terms {
            let vals: Result<Vec<f64>> = v.iter().map(|x| x.eval_f64(point)).collect();
            out.insert(k.clone(), vals?);
        }
        Ok(out)
    }

    /// Largest absolute coefficient value at a floating point (residual gauge).
    pub fn max_abs_at(&self, point: &[f64]) -> Result<f64> {
        let mut m = 0.0f64;
        for (_, vals) in self.eval_f64(point)? {
            for v in vals {
                m = m.max(v.abs());
            }
        }
        Ok(m)
    }

    /// Renders each stored term for reports: (tuple of variable names, value expressions).
    pub fn render_terms(&self) -> Vec<(Vec<String>, Vec<String>)> {
        let names = self.chart.vars();
        self.terms
            .iter()
            .map(|(k, v)| {
                (
                    k.iter().map(|&i| names[i as usize].clone()).collect(),
                    v.iter().map(|x| x.to_expr(names)).collect(),
                )
            })
            .collect()
    }
}

fn unify_values(a: &ValueKind, b: &ValueKind) -> Result<ValueKind> {
    if a == b {
        return Ok(a.clone());
    }
    match (a, b) {
        (ValueKind::Vector { dim: d1, algebra: a1 }, ValueKind::Vector { dim: d2, algebra: a2 })
            if d1 == d2 =>
        {
            match (a1, a2) {
                (Some(x), None) => Ok(ValueKind::Vector { dim: *d1, algebra: Some(x.clone()) }),
                (None, Some(y)) => Ok(ValueKind::Vector { dim: *d1, algebra: Some(y.clone()) }),
                _ => Err(Error::ValueMismatch("incompatible algebra tags".into())),
            }
        }
        _ => Err(Error::ValueMismatch(format!(
            "cannot combine {} with {}",
            a.describe(),
            b.describe()
        ))),
    }
}

// ---------------------------------------------------------------------------
// Rational maps between charts: pullback and pushforward
// ---------------------------------------------------------------------------

/// Map between charts with rational component functions (target coords in
/// terms of source coords).
#[derive(Clone, Debug)]
pub struct RationalMap {
    source: Chart,
    target: Chart,
    comps: Vec<RF>,
}

impl RationalMap {
    pub fn new(source: Chart, target: Chart, comps: Vec<RF>) -> Result<Self> {
        if comps.len() != target.dim() {
            return Err(Error::DimensionMismatch("one component per target variable".into()));
        }
        for c in &comps {
            if c.nvars() != source.dim() {
                return Err(Error::DimensionMismatch("map component arity".into()));
            }
        }
        Ok(RationalMap { source, target, comps })
    }

    pub fn source(&self) -> &Chart {
        &self.source
    }

    pub fn target(&self) -> &Chart {
        &self.target
    }

    pub fn components(&self) -> &[RF] {
        &self.comps
    }

    /// Composes a target-chart function with the map.
    pub fn compose(&self, f: &RF) -> Result<RF> {
        f.subst(&self.comps)
    }

    /// Jacobian matrix d(comp_k)/d(source_j) as functions on the source chart.
    pub fn jacobian(&self) -> FMat {
        (0..self.comps.len())
            .map(|k| (0..self.source.dim()).map(|j| self.comps[k].deriv(j)).collect())
            .collect()
    }

    /// Pullback of scalar- or vector-valued forms.
    pub fn pullback(&self, form: &Form) -> Result<Form> {
        same_chart(&self.target, &form.chart)?;
        if matches!(form.value, ValueKind::Tangent) {
            return Err(Error::ValueMismatch(
                "tangent-valued forms push forward along invertible maps instead".into(),
            ));
        }
        let n = self.source.dim();
        let jac = self.jacobian();
        // d(comp_i) as scalar 1-forms on the source chart
        let mut dcomp: Vec<Form> = Vec::with_capacity(self.comps.len());
        for k in 0..self.comps.len() {
            let mut f = Form::zero(self.source.clone(), 1, ValueKind::Scalar);
            for j in 0..n {
                if !jac[k][j].is_zero() {
                    f.accumulate(vec![j as u8], 1, &[jac[k][j].clone()]);
                }
            }
            dcomp.push(f);
        }
        let mut out = Form::zero(self.source.clone(), form.degree, form.value.clone());
        for (k, v) in &form.terms {
            // wedge of the pulled-back coordinate differentials
            let mut w = Form::function(self.source.clone(), RF::one(n))?;
            for &i in k {
                w = w.wedge(&dcomp[i as usize])?;
            }
            if w.is_zero() {
                continue;
            }
            let vals: Result<Vec<RF>> = v.iter().map(|x| self.compose(x)).collect();
            let vals = vals?;
            for (wk, wv) in &w.terms {
                let scaled: Vec<RF> = vals.iter().map(|x| x.mul(&wv[0])).collect();
                out.accumulate(wk.clone(), 1, &scaled);
            }
        }
        out.prune();
        Ok(out)
    }

    /// Pushforward of a tangent-valued form along this map, given its inverse.
    pub fn pushforward_tangent(&self, inverse: &RationalMap, form: &Form) -> Result<Form> {
        same_chart(&self.source, &form.chart)?;
        same_chart(&inverse.source, &self.target)?;
        same_chart(&inverse.target, &self.source)?;
        if !matches!(form.value, ValueKind::Tangent) {
            return Err(Error::ValueMismatch("pushforward needs a tangent-valued form".into()));
        }
        let jac = self.jacobian();
        // J composed with the inverse: functions on the target chart.
        let jt: FMat = jac
            .iter()
            .map(|row| row.iter().map(|f| inverse.compose(f)).collect::<Result<Vec<RF>>>())
            .collect::<Result<FMat>>()?;
        let mut comps_out: Vec<Form> = Vec::new();
        let m = form.value_dim();
        // scalar pullback of each component form along the inverse map
        let mut pulled: Vec<Form> = Vec::with_capacity(m);
        for c in 0..m {
            pulled.push(inverse.pullback(&form.component(c))?);
        }
        for k in 0..self.target.dim() {
            let mut acc = Form::zero(self.target.clone(), form.degree, ValueKind::Scalar);
            for c in 0..m {
                if jt[k][c].is_zero() || pulled[c].is_zero() {
                    continue;
                }
                acc = acc.add(&pulled[c].scale_fn(&jt[k][c]))?;
            }
            comps_out.push(acc);
        }
        Form::from_components(self.target.clone(), form.degree, ValueKind::Tangent, &comps_out)
    }

    pub fn eval_f64(&self, point: &[f64]) -> Result<Vec<f64>> {
        self.comps.iter().map(|c| c.eval_f64(point)).collect()
    }

    pub fn eval_rat(&self, point: &[Rat]) -> Result<Vec<Rat>> {
        self.comps.iter().map(|c| c.eval_rat(point)).collect()
    }
}

/// Insertion operator i_K for a tangent-valued k-form into a p-form
/// (p >= 1, scalar or vector values): the shuffle-summed contraction.
pub fn insert_tangent(k_form: &Form, theta: &Form) -> Result<Form> {
    use itertools::Itertools;
    same_chart(k_form.chart(), theta.chart())?;
    if !matches!(k_form.value, ValueKind::Tangent) {
        return Err(Error::ValueMismatch("insertion operand must be tangent-valued".into()));
    }
    if matches!(theta.value, ValueKind::Tangent) {
        return Err(Error::ValueMismatch("insertion target must be scalar or vector".into()));
    }
    let k = k_form.degree();
    let p = theta.degree();
    if p == 0 {
        return Ok(Form::zero(theta.chart.clone(), 0, theta.value.clone()));
    }
    let n = theta.chart.dim();
    let deg = k + p - 1;
    let mut out = Form::zero(theta.chart.clone(), deg, theta.value.clone());
    if deg > n {
        return Ok(out);
    }
    let dim = theta.value_dim();
    let norm = {
        let mut f = 1i64;
        for i in 1..=k {
            f *= i as i64;
        }
        for i in 1..=(p - 1) {
            f *= i as i64;
        }
        Rat::new(1.into(), f.into())
    };
    for tuple in (0..n as u8).combinations(deg) {
        let mut acc = vec![RF::zero(n); dim];
        let mut nonzero = false;
        for perm in tuple.iter().copied().permutations(deg) {
            let (sign, _) = sort_sign(&perm).expect("distinct indices");
            let kv = k_form.value_on(&perm[..k]);
            if kv.iter().all(|x| x.is_zero()) {
                continue;
            }
            // theta(K(..), rest): expand the vector-field slot
            for (m0, c) in kv.iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                let mut args = Vec::with_capacity(p);
                args.push(m0 as u8);
                args.extend_from_slice(&perm[k..]);
                let tv = theta.value_on(&args);
                for (a, t) in acc.iter_mut().zip(&tv) {
                    if !t.is_zero() {
                        let add = c.mul(t);
                        *a = if sign > 0 { a.add(&add) } else { a.sub(&add) };
                        nonzero = true;
                    }
                }
            }
        }
        if nonzero {
            let vals: Vec<RF> = acc.iter().map(|x| x.scale(&norm)).collect();
            out.accumulate(tuple.clone(), 1, &vals);
        }
    }
    out.prune();
    Ok(out)
}
