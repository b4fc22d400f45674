//! Lie algebra actions by vector fields: fundamental fields, isotropy,
//! rank, horizontal/equivariant/basic predicates, and the identities tying
//! the induced tangent-valued operator to the algebra-valued calculus.

use crate::brackets::{alg_bracket, fn_bracket, tensor_field};
use crate::cert::Certificate;
use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::form::{Form, ValueKind, VectorField};
use crate::lie::{LieAlgebra, Subalgebra};
use crate::linalg::{self, QMat};
use crate::poly::{poly_lcm, Poly, Rat};
use crate::ratfunc::RF;
use num::Zero;
use std::collections::BTreeMap;
use std::sync::Arc;

/// Lie algebra acting on a chart through fundamental vector fields.
///
/// The homomorphism law `[zeta_i, zeta_j] = zeta([e_i, e_j])` is certified by
/// `check_homomorphism`, not enforced at construction, so that deliberately
/// broken inputs can be diagnosed.
#[derive(Clone, Debug)]
pub struct GAction {
    algebra: Arc<LieAlgebra>,
    chart: Chart,
    fundamentals: Vec<VectorField>,
}

/// Exact pointwise data: the evaluation matrix, its rank, and the isotropy.
#[derive(Clone, Debug)]
pub struct PointData {
    pub point: Vec<Rat>,
    /// chart-dim x algebra-dim matrix; column i is zeta_i at the point.
    pub zeta_matrix: QMat,
    pub rank: usize,
    pub isotropy: Subalgebra,
}

impl PointData {
    pub fn is_free(&self) -> bool {
        self.isotropy.dim() == 0
    }

    pub fn is_transitive(&self) -> bool {
        self.rank == self.zeta_matrix.len()
    }
}

/// Sample-based and symbolic classification flags.
#[derive(Clone, Debug)]
pub struct Classification {
    pub effective: bool,
    /// Basis of the symbolic kernel of the action map (empty iff effective).
    pub kernel: Subalgebra,
    pub free_on_sample: bool,
    pub transitive_on_sample: bool,
    pub constant_rank_on_sample: bool,
    pub sample_ranks: Vec<usize>,
    /// Rank of the evaluation matrix over the function field.
    pub generic_rank: usize,
    /// For square evaluation matrices: determinant is a nonzero function,
    /// so the action is free and transitive off its zero locus.
    pub det_nonzero: Option<bool>,
}

impl GAction {
    pub fn new(
        algebra: Arc<LieAlgebra>,
        chart: Chart,
        fundamentals: Vec<VectorField>,
    ) -> Result<Self> {
        if fundamentals.len() != algebra.dim() {
            return Err(Error::DimensionMismatch(
                "one fundamental field per basis element".into(),
            ));
        }
        for f in &fundamentals {
            if f.chart() != &chart {
                return Err(Error::ChartMismatch {
                    expected: chart.describe(),
                    found: f.chart().describe(),
                });
            }
        }
        Ok(GAction { algebra, chart, fundamentals })
    }

    pub fn algebra(&self) -> &Arc<LieAlgebra> {
        &self.algebra
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn fundamentals(&self) -> &[VectorField] {
        &self.fundamentals
    }

    pub fn fundamental(&self, i: usize) -> &VectorField {
        &self.fundamentals[i]
    }

    /// Fundamental field of an arbitrary algebra element.
    pub fn zeta(&self, x: &[Rat]) -> VectorField {
        let n = self.chart.dim();
        let mut comps = vec![RF::zero(n); n];
        for (i, c) in x.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            for (k, comp) in self.fundamentals[i].components().iter().enumerate() {
                comps[k] = comps[k].add(&comp.scale(c));
            }
        }
        VectorField::new(self.chart.clone(), comps).expect("component arity preserved")
    }

    /// Certifies the homomorphism law pair by pair.
    pub fn check_homomorphism(&self) -> Result<Certificate> {
        let mut cert = Certificate::new("action homomorphism");
        let names = self.algebra.names();
        for i in 0..self.algebra.dim() {
            for j in (i + 1)..self.algebra.dim() {
                let lhs = self.fundamentals[i].bracket(&self.fundamentals[j])?;
                let rhs = self.zeta(self.algebra.structure(i, j));
                let residual = lhs.sub(&rhs)?;
                cert.exact(
                    format!("bracket({},{})", names[i], names[j]),
                    residual.is_zero(),
                    format!(
                        "[zeta_{},zeta_{}] differs from zeta of the bracket",
                        names[i], names[j]
                    ),
                );
            }
        }
        if self.algebra.dim() < 2 {
            cert.push("bracket(trivial)", true, "");
        }
        Ok(cert)
    }

    /// Evaluation matrix at a rational point (columns are fundamentals).
    pub fn zeta_matrix_at(&self, x: &[Rat]) -> Result<QMat> {
        let n = self.chart.dim();
        if !self.chart.contains_rat(x) {
            return Err(Error::Invalid("point is outside the chart".into()));
        }
        let mut m = vec![vec![Rat::zero(); self.algebra.dim()]; n];
        for (i, f) in self.fundamentals.iter().enumerate() {
            let col = f.eval_rat(x)?;
            for (v, row) in m.iter_mut().enumerate() {
                row[i] = col[v].clone();
            }
        }
        Ok(m)
    }

    /// Rank and isotropy at a point, all exact.
    pub fn analyze_point(&self, x: &[Rat]) -> Result<PointData> {
        let z = self.zeta_matrix_at(x)?;
        let rank = linalg::rank(&z);
        let kernel = linalg::nullspace(&z);
        let isotropy = Subalgebra::span(self.algebra.dim(), &kernel)?;
        debug_assert_eq!(rank + isotropy.dim(), self.algebra.dim());
        Ok(PointData { point: x.to_vec(), zeta_matrix: z, rank, isotropy })
    }

    /// The evaluation matrix over the function field.
    fn zeta_matrix_fn(&self) -> Vec<Vec<RF>> {
        let n = self.chart.dim();
        (0..n)
            .map(|v| {
                self.fundamentals
                    .iter()
                    .map(|f| f.components()[v].clone())
                    .collect()
            })
            .collect()
    }

    /// Symbolic kernel of the action map: elements acting by the zero field.
    pub fn symbolic_kernel(&self) -> Result<Subalgebra> {
        let d = self.algebra.dim();
        let n = self.chart.dim();
        let mut rows: Vec<Vec<Rat>> = Vec::new();
        for v in 0..n {
            // clear denominators in component v across all fundamentals
            let mut den = Poly::one(n);
            for f in &self.fundamentals {
                den = poly_lcm(&den, f.components()[v].denom());
            }
            let mut by_monomial: BTreeMap<crate::poly::Monomial, Vec<Rat>> = BTreeMap::new();
            for (i, f) in self.fundamentals.iter().enumerate() {
                let c = &f.components()[v];
                if c.is_zero() {
                    continue;
                }
                let scaled = c.numer().mul(&den.exact_div(c.denom()));
                for (mono, coef) in &scaled.terms {
                    by_monomial
                        .entry(mono.clone())
                        .or_insert_with(|| vec![Rat::zero(); d])[i] = coef.clone();
                }
            }
            rows.extend(by_monomial.into_values());
        }
        if rows.is_empty() {
            return Ok(Subalgebra::full(d));
        }
        let kernel = linalg::nullspace(&rows);
        Subalgebra::span(d, &kernel)
    }

    /// Sample-based flags plus the symbolic effectivity and rank checks.
    pub fn classify(&self, sample: &[Vec<Rat>]) -> Result<Classification> {
        if sample.is_empty() {
            return Err(Error::Invalid("classification needs a nonempty sample".into()));
        }
        let kernel = self.symbolic_kernel()?;
        let mut free = true;
        let mut transitive = true;
        let mut ranks = Vec::with_capacity(sample.len());
        for x in sample {
            let data = self.analyze_point(x)?;
            free &= data.is_free();
            transitive &= data.is_transitive();
            ranks.push(data.rank);
        }
        let constant = ranks.windows(2).all(|w| w[0] == w[1]);
        let zf = self.zeta_matrix_fn();
        let generic_rank = linalg::f_rank(&zf);
        let det_nonzero = if self.chart.dim() == self.algebra.dim() {
            Some(!linalg::f_det(&zf).is_zero())
        } else {
            None
        };
        Ok(Classification {
            effective: kernel.dim() == 0,
            kernel,
            free_on_sample: free,
            transitive_on_sample: transitive,
            constant_rank_on_sample: constant,
            sample_ranks: ranks,
            generic_rank,
            det_nonzero,
        })
    }

    /// Tangent-valued operator of an algebra-valued form: sum phi^i (x) zeta_i.
    pub fn zeta_of_form(&self, phi: &Form) -> Result<Form> {
        let d = self.algebra.dim();
        match phi.value_kind() {
            ValueKind::Vector { dim, algebra } if *dim == d => {
                if let Some(a) = algebra {
                    if a.as_ref() != self.algebra.as_ref() {
                        return Err(Error::ValueMismatch("algebra tag differs from action".into()));
                    }
                }
            }
            other => {
                return Err(Error::ValueMismatch(format!(
                    "zeta_of_form needs algebra-dim vector values, found {:?}",
                    other
                )))
            }
        }
        let mut out = Form::zero(self.chart.clone(), phi.degree(), ValueKind::Tangent);
        for i in 0..d {
            let pi = phi.component(i);
            if pi.is_zero() {
                continue;
            }
            out = out.add(&tensor_field(&pi, &self.fundamentals[i])?)?;
        }
        Ok(out)
    }

    /// Horizontality: every fundamental field contracts to zero.
    pub fn is_horizontal(&self, psi: &Form) -> Result<Certificate> {
        let mut cert = Certificate::new("horizontal");
        for (i, name) in self.algebra.names().iter().enumerate() {
            let r = psi.interior_product(&self.fundamentals[i])?;
            cert.exact(
                format!("contraction({name})"),
                r.is_zero(),
                format!("i_zeta({name}) psi is nonzero"),
            );
        }
        Ok(cert)
    }

    /// Equivariance for a representation on the value space:
    /// L_zeta_i psi + rho(e_i) psi = 0 for every basis element.
    pub fn is_equivariant(&self, psi: &Form, rho: &[QMat]) -> Result<Certificate> {
        if rho.len() != self.algebra.dim() {
            return Err(Error::DimensionMismatch("one matrix per basis element".into()));
        }
        let mut cert = Certificate::new("equivariant");
        for (i, name) in self.algebra.names().iter().enumerate() {
            let lie = psi.lie_derivative(&self.fundamentals[i])?;
            let acted = psi.apply_matrix(&rho[i], psi.value_kind().clone())?;
            let residual = lie.add(&acted)?;
            cert.exact(
                format!("derivative({name})"),
                residual.is_zero(),
                format!("L_zeta({name}) psi + rho({name}) psi is nonzero"),
            );
        }
        Ok(cert)
    }

    /// Basic = horizontal and equivariant.
    pub fn is_basic(&self, psi: &Form, rho: &[QMat]) -> Result<Certificate> {
        let mut cert = Certificate::new("basic");
        cert.merge(self.is_horizontal(psi)?);
        cert.merge(self.is_equivariant(psi, rho)?);
        Ok(cert)
    }

    /// Zero representation matrices sized for a form's value space.
    pub fn trivial_rep(&self, value_dim: usize) -> Vec<QMat> {
        vec![vec![vec![Rat::zero(); value_dim]; value_dim]; self.algebra.dim()]
    }

    /// Adjoint representation matrices on the algebra itself.
    pub fn adjoint_rep(&self) -> Vec<QMat> {
        (0..self.algebra.dim())
            .map(|i| self.algebra.ad_matrix(&self.algebra.basis_vec(i)))
            .collect()
    }

    /// Identity battery for the operator form of basic algebra-valued forms:
    /// (1) [zeta_X, zeta_psi] = 0,
    /// (2) [zeta_phi, zeta_psi] = -zeta of [phi, psi],
    /// and with a connection form omega (Phi = zeta_omega):
    /// (3) [Phi, zeta_psi] = -zeta of (d psi + [omega, psi]),
    /// (4) (1/2)[Phi, Phi] = -zeta of (d omega + (1/2)[omega, omega]).
    pub fn check_prop_battery(
        &self,
        phi: &Form,
        psi: &Form,
        omega: Option<&Form>,
    ) -> Result<Certificate> {
        let mut cert = Certificate::new("operator identity battery");
        let ad = self.adjoint_rep();
        for (tag, f) in [("phi", phi), ("psi", psi)] {
            let pre = self.is_basic(f, &ad)?;
            cert.push(
                format!("precondition: {tag} basic"),
                pre.passed(),
                if pre.passed() { String::new() } else { pre.summary() },
            );
        }
        let zphi = self.zeta_of_form(phi)?;
        let zpsi = self.zeta_of_form(psi)?;
        for (i, name) in self.algebra.names().iter().enumerate() {
            let br = fn_bracket(&self.fundamentals[i].to_form(), &zpsi)?;
            cert.exact(
                format!("(1) [zeta({name}), zeta_psi] = 0"),
                br.is_zero(),
                "nonzero bracket with a fundamental field".to_string(),
            );
        }
        let lhs2 = fn_bracket(&zphi, &zpsi)?;
        let rhs2 = self.zeta_of_form(&alg_bracket(phi, psi)?)?.neg();
        cert.exact(
            "(2) [zeta_phi, zeta_psi] = -zeta([phi,psi])",
            lhs2 == rhs2,
            "operator bracket differs from value bracket".to_string(),
        );
        if let Some(om) = omega {
            let pre = self.connection_form_conditions(om)?;
            cert.push(
                "precondition: omega is a connection form",
                pre.passed(),
                if pre.passed() { String::new() } else { pre.summary() },
            );
            let big_phi = self.zeta_of_form(om)?;
            let lhs3 = fn_bracket(&big_phi, &zpsi)?;
            let dpsi_tw = psi.exterior_derivative().add(&alg_bracket(om, psi)?)?;
            let rhs3 = self.zeta_of_form(&dpsi_tw)?.neg();
            cert.exact(
                "(3) [Phi, zeta_psi] = -zeta(d psi + [omega, psi])",
                lhs3 == rhs3,
                "covariant derivative identity fails".to_string(),
            );
            let lhs4 = fn_bracket(&big_phi, &big_phi)?.scale_rat(&Rat::new(1.into(), 2.into()));
            let curv = om
                .exterior_derivative()
                .add(&alg_bracket(om, om)?.scale_rat(&Rat::new(1.into(), 2.into())))?;
            let rhs4 = self.zeta_of_form(&curv)?.neg();
            cert.exact(
                "(4) (1/2)[Phi, Phi] = -zeta(curvature form)",
                lhs4 == rhs4,
                "curvature identity fails".to_string(),
            );
        }
        Ok(cert)
    }

    /// The two defining conditions on an algebra-valued connection form:
    /// equivariance for the adjoint action and zeta(omega(zeta_X)) = zeta_X.
    pub fn connection_form_conditions(&self, omega: &Form) -> Result<Certificate> {
        let mut cert = Certificate::new("connection form conditions");
        let eq = self.is_equivariant(omega, &self.adjoint_rep())?;
        cert.push("(1) adjoint equivariance", eq.passed(), if eq.passed() { String::new() } else { eq.summary() });
        let big_phi = self.zeta_of_form(omega)?;
        for (i, name) in self.algebra.names().iter().enumerate() {
            let projected = big_phi.value_on_fields(&[&self.fundamentals[i]])?;
            let residual = VectorField::new(self.chart.clone(), projected)?
                .sub(&self.fundamentals[i])?;
            cert.exact(
                format!("(2) projection fixes zeta({name})"),
                residual.is_zero(),
                "zeta(omega(zeta)) differs from zeta".to_string(),
            );
        }
        Ok(cert)
    }

    /// Certifies a commuting anti-homomorphic partner action.
    pub fn verify_dual_action(&self, dual: &GAction) -> Result<Certificate> {
        if dual.chart != self.chart {
            return Err(Error::ChartMismatch {
                expected: self.chart.describe(),
                found: dual.chart.describe(),
            });
        }
        if dual.algebra.as_ref() != self.algebra.as_ref() {
            return Err(Error::ValueMismatch("dual action must share the algebra".into()));
        }
        let names = self.algebra.names();
        let mut cert = Certificate::new("dual action");
        for i in 0..self.algebra.dim() {
            for j in 0..self.algebra.dim() {
                let br = dual.fundamentals[i].bracket(&self.fundamentals[j])?;
                cert.exact(
                    format!("commutes({},{})", names[i], names[j]),
                    br.is_zero(),
                    "dual field fails to commute with the action".to_string(),
                );
            }
        }
        for i in 0..self.algebra.dim() {
            for j in (i + 1)..self.algebra.dim() {
                let lhs = dual.fundamentals[i].bracket(&dual.fundamentals[j])?;
                let rhs = dual.zeta(self.algebra.structure(i, j)).neg();
                cert.exact(
                    format!("anti({},{})", names[i], names[j]),
                    lhs == rhs,
                    "dual brackets are not anti-homomorphic".to_string(),
                );
            }
        }
        Ok(cert)
    }
}
