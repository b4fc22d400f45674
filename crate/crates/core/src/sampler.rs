//! Seeded random generation of rationals, polynomials, fields, and forms
//! on a chart.
//!
//! The property suites and the scenario runner's randomized checks both
//! draw their inputs from here, so a fixed seed reproduces the exact same
//! corpus everywhere. All draws use small rational coefficients to keep
//! exact arithmetic fast.

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chart::Chart;
use crate::form::{Form, ValueKind, VectorField};
use crate::poly::{rat, Rat};
use crate::ratfunc::RF;

/// Deterministic source of random symbolic data.
pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Derives an independent stream for a labeled sub-task, so adding a
    /// draw in one place does not shift every later draw.
    pub fn fork(&mut self, label: u64) -> Sampler {
        let base: u64 = self.rng.gen();
        Sampler::new(base ^ label.wrapping_mul(0x9e37_79b9_7f4a_7c15))
    }

    /// A small rational: numerator in -3..=3, denominator 1 or 2.
    pub fn rat(&mut self) -> Rat {
        let num = self.rng.gen_range(-3i64..=3);
        let den = self.rng.gen_range(1i64..=2);
        rat(num, den)
    }

    /// A small nonzero rational.
    pub fn rat_nonzero(&mut self) -> Rat {
        let num = *[-3i64, -2, -1, 1, 2, 3].get(self.rng.gen_range(0..6)).unwrap();
        let den = self.rng.gen_range(1i64..=2);
        rat(num, den)
    }

    /// A random polynomial of total degree at most `max_deg`, never
    /// identically zero.
    pub fn poly(&mut self, chart: &Chart, max_deg: usize) -> RF {
        let all: Vec<usize> = (0..chart.dim()).collect();
        self.poly_in(chart, &all, max_deg)
    }

    /// A random nonzero polynomial using only the listed chart variables.
    pub fn poly_in(&mut self, chart: &Chart, vars: &[usize], max_deg: usize) -> RF {
        let n = chart.dim();
        let monomials: Vec<Vec<usize>> = if vars.is_empty() {
            vec![vec![0; n]]
        } else {
            vars.iter()
                .map(|_| 0..=max_deg)
                .multi_cartesian_product()
                .filter(|exps| exps.iter().sum::<usize>() <= max_deg)
                .map(|exps| {
                    let mut full = vec![0usize; n];
                    for (v, e) in vars.iter().zip(exps) {
                        full[*v] = e;
                    }
                    full
                })
                .collect()
        };
        let mut out = RF::zero(n);
        for m in &monomials {
            if self.rng.gen_bool(0.4) {
                out = out.add(&monomial(n, m).scale(&self.rat()));
            }
        }
        if out.is_zero() {
            let pick = self.rng.gen_range(0..monomials.len());
            out = monomial(n, &monomials[pick]).scale(&self.rat_nonzero());
        }
        out
    }

    /// A random polynomial vector field.
    pub fn vector_field(&mut self, chart: &Chart, max_deg: usize) -> VectorField {
        let comps = (0..chart.dim()).map(|_| self.poly(chart, max_deg)).collect();
        VectorField::new(chart.clone(), comps).expect("sampled components match the chart")
    }

    /// A random scalar form of the given degree with polynomial
    /// coefficients; nonzero whenever the degree fits on the chart.
    pub fn scalar_form(&mut self, chart: &Chart, degree: usize, max_deg: usize) -> Form {
        let all: Vec<usize> = (0..chart.dim()).collect();
        self.scalar_form_in(chart, degree, &all, &all, max_deg)
    }

    /// A random scalar form whose wedge factors come from `wedge_vars` and
    /// whose coefficients involve only `coeff_vars`.
    pub fn scalar_form_in(
        &mut self,
        chart: &Chart,
        degree: usize,
        wedge_vars: &[usize],
        coeff_vars: &[usize],
        max_deg: usize,
    ) -> Form {
        let mut out = Form::zero(chart.clone(), degree, ValueKind::Scalar);
        if degree > wedge_vars.len() {
            return out;
        }
        let combos: Vec<Vec<usize>> =
            wedge_vars.iter().copied().combinations(degree).collect();
        let mut wrote = false;
        for idx in &combos {
            if self.rng.gen_bool(0.6) {
                out.set_term(idx, vec![self.poly_in(chart, coeff_vars, max_deg)])
                    .expect("sampled term is well-formed");
                wrote = true;
            }
        }
        if !wrote {
            let pick = self.rng.gen_range(0..combos.len());
            out.set_term(&combos[pick], vec![self.poly_in(chart, coeff_vars, max_deg)])
                .expect("sampled term is well-formed");
        }
        out
    }

    /// A random decomposable tangent-valued form: a scalar form together
    /// with a field, plus their tensor product.
    pub fn decomposable(
        &mut self,
        chart: &Chart,
        degree: usize,
        max_deg: usize,
    ) -> (Form, VectorField, Form) {
        let phi = self.scalar_form(chart, degree, max_deg);
        let x = self.vector_field(chart, max_deg);
        let tensor =
            crate::brackets::tensor_field(&phi, &x).expect("sampled factors share the chart");
        (phi, x, tensor)
    }

    /// A random rational point on the chart, avoiding excluded loci.
    pub fn point(&mut self, chart: &Chart) -> Vec<Rat> {
        for _ in 0..64 {
            let p: Vec<Rat> =
                (0..chart.dim()).map(|_| rat(self.rng.gen_range(-3i64..=3), 1)).collect();
            if chart.contains_rat(&p) {
                return p;
            }
        }
        // Excluded loci are proper subvarieties, so a shifted all-ones
        // point escapes them after finitely many bumps.
        let mut p: Vec<Rat> = vec![rat(1, 1); chart.dim()];
        while !chart.contains_rat(&p) {
            p[0] += rat(1, 1);
        }
        p
    }
}

fn monomial(nvars: usize, exps: &[usize]) -> RF {
    let mut out = RF::one(nvars);
    for (v, &e) in exps.iter().enumerate() {
        for _ in 0..e {
            out = out.mul(&RF::var(nvars, v));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_is_deterministic_and_well_formed() {
        let c = Chart::of(&["x", "y", "z"]);
        let mut a = Sampler::new(7);
        let mut b = Sampler::new(7);
        for _ in 0..10 {
            let (pa, pb) = (a.poly(&c, 2), b.poly(&c, 2));
            assert_eq!(pa, pb);
            assert!(!pa.is_zero());
        }
        let fa = a.scalar_form(&c, 2, 2);
        let fb = b.scalar_form(&c, 2, 2);
        assert_eq!(fa, fb);
        assert!(!fa.is_zero());
        assert_eq!(a.point(&c), b.point(&c));

        let mut f1 = a.fork(1);
        let mut g1 = b.fork(1);
        assert_eq!(f1.rat(), g1.rat());
    }

    #[test]
    fn restricted_sampling_respects_the_variable_split() {
        let c = Chart::of(&["x", "y", "z"]);
        let mut s = Sampler::new(11);
        for _ in 0..10 {
            let f = s.scalar_form_in(&c, 1, &[0, 1], &[0, 1], 2);
            // No dz factor and no z-dependence anywhere.
            for (idx, comps) in f.terms() {
                assert!(!idx.contains(&2));
                for c in comps {
                    assert!(c.deriv(2).is_zero());
                }
            }
        }
        let p = s.point(&Chart::with_excluded(
            vec!["x".into(), "y".into()],
            vec![Chart::of(&["x", "y"]).expr("x^2+y^2").unwrap()],
        )
        .unwrap());
        assert!(!(p[0] == rat(0, 1) && p[1] == rat(0, 1)));
    }
}
