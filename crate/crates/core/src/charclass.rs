//! Invariant polynomials on gl(n), Chern–Weil forms, transgression forms and
//! Chern–Simons actions of Levi-Civita connections.
//!
//! Polynomials are stored over products of even trace powers
//! `tr(X^{m₁})⋯tr(X^{m_r})` with rational coefficients. A normalized
//! polynomial is evaluated on `X/2π`, so `p₁ = −½ tr(X²)` normalized is
//! `−(1/8π²) tr(F∧F)`.

use std::f64::consts::PI;
use std::fmt;

use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::fields::{FormField, MatrixFormField};
use crate::geometry::{apply_diffeo, levi_civita, Diffeomorphism, OrientedMetric};

/// Gauss–Legendre nodes and weights on `[0, 1]`, eight points.
const GL_NODES: [f64; 8] = [
    0.019_855_071_751_231_856,
    0.101_666_761_293_186_63,
    0.237_233_795_041_835_5,
    0.408_282_678_752_175_1,
    0.591_717_321_247_824_9,
    0.762_766_204_958_164_5,
    0.898_333_238_706_813_4,
    0.980_144_928_248_768_2,
];
const GL_WEIGHTS: [f64; 8] = [
    0.050_614_268_145_188_13,
    0.111_190_517_226_687_24,
    0.156_853_322_938_943_64,
    0.181_341_891_689_180_99,
    0.181_341_891_689_180_99,
    0.156_853_322_938_943_64,
    0.111_190_517_226_687_24,
    0.050_614_268_145_188_13,
];

#[derive(Clone, Debug, PartialEq)]
pub struct InvariantPolynomial {
    terms: Vec<(Rational64, Vec<u32>)>,
    normalized: bool,
}

impl InvariantPolynomial {
    /// Each term is a coefficient and the list of (even) trace powers in the
    /// monomial; all monomials must have the same total degree.
    pub fn new(terms: Vec<(Rational64, Vec<u32>)>, normalized: bool) -> Result<Self> {
        let terms: Vec<_> = terms.into_iter().filter(|(c, _)| !c.is_zero()).collect();
        let Some((_, first)) = terms.first() else {
            return Err(Error::Polynomial("no non-zero terms".into()));
        };
        let degree: u32 = first.iter().sum();
        for (_, m) in &terms {
            if m.is_empty() || m.iter().any(|&p| p == 0 || p % 2 != 0) {
                return Err(Error::Polynomial(format!("monomial {m:?} uses odd or zero trace powers")));
            }
            if m.iter().sum::<u32>() != degree {
                return Err(Error::Polynomial(format!(
                    "monomial {m:?} has degree {}, expected {degree}",
                    m.iter().sum::<u32>()
                )));
            }
        }
        let mut terms = terms;
        for (_, m) in terms.iter_mut() {
            m.sort_unstable();
        }
        Ok(InvariantPolynomial { terms, normalized })
    }

    /// `tr(X²)`.
    pub fn tr2() -> Self {
        Self::new(vec![(Rational64::from_integer(1), vec![2])], false).expect("valid")
    }

    /// First Pontryagin polynomial, integer normalized.
    pub fn p1() -> Self {
        Self::new(vec![(Rational64::new(-1, 2), vec![2])], true).expect("valid")
    }

    pub fn terms(&self) -> &[(Rational64, Vec<u32>)] {
        &self.terms
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Degree `k` as a polynomial in the matrix argument.
    pub fn degree(&self) -> usize {
        self.terms[0].1.iter().sum::<u32>() as usize
    }

    pub fn scaled(&self, c: Rational64) -> Result<Self> {
        Self::new(self.terms.iter().map(|(a, m)| (a * c, m.clone())).collect(), self.normalized)
    }

    pub fn plus(&self, other: &InvariantPolynomial) -> Result<Self> {
        if self.normalized != other.normalized {
            return Err(Error::Polynomial("cannot add normalized and unnormalized polynomials".into()));
        }
        let mut terms = self.terms.clone();
        for (c, m) in &other.terms {
            let mut m = m.clone();
            m.sort_unstable();
            match terms.iter_mut().find(|(_, n)| *n == m) {
                Some((a, _)) => *a += c,
                None => terms.push((*c, m)),
            }
        }
        Self::new(terms, self.normalized)
    }

    /// Factor `(2π)^{-k}` for normalized polynomials.
    fn scale(&self) -> f64 {
        if self.normalized {
            (2.0 * PI).powi(-(self.degree() as i32))
        } else {
            1.0
        }
    }

    fn coefficients(&self) -> impl Iterator<Item = (f64, &[u32])> {
        let s = self.scale();
        self.terms.iter().map(move |(c, m)| (s * c.to_f64().expect("finite"), m.as_slice()))
    }
}

impl fmt::Display for InvariantPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (c, m)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})")?;
            for p in m {
                write!(f, "·tr(X^{p})")?;
            }
        }
        if self.normalized {
            write!(f, " [X = F/2π]")?;
        }
        Ok(())
    }
}

/// `B∧B∧⋯∧B` (`m ≥ 1` factors).
fn matrix_power(b: &MatrixFormField, m: u32) -> Result<MatrixFormField> {
    let mut acc = b.clone();
    for _ in 1..m {
        acc = acc.wedge(b)?;
    }
    Ok(acc)
}

fn wedge_all(forms: Vec<FormField>) -> Result<FormField> {
    let mut it = forms.into_iter();
    let mut acc = it.next().ok_or_else(|| Error::Polynomial("empty product".into()))?;
    for f in it {
        acc = acc.wedge(&f)?;
    }
    Ok(acc)
}

fn accumulate(acc: &mut Option<FormField>, term: FormField) -> Result<()> {
    *acc = Some(match acc.take() {
        Some(a) => a.add(&term)?,
        None => term,
    });
    Ok(())
}

/// `p(F, …, F)`.
pub fn chern_weil(p: &InvariantPolynomial, f: &MatrixFormField) -> Result<FormField> {
    let n = f.grid().dim();
    if f.degree() != 2 {
        return Err(Error::Shape(format!("curvature must be a 2-form, got degree {}", f.degree())));
    }
    if 2 * p.degree() > n {
        return Err(Error::DegreeOverflow { got: 2 * p.degree(), dim: n });
    }
    let mut acc = None;
    for (c, powers) in p.coefficients() {
        let traces = powers.iter().map(|&m| Ok(matrix_power(f, m)?.trace())).collect::<Result<Vec<_>>>()?;
        accumulate(&mut acc, wedge_all(traces)?.scaled(c))?;
    }
    Ok(acc.expect("non-empty polynomial"))
}

/// `p(a, F, …, F)` for an odd form `a` and an even form `F`, using
/// `(1/k)·d/dε p(F + εa)` and cyclicity of the trace.
pub fn polarized_with_one(p: &InvariantPolynomial, a: &MatrixFormField, f: &MatrixFormField) -> Result<FormField> {
    if f.degree() % 2 != 0 {
        return Err(Error::Shape("repeated argument must have even degree".into()));
    }
    let k = p.degree() as f64;
    let mut acc = None;
    for (c, powers) in p.coefficients() {
        for (i, &mi) in powers.iter().enumerate() {
            let mut factors = Vec::with_capacity(powers.len());
            factors.push(a.wedge(&matrix_power(f, mi - 1)?)?.trace().scaled(mi as f64));
            for (j, &mj) in powers.iter().enumerate() {
                if j != i {
                    factors.push(matrix_power(f, mj)?.trace());
                }
            }
            accumulate(&mut acc, wedge_all(factors)?.scaled(c / k))?;
        }
    }
    Ok(acc.expect("non-empty polynomial"))
}

/// Fully polarized symmetric multilinear form `p(B₁, …, B_k)` with Koszul
/// signs for odd-degree arguments. Sums over all `k!` orderings; meant for
/// small `k` and as an independent check of the fast paths.
#[derive(Clone, Debug)]
pub struct PolarizedEvaluator {
    poly: InvariantPolynomial,
}

impl PolarizedEvaluator {
    pub fn new(poly: InvariantPolynomial) -> Self {
        PolarizedEvaluator { poly }
    }

    pub fn polynomial(&self) -> &InvariantPolynomial {
        &self.poly
    }

    pub fn evaluate(&self, args: &[&MatrixFormField]) -> Result<FormField> {
        let k = self.poly.degree();
        if args.len() != k {
            return Err(Error::Polynomial(format!("{} arguments for a degree-{k} polynomial", args.len())));
        }
        let perms = permutations(k);
        let norm = 1.0 / perms.len() as f64;
        let mut acc = None;
        for (c, powers) in self.poly.coefficients() {
            for perm in &perms {
                let sign = koszul_sign(perm, args);
                let mut traces = Vec::with_capacity(powers.len());
                let mut pos = 0;
                for &m in powers {
                    let mut prod = args[perm[pos]].clone();
                    for &idx in &perm[pos + 1..pos + m as usize] {
                        prod = prod.wedge(args[idx])?;
                    }
                    traces.push(prod.trace());
                    pos += m as usize;
                }
                accumulate(&mut acc, wedge_all(traces)?.scaled(sign * c * norm))?;
            }
        }
        Ok(acc.expect("non-empty polynomial"))
    }
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; k], &mut out);
    out
}

/// Sign picked up by reordering graded arguments into `perm` order.
fn koszul_sign(perm: &[usize], args: &[&MatrixFormField]) -> f64 {
    let mut sign = 1.0;
    for i in 0..perm.len() {
        for j in i + 1..perm.len() {
            if perm[i] > perm[j] && args[perm[i]].degree() % 2 == 1 && args[perm[j]].degree() % 2 == 1 {
                sign = -sign;
            }
        }
    }
    sign
}

/// Chern–Simons transgression `Tp(A₁, A₀) = k ∫₀¹ p(a, F_t, …, F_t) dt` with
/// `a = A₁ − A₀` and `A_t = A₀ + t a`; `dTp = p(F₁) − p(F₀)`.
pub fn transgression(p: &InvariantPolynomial, a1: &MatrixFormField, a0: &MatrixFormField) -> Result<FormField> {
    if a1.degree() != 1 || a0.degree() != 1 {
        return Err(Error::Shape("transgression needs two connection 1-forms".into()));
    }
    let n = a1.grid().dim();
    if 2 * p.degree() > n + 1 {
        return Err(Error::DegreeOverflow { got: 2 * p.degree() - 1, dim: n });
    }
    let a = a1.sub(a0)?;
    // F_t = F₀ + t (da + A₀∧a + a∧A₀) + t² a∧a
    let f0 = crate::geometry::curvature(a0)?;
    let lin = MatrixFormField::linear_combination(&[
        (1.0, &a.exterior_derivative()?),
        (1.0, &a0.wedge(&a)?),
        (1.0, &a.wedge(a0)?),
    ])?;
    let quad = a.wedge(&a)?;
    let k = p.degree() as f64;
    let mut acc = None;
    for (t, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
        let ft = MatrixFormField::linear_combination(&[(1.0, &f0), (*t, &lin), (t * t, &quad)])?;
        accumulate(&mut acc, polarized_with_one(p, &a, &ft)?.scaled(k * w))?;
    }
    Ok(acc.expect("eight nodes"))
}

/// `CS_{p,A₀}(g, 𝔬) = ∫_{(M,𝔬)} Tp(ω^g, A₀)`.
pub fn cs_action(p: &InvariantPolynomial, g: &OrientedMetric, a0: &MatrixFormField) -> Result<f64> {
    let n = g.metric.dim();
    if n % 2 == 0 || 2 * p.degree() != n + 1 {
        return Err(Error::Dimension(format!(
            "Chern–Simons action needs odd n with 2k = n + 1, got n = {n}, k = {}",
            p.degree()
        )));
    }
    let omega = levi_civita(&g.metric)?;
    transgression(p, &omega, a0)?.integrate_top_oriented(g.orientation)
}

/// `δ_φ^p(g) = CS_{p,A₀}(φ·g) − CS_{p,A₀}(g)` at a fixed background.
pub fn delta_phi(
    p: &InvariantPolynomial,
    phi: &Diffeomorphism,
    g: &OrientedMetric,
    a0: &MatrixFormField,
) -> Result<f64> {
    let moved = apply_diffeo(phi, g)?;
    Ok(cs_action(p, &moved, a0)? - cs_action(p, g, a0)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{GridManifold, Orientation, Topology};
    use crate::geometry::{MetricField, TrigTensor};
    use crate::linalg;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;
    use std::sync::Arc;

    fn torus(n: usize, nodes: usize) -> Arc<GridManifold> {
        GridManifold::build(n, &vec![nodes; n], &vec![1.0; n], Orientation::Positive, Topology::Torus).unwrap()
    }

    /// Rank-`m` connection with one random mode-1 sine per entry.
    fn connection(grid: &Arc<GridManifold>, rank: usize, amp: f64, seed: u64) -> MatrixFormField {
        let n = grid.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coef: Vec<(f64, Vec<f64>, f64)> = (0..n * rank * rank)
            .map(|_| {
                let k: Vec<f64> = (0..n).map(|_| rng.gen_range(-1i32..=1) as f64).collect();
                (amp * rng.gen_range(-1.0..1.0), k, rng.gen_range(0.0..TAU))
            })
            .collect();
        MatrixFormField::from_fn(grid, 1, rank, |x, out| {
            for (o, (a, k, ph)) in out.iter_mut().zip(&coef) {
                let th: f64 = k.iter().zip(x).map(|(k, x)| k * x).sum::<f64>() * TAU + ph;
                *o = a * th.sin();
            }
        })
        .unwrap()
    }

    fn bumpy(grid: &Arc<GridManifold>, seed: u64) -> OrientedMetric {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fam = TrigTensor::random_bumpy(&mut rng, &grid.periods(), 0.1, 1, 3);
        OrientedMetric::from_metric(MetricField::from_family(grid, Arc::new(fam)).unwrap())
    }

    fn poly(terms: &[(i64, &[u32])]) -> InvariantPolynomial {
        InvariantPolynomial::new(terms.iter().map(|(c, m)| (Rational64::from_integer(*c), m.to_vec())).collect(), false)
            .unwrap()
    }

    #[test]
    fn gauss_legendre_is_exact_to_degree_fifteen() {
        for j in 0..16 {
            let q: f64 = GL_NODES.iter().zip(GL_WEIGHTS).map(|(t, w)| w * t.powi(j)).sum();
            assert!((q - 1.0 / (j + 1) as f64).abs() < 1e-15, "degree {j}: {q}");
        }
    }

    #[test]
    fn polynomial_validation() {
        assert!(InvariantPolynomial::new(vec![(Rational64::from_integer(1), vec![3])], false).is_err());
        assert!(InvariantPolynomial::new(vec![(Rational64::from_integer(1), vec![2]), (Rational64::from_integer(1), vec![4])], false).is_err());
        assert!(InvariantPolynomial::new(vec![(Rational64::from_integer(0), vec![2])], false).is_err());
        let p = poly(&[(1, &[2, 2]), (3, &[4])]);
        assert_eq!(p.degree(), 4);
        assert_eq!(p.plus(&poly(&[(-1, &[4])])).unwrap().terms()[1].0, Rational64::from_integer(2));
        assert!(p.plus(&InvariantPolynomial::p1()).is_err());
        assert_eq!(InvariantPolynomial::p1().to_string(), "(-1/2)·tr(X^2) [X = F/2π]");
    }

    #[test]
    fn flat_curvature_gives_zero() {
        let grid = torus(4, 6);
        let f = MatrixFormField::zeros(&grid, 2, 3).unwrap();
        assert_eq!(chern_weil(&InvariantPolynomial::p1(), &f).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn chern_weil_rejects_degree_overflow() {
        let grid = torus(3, 6);
        let f = MatrixFormField::zeros(&grid, 2, 2).unwrap();
        assert!(matches!(chern_weil(&InvariantPolynomial::p1(), &f), Err(Error::DegreeOverflow { .. })));
    }

    #[test]
    fn product_connection_splits_into_block_traces() {
        // A = A₁⊗1 + 1⊗A₂ with A₁ on the (x¹,x²) torus and A₂ on (x³,x⁴)
        let grid = torus(4, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut block = |legs: [usize; 2]| {
            let c: Vec<(f64, f64, f64)> = (0..8).map(|_| (rng.gen_range(-0.3..0.3), rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU))).collect();
            move |x: &[f64], comp: usize, r: usize, s: usize| -> f64 {
                let Some(i) = legs.iter().position(|&l| l == comp) else { return 0.0 };
                let (a, p, q) = c[i * 4 + r * 2 + s];
                a * ((TAU * x[legs[0]] + p).sin() + (TAU * x[legs[1]] + q).cos() + (TAU * (x[legs[0]] - x[legs[1]])).sin())
            }
        };
        let a1 = block([0, 1]);
        let a2 = block([2, 3]);
        let a = MatrixFormField::from_fn(&grid, 1, 4, |x, out| {
            for comp in 0..4 {
                for (r1, r2, s1, s2) in quads(2) {
                    let mut v = 0.0;
                    if r2 == s2 {
                        v += a1(x, comp, r1, s1);
                    }
                    if r1 == s1 {
                        v += a2(x, comp, r2, s2);
                    }
                    out[comp * 16 + (r1 * 2 + r2) * 4 + s1 * 2 + s2] = v;
                }
            }
        })
        .unwrap();
        let trace_of = |f: &dyn Fn(&[f64], usize, usize, usize) -> f64| {
            FormField::from_fn(&grid, 1, |x, out| {
                for (comp, o) in out.iter_mut().enumerate() {
                    *o = f(x, comp, 0, 0) + f(x, comp, 1, 1);
                }
            })
            .unwrap()
            .exterior_derivative()
            .unwrap()
        };
        let t1 = trace_of(&a1);
        let t2 = trace_of(&a2);
        let oracle = t1.wedge(&t2).unwrap().scaled(-2.0 / (8.0 * PI * PI));
        let p = chern_weil(&InvariantPolynomial::p1(), &curvature_of(&a)).unwrap();
        assert!(oracle.max_abs() > 1e-3);
        assert!(p.sub(&oracle).unwrap().max_abs() < 1e-6);
    }

    fn quads(m: usize) -> Vec<(usize, usize, usize, usize)> {
        let mut v = Vec::new();
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    for d in 0..m {
                        v.push((a, b, c, d));
                    }
                }
            }
        }
        v
    }

    fn curvature_of(a: &MatrixFormField) -> MatrixFormField {
        crate::geometry::curvature(a).unwrap()
    }

    #[test]
    fn chern_weil_form_is_closed() {
        let p = InvariantPolynomial::tr2();
        let residual = |nodes: usize| {
            let grid = torus(5, nodes);
            let cw = chern_weil(&p, &curvature_of(&connection(&grid, 2, 0.02, 3))).unwrap();
            (cw.exterior_derivative().unwrap().max_abs(), cw.max_abs())
        };
        let (coarse, _) = residual(8);
        let (fine, size) = residual(12);
        assert!(coarse / fine > 3.5, "{coarse:e} -> {fine:e}");
        assert!(fine < 0.25 * size);
    }

    #[test]
    fn transgression_of_a_connection_with_itself_vanishes() {
        let grid = torus(3, 8);
        let a = connection(&grid, 3, 0.3, 1);
        assert_eq!(transgression(&InvariantPolynomial::tr2(), &a, &a).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn transgression_differential_matches_chern_weil_difference() {
        let p = InvariantPolynomial::tr2();
        let residual = |nodes: usize| {
            let grid = torus(4, nodes);
            let a1 = connection(&grid, 2, 0.05, 4);
            let a0 = connection(&grid, 2, 0.05, 5);
            let lhs = transgression(&p, &a1, &a0).unwrap().exterior_derivative().unwrap();
            let rhs = chern_weil(&p, &curvature_of(&a1)).unwrap().sub(&chern_weil(&p, &curvature_of(&a0)).unwrap()).unwrap();
            (lhs.sub(&rhs).unwrap().max_abs(), rhs.max_abs())
        };
        let (coarse, _) = residual(8);
        let (fine, size) = residual(16);
        assert!(coarse / fine > 10.0, "{coarse:e} -> {fine:e}");
        assert!(fine < 2e-2 * size);
    }

    #[test]
    fn reversed_transgression_integrates_to_minus() {
        let grid = torus(3, 16);
        let p = InvariantPolynomial::tr2();
        let a1 = connection(&grid, 3, 0.3, 6);
        let a0 = connection(&grid, 3, 0.3, 7);
        let fwd = transgression(&p, &a1, &a0).unwrap().integrate_top().unwrap();
        let back = transgression(&p, &a0, &a1).unwrap().integrate_top().unwrap();
        assert!(fwd.abs() > 1e-3);
        assert!((fwd + back).abs() < 1e-6);
    }

    #[test]
    fn polarization_reproduces_the_polynomial_on_matrix_functions() {
        let grid = torus(2, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = MatrixFormField::from_fn(&grid, 0, 3, |x, out| {
            for (i, o) in out.iter_mut().enumerate() {
                *o = c[i] * (1.0 + (TAU * (x[0] + i as f64 * x[1])).sin());
            }
        })
        .unwrap();
        let p = poly(&[(2, &[2, 2]), (-3, &[4])]);
        let v = PolarizedEvaluator::new(p).evaluate(&[&b, &b, &b, &b]).unwrap();
        for node in 0..grid.num_nodes() {
            let m = b.at(node);
            let m2 = linalg::matmul(3, m, m);
            let m4 = linalg::matmul(3, &m2, &m2);
            let tr = |a: &[f64]| a[0] + a[4] + a[8];
            let oracle = 2.0 * tr(&m2) * tr(&m2) - 3.0 * tr(&m4);
            assert!((v.data()[node] - oracle).abs() < 1e-12 * (1.0 + oracle.abs()));
        }
    }

    #[test]
    fn polarized_evaluator_is_graded_symmetric() {
        let grid = torus(3, 6);
        let a = connection(&grid, 2, 0.4, 1);
        let b = connection(&grid, 2, 0.4, 2);
        let e = PolarizedEvaluator::new(InvariantPolynomial::tr2());
        let ab = e.evaluate(&[&a, &b]).unwrap();
        let ba = e.evaluate(&[&b, &a]).unwrap();
        assert!(ab.add(&ba).unwrap().max_abs() < 1e-14);
        let f = curvature_of(&a);
        let af = e.evaluate(&[&a, &f]).unwrap();
        let fa = e.evaluate(&[&f, &a]).unwrap();
        assert!(af.sub(&fa).unwrap().max_abs() < 1e-14);
        assert!(af.max_abs() > 1e-2);
        assert!(e.evaluate(&[&a]).is_err());
    }

    #[test]
    fn fast_paths_match_the_polarized_evaluator() {
        let grid = torus(3, 6);
        let a = connection(&grid, 2, 0.4, 3);
        let f = curvature_of(&connection(&grid, 2, 0.4, 4));
        let p = InvariantPolynomial::tr2();
        let e = PolarizedEvaluator::new(p.clone());
        let slow = e.evaluate(&[&a, &f]).unwrap();
        assert!(polarized_with_one(&p, &a, &f).unwrap().sub(&slow).unwrap().max_abs() < 1e-13);
        let grid4 = torus(4, 5);
        let f4 = curvature_of(&connection(&grid4, 3, 0.4, 5));
        let q = poly(&[(1, &[2])]).plus(&poly(&[(-1, &[2])]).scaled(Rational64::new(1, 3)).unwrap()).unwrap();
        let e4 = PolarizedEvaluator::new(q.clone());
        assert!(chern_weil(&q, &f4).unwrap().sub(&e4.evaluate(&[&f4, &f4]).unwrap()).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn action_vanishes_at_its_own_background() {
        let grid = torus(3, 8);
        let g = bumpy(&grid, 1);
        let omega = levi_civita(&g.metric).unwrap();
        assert_eq!(cs_action(&InvariantPolynomial::tr2(), &g, &omega).unwrap(), 0.0);
    }

    #[test]
    fn orientation_flip_negates_the_action() {
        let grid = torus(3, 8);
        let g = bumpy(&grid, 1);
        let a0 = connection(&grid, 3, 0.2, 2);
        let p = InvariantPolynomial::tr2();
        let plus = cs_action(&p, &g, &a0).unwrap();
        let minus = cs_action(&p, &g.with_orientation(Orientation::Negative), &a0).unwrap();
        assert!(plus != 0.0);
        assert_eq!(plus, -minus);
    }

    #[test]
    fn action_is_additive_in_the_polynomial() {
        let grid = torus(3, 8);
        let g = bumpy(&grid, 2);
        let a0 = connection(&grid, 3, 0.2, 3);
        let p = InvariantPolynomial::tr2();
        let q = p.scaled(Rational64::new(-5, 3)).unwrap();
        let sum = cs_action(&p.plus(&q).unwrap(), &g, &a0).unwrap();
        let parts = cs_action(&p, &g, &a0).unwrap() + cs_action(&q, &g, &a0).unwrap();
        assert!((sum - parts).abs() < 1e-14);
    }

    #[test]
    fn action_rejects_wrong_dimension() {
        let grid = torus(4, 6);
        let g = OrientedMetric::from_metric(MetricField::flat(&grid).unwrap());
        let a0 = MatrixFormField::zeros(&grid, 1, 4).unwrap();
        assert!(matches!(cs_action(&InvariantPolynomial::tr2(), &g, &a0), Err(Error::Dimension(_))));
    }

    #[test]
    fn background_shift_is_a_boundary_term() {
        let grid = torus(3, 12);
        let p = InvariantPolynomial::tr2();
        let a0 = connection(&grid, 3, 0.3, 4);
        let a0p = connection(&grid, 3, 0.3, 5);
        let shift = transgression(&p, &a0, &a0p).unwrap().integrate_top().unwrap();
        for seed in [1, 2] {
            let g = bumpy(&grid, seed);
            let d = cs_action(&p, &g, &a0p).unwrap() - cs_action(&p, &g, &a0).unwrap();
            assert!((d - shift).abs() < 1e-6, "{d} vs {shift}");
        }
    }

    #[test]
    fn homothety_leaves_the_variation_unchanged() {
        let grid = torus(3, 8);
        let g = bumpy(&grid, 3);
        let big = OrientedMetric::new(g.metric.scaled(2.0).unwrap(), g.orientation);
        let phi = Diffeomorphism::affine(vec![1, 1, 0, 0, 1, 0, 0, 0, 1], vec![0.0; 3], vec![1.0; 3]).unwrap();
        let a0 = MatrixFormField::zeros(&grid, 1, 3).unwrap();
        let p = InvariantPolynomial::tr2();
        let d1 = delta_phi(&p, &phi, &g, &a0).unwrap();
        let d2 = delta_phi(&p, &phi, &big, &a0).unwrap();
        assert!((d1 - d2).abs() < 1e-14, "{d1} vs {d2}");
    }
}
