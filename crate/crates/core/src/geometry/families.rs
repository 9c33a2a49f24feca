//! Closed-form families of symmetric 2-tensors and vector fields.
//!
//! Families supply exact values and first derivatives at arbitrary points,
//! which lets Christoffel symbols bypass stencil error and lets pulled-back
//! metrics be resampled without interpolation.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::Result;
use crate::geometry::diffeo::Diffeomorphism;
use crate::trig::{TrigSeries, TrigTerm};

/// Symmetric covariant 2-tensor field given in closed form.
///
/// Buffers are row-major: `value[i*n+j]`, `grad[(k*n+i)*n+j] = ∂ₖTᵢⱼ`,
/// `hess[((k*n+l)*n+i)*n+j] = ∂ₖ∂ₗTᵢⱼ`.
pub trait SymTensorFamily: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn eval(&self, x: &[f64], value: &mut [f64], grad: &mut [f64]) -> Result<()>;

    /// Second derivatives, when the family can provide them.
    fn hessian(&self, _x: &[f64], _hess: &mut [f64]) -> Option<Result<()>> {
        None
    }

    fn has_hessian(&self) -> bool {
        false
    }
}

pub type FamilyRef = Arc<dyn SymTensorFamily>;

/// Index of `(i, j)` in the packed upper triangle.
#[inline]
pub fn packed_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    // rows 0..i contribute n + (n-1) + ... + (n-i+1) entries
    i * (2 * n - i + 1) / 2 + (j - i)
}

/// Tensor with one trigonometric series per upper-triangular entry.
#[derive(Clone, Debug)]
pub struct TrigTensor {
    n: usize,
    entries: Vec<TrigSeries>,
}

impl TrigTensor {
    /// `entries` in packed upper-triangular order.
    pub fn new(n: usize, entries: Vec<TrigSeries>) -> Self {
        assert_eq!(entries.len(), n * (n + 1) / 2);
        TrigTensor { n, entries }
    }

    /// Constant `δᵢⱼ` on a torus with the given periods.
    pub fn flat(periods: &[f64]) -> Self {
        Self::constant(periods, &crate::linalg::identity(periods.len()))
    }

    pub fn constant(periods: &[f64], matrix: &[f64]) -> Self {
        let n = periods.len();
        let mut entries = Vec::new();
        for i in 0..n {
            for j in i..n {
                entries.push(TrigSeries::constant(periods.to_vec(), matrix[i * n + j]));
            }
        }
        TrigTensor { n, entries }
    }

    pub fn entry(&self, i: usize, j: usize) -> &TrigSeries {
        &self.entries[packed_index(self.n, i, j)]
    }

    pub fn entries(&self) -> &[TrigSeries] {
        &self.entries
    }

    /// `δ + Σ` random low modes, with the sum of amplitudes in each entry
    /// capped so that the result stays diagonally dominant.
    pub fn random_bumpy(rng: &mut impl Rng, periods: &[f64], amplitude: f64, max_mode: i32, terms: usize) -> Self {
        let n = periods.len();
        let mut entries = Vec::new();
        for i in 0..n {
            for j in i..n {
                let base = if i == j { 1.0 } else { 0.0 };
                let mut ts = Vec::new();
                for _ in 0..terms {
                    let k: Vec<i32> = loop {
                        let k: Vec<i32> = (0..n).map(|_| rng.gen_range(-max_mode..=max_mode)).collect();
                        if k.iter().any(|&v| v != 0) {
                            break k;
                        }
                    };
                    let cos = rng.gen_range(-1.0..1.0);
                    let sin = rng.gen_range(-1.0..1.0);
                    ts.push(TrigTerm { k, cos, sin });
                }
                let s = TrigSeries::new(periods.to_vec(), 0.0, ts);
                let amp = s.amplitude_bound();
                let scale = if amp > 0.0 { amplitude / amp } else { 0.0 };
                let s = s.scaled(scale);
                entries.push(TrigSeries::new(periods.to_vec(), base, s.terms().to_vec()));
            }
        }
        TrigTensor { n, entries }
    }
}

impl SymTensorFamily for TrigTensor {
    fn dim(&self) -> usize {
        self.n
    }

    fn eval(&self, x: &[f64], value: &mut [f64], grad: &mut [f64]) -> Result<()> {
        let n = self.n;
        let mut g = vec![0.0; n];
        for i in 0..n {
            for j in i..n {
                let v = self.entry(i, j).value_grad(x, &mut g);
                value[i * n + j] = v;
                value[j * n + i] = v;
                for k in 0..n {
                    grad[(k * n + i) * n + j] = g[k];
                    grad[(k * n + j) * n + i] = g[k];
                }
            }
        }
        Ok(())
    }

    fn hessian(&self, x: &[f64], hess: &mut [f64]) -> Option<Result<()>> {
        let n = self.n;
        let mut h = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                self.entry(i, j).hessian(x, &mut h);
                for k in 0..n {
                    for l in 0..n {
                        hess[((k * n + l) * n + i) * n + j] = h[k * n + l];
                        hess[((k * n + l) * n + j) * n + i] = h[k * n + l];
                    }
                }
            }
        }
        Some(Ok(()))
    }

    fn has_hessian(&self) -> bool {
        true
    }
}

/// `e^{2u} δᵢⱼ` for a trigonometric conformal factor `u`.
#[derive(Clone, Debug)]
pub struct Conformal {
    u: TrigSeries,
}

impl Conformal {
    pub fn new(u: TrigSeries) -> Self {
        Conformal { u }
    }

    pub fn factor(&self) -> &TrigSeries {
        &self.u
    }
}

impl SymTensorFamily for Conformal {
    fn dim(&self) -> usize {
        self.u.dim()
    }

    fn eval(&self, x: &[f64], value: &mut [f64], grad: &mut [f64]) -> Result<()> {
        let n = self.dim();
        let mut du = vec![0.0; n];
        let u = self.u.value_grad(x, &mut du);
        let e = (2.0 * u).exp();
        value.iter_mut().for_each(|v| *v = 0.0);
        grad.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            value[i * n + i] = e;
            for k in 0..n {
                grad[(k * n + i) * n + i] = 2.0 * du[k] * e;
            }
        }
        Ok(())
    }

    fn hessian(&self, x: &[f64], hess: &mut [f64]) -> Option<Result<()>> {
        let n = self.dim();
        let mut du = vec![0.0; n];
        let u = self.u.value_grad(x, &mut du);
        let mut ddu = vec![0.0; n * n];
        self.u.hessian(x, &mut ddu);
        let e = (2.0 * u).exp();
        hess.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..n {
            for l in 0..n {
                let v = (4.0 * du[k] * du[l] + 2.0 * ddu[k * n + l]) * e;
                for i in 0..n {
                    hess[((k * n + l) * n + i) * n + i] = v;
                }
            }
        }
        Some(Ok(()))
    }

    fn has_hessian(&self) -> bool {
        true
    }
}

/// `Σ cᵣ Tᵣ`.
#[derive(Clone, Debug)]
pub struct LinearCombination {
    terms: Vec<(f64, FamilyRef)>,
}

impl LinearCombination {
    pub fn new(terms: Vec<(f64, FamilyRef)>) -> Self {
        assert!(!terms.is_empty());
        LinearCombination { terms }
    }
}

impl SymTensorFamily for LinearCombination {
    fn dim(&self) -> usize {
        self.terms[0].1.dim()
    }

    fn eval(&self, x: &[f64], value: &mut [f64], grad: &mut [f64]) -> Result<()> {
        let n = self.dim();
        let mut v = vec![0.0; n * n];
        let mut g = vec![0.0; n * n * n];
        value.iter_mut().for_each(|e| *e = 0.0);
        grad.iter_mut().for_each(|e| *e = 0.0);
        for (c, t) in &self.terms {
            t.eval(x, &mut v, &mut g)?;
            for (o, e) in value.iter_mut().zip(&v) {
                *o += c * e;
            }
            for (o, e) in grad.iter_mut().zip(&g) {
                *o += c * e;
            }
        }
        Ok(())
    }

    fn hessian(&self, x: &[f64], hess: &mut [f64]) -> Option<Result<()>> {
        if !self.has_hessian() {
            return None;
        }
        let n = self.dim();
        let mut h = vec![0.0; n.pow(4)];
        hess.iter_mut().for_each(|e| *e = 0.0);
        for (c, t) in &self.terms {
            if let Some(Err(e)) = t.hessian(x, &mut h) {
                return Some(Err(e));
            }
            for (o, e) in hess.iter_mut().zip(&h) {
                *o += c * e;
            }
        }
        Some(Ok(()))
    }

    fn has_hessian(&self) -> bool {
        self.terms.iter().all(|(_, t)| t.has_hessian())
    }
}

/// `(φ·T)(x) = Dψ(x)ᵀ T(ψ(x)) Dψ(x)` with `ψ = φ⁻¹`, i.e. `(φ⁻¹)*T`.
#[derive(Clone, Debug)]
pub struct Pullback {
    diffeo: Diffeomorphism,
    inner: FamilyRef,
}

impl Pullback {
    pub fn new(diffeo: Diffeomorphism, inner: FamilyRef) -> Self {
        Pullback { diffeo, inner }
    }
}

impl SymTensorFamily for Pullback {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, x: &[f64], value: &mut [f64], grad: &mut [f64]) -> Result<()> {
        let n = self.dim();
        let jet = self.diffeo.inverse_jet(x)?;
        let mut t = vec![0.0; n * n];
        let mut dt = vec![0.0; n * n * n];
        self.inner.eval(&jet.value, &mut t, &mut dt)?;
        let j = &jet.first; // J[a*n+i] = ∂ψᵃ/∂xⁱ
        let dj = &jet.second; // [a][i][k]
        for i in 0..n {
            for jj in 0..n {
                let mut s = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        s += j[a * n + i] * t[a * n + b] * j[b * n + jj];
                    }
                }
                value[i * n + jj] = s;
            }
        }
        for k in 0..n {
            // ∂ₖ T(ψ(x))_ab = Σ_c ∂_c T_ab · J[c][k]
            for i in 0..n {
                for jj in 0..n {
                    let mut s = 0.0;
                    for a in 0..n {
                        for b in 0..n {
                            let tab = t[a * n + b];
                            let mut dtab = 0.0;
                            for c in 0..n {
                                dtab += dt[(c * n + a) * n + b] * j[c * n + k];
                            }
                            s += dj[(a * n + i) * n + k] * tab * j[b * n + jj]
                                + j[a * n + i] * dtab * j[b * n + jj]
                                + j[a * n + i] * tab * dj[(b * n + jj) * n + k];
                        }
                    }
                    grad[(k * n + i) * n + jj] = s;
                }
            }
        }
        Ok(())
    }
}

/// Trigonometric vector field `Xⁱ(x)` on a torus.
#[derive(Clone, Debug)]
pub struct VectorField {
    components: Vec<TrigSeries>,
}

impl VectorField {
    pub fn new(components: Vec<TrigSeries>) -> Self {
        VectorField { components }
    }

    pub fn constant(periods: &[f64], v: &[f64]) -> Self {
        VectorField {
            components: v.iter().map(|&c| TrigSeries::constant(periods.to_vec(), c)).collect(),
        }
    }

    /// Random low-mode field with `sup ‖X‖∞ ≤ amplitude`-scale components.
    pub fn random(rng: &mut impl Rng, periods: &[f64], amplitude: f64, max_mode: i32, terms: usize) -> Self {
        let n = periods.len();
        let components = (0..n)
            .map(|_| {
                let ts: Vec<TrigTerm> = (0..terms)
                    .map(|_| {
                        let k = loop {
                            let k: Vec<i32> = (0..n).map(|_| rng.gen_range(-max_mode..=max_mode)).collect();
                            if k.iter().any(|&v| v != 0) {
                                break k;
                            }
                        };
                        TrigTerm { k, cos: rng.gen_range(-1.0..1.0), sin: rng.gen_range(-1.0..1.0) }
                    })
                    .collect();
                let s = TrigSeries::new(periods.to_vec(), 0.0, ts);
                let amp = s.amplitude_bound();
                s.scaled(if amp > 0.0 { amplitude / amp } else { 0.0 })
            })
            .collect();
        VectorField { components }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn periods(&self) -> &[f64] {
        self.components[0].periods()
    }

    pub fn components(&self) -> &[TrigSeries] {
        &self.components
    }

    pub fn is_constant(&self) -> bool {
        self.components.iter().all(TrigSeries::is_constant)
    }

    pub fn scaled(&self, s: f64) -> Self {
        VectorField { components: self.components.iter().map(|c| c.scaled(s)).collect() }
    }

    pub fn plus(&self, other: &VectorField) -> Self {
        VectorField {
            components: self.components.iter().zip(&other.components).map(|(a, b)| a.plus(b)).collect(),
        }
    }

    pub fn value(&self, x: &[f64]) -> Vec<f64> {
        self.components.iter().map(|c| c.value(x)).collect()
    }

    /// Value and Jacobian `[i][k] = ∂ₖXⁱ`.
    pub fn value_jacobian(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.dim();
        let mut jac = vec![0.0; n * n];
        let v = self
            .components
            .iter()
            .enumerate()
            .map(|(i, c)| c.value_grad(x, &mut jac[i * n..(i + 1) * n]))
            .collect();
        (v, jac)
    }

    /// Max-norm bound of the Jacobian (row sums).
    pub fn jacobian_bound(&self) -> f64 {
        self.components.iter().map(TrigSeries::gradient_bound).fold(0.0, f64::max)
    }
}

/// `(L_X g)ᵢⱼ = Xᵏ∂ₖgᵢⱼ + gₖⱼ∂ᵢXᵏ + gᵢₖ∂ⱼXᵏ`; needs second derivatives of
/// `g` for its own gradient.
#[derive(Clone, Debug)]
pub struct LieDerivative {
    field: VectorField,
    metric: FamilyRef,
}

impl LieDerivative {
    /// `None` when the metric family cannot supply second derivatives.
    pub fn new(field: VectorField, metric: FamilyRef) -> Option<Self> {
        metric.has_hessian().then_some(LieDerivative { field, metric })
    }
}

impl SymTensorFamily for LieDerivative {
    fn dim(&self) -> usize {
        self.metric.dim()
    }

    fn eval(&self, x: &[f64], value: &mut [f64], grad: &mut [f64]) -> Result<()> {
        let n = self.dim();
        let mut g = vec![0.0; n * n];
        let mut dg = vec![0.0; n * n * n];
        let mut ddg = vec![0.0; n.pow(4)];
        self.metric.eval(x, &mut g, &mut dg)?;
        self.metric.hessian(x, &mut ddg).expect("checked at construction")?;
        let (xv, dx) = self.field.value_jacobian(x);
        let mut ddx = vec![0.0; n * n * n]; // [k][i][l] = ∂ᵢ∂ₗXᵏ
        for k in 0..n {
            self.field.components[k].hessian(x, &mut ddx[k * n * n..(k + 1) * n * n]);
        }
        for i in 0..n {
            for j in 0..n {
                let mut v = 0.0;
                for k in 0..n {
                    v += xv[k] * dg[(k * n + i) * n + j] + g[k * n + j] * dx[k * n + i] + g[i * n + k] * dx[k * n + j];
                }
                value[i * n + j] = v;
                for l in 0..n {
                    let mut d = 0.0;
                    for k in 0..n {
                        d += dx[k * n + l] * dg[(k * n + i) * n + j]
                            + xv[k] * ddg[((l * n + k) * n + i) * n + j]
                            + dg[(l * n + k) * n + j] * dx[k * n + i]
                            + g[k * n + j] * ddx[(k * n + i) * n + l]
                            + dg[(l * n + i) * n + k] * dx[k * n + j]
                            + g[i * n + k] * ddx[(k * n + j) * n + l];
                    }
                    grad[(l * n + i) * n + j] = d;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn check_gradient(f: &dyn SymTensorFamily, x: &[f64], tol: f64) {
        let n = f.dim();
        let mut v = vec![0.0; n * n];
        let mut g = vec![0.0; n * n * n];
        f.eval(x, &mut v, &mut g).unwrap();
        let h = 1e-5;
        for k in 0..n {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[k] += h;
            xm[k] -= h;
            let mut vp = vec![0.0; n * n];
            let mut vm = vec![0.0; n * n];
            let mut scratch = vec![0.0; n * n * n];
            f.eval(&xp, &mut vp, &mut scratch).unwrap();
            f.eval(&xm, &mut vm, &mut scratch).unwrap();
            for e in 0..n * n {
                let fd = (vp[e] - vm[e]) / (2.0 * h);
                assert!((fd - g[k * n * n + e]).abs() < tol, "k={k} e={e}: {fd} vs {}", g[k * n * n + e]);
            }
        }
    }

    #[test]
    fn packed_layout() {
        assert_eq!(packed_index(3, 0, 0), 0);
        assert_eq!(packed_index(3, 0, 2), 2);
        assert_eq!(packed_index(3, 1, 1), 3);
        assert_eq!(packed_index(3, 2, 1), 4);
        assert_eq!(packed_index(3, 2, 2), 5);
    }

    #[test]
    fn analytic_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = [1.0; 3];
        let bumpy: FamilyRef = Arc::new(TrigTensor::random_bumpy(&mut rng, &p, 0.1, 2, 3));
        let x = [0.21, 0.55, 0.83];
        check_gradient(bumpy.as_ref(), &x, 1e-7);
        let u = TrigSeries::new(p.to_vec(), 0.0, vec![TrigTerm { k: vec![1, 0, 1], cos: 0.1, sin: 0.05 }]);
        check_gradient(&Conformal::new(u), &x, 1e-7);
        let phi = Diffeomorphism::new(
            vec![1, 1, 0, 0, 1, 0, 0, 0, 1],
            vec![0.0; 3],
            Some(vec![
                TrigSeries::new(p.to_vec(), 0.0, vec![TrigTerm { k: vec![0, 1, 0], cos: 0.02, sin: 0.0 }]),
                TrigSeries::constant(p.to_vec(), 0.0),
                TrigSeries::new(p.to_vec(), 0.0, vec![TrigTerm { k: vec![1, 0, 0], cos: 0.0, sin: 0.01 }]),
            ]),
            p.to_vec(),
        )
        .unwrap();
        check_gradient(&Pullback::new(phi, bumpy.clone()), &x, 1e-7);
        let xf = VectorField::random(&mut rng, &p, 0.05, 1, 2);
        check_gradient(&LieDerivative::new(xf, bumpy).unwrap(), &x, 1e-7);
    }
}
