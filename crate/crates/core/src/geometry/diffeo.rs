//! Torus diffeomorphisms `y ↦ B y + c + f(y)` with `B ∈ GL(n, ℤ)` and `f` a
//! small periodic trigonometric perturbation, plus finite compositions of
//! them.

use std::fmt;

use crate::error::{Error, Result};
use crate::fields::Orientation;
use crate::linalg;
use crate::trig::TrigSeries;

/// Contraction certificate for `y ↦ B⁻¹(x − c − f(y))`.
pub const JACOBIAN_BOUND: f64 = 0.5;
const NEWTON_TOL: f64 = 1e-13;
const MAX_ITERATIONS: usize = 50;

/// One factor `y ↦ B y + c + f(y)`.
#[derive(Clone, Debug)]
pub struct ElementaryMap {
    n: usize,
    b: Vec<i64>,
    b_inv: Vec<i64>,
    det: i64,
    shift: Vec<f64>,
    perturbation: Option<Vec<TrigSeries>>,
    periods: Vec<f64>,
}

impl ElementaryMap {
    pub fn new(
        b: Vec<i64>,
        shift: Vec<f64>,
        perturbation: Option<Vec<TrigSeries>>,
        periods: Vec<f64>,
    ) -> Result<Self> {
        let n = periods.len();
        if b.len() != n * n || shift.len() != n {
            return Err(Error::InvalidDiffeomorphism(format!(
                "B has {} entries and c {} for dimension {n}",
                b.len(),
                shift.len()
            )));
        }
        let det = linalg::det_i64(n, &b);
        if det.abs() != 1 {
            return Err(Error::InvalidDiffeomorphism(format!("|det B| = {} ≠ 1", det.abs())));
        }
        // B must preserve the period lattice diag(L)·ℤⁿ.
        for i in 0..n {
            for j in 0..n {
                let r = b[i * n + j] as f64 * periods[j] / periods[i];
                if (r - r.round()).abs() > 1e-12 {
                    return Err(Error::InvalidDiffeomorphism(format!(
                        "B does not preserve the period lattice (entry {i},{j})"
                    )));
                }
            }
        }
        let adj = linalg::adjugate_i64(n, &b);
        let b_inv: Vec<i64> = adj.iter().map(|v| v * det).collect();
        let perturbation = match perturbation {
            Some(f) if f.iter().all(TrigSeries::is_constant) => {
                // fold constant parts into the shift
                let mut shift = shift.clone();
                for (s, fi) in shift.iter_mut().zip(&f) {
                    *s += fi.constant_term();
                }
                return Self::new(b, shift, None, periods);
            }
            other => other,
        };
        if let Some(f) = &perturbation {
            if f.len() != n || f.iter().any(|fi| fi.periods() != periods.as_slice()) {
                return Err(Error::InvalidDiffeomorphism(
                    "perturbation components must be n series on the same torus".into(),
                ));
            }
        }
        let map = ElementaryMap { n, b, b_inv, det, shift, perturbation, periods };
        let bound = map.contraction_bound();
        if bound >= JACOBIAN_BOUND {
            return Err(Error::InvalidDiffeomorphism(format!(
                "perturbation too large: ‖B⁻¹·Df‖ bound {bound:.3} ≥ {JACOBIAN_BOUND}"
            )));
        }
        Ok(map)
    }

    /// Upper bound on `sup ‖B⁻¹ Df‖∞`.
    pub fn contraction_bound(&self) -> f64 {
        let Some(f) = &self.perturbation else { return 0.0 };
        let n = self.n;
        let b_inv: Vec<f64> = self.b_inv.iter().map(|&v| v as f64).collect();
        let df_bound = f.iter().map(TrigSeries::gradient_bound).fold(0.0, f64::max);
        linalg::norm_inf(n, &b_inv) * df_bound
    }

    pub fn linear_part(&self) -> &[i64] {
        &self.b
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn perturbation(&self) -> Option<&[TrigSeries]> {
        self.perturbation.as_deref()
    }

    pub fn is_identity(&self) -> bool {
        self.perturbation.is_none()
            && self.shift.iter().all(|c| *c == 0.0)
            && (0..self.n).all(|i| (0..self.n).all(|j| self.b[i * self.n + j] == i64::from(i == j)))
    }

    pub fn orientation(&self) -> Orientation {
        if self.det > 0 {
            Orientation::Positive
        } else {
            Orientation::Negative
        }
    }

    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| self.b[i * n + j] as f64 * y[j]).sum::<f64>() + self.shift[i])
            .collect();
        if let Some(f) = &self.perturbation {
            for (xi, fi) in x.iter_mut().zip(f) {
                *xi += fi.value(y);
            }
        }
        x
    }

    /// `Dφ(y)`, row-major `[a][b] = ∂φᵃ/∂yᵇ`.
    pub fn jacobian(&self, y: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut j: Vec<f64> = self.b.iter().map(|&v| v as f64).collect();
        if let Some(f) = &self.perturbation {
            let mut g = vec![0.0; n];
            for (a, fa) in f.iter().enumerate() {
                fa.value_grad(y, &mut g);
                for b in 0..n {
                    j[a * n + b] += g[b];
                }
            }
        }
        j
    }

    /// `D²φ(y)`, `[a][b][c] = ∂²φᵃ/∂yᵇ∂yᶜ`.
    pub fn second_derivative(&self, y: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n * n];
        if let Some(f) = &self.perturbation {
            for (a, fa) in f.iter().enumerate() {
                fa.hessian(y, &mut out[a * n * n..(a + 1) * n * n]);
            }
        }
        out
    }

    pub fn inverse(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        let rhs: Vec<f64> = (0..n).map(|i| x[i] - self.shift[i]).collect();
        let b_inv: Vec<f64> = self.b_inv.iter().map(|&v| v as f64).collect();
        let mut y = linalg::matvec(n, &b_inv, &rhs);
        if self.perturbation.is_none() {
            return Ok(y);
        }
        for _ in 0..MAX_ITERATIONS {
            let fx = self.apply(&y);
            let resid: Vec<f64> = (0..n).map(|i| fx[i] - x[i]).collect();
            let jac = self.jacobian(&y);
            let jinv = linalg::invert(n, &jac).ok_or_else(|| Error::InverseNotConverged {
                point: x.to_vec(),
                iterations: 0,
            })?;
            let step = linalg::matvec(n, &jinv, &resid);
            let mut size: f64 = 0.0;
            for i in 0..n {
                y[i] -= step[i];
                size = size.max(step[i].abs());
            }
            if size < NEWTON_TOL {
                return Ok(y);
            }
        }
        Err(Error::InverseNotConverged { point: x.to_vec(), iterations: MAX_ITERATIONS })
    }
}

/// Second-order jet of a map at a point: value, Jacobian `[a][j]` and
/// second derivatives `[a][j][k]`.
#[derive(Clone, Debug)]
pub struct Jet {
    pub value: Vec<f64>,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

/// Composition `φ_m ∘ … ∘ φ_1`; `factors[0]` acts first.
#[derive(Clone)]
pub struct Diffeomorphism {
    n: usize,
    periods: Vec<f64>,
    factors: Vec<ElementaryMap>,
}

impl fmt::Debug for Diffeomorphism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Diffeomorphism")
            .field("dim", &self.n)
            .field("factors", &self.factors.len())
            .field("linear_part", &self.linear_part())
            .finish()
    }
}

impl Diffeomorphism {
    pub fn identity(periods: Vec<f64>) -> Self {
        Diffeomorphism { n: periods.len(), periods, factors: Vec::new() }
    }

    pub fn elementary(map: ElementaryMap) -> Self {
        Diffeomorphism { n: map.n, periods: map.periods.clone(), factors: vec![map] }
    }

    /// `y ↦ B y + c + f(y)`.
    pub fn new(
        b: Vec<i64>,
        shift: Vec<f64>,
        perturbation: Option<Vec<TrigSeries>>,
        periods: Vec<f64>,
    ) -> Result<Self> {
        Ok(Self::elementary(ElementaryMap::new(b, shift, perturbation, periods)?))
    }

    pub fn affine(b: Vec<i64>, shift: Vec<f64>, periods: Vec<f64>) -> Result<Self> {
        Self::new(b, shift, None, periods)
    }

    pub fn translation(shift: Vec<f64>, periods: Vec<f64>) -> Result<Self> {
        let n = periods.len();
        let b = linalg::identity(n).iter().map(|&v| v as i64).collect();
        Self::new(b, shift, None, periods)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn periods(&self) -> &[f64] {
        &self.periods
    }

    pub fn factors(&self) -> &[ElementaryMap] {
        &self.factors
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn after(&self, first: &Diffeomorphism) -> Result<Self> {
        if self.n != first.n || self.periods != first.periods {
            return Err(Error::InvalidDiffeomorphism("composing maps of different tori".into()));
        }
        let mut factors = first.factors.clone();
        factors.extend(self.factors.iter().cloned());
        Ok(Diffeomorphism { n: self.n, periods: self.periods.clone(), factors })
    }

    pub fn squared(&self) -> Self {
        self.after(self).expect("same torus")
    }

    pub fn is_identity(&self) -> bool {
        self.factors.iter().all(ElementaryMap::is_identity)
    }

    /// Linear part `B_m ⋯ B_1` of the composition.
    pub fn linear_part(&self) -> Vec<i64> {
        let n = self.n;
        let mut acc: Vec<i64> = (0..n * n).map(|k| i64::from(k / n == k % n)).collect();
        for f in &self.factors {
            let mut next = vec![0; n * n];
            for i in 0..n {
                for k in 0..n {
                    for j in 0..n {
                        next[i * n + j] += f.b[i * n + k] * acc[k * n + j];
                    }
                }
            }
            acc = next;
        }
        acc
    }

    /// Every factor has `B = I`: the map lies in the identity component
    /// (`t ↦ y + t(c + f(y))` is an isotopy through diffeomorphisms).
    pub fn in_identity_component(&self) -> bool {
        let n = self.n;
        self.linear_part()
            .iter()
            .enumerate()
            .all(|(k, &v)| v == i64::from(k / n == k % n))
    }

    pub fn orientation(&self) -> Orientation {
        self.factors
            .iter()
            .fold(Orientation::Positive, |o, f| o * f.orientation())
    }

    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        let mut x = y.to_vec();
        for f in &self.factors {
            x = f.apply(&x);
        }
        x
    }

    pub fn jacobian(&self, y: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = y.to_vec();
        let mut acc = linalg::identity(n);
        for f in &self.factors {
            let j = f.jacobian(&x);
            acc = linalg::matmul(n, &j, &acc);
            x = f.apply(&x);
        }
        acc
    }

    pub fn inverse(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = x.to_vec();
        for f in self.factors.iter().rev() {
            y = f.inverse(&y)?;
        }
        Ok(y)
    }

    /// Jet of `φ⁻¹` at `x`.
    pub fn inverse_jet(&self, x: &[f64]) -> Result<Jet> {
        let n = self.n;
        let mut jet = Jet {
            value: x.to_vec(),
            first: linalg::identity(n),
            second: vec![0.0; n * n * n],
        };
        for f in self.factors.iter().rev() {
            let y = f.inverse(&jet.value)?;
            let dphi = f.jacobian(&y);
            let du = linalg::invert(n, &dphi).ok_or_else(|| Error::InverseNotConverged {
                point: jet.value.clone(),
                iterations: 0,
            })?;
            let d2phi = f.second_derivative(&y);
            // D²u^a_{jk} = −Du^a_b D²φ^b_{cd} Du^c_j Du^d_k
            let mut d2u = vec![0.0; n * n * n];
            if f.perturbation.is_some() {
                for a in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            let mut s = 0.0;
                            for b in 0..n {
                                for c in 0..n {
                                    for d in 0..n {
                                        s += du[a * n + b] * d2phi[b * n * n + c * n + d] * du[c * n + j] * du[d * n + k];
                                    }
                                }
                            }
                            d2u[a * n * n + j * n + k] = -s;
                        }
                    }
                }
            }
            // chain rule for u ∘ v
            let first = linalg::matmul(n, &du, &jet.first);
            let mut second = vec![0.0; n * n * n];
            for a in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut s = 0.0;
                        for b in 0..n {
                            s += du[a * n + b] * jet.second[b * n * n + j * n + k];
                            for c in 0..n {
                                s += d2u[a * n * n + b * n + c] * jet.first[b * n + j] * jet.first[c * n + k];
                            }
                        }
                        second[a * n * n + j * n + k] = s;
                    }
                }
            }
            jet = Jet { value: y, first, second };
        }
        Ok(jet)
    }
}
