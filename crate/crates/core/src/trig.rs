//! Real trigonometric series on a torus `ℝⁿ / (L₁ℤ × … × Lₙℤ)`.
//!
//! These back the analytic generators of metric families, vector fields and
//! diffeomorphism perturbations, and give trigonometric interpolation of
//! nodal data.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::fields::GridManifold;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    /// Integer wave vector.
    pub k: Vec<i32>,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

/// `c + Σ (aₘ cos θₘ + bₘ sin θₘ)` with `θₘ = 2π Σᵢ kₘᵢ xᵢ / Lᵢ`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigSeries {
    periods: Vec<f64>,
    constant: f64,
    terms: Vec<TrigTerm>,
}

impl TrigSeries {
    pub fn new(periods: Vec<f64>, constant: f64, terms: Vec<TrigTerm>) -> Self {
        debug_assert!(terms.iter().all(|t| t.k.len() == periods.len()));
        TrigSeries { periods, constant, terms }
    }

    pub fn constant(periods: Vec<f64>, value: f64) -> Self {
        TrigSeries { periods, constant: value, terms: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.periods.len()
    }

    pub fn periods(&self) -> &[f64] {
        &self.periods
    }

    pub fn constant_term(&self) -> f64 {
        self.constant
    }

    pub fn terms(&self) -> &[TrigTerm] {
        &self.terms
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|t| t.cos == 0.0 && t.sin == 0.0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        TrigSeries {
            periods: self.periods.clone(),
            constant: s * self.constant,
            terms: self
                .terms
                .iter()
                .map(|t| TrigTerm { k: t.k.clone(), cos: s * t.cos, sin: s * t.sin })
                .collect(),
        }
    }

    /// Sum of two series on the same torus (terms concatenated).
    pub fn plus(&self, other: &TrigSeries) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        TrigSeries { periods: self.periods.clone(), constant: self.constant + other.constant, terms }
    }

    #[inline]
    fn wave(&self, t: &TrigTerm, i: usize) -> f64 {
        2.0 * PI * t.k[i] as f64 / self.periods[i]
    }

    #[inline]
    fn phase(&self, t: &TrigTerm, x: &[f64]) -> f64 {
        (0..x.len()).map(|i| self.wave(t, i) * x[i]).sum()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let mut v = self.constant;
        for t in &self.terms {
            let (s, c) = self.phase(t, x).sin_cos();
            v += t.cos * c + t.sin * s;
        }
        v
    }

    /// Value and gradient.
    pub fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let mut v = self.constant;
        grad.iter_mut().for_each(|g| *g = 0.0);
        for t in &self.terms {
            let (s, c) = self.phase(t, x).sin_cos();
            v += t.cos * c + t.sin * s;
            let d = -t.cos * s + t.sin * c;
            for (i, g) in grad.iter_mut().enumerate() {
                *g += self.wave(t, i) * d;
            }
        }
        v
    }

    /// Row-major Hessian `∂ᵢ∂ⱼ`.
    pub fn hessian(&self, x: &[f64], hess: &mut [f64]) {
        let n = self.dim();
        hess.iter_mut().for_each(|h| *h = 0.0);
        for t in &self.terms {
            let (s, c) = self.phase(t, x).sin_cos();
            let v = t.cos * c + t.sin * s;
            for i in 0..n {
                for j in 0..n {
                    hess[i * n + j] -= self.wave(t, i) * self.wave(t, j) * v;
                }
            }
        }
    }

    /// Upper bound for `sup |∇f|` in the max-norm.
    pub fn gradient_bound(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let amp = t.cos.hypot(t.sin);
                let w: f64 = (0..self.dim()).map(|i| self.wave(t, i).abs()).sum();
                amp * w
            })
            .sum()
    }

    /// Upper bound for `sup |f − c|`.
    pub fn amplitude_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.cos.hypot(t.sin)).sum()
    }

    /// Trigonometric interpolant of nodal samples on a fully periodic grid.
    /// Nyquist modes are dropped; coefficients below `1e-15·max` are pruned.
    pub fn interpolate(grid: &GridManifold, samples: &[f64]) -> Self {
        assert!(grid.is_closed(), "trigonometric interpolation needs a periodic grid");
        assert_eq!(samples.len(), grid.num_nodes());
        let n = grid.dim();
        let counts = grid.node_counts();
        let mut re = samples.to_vec();
        let mut im = vec![0.0; samples.len()];
        for axis in 0..n {
            dft_along(grid, axis, &mut re, &mut im);
        }
        let scale = 1.0 / grid.num_nodes() as f64;
        let max = re.iter().zip(&im).map(|(a, b)| a.hypot(*b)).fold(0.0, f64::max) * scale;
        let cutoff = 1e-15 * max;
        let mut constant = 0.0;
        let mut terms = Vec::new();
        for node in 0..grid.num_nodes() {
            let idx = grid.multi_index(node);
            let mut k = Vec::with_capacity(n);
            let mut nyquist = false;
            for (a, &j) in idx.iter().enumerate() {
                let nn = counts[a];
                let kk = if j <= nn / 2 { j as i32 } else { j as i32 - nn as i32 };
                if nn % 2 == 0 && j == nn / 2 {
                    nyquist = true;
                }
                k.push(kk);
            }
            if nyquist {
                continue;
            }
            let (cr, ci) = (re[node] * scale, im[node] * scale);
            if k.iter().all(|&v| v == 0) {
                constant = cr;
                continue;
            }
            // keep one representative of each ±k pair
            let first = *k.iter().find(|&&v| v != 0).unwrap();
            if first < 0 {
                continue;
            }
            if cr.hypot(ci) <= cutoff {
                continue;
            }
            terms.push(TrigTerm { k, cos: 2.0 * cr, sin: -2.0 * ci });
        }
        TrigSeries { periods: grid.periods(), constant, terms }
    }
}

/// In-place forward DFT (no normalisation) along one axis.
fn dft_along(grid: &GridManifold, axis: usize, re: &mut [f64], im: &mut [f64]) {
    let n = grid.axis(axis).nodes;
    let stride = grid.stride(axis);
    let (cos_t, sin_t): (Vec<f64>, Vec<f64>) = (0..n)
        .map(|m| {
            let a = -2.0 * PI * m as f64 / n as f64;
            (a.cos(), a.sin())
        })
        .unzip();
    let mut line_re = vec![0.0; n];
    let mut line_im = vec![0.0; n];
    for node in 0..grid.num_nodes() {
        if grid.index_along(node, axis) != 0 {
            continue;
        }
        for j in 0..n {
            line_re[j] = re[node + j * stride];
            line_im[j] = im[node + j * stride];
        }
        for k in 0..n {
            let (mut sr, mut si) = (0.0, 0.0);
            for j in 0..n {
                let m = (j * k) % n;
                let (c, s) = (cos_t[m], sin_t[m]);
                sr += line_re[j] * c - line_im[j] * s;
                si += line_re[j] * s + line_im[j] * c;
            }
            re[node + k * stride] = sr;
            im[node + k * stride] = si;
        }
    }
}
