use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::{partial_derivative_raw, pairwise_sum, GridManifold, Orientation};
use crate::geometry::families::{packed_index, FamilyRef, LinearCombination, TrigTensor};
use crate::linalg;
use crate::trig::TrigSeries;

/// Nodal symmetric covariant 2-tensor, stored as packed upper triangles.
///
/// When built from a closed-form family the exact first derivatives are
/// cached alongside the values and used in place of stencils.
#[derive(Clone, Debug)]
pub struct SymTensorField {
    grid: Arc<GridManifold>,
    values: Vec<f64>,
    grads: Option<Arc<Vec<f64>>>,
    family: Option<FamilyRef>,
}

impl SymTensorField {
    pub fn packed_len(n: usize) -> usize {
        n * (n + 1) / 2
    }

    pub fn from_family(grid: &Arc<GridManifold>, family: FamilyRef) -> Result<Self> {
        let n = grid.dim();
        if family.dim() != n {
            return Err(Error::Dimension(format!(
                "family of dimension {} on a {n}-dimensional grid",
                family.dim()
            )));
        }
        let p = Self::packed_len(n);
        let mut values = vec![0.0; grid.num_nodes() * p];
        let mut grads = vec![0.0; grid.num_nodes() * n * n * n];
        let mut x = vec![0.0; n];
        let mut v = vec![0.0; n * n];
        for node in 0..grid.num_nodes() {
            grid.coords_into(node, &mut x);
            family.eval(&x, &mut v, &mut grads[node * n * n * n..(node + 1) * n * n * n])?;
            for i in 0..n {
                for j in i..n {
                    values[node * p + packed_index(n, i, j)] = v[i * n + j];
                }
            }
        }
        Ok(SymTensorField { grid: grid.clone(), values, grads: Some(Arc::new(grads)), family: Some(family) })
    }

    /// Nodal data without a generator; `f(x, out)` fills the full n×n matrix
    /// and is symmetrised by taking the upper triangle.
    pub fn from_fn(grid: &Arc<GridManifold>, mut f: impl FnMut(&[f64], &mut [f64])) -> Self {
        let n = grid.dim();
        let p = Self::packed_len(n);
        let mut values = vec![0.0; grid.num_nodes() * p];
        let mut x = vec![0.0; n];
        let mut m = vec![0.0; n * n];
        for node in 0..grid.num_nodes() {
            grid.coords_into(node, &mut x);
            f(&x, &mut m);
            for i in 0..n {
                for j in i..n {
                    values[node * p + packed_index(n, i, j)] = m[i * n + j];
                }
            }
        }
        SymTensorField { grid: grid.clone(), values, grads: None, family: None }
    }

    pub fn from_packed(grid: &Arc<GridManifold>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_nodes() * Self::packed_len(grid.dim()) {
            return Err(Error::Shape("packed tensor data has the wrong length".into()));
        }
        Ok(SymTensorField { grid: grid.clone(), values, grads: None, family: None })
    }

    pub fn zeros(grid: &Arc<GridManifold>) -> Self {
        SymTensorField {
            grid: grid.clone(),
            values: vec![0.0; grid.num_nodes() * Self::packed_len(grid.dim())],
            grads: None,
            family: None,
        }
    }

    pub fn grid(&self) -> &Arc<GridManifold> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn family(&self) -> Option<&FamilyRef> {
        self.family.as_ref()
    }

    pub fn packed(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, node: usize, i: usize, j: usize) -> f64 {
        let n = self.dim();
        self.values[node * Self::packed_len(n) + packed_index(n, i, j)]
    }

    /// Full matrix at a node.
    pub fn matrix(&self, node: usize) -> Vec<f64> {
        let n = self.dim();
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = self.get(node, i, j);
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.grads.is_some()
    }

    /// `∂ₖTᵢⱼ` at every node, layout `[node][k][i][j]`; exact when the field
    /// came from a family, fourth-order stencils otherwise.
    pub fn gradients(&self) -> Arc<Vec<f64>> {
        if let Some(g) = &self.grads {
            return g.clone();
        }
        Arc::new(self.stencil_gradients())
    }

    /// Stencil derivatives regardless of any generator.
    pub fn stencil_gradients(&self) -> Vec<f64> {
        let n = self.dim();
        let p = Self::packed_len(n);
        let mut out = vec![0.0; self.grid.num_nodes() * n * n * n];
        for k in 0..n {
            let d = partial_derivative_raw(&self.grid, &self.values, p, k);
            for node in 0..self.grid.num_nodes() {
                for i in 0..n {
                    for j in 0..n {
                        out[node * n * n * n + (k * n + i) * n + j] = d[node * p + packed_index(n, i, j)];
                    }
                }
            }
        }
        out
    }

    /// Drops the generator and cached derivatives.
    pub fn nodal_only(&self) -> Self {
        SymTensorField { grid: self.grid.clone(), values: self.values.clone(), grads: None, family: None }
    }

    /// A generator for this field: its own, or the trigonometric interpolant
    /// of the nodal data on a periodic grid.
    pub fn generator(&self) -> Result<FamilyRef> {
        if let Some(f) = &self.family {
            return Ok(f.clone());
        }
        if !self.grid.is_closed() {
            return Err(Error::Shape("trigonometric resampling needs a periodic grid".into()));
        }
        let n = self.dim();
        let p = Self::packed_len(n);
        let entries = (0..p)
            .map(|c| {
                let samples: Vec<f64> = (0..self.grid.num_nodes()).map(|node| self.values[node * p + c]).collect();
                TrigSeries::interpolate(&self.grid, &samples)
            })
            .collect();
        Ok(Arc::new(TrigTensor::new(n, entries)))
    }

    /// `Σ cᵣ Tᵣ`; keeps a generator when every term has one, and cached
    /// derivatives when any term has them (stencils fill in for the rest).
    pub fn linear_combination(terms: &[(f64, &SymTensorField)]) -> Result<Self> {
        let first = terms.first().ok_or_else(|| Error::Shape("empty combination".into()))?.1;
        for (_, t) in terms {
            if !t.grid.same_nodes(&first.grid) {
                return Err(Error::Shape("tensor fields on different grids".into()));
            }
        }
        let mut values = vec![0.0; first.values.len()];
        for (c, t) in terms {
            for (o, v) in values.iter_mut().zip(&t.values) {
                *o += c * v;
            }
        }
        let grads = if terms.iter().any(|(_, t)| t.grads.is_some()) {
            let n = first.dim();
            let mut g = vec![0.0; first.grid.num_nodes() * n * n * n];
            for (c, t) in terms {
                for (o, v) in g.iter_mut().zip(t.gradients().iter()) {
                    *o += c * v;
                }
            }
            Some(Arc::new(g))
        } else {
            None
        };
        let family: Option<FamilyRef> = if terms.iter().all(|(_, t)| t.family.is_some()) {
            Some(Arc::new(LinearCombination::new(terms.iter().map(|(c, t)| (*c, t.family.clone().unwrap())).collect())))
        } else {
            None
        };
        Ok(SymTensorField { grid: first.grid.clone(), values, grads, family })
    }

    /// `∫ Tᵢⱼ Sᵢⱼ` (Euclidean contraction, unsigned cell measure); used for
    /// norms and diagnostics.
    pub fn l2_dot(&self, other: &SymTensorField) -> f64 {
        let n = self.dim();
        let p = Self::packed_len(n);
        let w = self.grid.node_weights();
        let mut terms = Vec::with_capacity(self.grid.num_nodes());
        for node in 0..self.grid.num_nodes() {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let c = packed_index(n, i, j);
                    s += self.values[node * p + c] * other.values[node * p + c];
                }
            }
            terms.push(s * w[node]);
        }
        pairwise_sum(&terms)
    }
}

/// Riemannian metric: a symmetric tensor field that is positive definite at
/// every node.
#[derive(Clone, Debug)]
pub struct MetricField {
    tensor: SymTensorField,
}

impl MetricField {
    pub fn new(tensor: SymTensorField) -> Result<Self> {
        let n = tensor.dim();
        for node in 0..tensor.grid.num_nodes() {
            if linalg::cholesky(n, &tensor.matrix(node)).is_none() {
                return Err(Error::NotPositiveDefinite { node, coords: tensor.grid.coords(node) });
            }
        }
        Ok(MetricField { tensor })
    }

    pub fn from_family(grid: &Arc<GridManifold>, family: FamilyRef) -> Result<Self> {
        Self::new(SymTensorField::from_family(grid, family)?)
    }

    pub fn flat(grid: &Arc<GridManifold>) -> Result<Self> {
        Self::from_family(grid, Arc::new(TrigTensor::flat(&grid.periods())))
    }

    pub fn tensor(&self) -> &SymTensorField {
        &self.tensor
    }

    pub fn grid(&self) -> &Arc<GridManifold> {
        self.tensor.grid()
    }

    pub fn dim(&self) -> usize {
        self.tensor.dim()
    }

    /// `λ² g`.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        Self::new(SymTensorField::linear_combination(&[(lambda * lambda, &self.tensor)])?)
    }

    /// `g + s·h`, rejecting non-positive results.
    pub fn perturbed(&self, h: &SymTensorField, s: f64) -> Result<Self> {
        Self::new(SymTensorField::linear_combination(&[(1.0, &self.tensor), (s, h)])?)
    }

    /// Riemannian volume `∫ √det g` (unsigned).
    pub fn volume(&self) -> f64 {
        let n = self.dim();
        let w = self.grid().node_weights();
        let terms: Vec<f64> = (0..self.grid().num_nodes())
            .map(|node| linalg::det(n, &self.tensor.matrix(node)).sqrt() * w[node])
            .collect();
        pairwise_sum(&terms)
    }
}

/// A metric together with an orientation of the underlying manifold.
#[derive(Clone, Debug)]
pub struct OrientedMetric {
    pub metric: MetricField,
    pub orientation: Orientation,
}

impl OrientedMetric {
    pub fn new(metric: MetricField, orientation: Orientation) -> Self {
        OrientedMetric { metric, orientation }
    }

    /// Uses the grid's orientation.
    pub fn from_metric(metric: MetricField) -> Self {
        let orientation = metric.grid().orientation();
        OrientedMetric { metric, orientation }
    }

    pub fn with_orientation(&self, orientation: Orientation) -> Self {
        OrientedMetric { metric: self.metric.clone(), orientation }
    }
}
