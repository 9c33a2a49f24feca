//! Structured grids on flat tori (optionally times an interval), dense
//! differential-form storage, fourth-order exterior calculus and
//! deterministic top-degree integration.
//!
//! Multi-indices `i₁ < … < i_q` are stored as bitmasks; components of a
//! degree-`q` form are laid out in lexicographic order of the index tuple.
//! Node indices are row-major with axis 0 slowest.

use std::io::{Read, Write};
use std::ops::Mul;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum node count per axis (width of the five-point stencil).
pub const MIN_NODES: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Positive,
    Negative,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Positive => 1.0,
            Orientation::Negative => -1.0,
        }
    }

    pub fn from_sign(sign: i64) -> Result<Self> {
        match sign {
            1 => Ok(Orientation::Positive),
            -1 => Ok(Orientation::Negative),
            other => Err(Error::Orientation(format!("sign must be +1 or -1, got {other}"))),
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Orientation::Positive => Orientation::Negative,
            Orientation::Negative => Orientation::Positive,
        }
    }
}

impl Mul for Orientation {
    type Output = Orientation;

    fn mul(self, rhs: Orientation) -> Orientation {
        if self == rhs {
            Orientation::Positive
        } else {
            Orientation::Negative
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// Every axis periodic.
    Torus,
    /// Last axis is the non-periodic interval `[0, 1]`.
    TorusInterval,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub nodes: usize,
    pub period: f64,
    pub periodic: bool,
}

impl Axis {
    pub fn periodic(nodes: usize, period: f64) -> Self {
        Axis { nodes, period, periodic: true }
    }

    pub fn interval(nodes: usize) -> Self {
        Axis { nodes, period: 1.0, periodic: false }
    }

    pub fn spacing(&self) -> f64 {
        if self.periodic {
            self.period / self.nodes as f64
        } else {
            1.0 / (self.nodes - 1) as f64
        }
    }

    pub fn coord(&self, j: usize) -> f64 {
        j as f64 * self.spacing()
    }

    /// Quadrature weights along this axis: the rectangle rule on periodic
    /// axes and Gregory's fourth-order end-corrected trapezoid rule on the
    /// interval.
    pub fn weights(&self) -> Vec<f64> {
        let h = self.spacing();
        if self.periodic {
            vec![h; self.nodes]
        } else {
            gregory_weights(self.nodes, h)
        }
    }
}

/// End-corrected trapezoid weights, fourth order for `n ≥ 6`; plain
/// trapezoid below that.
pub fn gregory_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    if n >= 6 {
        let ends = [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0];
        for (k, e) in ends.iter().enumerate() {
            w[k] = e * h;
            w[n - 1 - k] = e * h;
        }
    } else if n >= 2 {
        w[0] = 0.5 * h;
        w[n - 1] = 0.5 * h;
    }
    w
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridManifold {
    axes: Vec<Axis>,
    orientation: Orientation,
    strides: Vec<usize>,
    len: usize,
}

impl GridManifold {
    /// Builds a uniform grid. For [`Topology::TorusInterval`] the last axis is
    /// the interval and its period entry is ignored.
    pub fn build(
        dim: usize,
        node_counts: &[usize],
        periods: &[f64],
        orientation: Orientation,
        topology: Topology,
    ) -> Result<Arc<Self>> {
        if dim == 0 || dim > 8 {
            return Err(Error::InvalidGrid(format!("dimension {dim} outside 1..=8")));
        }
        if node_counts.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "{} node counts given for a {dim}-dimensional grid",
                node_counts.len()
            )));
        }
        let periodic_axes = match topology {
            Topology::Torus => dim,
            Topology::TorusInterval => dim - 1,
        };
        if periods.len() < periodic_axes {
            return Err(Error::InvalidGrid(format!(
                "{} periods given, {periodic_axes} periodic axes",
                periods.len()
            )));
        }
        let axes = (0..dim)
            .map(|a| {
                if a < periodic_axes {
                    Axis::periodic(node_counts[a], periods[a])
                } else {
                    Axis::interval(node_counts[a])
                }
            })
            .collect();
        Self::from_axes(axes, orientation)
    }

    pub fn from_axes(axes: Vec<Axis>, orientation: Orientation) -> Result<Arc<Self>> {
        if axes.is_empty() || axes.len() > 8 {
            return Err(Error::InvalidGrid(format!("dimension {} outside 1..=8", axes.len())));
        }
        let intervals = axes.iter().filter(|a| !a.periodic).count();
        if intervals > 1 {
            return Err(Error::InvalidGrid(format!(
                "{intervals} interval axes; at most one is allowed"
            )));
        }
        for (a, axis) in axes.iter().enumerate() {
            if axis.nodes < MIN_NODES {
                return Err(Error::InvalidGrid(format!(
                    "axis {a} has {} nodes, need at least {MIN_NODES}",
                    axis.nodes
                )));
            }
            if !axis.periodic && axis.nodes < 5 {
                return Err(Error::InvalidGrid(format!(
                    "interval axis {a} has {} nodes, one-sided stencils need at least 5",
                    axis.nodes
                )));
            }
            if !(axis.period > 0.0) || !axis.period.is_finite() {
                return Err(Error::InvalidGrid(format!(
                    "axis {a} has non-positive period {}",
                    axis.period
                )));
            }
        }
        let dim = axes.len();
        let mut strides = vec![1; dim];
        for a in (0..dim.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * axes[a + 1].nodes;
        }
        let len = strides[0] * axes[0].nodes;
        Ok(Arc::new(GridManifold { axes, orientation, strides, len }))
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, a: usize) -> &Axis {
        &self.axes[a]
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn num_nodes(&self) -> usize {
        self.len
    }

    pub fn spacing(&self, a: usize) -> f64 {
        self.axes[a].spacing()
    }

    pub fn node_counts(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.nodes).collect()
    }

    pub fn periods(&self) -> Vec<f64> {
        self.axes.iter().map(|a| a.period).collect()
    }

    pub fn is_closed(&self) -> bool {
        self.axes.iter().all(|a| a.periodic)
    }

    pub fn topology(&self) -> Topology {
        if self.is_closed() {
            Topology::Torus
        } else {
            Topology::TorusInterval
        }
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(Axis::spacing).product()
    }

    /// Same nodes, different orientation.
    pub fn with_orientation(&self, orientation: Orientation) -> Arc<Self> {
        Arc::new(GridManifold { orientation, ..self.clone() })
    }

    /// `self × [0, 1]` with the interval appended as the last axis.
    pub fn times_interval(&self, nodes: usize, orientation: Orientation) -> Result<Arc<Self>> {
        let mut axes = self.axes.clone();
        axes.push(Axis::interval(nodes));
        Self::from_axes(axes, orientation)
    }

    /// Index along `axis` of `node`.
    #[inline]
    pub fn index_along(&self, node: usize, axis: usize) -> usize {
        (node / self.strides[axis]) % self.axes[axis].nodes
    }

    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        (0..self.dim()).map(|a| self.index_along(node, a)).collect()
    }

    pub fn node_at(&self, index: &[usize]) -> usize {
        index.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn coords_into(&self, node: usize, out: &mut [f64]) {
        for (a, axis) in self.axes.iter().enumerate() {
            out[a] = axis.coord(self.index_along(node, a));
        }
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.coords_into(node, &mut out);
        out
    }

    /// Quadrature weight of every node, before the orientation sign.
    pub fn node_weights(&self) -> Vec<f64> {
        let per_axis: Vec<Vec<f64>> = self.axes.iter().map(Axis::weights).collect();
        (0..self.len)
            .map(|node| {
                per_axis
                    .iter()
                    .enumerate()
                    .map(|(a, w)| w[self.index_along(node, a)])
                    .product()
            })
            .collect()
    }

    /// Same axis layout (node counts, periods, periodicity); orientation may differ.
    pub fn same_nodes(&self, other: &GridManifold) -> bool {
        self.axes == other.axes
    }
}

// ---------------------------------------------------------------------------
// Multi-index bookkeeping

/// Bitmasks of the `q`-subsets of `0..n`, in lexicographic order of the
/// sorted index tuple.
pub fn basis_masks(n: usize, q: usize) -> Vec<u32> {
    fn rec(start: usize, n: usize, left: usize, acc: u32, out: &mut Vec<u32>) {
        if left == 0 {
            out.push(acc);
            return;
        }
        for i in start..n {
            if n - i < left {
                break;
            }
            rec(i + 1, n, left - 1, acc | (1 << i), out);
        }
    }
    let mut out = Vec::new();
    if q <= n {
        rec(0, n, q, 0, &mut out);
    }
    out
}

pub fn binomial(n: usize, q: usize) -> usize {
    if q > n {
        return 0;
    }
    (0..q).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Component index of every mask of popcount `q` (usize::MAX elsewhere).
fn mask_lookup(n: usize, q: usize) -> Vec<usize> {
    let mut table = vec![usize::MAX; 1 << n];
    for (c, m) in basis_masks(n, q).into_iter().enumerate() {
        table[m as usize] = c;
    }
    table
}

/// Sign of `dx^I ∧ dx^J` relative to `dx^{I∪J}` for disjoint masks.
#[inline]
pub fn wedge_sign(i: u32, j: u32) -> f64 {
    let mut inversions = 0;
    let mut rest = j;
    while rest != 0 {
        let b = rest.trailing_zeros();
        // elements of I greater than b
        inversions += (i >> (b + 1)).count_ones();
        rest &= rest - 1;
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn mask_indices(mask: u32) -> Vec<usize> {
    (0..32).filter(|b| mask & (1 << b) != 0).collect()
}

// ---------------------------------------------------------------------------
// Deterministic reductions

/// Pairwise (cascade) summation with a fixed reduction tree.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 16;
    if values.len() <= BLOCK {
        let mut s = 0.0;
        for v in values {
            s += v;
        }
        return s;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

// ---------------------------------------------------------------------------
// Stencils

const CENTRAL: [f64; 5] = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
const EDGE0: [f64; 5] = [-25.0 / 12.0, 48.0 / 12.0, -36.0 / 12.0, 16.0 / 12.0, -3.0 / 12.0];
const EDGE1: [f64; 5] = [-3.0 / 12.0, -10.0 / 12.0, 18.0 / 12.0, -6.0 / 12.0, 1.0 / 12.0];

/// Fourth-order derivative along `axis` of nodal data with `block` values
/// per node.
fn diff_axis(grid: &GridManifold, data: &[f64], block: usize, axis: usize) -> Vec<f64> {
    let ax = grid.axis(axis);
    let n = ax.nodes;
    let inv_h = 1.0 / ax.spacing();
    let stride = grid.stride(axis);
    let mut out = vec![0.0; data.len()];
    let mut taps: [(usize, f64); 5] = [(0, 0.0); 5];
    for node in 0..grid.num_nodes() {
        let j = grid.index_along(node, axis);
        let base = node - j * stride;
        if ax.periodic {
            for (t, c) in CENTRAL.iter().enumerate() {
                let k = (j + n + t - 2) % n;
                taps[t] = (base + k * stride, *c);
            }
        } else {
            let (first, coeffs, flip) = if j == 0 {
                (0, EDGE0, false)
            } else if j == 1 {
                (0, EDGE1, false)
            } else if j == n - 1 {
                (n - 5, EDGE0, true)
            } else if j == n - 2 {
                (n - 5, EDGE1, true)
            } else {
                (j - 2, CENTRAL, false)
            };
            for t in 0..5 {
                let (k, c) = if flip { (first + 4 - t, -coeffs[t]) } else { (first + t, coeffs[t]) };
                taps[t] = (base + k * stride, c);
            }
        }
        // differences against the centre node: constants differentiate to 0 exactly
        let centre = &data[node * block..(node + 1) * block];
        let dst = &mut out[node * block..(node + 1) * block];
        for &(src, c) in &taps {
            if c == 0.0 || src == node {
                continue;
            }
            let s = &data[src * block..(src + 1) * block];
            for ((d, v), v0) in dst.iter_mut().zip(s).zip(centre) {
                *d += c * (v - v0);
            }
        }
        for d in dst.iter_mut() {
            *d *= inv_h;
        }
    }
    out
}

/// Fourth-order partial derivative of raw nodal data with `block` values per
/// node.
pub fn partial_derivative_raw(grid: &GridManifold, data: &[f64], block: usize, axis: usize) -> Vec<f64> {
    diff_axis(grid, data, block, axis)
}

/// d of a form with `inner` scalars per component slot (1 for scalar forms,
/// m² for matrix forms).
fn exterior_derivative_raw(
    grid: &GridManifold,
    degree: usize,
    inner: usize,
    data: &[f64],
) -> Result<Vec<f64>> {
    let n = grid.dim();
    if degree >= n {
        return Err(Error::TopDegree(n));
    }
    let in_lookup = mask_lookup(n, degree);
    let out_masks = basis_masks(n, degree + 1);
    let in_block = binomial(n, degree) * inner;
    let out_block = out_masks.len() * inner;
    let partials: Vec<Vec<f64>> = (0..n).map(|a| diff_axis(grid, data, in_block, a)).collect();
    let mut out = vec![0.0; grid.num_nodes() * out_block];
    for (oc, &mask) in out_masks.iter().enumerate() {
        for i in mask_indices(mask) {
            let rest = mask & !(1 << i);
            let ic = in_lookup[rest as usize];
            let sign = wedge_sign(1 << i, rest);
            let d = &partials[i];
            for node in 0..grid.num_nodes() {
                let src = &d[node * in_block + ic * inner..node * in_block + (ic + 1) * inner];
                let dst = &mut out[node * out_block + oc * inner..node * out_block + (oc + 1) * inner];
                for (o, s) in dst.iter_mut().zip(src) {
                    *o += sign * s;
                }
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Scalar forms

#[derive(Clone, Debug)]
pub struct FormField {
    grid: Arc<GridManifold>,
    degree: usize,
    data: Vec<f64>,
}

impl FormField {
    pub fn zeros(grid: &Arc<GridManifold>, degree: usize) -> Result<Self> {
        if degree > grid.dim() {
            return Err(Error::DegreeOverflow { got: degree, dim: grid.dim() });
        }
        let len = grid.num_nodes() * binomial(grid.dim(), degree);
        Ok(FormField { grid: grid.clone(), degree, data: vec![0.0; len] })
    }

    pub fn from_data(grid: &Arc<GridManifold>, degree: usize, data: Vec<f64>) -> Result<Self> {
        if degree > grid.dim() {
            return Err(Error::DegreeOverflow { got: degree, dim: grid.dim() });
        }
        let expected = grid.num_nodes() * binomial(grid.dim(), degree);
        if data.len() != expected {
            return Err(Error::Shape(format!(
                "{} values for a degree-{degree} form, expected {expected}",
                data.len()
            )));
        }
        Ok(FormField { grid: grid.clone(), degree, data })
    }

    /// Samples `f(x, out)` at every node; `out` receives the C(n,q)
    /// components.
    pub fn from_fn(
        grid: &Arc<GridManifold>,
        degree: usize,
        mut f: impl FnMut(&[f64], &mut [f64]),
    ) -> Result<Self> {
        let mut field = Self::zeros(grid, degree)?;
        let nc = field.num_components();
        let mut x = vec![0.0; grid.dim()];
        for node in 0..grid.num_nodes() {
            grid.coords_into(node, &mut x);
            f(&x, &mut field.data[node * nc..(node + 1) * nc]);
        }
        Ok(field)
    }

    /// Degree-0 form from a scalar function.
    pub fn function(grid: &Arc<GridManifold>, f: impl Fn(&[f64]) -> f64) -> Self {
        Self::from_fn(grid, 0, |x, out| out[0] = f(x)).expect("degree 0 always fits")
    }

    /// Constant form `dx^{i₁} ∧ … ∧ dx^{i_q}` (indices strictly increasing).
    pub fn basis(grid: &Arc<GridManifold>, indices: &[usize]) -> Result<Self> {
        let mask = indices.iter().fold(0u32, |m, &i| m | (1 << i));
        if mask.count_ones() as usize != indices.len() || indices.iter().any(|&i| i >= grid.dim()) {
            return Err(Error::Shape(format!("bad multi-index {indices:?}")));
        }
        let q = indices.len();
        let c = mask_lookup(grid.dim(), q)[mask as usize];
        let sign = {
            // reorder to increasing order
            let mut v = indices.to_vec();
            let mut s = 1.0;
            for i in 0..v.len() {
                for j in 0..v.len() - 1 - i {
                    if v[j] > v[j + 1] {
                        v.swap(j, j + 1);
                        s = -s;
                    }
                }
            }
            s
        };
        Self::from_fn(grid, q, |_, out| out[c] = sign)
    }

    pub fn grid(&self) -> &Arc<GridManifold> {
        &self.grid
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_components(&self) -> usize {
        binomial(self.grid.dim(), self.degree)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Components at one node.
    pub fn at(&self, node: usize) -> &[f64] {
        let nc = self.num_components();
        &self.data[node * nc..(node + 1) * nc]
    }

    /// Component for the increasing multi-index `indices` at `node`.
    pub fn component(&self, node: usize, indices: &[usize]) -> f64 {
        let mask = indices.iter().fold(0u32, |m, &i| m | (1 << i));
        let c = mask_lookup(self.grid.dim(), self.degree)[mask as usize];
        self.at(node)[c]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, s: f64) -> Self {
        FormField { data: self.data.iter().map(|v| s * v).collect(), ..self.clone() }
    }

    pub fn add(&self, other: &FormField) -> Result<Self> {
        self.check_compatible(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(FormField { data, ..self.clone() })
    }

    pub fn sub(&self, other: &FormField) -> Result<Self> {
        self.add(&other.scaled(-1.0))
    }

    fn check_compatible(&self, other: &FormField) -> Result<()> {
        if !self.grid.same_nodes(&other.grid) || self.degree != other.degree {
            return Err(Error::Shape(format!(
                "degree {} vs {} or grids differ",
                self.degree, other.degree
            )));
        }
        Ok(())
    }

    pub fn partial_derivative(&self, axis: usize) -> Result<Self> {
        if axis >= self.grid.dim() {
            return Err(Error::Shape(format!("axis {axis} out of range")));
        }
        let data = diff_axis(&self.grid, &self.data, self.num_components(), axis);
        Ok(FormField { data, ..self.clone() })
    }

    pub fn exterior_derivative(&self) -> Result<Self> {
        let data = exterior_derivative_raw(&self.grid, self.degree, 1, &self.data)?;
        Ok(FormField { grid: self.grid.clone(), degree: self.degree + 1, data })
    }

    pub fn wedge(&self, other: &FormField) -> Result<Self> {
        if !self.grid.same_nodes(&other.grid) {
            return Err(Error::Shape("wedge of forms on different grids".into()));
        }
        let n = self.grid.dim();
        let (p, q) = (self.degree, other.degree);
        if p + q > n {
            return Err(Error::DegreeOverflow { got: p + q, dim: n });
        }
        let terms = wedge_terms(n, p, q);
        let (bp, bq, br) = (binomial(n, p), binomial(n, q), binomial(n, p + q));
        let mut out = vec![0.0; self.grid.num_nodes() * br];
        for node in 0..self.grid.num_nodes() {
            let a = &self.data[node * bp..(node + 1) * bp];
            let b = &other.data[node * bq..(node + 1) * bq];
            let o = &mut out[node * br..(node + 1) * br];
            for t in &terms {
                o[t.out] += t.sign * a[t.left] * b[t.right];
            }
        }
        Ok(FormField { grid: self.grid.clone(), degree: p + q, data: out })
    }

    /// Orientation-signed integral using the grid's orientation.
    pub fn integrate_top(&self) -> Result<f64> {
        self.integrate_top_oriented(self.grid.orientation())
    }

    /// Orientation-signed integral of a top-degree form over `(M, o)`.
    pub fn integrate_top_oriented(&self, orientation: Orientation) -> Result<f64> {
        if self.degree != self.grid.dim() {
            return Err(Error::Shape(format!(
                "integrate_top needs degree {}, got {}",
                self.grid.dim(),
                self.degree
            )));
        }
        let weights = self.grid.node_weights();
        let products: Vec<f64> = self.data.iter().zip(&weights).map(|(v, w)| v * w).collect();
        Ok(orientation.sign() * pairwise_sum(&products))
    }

    pub fn to_dump(&self) -> FieldDump {
        FieldDump {
            node_counts: self.grid.node_counts(),
            degree: self.degree,
            rank: 0,
            data: self.data.clone(),
        }
    }

    pub fn from_dump(grid: &Arc<GridManifold>, dump: FieldDump) -> Result<Self> {
        if dump.rank != 0 || dump.node_counts != grid.node_counts() {
            return Err(Error::Shape("dump does not describe a scalar form on this grid".into()));
        }
        Self::from_data(grid, dump.degree, dump.data)
    }
}

#[derive(Clone, Copy, Debug)]
struct WedgeTerm {
    left: usize,
    right: usize,
    out: usize,
    sign: f64,
}

fn wedge_terms(n: usize, p: usize, q: usize) -> Vec<WedgeTerm> {
    let out_lookup = mask_lookup(n, p + q);
    let mut terms = Vec::new();
    for (l, &i) in basis_masks(n, p).iter().enumerate() {
        for (r, &j) in basis_masks(n, q).iter().enumerate() {
            if i & j == 0 {
                terms.push(WedgeTerm {
                    left: l,
                    right: r,
                    out: out_lookup[(i | j) as usize],
                    sign: wedge_sign(i, j),
                });
            }
        }
    }
    terms
}

// ---------------------------------------------------------------------------
// Matrix-valued forms

/// Form with values in m×m matrices; each component slot stores a row-major
/// matrix.
#[derive(Clone, Debug)]
pub struct MatrixFormField {
    grid: Arc<GridManifold>,
    degree: usize,
    rank: usize,
    data: Vec<f64>,
}

impl MatrixFormField {
    pub fn zeros(grid: &Arc<GridManifold>, degree: usize, rank: usize) -> Result<Self> {
        if degree > grid.dim() {
            return Err(Error::DegreeOverflow { got: degree, dim: grid.dim() });
        }
        let len = grid.num_nodes() * binomial(grid.dim(), degree) * rank * rank;
        Ok(MatrixFormField { grid: grid.clone(), degree, rank, data: vec![0.0; len] })
    }

    pub fn from_data(grid: &Arc<GridManifold>, degree: usize, rank: usize, data: Vec<f64>) -> Result<Self> {
        let expected = grid.num_nodes() * binomial(grid.dim(), degree) * rank * rank;
        if degree > grid.dim() {
            return Err(Error::DegreeOverflow { got: degree, dim: grid.dim() });
        }
        if data.len() != expected {
            return Err(Error::Shape(format!(
                "{} values for a rank-{rank} degree-{degree} matrix form, expected {expected}",
                data.len()
            )));
        }
        Ok(MatrixFormField { grid: grid.clone(), degree, rank, data })
    }

    /// Samples `f(x, out)` at each node; `out` holds C(n,q)·m² values.
    pub fn from_fn(
        grid: &Arc<GridManifold>,
        degree: usize,
        rank: usize,
        mut f: impl FnMut(&[f64], &mut [f64]),
    ) -> Result<Self> {
        let mut field = Self::zeros(grid, degree, rank)?;
        let block = field.block();
        let mut x = vec![0.0; grid.dim()];
        for node in 0..grid.num_nodes() {
            grid.coords_into(node, &mut x);
            f(&x, &mut field.data[node * block..(node + 1) * block]);
        }
        Ok(field)
    }

    pub fn grid(&self) -> &Arc<GridManifold> {
        &self.grid
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn num_components(&self) -> usize {
        binomial(self.grid.dim(), self.degree)
    }

    /// Scalars stored per node.
    pub fn block(&self) -> usize {
        self.num_components() * self.rank * self.rank
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn at(&self, node: usize) -> &[f64] {
        let b = self.block();
        &self.data[node * b..(node + 1) * b]
    }

    /// Matrix entry (row, col) of component `comp` at `node`.
    pub fn entry(&self, node: usize, comp: usize, row: usize, col: usize) -> f64 {
        let m = self.rank;
        self.at(node)[comp * m * m + row * m + col]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn check_compatible(&self, other: &MatrixFormField) -> Result<()> {
        if !self.grid.same_nodes(&other.grid) || self.degree != other.degree || self.rank != other.rank {
            return Err(Error::Shape(format!(
                "matrix forms differ: degree {}/{} rank {}/{}",
                self.degree, other.degree, self.rank, other.rank
            )));
        }
        Ok(())
    }

    /// `Σ cᵢ Aᵢ` over fields of identical shape.
    pub fn linear_combination(terms: &[(f64, &MatrixFormField)]) -> Result<Self> {
        let (_, first) = terms
            .first()
            .ok_or_else(|| Error::Shape("empty linear combination".into()))?;
        let mut out = vec![0.0; first.data.len()];
        for (c, f) in terms {
            first.check_compatible(f)?;
            for (o, v) in out.iter_mut().zip(&f.data) {
                *o += c * v;
            }
        }
        Ok(MatrixFormField { data: out, ..(*first).clone() })
    }

    pub fn add(&self, other: &MatrixFormField) -> Result<Self> {
        Self::linear_combination(&[(1.0, self), (1.0, other)])
    }

    pub fn sub(&self, other: &MatrixFormField) -> Result<Self> {
        Self::linear_combination(&[(1.0, self), (-1.0, other)])
    }

    pub fn scaled(&self, s: f64) -> Self {
        MatrixFormField { data: self.data.iter().map(|v| s * v).collect(), ..self.clone() }
    }

    pub fn partial_derivative(&self, axis: usize) -> Result<Self> {
        if axis >= self.grid.dim() {
            return Err(Error::Shape(format!("axis {axis} out of range")));
        }
        let data = diff_axis(&self.grid, &self.data, self.block(), axis);
        Ok(MatrixFormField { data, ..self.clone() })
    }

    /// Entrywise exterior derivative.
    pub fn exterior_derivative(&self) -> Result<Self> {
        let m2 = self.rank * self.rank;
        let data = exterior_derivative_raw(&self.grid, self.degree, m2, &self.data)?;
        Ok(MatrixFormField { grid: self.grid.clone(), degree: self.degree + 1, rank: self.rank, data })
    }

    /// `(α∧β)^a_b = Σ_c α^a_c ∧ β^c_b`.
    pub fn wedge(&self, other: &MatrixFormField) -> Result<Self> {
        if !self.grid.same_nodes(&other.grid) || self.rank != other.rank {
            return Err(Error::Shape("matrix wedge of incompatible fields".into()));
        }
        let n = self.grid.dim();
        let (p, q) = (self.degree, other.degree);
        if p + q > n {
            return Err(Error::DegreeOverflow { got: p + q, dim: n });
        }
        let m = self.rank;
        let m2 = m * m;
        let terms = wedge_terms(n, p, q);
        let (bp, bq, br) = (binomial(n, p) * m2, binomial(n, q) * m2, binomial(n, p + q) * m2);
        let mut out = vec![0.0; self.grid.num_nodes() * br];
        for node in 0..self.grid.num_nodes() {
            let a = &self.data[node * bp..(node + 1) * bp];
            let b = &other.data[node * bq..(node + 1) * bq];
            let o = &mut out[node * br..(node + 1) * br];
            for t in &terms {
                matmul_acc(
                    t.sign,
                    &a[t.left * m2..(t.left + 1) * m2],
                    &b[t.right * m2..(t.right + 1) * m2],
                    &mut o[t.out * m2..(t.out + 1) * m2],
                    m,
                );
            }
        }
        Ok(MatrixFormField { grid: self.grid.clone(), degree: p + q, rank: m, data: out })
    }

    /// Scalar form `tr α`.
    pub fn trace(&self) -> FormField {
        let m = self.rank;
        let nc = self.num_components();
        let mut out = Vec::with_capacity(self.grid.num_nodes() * nc);
        for chunk in self.data.chunks(m * m) {
            out.push((0..m).map(|a| chunk[a * m + a]).sum());
        }
        FormField { grid: self.grid.clone(), degree: self.degree, data: out }
    }

    pub fn to_dump(&self) -> FieldDump {
        FieldDump {
            node_counts: self.grid.node_counts(),
            degree: self.degree,
            rank: self.rank,
            data: self.data.clone(),
        }
    }

    pub fn from_dump(grid: &Arc<GridManifold>, dump: FieldDump) -> Result<Self> {
        if dump.rank == 0 || dump.node_counts != grid.node_counts() {
            return Err(Error::Shape("dump does not describe a matrix form on this grid".into()));
        }
        Self::from_data(grid, dump.degree, dump.rank, dump.data)
    }
}

/// `c += s · a·b` for row-major m×m matrices.
#[inline]
pub(crate) fn matmul_acc(s: f64, a: &[f64], b: &[f64], c: &mut [f64], m: usize) {
    for i in 0..m {
        for k in 0..m {
            let aik = s * a[i * m + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..m {
                c[i * m + j] += aik * b[k * m + j];
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Flat binary dumps

const DUMP_MAGIC: &[u8; 4] = b"GAFD";
const DUMP_VERSION: u32 = 1;

/// Flat little-endian dump of a form field: magic, version, dim, degree,
/// matrix rank (0 for scalar forms), node counts, then the f64 payload.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldDump {
    pub node_counts: Vec<usize>,
    pub degree: usize,
    pub rank: usize,
    pub data: Vec<f64>,
}

impl FieldDump {
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(DUMP_MAGIC)?;
        w.write_all(&DUMP_VERSION.to_le_bytes())?;
        w.write_all(&(self.node_counts.len() as u32).to_le_bytes())?;
        w.write_all(&(self.degree as u32).to_le_bytes())?;
        w.write_all(&(self.rank as u32).to_le_bytes())?;
        for &n in &self.node_counts {
            w.write_all(&(n as u64).to_le_bytes())?;
        }
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != DUMP_MAGIC {
            return Err(Error::Shape("not a field dump (bad magic)".into()));
        }
        let mut word = [0u8; 4];
        let mut read_u32 = |r: &mut dyn Read| -> Result<u32> {
            r.read_exact(&mut word)?;
            Ok(u32::from_le_bytes(word))
        };
        let version = read_u32(&mut r)?;
        if version != DUMP_VERSION {
            return Err(Error::Shape(format!("unsupported dump version {version}")));
        }
        let dim = read_u32(&mut r)? as usize;
        let degree = read_u32(&mut r)? as usize;
        let rank = read_u32(&mut r)? as usize;
        let mut dword = [0u8; 8];
        let mut node_counts = Vec::with_capacity(dim);
        for _ in 0..dim {
            r.read_exact(&mut dword)?;
            node_counts.push(u64::from_le_bytes(dword) as usize);
        }
        let nodes: usize = node_counts.iter().product();
        let len = nodes * binomial(dim, degree) * rank.max(1) * rank.max(1);
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            r.read_exact(&mut dword)?;
            data.push(f64::from_le_bytes(dword));
        }
        Ok(FieldDump { node_counts, degree, rank, data })
    }
}
