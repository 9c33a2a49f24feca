//! Functional derivatives of the Chern–Simons action: the pairing
//! `σ^p_g(h) = d/ds CS(g + sh)`, the classical Cotton tensor, path integrals
//! of `σ^p` and the flat-holonomy check `κ_φ = p(M_φ) mod ℤ`.

use std::sync::Arc;

use crate::charclass::{cs_action, InvariantPolynomial};
use crate::error::{Error, Result};
use crate::fields::{gregory_weights, Axis, pairwise_sum, partial_derivative_raw, GridManifold, MatrixFormField, Orientation};
use crate::geometry::{apply_diffeo, curvature, levi_civita, Diffeomorphism, MetricField, OrientedMetric, SymTensorField};
use crate::linalg;
use crate::torusbundle::{build_mapping_torus, double_cover, pontryagin_number, Cutoff};

/// `cotton_pairing(g, h) = COTTON_NORMALIZATION · sigma_pairing(tr(X²), g, h)`.
///
/// With `ω = Γ dx` one has `tr(ω∧dω + ⅔ω³) = ε^{λμν}Γ^a_{λb}(∂_μΓ^b_{νa} +
/// ⅔Γ^b_{μc}Γ^c_{νa})`, whose metric variation is `−2∫ √g C^{ij} δg_ij`.
pub const COTTON_NORMALIZATION: f64 = -0.5;

/// Relative step of the central difference in [`sigma_pairing`].
const RELATIVE_STEP: f64 = 1e-4;

/// `σ^p_g(h)`: central difference of `CS_{p,A₀}` along `h`, Richardson
/// extrapolated once. The step starts at `10⁻⁴‖g‖/‖h‖` and is halved while
/// `g ± sh` fails to be positive definite.
pub fn sigma_pairing(
    p: &InvariantPolynomial,
    g: &OrientedMetric,
    h: &SymTensorField,
    a0: &MatrixFormField,
) -> Result<f64> {
    let hn = h.l2_dot(h).sqrt();
    if hn == 0.0 {
        return Ok(0.0);
    }
    let gt = g.metric.tensor();
    let gn = gt.l2_dot(gt).sqrt();
    let mut s = RELATIVE_STEP * gn / hn;
    let floor = 1e-12 * gn / hn;
    loop {
        match richardson(p, g, h, a0, s) {
            Err(Error::NotPositiveDefinite { .. }) => {
                s *= 0.5;
                if s < floor {
                    return Err(Error::StepUnderflow);
                }
            }
            other => return other,
        }
    }
}

fn richardson(p: &InvariantPolynomial, g: &OrientedMetric, h: &SymTensorField, a0: &MatrixFormField, s: f64) -> Result<f64> {
    let central = |s: f64| -> Result<f64> {
        let plus = OrientedMetric::new(g.metric.perturbed(h, s)?, g.orientation);
        let minus = OrientedMetric::new(g.metric.perturbed(h, -s)?, g.orientation);
        Ok((cs_action(p, &plus, a0)? - cs_action(p, &minus, a0)?) / (2.0 * s))
    };
    let coarse = central(s)?;
    let fine = central(0.5 * s)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Cotton tensor density `√g C^{ij} = ε̃^{ikl} ∇ₖ(R^j_l − ¼R δ^j_l)`,
/// symmetrized, with `ε̃` the Levi-Civita symbol of the orientation.
pub fn cotton_classical(g: &OrientedMetric) -> Result<SymTensorField> {
    let n = g.metric.dim();
    if n != 3 {
        return Err(Error::Dimension(format!("the classical Cotton tensor is three-dimensional, got n = {n}")));
    }
    let grid = g.metric.grid().clone();
    let omega = levi_civita(&g.metric)?;
    let f = curvature(&omega)?;
    let nodes = grid.num_nodes();
    // S^j_l at every node, row-major
    let mut s = vec![0.0; nodes * 9];
    for node in 0..nodes {
        let gm = g.metric.tensor().matrix(node);
        let ginv = linalg::invert(3, &gm).ok_or_else(|| Error::NotPositiveDefinite { node, coords: grid.coords(node) })?;
        let riem = |k: usize, l: usize, i: usize, j: usize| -> f64 {
            match i.cmp(&j) {
                std::cmp::Ordering::Equal => 0.0,
                std::cmp::Ordering::Less => f.entry(node, pair_index(i, j), k, l),
                std::cmp::Ordering::Greater => -f.entry(node, pair_index(j, i), k, l),
            }
        };
        let mut ric = [0.0; 9];
        for l in 0..3 {
            for j in 0..3 {
                ric[l * 3 + j] = (0..3).map(|k| riem(k, l, k, j)).sum();
            }
        }
        let scalar: f64 = (0..9).map(|a| ginv[a] * ric[a]).sum();
        for j in 0..3 {
            for l in 0..3 {
                let mut v = 0.0;
                for m in 0..3 {
                    v += ginv[j * 3 + m] * ric[m * 3 + l];
                }
                if j == l {
                    v -= 0.25 * scalar;
                }
                s[node * 9 + j * 3 + l] = v;
            }
        }
    }
    let ds: Vec<Vec<f64>> = (0..3).map(|k| partial_derivative_raw(&grid, &s, 9, k)).collect();
    let sign = g.orientation.sign();
    let mut node = 0;
    let out = SymTensorField::from_fn(&grid, |_, c| {
        let gam = |j: usize, k: usize, m: usize| omega.entry(node, k, j, m);
        let sv = |j: usize, l: usize| s[node * 9 + j * 3 + l];
        let mut full = [0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = 0.0;
                for (k, l, e) in levi_civita_terms(i) {
                    // ∇ₖS^j_l = ∂ₖS^j_l + Γ^j_{km}S^m_l − Γ^m_{kl}S^j_m
                    let mut cov = ds[k][node * 9 + j * 3 + l];
                    for m in 0..3 {
                        cov += gam(j, k, m) * sv(m, l) - gam(m, k, l) * sv(j, m);
                    }
                    acc += e * cov;
                }
                full[i * 3 + j] = sign * acc;
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                c[i * 3 + j] = 0.5 * (full[i * 3 + j] + full[j * 3 + i]);
            }
        }
        node += 1;
    });
    Ok(out)
}

fn pair_index(i: usize, j: usize) -> usize {
    match (i, j) {
        (0, 1) => 0,
        (0, 2) => 1,
        (1, 2) => 2,
        _ => unreachable!("ordered pair in three dimensions"),
    }
}

/// Non-zero `ε̃^{ikl}` for fixed `i`.
fn levi_civita_terms(i: usize) -> [(usize, usize, f64); 2] {
    let (k, l) = ((i + 1) % 3, (i + 2) % 3);
    [(k, l, 1.0), (l, k, -1.0)]
}

/// `∫ (√g C^{ij}) h_ij d³x` for a density from [`cotton_classical`].
pub fn cotton_pairing(density: &SymTensorField, h: &SymTensorField) -> f64 {
    let grid = density.grid();
    let w = grid.node_weights();
    let terms: Vec<f64> = (0..grid.num_nodes())
        .map(|node| {
            let mut s = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    s += density.get(node, i, j) * h.get(node, i, j);
                }
            }
            s * w[node]
        })
        .collect();
    pairwise_sum(&terms)
}

/// Largest nodal value of the trace `g_ij C^{ij}` and of the divergence
/// `∂ᵢ(√g C^{ij}) + Γ^j_{ik}(√g C^{ik})` of a Cotton density.
pub fn cotton_trace_and_divergence(g: &MetricField, density: &SymTensorField) -> Result<(f64, f64)> {
    let grid = density.grid();
    let n = 3;
    let omega = levi_civita(g)?;
    let mut trace: f64 = 0.0;
    for node in 0..grid.num_nodes() {
        let gm = g.tensor().matrix(node);
        let t: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| gm[i * n + j] * density.get(node, i, j)).sum();
        trace = trace.max(t.abs());
    }
    let full: Vec<f64> = (0..grid.num_nodes()).flat_map(|node| density.matrix(node)).collect();
    let d: Vec<Vec<f64>> = (0..n).map(|k| partial_derivative_raw(grid, &full, n * n, k)).collect();
    let mut div: f64 = 0.0;
    for node in 0..grid.num_nodes() {
        for j in 0..n {
            let mut v = 0.0;
            for i in 0..n {
                v += d[i][node * n * n + i * n + j];
                for k in 0..n {
                    // Γ^j_{ik} = ω^j_k component i
                    v += omega.entry(node, i, j, k) * density.get(node, i, k);
                }
            }
            div = div.max(v.abs());
        }
    }
    Ok((trace, div))
}

/// Uniformly sampled path of metrics `γ(s₀), …, γ(s_m)` on `[0, 1]`, with an
/// optional declared endpoint relation `γ(1) = φ·γ(0)`.
#[derive(Clone, Debug)]
pub struct MetricPath {
    samples: Vec<MetricField>,
    orientation: Orientation,
    endpoint: Option<Diffeomorphism>,
}

impl MetricPath {
    pub fn from_samples(samples: Vec<MetricField>, orientation: Orientation) -> Result<Self> {
        if samples.len() < 3 {
            return Err(Error::Shape(format!("a metric path needs at least 3 samples, got {}", samples.len())));
        }
        let grid = samples[0].grid().clone();
        if samples.iter().any(|g| !g.grid().same_nodes(&grid)) {
            return Err(Error::Shape("path samples live on different grids".into()));
        }
        Ok(MetricPath { samples, orientation, endpoint: None })
    }

    /// `γ(s) = (1−r)g₀ + r g₁ + r(1−r) b` with `r = reparam(s)`; positivity
    /// is checked at every sample.
    pub fn interpolating(
        g0: &OrientedMetric,
        g1: &MetricField,
        samples: usize,
        bump: Option<&SymTensorField>,
        reparam: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let out = (0..samples)
            .map(|i| {
                let r = reparam(i as f64 / (samples.max(2) - 1) as f64);
                let (a, b) = (g0.metric.tensor(), g1.tensor());
                let mut terms = vec![(1.0 - r, a), (r, b)];
                if let Some(bump) = bump {
                    terms.push((r * (1.0 - r), bump));
                }
                MetricField::new(SymTensorField::linear_combination(&terms)?)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_samples(out, g0.orientation)
    }

    /// A path in `𝒞^φ`: ends at `φ·g₀`.
    pub fn in_class(
        g0: &OrientedMetric,
        phi: &Diffeomorphism,
        samples: usize,
        bump: Option<&SymTensorField>,
        reparam: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        if phi.orientation() == Orientation::Negative {
            return Err(Error::Orientation("paths in 𝒞^φ need an orientation-preserving φ".into()));
        }
        let end = apply_diffeo(phi, g0)?;
        let mut path = Self::interpolating(g0, &end.metric, samples, bump, reparam)?;
        path.endpoint = Some(phi.clone());
        Ok(path)
    }

    pub fn samples(&self) -> &[MetricField] {
        &self.samples
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn endpoint(&self) -> Option<&Diffeomorphism> {
        self.endpoint.as_ref()
    }

    pub fn grid(&self) -> &Arc<GridManifold> {
        self.samples[0].grid()
    }

    /// Largest nodal deviation of `γ(1)` from `φ·γ(0)` for a declared φ.
    pub fn endpoint_residual(&self) -> Result<Option<f64>> {
        let Some(phi) = &self.endpoint else { return Ok(None) };
        let start = OrientedMetric::new(self.samples[0].clone(), self.orientation);
        let moved = apply_diffeo(phi, &start)?;
        let last = self.samples.last().expect("non-empty").tensor();
        let d = SymTensorField::linear_combination(&[(1.0, moved.metric.tensor()), (-1.0, last)])?;
        Ok(Some(d.max_abs()))
    }

    /// `γ′(sᵢ)` by fourth-order differences in `s` (second order for fewer
    /// than five samples), formed as combinations of `γ(s_q) − γ(sᵢ)` so that
    /// closed-form generators are kept.
    pub fn velocities(&self) -> Result<Vec<SymTensorField>> {
        let m = self.samples.len();
        let coeffs = if m >= 5 {
            let line = GridManifold::from_axes(vec![Axis::interval(m)], Orientation::Positive)?;
            let mut unit = vec![0.0; m * m];
            for i in 0..m {
                unit[i * m + i] = 1.0;
            }
            partial_derivative_raw(&line, &unit, m, 0)
        } else {
            let inv = (m - 1) as f64;
            let mut c = vec![0.0; m * m];
            for i in 0..m {
                let (start, w) = if i == 0 {
                    (0, [-1.5, 2.0, -0.5])
                } else if i == m - 1 {
                    (m - 3, [0.5, -2.0, 1.5])
                } else {
                    (i - 1, [-0.5, 0.0, 0.5])
                };
                for (t, wt) in w.iter().enumerate() {
                    c[i * m + start + t] = wt * inv;
                }
            }
            c
        };
        (0..m)
            .map(|i| {
                let centre = self.samples[i].tensor();
                let diffs = (0..m)
                    .filter(|&q| q != i && coeffs[i * m + q] != 0.0)
                    .map(|q| {
                        let d = SymTensorField::linear_combination(&[(1.0, self.samples[q].tensor()), (-1.0, centre)])?;
                        Ok((coeffs[i * m + q], d))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let terms: Vec<(f64, &SymTensorField)> = diffs.iter().map(|(c, d)| (*c, d)).collect();
                SymTensorField::linear_combination(&terms)
            })
            .collect()
    }
}

/// `∫_γ σ^p = ∫₀¹ σ^p_{γ(s)}(γ′(s)) ds` by Gregory quadrature.
pub fn path_integral_sigma(p: &InvariantPolynomial, path: &MetricPath, a0: &MatrixFormField) -> Result<f64> {
    let velocities = path.velocities()?;
    let m = path.samples.len();
    let weights = gregory_weights(m, 1.0 / (m - 1) as f64);
    let mut terms = Vec::with_capacity(m);
    for ((g, v), w) in path.samples.iter().zip(&velocities).zip(weights) {
        let go = OrientedMetric::new(g.clone(), path.orientation);
        terms.push(w * sigma_pairing(p, &go, v, a0)?);
    }
    Ok(pairwise_sum(&terms))
}

/// Mapping class with an externally supplied flat holonomy `κ_φ ∈ ℝ/ℤ`.
#[derive(Clone, Debug)]
pub struct FlatHolonomyDatum {
    pub label: String,
    pub phi: Diffeomorphism,
    pub kappa: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HolonomyVerdict {
    pub label: String,
    pub kappa: Option<f64>,
    pub characteristic_number: f64,
    /// `min_k |κ − p(M_φ) − k|`; `None` when κ was not supplied.
    pub distance: Option<f64>,
    pub pass: Option<bool>,
    pub notice: Option<String>,
}

/// Distance from `x` to the nearest integer.
pub fn distance_to_integer(x: f64) -> f64 {
    (x - x.round()).abs()
}

/// Mapping-torus resolution for [`flat_holonomy_check`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TorusResolution {
    pub epsilon: f64,
    pub t_nodes: usize,
    pub cutoff: Cutoff,
}

/// Compares each supplied `κ_φ` with `p(M_φ)` mod ℤ at tolerance `tol`;
/// orientation-reversing φ use `½ p(M_{φ²})`.
pub fn flat_holonomy_check(
    p: &InvariantPolynomial,
    data: &[FlatHolonomyDatum],
    g: &OrientedMetric,
    res: TorusResolution,
    tol: f64,
) -> Result<Vec<HolonomyVerdict>> {
    data.iter()
        .map(|d| {
            let number = if d.phi.orientation() == Orientation::Positive {
                pontryagin_number(p, &build_mapping_torus(g, &d.phi, res.epsilon, res.t_nodes, res.cutoff)?)?
            } else {
                0.5 * pontryagin_number(p, &double_cover(g, &d.phi, res.epsilon, res.t_nodes, res.cutoff)?)?
            };
            Ok(match d.kappa {
                Some(k) => {
                    let dist = distance_to_integer(k - number);
                    HolonomyVerdict {
                        label: d.label.clone(),
                        kappa: Some(k),
                        characteristic_number: number,
                        distance: Some(dist),
                        pass: Some(dist < tol),
                        notice: None,
                    }
                }
                None => HolonomyVerdict {
                    label: d.label.clone(),
                    kappa: None,
                    characteristic_number: number,
                    distance: None,
                    pass: None,
                    notice: Some(format!("no κ supplied for {}; skipped", d.label)),
                },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Topology;
    use crate::geometry::{isotopy_flow, lie_derivative_metric, Conformal, TrigTensor, VectorField};
    use crate::trig::{TrigSeries, TrigTerm};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    fn torus(nodes: usize) -> Arc<GridManifold> {
        GridManifold::build(3, &[nodes; 3], &[1.0; 3], Orientation::Positive, Topology::Torus).unwrap()
    }

    fn bumpy(grid: &Arc<GridManifold>, seed: u64) -> OrientedMetric {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fam = TrigTensor::random_bumpy(&mut rng, &[1.0; 3], 0.1, 1, 3);
        OrientedMetric::from_metric(MetricField::from_family(grid, Arc::new(fam)).unwrap())
    }

    fn conformal(grid: &Arc<GridManifold>) -> OrientedMetric {
        let u = TrigSeries::new(
            vec![1.0; 3],
            0.0,
            vec![TrigTerm { k: vec![1, 0, 0], cos: 0.1, sin: 0.0 }, TrigTerm { k: vec![0, 1, 1], cos: 0.0, sin: 0.05 }],
        );
        OrientedMetric::from_metric(MetricField::from_family(grid, Arc::new(Conformal::new(u))).unwrap())
    }

    fn direction(grid: &Arc<GridManifold>, scale: f64, shift: usize) -> SymTensorField {
        SymTensorField::from_fn(grid, |x, m| {
            for i in 0..3 {
                for j in 0..3 {
                    let a = (TAU * (x[0] + ((i + j + shift) % 3) as f64 * x[1])).sin();
                    let b = (TAU * (x[2] - x[(i + shift) % 3])).cos() * (1 + i * j) as f64;
                    m[i * 3 + j] = scale * (0.3 * a + 0.2 * b);
                }
            }
        })
    }

    fn zero(grid: &Arc<GridManifold>) -> MatrixFormField {
        MatrixFormField::zeros(grid, 1, 3).unwrap()
    }

    fn tr2() -> InvariantPolynomial {
        InvariantPolynomial::tr2()
    }

    #[test]
    fn zero_direction_pairs_to_zero() {
        let grid = torus(8);
        assert_eq!(sigma_pairing(&tr2(), &bumpy(&grid, 1), &SymTensorField::zeros(&grid), &zero(&grid)).unwrap(), 0.0);
    }

    #[test]
    fn pairing_is_linear() {
        let grid = torus(12);
        let g = bumpy(&grid, 1);
        let h1 = direction(&grid, 1.0, 0);
        let h2 = direction(&grid, 1.0, 1);
        let h = SymTensorField::linear_combination(&[(1.0, &h1), (-2.0, &h2)]).unwrap();
        let a0 = zero(&grid);
        let s = sigma_pairing(&tr2(), &g, &h, &a0).unwrap();
        let s1 = sigma_pairing(&tr2(), &g, &h1, &a0).unwrap();
        let s2 = sigma_pairing(&tr2(), &g, &h2, &a0).unwrap();
        assert!(s1.abs() > 1e-1);
        assert!((s - s1 + 2.0 * s2).abs() < 1e-5);
    }

    #[test]
    fn homothety_direction_pairs_to_zero() {
        let grid = torus(12);
        let g = bumpy(&grid, 2);
        let a0 = zero(&grid);
        let cs: Vec<f64> = [0.9, 1.0, 1.1]
            .iter()
            .map(|l| cs_action(&tr2(), &OrientedMetric::new(g.metric.scaled(*l).unwrap(), g.orientation), &a0).unwrap())
            .collect();
        assert!((cs[0] - cs[1]).abs() < 1e-12 && (cs[2] - cs[1]).abs() < 1e-12);
        assert!(sigma_pairing(&tr2(), &g, g.metric.tensor(), &a0).unwrap().abs() < 1e-4);
    }

    #[test]
    fn lie_derivative_directions_pair_to_zero() {
        let grid = torus(24);
        let g = bumpy(&grid, 3);
        let a0 = zero(&grid);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for amp in [0.2, 0.05] {
            let x = VectorField::random(&mut rng, &[1.0; 3], amp, 1, 2);
            let h = lie_derivative_metric(&x, &g.metric).unwrap();
            assert!(h.max_abs() > amp);
            assert!(sigma_pairing(&tr2(), &g, &h, &a0).unwrap().abs() < 1e-4);
        }
    }

    #[test]
    fn degenerate_metric_underflows_the_step() {
        let grid = torus(6);
        let g = MetricField::new(SymTensorField::from_fn(&grid, |_, m| {
            m.fill(0.0);
            m[0] = 1.0;
            m[4] = 1.0;
            m[8] = 1e-30;
        }))
        .unwrap();
        let h = SymTensorField::from_fn(&grid, |_, m| {
            m.fill(0.0);
            m[8] = 1.0;
        });
        let err = sigma_pairing(&tr2(), &OrientedMetric::from_metric(g), &h, &zero(&grid)).unwrap_err();
        assert!(matches!(err, Error::StepUnderflow));
    }

    #[test]
    fn flat_metric_has_no_cotton_tensor() {
        let grid = torus(8);
        let c = cotton_classical(&OrientedMetric::from_metric(MetricField::flat(&grid).unwrap())).unwrap();
        assert_eq!(c.max_abs(), 0.0);
    }

    #[test]
    fn cotton_needs_three_dimensions() {
        let grid = GridManifold::build(2, &[8, 8], &[1.0; 2], Orientation::Positive, Topology::Torus).unwrap();
        let g = OrientedMetric::from_metric(MetricField::flat(&grid).unwrap());
        assert!(matches!(cotton_classical(&g), Err(Error::Dimension(_))));
    }

    #[test]
    fn conformally_flat_metric_pairs_to_zero_both_ways() {
        let grid = torus(16);
        let g = conformal(&grid);
        let h = direction(&grid, 1.0, 0);
        let c = cotton_classical(&g).unwrap();
        assert!(cotton_pairing(&c, &h).abs() < 1e-4);
        assert!(sigma_pairing(&tr2(), &g, &h, &zero(&grid)).unwrap().abs() < 1e-4);
    }

    #[test]
    fn cotton_formula_matches_the_variation() {
        let grid = torus(24);
        let g = bumpy(&grid, 1);
        let h = direction(&grid, 1.0, 2);
        let classical = cotton_pairing(&cotton_classical(&g).unwrap(), &h);
        let variational = COTTON_NORMALIZATION * sigma_pairing(&tr2(), &g, &h, &zero(&grid)).unwrap();
        assert!(classical.abs() > 1e-1);
        assert!(((classical - variational) / variational).abs() < 1e-3, "{classical} vs {variational}");
    }

    #[test]
    fn cotton_density_is_traceless_and_conserved() {
        let measure = |nodes: usize| {
            let grid = torus(nodes);
            let g = bumpy(&grid, 2);
            let c = cotton_classical(&g).unwrap();
            let (tr, div) = cotton_trace_and_divergence(&g.metric, &c).unwrap();
            (tr, div, c.max_abs())
        };
        let (t16, d16, _) = measure(16);
        let (t32, d32, size) = measure(32);
        assert!(t16 / t32 > 10.0 && d16 / d32 > 10.0, "{t16:e}/{t32:e}, {d16:e}/{d32:e}");
        assert!(t32 < 5e-4 * size && d32 < 1e-2 * size);
    }

    #[test]
    fn constant_path_integrates_to_zero() {
        let grid = torus(8);
        let g = bumpy(&grid, 1);
        let path = MetricPath::from_samples(vec![g.metric.clone(); 6], g.orientation).unwrap();
        assert!(path.velocities().unwrap().iter().all(|v| v.max_abs() == 0.0));
        assert_eq!(path_integral_sigma(&tr2(), &path, &zero(&grid)).unwrap(), 0.0);
    }

    #[test]
    fn paths_need_three_samples() {
        let grid = torus(6);
        let g = bumpy(&grid, 1);
        assert!(MetricPath::from_samples(vec![g.metric.clone(); 2], g.orientation).is_err());
        let short = MetricPath::from_samples(vec![g.metric.clone(); 3], g.orientation).unwrap();
        assert_eq!(short.velocities().unwrap().len(), 3);
    }

    #[test]
    fn free_path_integrates_to_the_action_difference() {
        let grid = torus(12);
        let g0 = bumpy(&grid, 1);
        let g1 = bumpy(&grid, 2);
        let a0 = zero(&grid);
        let path = MetricPath::interpolating(&g0, &g1.metric, 17, None, |s| s).unwrap();
        assert!(path.endpoint().is_none());
        let lhs = path_integral_sigma(&tr2(), &path, &a0).unwrap();
        let rhs = cs_action(&tr2(), &g1, &a0).unwrap() - cs_action(&tr2(), &g0, &a0).unwrap();
        assert!((lhs - rhs).abs() < 1e-4, "{lhs:e} vs {rhs:e}");
    }

    #[test]
    fn class_paths_end_at_the_transformed_metric() {
        let grid = torus(8);
        let g = bumpy(&grid, 1);
        let shear = Diffeomorphism::affine(vec![1, 1, 0, 0, 1, 0, 0, 0, 1], vec![0.0; 3], vec![1.0; 3]).unwrap();
        let path = MetricPath::in_class(&g, &shear, 5, None, |s| s).unwrap();
        assert_eq!(path.endpoint_residual().unwrap(), Some(0.0));
        let flip = Diffeomorphism::affine(vec![-1, 0, 0, 0, 1, 0, 0, 0, 1], vec![0.0; 3], vec![1.0; 3]).unwrap();
        assert!(matches!(MetricPath::in_class(&g, &flip, 5, None, |s| s), Err(Error::Orientation(_))));
    }

    #[test]
    fn integer_distance() {
        assert_eq!(distance_to_integer(2.25), 0.25);
        assert_eq!(distance_to_integer(-0.75), 0.25);
        assert_eq!(distance_to_integer(0.5), 0.5);
        assert_eq!(distance_to_integer(3.0), 0.0);
    }

    #[test]
    fn holonomy_verdicts() {
        let grid = torus(8);
        let g = OrientedMetric::from_metric(MetricField::flat(&grid).unwrap());
        let p = InvariantPolynomial::p1();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let flow = isotopy_flow(&VectorField::random(&mut rng, &[1.0; 3], 0.02, 1, 2), 0.5, 12).unwrap();
        let shear = Diffeomorphism::affine(vec![1, 1, 0, 0, 1, 0, 0, 0, 1], vec![0.0; 3], vec![1.0; 3]).unwrap();
        let data = vec![
            FlatHolonomyDatum { label: "flow".into(), phi: flow, kappa: Some(0.0) },
            FlatHolonomyDatum { label: "shear".into(), phi: shear.clone(), kappa: Some(0.5) },
            FlatHolonomyDatum { label: "shear, integer shift".into(), phi: shear.clone(), kappa: Some(-3.0) },
            FlatHolonomyDatum { label: "unknown".into(), phi: shear, kappa: None },
        ];
        let res = TorusResolution { epsilon: 0.2, t_nodes: 21, cutoff: Cutoff::QuinticSmoothstep };
        let v = flat_holonomy_check(&p, &data, &g, res, 1e-3).unwrap();
        assert_eq!(v[0].pass, Some(true));
        assert!(v[0].distance.unwrap() < 1e-4);
        assert_eq!(v[1].pass, Some(false));
        assert!((v[1].distance.unwrap() - 0.5).abs() < 1e-4);
        assert_eq!(v[2].pass, Some(true));
        assert_eq!(v[3].pass, None);
        assert!(v[3].notice.as_deref().unwrap().contains("skipped"));
    }

    #[test]
    fn injected_holonomy_passes() {
        let grid = torus(8);
        let g = bumpy(&grid, 4);
        let p = InvariantPolynomial::p1();
        let shear = Diffeomorphism::affine(vec![1, 0, 0, 0, 1, 1, 0, 0, 1], vec![0.1, 0.0, 0.0], vec![1.0; 3]).unwrap();
        let res = TorusResolution { epsilon: 0.2, t_nodes: 21, cutoff: Cutoff::CosineRamp };
        let probe = FlatHolonomyDatum { label: "probe".into(), phi: shear, kappa: None };
        let number = flat_holonomy_check(&p, &[probe.clone()], &g, res, 1e-3).unwrap()[0].characteristic_number;
        assert!(number != 0.0);
        let v = flat_holonomy_check(&p, &[FlatHolonomyDatum { kappa: Some(number + 2.0), ..probe }], &g, res, 1e-3).unwrap();
        assert_eq!(v[0].pass, Some(true));
        assert!(v[0].distance.unwrap() < 1e-12);
    }
}
