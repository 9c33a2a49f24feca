//! Metrics, Levi-Civita connections, curvature and the action of torus
//! diffeomorphisms on metrics.
//!
//! Connections are matrix-valued 1-forms in the coordinate frame:
//! `ω^k_l = Γ^k_{il} dxⁱ`. Curvature is stored on the basis `dxⁱ∧dxʲ`
//! (`i < j`) with coefficient `F_{ij} = ∂ᵢA_j − ∂ⱼA_i + [A_i, A_j]`, so for
//! a Levi-Civita connection `F_{ij}{}^k{}_l = R^k{}_{lij}`.

pub mod diffeo;
pub mod families;
pub mod metric;

use std::sync::Arc;

use rand::Rng;

pub use diffeo::{Diffeomorphism, ElementaryMap, Jet, JACOBIAN_BOUND};
pub use families::{
    packed_index, Conformal, FamilyRef, LieDerivative, LinearCombination, Pullback, SymTensorFamily, TrigTensor,
    VectorField,
};
pub use metric::{MetricField, OrientedMetric, SymTensorField};

use crate::error::{Error, Result};
use crate::fields::{GridManifold, MatrixFormField, Orientation, Topology};
use crate::linalg;
use crate::trig::{TrigSeries, TrigTerm};

/// Levi-Civita connection of `g` as a rank-n matrix 1-form.
pub fn levi_civita(g: &MetricField) -> Result<MatrixFormField> {
    let grid = g.grid();
    let n = g.dim();
    let grads = g.tensor().gradients();
    let mut out = MatrixFormField::zeros(grid, 1, n)?;
    let block = out.block();
    let data = out.data_mut();
    for node in 0..grid.num_nodes() {
        let gm = g.tensor().matrix(node);
        let ginv = linalg::invert(n, &gm)
            .ok_or_else(|| Error::NotPositiveDefinite { node, coords: grid.coords(node) })?;
        let dg = &grads[node * n * n * n..(node + 1) * n * n * n];
        let dgf = |k: usize, i: usize, j: usize| dg[(k * n + i) * n + j];
        // lowered symbols Γ_{l,ij}
        let mut low = vec![0.0; n * n * n];
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    low[(l * n + i) * n + j] = 0.5 * (dgf(i, j, l) + dgf(j, i, l) - dgf(l, i, j));
                }
            }
        }
        let dst = &mut data[node * block..(node + 1) * block];
        for i in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut s = 0.0;
                    for m in 0..n {
                        s += ginv[k * n + m] * low[(m * n + i) * n + l];
                    }
                    dst[i * n * n + k * n + l] = s;
                }
            }
        }
    }
    Ok(out)
}

/// `F = dA + A∧A`.
pub fn curvature(a: &MatrixFormField) -> Result<MatrixFormField> {
    if a.degree() != 1 {
        return Err(Error::Shape(format!("connection must be a 1-form, got degree {}", a.degree())));
    }
    a.exterior_derivative()?.add(&a.wedge(a)?)
}

/// Largest nodal entry of `dF + A∧F − F∧A`.
pub fn bianchi_residual(a: &MatrixFormField, f: &MatrixFormField) -> Result<f64> {
    let r = MatrixFormField::linear_combination(&[
        (1.0, &f.exterior_derivative()?),
        (1.0, &a.wedge(f)?),
        (-1.0, &f.wedge(a)?),
    ])?;
    Ok(r.max_abs())
}

/// `φ·(g, 𝔬) = ((φ⁻¹)*g, φ_*𝔬)`.
///
/// The pulled-back metric is evaluated exactly through the generator of `g`
/// (the trigonometric interpolant when `g` has none), so no resampling error
/// enters beyond that of the interpolant.
pub fn apply_diffeo(phi: &Diffeomorphism, g: &OrientedMetric) -> Result<OrientedMetric> {
    check_torus(phi, g.metric.grid())?;
    let orientation = g.orientation * phi.orientation();
    if phi.is_identity() {
        return Ok(OrientedMetric::new(g.metric.clone(), orientation));
    }
    let tensor = pullback_tensor(phi, g.metric.tensor())?;
    Ok(OrientedMetric::new(MetricField::new(tensor)?, orientation))
}

/// `(φ⁻¹)*T` for a symmetric tensor field.
pub fn pullback_tensor(phi: &Diffeomorphism, t: &SymTensorField) -> Result<SymTensorField> {
    check_torus(phi, t.grid())?;
    if phi.is_identity() {
        return Ok(t.clone());
    }
    let family: FamilyRef = Arc::new(Pullback::new(phi.clone(), t.generator()?));
    SymTensorField::from_family(t.grid(), family)
}

fn check_torus(phi: &Diffeomorphism, grid: &GridManifold) -> Result<()> {
    if !grid.is_closed() {
        return Err(Error::Shape("diffeomorphisms act on periodic grids only".into()));
    }
    if phi.dim() != grid.dim() || phi.periods() != grid.periods().as_slice() {
        return Err(Error::Dimension(format!(
            "diffeomorphism of a {}-torus applied on a {}-dimensional grid with other periods",
            phi.dim(),
            grid.dim()
        )));
    }
    Ok(())
}

/// `(L_X g)ᵢⱼ = Xᵏ∂ₖgᵢⱼ + gₖⱼ∂ᵢXᵏ + gᵢₖ∂ⱼXᵏ`.
///
/// Keeps a closed-form generator when `g` can supply second derivatives, so
/// the result can itself be differentiated exactly.
pub fn lie_derivative_metric(x: &VectorField, g: &MetricField) -> Result<SymTensorField> {
    let grid = g.grid();
    let n = g.dim();
    if x.dim() != n {
        return Err(Error::Dimension(format!("{}-component field on a {n}-manifold", x.dim())));
    }
    if let Some(family) = g.tensor().family() {
        if let Some(lie) = LieDerivative::new(x.clone(), family.clone()) {
            return SymTensorField::from_family(grid, Arc::new(lie));
        }
    }
    let grads = g.tensor().gradients();
    let mut node = 0;
    let out = SymTensorField::from_fn(grid, |p, m| {
        let gm = g.tensor().matrix(node);
        let dg = &grads[node * n * n * n..(node + 1) * n * n * n];
        let (xv, dx) = x.value_jacobian(p);
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += xv[k] * dg[(k * n + i) * n + j]
                        + gm[k * n + j] * dx[k * n + i]
                        + gm[i * n + k] * dx[k * n + j];
                }
                m[i * n + j] = s;
            }
        }
        node += 1;
    });
    Ok(out)
}

/// Time-`t` flow of `X`, integrated by classical RK4 along the trajectory of
/// every node of a `resolution`ⁿ grid and re-expressed as `y ↦ y + f(y)`
/// with `f` the trigonometric interpolant of the displacement.
pub fn isotopy_flow(x: &VectorField, t: f64, resolution: usize) -> Result<Diffeomorphism> {
    let periods = x.periods().to_vec();
    let n = x.dim();
    if t == 0.0 {
        return Ok(Diffeomorphism::identity(periods));
    }
    if x.is_constant() {
        let v = x.value(&vec![0.0; n]);
        return Diffeomorphism::translation(v.iter().map(|c| t * c).collect(), periods);
    }
    let grid = GridManifold::build(n, &vec![resolution; n], &periods, Orientation::Positive, Topology::Torus)?;
    let steps = ((128.0 * t.abs()).ceil() as usize).max(8);
    let h = t / steps as f64;
    let mut disp = vec![vec![0.0; grid.num_nodes()]; n];
    let mut y = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    for node in 0..grid.num_nodes() {
        grid.coords_into(node, &mut y);
        let y0 = y.clone();
        for _ in 0..steps {
            let k1 = x.value(&y);
            for i in 0..n {
                tmp[i] = y[i] + 0.5 * h * k1[i];
            }
            let k2 = x.value(&tmp);
            for i in 0..n {
                tmp[i] = y[i] + 0.5 * h * k2[i];
            }
            let k3 = x.value(&tmp);
            for i in 0..n {
                tmp[i] = y[i] + h * k3[i];
            }
            let k4 = x.value(&tmp);
            for i in 0..n {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        for i in 0..n {
            disp[i][node] = y[i] - y0[i];
        }
    }
    let f: Vec<TrigSeries> = disp.iter().map(|d| TrigSeries::interpolate(&grid, d)).collect();
    let identity: Vec<i64> = (0..n * n).map(|k| i64::from(k / n == k % n)).collect();
    Diffeomorphism::new(identity, vec![0.0; n], Some(f), periods).map_err(|e| match e {
        Error::InvalidDiffeomorphism(msg) => Error::InvalidDiffeomorphism(format!(
            "flow leaves the admissible class ({msg}); use a smaller vector field or time"
        )),
        other => other,
    })
}

/// Random smooth gl(n)-valued 1-form with entries bounded by `amplitude`;
/// `max_mode = 0` gives a constant connection.
pub fn random_connection(
    rng: &mut impl Rng,
    grid: &Arc<GridManifold>,
    amplitude: f64,
    max_mode: i32,
    terms: usize,
) -> Result<MatrixFormField> {
    let n = grid.dim();
    let periods = grid.periods();
    let series: Vec<TrigSeries> = (0..n * n * n)
        .map(|_| {
            let c = rng.gen_range(-1.0..1.0);
            let ts: Vec<TrigTerm> = if max_mode == 0 {
                Vec::new()
            } else {
                (0..terms)
                    .map(|_| {
                        let k = loop {
                            let k: Vec<i32> = (0..n).map(|_| rng.gen_range(-max_mode..=max_mode)).collect();
                            if k.iter().any(|&v| v != 0) {
                                break k;
                            }
                        };
                        TrigTerm { k, cos: rng.gen_range(-1.0..1.0), sin: rng.gen_range(-1.0..1.0) }
                    })
                    .collect()
            };
            let s = TrigSeries::new(periods.clone(), c, ts);
            let amp = s.amplitude_bound();
            s.scaled(if amp > 0.0 { amplitude / amp } else { 0.0 })
        })
        .collect();
    MatrixFormField::from_fn(grid, 1, n, |p, out| {
        for (o, s) in out.iter_mut().zip(&series) {
            *o = s.value(p);
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn torus(n: usize) -> Arc<GridManifold> {
        GridManifold::build(3, &[n; 3], &[1.0; 3], Orientation::Positive, Topology::Torus).unwrap()
    }

    fn bump() -> TrigSeries {
        TrigSeries::new(
            vec![1.0; 3],
            0.0,
            vec![
                TrigTerm { k: vec![1, 0, 0], cos: 0.1, sin: 0.0 },
                TrigTerm { k: vec![0, 1, 1], cos: 0.0, sin: 0.05 },
            ],
        )
    }

    fn conformal(grid: &Arc<GridManifold>) -> MetricField {
        MetricField::from_family(grid, Arc::new(Conformal::new(bump()))).unwrap()
    }

    fn bumpy(grid: &Arc<GridManifold>, seed: u64) -> MetricField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        MetricField::from_family(grid, Arc::new(TrigTensor::random_bumpy(&mut rng, &[1.0; 3], 0.1, 1, 3))).unwrap()
    }

    // Γ^k_ij = δ^k_i ∂ⱼu + δ^k_j ∂ᵢu − δᵢⱼ ∂ₖu for g = e^{2u}δ
    fn conformal_gamma(u: &TrigSeries, x: &[f64]) -> Vec<f64> {
        let mut du = [0.0; 3];
        u.value_grad(x, &mut du);
        let mut g = vec![0.0; 27];
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    let d = |a: usize, b: usize| f64::from(u8::from(a == b));
                    g[(k * 3 + i) * 3 + j] = d(k, i) * du[j] + d(k, j) * du[i] - d(i, j) * du[k];
                }
            }
        }
        g
    }

    #[test]
    fn flat_connection_vanishes() {
        let g = MetricField::flat(&torus(8)).unwrap();
        let a = levi_civita(&g).unwrap();
        assert_eq!(a.max_abs(), 0.0);
        assert_eq!(curvature(&a).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn conformal_christoffels() {
        let grid = torus(12);
        let a = levi_civita(&conformal(&grid)).unwrap();
        let u = bump();
        let mut err: f64 = 0.0;
        for node in 0..grid.num_nodes() {
            let gam = conformal_gamma(&u, &grid.coords(node));
            for i in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        err = err.max((a.entry(node, i, k, l) - gam[(k * 3 + i) * 3 + l]).abs());
                    }
                }
            }
        }
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn product_metric_gives_block_connection() {
        let grid = torus(8);
        let p = vec![1.0; 3];
        let w = |k: Vec<i32>| TrigSeries::new(p.clone(), 1.0, vec![TrigTerm { k, cos: 0.1, sin: 0.0 }]);
        let z = TrigSeries::constant(p.clone(), 0.0);
        let off = TrigSeries::new(p.clone(), 0.0, vec![TrigTerm { k: vec![1, 1, 0], cos: 0.05, sin: 0.0 }]);
        // packed order: 00 01 02 11 12 22
        let fam = TrigTensor::new(3, vec![w(vec![1, 0, 0]), off, z.clone(), w(vec![0, 1, 0]), z, w(vec![0, 0, 1])]);
        let a = levi_civita(&MetricField::from_family(&grid, Arc::new(fam)).unwrap()).unwrap();
        for node in 0..grid.num_nodes() {
            for k in 0..3 {
                for l in 0..3 {
                    let mixed = (k == 2) != (l == 2);
                    if mixed {
                        assert_eq!(a.entry(node, 0, k, l), 0.0);
                        assert_eq!(a.entry(node, 1, k, l), 0.0);
                    }
                }
            }
            assert_eq!(a.entry(node, 2, 0, 1), 0.0);
        }
    }

    #[test]
    fn homothety_leaves_connection_unchanged() {
        let g = bumpy(&torus(8), 3);
        let a = levi_civita(&g).unwrap();
        assert_eq!(levi_civita(&g.scaled(2.0).unwrap()).unwrap().data(), a.data());
        let b = levi_civita(&g.scaled(1.7).unwrap()).unwrap();
        assert!(b.sub(&a).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn conformal_curvature_matches_riemann_formula() {
        let grid = torus(32);
        let a = levi_civita(&conformal(&grid)).unwrap();
        let f = curvature(&a).unwrap();
        let u = bump();
        let mut err: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for node in 0..grid.num_nodes() {
            let x = grid.coords(node);
            let gam = conformal_gamma(&u, &x);
            let mut h = [0.0; 9];
            u.hessian(&x, &mut h);
            let d = |a: usize, b: usize| f64::from(u8::from(a == b));
            // ∂ₘΓ^k_ij
            let dgam = |m: usize, k: usize, i: usize, j: usize| d(k, i) * h[j * 3 + m] + d(k, j) * h[i * 3 + m] - d(i, j) * h[k * 3 + m];
            let g = |k: usize, i: usize, j: usize| gam[(k * 3 + i) * 3 + j];
            for (c, (i, j)) in [(0, 1), (0, 2), (1, 2)].into_iter().enumerate() {
                for k in 0..3 {
                    for l in 0..3 {
                        let mut r = dgam(i, k, j, l) - dgam(j, k, i, l);
                        for m in 0..3 {
                            r += g(k, i, m) * g(m, j, l) - g(k, j, m) * g(m, i, l);
                        }
                        scale = scale.max(r.abs());
                        err = err.max((f.entry(node, c, k, l) - r).abs());
                    }
                }
            }
        }
        assert!(err / scale < 1e-4, "{}", err / scale);
    }

    #[test]
    fn bianchi_identity_holds() {
        let residual = |n: usize, scale: f64| {
            let grid = torus(n);
            let g = MetricField::from_family(&grid, Arc::new(Conformal::new(bump().scaled(scale)))).unwrap();
            let a = levi_civita(&g).unwrap();
            bianchi_residual(&a, &curvature(&a).unwrap()).unwrap()
        };
        let (coarse, fine) = (residual(16, 1.0), residual(32, 1.0));
        assert!(coarse / fine > 14.0, "{coarse:e} {fine:e}");
        let weak = residual(48, 0.15);
        assert!(weak < 1e-5, "{weak:e}");
    }

    #[test]
    fn identity_and_translation_act_trivially() {
        let grid = torus(8);
        let g = OrientedMetric::from_metric(bumpy(&grid, 1));
        let id = Diffeomorphism::identity(vec![1.0; 3]);
        let same = apply_diffeo(&id, &g).unwrap();
        assert_eq!(same.metric.tensor().packed(), g.metric.tensor().packed());
        let flat = OrientedMetric::from_metric(MetricField::flat(&grid).unwrap());
        let tr = Diffeomorphism::translation(vec![0.3, 0.1, 0.7], vec![1.0; 3]).unwrap();
        let moved = apply_diffeo(&tr, &flat).unwrap();
        assert_eq!(moved.metric.tensor().packed(), flat.metric.tensor().packed());
    }

    #[test]
    fn rotation_pullback_matches_analytic_composition() {
        let grid = torus(10);
        let g = OrientedMetric::from_metric(conformal(&grid));
        let b = vec![0, -1, 0, 1, 0, 0, 0, 0, 1];
        let phi = Diffeomorphism::affine(b, vec![0.2, 0.0, 0.1], vec![1.0; 3]).unwrap();
        let moved = apply_diffeo(&phi, &g).unwrap();
        // φ⁻¹(x) = B⁻¹(x − c), Dφ⁻¹ = B⁻¹ orthogonal: (φ·g)(x) = e^{2u(φ⁻¹x)}δ
        let u = bump();
        let mut err: f64 = 0.0;
        for node in 0..grid.num_nodes() {
            let x = grid.coords(node);
            let y = [x[1], -(x[0] - 0.2), x[2] - 0.1];
            let e = (2.0 * u.value(&y)).exp();
            for i in 0..3 {
                for j in 0..3 {
                    let want = if i == j { e } else { 0.0 };
                    err = err.max((moved.metric.tensor().get(node, i, j) - want).abs());
                }
            }
        }
        assert!(err < 1e-12, "{err}");
        assert_eq!(moved.orientation, Orientation::Positive);
    }

    #[test]
    fn action_is_a_left_action() {
        let grid = torus(10);
        let g = OrientedMetric::from_metric(MetricField::new(bumpy(&grid, 7).tensor().nodal_only()).unwrap());
        let p = vec![1.0; 3];
        let f = vec![
            TrigSeries::new(p.clone(), 0.0, vec![TrigTerm { k: vec![0, 1, 0], cos: 0.02, sin: 0.0 }]),
            TrigSeries::constant(p.clone(), 0.0),
            TrigSeries::new(p.clone(), 0.0, vec![TrigTerm { k: vec![1, 0, 0], cos: 0.0, sin: 0.03 }]),
        ];
        let phi1 = Diffeomorphism::new(vec![1, 1, 0, 0, 1, 0, 0, 0, 1], vec![0.0; 3], Some(f), p.clone()).unwrap();
        let phi2 = Diffeomorphism::affine(vec![-1, 0, 0, 0, 1, 0, 0, 0, 1], vec![0.1, 0.0, 0.0], p).unwrap();
        let two_step = apply_diffeo(&phi2, &apply_diffeo(&phi1, &g).unwrap()).unwrap();
        let direct = apply_diffeo(&phi2.after(&phi1).unwrap(), &g).unwrap();
        let diff = SymTensorField::linear_combination(&[
            (1.0, two_step.metric.tensor()),
            (-1.0, direct.metric.tensor()),
        ])
        .unwrap();
        assert!(diff.max_abs() < 1e-5, "{}", diff.max_abs());
        assert_eq!(two_step.orientation, Orientation::Negative);
        assert_eq!(direct.orientation, Orientation::Negative);
    }

    #[test]
    fn killing_field_has_zero_lie_derivative() {
        let g = MetricField::flat(&torus(8)).unwrap();
        let x = VectorField::constant(&[1.0; 3], &[0.3, -0.2, 0.5]);
        assert_eq!(lie_derivative_metric(&x, &g).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn lie_derivative_is_linear_and_matches_flow() {
        let grid = torus(12);
        let g = bumpy(&grid, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = VectorField::random(&mut rng, &[1.0; 3], 0.05, 1, 2);
        let y = VectorField::random(&mut rng, &[1.0; 3], 0.05, 1, 2);
        let lx = lie_derivative_metric(&x, &g).unwrap();
        let ly = lie_derivative_metric(&y, &g).unwrap();
        let lxy = lie_derivative_metric(&x.scaled(2.0).plus(&y), &g).unwrap();
        let lin = SymTensorField::linear_combination(&[(1.0, &lxy), (-2.0, &lx), (-1.0, &ly)]).unwrap();
        assert!(lin.max_abs() < 1e-15 * 10.0 * lx.max_abs().max(1.0), "{}", lin.max_abs());

        // nodal route agrees with the closed form
        let nodal = lie_derivative_metric(&x, &MetricField::new(g.tensor().nodal_only()).unwrap()).unwrap();
        let d = SymTensorField::linear_combination(&[(1.0, &nodal), (-1.0, &lx)]).unwrap();
        assert!(d.max_abs() < 1e-3 * lx.max_abs(), "{}", d.max_abs());

        let t = 1e-3;
        let go = OrientedMetric::from_metric(g.clone());
        let fwd = apply_diffeo(&isotopy_flow(&x, t, 16).unwrap(), &go).unwrap();
        let bwd = apply_diffeo(&isotopy_flow(&x, -t, 16).unwrap(), &go).unwrap();
        let fd = SymTensorField::linear_combination(&[
            (0.5 / t, fwd.metric.tensor()),
            (-0.5 / t, bwd.metric.tensor()),
            (1.0, &lx),
        ])
        .unwrap();
        assert!(fd.max_abs() < 1e-5, "{}", fd.max_abs());
    }

    #[test]
    fn flow_is_a_one_parameter_group() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = VectorField::random(&mut rng, &[1.0; 3], 0.02, 1, 2);
        assert!(isotopy_flow(&x, 0.0, 16).unwrap().is_identity());
        let a = isotopy_flow(&x, 0.3, 16).unwrap();
        let b = isotopy_flow(&x, 0.5, 16).unwrap();
        let ab = isotopy_flow(&x, 0.8, 16).unwrap();
        let comp = b.after(&a).unwrap();
        assert!(ab.in_identity_component());
        for p in [[0.1, 0.2, 0.3], [0.9, 0.5, 0.05], [0.4, 0.77, 0.6]] {
            let u = comp.apply(&p);
            let v = ab.apply(&p);
            for i in 0..3 {
                assert!((u[i] - v[i]).abs() < 1e-6, "{}", (u[i] - v[i]).abs());
            }
        }
        let c = VectorField::constant(&[1.0; 3], &[0.5, 0.0, -0.25]);
        let tr = isotopy_flow(&c, 0.4, 8).unwrap();
        assert_eq!(tr.apply(&[0.0, 0.0, 0.0]), vec![0.2, 0.0, -0.1]);
    }

    #[test]
    fn oversized_flow_is_rejected() {
        let p = vec![1.0; 3];
        let big = TrigSeries::new(p.clone(), 0.0, vec![TrigTerm { k: vec![0, 1, 0], cos: 0.5, sin: 0.0 }]);
        let z = TrigSeries::constant(p.clone(), 0.0);
        let x = VectorField::new(vec![big, z.clone(), z]);
        let err = isotopy_flow(&x, 1.0, 12).unwrap_err();
        assert!(err.to_string().contains("smaller"), "{err}");
    }

    #[test]
    fn levi_civita_is_natural() {
        // ω^{φ·g} = ψ*ω^g in the sense Γ' = J⁻¹ (Γ∘ψ) J + J⁻¹ dJ with J = Dψ
        let grid = torus(16);
        let g = OrientedMetric::from_metric(conformal(&grid));
        let p = vec![1.0; 3];
        let f = vec![
            TrigSeries::new(p.clone(), 0.0, vec![TrigTerm { k: vec![0, 0, 1], cos: 0.02, sin: 0.0 }]),
            TrigSeries::constant(p.clone(), 0.0),
            TrigSeries::constant(p.clone(), 0.0),
        ];
        let phi = Diffeomorphism::new(vec![1, 0, 0, 1, 1, 0, 0, 0, 1], vec![0.0; 3], Some(f), p).unwrap();
        let moved = apply_diffeo(&phi, &g).unwrap();
        let a = levi_civita(&moved.metric).unwrap();
        let u = bump();
        let mut err: f64 = 0.0;
        for node in 0..grid.num_nodes() {
            let jet = phi.inverse_jet(&grid.coords(node)).unwrap();
            let gam = conformal_gamma(&u, &jet.value);
            let j = &jet.first;
            let jinv = linalg::invert(3, j).unwrap();
            for i in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        // Γ'^k_{il} = (J⁻¹)^k_a (Γ^a_{bc} J^b_i J^c_l + ∂ᵢJ^a_l)
                        let mut s = 0.0;
                        for a_ in 0..3 {
                            let mut inner = jet.second[(a_ * 3 + l) * 3 + i];
                            for b in 0..3 {
                                for c in 0..3 {
                                    inner += gam[(a_ * 3 + b) * 3 + c] * j[b * 3 + i] * j[c * 3 + l];
                                }
                            }
                            s += jinv[k * 3 + a_] * inner;
                        }
                        err = err.max((a.entry(node, i, k, l) - s).abs());
                    }
                }
            }
        }
        assert!(err < 1e-4, "{err}");
    }
}
