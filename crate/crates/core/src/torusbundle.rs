//! Mapping tori `M_φ = M×[0,1]/(x,0)∼(φ(x),1)` of torus diffeomorphisms,
//! interpolated Levi-Civita connections on the fundamental domain and the
//! characteristic numbers `∫ p(F̄)`.
//!
//! The 4-d grid has the interval coordinate `t` as its last axis. The
//! fundamental domain is oriented by `dt ∧ vol_M`; in grid coordinates that
//! is the opposite of the coordinate orientation of `dx¹⋯dxⁿ∧dt` when `n` is
//! odd, and the grid carries the corresponding sign.

use std::f64::consts::PI;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::charclass::{chern_weil, polarized_with_one, InvariantPolynomial};
use crate::error::{Error, Result};
use crate::fields::{pairwise_sum, partial_derivative_raw, Axis, GridManifold, MatrixFormField, Orientation};
use crate::geometry::{apply_diffeo, curvature, levi_civita, Diffeomorphism, OrientedMetric};

/// Smooth step `χ` with `χ = 0` on `[0, ε]` and `χ = 1` on `[1−ε, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cutoff {
    /// `6s⁵ − 15s⁴ + 10s³`, C² at the ends.
    QuinticSmoothstep,
    /// `½(1 − cos πs)`, C¹ at the ends.
    CosineRamp,
}

impl Cutoff {
    pub fn value(self, t: f64, eps: f64) -> f64 {
        let s = ((t - eps) / (1.0 - 2.0 * eps)).clamp(0.0, 1.0);
        match self {
            Cutoff::QuinticSmoothstep => s * s * s * (s * (6.0 * s - 15.0) + 10.0),
            Cutoff::CosineRamp => 0.5 * (1.0 - (PI * s).cos()),
        }
    }

    pub fn derivative(self, t: f64, eps: f64) -> f64 {
        let w = 1.0 - 2.0 * eps;
        let s = (t - eps) / w;
        if !(0.0..=1.0).contains(&s) {
            return 0.0;
        }
        match self {
            Cutoff::QuinticSmoothstep => 30.0 * s * s * (s - 1.0) * (s - 1.0) / w,
            Cutoff::CosineRamp => 0.5 * PI * (PI * s).sin() / w,
        }
    }
}

/// Interpolated connection `ω̄ = (1−χ(t)) ω^g + χ(t) ω^{φ·g}` on `M×[0,1]`,
/// without `dt` components.
#[derive(Clone, Debug)]
pub struct MappingTorus {
    grid: Arc<GridManifold>,
    base: Arc<GridManifold>,
    phi: Diffeomorphism,
    metric: OrientedMetric,
    omega0: MatrixFormField,
    omega1: MatrixFormField,
    cutoff: Cutoff,
    epsilon: f64,
}

impl MappingTorus {
    pub fn grid(&self) -> &Arc<GridManifold> {
        &self.grid
    }

    pub fn base(&self) -> &Arc<GridManifold> {
        &self.base
    }

    pub fn glue(&self) -> &Diffeomorphism {
        &self.phi
    }

    pub fn metric(&self) -> &OrientedMetric {
        &self.metric
    }

    pub fn cutoff(&self) -> Cutoff {
        self.cutoff
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `ω^g` and `ω^{φ·g}`.
    pub fn end_connections(&self) -> (&MatrixFormField, &MatrixFormField) {
        (&self.omega0, &self.omega1)
    }

    fn t_axis(&self) -> Axis {
        *self.grid.axis(self.grid.dim() - 1)
    }

    /// `χ` at the interval nodes.
    pub fn chi_samples(&self) -> Vec<f64> {
        let ax = self.t_axis();
        (0..ax.nodes).map(|j| self.cutoff.value(ax.coord(j), self.epsilon)).collect()
    }

    /// `∂ₜχ` by the interval stencil, i.e. exactly what the 4-d grid derivative
    /// of the separable field `ω̄` produces.
    pub fn chi_stencil_derivative(&self) -> Result<Vec<f64>> {
        let line = GridManifold::from_axes(vec![self.t_axis()], Orientation::Positive)?;
        Ok(partial_derivative_raw(&line, &self.chi_samples(), 1, 0))
    }

    /// `ω̄` on the 3-d slice `t = t_j`.
    pub fn connection_slice(&self, j: usize) -> Result<MatrixFormField> {
        let chi = self.chi_samples()[j];
        if chi == 0.0 {
            return Ok(self.omega0.clone());
        }
        if chi == 1.0 {
            return Ok(self.omega1.clone());
        }
        MatrixFormField::linear_combination(&[(1.0, &self.omega0), (chi, &self.omega1.sub(&self.omega0)?)])
    }

    /// `ω̄` as a 4-d matrix 1-form. Memory grows with the full 4-d node
    /// count; intended for small grids.
    pub fn connection_field(&self) -> Result<MatrixFormField> {
        let n = self.base.dim();
        let m = self.omega0.rank();
        let chi = self.chi_samples();
        let nt = chi.len();
        let mut out = MatrixFormField::zeros(&self.grid, 1, m)?;
        let block4 = out.block();
        let block3 = self.omega0.block();
        let data = out.data_mut();
        for x in 0..self.base.num_nodes() {
            let w0 = self.omega0.at(x);
            let w1 = self.omega1.at(x);
            for (j, c) in chi.iter().enumerate() {
                let dst = &mut data[(x * nt + j) * block4..(x * nt + j + 1) * block4];
                // spatial components keep their order; the dt component (last) stays zero
                for (i, d) in dst[..n * m * m].iter_mut().enumerate() {
                    *d = if *c == 0.0 {
                        w0[i]
                    } else if *c == 1.0 {
                        w1[i]
                    } else {
                        w0[i] + c * (w1[i] - w0[i])
                    };
                }
                debug_assert_eq!(block3, n * m * m);
            }
        }
        Ok(out)
    }

    /// `∫_{M×I} p(F̄)` through the fully materialized 4-d fields.
    pub fn pontryagin_number_dense(&self, p: &InvariantPolynomial) -> Result<f64> {
        self.check_integrable(p)?;
        let omega = self.connection_field()?;
        let f = curvature(&omega)?;
        chern_weil(p, &f)?.integrate_top()
    }

    fn check_integrable(&self, p: &InvariantPolynomial) -> Result<()> {
        if self.phi.orientation() == Orientation::Negative {
            return Err(Error::MappingTorus(
                "the mapping torus of an orientation-reversing map is unorientable; integrate over double_cover".into(),
            ));
        }
        if 2 * p.degree() != self.grid.dim() {
            return Err(Error::Dimension(format!(
                "degree-{} polynomial on a {}-dimensional mapping torus",
                p.degree(),
                self.grid.dim()
            )));
        }
        Ok(())
    }
}

/// Builds the interpolated connection over `M×[0,1]` with `t_nodes` interval
/// nodes. The flat ends `[0, ε]` and `[1−ε, 1]` must each contain at least
/// four steps and the ramp at least eight.
pub fn build_mapping_torus(
    g: &OrientedMetric,
    phi: &Diffeomorphism,
    epsilon: f64,
    t_nodes: usize,
    cutoff: Cutoff,
) -> Result<MappingTorus> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::MappingTorus(format!("ε = {epsilon} outside (0, ½)")));
    }
    let base = g.metric.grid().clone();
    // t-orientation: see the module docs
    let sign = if base.dim() % 2 == 1 { g.orientation.flipped() } else { g.orientation };
    let grid = base.times_interval(t_nodes, sign)?;
    let ht = grid.spacing(grid.dim() - 1);
    if epsilon < 4.0 * ht - 1e-12 {
        return Err(Error::MappingTorus(format!(
            "ε = {epsilon} is resolved by fewer than four t-steps (h_t = {ht:.4}); use more t nodes or a larger ε"
        )));
    }
    if 1.0 - 2.0 * epsilon < 8.0 * ht - 1e-12 {
        return Err(Error::MappingTorus(format!(
            "ε = {epsilon} leaves fewer than eight t-steps for the ramp; use more t nodes or a smaller ε"
        )));
    }
    let moved = apply_diffeo(phi, g)?;
    let omega0 = levi_civita(&g.metric)?;
    let omega1 = levi_civita(&moved.metric)?;
    Ok(MappingTorus {
        grid,
        base,
        phi: phi.clone(),
        metric: g.clone(),
        omega0,
        omega1,
        cutoff,
        epsilon,
    })
}

/// `∫_{M×[0,1]} p(F̄)` with `F̄ = dω̄ + ω̄∧ω̄`.
///
/// Since `ω̄` has no `dt` leg, `F̄ = F(t) + dt∧∂ₜω̄` and
/// `p(F̄) = k dt∧p(∂ₜω̄, F(t), …, F(t))`; the integral is assembled slice by
/// slice with the same stencils and Gregory weights the 4-d grid uses.
pub fn pontryagin_number(p: &InvariantPolynomial, mt: &MappingTorus) -> Result<f64> {
    mt.check_integrable(p)?;
    let k = p.degree() as f64;
    let (w0, w1) = mt.end_connections();
    let b = w1.sub(w0)?;
    let d0 = w0.exterior_derivative()?;
    let d1 = w1.exterior_derivative()?;
    let q00 = w0.wedge(w0)?;
    let q01 = w0.wedge(w1)?.add(&w1.wedge(w0)?)?;
    let q11 = w1.wedge(w1)?;
    let chi = mt.chi_samples();
    let dchi = mt.chi_stencil_derivative()?;
    let weights = mt.t_axis().weights();
    let mut slices = Vec::with_capacity(chi.len());
    for (j, (&c, &dc)) in chi.iter().zip(&dchi).enumerate() {
        if dc == 0.0 {
            slices.push(0.0);
            continue;
        }
        let f = MatrixFormField::linear_combination(&[
            (1.0 - c, &d0),
            (c, &d1),
            ((1.0 - c) * (1.0 - c), &q00),
            ((1.0 - c) * c, &q01),
            (c * c, &q11),
        ])?;
        let beta = polarized_with_one(p, &b, &f)?;
        // dt∧β = (−1)^{deg β} β∧dt on the basis dx¹⋯dxⁿ∧dt
        let sign = if beta.degree() % 2 == 1 { -1.0 } else { 1.0 };
        let integral = beta.integrate_top_oriented(Orientation::Positive)?;
        slices.push(weights[j] * sign * k * dc * integral);
    }
    Ok(mt.grid.orientation().sign() * pairwise_sum(&slices))
}

/// Mapping torus of `φ²`, the orientable double cover of `M_φ` for
/// orientation-reversing `φ`.
pub fn double_cover(
    g: &OrientedMetric,
    phi: &Diffeomorphism,
    epsilon: f64,
    t_nodes: usize,
    cutoff: Cutoff,
) -> Result<MappingTorus> {
    if phi.orientation() == Orientation::Positive {
        return Err(Error::MappingTorus("φ preserves orientation: no double cover needed".into()));
    }
    build_mapping_torus(g, &phi.squared(), epsilon, t_nodes, cutoff)
}

/// Closed 4-manifold record: signature, first Pontryagin number and, for
/// unorientable manifolds, the name of the orientable double cover.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedFourManifoldEntry {
    pub name: String,
    #[serde(default, with = "rational_str::option")]
    pub signature: Option<BigRational>,
    #[serde(default, with = "rational_str::option")]
    pub p1: Option<BigRational>,
    pub orientable: bool,
    #[serde(default)]
    pub double_cover: Option<String>,
}

impl ClosedFourManifoldEntry {
    /// Orientable entries must satisfy `p₁ = 3σ` and carry both numbers;
    /// unorientable ones must name a double cover.
    pub fn validate(&self) -> Result<()> {
        if self.orientable {
            let (Some(s), Some(p)) = (&self.signature, &self.p1) else {
                return Err(Error::Ledger(format!("{}: orientable entry needs σ and p₁", self.name)));
            };
            if *p != s * BigRational::from_integer(BigInt::from(3)) {
                return Err(Error::Ledger(format!("{}: p₁ = {p} but 3σ = {}", self.name, s * BigInt::from(3))));
            }
        } else if self.double_cover.is_none() {
            return Err(Error::Ledger(format!("{}: unorientable entry without a double cover", self.name)));
        }
        Ok(())
    }
}

/// Serde helpers for rationals written as `"p/q"` strings.
pub mod rational_str {
    use num_rational::BigRational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn parse(s: &str) -> Result<BigRational, String> {
        let s = s.trim();
        let r = match s.split_once('/') {
            Some((a, b)) => {
                let a = a.trim().parse().map_err(|e| format!("bad numerator in {s:?}: {e}"))?;
                let b: num_bigint::BigInt = b.trim().parse().map_err(|e| format!("bad denominator in {s:?}: {e}"))?;
                if b == num_bigint::BigInt::from(0) {
                    return Err(format!("zero denominator in {s:?}"));
                }
                BigRational::new(a, b)
            }
            None => BigRational::from_integer(s.parse().map_err(|e| format!("bad rational {s:?}: {e}"))?),
        };
        Ok(r)
    }

    pub fn serialize<S: Serializer>(r: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&r.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        let s = String::deserialize(d)?;
        parse(&s).map_err(serde::de::Error::custom)
    }

    pub mod option {
        use num_rational::BigRational;
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(r: &Option<BigRational>, s: S) -> Result<S::Ok, S::Error> {
            match r {
                Some(r) => s.serialize_some(&r.to_string()),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<BigRational>, D::Error> {
            let s: Option<String> = Option::deserialize(d)?;
            s.map(|s| super::parse(&s).map_err(serde::de::Error::custom)).transpose()
        }
    }
}
