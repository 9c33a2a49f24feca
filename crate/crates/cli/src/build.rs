//! Turns config specs into core objects on a given grid.

use std::sync::Arc;

use gravanom::charclass::InvariantPolynomial;
use gravanom::fields::{GridManifold, MatrixFormField, Orientation, Topology};
use gravanom::geometry::{
    isotopy_flow, random_connection, Conformal, Diffeomorphism, MetricField, OrientedMetric, SymTensorField, TrigTensor,
    VectorField,
};
use gravanom::trig::TrigSeries;
use gravanom::variational::MetricPath;
use gravanom::Result;
use num_rational::Rational64;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde_json::{json, Value};

use crate::config::{BackgroundSpec, DiffeoSpec, DirectionSpec, ExperimentConfig, MetricSpec, PathSpec, PolynomialSpec};

pub const PERIODS: [f64; 3] = [1.0; 3];

pub struct Builder<'a> {
    pub cfg: &'a ExperimentConfig,
    pub seed: u64,
}

impl<'a> Builder<'a> {
    pub fn new(cfg: &'a ExperimentConfig, seed: u64) -> Self {
        Builder { cfg, seed }
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(stream))
    }

    pub fn torus(&self, nodes: usize) -> Result<Arc<GridManifold>> {
        GridManifold::build(3, &[nodes; 3], &PERIODS, Orientation::Positive, Topology::Torus)
    }

    pub fn polynomial(&self) -> Result<InvariantPolynomial> {
        polynomial(&self.cfg.polynomial)
    }

    pub fn metric(&self, name: &str, grid: &Arc<GridManifold>) -> Result<OrientedMetric> {
        let metric = match &self.cfg.metrics[name] {
            MetricSpec::Flat => MetricField::flat(grid)?,
            MetricSpec::Constant { matrix } => {
                let flat: Vec<f64> = matrix.iter().flatten().copied().collect();
                MetricField::from_family(grid, Arc::new(TrigTensor::constant(&PERIODS, &flat)))?
            }
            MetricSpec::Bumpy { amplitude, max_mode, terms, stream } => {
                let fam = TrigTensor::random_bumpy(&mut self.rng(*stream), &PERIODS, *amplitude, *max_mode, *terms);
                MetricField::from_family(grid, Arc::new(fam))?
            }
            MetricSpec::Conformal { factor } => {
                let u = TrigSeries::new(PERIODS.to_vec(), 0.0, factor.clone());
                MetricField::from_family(grid, Arc::new(Conformal::new(u)))?
            }
        };
        Ok(OrientedMetric::from_metric(metric))
    }

    pub fn diffeo(&self, name: &str) -> Result<Diffeomorphism> {
        match &self.cfg.diffeos[name] {
            DiffeoSpec::Affine { matrix, shift } => {
                let shift = if shift.is_empty() { vec![0.0; 3] } else { shift.clone() };
                Diffeomorphism::affine(matrix.iter().flatten().copied().collect(), shift, PERIODS.to_vec())
            }
            DiffeoSpec::Compose { maps } => {
                let mut it = maps.iter().rev();
                let mut acc = self.diffeo(it.next().expect("validated non-empty"))?;
                for m in it {
                    acc = self.diffeo(m)?.after(&acc)?;
                }
                Ok(acc)
            }
            DiffeoSpec::Flow { amplitude, max_mode, terms, time, resolution, stream } => {
                let x = VectorField::random(&mut self.rng(*stream), &PERIODS, *amplitude, *max_mode, *terms);
                isotopy_flow(&x, *time, *resolution)
            }
        }
    }

    pub fn vector_field(&self, spec: &DirectionSpec) -> VectorField {
        VectorField::random(&mut self.rng(spec.stream), &PERIODS, spec.amplitude, spec.max_mode, spec.terms)
    }

    /// Bumpy tensor minus the identity, keeping a closed-form generator.
    pub fn direction(&self, spec: &DirectionSpec, grid: &Arc<GridManifold>) -> Result<SymTensorField> {
        let fam = TrigTensor::random_bumpy(&mut self.rng(spec.stream), &PERIODS, spec.amplitude, spec.max_mode, spec.terms);
        let bumped = SymTensorField::from_family(grid, Arc::new(fam))?;
        let flat = SymTensorField::from_family(grid, Arc::new(TrigTensor::flat(&PERIODS)))?;
        SymTensorField::linear_combination(&[(1.0, &bumped), (-1.0, &flat)])
    }

    pub fn background(&self, spec: &BackgroundSpec, grid: &Arc<GridManifold>) -> Result<MatrixFormField> {
        random_connection(&mut self.rng(spec.stream), grid, spec.amplitude, spec.max_mode, spec.terms)
    }

    pub fn path(&self, name: &str, grid: &Arc<GridManifold>) -> Result<MetricPath> {
        match &self.cfg.paths[name] {
            PathSpec::Class { start, diffeo, samples, bump, reparam } => {
                let g0 = self.metric(start, grid)?;
                let bump = bump.as_ref().map(|b| self.direction(b, grid)).transpose()?;
                let r = *reparam;
                MetricPath::in_class(&g0, &self.diffeo(diffeo)?, *samples, bump.as_ref(), move |s| r.apply(s))
            }
            PathSpec::Between { start, end, samples, bump, reparam } => {
                let g0 = self.metric(start, grid)?;
                let g1 = self.metric(end, grid)?;
                let bump = bump.as_ref().map(|b| self.direction(b, grid)).transpose()?;
                let r = *reparam;
                MetricPath::interpolating(&g0, &g1.metric, *samples, bump.as_ref(), move |s| r.apply(s))
            }
            PathSpec::Samples { metrics } => {
                let samples = metrics.iter().map(|m| Ok(self.metric(m, grid)?.metric)).collect::<Result<Vec<_>>>()?;
                MetricPath::from_samples(samples, Orientation::Positive)
            }
        }
    }

    /// JSON description of everything a named item depends on.
    pub fn describe_metric(&self, name: &str) -> Value {
        json!({ "name": name, "spec": self.cfg.metrics[name] })
    }

    pub fn describe_diffeo(&self, name: &str) -> Value {
        let spec = &self.cfg.diffeos[name];
        let parts: Vec<Value> = match spec {
            DiffeoSpec::Compose { maps } => maps.iter().map(|m| self.describe_diffeo(m)).collect(),
            _ => Vec::new(),
        };
        json!({ "name": name, "spec": spec, "parts": parts })
    }

    pub fn describe_path(&self, name: &str) -> Value {
        let spec = &self.cfg.paths[name];
        let deps = match spec {
            PathSpec::Class { start, diffeo, .. } => vec![self.describe_metric(start), self.describe_diffeo(diffeo)],
            PathSpec::Between { start, end, .. } => vec![self.describe_metric(start), self.describe_metric(end)],
            PathSpec::Samples { metrics } => metrics.iter().map(|m| self.describe_metric(m)).collect(),
        };
        json!({ "name": name, "spec": spec, "depends": deps })
    }
}

pub fn polynomial(spec: &PolynomialSpec) -> Result<InvariantPolynomial> {
    match spec {
        PolynomialSpec::Named(n) if n == "tr2" => Ok(InvariantPolynomial::tr2()),
        PolynomialSpec::Named(n) if n == "p1" => Ok(InvariantPolynomial::p1()),
        PolynomialSpec::Named(n) => {
            Err(gravanom::Error::Polynomial(format!("unknown polynomial {n:?}; use \"tr2\", \"p1\" or a term list")))
        }
        PolynomialSpec::Custom { terms, normalized } => {
            let terms = terms
                .iter()
                .map(|(c, m)| {
                    c.trim()
                        .parse::<Rational64>()
                        .map(|c| (c, m.clone()))
                        .map_err(|e| gravanom::Error::Polynomial(format!("coefficient {c:?}: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            InvariantPolynomial::new(terms, *normalized)
        }
    }
}
