//! The experiment sets behind each subcommand.
//!
//! Every experiment expands into tasks; a task yields one or more check
//! outcomes. Tasks are independent and may run on any thread.

use std::collections::BTreeMap;

use gravanom::charclass::{cs_action, delta_phi, transgression};
use gravanom::fields::MatrixFormField;
use gravanom::geometry::{apply_diffeo, lie_derivative_metric};
use gravanom::ledger::{
    check_condition, eta_quarter, min_multiplicity, solve_counterterm, Counterterm, Ledger, LedgerEntry,
};
use gravanom::torusbundle::{build_mapping_torus, pontryagin_number, rational_str};
use gravanom::variational::{
    cotton_classical, cotton_pairing, flat_holonomy_check, path_integral_sigma, sigma_pairing, FlatHolonomyDatum,
    TorusResolution, COTTON_NORMALIZATION,
};
use gravanom::{Error, Result};
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::build::Builder;
use crate::config::{EntrySelection, Expect, ExperimentConfig, PathSpec};
use crate::report::{digest, CheckRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Suite {
    CsAction,
    Delta,
    MappingTorus,
    Cotton,
    Holonomy,
    Ledger,
}

impl Suite {
    pub const ALL: [Suite; 6] =
        [Suite::CsAction, Suite::Delta, Suite::MappingTorus, Suite::Cotton, Suite::Holonomy, Suite::Ledger];

    pub fn name(self) -> &'static str {
        match self {
            Suite::CsAction => "cs-action",
            Suite::Delta => "delta",
            Suite::MappingTorus => "mapping-torus",
            Suite::Cotton => "cotton",
            Suite::Holonomy => "holonomy",
            Suite::Ledger => "ledger",
        }
    }

    fn configured(self, cfg: &ExperimentConfig) -> bool {
        let e = &cfg.experiments;
        match self {
            Suite::CsAction => e.cs_action.is_some(),
            Suite::Delta => e.delta.is_some(),
            Suite::MappingTorus => e.mapping_torus.is_some(),
            Suite::Cotton => e.cotton.is_some(),
            Suite::Holonomy => e.holonomy.is_some(),
            Suite::Ledger => e.ledger.is_some(),
        }
    }
}

pub struct Outcome {
    pub id: String,
    pub values: BTreeMap<String, Value>,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Outcome {
    /// `residual < tolerance`.
    fn below(id: impl Into<String>, values: BTreeMap<String, Value>, residual: f64, tolerance: f64) -> Self {
        Outcome { id: id.into(), values, residual, tolerance, pass: residual < tolerance }
    }
}

type Run<'a> = Box<dyn Fn() -> Result<Vec<Outcome>> + Send + Sync + 'a>;

pub struct Task<'a> {
    pub id: String,
    pub inputs: Value,
    pub nodes: Vec<usize>,
    tolerance: f64,
    run: Run<'a>,
}

impl<'a> Task<'a> {
    fn new(
        id: impl Into<String>,
        inputs: Value,
        nodes: Vec<usize>,
        tolerance: f64,
        run: impl Fn() -> Result<Vec<Outcome>> + Send + Sync + 'a,
    ) -> Self {
        Task { id: id.into(), inputs, nodes, tolerance, run: Box::new(run) }
    }

    /// Numerical failures become failing records, not crashes.
    pub fn execute(&self) -> Vec<CheckRecord> {
        let inputs_digest = digest(&self.inputs);
        match (self.run)() {
            Ok(outcomes) => outcomes
                .into_iter()
                .map(|o| CheckRecord {
                    id: o.id,
                    inputs_digest: inputs_digest.clone(),
                    values: o.values,
                    residual: Some(o.residual),
                    tolerance: o.tolerance,
                    pass: o.pass,
                    error: None,
                })
                .collect(),
            Err(e) => vec![CheckRecord {
                id: self.id.clone(),
                inputs_digest,
                values: BTreeMap::new(),
                residual: None,
                tolerance: self.tolerance,
                pass: false,
                error: Some(e.to_string()),
            }],
        }
    }
}

fn values<const N: usize>(pairs: [(&str, Value); N]) -> BTreeMap<String, Value> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

pub struct Plan<'a> {
    pub b: Builder<'a>,
    /// Multiplies every floating-point tolerance.
    pub scale: f64,
}

impl<'a> Plan<'a> {
    pub fn new(cfg: &'a ExperimentConfig, seed: u64, scale: f64) -> Self {
        Plan { b: Builder::new(cfg, seed), scale }
    }

    fn cfg(&self) -> &'a ExperimentConfig {
        self.b.cfg
    }

    fn tol(&self, t: f64) -> f64 {
        t * self.scale
    }

    fn base_inputs(&self) -> Value {
        json!({ "seed": self.b.seed, "polynomial": self.cfg().polynomial })
    }

    pub fn tasks(&'a self, suites: &[Suite]) -> std::result::Result<Vec<Task<'a>>, String> {
        let mut out = Vec::new();
        for &s in suites {
            if !s.configured(self.cfg()) {
                return Err(format!("experiments.{}: section missing from the config", s.name().replace('-', "_")));
            }
            match s {
                Suite::CsAction => self.cs_action(&mut out),
                Suite::Delta => self.delta(&mut out),
                Suite::MappingTorus => self.mapping_torus(&mut out),
                Suite::Cotton => self.cotton(&mut out),
                Suite::Holonomy => self.holonomy(&mut out),
                Suite::Ledger => self.ledger(&mut out),
            }
        }
        Ok(out)
    }

    fn cs_action(&'a self, out: &mut Vec<Task<'a>>) {
        let e = self.cfg().experiments.cs_action.as_ref().expect("configured");
        let tol = self.tol(self.cfg().tolerances.background_shift);
        let b = &self.b;
        for m in &e.metrics {
            let inputs = json!({
                "base": self.base_inputs(), "nodes": [e.coarse_nodes, e.nodes],
                "metric": b.describe_metric(m), "backgrounds": e.backgrounds,
            });
            let m = m.clone();
            out.push(Task::new(format!("background-shift/{m}"), inputs, vec![e.coarse_nodes, e.nodes], tol, move || {
                let p = b.polynomial()?;
                // CS_{A₀′} − CS_{A₀} − ∫T(A₀, A₀′)
                let measure = |nodes: usize| -> Result<(f64, f64, f64)> {
                    let grid = b.torus(nodes)?;
                    let g = b.metric(&m, &grid)?;
                    let a0 = b.background(&e.backgrounds[0], &grid)?;
                    let a1 = b.background(&e.backgrounds[1], &grid)?;
                    let shift = transgression(&p, &a0, &a1)?.integrate_top()?;
                    let (c0, c1) = (cs_action(&p, &g, &a0)?, cs_action(&p, &g, &a1)?);
                    Ok((c1 - c0 - shift, shift, c0.abs() + c1.abs() + shift.abs()))
                };
                let (fine, shift, size) = measure(e.nodes)?;
                let (coarse, coarse_shift, _) = measure(e.coarse_nodes)?;
                let floor = 64.0 * f64::EPSILON * size;
                let ratio = e.nodes as f64 / e.coarse_nodes as f64;
                let decays = fine.abs() <= coarse.abs() / ratio.powi(4) || fine.abs().max(coarse.abs()) <= floor;
                Ok(vec![
                    Outcome::below(
                        format!("background-shift/{m}"),
                        values([("shift", json!(shift)), ("nodes", json!(e.nodes))]),
                        fine.abs(),
                        tol,
                    ),
                    Outcome {
                        id: format!("background-shift-refinement/{m}"),
                        values: values([
                            ("coarse_residual", json!(coarse.abs())),
                            ("coarse_shift", json!(coarse_shift)),
                            ("round_off_floor", json!(floor)),
                            ("coarse_nodes", json!(e.coarse_nodes)),
                        ]),
                        residual: fine.abs(),
                        tolerance: (coarse.abs() / ratio.powi(4)).max(floor),
                        pass: decays,
                    },
                ])
            }));
        }
    }

    fn delta(&'a self, out: &mut Vec<Task<'a>>) {
        let e = self.cfg().experiments.delta.as_ref().expect("configured");
        let tol = self.tol(self.cfg().tolerances.default);
        let b = &self.b;

        let ind = &e.independence;
        let inputs = json!({
            "base": self.base_inputs(), "nodes": ind.nodes, "diffeo": b.describe_diffeo(&ind.diffeo),
            "metrics": ind.metrics.iter().map(|m| b.describe_metric(m)).collect::<Vec<_>>(),
        });
        out.push(Task::new("metric-independence", inputs, vec![ind.nodes], tol, move || {
            let p = b.polynomial()?;
            let grid = b.torus(ind.nodes)?;
            let phi = b.diffeo(&ind.diffeo)?;
            let a0 = MatrixFormField::zeros(&grid, 1, 3)?;
            let deltas = ind
                .metrics
                .par_iter()
                .map(|m| delta_phi(&p, &phi, &b.metric(m, &grid)?, &a0))
                .collect::<Result<Vec<f64>>>()?;
            let spread = deltas.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - deltas.iter().cloned().fold(f64::INFINITY, f64::min);
            let per: BTreeMap<String, Value> =
                ind.metrics.iter().zip(&deltas).map(|(m, d)| (format!("delta/{m}"), json!(d))).collect();
            Ok(vec![Outcome::below("metric-independence", per, spread, tol)])
        }));

        let co = &e.cocycle;
        for (f, g) in &co.pairs {
            let id = format!("cocycle/{f}∘{g}");
            let inputs = json!({
                "base": self.base_inputs(), "nodes": co.nodes, "metric": b.describe_metric(&co.metric),
                "outer": b.describe_diffeo(f), "inner": b.describe_diffeo(g),
            });
            let id2 = id.clone();
            out.push(Task::new(id, inputs, vec![co.nodes], tol, move || {
                let p = b.polynomial()?;
                let grid = b.torus(co.nodes)?;
                let metric = b.metric(&co.metric, &grid)?;
                let a0 = MatrixFormField::zeros(&grid, 1, 3)?;
                let (phi, psi) = (b.diffeo(f)?, b.diffeo(g)?);
                let both = phi.after(&psi)?;
                let ds = [&both, &phi, &psi]
                    .par_iter()
                    .map(|d| delta_phi(&p, d, &metric, &a0))
                    .collect::<Result<Vec<f64>>>()?;
                let r = ds[0] - ds[1] - ds[2];
                Ok(vec![Outcome::below(
                    id2.clone(),
                    values([("delta_composite", json!(ds[0])), ("delta_outer", json!(ds[1])), ("delta_inner", json!(ds[2]))]),
                    r.abs(),
                    tol,
                )])
            }));
        }

        let ic = &e.identity_component;
        for d in &ic.diffeos {
            let id = format!("identity-component/{d}");
            let inputs = json!({
                "base": self.base_inputs(), "nodes": ic.nodes, "metric": b.describe_metric(&ic.metric),
                "diffeo": b.describe_diffeo(d),
            });
            let id2 = id.clone();
            out.push(Task::new(id, inputs, vec![ic.nodes], tol, move || {
                let p = b.polynomial()?;
                let grid = b.torus(ic.nodes)?;
                let phi = b.diffeo(d)?;
                let delta = delta_phi(&p, &phi, &b.metric(&ic.metric, &grid)?, &MatrixFormField::zeros(&grid, 1, 3)?)?;
                let isotopic = phi.in_identity_component();
                Ok(vec![Outcome {
                    id: id2.clone(),
                    values: values([("delta", json!(delta)), ("in_identity_component", json!(isotopic))]),
                    residual: delta.abs(),
                    tolerance: tol,
                    pass: isotopic && delta.abs() < tol,
                }])
            }));
        }
    }

    fn mapping_torus(&'a self, out: &mut Vec<Task<'a>>) {
        let e = self.cfg().experiments.mapping_torus.as_ref().expect("configured");
        let tol = self.tol(self.cfg().tolerances.default);
        let b = &self.b;
        for m in &e.metrics {
            for d in &e.diffeos {
                let id = format!("mapping-torus-agreement/{m}/{d}");
                let inputs = json!({
                    "base": self.base_inputs(), "nodes": e.nodes, "t_nodes": e.t_nodes, "epsilons": e.epsilons,
                    "cutoff": e.cutoff, "metric": b.describe_metric(m), "diffeo": b.describe_diffeo(d),
                });
                let id2 = id.clone();
                out.push(Task::new(id, inputs, vec![e.nodes], tol, move || {
                    let p = b.polynomial()?;
                    let grid = b.torus(e.nodes)?;
                    let g = b.metric(m, &grid)?;
                    let phi = b.diffeo(d)?;
                    let delta = delta_phi(&p, &phi, &g, &MatrixFormField::zeros(&grid, 1, 3)?)?;
                    e.epsilons
                        .par_iter()
                        .map(|&eps| {
                            let number = pontryagin_number(&p, &build_mapping_torus(&g, &phi, eps, e.t_nodes, e.cutoff)?)?;
                            let r = (delta - number).abs();
                            Ok(Outcome {
                                id: format!("{id2}/eps={eps}"),
                                values: values([("delta", json!(delta)), ("characteristic_number", json!(number))]),
                                residual: r,
                                tolerance: tol,
                                pass: r < tol && delta.abs() < tol && number.abs() < tol,
                            })
                        })
                        .collect()
                }));
            }
        }
        if let Some(rev) = &e.orientation_reversing {
            let id = format!("orientation-reversal/{}", rev.diffeo);
            let inputs = json!({
                "base": self.base_inputs(), "nodes": rev.nodes, "metric": b.describe_metric(&rev.metric),
                "diffeo": b.describe_diffeo(&rev.diffeo),
            });
            let id2 = id.clone();
            out.push(Task::new(id, inputs, vec![rev.nodes], tol, move || {
                let p = b.polynomial()?;
                let grid = b.torus(rev.nodes)?;
                let g = b.metric(&rev.metric, &grid)?;
                let phi = b.diffeo(&rev.diffeo)?;
                if phi.orientation() != gravanom::fields::Orientation::Negative {
                    return Err(Error::Orientation(format!("{} preserves orientation", rev.diffeo)));
                }
                let a0 = MatrixFormField::zeros(&grid, 1, 3)?;
                let ds = [phi.clone(), phi.squared()]
                    .par_iter()
                    .map(|d| delta_phi(&p, d, &g, &a0))
                    .collect::<Result<Vec<f64>>>()?;
                Ok(vec![Outcome::below(
                    id2.clone(),
                    values([("delta", json!(ds[0])), ("delta_squared", json!(ds[1]))]),
                    (ds[0] - 0.5 * ds[1]).abs(),
                    tol,
                )])
            }));
        }
    }

    fn cotton(&'a self, out: &mut Vec<Task<'a>>) {
        let e = self.cfg().experiments.cotton.as_ref().expect("configured");
        let tols = &self.cfg().tolerances;
        let (tol, rel) = (self.tol(tols.default), self.tol(tols.cotton_relative));
        let b = &self.b;
        for (i, x) in e.lie_fields.iter().enumerate() {
            let inputs = json!({
                "base": self.base_inputs(), "nodes": e.nodes, "metric": b.describe_metric(&e.metric), "field": x,
            });
            out.push(Task::new(format!("lie-direction/{i}"), inputs, vec![e.nodes], tol, move || {
                let p = b.polynomial()?;
                let grid = b.torus(e.nodes)?;
                let g = b.metric(&e.metric, &grid)?;
                let h = lie_derivative_metric(&b.vector_field(x), &g.metric)?;
                let s = sigma_pairing(&p, &g, &h, &MatrixFormField::zeros(&grid, 1, 3)?)?;
                Ok(vec![Outcome::below(
                    format!("lie-direction/{i}"),
                    values([("direction_size", json!(h.max_abs())), ("pairing", json!(s))]),
                    s.abs(),
                    tol,
                )])
            }));
        }
        for (id, metric, conformal) in
            [("cotton-agreement", &e.metric, false), ("cotton-conformally-flat", &e.conformally_flat, true)]
        {
            let inputs = json!({
                "base": self.base_inputs(), "nodes": e.nodes, "metric": b.describe_metric(metric),
                "direction": e.direction, "normalization": COTTON_NORMALIZATION,
            });
            out.push(Task::new(id, inputs, vec![e.nodes], if conformal { tol } else { rel }, move || {
                let p = b.polynomial()?;
                let grid = b.torus(e.nodes)?;
                let g = b.metric(metric, &grid)?;
                let h = b.direction(&e.direction, &grid)?;
                let classical = cotton_pairing(&cotton_classical(&g)?, &h);
                let variational = COTTON_NORMALIZATION * sigma_pairing(&p, &g, &h, &MatrixFormField::zeros(&grid, 1, 3)?)?;
                let v = values([("classical", json!(classical)), ("variational", json!(variational))]);
                Ok(vec![if conformal {
                    Outcome::below(id, v, classical.abs().max(variational.abs()), tol)
                } else {
                    Outcome::below(id, v, ((classical - variational) / variational).abs(), rel)
                }])
            }));
        }
    }

    fn holonomy(&'a self, out: &mut Vec<Task<'a>>) {
        let e = self.cfg().experiments.holonomy.as_ref().expect("configured");
        let tol = self.tol(self.cfg().tolerances.default);
        let b = &self.b;
        let inputs = json!({
            "base": self.base_inputs(), "nodes": e.nodes,
            "paths": e.paths.iter().map(|p| b.describe_path(p)).collect::<Vec<_>>(),
        });
        out.push(Task::new("path-independence", inputs, vec![e.nodes], tol, move || {
            let p = b.polynomial()?;
            let grid = b.torus(e.nodes)?;
            let a0 = MatrixFormField::zeros(&grid, 1, 3)?;
            let integrals = e
                .paths
                .par_iter()
                .map(|name| {
                    let path = b.path(name, &grid)?;
                    let integral = path_integral_sigma(&p, &path, &a0)?;
                    // what the integral should equal: CS(end) − CS(start)
                    let start = gravanom::geometry::OrientedMetric::new(path.samples()[0].clone(), path.orientation());
                    let target = match (&b.cfg.paths[name], path.endpoint()) {
                        (PathSpec::Class { .. }, Some(phi)) => cs_action(&p, &apply_diffeo(phi, &start)?, &a0)?,
                        _ => {
                            let last = path.samples().last().expect("non-empty").clone();
                            cs_action(&p, &gravanom::geometry::OrientedMetric::new(last, path.orientation()), &a0)?
                        }
                    } - cs_action(&p, &start, &a0)?;
                    Ok((name.clone(), integral, target))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut outcomes: Vec<Outcome> = integrals
                .iter()
                .map(|(name, i, t)| {
                    Outcome::below(
                        format!("path-matches-delta/{name}"),
                        values([("integral", json!(i)), ("action_difference", json!(t))]),
                        (i - t).abs(),
                        tol,
                    )
                })
                .collect();
            let spread = integrals.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max)
                - integrals.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
            let per = integrals.iter().map(|(n, i, _)| (format!("integral/{n}"), json!(i))).collect();
            outcomes.push(Outcome {
                id: "path-independence".into(),
                values: per,
                residual: spread,
                tolerance: tol,
                pass: integrals.len() >= 2 && spread < tol,
            });
            Ok(outcomes)
        }));

        if let Some(flat) = &e.flat {
            let htol = self.tol(self.cfg().tolerances.holonomy);
            for d in &flat.data {
                let id = format!("flat-holonomy/{}", d.label);
                let inputs = json!({
                    "base": self.base_inputs(), "nodes": flat.nodes, "metric": b.describe_metric(&flat.metric),
                    "diffeo": b.describe_diffeo(&d.diffeo), "kappa": d.kappa, "epsilon": flat.epsilon,
                    "polynomial": flat.polynomial,
                    "t_nodes": flat.t_nodes, "cutoff": flat.cutoff,
                });
                let id2 = id.clone();
                out.push(Task::new(id, inputs, vec![flat.nodes], htol, move || {
                    let p = match &flat.polynomial {
                        Some(spec) => crate::build::polynomial(spec)?,
                        None => b.polynomial()?,
                    };
                    let grid = b.torus(flat.nodes)?;
                    let g = b.metric(&flat.metric, &grid)?;
                    let datum = FlatHolonomyDatum { label: d.label.clone(), phi: b.diffeo(&d.diffeo)?, kappa: d.kappa };
                    let res = TorusResolution { epsilon: flat.epsilon, t_nodes: flat.t_nodes, cutoff: flat.cutoff };
                    let v = flat_holonomy_check(&p, &[datum], &g, res, htol)?.remove(0);
                    let observed = match v.pass {
                        Some(true) => Expect::Pass,
                        Some(false) => Expect::Fail,
                        None => Expect::Skip,
                    };
                    let mut vals = values([
                        ("characteristic_number", json!(v.characteristic_number)),
                        ("verdict", json!(observed)),
                        ("expected", json!(d.expect)),
                    ]);
                    if let Some(n) = &v.notice {
                        vals.insert("notice".into(), json!(n));
                    }
                    Ok(vec![Outcome {
                        id: id2.clone(),
                        values: vals,
                        residual: v.distance.unwrap_or(0.0),
                        tolerance: htol,
                        pass: observed == d.expect,
                    }])
                }));
            }
        }
    }

    fn ledger(&'a self, out: &mut Vec<Task<'a>>) {
        let e = self.cfg().experiments.ledger.as_ref().expect("configured");
        let source = match &e.file {
            Some(path) => std::fs::read_to_string(path)
                .map_err(|err| Error::Ledger(format!("{}: {err}", path.display())))
                .and_then(|text| Ledger::from_toml(&text)),
            None => Ok(Ledger::builtin()),
        };
        let ledger_inputs = json!({
            "family": e.family,
            "table": source.as_ref().map(|l| toml::to_string(l).unwrap_or_default()).unwrap_or_default(),
        });
        let source = std::sync::Arc::new(source.map_err(|e| e.to_string()));
        let load = move || -> Result<Ledger> { (*source).clone().map_err(Error::Ledger) };
        let select = |l: &Ledger, sel: &EntrySelection| -> Result<Vec<LedgerEntry>> {
            match sel {
                EntrySelection::Named(names) => l.named(&names.iter().map(String::as_str).collect::<Vec<_>>()),
                EntrySelection::Scoped(s) => Ok(l.select(*s)),
            }
        };
        let exact = |computed: &BigRational, expected: &BigRational| {
            (computed - expected).abs().to_f64().unwrap_or(f64::INFINITY)
        };

        for x in &e.eta {
            let id = format!("quarter-eta/{}", x.entry);
            let load = load.clone();
            let inputs = json!({ "ledger": ledger_inputs.clone(), "entry": x.entry, "expect": x.expect });
            let id2 = id.clone();
            out.push(Task::new(id, inputs, vec![], 0.0, move || {
                let l = load()?;
                let fam = l.family(&e.family)?;
                let entry = l.named(&[x.entry.as_str()])?.remove(0);
                let q = eta_quarter(fam, &entry)?;
                let want = parse(&x.expect)?;
                let r = exact(&q, &want);
                Ok(vec![Outcome {
                    id: id2.clone(),
                    values: values([("quarter_eta", json!(q.to_string())), ("expected", json!(want.to_string()))]),
                    residual: r,
                    tolerance: 0.0,
                    pass: q == want,
                }])
            }));
        }

        for (i, x) in e.conditions.iter().enumerate() {
            let id = format!("condition/{}/{i}", x.condition);
            let load = load.clone();
            let inputs = json!({ "ledger": ledger_inputs.clone(), "spec": x });
            let id2 = id.clone();
            out.push(Task::new(id, inputs, vec![], 0.0, move || {
                let l = load()?;
                let fam = l.family(&e.family)?.with_multiplicity(x.multiplicity);
                let entries = select(&l, &x.entries)?;
                let ct = Counterterm::new(parse(&x.counterterm)?);
                let v = check_condition(x.condition, &fam, &ct, &entries)?;
                let mut vals: BTreeMap<String, Value> = v
                    .entries
                    .iter()
                    .map(|ev| (format!("residue/{}", ev.name), json!(ev.residue.to_string())))
                    .collect();
                vals.insert("verdict".into(), json!(v.pass));
                vals.insert("expected".into(), json!(x.expect_pass));
                let worst = v
                    .entries
                    .iter()
                    .map(|ev| {
                        let r = ev.residue.to_f64().unwrap_or(1.0);
                        r.min(1.0 - r)
                    })
                    .fold(0.0, f64::max);
                Ok(vec![Outcome { id: id2.clone(), values: vals, residual: worst, tolerance: 0.0, pass: v.pass == x.expect_pass }])
            }));
        }

        for (i, x) in e.counterterms.iter().enumerate() {
            let id = format!("counterterm/{}/{i}", x.condition);
            let load = load.clone();
            let inputs = json!({ "ledger": ledger_inputs.clone(), "spec": x });
            let id2 = id.clone();
            out.push(Task::new(id, inputs, vec![], 0.0, move || {
                let l = load()?;
                let fam = l.family(&e.family)?.with_multiplicity(x.multiplicity);
                let entries = select(&l, &x.entries)?;
                let sol = solve_counterterm(&fam, &entries, x.condition)?;
                let want = if x.expect == "none" { None } else { Some(parse(&x.expect)?) };
                let got = sol.as_ref().map(|s| s.representative.clone());
                let residual = match (&got, &want) {
                    (Some(a), Some(b)) => exact(a, b),
                    (None, None) => 0.0,
                    _ => f64::INFINITY,
                };
                let period = sol.as_ref().and_then(|s| s.period.as_ref()).map(|p| p.to_string());
                Ok(vec![Outcome {
                    id: id2.clone(),
                    values: values([
                        ("counterterm", json!(got.as_ref().map(|c| c.to_string()).unwrap_or_else(|| "none".into()))),
                        ("period", json!(period)),
                        ("expected", json!(x.expect)),
                    ]),
                    residual: if residual.is_finite() { residual } else { 1.0 },
                    tolerance: 0.0,
                    pass: got == want,
                }])
            }));
        }

        for x in &e.multiplicities {
            let id = format!("nu-multiplicity/{}", x.condition);
            let load = load.clone();
            let inputs = json!({ "ledger": ledger_inputs.clone(), "spec": x, "bound": e.nu_bound });
            let id2 = id.clone();
            out.push(Task::new(id, inputs, vec![], 0.0, move || {
                let l = load()?;
                let fam = l.family(&e.family)?;
                let entries = match &x.entries {
                    Some(sel) => select(&l, sel)?,
                    None => l.select(x.condition.default_scope()),
                };
                let found = min_multiplicity(fam, &entries, x.condition, 1..=e.nu_bound)?;
                let nu = found.as_ref().map(|(nu, _)| *nu);
                let mut vals = values([
                    ("multiplicity", json!(nu.map_or_else(|| format!("none ≤ {}", e.nu_bound), |n| n.to_string()))),
                    ("expected", json!(x.expect)),
                    ("entries", json!(entries.iter().map(|e| e.name().to_string()).collect::<Vec<_>>())),
                ]);
                if let Some((_, sol)) = &found {
                    vals.insert("counterterm".into(), json!(sol.representative.to_string()));
                }
                let residual = nu.map_or(f64::from(e.nu_bound), |n| (f64::from(n) - f64::from(x.expect)).abs());
                Ok(vec![Outcome { id: id2.clone(), values: vals, residual, tolerance: 0.0, pass: nu == Some(x.expect) }])
            }));
        }
    }
}

fn parse(s: &str) -> Result<BigRational> {
    rational_str::parse(s).map_err(Error::Ledger)
}
