//! Experiment configuration: named metrics, diffeomorphisms and paths, plus
//! one section per experiment that refers to them by name.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use gravanom::ledger::{Condition, Scope};
use gravanom::torusbundle::Cutoff;
use gravanom::trig::TrigTerm;
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

fn bad(field: &str, msg: impl std::fmt::Display) -> ConfigError {
    ConfigError(format!("{field}: {msg}"))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Base seed; a randomized family with `stream = s` draws from `seed + s`.
    pub seed: Option<u64>,
    #[serde(default)]
    pub polynomial: PolynomialSpec,
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub tolerances: Tolerances,
    #[serde(default)]
    pub metrics: BTreeMap<String, MetricSpec>,
    #[serde(default)]
    pub diffeos: BTreeMap<String, DiffeoSpec>,
    #[serde(default)]
    pub paths: BTreeMap<String, PathSpec>,
    #[serde(default)]
    pub experiments: Experiments,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolynomialSpec {
    /// `"tr2"` or `"p1"`.
    Named(String),
    Custom {
        /// `[coefficient, [trace powers]]`, coefficients as `"p/q"` strings.
        terms: Vec<(String, Vec<u32>)>,
        #[serde(default)]
        normalized: bool,
    },
}

impl Default for PolynomialSpec {
    fn default() -> Self {
        PolynomialSpec::Named("tr2".into())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Absolute tolerance for identities that vanish in the continuum.
    pub default: f64,
    pub background_shift: f64,
    pub cotton_relative: f64,
    pub holonomy: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricSpec {
    Flat,
    Constant { matrix: Vec<Vec<f64>> },
    Bumpy { amplitude: f64, max_mode: i32, terms: usize, stream: u64 },
    /// `e^{2u}δ` with `u = Σ` the listed modes.
    Conformal { factor: Vec<TrigTerm> },
}

impl MetricSpec {
    fn randomized(&self) -> bool {
        matches!(self, MetricSpec::Bumpy { .. })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiffeoSpec {
    /// `x ↦ Bx + shift` with `B ∈ GL(3, ℤ)` given by rows.
    Affine { matrix: Vec<Vec<i64>>, #[serde(default)] shift: Vec<f64> },
    /// `maps[0] ∘ maps[1] ∘ …`: the last map acts first.
    Compose { maps: Vec<String> },
    /// Time-`time` flow of a random vector field.
    Flow { amplitude: f64, max_mode: i32, terms: usize, time: f64, resolution: usize, stream: u64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reparam {
    #[default]
    Identity,
    Quadratic,
    Smoothstep,
}

impl Reparam {
    pub fn apply(self, s: f64) -> f64 {
        match self {
            Reparam::Identity => s,
            Reparam::Quadratic => s * s,
            Reparam::Smoothstep => s * s * (3.0 - 2.0 * s),
        }
    }
}

/// Random symmetric direction: a bumpy tensor minus the identity.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectionSpec {
    pub amplitude: f64,
    #[serde(default = "one_i32")]
    pub max_mode: i32,
    #[serde(default = "three")]
    pub terms: usize,
    pub stream: u64,
}

fn one_i32() -> i32 {
    1
}

fn three() -> usize {
    3
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PathSpec {
    /// From `start` to `diffeo·start`.
    Class {
        start: String,
        diffeo: String,
        samples: usize,
        #[serde(default)]
        bump: Option<DirectionSpec>,
        #[serde(default)]
        reparam: Reparam,
    },
    /// Linear in `g` between two metrics.
    Between {
        start: String,
        end: String,
        samples: usize,
        #[serde(default)]
        bump: Option<DirectionSpec>,
        #[serde(default)]
        reparam: Reparam,
    },
    /// Explicit list of metrics, uniformly spaced in `s`.
    Samples { metrics: Vec<String> },
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiments {
    pub cs_action: Option<CsActionExperiment>,
    pub delta: Option<DeltaExperiment>,
    pub mapping_torus: Option<MappingTorusExperiment>,
    pub cotton: Option<CottonExperiment>,
    pub holonomy: Option<HolonomyExperiment>,
    pub ledger: Option<LedgerExperiment>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundSpec {
    pub amplitude: f64,
    pub max_mode: i32,
    pub terms: usize,
    pub stream: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsActionExperiment {
    pub nodes: usize,
    /// Coarser grid for the refinement check; the residual must drop by 16
    /// from here to `nodes` unless it is already at round-off.
    pub coarse_nodes: usize,
    pub metrics: Vec<String>,
    /// `A₀` and `A₀′`.
    pub backgrounds: [BackgroundSpec; 2],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaExperiment {
    pub independence: IndependenceSpec,
    pub cocycle: CocycleSpec,
    pub identity_component: IdentityComponentSpec,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndependenceSpec {
    pub nodes: usize,
    pub diffeo: String,
    pub metrics: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CocycleSpec {
    pub nodes: usize,
    pub metric: String,
    /// `(φ, ψ)`: checks `δ_{φ∘ψ} = δ_φ + δ_ψ`.
    pub pairs: Vec<(String, String)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentityComponentSpec {
    pub nodes: usize,
    pub metric: String,
    pub diffeos: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingTorusExperiment {
    pub nodes: usize,
    pub metrics: Vec<String>,
    pub diffeos: Vec<String>,
    pub epsilons: Vec<f64>,
    pub t_nodes: usize,
    #[serde(default = "default_cutoff")]
    pub cutoff: Cutoff,
    pub orientation_reversing: Option<ReversingSpec>,
}

fn default_cutoff() -> Cutoff {
    Cutoff::QuinticSmoothstep
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReversingSpec {
    pub nodes: usize,
    pub metric: String,
    pub diffeo: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CottonExperiment {
    pub nodes: usize,
    pub metric: String,
    pub conformally_flat: String,
    pub direction: DirectionSpec,
    /// Random vector fields `X` for the Lie-direction check.
    pub lie_fields: Vec<DirectionSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HolonomyExperiment {
    pub nodes: usize,
    /// Homotopic paths in the same class, compared pairwise and with δ.
    pub paths: Vec<String>,
    #[serde(default)]
    pub flat: Option<FlatHolonomySpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlatHolonomySpec {
    /// κ is compared mod ℤ, so this should be integer normalized.
    #[serde(default)]
    pub polynomial: Option<PolynomialSpec>,
    pub nodes: usize,
    pub metric: String,
    pub epsilon: f64,
    pub t_nodes: usize,
    #[serde(default = "default_cutoff")]
    pub cutoff: Cutoff,
    pub data: Vec<KappaSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KappaSpec {
    pub label: String,
    pub diffeo: String,
    /// `None` means "not supplied": the datum is skipped with a notice.
    pub kappa: Option<f64>,
    /// Whether the congruence is expected to hold.
    pub expect: Expect,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expect {
    Pass,
    Fail,
    Skip,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedgerExperiment {
    /// Ledger data file; the built-in table when absent. Relative paths are
    /// taken from the config file's directory.
    pub file: Option<PathBuf>,
    pub family: String,
    #[serde(default = "default_bound")]
    pub nu_bound: u32,
    #[serde(default)]
    pub eta: Vec<EtaExpectation>,
    #[serde(default)]
    pub conditions: Vec<ConditionExpectation>,
    #[serde(default)]
    pub counterterms: Vec<CountertermExpectation>,
    #[serde(default)]
    pub multiplicities: Vec<MultiplicityExpectation>,
}

fn default_bound() -> u32 {
    gravanom::ledger::DEFAULT_NU_BOUND
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EtaExpectation {
    pub entry: String,
    pub expect: String,
}

/// Entries are either listed by name or selected by scope.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EntrySelection {
    Named(Vec<String>),
    Scoped(Scope),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionExpectation {
    pub condition: Condition,
    pub entries: EntrySelection,
    #[serde(default = "one_u32")]
    pub multiplicity: u32,
    pub counterterm: String,
    pub expect_pass: bool,
}

fn one_u32() -> u32 {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountertermExpectation {
    pub condition: Condition,
    pub entries: EntrySelection,
    #[serde(default = "one_u32")]
    pub multiplicity: u32,
    /// `"none"` when no counterterm should exist.
    pub expect: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiplicityExpectation {
    pub condition: Condition,
    /// Defaults to the condition's own scope.
    pub entries: Option<EntrySelection>,
    pub expect: u32,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        if let Some(ledger) = cfg.experiments.ledger.as_mut() {
            if let Some(file) = ledger.file.as_mut() {
                if file.is_relative() {
                    *file = path.parent().unwrap_or(Path::new(".")).join(&*file);
                }
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every referenced name resolves, tolerances are positive and a seed is
    /// present when something random is drawn.
    pub fn validate(&self) -> Result<()> {
        let t = &self.tolerances;
        for (name, v) in [
            ("default", t.default),
            ("background_shift", t.background_shift),
            ("cotton_relative", t.cotton_relative),
            ("holonomy", t.holonomy),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(bad(&format!("tolerances.{name}"), format!("must be positive, got {v}")));
            }
        }
        for (name, m) in &self.metrics {
            let field = format!("metrics.{name}");
            match m {
                MetricSpec::Constant { matrix } if matrix.len() != 3 || matrix.iter().any(|r| r.len() != 3) => {
                    return Err(bad(&field, "matrix must be 3×3"));
                }
                MetricSpec::Bumpy { amplitude, max_mode, .. } if !(*amplitude >= 0.0 && *amplitude < 1.0) || *max_mode < 1 => {
                    return Err(bad(&field, "amplitude must lie in [0, 1) and max_mode be at least 1"));
                }
                _ => {}
            }
        }
        for (name, d) in &self.diffeos {
            let field = format!("diffeos.{name}");
            match d {
                DiffeoSpec::Affine { matrix, shift } => {
                    if matrix.len() != 3 || matrix.iter().any(|r| r.len() != 3) {
                        return Err(bad(&field, "matrix must be 3×3"));
                    }
                    if !shift.is_empty() && shift.len() != 3 {
                        return Err(bad(&field, "shift must have 3 components"));
                    }
                }
                DiffeoSpec::Compose { maps } => {
                    if maps.is_empty() {
                        return Err(bad(&field, "compose needs at least one map"));
                    }
                    for (i, m) in maps.iter().enumerate() {
                        self.diffeo_ref(&format!("{field}.maps[{i}]"), m)?;
                        if m == name {
                            return Err(bad(&field, "a composition cannot contain itself"));
                        }
                    }
                }
                DiffeoSpec::Flow { resolution, .. } if *resolution < 4 => {
                    return Err(bad(&field, "resolution must be at least 4"));
                }
                DiffeoSpec::Flow { .. } => {}
            }
        }
        // composition cycles
        for name in self.diffeos.keys() {
            self.compose_depth(name, 0)?;
        }
        for (name, p) in &self.paths {
            let field = format!("paths.{name}");
            match p {
                PathSpec::Class { start, diffeo, samples, .. } => {
                    self.metric_ref(&format!("{field}.start"), start)?;
                    self.diffeo_ref(&format!("{field}.diffeo"), diffeo)?;
                    check_samples(&field, *samples)?;
                }
                PathSpec::Between { start, end, samples, .. } => {
                    self.metric_ref(&format!("{field}.start"), start)?;
                    self.metric_ref(&format!("{field}.end"), end)?;
                    check_samples(&field, *samples)?;
                }
                PathSpec::Samples { metrics } => {
                    for (i, m) in metrics.iter().enumerate() {
                        self.metric_ref(&format!("{field}.metrics[{i}]"), m)?;
                    }
                    check_samples(&field, metrics.len())?;
                }
            }
        }
        self.validate_experiments()?;
        if self.seed.is_none() && self.uses_randomness() {
            return Err(ConfigError("seed: required because randomized families are used (set `seed` or pass --seed)".into()));
        }
        Ok(())
    }

    fn validate_experiments(&self) -> Result<()> {
        let e = &self.experiments;
        if let Some(c) = &e.cs_action {
            let f = "experiments.cs_action";
            check_nodes(f, c.nodes)?;
            check_nodes(f, c.coarse_nodes)?;
            if c.coarse_nodes >= c.nodes {
                return Err(bad(f, "coarse_nodes must be below nodes"));
            }
            self.metric_refs(&format!("{f}.metrics"), &c.metrics)?;
        }
        if let Some(d) = &e.delta {
            let f = "experiments.delta";
            check_nodes(f, d.independence.nodes)?;
            self.diffeo_ref(&format!("{f}.independence.diffeo"), &d.independence.diffeo)?;
            self.metric_refs(&format!("{f}.independence.metrics"), &d.independence.metrics)?;
            if d.independence.metrics.len() < 2 {
                return Err(bad(&format!("{f}.independence.metrics"), "needs at least two metrics"));
            }
            check_nodes(f, d.cocycle.nodes)?;
            self.metric_ref(&format!("{f}.cocycle.metric"), &d.cocycle.metric)?;
            for (i, (a, b)) in d.cocycle.pairs.iter().enumerate() {
                self.diffeo_ref(&format!("{f}.cocycle.pairs[{i}]"), a)?;
                self.diffeo_ref(&format!("{f}.cocycle.pairs[{i}]"), b)?;
            }
            check_nodes(f, d.identity_component.nodes)?;
            self.metric_ref(&format!("{f}.identity_component.metric"), &d.identity_component.metric)?;
            self.diffeo_refs(&format!("{f}.identity_component.diffeos"), &d.identity_component.diffeos)?;
        }
        if let Some(m) = &e.mapping_torus {
            let f = "experiments.mapping_torus";
            check_nodes(f, m.nodes)?;
            self.metric_refs(&format!("{f}.metrics"), &m.metrics)?;
            self.diffeo_refs(&format!("{f}.diffeos"), &m.diffeos)?;
            if m.epsilons.iter().any(|e| !(*e > 0.0 && *e < 0.5)) {
                return Err(bad(&format!("{f}.epsilons"), "each ε must lie in (0, ½)"));
            }
            if let Some(r) = &m.orientation_reversing {
                check_nodes(f, r.nodes)?;
                self.metric_ref(&format!("{f}.orientation_reversing.metric"), &r.metric)?;
                self.diffeo_ref(&format!("{f}.orientation_reversing.diffeo"), &r.diffeo)?;
            }
        }
        if let Some(c) = &e.cotton {
            let f = "experiments.cotton";
            check_nodes(f, c.nodes)?;
            self.metric_ref(&format!("{f}.metric"), &c.metric)?;
            self.metric_ref(&format!("{f}.conformally_flat"), &c.conformally_flat)?;
            match self.metrics.get(&c.conformally_flat) {
                Some(MetricSpec::Conformal { .. } | MetricSpec::Flat | MetricSpec::Constant { .. }) => {}
                _ => return Err(bad(&format!("{f}.conformally_flat"), "must name a flat, constant or conformal metric")),
            }
        }
        if let Some(h) = &e.holonomy {
            let f = "experiments.holonomy";
            check_nodes(f, h.nodes)?;
            for (i, p) in h.paths.iter().enumerate() {
                if !self.paths.contains_key(p) {
                    return Err(bad(&format!("{f}.paths[{i}]"), format!("unknown path {p:?}")));
                }
            }
            if let Some(flat) = &h.flat {
                check_nodes(&format!("{f}.flat"), flat.nodes)?;
                self.metric_ref(&format!("{f}.flat.metric"), &flat.metric)?;
                for (i, d) in flat.data.iter().enumerate() {
                    self.diffeo_ref(&format!("{f}.flat.data[{i}].diffeo"), &d.diffeo)?;
                    if (d.kappa.is_none()) != (d.expect == Expect::Skip) {
                        return Err(bad(&format!("{f}.flat.data[{i}]"), "expect = \"skip\" exactly when no kappa is given"));
                    }
                }
            }
        }
        if let Some(l) = &e.ledger {
            if l.nu_bound == 0 {
                return Err(bad("experiments.ledger.nu_bound", "must be positive"));
            }
            let rationals = l
                .eta
                .iter()
                .map(|x| ("eta", &x.expect))
                .chain(l.conditions.iter().map(|x| ("conditions", &x.counterterm)))
                .chain(l.counterterms.iter().filter(|x| x.expect != "none").map(|x| ("counterterms", &x.expect)));
            for (section, r) in rationals {
                gravanom::torusbundle::rational_str::parse(r).map_err(|e| bad(&format!("experiments.ledger.{section}"), e))?;
            }
        }
        Ok(())
    }

    fn uses_randomness(&self) -> bool {
        self.metrics.values().any(MetricSpec::randomized)
            || self.diffeos.values().any(|d| matches!(d, DiffeoSpec::Flow { .. }))
            || self.paths.values().any(|p| match p {
                PathSpec::Class { bump, .. } | PathSpec::Between { bump, .. } => bump.is_some(),
                PathSpec::Samples { .. } => false,
            })
            || self.experiments.cs_action.is_some()
            || self.experiments.cotton.is_some()
    }

    fn compose_depth(&self, name: &str, depth: usize) -> Result<()> {
        if depth > self.diffeos.len() {
            return Err(bad(&format!("diffeos.{name}"), "composition cycle"));
        }
        if let Some(DiffeoSpec::Compose { maps }) = self.diffeos.get(name) {
            for m in maps {
                self.compose_depth(m, depth + 1)?;
            }
        }
        Ok(())
    }

    fn metric_ref(&self, field: &str, name: &str) -> Result<()> {
        if self.metrics.contains_key(name) {
            Ok(())
        } else {
            Err(bad(field, format!("unknown metric {name:?}; known: {:?}", self.metrics.keys().collect::<Vec<_>>())))
        }
    }

    fn metric_refs(&self, field: &str, names: &[String]) -> Result<()> {
        names.iter().enumerate().try_for_each(|(i, n)| self.metric_ref(&format!("{field}[{i}]"), n))
    }

    fn diffeo_ref(&self, field: &str, name: &str) -> Result<()> {
        if self.diffeos.contains_key(name) {
            Ok(())
        } else {
            Err(bad(field, format!("unknown diffeomorphism {name:?}; known: {:?}", self.diffeos.keys().collect::<Vec<_>>())))
        }
    }

    fn diffeo_refs(&self, field: &str, names: &[String]) -> Result<()> {
        names.iter().enumerate().try_for_each(|(i, n)| self.diffeo_ref(&format!("{field}[{i}]"), n))
    }
}

fn check_nodes(field: &str, nodes: usize) -> Result<()> {
    if (6..=96).contains(&nodes) {
        Ok(())
    } else {
        Err(bad(field, format!("grid resolution {nodes} outside 6..=96")))
    }
}

fn check_samples(field: &str, samples: usize) -> Result<()> {
    if samples >= 3 {
        Ok(())
    } else {
        Err(bad(field, "a path needs at least 3 samples"))
    }
}
