//! Exact mod-ℤ bookkeeping for anomaly cancellation: quarter-eta values of
//! operator families on closed 4-manifolds, Chern–Simons counterterms
//! `p = c·p₁`, and the multiplicity scan for Majorana fermions.
//!
//! Everything here is exact rational arithmetic.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torusbundle::{rational_str, ClosedFourManifoldEntry};

const BUILTIN: &str = include_str!("../data/ledger.toml");

#[cfg(test)]
fn rational(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// `x mod 1` in `[0, 1)`.
pub fn frac(x: &BigRational) -> BigRational {
    x - x.floor()
}

/// `¼η = coefficient · σ` on oriented manifolds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaRule {
    #[serde(with = "rational_str")]
    pub signature: BigRational,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorFamily {
    pub name: String,
    /// Dimension of the closed manifolds the family is evaluated on.
    pub dimension: u32,
    #[serde(default = "one")]
    pub multiplicity: u32,
    #[serde(default)]
    pub eta_rule: Option<EtaRule>,
    #[serde(default)]
    pub reference: Option<String>,
}

fn one() -> u32 {
    1
}

fn four() -> u32 {
    4
}

impl OperatorFamily {
    pub fn with_multiplicity(&self, nu: u32) -> Self {
        OperatorFamily { multiplicity: nu, ..self.clone() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    #[serde(flatten)]
    pub manifold: ClosedFourManifoldEntry,
    #[serde(default = "four")]
    pub dimension: u32,
    /// Whether the entry is (declared to be) a mapping torus of a 3-manifold.
    #[serde(default)]
    pub mapping_torus: bool,
    /// Direct quarter-eta values keyed by family name.
    #[serde(default, with = "rational_map")]
    pub eta_quarter: BTreeMap<String, BigRational>,
    #[serde(default)]
    pub reference: Option<String>,
    /// `p₁` of the orientable double cover, filled in by [`Ledger::resolve`].
    #[serde(skip)]
    pub cover_p1: Option<BigRational>,
}

impl LedgerEntry {
    pub fn oriented(name: &str, signature: BigRational) -> Self {
        let p1 = &signature * BigInt::from(3);
        LedgerEntry {
            manifold: ClosedFourManifoldEntry {
                name: name.into(),
                signature: Some(signature),
                p1: Some(p1),
                orientable: true,
                double_cover: None,
            },
            dimension: 4,
            mapping_torus: false,
            eta_quarter: BTreeMap::new(),
            reference: None,
            cover_p1: None,
        }
    }

    pub fn unorientable(name: &str, cover: &LedgerEntry) -> Self {
        LedgerEntry {
            manifold: ClosedFourManifoldEntry {
                name: name.into(),
                signature: None,
                p1: None,
                orientable: false,
                double_cover: Some(cover.name().into()),
            },
            dimension: 4,
            mapping_torus: false,
            eta_quarter: BTreeMap::new(),
            reference: None,
            cover_p1: cover.manifold.p1.clone(),
        }
    }

    pub fn with_eta(mut self, family: &str, value: BigRational) -> Self {
        self.eta_quarter.insert(family.into(), value);
        self
    }

    pub fn as_mapping_torus(mut self) -> Self {
        self.mapping_torus = true;
        self
    }

    pub fn name(&self) -> &str {
        &self.manifold.name
    }

    pub fn orientable(&self) -> bool {
        self.manifold.orientable
    }
}

mod rational_map {
    use std::collections::BTreeMap;

    use num_rational::BigRational;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &BTreeMap<String, BigRational>, s: S) -> Result<S::Ok, S::Error> {
        let strings: BTreeMap<&String, String> = m.iter().map(|(k, v)| (k, v.to_string())).collect();
        strings.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, BigRational>, D::Error> {
        let strings = BTreeMap::<String, String>::deserialize(d)?;
        strings
            .into_iter()
            .map(|(k, v)| super::rational_str::parse(&v).map(|r| (k, r)).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// A family table together with the manifolds it is evaluated on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ledger {
    #[serde(default, rename = "family")]
    pub families: Vec<OperatorFamily>,
    #[serde(default, rename = "entry")]
    pub entries: Vec<LedgerEntry>,
}

impl Ledger {
    /// The table shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_toml(BUILTIN).expect("built-in ledger is valid")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let mut ledger: Ledger = toml::from_str(text).map_err(|e| Error::Ledger(e.to_string()))?;
        ledger.resolve()?;
        Ok(ledger)
    }

    /// Validates every entry and attaches double-cover data.
    pub fn resolve(&mut self) -> Result<()> {
        let mut names = std::collections::BTreeSet::new();
        for e in &self.entries {
            if !names.insert(e.name().to_string()) {
                return Err(Error::Ledger(format!("duplicate entry {}", e.name())));
            }
            e.manifold.validate()?;
            if e.dimension != 4 {
                return Err(Error::Ledger(format!("{}: only 4-manifolds are supported, got {}", e.name(), e.dimension)));
            }
        }
        let covers: Vec<Option<BigRational>> = self
            .entries
            .iter()
            .map(|e| {
                let Some(cover) = &e.manifold.double_cover else { return Ok(None) };
                let c = self.entry(cover).ok_or_else(|| Error::Ledger(format!("{}: unknown double cover {cover}", e.name())))?;
                if !c.orientable() {
                    return Err(Error::Ledger(format!("{}: double cover {cover} is not orientable", e.name())));
                }
                Ok(c.manifold.p1.clone())
            })
            .collect::<Result<_>>()?;
        for (e, c) in self.entries.iter_mut().zip(covers) {
            e.cover_p1 = c;
        }
        Ok(())
    }

    pub fn entry(&self, name: &str) -> Option<&LedgerEntry> {
        self.entries.iter().find(|e| e.name() == name)
    }

    pub fn family(&self, name: &str) -> Result<&OperatorFamily> {
        self.families
            .iter()
            .find(|f| f.name == name)
            .ok_or_else(|| Error::Ledger(format!("unknown operator family {name}")))
    }

    /// Entries selected by `scope`, in table order.
    pub fn select(&self, scope: Scope) -> Vec<LedgerEntry> {
        self.entries.iter().filter(|e| scope.admits(e)).cloned().collect()
    }

    pub fn named(&self, names: &[&str]) -> Result<Vec<LedgerEntry>> {
        names
            .iter()
            .map(|n| self.entry(n).cloned().ok_or_else(|| Error::Ledger(format!("unknown entry {n}"))))
            .collect()
    }
}

/// `¼η_D(N) mod 1` for a single copy of the operator.
pub fn eta_quarter(fam: &OperatorFamily, e: &LedgerEntry) -> Result<BigRational> {
    if let Some(v) = e.eta_quarter.get(&fam.name) {
        return Ok(frac(v));
    }
    match (&fam.eta_rule, e.orientable(), &e.manifold.signature) {
        (Some(rule), true, Some(sigma)) => Ok(frac(&(&rule.signature * sigma))),
        _ => Err(Error::Ledger(format!(
            "family {} has no quarter-eta value for {} (no table entry, and the signature rule needs an oriented entry)",
            fam.name,
            e.name()
        ))),
    }
}

/// Which entries a condition is checked on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    All,
    MappingTori,
}

impl Scope {
    pub fn admits(self, e: &LedgerEntry) -> bool {
        match self {
            Scope::All => true,
            Scope::MappingTori => e.mapping_torus,
        }
    }
}

/// The anomaly-cancellation conditions, for `ν` copies of an operator and a
/// counterterm `p = c·p₁`:
///
/// | id | entries | congruence |
/// |----|---------|------------|
/// | `AnnomFinal` | oriented mapping tori | `ν·¼η(N) ≡ c·p₁(N)` |
/// | `AnnomFinalU` | oriented | `ν·¼η(N) ≡ c·p₁(N)` |
/// | `AnnomFinalW` | oriented | `ν·¼η(N) ≡ 0` |
/// | `Anomaly2` | mapping tori | `ν·¼η(N) ≡ ½c·p₁(Ñ)` |
/// | `AnnomFinalU2` | all | `ν·¼η(N) ≡ ½c·p₁(Ñ)` |
///
/// For an oriented `N` in the last two rows `Ñ` is a connected double
/// cover, so `½p₁(Ñ) = p₁(N)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Condition {
    AnnomFinal,
    AnnomFinalU,
    AnnomFinalW,
    Anomaly2,
    AnnomFinalU2,
}

impl Condition {
    pub const ALL: [Condition; 5] =
        [Condition::AnnomFinal, Condition::AnnomFinalU, Condition::AnnomFinalW, Condition::Anomaly2, Condition::AnnomFinalU2];

    pub fn oriented_only(self) -> bool {
        matches!(self, Condition::AnnomFinal | Condition::AnnomFinalU | Condition::AnnomFinalW)
    }

    /// Whether the congruence involves the counterterm at all.
    pub fn uses_counterterm(self) -> bool {
        self != Condition::AnnomFinalW
    }

    pub fn default_scope(self) -> Scope {
        match self {
            Condition::AnnomFinal | Condition::Anomaly2 => Scope::MappingTori,
            _ => Scope::All,
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl std::str::FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Condition::ALL
            .into_iter()
            .find(|c| c.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Ledger(format!("unknown condition {s:?}; expected one of {:?}", Condition::ALL)))
    }
}

/// `p = c·p₁` with `p₁` integer-normalized.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counterterm {
    pub c: BigRational,
}

impl Counterterm {
    pub fn zero() -> Self {
        Counterterm { c: BigRational::zero() }
    }

    pub fn new(c: BigRational) -> Self {
        Counterterm { c }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntryVerdict {
    pub name: String,
    /// `ν·¼η mod 1`.
    pub eta: BigRational,
    /// Coefficient `w` of `c` on the right-hand side.
    pub weight: BigRational,
    /// `c·w mod 1`.
    pub counterterm: BigRational,
    /// `(ν·¼η − c·w) mod 1`.
    pub residue: BigRational,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionVerdict {
    pub condition: Condition,
    pub multiplicity: u32,
    pub entries: Vec<EntryVerdict>,
    pub pass: bool,
}

/// Left- and right-hand data `(ν·¼η, w)` of one congruence.
fn congruence(cond: Condition, fam: &OperatorFamily, e: &LedgerEntry) -> Result<(BigRational, BigRational)> {
    if cond.oriented_only() && !e.orientable() {
        return Err(Error::Ledger(format!("{cond} is stated for oriented manifolds; {} is unorientable", e.name())));
    }
    let eta = frac(&(eta_quarter(fam, e)? * BigInt::from(fam.multiplicity)));
    let weight = if !cond.uses_counterterm() {
        BigRational::zero()
    } else if e.orientable() {
        e.manifold.p1.clone().expect("validated oriented entry")
    } else {
        let p1 = e
            .cover_p1
            .clone()
            .ok_or_else(|| Error::Ledger(format!("{}: double cover not resolved", e.name())))?;
        p1 / BigInt::from(2)
    };
    Ok((eta, weight))
}

pub fn check_condition(
    cond: Condition,
    fam: &OperatorFamily,
    ct: &Counterterm,
    entries: &[LedgerEntry],
) -> Result<ConditionVerdict> {
    let mut out = Vec::with_capacity(entries.len());
    for e in entries {
        let (eta, weight) = congruence(cond, fam, e)?;
        let counterterm = frac(&(&ct.c * &weight));
        let residue = frac(&(&eta - &counterterm));
        out.push(EntryVerdict { name: e.name().into(), pass: residue.is_zero(), eta, weight, counterterm, residue });
    }
    let pass = out.iter().all(|v| v.pass);
    Ok(ConditionVerdict { condition: cond, multiplicity: fam.multiplicity, entries: out, pass })
}

/// All solutions `c ∈ representative + period·ℤ`; `period = None` means any
/// `c` works.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountertermSolution {
    /// Least non-negative solution.
    pub representative: BigRational,
    pub period: Option<BigRational>,
}

impl CountertermSolution {
    pub fn counterterm(&self) -> Counterterm {
        Counterterm::new(self.representative.clone())
    }

    pub fn contains(&self, c: &BigRational) -> bool {
        match &self.period {
            None => true,
            Some(p) => ((c - &self.representative) / p).is_integer(),
        }
    }
}

/// Solves `ν·¼η(N) ≡ c·w(N) (mod 1)` for every entry. Each congruence with
/// `w ≠ 0` confines `c` to a coset of `(1/|w|)ℤ`; the cosets are intersected
/// by the generalized Chinese remainder theorem after clearing denominators.
pub fn solve_counterterm(fam: &OperatorFamily, entries: &[LedgerEntry], cond: Condition) -> Result<Option<CountertermSolution>> {
    let mut cosets: Vec<(BigRational, BigRational)> = Vec::new();
    for e in entries {
        let (eta, w) = congruence(cond, fam, e)?;
        if w.is_zero() {
            if !eta.is_zero() {
                return Ok(None);
            }
            continue;
        }
        let step = (BigRational::one() / &w).abs();
        cosets.push((&eta / &w, step));
    }
    if cosets.is_empty() {
        return Ok(Some(CountertermSolution { representative: BigRational::zero(), period: None }));
    }
    let scale = cosets
        .iter()
        .fold(BigInt::one(), |acc, (a, b)| acc.lcm(a.denom()).lcm(b.denom()));
    let mut residue = BigInt::zero();
    let mut modulus = BigInt::one();
    for (a, b) in &cosets {
        let ai = (a * &scale).to_integer();
        let bi = (b * &scale).to_integer();
        match crt(&residue, &modulus, &ai, &bi) {
            Some((r, m)) => {
                residue = r;
                modulus = m;
            }
            None => return Ok(None),
        }
    }
    let scale = BigRational::from_integer(scale);
    Ok(Some(CountertermSolution {
        representative: BigRational::from_integer(residue) / &scale,
        period: Some(BigRational::from_integer(modulus) / scale),
    }))
}

/// `x ≡ a₁ (m₁)`, `x ≡ a₂ (m₂)` → `x ≡ r (lcm)` with `0 ≤ r < lcm`.
fn crt(a1: &BigInt, m1: &BigInt, a2: &BigInt, m2: &BigInt) -> Option<(BigInt, BigInt)> {
    let e = m1.extended_gcd(m2);
    let g = e.gcd;
    let diff = a2 - a1;
    if !diff.is_multiple_of(&g) {
        return None;
    }
    let lcm = m1 / &g * m2;
    let k = (&diff / &g * e.x).mod_floor(&(m2 / &g));
    Some(((a1 + m1 * k).mod_floor(&lcm), lcm))
}

/// Smallest `ν` in `range` for which the condition can be met, together
/// with the counterterm solution.
pub fn min_multiplicity(
    fam: &OperatorFamily,
    entries: &[LedgerEntry],
    cond: Condition,
    range: std::ops::RangeInclusive<u32>,
) -> Result<Option<(u32, CountertermSolution)>> {
    for nu in range {
        if nu == 0 {
            continue;
        }
        if let Some(sol) = solve_counterterm(&fam.with_multiplicity(nu), entries, cond)? {
            return Ok(Some((nu, sol)));
        }
    }
    Ok(None)
}

/// Default multiplicity scan bound.
pub const DEFAULT_NU_BOUND: u32 = 64;
