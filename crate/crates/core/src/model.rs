//! Instances, allocations and lotteries over exact rationals.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::Rational;

/// Value structure detected by scanning a utility matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValueTag {
    /// Every entry is `a` or `b` with `0 <= a < b`. Binary is `a = 0, b = 1`.
    BiValued { a: Rational, b: Rational },
    /// More than two distinct values.
    General { distinct: usize },
}

impl ValueTag {
    fn scan<'a>(values: impl Iterator<Item = &'a Rational>) -> ValueTag {
        let mut distinct: Vec<&Rational> = values.collect();
        distinct.sort();
        distinct.dedup();
        match distinct.as_slice() {
            [] => ValueTag::BiValued { a: Rational::zero(), b: Rational::one() },
            [v] if v.is_zero() => ValueTag::BiValued { a: Rational::zero(), b: Rational::one() },
            [v] => ValueTag::BiValued { a: *v / &Rational::from_integer(2), b: (*v).clone() },
            [a, b] => ValueTag::BiValued { a: (*a).clone(), b: (*b).clone() },
            more => ValueTag::General { distinct: more.len() },
        }
    }

    pub fn is_binary(&self) -> bool {
        matches!(self, ValueTag::BiValued { a, b } if a.is_zero() && *b == Rational::one())
    }

    pub fn bi_values(&self) -> Option<(Rational, Rational)> {
        match self {
            ValueTag::BiValued { a, b } => Some((a.clone(), b.clone())),
            ValueTag::General { .. } => None,
        }
    }
}

/// Wire format of an instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawInstance {
    pub agents: usize,
    pub indivisible: Vec<String>,
    #[serde(default)]
    pub divisible: Vec<String>,
    pub utilities: Vec<Vec<Rational>>,
}

/// A validated fair-division instance. Utility columns list the indivisible
/// goods first, then the divisible ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    indivisible: Vec<String>,
    divisible: Vec<String>,
    utilities: Vec<Vec<Rational>>,
    tag: ValueTag,
    indivisible_tag: ValueTag,
}

/// Checks a raw instance and tags its value structure.
pub fn validate_instance(raw: RawInstance) -> Result<Instance> {
    if raw.agents == 0 {
        return Err(Error::EmptyAgentSet);
    }
    if raw.utilities.len() != raw.agents {
        return Err(Error::Malformed(format!(
            "{} utility rows for {} agents",
            raw.utilities.len(),
            raw.agents
        )));
    }
    let width = raw.indivisible.len() + raw.divisible.len();
    for (i, row) in raw.utilities.iter().enumerate() {
        if row.len() != width {
            return Err(Error::Malformed(format!(
                "row {i} has {} entries, expected {width}",
                row.len()
            )));
        }
        if let Some(g) = row.iter().position(|v| v.is_negative()) {
            return Err(Error::NegativeUtility { agent: i, good: g });
        }
    }
    let m = raw.indivisible.len();
    let tag = ValueTag::scan(raw.utilities.iter().flatten());
    let indivisible_tag = ValueTag::scan(raw.utilities.iter().flat_map(|r| r[..m].iter()));
    Ok(Instance {
        indivisible: raw.indivisible,
        divisible: raw.divisible,
        utilities: raw.utilities,
        tag,
        indivisible_tag,
    })
}

fn default_names(prefix: &str, count: usize) -> Vec<String> {
    (1..=count).map(|k| format!("{prefix}{k}")).collect()
}

impl Instance {
    /// Builds an instance with generated good names (`g1..`, `d1..`).
    pub fn new(indivisible: Vec<Vec<Rational>>, divisible: Vec<Vec<Rational>>) -> Result<Instance> {
        let n = indivisible.len();
        if divisible.len() != n {
            return Err(Error::Malformed("row count mismatch between good kinds".into()));
        }
        let m = indivisible.first().map_or(0, Vec::len);
        let mbar = divisible.first().map_or(0, Vec::len);
        let utilities = indivisible
            .into_iter()
            .zip(divisible)
            .map(|(mut a, b)| {
                a.extend(b);
                a
            })
            .collect();
        validate_instance(RawInstance {
            agents: n,
            indivisible: default_names("g", m),
            divisible: default_names("d", mbar),
            utilities,
        })
    }

    /// Integer-valued convenience constructor.
    pub fn from_ints(indivisible: &[&[i64]], divisible: &[&[i64]]) -> Result<Instance> {
        let conv = |rows: &[&[i64]]| -> Vec<Vec<Rational>> {
            rows.iter()
                .map(|r| r.iter().map(|&v| Rational::from_integer(v)).collect())
                .collect()
        };
        let div = if divisible.is_empty() {
            vec![Vec::new(); indivisible.len()]
        } else {
            conv(divisible)
        };
        Instance::new(conv(indivisible), div)
    }

    pub fn to_raw(&self) -> RawInstance {
        RawInstance {
            agents: self.n(),
            indivisible: self.indivisible.clone(),
            divisible: self.divisible.clone(),
            utilities: self.utilities.clone(),
        }
    }

    pub fn n(&self) -> usize {
        self.utilities.len()
    }

    /// Number of indivisible goods.
    pub fn m(&self) -> usize {
        self.indivisible.len()
    }

    /// Number of divisible goods.
    pub fn m_bar(&self) -> usize {
        self.divisible.len()
    }

    pub fn indivisible_names(&self) -> &[String] {
        &self.indivisible
    }

    pub fn divisible_names(&self) -> &[String] {
        &self.divisible
    }

    /// Utility of agent `i` for indivisible good `g`.
    pub fn u(&self, i: usize, g: usize) -> &Rational {
        &self.utilities[i][g]
    }

    /// Utility of agent `i` for all of divisible good `k`.
    pub fn ud(&self, i: usize, k: usize) -> &Rational {
        &self.utilities[i][self.m() + k]
    }

    pub fn row(&self, i: usize) -> &[Rational] {
        &self.utilities[i]
    }

    pub fn tag(&self) -> &ValueTag {
        &self.tag
    }

    /// Tag computed over the indivisible columns only.
    pub fn indivisible_tag(&self) -> &ValueTag {
        &self.indivisible_tag
    }

    /// Returns `(a, b)` when the indivisible goods are bi-valued.
    pub fn require_bi_valued(&self) -> Result<(Rational, Rational)> {
        match &self.indivisible_tag {
            ValueTag::BiValued { a, b } => Ok((a.clone(), b.clone())),
            ValueTag::General { distinct } => Err(Error::NotBiValued { distinct: *distinct }),
        }
    }

    /// `u_i(M ∪ D)`.
    pub fn total(&self, i: usize) -> Rational {
        self.utilities[i].iter().sum()
    }

    pub fn goods_value(&self, i: usize, goods: &[usize]) -> Rational {
        goods.iter().map(|&g| &self.utilities[i][g]).sum()
    }

    pub fn bundle_value(&self, i: usize, bundle: &Bundle) -> Rational {
        let mut v = self.goods_value(i, &bundle.goods);
        for (k, x) in bundle.fractions.iter().enumerate() {
            if !x.is_zero() {
                v += x * self.ud(i, k);
            }
        }
        v
    }

    /// Instance on a subset of the indivisible goods with the divisible
    /// goods kept; returns the new instance and the original indices.
    pub fn restrict_indivisible(&self, goods: &[usize]) -> Instance {
        let m = self.m();
        let utilities = self
            .utilities
            .iter()
            .map(|row| {
                goods
                    .iter()
                    .map(|&g| row[g].clone())
                    .chain(row[m..].iter().cloned())
                    .collect()
            })
            .collect();
        validate_instance(RawInstance {
            agents: self.n(),
            indivisible: goods.iter().map(|&g| self.indivisible[g].clone()).collect(),
            divisible: self.divisible.clone(),
            utilities,
        })
        .expect("restriction of a valid instance is valid")
    }
}

/// One agent's share: a sorted set of indivisible goods and a fraction of
/// each divisible good.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Bundle {
    #[serde(rename = "indivisible")]
    pub goods: Vec<usize>,
    #[serde(rename = "divisible")]
    pub fractions: Vec<Rational>,
}

impl Bundle {
    pub fn empty(m_bar: usize) -> Bundle {
        Bundle { goods: Vec::new(), fractions: vec![Rational::zero(); m_bar] }
    }

    pub fn of_goods(mut goods: Vec<usize>, m_bar: usize) -> Bundle {
        goods.sort_unstable();
        Bundle { goods, fractions: vec![Rational::zero(); m_bar] }
    }

    pub fn has_divisible(&self) -> bool {
        self.fractions.iter().any(Rational::is_positive)
    }

    pub fn is_empty(&self) -> bool {
        self.goods.is_empty() && !self.has_divisible()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IntegralAllocation {
    pub bundles: Vec<Bundle>,
}

impl IntegralAllocation {
    pub fn from_goods(goods: Vec<Vec<usize>>, m_bar: usize) -> IntegralAllocation {
        IntegralAllocation {
            bundles: goods.into_iter().map(|g| Bundle::of_goods(g, m_bar)).collect(),
        }
    }

    pub fn empty(n: usize, m_bar: usize) -> IntegralAllocation {
        IntegralAllocation { bundles: vec![Bundle::empty(m_bar); n] }
    }

    pub fn has_divisible(&self) -> bool {
        self.bundles.iter().any(Bundle::has_divisible)
    }

    /// Structural checks; `complete` also requires every good to be handed out.
    pub fn validate(&self, inst: &Instance, complete: bool) -> Result<()> {
        let bad = |s: String| Err(Error::IncompleteAllocation(s));
        if self.bundles.len() != inst.n() {
            return bad(format!("{} bundles for {} agents", self.bundles.len(), inst.n()));
        }
        let mut owner = vec![None; inst.m()];
        for (i, b) in self.bundles.iter().enumerate() {
            if b.fractions.len() != inst.m_bar() {
                return bad(format!("bundle {i} lists {} fractions", b.fractions.len()));
            }
            for &g in &b.goods {
                if g >= inst.m() {
                    return bad(format!("good {g} does not exist"));
                }
                if let Some(j) = owner[g] {
                    return bad(format!("good {g} given to agents {j} and {i}"));
                }
                owner[g] = Some(i);
            }
            if b.fractions.iter().any(|x| x.is_negative() || *x > Rational::one()) {
                return bad(format!("bundle {i} has a fraction outside [0,1]"));
            }
        }
        for k in 0..inst.m_bar() {
            let s: Rational = self.bundles.iter().map(|b| &b.fractions[k]).sum();
            if s > Rational::one() || (complete && s != Rational::one()) {
                return bad(format!("divisible good {k} is allocated in total {s}"));
            }
        }
        if complete {
            if let Some(g) = owner.iter().position(Option::is_none) {
                return bad(format!("good {g} is unallocated"));
            }
        }
        Ok(())
    }

    pub fn to_fractional(&self, inst: &Instance) -> FractionalAllocation {
        let (m, n) = (inst.m(), inst.n());
        let mut matrix = vec![vec![Rational::zero(); m + inst.m_bar()]; n];
        for (i, b) in self.bundles.iter().enumerate() {
            for &g in &b.goods {
                matrix[i][g] = Rational::one();
            }
            for (k, x) in b.fractions.iter().enumerate() {
                matrix[i][m + k] = x.clone();
            }
        }
        FractionalAllocation { matrix }
    }

    pub fn values(&self, inst: &Instance) -> Vec<Rational> {
        (0..inst.n()).map(|i| inst.bundle_value(i, &self.bundles[i])).collect()
    }
}

/// `n × (m + m̄)` matrix of shares.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FractionalAllocation {
    pub matrix: Vec<Vec<Rational>>,
}

impl FractionalAllocation {
    pub fn validate(&self, inst: &Instance) -> Result<()> {
        let bad = |s: String| Err(Error::IncompleteAllocation(s));
        let width = inst.m() + inst.m_bar();
        if self.matrix.len() != inst.n() || self.matrix.iter().any(|r| r.len() != width) {
            return bad("matrix shape does not match the instance".into());
        }
        for g in 0..width {
            let mut s = Rational::zero();
            for row in &self.matrix {
                if row[g].is_negative() || row[g] > Rational::one() {
                    return bad(format!("entry for good {g} outside [0,1]"));
                }
                s += &row[g];
            }
            if s != Rational::one() {
                return bad(format!("good {g} column sums to {s}"));
            }
        }
        Ok(())
    }

    pub fn row_value(&self, inst: &Instance, viewer: usize, row: usize) -> Rational {
        let mut v = Rational::zero();
        for (g, x) in self.matrix[row].iter().enumerate() {
            if !x.is_zero() {
                v += x * &inst.row(viewer)[g];
            }
        }
        v
    }
}

/// Shared view used by the EF and PROP checkers.
pub trait AllocationLike {
    fn ensure_complete(&self, inst: &Instance) -> Result<()>;
    /// Value of `owner`'s share in the eyes of `viewer`.
    fn share_value(&self, inst: &Instance, viewer: usize, owner: usize) -> Rational;
}

impl AllocationLike for IntegralAllocation {
    fn ensure_complete(&self, inst: &Instance) -> Result<()> {
        self.validate(inst, true)
    }

    fn share_value(&self, inst: &Instance, viewer: usize, owner: usize) -> Rational {
        inst.bundle_value(viewer, &self.bundles[owner])
    }
}

impl AllocationLike for FractionalAllocation {
    fn ensure_complete(&self, inst: &Instance) -> Result<()> {
        self.validate(inst)
    }

    fn share_value(&self, inst: &Instance, viewer: usize, owner: usize) -> Rational {
        self.row_value(inst, viewer, owner)
    }
}

/// One support element of a lottery.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LotteryEntry {
    pub p: Rational,
    pub allocation: IntegralAllocation,
}

/// A finite lottery over integral allocations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RandomizedAllocation {
    pub support: Vec<LotteryEntry>,
}

impl RandomizedAllocation {
    pub fn singleton(allocation: IntegralAllocation) -> RandomizedAllocation {
        RandomizedAllocation { support: vec![LotteryEntry { p: Rational::one(), allocation }] }
    }

    /// Merges equal allocations and orders the support canonically.
    pub fn normalized(&self) -> RandomizedAllocation {
        let mut acc: BTreeMap<&IntegralAllocation, Rational> = BTreeMap::new();
        for e in &self.support {
            *acc.entry(&e.allocation).or_insert_with(Rational::zero) += &e.p;
        }
        RandomizedAllocation {
            support: acc
                .into_iter()
                .map(|(a, p)| LotteryEntry { p, allocation: a.clone() })
                .collect(),
        }
    }

    pub fn validate(&self, inst: &Instance) -> Result<()> {
        let mut total = Rational::zero();
        for e in &self.support {
            if e.p.is_negative() || e.p > Rational::one() {
                return Err(Error::Malformed(format!("probability {} outside [0,1]", e.p)));
            }
            e.allocation.validate(inst, false)?;
            total += &e.p;
        }
        if total != Rational::one() {
            return Err(Error::Malformed(format!("probabilities sum to {total}")));
        }
        Ok(())
    }
}

/// `X = Σ p_j X_j`.
pub fn expected_allocation(inst: &Instance, lottery: &RandomizedAllocation) -> FractionalAllocation {
    let (m, n) = (inst.m(), inst.n());
    let mut matrix = vec![vec![Rational::zero(); m + inst.m_bar()]; n];
    for e in &lottery.support {
        for (i, b) in e.allocation.bundles.iter().enumerate() {
            for &g in &b.goods {
                matrix[i][g] += &e.p;
            }
            for (k, x) in b.fractions.iter().enumerate() {
                if !x.is_zero() {
                    matrix[i][m + k] += &e.p * x;
                }
            }
        }
    }
    FractionalAllocation { matrix }
}

/// Maps allocations of a merged instance back to the original divisible goods.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DivisibleExpansion {
    m_bar: usize,
}

impl DivisibleExpansion {
    pub fn m_bar(&self) -> usize {
        self.m_bar
    }

    /// Fraction `ε` of the merged good becomes `ε` of every original one.
    pub fn expand_fraction(&self, eps: &Rational) -> Vec<Rational> {
        vec![eps.clone(); self.m_bar]
    }

    pub fn expand_bundle(&self, bundle: &Bundle) -> Bundle {
        let eps = bundle.fractions.first().cloned().unwrap_or_default();
        Bundle { goods: bundle.goods.clone(), fractions: self.expand_fraction(&eps) }
    }

    pub fn expand(&self, alloc: &IntegralAllocation) -> IntegralAllocation {
        IntegralAllocation { bundles: alloc.bundles.iter().map(|b| self.expand_bundle(b)).collect() }
    }
}

/// Collapses all divisible goods into one good `d` with `u_i(d) = u_i(D)`.
/// With no divisible goods, `d` is a synthetic zero-value good.
pub fn merge_divisibles(inst: &Instance) -> (Instance, DivisibleExpansion) {
    let m = inst.m();
    let utilities = (0..inst.n())
        .map(|i| {
            let row = inst.row(i);
            let d: Rational = row[m..].iter().sum();
            row[..m].iter().cloned().chain(std::iter::once(d)).collect()
        })
        .collect();
    let merged = validate_instance(RawInstance {
        agents: inst.n(),
        indivisible: inst.indivisible.clone(),
        divisible: vec!["d".to_string()],
        utilities,
    })
    .expect("merging keeps an instance valid");
    (merged, DivisibleExpansion { m_bar: inst.m_bar() })
}

/// Serializes with sorted keys, compact, newline-terminated.
pub fn to_canonical_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("serializable value");
    let mut s = serde_json::to_string(&v).expect("json value prints");
    s.push('\n');
    s
}
