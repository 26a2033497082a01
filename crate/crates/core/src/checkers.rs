//! Definition-level fairness predicates.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AllocationLike, Bundle, FractionalAllocation, Instance, IntegralAllocation};
use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Property {
    Ef,
    Prop,
    Ef1,
    Efx,
    Efm,
    Efxm,
    Fpo,
}

impl Property {
    pub const ALL: [Property; 7] = [
        Property::Ef,
        Property::Prop,
        Property::Ef1,
        Property::Efx,
        Property::Efm,
        Property::Efxm,
        Property::Fpo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::Ef => "ef",
            Property::Prop => "prop",
            Property::Ef1 => "ef1",
            Property::Efx => "efx",
            Property::Efm => "efm",
            Property::Efxm => "efxm",
            Property::Fpo => "fpo",
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Property {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Property::ALL
            .into_iter()
            .find(|p| p.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Malformed(format!("unknown property {s:?}")))
    }
}

/// Evidence that a property fails.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// `envier` strictly prefers `envied`'s share.
    Envy { envier: usize, envied: usize, own_value: Rational, other_value: Rational },
    /// Envy survives removing `good` from `envied`'s bundle.
    EnvyAfterRemoval {
        envier: usize,
        envied: usize,
        good: usize,
        own_value: Rational,
        other_value: Rational,
    },
    /// `agent` gets less than a proportional share.
    Shortfall { agent: usize, value: Rational, share: Rational, shortfall: Rational },
    /// A fractional allocation that weakly improves everyone and strictly someone.
    Dominated { allocation: FractionalAllocation },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub holds: bool,
    pub witness: Option<Witness>,
}

impl PropertyReport {
    pub fn holds() -> PropertyReport {
        PropertyReport { holds: true, witness: None }
    }

    pub fn fails(witness: Witness) -> PropertyReport {
        PropertyReport { holds: false, witness: Some(witness) }
    }
}

/// Envy-freeness for integral or fractional allocations.
pub fn check_ef<A: AllocationLike>(inst: &Instance, alloc: &A) -> Result<PropertyReport> {
    alloc.ensure_complete(inst)?;
    for i in 0..inst.n() {
        let own = alloc.share_value(inst, i, i);
        for j in 0..inst.n() {
            if i == j {
                continue;
            }
            let other = alloc.share_value(inst, i, j);
            if other > own {
                return Ok(PropertyReport::fails(Witness::Envy {
                    envier: i,
                    envied: j,
                    own_value: own,
                    other_value: other,
                }));
            }
        }
    }
    Ok(PropertyReport::holds())
}

pub fn check_prop<A: AllocationLike>(inst: &Instance, alloc: &A) -> Result<PropertyReport> {
    alloc.ensure_complete(inst)?;
    let n = Rational::from_integer(inst.n() as i64);
    for i in 0..inst.n() {
        let share = inst.total(i) / &n;
        let value = alloc.share_value(inst, i, i);
        if value < share {
            let shortfall = &share - &value;
            return Ok(PropertyReport::fails(Witness::Shortfall { agent: i, value, share, shortfall }));
        }
    }
    Ok(PropertyReport::holds())
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Removal {
    Some,
    Any,
}

/// The good whose removal is most favourable to the envier (EF1) or least
/// favourable (EFX). Lowest index on ties.
fn removal_good(inst: &Instance, viewer: usize, goods: &[usize], mode: Removal) -> Option<usize> {
    let mut best: Option<usize> = None;
    for &g in goods {
        best = match best {
            None => Some(g),
            Some(h) => {
                let better = match mode {
                    Removal::Some => inst.u(viewer, g) > inst.u(viewer, h),
                    Removal::Any => inst.u(viewer, g) < inst.u(viewer, h),
                };
                Some(if better { g } else { h })
            }
        };
    }
    best
}

fn pair_up_to_one(
    inst: &Instance,
    alloc: &IntegralAllocation,
    i: usize,
    j: usize,
    own: &Rational,
    mode: Removal,
) -> Option<Witness> {
    let bundle = &alloc.bundles[j];
    let g = removal_good(inst, i, &bundle.goods, mode)?;
    let other = inst.goods_value(i, &bundle.goods) - inst.u(i, g);
    (other > *own).then(|| Witness::EnvyAfterRemoval {
        envier: i,
        envied: j,
        good: g,
        own_value: own.clone(),
        other_value: other,
    })
}

fn check_indivisible_only(inst: &Instance, alloc: &IntegralAllocation, mode: Removal) -> Result<PropertyReport> {
    if alloc.has_divisible() {
        return Err(Error::DivisiblePresent);
    }
    alloc.validate(inst, false)?;
    let assigned: usize = alloc.bundles.iter().map(|b| b.goods.len()).sum();
    if assigned != inst.m() {
        return Err(Error::IncompleteAllocation(format!(
            "{assigned} of {} indivisible goods assigned",
            inst.m()
        )));
    }
    for i in 0..inst.n() {
        let own = inst.goods_value(i, &alloc.bundles[i].goods);
        for j in 0..inst.n() {
            if i != j {
                if let Some(w) = pair_up_to_one(inst, alloc, i, j, &own, mode) {
                    return Ok(PropertyReport::fails(w));
                }
            }
        }
    }
    Ok(PropertyReport::holds())
}

/// EF1 over indivisible goods.
pub fn check_ef1(inst: &Instance, alloc: &IntegralAllocation) -> Result<PropertyReport> {
    check_indivisible_only(inst, alloc, Removal::Some)
}

/// EFX over indivisible goods.
pub fn check_efx(inst: &Instance, alloc: &IntegralAllocation) -> Result<PropertyReport> {
    check_indivisible_only(inst, alloc, Removal::Any)
}

fn check_mixed(inst: &Instance, alloc: &IntegralAllocation, mode: Removal) -> Result<PropertyReport> {
    alloc.validate(inst, true)?;
    for i in 0..inst.n() {
        let own = inst.bundle_value(i, &alloc.bundles[i]);
        for j in 0..inst.n() {
            if i == j {
                continue;
            }
            let bundle: &Bundle = &alloc.bundles[j];
            if bundle.has_divisible() {
                let other = inst.bundle_value(i, bundle);
                if other > own {
                    return Ok(PropertyReport::fails(Witness::Envy {
                        envier: i,
                        envied: j,
                        own_value: own,
                        other_value: other,
                    }));
                }
            } else if let Some(w) = pair_up_to_one(inst, alloc, i, j, &own, mode) {
                return Ok(PropertyReport::fails(w));
            }
        }
    }
    Ok(PropertyReport::holds())
}

/// EFM: full EF toward bundles with a positive divisible share, EF1 otherwise.
pub fn check_efm(inst: &Instance, alloc: &IntegralAllocation) -> Result<PropertyReport> {
    check_mixed(inst, alloc, Removal::Some)
}

/// EFXM: as EFM with EFX toward all-indivisible bundles.
pub fn check_efxm(inst: &Instance, alloc: &IntegralAllocation) -> Result<PropertyReport> {
    check_mixed(inst, alloc, Removal::Any)
}

/// Dispatches on a property name.
pub fn check_property(inst: &Instance, alloc: &IntegralAllocation, property: Property) -> Result<PropertyReport> {
    match property {
        Property::Ef => check_ef(inst, alloc),
        Property::Prop => check_prop(inst, alloc),
        Property::Ef1 => check_ef1(inst, alloc),
        Property::Efx => check_efx(inst, alloc),
        Property::Efm => check_efm(inst, alloc),
        Property::Efxm => check_efxm(inst, alloc),
        Property::Fpo => crate::efx_fpo::check_fpo_lp(inst, alloc),
    }
}

impl Witness {
    /// Re-derives the violation from the definition.
    pub fn verify(&self, inst: &Instance, alloc: &IntegralAllocation) -> bool {
        match self {
            Witness::Envy { envier, envied, .. } => {
                let (i, j) = (*envier, *envied);
                i != j
                    && inst.bundle_value(i, &alloc.bundles[j]) > inst.bundle_value(i, &alloc.bundles[i])
            }
            Witness::EnvyAfterRemoval { envier, envied, good, .. } => {
                let (i, j) = (*envier, *envied);
                let b = &alloc.bundles[j];
                i != j
                    && b.goods.contains(good)
                    && inst.bundle_value(i, b) - inst.u(i, *good) > inst.bundle_value(i, &alloc.bundles[i])
            }
            Witness::Shortfall { agent, .. } => {
                let n = Rational::from_integer(inst.n() as i64);
                inst.bundle_value(*agent, &alloc.bundles[*agent]) < inst.total(*agent) / &n
            }
            Witness::Dominated { allocation } => {
                if allocation.validate(inst).is_err() {
                    return false;
                }
                let mut strict = false;
                for i in 0..inst.n() {
                    let new = allocation.row_value(inst, i, i);
                    let old = inst.bundle_value(i, &alloc.bundles[i]);
                    if new < old {
                        return false;
                    }
                    strict |= new > old;
                }
                strict
            }
        }
    }
}

pub const DEFAULT_BRUTE_FORCE_BUDGET: u128 = 10_000_000;

/// Every assignment of goods to agents satisfying `property`, in
/// lexicographic order of the assignment vector. Divisible goods move
/// together as one atomic good.
pub fn brute_force_property(
    inst: &Instance,
    property: Property,
    budget: u128,
) -> Result<Vec<IntegralAllocation>> {
    let n = inst.n();
    let slots = inst.m() + usize::from(inst.m_bar() > 0);
    let required = (n as u128).checked_pow(slots as u32).unwrap_or(u128::MAX);
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget });
    }
    let mut found = Vec::new();
    let mut assign = vec![0usize; slots];
    loop {
        let mut goods = vec![Vec::new(); n];
        for (g, &a) in assign.iter().enumerate().take(inst.m()) {
            goods[a].push(g);
        }
        let mut alloc = IntegralAllocation::from_goods(goods, inst.m_bar());
        if inst.m_bar() > 0 {
            alloc.bundles[assign[slots - 1]].fractions = vec![Rational::one(); inst.m_bar()];
        }
        if check_property(inst, &alloc, property)?.holds {
            found.push(alloc);
        }
        let mut pos = slots;
        loop {
            if pos == 0 {
                return Ok(found);
            }
            pos -= 1;
            assign[pos] += 1;
            if assign[pos] < n {
                break;
            }
            assign[pos] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Bundle;

    fn alloc(goods: Vec<Vec<usize>>) -> IntegralAllocation {
        IntegralAllocation::from_goods(goods, 0)
    }

    fn q(n: i64) -> Rational {
        Rational::from_integer(n)
    }

    #[test]
    fn ef_examples() {
        let inst = Instance::from_ints(&[&[], &[]], &[&[2], &[2]]).unwrap();
        let half = IntegralAllocation {
            bundles: vec![
                Bundle { goods: vec![], fractions: vec![Rational::new(1, 2)] },
                Bundle { goods: vec![], fractions: vec![Rational::new(1, 2)] },
            ],
        };
        assert!(check_ef(&inst, &half).unwrap().holds);

        let inst = Instance::from_ints(&[&[1], &[1]], &[]).unwrap();
        let a = alloc(vec![vec![0], vec![]]);
        let r = check_ef(&inst, &a).unwrap();
        assert!(!r.holds);
        assert!(matches!(r.witness, Some(Witness::Envy { envier: 1, envied: 0, .. })));
        assert!(r.witness.unwrap().verify(&inst, &a));

        let inst = Instance::from_ints(&[&[3, 1], &[1, 3]], &[]).unwrap();
        assert!(check_ef(&inst, &alloc(vec![vec![0], vec![1]])).unwrap().holds);
    }

    #[test]
    fn ef_requires_completeness() {
        let inst = Instance::from_ints(&[&[1, 1], &[1, 1]], &[]).unwrap();
        assert!(matches!(
            check_ef(&inst, &alloc(vec![vec![0], vec![]])),
            Err(Error::IncompleteAllocation(_))
        ));
    }

    #[test]
    fn prop_examples() {
        let inst = Instance::from_ints(&[&[4, 7]], &[]).unwrap();
        assert!(check_prop(&inst, &alloc(vec![vec![0, 1]])).unwrap().holds);

        let inst = Instance::from_ints(&[&[1, 1], &[1, 1]], &[]).unwrap();
        let r = check_prop(&inst, &alloc(vec![vec![], vec![0, 1]])).unwrap();
        match r.witness {
            Some(Witness::Shortfall { agent: 0, shortfall, .. }) => assert_eq!(shortfall, q(1)),
            other => panic!("unexpected {other:?}"),
        }

        let inst = Instance::from_ints(&[&[3, 1], &[1, 3]], &[]).unwrap();
        assert!(check_prop(&inst, &alloc(vec![vec![0], vec![1]])).unwrap().holds);
    }

    #[test]
    fn ef1_examples() {
        let inst = Instance::from_ints(&[&[1], &[1]], &[]).unwrap();
        assert!(check_ef1(&inst, &alloc(vec![vec![0], vec![]])).unwrap().holds);
        let inst = Instance::from_ints(&[&[1, 1], &[1, 1]], &[]).unwrap();
        assert!(!check_ef1(&inst, &alloc(vec![vec![0, 1], vec![]])).unwrap().holds);
        assert!(check_ef1(&inst, &alloc(vec![vec![0], vec![1]])).unwrap().holds);
        let mixed = Instance::from_ints(&[&[1], &[1]], &[&[1], &[1]]).unwrap();
        let mut a = alloc(vec![vec![0], vec![]]);
        for b in &mut a.bundles {
            b.fractions = vec![Rational::new(1, 2)];
        }
        assert_eq!(check_ef1(&mixed, &a), Err(Error::DivisiblePresent));
    }

    #[test]
    fn efx_examples() {
        let inst = Instance::from_ints(&[&[1, 1, 1], &[2, 1, 1]], &[]).unwrap();
        let a = alloc(vec![vec![0, 1], vec![2]]);
        let r = check_efx(&inst, &a).unwrap();
        assert_eq!(
            r.witness,
            Some(Witness::EnvyAfterRemoval {
                envier: 1,
                envied: 0,
                good: 1,
                own_value: q(1),
                other_value: q(2)
            })
        );
        assert!(r.witness.unwrap().verify(&inst, &a));
        assert!(!check_efx(&inst, &alloc(vec![vec![0, 2], vec![1]])).unwrap().holds);
        let inst = Instance::from_ints(&[&[5, 1], &[1, 5]], &[]).unwrap();
        assert!(check_efx(&inst, &alloc(vec![vec![1], vec![0]])).unwrap().holds);
    }

    #[test]
    fn efm_examples() {
        let inst = Instance::from_ints(&[&[1], &[1]], &[&[1], &[1]]).unwrap();
        let a = IntegralAllocation {
            bundles: vec![
                Bundle { goods: vec![0], fractions: vec![q(0)] },
                Bundle { goods: vec![], fractions: vec![q(1)] },
            ],
        };
        assert!(check_efm(&inst, &a).unwrap().holds);

        let inst = Instance::from_ints(&[&[1, 1], &[1, 1]], &[&[1], &[1]]).unwrap();
        let a = IntegralAllocation {
            bundles: vec![
                Bundle { goods: vec![0, 1], fractions: vec![q(0)] },
                Bundle { goods: vec![], fractions: vec![q(1)] },
            ],
        };
        assert!(check_efm(&inst, &a).unwrap().holds);
        assert!(check_efxm(&inst, &a).unwrap().holds);

        let inst = Instance::from_ints(&[&[1, 1], &[2, 1]], &[&[1], &[1]]).unwrap();
        assert!(check_efm(&inst, &a).unwrap().holds);
        let r = check_efxm(&inst, &a).unwrap();
        assert!(!r.holds);
        assert!(matches!(r.witness, Some(Witness::EnvyAfterRemoval { envier: 1, good: 1, .. })));
    }

    #[test]
    fn efm_zero_value_fraction_triggers_full_ef() {
        let inst = Instance::from_ints(&[&[1, 1], &[1, 1]], &[&[0], &[0]]).unwrap();
        let a = IntegralAllocation {
            bundles: vec![
                Bundle { goods: vec![0, 1], fractions: vec![q(1)] },
                Bundle { goods: vec![], fractions: vec![q(0)] },
            ],
        };
        assert!(!check_efm(&inst, &a).unwrap().holds);
    }

    #[test]
    fn brute_force_examples() {
        let inst = Instance::from_ints(&[&[1], &[1]], &[]).unwrap();
        assert_eq!(brute_force_property(&inst, Property::Efx, 100).unwrap().len(), 2);
        let inst = Instance::from_ints(&[&[1, 1], &[1, 1]], &[]).unwrap();
        let ef = brute_force_property(&inst, Property::Ef, 100).unwrap();
        assert_eq!(ef, vec![alloc(vec![vec![0], vec![1]]), alloc(vec![vec![1], vec![0]])]);
        let inst = Instance::from_ints(&[&[3, 1], &[3, 1]], &[]).unwrap();
        assert!(brute_force_property(&inst, Property::Ef, 100).unwrap().is_empty());
        assert!(matches!(
            brute_force_property(&inst, Property::Ef, 3),
            Err(Error::BudgetExceeded { required: 4, budget: 3 })
        ));
    }

    #[test]
    fn property_names_round_trip() {
        for p in Property::ALL {
            assert_eq!(p.name().parse::<Property>().unwrap(), p);
        }
        assert!("mms".parse::<Property>().is_err());
    }
}
