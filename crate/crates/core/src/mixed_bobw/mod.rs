//! n-agent mixed goods: a lottery that is proportional in expectation and
//! EFM after every draw, for bi-valued indivisible goods (or any additive
//! utilities when goods do not outnumber agents).

mod mid_m;
mod reduce;
mod small_m;
mod water_fill;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{merge_divisibles, DivisibleExpansion, Instance, IntegralAllocation};
use crate::rational::Rational;

pub use mid_m::solve_mid_m;
pub use reduce::{reduce_instance, PartialAllocation};
pub use small_m::solve_small_m;
pub use water_fill::water_fill;

use mid_m::MidPlan;
use small_m::round_robin_goods;
use water_fill::water_fill_goods;

/// A bijection on the agents, listed in picking order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(order: Vec<usize>) -> Result<Permutation> {
        let mut seen = vec![false; order.len()];
        for &i in &order {
            if i >= order.len() || seen[i] {
                return Err(Error::Malformed(format!("{order:?} is not a permutation")));
            }
            seen[i] = true;
        }
        Ok(Permutation(order))
    }

    pub fn identity(n: usize) -> Permutation {
        Permutation((0..n).collect())
    }

    /// Uniformly random permutation determined by `seed`.
    pub fn from_seed(n: usize, seed: u64) -> Permutation {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Permutation(order)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if self.0.len() == n {
            Ok(())
        } else {
            Err(Error::WrongAgentCount { expected: n, found: self.0.len() })
        }
    }
}

pub(crate) fn to_allocation(filled: Vec<(Vec<usize>, Rational)>) -> IntegralAllocation {
    let mut alloc = IntegralAllocation::from_goods(filled.iter().map(|(g, _)| g.clone()).collect(), 1);
    for (bundle, (_, eps)) in alloc.bundles.iter_mut().zip(filled) {
        bundle.fractions[0] = eps;
    }
    alloc
}

#[derive(Debug, Clone)]
enum ResidualPlan {
    Small,
    Mid(MidPlan),
}

#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone)]
enum Plan {
    Small,
    Reduced {
        partial: PartialAllocation,
        /// Residual-local index to original good index.
        residual_goods: Vec<usize>,
        residual: Instance,
        plan: ResidualPlan,
    },
}

/// One draw of the pipeline with the indivisible allocation that was
/// handed to water-filling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropEfmDraw {
    pub before_fill: Vec<Vec<usize>>,
    pub allocation: IntegralAllocation,
}

/// The pipeline with all permutation-independent work done once, so that
/// many permutations can be evaluated cheaply.
#[derive(Debug, Clone)]
pub struct PropEfmSolver {
    merged: Instance,
    expansion: DivisibleExpansion,
    plan: Plan,
}

impl PropEfmSolver {
    pub fn new(inst: &Instance) -> Result<PropEfmSolver> {
        let (merged, expansion) = merge_divisibles(inst);
        let (n, m) = (merged.n(), merged.m());
        if m <= n {
            return Ok(PropEfmSolver { merged, expansion, plan: Plan::Small });
        }
        let (_, b) = merged.require_bi_valued()?;
        let partial = reduce_instance(&merged, &b)?;
        let residual_goods = partial.residual_goods();
        let residual = merged.restrict_indivisible(&residual_goods);
        let plan = if residual_goods.len() <= n {
            ResidualPlan::Small
        } else {
            ResidualPlan::Mid(MidPlan::new(&residual, &b)?)
        };
        Ok(PropEfmSolver { merged, expansion, plan: Plan::Reduced { partial, residual_goods, residual, plan } })
    }

    pub fn n(&self) -> usize {
        self.merged.n()
    }

    /// The reduction's partial allocation, if one was needed.
    pub fn partial(&self) -> Option<&PartialAllocation> {
        match &self.plan {
            Plan::Small => None,
            Plan::Reduced { partial, .. } => Some(partial),
        }
    }

    pub fn solve(&self, order: &Permutation) -> Result<IntegralAllocation> {
        Ok(self.solve_detailed(order)?.allocation)
    }

    pub fn solve_detailed(&self, order: &Permutation) -> Result<PropEfmDraw> {
        order.check_len(self.n())?;
        let (before_fill, filled) = match &self.plan {
            Plan::Small => {
                let goods = round_robin_goods(&self.merged, order);
                (goods.clone(), water_fill_goods(&self.merged, goods)?)
            }
            Plan::Reduced { partial, residual_goods, residual, plan } => {
                let local = match plan {
                    ResidualPlan::Small => round_robin_goods(residual, order),
                    ResidualPlan::Mid(mid) => mid.goods(residual, order)?,
                };
                let to_global = |goods: &[usize]| goods.iter().map(|&g| residual_goods[g]).collect::<Vec<_>>();
                let before = partial
                    .bundles
                    .iter()
                    .zip(&local)
                    .map(|(p, l)| {
                        let mut all = p.clone();
                        all.extend(to_global(l));
                        all.sort_unstable();
                        all
                    })
                    .collect();
                let filled = water_fill_goods(residual, local)?
                    .into_iter()
                    .zip(&partial.bundles)
                    .map(|((l, eps), p)| {
                        let mut all = p.clone();
                        all.extend(to_global(&l));
                        all.sort_unstable();
                        (all, eps)
                    })
                    .collect();
                (before, filled)
            }
        };
        Ok(PropEfmDraw { before_fill, allocation: self.expansion.expand(&to_allocation(filled)) })
    }
}

/// Draws a uniformly random picking order from `seed` and runs the pipeline.
pub fn solve_prop_efm(inst: &Instance, seed: u64) -> Result<IntegralAllocation> {
    PropEfmSolver::new(inst)?.solve(&Permutation::from_seed(inst.n(), seed))
}
