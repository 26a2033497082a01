use crate::error::{invariant, Error, Result};
use crate::matching::{
    augment_to_good, max_matching, minimal_unmatchable_group, BipartiteGraph, BipartiteState,
};
use crate::model::{merge_divisibles, Instance, IntegralAllocation};
use crate::rational::Rational;

use super::water_fill::water_fill_goods;
use super::{to_allocation, Permutation};

/// The permutation-independent part of the `n < m <= 2n - 2` case.
#[derive(Debug, Clone)]
pub(crate) struct MidPlan {
    in_t: Vec<bool>,
    y: Vec<usize>,
    /// Fixed large good of every agent outside `T`.
    fixed: Vec<Option<usize>>,
    t_graph: BipartiteGraph,
}

impl MidPlan {
    pub(crate) fn new(inst: &Instance, b: &Rational) -> Result<MidPlan> {
        let (n, m) = (inst.n(), inst.m());
        if m <= n || m + 2 > 2 * n {
            return Err(Error::WrongRange { m, n, max: (2 * n).saturating_sub(2) });
        }
        let agents: Vec<usize> = (0..n).collect();
        let goods: Vec<usize> = (0..m).collect();
        let state = max_matching(BipartiteState::new(BipartiteGraph::from_values(inst, &agents, &goods, b)));
        let z = minimal_unmatchable_group(&state)?;
        let mut in_t = vec![false; n];
        z.agents.iter().for_each(|&i| in_t[i] = true);
        let mut fixed = vec![None; n];
        for i in (0..n).filter(|&i| !in_t[i]) {
            let g = state.matching.good_of(i);
            invariant(g.is_some_and(|g| z.goods.binary_search(&g).is_err()), || {
                format!("agent {i} outside the unmatchable group lacks a private large good")
            })?;
            fixed[i] = g;
        }
        let t_graph = BipartiteGraph::from_values(inst, &z.agents, &z.goods, b);
        Ok(MidPlan { in_t, y: z.goods, fixed, t_graph })
    }

    pub(crate) fn goods(&self, inst: &Instance, order: &Permutation) -> Result<Vec<Vec<usize>>> {
        let (n, m) = (inst.n(), inst.m());
        let mut taken = vec![false; m];
        let mut bundles = vec![Vec::new(); n];
        for (i, g) in self.fixed.iter().enumerate() {
            if let Some(g) = *g {
                bundles[i].push(g);
                taken[g] = true;
            }
        }

        let mut state = BipartiteState::new(self.t_graph.clone());
        let mut skipped = Vec::new();
        for &i in order.as_slice().iter().filter(|&&i| self.in_t[i]) {
            match augment_to_good(&state, i, &self.y)? {
                Some(next) => state = next,
                None => skipped.push(i),
            }
        }
        for (i, g) in state.matching.pairs() {
            bundles[i].push(g);
            taken[g] = true;
        }
        invariant(self.y.iter().all(|&g| taken[g]), || "a removed good stayed unallocated".into())?;

        let extra = &order.as_slice()[..m - n];
        let lowest_free = |taken: &[bool]| (0..m).find(|&g| !taken[g]);
        for &i in extra.iter().filter(|&&i| !self.in_t[i]) {
            let g = (0..m)
                .filter(|&g| !taken[g])
                .reduce(|best, g| if inst.u(i, g) > inst.u(i, best) { g } else { best });
            invariant(g.is_some(), || "ran out of goods for the second pass".into())?;
            let g = g.unwrap();
            taken[g] = true;
            bundles[i].push(g);
        }
        for &i in skipped.iter().chain(extra.iter().filter(|&&i| self.in_t[i])) {
            let g = lowest_free(&taken);
            invariant(g.is_some(), || "ran out of goods for the removed agents".into())?;
            let g = g.unwrap();
            taken[g] = true;
            bundles[i].push(g);
        }
        invariant(taken.iter().all(|&t| t), || "some good left unallocated".into())?;
        bundles.iter_mut().for_each(|b| b.sort_unstable());
        Ok(bundles)
    }
}

/// Matching plus a second Round-Robin pass, then water-filling, for
/// bi-valued instances with `n < m <= 2n - 2` indivisible goods.
pub fn solve_mid_m(inst: &Instance, order: &Permutation) -> Result<IntegralAllocation> {
    let (_, b) = inst.require_bi_valued()?;
    order.check_len(inst.n())?;
    let (merged, expansion) = merge_divisibles(inst);
    let plan = MidPlan::new(&merged, &b)?;
    let goods = plan.goods(&merged, order)?;
    let filled = water_fill_goods(&merged, goods)?;
    Ok(expansion.expand(&to_allocation(filled)))
}
