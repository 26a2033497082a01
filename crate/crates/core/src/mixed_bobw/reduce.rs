//! Partial allocation that leaves at most `2n - 2` indivisible goods.

use serde::Serialize;

use crate::error::{invariant, Result};
use crate::matching::{max_matching, minimal_unmatchable_group, BipartiteGraph, BipartiteState};
use crate::model::Instance;
use crate::rational::Rational;

/// Output of the reduction. Every bundle holds exactly `t` goods.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PartialAllocation {
    pub bundles: Vec<Vec<usize>>,
    /// Agents removed as unmatchable, in order of removal.
    pub removed_agents: Vec<usize>,
    /// Goods removed together with them.
    pub removed_goods: Vec<usize>,
    /// Goods left after the top-up.
    pub leftover: Vec<usize>,
    pub cnt: usize,
    pub t: usize,
}

impl PartialAllocation {
    /// `Y ∪ V`, ascending.
    pub fn residual_goods(&self) -> Vec<usize> {
        let mut r: Vec<usize> = self.removed_goods.iter().chain(&self.leftover).copied().collect();
        r.sort_unstable();
        r
    }
}

/// Matches everyone still matchable to a large good each round, setting
/// aside minimal unmatchable groups with their neighbourhoods, until fewer
/// than `cnt + n` goods remain; then tops every bundle up to the same size.
pub fn reduce_instance(inst: &Instance, b: &Rational) -> Result<PartialAllocation> {
    let n = inst.n();
    let mut remaining: Vec<usize> = (0..inst.m()).collect();
    let mut in_t = vec![false; n];
    let mut removed_agents = Vec::new();
    let mut removed_goods = Vec::new();
    let mut bundles = vec![Vec::new(); n];
    let mut cnt = 0;
    let mut t = 1;
    while remaining.len() >= cnt + n {
        let active: Vec<usize> = (0..n).filter(|&i| !in_t[i]).collect();
        let graph = BipartiteGraph::from_values(inst, &active, &remaining, b);
        let state = max_matching(BipartiteState::new(graph));
        let z = minimal_unmatchable_group(&state)?;
        for &i in &z.agents {
            in_t[i] = true;
            removed_agents.push(i);
        }
        removed_goods.extend(&z.goods);
        remaining.retain(|g| z.goods.binary_search(g).is_err());
        if remaining.len() < cnt + n {
            break;
        }
        let mut taken = Vec::new();
        for i in (0..n).filter(|&i| !in_t[i]) {
            let g = state.matching.good_of(i);
            invariant(g.is_some(), || format!("agent {i} outside the group is unmatched"))?;
            let g = g.unwrap();
            bundles[i].push(g);
            taken.push(g);
        }
        remaining.retain(|g| !taken.contains(g));
        cnt += removed_agents.len();
        t += 1;
    }
    t -= 1;
    let mut topped = 0;
    for bundle in bundles.iter_mut() {
        while bundle.len() < t {
            invariant(!remaining.is_empty(), || "top-up ran out of goods".into())?;
            bundle.push(remaining.remove(0));
            topped += 1;
        }
        bundle.sort_unstable();
    }
    invariant(topped == cnt, || format!("topped up {topped} goods, counter is {cnt}"))?;
    removed_goods.sort_unstable();
    Ok(PartialAllocation { bundles, removed_agents, removed_goods, leftover: remaining, cnt, t })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_large_goods() {
        let inst = Instance::from_ints(&[&[2; 5], &[2; 5]], &[]).unwrap();
        let p = reduce_instance(&inst, &Rational::from_integer(2)).unwrap();
        assert_eq!(p.t, 2);
        assert_eq!(p.leftover, vec![4]);
        assert!(p.removed_agents.is_empty());
        assert!(p.bundles.iter().all(|b| b.len() == 2));
    }

    #[test]
    fn fewer_goods_than_agents() {
        let inst = Instance::from_ints(&[&[1, 2], &[2, 1], &[1, 1]], &[]).unwrap();
        let p = reduce_instance(&inst, &Rational::from_integer(2)).unwrap();
        assert_eq!(p.t, 0);
        assert_eq!(p.residual_goods(), vec![0, 1]);
    }

    #[test]
    fn nobody_values_anything_highly() {
        let inst = Instance::from_ints(&[&[1; 5], &[1; 5]], &[]).unwrap();
        let p = reduce_instance(&inst, &Rational::from_integer(2)).unwrap();
        assert_eq!(p.removed_agents, vec![0, 1]);
        assert!(p.removed_goods.is_empty());
        assert_eq!(p.t, 2);
        assert_eq!(p.bundles, vec![vec![0, 1], vec![2, 3]]);
        assert_eq!(p.leftover, vec![4]);
    }
}
