//! Bipartite agent–good graphs on large values, maximum matchings,
//! augmenting paths and minimal unmatchable groups.

use std::collections::VecDeque;
use std::fmt::Write;

use crate::error::{Error, Result};
use crate::model::Instance;
use crate::rational::Rational;

/// Agent and good ids index fixed universes; only the listed active
/// vertices take part.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteGraph {
    agents: Vec<usize>,
    goods: Vec<usize>,
    adj: Vec<Vec<usize>>,
    n_goods: usize,
}

impl BipartiteGraph {
    /// Builds a graph from an explicit edge list. Edges touching inactive
    /// vertices are dropped.
    pub fn new(
        n_agents: usize,
        n_goods: usize,
        agents: &[usize],
        goods: &[usize],
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> BipartiteGraph {
        let mut agent_on = vec![false; n_agents];
        let mut good_on = vec![false; n_goods];
        agents.iter().for_each(|&i| agent_on[i] = true);
        goods.iter().for_each(|&g| good_on[g] = true);
        let mut adj = vec![Vec::new(); n_agents];
        for (i, g) in edges {
            if agent_on[i] && good_on[g] {
                adj[i].push(g);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        let mut agents = agents.to_vec();
        let mut goods = goods.to_vec();
        agents.sort_unstable();
        goods.sort_unstable();
        BipartiteGraph { agents, goods, adj, n_goods }
    }

    /// Edge `(i, g)` whenever `u_i(g) = b`.
    pub fn from_values(inst: &Instance, agents: &[usize], goods: &[usize], b: &Rational) -> BipartiteGraph {
        let edges = agents
            .iter()
            .flat_map(|&i| goods.iter().filter(move |&&g| inst.u(i, g) == b).map(move |&g| (i, g)));
        BipartiteGraph::new(inst.n(), inst.m(), agents, goods, edges.collect::<Vec<_>>())
    }

    pub fn agents(&self) -> &[usize] {
        &self.agents
    }

    pub fn goods(&self) -> &[usize] {
        &self.goods
    }

    pub fn agent_universe(&self) -> usize {
        self.adj.len()
    }

    pub fn good_universe(&self) -> usize {
        self.n_goods
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    pub fn has_edge(&self, i: usize, g: usize) -> bool {
        self.adj[i].binary_search(&g).is_ok()
    }

    /// Neighbourhood of an agent set, ascending.
    pub fn gamma(&self, agents: &[usize]) -> Vec<usize> {
        let mut out: Vec<usize> = agents.iter().flat_map(|&i| self.adj[i].iter().copied()).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Graphviz rendering, matched edges in bold.
    pub fn to_dot(&self, matching: Option<&Matching>) -> String {
        let mut s = String::from("graph G {\n  rankdir=LR;\n");
        for &i in &self.agents {
            let _ = writeln!(s, "  a{i} [shape=circle];");
        }
        for &g in &self.goods {
            let _ = writeln!(s, "  g{g} [shape=box];");
        }
        for &i in &self.agents {
            for &g in &self.adj[i] {
                let bold = matching.is_some_and(|m| m.good_of(i) == Some(g));
                let style = if bold { " [style=bold]" } else { "" };
                let _ = writeln!(s, "  a{i} -- g{g}{style};");
            }
        }
        s.push_str("}\n");
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    agent_to_good: Vec<Option<usize>>,
    good_to_agent: Vec<Option<usize>>,
}

impl Matching {
    pub fn empty(n_agents: usize, n_goods: usize) -> Matching {
        Matching { agent_to_good: vec![None; n_agents], good_to_agent: vec![None; n_goods] }
    }

    pub fn good_of(&self, i: usize) -> Option<usize> {
        self.agent_to_good[i]
    }

    pub fn agent_of(&self, g: usize) -> Option<usize> {
        self.good_to_agent[g]
    }

    pub fn size(&self) -> usize {
        self.agent_to_good.iter().flatten().count()
    }

    /// Matched pairs in ascending agent order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.agent_to_good
            .iter()
            .enumerate()
            .filter_map(|(i, g)| g.map(|g| (i, g)))
            .collect()
    }

    pub fn assign(&mut self, i: usize, g: usize) {
        if let Some(old) = self.agent_to_good[i].take() {
            self.good_to_agent[old] = None;
        }
        if let Some(prev) = self.good_to_agent[g].take() {
            self.agent_to_good[prev] = None;
        }
        self.agent_to_good[i] = Some(g);
        self.good_to_agent[g] = Some(i);
    }

    pub fn unassign_agent(&mut self, i: usize) {
        if let Some(g) = self.agent_to_good[i].take() {
            self.good_to_agent[g] = None;
        }
    }
}

/// A graph together with a matching on it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteState {
    pub graph: BipartiteGraph,
    pub matching: Matching,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnmatchableGroup {
    pub agents: Vec<usize>,
    pub goods: Vec<usize>,
}

impl UnmatchableGroup {
    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }
}

impl BipartiteState {
    pub fn new(graph: BipartiteGraph) -> BipartiteState {
        let matching = Matching::empty(graph.agent_universe(), graph.good_universe());
        BipartiteState { graph, matching }
    }

    /// Depth-first augmenting search from agent `i`. At each agent a free
    /// target neighbour is taken first (lowest index); otherwise matched
    /// neighbours are explored in ascending order.
    fn dfs(&mut self, i: usize, seen: &mut [bool], target: &dyn Fn(usize) -> bool) -> bool {
        let free = self
            .graph
            .adj[i]
            .iter()
            .copied()
            .find(|&g| !seen[g] && self.matching.good_to_agent[g].is_none() && target(g));
        if let Some(g) = free {
            seen[g] = true;
            self.matching.assign(i, g);
            return true;
        }
        let neigh = self.graph.adj[i].clone();
        for g in neigh {
            if seen[g] {
                continue;
            }
            seen[g] = true;
            if let Some(owner) = self.matching.good_to_agent[g] {
                if owner != i && self.dfs(owner, seen, target) {
                    self.matching.assign(i, g);
                    return true;
                }
            }
        }
        false
    }

    fn augment_from(&mut self, i: usize, target: &dyn Fn(usize) -> bool) -> bool {
        let mut seen = vec![false; self.graph.good_universe()];
        self.dfs(i, &mut seen, target)
    }

    /// Checks that every matched pair is an edge between active vertices.
    pub fn is_consistent(&self) -> bool {
        self.matching.pairs().into_iter().all(|(i, g)| {
            self.graph.agents.binary_search(&i).is_ok() && self.graph.has_edge(i, g)
        })
    }

    /// True when no augmenting path exists.
    pub fn is_maximum(&self) -> bool {
        self.reach_from_unmatched().is_ok()
    }

    /// Alternating breadth-first reachability from every unmatched agent.
    fn reach_from_unmatched(&self) -> Result<UnmatchableGroup> {
        let g = &self.graph;
        let mut agent_seen = vec![false; g.agent_universe()];
        let mut good_seen = vec![false; g.good_universe()];
        let mut queue = VecDeque::new();
        for &i in &g.agents {
            if self.matching.agent_to_good[i].is_none() {
                agent_seen[i] = true;
                queue.push_back(i);
            }
        }
        while let Some(i) = queue.pop_front() {
            for &h in &g.adj[i] {
                if good_seen[h] || self.matching.agent_to_good[i] == Some(h) {
                    continue;
                }
                good_seen[h] = true;
                match self.matching.good_to_agent[h] {
                    None => return Err(Error::MatchingNotMaximum),
                    Some(o) => {
                        if !agent_seen[o] {
                            agent_seen[o] = true;
                            queue.push_back(o);
                        }
                    }
                }
            }
        }
        Ok(UnmatchableGroup {
            agents: (0..agent_seen.len()).filter(|&i| agent_seen[i]).collect(),
            goods: (0..good_seen.len()).filter(|&h| good_seen[h]).collect(),
        })
    }
}

/// Grows the state's matching to a maximum one, trying agents in index order.
pub fn max_matching(mut state: BipartiteState) -> BipartiteState {
    let agents = state.graph.agents.clone();
    for i in agents {
        if state.matching.agent_to_good[i].is_none() {
            state.augment_from(i, &|_| true);
        }
    }
    state
}

/// Agents reachable from unmatched agents by alternating paths, with their
/// neighbourhood.
pub fn minimal_unmatchable_group(state: &BipartiteState) -> Result<UnmatchableGroup> {
    state.reach_from_unmatched()
}

/// Applies an augmenting path from the unmatched agent `i` to a free good in
/// `targets`, if one exists.
pub fn augment_to_good(state: &BipartiteState, i: usize, targets: &[usize]) -> Result<Option<BipartiteState>> {
    if state.matching.agent_to_good[i].is_some() {
        return Err(Error::AgentAlreadyMatched(i));
    }
    let mut allowed = vec![false; state.graph.good_universe()];
    targets.iter().for_each(|&g| allowed[g] = true);
    let mut next = state.clone();
    if next.augment_from(i, &|g| allowed[g]) {
        Ok(Some(next))
    } else {
        Ok(None)
    }
}

/// A matching covering all of `agents` with goods from `goods`.
pub fn perfect_matching_between(graph: &BipartiteGraph, agents: &[usize], goods: &[usize]) -> Result<Matching> {
    let edges: Vec<(usize, usize)> = agents
        .iter()
        .flat_map(|&i| graph.neighbors(i).iter().map(move |&g| (i, g)))
        .collect();
    let sub = BipartiteGraph::new(graph.agent_universe(), graph.good_universe(), agents, goods, edges);
    let state = max_matching(BipartiteState::new(sub));
    if agents.iter().all(|&i| state.matching.good_of(i).is_some()) {
        Ok(state.matching)
    } else {
        Err(Error::NoPerfectMatching)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn graph(na: usize, ng: usize, edges: &[(usize, usize)]) -> BipartiteGraph {
        let agents: Vec<usize> = (0..na).collect();
        let goods: Vec<usize> = (0..ng).collect();
        BipartiteGraph::new(na, ng, &agents, &goods, edges.iter().copied())
    }

    #[test]
    fn max_matching_examples() {
        let full: Vec<_> = (0..3).flat_map(|i| (0..3).map(move |g| (i, g))).collect();
        assert_eq!(max_matching(BipartiteState::new(graph(3, 3, &full))).matching.size(), 3);
        let shared = max_matching(BipartiteState::new(graph(2, 2, &[(0, 0), (1, 0)])));
        assert_eq!(shared.matching.size(), 1);
        assert_eq!(max_matching(BipartiteState::new(graph(2, 2, &[]))).matching.size(), 0);
    }

    #[test]
    fn group_examples() {
        let full = max_matching(BipartiteState::new(graph(2, 2, &[(0, 0), (1, 1)])));
        assert!(minimal_unmatchable_group(&full).unwrap().is_empty());
        let none = max_matching(BipartiteState::new(graph(2, 2, &[])));
        let z = minimal_unmatchable_group(&none).unwrap();
        assert_eq!((z.agents, z.goods), (vec![0, 1], vec![]));
        let shared = max_matching(BipartiteState::new(graph(2, 2, &[(0, 0), (1, 0)])));
        let z = minimal_unmatchable_group(&shared).unwrap();
        assert_eq!((z.agents, z.goods), (vec![0, 1], vec![0]));
        let not_max = BipartiteState::new(graph(1, 1, &[(0, 0)]));
        assert_eq!(minimal_unmatchable_group(&not_max), Err(Error::MatchingNotMaximum));
    }

    #[test]
    fn augment_examples() {
        let s = BipartiteState::new(graph(1, 2, &[(0, 1)]));
        let next = augment_to_good(&s, 0, &[1]).unwrap().unwrap();
        assert_eq!(next.matching.good_of(0), Some(1));

        let mut s = BipartiteState::new(graph(2, 2, &[(0, 0), (1, 0), (1, 1)]));
        s.matching.assign(1, 0);
        let next = augment_to_good(&s, 0, &[0, 1]).unwrap().unwrap();
        assert_eq!(next.matching.good_of(0), Some(0));
        assert_eq!(next.matching.good_of(1), Some(1));

        assert_eq!(augment_to_good(&s, 0, &[]).unwrap(), None);
        assert_eq!(augment_to_good(&s, 1, &[1]), Err(Error::AgentAlreadyMatched(1)));
    }

    #[test]
    fn perfect_matching_examples() {
        let g = graph(2, 1, &[(0, 0), (1, 0)]);
        assert_eq!(perfect_matching_between(&g, &[], &[0]).unwrap().size(), 0);
        assert_eq!(perfect_matching_between(&g, &[0, 1], &[0]), Err(Error::NoPerfectMatching));
    }

    #[test]
    fn dot_output_lists_edges() {
        let s = max_matching(BipartiteState::new(graph(1, 1, &[(0, 0)])));
        let dot = s.graph.to_dot(Some(&s.matching));
        assert!(dot.contains("a0 -- g0 [style=bold];"));
    }

    fn brute_max(na: usize, ng: usize, edges: &[(usize, usize)]) -> usize {
        fn rec(i: usize, na: usize, used: &mut Vec<bool>, adj: &[Vec<usize>]) -> usize {
            if i == na {
                return 0;
            }
            let mut best = rec(i + 1, na, used, adj);
            for &g in &adj[i] {
                if !used[g] {
                    used[g] = true;
                    best = best.max(1 + rec(i + 1, na, used, adj));
                    used[g] = false;
                }
            }
            best
        }
        let mut adj = vec![Vec::new(); na];
        edges.iter().for_each(|&(i, g)| adj[i].push(g));
        rec(0, na, &mut vec![false; ng], &adj)
    }

    fn has_perfect(agents: &[usize], goods: &[usize], adj: &[Vec<usize>]) -> bool {
        let edges: Vec<_> = agents.iter().flat_map(|&i| adj[i].iter().map(move |&g| (i, g))).collect();
        let g = BipartiteGraph::new(adj.len(), 8, agents, goods, edges);
        perfect_matching_between(&g, agents, goods).is_ok()
    }

    fn arb_graph() -> impl Strategy<Value = (usize, usize, Vec<(usize, usize)>)> {
        (1usize..=8, 1usize..=8).prop_flat_map(|(na, ng)| {
            (Just(na), Just(ng), proptest::collection::vec((0..na, 0..ng), 0..=20))
        })
    }

    proptest! {
        #[test]
        fn maximum_size_matches_brute_force((na, ng, edges) in arb_graph()) {
            let s = max_matching(BipartiteState::new(graph(na, ng, &edges)));
            prop_assert!(s.is_consistent());
            prop_assert!(s.is_maximum());
            prop_assert_eq!(s.matching.size(), brute_max(na, ng, &edges));
        }

        #[test]
        fn group_invariants((na, ng, edges) in arb_graph()) {
            let g = graph(na, ng, &edges);
            let s = max_matching(BipartiteState::new(g.clone()));
            let z = minimal_unmatchable_group(&s).unwrap();
            let all: Vec<usize> = (0..na).collect();
            prop_assert_eq!(z.is_empty(), perfect_matching_between(&g, &all, &(0..ng).collect::<Vec<_>>()).is_ok());
            prop_assert_eq!(&z.goods, &g.gamma(&z.agents));
            if !z.is_empty() {
                prop_assert!(z.goods.len() < z.agents.len());
            }
            let rest_a: Vec<usize> = (0..na).filter(|i| !z.agents.contains(i)).collect();
            let rest_g: Vec<usize> = (0..ng).filter(|h| !z.goods.contains(h)).collect();
            prop_assert!(perfect_matching_between(&g, &rest_a, &rest_g).is_ok());
            for &i in &z.agents {
                for &h in &rest_g {
                    prop_assert!(!g.has_edge(i, h));
                }
            }
            // minimality: every nonempty proper S ⊂ Z that can be perfectly
            // matched into Γ(Z) leaves an edge from Z \ S into its matched goods
            let mut adj = vec![Vec::new(); na];
            edges.iter().for_each(|&(i, h)| adj[i].push(h));
            let k = z.agents.len();
            if k <= 8 {
                for mask in 1u32..(1 << k) - 1 {
                    let s_agents: Vec<usize> = (0..k).filter(|b| mask >> b & 1 == 1).map(|b| z.agents[b]).collect();
                    if !has_perfect(&s_agents, &z.goods, &adj) {
                        continue;
                    }
                    let sub_edges: Vec<_> = s_agents.iter().flat_map(|&i| adj[i].iter().map(move |&h| (i, h))).collect();
                    let sg = BipartiteGraph::new(na, ng, &s_agents, &z.goods, sub_edges);
                    let m = perfect_matching_between(&sg, &s_agents, &z.goods).unwrap();
                    let matched: Vec<usize> = m.pairs().into_iter().map(|(_, h)| h).collect();
                    let outside: Vec<usize> = z.agents.iter().copied().filter(|i| !s_agents.contains(i)).collect();
                    prop_assert!(outside.iter().any(|&i| matched.iter().any(|&h| g.has_edge(i, h))));
                }
            }
        }
    }
}
