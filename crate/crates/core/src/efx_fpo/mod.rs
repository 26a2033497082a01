//! Match-and-freeze for bi-valued indivisible goods: EF in expectation over
//! the picking order, EFX and fractionally Pareto-optimal after every draw.

mod certificate;
mod lp;

use serde::Serialize;

use crate::error::{invariant, Error, Result};
use crate::matching::{
    augment_to_good, max_matching, minimal_unmatchable_group, BipartiteGraph, BipartiteState, UnmatchableGroup,
};
use crate::mixed_bobw::Permutation;
use crate::model::{Instance, IntegralAllocation};
use crate::rational::Rational;

pub use certificate::{build_fisher_certificate, FisherCertificate};
pub use lp::check_fpo_lp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum AgentStatus {
    Active,
    Frozen { rounds_left: usize },
    Quiet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AgentState {
    #[serde(flatten)]
    pub status: AgentStatus,
    pub reserved: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Swap {
    pub agent: usize,
    pub returned: usize,
    pub taken: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoundEvent {
    pub round: usize,
    pub group: Vec<usize>,
    pub neighbourhood: Vec<usize>,
    pub swaps: Vec<Swap>,
    /// `(agent, good)` pairs handed out this round.
    pub matched: Vec<(usize, usize)>,
    pub frozen: Vec<usize>,
    pub quiet: Vec<usize>,
    pub cnt: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FinalStage {
    pub candidates: Vec<usize>,
    pub augmented: Vec<usize>,
    pub failed: Vec<usize>,
    /// `(agent, good)` pairs of the closing assignment of reserved goods.
    pub clearing: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EfxFpoTrace {
    pub order: Permutation,
    pub low: Rational,
    pub high: Rational,
    pub freeze_rounds: usize,
    pub rounds: Vec<RoundEvent>,
    pub final_stage: FinalStage,
    /// Index of the round whose unmatchable group removed the agent.
    pub group_of: Vec<Option<usize>>,
    pub frozen_ever: Vec<bool>,
    pub states: Vec<AgentState>,
    pub max_swap_iterations: usize,
}

struct Run<'a> {
    inst: &'a Instance,
    a: Rational,
    b: Rational,
    /// Agents never placed in an unmatchable group, ascending.
    remaining: Vec<usize>,
    /// Unallocated goods, ascending.
    pool: Vec<usize>,
    bundles: Vec<Vec<usize>>,
    states: Vec<AgentState>,
    cnt: usize,
    unfrozen_rounds: Vec<usize>,
    group_of: Vec<Option<usize>>,
    frozen_ever: Vec<bool>,
}

impl Run<'_> {
    fn is_high(&self, i: usize, g: usize) -> bool {
        *self.inst.u(i, g) == self.b
    }

    fn matched_state(&self) -> Result<(BipartiteState, UnmatchableGroup)> {
        let graph = BipartiteGraph::from_values(self.inst, &self.remaining, &self.pool, &self.b);
        let state = max_matching(BipartiteState::new(graph));
        let group = minimal_unmatchable_group(&state)?;
        Ok((state, group))
    }

    fn unfrozen(&self) -> usize {
        self.states.iter().filter(|s| !matches!(s.status, AgentStatus::Frozen { .. })).count()
    }

    fn give(&mut self, i: usize, g: usize) {
        self.bundles[i].push(g);
        self.pool.retain(|&h| h != g);
    }

    /// Envy only inside a group, from a never-frozen agent toward a frozen
    /// one, and then only up to any single good. Reserved goods count as
    /// low-valued goods for everyone.
    fn check_round_property(&self) -> Result<()> {
        let n = self.inst.n();
        let with_reserved = |i: usize, j: usize| {
            self.inst.goods_value(i, &self.bundles[j]) + &self.a * &Rational::from_integer(self.states[j].reserved as i64)
        };
        for i in 0..n {
            let own = with_reserved(i, i);
            for j in (0..n).filter(|&j| j != i) {
                let other = with_reserved(i, j);
                if other <= own {
                    continue;
                }
                let excused = self.group_of[i].is_some()
                    && self.group_of[i] == self.group_of[j]
                    && !self.frozen_ever[i]
                    && self.frozen_ever[j];
                let cheapest = self.bundles[j]
                    .iter()
                    .map(|&g| self.inst.u(i, g).clone())
                    .chain((self.states[j].reserved > 0).then(|| self.a.clone()))
                    .min();
                let efx = cheapest.is_some_and(|c| &other - &c <= own);
                invariant(excused && efx, || format!("agent {i} envies agent {j} after a round"))?;
            }
        }
        Ok(())
    }
}

/// Options for [`run_efx_fpo`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Re-check the per-round envy property after every round.
    pub check_rounds: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { check_rounds: true }
    }
}

fn preconditions(inst: &Instance) -> Result<Option<(Rational, Rational)>> {
    if inst.m_bar() > 0 {
        return Err(Error::DivisiblePresent);
    }
    if inst.m() == 0 {
        return Ok(None);
    }
    let (a, b) = inst.require_bi_valued()?;
    if a.is_zero() {
        return Err(Error::ZeroLowValue);
    }
    Ok(Some((a, b)))
}

/// Runs the algorithm for the picking order `order`.
pub fn solve_efx_fpo(inst: &Instance, order: &Permutation) -> Result<IntegralAllocation> {
    Ok(run_efx_fpo(inst, order, RunOptions::default())?.0)
}

/// Runs the algorithm and records what happened.
pub fn run_efx_fpo(inst: &Instance, order: &Permutation, opts: RunOptions) -> Result<(IntegralAllocation, EfxFpoTrace)> {
    let Some((a, b)) = preconditions(inst)? else {
        order.check_len(inst.n())?;
        let n = inst.n();
        let trace = EfxFpoTrace {
            order: order.clone(),
            low: Rational::zero(),
            high: Rational::zero(),
            freeze_rounds: 0,
            rounds: Vec::new(),
            final_stage: FinalStage { candidates: vec![], augmented: vec![], failed: vec![], clearing: vec![] },
            group_of: vec![None; n],
            frozen_ever: vec![false; n],
            states: vec![AgentState { status: AgentStatus::Active, reserved: 0 }; n],
            max_swap_iterations: 0,
        };
        return Ok((IntegralAllocation::empty(n, 0), trace));
    };
    order.check_len(inst.n())?;
    let (n, m) = (inst.n(), inst.m());
    let freeze: usize = (&b / &a).floor().try_into().map_err(|_| Error::Malformed("value ratio too large".into()))?;
    let freeze = freeze - 1;
    let mut run = Run {
        inst,
        a: a.clone(),
        b: b.clone(),
        remaining: (0..n).collect(),
        pool: (0..m).collect(),
        bundles: vec![Vec::new(); n],
        states: vec![AgentState { status: AgentStatus::Active, reserved: 0 }; n],
        cnt: 0,
        unfrozen_rounds: vec![0; n],
        group_of: vec![None; n],
        frozen_ever: vec![false; n],
    };
    let mut rounds = Vec::new();
    let mut max_swap_iterations = 0;
    let swap_bound = n * n + n;
    let mut round = 0;

    while run.pool.len() >= run.unfrozen() + run.cnt {
        for i in 0..n {
            if !matches!(run.states[i].status, AgentStatus::Frozen { .. }) {
                run.unfrozen_rounds[i] += 1;
            }
        }
        let (mut state, mut group) = run.matched_state()?;
        let mut swaps = Vec::new();
        loop {
            if group.is_empty() {
                break;
            }
            let found = run
                .remaining
                .iter()
                .filter(|i| group.agents.binary_search(i).is_err())
                .find_map(|&i| {
                    run.bundles[i]
                        .iter()
                        .copied()
                        .filter(|&g| group.agents.iter().any(|&j| run.is_high(j, g)))
                        .min()
                        .map(|g| (i, g))
                });
            let Some((i, g)) = found else { break };
            invariant(swaps.len() < swap_bound, || format!("swap loop exceeded {swap_bound} iterations"))?;
            let g2 = state.matching.good_of(i);
            invariant(g2.is_some(), || format!("agent {i} outside the group is unmatched"))?;
            let g2 = g2.unwrap();
            run.bundles[i].retain(|&h| h != g);
            run.bundles[i].push(g2);
            run.pool.retain(|&h| h != g2);
            run.pool.push(g);
            run.pool.sort_unstable();
            swaps.push(Swap { agent: i, returned: g, taken: g2 });
            (state, group) = run.matched_state()?;
        }
        max_swap_iterations = max_swap_iterations.max(swaps.len());

        let mut matched = Vec::new();
        let mut frozen_now = Vec::new();
        let mut received = vec![false; n];
        if group.is_empty() {
            for &i in &run.remaining {
                let g = state.matching.good_of(i);
                invariant(g.is_some(), || "perfect matching does not cover every agent".into())?;
                matched.push((i, g.unwrap()));
            }
        } else {
            for &i in &group.agents {
                invariant(run.bundles[i].iter().all(|&g| run.is_high(i, g)), || {
                    format!("group agent {i} holds a low-valued good")
                })?;
                let outside = run.remaining.iter().filter(|j| group.agents.binary_search(j).is_err());
                for &j in outside {
                    invariant(run.bundles[j].iter().all(|&g| !run.is_high(i, g)), || {
                        format!("group agent {i} values a good of agent {j} highly")
                    })?;
                }
            }
            let graph = BipartiteGraph::from_values(inst, &group.agents, &group.goods, &b);
            let mut inner = BipartiteState::new(graph);
            for &i in order.as_slice().iter().rev().filter(|i| group.agents.binary_search(i).is_ok()) {
                match augment_to_good(&inner, i, &group.goods)? {
                    Some(next) => {
                        inner = next;
                        frozen_now.push(i);
                    }
                    None => run.states[i].status = AgentStatus::Quiet,
                }
            }
            invariant(inner.matching.size() == group.goods.len(), || "a neighbourhood good was left over".into())?;
            matched.extend(inner.matching.pairs());
            for &i in &frozen_now {
                run.frozen_ever[i] = true;
                run.states[i].status =
                    if freeze > 0 { AgentStatus::Frozen { rounds_left: freeze } } else { AgentStatus::Quiet };
            }
            for &i in run.remaining.iter().filter(|i| group.agents.binary_search(i).is_err()) {
                let g = state.matching.good_of(i);
                invariant(g.is_some_and(|g| group.goods.binary_search(&g).is_err()), || {
                    format!("agent {i} lacks a good outside the neighbourhood")
                })?;
                matched.push((i, g.unwrap()));
            }
            for &i in &group.agents {
                run.group_of[i] = Some(round);
            }
            run.remaining.retain(|i| group.agents.binary_search(i).is_err());
        }
        matched.sort_unstable();
        for &(i, g) in &matched {
            run.give(i, g);
            received[i] = true;
        }
        let quiet: Vec<usize> =
            (0..n).filter(|&i| run.states[i].status == AgentStatus::Quiet && !received[i]).collect();
        run.cnt += quiet.len();
        for &i in &quiet {
            run.states[i].reserved += 1;
        }
        for i in 0..n {
            if let AgentStatus::Frozen { rounds_left } = run.states[i].status {
                if !received[i] {
                    run.states[i].status =
                        if rounds_left > 1 { AgentStatus::Frozen { rounds_left: rounds_left - 1 } } else { AgentStatus::Quiet };
                }
            }
        }
        if opts.check_rounds {
            run.check_round_property()?;
        }
        rounds.push(RoundEvent {
            round,
            group: group.agents.clone(),
            neighbourhood: group.goods.clone(),
            swaps,
            matched,
            frozen: frozen_now,
            quiet,
            cnt: run.cnt,
        });
        round += 1;
    }

    for i in 0..n {
        let held = run.bundles[i].len() + run.states[i].reserved;
        invariant(held == run.unfrozen_rounds[i], || {
            format!("agent {i} holds {held} goods after {} unfrozen rounds", run.unfrozen_rounds[i])
        })?;
    }
    for &i in &run.remaining {
        invariant(run.bundles[i].iter().all(|&g| run.is_high(i, g)), || {
            format!("agent {i} was never grouped but holds a low-valued good")
        })?;
    }

    let final_stage = final_stage(&mut run, order)?;
    let group_of = run.group_of.clone();
    let frozen_ever = run.frozen_ever.clone();
    let states = run.states.clone();
    let alloc = IntegralAllocation::from_goods(run.bundles, 0);
    alloc.validate(inst, true)?;
    let trace = EfxFpoTrace {
        order: order.clone(),
        low: a,
        high: b,
        freeze_rounds: freeze,
        rounds,
        final_stage,
        group_of,
        frozen_ever,
        states,
        max_swap_iterations,
    };
    Ok((alloc, trace))
}

/// Hands large goods to the first unfrozen agents in the order, letting the
/// never-grouped agents exchange goods along augmenting paths, then clears
/// the reserved goods.
fn final_stage(run: &mut Run, order: &Permutation) -> Result<FinalStage> {
    let inst = run.inst;
    let n = inst.n();
    let unfrozen: Vec<usize> = order
        .as_slice()
        .iter()
        .copied()
        .filter(|&i| !matches!(run.states[i].status, AgentStatus::Frozen { .. }))
        .collect();
    invariant(run.pool.len() >= run.cnt, || "fewer goods left than reserved".into())?;
    let k = run.pool.len() - run.cnt;
    invariant(k <= unfrozen.len(), || format!("{k} goods for {} unfrozen agents", unfrozen.len()))?;
    let candidates: Vec<usize> = unfrozen[..k].to_vec();

    // Copy nodes stand for goods already held by never-grouped agents.
    let mut owner_of_copy = Vec::new();
    let mut universe: Vec<usize> = run.pool.clone();
    for &i in &run.remaining {
        for &g in &run.bundles[i] {
            owner_of_copy.push((i, g));
            universe.push(g);
        }
    }
    universe.sort_unstable();
    let mut edges = Vec::new();
    for &i in &candidates {
        edges.extend(universe.iter().filter(|&&g| run.is_high(i, g)).map(|&g| (i, g)));
    }
    for (c, &(i, _)) in owner_of_copy.iter().enumerate() {
        edges.extend(universe.iter().filter(|&&g| run.is_high(i, g)).map(|&g| (n + c, g)));
    }
    let mut nodes: Vec<usize> = candidates.clone();
    nodes.sort_unstable();
    nodes.extend((0..owner_of_copy.len()).map(|c| n + c));
    let graph = BipartiteGraph::new(n + owner_of_copy.len(), inst.m(), &nodes, &universe, edges);
    let mut state = BipartiteState::new(graph);
    for (c, &(_, g)) in owner_of_copy.iter().enumerate() {
        state.matching.assign(n + c, g);
    }
    let mut augmented = Vec::new();
    let mut failed = Vec::new();
    for &i in &candidates {
        match augment_to_good(&state, i, &universe)? {
            Some(next) => {
                state = next;
                augmented.push(i);
            }
            None => {
                run.states[i].reserved += 1;
                failed.push(i);
            }
        }
    }
    for &i in &run.remaining {
        run.bundles[i].clear();
    }
    for (c, &(i, _)) in owner_of_copy.iter().enumerate() {
        let g = state.matching.good_of(n + c);
        invariant(g.is_some(), || "a held good was lost".into())?;
        run.bundles[i].push(g.unwrap());
    }
    for &i in &augmented {
        run.bundles[i].push(state.matching.good_of(i).expect("augmented agent is matched"));
    }
    run.pool = universe.into_iter().filter(|&g| state.matching.agent_of(g).is_none()).collect();

    let reserved: usize = run.states.iter().map(|s| s.reserved).sum();
    invariant(run.pool.len() == reserved, || {
        format!("{} goods left for {reserved} reserved slots", run.pool.len())
    })?;
    let mut clearing = Vec::new();
    let mut left = std::mem::take(&mut run.pool).into_iter();
    for &i in order.as_slice() {
        for _ in 0..run.states[i].reserved {
            let g = left.next().expect("counted above");
            invariant(*inst.u(i, g) == run.a, || format!("reserved good {g} is highly valued by agent {i}"))?;
            run.bundles[i].push(g);
            clearing.push((i, g));
        }
    }
    for b in run.bundles.iter_mut() {
        b.sort_unstable();
    }
    Ok(FinalStage { candidates, augmented, failed, clearing })
}
