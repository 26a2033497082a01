//! Two-agent solvers: local search to an EFX split, the cut-and-choose
//! lottery that is ex-ante EF and ex-post EFX, and its mixed-goods variant.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{merge_divisibles, Bundle, Instance, IntegralAllocation, LotteryEntry, RandomizedAllocation};
use crate::rational::Rational;

/// A partition of the goods into two bundles. After local search
/// `u(low) <= u(high)` under the utility that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TwoBundleSplit {
    pub low: Vec<usize>,
    pub high: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LocalSearchOutcome {
    pub split: TwoBundleSplit,
    pub moves: usize,
    pub diff_before: Rational,
    pub diff_after: Rational,
}

fn sum(u: &[Rational], goods: &[usize]) -> Rational {
    goods.iter().map(|&g| &u[g]).sum()
}

/// Moves the most valuable good that keeps the receiving bundle strictly
/// below the other from the richer bundle to the poorer one, swapping labels
/// whenever the order flips. `u` is indexed by good id.
pub fn local_search(a: &[usize], b: &[usize], u: &[Rational]) -> LocalSearchOutcome {
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    let (mut ua, mut ub) = (sum(u, &a), sum(u, &b));
    let diff_before = (&ub - &ua).abs();
    if ua > ub {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut ua, &mut ub);
    }
    let mut moves = 0;
    loop {
        let mut pick: Option<usize> = None;
        for (pos, &g) in b.iter().enumerate() {
            if &ua + &u[g] >= ub {
                continue;
            }
            pick = match pick {
                None => Some(pos),
                Some(p) => {
                    let h = b[p];
                    if u[g] > u[h] || (u[g] == u[h] && g < h) {
                        Some(pos)
                    } else {
                        Some(p)
                    }
                }
            };
        }
        let Some(pos) = pick else { break };
        let g = b.remove(pos);
        ua += &u[g];
        ub -= &u[g];
        a.push(g);
        moves += 1;
        if ua > ub {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut ua, &mut ub);
        }
    }
    a.sort_unstable();
    b.sort_unstable();
    LocalSearchOutcome { diff_after: &ub - &ua, diff_before, moves, split: TwoBundleSplit { low: a, high: b } }
}

/// EFX of a split when both bundles are judged by the same utility.
pub fn is_efx_split(split: &TwoBundleSplit, u: &[Rational]) -> bool {
    let ok = |own: &[usize], other: &[usize]| {
        let mine = sum(u, own);
        let theirs = sum(u, other);
        other.iter().all(|&g| mine >= &theirs - &u[g])
    };
    ok(&split.low, &split.high) && ok(&split.high, &split.low)
}

/// One local-search call made during a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LocalSearchCall {
    /// Whose utility the call used.
    pub agent: usize,
    pub moves: usize,
    pub diff_before: Rational,
    pub diff_after: Rational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TwoAgentOutcome {
    /// `A^i` alone, the other agent choosing first.
    Singleton { split_of: usize },
    /// Both splits with probability one half.
    HalfHalf { doubly_efx: bool },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TwoAgentRun {
    /// `splits[i]` is EFX under agent `i`'s utility.
    pub splits: [TwoBundleSplit; 2],
    pub outcome: TwoAgentOutcome,
    pub calls: Vec<LocalSearchCall>,
}

impl TwoAgentRun {
    pub fn total_moves(&self) -> usize {
        self.calls.iter().map(|c| c.moves).sum()
    }
}

fn split_gap(u: &[Rational], s: &TwoBundleSplit) -> Rational {
    sum(u, &s.high) - sum(u, &s.low)
}

fn ef_condition(u: [&[Rational]; 2], splits: &[TwoBundleSplit; 2]) -> Option<usize> {
    (0..2).find(|&j| {
        let s = &splits[j];
        sum(u[j], &s.low) == sum(u[j], &s.high) || sum(u[1 - j], &s.low) >= sum(u[1 - j], &s.high)
    })
}

/// Runs the two-agent procedure on goods `goods`, with `u[i]` indexed by good id.
pub fn run_two_agent(u: [&[Rational]; 2], goods: &[usize]) -> Result<TwoAgentRun> {
    let mut calls = Vec::new();
    let record = |calls: &mut Vec<LocalSearchCall>, agent: usize, o: &LocalSearchOutcome| {
        calls.push(LocalSearchCall {
            agent,
            moves: o.moves,
            diff_before: o.diff_before.clone(),
            diff_after: o.diff_after.clone(),
        })
    };
    let first = local_search(&[], goods, u[0]);
    let second = local_search(&[], goods, u[1]);
    record(&mut calls, 0, &first);
    record(&mut calls, 1, &second);
    let mut splits = [first.split, second.split];
    if let Some(i) = ef_condition(u, &splits) {
        return Ok(TwoAgentRun { splits, outcome: TwoAgentOutcome::Singleton { split_of: i }, calls });
    }
    let guard = 2 * goods.len() + 4;
    for _ in 0..guard {
        let Some(i) = (0..2).find(|&i| split_gap(u[1 - i], &splits[i]) < split_gap(u[1 - i], &splits[1 - i]))
        else {
            return Ok(TwoAgentRun { splits, outcome: TwoAgentOutcome::HalfHalf { doubly_efx: false }, calls });
        };
        let o = local_search(&splits[i].low, &splits[i].high, u[1 - i]);
        record(&mut calls, 1 - i, &o);
        splits[1 - i] = o.split;
        if let Some(j) = ef_condition(u, &splits) {
            return Ok(TwoAgentRun { splits, outcome: TwoAgentOutcome::Singleton { split_of: j }, calls });
        }
        if is_efx_split(&splits[1 - i], u[i]) {
            splits[i] = splits[1 - i].clone();
            return Ok(TwoAgentRun { splits, outcome: TwoAgentOutcome::HalfHalf { doubly_efx: true }, calls });
        }
    }
    Err(Error::InvariantViolated("two-agent update loop did not terminate".into()))
}

/// Bundles as (goods, share of the merged divisible good).
type Share = (Vec<usize>, Rational);

/// The picker takes the bundle it likes more; ties go to `first`.
fn choose(u_picker: &[Rational], picker: usize, first: Share, second: Share, value: impl Fn(&[Rational], &Share) -> Rational) -> [Share; 2] {
    let take_first = value(u_picker, &first) >= value(u_picker, &second);
    let (mine, other) = if take_first { (first, second) } else { (second, first) };
    if picker == 0 {
        [mine, other]
    } else {
        [other, mine]
    }
}

fn check_two(inst: &Instance) -> Result<()> {
    if inst.n() != 2 {
        return Err(Error::WrongAgentCount { expected: 2, found: inst.n() });
    }
    Ok(())
}

fn indivisible_value(u: &[Rational], s: &Share) -> Rational {
    sum(u, &s.0)
}

/// Ex-ante EF and ex-post EFX lottery for two agents and indivisible goods.
pub fn solve_two_agent_efx(inst: &Instance) -> Result<RandomizedAllocation> {
    solve_two_agent_efx_traced(inst).map(|(l, _)| l)
}

pub fn solve_two_agent_efx_traced(inst: &Instance) -> Result<(RandomizedAllocation, TwoAgentRun)> {
    check_two(inst)?;
    if inst.m_bar() > 0 {
        return Err(Error::DivisiblePresent);
    }
    let goods: Vec<usize> = (0..inst.m()).collect();
    let run = run_two_agent([inst.row(0), inst.row(1)], &goods)?;
    let realize = |i: usize| {
        let s = &run.splits[i];
        let picker = 1 - i;
        let [x, y] = choose(
            inst.row(picker),
            picker,
            (s.low.clone(), Rational::zero()),
            (s.high.clone(), Rational::zero()),
            indivisible_value,
        );
        IntegralAllocation::from_goods(vec![x.0, y.0], 0)
    };
    let lottery = match run.outcome {
        TwoAgentOutcome::Singleton { split_of } => RandomizedAllocation::singleton(realize(split_of)),
        TwoAgentOutcome::HalfHalf { .. } => half_half(realize(0), realize(1)),
    };
    Ok((lottery, run))
}

fn half_half(a: IntegralAllocation, b: IntegralAllocation) -> RandomizedAllocation {
    let half = Rational::new(1, 2);
    RandomizedAllocation {
        support: vec![
            LotteryEntry { p: half.clone(), allocation: a },
            LotteryEntry { p: half, allocation: b },
        ],
    }
    .normalized()
}

/// Ex-ante EF and ex-post EFM (indeed EFXM) lottery for two agents and
/// mixed goods.
pub fn solve_two_agent_efm(inst: &Instance) -> Result<RandomizedAllocation> {
    check_two(inst)?;
    let m = inst.m();
    let (merged, expansion) = merge_divisibles(inst);
    let with_d = inst.m_bar() > 0;
    let goods: Vec<usize> = (0..m + usize::from(with_d)).collect();
    let u = [merged.row(0), merged.row(1)];
    let run = run_two_agent(u, &goods)?;
    let d = m;
    let split_share = |goods: &[usize]| -> Share {
        let has_d = with_d && goods.contains(&d);
        let rest: Vec<usize> = goods.iter().copied().filter(|&g| g != d || !with_d).collect();
        (rest, if has_d { Rational::one() } else { Rational::zero() })
    };
    let value = |u: &[Rational], s: &Share| -> Rational {
        let mut v = sum(u, &s.0);
        if with_d && !s.1.is_zero() {
            v += &s.1 * &u[d];
        }
        v
    };
    let build = |pair: [Share; 2]| -> IntegralAllocation {
        let bundles = pair
            .into_iter()
            .map(|(g, x)| Bundle::of_goods(g, 0).with_fraction(x))
            .collect();
        expansion.expand(&IntegralAllocation { bundles })
    };
    let realize = |i: usize| {
        let s = &run.splits[i];
        build(choose(u[1 - i], 1 - i, split_share(&s.low), split_share(&s.high), value))
    };
    let lottery = match run.outcome {
        TwoAgentOutcome::Singleton { split_of } => RandomizedAllocation::singleton(realize(split_of)),
        TwoAgentOutcome::HalfHalf { .. } => {
            let transfer = (0..2).find(|&i| with_d && run.splits[i].high.contains(&d) && u[i][d].is_positive());
            match transfer {
                Some(i) => {
                    let s = &run.splits[i];
                    let gap = sum(u[i], &s.high) - sum(u[i], &s.low);
                    let alpha = gap / (Rational::from_integer(2) * &u[i][d]);
                    let (low_goods, _) = split_share(&s.low);
                    let (high_goods, _) = split_share(&s.high);
                    let low = (low_goods, alpha.clone());
                    let high = (high_goods, Rational::one() - &alpha);
                    RandomizedAllocation::singleton(build(choose(u[1 - i], 1 - i, low, high, value)))
                }
                None => half_half(realize(0), realize(1)),
            }
        }
    };
    Ok(lottery)
}

impl Bundle {
    fn with_fraction(mut self, x: Rational) -> Bundle {
        self.fractions = vec![x];
        self
    }
}
