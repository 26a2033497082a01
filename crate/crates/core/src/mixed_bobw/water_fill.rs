//! Continuous allocation of the merged divisible good on top of an EF1
//! allocation of indivisible goods.
//!
//! The process keeps every bundle that holds cake unenvied. It repeatedly
//! builds the weak envy graph (strict envy, or a tie from an agent who
//! values the cake), rotates bundles along a cycle with a strict edge when
//! the chosen source component contains one, and otherwise pours cake at
//! equal rates into a source component until the cake runs out or an
//! outside agent becomes indifferent.

use crate::checkers::check_ef1;
use crate::error::{invariant, Error, Result};
use crate::model::{Instance, IntegralAllocation};
use crate::rational::Rational;

struct State {
    /// `base[i][k]`: agent `i`'s value for the goods of bundle `k`.
    base: Vec<Vec<Rational>>,
    cake: Vec<Rational>,
    held: Vec<usize>,
    ud: Vec<Rational>,
}

impl State {
    fn val(&self, i: usize, k: usize) -> Rational {
        if self.cake[k].is_zero() || self.ud[i].is_zero() {
            self.base[i][k].clone()
        } else {
            &self.base[i][k] + &(&self.cake[k] * &self.ud[i])
        }
    }

    /// `edges[i][j]`: 0 none, 1 tie that matters, 2 strict envy.
    fn edges(&self) -> Vec<Vec<u8>> {
        let n = self.held.len();
        let mut e = vec![vec![0u8; n]; n];
        for i in 0..n {
            let own = self.val(i, self.held[i]);
            for j in 0..n {
                if i == j {
                    continue;
                }
                let other = self.val(i, self.held[j]);
                if other > own {
                    e[i][j] = 2;
                } else if other == own && self.ud[i].is_positive() {
                    e[i][j] = 1;
                }
            }
        }
        e
    }
}

fn closure(e: &[Vec<u8>]) -> Vec<Vec<bool>> {
    let n = e.len();
    let mut r: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|j| i == j || e[i][j] > 0).collect()).collect();
    for k in 0..n {
        for i in 0..n {
            if r[i][k] {
                for j in 0..n {
                    if r[k][j] {
                        r[i][j] = true;
                    }
                }
            }
        }
    }
    r
}

/// Shortest path `from -> ... -> to` inside `comp` along edges of `e`.
fn path_within(e: &[Vec<u8>], comp: &[usize], from: usize, to: usize) -> Vec<usize> {
    let n = e.len();
    let mut prev = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::from([from]);
    prev[from] = from;
    while let Some(v) = queue.pop_front() {
        if v == to {
            break;
        }
        for &w in comp {
            if e[v][w] > 0 && prev[w] == usize::MAX {
                prev[w] = v;
                queue.push_back(w);
            }
        }
    }
    let mut path = vec![to];
    let mut v = to;
    while v != from {
        v = prev[v];
        path.push(v);
    }
    path.reverse();
    path
}

/// Water-fills the single divisible good of `inst` (which must have exactly
/// one divisible good) on top of `goods`, an EF1 allocation of the
/// indivisible goods. Returns per agent the goods held and the cake share.
pub(crate) fn water_fill_goods(inst: &Instance, goods: Vec<Vec<usize>>) -> Result<Vec<(Vec<usize>, Rational)>> {
    let n = inst.n();
    invariant(inst.m_bar() == 1, || "water filling expects one merged divisible good".into())?;
    let base = (0..n)
        .map(|i| goods.iter().map(|g| inst.goods_value(i, g)).collect())
        .collect();
    let mut st = State {
        base,
        cake: vec![Rational::zero(); n],
        held: (0..n).collect(),
        ud: (0..n).map(|i| inst.ud(i, 0).clone()).collect(),
    };
    let mut remaining = Rational::one();
    let guard = 10_000 + 50 * n * n * n;
    let mut steps = 0;
    while remaining.is_positive() {
        steps += 1;
        invariant(steps <= guard, || "water filling did not terminate".into())?;
        let e = st.edges();
        let r = closure(&e);
        let comps: Vec<Vec<usize>> = {
            let mut seen = vec![false; n];
            let mut out = Vec::new();
            for i in 0..n {
                if seen[i] {
                    continue;
                }
                let c: Vec<usize> = (0..n).filter(|&j| r[i][j] && r[j][i]).collect();
                c.iter().for_each(|&j| seen[j] = true);
                out.push(c);
            }
            out
        };
        let source = comps
            .iter()
            .find(|c| (0..n).all(|k| c.contains(&k) || c.iter().all(|&j| e[k][j] == 0)))
            .expect("a finite digraph has a source component");
        let strict = source
            .iter()
            .flat_map(|&i| source.iter().map(move |&j| (i, j)))
            .find(|&(i, j)| e[i][j] == 2);
        if let Some((i, j)) = strict {
            let mut cycle = path_within(&e, source, j, i);
            cycle.insert(0, i);
            cycle.pop();
            let old: Vec<usize> = cycle.iter().map(|&a| st.held[a]).collect();
            for t in 0..cycle.len() {
                st.held[cycle[t]] = old[(t + 1) % cycle.len()];
            }
            continue;
        }
        let size = Rational::from_integer(source.len() as i64);
        let mut delta = &remaining / &size;
        for k in (0..n).filter(|k| !source.contains(k)) {
            if !st.ud[k].is_positive() {
                continue;
            }
            let own = st.val(k, st.held[k]);
            for &j in source {
                let gap = &own - &st.val(k, st.held[j]);
                invariant(gap.is_positive(), || "outside agent is not strictly content".into())?;
                let limit = gap / &st.ud[k];
                if limit < delta {
                    delta = limit;
                }
            }
        }
        for &j in source {
            let k = st.held[j];
            st.cake[k] += &delta;
        }
        remaining -= &delta * &size;
    }
    Ok((0..n).map(|i| (goods[st.held[i]].clone(), st.cake[st.held[i]].clone())).collect())
}

/// Water-filling on an EF1 allocation of the indivisible goods of `inst`
/// (merged to one divisible good). Bundles may be permuted, never split.
pub fn water_fill(inst: &Instance, ef1_alloc: &IntegralAllocation) -> Result<IntegralAllocation> {
    let (merged, expansion) = crate::model::merge_divisibles(inst);
    let stripped = IntegralAllocation::from_goods(
        ef1_alloc.bundles.iter().map(|b| b.goods.clone()).collect(),
        0,
    );
    let plain = strip_divisible(&merged);
    let report = check_ef1(&plain, &stripped)?;
    if !report.holds {
        return Err(Error::NotEF1(format!("{:?}", report.witness)));
    }
    let filled = water_fill_goods(&merged, stripped.bundles.into_iter().map(|b| b.goods).collect())?;
    Ok(expansion.expand(&crate::mixed_bobw::to_allocation(filled)))
}

fn strip_divisible(inst: &Instance) -> Instance {
    let m = inst.m();
    Instance::new(
        (0..inst.n()).map(|i| inst.row(i)[..m].to_vec()).collect(),
        vec![Vec::new(); inst.n()],
    )
    .expect("valid")
}
