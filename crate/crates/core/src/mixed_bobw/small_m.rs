use crate::error::{Error, Result};
use crate::model::{merge_divisibles, Instance, IntegralAllocation};

use super::water_fill::water_fill_goods;
use super::{to_allocation, Permutation};

/// One Round-Robin pass over `order`: each agent takes its favourite
/// remaining good (lowest index on ties) until the goods run out.
pub(crate) fn round_robin_goods(inst: &Instance, order: &Permutation) -> Vec<Vec<usize>> {
    let mut taken = vec![false; inst.m()];
    let mut bundles = vec![Vec::new(); inst.n()];
    for &i in order.as_slice() {
        let best = (0..inst.m())
            .filter(|&g| !taken[g])
            .reduce(|best, g| if inst.u(i, g) > inst.u(i, best) { g } else { best });
        let Some(g) = best else { break };
        taken[g] = true;
        bundles[i].push(g);
    }
    bundles
}

/// Round-Robin followed by water-filling, for instances with at most as
/// many indivisible goods as agents.
pub fn solve_small_m(inst: &Instance, order: &Permutation) -> Result<IntegralAllocation> {
    if inst.m() > inst.n() {
        return Err(Error::TooManyGoods { m: inst.m(), n: inst.n() });
    }
    order.check_len(inst.n())?;
    let (merged, expansion) = merge_divisibles(inst);
    let goods = round_robin_goods(&merged, order);
    let filled = water_fill_goods(&merged, goods)?;
    Ok(expansion.expand(&to_allocation(filled)))
}
