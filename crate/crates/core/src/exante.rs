//! Ex-ante verification of solver lotteries, either exactly by running the
//! solver for every picking order or by seeded sampling.

use std::collections::BTreeMap;

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::checkers::{check_ef, check_prop, check_property, Property, PropertyReport};
use crate::error::{Error, Result};
use crate::mixed_bobw::Permutation;
use crate::model::{expected_allocation, FractionalAllocation, Instance, IntegralAllocation, LotteryEntry, RandomizedAllocation};
use crate::rational::Rational;

/// Largest number of permutations enumerated by default (`6!`).
pub const DEFAULT_PERMUTATION_BUDGET: u128 = 720;

fn factorial(n: usize) -> u128 {
    (1..=n as u128).try_fold(1u128, |acc, k| acc.checked_mul(k)).unwrap_or(u128::MAX)
}

/// Evaluates `f` on every item, spreading the work over the available
/// cores; results come back in input order.
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = std::thread::available_parallelism().map_or(1, |w| w.get()).min(items.len().max(1));
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    std::thread::scope(|s| {
        let handles: Vec<_> = items.chunks(chunk).map(|c| s.spawn(|| c.iter().map(&f).collect::<Vec<_>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

/// Lottery putting mass `k / total` on an allocation seen `k` times.
pub fn empirical_lottery(outcomes: Vec<IntegralAllocation>) -> RandomizedAllocation {
    let total = outcomes.len() as i64;
    let mut counts: BTreeMap<IntegralAllocation, i64> = BTreeMap::new();
    for a in outcomes {
        *counts.entry(a).or_insert(0) += 1;
    }
    RandomizedAllocation {
        support: counts
            .into_iter()
            .map(|(allocation, c)| LotteryEntry { p: Rational::new(c, total), allocation })
            .collect(),
    }
}

/// The exact lottery induced by a uniformly random picking order.
pub fn enumerate_lottery<F>(n: usize, solver: F, budget: u128) -> Result<RandomizedAllocation>
where
    F: Fn(&Permutation) -> Result<IntegralAllocation> + Sync,
{
    let required = factorial(n);
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget });
    }
    let orders: Vec<Permutation> =
        (0..n).permutations(n).map(|p| Permutation::new(p).expect("itertools yields permutations")).collect();
    let outcomes = par_map(&orders, |p| solver(p)).into_iter().collect::<Result<Vec<_>>>()?;
    Ok(empirical_lottery(outcomes))
}

/// Ex-ante verdict on the expected allocation plus ex-post verdicts on every
/// support element.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExAnteReport {
    pub property: Property,
    pub ex_ante: PropertyReport,
    pub ex_post: Vec<PropertyReport>,
    pub ex_post_holds: bool,
}

pub fn verify_exante(inst: &Instance, lottery: &RandomizedAllocation, property: Property) -> Result<ExAnteReport> {
    lottery.validate(inst)?;
    let expected = expected_allocation(inst, lottery);
    let ex_ante = match property {
        Property::Ef => check_ef(inst, &expected)?,
        Property::Prop => check_prop(inst, &expected)?,
        other => return Err(Error::Malformed(format!("no ex-ante reading of {other}"))),
    };
    let ex_post =
        lottery.support.iter().map(|e| check_property(inst, &e.allocation, property)).collect::<Result<Vec<_>>>()?;
    let ex_post_holds = ex_post.iter().all(|r| r.holds);
    Ok(ExAnteReport { property, ex_ante, ex_post, ex_post_holds })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MixtureMode {
    Exact,
    Sampled { trials: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MixtureReport {
    pub mode: MixtureMode,
    pub expected: FractionalAllocation,
    pub expected_values: Vec<Rational>,
    pub support_size: usize,
    pub verdicts: ExAnteReport,
}

fn report(inst: &Instance, mode: MixtureMode, lottery: &RandomizedAllocation, property: Property) -> Result<MixtureReport> {
    let expected = expected_allocation(inst, lottery);
    let expected_values = (0..inst.n()).map(|i| expected.row_value(inst, i, i)).collect();
    Ok(MixtureReport {
        mode,
        expected,
        expected_values,
        support_size: lottery.support.len(),
        verdicts: verify_exante(inst, lottery, property)?,
    })
}

/// Exact report for a lottery.
pub fn exact_report(inst: &Instance, lottery: &RandomizedAllocation, property: Property) -> Result<MixtureReport> {
    report(inst, MixtureMode::Exact, lottery, property)
}

/// Generator for trial `k`: independent of how trials are scheduled.
pub fn trial_rng(seed: u64, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    rng
}

/// A uniformly random picking order.
pub fn random_permutation(n: usize, rng: &mut ChaCha8Rng) -> Permutation {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    Permutation::new(order).expect("shuffled identity")
}

/// Runs `draw` once per trial, each with its own generator.
pub fn sample_outcomes<F>(seed: u64, trials: usize, draw: F) -> Result<Vec<IntegralAllocation>>
where
    F: Fn(&mut ChaCha8Rng) -> Result<IntegralAllocation> + Sync,
{
    if trials == 0 {
        return Err(Error::Malformed("at least one trial is required".into()));
    }
    let ks: Vec<usize> = (0..trials).collect();
    par_map(&ks, |&k| draw(&mut trial_rng(seed, k))).into_iter().collect()
}

/// Report on the empirical distribution of sampled outcomes.
pub fn sampled_report(inst: &Instance, outcomes: Vec<IntegralAllocation>, property: Property) -> Result<MixtureReport> {
    let trials = outcomes.len();
    report(inst, MixtureMode::Sampled { trials }, &empirical_lottery(outcomes), property)
}

/// Monte-Carlo estimate of the lottery: `draw` produces one outcome from the
/// trial's generator. The empirical distribution is checked exactly.
pub fn sample_lottery<F>(inst: &Instance, seed: u64, trials: usize, property: Property, draw: F) -> Result<MixtureReport>
where
    F: Fn(&mut ChaCha8Rng) -> Result<IntegralAllocation> + Sync,
{
    sampled_report(inst, sample_outcomes(seed, trials, draw)?, property)
}

/// Draws one allocation from an explicit lottery.
pub fn draw_from(lottery: &RandomizedAllocation, rng: &mut ChaCha8Rng) -> IntegralAllocation {
    use rand::Rng;
    // Exact inverse-CDF sampling on a common denominator.
    let denom = lottery.support.iter().fold(num_bigint::BigInt::from(1), |acc, e| {
        let d = e.p.denom();
        num_integer::Integer::lcm(&acc, &d)
    });
    let bound = u64::try_from(&denom).unwrap_or(u64::MAX);
    let mut x = Rational::from_bigints(rng.gen_range(0..bound).into(), denom.clone());
    for e in &lottery.support {
        if x < e.p {
            return e.allocation.clone();
        }
        x -= &e.p;
    }
    lottery.support.last().expect("non-empty lottery").allocation.clone()
}
