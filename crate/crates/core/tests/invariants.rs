mod common;

use fairdiv::checkers::{check_ef, check_ef1, check_efm, check_efx, check_efxm, check_prop};
use fairdiv::efx_fpo::{build_fisher_certificate, check_fpo_lp, run_efx_fpo, RunOptions};
use fairdiv::exante::verify_exante;
use fairdiv::mixed_bobw::{solve_small_m, water_fill, Permutation, PropEfmSolver};
use fairdiv::model::{Instance, IntegralAllocation, RandomizedAllocation};
use fairdiv::two_agent::solve_two_agent_efx;
use fairdiv::Rational;
use proptest::prelude::*;

fn matrix(n: std::ops::RangeInclusive<usize>, m: std::ops::RangeInclusive<usize>, max: i64) -> impl Strategy<Value = Vec<Vec<i64>>> {
    (n, m).prop_flat_map(move |(n, m)| prop::collection::vec(prop::collection::vec(0..=max, m), n))
}

fn bi_valued() -> impl Strategy<Value = (Vec<Vec<i64>>, Vec<usize>)> {
    (1usize..=4, 1usize..=8, 1i64..=3, 1i64..=6).prop_flat_map(|(n, m, a, gap)| {
        let b = a + gap;
        (
            prop::collection::vec(prop::collection::vec(prop::bool::ANY.prop_map(move |h| if h { b } else { a }), m), n),
            Just((0..n).collect::<Vec<_>>()).prop_shuffle(),
        )
    })
}

fn probabilities_sum_to_one(l: &RandomizedAllocation) -> bool {
    l.support.iter().map(|e| &e.p).sum::<Rational>() == Rational::one()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn two_agent_lottery_is_fair(rows in matrix(2..=2, 0..=7, 30)) {
        let inst = common::instance(rows, vec![Vec::new(); 2]);
        let lottery = solve_two_agent_efx(&inst).unwrap();
        prop_assert!(probabilities_sum_to_one(&lottery));
        prop_assert!(lottery.support.len() <= 2);
        for e in &lottery.support {
            prop_assert!(check_efx(&inst, &e.allocation).unwrap().holds);
        }
        prop_assert!(verify_exante(&inst, &lottery, fairdiv::checkers::Property::Ef).unwrap().ex_ante.holds);
    }

    #[test]
    fn notions_are_nested(rows in matrix(1..=3, 0..=5, 5), assign in prop::collection::vec(0usize..3, 5)) {
        let n = rows.len();
        let m = rows[0].len();
        let inst = common::instance(rows, vec![Vec::new(); n]);
        let mut goods = vec![Vec::new(); n];
        for (g, &i) in assign.iter().take(m).enumerate() {
            goods[i % n].push(g);
        }
        let alloc = IntegralAllocation::from_goods(goods, 0);
        let ef = check_ef(&inst, &alloc).unwrap().holds;
        let efx = check_efx(&inst, &alloc).unwrap().holds;
        let ef1 = check_ef1(&inst, &alloc).unwrap().holds;
        prop_assert!(!ef || efx);
        prop_assert!(!efx || ef1);
        prop_assert_eq!(check_efxm(&inst, &alloc).unwrap().holds, efx);
        prop_assert_eq!(check_efm(&inst, &alloc).unwrap().holds, ef1);
        if ef {
            prop_assert!(check_prop(&inst, &alloc).unwrap().holds);
        }
    }

    #[test]
    fn water_filling_turns_ef1_into_efm(
        rows in matrix(1..=4, 0..=4, 9),
        cake in prop::collection::vec(0i64..=9, 4),
        order in Just(vec![0usize, 1, 2, 3]).prop_shuffle(),
    ) {
        let n = rows.len();
        let plain = common::instance(rows.clone(), vec![Vec::new(); n]);
        let mixed = common::instance(rows, cake[..n].iter().map(|&c| vec![c]).collect());
        let order: Vec<usize> = order.into_iter().filter(|&i| i < n).collect();
        let base = solve_small_m(&plain, &Permutation::new(order).unwrap());
        prop_assume!(base.is_ok());
        let base = base.unwrap();
        prop_assert!(check_ef1(&plain, &base).unwrap().holds);
        let mut seed = base.clone();
        for b in &mut seed.bundles {
            b.fractions = vec![Rational::zero()];
        }
        let filled = water_fill(&mixed, &seed).unwrap();
        filled.validate(&mixed, true).unwrap();
        prop_assert!(check_efm(&mixed, &filled).unwrap().holds);
    }

    #[test]
    fn prop_efm_outcomes_are_complete_and_efm((rows, order) in bi_valued(), cake in prop::collection::vec(0i64..=5, 4)) {
        let n = rows.len();
        let inst = common::instance(rows, cake[..n].iter().map(|&c| vec![c]).collect());
        let alloc = PropEfmSolver::new(&inst).unwrap().solve(&Permutation::new(order).unwrap()).unwrap();
        alloc.validate(&inst, true).unwrap();
        prop_assert!(check_efm(&inst, &alloc).unwrap().holds);
    }

    #[test]
    fn efx_fpo_outcomes_are_certified((rows, order) in bi_valued()) {
        let n = rows.len();
        let inst: Instance = common::instance(rows, vec![Vec::new(); n]);
        let (alloc, trace) = run_efx_fpo(&inst, &Permutation::new(order).unwrap(), RunOptions::default()).unwrap();
        alloc.validate(&inst, true).unwrap();
        prop_assert!(check_efx(&inst, &alloc).unwrap().holds);
        prop_assert!(build_fisher_certificate(&inst, &alloc, &trace).is_ok());
        prop_assert!(check_fpo_lp(&inst, &alloc).unwrap().holds);
    }
}
