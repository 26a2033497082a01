#![allow(dead_code)]

use fairdiv::model::Instance;
use fairdiv::Rational;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn instance(indivisible: Vec<Vec<i64>>, divisible: Vec<Vec<i64>>) -> Instance {
    let q = |rows: Vec<Vec<i64>>| -> Vec<Vec<Rational>> {
        rows.into_iter().map(|r| r.into_iter().map(Rational::from_integer).collect()).collect()
    };
    Instance::new(q(indivisible), q(divisible)).expect("generated instance is valid")
}

/// Uniform integer utilities in `0..=max`.
pub fn additive(rng: &mut ChaCha8Rng, n: usize, m: usize, m_bar: usize, max: i64) -> Instance {
    let mut rows = |k: usize| -> Vec<Vec<i64>> {
        (0..n).map(|_| (0..k).map(|_| rng.gen_range(0..=max)).collect()).collect()
    };
    let ind = rows(m);
    let div = rows(m_bar);
    instance(ind, div)
}

/// Indivisible utilities in `{a, b}`; divisible ones uniform in `0..=mass`.
pub fn bi_valued(rng: &mut ChaCha8Rng, n: usize, m: usize, a: i64, b: i64, m_bar: usize, mass: i64) -> Instance {
    let density: f64 = rng.gen_range(0.0..=1.0);
    let ind = (0..n).map(|_| (0..m).map(|_| if rng.gen_bool(density) { b } else { a }).collect()).collect();
    let div = (0..n).map(|_| (0..m_bar).map(|_| rng.gen_range(0..=mass)).collect()).collect();
    instance(ind, div)
}

/// Integer utilities of an instance, indivisible then divisible columns.
pub fn int_rows(inst: &Instance) -> Vec<Vec<i64>> {
    (0..inst.n())
        .map(|i| {
            inst.row(i)
                .iter()
                .map(|r| {
                    assert!(r.is_integer(), "integer utilities expected");
                    i64::try_from(r.numer()).expect("small integer")
                })
                .collect()
        })
        .collect()
}
