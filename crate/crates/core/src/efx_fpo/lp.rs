use crate::checkers::{PropertyReport, Witness};
use crate::error::{invariant, Result};
use crate::model::{FractionalAllocation, Instance, IntegralAllocation};
use crate::rational::Rational;
use crate::simplex::{maximize, LpOutcome};

/// Fractional Pareto-optimality by linear programming: maximize total
/// utility over fractional allocations that leave nobody worse off. The
/// allocation is fPO exactly when the optimum equals its own total.
pub fn check_fpo_lp(inst: &Instance, alloc: &IntegralAllocation) -> Result<PropertyReport> {
    alloc.validate(inst, true)?;
    let (n, w) = (inst.n(), inst.m() + inst.m_bar());
    let vars = n * w + n;
    let y = |i: usize, g: usize| i * w + g;
    let mut rows = Vec::with_capacity(w + n);
    let mut rhs = Vec::with_capacity(w + n);
    for g in 0..w {
        let mut row = vec![Rational::zero(); vars];
        (0..n).for_each(|i| row[y(i, g)] = Rational::one());
        rows.push(row);
        rhs.push(Rational::one());
    }
    let values = alloc.values(inst);
    for i in 0..n {
        let mut row = vec![Rational::zero(); vars];
        for g in 0..w {
            row[y(i, g)] = inst.row(i)[g].clone();
        }
        row[n * w + i] = -Rational::one();
        rows.push(row);
        rhs.push(values[i].clone());
    }
    let mut cost = vec![Rational::zero(); vars];
    for i in 0..n {
        for g in 0..w {
            cost[y(i, g)] = inst.row(i)[g].clone();
        }
    }
    let current: Rational = values.iter().sum();
    match maximize(&cost, &rows, &rhs) {
        LpOutcome::Optimal { x, value } => {
            invariant(value >= current, || "LP optimum below a feasible point".into())?;
            if value == current {
                return Ok(PropertyReport::holds());
            }
            let matrix = (0..n).map(|i| (0..w).map(|g| x[y(i, g)].clone()).collect()).collect();
            Ok(PropertyReport::fails(Witness::Dominated { allocation: FractionalAllocation { matrix } }))
        }
        other => {
            invariant(false, || format!("fPO program ended as {other:?}"))?;
            unreachable!()
        }
    }
}
