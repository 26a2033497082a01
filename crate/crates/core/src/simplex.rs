//! Dense two-phase simplex over exact rationals with Bland's rule.

use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpOutcome {
    Optimal { x: Vec<Rational>, value: Rational },
    Infeasible,
    Unbounded,
}

struct Tableau {
    rows: Vec<Vec<Rational>>,
    basis: Vec<usize>,
    /// Reduced costs; the last entry is minus the objective value.
    obj: Vec<Rational>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        for v in self.rows[r].iter_mut() {
            if !v.is_zero() {
                *v = &*v / &p;
            }
        }
        let pivot_row = self.rows[r].clone();
        let eliminate = |row: &mut Vec<Rational>| {
            let f = row[c].clone();
            if f.is_zero() {
                return;
            }
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v -= &f * pv;
                }
            }
        };
        for (k, row) in self.rows.iter_mut().enumerate() {
            if k != r {
                eliminate(row);
            }
        }
        eliminate(&mut self.obj);
        self.basis[r] = c;
    }

    fn set_objective(&mut self, cost: &[Rational]) {
        let mut obj: Vec<Rational> = cost.to_vec();
        obj.resize(self.cols + 1, Rational::zero());
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = obj[b].clone();
            if cb.is_zero() {
                continue;
            }
            for (v, a) in obj.iter_mut().zip(&self.rows[r]) {
                *v -= &cb * a;
            }
        }
        self.obj = obj;
    }

    /// Runs to optimality over columns `< allowed`; false if unbounded.
    fn optimize(&mut self, allowed: usize) -> bool {
        loop {
            let Some(c) = (0..allowed).find(|&j| self.obj[j].is_positive()) else {
                return true;
            };
            let mut best: Option<(usize, Rational)> = None;
            for (r, row) in self.rows.iter().enumerate() {
                if !row[c].is_positive() {
                    continue;
                }
                let ratio = &row[self.cols] / &row[c];
                let better = match &best {
                    None => true,
                    Some((br, bv)) => ratio < *bv || (ratio == *bv && self.basis[r] < self.basis[*br]),
                };
                if better {
                    best = Some((r, ratio));
                }
            }
            match best {
                Some((r, _)) => self.pivot(r, c),
                None => return false,
            }
        }
    }
}

/// Maximizes `c·x` subject to `a x = b`, `x >= 0`.
pub fn maximize(c: &[Rational], a: &[Vec<Rational>], b: &[Rational]) -> LpOutcome {
    let n = c.len();
    let m = a.len();
    let cols = n + m;
    let mut rows = Vec::with_capacity(m);
    for (r, (row, rhs)) in a.iter().zip(b).enumerate() {
        let flip = rhs.is_negative();
        let mut t: Vec<Rational> = row.iter().map(|v| if flip { -v } else { v.clone() }).collect();
        t.resize(cols + 1, Rational::zero());
        t[n + r] = Rational::one();
        t[cols] = if flip { -rhs } else { rhs.clone() };
        rows.push(t);
    }
    let mut tab = Tableau { rows, basis: (n..n + m).collect(), obj: Vec::new(), cols };

    let mut phase1 = vec![Rational::zero(); cols];
    phase1[n..].iter_mut().for_each(|v| *v = -Rational::one());
    tab.set_objective(&phase1);
    tab.optimize(cols);
    if !tab.obj[cols].is_zero() {
        return LpOutcome::Infeasible;
    }
    let mut r = 0;
    while r < tab.rows.len() {
        if tab.basis[r] >= n {
            match (0..n).find(|&j| !tab.rows[r][j].is_zero()) {
                Some(j) => tab.pivot(r, j),
                None => {
                    tab.rows.remove(r);
                    tab.basis.remove(r);
                    continue;
                }
            }
        }
        r += 1;
    }

    tab.set_objective(c);
    if !tab.optimize(n) {
        return LpOutcome::Unbounded;
    }
    let mut x = vec![Rational::zero(); n];
    for (r, &bv) in tab.basis.iter().enumerate() {
        x[bv] = tab.rows[r][cols].clone();
    }
    LpOutcome::Optimal { x, value: -&tab.obj[cols] }
}
