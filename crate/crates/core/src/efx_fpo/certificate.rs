use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Instance, IntegralAllocation};
use crate::rational::Rational;

use super::EfxFpoTrace;

/// Prices under which the allocation is a Fisher market equilibrium: every
/// agent spends its budget on goods of maximum bang per buck. Such an
/// allocation is fractionally Pareto-optimal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FisherCertificate {
    pub prices: Vec<Rational>,
    pub budgets: Vec<Rational>,
    /// Best utility-to-price ratio of each agent over all goods.
    pub mbb: Vec<Rational>,
}

impl FisherCertificate {
    /// Checks the equilibrium conditions for `alloc`.
    pub fn verify(&self, inst: &Instance, alloc: &IntegralAllocation) -> Result<()> {
        let fail = |s: String| Err(Error::CertificateFailed(s));
        if self.prices.len() != inst.m() || self.prices.iter().any(|p| !p.is_positive()) {
            return fail("prices must be positive, one per good".into());
        }
        for (i, bundle) in alloc.bundles.iter().enumerate() {
            let spent: Rational = bundle.goods.iter().map(|&g| &self.prices[g]).sum();
            if spent != self.budgets[i] {
                return fail(format!("agent {i} spends {spent} of budget {}", self.budgets[i]));
            }
            let ratio = |g: usize| inst.u(i, g) / &self.prices[g];
            let best = (0..inst.m()).map(ratio).max().unwrap_or_else(Rational::zero);
            if best != self.mbb[i] {
                return fail(format!("agent {i} has best ratio {best}, certificate says {}", self.mbb[i]));
            }
            if let Some(&g) = bundle.goods.iter().find(|&&g| ratio(g) != best) {
                return fail(format!("agent {i} holds good {g} outside its best-ratio set"));
            }
        }
        Ok(())
    }
}

/// Builds and verifies equilibrium prices for an allocation produced by the
/// match-and-freeze run described by `trace`.
pub fn build_fisher_certificate(
    inst: &Instance,
    alloc: &IntegralAllocation,
    trace: &EfxFpoTrace,
) -> Result<FisherCertificate> {
    alloc.validate(inst, true)?;
    if alloc.has_divisible() || inst.m_bar() > 0 {
        return Err(Error::DivisiblePresent);
    }
    let (n, m) = (inst.n(), inst.m());
    if trace.group_of.len() != n {
        return Err(Error::WrongAgentCount { expected: n, found: trace.group_of.len() });
    }
    let (a, b) = (&trace.low, &trace.high);
    let goods = |i: usize| &alloc.bundles[i].goods;
    let mut price: Vec<Option<Rational>> = vec![None; m];
    let mut priced = vec![false; n];
    let own_prices = |i: usize, price: &mut Vec<Option<Rational>>| {
        for &g in goods(i) {
            price[g] = Some(inst.u(i, g).clone());
        }
    };

    if m >= n {
        for i in 0..n {
            let high = goods(i).iter().any(|&g| inst.u(i, g) == b);
            let low = goods(i).iter().any(|&g| inst.u(i, g) != b);
            if trace.group_of[i].is_some() || (high && low) {
                priced[i] = true;
                own_prices(i, &mut price);
            }
        }
    } else {
        for i in 0..n {
            for &g in goods(i).iter().filter(|&&g| inst.u(i, g) == a) {
                price[g] = Some(a.clone());
                priced[i] = true;
            }
        }
    }
    loop {
        let next = (0..n).filter(|&i| !priced[i] && !goods(i).is_empty()).find(|&i| {
            goods(i).iter().any(|&g| (0..n).any(|j| priced[j] && inst.u(j, g) == b))
        });
        let Some(i) = next else { break };
        priced[i] = true;
        if m >= n {
            own_prices(i, &mut price);
        } else {
            for &g in goods(i) {
                if price[g].is_none() {
                    price[g] = Some(b.clone());
                }
            }
        }
    }
    let prices: Vec<Rational> = price.into_iter().map(|p| p.unwrap_or_else(|| a.clone())).collect();
    let budgets = (0..n).map(|i| goods(i).iter().map(|&g| &prices[g]).sum()).collect();
    let mbb = (0..n)
        .map(|i| (0..m).map(|g| inst.u(i, g) / &prices[g]).max().unwrap_or_else(Rational::zero))
        .collect();
    let cert = FisherCertificate { prices, budgets, mbb };
    cert.verify(inst, alloc)?;
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::super::{run_efx_fpo, RunOptions};
    use super::*;
    use crate::mixed_bobw::Permutation;

    fn certify(rows: &[&[i64]], order: &[usize]) -> (IntegralAllocation, FisherCertificate) {
        let inst = Instance::from_ints(rows, &[]).unwrap();
        let (alloc, trace) = run_efx_fpo(&inst, &Permutation::new(order.to_vec()).unwrap(), RunOptions::default()).unwrap();
        let cert = build_fisher_certificate(&inst, &alloc, &trace).unwrap();
        (alloc, cert)
    }

    #[test]
    fn uniform_prices_when_everything_is_large() {
        let (_, cert) = certify(&[&[2, 2, 2], &[2, 2, 2]], &[0, 1]);
        assert!(cert.prices.windows(2).all(|w| w[0] == w[1]));
        assert!(cert.mbb.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn freezing_example_prices() {
        let (_, cert) = certify(&[&[2, 1, 1], &[2, 1, 1]], &[0, 1]);
        let q = Rational::from_integer;
        assert_eq!(cert.prices, vec![q(2), q(1), q(1)]);
        assert_eq!(cert.budgets, vec![q(2), q(2)]);
        assert_eq!(cert.mbb, vec![q(1), q(1)]);
    }

    #[test]
    fn single_good_to_the_high_agent() {
        let (alloc, cert) = certify(&[&[3], &[1]], &[0, 1]);
        assert_eq!(alloc.bundles[0].goods, vec![0]);
        assert_eq!(cert.mbb[0], &Rational::from_integer(3) / &cert.prices[0]);
    }

    #[test]
    fn verify_rejects_bad_prices() {
        let inst = Instance::from_ints(&[&[2, 1], &[1, 2]], &[]).unwrap();
        let alloc = IntegralAllocation::from_goods(vec![vec![1], vec![0]], 0);
        let q = Rational::from_integer;
        let cert = FisherCertificate { prices: vec![q(1), q(1)], budgets: vec![q(1), q(1)], mbb: vec![q(2), q(2)] };
        assert!(matches!(cert.verify(&inst, &alloc), Err(Error::CertificateFailed(_))));
    }
}
