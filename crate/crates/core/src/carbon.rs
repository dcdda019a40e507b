//! Capped CO₂ allowance auction (descending "second item" auction).

use crate::error::Error;
use crate::rational::Rational;
use crate::stepfn::{self, StepFn};
use num_traits::Zero;

/// Allowances a producer is ready to buy as a function of the allowance
/// price on `[0, penalty]`. Need not be monotone.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AllowanceBid(StepFn);

impl AllowanceBid {
    /// Checks the domain is exactly `[0, penalty]` and values stay in `[0, cap]`.
    pub fn new(producer: usize, curve: StepFn, cap: &Rational, penalty: &Rational) -> Result<Self, Error> {
        let fail = |reason: String| Err(Error::InadmissibleBid { producer, reason });
        if curve.domain_end() != Some(penalty) {
            return fail(format!("bid must be defined on [0, {penalty}]"));
        }
        if curve.min_value() < Rational::zero() {
            return fail("negative quantity".into());
        }
        if curve.max_value() > *cap {
            return fail(format!("exceeds the allowance cap {cap}"));
        }
        Ok(AllowanceBid(curve))
    }

    pub fn constant(producer: usize, value: Rational, cap: &Rational, penalty: &Rational) -> Result<Self, Error> {
        Self::new(producer, StepFn::constant(value, Some(penalty.clone())), cap, penalty)
    }

    pub fn curve(&self) -> &StepFn {
        &self.0
    }

    pub fn at(&self, price: &Rational) -> Rational {
        self.0.eval(price).expect("price within [0, penalty]")
    }

    /// `A(τ⁺)`, with `A(𝔭⁺) := A(𝔭)` at the end of the domain.
    pub fn right_of(&self, price: &Rational) -> Rational {
        self.0.eval_right(price).unwrap_or_else(|_| self.at(price))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum AllocationMode {
    /// Residual excludes what the rationed cohort already holds at `τ⁺`,
    /// so exactly `min(Ω, AA(p))` allowances are handed out.
    #[default]
    Conserving,
    /// Residual `Ω − Σ_{Δ≥0} A_i(p)` taken literally; may over-allocate.
    Literal,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Co2Clearing {
    pub p_co2: Rational,
    /// Allowances per producer, in producer order.
    pub delta: Vec<Rational>,
    /// The priority cohort alone asked for more than `Ω` and was rationed.
    pub over_cap: bool,
}

impl Co2Clearing {
    pub fn total(&self) -> Rational {
        self.delta.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CarbonMarket {
    /// Allowances on sale.
    pub omega: Rational,
    /// Unit penalty for uncovered emissions; also the top of the price domain.
    pub penalty: Rational,
    pub mode: AllocationMode,
}

impl CarbonMarket {
    pub fn new(omega: Rational, penalty: Rational) -> Self {
        CarbonMarket { omega, penalty, mode: AllocationMode::Conserving }
    }

    pub fn with_mode(mut self, mode: AllocationMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn aggregate(bids: &[AllowanceBid]) -> StepFn {
        let refs: Vec<&StepFn> = bids.iter().map(AllowanceBid::curve).collect();
        stepfn::sum(&refs)
    }

    /// `sup{τ : AA(τ) > Ω}` with `sup ∅ = 0`.
    pub fn price(&self, bids: &[AllowanceBid]) -> Rational {
        let cap = StepFn::constant(self.omega.clone(), None);
        stepfn::sup_exceeding(&Self::aggregate(bids), &cap, &self.penalty)
    }

    pub fn allocate(&self, bids: &[AllowanceBid], p_co2: &Rational) -> Co2Clearing {
        let at: Vec<Rational> = bids.iter().map(|b| b.at(p_co2)).collect();
        let after: Vec<Rational> = bids.iter().map(|b| b.right_of(p_co2)).collect();
        let priority: Vec<bool> = at.iter().zip(&after).map(|(a, r)| r >= a).collect();

        let priority_total: Rational = at.iter().zip(&priority).filter(|(_, &p)| p).map(|(a, _)| a).sum();
        if priority_total > self.omega {
            // only reachable at p = penalty, where no bid can drop any further
            let delta = at
                .iter()
                .zip(&priority)
                .map(|(a, &p)| if p { a * &self.omega / &priority_total } else { Rational::zero() })
                .collect();
            return Co2Clearing { p_co2: p_co2.clone(), delta, over_cap: true };
        }

        let drops: Vec<Rational> = at.iter().zip(&after).map(|(a, r)| a - r).collect();
        let total_drop: Rational = drops.iter().zip(&priority).filter(|(_, &p)| !p).map(|(d, _)| d).sum();
        let held_after: Rational = after.iter().zip(&priority).filter(|(_, &p)| !p).map(|(r, _)| r).sum();
        let residual = match self.mode {
            AllocationMode::Conserving => {
                let r = &self.omega - &priority_total - &held_after;
                std::cmp::min(r, total_drop.clone())
            }
            AllocationMode::Literal => &self.omega - &priority_total,
        };
        let delta = (0..bids.len())
            .map(|i| if priority[i] { at[i].clone() } else { &after[i] + &drops[i] * &residual / &total_drop })
            .collect();
        Co2Clearing { p_co2: p_co2.clone(), delta, over_cap: false }
    }

    pub fn clear(&self, bids: &[AllowanceBid]) -> Co2Clearing {
        let p = self.price(bids);
        self.allocate(bids, &p)
    }
}
