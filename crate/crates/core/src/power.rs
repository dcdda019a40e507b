//! Electricity market: offer curves, the clearing price pair and
//! proportional rationing at the lower clearing price.

use crate::error::Error;
use crate::rational::{int, Rational};
use crate::stepfn::{self, cells, values_on, Cell, StepFn, Window};
use num_traits::Zero;

/// A single production unit with constant marginal cost and emission rate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Producer {
    pub id: String,
    /// Marginal production cost, €/MWh.
    pub cost: Rational,
    /// tCO₂ per MWh.
    pub emission_rate: Rational,
    /// MWh.
    pub capacity: Rational,
    /// Maximum allowances the producer may buy, tCO₂.
    pub allowance_cap: Rational,
}

impl Producer {
    /// Allowance cap defaults to the emissions of full-capacity output.
    pub fn new(id: impl Into<String>, cost: Rational, emission_rate: Rational, capacity: Rational) -> Self {
        let allowance_cap = &emission_rate * &capacity;
        Producer { id: id.into(), cost, emission_rate, capacity, allowance_cap }
    }

    pub fn with_allowance_cap(mut self, cap: Rational) -> Self {
        self.allowance_cap = cap;
        self
    }

    pub fn full_emissions(&self) -> Rational {
        &self.emission_rate * &self.capacity
    }

    pub fn validate(&self) -> Result<(), Error> {
        let fail = |reason: &str| Err(Error::InvalidProducer { id: self.id.clone(), reason: reason.into() });
        if self.cost < Rational::zero() {
            return fail("marginal cost must be non-negative");
        }
        if self.emission_rate <= Rational::zero() {
            return fail("emission rate must be positive");
        }
        if self.capacity <= Rational::zero() {
            return fail("capacity must be positive");
        }
        if self.allowance_cap <= Rational::zero() {
            return fail("allowance cap must be positive");
        }
        Ok(())
    }

    /// Flat marginal cost curve on `[0, κ]`.
    pub fn cost_curve(&self, carbon_price: &Rational) -> StepFn {
        StepFn::constant(&self.cost + &self.emission_rate * carbon_price, Some(self.capacity.clone()))
    }
}

/// Checks every producer and the pairwise-distinct `(c, e)` requirement.
pub fn validate_producers(producers: &[Producer]) -> Result<(), Error> {
    for p in producers {
        p.validate()?;
    }
    for (i, a) in producers.iter().enumerate() {
        for b in &producers[i + 1..] {
            if a.cost == b.cost && a.emission_rate == b.emission_rate {
                return Err(Error::InvalidProducer {
                    id: b.id.clone(),
                    reason: format!("same (cost, emission rate) as {}", a.id),
                });
            }
            if a.id == b.id {
                return Err(Error::InvalidProducer { id: b.id.clone(), reason: "duplicate id".into() });
            }
        }
    }
    Ok(())
}

/// Aggregate demand, price → MWh. Non-increasing, left-continuous, `D(0) > 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Demand(StepFn);

impl Demand {
    pub fn new(curve: StepFn) -> Result<Self, Error> {
        if curve.domain_end().is_some() {
            return Err(Error::InvalidDemand("demand must be defined for every price".into()));
        }
        if curve.continuity() != Some(stepfn::Continuity::Left) {
            return Err(Error::InvalidDemand("demand must be left-continuous".into()));
        }
        if !curve.is_non_increasing() {
            return Err(Error::InvalidDemand("demand must be non-increasing".into()));
        }
        if curve.eval(&Rational::zero())? <= Rational::zero() {
            return Err(Error::InvalidDemand("D(0) must be positive".into()));
        }
        if curve.min_value() < Rational::zero() {
            return Err(Error::InvalidDemand("demand must be non-negative".into()));
        }
        Ok(Demand(curve))
    }

    /// `value` for prices up to and including `cap`, zero above.
    pub fn inelastic(value: Rational, cap: Rational) -> Result<Self, Error> {
        Self::new(StepFn::left_continuous(vec![cap], vec![value, Rational::zero()], None)?)
    }

    pub fn curve(&self) -> &StepFn {
        &self.0
    }

    pub fn at(&self, price: &Rational) -> Rational {
        self.0.eval(price).expect("demand is defined on all prices")
    }
}

/// Ask price as a function of quantity on `[0, κ_j]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AskStrategy {
    ask: StepFn,
}

impl AskStrategy {
    /// Asks exactly the marginal cost: the dominant strategy.
    pub fn marginal_cost(cost_curve: &StepFn) -> Self {
        AskStrategy { ask: cost_curve.clone() }
    }

    /// Validates the no-loss constraint `ask(q) ≥ cost(q)` on the cost domain.
    pub fn new(producer: usize, ask: StepFn, cost_curve: &StepFn) -> Result<Self, Error> {
        let fail = |reason: String| Err(Error::InadmissibleAsk { producer, reason });
        if ask.domain_end() != cost_curve.domain_end() {
            return fail("ask and cost curve must share the quantity domain".into());
        }
        for cell in cells(&[&ask, cost_curve], &[]) {
            let v = values_on(&[&ask, cost_curve], &cell);
            if v[0] < v[1] {
                return fail(format!("asks below marginal cost near q = {}", cell.witness()));
            }
        }
        Ok(AskStrategy { ask })
    }

    pub fn curve(&self) -> &StepFn {
        &self.ask
    }

    pub fn max_ask(&self) -> Rational {
        self.ask.max_value()
    }

    /// Offer size `Of(p) = sup{q : ask(q) ≤ p}` for `p > 0`, with `Of(0) = 0`.
    ///
    /// Weak inequality keeps the result right-continuous; the strict form
    /// would make a flat ask offer nothing at its own price.
    pub fn offer(&self) -> OfferCurve {
        // (value, right end) of every piece of the ask
        let mut pieces: Vec<(Rational, Rational)> = cells(&[&self.ask], &[])
            .into_iter()
            .map(|cell| {
                let value = values_on(&[&self.ask], &cell).pop().unwrap();
                let reach = match &cell {
                    Cell::Point(x) => x.clone(),
                    Cell::Open { to, .. } => to.clone().expect("ask domain is bounded"),
                };
                (value, reach)
            })
            .collect();
        pieces.sort();
        let mut breaks: Vec<Rational> = Vec::new();
        let mut levels: Vec<Rational> = vec![Rational::zero()];
        for (value, reach) in pieces {
            let best = levels.last().unwrap();
            if reach <= *best {
                continue;
            }
            if breaks.last() == Some(&value) {
                *levels.last_mut().unwrap() = reach;
            } else {
                breaks.push(value);
                levels.push(reach);
            }
        }
        let mut at: Vec<Rational> = levels[1..].to_vec();
        if breaks.first().is_some_and(|b| b.is_zero()) {
            at[0] = Rational::zero();
        }
        OfferCurve(StepFn::from_parts(breaks, levels, at, None).expect("offer is well formed"))
    }
}

/// Offered quantity as a function of price; non-decreasing, `Of(0) = 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OfferCurve(StepFn);

impl OfferCurve {
    pub fn curve(&self) -> &StepFn {
        &self.0
    }

    pub fn at(&self, price: &Rational) -> Rational {
        self.0.eval(price).expect("offers are defined on all prices")
    }

    fn left_of(&self, price: &Rational) -> Rational {
        self.0.eval_left(price).expect("positive price")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PriceRule {
    /// Pay the lower clearing price (buyer surplus).
    Lower,
    /// Pay the upper clearing price (seller surplus).
    Upper,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClearingPrices {
    pub lower: Rational,
    pub upper: Rational,
    pub paid: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ElecClearing {
    pub p_lower: Rational,
    pub p_upper: Rational,
    pub p_elec: Rational,
    /// Quantity sold per producer, in producer order.
    pub phi: Vec<Rational>,
    pub served: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ElectricityMarket {
    pub demand: Demand,
    pub rule: PriceRule,
    /// Loss-of-load cost: caps the price search, must exceed every ask.
    pub p_lolc: Rational,
}

impl ElectricityMarket {
    pub fn new(demand: Demand, rule: PriceRule, p_lolc: Rational) -> Self {
        ElectricityMarket { demand, rule, p_lolc }
    }

    /// One above the largest of the given asks and demand breakpoints, so
    /// the cap neither binds an ask nor truncates the demand plateau.
    pub fn default_lolc(demand: &Demand, max_ask: &Rational) -> Rational {
        let top_break = demand.curve().breakpoints().last().cloned().unwrap_or_else(Rational::zero);
        std::cmp::max(top_break, max_ask.clone()) + int(1)
    }

    pub fn clear_price(&self, offers: &[OfferCurve]) -> ClearingPrices {
        let refs: Vec<&StepFn> = offers.iter().map(OfferCurve::curve).collect();
        let total = stepfn::sum(&refs);
        let demand = self.demand.curve();
        let lower = stepfn::inf_exceeding(&total, demand, &self.p_lolc);
        let level = self.demand.at(&lower);
        let window = Window::closed(lower.clone(), std::cmp::max(lower.clone(), self.p_lolc.clone()));
        let upper = stepfn::sup_where(&[demand], &window, |v| v[0] == level).expect("lower price is in the set");
        let paid = match self.rule {
            PriceRule::Lower => lower.clone(),
            PriceRule::Upper => upper.clone(),
        };
        ClearingPrices { lower, upper, paid }
    }

    /// Quantities at the lower price: full offers if demand covers them,
    /// otherwise the jump at `p̲` is shared in proportion to each offer's jump.
    pub fn allocate(&self, offers: &[OfferCurve], prices: &ClearingPrices) -> Result<Vec<Rational>, Error> {
        let p = &prices.lower;
        let demand = self.demand.at(p);
        let at_p: Vec<Rational> = offers.iter().map(|o| o.at(p)).collect();
        let total: Rational = at_p.iter().sum();
        if demand >= total {
            return Ok(at_p);
        }
        let before: Vec<Rational> = offers.iter().map(|o| o.left_of(p)).collect();
        let total_before: Rational = before.iter().sum();
        let jump = &total - &total_before;
        if jump.is_zero() {
            return Err(Error::InternalInconsistency(format!("no supply jump at the lower price {p}")));
        }
        let residual = &demand - &total_before;
        Ok(before
            .into_iter()
            .zip(at_p)
            .map(|(b, a)| {
                let own_jump = &a - &b;
                b + own_jump * &residual / &jump
            })
            .collect())
    }

    pub fn clear(&self, asks: &[AskStrategy]) -> Result<ElecClearing, Error> {
        let max_ask = asks.iter().map(AskStrategy::max_ask).max().unwrap_or_else(Rational::zero);
        if max_ask >= self.p_lolc {
            return Err(Error::LossOfLoadTooLow { p_lolc: Box::new(self.p_lolc.clone()), max_ask: Box::new(max_ask) });
        }
        let offers: Vec<OfferCurve> = asks.iter().map(AskStrategy::offer).collect();
        let prices = self.clear_price(&offers);
        let phi = self.allocate(&offers, &prices)?;
        let served = phi.iter().sum();
        Ok(ElecClearing { p_lower: prices.lower, p_upper: prices.upper, p_elec: prices.paid, phi, served })
    }

    /// Clears with every producer asking its flat cost `c_j + τ e_j`.
    pub fn clear_marginal(&self, producers: &[Producer], carbon_price: &Rational) -> Result<ElecClearing, Error> {
        let asks: Vec<AskStrategy> =
            producers.iter().map(|p| AskStrategy::marginal_cost(&p.cost_curve(carbon_price))).collect();
        self.clear(&asks)
    }
}
