//! Coupling of the two markets.
//!
//! Allowances bought at the CO₂ price turn each flat cost `c + e·τ` into a
//! two-tier curve. With an exogenous tax `τ` instead, the electricity
//! clearing is a function of `τ` that only changes where two taxed costs,
//! or a taxed cost and a demand step, cross. [`TauProfile`] stores that
//! finite description; the willing-to-buy curves, the design check and the
//! price bounds are read off it exactly.

use crate::carbon::{AllowanceBid, CarbonMarket, Co2Clearing};
use crate::error::Error;
use crate::power::{AskStrategy, Demand, ElecClearing, ElectricityMarket, PriceRule, Producer};
use crate::rational::{format_rational, int, Rational};
use crate::stepfn::{self, cells, Cell, StepFn};
use num_traits::Zero;
use rayon::prelude::*;
use std::fmt;

/// Cost once allowances are allocated: cheap up to the covered output,
/// penalty-priced beyond it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModifiedCost {
    pub tier1_price: Rational,
    pub tier2_price: Rational,
    /// Output covered by the allocation, `min(δ/e, κ)`.
    pub covered_output: Rational,
    pub capacity: Rational,
}

impl ModifiedCost {
    pub fn new(producer: &Producer, allowances: &Rational, p_co2: &Rational, penalty: &Rational) -> Self {
        let covered = std::cmp::min(allowances / &producer.emission_rate, producer.capacity.clone());
        ModifiedCost {
            tier1_price: &producer.cost + &producer.emission_rate * p_co2,
            tier2_price: &producer.cost + &producer.emission_rate * penalty,
            covered_output: covered,
            capacity: producer.capacity.clone(),
        }
    }

    pub fn curve(&self) -> StepFn {
        let end = Some(self.capacity.clone());
        if self.covered_output.is_zero() {
            StepFn::constant(self.tier2_price.clone(), end)
        } else if self.covered_output == self.capacity {
            StepFn::constant(self.tier1_price.clone(), end)
        } else {
            StepFn::left_continuous(
                vec![self.covered_output.clone()],
                vec![self.tier1_price.clone(), self.tier2_price.clone()],
                end,
            )
            .expect("covered output lies inside the capacity")
        }
    }
}

/// Result of one full round: auction, modified costs, electricity clearing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoupledOutcome {
    pub co2: Co2Clearing,
    pub costs: Vec<ModifiedCost>,
    pub elec: ElecClearing,
    pub emissions: Vec<Rational>,
    pub covered: Vec<Rational>,
    pub penalized: Vec<Rational>,
    pub unused: Vec<Rational>,
}

impl CoupledOutcome {
    pub fn share(&self, producer: usize) -> &Rational {
        &self.elec.phi[producer]
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum DesignStatus {
    Valid,
    /// `Ω ≥ W(0)`: allowances are never scarce.
    NoAuction,
    /// `Ω ≤ W̄(𝔭)`: even at the penalty there are not enough allowances.
    Shortage,
    /// Producer never sells electricity at any tax in `[0, 𝔭]`.
    SidelinedProducer {
        index: usize,
        id: String,
    },
}

impl fmt::Display for DesignStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DesignStatus::Valid => write!(f, "valid"),
            DesignStatus::NoAuction => write!(f, "no auction (cap covers the untaxed need)"),
            DesignStatus::Shortage => write!(f, "allowance shortage (cap below need at the penalty)"),
            DesignStatus::SidelinedProducer { id, .. } => write!(f, "producer {id} never produces"),
        }
    }
}

impl DesignStatus {
    pub fn is_valid(&self) -> bool {
        matches!(self, DesignStatus::Valid)
    }

    pub fn label(&self) -> &'static str {
        match self {
            DesignStatus::Valid => "valid",
            DesignStatus::NoAuction => "no_auction",
            DesignStatus::Shortage => "shortage",
            DesignStatus::SidelinedProducer { .. } => "sidelined",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TauBounds {
    pub lower: Rational,
    pub higher: Rational,
}

/// Electricity price as an affine function of the tax on one cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PriceLaw {
    pub intercept: Rational,
    pub slope: Rational,
}

impl PriceLaw {
    pub fn at(&self, tau: &Rational) -> Rational {
        &self.intercept + &self.slope * tau
    }
}

/// Taxed clearing on one cell of the critical-tax grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TauSample {
    pub cell: Cell,
    pub clearing: ElecClearing,
    pub price: PriceLaw,
}

/// Exact description of the taxed market for every `τ ∈ [0, 𝔭]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TauProfile {
    pub penalty: Rational,
    pub ids: Vec<String>,
    /// Allowance cap per producer.
    pub caps: Vec<Rational>,
    critical: Vec<Rational>,
    samples: Vec<TauSample>,
    willing: Vec<StepFn>,
    willing_max: Vec<StepFn>,
    shares: Vec<StepFn>,
}

impl TauProfile {
    pub fn critical_taxes(&self) -> &[Rational] {
        &self.critical
    }

    pub fn samples(&self) -> &[TauSample] {
        &self.samples
    }

    pub fn producers(&self) -> usize {
        self.willing.len()
    }

    /// `W_j(τ) = e_j φ_j(τ)`.
    pub fn willing(&self, j: usize) -> &StepFn {
        &self.willing[j]
    }

    /// `W̄_j(τ) = cap_j · 1{φ_j(τ) > 0}`.
    pub fn willing_max(&self, j: usize) -> &StepFn {
        &self.willing_max[j]
    }

    pub fn share(&self, j: usize) -> &StepFn {
        &self.shares[j]
    }

    pub fn willing_total(&self) -> StepFn {
        stepfn::sum(&self.willing.iter().collect::<Vec<_>>())
    }

    pub fn willing_max_total(&self) -> StepFn {
        stepfn::sum(&self.willing_max.iter().collect::<Vec<_>>())
    }

    fn sample_at(&self, tau: &Rational) -> &TauSample {
        let idx = self.samples.partition_point(|s| match &s.cell {
            Cell::Point(x) => x < tau,
            Cell::Open { to, .. } => to.as_ref().is_some_and(|t| t <= tau),
        });
        &self.samples[idx]
    }

    pub fn clearing_at(&self, tau: &Rational) -> Result<&ElecClearing, Error> {
        self.check_tax(tau)?;
        Ok(&self.sample_at(tau).clearing)
    }

    pub fn price_at(&self, tau: &Rational) -> Result<Rational, Error> {
        self.check_tax(tau)?;
        Ok(self.sample_at(tau).price.at(tau))
    }

    /// `p_elec(τ⁺)` for `τ < 𝔭`.
    pub fn price_right_limit(&self, tau: &Rational) -> Result<Rational, Error> {
        if *tau >= self.penalty {
            return Err(Error::OutOfDomain { x: tau.clone() });
        }
        self.check_tax(tau)?;
        let idx = self.samples.partition_point(|s| match &s.cell {
            Cell::Point(x) => x <= tau,
            Cell::Open { to, .. } => to.as_ref().is_some_and(|t| t <= tau),
        });
        Ok(self.samples[idx].price.at(tau))
    }

    /// `p_elec(τ⁻)` for `τ > 0`.
    pub fn price_left_limit(&self, tau: &Rational) -> Result<Rational, Error> {
        if *tau <= Rational::zero() {
            return Err(Error::OutOfDomain { x: tau.clone() });
        }
        self.check_tax(tau)?;
        let idx = self.samples.partition_point(|s| match &s.cell {
            Cell::Point(x) => x < tau,
            Cell::Open { to, .. } => to.as_ref().is_some_and(|t| t < tau),
        });
        let open = self.samples[..=idx].iter().rev().find(|s| !s.cell.is_point()).expect("interval below tau");
        Ok(open.price.at(tau))
    }

    fn check_tax(&self, tau: &Rational) -> Result<(), Error> {
        if *tau < Rational::zero() || *tau > self.penalty {
            return Err(Error::OutOfDomain { x: tau.clone() });
        }
        Ok(())
    }

    pub fn check_design(&self, omega: &Rational) -> DesignStatus {
        check_design(self, omega)
    }
}

/// Both markets with their shared producers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoupledMarket {
    pub producers: Vec<Producer>,
    pub electricity: ElectricityMarket,
    pub carbon: CarbonMarket,
}

impl CoupledMarket {
    /// Without an explicit `p_lolc`, uses one above every penalty-tier cost
    /// and every demand breakpoint.
    pub fn new(
        producers: Vec<Producer>,
        demand: Demand,
        rule: PriceRule,
        p_lolc: Option<Rational>,
        carbon: CarbonMarket,
    ) -> Result<Self, Error> {
        crate::power::validate_producers(&producers)?;
        if carbon.penalty <= Rational::zero() {
            return Err(Error::PreconditionViolated("penalty must be positive".into()));
        }
        if carbon.omega <= Rational::zero() {
            return Err(Error::PreconditionViolated("allowance cap must be positive".into()));
        }
        let top_cost =
            producers.iter().map(|p| &p.cost + &p.emission_rate * &carbon.penalty).max().unwrap_or_else(Rational::zero);
        let p_lolc = match p_lolc {
            Some(p) if p <= top_cost => {
                return Err(Error::LossOfLoadTooLow { p_lolc: Box::new(p), max_ask: Box::new(top_cost) })
            }
            Some(p) => p,
            None => ElectricityMarket::default_lolc(&demand, &top_cost),
        };
        Ok(CoupledMarket { producers, electricity: ElectricityMarket::new(demand, rule, p_lolc), carbon })
    }

    pub fn penalty(&self) -> &Rational {
        &self.carbon.penalty
    }

    pub fn omega(&self) -> &Rational {
        &self.carbon.omega
    }

    pub fn with_omega(&self, omega: Rational) -> Self {
        let mut m = self.clone();
        m.carbon.omega = omega;
        m
    }

    pub fn caps(&self) -> Vec<Rational> {
        self.producers.iter().map(|p| p.allowance_cap.clone()).collect()
    }

    /// Clearing with every producer asking `c_j + τ e_j`.
    pub fn taxed_clearing(&self, tau: &Rational) -> Result<ElecClearing, Error> {
        if *tau < Rational::zero() || tau > self.penalty() {
            return Err(Error::OutOfDomain { x: tau.clone() });
        }
        self.electricity.clear_marginal(&self.producers, tau)
    }

    /// Taxes in `[0, 𝔭]` where the merit order or a demand step changes,
    /// plus both endpoints.
    pub fn critical_taxes(&self) -> Vec<Rational> {
        let penalty = self.penalty();
        let mut out = vec![Rational::zero(), penalty.clone()];
        for (i, a) in self.producers.iter().enumerate() {
            for b in &self.producers[i + 1..] {
                if a.emission_rate != b.emission_rate {
                    out.push((&a.cost - &b.cost) / (&b.emission_rate - &a.emission_rate));
                }
            }
            for d in self.electricity.demand.curve().breakpoints() {
                out.push((d - &a.cost) / &a.emission_rate);
            }
        }
        out.retain(|t| *t >= Rational::zero() && t <= penalty);
        out.sort();
        out.dedup();
        out
    }

    pub fn tau_profile(&self) -> Result<TauProfile, Error> {
        let critical = self.critical_taxes();
        let grid = cells(&[&StepFn::constant(Rational::zero(), Some(self.penalty().clone()))], &critical);
        let samples: Vec<TauSample> = grid.into_par_iter().map(|cell| self.sample(cell)).collect::<Result<_, _>>()?;

        let per_cell = |value: &dyn Fn(&ElecClearing, usize) -> Rational, j: usize| {
            let mut breaks = Vec::new();
            let mut plateaus = Vec::new();
            let mut at = Vec::new();
            for s in &samples {
                let v = value(&s.clearing, j);
                match &s.cell {
                    Cell::Point(x) => {
                        if plateaus.is_empty() {
                            plateaus.push(v.clone());
                        }
                        breaks.push(x.clone());
                        at.push(v);
                    }
                    Cell::Open { .. } => plateaus.push(v),
                }
            }
            plateaus.push(at.last().unwrap().clone());
            StepFn::from_parts(breaks, plateaus, at, Some(self.penalty().clone())).expect("profile grid")
        };
        let n = self.producers.len();
        let shares: Vec<StepFn> = (0..n).map(|j| per_cell(&|c, j| c.phi[j].clone(), j)).collect();
        let willing = (0..n).map(|j| shares[j].map(|phi| phi * &self.producers[j].emission_rate)).collect();
        let willing_max = (0..n)
            .map(|j| {
                let cap = &self.producers[j].allowance_cap;
                shares[j].map(|phi| if phi.is_zero() { Rational::zero() } else { cap.clone() })
            })
            .collect();
        Ok(TauProfile {
            penalty: self.penalty().clone(),
            ids: self.producers.iter().map(|p| p.id.clone()).collect(),
            caps: self.caps(),
            critical,
            samples,
            willing,
            willing_max,
            shares,
        })
    }

    fn sample(&self, cell: Cell) -> Result<TauSample, Error> {
        match &cell {
            Cell::Point(x) => {
                let clearing = self.taxed_clearing(x)?;
                let price = PriceLaw { intercept: clearing.p_elec.clone(), slope: Rational::zero() };
                Ok(TauSample { cell, clearing, price })
            }
            Cell::Open { from, to } => {
                let to = to.as_ref().expect("tax domain is bounded");
                let width = to - from;
                let t1 = from + &width / int(3);
                let t2 = from + &width * int(2) / int(3);
                let first = self.taxed_clearing(&t1)?;
                let second = self.taxed_clearing(&t2)?;
                if first.phi != second.phi {
                    return Err(Error::InternalInconsistency(format!(
                        "shares vary inside ({}, {})",
                        format_rational(from),
                        format_rational(to)
                    )));
                }
                let slope = (&second.p_elec - &first.p_elec) / (&t2 - &t1);
                let intercept = &first.p_elec - &slope * &t1;
                Ok(TauSample { cell, clearing: first, price: PriceLaw { intercept, slope } })
            }
        }
    }

    fn check_bids(&self, bids: &[AllowanceBid]) -> Result<(), Error> {
        if bids.len() != self.producers.len() {
            return Err(Error::LengthMismatch { expected: self.producers.len(), got: bids.len() });
        }
        Ok(())
    }

    /// Auction, then electricity clearing on the modified costs.
    pub fn coupled_run(&self, bids: &[AllowanceBid]) -> Result<CoupledOutcome, Error> {
        self.check_bids(bids)?;
        let co2 = self.carbon.clear(bids);
        let costs: Vec<ModifiedCost> = self
            .producers
            .iter()
            .zip(&co2.delta)
            .map(|(p, d)| ModifiedCost::new(p, d, &co2.p_co2, self.penalty()))
            .collect();
        let asks: Vec<AskStrategy> = costs.iter().map(|c| AskStrategy::marginal_cost(&c.curve())).collect();
        let elec = self.electricity.clear(&asks)?;
        let emissions: Vec<Rational> =
            self.producers.iter().zip(&elec.phi).map(|(p, phi)| &p.emission_rate * phi).collect();
        let zero = Rational::zero();
        let covered = emissions.iter().zip(&co2.delta).map(|(e, d)| std::cmp::min(e, d).clone()).collect();
        let penalized = emissions.iter().zip(&co2.delta).map(|(e, d)| std::cmp::max(e - d, zero.clone())).collect();
        let unused = emissions.iter().zip(&co2.delta).map(|(e, d)| std::cmp::max(d - e, zero.clone())).collect();
        Ok(CoupledOutcome { co2, costs, elec, emissions, covered, penalized, unused })
    }

    pub fn bid(&self, producer: usize, curve: StepFn) -> Result<AllowanceBid, Error> {
        AllowanceBid::new(producer, curve, &self.producers[producer].allowance_cap, self.penalty())
    }

    pub fn constant_bid(&self, producer: usize, value: Rational) -> Result<AllowanceBid, Error> {
        self.bid(producer, StepFn::constant(value, Some(self.penalty().clone())))
    }
}

pub fn check_design(profile: &TauProfile, omega: &Rational) -> DesignStatus {
    let zero = Rational::zero();
    if *omega >= profile.willing_total().eval(&zero).expect("0 in domain") {
        return DesignStatus::NoAuction;
    }
    if *omega <= profile.willing_max_total().eval(&profile.penalty).expect("penalty in domain") {
        return DesignStatus::Shortage;
    }
    for j in 0..profile.producers() {
        if profile.willing_max(j).is_identically_zero() {
            return DesignStatus::SidelinedProducer { index: j, id: profile.ids[j].clone() };
        }
    }
    DesignStatus::Valid
}

/// `sup{τ : W(τ) > Ω}` and `sup{τ : W̄(τ) > Ω}` over `[0, 𝔭]`, whatever the
/// design status.
pub fn tau_bounds_unchecked(profile: &TauProfile, omega: &Rational) -> TauBounds {
    let cap = StepFn::constant(omega.clone(), None);
    TauBounds {
        lower: stepfn::sup_exceeding(&profile.willing_total(), &cap, &profile.penalty),
        higher: stepfn::sup_exceeding(&profile.willing_max_total(), &cap, &profile.penalty),
    }
}

pub fn tau_bounds(profile: &TauProfile, omega: &Rational) -> Result<TauBounds, Error> {
    require_valid(profile, omega)?;
    Ok(tau_bounds_unchecked(profile, omega))
}

fn require_valid(profile: &TauProfile, omega: &Rational) -> Result<(), Error> {
    match check_design(profile, omega) {
        DesignStatus::Valid => Ok(()),
        other => Err(Error::DesignInvalid(other)),
    }
}

fn wrap(profile: &TauProfile, curves: Vec<StepFn>) -> Result<Vec<AllowanceBid>, Error> {
    curves.into_iter().enumerate().map(|(j, c)| AllowanceBid::new(j, c, &profile.caps[j], &profile.penalty)).collect()
}

fn check_len(profile: &TauProfile, got: usize) -> Result<(), Error> {
    if got != profile.producers() {
        return Err(Error::LengthMismatch { expected: profile.producers(), got });
    }
    Ok(())
}

/// Every producer bids its own willing-to-buy curve `W_j`.
pub fn lower_strategy(profile: &TauProfile, omega: &Rational) -> Result<Vec<AllowanceBid>, Error> {
    require_valid(profile, omega)?;
    wrap(profile, profile.willing.clone())
}

/// Constant `W_j(τ_lower)` up to `τ_lower`, then the given tail.
pub fn lower_strategy_with_tail(
    profile: &TauProfile,
    omega: &Rational,
    tails: &[StepFn],
) -> Result<Vec<AllowanceBid>, Error> {
    let bounds = tau_bounds(profile, omega)?;
    check_len(profile, tails.len())?;
    let curves = (0..profile.producers())
        .map(|j| lower_head(profile, j, &bounds.lower).splice(&bounds.lower, &tails[j]))
        .collect();
    wrap(profile, curves)
}

fn lower_head(profile: &TauProfile, j: usize, tau_lower: &Rational) -> StepFn {
    let level = profile.willing(j).eval(tau_lower).expect("bound within domain");
    StepFn::constant(level, Some(profile.penalty.clone()))
}

/// Every producer bids `W̄_j`.
pub fn higher_strategy(profile: &TauProfile, omega: &Rational) -> Result<Vec<AllowanceBid>, Error> {
    require_valid(profile, omega)?;
    wrap(profile, profile.willing_max.clone())
}

/// The given head up to `τ_higher`, then `W̄_j`.
pub fn higher_strategy_with_head(
    profile: &TauProfile,
    omega: &Rational,
    heads: &[StepFn],
) -> Result<Vec<AllowanceBid>, Error> {
    let bounds = tau_bounds(profile, omega)?;
    check_len(profile, heads.len())?;
    let curves = (0..profile.producers()).map(|j| heads[j].splice(&bounds.higher, profile.willing_max(j))).collect();
    wrap(profile, curves)
}

/// `W_j(τ_lower)` up to `τ_lower`, `middle` on `(τ_lower, τ_higher]`, `W̄_j` after.
pub fn splice_curves(profile: &TauProfile, bounds: &TauBounds, j: usize, middle: &StepFn) -> StepFn {
    lower_head(profile, j, &bounds.lower).splice(&bounds.lower, &middle.splice(&bounds.higher, profile.willing_max(j)))
}

pub fn intermediate_strategy(
    profile: &TauProfile,
    omega: &Rational,
    middles: &[StepFn],
) -> Result<Vec<AllowanceBid>, Error> {
    let bounds = tau_bounds(profile, omega)?;
    check_len(profile, middles.len())?;
    let mut curves = Vec::with_capacity(middles.len());
    for (j, middle) in middles.iter().enumerate() {
        let range = stepfn::Window::open_closed(bounds.lower.clone(), bounds.higher.clone());
        let out_of_range = stepfn::inf_where(&[middle], &range, |v| v[0] < Rational::zero() || v[0] > profile.caps[j]);
        if out_of_range.is_some() {
            return Err(Error::InadmissibleMiddle { producer: j });
        }
        curves.push(splice_curves(profile, &bounds, j, middle));
    }
    wrap(profile, curves)
}
