//! Finite, structured deviation sets.
//!
//! Allowance bids are step functions with at most `max_steps` plateaus whose
//! cuts come from a grid of critical taxes (each nudged by ±ε) and whose
//! levels come from the deviator's cap, its willing-to-buy values and the
//! residual `Ω − others` around every value the other bids take.

use crate::carbon::{AllowanceBid, CarbonMarket};
use crate::coupling::{tau_bounds_unchecked, CoupledMarket, TauProfile};
use crate::power::{AskStrategy, ElecClearing, ElectricityMarket};
use crate::rational::{int, ratio, Rational};
use crate::stepfn::StepFn;
use num_traits::Zero;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FamilyConfig {
    /// Maximum number of plateaus per generated bid.
    pub max_steps: usize,
    /// ε as a fraction of the smallest positive gap.
    pub epsilon_fraction: Rational,
    /// Levels are refined with midpoints until the family reaches this size.
    pub min_size: usize,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        FamilyConfig { max_steps: 2, epsilon_fraction: ratio(1, 1000), min_size: 1000 }
    }
}

/// Smallest positive pairwise gap of `values`, if any.
pub fn smallest_gap(values: &[Rational]) -> Option<Rational> {
    let mut sorted = values.to_vec();
    sorted.sort();
    sorted.dedup();
    sorted.windows(2).map(|w| &w[1] - &w[0]).filter(|g| *g > Rational::zero()).min()
}

fn distinct_values(f: &StepFn) -> Vec<Rational> {
    let mut v: Vec<Rational> = f.plateaus().iter().chain(f.point_values()).cloned().collect();
    v.sort();
    v.dedup();
    v
}

/// Sum of every bid except the deviator's.
pub fn others_total(bids: &[AllowanceBid], deviator: usize) -> StepFn {
    let others: Vec<AllowanceBid> =
        bids.iter().enumerate().filter(|(i, _)| *i != deviator).map(|(_, b)| b.clone()).collect();
    if others.is_empty() {
        return StepFn::constant(Rational::zero(), Some(bids[deviator].curve().domain_end().unwrap().clone()));
    }
    CarbonMarket::aggregate(&others)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeviationFamily {
    pub deviator: usize,
    /// Interior cut points, strictly inside `(0, 𝔭)`.
    pub tau_grid: Vec<Rational>,
    pub levels: Vec<Rational>,
    pub max_steps: usize,
    pub tau_epsilon: Rational,
    pub level_epsilon: Rational,
    penalty: Rational,
    cap: Rational,
}

impl DeviationFamily {
    pub fn build(
        market: &CoupledMarket,
        profile: &TauProfile,
        bids: &[AllowanceBid],
        deviator: usize,
        config: &FamilyConfig,
    ) -> Self {
        let penalty = market.penalty().clone();
        let omega = market.omega();
        let cap = market.producers[deviator].allowance_cap.clone();

        let bounds = tau_bounds_unchecked(profile, omega);
        let mut anchors: Vec<Rational> = profile.critical_taxes().to_vec();
        anchors.extend([bounds.lower, bounds.higher, market.carbon.price(bids)]);
        for b in bids {
            anchors.extend(b.curve().breakpoints().iter().cloned());
        }
        anchors.push(Rational::zero());
        anchors.push(penalty.clone());
        let tau_epsilon = smallest_gap(&anchors).unwrap_or_else(|| penalty.clone()) * &config.epsilon_fraction;
        let mut tau_grid: Vec<Rational> = anchors
            .iter()
            .flat_map(|a| [a - &tau_epsilon, a.clone(), a + &tau_epsilon])
            .filter(|t| *t > Rational::zero() && *t < penalty)
            .collect();
        tau_grid.sort();
        tau_grid.dedup();

        let others = others_total(bids, deviator);
        let residuals: Vec<Rational> = distinct_values(&others).iter().map(|v| omega - v).collect();
        let mut base: Vec<Rational> = vec![Rational::zero(), cap.clone()];
        base.extend(distinct_values(profile.willing(deviator)));
        base.extend(distinct_values(profile.willing_max(deviator)));
        base.extend(distinct_values(bids[deviator].curve()));
        let mut gap_pool = base.clone();
        gap_pool.extend(residuals.iter().cloned());
        gap_pool.push(Rational::zero());
        let level_epsilon = smallest_gap(&gap_pool).unwrap_or_else(|| int(1)) * &config.epsilon_fraction;
        let mut levels = base;
        for r in &residuals {
            levels.extend([r - &level_epsilon, r.clone(), r + &level_epsilon]);
        }
        levels.retain(|l| *l >= Rational::zero() && *l <= cap);
        levels.sort();
        levels.dedup();

        let mut family = DeviationFamily {
            deviator,
            tau_grid,
            levels,
            max_steps: config.max_steps.max(1),
            tau_epsilon,
            level_epsilon,
            penalty,
            cap,
        };
        while family.size() < config.min_size && family.levels.len() > 1 {
            let mids: Vec<Rational> = family.levels.windows(2).map(|w| (&w[0] + &w[1]) / int(2)).collect();
            family.levels.extend(mids);
            family.levels.sort();
        }
        family
    }

    /// Number of bids [`Self::bids`] yields.
    pub fn size(&self) -> usize {
        let l = self.levels.len();
        let t = self.tau_grid.len();
        let mut total = 0usize;
        let mut choose = 1usize;
        for cuts in 0..self.max_steps {
            if cuts > t {
                break;
            }
            if let Some(next) = (choose * (t - cuts + 1)).checked_div(cuts) {
                choose = next;
            }
            total += choose * (1 << cuts) * l * (l.saturating_sub(1)).pow(cuts as u32);
        }
        total
    }

    /// Every bid of the family, in a fixed order.
    pub fn bids(&self) -> Vec<AllowanceBid> {
        let mut out = Vec::with_capacity(self.size());
        let mut cuts = Vec::new();
        self.enumerate_cuts(0, &mut cuts, &mut out);
        out
    }

    fn enumerate_cuts(&self, start: usize, cuts: &mut Vec<(usize, bool)>, out: &mut Vec<AllowanceBid>) {
        self.enumerate_levels(cuts, &mut Vec::new(), out);
        if cuts.len() + 1 >= self.max_steps {
            return;
        }
        for i in start..self.tau_grid.len() {
            for left in [true, false] {
                cuts.push((i, left));
                self.enumerate_cuts(i + 1, cuts, out);
                cuts.pop();
            }
        }
    }

    fn enumerate_levels(&self, cuts: &[(usize, bool)], chosen: &mut Vec<usize>, out: &mut Vec<AllowanceBid>) {
        if chosen.len() == cuts.len() + 1 {
            out.push(self.assemble(cuts, chosen));
            return;
        }
        for l in 0..self.levels.len() {
            if chosen.last() == Some(&l) {
                continue;
            }
            chosen.push(l);
            self.enumerate_levels(cuts, chosen, out);
            chosen.pop();
        }
    }

    fn assemble(&self, cuts: &[(usize, bool)], chosen: &[usize]) -> AllowanceBid {
        let breaks = cuts.iter().map(|(i, _)| self.tau_grid[*i].clone()).collect();
        let plateaus: Vec<Rational> = chosen.iter().map(|&l| self.levels[l].clone()).collect();
        let at = cuts
            .iter()
            .enumerate()
            .map(|(k, (_, left))| if *left { plateaus[k].clone() } else { plateaus[k + 1].clone() })
            .collect();
        let curve = StepFn::from_parts(breaks, plateaus, at, Some(self.penalty.clone())).expect("sorted cuts");
        AllowanceBid::new(self.deviator, curve, &self.cap, &self.penalty).expect("levels within the cap")
    }
}

/// Small ask family for the electricity game: one or two price levels with
/// a cut at quantities of interest. Always contains the marginal-cost ask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AskFamily {
    pub producer: usize,
    pub cuts: Vec<Rational>,
    pub levels: Vec<Rational>,
    cost: StepFn,
}

impl AskFamily {
    pub fn build(market: &ElectricityMarket, costs: &[StepFn], reference: &ElecClearing, producer: usize) -> Self {
        let cost = costs[producer].clone();
        let capacity = cost.domain_end().expect("bounded quantity domain").clone();
        let floor = cost.max_value();
        let mut prices: Vec<Rational> = costs.iter().flat_map(distinct_values).collect();
        prices.extend([reference.p_lower.clone(), reference.p_upper.clone(), market.p_lolc.clone()]);
        prices.sort();
        prices.dedup();
        let mids: Vec<Rational> = prices.windows(2).map(|w| (&w[0] + &w[1]) / int(2)).collect();
        let mut levels: Vec<Rational> = prices.into_iter().chain(mids).collect();
        levels.retain(|l| *l >= floor && *l < market.p_lolc);
        levels.sort();
        levels.dedup();

        let mut cuts: Vec<Rational> = reference.phi.to_vec();
        cuts.push(&capacity / int(2));
        cuts.retain(|c| *c > Rational::zero() && *c < capacity);
        cuts.sort();
        cuts.dedup();
        AskFamily { producer, cuts, levels, cost }
    }

    /// Marginal cost first, then flat asks, then two-level asks.
    pub fn asks(&self) -> Vec<AskStrategy> {
        let end = self.cost.domain_end().cloned();
        let mut out = vec![AskStrategy::marginal_cost(&self.cost)];
        for l in &self.levels {
            out.push(AskStrategy::marginal_cost(&StepFn::constant(l.clone(), end.clone())));
        }
        for cut in &self.cuts {
            for a in &self.levels {
                for b in &self.levels {
                    if a == b {
                        continue;
                    }
                    let curve = StepFn::left_continuous(vec![cut.clone()], vec![a.clone(), b.clone()], end.clone())
                        .expect("cut inside capacity");
                    out.push(AskStrategy::marginal_cost(&curve));
                }
            }
        }
        out.retain(|a| AskStrategy::new(self.producer, a.curve().clone(), &self.cost).is_ok());
        out
    }
}
