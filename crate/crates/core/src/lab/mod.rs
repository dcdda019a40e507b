//! Brute-force checks of equilibrium properties on small instances.
//!
//! Every check returns a [`VerificationReport`]. A counterexample always
//! carries a [`Witness`] that can be replayed through the market modules.
//! Searches run over finite families (see [`family`]), so `Holds` means "no
//! counterexample in the family", and reports state the family size.

pub mod family;

use crate::carbon::AllowanceBid;
use crate::coupling::{splice_curves, tau_bounds, CoupledMarket, CoupledOutcome, TauBounds, TauProfile};
use crate::error::Error;
use crate::power::{AskStrategy, ElecClearing, ElectricityMarket};
use crate::rational::{format_rational, Rational};
use crate::stepfn::{zip_cells, Cell, StepFn};
use family::{others_total, smallest_gap, AskFamily, DeviationFamily, FamilyConfig};
use num_traits::Zero;
use rayon::prelude::*;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    Holds,
    CounterexampleFound,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Holds => "holds",
            Verdict::CounterexampleFound => "counterexample",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Claim {
    /// Switching to marginal-cost asks never lowers a producer's share.
    Dominance,
    /// Every Nash ask profile reproduces the upper price and shares of the
    /// marginal-cost profile.
    ElecUniqueness,
    /// No unilateral favorable deviation clears below the lower bound.
    NoGainBelowLower,
    /// A deviation clearing above the higher bound leaves the deviator no share.
    NoShareAboveHigher,
    /// A profile clearing below the lower bound admits a favorable deviation.
    NotNashBelowLower,
    /// A profile clearing above the higher bound is neither effective nor strong Nash.
    NotStrongAboveHigher,
    /// No family deviation improves any producer, and allowance holders produce.
    EffectiveNash,
}

impl Claim {
    pub fn id(&self) -> &'static str {
        match self {
            Claim::Dominance => "dominance",
            Claim::ElecUniqueness => "elec-uniqueness",
            Claim::NoGainBelowLower => "no-gain-below-lower",
            Claim::NoShareAboveHigher => "no-share-above-higher",
            Claim::NotNashBelowLower => "not-nash-below-lower",
            Claim::NotStrongAboveHigher => "not-strong-above-higher",
            Claim::EffectiveNash => "effective-nash",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Profile {
    Asks(Vec<AskStrategy>),
    Bids(Vec<AllowanceBid>),
}

/// A deviated profile with the shares it produced.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub deviators: Vec<usize>,
    pub profile: Profile,
    pub baseline: Vec<Rational>,
    pub payoffs: Vec<Rational>,
    pub p_co2: Option<Rational>,
}

impl Witness {
    pub fn replay_asks(&self, market: &ElectricityMarket) -> Result<Vec<Rational>, Error> {
        match &self.profile {
            Profile::Asks(asks) => Ok(market.clear(asks)?.phi),
            Profile::Bids(_) => Err(Error::PreconditionViolated("witness holds allowance bids".into())),
        }
    }

    pub fn replay_bids(&self, market: &CoupledMarket) -> Result<Vec<Rational>, Error> {
        match &self.profile {
            Profile::Bids(bids) => Ok(market.coupled_run(bids)?.elec.phi),
            Profile::Asks(_) => Err(Error::PreconditionViolated("witness holds ask strategies".into())),
        }
    }

    /// Replays through whichever market the profile belongs to.
    pub fn replay(&self, market: &CoupledMarket) -> Result<Vec<Rational>, Error> {
        match &self.profile {
            Profile::Asks(_) => self.replay_asks(&market.electricity),
            Profile::Bids(_) => self.replay_bids(market),
        }
    }

    /// Replaying reproduces the recorded payoffs exactly.
    pub fn is_reproducible(&self, market: &CoupledMarket) -> bool {
        self.replay(market).is_ok_and(|p| p == self.payoffs)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerificationReport {
    pub claim: Claim,
    pub instance: String,
    pub verdict: Verdict,
    pub witness: Option<Witness>,
    /// Deviations available to the search.
    pub family_size: usize,
    /// Deviations actually cleared.
    pub evaluated: usize,
    pub details: Vec<(String, String)>,
}

impl VerificationReport {
    fn new(claim: Claim, instance: impl Into<String>) -> Self {
        VerificationReport {
            claim,
            instance: instance.into(),
            verdict: Verdict::Holds,
            witness: None,
            family_size: 0,
            evaluated: 0,
            details: Vec::new(),
        }
    }

    fn note(&mut self, key: &str, value: impl ToString) {
        self.details.push((key.to_string(), value.to_string()));
    }

    fn found(&mut self, witness: Witness) {
        self.verdict = Verdict::CounterexampleFound;
        self.witness = Some(witness);
    }

    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }

    pub fn detail(&self, key: &str) -> Option<&str> {
        self.details.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

fn with_replaced<T: Clone>(profile: &[T], j: usize, replacement: T) -> Vec<T> {
    let mut out = profile.to_vec();
    out[j] = replacement;
    out
}

/// Marginal-cost deviation never strictly hurts, for every producer.
pub fn check_dominance(
    market: &ElectricityMarket,
    costs: &[StepFn],
    asks: &[AskStrategy],
) -> Result<VerificationReport, Error> {
    if costs.len() != asks.len() {
        return Err(Error::LengthMismatch { expected: asks.len(), got: costs.len() });
    }
    let mut report = VerificationReport::new(Claim::Dominance, format!("{} producers", asks.len()));
    let base = market.clear(asks)?;
    for (j, cost) in costs.iter().enumerate() {
        let deviated = with_replaced(asks, j, AskStrategy::marginal_cost(cost));
        let after = market.clear(&deviated)?;
        report.evaluated += 1;
        if after.phi[j] < base.phi[j] {
            report.found(Witness {
                deviators: vec![j],
                profile: Profile::Asks(deviated),
                baseline: base.phi.clone(),
                payoffs: after.phi,
                p_co2: None,
            });
            break;
        }
    }
    report.family_size = asks.len();
    Ok(report)
}

/// First strictly improving unilateral ask deviation found in each
/// producer's [`AskFamily`], if any.
pub fn find_ask_deviation(
    market: &ElectricityMarket,
    costs: &[StepFn],
    asks: &[AskStrategy],
    reference: &ElecClearing,
) -> Result<(Option<Witness>, usize), Error> {
    let base = market.clear(asks)?;
    let mut evaluated = 0;
    for j in 0..asks.len() {
        let family = AskFamily::build(market, costs, reference, j).asks();
        evaluated += family.len();
        let hit = family
            .into_par_iter()
            .map(|ask| {
                let deviated = with_replaced(asks, j, ask);
                market.clear(&deviated).map(|c| (deviated, c.phi))
            })
            .find_first(|r| r.as_ref().map_or(true, |(_, phi)| phi[j] > base.phi[j]));
        if let Some(r) = hit {
            let (profile, payoffs) = r?;
            let witness = Witness {
                deviators: vec![j],
                profile: Profile::Asks(profile),
                baseline: base.phi.clone(),
                payoffs,
                p_co2: None,
            };
            return Ok((Some(witness), evaluated));
        }
    }
    Ok((None, evaluated))
}

/// Candidates that survive the Nash filter must match the marginal-cost
/// profile on the upper price and every share.
pub fn check_elec_uniqueness(
    market: &ElectricityMarket,
    costs: &[StepFn],
    candidates: &[Vec<AskStrategy>],
) -> Result<VerificationReport, Error> {
    let marginal: Vec<AskStrategy> = costs.iter().map(AskStrategy::marginal_cost).collect();
    let reference = market.clear(&marginal)?;
    let mut report = VerificationReport::new(Claim::ElecUniqueness, format!("{} candidates", candidates.len()));
    let mut nash = 0usize;
    let mut excluded = 0usize;
    for candidate in candidates {
        let (deviation, evaluated) = find_ask_deviation(market, costs, candidate, &reference)?;
        report.evaluated += evaluated;
        if deviation.is_some() {
            excluded += 1;
            continue;
        }
        nash += 1;
        let outcome = market.clear(candidate)?;
        if outcome.p_upper != reference.p_upper || outcome.phi != reference.phi {
            report.found(Witness {
                deviators: vec![],
                profile: Profile::Asks(candidate.clone()),
                baseline: reference.phi.clone(),
                payoffs: outcome.phi,
                p_co2: None,
            });
            break;
        }
    }
    report.family_size = candidates.len();
    report.note("nash_candidates", nash);
    report.note("excluded_by_filter", excluded);
    report.note("p_upper", format_rational(&reference.p_upper));
    Ok(report)
}

/// Where a deviation's clearing price must land to count.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Region {
    /// Strictly below the bound; counts when the deviator's share strictly grows.
    Below(Rational),
    /// Strictly above the bound; counts when the deviator gets any share.
    Above(Rational),
    /// Any price; counts when the deviator's share strictly grows.
    Anywhere,
}

impl Region {
    fn contains(&self, price: &Rational) -> bool {
        match self {
            Region::Below(b) => price < b,
            Region::Above(b) => price > b,
            Region::Anywhere => true,
        }
    }

    fn violates(&self, before: &Rational, after: &Rational) -> bool {
        match self {
            Region::Above(_) => *after > Rational::zero(),
            _ => after > before,
        }
    }
}

/// Clears every family bid for the deviator and reports the first (in family
/// order) whose price lands in `region` with a violating share.
pub fn search_carbon_deviation(
    market: &CoupledMarket,
    bids: &[AllowanceBid],
    family: &DeviationFamily,
    region: &Region,
) -> Result<VerificationReport, Error> {
    let claim = match region {
        Region::Above(_) => Claim::NoShareAboveHigher,
        _ => Claim::NoGainBelowLower,
    };
    let j = family.deviator;
    let mut report = VerificationReport::new(claim, format!("deviator {}", market.producers[j].id));
    let base = market.coupled_run(bids)?;
    let candidates = family.bids();
    report.family_size = candidates.len();
    report.evaluated = candidates.len();

    let outcomes: Vec<Result<(bool, bool), Error>> = candidates
        .par_iter()
        .map(|bid| {
            let deviated = with_replaced(bids, j, bid.clone());
            let out = market.coupled_run(&deviated)?;
            let inside = region.contains(&out.co2.p_co2);
            Ok((inside, inside && region.violates(&base.elec.phi[j], &out.elec.phi[j])))
        })
        .collect();
    let mut in_region = 0usize;
    let mut first = None;
    for (idx, r) in outcomes.into_iter().enumerate() {
        let (inside, bad) = r?;
        in_region += usize::from(inside);
        if bad && first.is_none() {
            first = Some(idx);
        }
    }
    if let Some(idx) = first {
        let deviated = with_replaced(bids, j, candidates[idx].clone());
        let out = market.coupled_run(&deviated)?;
        report.found(Witness {
            deviators: vec![j],
            profile: Profile::Bids(deviated),
            baseline: base.elec.phi.clone(),
            payoffs: out.elec.phi,
            p_co2: Some(out.co2.p_co2),
        });
    }
    report.note("in_region", in_region);
    report.note("baseline_p_co2", format_rational(&base.co2.p_co2));
    Ok(report)
}

/// `Ω − others(τ) − ε` clamped to `[0, cap]`.
fn residual_grab(others: &Rational, omega: &Rational, epsilon: &Rational, cap: &Rational) -> Rational {
    let v = omega - others - epsilon;
    if v < Rational::zero() {
        Rational::zero()
    } else if v > *cap {
        cap.clone()
    } else {
        v
    }
}

/// Deviation that takes the whole cap at the clearing price and grabs the
/// residual just below `Ω` above it.
fn template_b(market: &CoupledMarket, bids: &[AllowanceBid], j: usize, p: &Rational, eps: &Rational) -> StepFn {
    let others = others_total(bids, j);
    let cap = &market.producers[j].allowance_cap;
    let omega = market.omega();
    zip_cells(&[&others], std::slice::from_ref(p), |cell, v| match cell {
        Cell::Point(x) if x == p => cap.clone(),
        _ if cell.lower() >= p => residual_grab(&v[0], omega, eps, cap),
        _ => Rational::zero(),
    })
}

/// Deviation for a producer that sells its whole capacity for every tax in
/// `[p, τ̂]`: take the cap at `p`, then either the cap or the residual on
/// `(p, τ̂]`, and the original bid beyond.
fn template_a(
    market: &CoupledMarket,
    bids: &[AllowanceBid],
    j: usize,
    p: &Rational,
    reach: &Rational,
    held: &Rational,
    eps: &Rational,
) -> StepFn {
    let others = others_total(bids, j);
    let own = bids[j].curve();
    let cap = &market.producers[j].allowance_cap;
    let omega = market.omega();
    zip_cells(&[&others, own], &[p.clone(), reach.clone()], |cell, v| {
        let inside = cell.lower() >= p && cell.upper().is_some_and(|u| u <= reach);
        match cell {
            Cell::Point(x) if x == p => cap.clone(),
            _ if inside => {
                if &v[0] + held >= *omega {
                    residual_grab(&v[0], omega, eps, cap)
                } else {
                    cap.clone()
                }
            }
            _ => v[1].clone(),
        }
    })
}

/// Right end of the run of taxes from `p` on which producer `j` sells its
/// whole capacity, capped at `upper`; `None` if it does not at `p`.
fn full_output_reach(
    market: &CoupledMarket,
    profile: &TauProfile,
    j: usize,
    p: &Rational,
    upper: &Rational,
) -> Option<Rational> {
    let full = market.producers[j].full_emissions();
    let w = profile.willing(j);
    if w.eval(p).ok()? != full {
        return None;
    }
    let mut reach = p.clone();
    for cell in crate::stepfn::cells(&[w], &[p.clone(), upper.clone()]) {
        if cell.lower() < p || cell.lower() >= upper {
            continue;
        }
        if crate::stepfn::values_on(&[w], &cell)[0] != full {
            break;
        }
        reach = std::cmp::min(cell.upper().cloned().unwrap_or_else(|| upper.clone()), upper.clone());
    }
    Some(reach)
}

/// Builds the explicit deviations for a profile clearing below the lower
/// bound and confirms one strictly improves its producer.
pub fn check_not_nash_below(
    market: &CoupledMarket,
    profile: &TauProfile,
    bids: &[AllowanceBid],
    epsilon_fraction: &Rational,
) -> Result<VerificationReport, Error> {
    let bounds = tau_bounds(profile, market.omega())?;
    let base = market.coupled_run(bids)?;
    let p = base.co2.p_co2.clone();
    if p >= bounds.lower {
        return Err(Error::PreconditionViolated(format!(
            "clearing price {} is not below the lower bound {}",
            format_rational(&p),
            format_rational(&bounds.lower)
        )));
    }
    let mut report = VerificationReport::new(Claim::NotNashBelowLower, format!("p_co2 = {}", format_rational(&p)));
    let mut templates: Vec<(usize, &'static str, StepFn)> = Vec::new();
    for j in 0..market.producers.len() {
        let others = others_total(bids, j);
        let mut pool: Vec<Rational> =
            others.plateaus().iter().chain(others.point_values()).map(|v| market.omega() - v).collect();
        pool.extend(bids[j].curve().plateaus().iter().cloned());
        pool.push(Rational::zero());
        let eps = smallest_gap(&pool).unwrap_or_else(|| market.omega().clone()) * epsilon_fraction;
        let producer = &market.producers[j];
        if base.elec.phi[j] < producer.capacity {
            if let Some(reach) = full_output_reach(market, profile, j, &p, &bounds.lower) {
                if reach > p {
                    templates.push((j, "a", template_a(market, bids, j, &p, &reach, &base.co2.delta[j], &eps)));
                }
            }
        }
        templates.push((j, "b", template_b(market, bids, j, &p, &eps)));
    }
    report.family_size = templates.len();
    for (j, name, curve) in templates {
        let bid = market.bid(j, curve)?;
        let deviated = with_replaced(bids, j, bid);
        let out = market.coupled_run(&deviated)?;
        report.evaluated += 1;
        if out.elec.phi[j] > base.elec.phi[j] {
            report.note("improving_template", name);
            report.note("improving_producer", &market.producers[j].id);
            report.witness = Some(Witness {
                deviators: vec![j],
                profile: Profile::Bids(deviated),
                baseline: base.elec.phi.clone(),
                payoffs: out.elec.phi,
                p_co2: Some(out.co2.p_co2),
            });
            return Ok(report);
        }
    }
    report.verdict = Verdict::CounterexampleFound;
    report.witness = Some(Witness {
        deviators: vec![],
        profile: Profile::Bids(bids.to_vec()),
        baseline: base.elec.phi.clone(),
        payoffs: base.elec.phi,
        p_co2: Some(p),
    });
    Ok(report)
}

/// Allowance holders that the taxed clearing at the CO₂ price leaves idle.
pub fn idle_holders(profile: &TauProfile, outcome: &CoupledOutcome) -> Vec<usize> {
    (0..profile.producers())
        .filter(|&j| {
            outcome.co2.delta[j] > Rational::zero()
                && profile.share(j).eval(&outcome.co2.p_co2).expect("price within [0, penalty]").is_zero()
        })
        .collect()
}

/// Effectiveness and, above the higher bound, the coalition deviation in
/// which every producer idle at the clearing price switches to its `W̄_j`.
pub fn check_effectiveness_and_strong(
    market: &CoupledMarket,
    profile: &TauProfile,
    bids: &[AllowanceBid],
) -> Result<VerificationReport, Error> {
    let bounds = tau_bounds(profile, market.omega())?;
    let base = market.coupled_run(bids)?;
    let p = base.co2.p_co2.clone();
    let idle = idle_holders(profile, &base);
    let mut report = VerificationReport::new(Claim::NotStrongAboveHigher, format!("p_co2 = {}", format_rational(&p)));
    report.note("effective", idle.is_empty());
    if p <= bounds.higher {
        report.note("above_higher", false);
        return Ok(report);
    }
    report.note("above_higher", true);
    if idle.is_empty() {
        report.found(Witness {
            deviators: vec![],
            profile: Profile::Bids(bids.to_vec()),
            baseline: base.elec.phi.clone(),
            payoffs: base.elec.phi,
            p_co2: Some(p),
        });
        return Ok(report);
    }
    let coalition: Vec<usize> = (0..profile.producers())
        .filter(|&j| profile.willing_max(j).eval(&p).expect("price within [0, penalty]").is_zero())
        .collect();
    let mut deviated = bids.to_vec();
    for &j in &coalition {
        deviated[j] = market.bid(j, profile.willing_max(j).clone())?;
    }
    let out = market.coupled_run(&deviated)?;
    report.family_size = 1;
    report.evaluated = 1;
    let weakly = coalition.iter().all(|&j| out.elec.phi[j] >= base.elec.phi[j]);
    let strictly = coalition.iter().any(|&j| out.elec.phi[j] > base.elec.phi[j]);
    report.note("coalition", coalition.iter().map(|&j| market.producers[j].id.as_str()).collect::<Vec<_>>().join(","));
    let witness = Witness {
        deviators: coalition,
        profile: Profile::Bids(deviated),
        baseline: base.elec.phi.clone(),
        payoffs: out.elec.phi,
        p_co2: Some(out.co2.p_co2),
    };
    if weakly && strictly {
        report.witness = Some(witness);
    } else {
        report.found(witness);
    }
    Ok(report)
}

/// Effective, and no producer improves through any bid of its family.
pub fn verify_effective_nash(
    market: &CoupledMarket,
    profile: &TauProfile,
    bids: &[AllowanceBid],
    config: &FamilyConfig,
) -> Result<VerificationReport, Error> {
    let base = market.coupled_run(bids)?;
    let mut report =
        VerificationReport::new(Claim::EffectiveNash, format!("p_co2 = {}", format_rational(&base.co2.p_co2)));
    let idle = idle_holders(profile, &base);
    report.note("effective", idle.is_empty());
    if !idle.is_empty() {
        report.found(Witness {
            deviators: idle,
            profile: Profile::Bids(bids.to_vec()),
            baseline: base.elec.phi.clone(),
            payoffs: base.elec.phi,
            p_co2: Some(base.co2.p_co2),
        });
        return Ok(report);
    }
    for j in 0..market.producers.len() {
        let family = DeviationFamily::build(market, profile, bids, j, config);
        let sub = search_carbon_deviation(market, bids, &family, &Region::Anywhere)?;
        report.family_size += sub.family_size;
        report.evaluated += sub.evaluated;
        if let Some(w) = sub.witness {
            report.found(w);
            return Ok(report);
        }
    }
    Ok(report)
}

/// Replaces each bid by `W_j(τ_lower)` on `[0, τ_lower]` and `W̄_j` above
/// `τ_higher`, keeping the candidate in between.
pub fn splice_profile(
    profile: &TauProfile,
    bounds: &TauBounds,
    candidate: &[AllowanceBid],
) -> Result<Vec<AllowanceBid>, Error> {
    candidate
        .iter()
        .enumerate()
        .map(|(j, b)| {
            let curve = splice_curves(profile, bounds, j, b.curve());
            AllowanceBid::new(j, curve, &profile.caps[j], &profile.penalty)
        })
        .collect()
}

/// Splice of a candidate the lab certifies as an effective Nash equilibrium.
pub fn splice_equilibrium(
    market: &CoupledMarket,
    profile: &TauProfile,
    candidate: &[AllowanceBid],
    config: &FamilyConfig,
) -> Result<Vec<AllowanceBid>, Error> {
    let bounds = tau_bounds(profile, market.omega())?;
    if !verify_effective_nash(market, profile, candidate, config)?.holds() {
        return Err(Error::CandidateNotVerified);
    }
    splice_profile(profile, &bounds, candidate)
}

/// `W_j(τ_lower)` on `[0, τ_lower]`, the given deviation above.
pub fn lower_floor(
    profile: &TauProfile,
    bounds: &TauBounds,
    j: usize,
    deviation: &AllowanceBid,
) -> Result<AllowanceBid, Error> {
    let level = profile.willing(j).eval(&bounds.lower)?;
    let head = StepFn::constant(level, Some(profile.penalty.clone()));
    AllowanceBid::new(j, head.splice(&bounds.lower, deviation.curve()), &profile.caps[j], &profile.penalty)
}
