mod common;

use common::*;
use coupled_markets::coupling::{
    higher_strategy, intermediate_strategy, lower_strategy, lower_strategy_with_tail, tau_bounds, TauBounds,
};
use coupled_markets::lab::family::{DeviationFamily, FamilyConfig};
use coupled_markets::lab::{self, Region, Verdict};
use coupled_markets::power::{ElectricityMarket, PriceRule};
use coupled_markets::rational::{int, ratio, Rational};
use coupled_markets::{AllowanceBid, CoupledMarket, Error, StepFn, TauProfile};
use num_traits::Zero;
use rand::Rng;

fn setup() -> (CoupledMarket, TauProfile, TauBounds) {
    let market = s3(100);
    let profile = market.tau_profile().unwrap();
    let bounds = tau_bounds(&profile, market.omega()).unwrap();
    (market, profile, bounds)
}

fn flat_head_lower(market: &CoupledMarket, profile: &TauProfile) -> Vec<AllowanceBid> {
    let tails: Vec<StepFn> = (0..3).map(|j| profile.willing(j).clone()).collect();
    lower_strategy_with_tail(profile, market.omega(), &tails).unwrap()
}

/// P1 and P3 bid their `W̄_j`; P2 covers its taxed output up to `τ_lower`,
/// then the rest of the cap up to `τ_higher`.
fn candidate_e(market: &CoupledMarket, profile: &TauProfile) -> Vec<AllowanceBid> {
    let p2 =
        StepFn::left_continuous(vec![ratio(12, 5), ratio(8, 3)], vec![int(80), int(60), int(0)], Some(int(6))).unwrap();
    vec![
        market.bid(0, profile.willing_max(0).clone()).unwrap(),
        market.bid(1, p2).unwrap(),
        market.bid(2, profile.willing_max(2).clone()).unwrap(),
    ]
}

fn family(market: &CoupledMarket, profile: &TauProfile, bids: &[AllowanceBid], j: usize) -> DeviationFamily {
    DeviationFamily::build(market, profile, bids, j, &FamilyConfig::default())
}

#[test]
fn flat_head_lower_has_no_gain_below_the_bound() {
    let (market, profile, bounds) = setup();
    let bids = flat_head_lower(&market, &profile);
    assert_eq!(market.coupled_run(&bids).unwrap().co2.p_co2, bounds.lower);
    for j in 0..3 {
        let fam = family(&market, &profile, &bids, j);
        assert!(fam.size() >= 1000);
        let r = lab::search_carbon_deviation(&market, &bids, &fam, &Region::Below(bounds.lower.clone())).unwrap();
        assert_eq!(r.verdict, Verdict::Holds, "deviator {j}");
        assert_eq!(r.evaluated, fam.size());
    }
}

#[test]
fn canonical_lower_curves_admit_a_gain_below_the_bound() {
    let (market, profile, bounds) = setup();
    let bids = lower_strategy(&profile, market.omega()).unwrap();
    let fam = family(&market, &profile, &bids, 0);
    let r = lab::search_carbon_deviation(&market, &bids, &fam, &Region::Below(bounds.lower.clone())).unwrap();
    assert_eq!(r.verdict, Verdict::CounterexampleFound);
    let w = r.witness.unwrap();
    assert!(w.is_reproducible(&market));
    assert!(w.payoffs[0] > w.baseline[0]);
    assert!(w.p_co2.clone().unwrap() < bounds.lower);
    assert_eq!(w.baseline[0], ratio(40, 9));
    assert_eq!(w.payoffs[0], ratio(4001, 900));
}

#[test]
fn higher_strategy_leaves_nothing_above_the_bound() {
    let (market, profile, bounds) = setup();
    let bids = higher_strategy(&profile, market.omega()).unwrap();
    for j in 0..3 {
        let fam = family(&market, &profile, &bids, j);
        assert!(fam.size() >= 1000);
        let r = lab::search_carbon_deviation(&market, &bids, &fam, &Region::Above(bounds.higher.clone())).unwrap();
        assert_eq!(r.verdict, Verdict::Holds, "deviator {j}");
    }
}

#[test]
fn canonical_strategies_are_not_nash() {
    let (market, profile, _) = setup();
    for (bids, deviator) in [
        (lower_strategy(&profile, market.omega()).unwrap(), 0),
        (higher_strategy(&profile, market.omega()).unwrap(), 1),
    ] {
        let fam = family(&market, &profile, &bids, deviator);
        let r = lab::search_carbon_deviation(&market, &bids, &fam, &Region::Anywhere).unwrap();
        let w = r.witness.expect("improving deviation");
        assert!(w.is_reproducible(&market));
        assert!(w.payoffs[deviator] > w.baseline[deviator]);
    }
}

#[test]
fn constant_bids_below_the_bound_are_not_nash() {
    let (market, profile, _) = setup();
    let bids: Vec<AllowanceBid> = (0..3).map(|j| market.constant_bid(j, int(1)).unwrap()).collect();
    for eps in [ratio(1, 10), ratio(1, 100), ratio(1, 1000)] {
        let r = lab::check_not_nash_below(&market, &profile, &bids, &eps).unwrap();
        assert!(r.holds());
        assert_eq!(r.detail("improving_template"), Some("a"));
        assert_eq!(r.detail("improving_producer"), Some("P1"));
        let w = r.witness.unwrap();
        assert_eq!(w.baseline, vec![ratio(1, 3), ratio(1, 2), ratio(355, 6)]);
        assert_eq!(w.payoffs, vec![ratio(98, 3), ratio(1, 2), ratio(161, 6)]);
        assert_eq!(w.p_co2, Some(int(2)));
        assert!(w.is_reproducible(&market));
    }
    let lower = lower_strategy(&profile, market.omega()).unwrap();
    assert!(matches!(
        lab::check_not_nash_below(&market, &profile, &lower, &ratio(1, 1000)),
        Err(Error::PreconditionViolated(_))
    ));
}

#[test]
fn blocking_profile_is_beaten_by_a_coalition() {
    let (market, profile, _) = setup();
    let mut bids = higher_strategy(&profile, market.omega()).unwrap();
    bids[0] = market.constant_bid(0, int(120)).unwrap();
    let out = market.coupled_run(&bids).unwrap();
    assert_eq!(out.co2.p_co2, int(6));
    assert_eq!(out.co2.delta, vec![int(75), int(0), int(25)]);
    assert!(out.co2.over_cap);
    let r = lab::check_effectiveness_and_strong(&market, &profile, &bids).unwrap();
    assert!(r.holds());
    assert_eq!(r.detail("effective"), Some("false"));
    assert_eq!(r.detail("coalition"), Some("P1,P2"));
    let w = r.witness.unwrap();
    assert_eq!(w.payoffs, vec![int(0), ratio(180, 11), ratio(480, 11)]);
    assert_eq!(w.p_co2, Some(ratio(8, 3)));

    let higher = higher_strategy(&profile, market.omega()).unwrap();
    let r = lab::check_effectiveness_and_strong(&market, &profile, &higher).unwrap();
    assert_eq!((r.detail("effective"), r.detail("above_higher")), (Some("true"), Some("false")));
    assert!(r.witness.is_none());
}

#[test]
fn zero_bids_are_vacuously_effective() {
    let (market, profile, _) = setup();
    let bids: Vec<AllowanceBid> = (0..3).map(|j| market.constant_bid(j, Rational::zero()).unwrap()).collect();
    let out = market.coupled_run(&bids).unwrap();
    assert!(lab::idle_holders(&profile, &out).is_empty());
}

#[test]
fn candidate_e_is_an_effective_nash_equilibrium() {
    let (market, profile, bounds) = setup();
    let e = candidate_e(&market, &profile);
    let out = market.coupled_run(&e).unwrap();
    assert_eq!(out.co2.p_co2, ratio(12, 5));
    assert_eq!(out.co2.delta, vec![int(0), int(60), int(40)]);
    assert_eq!(out.elec.phi, vec![int(0), int(30), int(30)]);
    let r = lab::verify_effective_nash(&market, &profile, &e, &FamilyConfig::default()).unwrap();
    assert!(r.holds(), "{r:?}");
    assert!(r.family_size >= 3000);
    assert!(out.co2.p_co2 >= bounds.lower && out.co2.p_co2 <= bounds.higher);
}

#[test]
fn splicing_e_moves_shares_and_loses_the_equilibrium() {
    let (market, profile, _) = setup();
    let e = candidate_e(&market, &profile);
    let spliced = lab::splice_equilibrium(&market, &profile, &e, &FamilyConfig::default()).unwrap();
    let out = market.coupled_run(&spliced).unwrap();
    assert_eq!(out.co2.p_co2, ratio(12, 5));
    assert_eq!(out.co2.delta, vec![ratio(50, 3), ratio(230, 3), ratio(20, 3)]);
    assert_eq!(out.elec.phi, vec![ratio(50, 9), ratio(115, 3), ratio(145, 9)]);
    let r = lab::verify_effective_nash(&market, &profile, &spliced, &FamilyConfig::default()).unwrap();
    assert_eq!(r.verdict, Verdict::CounterexampleFound);
    let w = r.witness.unwrap();
    assert_eq!(w.deviators, vec![0]);
    assert!(w.is_reproducible(&market));
}

#[test]
fn splice_requires_a_verified_candidate() {
    let (market, profile, bounds) = setup();
    let lower = lower_strategy(&profile, market.omega()).unwrap();
    assert_eq!(
        lab::splice_equilibrium(&market, &profile, &lower, &FamilyConfig::default()),
        Err(Error::CandidateNotVerified)
    );
    let once = lab::splice_profile(&profile, &bounds, &lower).unwrap();
    let twice = lab::splice_profile(&profile, &bounds, &once).unwrap();
    assert_eq!(once, twice);
    for (spliced, head) in once.iter().zip(flat_head_lower(&market, &profile)) {
        assert_eq!(spliced.curve().restrict(&bounds.lower), head.curve().restrict(&bounds.lower));
    }
}

#[test]
fn intermediate_prices_stay_between_the_bounds() {
    let (market, profile, bounds) = setup();
    let mut rng = rng(41);
    for _ in 0..40 {
        let middles: Vec<StepFn> =
            (0..3).map(|j| random_bid(&mut rng, j, &profile.caps[j], market.penalty()).curve().clone()).collect();
        let bids = intermediate_strategy(&profile, market.omega(), &middles).unwrap();
        let p = market.coupled_run(&bids).unwrap().co2.p_co2;
        assert!(p >= bounds.lower && p <= bounds.higher);
    }
}

#[test]
fn floored_deviation_clears_at_the_lower_bound_and_does_no_worse() {
    let (market, profile, bounds) = setup();
    let mut checked = 0;
    let mut rng = rng(43);
    for _ in 0..4 {
        let middles: Vec<StepFn> =
            (0..3).map(|j| random_bid(&mut rng, j, &profile.caps[j], market.penalty()).curve().clone()).collect();
        let bids = intermediate_strategy(&profile, market.omega(), &middles).unwrap();
        for j in 0..3 {
            let config = FamilyConfig { min_size: 300, ..FamilyConfig::default() };
            let fam = DeviationFamily::build(&market, &profile, &bids, j, &config);
            for deviation in fam.bids().into_iter().step_by(3) {
                let mut deviated = bids.clone();
                deviated[j] = deviation.clone();
                let out = market.coupled_run(&deviated).unwrap();
                if out.co2.p_co2 >= bounds.lower {
                    continue;
                }
                deviated[j] = lab::lower_floor(&profile, &bounds, j, &deviation).unwrap();
                let floored = market.coupled_run(&deviated).unwrap();
                assert_eq!(floored.co2.p_co2, bounds.lower);
                assert!(floored.elec.phi[j] >= out.elec.phi[j], "producer {j}");
                checked += 1;
            }
        }
    }
    assert!(checked > 100);
}

#[test]
fn marginal_cost_dominates_random_asks() {
    let mut rng = rng(47);
    for _ in 0..100 {
        let n = rng.gen_range(2..=5);
        let plants = random_plants(&mut rng, n);
        let tail = rng.gen_bool(0.3);
        let demand = random_demand(&mut rng, tail);
        let market = ElectricityMarket::new(demand.to_demand(), PriceRule::Lower, int(200));
        let costs: Vec<StepFn> =
            plants.iter().enumerate().map(|(i, p)| p.producer(i).cost_curve(&Rational::zero())).collect();
        let asks: Vec<_> = plants.iter().map(|p| random_ask(&mut rng, p, &int(150)).to_ask()).collect();
        let r = lab::check_dominance(&market, &costs, &asks).unwrap();
        assert!(r.holds());
    }
}

#[test]
fn over_asking_loses_share() {
    let plants = [Plant { c: int(10), e: int(2), kappa: int(30) }, Plant { c: int(15), e: int(1), kappa: int(30) }];
    let demand = StepDemand::inelastic(int(40), int(100));
    let market = ElectricityMarket::new(demand.to_demand(), PriceRule::Lower, int(1000));
    let costs: Vec<StepFn> =
        plants.iter().enumerate().map(|(i, p)| p.producer(i).cost_curve(&Rational::zero())).collect();
    let over = vec![Tiers::flat(int(10), int(30)).to_ask(), Tiers::flat(int(25), int(30)).to_ask()];
    assert_eq!(market.clear(&over).unwrap().phi[1], int(10));
    let over = vec![Tiers::flat(int(10), int(30)).to_ask(), Tiers::flat(int(101), int(30)).to_ask()];
    assert_eq!(market.clear(&over).unwrap().phi[1], int(0));
    assert!(lab::check_dominance(&market, &costs, &over).unwrap().holds());
}
