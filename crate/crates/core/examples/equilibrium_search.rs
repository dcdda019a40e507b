//! Verifies a hand-built bid profile as an effective Nash equilibrium,
//! splices it onto the canonical heads and checks the result again.

use coupled_markets::lab::family::FamilyConfig;
use coupled_markets::lab::{splice_equilibrium, verify_effective_nash};
use coupled_markets::rational::{format_rational, int, ratio};
use coupled_markets::{AllowanceBid, CarbonMarket, CoupledMarket, Demand, PriceRule, Producer, StepFn};

fn describe(market: &CoupledMarket, bids: &[AllowanceBid], label: &str) -> Result<(), coupled_markets::Error> {
    let profile = market.tau_profile()?;
    let out = market.coupled_run(bids)?;
    let delta: Vec<String> = out.co2.delta.iter().map(format_rational).collect();
    let phi: Vec<String> = out.elec.phi.iter().map(format_rational).collect();
    println!(
        "{label}: p_co2 = {}, delta = [{}], phi = [{}]",
        format_rational(&out.co2.p_co2),
        delta.join(", "),
        phi.join(", ")
    );
    let report = verify_effective_nash(market, &profile, bids, &FamilyConfig::default())?;
    print!("  {:?} after {} deviations", report.verdict, report.evaluated);
    match report.witness {
        Some(w) => println!(" (deviators {:?})", w.deviators),
        None => println!(),
    }
    Ok(())
}

fn main() -> Result<(), coupled_markets::Error> {
    let producers = vec![
        Producer::new("P1", int(10), int(3), int(40)),
        Producer::new("P2", int(12), int(2), int(40)),
        Producer::new("P3", int(16), ratio(1, 2), int(80)),
    ];
    let demand = Demand::inelastic(int(60), int(100))?;
    let market = CoupledMarket::new(producers, demand, PriceRule::Lower, None, CarbonMarket::new(int(100), int(6)))?;
    let profile = market.tau_profile()?;

    // P1 and P3 bid their maximal willingness; P2 covers its taxed output
    // up to 12/5 and the rest of the cap up to 8/3
    let p2 = StepFn::left_continuous(vec![ratio(12, 5), ratio(8, 3)], vec![int(80), int(60), int(0)], Some(int(6)))?;
    let candidate = vec![
        market.bid(0, profile.willing_max(0).clone())?,
        market.bid(1, p2)?,
        market.bid(2, profile.willing_max(2).clone())?,
    ];
    describe(&market, &candidate, "candidate")?;

    let spliced = splice_equilibrium(&market, &profile, &candidate, &FamilyConfig::default())?;
    describe(&market, &spliced, "spliced")?;
    Ok(())
}
