//! Searches unilateral bid deviations below the lower bound, first against
//! the plain lower curves, then against the variant whose tails follow `W_j`.

use coupled_markets::coupling::{lower_strategy, lower_strategy_with_tail, tau_bounds};
use coupled_markets::lab::family::{DeviationFamily, FamilyConfig};
use coupled_markets::lab::{search_carbon_deviation, Region};
use coupled_markets::rational::{format_rational, int, ratio};
use coupled_markets::{AllowanceBid, CarbonMarket, CoupledMarket, Demand, PriceRule, Producer, StepFn};

fn search(market: &CoupledMarket, bids: &[AllowanceBid], label: &str) -> Result<(), coupled_markets::Error> {
    let profile = market.tau_profile()?;
    let bounds = tau_bounds(&profile, market.omega())?;
    for j in 0..bids.len() {
        let family = DeviationFamily::build(market, &profile, bids, j, &FamilyConfig::default());
        let report = search_carbon_deviation(market, bids, &family, &Region::Below(bounds.lower.clone()))?;
        print!("{label} / {}: {:?} over {} bids", market.producers[j].id, report.verdict, report.family_size);
        match report.witness {
            Some(w) => println!(
                ", share {} -> {} at p_co2 = {} (replays: {})",
                format_rational(&w.baseline[j]),
                format_rational(&w.payoffs[j]),
                format_rational(w.p_co2.as_ref().expect("carbon witness")),
                w.is_reproducible(market)
            ),
            None => println!(),
        }
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

    search(&market, &lower_strategy(&profile, market.omega())?, "lower")?;
    let tails: Vec<StepFn> = (0..3).map(|j| profile.willing(j).clone()).collect();
    search(&market, &lower_strategy_with_tail(&profile, market.omega(), &tails)?, "lower with W tails")?;
    Ok(())
}
