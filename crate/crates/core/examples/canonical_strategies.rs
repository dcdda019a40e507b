//! Runs the coupled markets under the lower and higher canonical bid
//! profiles and prints allowances, dispatch and emission accounting.

use coupled_markets::coupling::{higher_strategy, lower_strategy};
use coupled_markets::rational::{format_rational, int, ratio};
use coupled_markets::{CarbonMarket, CoupledMarket, Demand, PriceRule, Producer};

fn main() -> Result<(), coupled_markets::Error> {
    let producers = vec![
        Producer::new("P1", int(10), int(3), int(40)),
        Producer::new("P2", int(12), int(2), int(40)),
        Producer::new("P3", int(16), ratio(1, 2), int(80)),
    ];
    let demand = Demand::inelastic(int(60), int(100))?;
    let market = CoupledMarket::new(producers, demand, PriceRule::Lower, None, CarbonMarket::new(int(100), int(6)))?;
    let profile = market.tau_profile()?;

    for (name, bids) in
        [("lower", lower_strategy(&profile, market.omega())?), ("higher", higher_strategy(&profile, market.omega())?)]
    {
        let out = market.coupled_run(&bids)?;
        println!("{name}: p_co2 = {}, p_elec = {}", format_rational(&out.co2.p_co2), format_rational(&out.elec.p_elec));
        for (j, p) in market.producers.iter().enumerate() {
            println!(
                "  {}: delta {:>5}  phi {:>6}  emitted {:>6}  penalized {:>4}",
                p.id,
                format_rational(&out.co2.delta[j]),
                format_rational(&out.elec.phi[j]),
                format_rational(&out.emissions[j]),
                format_rational(&out.penalized[j])
            );
        }
    }
    Ok(())
}
