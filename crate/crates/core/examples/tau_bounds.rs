//! Taxed clearing across carbon prices and the resulting bounds on
//! equilibrium allowance prices for several caps.

use coupled_markets::coupling::{check_design, tau_bounds};
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

    let taxes: Vec<String> = profile.critical_taxes().iter().map(format_rational).collect();
    println!("critical taxes: {}", taxes.join(" "));
    let w = profile.willing_total();
    let wmax = profile.willing_max_total();
    for tau in profile.critical_taxes() {
        println!(
            "tau {:>4}: price {:>5}  W {:>6}  W_max {:>6}",
            format_rational(tau),
            format_rational(&profile.price_at(tau)?),
            format_rational(&w.eval(tau)?),
            format_rational(&wmax.eval(tau)?)
        );
    }

    for omega in [40, 90, 100, 140, 159, 160] {
        let omega = int(omega);
        match tau_bounds(&profile, &omega) {
            Ok(b) => println!("omega {omega:>3}: [{}, {}]", format_rational(&b.lower), format_rational(&b.higher)),
            Err(_) => println!("omega {omega:>3}: {}", check_design(&profile, &omega).label()),
        }
    }
    Ok(())
}
