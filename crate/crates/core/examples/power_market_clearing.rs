//! Clears a two-producer electricity market at marginal cost and with one
//! producer withholding capacity behind a high ask.

use coupled_markets::rational::{format_rational, int};
use coupled_markets::{AskStrategy, Demand, ElectricityMarket, PriceRule, Producer, StepFn};

fn show(label: &str, c: &coupled_markets::ElecClearing) {
    let phi: Vec<String> = c.phi.iter().map(format_rational).collect();
    println!(
        "{label:<12} p_lower = {:>3}  p_upper = {:>3}  paid = {:>3}  phi = [{}]",
        format_rational(&c.p_lower),
        format_rational(&c.p_upper),
        format_rational(&c.p_elec),
        phi.join(", ")
    );
}

fn main() -> Result<(), coupled_markets::Error> {
    let producers = [Producer::new("P1", int(10), int(2), int(30)), Producer::new("P2", int(15), int(1), int(30))];
    let demand = Demand::inelastic(int(40), int(100))?;
    let costs: Vec<StepFn> = producers.iter().map(|p| p.cost_curve(&int(0))).collect();

    for rule in [PriceRule::Lower, PriceRule::Upper] {
        let market = ElectricityMarket::new(demand.clone(), rule, int(1000));
        let asks: Vec<AskStrategy> = costs.iter().map(AskStrategy::marginal_cost).collect();
        show(&format!("{rule:?}"), &market.clear(&asks)?);
    }

    // P1 offers 20 at cost and asks 90 for the rest
    let market = ElectricityMarket::new(demand, PriceRule::Lower, int(1000));
    let withheld = StepFn::left_continuous(vec![int(20)], vec![int(10), int(90)], Some(int(30)))?;
    let asks = vec![AskStrategy::new(0, withheld, &costs[0])?, AskStrategy::marginal_cost(&costs[1])];
    show("withholding", &market.clear(&asks)?);
    Ok(())
}
