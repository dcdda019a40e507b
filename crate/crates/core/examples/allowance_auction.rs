//! Capped allowance auction where one bidder drops out at the clearing
//! price, under the conserving allocation and the literal rule.

use coupled_markets::rational::{format_rational, int};
use coupled_markets::{AllocationMode, AllowanceBid, CarbonMarket, StepFn};

fn main() -> Result<(), coupled_markets::Error> {
    let penalty = int(6);
    let omega = int(100);
    // P1 wants 80 up to a price of 3 and 30 beyond, P2 wants 60 up to 4
    let p1 = StepFn::left_continuous(vec![int(3)], vec![int(80), int(30)], Some(penalty.clone()))?;
    let p2 = StepFn::left_continuous(vec![int(4)], vec![int(60), int(0)], Some(penalty.clone()))?;
    let bids = vec![AllowanceBid::new(0, p1, &int(80), &penalty)?, AllowanceBid::new(1, p2, &int(60), &penalty)?];

    for mode in [AllocationMode::Conserving, AllocationMode::Literal] {
        let clearing = CarbonMarket::new(omega.clone(), penalty.clone()).with_mode(mode).clear(&bids);
        let delta: Vec<String> = clearing.delta.iter().map(format_rational).collect();
        println!(
            "{mode:?}: p_co2 = {}, delta = [{}], total = {} of {}",
            format_rational(&clearing.p_co2),
            delta.join(", "),
            format_rational(&clearing.total()),
            format_rational(&omega)
        );
    }
    Ok(())
}
