//! Exact step functions: evaluation at breakpoints, one-sided limits, sums
//! and the sup of the set where one curve exceeds another.

use coupled_markets::rational::{format_rational, int, ratio};
use coupled_markets::stepfn::{self, sup_exceeding};
use coupled_markets::StepFn;

fn main() -> Result<(), coupled_markets::Error> {
    // 60 units up to a price of 100, nothing beyond
    let demand = StepFn::left_continuous(vec![int(100)], vec![int(60), int(0)], None)?;
    // offers jump at 10 and 12 and hold their value at the jump
    let p1 = StepFn::step_up(int(10), int(40));
    let p2 = StepFn::step_up(int(12), int(40));
    let supply = stepfn::sum(&[&p1, &p2]);

    for x in [int(10), ratio(23, 2), int(12), int(100)] {
        println!(
            "x = {:>5}: supply {:>3} (left {:>3}), demand {:>3}",
            format_rational(&x),
            format_rational(&supply.eval(&x)?),
            format_rational(&supply.eval_left(&x)?),
            format_rational(&demand.eval(&x)?),
        );
    }

    let last_short = sup_exceeding(&demand, &supply, &int(200));
    println!("demand exceeds supply up to {}", format_rational(&last_short));
    println!("supply non-decreasing: {}", supply.is_non_decreasing());
    Ok(())
}
