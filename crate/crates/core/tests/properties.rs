mod common;

use common::*;
use coupled_markets::carbon::CarbonMarket;
use coupled_markets::power::{ElectricityMarket, PriceRule};
use coupled_markets::rational::{format_rational, int, parse_rational, ratio, Rational};
use coupled_markets::stepfn;
use coupled_markets::{AllowanceBid, StepFn};
use proptest::prelude::*;
use rand::Rng;

fn small_ratio() -> impl Strategy<Value = Rational> {
    (-500i64..500, 1i64..40).prop_map(|(n, d)| ratio(n, d))
}

fn tiers() -> impl Strategy<Value = Tiers> {
    prop::collection::vec((1i64..80, 1i64..30), 1..4).prop_map(|pieces| {
        let mut levels: Vec<i64> = pieces.iter().map(|p| p.0).collect();
        levels.sort();
        let mut end = 0;
        Tiers(
            levels
                .into_iter()
                .zip(pieces.iter().map(|p| p.1))
                .map(|(l, w)| {
                    end += w;
                    (int(l), int(end))
                })
                .collect(),
        )
    })
}

fn demand() -> impl Strategy<Value = StepDemand> {
    prop::collection::btree_map(1i64..=120, 1i64..150, 1..4).prop_map(|m| {
        let mut values: Vec<i64> = m.values().copied().collect();
        values.sort_by(|a, b| b.cmp(a));
        StepDemand { steps: m.keys().zip(values).map(|(u, v)| (int(*u), int(v))).collect(), tail: int(0) }
    })
}

proptest! {
    #[test]
    fn rational_text_round_trips(x in small_ratio()) {
        prop_assert_eq!(parse_rational(&format_rational(&x)).unwrap(), x);
    }

    #[test]
    fn sum_evaluates_pointwise(steps in prop::collection::vec((1i64..50, 0i64..20), 1..5), at in 0i64..120) {
        let fns: Vec<StepFn> = steps.iter().map(|(b, v)| StepFn::step_up(ratio(*b, 2), int(*v))).collect();
        let total = stepfn::sum(&fns.iter().collect::<Vec<_>>());
        let x = ratio(at, 2);
        let expected: Rational = fns.iter().map(|f| f.eval(&x).unwrap()).sum();
        prop_assert_eq!(total.eval(&x).unwrap(), expected);
        prop_assert!(total.is_non_decreasing());
    }

    #[test]
    fn clearing_matches_oracle(asks in prop::collection::vec(tiers(), 1..5), demand in demand(), upper in any::<bool>()) {
        let p_lolc = int(200);
        let rule = if upper { PriceRule::Upper } else { PriceRule::Lower };
        let market = ElectricityMarket::new(demand.to_demand(), rule, p_lolc.clone());
        let c = market.clear(&asks.iter().map(Tiers::to_ask).collect::<Vec<_>>()).unwrap();
        let o = oracle_clear(&asks, &demand, &p_lolc);
        prop_assert_eq!(&c.p_lower, &o.p_lower);
        prop_assert_eq!(&c.p_upper, &o.p_upper);
        prop_assert_eq!(&c.phi, &o.phi);
        prop_assert_eq!(&c.p_elec, if upper { &o.p_upper } else { &o.p_lower });
    }

    #[test]
    fn auction_price_and_conservation(seed in any::<u64>(), n in 1usize..5, penalty in 2i64..15, share in 1i64..15) {
        let mut rng = rng(seed);
        let penalty = int(penalty);
        let caps: Vec<Rational> = (0..n).map(|_| int(rng.gen_range(1..=60))).collect();
        let bids: Vec<AllowanceBid> = caps.iter().enumerate().map(|(j, c)| random_bid(&mut rng, j, c, &penalty)).collect();
        let omega = caps.iter().sum::<Rational>() * ratio(share, 12);
        let c = CarbonMarket::new(omega.clone(), penalty.clone()).clear(&bids);
        prop_assert_eq!(&c.p_co2, &oracle_co2_price(&bids, &omega, &penalty));
        let wanted: Rational = bids.iter().map(|b| b.at(&c.p_co2)).sum();
        prop_assert_eq!(c.total(), std::cmp::min(omega, wanted));
    }

    #[test]
    fn willingness_falls_as_the_tax_rises(seed in any::<u64>(), n in 2usize..5, penalty in 2i64..10) {
        let mut rng = rng(seed);
        let plants = random_plants(&mut rng, n);
        let demand = random_demand(&mut rng, false);
        let market = coupled_market(&plants, &demand, int(1), int(penalty), PriceRule::Lower);
        let profile = market.tau_profile().unwrap();
        prop_assert!(profile.willing_total().is_non_increasing());
        let taxes = profile.critical_taxes();
        for pair in taxes.windows(2) {
            prop_assert!(profile.price_at(&pair[0]).unwrap() <= profile.price_at(&pair[1]).unwrap());
        }
    }
}
