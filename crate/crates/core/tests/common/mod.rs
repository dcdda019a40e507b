//! Brute-force oracles and seeded generators shared by the integration tests.
//!
//! The oracles never touch the library's step-function machinery: they
//! enumerate every breakpoint by hand, probe each point and each open gap at
//! its midpoint, and read infima and suprema off that scan.

#![allow(dead_code)]

use coupled_markets::carbon::{AllowanceBid, CarbonMarket};
use coupled_markets::coupling::CoupledMarket;
use coupled_markets::power::{AskStrategy, Demand, PriceRule, Producer};
use coupled_markets::rational::{int, ratio, Rational};
use coupled_markets::StepFn;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
pub use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn mid(a: &Rational, b: &Rational) -> Rational {
    (a + b) / int(2)
}

fn sorted(mut v: Vec<Rational>) -> Vec<Rational> {
    v.sort();
    v.dedup();
    v
}

/// Ask as `(level, right end)` pieces: `level_k` on `(q_{k-1}, q_k]`, and
/// the first level at `q = 0`.
#[derive(Clone, Debug)]
pub struct Tiers(pub Vec<(Rational, Rational)>);

impl Tiers {
    pub fn flat(level: Rational, capacity: Rational) -> Self {
        Tiers(vec![(level, capacity)])
    }

    pub fn capacity(&self) -> &Rational {
        &self.0.last().unwrap().1
    }

    /// `sup{q : ask(q) ≤ p}`, zero at `p = 0`.
    pub fn offer(&self, p: &Rational) -> Rational {
        if *p <= Rational::zero() {
            return Rational::zero();
        }
        self.0.iter().filter(|(l, _)| l <= p).map(|(_, q)| q.clone()).max().unwrap_or_else(Rational::zero)
    }

    pub fn levels(&self) -> Vec<Rational> {
        self.0.iter().map(|(l, _)| l.clone()).collect()
    }

    pub fn to_ask(&self) -> AskStrategy {
        let breaks = self.0[..self.0.len() - 1].iter().map(|(_, q)| q.clone()).collect();
        let plateaus = self.levels();
        let curve = StepFn::left_continuous(breaks, plateaus, Some(self.capacity().clone())).unwrap();
        AskStrategy::marginal_cost(&curve)
    }
}

/// `value_k` for prices in `(until_{k-1}, until_k]`, `tail` beyond the last.
#[derive(Clone, Debug)]
pub struct StepDemand {
    pub steps: Vec<(Rational, Rational)>,
    pub tail: Rational,
}

impl StepDemand {
    pub fn inelastic(value: Rational, until: Rational) -> Self {
        StepDemand { steps: vec![(until, value)], tail: Rational::zero() }
    }

    pub fn at(&self, p: &Rational) -> Rational {
        self.steps.iter().find(|(u, _)| p <= u).map(|(_, v)| v.clone()).unwrap_or_else(|| self.tail.clone())
    }

    pub fn untils(&self) -> Vec<Rational> {
        self.steps.iter().map(|(u, _)| u.clone()).collect()
    }

    pub fn to_demand(&self) -> Demand {
        let mut plateaus: Vec<Rational> = self.steps.iter().map(|(_, v)| v.clone()).collect();
        plateaus.push(self.tail.clone());
        Demand::new(StepFn::left_continuous(self.untils(), plateaus, None).unwrap()).unwrap()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleClearing {
    pub p_lower: Rational,
    pub p_upper: Rational,
    pub phi: Vec<Rational>,
    /// Offers just below and at the lower price.
    pub offer_before: Vec<Rational>,
    pub offer_at: Vec<Rational>,
}

pub fn oracle_clear(asks: &[Tiers], demand: &StepDemand, p_lolc: &Rational) -> OracleClearing {
    let mut points: Vec<Rational> = asks.iter().flat_map(Tiers::levels).collect();
    points.extend(demand.untils());
    points.retain(|p| *p > Rational::zero() && p < p_lolc);
    points.push(p_lolc.clone());
    let points = sorted(points);

    let total = |p: &Rational| -> Rational { asks.iter().map(|a| a.offer(p)).sum() };
    let exceeds = |p: &Rational| total(p) > demand.at(p);

    let mut lower = p_lolc.clone();
    let mut prev = Rational::zero();
    for x in &points {
        if exceeds(&mid(&prev, x)) {
            lower = prev.clone();
            break;
        }
        if exceeds(x) {
            lower = x.clone();
            break;
        }
        prev = x.clone();
    }

    let level = demand.at(&lower);
    let mut upper = lower.clone();
    for x in points.iter().filter(|x| **x > lower) {
        if demand.at(&mid(&upper, x)) != level {
            break;
        }
        upper = x.clone();
        if demand.at(x) != level {
            break;
        }
    }

    let left_neighbour = points.iter().filter(|x| **x < lower).max().cloned().unwrap_or_else(Rational::zero);
    let probe = mid(&left_neighbour, &lower);
    let offer_before: Vec<Rational> = asks.iter().map(|a| a.offer(&probe)).collect();
    let offer_at: Vec<Rational> = asks.iter().map(|a| a.offer(&lower)).collect();
    let supply: Rational = offer_at.iter().sum();
    let phi = if supply <= level {
        offer_at.clone()
    } else {
        let before: Rational = offer_before.iter().sum();
        let jump = &supply - &before;
        offer_before.iter().zip(&offer_at).map(|(b, a)| b + (a - b) * (&level - &before) / &jump).collect()
    };
    OracleClearing { p_lower: lower, p_upper: upper, phi, offer_before, offer_at }
}

/// One producer of a random scenario.
#[derive(Clone, Debug)]
pub struct Plant {
    pub c: Rational,
    pub e: Rational,
    pub kappa: Rational,
}

impl Plant {
    pub fn cap(&self) -> Rational {
        &self.e * &self.kappa
    }

    pub fn producer(&self, id: usize) -> Producer {
        Producer::new(format!("P{}", id + 1), self.c.clone(), self.e.clone(), self.kappa.clone())
    }
}

pub fn taxed_tiers(plants: &[Plant], tau: &Rational) -> Vec<Tiers> {
    plants.iter().map(|p| Tiers::flat(&p.c + &p.e * tau, p.kappa.clone())).collect()
}

pub fn default_lolc(plants: &[Plant], demand: &StepDemand, penalty: &Rational) -> Rational {
    let top_cost = plants.iter().map(|p| &p.c + &p.e * penalty).max().unwrap();
    let top_break = demand.untils().into_iter().max().unwrap_or_else(Rational::zero);
    std::cmp::max(top_cost, top_break) + int(1)
}

/// Dense scan of the taxed clearing over `[0, penalty]`.
#[derive(Clone, Debug)]
pub struct TauScan {
    /// `(τ, is a gap midpoint, clearing)`, sorted by τ.
    pub samples: Vec<(Rational, bool, OracleClearing)>,
    pub plants: Vec<Plant>,
}

impl TauScan {
    pub fn new(plants: &[Plant], demand: &StepDemand, p_lolc: &Rational, penalty: &Rational, dense: i64) -> Self {
        let mut grid: Vec<Rational> = (0..=dense).map(|k| penalty * ratio(k, dense)).collect();
        for (i, a) in plants.iter().enumerate() {
            for (k, b) in plants.iter().enumerate() {
                if i != k && a.e != b.e {
                    grid.push((&a.c - &b.c) / (&b.e - &a.e));
                }
            }
            for u in demand.untils() {
                grid.push((&u - &a.c) / &a.e);
            }
        }
        grid.retain(|t| *t >= Rational::zero() && t <= penalty);
        let grid = sorted(grid);
        let mut samples = Vec::new();
        for (k, t) in grid.iter().enumerate() {
            if k > 0 {
                let m = mid(&grid[k - 1], t);
                samples.push((m.clone(), true, oracle_clear(&taxed_tiers(plants, &m), demand, p_lolc)));
            }
            samples.push((t.clone(), false, oracle_clear(&taxed_tiers(plants, t), demand, p_lolc)));
        }
        TauScan { samples, plants: plants.to_vec() }
    }

    pub fn willing(&self, c: &OracleClearing) -> Rational {
        self.plants.iter().zip(&c.phi).map(|(p, phi)| &p.e * phi).sum()
    }

    pub fn willing_max(&self, c: &OracleClearing) -> Rational {
        self.plants.iter().zip(&c.phi).filter(|(_, phi)| !phi.is_zero()).map(|(p, _)| p.cap()).sum()
    }

    /// `sup{τ : f(τ) > Ω}` read off the scan; gaps count up to their right end.
    pub fn sup_exceeding(&self, omega: &Rational, f: impl Fn(&OracleClearing) -> Rational) -> Rational {
        let mut best = Rational::zero();
        for (k, (t, gap, c)) in self.samples.iter().enumerate() {
            if f(c) > *omega {
                let reach = if *gap { self.samples[k + 1].0.clone() } else { t.clone() };
                best = std::cmp::max(best, reach);
            }
        }
        best
    }

    pub fn tau_lower(&self, omega: &Rational) -> Rational {
        self.sup_exceeding(omega, |c| self.willing(c))
    }

    pub fn tau_higher(&self, omega: &Rational) -> Rational {
        self.sup_exceeding(omega, |c| self.willing_max(c))
    }
}

/// Bid as `(breaks, plateaus, point values)` on `[0, penalty]`.
pub fn bid_value(bid: &AllowanceBid, tau: &Rational) -> Rational {
    bid.curve().eval(tau).unwrap()
}

/// `sup{τ ∈ [0, penalty] : AA(τ) > Ω}` by scanning every breakpoint.
pub fn oracle_co2_price(bids: &[AllowanceBid], omega: &Rational, penalty: &Rational) -> Rational {
    let mut points: Vec<Rational> = bids.iter().flat_map(|b| b.curve().breakpoints().to_vec()).collect();
    points.extend([Rational::zero(), penalty.clone()]);
    let points = sorted(points);
    let total = |t: &Rational| -> Rational { bids.iter().map(|b| bid_value(b, t)).sum() };
    let mut best = Rational::zero();
    for (k, x) in points.iter().enumerate() {
        if total(x) > *omega {
            best = std::cmp::max(best, x.clone());
        }
        if k + 1 < points.len() && total(&mid(x, &points[k + 1])) > *omega {
            best = std::cmp::max(best, points[k + 1].clone());
        }
    }
    best
}

/// Right limit of a bid at `tau`, or the value itself at the domain end.
pub fn oracle_right_limit(bid: &AllowanceBid, tau: &Rational, penalty: &Rational) -> Rational {
    if tau >= penalty {
        return bid_value(bid, tau);
    }
    let next = bid.curve().breakpoints().iter().filter(|b| *b > tau).min().cloned().unwrap_or_else(|| penalty.clone());
    bid_value(bid, &mid(tau, &next))
}

/// Allocation written exactly as the auction rule is stated, with the full
/// residual `Ω − Σ_{priority} A_i(p)` shared among the dropping cohort.
pub fn strict_allocation(bids: &[AllowanceBid], omega: &Rational, penalty: &Rational) -> Vec<Rational> {
    let p = oracle_co2_price(bids, omega, penalty);
    let at: Vec<Rational> = bids.iter().map(|b| bid_value(b, &p)).collect();
    let after: Vec<Rational> = bids.iter().map(|b| oracle_right_limit(b, &p, penalty)).collect();
    let dropping: Vec<bool> = at.iter().zip(&after).map(|(a, r)| r < a).collect();
    let priority: Rational = at.iter().zip(&dropping).filter(|(_, d)| !**d).map(|(a, _)| a).sum();
    let drop: Rational = at.iter().zip(&after).zip(&dropping).filter(|(_, d)| **d).map(|((a, r), _)| a - r).sum();
    (0..bids.len())
        .map(
            |j| {
                if dropping[j] {
                    &after[j] + (&at[j] - &after[j]) * (omega - &priority) / &drop
                } else {
                    at[j].clone()
                }
            },
        )
        .collect()
}

pub fn random_plants(rng: &mut ChaCha8Rng, n: usize) -> Vec<Plant> {
    let mut plants: Vec<Plant> = Vec::new();
    while plants.len() < n {
        let p = Plant {
            c: ratio(rng.gen_range(2..=60), 2),
            e: ratio(rng.gen_range(1..=16), 4),
            kappa: ratio(rng.gen_range(2..=100), 2),
        };
        if plants.iter().all(|q| q.c != p.c || q.e != p.e) {
            plants.push(p);
        }
    }
    plants
}

/// One to three decreasing steps; the tail is zero unless `positive_tail`.
pub fn random_demand(rng: &mut ChaCha8Rng, positive_tail: bool) -> StepDemand {
    let n = rng.gen_range(1..=3);
    let mut untils: Vec<i64> = (0..n).map(|_| rng.gen_range(5..=120)).collect();
    untils.sort();
    untils.dedup();
    let mut values: Vec<i64> = (0..untils.len()).map(|_| rng.gen_range(5..=150)).collect();
    values.sort_by(|a, b| b.cmp(a));
    let tail = if positive_tail { rng.gen_range(0..=*values.last().unwrap()) } else { 0 };
    StepDemand { steps: untils.iter().zip(&values).map(|(u, v)| (int(*u), int(*v))).collect(), tail: int(tail) }
}

/// Admissible random ask: up to three pieces, each at or above cost.
pub fn random_ask(rng: &mut ChaCha8Rng, plant: &Plant, ceiling: &Rational) -> Tiers {
    let pieces = rng.gen_range(1..=3);
    let mut cuts: Vec<Rational> = (1..pieces).map(|_| &plant.kappa * ratio(rng.gen_range(1..=19), 20)).collect();
    cuts.push(plant.kappa.clone());
    let cuts = sorted(cuts);
    let room = ceiling - &plant.c;
    Tiers(
        cuts.into_iter()
            .map(|q| {
                let lift = if rng.gen_bool(0.3) { Rational::zero() } else { &room * ratio(rng.gen_range(0..=19), 20) };
                (&plant.c + lift, q)
            })
            .collect(),
    )
}

pub fn random_bid(rng: &mut ChaCha8Rng, j: usize, cap: &Rational, penalty: &Rational) -> AllowanceBid {
    let n = rng.gen_range(0..=3);
    let mut breaks: Vec<Rational> = (0..n).map(|_| penalty * ratio(rng.gen_range(1..=59), 60)).collect();
    breaks = sorted(breaks);
    let level = |rng: &mut ChaCha8Rng| cap * ratio(rng.gen_range(0..=12), 12);
    let plateaus: Vec<Rational> = (0..=breaks.len()).map(|_| level(rng)).collect();
    let at: Vec<Rational> = (0..breaks.len())
        .map(|k| match rng.gen_range(0..3) {
            0 => plateaus[k].clone(),
            1 => plateaus[k + 1].clone(),
            _ => level(rng),
        })
        .collect();
    let curve = StepFn::from_parts(breaks, plateaus, at, Some(penalty.clone())).unwrap();
    AllowanceBid::new(j, curve, cap, penalty).unwrap()
}

pub fn coupled_market(
    plants: &[Plant],
    demand: &StepDemand,
    omega: Rational,
    penalty: Rational,
    rule: PriceRule,
) -> CoupledMarket {
    let producers = plants.iter().enumerate().map(|(i, p)| p.producer(i)).collect();
    CoupledMarket::new(producers, demand.to_demand(), rule, None, CarbonMarket::new(omega, penalty)).unwrap()
}

pub fn s3_plants() -> Vec<Plant> {
    vec![
        Plant { c: int(10), e: int(3), kappa: int(40) },
        Plant { c: int(12), e: int(2), kappa: int(40) },
        Plant { c: int(16), e: ratio(1, 2), kappa: int(80) },
    ]
}

pub fn s3_demand() -> StepDemand {
    StepDemand::inelastic(int(60), int(100))
}

pub fn s3(omega: i64) -> CoupledMarket {
    coupled_market(&s3_plants(), &s3_demand(), int(omega), int(6), PriceRule::Lower)
}

pub fn scenario_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

/// Cost up to the reference share, then `markup` on the rest.
pub fn markup_tiers(plant: &Plant, share: &Rational, lift: &Rational, markup: &Rational) -> Tiers {
    if share.is_zero() {
        Tiers::flat(markup.clone(), plant.kappa.clone())
    } else if *share >= plant.kappa {
        Tiers::flat(&plant.c + lift, plant.kappa.clone())
    } else {
        Tiers(vec![(&plant.c + lift, share.clone()), (markup.clone(), plant.kappa.clone())])
    }
}
