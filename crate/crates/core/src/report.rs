//! Tab-separated reports.
//!
//! Exact values print as `n/d`; each exact column is followed by a `_dec`
//! mirror with six decimals for plotting. Rows come in producer order (or
//! parameter order for sweeps), so output is byte-stable.

use crate::carbon::AllowanceBid;
use crate::coupling::{
    check_design, higher_strategy, lower_strategy, lower_strategy_with_tail, tau_bounds_unchecked, CoupledMarket,
    DesignStatus,
};
use crate::error::Error;
use crate::lab::{
    self,
    family::{DeviationFamily, FamilyConfig},
    Region, VerificationReport,
};
use crate::power::{AskStrategy, ElecClearing};
use crate::rational::{format_rational, to_decimal, Rational};
use crate::scenario::Scenario;
use crate::stepfn::StepFn;
use num_traits::Zero;
use rayon::prelude::*;
use std::fmt::Write;

const DECIMALS: usize = 6;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Value {
    Exact(Rational),
    Text(String),
    Missing,
}

impl From<&Rational> for Value {
    fn from(r: &Rational) -> Self {
        Value::Exact(r.clone())
    }
}

impl From<Rational> for Value {
    fn from(r: Rational) -> Self {
        Value::Exact(r)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Text(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Exact,
    Text,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Table {
    columns: Vec<(String, Kind)>,
    rows: Vec<Vec<Value>>,
}

impl Table {
    /// Column names prefixed with `#` hold exact numbers and get a decimal mirror.
    pub fn new(columns: &[&str]) -> Self {
        let columns = columns
            .iter()
            .map(|c| match c.strip_prefix('#') {
                Some(name) => (name.to_string(), Kind::Exact),
                None => (c.to_string(), Kind::Text),
            })
            .collect();
        Table { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    /// Exact value of `column` in `row`, if any.
    pub fn exact(&self, row: usize, column: &str) -> Option<&Rational> {
        let idx = self.columns.iter().position(|(c, _)| c == column)?;
        match &self.rows[row][idx] {
            Value::Exact(r) => Some(r),
            _ => None,
        }
    }

    pub fn text(&self, row: usize, column: &str) -> Option<&str> {
        let idx = self.columns.iter().position(|(c, _)| c == column)?;
        match &self.rows[row][idx] {
            Value::Text(t) => Some(t),
            _ => None,
        }
    }

    pub fn to_tsv(&self) -> String {
        let mut header = Vec::new();
        for (name, kind) in &self.columns {
            header.push(name.clone());
            if *kind == Kind::Exact {
                header.push(format!("{name}_dec"));
            }
        }
        let mut out = header.join("\t");
        out.push('\n');
        for row in &self.rows {
            let mut cells = Vec::new();
            for ((_, kind), v) in self.columns.iter().zip(row) {
                match v {
                    Value::Exact(r) => {
                        cells.push(format_rational(r));
                        cells.push(to_decimal(r, DECIMALS));
                    }
                    Value::Text(t) => cells.push(t.clone()),
                    Value::Missing => {
                        cells.push(String::new());
                        if *kind == Kind::Exact {
                            cells.push(String::new());
                        }
                    }
                }
            }
            let _ = writeln!(out, "{}", cells.join("\t"));
        }
        out
    }
}

/// Which allowance bids `couple` and `clear-co2` use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BidSource {
    Lower,
    Higher,
    Scenario,
}

pub fn resolve_bids(
    scenario: &Scenario,
    market: &CoupledMarket,
    source: BidSource,
) -> Result<Vec<AllowanceBid>, Error> {
    match source {
        BidSource::Scenario => scenario
            .bids
            .clone()
            .ok_or_else(|| Error::PreconditionViolated("the scenario carries no [[bid]] tables".into())),
        BidSource::Lower => lower_strategy(&market.tau_profile()?, market.omega()),
        BidSource::Higher => higher_strategy(&market.tau_profile()?, market.omega()),
    }
}

pub fn clear_elec(market: &CoupledMarket, tau: &Rational) -> Result<Table, Error> {
    let c = market.taxed_clearing(tau)?;
    let mut t = Table::new(&["producer", "#tau", "#p_lower", "#p_upper", "#p_elec", "#phi", "#emissions"]);
    for (p, phi) in market.producers.iter().zip(&c.phi) {
        t.push(vec![
            p.id.as_str().into(),
            tau.into(),
            (&c.p_lower).into(),
            (&c.p_upper).into(),
            (&c.p_elec).into(),
            phi.into(),
            (phi * &p.emission_rate).into(),
        ]);
    }
    Ok(t)
}

pub fn clear_co2(market: &CoupledMarket, bids: &[AllowanceBid]) -> Result<Table, Error> {
    if bids.len() != market.producers.len() {
        return Err(Error::LengthMismatch { expected: market.producers.len(), got: bids.len() });
    }
    let c = market.carbon.clear(bids);
    let mut t = Table::new(&["producer", "#p_co2", "#bid_at_price", "#delta", "over_cap"]);
    for ((p, b), d) in market.producers.iter().zip(bids).zip(&c.delta) {
        t.push(vec![
            p.id.as_str().into(),
            (&c.p_co2).into(),
            b.at(&c.p_co2).into(),
            d.into(),
            c.over_cap.to_string().into(),
        ]);
    }
    Ok(t)
}

pub fn couple(market: &CoupledMarket, bids: &[AllowanceBid]) -> Result<Table, Error> {
    let out = market.coupled_run(bids)?;
    let mut t = Table::new(&[
        "producer",
        "#p_co2",
        "#p_elec",
        "#delta",
        "#phi",
        "#tier1",
        "#tier2",
        "#covered_output",
        "#emissions",
        "#covered",
        "#penalized",
        "#unused",
    ]);
    for (j, p) in market.producers.iter().enumerate() {
        t.push(vec![
            p.id.as_str().into(),
            (&out.co2.p_co2).into(),
            (&out.elec.p_elec).into(),
            (&out.co2.delta[j]).into(),
            (&out.elec.phi[j]).into(),
            (&out.costs[j].tier1_price).into(),
            (&out.costs[j].tier2_price).into(),
            (&out.costs[j].covered_output).into(),
            (&out.emissions[j]).into(),
            (&out.covered[j]).into(),
            (&out.penalized[j]).into(),
            (&out.unused[j]).into(),
        ]);
    }
    Ok(t)
}

fn bounds_row(market: &CoupledMarket) -> Result<Vec<Value>, Error> {
    let profile = market.tau_profile()?;
    let omega = market.omega();
    let status = check_design(&profile, omega);
    let need_untaxed = profile.willing_total().eval(&Rational::zero())?;
    let need_penalty = profile.willing_max_total().eval(market.penalty())?;
    let (lower, higher) = if status.is_valid() {
        let b = tau_bounds_unchecked(&profile, omega);
        (Value::Exact(b.lower), Value::Exact(b.higher))
    } else {
        (Value::Missing, Value::Missing)
    };
    Ok(vec![
        omega.into(),
        market.penalty().into(),
        status.label().into(),
        need_untaxed.into(),
        need_penalty.into(),
        lower,
        higher,
    ])
}

const BOUNDS_COLUMNS: [&str; 7] =
    ["#omega", "#penalty", "status", "#w_at_zero", "#wmax_at_penalty", "#tau_lower", "#tau_higher"];

pub fn bounds(market: &CoupledMarket) -> Result<Table, Error> {
    let mut t = Table::new(&BOUNDS_COLUMNS);
    t.push(bounds_row(market)?);
    Ok(t)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    Omega,
    Penalty,
}

/// Market with one parameter replaced; the default loss-of-load cost is
/// recomputed for the new penalty.
pub fn with_param(scenario: &Scenario, param: SweepParam, value: &Rational) -> Result<CoupledMarket, Error> {
    let mut s = scenario.clone();
    s.bids = None;
    match param {
        SweepParam::Omega => s.omega = value.clone(),
        SweepParam::Penalty => s.penalty = value.clone(),
    }
    s.market()
}

/// Evenly spaced values plus every critical value of the parameter that
/// falls in `(0, to]` and at or above `from`.
pub fn sweep_grid(
    scenario: &Scenario,
    param: SweepParam,
    from: &Rational,
    to: &Rational,
    step: &Rational,
) -> Result<Vec<Rational>, Error> {
    if *step <= Rational::zero() || from > to {
        return Err(Error::PreconditionViolated("sweep needs from <= to and a positive step".into()));
    }
    let mut grid = Vec::new();
    let mut x = from.clone();
    while x <= *to {
        grid.push(x.clone());
        x += step;
    }
    match param {
        SweepParam::Omega => {
            let profile = scenario.market()?.tau_profile()?;
            for f in [profile.willing_total(), profile.willing_max_total()] {
                grid.extend(f.plateaus().iter().chain(f.point_values()).cloned());
            }
        }
        SweepParam::Penalty => {
            if *to > Rational::zero() {
                grid.extend(with_param(scenario, param, to)?.critical_taxes());
            }
        }
    }
    grid.retain(|v| v >= from && v <= to && *v > Rational::zero());
    grid.sort();
    grid.dedup();
    Ok(grid)
}

pub fn sweep(
    scenario: &Scenario,
    param: SweepParam,
    from: &Rational,
    to: &Rational,
    step: &Rational,
) -> Result<Table, Error> {
    let grid = sweep_grid(scenario, param, from, to, step)?;
    let rows: Vec<Result<Vec<Value>, Error>> =
        grid.par_iter().map(|v| with_param(scenario, param, v).and_then(|m| bounds_row(&m))).collect();
    let mut t = Table::new(&BOUNDS_COLUMNS);
    for r in rows {
        t.push(r?);
    }
    Ok(t)
}

fn join(values: &[Rational]) -> String {
    values.iter().map(format_rational).collect::<Vec<_>>().join(",")
}

fn report_row(market: &CoupledMarket, suite: &str, r: &VerificationReport) -> Vec<Value> {
    let details = r.details.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";");
    let witness = match &r.witness {
        None => String::new(),
        Some(w) => {
            let ids: Vec<&str> = w.deviators.iter().map(|&j| market.producers[j].id.as_str()).collect();
            let mut s =
                format!("deviators={};baseline={};payoffs={}", ids.join(","), join(&w.baseline), join(&w.payoffs));
            if let Some(p) = &w.p_co2 {
                let _ = write!(s, ";p_co2={}", format_rational(p));
            }
            s
        }
    };
    vec![
        suite.into(),
        r.claim.id().into(),
        r.instance.clone().into(),
        r.verdict.to_string().into(),
        r.family_size.to_string().into(),
        r.evaluated.to_string().into(),
        details.into(),
        witness.into(),
    ]
}

/// Runs every lab suite on the scenario's market. The returned flag is set
/// when some suite found a counterexample.
pub fn verify(market: &CoupledMarket, config: &FamilyConfig) -> Result<(Table, bool), Error> {
    let mut t =
        Table::new(&["suite", "claim", "instance", "verdict", "family_size", "evaluated", "details", "witness"]);
    let mut failed = false;
    let mut record = |suite: &str, r: VerificationReport, t: &mut Table| {
        failed |= r.verdict == lab::Verdict::CounterexampleFound;
        t.push(report_row(market, suite, &r));
    };

    let costs: Vec<StepFn> = market.producers.iter().map(|p| p.cost_curve(&Rational::zero())).collect();
    let marginal: Vec<AskStrategy> = costs.iter().map(AskStrategy::marginal_cost).collect();
    let elec = &market.electricity;
    record("untaxed", lab::check_dominance(elec, &costs, &marginal)?, &mut t);
    let reference = elec.clear(&marginal)?;
    let candidates = markup_profiles(market, &costs, &reference);
    record("untaxed", lab::check_elec_uniqueness(elec, &costs, &candidates)?, &mut t);

    let profile = market.tau_profile()?;
    let omega = market.omega();
    let status = check_design(&profile, omega);
    if status != DesignStatus::Valid {
        return Err(Error::DesignInvalid(status));
    }
    let n = market.producers.len();
    let tails: Vec<StepFn> = (0..n).map(|j| profile.willing(j).clone()).collect();
    let lower = lower_strategy_with_tail(&profile, omega, &tails)?;
    let higher = higher_strategy(&profile, omega)?;
    let bounds = tau_bounds_unchecked(&profile, omega);
    for j in 0..n {
        let family = DeviationFamily::build(market, &profile, &lower, j, config);
        record(
            "lower",
            lab::search_carbon_deviation(market, &lower, &family, &Region::Below(bounds.lower.clone()))?,
            &mut t,
        );
    }
    for j in 0..n {
        let family = DeviationFamily::build(market, &profile, &higher, j, config);
        record(
            "higher",
            lab::search_carbon_deviation(market, &higher, &family, &Region::Above(bounds.higher.clone()))?,
            &mut t,
        );
    }
    let idle: Vec<AllowanceBid> = (0..n).map(|j| market.constant_bid(j, Rational::zero())).collect::<Result<_, _>>()?;
    if market.carbon.price(&idle) < bounds.lower {
        record("zero-bids", lab::check_not_nash_below(market, &profile, &idle, &config.epsilon_fraction)?, &mut t);
    }
    record("higher", lab::check_effectiveness_and_strong(market, &profile, &higher)?, &mut t);
    let all_in: Vec<AllowanceBid> =
        (0..n).map(|j| market.constant_bid(j, profile.caps[j].clone())).collect::<Result<_, _>>()?;
    record("full-cap-bids", lab::check_effectiveness_and_strong(market, &profile, &all_in)?, &mut t);
    Ok((t, failed))
}

/// Marginal cost up to the reference share, then a markup strictly above
/// the upper clearing price. One profile per markup level.
pub fn markup_profiles(market: &CoupledMarket, costs: &[StepFn], reference: &ElecClearing) -> Vec<Vec<AskStrategy>> {
    let lolc = &market.electricity.p_lolc;
    let upper = &reference.p_upper;
    if upper >= lolc {
        return Vec::new();
    }
    let gap = lolc - upper;
    (1..=4)
        .map(|k| upper + &gap * Rational::new(k.into(), 5.into()))
        .map(|markup| costs.iter().zip(&reference.phi).map(|(cost, share)| markup_ask(cost, share, &markup)).collect())
        .collect()
}

/// Cost on `[0, share]`, `markup` beyond.
pub fn markup_ask(cost: &StepFn, share: &Rational, markup: &Rational) -> AskStrategy {
    let capacity = cost.domain_end().expect("bounded quantity domain");
    let curve = if share.is_zero() {
        StepFn::constant(markup.clone(), Some(capacity.clone()))
    } else if share >= capacity {
        cost.clone()
    } else {
        cost.splice(share, &StepFn::constant(markup.clone(), Some(capacity.clone())))
    };
    AskStrategy::marginal_cost(&curve)
}
