//! Scenario files.
//!
//! A scenario is a TOML document. Every number is either a TOML integer or
//! a string holding an integer, a fraction `"n/d"` or a decimal `"2.4"`;
//! TOML floats are rejected so nothing inexact slips in.
//!
//! ```toml
//! omega = 100
//! penalty = 6
//! rule = "lower"            # or "upper"
//! co2_alloc = "conserving"  # or "literal"
//! # p_lolc = 1000           # default: one above every cost and demand step
//!
//! [demand]                  # value on (previous until, until], tail beyond
//! steps = [{ until = 100, value = 60 }]
//! tail = 0
//!
//! [[producer]]
//! id = "P1"
//! c = 10
//! e = 3
//! kappa = 40
//! # e_cap = 120             # allowance cap, default e * kappa
//!
//! [[bid]]                   # optional, one per producer, on [0, penalty]
//! producer = "P1"
//! continuity = "left"       # side taken at each step boundary
//! steps = [{ until = "12/5", value = 20 }]
//! tail = 0
//! points = [{ at = 2, value = 90 }]   # optional isolated values
//! ```

use crate::carbon::{AllocationMode, AllowanceBid, CarbonMarket};
use crate::coupling::CoupledMarket;
use crate::error::Error;
use crate::power::{Demand, PriceRule, Producer};
use crate::rational::{format_rational, parse_rational, Rational};
use crate::stepfn::StepFn;
use num_traits::{ToPrimitive, Zero};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("{path}: cannot read: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error{}{}: {message}", .line.map(|l| format!(" at line {l}")).unwrap_or_default(), .field.as_ref().map(|f| format!(" in `{f}`")).unwrap_or_default())]
    Parse { line: Option<usize>, field: Option<String>, message: String },
    #[error("invalid scenario ({context}): {source}")]
    Validation { context: String, source: Error },
}

impl ScenarioError {
    fn validation(context: impl Into<String>, source: Error) -> Self {
        ScenarioError::Validation { context: context.into(), source }
    }
}

/// Exact number as written in a scenario file.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Num(Rational);

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl de::Visitor<'_> for V {
            type Value = Num;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an integer or a string such as \"12/5\" or \"2.4\"")
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Num, E> {
                Ok(Num(Rational::from_integer(v.into())))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Num, E> {
                Ok(Num(Rational::from_integer(v.into())))
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Num, E> {
                Err(E::custom(format!("float {v} is not exact; write it as a string, e.g. \"{v}\"")))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Num, E> {
                parse_rational(v).map(Num).map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0.is_integer().then(|| self.0.numer().to_i64()).flatten() {
            Some(n) => s.serialize_i64(n),
            None => s.serialize_str(&format_rational(&self.0)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
enum RuleName {
    Lower,
    Upper,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
enum AllocName {
    Conserving,
    Literal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
enum Side {
    #[default]
    Left,
    Right,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct Step {
    until: Num,
    value: Num,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct Point {
    at: Num,
    value: Num,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct DemandFile {
    #[serde(default)]
    steps: Vec<Step>,
    tail: Num,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct ProducerFile {
    id: String,
    c: Num,
    e: Num,
    kappa: Num,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    e_cap: Option<Num>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct BidFile {
    producer: String,
    #[serde(default)]
    continuity: Side,
    #[serde(default)]
    steps: Vec<Step>,
    tail: Num,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    points: Vec<Point>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    omega: Num,
    penalty: Num,
    #[serde(default = "default_rule")]
    rule: RuleName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p_lolc: Option<Num>,
    #[serde(default = "default_alloc")]
    co2_alloc: AllocName,
    demand: DemandFile,
    #[serde(rename = "producer")]
    producers: Vec<ProducerFile>,
    #[serde(default, rename = "bid", skip_serializing_if = "Vec::is_empty")]
    bids: Vec<BidFile>,
}

fn default_rule() -> RuleName {
    RuleName::Lower
}

fn default_alloc() -> AllocName {
    AllocName::Conserving
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CapMode {
    /// Every allowance cap is `e·κ`.
    Default,
    /// Caps are given per producer.
    Explicit,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scenario {
    pub producers: Vec<Producer>,
    pub demand: Demand,
    pub omega: Rational,
    pub penalty: Rational,
    pub rule: PriceRule,
    pub p_lolc: Option<Rational>,
    pub cap_mode: CapMode,
    pub co2_alloc: AllocationMode,
    /// Allowance bids in producer order, if the file carries them.
    pub bids: Option<Vec<AllowanceBid>>,
}

impl Scenario {
    pub fn market(&self) -> Result<CoupledMarket, Error> {
        let carbon = CarbonMarket::new(self.omega.clone(), self.penalty.clone()).with_mode(self.co2_alloc);
        CoupledMarket::new(self.producers.clone(), self.demand.clone(), self.rule, self.p_lolc.clone(), carbon)
    }

    pub fn to_toml(&self) -> String {
        let file = ScenarioFile {
            omega: Num(self.omega.clone()),
            penalty: Num(self.penalty.clone()),
            rule: match self.rule {
                PriceRule::Lower => RuleName::Lower,
                PriceRule::Upper => RuleName::Upper,
            },
            p_lolc: self.p_lolc.clone().map(Num),
            co2_alloc: match self.co2_alloc {
                AllocationMode::Conserving => AllocName::Conserving,
                AllocationMode::Literal => AllocName::Literal,
            },
            demand: {
                let (steps, tail) = left_steps(self.demand.curve());
                DemandFile { steps, tail }
            },
            producers: self
                .producers
                .iter()
                .map(|p| ProducerFile {
                    id: p.id.clone(),
                    c: Num(p.cost.clone()),
                    e: Num(p.emission_rate.clone()),
                    kappa: Num(p.capacity.clone()),
                    e_cap: (self.cap_mode == CapMode::Explicit).then(|| Num(p.allowance_cap.clone())),
                })
                .collect(),
            bids: self
                .bids
                .iter()
                .flatten()
                .zip(&self.producers)
                .map(|(b, p)| {
                    let curve = b.curve();
                    let (steps, tail) = left_steps(curve);
                    let points = curve
                        .breakpoints()
                        .iter()
                        .zip(curve.point_values())
                        .zip(curve.plateaus())
                        .filter(|((_, at), left)| at != left)
                        .map(|((x, at), _)| Point { at: Num(x.clone()), value: Num(at.clone()) })
                        .collect();
                    BidFile { producer: p.id.clone(), continuity: Side::Left, steps, tail, points }
                })
                .collect(),
        };
        toml::to_string(&file).expect("scenario serializes")
    }
}

fn left_steps(f: &StepFn) -> (Vec<Step>, Num) {
    let steps = f
        .breakpoints()
        .iter()
        .zip(f.plateaus())
        .map(|(b, v)| Step { until: Num(b.clone()), value: Num(v.clone()) })
        .collect();
    (steps, Num(f.plateaus().last().unwrap().clone()))
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn curve_from(
    steps: &[Step],
    tail: &Num,
    side: Side,
    points: &[Point],
    end: Option<Rational>,
) -> Result<StepFn, Error> {
    let breaks: Vec<Rational> = steps.iter().map(|s| s.until.0.clone()).collect();
    let mut plateaus: Vec<Rational> = steps.iter().map(|s| s.value.0.clone()).collect();
    plateaus.push(tail.0.clone());
    let mut at: Vec<Rational> = match side {
        Side::Left => plateaus[..breaks.len()].to_vec(),
        Side::Right => plateaus[1..].to_vec(),
    };
    let (mut breaks, mut plateaus) = (breaks, plateaus);
    for p in points {
        match breaks.iter().position(|b| *b == p.at.0) {
            Some(i) => at[i] = p.value.0.clone(),
            None => {
                // an isolated value inside a plateau splits it
                let i = breaks.partition_point(|b| *b < p.at.0);
                let surrounding = plateaus[i].clone();
                breaks.insert(i, p.at.0.clone());
                at.insert(i, p.value.0.clone());
                plateaus.insert(i, surrounding);
            }
        }
    }
    StepFn::from_parts(breaks, plateaus, at, end)
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| ScenarioError::Parse {
        line: e.span().map(|s| line_of(text, s.start)),
        field: None,
        message: e.message().to_string(),
    })?;

    let cap_mode = if file.producers.iter().any(|p| p.e_cap.is_some()) { CapMode::Explicit } else { CapMode::Default };
    let producers: Vec<Producer> = file
        .producers
        .iter()
        .map(|p| {
            let base = Producer::new(p.id.clone(), p.c.0.clone(), p.e.0.clone(), p.kappa.0.clone());
            match &p.e_cap {
                Some(cap) => base.with_allowance_cap(cap.0.clone()),
                None => base,
            }
        })
        .collect();
    if cap_mode == CapMode::Explicit {
        if let Some(p) = file.producers.iter().find(|p| p.e_cap.is_none()) {
            return Err(ScenarioError::Parse {
                line: None,
                field: Some(format!("producer {}.e_cap", p.id)),
                message: "give e_cap for every producer or for none".into(),
            });
        }
    }
    if producers.is_empty() {
        return Err(ScenarioError::Parse {
            line: None,
            field: Some("producer".into()),
            message: "no producers".into(),
        });
    }
    crate::power::validate_producers(&producers).map_err(|e| ScenarioError::validation("producers", e))?;

    let demand = curve_from(&file.demand.steps, &file.demand.tail, Side::Left, &[], None)
        .and_then(Demand::new)
        .map_err(|e| ScenarioError::validation("demand", e))?;

    let omega = file.omega.0;
    let penalty = file.penalty.0;
    if omega <= Rational::zero() {
        return Err(ScenarioError::validation("omega", Error::PreconditionViolated("must be positive".into())));
    }
    if penalty <= Rational::zero() {
        return Err(ScenarioError::validation("penalty", Error::PreconditionViolated("must be positive".into())));
    }

    let bids = if file.bids.is_empty() {
        None
    } else {
        let mut slots: Vec<Option<AllowanceBid>> = vec![None; producers.len()];
        for b in &file.bids {
            let Some(j) = producers.iter().position(|p| p.id == b.producer) else {
                return Err(ScenarioError::Parse {
                    line: None,
                    field: Some("bid.producer".into()),
                    message: format!("unknown producer {:?}", b.producer),
                });
            };
            if slots[j].is_some() {
                return Err(ScenarioError::Parse {
                    line: None,
                    field: Some("bid.producer".into()),
                    message: format!("two bids for {:?}", b.producer),
                });
            }
            let curve = curve_from(&b.steps, &b.tail, b.continuity, &b.points, Some(penalty.clone()))
                .and_then(|c| AllowanceBid::new(j, c, &producers[j].allowance_cap, &penalty))
                .map_err(|e| ScenarioError::validation(format!("bid of {}", b.producer), e))?;
            slots[j] = Some(curve);
        }
        if let Some(j) = slots.iter().position(Option::is_none) {
            return Err(ScenarioError::Parse {
                line: None,
                field: Some("bid".into()),
                message: format!("no bid for producer {:?}", producers[j].id),
            });
        }
        Some(slots.into_iter().map(Option::unwrap).collect())
    };

    let scenario = Scenario {
        producers,
        demand,
        omega,
        penalty,
        rule: match file.rule {
            RuleName::Lower => PriceRule::Lower,
            RuleName::Upper => PriceRule::Upper,
        },
        p_lolc: file.p_lolc.map(|n| n.0),
        cap_mode,
        co2_alloc: match file.co2_alloc {
            AllocName::Conserving => AllocationMode::Conserving,
            AllocName::Literal => AllocationMode::Literal,
        },
        bids,
    };
    scenario.market().map_err(|e| ScenarioError::validation("market", e))?;
    Ok(scenario)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
    parse_scenario(&text)
}
