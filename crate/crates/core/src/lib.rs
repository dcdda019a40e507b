//! Exact clearing of a coupled electricity market and CO₂ allowance auction,
//! with tools to locate and test equilibrium carbon prices.

pub mod carbon;
pub mod coupling;
pub mod error;
pub mod lab;
pub mod power;
pub mod rational;
pub mod report;
pub mod scenario;
pub mod stepfn;

pub use carbon::{AllocationMode, AllowanceBid, CarbonMarket, Co2Clearing};
pub use coupling::{CoupledMarket, CoupledOutcome, DesignStatus, ModifiedCost, TauBounds, TauProfile};
pub use error::Error;
pub use power::{AskStrategy, Demand, ElecClearing, ElectricityMarket, OfferCurve, PriceRule, Producer};
pub use rational::Rational;
pub use stepfn::StepFn;
