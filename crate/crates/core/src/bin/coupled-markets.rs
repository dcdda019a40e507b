use clap::{Parser, Subcommand, ValueEnum};
use coupled_markets::lab::family::FamilyConfig;
use coupled_markets::rational::parse_rational;
use coupled_markets::report::{self, BidSource, SweepParam, Table};
use coupled_markets::scenario::{load_scenario, Scenario, ScenarioError};
use coupled_markets::{Error, Rational};
use std::path::PathBuf;
use std::process::ExitCode;

/// Exact clearing of a coupled electricity market and CO2 allowance auction.
#[derive(Parser)]
#[command(name = "coupled-markets", version)]
struct Cli {
    /// Scenario file (TOML).
    #[arg(short, long, global = true, default_value = "scenario.toml")]
    scenario: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Electricity clearing with every producer asking c + tau * e.
    ClearElec {
        #[arg(long, default_value = "0", value_parser = rational)]
        tau: Rational,
    },
    /// Allowance auction alone.
    ClearCo2 {
        #[arg(long, value_enum, default_value_t = Bids::Scenario)]
        bids: Bids,
    },
    /// Allowance auction followed by electricity clearing on modified costs.
    Couple {
        #[arg(long, value_enum, default_value_t = Bids::Lower)]
        bids: Bids,
    },
    /// Design check and the two tax bounds.
    Bounds,
    /// Bounds over a range of the allowance cap or the penalty.
    Sweep {
        #[arg(value_enum)]
        param: Param,
        /// `from..to`, inclusive.
        range: String,
        #[arg(long, value_parser = rational)]
        step: Rational,
    },
    /// Runs every lab suite on the scenario.
    Verify {
        /// Minimum deviation family size per producer.
        #[arg(long, default_value_t = 1000)]
        min_family: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Bids {
    Lower,
    Higher,
    Scenario,
}

#[derive(Clone, Copy, ValueEnum)]
enum Param {
    Omega,
    Penalty,
}

fn rational(s: &str) -> Result<Rational, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

enum Failure {
    Validation(String),
    Other(String),
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Io { .. } => Failure::Other(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InternalInconsistency(_) => Failure::Other(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

fn parse_range(range: &str) -> Result<(Rational, Rational), Failure> {
    let (from, to) = range
        .split_once("..")
        .ok_or_else(|| Failure::Validation(format!("range `{range}` is not of the form from..to")))?;
    let parse = |s: &str| rational(s.trim()).map_err(Failure::Validation);
    Ok((parse(from)?, parse(to)?))
}

fn run(cli: Cli) -> Result<(Table, bool), Failure> {
    let scenario: Scenario = load_scenario(&cli.scenario)?;
    let market = scenario.market()?;
    let source = |b: Bids| match b {
        Bids::Lower => BidSource::Lower,
        Bids::Higher => BidSource::Higher,
        Bids::Scenario => BidSource::Scenario,
    };
    let table = match cli.command {
        Command::ClearElec { tau } => report::clear_elec(&market, &tau)?,
        Command::ClearCo2 { bids } => {
            let bids = report::resolve_bids(&scenario, &market, source(bids))?;
            report::clear_co2(&market, &bids)?
        }
        Command::Couple { bids } => {
            let bids = report::resolve_bids(&scenario, &market, source(bids))?;
            report::couple(&market, &bids)?
        }
        Command::Bounds => report::bounds(&market)?,
        Command::Sweep { param, range, step } => {
            let (from, to) = parse_range(&range)?;
            let param = match param {
                Param::Omega => SweepParam::Omega,
                Param::Penalty => SweepParam::Penalty,
            };
            report::sweep(&scenario, param, &from, &to, &step)?
        }
        Command::Verify { min_family } => {
            let config = FamilyConfig { min_size: min_family, ..FamilyConfig::default() };
            return Ok(report::verify(&market, &config)?);
        }
    };
    Ok((table, false))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok((table, counterexample)) => {
            print!("{}", table.to_tsv());
            if counterexample {
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
