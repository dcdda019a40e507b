//! Loads a scenario file and sweeps the allowance cap, printing the bounds
//! table as TSV.

use coupled_markets::rational::int;
use coupled_markets::report::{self, SweepParam};
use coupled_markets::scenario::load_scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/s3.toml").to_string());
    let scenario = load_scenario(&path)?;
    let table = report::sweep(&scenario, SweepParam::Omega, &int(40), &int(160), &int(20))?;
    print!("{}", table.to_tsv());
    Ok(())
}
