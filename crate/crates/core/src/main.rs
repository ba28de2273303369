use std::path::PathBuf;

use clap::{Args, Parser};
use coldplasma::driver::{run, RunConfig, Subcommand};

/// Guderley-Morawetz problem for the cold plasma system.
///
/// Exit status: 0 on success, 2 when a validation check fails (reports are
/// still written), 1 on hard errors.
#[derive(Parser)]
#[command(version, about)]
enum Cli {
    /// Build and validate the domain; writes domain.json and boundary.csv.
    Domain(Common),
    /// Certify the multiplier estimate; writes certificate.json.
    Certify(Common),
    /// Solve the similarity ODE; writes similarity.json, profile.csv and field.csv.
    Similarity(Common),
    /// Weighted least-squares solve; writes solution.csv and stats.json.
    Solve(Common),
    /// Run the property suite; writes verdict.json.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// JSON config file (the `version` field is mandatory).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Progress messages on stderr.
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

fn main() {
    let (subcommand, c) = match Cli::parse() {
        Cli::Domain(c) => (Subcommand::Domain, c),
        Cli::Certify(c) => (Subcommand::Certify, c),
        Cli::Similarity(c) => (Subcommand::Similarity, c),
        Cli::Solve(c) => (Subcommand::Solve, c),
        Cli::Verify(c) => (Subcommand::Verify, c),
    };
    let rc = RunConfig { subcommand, config: c.config, out: c.out, seed: c.seed, verbosity: c.verbose };
    std::process::exit(run(&rc));
}
