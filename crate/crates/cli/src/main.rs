//! `wpar`: run weighted parabolic audits from a JSON config.
//!
//! Exit codes: 0 when every audit passes, 1 on an audit failure, 2 on a
//! configuration error.

mod config;
mod plot;
mod run;

use clap::{Args, Parser, Subcommand};
use config::Config;
use run::{Ctx, Failure};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "wpar", version, about = "Weighted degenerate parabolic audit toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON configuration file
    #[arg(long)]
    config: PathBuf,
    /// output directory, created if missing
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Muckenhoupt-type checks of the weight
    Weights(Common),
    /// quasi-metric constants and cylinder relations
    Geometry(Common),
    /// solve the initial-boundary value problem
    Solve(Common),
    /// oscillation gate and energy-type estimates
    Audit(Common),
    /// maximal function, Vitali covers and level-set decay
    Levelset(Common),
    /// boundary flattening audits
    Flatten(Common),
    /// every subcommand in turn
    All(Common),
}

type Step = fn(&Ctx) -> Result<bool, Failure>;

const STEPS: [(&str, Step); 6] = [
    ("weights", run::weights),
    ("geometry", run::geometry),
    ("solve", run::solve),
    ("audit", run::audit),
    ("levelset", run::levelset),
    ("flatten", run::flatten),
];

fn code(r: &Result<bool, Failure>) -> u8 {
    match r {
        Ok(true) => 0,
        Ok(false) | Err(Failure::Runtime(_)) | Err(Failure::Io(_)) => 1,
        Err(Failure::Config(_)) => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common) = match &cli.command {
        Command::Weights(c) => ("weights", c),
        Command::Geometry(c) => ("geometry", c),
        Command::Solve(c) => ("solve", c),
        Command::Audit(c) => ("audit", c),
        Command::Levelset(c) => ("levelset", c),
        Command::Flatten(c) => ("flatten", c),
        Command::All(c) => ("all", c),
    };
    let cfg = match Config::load(&common.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = std::fs::create_dir_all(&common.out) {
        eprintln!("cannot create {}: {e}", common.out.display());
        return ExitCode::from(1);
    }
    let ctx = Ctx { cfg: &cfg, out: &common.out, seed: common.seed };
    let mut worst = 0;
    for (step, f) in STEPS.iter().filter(|(s, _)| name == "all" || *s == name) {
        let r = f(&ctx);
        let c = code(&r);
        match &r {
            Ok(pass) => println!("{step}: {}", if *pass { "pass" } else { "FAIL" }),
            Err(Failure::Config(m)) => eprintln!("{step}: config error: {m}"),
            Err(Failure::Runtime(m)) | Err(Failure::Io(m)) => eprintln!("{step}: error: {m}"),
        }
        worst = worst.max(c);
    }
    ExitCode::from(worst)
}
