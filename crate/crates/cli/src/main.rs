use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rwrs_core::config::{parse_override, RunConfig};
use rwrs_core::Error;

mod commands;

#[derive(Parser)]
#[command(name = "rwrs", version, about = "Random walks in random scenery and the Matheron-de Marsily walk")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    replicas: Option<u64>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Any configuration key, e.g. `--set model.p=0.4` or `--set grid.hi=12`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Ensemble range and survival tables, optionally with exact values.
    Simulate,
    /// First-return tail and its power-law fit.
    Survival,
    /// Range growth and the normalized ratio.
    Range,
    /// Sup of the Kesten-Spitzer limit and the constants built on it.
    Ks,
    /// Exact small-n tables by enumeration.
    Oracle,
    /// The acceptance suite.
    Verify {
        /// Run only these criteria (1-10).
        #[arg(long = "criterion", short = 'c')]
        criteria: Vec<u8>,
    },
}

/// Command outcome: `None` when the command has no pass/fail verdict.
pub type Verdict = Option<bool>;

fn resolve(common: &Common) -> Result<RunConfig, Error> {
    let text = match &common.config {
        Some(path) => Some(
            std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
        ),
        None => None,
    };
    let mut overrides = Vec::new();
    if let Some(s) = common.seed {
        overrides.push(("seed".to_string(), s.to_string()));
    }
    if let Some(r) = common.replicas {
        overrides.push(("replicas".to_string(), r.to_string()));
    }
    if let Some(t) = common.threads {
        overrides.push(("threads".to_string(), t.to_string()));
    }
    for s in &common.set {
        overrides.push(parse_override(s)?);
    }
    let mut cfg = RunConfig::load(text.as_deref(), &overrides).map_err(|e| match (&common.config, e) {
        (Some(path), Error::Config(msg)) => Error::Config(format!("{}: {msg}", path.display())),
        (_, e) => e,
    })?;
    if let Some(out) = &common.out {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::Config(_) | Error::InvalidParameter(_) | Error::BudgetExceeded { .. }) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = || -> anyhow::Result<Verdict> {
        let cfg = resolve(&cli.common)?;
        match &cli.command {
            Command::Simulate => commands::simulate(&cfg),
            Command::Survival => commands::survival(&cfg),
            Command::Range => commands::range(&cfg),
            Command::Ks => commands::ks(&cfg),
            Command::Oracle => commands::oracle(&cfg),
            Command::Verify { criteria } => commands::verify(&cfg, cli.common.seed, criteria),
        }
    };
    match run() {
        Ok(Some(false)) => {
            eprintln!("FAIL");
            ExitCode::from(1)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn common(args: &[&str]) -> Common {
        let mut full = vec!["rwrs", "oracle"];
        full.extend_from_slice(args);
        Cli::parse_from(full).common
    }

    #[test]
    fn flags_override_config_keys() {
        let cfg = resolve(&common(&["--seed", "9", "--threads", "3", "--set", "model.kind=mdm", "--set", "model.p=0.25"]))
            .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.threads, 3);
        assert_eq!(cfg.model, rwrs_core::config::ModelSpec::Mdm { p: 0.25 });
    }

    #[test]
    fn config_problems_map_to_usage_status() {
        let e = anyhow::Error::from(resolve(&common(&["--replicas", "0"])).unwrap_err());
        assert_eq!(exit_code(&e), 2);
        let e = anyhow::Error::from(Error::Io(std::io::Error::other("disk")));
        assert_eq!(exit_code(&e), 1);
    }
}
