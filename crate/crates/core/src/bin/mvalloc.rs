use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use toml::Value;

use mvalloc::config::RunConfig;
use mvalloc::harness::{self, Command};

#[derive(Parser)]
#[command(name = "mvalloc", version, about = "Budget-constrained Metaverse resource allocation experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,

    /// TOML run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Policy name: saving, average, max, random, myopic, drl, each optionally with -gcp
    #[arg(long, global = true)]
    policy: Option<String>,

    #[arg(long, global = true)]
    msps: Option<usize>,

    #[arg(long, global = true)]
    horizon: Option<usize>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Immersion threshold
    #[arg(long, global = true)]
    threshold: Option<f64>,

    /// Evaluation episodes
    #[arg(long, global = true)]
    episodes: Option<usize>,

    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    /// Agent checkpoint to load, or where `train` saves it
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,

    /// Override any configuration key, e.g. --set env.budget=80
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Evaluate a policy
    Eval,
    /// Train the PPO agent, then evaluate it
    Train,
    /// Evaluate every policy over the MSP-count and horizon grid
    Sweep,
    /// Rerun a policy under growing request volume and shrinking budgets
    Tolerance,
    /// Train through a mid-run change of threshold and client traffic
    Adapt,
    /// Sweep the pool withdrawal cap
    Capsweep,
}

impl Cli {
    fn command(&self) -> Command {
        match self.cmd {
            Cmd::Eval => Command::Eval,
            Cmd::Train => Command::Train,
            Cmd::Sweep => Command::Sweep,
            Cmd::Tolerance => Command::Tolerance,
            Cmd::Adapt => Command::Adapt,
            Cmd::Capsweep => Command::CapSweep,
        }
    }

    fn all_overrides(&self) -> Vec<String> {
        let mut o = self.overrides.clone();
        if let Some(p) = &self.policy {
            o.push(format!("policy={}", Value::String(p.clone())));
        }
        if let Some(m) = self.msps {
            o.push(format!("env.msps={m}"));
        }
        if let Some(h) = self.horizon {
            o.push(format!("env.horizon={h}"));
        }
        if let Some(s) = self.seed {
            o.push(format!("seed={s}"));
        }
        if let Some(t) = self.threshold {
            o.push(format!("env.reward.threshold={t:?}"));
        }
        if let Some(e) = self.episodes {
            o.push(format!("episodes={e}"));
        }
        o
    }
}

fn run(cli: &Cli) -> mvalloc::Result<()> {
    let cmd = cli.command();
    let overrides = cli.all_overrides();
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path, &overrides, cmd.default_mode())?,
        None => RunConfig::resolve(None, &overrides, cmd.default_mode())?,
    };
    let checkpoint = cli.checkpoint.as_deref();
    let input = if cmd == Command::Train { None } else { checkpoint };
    let out = harness::run(cmd, &cfg, input)?;
    let mut stdout = std::io::stdout().lock();
    for path in out.write(&cli.out_dir, checkpoint)? {
        // a closed pipe on stdout is not a failure of the run
        let _ = writeln!(stdout, "{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
