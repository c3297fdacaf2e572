//! Command-line front end. Exit codes: 0 success, 2 configuration error, 3 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use scldpc::experiment::{self, ExperimentConfig, Report};
use scldpc::{Error, Result};

#[derive(Parser)]
#[command(name = "scldpc", version, about = "Finite-length analysis of spatially coupled LDPC ensembles on the BEC")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// BP threshold by bisection on the mean evolution.
    Threshold(Common),
    /// Expected deg1 curve `tau,c1_hat` for each erasure probability.
    MeanEvolution(Common),
    /// Plateau slope of c1(*) against the gap to threshold.
    Gamma(Common),
    /// One-step variance proxy against Monte Carlo delta1(tau).
    Variance(Common),
    /// Covariance decay rate theta from Monte Carlo trials.
    Theta(Common),
    /// Scaling-law survival time and word error probability.
    Predict(Common),
    /// Monte Carlo word error rate with early stopping.
    Simulate(Common),
    /// Data series for one figure: fig2a, fig2b, fig3a, fig3b or fig4.
    Figure {
        name: String,
        #[command(flatten)]
        common: Common,
    },
    /// Bits per position ensemble a needs to match ensemble b's survival time.
    EquivalentM(Common),
}

/// Options shared by every subcommand. Values are parsed by the configuration
/// layer so that bad values map to the configuration exit code.
#[derive(Args)]
struct Common {
    /// Flat `key = value` configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// protograph | random
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    l: Option<String>,
    #[arg(long)]
    r: Option<String>,
    /// Chain length.
    #[arg(long = "L")]
    chain_len: Option<String>,
    /// Bits per position.
    #[arg(long = "M")]
    bits_per_position: Option<String>,
    /// Single value, list `a,b,c` or sweep `start:stop:step`.
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Output directory; without it CSVs go to stdout.
    #[arg(long)]
    out: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<String>,
    /// Threshold bracket width.
    #[arg(long)]
    tol: Option<String>,
    /// Integration step in tau.
    #[arg(long)]
    step: Option<String>,
    /// Any configuration key, e.g. `--set gamma=5.25`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let named = [
            ("family", &self.family),
            ("l", &self.l),
            ("r", &self.r),
            ("L", &self.chain_len),
            ("M", &self.bits_per_position),
            ("epsilon", &self.epsilon),
            ("trials", &self.trials),
            ("seed", &self.seed),
            ("out", &self.out),
            ("threads", &self.threads),
            ("tol", &self.tol),
            ("step", &self.step),
        ];
        let mut overrides: Vec<(String, String)> =
            named.iter().filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone()))).collect();
        for kv in &self.set {
            let (k, v) = kv.split_once('=').ok_or_else(|| Error::Parse(format!("--set expects KEY=VALUE, got '{kv}'")))?;
            overrides.push((k.trim().to_string(), v.trim().to_string()));
        }
        ExperimentConfig::load(self.config.as_deref(), &overrides)
    }
}

fn emit(cfg: &ExperimentConfig, report: &Report) -> Result<()> {
    println!("{}", report.summary.trim_end());
    match &cfg.out {
        Some(dir) => {
            report.write_to(dir)?;
            for f in &report.files {
                eprintln!("wrote {}", dir.join(&f.name).display());
            }
        }
        None => {
            for f in &report.files {
                println!("\n## {}\n{}", f.name, f.contents.trim_end());
            }
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let (common, figure) = match &cli.command {
        Command::Figure { name, common } => (common, Some(name.as_str())),
        Command::Threshold(c)
        | Command::MeanEvolution(c)
        | Command::Gamma(c)
        | Command::Variance(c)
        | Command::Theta(c)
        | Command::Predict(c)
        | Command::Simulate(c)
        | Command::EquivalentM(c) => (c, None),
    };
    let cfg = common.load()?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    }
    let report = match &cli.command {
        Command::Threshold(_) => experiment::cmd_threshold(&cfg)?.1,
        Command::MeanEvolution(_) => experiment::cmd_mean_evolution(&cfg)?,
        Command::Gamma(_) => experiment::cmd_gamma(&cfg)?.1,
        Command::Variance(_) => experiment::cmd_variance(&cfg)?.1,
        Command::Theta(_) => experiment::cmd_theta(&cfg)?.1,
        Command::Predict(_) => experiment::cmd_predict(&cfg)?.1,
        Command::Simulate(_) => experiment::cmd_simulate(&cfg)?.1,
        Command::Figure { .. } => experiment::cmd_figure(figure.unwrap_or_default(), &cfg)?,
        Command::EquivalentM(_) => experiment::cmd_equivalent_m(&cfg)?.1,
    };
    emit(&cfg, &report)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 2 } else { 3 })
        }
    }
}
