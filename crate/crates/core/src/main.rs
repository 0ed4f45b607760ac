use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use drac::harness::{self, OpeArgs, RunConfig};
use drac::ope::ModelQuality;
use drac::{Error, Result};

#[derive(Parser)]
#[command(name = "drac", version, about = "Doubly robust actor-critic experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent and write its metrics CSV.
    Train(TrainArgs),
    /// Train every (variant, seed) cell of a grid config.
    Grid(GridArgs),
    /// Monte Carlo study of IS, DM and DR on a tabular chain.
    Ope(OpeCli),
    /// Cross-seed mean/std summary plus plot data.
    Summarize(SummarizeArgs),
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    env: Option<String>,
    #[arg(long)]
    agent: Option<String>,
    #[arg(long)]
    critic: Option<String>,
    #[arg(long = "noise-sigma")]
    noise_sigma: Option<f64>,
    #[arg(long = "noise-mu")]
    noise_mu: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "shared-samples")]
    shared_samples: bool,
    /// Fill the wall_ms column (makes files differ between runs).
    #[arg(long = "record-wall-time")]
    record_wall_time: bool,
    #[arg(long)]
    overwrite: bool,
    /// Extra key=value settings, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',', required = true)]
    seeds: Vec<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    overwrite: bool,
    /// Worker threads; each run stays single-threaded.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct OpeCli {
    #[arg(long)]
    mdp: String,
    #[arg(long)]
    horizon: usize,
    #[arg(long)]
    trajectories: usize,
    #[arg(long)]
    resamples: usize,
    /// exact, stationary, zero or perturbed:EPS
    #[arg(long)]
    model: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    overwrite: bool,
}

#[derive(Args)]
struct SummarizeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn split_setting(s: &str) -> Result<(String, String)> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{s}`")))
}

fn train(a: TrainArgs) -> Result<()> {
    let mut pairs = match &a.config {
        Some(p) => harness::read_config_file(p)?,
        None => Vec::new(),
    };
    let flag = |k: &str, v: Option<String>| v.map(|v| (k.to_string(), v));
    pairs.extend(
        [
            flag("env", a.env),
            flag("agent", a.agent),
            flag("critic", a.critic),
            flag("sigma", a.noise_sigma.map(|x| x.to_string())),
            flag("mu", a.noise_mu.map(|x| x.to_string())),
            flag("steps", a.steps.map(|x| x.to_string())),
            flag("seed", a.seed.map(|x| x.to_string())),
            flag("out", a.out.map(|p| p.display().to_string())),
            flag("shared_samples", a.shared_samples.then(|| "true".into())),
            flag("record_wall_time", a.record_wall_time.then(|| "true".into())),
        ]
        .into_iter()
        .flatten(),
    );
    for s in &a.set {
        pairs.push(split_setting(s)?);
    }
    let config = RunConfig::from_pairs(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
    let path = harness::train_to_file(&config, a.overwrite)?;
    println!("{}", path.display());
    Ok(())
}

fn grid(a: GridArgs) -> Result<()> {
    let pairs = harness::read_config_file(&a.config)?;
    let runs = harness::plan_grid(&pairs, &a.seeds, &a.out, &[])?;
    for p in harness::run_grid(&runs, a.overwrite, a.jobs)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn ope(a: OpeCli) -> Result<()> {
    let args = OpeArgs {
        mdp: a.mdp,
        horizon: a.horizon,
        trajectories: a.trajectories,
        resamples: a.resamples,
        model: ModelQuality::parse(&a.model)?,
        seed: a.seed,
        out: a.out,
        overwrite: a.overwrite,
    };
    println!("{}", harness::run_ope(&args)?.display());
    Ok(())
}

fn summarize(a: SummarizeArgs) -> Result<()> {
    let (summary, plot) = harness::summarize_dir(&a.input, &a.out)?;
    println!("{}\n{}", summary.display(), plot.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Grid(a) => grid(a),
        Command::Ope(a) => ope(a),
        Command::Summarize(a) => summarize(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
