//! The `ope` subcommand: an estimator study on a built-in chain.

use std::path::{Path, PathBuf};

use crate::envs::TabularMdp;
use crate::error::{Error, Result};
use crate::ope::{constant_policy, estimator_study, Estimator, ModelQuality, StudyResult, StudySetup};

pub const OPE_HEADER: &str = "estimator,model_quality,mean,variance,mse,n_trajectories,n_resamples,seed";

/// Target policy on chains: go right with probability 0.8.
pub const PI_RIGHT: f64 = 0.8;
/// Behavior policy on chains: uniform.
pub const BETA_RIGHT: f64 = 0.5;
pub const CHAIN_DISCOUNT: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct OpeArgs {
    pub mdp: String,
    pub horizon: usize,
    pub trajectories: usize,
    pub resamples: usize,
    pub model: ModelQuality,
    pub seed: u64,
    pub out: PathBuf,
    pub overwrite: bool,
}

/// `chain-N` -> N.
pub fn parse_chain(name: &str) -> Result<usize> {
    name.strip_prefix("chain-")
        .and_then(|n| n.parse::<usize>().ok())
        .filter(|&n| (1..=20).contains(&n))
        .ok_or_else(|| Error::Config(format!("mdp: `{name}` is not chain-N with 1 <= N <= 20")))
}

pub fn run_study(args: &OpeArgs) -> Result<StudyResult> {
    let n = parse_chain(&args.mdp)?;
    let mdp = TabularMdp::<f64>::chain(n, CHAIN_DISCOUNT)?;
    let pi = constant_policy::<f64>(n, PI_RIGHT);
    let beta = constant_policy::<f64>(n, BETA_RIGHT);
    estimator_study(
        &StudySetup {
            mdp: &mdp,
            pi: &pi,
            beta: &beta,
            horizon: args.horizon,
            n_trajectories: args.trajectories,
            n_resamples: args.resamples,
            seed: args.seed,
        },
        args.model,
    )
}

pub fn ope_csv(result: &StudyResult, args: &OpeArgs) -> String {
    let mut s = format!("{OPE_HEADER}\n");
    for e in Estimator::ALL {
        let st = result.get(e);
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            e.name(),
            result.quality.label(),
            st.mean,
            st.variance,
            st.mse,
            args.trajectories,
            args.resamples,
            args.seed
        ));
    }
    s
}

pub fn ope_file_name(args: &OpeArgs) -> String {
    format!("ope_{}_{}_{}.csv", args.mdp, args.model.label().replace(':', "-"), args.seed)
}

/// Runs the study and writes its CSV into `args.out`.
pub fn run_ope(args: &OpeArgs) -> Result<PathBuf> {
    let path = args.out.join(ope_file_name(args));
    if path.exists() && !args.overwrite {
        return Err(Error::OutputExists(path.display().to_string()));
    }
    let result = run_study(args)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    write(&path, &ope_csv(&result, args))?;
    Ok(path)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
