//! Single runs and seed x variant grids.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::agents::Trainer;
use crate::envs::make_env;
use crate::error::{Error, Result};
use crate::harness::config::RunConfig;
use crate::harness::metrics::{metrics_to_csv, MetricsRow};
use crate::rng::derive_seed;

/// Trains one configuration. Random streams come from
/// `derive_seed(config.seed, variant_index)`; the seed column reports
/// `config.seed`.
pub fn run_config(config: &RunConfig, variant_index: u64) -> Result<Vec<MetricsRow>> {
    config.validate()?;
    let env = make_env(&config.env)?;
    let mut trainer = Trainer::new(
        env,
        config.noise,
        config.agent.clone(),
        derive_seed(config.seed, variant_index),
    )?;
    trainer.run_with(&config.schedule(), |_| {})
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    std::fs::write(path, metrics_to_csv(rows)).map_err(|e| Error::io(path, e))
}

fn check_collision(path: &Path, overwrite: bool) -> Result<()> {
    if path.exists() && !overwrite {
        return Err(Error::OutputExists(path.display().to_string()));
    }
    Ok(())
}

/// Trains and writes `config.output_path()`.
pub fn train_to_file(config: &RunConfig, overwrite: bool) -> Result<PathBuf> {
    let path = config.output_path();
    check_collision(&path, overwrite)?;
    let rows = run_config(config, 0)?;
    write_metrics(&path, &rows)?;
    Ok(path)
}

/// Splits comma-separated values into axes and takes their cartesian
/// product, first key varying slowest. Single-valued keys are shared.
pub fn expand_grid(pairs: &[(String, String)]) -> Vec<Vec<(String, String)>> {
    let mut variants: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for (k, v) in pairs {
        let options: Vec<&str> = v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
        let mut next = Vec::with_capacity(variants.len() * options.len().max(1));
        for base in &variants {
            for o in &options {
                let mut extended = base.clone();
                extended.push((k.clone(), o.to_string()));
                next.push(extended);
            }
        }
        variants = next;
    }
    variants
}

/// One resolved grid cell.
#[derive(Debug, Clone)]
pub struct GridRun {
    pub variant_index: u64,
    pub config: RunConfig,
}

/// Resolves every (variant, seed) pair; `overrides` are applied last.
pub fn plan_grid(
    pairs: &[(String, String)],
    seeds: &[u64],
    out: &Path,
    overrides: &[(String, String)],
) -> Result<Vec<GridRun>> {
    if seeds.is_empty() {
        return Err(Error::Config("seeds: at least one seed required".into()));
    }
    let mut runs = Vec::new();
    for (i, variant) in expand_grid(pairs).iter().enumerate() {
        for &seed in seeds {
            let mut c = RunConfig::default();
            for (k, v) in variant.iter().chain(overrides) {
                c.set(k, v)?;
            }
            c.seed = seed;
            c.output_dir = out.to_path_buf();
            c.validate()?;
            runs.push(GridRun {
                variant_index: i as u64,
                config: c,
            });
        }
    }
    for (i, a) in runs.iter().enumerate() {
        if runs[..i].iter().any(|b| b.config.file_name() == a.config.file_name()) {
            return Err(Error::Config(format!(
                "two grid cells map to {}; vary env, agent, critic or sigma only",
                a.config.file_name()
            )));
        }
    }
    Ok(runs)
}

/// Runs a planned grid on `jobs` worker threads and returns the files
/// written, in plan order. Nothing runs if any output already exists and
/// `overwrite` is false.
pub fn run_grid(runs: &[GridRun], overwrite: bool, jobs: usize) -> Result<Vec<PathBuf>> {
    for r in runs {
        check_collision(&r.config.output_path(), overwrite)?;
    }
    let next = AtomicUsize::new(0);
    let failure: Mutex<Option<(usize, Error)>> = Mutex::new(None);
    std::thread::scope(|scope| {
        for _ in 0..jobs.max(1).min(runs.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= runs.len() || failure.lock().map(|f| f.is_some()).unwrap_or(true) {
                    break;
                }
                let r = &runs[i];
                let result = run_config(&r.config, r.variant_index)
                    .and_then(|rows| write_metrics(&r.config.output_path(), &rows));
                if let Err(e) = result {
                    let mut slot = failure.lock().unwrap_or_else(|p| p.into_inner());
                    if slot.as_ref().map_or(true, |(j, _)| i < *j) {
                        *slot = Some((i, e));
                    }
                }
            });
        }
    });
    if let Some((_, e)) = failure.into_inner().unwrap_or_else(|p| p.into_inner()) {
        return Err(e);
    }
    Ok(runs.iter().map(|r| r.config.output_path()).collect())
}
