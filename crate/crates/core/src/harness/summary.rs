//! Cross-seed summaries and plot data.
//!
//! Files are grouped by variant, the file stem with its trailing `_{seed}`
//! removed. Standard deviations use the population convention (divide by N).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::agents::mean_and_pop_std;
use crate::error::{Error, Result};
use crate::harness::metrics::{read_metrics, MetricsRow};

pub const SUMMARY_HEADER: &str = "variant,step,n_seeds,mean,std_pop";
pub const PLOT_HEADER: &str = "variant,x,mean,lower,upper";

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub variant: String,
    pub step: u64,
    pub n_seeds: usize,
    pub mean: f64,
    pub std_pop: f64,
}

/// Variant label of a metrics file name, `None` if it does not end in
/// `_{seed}.csv`.
pub fn variant_of(path: &Path) -> Option<String> {
    if path.extension()? != "csv" {
        return None;
    }
    let stem = path.file_stem()?.to_str()?;
    if stem.ends_with(".plot") {
        return None;
    }
    let (variant, seed) = stem.rsplit_once('_')?;
    seed.parse::<u64>().ok()?;
    Some(variant.to_string())
}

/// Per (variant, step) mean and population std of `eval_return_mean`.
pub fn summarize_groups(groups: &BTreeMap<String, Vec<(PathBuf, Vec<MetricsRow>)>>) -> Result<Vec<SummaryRow>> {
    if groups.is_empty() {
        return Err(Error::Alignment("no metrics files to summarize".into()));
    }
    let mut out = Vec::new();
    for (variant, files) in groups {
        let Some((first_path, first)) = files.first() else {
            return Err(Error::Alignment(format!("variant {variant} has no files")));
        };
        if first.is_empty() {
            return Err(Error::Alignment(format!("{} has no rows", first_path.display())));
        }
        let steps: Vec<u64> = first.iter().map(|r| r.step).collect();
        for (p, rows) in files {
            if rows.iter().map(|r| r.step).ne(steps.iter().copied()) {
                return Err(Error::Alignment(format!(
                    "{} and {} record different steps",
                    first_path.display(),
                    p.display()
                )));
            }
        }
        for (i, &step) in steps.iter().enumerate() {
            let xs: Vec<f64> = files.iter().map(|(_, rows)| rows[i].eval_return_mean).collect();
            let (mean, std_pop) = mean_and_pop_std(&xs);
            out.push(SummaryRow {
                variant: variant.clone(),
                step,
                n_seeds: xs.len(),
                mean,
                std_pop,
            });
        }
    }
    Ok(out)
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = format!("{SUMMARY_HEADER}\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{},{}\n", r.variant, r.step, r.n_seeds, r.mean, r.std_pop));
    }
    s
}

/// Mean and mean +/- std bands.
pub fn plot_csv(rows: &[SummaryRow]) -> String {
    let mut s = format!("{PLOT_HEADER}\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.variant,
            r.step,
            r.mean,
            r.mean - r.std_pop,
            r.mean + r.std_pop
        ));
    }
    s
}

/// `summary.csv` -> `summary.plot.csv`.
pub fn plot_path(summary: &Path) -> PathBuf {
    let stem = summary.file_stem().and_then(|s| s.to_str()).unwrap_or("summary");
    summary.with_file_name(format!("{stem}.plot.csv"))
}

/// Reads every metrics file in `dir`, writes the summary to `out` and plot
/// data next to it. Returns both paths.
pub fn summarize_dir(dir: &Path, out: &Path) -> Result<(PathBuf, PathBuf)> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p == out || p == plot_path(out) {
            continue;
        }
        if variant_of(&p).is_some() {
            paths.push(p);
        }
    }
    paths.sort();
    let mut groups: BTreeMap<String, Vec<(PathBuf, Vec<MetricsRow>)>> = BTreeMap::new();
    for p in paths {
        let rows = read_metrics(&p)?;
        let variant = variant_of(&p).unwrap_or_default();
        groups.entry(variant).or_default().push((p, rows));
    }
    let rows = summarize_groups(&groups)?;
    let plot = plot_path(out);
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::write(out, summary_csv(&rows)).map_err(|e| Error::io(out, e))?;
    std::fs::write(&plot, plot_csv(&rows)).map_err(|e| Error::io(&plot, e))?;
    Ok((out.to_path_buf(), plot))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(returns: &[(u64, f64)]) -> Vec<MetricsRow> {
        returns
            .iter()
            .map(|&(step, r)| MetricsRow {
                step,
                episode: 0,
                eval_return_mean: r,
                eval_return_std: 0.0,
                critic_loss: 0.0,
                reward_model_mse: 0.0,
                qv_loss: 0.0,
                dr_correction_mean: 0.0,
                actor_objective: 0.0,
                wall_ms: 0,
                seed: 0,
            })
            .collect()
    }

    #[test]
    fn two_seeds_population_std() {
        let mut g = BTreeMap::new();
        g.insert(
            "v".to_string(),
            vec![(PathBuf::from("v_0.csv"), rows(&[(1, 10.0)])), (PathBuf::from("v_1.csv"), rows(&[(1, 20.0)]))],
        );
        let s = summarize_groups(&g).unwrap();
        assert_eq!((s[0].mean, s[0].std_pop), (15.0, 5.0));
    }

    #[test]
    fn single_seed_has_zero_std() {
        let mut g = BTreeMap::new();
        g.insert("v".to_string(), vec![(PathBuf::from("v_0.csv"), rows(&[(1, -3.0), (2, 4.0)]))]);
        assert!(summarize_groups(&g).unwrap().iter().all(|r| r.std_pop == 0.0));
    }

    #[test]
    fn misaligned_and_empty_groups_fail() {
        let mut g = BTreeMap::new();
        assert!(matches!(summarize_groups(&g), Err(Error::Alignment(_))));
        g.insert(
            "v".to_string(),
            vec![(PathBuf::from("v_0.csv"), rows(&[(1, 0.0)])), (PathBuf::from("v_1.csv"), rows(&[(2, 0.0)]))],
        );
        assert!(matches!(summarize_groups(&g), Err(Error::Alignment(_))));
        let mut empty = BTreeMap::new();
        empty.insert("w".to_string(), Vec::new());
        assert!(matches!(summarize_groups(&empty), Err(Error::Alignment(_))));
    }

    #[test]
    fn variant_names() {
        assert_eq!(variant_of(Path::new("d/pendulum_ddpg_dr_0.5_3.csv")).as_deref(), Some("pendulum_ddpg_dr_0.5"));
        assert_eq!(variant_of(Path::new("summary.csv")), None);
        assert_eq!(variant_of(Path::new("x_1.plot.csv")), None);
        assert_eq!(plot_path(Path::new("a/summary.csv")), PathBuf::from("a/summary.plot.csv"));
    }
}
