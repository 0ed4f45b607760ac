//! Metrics CSV rows.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! written file parses back to bit-identical values.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const METRICS_HEADER: &str = "step,episode,eval_return_mean,eval_return_std,critic_loss,reward_model_mse,qv_loss,dr_correction_mean,actor_objective,wall_ms,seed";

/// One evaluation checkpoint. Loss columns are means over the update rounds
/// since the previous row (0 when there were none).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub step: u64,
    pub episode: u64,
    pub eval_return_mean: f64,
    pub eval_return_std: f64,
    pub critic_loss: f64,
    pub reward_model_mse: f64,
    pub qv_loss: f64,
    pub dr_correction_mean: f64,
    pub actor_objective: f64,
    pub wall_ms: u64,
    pub seed: u64,
}

impl MetricsRow {
    pub fn to_csv_line(&self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.step,
            self.episode,
            self.eval_return_mean,
            self.eval_return_std,
            self.critic_loss,
            self.reward_model_mse,
            self.qv_loss,
            self.dr_correction_mean,
            self.actor_objective,
            self.wall_ms,
            self.seed
        );
        s
    }

    pub fn parse_csv_line(line: &str) -> std::result::Result<Self, String> {
        let f: Vec<&str> = line.trim_end_matches('\r').split(',').collect();
        if f.len() != 11 {
            return Err(format!("expected 11 fields, found {}", f.len()));
        }
        let int = |i: usize| f[i].parse::<u64>().map_err(|e| format!("field {}: {e}", i + 1));
        let float = |i: usize| {
            let v = f[i].parse::<f64>().map_err(|e| format!("field {}: {e}", i + 1))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(format!("field {}: non-finite value", i + 1))
            }
        };
        Ok(Self {
            step: int(0)?,
            episode: int(1)?,
            eval_return_mean: float(2)?,
            eval_return_std: float(3)?,
            critic_loss: float(4)?,
            reward_model_mse: float(5)?,
            qv_loss: float(6)?,
            dr_correction_mean: float(7)?,
            actor_objective: float(8)?,
            wall_ms: int(9)?,
            seed: int(10)?,
        })
    }

    pub fn is_finite(&self) -> bool {
        [
            self.eval_return_mean,
            self.eval_return_std,
            self.critic_loss,
            self.reward_model_mse,
            self.qv_loss,
            self.dr_correction_mean,
            self.actor_objective,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

pub fn metrics_to_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv_line());
        out.push('\n');
    }
    out
}

/// Parses a metrics file body; the header must match exactly and steps must
/// increase strictly.
pub fn parse_metrics_csv(text: &str, origin: &Path) -> Result<Vec<MetricsRow>> {
    let format_err = |detail: String| Error::Format {
        path: origin.display().to_string(),
        detail,
    };
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end_matches('\r') == METRICS_HEADER => {}
        _ => return Err(format_err("missing or unexpected header".into())),
    }
    let mut rows: Vec<MetricsRow> = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = MetricsRow::parse_csv_line(line).map_err(|e| format_err(format!("line {}: {e}", i + 2)))?;
        if let Some(prev) = rows.last() {
            if row.step <= prev.step {
                return Err(format_err(format!("line {}: step {} does not increase", i + 2, row.step)));
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_metrics_csv(&text, path)
}
