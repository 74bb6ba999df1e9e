//! Error norms and multi-trial statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{norm, Field};
use crate::solver::SolveResult;

/// `100 ‖u - u_ref‖ / ‖u_ref‖` over all nodes, boundary included.
pub fn relative_l2_error(u: &Field, u_ref: &Field) -> Result<f64> {
    u.ensure_same_grid(u_ref)?;
    let ref_norm = u_ref.norm();
    if ref_norm == 0.0 {
        return Err(Error::InvalidParameter(
            "reference field has zero norm".into(),
        ));
    }
    Ok(100.0 * l2_distance(u.values(), u_ref.values()) / ref_norm)
}

/// Mean squared nodal difference.
pub fn mse(u: &Field, u_ref: &Field) -> Result<f64> {
    u.ensure_same_grid(u_ref)?;
    let d = l2_distance(u.values(), u_ref.values());
    Ok(d * d / u.values().len() as f64)
}

pub(crate) fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `‖a - b‖ / ‖b‖` without the percent scaling. Zero when both are zero.
pub fn relative_distance(a: &Field, b: &Field) -> Result<f64> {
    a.ensure_same_grid(b)?;
    let d = l2_distance(a.values(), b.values());
    let scale = norm(b.values());
    Ok(if scale == 0.0 { d } else { d / scale })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    /// Percent.
    pub final_rel_l2_error: f64,
    pub wall_time: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    /// Percent.
    pub mean_rel_l2_error: f64,
    /// Percentage points, sample (n-1) standard deviation.
    pub std_rel_l2_error: f64,
    pub mean_wall_time: f64,
    pub std_wall_time: f64,
    pub trial_count: usize,
    /// Set when only one trial was supplied; the standard deviations are then
    /// reported as zero.
    pub degenerate: bool,
    pub trials: Vec<TrialRecord>,
}

impl TrialStats {
    pub fn from_records(trials: Vec<TrialRecord>) -> Result<Self> {
        if trials.is_empty() {
            return Err(Error::InvalidParameter("no trials to aggregate".into()));
        }
        let errors: Vec<f64> = trials.iter().map(|t| t.final_rel_l2_error).collect();
        let times: Vec<f64> = trials.iter().map(|t| t.wall_time).collect();
        let (mean_err, std_err) = mean_std(&errors);
        let (mean_time, std_time) = mean_std(&times);
        Ok(Self {
            mean_rel_l2_error: mean_err,
            std_rel_l2_error: std_err,
            mean_wall_time: mean_time,
            std_wall_time: std_time,
            trial_count: trials.len(),
            degenerate: trials.len() == 1,
            trials,
        })
    }
}

/// Aggregates final errors and wall times of completed solves.
pub fn aggregate_trials(results: &[SolveResult]) -> Result<TrialStats> {
    TrialStats::from_records(
        results
            .iter()
            .map(|r| TrialRecord {
                seed: r.seed,
                final_rel_l2_error: r.final_error(),
                wall_time: r.wall_time,
                iterations: r.iterations(),
            })
            .collect(),
    )
}

/// Sample mean and (n-1) standard deviation; the deviation is zero for a
/// single sample.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
