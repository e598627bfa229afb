//! GOSPA-based error metrics and the RMS aggregations of the benchmark.
//!
//! GOSPA with alpha = 2 decomposes into localization, missed-target and
//! false-target costs. Trajectory errors compare the position slices of
//! truth and estimate at every step up to the current one, normalized by the
//! elapsed time, so improvements to past states (smoothing within the L-scan
//! window) reduce the error.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::assignment::{hungarian_solve, CostMatrix};
use crate::error::{Error, Result};
use crate::types::Trajectory;

/// GOSPA parameters. Only `alpha = 2` is supported, which is the variant
/// whose decomposition assigns unmatched targets a clean missed/false split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricParams {
    pub order: f64,
    pub cutoff: f64,
    pub alpha: f64,
}

impl Default for MetricParams {
    fn default() -> Self {
        Self { order: 2.0, cutoff: 10.0, alpha: 2.0 }
    }
}

impl MetricParams {
    pub fn validate(&self) -> Result<()> {
        if self.order < 1.0 {
            return Err(Error::InvalidParameter("metric order must be >= 1".into()));
        }
        if !(self.cutoff.is_finite() && self.cutoff > 0.0) {
            return Err(Error::InvalidParameter("metric cutoff must be > 0".into()));
        }
        if self.alpha != 2.0 {
            return Err(Error::InvalidParameter("only alpha = 2 is supported".into()));
        }
        Ok(())
    }
}

/// GOSPA value together with its decomposition. Each field is the p-th root
/// of that term's contribution to the p-th power of the metric, so
/// `total^p = localization^p + missed^p + false^p`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GospaResult {
    pub total: f64,
    pub localization: f64,
    pub missed: f64,
    pub false_: f64,
}

impl GospaResult {
    fn from_powers(order: f64, loc_p: f64, missed_p: f64, false_p: f64) -> Self {
        let inv = 1.0 / order;
        Self {
            total: (loc_p + missed_p + false_p).powf(inv),
            localization: loc_p.powf(inv),
            missed: missed_p.powf(inv),
            false_: false_p.powf(inv),
        }
    }

    /// The p-th power of the total, the additive quantity.
    pub fn total_power(&self, order: f64) -> f64 {
        self.total.powf(order)
    }
}

/// GOSPA distance between two finite sets of position vectors.
///
/// Pairs are matched by a minimum-cost assignment over cutoff-truncated
/// distances; matched pairs beyond the cutoff count as one missed and one
/// false target, which for alpha = 2 costs the same as the truncated pair.
pub fn gospa(truth: &[DVector<f64>], est: &[DVector<f64>], params: &MetricParams) -> Result<GospaResult> {
    params.validate()?;
    let p = params.order;
    let c = params.cutoff;
    let unmatched_p = c.powf(p) / params.alpha;

    if let Some(first) = truth.first().or_else(|| est.first()) {
        let dim = first.len();
        if truth.iter().chain(est.iter()).any(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch(
                "all position vectors must share one dimension".into(),
            ));
        }
    }
    if truth.is_empty() && est.is_empty() {
        return Ok(GospaResult::default());
    }
    if truth.is_empty() || est.is_empty() {
        let missed = truth.len() as f64 * unmatched_p;
        let false_ = est.len() as f64 * unmatched_p;
        return Ok(GospaResult::from_powers(p, 0.0, missed, false_));
    }

    // Assignment over truncated distances; rows must not outnumber columns.
    // The matching itself is orientation-free.
    let (rows, cols) = if truth.len() <= est.len() { (truth, est) } else { (est, truth) };
    let mut costs = DMatrix::zeros(rows.len(), cols.len());
    for (i, a) in rows.iter().enumerate() {
        for (j, b) in cols.iter().enumerate() {
            costs[(i, j)] = (a - b).norm().min(c).powf(p);
        }
    }
    let assignment = hungarian_solve(&CostMatrix::dense(costs)?)?;

    let mut loc_p = 0.0;
    let mut matched_within = 0usize;
    for (i, &j) in assignment.row_to_col.iter().enumerate() {
        let d = (&rows[i] - &cols[j]).norm();
        if d < c {
            loc_p += d.powf(p);
            matched_within += 1;
        }
    }
    let missed_p = (truth.len() - matched_within) as f64 * unmatched_p;
    let false_p = (est.len() - matched_within) as f64 * unmatched_p;
    Ok(GospaResult::from_powers(p, loc_p, missed_p, false_p))
}

/// Extracts the listed coordinates of a state vector.
pub fn position_of(state: &DVector<f64>, position_indices: &[usize]) -> DVector<f64> {
    DVector::from_iterator(position_indices.len(), position_indices.iter().map(|&i| state[i]))
}

fn positions_at(
    trajectories: &[Trajectory],
    k: usize,
    position_indices: &[usize],
) -> Vec<DVector<f64>> {
    trajectories
        .iter()
        .filter_map(|t| t.state_at(k).map(|s| position_of(s, position_indices)))
        .collect()
}

/// Per-step squared trajectory error with its decomposition, all already
/// divided by the elapsed time `k`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SnapshotError {
    pub total_sq: f64,
    pub localization_sq: f64,
    pub missed_sq: f64,
    pub false_sq: f64,
}

/// Squared trajectory error at step `k`: the sum over steps `1..=k` of the
/// squared GOSPA between the position slices of truth and estimate, divided
/// by `k`. States absent at a step count as missed or false targets.
pub fn trajectory_snapshot_error(
    truth: &[Trajectory],
    est: &[Trajectory],
    k: usize,
    params: &MetricParams,
    position_indices: &[usize],
) -> Result<SnapshotError> {
    if k == 0 {
        return Err(Error::InvalidParameter("time step must be >= 1".into()));
    }
    let p = params.order;
    let mut acc = SnapshotError::default();
    for step in 1..=k {
        let t = positions_at(truth, step, position_indices);
        let e = positions_at(est, step, position_indices);
        let g = gospa(&t, &e, params)?;
        acc.total_sq += g.total.powf(p);
        acc.localization_sq += g.localization.powf(p);
        acc.missed_sq += g.missed.powf(p);
        acc.false_sq += g.false_.powf(p);
    }
    let norm = k as f64;
    acc.total_sq /= norm;
    acc.localization_sq /= norm;
    acc.missed_sq /= norm;
    acc.false_sq /= norm;
    Ok(acc)
}

/// RMS error over Monte Carlo runs at one time step:
/// `sqrt(sum_i d2_i / (n_runs * k))`, where each `d2_i` is the un-normalized
/// squared error (the `1/k` is applied here exactly once).
pub fn rms_over_runs(squared_errors: &[f64], n_runs: usize, k: usize) -> Result<f64> {
    if n_runs == 0 || k == 0 {
        return Err(Error::InvalidParameter("n_runs and k must be >= 1".into()));
    }
    if squared_errors.len() != n_runs {
        return Err(Error::DimensionMismatch(format!(
            "{} errors for {} runs",
            squared_errors.len(),
            n_runs
        )));
    }
    Ok((squared_errors.iter().sum::<f64>() / (n_runs as f64 * k as f64)).sqrt())
}

/// RMS error over the whole horizon: `sqrt(mean of d(k)^2)`.
pub fn rms_total(per_step_rms: &[f64]) -> Result<f64> {
    if per_step_rms.is_empty() {
        return Err(Error::EmptyInput("rms_total needs at least one step".into()));
    }
    let n = per_step_rms.len() as f64;
    Ok((per_step_rms.iter().map(|d| d * d).sum::<f64>() / n).sqrt())
}
