//! KLD-minimizing projection of the updated PMB mixture onto a PMB.
//!
//! Per component, the projected existence is the marginal-weighted sum of
//! the local existences, and the projected density is the marginal-weighted
//! mixture collapsed to a single Gaussian by moment matching. Local
//! hypotheses with zero existence carry no density and are excluded from the
//! moment sums. The intensity of the Poisson part is untouched by the
//! projection.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian;
use crate::types::{BernoulliAll, BernoulliAlive, GaussianTrajectoryDensity};

use super::update::{
    AliveLocalGroup, AllLocalGroup, DetectionLocal, GlobalHypothesis, NewBernoulliLocal,
};

/// Marginal local-hypothesis weights derived from the retained global
/// hypotheses.
#[derive(Debug, Clone)]
pub struct MarginalWeights {
    /// Per prior Bernoulli: `[misdetection, detections...]` in the group's
    /// detection order.
    pub existing: Vec<Vec<f64>>,
    /// Per measurement: weight of the hypothesis that it opened its own
    /// component.
    pub new_open: Vec<f64>,
}

/// Sums global weights per selected local hypothesis.
pub fn compute_marginals(
    globals: &[GlobalHypothesis],
    detection_lists: &[&[DetectionLocal]],
    num_measurements: usize,
) -> MarginalWeights {
    let mut existing: Vec<Vec<f64>> = detection_lists
        .iter()
        .map(|dets| vec![0.0; dets.len() + 1])
        .collect();
    let mut new_open = vec![0.0; num_measurements];
    for hypothesis in globals {
        for (g, assoc) in hypothesis.associations.iter().enumerate() {
            match assoc {
                None => existing[g][0] += hypothesis.weight,
                Some(j) => {
                    let pos = detection_lists[g]
                        .iter()
                        .position(|d| d.meas_idx == *j)
                        .expect("association refers to a gated detection");
                    existing[g][pos + 1] += hypothesis.weight;
                }
            }
        }
        for (j, open) in hypothesis.opens.iter().enumerate() {
            if *open {
                new_open[j] += hypothesis.weight;
            }
        }
    }
    MarginalWeights { existing, new_open }
}

/// Moment matching of a weighted set of Gaussians sharing one dimension.
/// Weights must sum to one. Uses the centered covariance form.
fn match_moments(terms: &[(f64, &DVector<f64>, &DMatrix<f64>)]) -> (DVector<f64>, DMatrix<f64>) {
    let dim = terms[0].1.len();
    let mut mean = DVector::zeros(dim);
    for (w, m, _) in terms {
        mean.axpy(*w, m, 1.0);
    }
    let mut cov = DMatrix::zeros(dim, dim);
    for (w, m, c) in terms {
        cov += *c * *w;
        let d = *m - &mean;
        cov.ger(*w, &d, &d, 1.0);
    }
    gaussian::symmetrize(&mut cov);
    (mean, cov)
}

fn project_new(new: &NewBernoulliLocal, open_weight: f64) -> Option<BernoulliAlive> {
    let density = new.density.as_ref()?;
    let r = (open_weight * new.existence).clamp(0.0, 1.0);
    Some(BernoulliAlive::new(r, density.clone()).expect("valid projected component"))
}

/// Projects the alive-variant mixture onto single-Gaussian Bernoullis.
pub fn project_to_pmb_alive(
    groups: &[AliveLocalGroup],
    news: &[NewBernoulliLocal],
    marginals: &MarginalWeights,
) -> Result<Vec<BernoulliAlive>> {
    if groups.len() != marginals.existing.len() || news.len() != marginals.new_open.len() {
        return Err(Error::DimensionMismatch("marginals do not match local groups".into()));
    }
    let mut out = Vec::with_capacity(groups.len() + news.len());
    for (group, weights) in groups.iter().zip(&marginals.existing) {
        let mut r = weights[0] * group.r_misdet;
        for w in &weights[1..] {
            r += w;
        }
        if r <= 0.0 {
            out.push(BernoulliAlive::new(0.0, group.predicted.clone())?);
            continue;
        }
        let mut terms: Vec<(f64, &DVector<f64>, &DMatrix<f64>)> = Vec::new();
        let mis_coeff = weights[0] * group.r_misdet / r;
        if mis_coeff > 0.0 {
            terms.push((mis_coeff, group.predicted.mean(), group.predicted.cov()));
        }
        for (det, w) in group.detections.iter().zip(&weights[1..]) {
            let coeff = w / r;
            if coeff > 0.0 {
                let cov = group
                    .updated_cov
                    .as_ref()
                    .expect("groups with detections carry the updated covariance");
                terms.push((coeff, &det.mean, cov));
            }
        }
        let (mean, cov) = match_moments(&terms);
        out.push(BernoulliAlive::new(
            r.min(1.0),
            group.predicted.with_mean_cov(mean, cov),
        )?);
    }
    for (new, &w_open) in news.iter().zip(&marginals.new_open) {
        if let Some(b) = project_new(new, w_open) {
            out.push(b);
        }
    }
    Ok(out)
}

/// Projects the all-trajectories mixture: merges the end-time distributions,
/// moment-matches the alive slice and copies the dead slices unchanged.
pub fn project_to_pmb_all(
    groups: &[AllLocalGroup],
    news: &[NewBernoulliLocal],
    marginals: &MarginalWeights,
    current_time: usize,
) -> Result<Vec<BernoulliAll>> {
    if groups.len() != marginals.existing.len() || news.len() != marginals.new_open.len() {
        return Err(Error::DimensionMismatch("marginals do not match local groups".into()));
    }
    let mut out = Vec::with_capacity(groups.len() + news.len());
    for (group, weights) in groups.iter().zip(&marginals.existing) {
        if group.frozen {
            out.push(group.predicted.clone());
            continue;
        }
        let mut r = weights[0] * group.r_misdet;
        for w in &weights[1..] {
            r += w;
        }
        if r <= 0.0 {
            out.push(BernoulliAll::new(
                0.0,
                group.predicted.start_time(),
                group.predicted.betas().to_vec(),
                group.predicted.ends().to_vec(),
            )?);
            continue;
        }

        let slots = group.predicted.betas().len();
        let last = slots - 1;
        debug_assert_eq!(group.predicted.last_end_time(), current_time);

        // End-time distribution merge.
        let mis_coeff = weights[0] * group.r_misdet / r;
        let mut betas: Vec<f64> = group.betas_misdet.iter().map(|b| b * mis_coeff).collect();
        let det_coeff_sum: f64 = weights[1..].iter().sum::<f64>() / r;
        betas[last] += det_coeff_sum;

        // Alive-slice moment matching, weighted by each hypothesis's alive
        // probability mass.
        let predicted_alive = group
            .predicted
            .end_density(current_time)
            .expect("active component carries the alive slot");
        let mut slice_terms: Vec<(f64, &DVector<f64>, &DMatrix<f64>)> = Vec::new();
        let mis_alive_mass =
            weights[0] * group.r_misdet * group.betas_misdet[last];
        let total_mass = mis_alive_mass + weights[1..].iter().sum::<f64>();
        if mis_alive_mass > 0.0 {
            slice_terms.push((mis_alive_mass, predicted_alive.mean(), predicted_alive.cov()));
        }
        for (det, w) in group.detections.iter().zip(&weights[1..]) {
            if *w > 0.0 {
                let cov = group
                    .updated_cov
                    .as_ref()
                    .expect("groups with detections carry the updated covariance");
                slice_terms.push((*w, &det.mean, cov));
            }
        }

        let mut ends = group.predicted.ends().to_vec();
        if total_mass > 0.0 && !slice_terms.is_empty() {
            for t in &mut slice_terms {
                t.0 /= total_mass;
            }
            let (mean, cov) = match_moments(&slice_terms);
            ends[last] = Some(Arc::new(predicted_alive.with_mean_cov(mean, cov)));
        }

        // Guard the normalization against accumulated rounding.
        let sum: f64 = betas.iter().sum();
        if (sum - 1.0).abs() > 1e-12 && sum > 0.0 {
            for b in &mut betas {
                *b /= sum;
            }
        }
        out.push(BernoulliAll::new(r.min(1.0), group.predicted.start_time(), betas, ends)?);
    }
    for (new, &w_open) in news.iter().zip(&marginals.new_open) {
        let Some(density) = new.density.as_ref() else { continue };
        let r = (w_open * new.existence).clamp(0.0, 1.0);
        let slots = density.duration();
        let mut betas = vec![0.0; slots];
        betas[slots - 1] = 1.0;
        let mut ends: Vec<Option<Arc<GaussianTrajectoryDensity>>> = vec![None; slots];
        ends[slots - 1] = Some(Arc::new(density.clone()));
        out.push(BernoulliAll::new(r, density.start_time(), betas, ends)?);
    }
    Ok(out)
}
