//! Prediction step for both problem formulations.
//!
//! A trajectory density of duration `d` is extended to duration `d + 1` by
//! appending the transitioned last state: the new mean block is `F x_last`
//! and the covariance gains a rightmost block column `P_last F'`, with
//! `F P_ll F' + Q` in the corner.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian;
use crate::models::{BirthModel, MotionModel};
use crate::types::{
    BernoulliAlive, BernoulliAll, BernoulliSet, GaussianTrajectoryDensity, IntensityComponent,
    PmbPosterior, PoissonIntensity,
};

/// Appends one predicted state to a stacked trajectory density.
pub(crate) fn extend_density(
    density: &GaussianTrajectoryDensity,
    motion: &MotionModel,
) -> Result<GaussianTrajectoryDensity> {
    let nx = motion.state_dim();
    if density.state_dim() != nx {
        return Err(Error::DimensionMismatch(format!(
            "density state dim {} vs motion model {}",
            density.state_dim(),
            nx
        )));
    }
    let dur = density.duration();
    let dim = dur * nx;
    let f = motion.transition();
    let q = motion.process_noise();

    let mean = density.mean();
    let cov = density.cov();
    let last_mean = mean.rows((dur - 1) * nx, nx);
    let new_last = f * last_mean;

    let mut new_mean = DVector::zeros(dim + nx);
    new_mean.rows_mut(0, dim).copy_from(mean);
    new_mean.rows_mut(dim, nx).copy_from(&new_last);

    // Cross block: P[:, last] F'.
    let last_cols = cov.columns((dur - 1) * nx, nx);
    let cross = last_cols * f.transpose();
    let p_ll = cov.view(((dur - 1) * nx, (dur - 1) * nx), (nx, nx));
    let corner = f * p_ll * f.transpose() + q;

    let mut new_cov = DMatrix::zeros(dim + nx, dim + nx);
    new_cov.view_mut((0, 0), (dim, dim)).copy_from(cov);
    new_cov.view_mut((0, dim), (dim, nx)).copy_from(&cross);
    new_cov.view_mut((dim, 0), (nx, dim)).copy_from(&cross.transpose());
    new_cov.view_mut((dim, dim), (nx, nx)).copy_from(&corner);
    gaussian::symmetrize(&mut new_cov);

    GaussianTrajectoryDensity::new(density.start_time(), new_mean, new_cov, nx)
}

/// Predicted Poisson intensity: births at the new step plus the surviving,
/// extended prior components. The intensity only carries alive trajectories,
/// so this is shared by both variants.
fn predict_poisson(
    poisson: &PoissonIntensity,
    motion: &MotionModel,
    birth: &BirthModel,
    k: usize,
) -> Result<PoissonIntensity> {
    let mut components = Vec::with_capacity(poisson.len() + birth.at_step(k).len());
    for b in birth.at_step(k) {
        components.push(IntensityComponent {
            weight: b.weight,
            density: GaussianTrajectoryDensity::single(k, b.mean.clone(), b.cov.clone())?,
        });
    }
    let p_s = motion.p_survival();
    for c in poisson.components() {
        components.push(IntensityComponent {
            weight: p_s * c.weight,
            density: extend_density(&c.density, motion)?,
        });
    }
    PoissonIntensity::new(components)
}

/// Prediction for the alive-trajectories variant: existence scales by the
/// survival probability and every density is extended by one step.
pub fn predict_alive(
    posterior: &PmbPosterior,
    motion: &MotionModel,
    birth: &BirthModel,
) -> Result<PmbPosterior> {
    let list = posterior.alive_bernoullis().ok_or_else(|| {
        Error::InvalidParameter("predict_alive requires an alive-variant posterior".into())
    })?;
    let k = posterior.time() + 1;
    let p_s = motion.p_survival();

    let bernoullis = list
        .iter()
        .map(|b| {
            BernoulliAlive::new(p_s * b.existence(), extend_density(b.density(), motion)?)
        })
        .collect::<Result<Vec<_>>>()?;

    PmbPosterior::new(
        k,
        predict_poisson(posterior.poisson(), motion, birth, k)?,
        BernoulliSet::Alive(bernoullis),
    )
}

/// Prediction for the all-trajectories variant.
///
/// Existence is unchanged; the end-time distribution moves mass from "alive
/// at k-1" to "alive at k" with probability `p_s`, and the remainder stays as
/// a death at k-1. Dead hypotheses are untouched. Frozen components (zero
/// alive probability) are returned unchanged.
pub fn predict_all(
    posterior: &PmbPosterior,
    motion: &MotionModel,
    birth: &BirthModel,
) -> Result<PmbPosterior> {
    let list = posterior.all_bernoullis().ok_or_else(|| {
        Error::InvalidParameter("predict_all requires an all-variant posterior".into())
    })?;
    let prev = posterior.time();
    let k = prev + 1;
    let p_s = motion.p_survival();

    let bernoullis = list
        .iter()
        .map(|b| -> Result<BernoulliAll> {
            if b.is_frozen_at(prev) {
                return Ok(b.clone());
            }
            let alive_prev = b.beta_at(prev);
            let alive_density = b
                .end_density(prev)
                .ok_or_else(|| Error::InvalidParameter("alive slot lacks a density".into()))?;

            let mut betas = b.betas().to_vec();
            let mut ends: Vec<Option<Arc<GaussianTrajectoryDensity>>> = b.ends().to_vec();
            let last = betas.len() - 1;
            betas[last] = (1.0 - p_s) * alive_prev;
            betas.push(p_s * alive_prev);
            ends.push(Some(Arc::new(extend_density(alive_density, motion)?)));

            BernoulliAll::new(b.existence(), b.start_time(), betas, ends)
        })
        .collect::<Result<Vec<_>>>()?;

    PmbPosterior::new(
        k,
        predict_poisson(posterior.poisson(), motion, birth, k)?,
        BernoulliSet::All(bernoullis),
    )
}
