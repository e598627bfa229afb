//! Trajectory PMB filter engine.
//!
//! The recursion per time step is: predict, L-scan truncation of all stored
//! covariances, Bayesian update (which yields a PMB mixture), projection back
//! to a PMB, then pruning. [`TpmbFilter`] wires these together; the
//! individual operations are exposed for testing and reuse.

mod predict;
mod project;
mod update;

pub use predict::{predict_all, predict_alive};
pub use project::{compute_marginals, project_to_pmb_all, project_to_pmb_alive, MarginalWeights};
pub use update::{
    update, update_gnn, AllLocalGroup, AliveLocalGroup, DetectionLocal, GlobalHypothesis,
    NewBernoulliLocal, UpdateDiagnostics, UpdateLocals, UpdateOutput,
};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{BirthModel, MotionModel, SensorModel};
use crate::types::{BernoulliSet, GaussianTrajectoryDensity, PmbPosterior, PoissonIntensity, Trajectory};

/// Tuning knobs of the filter recursion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterParams {
    /// Maximum number of global hypotheses kept per update.
    pub max_hypotheses: usize,
    /// Poisson components below this weight are dropped.
    pub poisson_prune: f64,
    /// Bernoulli components below this existence probability are dropped.
    pub existence_prune: f64,
    /// All-trajectories variant: alive probabilities below this are zeroed
    /// and the component is frozen.
    pub alive_freeze: f64,
    /// Components are reported when existence exceeds this.
    pub estimate_threshold: f64,
    /// Number of most recent steps kept jointly correlated.
    pub lscan_window: usize,
    /// Ellipsoidal gate on the normalized innovation squared.
    pub gate_threshold: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            max_hypotheses: 200,
            poisson_prune: 1e-5,
            existence_prune: 1e-5,
            alive_freeze: 1e-4,
            estimate_threshold: 0.5,
            lscan_window: 5,
            gate_threshold: 13.8,
        }
    }
}

impl FilterParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_hypotheses == 0 {
            return Err(Error::InvalidParameter("max_hypotheses must be >= 1".into()));
        }
        if self.lscan_window == 0 {
            return Err(Error::InvalidParameter("lscan_window must be >= 1".into()));
        }
        for (name, v) in [
            ("poisson_prune", self.poisson_prune),
            ("existence_prune", self.existence_prune),
            ("alive_freeze", self.alive_freeze),
            ("estimate_threshold", self.estimate_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if !(self.gate_threshold.is_finite() && self.gate_threshold > 0.0) {
            return Err(Error::InvalidParameter("gate_threshold must be > 0".into()));
        }
        Ok(())
    }
}

// ============================================================================
// L-scan truncation
// ============================================================================

/// Zeroes cross-covariances between states older than the last `window`
/// steps and everything else, leaving diagonal blocks untouched. States
/// outside the window become independent and are no longer revised by new
/// measurements. Returns `None` when the matrix is already in truncated
/// form.
fn lscan_matrix(
    cov: &DMatrix<f64>,
    start_time: usize,
    state_dim: usize,
    current_time: usize,
    window: usize,
) -> Option<DMatrix<f64>> {
    let duration = cov.nrows() / state_dim;
    // First time step that stays inside the window.
    let cut_time = (current_time + 1).saturating_sub(window);
    if cut_time <= start_time {
        return None;
    }
    let old_blocks = (cut_time - start_time).min(duration);
    if old_blocks == 0 {
        return None;
    }
    let d = state_dim;
    let already_zero = (0..old_blocks).all(|i| {
        (0..duration).all(|j| {
            i == j || cov.view((i * d, j * d), (d, d)).iter().all(|v| *v == 0.0)
        })
    });
    if already_zero {
        return None;
    }
    let mut out = cov.clone();
    for i in 0..old_blocks {
        for j in 0..duration {
            if i != j {
                out.view_mut((i * d, j * d), (d, d)).fill(0.0);
                out.view_mut((j * d, i * d), (d, d)).fill(0.0);
            }
        }
    }
    Some(out)
}

fn lscan_density(
    density: &GaussianTrajectoryDensity,
    current_time: usize,
    window: usize,
) -> GaussianTrajectoryDensity {
    match lscan_matrix(
        density.cov(),
        density.start_time(),
        density.state_dim(),
        current_time,
        window,
    ) {
        None => density.clone(),
        Some(cov) => density.with_cov(cov),
    }
}

/// Applies the L-scan covariance truncation to every stored covariance of
/// the posterior. Means are untouched. Idempotent.
pub fn lscan_truncate(posterior: &PmbPosterior, window: usize) -> Result<PmbPosterior> {
    if window == 0 {
        return Err(Error::InvalidParameter("lscan window must be >= 1".into()));
    }
    let k = posterior.time();
    let poisson = PoissonIntensity::new(
        posterior
            .poisson()
            .components()
            .iter()
            .map(|c| crate::types::IntensityComponent {
                weight: c.weight,
                density: lscan_density(&c.density, k, window),
            })
            .collect(),
    )?;
    let bernoullis = match posterior.bernoullis() {
        BernoulliSet::Alive(list) => BernoulliSet::Alive(
            list.iter()
                .map(|b| {
                    crate::types::BernoulliAlive::new(
                        b.existence(),
                        lscan_density(b.density(), k, window),
                    )
                })
                .collect::<Result<Vec<_>>>()?,
        ),
        BernoulliSet::All(list) => BernoulliSet::All(
            list.iter()
                .map(|b| {
                    let ends = b
                        .ends()
                        .iter()
                        .map(|e| {
                            e.as_ref().map(|d| {
                                match lscan_matrix(
                                    d.cov(),
                                    d.start_time(),
                                    d.state_dim(),
                                    k,
                                    window,
                                ) {
                                    // Unchanged slots keep their shared storage.
                                    None => d.clone(),
                                    Some(cov) => std::sync::Arc::new(d.with_cov(cov)),
                                }
                            })
                        })
                        .collect();
                    crate::types::BernoulliAll::new(
                        b.existence(),
                        b.start_time(),
                        b.betas().to_vec(),
                        ends,
                    )
                })
                .collect::<Result<Vec<_>>>()?,
        ),
    };
    PmbPosterior::new(k, poisson, bernoullis)
}

// ============================================================================
// Estimation
// ============================================================================

/// Reports the trajectories of components whose existence probability
/// strictly exceeds the threshold.
///
/// Alive variant: the full stacked mean. All variant: the mean of the most
/// likely end time, ties resolved to the latest one.
pub fn estimate(posterior: &PmbPosterior, threshold: f64) -> Result<Vec<Trajectory>> {
    let mut out = Vec::new();
    match posterior.bernoullis() {
        BernoulliSet::Alive(list) => {
            for b in list {
                if b.existence() > threshold {
                    out.push(Trajectory::from_stacked(
                        b.start_time(),
                        b.density().mean(),
                        b.density().state_dim(),
                    )?);
                }
            }
        }
        BernoulliSet::All(list) => {
            for b in list {
                if b.existence() > threshold {
                    let mut best = 0usize;
                    for (j, beta) in b.betas().iter().enumerate() {
                        if *beta >= b.betas()[best] {
                            best = j;
                        }
                    }
                    let density = b.ends()[best].as_ref().ok_or_else(|| {
                        Error::InvalidParameter(
                            "most likely end time has no stored density".into(),
                        )
                    })?;
                    out.push(Trajectory::from_stacked(
                        b.start_time(),
                        density.mean(),
                        density.state_dim(),
                    )?);
                }
            }
        }
    }
    Ok(out)
}

// ============================================================================
// Filter driver
// ============================================================================

/// Which set of trajectories the filter estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    Alive,
    All,
}

/// One filter instance driving the per-step recursion.
#[derive(Debug, Clone)]
pub struct TpmbFilter {
    variant: Variant,
    /// Keep only the single best global hypothesis per update.
    gnn: bool,
    params: FilterParams,
    motion: MotionModel,
    birth: BirthModel,
    sensor: SensorModel,
    posterior: PmbPosterior,
}

impl TpmbFilter {
    pub fn new(
        variant: Variant,
        gnn: bool,
        params: FilterParams,
        motion: MotionModel,
        birth: BirthModel,
        sensor: SensorModel,
    ) -> Result<Self> {
        params.validate()?;
        let posterior = match variant {
            Variant::Alive => PmbPosterior::empty_alive(),
            Variant::All => PmbPosterior::empty_all(),
        };
        Ok(Self { variant, gnn, params, motion, birth, sensor, posterior })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn params(&self) -> &FilterParams {
        &self.params
    }

    pub fn posterior(&self) -> &PmbPosterior {
        &self.posterior
    }

    pub fn time(&self) -> usize {
        self.posterior.time()
    }

    /// Advances the filter by one time step with the given measurement set.
    pub fn step(&mut self, measurements: &[nalgebra::DVector<f64>]) -> Result<UpdateDiagnostics> {
        let predicted = match self.variant {
            Variant::Alive => predict_alive(&self.posterior, &self.motion, &self.birth)?,
            Variant::All => predict_all(&self.posterior, &self.motion, &self.birth)?,
        };
        let truncated = lscan_truncate(&predicted, self.params.lscan_window)?;
        let out = if self.gnn {
            update_gnn(&truncated, &self.sensor, measurements, &self.params)?
        } else {
            update(&truncated, &self.sensor, measurements, &self.params)?
        };
        self.posterior = out.posterior;
        Ok(out.diagnostics)
    }

    /// Current trajectory estimate.
    pub fn estimates(&self) -> Result<Vec<Trajectory>> {
        estimate(&self.posterior, self.params.estimate_threshold)
    }
}
