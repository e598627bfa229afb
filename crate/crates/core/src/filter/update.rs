//! Measurement update: local hypothesis construction, ranked assignment over
//! global hypotheses, KLD projection back to a PMB, and pruning.
//!
//! Weight bookkeeping is done in the log domain. Impossible hypotheses (for
//! example the misdetection of a certainly-detected component) are floored at
//! a large negative log weight instead of negative infinity so the ranked
//! assignment problem stays feasible; the floor is applied consistently to
//! costs and to the reconstructed hypothesis weights.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::assignment::{murty_kbest, CostMatrix, FORBIDDEN_COST};
use crate::error::{Error, Result};
use crate::gaussian::{self, LN_2PI};
use crate::models::{linearize_measurement, SensorModel};
use crate::types::{
    BernoulliAll, BernoulliSet, GaussianTrajectoryDensity, IntensityComponent, PmbPosterior,
    PoissonIntensity,
};

use super::project::{compute_marginals, project_to_pmb_all, project_to_pmb_alive, MarginalWeights};
use super::FilterParams;

/// Floor for local-hypothesis log weights; keeps assignment costs finite.
pub(crate) const MIN_LOG_WEIGHT: f64 = -700.0;

// ============================================================================
// Local hypothesis containers
// ============================================================================

/// One detection hypothesis: the component claims measurement `meas_idx`.
///
/// All detection hypotheses of a group share the same updated covariance, so
/// only the updated mean is stored per measurement.
#[derive(Debug, Clone)]
pub struct DetectionLocal {
    pub meas_idx: usize,
    pub log_weight: f64,
    pub mean: DVector<f64>,
}

/// Local hypotheses of one prior Bernoulli, alive variant.
#[derive(Debug, Clone)]
pub struct AliveLocalGroup {
    /// Predicted density; the misdetection hypothesis keeps it unchanged.
    pub predicted: GaussianTrajectoryDensity,
    pub prior_existence: f64,
    pub log_w_misdet: f64,
    pub r_misdet: f64,
    /// Shared covariance of all detection hypotheses.
    pub updated_cov: Option<DMatrix<f64>>,
    pub detections: Vec<DetectionLocal>,
}

/// Local hypotheses of one prior Bernoulli, all-trajectories variant.
///
/// Dead end-time slots are shared across hypotheses; only the alive slice is
/// measurement-dependent.
#[derive(Debug, Clone)]
pub struct AllLocalGroup {
    pub predicted: BernoulliAll,
    pub log_w_misdet: f64,
    pub r_misdet: f64,
    /// Misdetection end-time distribution (alive mass scaled by `1 - p_d`).
    pub betas_misdet: Vec<f64>,
    pub updated_cov: Option<DMatrix<f64>>,
    pub detections: Vec<DetectionLocal>,
    /// Frozen components keep exactly one local hypothesis and no columns in
    /// the assignment problem.
    pub frozen: bool,
}

/// The two local hypotheses of a measurement-initiated component: an empty
/// one (weight 1, existence 0) and the detection itself.
#[derive(Debug, Clone)]
pub struct NewBernoulliLocal {
    pub meas_idx: usize,
    pub log_weight: f64,
    pub existence: f64,
    /// Absorbed posterior density; absent when no intensity component gated
    /// the measurement (existence is then zero).
    pub density: Option<GaussianTrajectoryDensity>,
}

/// One retained global hypothesis.
#[derive(Debug, Clone)]
pub struct GlobalHypothesis {
    /// Per prior Bernoulli: the claimed measurement, if any.
    pub associations: Vec<Option<usize>>,
    /// Per measurement: true when it initiates its own component.
    pub opens: Vec<bool>,
    /// Unnormalized log weight (sum of selected local log weights).
    pub log_weight: f64,
    /// Weight normalized over the retained hypothesis set.
    pub weight: f64,
}

/// Local hypotheses grouped per component, for either variant.
#[derive(Debug, Clone)]
pub enum UpdateLocals {
    Alive { groups: Vec<AliveLocalGroup>, news: Vec<NewBernoulliLocal> },
    All { groups: Vec<AllLocalGroup>, news: Vec<NewBernoulliLocal> },
}

/// Everything the update produced besides the projected posterior; enough to
/// rebuild the exact PMB mixture for verification.
#[derive(Debug, Clone)]
pub struct UpdateDiagnostics {
    pub time: usize,
    pub globals: Vec<GlobalHypothesis>,
    pub marginals: MarginalWeights,
    pub locals: UpdateLocals,
    /// Thinned (not yet pruned) Poisson intensity of the update output.
    pub poisson: PoissonIntensity,
}

#[derive(Debug, Clone)]
pub struct UpdateOutput {
    pub posterior: PmbPosterior,
    pub diagnostics: UpdateDiagnostics,
}

impl UpdateDiagnostics {
    /// Rebuilds the exact PMB mixture this update produced, in the explicit
    /// form consumed by the brute-force evaluators.
    pub fn to_pmbm_density(&self) -> Result<crate::oracle::PmbmDensity> {
        use crate::oracle::{MixtureDensity, OracleLocal, PmbmDensity};

        let mut locals: Vec<Vec<OracleLocal>> = Vec::new();
        match &self.locals {
            UpdateLocals::Alive { groups, news } => {
                for group in groups {
                    let mut list = vec![OracleLocal {
                        weight: group.log_w_misdet.exp(),
                        existence: group.r_misdet,
                        density: Some(MixtureDensity::single(group.predicted.clone())),
                    }];
                    for det in &group.detections {
                        let cov = group.updated_cov.as_ref().expect("updated covariance");
                        list.push(OracleLocal {
                            weight: det.log_weight.exp(),
                            existence: 1.0,
                            density: Some(MixtureDensity::single(
                                group.predicted.with_mean_cov(det.mean.clone(), cov.clone()),
                            )),
                        });
                    }
                    locals.push(list);
                }
                for new in news {
                    locals.push(new_local_pair(new));
                }
            }
            UpdateLocals::All { groups, news } => {
                for group in groups {
                    let mut mixture = Vec::new();
                    for (j, beta) in group.betas_misdet.iter().enumerate() {
                        if *beta > 0.0 {
                            let d = group.predicted.ends()[j]
                                .as_deref()
                                .expect("positive-mass slot has a density");
                            mixture.push((*beta, d.clone()));
                        }
                    }
                    let mut list = vec![OracleLocal {
                        weight: group.log_w_misdet.exp(),
                        existence: group.r_misdet,
                        density: Some(MixtureDensity::new(mixture)?),
                    }];
                    let alive = group.predicted.end_density(self.time);
                    for det in &group.detections {
                        let cov = group.updated_cov.as_ref().expect("updated covariance");
                        let base = alive.expect("detections require an alive slot");
                        list.push(OracleLocal {
                            weight: det.log_weight.exp(),
                            existence: 1.0,
                            density: Some(MixtureDensity::single(
                                base.with_mean_cov(det.mean.clone(), cov.clone()),
                            )),
                        });
                    }
                    locals.push(list);
                }
                for new in news {
                    locals.push(new_local_pair(new));
                }
            }
        }

        let num_groups = locals.len() - self.marginals.new_open.len();
        let globals = self
            .globals
            .iter()
            .map(|g| {
                let mut a = Vec::with_capacity(locals.len());
                for (group_idx, assoc) in g.associations.iter().enumerate() {
                    let idx = match assoc {
                        None => 0,
                        Some(j) => {
                            let dets = detection_positions(&self.locals, group_idx);
                            1 + dets.iter().position(|d| d == j).expect("gated detection")
                        }
                    };
                    a.push(idx);
                }
                for open in &g.opens {
                    a.push(if *open { 1 } else { 0 });
                }
                debug_assert_eq!(a.len(), num_groups + g.opens.len());
                (a, g.weight)
            })
            .collect();

        PmbmDensity::new(self.poisson.clone(), locals, globals)
    }
}

fn detection_positions(locals: &UpdateLocals, group_idx: usize) -> Vec<usize> {
    match locals {
        UpdateLocals::Alive { groups, .. } => {
            groups[group_idx].detections.iter().map(|d| d.meas_idx).collect()
        }
        UpdateLocals::All { groups, .. } => {
            groups[group_idx].detections.iter().map(|d| d.meas_idx).collect()
        }
    }
}

fn new_local_pair(new: &NewBernoulliLocal) -> Vec<crate::oracle::OracleLocal> {
    use crate::oracle::{MixtureDensity, OracleLocal};
    vec![
        OracleLocal { weight: 1.0, existence: 0.0, density: None },
        OracleLocal {
            weight: new.log_weight.exp(),
            existence: new.existence,
            density: new.density.clone().map(MixtureDensity::single),
        },
    ]
}

// ============================================================================
// Measurement-update template
// ============================================================================

/// Kalman quantities shared by all detection hypotheses of one density:
/// predicted measurement, innovation covariance, gain and updated covariance.
struct UpdateTemplate {
    z_pred: DVector<f64>,
    innovation_chol: Cholesky<f64, Dyn>,
    gain: DMatrix<f64>,
    updated_cov: DMatrix<f64>,
    log_norm: f64,
}

impl UpdateTemplate {
    /// Builds the template by linearizing the sensor at the density's
    /// last-state mean.
    fn new(density: &GaussianTrajectoryDensity, sensor: &SensorModel) -> Result<Self> {
        let nx = density.state_dim();
        let dur = density.duration();
        let dim = dur * nx;
        let x_last = density.mean().rows((dur - 1) * nx, nx).into_owned();
        let (h_eff, offset) = linearize_measurement(sensor, &x_last)?;
        let n_z = h_eff.nrows();

        let z_pred = &h_eff * &x_last + &offset;
        let p = density.cov();
        // P Hbar' where Hbar acts on the last state block only.
        let last_cols = p.columns((dur - 1) * nx, nx);
        let pht = last_cols * h_eff.transpose(); // dim x n_z
        let p_ll = p.view(((dur - 1) * nx, (dur - 1) * nx), (nx, nx));
        let mut innovation = &h_eff * p_ll * h_eff.transpose() + sensor.noise();
        gaussian::symmetrize(&mut innovation);
        let innovation_chol = Cholesky::new(innovation).ok_or_else(|| {
            Error::NonPsdCovariance("innovation covariance is not positive definite".into())
        })?;
        let log_det = 2.0
            * innovation_chol
                .l_dirty()
                .diagonal()
                .iter()
                .map(|d| d.ln())
                .sum::<f64>();
        let log_norm = -0.5 * (n_z as f64 * LN_2PI + log_det);

        // Gain K = P Hbar' S^-1, via S K' = (P Hbar')'.
        let gain = innovation_chol.solve(&pht.transpose()).transpose();
        let mut updated_cov = p - &gain * pht.transpose();
        gaussian::symmetrize(&mut updated_cov);
        debug_assert_eq!(updated_cov.nrows(), dim);

        Ok(Self { z_pred, innovation_chol, gain, updated_cov, log_norm })
    }

    /// Wrapped innovation, its squared Mahalanobis norm and log likelihood.
    fn score(&self, z: &DVector<f64>, sensor: &SensorModel) -> (DVector<f64>, f64, f64) {
        let resid = sensor.wrap_residual(z - &self.z_pred);
        let solved = self.innovation_chol.solve(&resid);
        let d2 = resid.dot(&solved);
        (resid, d2, self.log_norm - 0.5 * d2)
    }

    fn updated_mean(&self, prior_mean: &DVector<f64>, resid: &DVector<f64>) -> DVector<f64> {
        prior_mean + &self.gain * resid
    }
}

fn floor_log(w: f64) -> f64 {
    if w.is_nan() {
        MIN_LOG_WEIGHT
    } else {
        w.max(MIN_LOG_WEIGHT)
    }
}

fn ln_or_floor(w: f64) -> f64 {
    if w > 0.0 {
        floor_log(w.ln())
    } else {
        MIN_LOG_WEIGHT
    }
}

// ============================================================================
// Local hypothesis construction
// ============================================================================

fn build_alive_groups(
    posterior: &PmbPosterior,
    sensor: &SensorModel,
    measurements: &[DVector<f64>],
    params: &FilterParams,
) -> Result<Vec<AliveLocalGroup>> {
    let list = posterior.alive_bernoullis().expect("alive variant");
    let p_d = sensor.p_detect();
    let mut groups = Vec::with_capacity(list.len());
    for b in list {
        let r = b.existence();
        let w_mis = 1.0 - r * p_d;
        let denom = w_mis;
        let r_mis = if denom > 0.0 { (r * (1.0 - p_d)) / denom } else { 1.0 };

        let mut detections = Vec::new();
        let mut updated_cov = None;
        if p_d > 0.0 && !measurements.is_empty() {
            let template = UpdateTemplate::new(b.density(), sensor)?;
            for (j, z) in measurements.iter().enumerate() {
                let (resid, d2, log_pdf) = template.score(z, sensor);
                if d2 <= params.gate_threshold {
                    detections.push(DetectionLocal {
                        meas_idx: j,
                        log_weight: floor_log(r.ln() + p_d.ln() + log_pdf),
                        mean: template.updated_mean(b.density().mean(), &resid),
                    });
                }
            }
            if !detections.is_empty() {
                updated_cov = Some(template.updated_cov);
            }
        }
        groups.push(AliveLocalGroup {
            predicted: b.density().clone(),
            prior_existence: r,
            log_w_misdet: ln_or_floor(w_mis),
            r_misdet: r_mis.clamp(0.0, 1.0),
            updated_cov,
            detections,
        });
    }
    Ok(groups)
}

fn build_all_groups(
    posterior: &PmbPosterior,
    sensor: &SensorModel,
    measurements: &[DVector<f64>],
    params: &FilterParams,
) -> Result<Vec<AllLocalGroup>> {
    let list = posterior.all_bernoullis().expect("all variant");
    let k = posterior.time();
    let p_d = sensor.p_detect();
    let mut groups = Vec::with_capacity(list.len());
    for b in list {
        if b.is_frozen_at(k) {
            groups.push(AllLocalGroup {
                predicted: b.clone(),
                log_w_misdet: 0.0,
                r_misdet: b.existence(),
                betas_misdet: b.betas().to_vec(),
                updated_cov: None,
                detections: Vec::new(),
                frozen: true,
            });
            continue;
        }
        let r = b.existence();
        let beta_k = b.beta_at(k);
        let w_mis = 1.0 - r * beta_k * p_d;
        let denom = w_mis;
        let r_mis = if denom > 0.0 { (r * (1.0 - beta_k * p_d)) / denom } else { 1.0 };
        // Misdetection scales the alive mass by (1 - p_d) and renormalizes.
        let mis_norm = 1.0 - beta_k * p_d;
        let mut betas_misdet: Vec<f64> = b.betas().iter().map(|v| v / mis_norm).collect();
        let last = betas_misdet.len() - 1;
        betas_misdet[last] = (1.0 - p_d) * beta_k / mis_norm;

        let alive_density = b
            .end_density(k)
            .ok_or_else(|| Error::InvalidParameter("active component lacks an alive slot".into()))?;
        let mut detections = Vec::new();
        let mut updated_cov = None;
        if p_d > 0.0 && beta_k > 0.0 && !measurements.is_empty() {
            let template = UpdateTemplate::new(alive_density, sensor)?;
            for (j, z) in measurements.iter().enumerate() {
                let (resid, d2, log_pdf) = template.score(z, sensor);
                if d2 <= params.gate_threshold {
                    detections.push(DetectionLocal {
                        meas_idx: j,
                        log_weight: floor_log(
                            r.ln() + beta_k.ln() + p_d.ln() + log_pdf,
                        ),
                        mean: template.updated_mean(alive_density.mean(), &resid),
                    });
                }
            }
            if !detections.is_empty() {
                updated_cov = Some(template.updated_cov);
            }
        }
        groups.push(AllLocalGroup {
            predicted: b.clone(),
            log_w_misdet: ln_or_floor(w_mis),
            r_misdet: r_mis.clamp(0.0, 1.0),
            betas_misdet,
            updated_cov,
            detections,
            frozen: false,
        });
    }
    Ok(groups)
}

/// Builds the measurement-initiated components from the predicted intensity:
/// per measurement, the gated intensity components contribute their detection
/// mass; absorption keeps the posterior Gaussian of the strongest one.
fn build_new_bernoullis(
    poisson: &PoissonIntensity,
    sensor: &SensorModel,
    measurements: &[DVector<f64>],
    params: &FilterParams,
) -> Result<Vec<NewBernoulliLocal>> {
    let p_d = sensor.p_detect();
    let templates: Vec<Option<UpdateTemplate>> = if p_d > 0.0 {
        poisson
            .components()
            .iter()
            .map(|c| {
                if c.weight > 0.0 {
                    UpdateTemplate::new(&c.density, sensor).map(Some)
                } else {
                    Ok(None)
                }
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        (0..poisson.len()).map(|_| None).collect()
    };

    let mut news = Vec::with_capacity(measurements.len());
    for (j, z) in measurements.iter().enumerate() {
        let log_clutter = ln_or_floor(sensor.clutter_density(z));
        let mut gated: Vec<(usize, f64, DVector<f64>)> = Vec::new();
        for (q, (component, template)) in poisson.components().iter().zip(&templates).enumerate() {
            let Some(template) = template else { continue };
            let (resid, d2, log_pdf) = template.score(z, sensor);
            if d2 <= params.gate_threshold {
                let log_v = component.weight.ln() + p_d.ln() + log_pdf;
                gated.push((q, log_v, template.updated_mean(component.density.mean(), &resid)));
            }
        }
        if gated.is_empty() {
            news.push(NewBernoulliLocal {
                meas_idx: j,
                log_weight: log_clutter,
                existence: 0.0,
                density: None,
            });
            continue;
        }
        let log_vs: Vec<f64> = gated.iter().map(|(_, lv, _)| *lv).collect();
        let log_sum_v = gaussian::log_sum_exp(&log_vs);
        let log_w = floor_log(gaussian::log_add_exp(log_clutter, log_sum_v));
        let existence = (log_sum_v - log_w).exp().clamp(0.0, 1.0);

        // Absorption: keep the strongest component's posterior.
        let best = gated
            .iter()
            .enumerate()
            .max_by(|(ai, a), (bi, b)| a.1.total_cmp(&b.1).then(bi.cmp(ai)))
            .map(|(idx, _)| idx)
            .expect("nonempty gated set");
        let (q_star, _, ref mean) = gated[best];
        let component = &poisson.components()[q_star];
        let template = templates[q_star].as_ref().expect("gated component has template");
        let density = component
            .density
            .with_mean_cov(mean.clone(), template.updated_cov.clone());

        news.push(NewBernoulliLocal {
            meas_idx: j,
            log_weight: log_w,
            existence,
            density: Some(density),
        });
    }
    Ok(news)
}

// ============================================================================
// Global hypotheses
// ============================================================================

/// Builds the ranked-assignment cost matrix. Rows are measurements; columns
/// are the eligible prior Bernoullis (`eligible[g]`) followed by one
/// new-component column per measurement. Detection costs are normalized by
/// the group's misdetection log weight so misdetection needs no column.
fn build_cost_matrix(
    eligible: &[usize],
    misdet_logs: &[f64],
    detection_lists: &[&[DetectionLocal]],
    news: &[NewBernoulliLocal],
    m: usize,
) -> Result<CostMatrix> {
    let n_cols = eligible.len() + m;
    let mut costs = DMatrix::from_element(m, n_cols, FORBIDDEN_COST);
    for (col, &g) in eligible.iter().enumerate() {
        for det in detection_lists[g] {
            costs[(det.meas_idx, col)] = -(det.log_weight - misdet_logs[g]);
        }
    }
    for (j, new) in news.iter().enumerate() {
        costs[(j, eligible.len() + j)] = -new.log_weight;
    }
    CostMatrix::new(costs, eligible.len())
}

/// Runs the ranked assignment and reconstructs normalized global hypothesis
/// weights from the true local log weights.
#[allow(clippy::too_many_arguments)]
fn build_global_hypotheses(
    cost: &CostMatrix,
    eligible: &[usize],
    num_groups: usize,
    misdet_logs: &[f64],
    detection_lists: &[&[DetectionLocal]],
    news: &[NewBernoulliLocal],
    m: usize,
    max_hypotheses: usize,
) -> Result<Vec<GlobalHypothesis>> {
    let assignments = murty_kbest(cost, max_hypotheses)?;
    if assignments.is_empty() {
        return Err(Error::InvalidParameter("no feasible global hypothesis".into()));
    }
    let mut globals = Vec::with_capacity(assignments.len());
    for a in &assignments {
        let mut associations: Vec<Option<usize>> = vec![None; num_groups];
        let mut opens = vec![false; m];
        for (row, &col) in a.row_to_col.iter().enumerate() {
            if col < eligible.len() {
                associations[eligible[col]] = Some(row);
            } else {
                debug_assert_eq!(col - eligible.len(), row);
                opens[row] = true;
            }
        }
        let mut log_weight = 0.0;
        for g in 0..num_groups {
            log_weight += match associations[g] {
                None => misdet_logs[g],
                Some(j) => {
                    detection_lists[g]
                        .iter()
                        .find(|d| d.meas_idx == j)
                        .expect("assigned detection exists")
                        .log_weight
                }
            };
        }
        for (j, open) in opens.iter().enumerate() {
            if *open {
                log_weight += news[j].log_weight;
            }
            // A claimed measurement leaves the new component in its empty
            // hypothesis, which has weight one.
        }
        globals.push(GlobalHypothesis { associations, opens, log_weight, weight: 0.0 });
    }
    let logs: Vec<f64> = globals.iter().map(|g| g.log_weight).collect();
    let norm = gaussian::log_sum_exp(&logs);
    if norm.is_finite() {
        for g in &mut globals {
            g.weight = (g.log_weight - norm).exp();
        }
    } else {
        let uniform = 1.0 / globals.len() as f64;
        for g in &mut globals {
            g.weight = uniform;
        }
    }
    Ok(globals)
}

// ============================================================================
// Update entry points
// ============================================================================

fn update_impl(
    posterior: &PmbPosterior,
    sensor: &SensorModel,
    measurements: &[DVector<f64>],
    params: &FilterParams,
    max_hypotheses: usize,
) -> Result<UpdateOutput> {
    params.validate()?;
    let n_z = sensor.measurement_dim();
    for z in measurements {
        if z.len() != n_z {
            return Err(Error::DimensionMismatch(format!(
                "measurement has {} entries, sensor expects {n_z}",
                z.len()
            )));
        }
    }
    let k = posterior.time();
    let m = measurements.len();
    let p_d = sensor.p_detect();

    // Measurement-driven components come from the predicted intensity.
    let news = build_new_bernoullis(posterior.poisson(), sensor, measurements, params)?;

    // Undetected trajectories are thinned by the detection probability.
    let thinned = PoissonIntensity::new(
        posterior
            .poisson()
            .components()
            .iter()
            .map(|c| IntensityComponent { weight: (1.0 - p_d) * c.weight, density: c.density.clone() })
            .collect(),
    )?;

    let is_alive = matches!(posterior.bernoullis(), BernoulliSet::Alive(_));
    let (locals, globals, marginals, bernoullis) = if is_alive {
        let groups = build_alive_groups(posterior, sensor, measurements, params)?;
        let eligible: Vec<usize> = (0..groups.len()).collect();
        let misdet_logs: Vec<f64> = groups.iter().map(|g| g.log_w_misdet).collect();
        let detection_lists: Vec<&[DetectionLocal]> =
            groups.iter().map(|g| g.detections.as_slice()).collect();
        let cost = build_cost_matrix(&eligible, &misdet_logs, &detection_lists, &news, m)?;
        let globals = build_global_hypotheses(
            &cost,
            &eligible,
            groups.len(),
            &misdet_logs,
            &detection_lists,
            &news,
            m,
            max_hypotheses,
        )?;
        let marginals = compute_marginals(&globals, &detection_lists, m);
        let projected = project_to_pmb_alive(&groups, &news, &marginals)?;
        (
            UpdateLocals::Alive { groups, news },
            globals,
            marginals,
            BernoulliSet::Alive(projected),
        )
    } else {
        let groups = build_all_groups(posterior, sensor, measurements, params)?;
        let eligible: Vec<usize> = groups
            .iter()
            .enumerate()
            .filter(|(_, g)| !g.frozen)
            .map(|(i, _)| i)
            .collect();
        let misdet_logs: Vec<f64> = groups.iter().map(|g| g.log_w_misdet).collect();
        let detection_lists: Vec<&[DetectionLocal]> =
            groups.iter().map(|g| g.detections.as_slice()).collect();
        let cost = build_cost_matrix(&eligible, &misdet_logs, &detection_lists, &news, m)?;
        let globals = build_global_hypotheses(
            &cost,
            &eligible,
            groups.len(),
            &misdet_logs,
            &detection_lists,
            &news,
            m,
            max_hypotheses,
        )?;
        let marginals = compute_marginals(&globals, &detection_lists, m);
        let mut projected = project_to_pmb_all(&groups, &news, &marginals, k)?;
        // Freeze components whose alive probability dropped below the
        // threshold: zero it and renormalize the end-time distribution.
        for b in &mut projected {
            let beta_k = b.beta_at(k);
            if beta_k > 0.0 && beta_k < params.alive_freeze {
                let mut betas = b.betas().to_vec();
                let last = betas.len() - 1;
                let keep = 1.0 - betas[last];
                if keep > 0.0 {
                    for v in betas.iter_mut().take(last) {
                        *v /= keep;
                    }
                    betas[last] = 0.0;
                    *b = BernoulliAll::new(
                        b.existence(),
                        b.start_time(),
                        betas,
                        b.ends().to_vec(),
                    )?;
                }
            }
        }
        (
            UpdateLocals::All { groups, news },
            globals,
            marginals,
            BernoulliSet::All(projected),
        )
    };

    // Pruning.
    let poisson = PoissonIntensity::new(
        thinned
            .components()
            .iter()
            .filter(|c| c.weight >= params.poisson_prune)
            .cloned()
            .collect(),
    )?;
    let bernoullis = match bernoullis {
        BernoulliSet::Alive(list) => BernoulliSet::Alive(
            list.into_iter().filter(|b| b.existence() >= params.existence_prune).collect(),
        ),
        BernoulliSet::All(list) => BernoulliSet::All(
            list.into_iter().filter(|b| b.existence() >= params.existence_prune).collect(),
        ),
    };

    let diagnostics = UpdateDiagnostics { time: k, globals, marginals, locals, poisson: thinned };
    Ok(UpdateOutput { posterior: PmbPosterior::new(k, poisson, bernoullis)?, diagnostics })
}

/// Full TPMB update: Bayesian update to a PMB mixture, KLD projection back
/// to a PMB, then pruning.
pub fn update(
    posterior: &PmbPosterior,
    sensor: &SensorModel,
    measurements: &[DVector<f64>],
    params: &FilterParams,
) -> Result<UpdateOutput> {
    update_impl(posterior, sensor, measurements, params, params.max_hypotheses)
}

/// Global-nearest-neighbour update: identical machinery but only the single
/// best global hypothesis is kept, so the projection reduces to selection.
pub fn update_gnn(
    posterior: &PmbPosterior,
    sensor: &SensorModel,
    measurements: &[DVector<f64>],
    params: &FilterParams,
) -> Result<UpdateOutput> {
    update_impl(posterior, sensor, measurements, params, 1)
}
