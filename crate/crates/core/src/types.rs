//! Domain types for trajectories, single-trajectory densities and the PMB
//! posterior propagated by the filters.
//!
//! A trajectory is a birth time together with a finite sequence of target
//! states. Trajectory densities are Gaussians over the stacked state
//! sequence; a density of duration `d` over states of dimension `n_x` has a
//! `d * n_x` mean and a `d*n_x x d*n_x` covariance. All types are
//! immutable-after-construction values and safe to share across threads.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian;

// ============================================================================
// Trajectory
// ============================================================================

/// A single trajectory: birth time step plus an ordered state sequence.
///
/// The trajectory exists from `birth_time` to `birth_time + len - 1`
/// inclusive. Time steps are 1-based throughout the crate.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    birth_time: usize,
    states: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn new(birth_time: usize, states: Vec<DVector<f64>>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::EmptyInput("trajectory needs at least one state".into()));
        }
        let dim = states[0].len();
        if dim == 0 || states.iter().any(|s| s.len() != dim) {
            return Err(Error::DimensionMismatch(
                "trajectory states must share a positive dimension".into(),
            ));
        }
        Ok(Self { birth_time, states })
    }

    pub fn birth_time(&self) -> usize {
        self.birth_time
    }

    pub fn states(&self) -> &[DVector<f64>] {
        &self.states
    }

    pub fn state_dim(&self) -> usize {
        self.states[0].len()
    }

    /// Number of time steps the trajectory spans.
    pub fn duration(&self) -> usize {
        self.states.len()
    }

    pub fn end_time(&self) -> usize {
        self.birth_time + self.states.len() - 1
    }

    /// State at absolute time step `k`, if the trajectory exists then.
    pub fn state_at(&self, k: usize) -> Option<&DVector<f64>> {
        if k < self.birth_time || k > self.end_time() {
            None
        } else {
            Some(&self.states[k - self.birth_time])
        }
    }

    /// All states stacked into one column vector.
    pub fn stacked(&self) -> DVector<f64> {
        let dim = self.state_dim();
        let mut out = DVector::zeros(dim * self.states.len());
        for (i, s) in self.states.iter().enumerate() {
            out.rows_mut(i * dim, dim).copy_from(s);
        }
        out
    }

    /// Rebuilds a trajectory from a stacked mean vector.
    pub fn from_stacked(birth_time: usize, stacked: &DVector<f64>, state_dim: usize) -> Result<Self> {
        if state_dim == 0 || !stacked.len().is_multiple_of(state_dim) || stacked.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "stacked length {} is not a positive multiple of state dim {}",
                stacked.len(),
                state_dim
            )));
        }
        let states = (0..stacked.len() / state_dim)
            .map(|i| stacked.rows(i * state_dim, state_dim).into_owned())
            .collect();
        Ok(Self { birth_time, states })
    }
}

// ============================================================================
// Gaussian single-trajectory density
// ============================================================================

/// Gaussian density over trajectories with a fixed start time and duration.
///
/// Evaluates to zero for trajectories whose birth time or duration differ
/// from the density's own start time and duration.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianTrajectoryDensity {
    start_time: usize,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    state_dim: usize,
}

impl GaussianTrajectoryDensity {
    pub fn new(start_time: usize, mean: DVector<f64>, mut cov: DMatrix<f64>, state_dim: usize) -> Result<Self> {
        if state_dim == 0 || mean.is_empty() || !mean.len().is_multiple_of(state_dim) {
            return Err(Error::DimensionMismatch(format!(
                "mean length {} is not a positive multiple of state dim {}",
                mean.len(),
                state_dim
            )));
        }
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::DimensionMismatch(format!(
                "covariance {}x{} does not match mean length {}",
                cov.nrows(),
                cov.ncols(),
                mean.len()
            )));
        }
        gaussian::check_symmetric(&cov, "GaussianTrajectoryDensity")?;
        gaussian::symmetrize(&mut cov);
        Ok(Self { start_time, mean, cov, state_dim })
    }

    /// Single-state density, the building block for births.
    pub fn single(start_time: usize, mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let dim = mean.len();
        Self::new(start_time, mean, cov, dim)
    }

    pub fn start_time(&self) -> usize {
        self.start_time
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn duration(&self) -> usize {
        self.mean.len() / self.state_dim
    }

    pub fn end_time(&self) -> usize {
        self.start_time + self.duration() - 1
    }

    /// Mean of the state at absolute time `k`.
    pub fn mean_at(&self, k: usize) -> Option<DVector<f64>> {
        if k < self.start_time || k > self.end_time() {
            return None;
        }
        let i = k - self.start_time;
        Some(self.mean.rows(i * self.state_dim, self.state_dim).into_owned())
    }

    /// Marginal covariance block of the state at absolute time `k`.
    pub fn cov_at(&self, k: usize) -> Option<DMatrix<f64>> {
        if k < self.start_time || k > self.end_time() {
            return None;
        }
        let i = k - self.start_time;
        let d = self.state_dim;
        Some(self.cov.view((i * d, i * d), (d, d)).into_owned())
    }

    /// Evaluates the density at a trajectory.
    ///
    /// Returns 0 when the birth time or duration do not match; otherwise the
    /// multivariate normal density of the stacked state sequence.
    pub fn evaluate(&self, trajectory: &Trajectory) -> Result<f64> {
        if trajectory.birth_time() != self.start_time
            || trajectory.duration() != self.duration()
            || trajectory.state_dim() != self.state_dim
        {
            return Ok(0.0);
        }
        gaussian::mvn_pdf(&trajectory.stacked(), &self.mean, &self.cov)
    }

    /// Full PSD validation (symmetry plus eigenvalue floor). O(n^3).
    pub fn validate(&self) -> Result<()> {
        gaussian::check_psd(&self.cov, "GaussianTrajectoryDensity")
    }

    pub(crate) fn with_cov(&self, mut cov: DMatrix<f64>) -> Self {
        gaussian::symmetrize(&mut cov);
        Self {
            start_time: self.start_time,
            mean: self.mean.clone(),
            cov,
            state_dim: self.state_dim,
        }
    }

    pub(crate) fn with_mean_cov(&self, mean: DVector<f64>, mut cov: DMatrix<f64>) -> Self {
        gaussian::symmetrize(&mut cov);
        Self { start_time: self.start_time, mean, cov, state_dim: self.state_dim }
    }
}

/// Evaluates a Gaussian trajectory density at a trajectory.
pub fn eval_gaussian_trajectory_density(
    density: &GaussianTrajectoryDensity,
    trajectory: &Trajectory,
) -> Result<f64> {
    density.evaluate(trajectory)
}

// ============================================================================
// Poisson intensity
// ============================================================================

/// One weighted Gaussian component of the Poisson intensity.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityComponent {
    pub weight: f64,
    pub density: GaussianTrajectoryDensity,
}

/// Gaussian-mixture intensity of the Poisson process on undetected
/// trajectories.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PoissonIntensity {
    components: Vec<IntensityComponent>,
}

impl PoissonIntensity {
    pub fn empty() -> Self {
        Self { components: Vec::new() }
    }

    pub fn new(components: Vec<IntensityComponent>) -> Result<Self> {
        if components.iter().any(|c| c.weight.is_nan() || c.weight < 0.0) {
            return Err(Error::InvalidParameter("intensity weights must be >= 0".into()));
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[IntensityComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Total mass, i.e. the expected number of undetected trajectories.
    pub fn total_weight(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }

    /// Intensity value at a trajectory.
    pub fn evaluate(&self, trajectory: &Trajectory) -> Result<f64> {
        let mut acc = 0.0;
        for c in &self.components {
            acc += c.weight * c.density.evaluate(trajectory)?;
        }
        Ok(acc)
    }
}

// ============================================================================
// Bernoulli components
// ============================================================================

/// Bernoulli component for the alive-trajectories formulation.
///
/// The density's end time always equals the current posterior time step.
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliAlive {
    existence: f64,
    density: GaussianTrajectoryDensity,
}

impl BernoulliAlive {
    pub fn new(existence: f64, density: GaussianTrajectoryDensity) -> Result<Self> {
        if !(0.0..=1.0 + 1e-12).contains(&existence) {
            return Err(Error::InvalidParameter(format!(
                "existence probability {existence} outside [0, 1]"
            )));
        }
        Ok(Self { existence: existence.min(1.0), density })
    }

    pub fn existence(&self) -> f64 {
        self.existence
    }

    pub fn density(&self) -> &GaussianTrajectoryDensity {
        &self.density
    }

    pub fn start_time(&self) -> usize {
        self.density.start_time()
    }
}

/// Bernoulli component for the all-trajectories formulation.
///
/// Carries a distribution over end times: `beta(l)` is the probability that
/// the trajectory terminates at step `l`, conditioned on existence, with one
/// stacked mean/covariance per possible end time. Slots whose probability is
/// zero and which were never realized carry no density. Dead slots are
/// immutable once written, so they are shared rather than copied as the
/// recursion extends the component.
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliAll {
    existence: f64,
    start_time: usize,
    /// `betas[j]` is the termination probability at step `start_time + j`.
    betas: Vec<f64>,
    /// `ends[j]` is the trajectory density given the end time `start_time + j`.
    ends: Vec<Option<Arc<GaussianTrajectoryDensity>>>,
}

impl BernoulliAll {
    pub fn new(
        existence: f64,
        start_time: usize,
        betas: Vec<f64>,
        ends: Vec<Option<Arc<GaussianTrajectoryDensity>>>,
    ) -> Result<Self> {
        if !(0.0..=1.0 + 1e-12).contains(&existence) {
            return Err(Error::InvalidParameter(format!(
                "existence probability {existence} outside [0, 1]"
            )));
        }
        if betas.is_empty() || betas.len() != ends.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} end-time probabilities vs {} densities",
                betas.len(),
                ends.len()
            )));
        }
        if betas.iter().any(|b| !(-1e-12..=1.0 + 1e-12).contains(b)) {
            return Err(Error::InvalidParameter("end-time probabilities outside [0, 1]".into()));
        }
        let total: f64 = betas.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "end-time probabilities sum to {total}, expected 1"
            )));
        }
        for (j, (beta, end)) in betas.iter().zip(ends.iter()).enumerate() {
            match end {
                Some(d) => {
                    if d.start_time() != start_time || d.duration() != j + 1 {
                        return Err(Error::DimensionMismatch(format!(
                            "end slot {j}: density spans {}..{}, expected {}..{}",
                            d.start_time(),
                            d.end_time(),
                            start_time,
                            start_time + j
                        )));
                    }
                }
                None => {
                    if *beta > 0.0 {
                        return Err(Error::InvalidParameter(format!(
                            "end slot {j} has probability {beta} but no density"
                        )));
                    }
                }
            }
        }
        Ok(Self { existence: existence.min(1.0), start_time, betas, ends })
    }

    pub fn existence(&self) -> f64 {
        self.existence
    }

    pub fn start_time(&self) -> usize {
        self.start_time
    }

    /// Latest end time with a stored slot.
    pub fn last_end_time(&self) -> usize {
        self.start_time + self.betas.len() - 1
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn ends(&self) -> &[Option<Arc<GaussianTrajectoryDensity>>] {
        &self.ends
    }

    /// Termination probability at absolute step `l` (zero outside the stored
    /// range).
    pub fn beta_at(&self, l: usize) -> f64 {
        if l < self.start_time || l > self.last_end_time() {
            0.0
        } else {
            self.betas[l - self.start_time]
        }
    }

    pub fn end_density(&self, l: usize) -> Option<&GaussianTrajectoryDensity> {
        if l < self.start_time || l > self.last_end_time() {
            None
        } else {
            self.ends[l - self.start_time].as_deref()
        }
    }

    /// A component is frozen once its probability of still being alive at the
    /// current step is zero; it is then neither predicted nor updated.
    pub fn is_frozen_at(&self, k: usize) -> bool {
        self.beta_at(k) == 0.0
    }

    /// Density value at a trajectory: the beta-weighted mixture over end
    /// times.
    pub fn density_value(&self, trajectory: &Trajectory) -> Result<f64> {
        let mut acc = 0.0;
        for (beta, end) in self.betas.iter().zip(self.ends.iter()) {
            if *beta > 0.0 {
                if let Some(d) = end {
                    acc += beta * d.evaluate(trajectory)?;
                }
            }
        }
        Ok(acc)
    }
}

// ============================================================================
// PMB posterior
// ============================================================================

/// Bernoulli components of a posterior; homogeneous in variant.
#[derive(Debug, Clone, PartialEq)]
pub enum BernoulliSet {
    Alive(Vec<BernoulliAlive>),
    All(Vec<BernoulliAll>),
}

impl BernoulliSet {
    pub fn len(&self) -> usize {
        match self {
            BernoulliSet::Alive(v) => v.len(),
            BernoulliSet::All(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Poisson multi-Bernoulli posterior over sets of trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct PmbPosterior {
    time: usize,
    poisson: PoissonIntensity,
    bernoullis: BernoulliSet,
}

impl PmbPosterior {
    /// Empty prior before any data: zero intensity, no Bernoulli components.
    pub fn empty_alive() -> Self {
        Self { time: 0, poisson: PoissonIntensity::empty(), bernoullis: BernoulliSet::Alive(Vec::new()) }
    }

    pub fn empty_all() -> Self {
        Self { time: 0, poisson: PoissonIntensity::empty(), bernoullis: BernoulliSet::All(Vec::new()) }
    }

    pub fn new(time: usize, poisson: PoissonIntensity, bernoullis: BernoulliSet) -> Result<Self> {
        if let BernoulliSet::Alive(list) = &bernoullis {
            for (i, b) in list.iter().enumerate() {
                if b.density().end_time() != time {
                    return Err(Error::DimensionMismatch(format!(
                        "alive Bernoulli {i} ends at {} but posterior time is {time}",
                        b.density().end_time()
                    )));
                }
            }
        }
        Ok(Self { time, poisson, bernoullis })
    }

    pub fn time(&self) -> usize {
        self.time
    }

    pub fn poisson(&self) -> &PoissonIntensity {
        &self.poisson
    }

    pub fn bernoullis(&self) -> &BernoulliSet {
        &self.bernoullis
    }

    pub fn alive_bernoullis(&self) -> Option<&[BernoulliAlive]> {
        match &self.bernoullis {
            BernoulliSet::Alive(v) => Some(v),
            BernoulliSet::All(_) => None,
        }
    }

    pub fn all_bernoullis(&self) -> Option<&[BernoulliAll]> {
        match &self.bernoullis {
            BernoulliSet::All(v) => Some(v),
            BernoulliSet::Alive(_) => None,
        }
    }
}

/// Intensity (PHD) of a PMB posterior evaluated at a trajectory:
/// `lambda(X) + sum_i r_i p_i(X)`.
pub fn phd_of_pmb(posterior: &PmbPosterior, trajectory: &Trajectory) -> Result<f64> {
    let mut acc = posterior.poisson.evaluate(trajectory)?;
    match &posterior.bernoullis {
        BernoulliSet::Alive(list) => {
            for b in list {
                acc += b.existence() * b.density().evaluate(trajectory)?;
            }
        }
        BernoulliSet::All(list) => {
            for b in list {
                acc += b.existence() * b.density_value(trajectory)?;
            }
        }
    }
    Ok(acc)
}

// ============================================================================
// Augmented trajectory (test oracles only)
// ============================================================================

/// Trajectory tagged with an auxiliary mark: 0 points at the Poisson part,
/// `i > 0` at the i-th Bernoulli component.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedTrajectory {
    pub aux: usize,
    pub trajectory: Trajectory,
}

impl AugmentedTrajectory {
    pub fn new(aux: usize, max_aux: usize, trajectory: Trajectory) -> Result<Self> {
        if aux > max_aux {
            return Err(Error::InvalidParameter(format!(
                "auxiliary variable {aux} outside 0..={max_aux}"
            )));
        }
        Ok(Self { aux, trajectory })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn density_1d(start: usize, mean: Vec<f64>, cov_diag: f64) -> GaussianTrajectoryDensity {
        let n = mean.len();
        GaussianTrajectoryDensity::new(
            start,
            DVector::from_vec(mean),
            DMatrix::identity(n, n) * cov_diag,
            1,
        )
        .unwrap()
    }

    #[test]
    fn start_time_mismatch_gives_zero() {
        let d = density_1d(1, vec![0.0], 1.0);
        let x = Trajectory::new(2, vec![DVector::from_vec(vec![0.0])]).unwrap();
        assert_eq!(d.evaluate(&x).unwrap(), 0.0);
    }

    #[test]
    fn standard_normal_at_mode() {
        let d = density_1d(1, vec![0.0], 1.0);
        let x = Trajectory::new(1, vec![DVector::from_vec(vec![0.0])]).unwrap();
        let v = d.evaluate(&x).unwrap();
        assert!((v - 0.3989422804014327).abs() < 1e-12);
    }

    #[test]
    fn two_step_density_at_mode() {
        let d = density_1d(3, vec![1.0, 2.0], 1.0);
        let x = Trajectory::new(
            3,
            vec![DVector::from_vec(vec![1.0]), DVector::from_vec(vec![2.0])],
        )
        .unwrap();
        let v = d.evaluate(&x).unwrap();
        assert!((v - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-12);
    }

    #[test]
    fn duration_mismatch_gives_zero() {
        let d = density_1d(1, vec![0.0, 0.0], 1.0);
        let x = Trajectory::new(1, vec![DVector::from_vec(vec![0.0])]).unwrap();
        assert_eq!(d.evaluate(&x).unwrap(), 0.0);
    }

    #[test]
    fn non_psd_covariance_is_an_error() {
        let d = GaussianTrajectoryDensity::new(
            1,
            DVector::from_vec(vec![0.0, 0.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]),
            1,
        )
        .unwrap();
        let x = Trajectory::new(
            1,
            vec![DVector::from_vec(vec![0.0]), DVector::from_vec(vec![0.0])],
        )
        .unwrap();
        assert!(d.evaluate(&x).is_err());
        assert!(d.validate().is_err());
    }

    #[test]
    fn asymmetric_covariance_rejected() {
        let r = GaussianTrajectoryDensity::new(
            1,
            DVector::from_vec(vec![0.0, 0.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.1, 1.0]),
            1,
        );
        assert!(r.is_err());
    }

    #[test]
    fn trajectory_accessors() {
        let x = Trajectory::new(
            4,
            vec![DVector::from_vec(vec![1.0, 2.0]), DVector::from_vec(vec![3.0, 4.0])],
        )
        .unwrap();
        assert_eq!(x.end_time(), 5);
        assert_eq!(x.duration(), 2);
        assert_eq!(x.state_at(5).unwrap()[0], 3.0);
        assert!(x.state_at(3).is_none());
        assert_eq!(x.stacked().as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        let back = Trajectory::from_stacked(4, &x.stacked(), 2).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn phd_of_empty_posterior_is_zero() {
        let p = PmbPosterior::empty_alive();
        let x = Trajectory::new(1, vec![DVector::from_vec(vec![0.0])]).unwrap();
        assert_eq!(phd_of_pmb(&p, &x).unwrap(), 0.0);
    }

    #[test]
    fn phd_single_bernoulli_product() {
        // r = 0.5 and density value 0.2 at X gives 0.1.
        // A 1-D Gaussian with variance 1/(2 pi 0.2^2) evaluates to 0.2 at its
        // mode; simpler: scale a standard normal by choosing X at a known
        // offset. Use variance 1 and X at the mode, then check 0.5 * pdf.
        let d = density_1d(1, vec![0.0], 1.0);
        let b = BernoulliAlive::new(0.5, d.clone()).unwrap();
        let p = PmbPosterior::new(1, PoissonIntensity::empty(), BernoulliSet::Alive(vec![b]))
            .unwrap();
        let x = Trajectory::new(1, vec![DVector::from_vec(vec![0.0])]).unwrap();
        let expect = 0.5 * d.evaluate(&x).unwrap();
        assert!((phd_of_pmb(&p, &x).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn bernoulli_all_invariants() {
        let end0 = density_1d(2, vec![0.0], 1.0);
        let end1 = density_1d(2, vec![0.0, 0.1], 1.0);
        let b = BernoulliAll::new(
            0.9,
            2,
            vec![0.3, 0.7],
            vec![Some(Arc::new(end0.clone())), Some(Arc::new(end1.clone()))],
        )
        .unwrap();
        assert_eq!(b.beta_at(2), 0.3);
        assert_eq!(b.beta_at(3), 0.7);
        assert_eq!(b.beta_at(9), 0.0);
        assert!(!b.is_frozen_at(3));
        assert!(b.is_frozen_at(4));

        // Probabilities must sum to one.
        assert!(BernoulliAll::new(
            0.9,
            2,
            vec![0.3, 0.3],
            vec![Some(Arc::new(end0)), Some(Arc::new(end1.clone()))]
        )
        .is_err());
        // A positive-probability slot must carry a density.
        assert!(BernoulliAll::new(0.9, 2, vec![0.3, 0.7], vec![None, Some(Arc::new(end1))]).is_err());
    }

    #[test]
    fn alive_posterior_time_checked() {
        let d = density_1d(1, vec![0.0, 0.0], 1.0); // spans steps 1..2
        let b = BernoulliAlive::new(0.5, d).unwrap();
        assert!(PmbPosterior::new(3, PoissonIntensity::empty(), BernoulliSet::Alive(vec![b.clone()])).is_err());
        assert!(PmbPosterior::new(2, PoissonIntensity::empty(), BernoulliSet::Alive(vec![b])).is_ok());
    }

    #[test]
    fn augmented_trajectory_range_checked() {
        let x = Trajectory::new(1, vec![DVector::from_vec(vec![0.0])]).unwrap();
        assert!(AugmentedTrajectory::new(3, 2, x.clone()).is_err());
        assert!(AugmentedTrajectory::new(2, 2, x).is_ok());
    }
}
