//! Motion, birth, sensor and clutter models.
//!
//! Two sensor kinds are supported: linear-Gaussian and range-bearings. The
//! range-bearings case is handled by linearizing the measurement function at
//! a reference state, which yields an affine `(H, offset)` pair; the linear
//! sensor is the special case with a zero offset, so the filter has a single
//! update code path. The state layout for range-bearings sensors is
//! `[px, vx, py, vy]`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian;

/// Index of the x position in the conventional CV state layout.
pub const POS_X_INDEX: usize = 0;
/// Index of the y position in the conventional CV state layout.
pub const POS_Y_INDEX: usize = 2;

// ============================================================================
// Motion model
// ============================================================================

/// Linear-Gaussian motion: `x' ~ N(F x, Q)` with constant survival
/// probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionModel {
    #[serde(with = "crate::serde_helpers::dmatrix")]
    transition: DMatrix<f64>,
    #[serde(with = "crate::serde_helpers::dmatrix")]
    process_noise: DMatrix<f64>,
    p_survival: f64,
}

impl MotionModel {
    pub fn new(transition: DMatrix<f64>, process_noise: DMatrix<f64>, p_survival: f64) -> Result<Self> {
        let n = transition.nrows();
        if transition.ncols() != n || process_noise.nrows() != n || process_noise.ncols() != n {
            return Err(Error::DimensionMismatch(
                "transition and process noise must be square with matching size".into(),
            ));
        }
        gaussian::check_psd(&process_noise, "process noise")?;
        if !(0.0..=1.0).contains(&p_survival) {
            return Err(Error::InvalidParameter(format!(
                "survival probability {p_survival} outside [0, 1]"
            )));
        }
        Ok(Self { transition, process_noise, p_survival })
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    pub fn process_noise(&self) -> &DMatrix<f64> {
        &self.process_noise
    }

    pub fn p_survival(&self) -> f64 {
        self.p_survival
    }

    pub fn state_dim(&self) -> usize {
        self.transition.nrows()
    }

    /// Nearly-constant-velocity model on a 2-D plane with sampling period
    /// `tau` and noise intensity `q`, state `[px, vx, py, vy]`.
    pub fn constant_velocity_2d(tau: f64, q: f64, p_survival: f64) -> Result<Self> {
        let f_block = DMatrix::from_row_slice(2, 2, &[1.0, tau, 0.0, 1.0]);
        let q_block = DMatrix::from_row_slice(
            2,
            2,
            &[
                tau.powi(3) / 3.0,
                tau.powi(2) / 2.0,
                tau.powi(2) / 2.0,
                tau,
            ],
        ) * q;
        let eye2 = DMatrix::<f64>::identity(2, 2);
        Self::new(eye2.kronecker(&f_block), eye2.kronecker(&q_block), p_survival)
    }
}

// ============================================================================
// Birth model
// ============================================================================

/// One Gaussian component of the birth intensity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirthComponent {
    pub weight: f64,
    #[serde(with = "crate::serde_helpers::dvector")]
    pub mean: DVector<f64>,
    #[serde(with = "crate::serde_helpers::dmatrix")]
    pub cov: DMatrix<f64>,
}

/// Poisson birth intensity with an optional distinct first-step
/// configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirthModel {
    first_step: Vec<BirthComponent>,
    recurring: Vec<BirthComponent>,
}

impl BirthModel {
    pub fn new(first_step: Vec<BirthComponent>, recurring: Vec<BirthComponent>) -> Result<Self> {
        for c in first_step.iter().chain(recurring.iter()) {
            if c.weight.is_nan() || c.weight < 0.0 {
                return Err(Error::InvalidParameter("birth weights must be >= 0".into()));
            }
            if c.cov.nrows() != c.mean.len() || c.cov.ncols() != c.mean.len() {
                return Err(Error::DimensionMismatch("birth covariance shape".into()));
            }
            gaussian::check_psd(&c.cov, "birth covariance")?;
        }
        Ok(Self { first_step, recurring })
    }

    /// Same intensity at every step.
    pub fn homogeneous(components: Vec<BirthComponent>) -> Result<Self> {
        Self::new(components.clone(), components)
    }

    /// Birth components active at time step `k` (1-based).
    pub fn at_step(&self, k: usize) -> &[BirthComponent] {
        if k <= 1 {
            &self.first_step
        } else {
            &self.recurring
        }
    }

    /// Expected number of births at step `k`.
    pub fn mass_at_step(&self, k: usize) -> f64 {
        self.at_step(k).iter().map(|c| c.weight).sum()
    }
}

// ============================================================================
// Sensor model
// ============================================================================

/// Axis-aligned box in measurement space; clutter is uniform over it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClutterRegion {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ClutterRegion {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::DimensionMismatch("clutter region bounds".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| l >= u) {
            return Err(Error::InvalidParameter("clutter region must have positive volume".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).product()
    }

    pub fn contains(&self, z: &DVector<f64>) -> bool {
        z.len() == self.lower.len()
            && z.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SensorKind {
    /// `z = H x + noise`.
    Linear {
        #[serde(with = "crate::serde_helpers::dmatrix")]
        observation: DMatrix<f64>,
    },
    /// `z = [range, bearing]` measured from a fixed sensor position;
    /// requires the `[px, vx, py, vy]` state layout.
    RangeBearings { sensor_x: f64, sensor_y: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    kind: SensorKind,
    #[serde(with = "crate::serde_helpers::dmatrix")]
    noise: DMatrix<f64>,
    p_detect: f64,
    clutter_rate: f64,
    clutter_region: ClutterRegion,
}

impl SensorModel {
    pub fn new(
        kind: SensorKind,
        noise: DMatrix<f64>,
        p_detect: f64,
        clutter_rate: f64,
        clutter_region: ClutterRegion,
    ) -> Result<Self> {
        let n_z = match &kind {
            SensorKind::Linear { observation } => observation.nrows(),
            SensorKind::RangeBearings { .. } => 2,
        };
        if noise.nrows() != n_z || noise.ncols() != n_z {
            return Err(Error::DimensionMismatch(format!(
                "noise covariance {}x{} does not match measurement dim {n_z}",
                noise.nrows(),
                noise.ncols()
            )));
        }
        gaussian::check_psd(&noise, "measurement noise")?;
        if nalgebra::Cholesky::new(noise.clone()).is_none() {
            return Err(Error::NonPsdCovariance("measurement noise must be positive definite".into()));
        }
        if !(0.0..=1.0).contains(&p_detect) {
            return Err(Error::InvalidParameter(format!(
                "detection probability {p_detect} outside [0, 1]"
            )));
        }
        if clutter_rate.is_nan() || clutter_rate < 0.0 {
            return Err(Error::InvalidParameter("clutter rate must be >= 0".into()));
        }
        if clutter_region.lower.len() != n_z {
            return Err(Error::DimensionMismatch(
                "clutter region dimension does not match measurement dim".into(),
            ));
        }
        Ok(Self { kind, noise, p_detect, clutter_rate, clutter_region })
    }

    pub fn kind(&self) -> &SensorKind {
        &self.kind
    }

    pub fn noise(&self) -> &DMatrix<f64> {
        &self.noise
    }

    pub fn p_detect(&self) -> f64 {
        self.p_detect
    }

    pub fn clutter_rate(&self) -> f64 {
        self.clutter_rate
    }

    pub fn clutter_region(&self) -> &ClutterRegion {
        &self.clutter_region
    }

    pub fn measurement_dim(&self) -> usize {
        self.noise.nrows()
    }

    pub fn is_range_bearings(&self) -> bool {
        matches!(self.kind, SensorKind::RangeBearings { .. })
    }

    /// Clutter intensity at `z`: rate times the uniform density over the
    /// region, zero outside it.
    pub fn clutter_density(&self, z: &DVector<f64>) -> f64 {
        if self.clutter_region.contains(z) {
            self.clutter_rate / self.clutter_region.volume()
        } else {
            0.0
        }
    }

    /// Wraps the bearing residual into (-pi, pi] for range-bearings sensors;
    /// identity for linear ones.
    pub fn wrap_residual(&self, mut resid: DVector<f64>) -> DVector<f64> {
        if self.is_range_bearings() {
            resid[1] = wrap_angle(resid[1]);
        }
        resid
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(theta: f64) -> f64 {
    use std::f64::consts::PI;
    let mut t = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if t == -PI {
        t = PI;
    }
    t
}

/// Applies the sensor's measurement function to a state.
pub fn measurement_function(sensor: &SensorModel, x: &DVector<f64>) -> Result<DVector<f64>> {
    match sensor.kind() {
        SensorKind::Linear { observation } => {
            if observation.ncols() != x.len() {
                return Err(Error::DimensionMismatch(format!(
                    "observation matrix expects state dim {}, got {}",
                    observation.ncols(),
                    x.len()
                )));
            }
            Ok(observation * x)
        }
        SensorKind::RangeBearings { sensor_x, sensor_y } => {
            if x.len() <= POS_Y_INDEX {
                return Err(Error::DimensionMismatch(format!(
                    "range-bearings sensor expects at least {} state entries",
                    POS_Y_INDEX + 1
                )));
            }
            let dx = x[POS_X_INDEX] - sensor_x;
            let dy = x[POS_Y_INDEX] - sensor_y;
            let range = (dx * dx + dy * dy).sqrt();
            if range == 0.0 {
                return Err(Error::UndefinedBearing);
            }
            Ok(DVector::from_vec(vec![range, dy.atan2(dx)]))
        }
    }
}

/// First-order linearization of the measurement function at `x_ref`.
///
/// Returns `(H_eff, offset)` such that `H_eff x + offset` replaces `H x`
/// throughout the update. Linear sensors return `(H, 0)` exactly.
pub fn linearize_measurement(
    sensor: &SensorModel,
    x_ref: &DVector<f64>,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    match sensor.kind() {
        SensorKind::Linear { observation } => {
            Ok((observation.clone(), DVector::zeros(observation.nrows())))
        }
        SensorKind::RangeBearings { sensor_x, sensor_y } => {
            let dx = x_ref[POS_X_INDEX] - sensor_x;
            let dy = x_ref[POS_Y_INDEX] - sensor_y;
            let r2 = dx * dx + dy * dy;
            let range = r2.sqrt();
            if range == 0.0 {
                return Err(Error::UndefinedBearing);
            }
            let mut jac = DMatrix::zeros(2, x_ref.len());
            jac[(0, POS_X_INDEX)] = dx / range;
            jac[(0, POS_Y_INDEX)] = dy / range;
            jac[(1, POS_X_INDEX)] = -dy / r2;
            jac[(1, POS_Y_INDEX)] = dx / r2;
            let h_at_ref = measurement_function(sensor, x_ref)?;
            let offset = h_at_ref - &jac * x_ref;
            Ok((jac, offset))
        }
    }
}

// ============================================================================
// Benchmark scenario parameter sets
// ============================================================================

/// Linear-Gaussian benchmark: CV motion, position sensor, broad birth prior
/// concentrated on the first step.
pub fn scenario1_models() -> (MotionModel, BirthModel, SensorModel) {
    let motion = MotionModel::constant_velocity_2d(1.0, 0.01, 0.99).expect("valid CV model");

    let mean = DVector::from_vec(vec![100.0, 0.0, 100.0, 0.0]);
    let cov = DMatrix::from_diagonal(&DVector::from_vec(vec![150.0_f64.powi(2), 1.0, 150.0_f64.powi(2), 1.0]));
    let birth = BirthModel::new(
        vec![BirthComponent { weight: 3.0, mean: mean.clone(), cov: cov.clone() }],
        vec![BirthComponent { weight: 0.005, mean, cov }],
    )
    .expect("valid birth model");

    let observation = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    let sensor = SensorModel::new(
        SensorKind::Linear { observation },
        DMatrix::identity(2, 2),
        0.9,
        10.0,
        ClutterRegion::new(vec![0.0, 0.0], vec![300.0, 300.0]).expect("valid region"),
    )
    .expect("valid sensor");

    (motion, birth, sensor)
}

/// Range-bearings benchmark: same CV motion, sensor at (100, 100), birth
/// intensity matching the PHD of four point-source Bernoullis.
pub fn scenario2_models() -> (MotionModel, BirthModel, SensorModel) {
    let motion = MotionModel::constant_velocity_2d(1.0, 0.01, 0.99).expect("valid CV model");

    let cov = DMatrix::from_diagonal(&DVector::from_vec(vec![9.0, 1.0, 9.0, 1.0]));
    let means = [
        vec![140.0, 0.0, 170.0, 0.0],
        vec![165.0, 0.0, 155.0, 0.0],
        vec![150.0, 0.0, 160.0, 0.0],
        vec![160.0, 0.0, 150.0, 0.0],
    ];
    let components: Vec<BirthComponent> = means
        .into_iter()
        .map(|m| BirthComponent { weight: 0.01, mean: DVector::from_vec(m), cov: cov.clone() })
        .collect();
    let birth = BirthModel::homogeneous(components).expect("valid birth model");

    let bearing_sigma = 2.0 * std::f64::consts::PI / 180.0;
    let noise = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, bearing_sigma * bearing_sigma]));
    let sensor = SensorModel::new(
        SensorKind::RangeBearings { sensor_x: 100.0, sensor_y: 100.0 },
        noise,
        0.9,
        10.0,
        ClutterRegion::new(vec![10.0, 0.0], vec![200.0, std::f64::consts::FRAC_PI_2])
            .expect("valid region"),
    )
    .expect("valid sensor");

    (motion, birth, sensor)
}
