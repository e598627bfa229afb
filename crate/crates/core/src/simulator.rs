//! Seeded ground-truth and measurement generation.
//!
//! Everything is a pure function of (configuration, seed). One master seed
//! is split into independent substreams for target motion, detection events,
//! measurement noise and clutter, so adding measurements to one step never
//! perturbs another component's draws.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{measurement_function, BirthModel, MotionModel, SensorModel};
use crate::types::Trajectory;

/// One scripted target of a fixed-truth scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedTarget {
    /// First time step at which the target exists (1-based).
    pub birth_step: usize,
    /// First time step at which the target no longer exists; `None` means it
    /// survives to the end of the horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub death_step: Option<usize>,
    #[serde(with = "crate::serde_helpers::dvector")]
    pub initial_state: DVector<f64>,
}

/// How ground truth is produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TruthMode {
    /// Scripted births/deaths/initial states; motion integrates the
    /// transition model with sampled process noise.
    Fixed(Vec<ScriptedTarget>),
    /// Births drawn from the birth intensity, deaths geometric with the
    /// survival probability.
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Number of time steps.
    pub horizon: usize,
    pub motion: MotionModel,
    pub birth: BirthModel,
    pub sensor: SensorModel,
    pub truth: TruthMode,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be >= 1".into()));
        }
        if let TruthMode::Fixed(targets) = &self.truth {
            for (i, t) in targets.iter().enumerate() {
                if t.birth_step == 0 || t.birth_step > self.horizon {
                    return Err(Error::InvalidParameter(format!(
                        "target {i}: birth step {} outside 1..={}",
                        t.birth_step, self.horizon
                    )));
                }
                if let Some(d) = t.death_step {
                    if d <= t.birth_step {
                        return Err(Error::InvalidParameter(format!(
                            "target {i}: death step {d} not after birth {}",
                            t.birth_step
                        )));
                    }
                }
                if t.initial_state.len() != self.motion.state_dim() {
                    return Err(Error::DimensionMismatch(format!(
                        "target {i}: state dim {} vs motion model {}",
                        t.initial_state.len(),
                        self.motion.state_dim()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Measurements per time step: target detections and clutter, shuffled.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    steps: Vec<Vec<DVector<f64>>>,
}

impl MeasurementRecord {
    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    /// Measurement list at step `k` (1-based).
    pub fn at_step(&self, k: usize) -> &[DVector<f64>] {
        &self.steps[k - 1]
    }

    pub fn steps(&self) -> &[Vec<DVector<f64>>] {
        &self.steps
    }
}

// ============================================================================
// RNG substreams
// ============================================================================

/// Purpose tags for the independent substreams of one master seed.
#[derive(Clone, Copy)]
enum Stream {
    TruthMotion = 1,
    TruthBirth = 2,
    Detection = 3,
    Noise = 4,
    Clutter = 5,
}

/// Derives a substream generator from the master seed. SplitMix64 over the
/// (seed, tag) pair, then ChaCha for the stream itself.
fn substream(seed: u64, stream: Stream) -> ChaCha12Rng {
    let mut z = seed ^ (stream as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    let mut next = || {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut x = z;
        x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        x ^ (x >> 31)
    };
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&next().to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}

fn sample_mvn(rng: &mut ChaCha12Rng, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = mean.len();
    if cov.iter().all(|v| *v == 0.0) {
        return Ok(mean.clone());
    }
    let chol = crate::gaussian::cholesky_with_jitter(cov, "sample_mvn")?;
    let std_normal = Normal::new(0.0, 1.0).expect("valid normal");
    let z = DVector::from_iterator(n, (0..n).map(|_| std_normal.sample(rng)));
    Ok(mean + chol.l() * z)
}

// ============================================================================
// Truth generation
// ============================================================================

fn integrate_target(
    rng: &mut ChaCha12Rng,
    motion: &MotionModel,
    birth_step: usize,
    death_step: Option<usize>,
    initial: DVector<f64>,
    horizon: usize,
) -> Result<Trajectory> {
    let last = death_step.map_or(horizon, |d| d - 1).min(horizon);
    let mut states = vec![initial];
    for _ in birth_step..last {
        let prev = states.last().expect("nonempty");
        let noise = sample_mvn(rng, &DVector::zeros(prev.len()), motion.process_noise())?;
        states.push(motion.transition() * prev + noise);
    }
    Trajectory::new(birth_step, states)
}

/// Generates the true set of trajectories for a scenario.
pub fn generate_truth(cfg: &ScenarioConfig, seed: u64) -> Result<Vec<Trajectory>> {
    cfg.validate()?;
    let mut motion_rng = substream(seed, Stream::TruthMotion);
    match &cfg.truth {
        TruthMode::Fixed(targets) => targets
            .iter()
            .map(|t| {
                integrate_target(
                    &mut motion_rng,
                    &cfg.motion,
                    t.birth_step,
                    t.death_step,
                    t.initial_state.clone(),
                    cfg.horizon,
                )
            })
            .collect(),
        TruthMode::Sampled => {
            let mut birth_rng = substream(seed, Stream::TruthBirth);
            let mut out = Vec::new();
            for k in 1..=cfg.horizon {
                let components = cfg.birth.at_step(k);
                let mass = cfg.birth.mass_at_step(k);
                if mass <= 0.0 || components.is_empty() {
                    continue;
                }
                let count = Poisson::new(mass)
                    .map_err(|_| Error::InvalidParameter("birth mass".into()))?
                    .sample(&mut birth_rng) as usize;
                for _ in 0..count {
                    // Pick a component proportionally to weight.
                    let mut u = birth_rng.random_range(0.0..mass);
                    let mut idx = 0;
                    for (i, c) in components.iter().enumerate() {
                        if u < c.weight {
                            idx = i;
                            break;
                        }
                        u -= c.weight;
                        idx = i;
                    }
                    let c = &components[idx];
                    let initial = sample_mvn(&mut birth_rng, &c.mean, &c.cov)?;
                    // Geometric lifetime with continuation probability p_s.
                    let mut death = None;
                    for step in k + 1..=cfg.horizon {
                        if birth_rng.random_range(0.0..1.0) > cfg.motion.p_survival() {
                            death = Some(step);
                            break;
                        }
                    }
                    out.push(integrate_target(
                        &mut motion_rng,
                        &cfg.motion,
                        k,
                        death,
                        initial,
                        cfg.horizon,
                    )?);
                }
            }
            Ok(out)
        }
    }
}

// ============================================================================
// Measurement generation
// ============================================================================

/// Generates the measurement record for a set of true trajectories: each
/// alive target is detected with the sensor's detection probability and
/// produces one noisy measurement; clutter is Poisson over the clutter
/// region. The per-step order is shuffled.
pub fn generate_measurements(
    truth: &[Trajectory],
    sensor: &SensorModel,
    horizon: usize,
    seed: u64,
) -> Result<MeasurementRecord> {
    let mut detect_rng = substream(seed, Stream::Detection);
    let mut noise_rng = substream(seed, Stream::Noise);
    let mut clutter_rng = substream(seed, Stream::Clutter);
    let n_z = sensor.measurement_dim();
    let noise_zero = DVector::zeros(n_z);

    let mut steps = Vec::with_capacity(horizon);
    for k in 1..=horizon {
        let mut items: Vec<DVector<f64>> = Vec::new();
        for trajectory in truth {
            let Some(state) = trajectory.state_at(k) else { continue };
            if detect_rng.random_range(0.0..1.0) < sensor.p_detect() {
                let noise = sample_mvn(&mut noise_rng, &noise_zero, sensor.noise())?;
                items.push(measurement_function(sensor, state)? + noise);
            }
        }
        if sensor.clutter_rate() > 0.0 {
            let count = Poisson::new(sensor.clutter_rate())
                .map_err(|_| Error::InvalidParameter("clutter rate".into()))?
                .sample(&mut clutter_rng) as usize;
            let region = sensor.clutter_region();
            for _ in 0..count {
                let z = DVector::from_iterator(
                    n_z,
                    region
                        .lower
                        .iter()
                        .zip(&region.upper)
                        .map(|(lo, hi)| clutter_rng.random_range(*lo..*hi)),
                );
                items.push(z);
            }
        }
        items.shuffle(&mut clutter_rng);
        steps.push(items);
    }
    Ok(MeasurementRecord { steps })
}

// ============================================================================
// Benchmark scenario scripts
// ============================================================================

/// Scripted linear-Gaussian scenario: four targets born at step 1 near the
/// birth mean, slowly converging to a common meeting region at step 40,
/// where one of them dies; the survivors separate again slowly, staying in
/// close proximity for an extended stretch.
pub fn scenario1_config(horizon: usize) -> ScenarioConfig {
    let (motion, birth, sensor) = crate::models::scenario1_models();
    let targets = vec![
        ScriptedTarget {
            birth_step: 1,
            death_step: None,
            initial_state: DVector::from_vec(vec![107.55, 1.05, 107.55, 1.05]),
        },
        ScriptedTarget {
            birth_step: 1,
            death_step: None,
            initial_state: DVector::from_vec(vec![122.25, 0.75, 122.25, 0.75]),
        },
        ScriptedTarget {
            birth_step: 1,
            death_step: None,
            initial_state: DVector::from_vec(vec![107.55, 1.05, 122.25, 0.75]),
        },
        ScriptedTarget {
            birth_step: 1,
            death_step: Some(40),
            initial_state: DVector::from_vec(vec![122.25, 0.75, 107.55, 1.05]),
        },
    ];
    ScenarioConfig { horizon, motion, birth, sensor, truth: TruthMode::Fixed(targets) }
}

/// Scripted range-bearings scenario: two targets born at step 1, two at
/// step 21; the first target dies at step 40. All targets stay in the first
/// quadrant relative to the sensor.
pub fn scenario2_config(horizon: usize) -> ScenarioConfig {
    let (motion, birth, sensor) = crate::models::scenario2_models();
    let targets = vec![
        ScriptedTarget {
            birth_step: 1,
            death_step: Some(40),
            initial_state: DVector::from_vec(vec![140.0, 0.4, 170.0, -0.6]),
        },
        ScriptedTarget {
            birth_step: 1,
            death_step: None,
            initial_state: DVector::from_vec(vec![165.0, -0.5, 155.0, 0.3]),
        },
        ScriptedTarget {
            birth_step: 21,
            death_step: None,
            initial_state: DVector::from_vec(vec![150.0, 0.5, 160.0, -0.5]),
        },
        ScriptedTarget {
            birth_step: 21,
            death_step: None,
            initial_state: DVector::from_vec(vec![160.0, -0.4, 150.0, 0.5]),
        },
    ];
    ScenarioConfig { horizon, motion, birth, sensor, truth: TruthMode::Fixed(targets) }
}
