//! Brute-force PMBM density evaluators.
//!
//! These evaluate Poisson multi-Bernoulli mixture densities by explicit
//! enumeration of set partitions and association assignments. Cost is
//! exponential, so inputs are size-capped; the evaluators exist to serve as
//! independent oracles for the filter's projection and marginalization
//! machinery, not for production use.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::types::{AugmentedTrajectory, GaussianTrajectoryDensity, PoissonIntensity, Trajectory};

/// Hard cap on the number of trajectories accepted by the evaluators.
pub const MAX_TRAJECTORIES: usize = 6;
/// Hard cap on the number of Bernoulli components accepted by the evaluators.
pub const MAX_BERNOULLIS: usize = 4;

/// Mixture of Gaussian trajectory densities with weights summing to one.
///
/// A single-component mixture models the alive-variant densities; the
/// all-variant end-time mixtures use several components.
#[derive(Debug, Clone)]
pub struct MixtureDensity {
    components: Vec<(f64, GaussianTrajectoryDensity)>,
}

impl MixtureDensity {
    pub fn new(components: Vec<(f64, GaussianTrajectoryDensity)>) -> Result<Self> {
        let total: f64 = components.iter().map(|(w, _)| *w).sum();
        if components.iter().any(|(w, _)| *w < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "mixture weights must be nonnegative and sum to 1 (got {total})"
            )));
        }
        Ok(Self { components })
    }

    pub fn single(density: GaussianTrajectoryDensity) -> Self {
        Self { components: vec![(1.0, density)] }
    }

    pub fn evaluate(&self, trajectory: &Trajectory) -> Result<f64> {
        let mut acc = 0.0;
        for (w, d) in &self.components {
            acc += w * d.evaluate(trajectory)?;
        }
        Ok(acc)
    }
}

/// One weighted local hypothesis of a Bernoulli component.
#[derive(Debug, Clone)]
pub struct OracleLocal {
    /// Unnormalized local-hypothesis weight.
    pub weight: f64,
    /// Probability of existence under this hypothesis.
    pub existence: f64,
    /// Single-trajectory density; may be absent when existence is zero.
    pub density: Option<MixtureDensity>,
}

/// Explicit PMBM: Poisson intensity, per-Bernoulli local hypotheses and
/// normalized global-hypothesis weights.
#[derive(Debug, Clone)]
pub struct PmbmDensity {
    poisson: PoissonIntensity,
    locals: Vec<Vec<OracleLocal>>,
    /// `(a, w^a)`: one local index per Bernoulli plus the hypothesis weight.
    globals: Vec<(Vec<usize>, f64)>,
}

impl PmbmDensity {
    pub fn new(
        poisson: PoissonIntensity,
        locals: Vec<Vec<OracleLocal>>,
        globals: Vec<(Vec<usize>, f64)>,
    ) -> Result<Self> {
        if globals.is_empty() {
            return Err(Error::EmptyInput("at least one global hypothesis required".into()));
        }
        for (a, _) in &globals {
            if a.len() != locals.len() {
                return Err(Error::DimensionMismatch(
                    "global hypothesis length differs from Bernoulli count".into(),
                ));
            }
            for (i, &ai) in a.iter().enumerate() {
                if ai >= locals[i].len() {
                    return Err(Error::InvalidParameter(format!(
                        "global hypothesis selects local {ai} of Bernoulli {i} which has {}",
                        locals[i].len()
                    )));
                }
            }
        }
        let total: f64 = globals.iter().map(|(_, w)| *w).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "global hypothesis weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { poisson, locals, globals })
    }

    pub fn poisson(&self) -> &PoissonIntensity {
        &self.poisson
    }

    pub fn locals(&self) -> &[Vec<OracleLocal>] {
        &self.locals
    }

    pub fn globals(&self) -> &[(Vec<usize>, f64)] {
        &self.globals
    }

    pub fn num_bernoullis(&self) -> usize {
        self.locals.len()
    }

    fn bernoulli_empty_factor(&self, i: usize, ai: usize) -> f64 {
        1.0 - self.locals[i][ai].existence
    }

    fn bernoulli_singleton_factor(&self, i: usize, ai: usize, x: &Trajectory) -> Result<f64> {
        let local = &self.locals[i][ai];
        if local.existence == 0.0 {
            return Ok(0.0);
        }
        match &local.density {
            Some(d) => Ok(local.existence * d.evaluate(x)?),
            None => Ok(0.0),
        }
    }

    /// Marginal weight of each local hypothesis: the sum of the weights of
    /// the global hypotheses that select it.
    pub fn marginal_weights(&self) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = self.locals.iter().map(|l| vec![0.0; l.len()]).collect();
        for (a, w) in &self.globals {
            for (i, &ai) in a.iter().enumerate() {
                out[i][ai] += w;
            }
        }
        out
    }
}

fn check_trajectory_cap(n: usize) -> Result<()> {
    if n > MAX_TRAJECTORIES {
        return Err(Error::LimitExceeded(format!(
            "{n} trajectories exceed the oracle cap {MAX_TRAJECTORIES}"
        )));
    }
    Ok(())
}

fn check_bernoulli_cap(n: usize) -> Result<()> {
    if n > MAX_BERNOULLIS {
        return Err(Error::LimitExceeded(format!(
            "{n} Bernoulli components exceed the oracle cap {MAX_BERNOULLIS}"
        )));
    }
    Ok(())
}

/// Exact PMBM density at a finite set of trajectories, by enumerating every
/// partition of the set into a Poisson part and per-Bernoulli singletons
/// under every global hypothesis.
pub fn eval_pmbm_density(pmbm: &PmbmDensity, x_set: &[Trajectory]) -> Result<f64> {
    check_trajectory_cap(x_set.len())?;
    check_bernoulli_cap(pmbm.num_bernoullis())?;
    let n = pmbm.num_bernoullis();
    let total_mass = pmbm.poisson.total_weight();
    let poisson_norm = (-total_mass).exp();

    // Precompute intensity and per-(bernoulli, local) factors per trajectory.
    let mut intensity = Vec::with_capacity(x_set.len());
    for x in x_set {
        intensity.push(pmbm.poisson.evaluate(x)?);
    }

    // owner[t] = n means trajectory t belongs to the Poisson part, otherwise
    // the index of the owning Bernoulli.
    let mut owner = vec![0usize; x_set.len()];
    let mut acc = 0.0;
    loop {
        // Bernoulli indices must be pairwise distinct.
        let mut used = [false; MAX_BERNOULLIS];
        let mut valid = true;
        for &o in &owner {
            if o < n {
                if used[o] {
                    valid = false;
                    break;
                }
                used[o] = true;
            }
        }
        if valid {
            for (a, w_a) in &pmbm.globals {
                let mut term = *w_a * poisson_norm;
                for (t, &o) in owner.iter().enumerate() {
                    if o == n {
                        term *= intensity[t];
                    }
                }
                for (i, &ai) in a.iter().enumerate() {
                    let assigned = owner.iter().position(|&o| o == i);
                    term *= match assigned {
                        None => pmbm.bernoulli_empty_factor(i, ai),
                        Some(t) => pmbm.bernoulli_singleton_factor(i, ai, &x_set[t])?,
                    };
                    if term == 0.0 {
                        break;
                    }
                }
                acc += term;
            }
        }
        // Advance the mixed-radix counter over owners.
        let mut pos = 0;
        loop {
            if pos == owner.len() {
                return Ok(acc);
            }
            owner[pos] += 1;
            if owner[pos] <= n {
                break;
            }
            owner[pos] = 0;
            pos += 1;
        }
    }
}

/// PMBM density on the augmented space: the auxiliary variable of each
/// trajectory dictates its factor, so the partition sum disappears.
pub fn eval_pmbm_density_with_aux(
    pmbm: &PmbmDensity,
    x_set: &[AugmentedTrajectory],
) -> Result<f64> {
    check_trajectory_cap(x_set.len())?;
    check_bernoulli_cap(pmbm.num_bernoullis())?;
    let n = pmbm.num_bernoullis();
    for x in x_set {
        if x.aux > n {
            return Err(Error::InvalidParameter(format!(
                "auxiliary variable {} outside 0..={n}",
                x.aux
            )));
        }
    }
    // Two trajectories sharing a nonzero mark annihilate the density.
    for (i, a) in x_set.iter().enumerate() {
        for b in &x_set[i + 1..] {
            if a.aux != 0 && a.aux == b.aux {
                return Ok(0.0);
            }
        }
    }

    let total_mass = pmbm.poisson.total_weight();
    let mut poisson_factor = (-total_mass).exp();
    for x in x_set.iter().filter(|x| x.aux == 0) {
        poisson_factor *= pmbm.poisson.evaluate(&x.trajectory)?;
    }

    let mut acc = 0.0;
    for (a, w_a) in &pmbm.globals {
        let mut term = *w_a;
        for (i, &ai) in a.iter().enumerate() {
            let assigned = x_set.iter().find(|x| x.aux == i + 1);
            term *= match assigned {
                None => pmbm.bernoulli_empty_factor(i, ai),
                Some(x) => pmbm.bernoulli_singleton_factor(i, ai, &x.trajectory)?,
            };
            if term == 0.0 {
                break;
            }
        }
        acc += term;
    }
    Ok(acc * poisson_factor)
}

/// PHD of the PMBM at a trajectory, computed by iterating global
/// hypotheses: `lambda(X) + sum_a w^a sum_i r^{i,a_i} p^{i,a_i}(X)`.
pub fn phd_of_pmbm(pmbm: &PmbmDensity, x: &Trajectory) -> Result<f64> {
    let mut acc = pmbm.poisson.evaluate(x)?;
    for (a, w_a) in &pmbm.globals {
        for (i, &ai) in a.iter().enumerate() {
            acc += w_a * pmbm.bernoulli_singleton_factor(i, ai, x)?;
        }
    }
    Ok(acc)
}

/// PHD of the KLD-projected PMB at a trajectory, computed via marginal
/// local-hypothesis weights: `lambda(X) + sum_i sum_{a_i} wbar r p(X)`.
///
/// The projected Bernoulli densities are the marginal-weighted mixtures, so
/// this must agree pointwise with [`phd_of_pmbm`].
pub fn phd_of_projected_pmb(pmbm: &PmbmDensity, x: &Trajectory) -> Result<f64> {
    let marginals = pmbm.marginal_weights();
    let mut acc = pmbm.poisson.evaluate(x)?;
    for (i, locals) in pmbm.locals().iter().enumerate() {
        for (ai, local) in locals.iter().enumerate() {
            let coeff = marginals[i][ai] * local.existence;
            if coeff > 0.0 {
                if let Some(d) = &local.density {
                    acc += coeff * d.evaluate(x)?;
                }
            }
        }
    }
    Ok(acc)
}

/// Sums the augmented density over every auxiliary assignment of the given
/// trajectories. Equals [`eval_pmbm_density`] by the marginalization
/// identity.
pub fn sum_over_aux_assignments(pmbm: &PmbmDensity, x_set: &[Trajectory]) -> Result<f64> {
    check_trajectory_cap(x_set.len())?;
    let n = pmbm.num_bernoullis();
    let mut marks = vec![0usize; x_set.len()];
    let mut acc = 0.0;
    loop {
        let augmented: Vec<AugmentedTrajectory> = marks
            .iter()
            .zip(x_set.iter())
            .map(|(&u, x)| AugmentedTrajectory { aux: u, trajectory: x.clone() })
            .collect();
        acc += eval_pmbm_density_with_aux(pmbm, &augmented)?;
        let mut pos = 0;
        loop {
            if pos == marks.len() {
                return Ok(acc);
            }
            marks[pos] += 1;
            if marks[pos] <= n {
                break;
            }
            marks[pos] = 0;
            pos += 1;
        }
    }
}

/// Convenience constructor for test fixtures: a 1-D unit-variance density.
pub fn unit_density_1d(start_time: usize, means: &[f64]) -> GaussianTrajectoryDensity {
    let n = means.len();
    GaussianTrajectoryDensity::new(
        start_time,
        DVector::from_column_slice(means),
        DMatrix::identity(n, n),
        1,
    )
    .expect("valid fixture density")
}
