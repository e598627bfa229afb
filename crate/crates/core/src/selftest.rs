//! Built-in invariant suite, runnable from the command line.
//!
//! Each check exercises one structural identity of the implementation
//! against an independent route: closed-form counts against reference
//! values, ranked assignment against exhaustive enumeration, the
//! auxiliary-variable marginalization identity, PHD preservation across the
//! projection, and single-target agreement with a standalone Kalman filter.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

use crate::assignment;
use crate::error::Result;
use crate::filter::{FilterParams, TpmbFilter, Variant};
use crate::metrics::{self, MetricParams};
use crate::models::{BirthComponent, BirthModel, ClutterRegion, MotionModel, SensorKind, SensorModel};
use crate::oracle::{self, MixtureDensity, OracleLocal, PmbmDensity};
use crate::types::{
    GaussianTrajectoryDensity, IntensityComponent, PoissonIntensity, Trajectory,
};

/// Outcome of one invariant check.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn pass(name: &'static str, detail: impl Into<String>) -> Self {
        Self { name, passed: true, detail: detail.into() }
    }

    fn fail(name: &'static str, detail: impl Into<String>) -> Self {
        Self { name, passed: false, detail: detail.into() }
    }
}

/// Runs every check with a fixed seed.
pub fn run_all(seed: u64) -> Vec<CheckResult> {
    vec![
        check_hypothesis_counts(),
        check_ranked_assignment(seed),
        check_marginalization(60, seed),
        check_phd_preservation(seed),
        check_kalman_agreement(),
        check_metric_decomposition(seed),
    ]
}

/// Reference values for the hypothesis-count formulas.
pub fn check_hypothesis_counts() -> CheckResult {
    let name = "hypothesis-counts";
    let table: [(u64, u64, u64); 4] = [
        (4, 33_909, 46_328),
        (5, 384_091, 583_552),
        (6, 4_010_455, 6_882_352),
        (7, 38_398_641, 75_826_144),
    ];
    for (n, mbm, mbm01) in table {
        let got_mbm = match assignment::count_mbm_hypotheses(14, n) {
            Ok(v) => v,
            Err(e) => return CheckResult::fail(name, e.to_string()),
        };
        let got_01 = match assignment::count_mbm01_hypotheses(14, n) {
            Ok(v) => v,
            Err(e) => return CheckResult::fail(name, e.to_string()),
        };
        if got_mbm != num_bigint::BigUint::from(mbm) || got_01 != num_bigint::BigUint::from(mbm01) {
            return CheckResult::fail(
                name,
                format!("n = {n}: got ({got_mbm}, {got_01}), expected ({mbm}, {mbm01})"),
            );
        }
    }
    CheckResult::pass(name, "m = 14, n in 4..=7 reproduced exactly")
}

/// Murty's ranked assignments against exhaustive enumeration.
pub fn check_ranked_assignment(seed: u64) -> CheckResult {
    let name = "ranked-assignment";
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for case in 0..60 {
        let m = rng.random_range(1..=4usize);
        let n = rng.random_range(0..=4usize);
        let matrix = random_tracking_matrix(&mut rng, m, n);
        let expect = enumerate_assignments(matrix.costs());
        let got = match assignment::murty_kbest(&matrix, 10) {
            Ok(v) => v,
            Err(e) => return CheckResult::fail(name, e.to_string()),
        };
        if got.len() != expect.len().min(10) {
            return CheckResult::fail(
                name,
                format!("case {case}: {} assignments vs {}", got.len(), expect.len().min(10)),
            );
        }
        for (g, e) in got.iter().zip(&expect) {
            if (g.cost - e.cost).abs() > 1e-9 || g.row_to_col != e.row_to_col {
                return CheckResult::fail(name, format!("case {case}: ranking mismatch"));
            }
        }
    }
    CheckResult::pass(name, "60 random cost matrices matched exhaustive enumeration")
}

/// Generates a tracking-structured cost matrix with random finite entries
/// and a sprinkle of forbidden pairs.
pub fn random_tracking_matrix(rng: &mut ChaCha12Rng, m: usize, n: usize) -> assignment::CostMatrix {
    let mut costs = DMatrix::from_element(m, n + m, assignment::FORBIDDEN_COST);
    for i in 0..m {
        for j in 0..n {
            if rng.random_range(0.0..1.0) < 0.8 {
                costs[(i, j)] = rng.random_range(-5.0..10.0);
            }
        }
        costs[(i, n + i)] = rng.random_range(-2.0..12.0);
    }
    assignment::CostMatrix::new(costs, n).expect("valid tracking structure")
}

/// All feasible assignments sorted by (cost, column vector).
pub fn enumerate_assignments(costs: &DMatrix<f64>) -> Vec<assignment::Assignment> {
    fn recurse(
        r: usize,
        costs: &DMatrix<f64>,
        used: &mut Vec<bool>,
        cols: &mut Vec<usize>,
        out: &mut Vec<assignment::Assignment>,
    ) {
        if r == costs.nrows() {
            let cost: f64 = cols.iter().enumerate().map(|(i, &c)| costs[(i, c)]).sum();
            if cost < assignment::FEASIBLE_LIMIT {
                out.push(assignment::Assignment { row_to_col: cols.clone(), cost });
            }
            return;
        }
        for c in 0..costs.ncols() {
            if !used[c] && costs[(r, c)] < assignment::FEASIBLE_LIMIT {
                used[c] = true;
                cols.push(c);
                recurse(r + 1, costs, used, cols, out);
                cols.pop();
                used[c] = false;
            }
        }
    }
    let mut out = Vec::new();
    recurse(0, costs, &mut vec![false; costs.ncols()], &mut Vec::new(), &mut out);
    out.sort_by(|a, b| a.cost.total_cmp(&b.cost).then_with(|| a.row_to_col.cmp(&b.row_to_col)));
    out
}

/// Builds a random small PMBM plus matching trajectories for the
/// marginalization identity.
pub fn random_pmbm(rng: &mut ChaCha12Rng) -> (PmbmDensity, Vec<Trajectory>) {
    let n_bernoulli = rng.random_range(0..=2usize);
    let n_traj = rng.random_range(0..=2usize);

    let random_density = |rng: &mut ChaCha12Rng| -> GaussianTrajectoryDensity {
        let start = rng.random_range(1..=2usize);
        let dur = rng.random_range(1..=2usize);
        let mean = DVector::from_iterator(dur, (0..dur).map(|_| rng.random_range(-3.0..3.0)));
        let mut cov = DMatrix::zeros(dur, dur);
        for i in 0..dur {
            cov[(i, i)] = rng.random_range(0.5..2.0);
        }
        if dur == 2 {
            let c = rng.random_range(-0.3..0.3);
            cov[(0, 1)] = c;
            cov[(1, 0)] = c;
        }
        GaussianTrajectoryDensity::new(start, mean, cov, 1).expect("valid density")
    };

    let n_intensity = rng.random_range(0..=2usize);
    let poisson = PoissonIntensity::new(
        (0..n_intensity)
            .map(|_| IntensityComponent {
                weight: rng.random_range(0.1..1.5),
                density: random_density(rng),
            })
            .collect(),
    )
    .expect("valid intensity");

    let mut locals = Vec::new();
    for _ in 0..n_bernoulli {
        let n_local = rng.random_range(1..=2usize);
        let list: Vec<OracleLocal> = (0..n_local)
            .map(|_| OracleLocal {
                weight: rng.random_range(0.1..1.0),
                existence: rng.random_range(0.0..1.0),
                density: Some(MixtureDensity::single(random_density(rng))),
            })
            .collect();
        locals.push(list);
    }

    // Random normalized global hypotheses over the local-index grid.
    let mut index_grid: Vec<Vec<usize>> = vec![Vec::new()];
    for list in &locals {
        let mut next = Vec::new();
        for prefix in &index_grid {
            for a in 0..list.len() {
                let mut row = prefix.clone();
                row.push(a);
                next.push(row);
            }
        }
        index_grid = next;
    }
    let n_globals = rng.random_range(1..=index_grid.len());
    index_grid.shuffle(rng);
    index_grid.truncate(n_globals);
    let raw: Vec<f64> = (0..n_globals).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let globals: Vec<(Vec<usize>, f64)> =
        index_grid.into_iter().zip(raw.into_iter().map(|w| w / total)).collect();

    let pmbm = PmbmDensity::new(poisson, locals, globals).expect("valid PMBM");

    // Trajectories roughly matching the component supports so densities are
    // often nonzero.
    let trajectories: Vec<Trajectory> = (0..n_traj)
        .map(|_| {
            let start = rng.random_range(1..=2usize);
            let dur = rng.random_range(1..=2usize);
            Trajectory::new(
                start,
                (0..dur).map(|_| DVector::from_vec(vec![rng.random_range(-3.0..3.0)])).collect(),
            )
            .expect("valid trajectory")
        })
        .collect();
    (pmbm, trajectories)
}

/// Summing the augmented density over all auxiliary assignments recovers the
/// plain density.
pub fn check_marginalization(cases: usize, seed: u64) -> CheckResult {
    let name = "aux-marginalization";
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x5eed);
    let mut nonzero = 0usize;
    for case in 0..cases {
        let (pmbm, trajectories) = random_pmbm(&mut rng);
        let plain = match oracle::eval_pmbm_density(&pmbm, &trajectories) {
            Ok(v) => v,
            Err(e) => return CheckResult::fail(name, e.to_string()),
        };
        let summed = match oracle::sum_over_aux_assignments(&pmbm, &trajectories) {
            Ok(v) => v,
            Err(e) => return CheckResult::fail(name, e.to_string()),
        };
        let scale = plain.abs().max(1e-300);
        if (plain - summed).abs() > 1e-9 * scale {
            return CheckResult::fail(
                name,
                format!("case {case}: plain {plain} vs summed {summed}"),
            );
        }
        if plain > 0.0 {
            nonzero += 1;
        }
    }
    CheckResult::pass(name, format!("{cases} random PMBMs, {nonzero} with nonzero value"))
}

/// PHD of the updated mixture equals the PHD of its projection, via the two
/// independent evaluation routes.
pub fn check_phd_preservation(seed: u64) -> CheckResult {
    let name = "phd-preservation";
    let run = || -> Result<Option<String>> {
        let motion =
            MotionModel::new(DMatrix::identity(1, 1), DMatrix::identity(1, 1) * 0.05, 0.95)?;
        let birth = BirthModel::homogeneous(vec![BirthComponent {
            weight: 0.4,
            mean: DVector::from_vec(vec![0.0]),
            cov: DMatrix::identity(1, 1) * 16.0,
        }])?;
        let sensor = SensorModel::new(
            SensorKind::Linear { observation: DMatrix::identity(1, 1) },
            DMatrix::identity(1, 1) * 0.3,
            0.85,
            1.0,
            ClutterRegion::new(vec![-50.0], vec![50.0])?,
        )?;
        let mut filter = TpmbFilter::new(
            Variant::Alive,
            false,
            FilterParams::default(),
            motion,
            birth,
            sensor,
        )?;
        let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0xbeef);
        for k in 1..=10usize {
            let m = rng.random_range(0..=3usize);
            let zs: Vec<DVector<f64>> =
                (0..m).map(|_| DVector::from_vec(vec![rng.random_range(-8.0..8.0)])).collect();
            let diag = filter.step(&zs)?;
            let pmbm = diag.to_pmbm_density()?;
            for b in filter.posterior().alive_bernoullis().unwrap() {
                for offset in [-0.4, 0.3] {
                    let mut stacked = b.density().mean().clone();
                    stacked[0] += offset;
                    let x = Trajectory::from_stacked(b.density().start_time(), &stacked, 1)?;
                    let a = oracle::phd_of_pmbm(&pmbm, &x)?;
                    let p = oracle::phd_of_projected_pmb(&pmbm, &x)?;
                    if (a - p).abs() > 1e-9 * a.abs().max(1e-300) {
                        return Ok(Some(format!("step {k}: {a} vs {p}")));
                    }
                }
            }
        }
        Ok(None)
    };
    match run() {
        Ok(None) => CheckResult::pass(name, "10-step run, PHD routes agree to 1e-9"),
        Ok(Some(detail)) => CheckResult::fail(name, detail),
        Err(e) => CheckResult::fail(name, e.to_string()),
    }
}

/// Single-target, certain-detection, clutter-free filtering equals a
/// standalone Kalman filter on the final state.
pub fn check_kalman_agreement() -> CheckResult {
    let name = "kalman-agreement";
    let run = || -> Result<Option<String>> {
        let motion = MotionModel::constant_velocity_2d(1.0, 0.01, 0.99)?;
        let birth_mean = DVector::from_vec(vec![50.0, 1.0, 50.0, -1.0]);
        let birth_cov = DMatrix::from_diagonal(&DVector::from_vec(vec![9.0, 1.0, 9.0, 1.0]));
        let birth = BirthModel::new(
            vec![BirthComponent { weight: 1.0, mean: birth_mean.clone(), cov: birth_cov.clone() }],
            vec![],
        )?;
        let observation =
            DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let noise = DMatrix::identity(2, 2);
        let sensor = SensorModel::new(
            SensorKind::Linear { observation: observation.clone() },
            noise.clone(),
            1.0,
            0.0,
            ClutterRegion::new(vec![0.0, 0.0], vec![300.0, 300.0])?,
        )?;
        let params = FilterParams { lscan_window: 64, ..FilterParams::default() };
        let mut filter = TpmbFilter::new(Variant::Alive, false, params, motion.clone(), birth, sensor)?;

        let mut kf_mean = birth_mean;
        let mut kf_cov = birth_cov;
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        for k in 1..=25usize {
            if k > 1 {
                kf_mean = motion.transition() * kf_mean;
                kf_cov = motion.transition() * kf_cov * motion.transition().transpose()
                    + motion.process_noise();
            }
            let z = DVector::from_vec(vec![
                50.0 + k as f64 + rng.random_range(-1.0..1.0),
                50.0 - k as f64 + rng.random_range(-1.0..1.0),
            ]);
            filter.step(std::slice::from_ref(&z))?;
            let s = &observation * &kf_cov * observation.transpose() + &noise;
            let gain = &kf_cov * observation.transpose() * s.try_inverse().expect("invertible");
            kf_mean = &kf_mean + &gain * (&z - &observation * &kf_mean);
            kf_cov = &kf_cov - &gain * &observation * &kf_cov;

            let list = filter.posterior().alive_bernoullis().expect("alive variant");
            if list.len() != 1 {
                return Ok(Some(format!("step {k}: {} components", list.len())));
            }
            let b = &list[0];
            let dm = (b.density().mean_at(k).expect("last state") - &kf_mean).norm();
            let dp = (b.density().cov_at(k).expect("last cov") - &kf_cov).norm();
            if dm > 1e-9 || dp > 1e-9 {
                return Ok(Some(format!("step {k}: |dm| = {dm:.2e}, |dP| = {dp:.2e}")));
            }
        }
        Ok(None)
    };
    match run() {
        Ok(None) => CheckResult::pass(name, "25 steps within 1e-9 of the standalone filter"),
        Ok(Some(detail)) => CheckResult::fail(name, detail),
        Err(e) => CheckResult::fail(name, e.to_string()),
    }
}

/// GOSPA decomposition additivity and symmetry on random sets.
pub fn check_metric_decomposition(seed: u64) -> CheckResult {
    let name = "metric-decomposition";
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x90_5a);
    let params = MetricParams::default();
    for case in 0..100 {
        let random_set = |rng: &mut ChaCha12Rng| -> Vec<DVector<f64>> {
            let n = rng.random_range(0..5usize);
            (0..n)
                .map(|_| {
                    DVector::from_vec(vec![
                        rng.random_range(0.0..60.0),
                        rng.random_range(0.0..60.0),
                    ])
                })
                .collect()
        };
        let a = random_set(&mut rng);
        let b = random_set(&mut rng);
        let g = match metrics::gospa(&a, &b, &params) {
            Ok(g) => g,
            Err(e) => return CheckResult::fail(name, e.to_string()),
        };
        let lhs = g.total * g.total;
        let rhs = g.localization * g.localization + g.missed * g.missed + g.false_ * g.false_;
        if (lhs - rhs).abs() > 1e-9 * lhs.max(1.0) {
            return CheckResult::fail(name, format!("case {case}: {lhs} vs {rhs}"));
        }
        let h = metrics::gospa(&b, &a, &params).expect("computed once already");
        if (g.total - h.total).abs() > 1e-12 {
            return CheckResult::fail(name, format!("case {case}: asymmetric total"));
        }
    }
    CheckResult::pass(name, "100 random set pairs")
}
