//! Monte Carlo campaign driver.
//!
//! A campaign runs a list of filter variants over a scenario, optionally
//! sweeping one parameter at a time (detection probability or clutter rate)
//! crossed with a list of L-scan windows, for a number of seeded runs.
//! Results aggregate into per-step RMS series and a whole-horizon RMS per
//! (filter, sweep point). Outputs are deterministic in (config, base seed)
//! except for the measured runtimes.

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{FilterParams, TpmbFilter, Variant};
use crate::metrics::{rms_over_runs, rms_total, trajectory_snapshot_error, MetricParams};
use crate::models::{SensorModel, POS_X_INDEX, POS_Y_INDEX};
use crate::simulator::{generate_measurements, generate_truth, ScenarioConfig};
use crate::types::Trajectory;

// ============================================================================
// Configuration
// ============================================================================

/// Filter variants runnable by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterKind {
    TpmbAlive,
    TpmbAll,
    TgnpmbAlive,
    TgnpmbAll,
}

impl FilterKind {
    pub fn label(&self) -> &'static str {
        match self {
            FilterKind::TpmbAlive => "tpmb-alive",
            FilterKind::TpmbAll => "tpmb-all",
            FilterKind::TgnpmbAlive => "tgnpmb-alive",
            FilterKind::TgnpmbAll => "tgnpmb-all",
        }
    }

    pub fn variant(&self) -> Variant {
        match self {
            FilterKind::TpmbAlive | FilterKind::TgnpmbAlive => Variant::Alive,
            FilterKind::TpmbAll | FilterKind::TgnpmbAll => Variant::All,
        }
    }

    pub fn is_gnn(&self) -> bool {
        matches!(self, FilterKind::TgnpmbAlive | FilterKind::TgnpmbAll)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterSpec {
    pub variant: FilterKind,
    #[serde(default)]
    pub params: FilterParams,
}

/// Scenario reference: a named built-in script or a full inline definition.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioSpec {
    Builtin { name: String, horizon: usize },
    Inline(Box<ScenarioConfig>),
}

impl ScenarioSpec {
    pub fn resolve(&self) -> Result<ScenarioConfig> {
        let cfg = match self {
            ScenarioSpec::Builtin { name, horizon } => match name.as_str() {
                "scenario1" => crate::simulator::scenario1_config(*horizon),
                "scenario2" => crate::simulator::scenario2_config(*horizon),
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "scenario.name: unknown built-in scenario `{other}` (expected scenario1 or scenario2)"
                    )))
                }
            },
            ScenarioSpec::Inline(cfg) => (**cfg).clone(),
        };
        cfg.validate().map_err(|e| Error::InvalidConfig(format!("scenario: {e}")))?;
        Ok(cfg)
    }
}

/// One-at-a-time parameter overrides crossed with L-scan windows.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SweepConfig {
    #[serde(default)]
    pub detection_probs: Vec<f64>,
    #[serde(default)]
    pub clutter_rates: Vec<f64>,
    #[serde(default)]
    pub lscan_windows: Vec<usize>,
    /// Include the unmodified baseline row. Defaults to true.
    #[serde(default = "default_true")]
    pub include_baseline: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub version: u32,
    pub scenario: ScenarioSpec,
    pub filters: Vec<FilterSpec>,
    #[serde(default)]
    pub sweep: SweepConfig,
    pub runs: usize,
    pub base_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricParams>,
}

pub const CONFIG_VERSION: u32 = 1;

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::InvalidConfig(format!(
                "version: expected {CONFIG_VERSION}, got {}",
                self.version
            )));
        }
        if self.runs == 0 {
            return Err(Error::InvalidConfig("runs: must be >= 1".into()));
        }
        if self.filters.is_empty() {
            return Err(Error::InvalidConfig("filters: at least one filter required".into()));
        }
        for (i, f) in self.filters.iter().enumerate() {
            f.params
                .validate()
                .map_err(|e| Error::InvalidConfig(format!("filters[{i}].params: {e}")))?;
        }
        for (i, v) in self.sweep.detection_probs.iter().enumerate() {
            if !(0.0..=1.0).contains(v) {
                return Err(Error::InvalidConfig(format!(
                    "sweep.detection_probs[{i}]: {v} outside [0, 1]"
                )));
            }
        }
        for (i, v) in self.sweep.clutter_rates.iter().enumerate() {
            if v.is_nan() || *v <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "sweep.clutter_rates[{i}]: {v} must be positive"
                )));
            }
        }
        for (i, v) in self.sweep.lscan_windows.iter().enumerate() {
            if *v == 0 {
                return Err(Error::InvalidConfig(format!(
                    "sweep.lscan_windows[{i}]: must be >= 1"
                )));
            }
        }
        self.scenario.resolve().map(|_| ())?;
        if let Some(metric) = &self.metric {
            metric.validate().map_err(|e| Error::InvalidConfig(format!("metric: {e}")))?;
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: CampaignConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }
}

// ============================================================================
// Sweep points
// ============================================================================

/// The parameter a sweep point overrides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKey {
    None,
    PDetect,
    ClutterRate,
}

impl SweepKey {
    pub fn label(&self) -> &'static str {
        match self {
            SweepKey::None => "none",
            SweepKey::PDetect => "p_detect",
            SweepKey::ClutterRate => "clutter_rate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub key: SweepKey,
    pub value: Option<f64>,
    /// L-scan window override; `None` keeps the filter's configured window.
    pub lscan: Option<usize>,
}

fn sweep_points(sweep: &SweepConfig) -> Vec<SweepPoint> {
    let mut rows: Vec<(SweepKey, Option<f64>)> = Vec::new();
    if sweep.include_baseline {
        rows.push((SweepKey::None, None));
    }
    for v in &sweep.detection_probs {
        rows.push((SweepKey::PDetect, Some(*v)));
    }
    for v in &sweep.clutter_rates {
        rows.push((SweepKey::ClutterRate, Some(*v)));
    }
    if rows.is_empty() {
        rows.push((SweepKey::None, None));
    }
    let windows: Vec<Option<usize>> = if sweep.lscan_windows.is_empty() {
        vec![None]
    } else {
        sweep.lscan_windows.iter().map(|l| Some(*l)).collect()
    };
    let mut out = Vec::with_capacity(rows.len() * windows.len());
    for (key, value) in rows {
        for l in &windows {
            out.push(SweepPoint { key, value, lscan: *l });
        }
    }
    out
}

fn apply_overrides(scenario: &ScenarioConfig, point: &SweepPoint) -> Result<ScenarioConfig> {
    let mut cfg = scenario.clone();
    let sensor = &cfg.sensor;
    let p_detect = match point.key {
        SweepKey::PDetect => point.value.expect("p_detect sweep carries a value"),
        _ => sensor.p_detect(),
    };
    let clutter_rate = match point.key {
        SweepKey::ClutterRate => point.value.expect("clutter sweep carries a value"),
        _ => sensor.clutter_rate(),
    };
    cfg.sensor = SensorModel::new(
        sensor.kind().clone(),
        sensor.noise().clone(),
        p_detect,
        clutter_rate,
        sensor.clutter_region().clone(),
    )?;
    Ok(cfg)
}

// ============================================================================
// Results
// ============================================================================

/// Whole-horizon RMS errors for one (filter, sweep point).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub filter: String,
    pub variant: String,
    pub sweep_key: String,
    pub sweep_value: Option<f64>,
    #[serde(rename = "L")]
    pub lscan: usize,
    #[serde(rename = "d_T")]
    pub d_total: f64,
    #[serde(rename = "loc")]
    pub localization: f64,
    pub missed: f64,
    #[serde(rename = "false")]
    pub false_: f64,
    pub runtime_s: f64,
}

/// Per-step RMS error series for one (filter, sweep point).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRecord {
    pub filter: String,
    pub sweep_key: String,
    pub sweep_value: Option<f64>,
    pub lscan: usize,
    pub step: usize,
    pub d_k: f64,
    pub localization_k: f64,
    pub missed_k: f64,
    #[serde(rename = "false_k")]
    pub false_k: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub records: Vec<ResultRecord>,
    pub series: Vec<SeriesRecord>,
}

impl ResultTable {
    /// Looks up the whole-horizon error of one (filter, sweep point).
    pub fn d_total(
        &self,
        filter: &str,
        key: SweepKey,
        value: Option<f64>,
        lscan: usize,
    ) -> Option<f64> {
        self.records
            .iter()
            .find(|r| {
                r.filter == filter
                    && r.sweep_key == key.label()
                    && match (r.sweep_value, value) {
                        (Some(a), Some(b)) => (a - b).abs() < 1e-12,
                        (None, None) => true,
                        _ => false,
                    }
                    && r.lscan == lscan
            })
            .map(|r| r.d_total)
    }
}

// ============================================================================
// Campaign execution
// ============================================================================

struct RunOutcome {
    /// Un-normalized squared errors per step (the `1/k` is applied by the
    /// RMS aggregation), split by decomposition term.
    total_sq: Vec<f64>,
    loc_sq: Vec<f64>,
    missed_sq: Vec<f64>,
    false_sq: Vec<f64>,
    runtime_s: f64,
}

fn run_single(
    scenario: &ScenarioConfig,
    spec: &FilterSpec,
    lscan: Option<usize>,
    metric: &MetricParams,
    seed: u64,
) -> Result<RunOutcome> {
    let truth = generate_truth(scenario, seed)?;
    let measurements = generate_measurements(&truth, &scenario.sensor, scenario.horizon, seed)?;

    let mut params = spec.params.clone();
    if let Some(l) = lscan {
        params.lscan_window = l;
    }
    let started = Instant::now();
    let mut filter = TpmbFilter::new(
        spec.variant.variant(),
        spec.variant.is_gnn(),
        params,
        scenario.motion.clone(),
        scenario.birth.clone(),
        scenario.sensor.clone(),
    )?;

    let horizon = scenario.horizon;
    let position_indices = [POS_X_INDEX, POS_Y_INDEX];
    let alive_problem = spec.variant.variant() == Variant::Alive;
    let mut outcome = RunOutcome {
        total_sq: Vec::with_capacity(horizon),
        loc_sq: Vec::with_capacity(horizon),
        missed_sq: Vec::with_capacity(horizon),
        false_sq: Vec::with_capacity(horizon),
        runtime_s: 0.0,
    };
    for k in 1..=horizon {
        filter.step(measurements.at_step(k))?;
        let estimates = filter.estimates()?;
        let truth_at_k: Vec<Trajectory> = if alive_problem {
            truth.iter().filter(|t| t.state_at(k).is_some()).cloned().collect()
        } else {
            truth.to_vec()
        };
        let snap = trajectory_snapshot_error(&truth_at_k, &estimates, k, metric, &position_indices)?;
        // Store without the 1/k normalization; the RMS step divides once.
        let kf = k as f64;
        outcome.total_sq.push(snap.total_sq * kf);
        outcome.loc_sq.push(snap.localization_sq * kf);
        outcome.missed_sq.push(snap.missed_sq * kf);
        outcome.false_sq.push(snap.false_sq * kf);
    }
    outcome.runtime_s = started.elapsed().as_secs_f64();
    Ok(outcome)
}

/// Runs the campaign, parallelizing over (filter, sweep point, run). The
/// aggregation is order-independent, so the output is identical to a serial
/// execution.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let scenario = cfg.scenario.resolve()?;
    let metric = cfg.metric.clone().unwrap_or_default();
    let points = sweep_points(&cfg.sweep);

    struct Cell {
        filter_idx: usize,
        point_idx: usize,
        scenario: ScenarioConfig,
    }
    let mut cells = Vec::new();
    for (filter_idx, _) in cfg.filters.iter().enumerate() {
        for (point_idx, point) in points.iter().enumerate() {
            cells.push(Cell {
                filter_idx,
                point_idx,
                scenario: apply_overrides(&scenario, point)?,
            });
        }
    }

    // One work item per (cell, run).
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..cfg.runs).map(move |r| (c, r)))
        .collect();
    let outcomes: Vec<Result<RunOutcome>> = jobs
        .par_iter()
        .map(|&(cell_idx, run_idx)| {
            let cell = &cells[cell_idx];
            let spec = &cfg.filters[cell.filter_idx];
            let point = &points[cell.point_idx];
            let seed = cfg.base_seed + run_idx as u64;
            catch_unwind(AssertUnwindSafe(|| {
                run_single(&cell.scenario, spec, point.lscan, &metric, seed)
            }))
            .unwrap_or_else(|_| {
                Err(Error::InvalidParameter(format!(
                    "run panicked (filter {}, seed {seed})",
                    spec.variant.label()
                )))
            })
            .map_err(|e| {
                Error::InvalidParameter(format!(
                    "run failed (filter {}, seed {seed}): {e}",
                    spec.variant.label()
                ))
            })
        })
        .collect();

    let mut table = ResultTable::default();
    let horizon = scenario.horizon;
    for (cell_idx, cell) in cells.iter().enumerate() {
        let spec = &cfg.filters[cell.filter_idx];
        let point = &points[cell.point_idx];
        let lscan = point.lscan.unwrap_or(spec.params.lscan_window);

        let mut per_run: Vec<&RunOutcome> = Vec::with_capacity(cfg.runs);
        for (job_idx, job) in jobs.iter().enumerate() {
            if job.0 == cell_idx {
                match &outcomes[job_idx] {
                    Ok(o) => per_run.push(o),
                    Err(e) => return Err(Error::InvalidParameter(e.to_string())),
                }
            }
        }
        debug_assert_eq!(per_run.len(), cfg.runs);

        let mut d_series = Vec::with_capacity(horizon);
        let mut loc_series = Vec::with_capacity(horizon);
        let mut missed_series = Vec::with_capacity(horizon);
        let mut false_series = Vec::with_capacity(horizon);
        for k in 1..=horizon {
            let collect = |f: fn(&RunOutcome) -> &Vec<f64>| -> Vec<f64> {
                per_run.iter().map(|o| f(o)[k - 1]).collect()
            };
            d_series.push(rms_over_runs(&collect(|o| &o.total_sq), cfg.runs, k)?);
            loc_series.push(rms_over_runs(&collect(|o| &o.loc_sq), cfg.runs, k)?);
            missed_series.push(rms_over_runs(&collect(|o| &o.missed_sq), cfg.runs, k)?);
            false_series.push(rms_over_runs(&collect(|o| &o.false_sq), cfg.runs, k)?);
        }
        let runtime_s = per_run.iter().map(|o| o.runtime_s).sum::<f64>() / cfg.runs as f64;

        table.records.push(ResultRecord {
            filter: spec.variant.label().to_string(),
            variant: match spec.variant.variant() {
                Variant::Alive => "alive".to_string(),
                Variant::All => "all".to_string(),
            },
            sweep_key: point.key.label().to_string(),
            sweep_value: point.value,
            lscan,
            d_total: rms_total(&d_series)?,
            localization: rms_total(&loc_series)?,
            missed: rms_total(&missed_series)?,
            false_: rms_total(&false_series)?,
            runtime_s,
        });
        for k in 1..=horizon {
            table.series.push(SeriesRecord {
                filter: spec.variant.label().to_string(),
                sweep_key: point.key.label().to_string(),
                sweep_value: point.value,
                lscan,
                step: k,
                d_k: d_series[k - 1],
                localization_k: loc_series[k - 1],
                missed_k: missed_series[k - 1],
                false_k: false_series[k - 1],
            });
        }
    }
    Ok(table)
}

// ============================================================================
// Result emission
// ============================================================================

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::InvalidConfig(format!("format: unknown output format `{other}`"))),
        }
    }
}

fn companion_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("");
    let name = if ext.is_empty() {
        format!("{stem}_series")
    } else {
        format!("{stem}_series.{ext}")
    };
    path.with_file_name(name)
}

/// Writes the aggregate records to `path` and the per-step series to a
/// `<stem>_series` companion file in the same format.
pub fn emit_results(table: &ResultTable, format: OutputFormat, path: &Path) -> Result<()> {
    let series_path = companion_path(path);
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_path(path)
                .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
            for r in &table.records {
                w.serialize(r).map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
            }
            if table.records.is_empty() {
                // Header-only output for empty tables.
                w.write_record([
                    "filter",
                    "variant",
                    "sweep_key",
                    "sweep_value",
                    "L",
                    "d_T",
                    "loc",
                    "missed",
                    "false",
                    "runtime_s",
                ])
                .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
            }
            w.flush()?;
            let mut w = csv::Writer::from_path(&series_path)
                .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
            for r in &table.series {
                w.serialize(r).map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
            }
            w.flush()?;
        }
        OutputFormat::Json => {
            let mut f = std::fs::File::create(path)?;
            serde_json::to_writer_pretty(&mut f, &table.records)
                .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
            f.write_all(b"\n")?;
            let mut f = std::fs::File::create(&series_path)?;
            serde_json::to_writer_pretty(&mut f, &table.series)
                .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
            f.write_all(b"\n")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{BirthComponent, BirthModel, ClutterRegion, MotionModel, SensorKind};
    use crate::simulator::{ScriptedTarget, TruthMode};
    use nalgebra::{DMatrix, DVector};

    /// Single-target, perfect-detection scenario in the Kalman regime.
    fn clean_scenario(horizon: usize) -> ScenarioConfig {
        let motion = MotionModel::constant_velocity_2d(1.0, 0.01, 0.999).unwrap();
        let birth = BirthModel::new(
            vec![BirthComponent {
                weight: 1.0,
                mean: DVector::from_vec(vec![100.0, 0.5, 100.0, -0.5]),
                cov: DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 0.25, 4.0, 0.25])),
            }],
            vec![],
        )
        .unwrap();
        let observation =
            DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let sensor = SensorModel::new(
            SensorKind::Linear { observation },
            DMatrix::identity(2, 2) * 0.01,
            1.0,
            0.0,
            ClutterRegion::new(vec![0.0, 0.0], vec![300.0, 300.0]).unwrap(),
        )
        .unwrap();
        ScenarioConfig {
            horizon,
            motion,
            birth,
            sensor,
            truth: TruthMode::Fixed(vec![ScriptedTarget {
                birth_step: 1,
                death_step: None,
                initial_state: DVector::from_vec(vec![100.0, 0.5, 100.0, -0.5]),
            }]),
        }
    }

    fn clean_campaign() -> CampaignConfig {
        CampaignConfig {
            version: 1,
            scenario: ScenarioSpec::Inline(Box::new(clean_scenario(12))),
            filters: vec![FilterSpec {
                variant: FilterKind::TpmbAlive,
                params: FilterParams { lscan_window: 12, ..FilterParams::default() },
            }],
            sweep: SweepConfig::default(),
            runs: 1,
            base_seed: 11,
            metric: None,
        }
    }

    #[test]
    fn clean_single_target_error_is_small() {
        let table = run_campaign(&clean_campaign()).unwrap();
        assert_eq!(table.records.len(), 1);
        let d = table.records[0].d_total;
        assert!(d < 1.0, "d_total = {d} should be well under 0.1 * cutoff");
        assert_eq!(table.series.len(), 12);
    }

    #[test]
    fn campaign_is_deterministic() {
        let cfg = clean_campaign();
        let a = run_campaign(&cfg).unwrap();
        let b = run_campaign(&cfg).unwrap();
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_eq!(x.d_total, y.d_total);
            assert_eq!(x.localization, y.localization);
        }
        assert_eq!(a.series, b.series);
    }

    #[test]
    fn sweep_grid_shape() {
        let mut cfg = clean_campaign();
        cfg.sweep = SweepConfig {
            detection_probs: vec![],
            clutter_rates: vec![],
            lscan_windows: vec![1, 5, 10],
            include_baseline: true,
        };
        let table = run_campaign(&cfg).unwrap();
        // One filter, baseline row, three L columns.
        assert_eq!(table.records.len(), 3);
        let ls: Vec<usize> = table.records.iter().map(|r| r.lscan).collect();
        assert_eq!(ls, vec![1, 5, 10]);
        // Series rows: horizon entries per (filter, point).
        assert_eq!(table.series.len(), 3 * 12);
    }

    #[test]
    fn emit_csv_and_json_roundtrip() {
        let dir = std::env::temp_dir().join(format!("tpmb-harness-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let table = run_campaign(&clean_campaign()).unwrap();

        let csv_path = dir.join("results.csv");
        emit_results(&table, OutputFormat::Csv, &csv_path).unwrap();
        let text = std::fs::read_to_string(&csv_path).unwrap();
        assert!(text.starts_with("filter,variant,sweep_key,sweep_value,L,d_T,loc,missed,false,runtime_s"));
        assert_eq!(text.lines().count(), 2);
        assert!(companion_path(&csv_path).exists());

        let json_path = dir.join("results.json");
        emit_results(&table, OutputFormat::Json, &json_path).unwrap();
        let text = std::fs::read_to_string(&json_path).unwrap();
        let parsed: Vec<ResultRecord> = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed, table.records);
        let series_text = std::fs::read_to_string(companion_path(&json_path)).unwrap();
        let parsed: Vec<SeriesRecord> = serde_json::from_str(&series_text).unwrap();
        assert_eq!(parsed, table.series);

        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn empty_table_emits_header_only() {
        let dir = std::env::temp_dir().join(format!("tpmb-harness-empty-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("empty.csv");
        emit_results(&ResultTable::default(), OutputFormat::Csv, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("filter,"));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn config_parsing_from_toml() {
        let text = r#"
            version = 1
            runs = 2
            base_seed = 7

            [scenario]
            name = "scenario1"
            horizon = 10

            [[filters]]
            variant = "tpmb-alive"

            [[filters]]
            variant = "tgnpmb-all"
            [filters.params]
            max_hypotheses = 50
            poisson_prune = 1e-5
            existence_prune = 1e-5
            alive_freeze = 1e-4
            estimate_threshold = 0.5
            lscan_window = 5
            gate_threshold = 13.8

            [sweep]
            clutter_rates = [10.0, 20.0]
            lscan_windows = [1, 5]
        "#;
        let cfg = CampaignConfig::from_toml(text).unwrap();
        assert_eq!(cfg.filters.len(), 2);
        assert_eq!(cfg.filters[1].variant, FilterKind::TgnpmbAll);
        assert_eq!(cfg.filters[1].params.max_hypotheses, 50);
        assert_eq!(sweep_points(&cfg.sweep).len(), 6);

        // Version mismatch is a config error with the field named.
        let bad = text.replace("version = 1", "version = 9");
        let err = CampaignConfig::from_toml(&bad).unwrap_err();
        assert!(format!("{err}").contains("version"));

        // Unknown scenario name is rejected.
        let bad = text.replace("scenario1", "scenario9");
        assert!(CampaignConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn filter_params_default_used_when_missing() {
        let spec: FilterSpec = toml::from_str("variant = \"tpmb-alive\"").unwrap();
        assert_eq!(spec.params, FilterParams::default());
        let p = spec.params;
        assert_eq!(p.max_hypotheses, 200);
        assert_eq!(p.poisson_prune, 1e-5);
        assert_eq!(p.existence_prune, 1e-5);
        assert_eq!(p.alive_freeze, 1e-4);
        assert_eq!(p.estimate_threshold, 0.5);
        assert_eq!(p.lscan_window, 5);
        assert_eq!(p.gate_threshold, 13.8);
    }

    #[test]
    fn unwritable_output_path_is_an_error() {
        let table = ResultTable::default();
        let path = std::path::Path::new("/nonexistent-dir/results.csv");
        assert!(emit_results(&table, OutputFormat::Csv, path).is_err());
        assert!(emit_results(&table, OutputFormat::Json, path).is_err());
    }

    #[test]
    fn inline_scenario_roundtrips_through_toml() {
        let scenario = clean_scenario(8);
        let spec = ScenarioSpec::Inline(Box::new(scenario.clone()));
        let text = toml::to_string(&spec).unwrap();
        let back: ScenarioSpec = toml::from_str(&text).unwrap();
        let resolved = back.resolve().unwrap();
        assert_eq!(resolved, scenario);

        // And inside a whole campaign config.
        let cfg = CampaignConfig {
            version: 1,
            scenario: spec,
            filters: vec![FilterSpec {
                variant: FilterKind::TpmbAlive,
                params: FilterParams::default(),
            }],
            sweep: SweepConfig::default(),
            runs: 1,
            base_seed: 3,
            metric: None,
        };
        let text = toml::to_string(&cfg).unwrap();
        let back = CampaignConfig::from_toml(&text).unwrap();
        let table = run_campaign(&back).unwrap();
        assert_eq!(table.records.len(), 1);
    }
}
