//! Fault-injection experiment orchestration.
//!
//! A campaign runs one configuration for many repetitions, each with its own
//! derived seed, and aggregates accuracy and timing. Accuracy is the l2 norm
//! of the difference against a cached single-threaded, fault-free reference
//! run of the same kernel, dimensions, iteration count and element type.
//! Wall time is measured around the iteration loop only (setup, reference
//! comparison and file output are excluded), and one warm-up repetition is
//! discarded.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::element::{Dtype, Element};
use crate::error::{Error, Result};
use crate::fault::{schedule_random_fault, FaultInjector, FaultSpec};
use crate::grid::sweep_tile_into;
use crate::kernels::KernelSpec;
use crate::offline::OfflineState;
use crate::online::ProtectedState;
use crate::Parallelism;

/// Protection mode of a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    NoAbft,
    Online,
    Offline,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::NoAbft => write!(f, "no-abft"),
            Mode::Online => write!(f, "online"),
            Mode::Offline => write!(f, "offline"),
        }
    }
}

/// What to inject per repetition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FaultPolicy {
    None,
    /// One bit flip, uniform over iterations, cells and bit positions.
    RandomSingle,
    /// One bit flip at a fixed bit position, random iteration and cell.
    FixedBit { bit: u32 },
}

/// All parameters of a campaign. Field-for-field this is what `--config`
/// files carry and what `summary.json` echoes back.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CampaignConfig {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub iterations: u64,
    pub repetitions: u64,
    pub mode: Mode,
    pub epsilon: f64,
    /// Offline detection period.
    pub delta: usize,
    pub kernel: String,
    pub seed: u64,
    pub fault: FaultPolicy,
    pub dtype: Dtype,
    /// Worker threads per repetition; 0 uses all cores.
    pub threads: usize,
    /// Run repetitions concurrently; wall times are not recorded.
    pub parallel_reps: bool,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self::table_small()
    }
}

impl CampaignConfig {
    /// The desk-scale configuration: 64x64x8 tile, 128 iterations,
    /// 1000 repetitions, epsilon 1e-5, detection period 16.
    pub fn table_small() -> Self {
        CampaignConfig {
            nx: 64,
            ny: 64,
            nz: 8,
            iterations: 128,
            repetitions: 1000,
            mode: Mode::Online,
            epsilon: 1e-5,
            delta: 16,
            kernel: "hotspot3d".into(),
            seed: 1,
            fault: FaultPolicy::None,
            dtype: Dtype::F32,
            threads: 0,
            parallel_reps: false,
        }
    }

    /// The large configuration: 512x512x8 tile, 256 iterations,
    /// 100 repetitions.
    pub fn table_large() -> Self {
        CampaignConfig {
            nx: 512,
            ny: 512,
            nz: 8,
            iterations: 256,
            repetitions: 100,
            ..Self::table_small()
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.nx, self.ny, self.nz)
    }

    /// Seed of repetition `rep`.
    pub fn rep_seed(&self, rep: u64) -> u64 {
        self.seed ^ rep
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 || self.nz == 0 {
            return Err(Error::InvalidParams("tile dimensions must be positive".into()));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidParams("iterations must be at least 1".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::InvalidParams("repetitions must be at least 1".into()));
        }
        if self.epsilon <= 0.0 {
            return Err(Error::InvalidParams("epsilon must be positive".into()));
        }
        if self.delta == 0 || self.delta > 128 {
            return Err(Error::InvalidParams("delta must be in 1..=128".into()));
        }
        if let FaultPolicy::FixedBit { bit } = self.fault {
            if bit >= self.dtype.bit_width() {
                return Err(Error::BitOutOfRange { bit, width: self.dtype.bit_width() });
            }
        }
        Ok(())
    }
}

/// Result of one repetition.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunResult {
    pub rep: u64,
    pub seed: u64,
    pub mode: Mode,
    pub fault: Option<FaultSpec>,
    pub detections: u64,
    pub corrections: u64,
    pub rollbacks: u64,
    pub uncorrectable: bool,
    pub persistent_error: bool,
    pub l2_error: f64,
    pub wall_ms: f64,
}

/// Campaign-level statistics.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Aggregates {
    pub l2_mean: f64,
    pub l2_median: f64,
    pub l2_max: f64,
    pub wall_mean_ms: f64,
    pub wall_std_ms: f64,
    /// Fraction of repetitions with at least one detection.
    pub detection_rate: f64,
    /// Fraction of repetitions with at least one applied correction.
    pub correction_rate: f64,
    pub rollback_total: u64,
    pub uncorrectable_count: u64,
    pub persistent_error_count: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub schema: u32,
    pub config: CampaignConfig,
    pub aggregates: Aggregates,
}

/// Euclidean norm of the difference between two equally sized value sets,
/// accumulated in f64 regardless of the element type.
pub fn l2_error<T: Element>(reference: &[T], computed: &[T]) -> Result<f64> {
    if reference.len() != computed.len() {
        return Err(Error::LengthMismatch { left: reference.len(), right: computed.len() });
    }
    let mut acc = 0.0f64;
    for (&r, &c) in reference.iter().zip(computed) {
        let d = r.as_f64() - c.as_f64();
        acc += d * d;
    }
    Ok(acc.sqrt())
}

type RefKey = (String, usize, usize, usize, u64);

/// Cache of single-threaded fault-free reference runs, keyed by kernel,
/// dimensions and iteration count (per element type).
#[derive(Default)]
pub struct ReferenceCache {
    f32: HashMap<RefKey, Arc<Vec<f32>>>,
    f64: HashMap<RefKey, Arc<Vec<f64>>>,
}

impl ReferenceCache {
    pub fn new() -> Self {
        Self::default()
    }
}

trait CacheSlot<T: Element> {
    fn slot(&mut self) -> &mut HashMap<RefKey, Arc<Vec<T>>>;
}

impl CacheSlot<f32> for ReferenceCache {
    fn slot(&mut self) -> &mut HashMap<RefKey, Arc<Vec<f32>>> {
        &mut self.f32
    }
}

impl CacheSlot<f64> for ReferenceCache {
    fn slot(&mut self) -> &mut HashMap<RefKey, Arc<Vec<f64>>> {
        &mut self.f64
    }
}

/// Runs the unprotected kernel single-threaded with no faults and returns
/// the flattened final cell values (layer-major, row-major).
pub fn compute_reference<T: Element>(config: &CampaignConfig) -> Result<Vec<T>> {
    let kernel = KernelSpec::<T>::by_name(&config.kernel)?;
    let (nx, ny, nz) = config.dims();
    let constants = kernel.constants(nx, ny, nz);
    let mut front = kernel.initial_tile(nx, ny, nz);
    let mut back = front.clone();
    let par = Parallelism::sequential();
    let nofault = vec![None; nz];
    for _ in 0..config.iterations {
        sweep_tile_into(&front, &kernel, &constants, &nofault, &par, &mut back, None)?;
        std::mem::swap(&mut front, &mut back);
    }
    Ok(front.cells().collect())
}

fn reference_for<T: Element>(
    cache: &mut ReferenceCache,
    config: &CampaignConfig,
) -> Result<Arc<Vec<T>>>
where
    ReferenceCache: CacheSlot<T>,
{
    let key: RefKey = (config.kernel.clone(), config.nx, config.ny, config.nz, config.iterations);
    if let Some(hit) = cache.slot().get(&key) {
        return Ok(Arc::clone(hit));
    }
    let value = Arc::new(compute_reference::<T>(config)?);
    cache.slot().insert(key, Arc::clone(&value));
    Ok(value)
}

fn scheduled_fault<T: Element>(config: &CampaignConfig, seed: u64) -> Option<FaultSpec> {
    match config.fault {
        FaultPolicy::None => None,
        FaultPolicy::RandomSingle => Some(schedule_random_fault(
            seed,
            config.dims(),
            config.iterations,
            T::BIT_WIDTH,
        )),
        FaultPolicy::FixedBit { bit } => {
            let mut spec = schedule_random_fault(seed, config.dims(), config.iterations, T::BIT_WIDTH);
            spec.bit = bit;
            Some(spec)
        }
    }
}

fn run_single_with_reference<T: Element>(
    config: &CampaignConfig,
    rep: u64,
    reference: &[T],
) -> Result<RunResult> {
    let kernel = KernelSpec::<T>::by_name(&config.kernel)?;
    let (nx, ny, nz) = config.dims();
    let constants = kernel.constants(nx, ny, nz);
    let tile = kernel.initial_tile(nx, ny, nz);
    let seed = config.rep_seed(rep);
    let fault = scheduled_fault::<T>(config, seed);
    let mut injector = fault.map(FaultInjector::new);
    let par = Parallelism::new(config.threads);

    let mut detections = 0u64;
    let mut corrections = 0u64;
    let mut rollbacks = 0u64;
    let mut uncorrectable = false;
    let mut persistent_error = false;

    let (final_cells, wall_ms): (Vec<T>, f64) = match config.mode {
        Mode::NoAbft => {
            let mut front = tile;
            let mut back = front.clone();
            let start = Instant::now();
            for _ in 0..config.iterations {
                let t = front.iteration();
                let faults: Vec<_> = match injector.as_mut() {
                    Some(inj) => (0..nz).map(|z| inj.take_for(t, z)).collect(),
                    None => vec![None; nz],
                };
                sweep_tile_into(&front, &kernel, &constants, &faults, &par, &mut back, None)?;
                std::mem::swap(&mut front, &mut back);
            }
            let wall = start.elapsed().as_secs_f64() * 1e3;
            (front.cells().collect(), wall)
        }
        Mode::Online => {
            let mut state = ProtectedState::new(tile, kernel, constants, config.epsilon)?;
            let start = Instant::now();
            for _ in 0..config.iterations {
                match state.step(&par, injector.as_mut()) {
                    Ok(records) => corrections += records.len() as u64,
                    Err(Error::Uncorrectable(_)) => uncorrectable = true,
                    Err(e) => return Err(e),
                }
            }
            let wall = start.elapsed().as_secs_f64() * 1e3;
            detections = state.detection_events();
            (state.tile().cells().collect(), wall)
        }
        Mode::Offline => {
            let mut state = OfflineState::new(tile, kernel, constants, config.epsilon, config.delta)?;
            let start = Instant::now();
            let mut done = 0u64;
            while done < config.iterations {
                let len = (config.iterations - done).min(config.delta as u64) as usize;
                match state.step_block(len, &par, injector.as_mut()) {
                    Ok(_) => {}
                    Err(Error::PersistentError { .. }) => {
                        persistent_error = true;
                        break;
                    }
                    Err(e) => return Err(e),
                }
                done += len as u64;
            }
            let wall = start.elapsed().as_secs_f64() * 1e3;
            detections = state.detections();
            rollbacks = state.rollbacks();
            (state.tile().cells().collect(), wall)
        }
    };

    let l2 = l2_error(reference, &final_cells)?;
    Ok(RunResult {
        rep,
        seed,
        mode: config.mode,
        fault,
        detections,
        corrections,
        rollbacks,
        uncorrectable,
        persistent_error,
        l2_error: l2,
        wall_ms,
    })
}

/// Runs one repetition end to end. Uncorrectable and persistent-error
/// outcomes land in the result record; the run itself completes.
pub fn run_single(config: &CampaignConfig, rep: u64) -> Result<RunResult> {
    config.validate()?;
    let mut cache = ReferenceCache::new();
    match config.dtype {
        Dtype::F32 => {
            let reference = reference_for::<f32>(&mut cache, config)?;
            run_single_with_reference(config, rep, &reference)
        }
        Dtype::F64 => {
            let reference = reference_for::<f64>(&mut cache, config)?;
            run_single_with_reference(config, rep, &reference)
        }
    }
}

fn execute_reps<T: Element>(
    config: &CampaignConfig,
    reference: &[T],
    warmup: bool,
) -> Result<Vec<RunResult>> {
    if warmup {
        run_single_with_reference(config, 0, reference)?;
    }
    if config.parallel_reps {
        // Timing is meaningless under concurrent repetitions; each rep runs
        // single-threaded and wall times are zeroed.
        let mut rep_config = config.clone();
        rep_config.threads = 1;
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            let mut results = (0..config.repetitions)
                .into_par_iter()
                .map(|rep| run_single_with_reference(&rep_config, rep, reference))
                .collect::<Result<Vec<_>>>()?;
            for r in &mut results {
                r.wall_ms = 0.0;
            }
            return Ok(results);
        }
        #[cfg(not(feature = "parallel"))]
        {
            let mut results = (0..config.repetitions)
                .map(|rep| run_single_with_reference(&rep_config, rep, reference))
                .collect::<Result<Vec<_>>>()?;
            for r in &mut results {
                r.wall_ms = 0.0;
            }
            return Ok(results);
        }
    }
    (0..config.repetitions)
        .map(|rep| run_single_with_reference(config, rep, reference))
        .collect()
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut n) = (0.0, 0u64);
    for v in values {
        sum += v;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Median as the midpoint of the sorted values (mean of the two central
/// elements for even counts).
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in aggregates"));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Linear-interpolation quantile on sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
    }
}

pub fn aggregate(results: &[RunResult]) -> Aggregates {
    let l2s: Vec<f64> = results.iter().map(|r| r.l2_error).collect();
    let walls: Vec<f64> = results.iter().map(|r| r.wall_ms).collect();
    let wall_mean = mean(walls.iter().copied());
    let wall_var = mean(walls.iter().map(|w| (w - wall_mean) * (w - wall_mean)));
    Aggregates {
        l2_mean: mean(l2s.iter().copied()),
        l2_median: median(&l2s),
        l2_max: l2s.iter().copied().fold(0.0, f64::max),
        wall_mean_ms: wall_mean,
        wall_std_ms: wall_var.sqrt(),
        detection_rate: mean(results.iter().map(|r| f64::from(r.detections > 0))),
        correction_rate: mean(results.iter().map(|r| f64::from(r.corrections > 0))),
        rollback_total: results.iter().map(|r| r.rollbacks).sum(),
        uncorrectable_count: results.iter().filter(|r| r.uncorrectable).count() as u64,
        persistent_error_count: results.iter().filter(|r| r.persistent_error).count() as u64,
    }
}

pub const RESULTS_CSV_HEADER: &[&str] = &[
    "rep",
    "seed",
    "mode",
    "fault_iteration",
    "fault_z",
    "fault_y",
    "fault_x",
    "fault_bit",
    "detections",
    "corrections",
    "rollbacks",
    "uncorrectable",
    "persistent_error",
    "l2_error",
    "wall_ms",
];

/// Writes one row per repetition to `results.csv` in `out_dir`.
pub fn write_results_csv(out_dir: &Path, results: &[RunResult]) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let mut writer = csv::Writer::from_path(out_dir.join("results.csv"))
        .map_err(|e| Error::Format(e.to_string()))?;
    writer
        .write_record(RESULTS_CSV_HEADER)
        .map_err(|e| Error::Format(e.to_string()))?;
    for r in results {
        let (fi, fz, fy, fx, fb) = match r.fault {
            Some(f) => (
                f.iteration.to_string(),
                f.z.to_string(),
                f.y.to_string(),
                f.x.to_string(),
                f.bit.to_string(),
            ),
            None => Default::default(),
        };
        writer
            .write_record([
                r.rep.to_string(),
                r.seed.to_string(),
                r.mode.to_string(),
                fi,
                fz,
                fy,
                fx,
                fb,
                r.detections.to_string(),
                r.corrections.to_string(),
                r.rollbacks.to_string(),
                r.uncorrectable.to_string(),
                r.persistent_error.to_string(),
                r.l2_error.to_string(),
                r.wall_ms.to_string(),
            ])
            .map_err(|e| Error::Format(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

fn write_summary_json(out_dir: &Path, summary: &CampaignSummary) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let json = serde_json::to_string_pretty(summary).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(out_dir.join("summary.json"), json)?;
    Ok(())
}

/// Runs a full campaign: one discarded warm-up repetition, then
/// `repetitions` recorded ones. When `out_dir` is given, writes
/// `results.csv` and `summary.json`.
pub fn run_campaign(config: &CampaignConfig, out_dir: Option<&Path>) -> Result<CampaignSummary> {
    let (summary, _results) = run_campaign_with_results(config, out_dir)?;
    Ok(summary)
}

/// As [`run_campaign`], also returning the per-repetition results.
pub fn run_campaign_with_results(
    config: &CampaignConfig,
    out_dir: Option<&Path>,
) -> Result<(CampaignSummary, Vec<RunResult>)> {
    config.validate()?;
    let mut cache = ReferenceCache::new();
    let results = match config.dtype {
        Dtype::F32 => {
            let reference = reference_for::<f32>(&mut cache, config)?;
            execute_reps(config, &reference, true)?
        }
        Dtype::F64 => {
            let reference = reference_for::<f64>(&mut cache, config)?;
            execute_reps(config, &reference, true)?
        }
    };
    let summary = CampaignSummary {
        schema: 1,
        config: config.clone(),
        aggregates: aggregate(&results),
    };
    if let Some(dir) = out_dir {
        write_results_csv(dir, &results)?;
        write_summary_json(dir, &summary)?;
    }
    Ok((summary, results))
}

/// Per-bit aggregate row of a bit-position sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BitRow {
    pub bit: u32,
    pub mode: Mode,
    pub reps: u64,
    pub detection_rate: f64,
    pub correction_rate: f64,
    pub l2_min: f64,
    pub l2_q1: f64,
    pub l2_median: f64,
    pub l2_q3: f64,
    pub l2_max: f64,
}

/// Runs one fixed-bit campaign per bit position 0..32 at the configured
/// mode. Requires binary32 elements. Writes `bitsweep.csv` when `out_dir`
/// is given.
pub fn bit_position_sweep(
    config: &CampaignConfig,
    out_dir: Option<&Path>,
) -> Result<Vec<BitRow>> {
    config.validate()?;
    if config.dtype != Dtype::F32 {
        return Err(Error::InvalidParams("bit-position sweep runs on binary32 elements".into()));
    }
    let mut cache = ReferenceCache::new();
    let reference = reference_for::<f32>(&mut cache, config)?;
    let mut rows = Vec::with_capacity(32);
    for bit in 0..32u32 {
        let mut sub = config.clone();
        sub.fault = FaultPolicy::FixedBit { bit };
        let results = execute_reps(&sub, &reference, bit == 0)?;
        let mut l2s: Vec<f64> = results.iter().map(|r| r.l2_error).collect();
        l2s.sort_by(|a, b| a.partial_cmp(b).expect("no NaN l2"));
        rows.push(BitRow {
            bit,
            mode: config.mode,
            reps: config.repetitions,
            detection_rate: mean(results.iter().map(|r| f64::from(r.detections > 0))),
            correction_rate: mean(results.iter().map(|r| f64::from(r.corrections > 0))),
            l2_min: l2s.first().copied().unwrap_or(0.0),
            l2_q1: quantile(&l2s, 0.25),
            l2_median: quantile(&l2s, 0.5),
            l2_q3: quantile(&l2s, 0.75),
            l2_max: l2s.last().copied().unwrap_or(0.0),
        });
    }
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        let mut writer = csv::Writer::from_path(dir.join("bitsweep.csv"))
            .map_err(|e| Error::Format(e.to_string()))?;
        writer
            .write_record([
                "bit",
                "mode",
                "reps",
                "detection_rate",
                "correction_rate",
                "l2_min",
                "l2_q1",
                "l2_median",
                "l2_q3",
                "l2_max",
            ])
            .map_err(|e| Error::Format(e.to_string()))?;
        for r in &rows {
            writer
                .write_record([
                    r.bit.to_string(),
                    r.mode.to_string(),
                    r.reps.to_string(),
                    r.detection_rate.to_string(),
                    r.correction_rate.to_string(),
                    r.l2_min.to_string(),
                    r.l2_q1.to_string(),
                    r.l2_median.to_string(),
                    r.l2_q3.to_string(),
                    r.l2_max.to_string(),
                ])
                .map_err(|e| Error::Format(e.to_string()))?;
        }
        writer.flush()?;
    }
    Ok(rows)
}

/// One row of a detection-period sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PeriodRow {
    pub delta: usize,
    /// `error-free` or `single-fault`.
    pub scenario: String,
    pub reps: u64,
    pub wall_mean_ms: f64,
    pub wall_std_ms: f64,
    pub l2_median: f64,
    pub rollback_total: u64,
}

/// Measures offline wall time across detection periods, in both the
/// error-free and the single-random-fault scenario. Writes
/// `periodsweep.csv` when `out_dir` is given.
pub fn period_sweep(
    config: &CampaignConfig,
    deltas: &[usize],
    out_dir: Option<&Path>,
) -> Result<Vec<PeriodRow>> {
    if config.mode != Mode::Offline {
        return Err(Error::InvalidParams("period sweep requires offline mode".into()));
    }
    config.validate()?;
    if deltas.is_empty() {
        return Err(Error::InvalidParams("at least one delta required".into()));
    }
    let mut cache = ReferenceCache::new();
    let mut rows = Vec::new();
    let mut first = true;
    for &delta in deltas {
        for (scenario, fault) in
            [("error-free", FaultPolicy::None), ("single-fault", FaultPolicy::RandomSingle)]
        {
            let mut sub = config.clone();
            sub.delta = delta;
            sub.fault = fault;
            sub.validate()?;
            let results = match sub.dtype {
                Dtype::F32 => {
                    let reference = reference_for::<f32>(&mut cache, &sub)?;
                    execute_reps(&sub, &reference, first)?
                }
                Dtype::F64 => {
                    let reference = reference_for::<f64>(&mut cache, &sub)?;
                    execute_reps(&sub, &reference, first)?
                }
            };
            first = false;
            let agg = aggregate(&results);
            rows.push(PeriodRow {
                delta,
                scenario: scenario.into(),
                reps: sub.repetitions,
                wall_mean_ms: agg.wall_mean_ms,
                wall_std_ms: agg.wall_std_ms,
                l2_median: agg.l2_median,
                rollback_total: agg.rollback_total,
            });
        }
    }
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        let mut writer = csv::Writer::from_path(dir.join("periodsweep.csv"))
            .map_err(|e| Error::Format(e.to_string()))?;
        writer
            .write_record([
                "delta",
                "scenario",
                "reps",
                "wall_mean_ms",
                "wall_std_ms",
                "l2_median",
                "rollback_total",
            ])
            .map_err(|e| Error::Format(e.to_string()))?;
        for r in &rows {
            writer
                .write_record([
                    r.delta.to_string(),
                    r.scenario.clone(),
                    r.reps.to_string(),
                    r.wall_mean_ms.to_string(),
                    r.wall_std_ms.to_string(),
                    r.l2_median.to_string(),
                    r.rollback_total.to_string(),
                ])
                .map_err(|e| Error::Format(e.to_string()))?;
        }
        writer.flush()?;
    }
    Ok(rows)
}

/// Measures the error-free wall-time ratio between a protected mode and the
/// unprotected kernel on the same configuration. Returns
/// `(protected_mean_ms, unprotected_mean_ms)`.
pub fn overhead_ratio(config: &CampaignConfig) -> Result<(f64, f64)> {
    let mut protected = config.clone();
    protected.fault = FaultPolicy::None;
    let mut plain = protected.clone();
    plain.mode = Mode::NoAbft;
    let p = run_campaign(&protected, None)?;
    let u = run_campaign(&plain, None)?;
    Ok((p.aggregates.wall_mean_ms, u.aggregates.wall_mean_ms))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l2_examples() {
        let a = vec![1.0f32, 2.0, 3.0];
        assert_eq!(l2_error(&a, &a).unwrap(), 0.0);
        let mut b = a.clone();
        b[1] += 3.0;
        assert_eq!(l2_error(&a, &b).unwrap(), 3.0);
        assert!(matches!(
            l2_error(&a, &[1.0f32]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn median_and_quantiles() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        let sorted = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(quantile(&sorted, 0.0), 0.0);
        assert_eq!(quantile(&sorted, 1.0), 3.0);
        assert_eq!(quantile(&sorted, 0.5), 1.5);
    }

    #[test]
    fn config_validation() {
        let mut c = CampaignConfig::table_small();
        c.repetitions = 0;
        assert!(c.validate().is_err());
        let mut c = CampaignConfig::table_small();
        c.fault = FaultPolicy::FixedBit { bit: 32 };
        assert!(c.validate().is_err());
        c.dtype = Dtype::F64;
        assert!(c.validate().is_ok());
        assert!(CampaignConfig::table_large().validate().is_ok());
    }

    #[test]
    fn rep_seed_xor() {
        let c = CampaignConfig { seed: 0b1100, ..CampaignConfig::table_small() };
        assert_eq!(c.rep_seed(0), 0b1100);
        assert_eq!(c.rep_seed(5), 0b1001);
    }
}
