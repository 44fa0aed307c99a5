//! Input documents: task sets, device profiles and bench configurations.
//!
//! Wherever a path is expected, a built-in name is accepted too if no file of
//! that name exists: `1dma`, `2dma` for profiles; `table2`, `bk0`..`bk100`,
//! `real-amd`, `real-phi`, `real-k20` (optionally `real-amd:COUNT`) for task
//! sets.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use batchorder::workload::bk_benchmark;
use batchorder::{
    load_table2_tasks, sample_real_tasks, BenchmarkName, DeviceProfile, KernelModel, KernelStage,
    RealDevice, TaskSpec, TransferParams, TransferStage,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Tasks drawn for a `real-*` name without an explicit count.
pub const DEFAULT_REAL_COUNT: usize = 8;

const BYTES_PER_MB: f64 = 1.0e6;

/// One task record. Each stage is given either directly in milliseconds or
/// through the transfer/kernel estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub htd_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub htd_bytes: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub work: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dth_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dth_bytes: Option<u64>,
}

impl TaskRecord {
    pub fn to_task(&self) -> Result<TaskSpec, CliError> {
        let field = |msg: &str| CliError::Invalid(format!("task `{}`: {msg}", self.id));
        let transfer = |ms: Option<f64>, bytes: Option<u64>, name: &str| match (ms, bytes) {
            (Some(ms), None) => Ok(TransferStage::Fixed(ms)),
            (None, Some(b)) => Ok(TransferStage::Bytes(b)),
            (Some(_), Some(_)) => Err(field(&format!(
                "give either {name}_ms or {name}_bytes, not both"
            ))),
            (None, None) => Err(field(&format!("missing {name}_ms or {name}_bytes"))),
        };
        let htd = transfer(self.htd_ms, self.htd_bytes, "htd")?;
        let dth = transfer(self.dth_ms, self.dth_bytes, "dth")?;
        let kernel = match (self.k_ms, self.work, self.eta, self.gamma) {
            (Some(ms), None, None, None) => KernelStage::Fixed(ms),
            (None, Some(work), Some(eta), Some(gamma)) => {
                KernelStage::Model(KernelModel { work, eta, gamma })
            }
            (None, None, None, None) => {
                return Err(field(
                    "kernel duration unresolvable: give k_ms or work, eta and gamma",
                ))
            }
            _ => return Err(field("give either k_ms or all of work, eta and gamma")),
        };
        Ok(TaskSpec::new(&self.id, htd, kernel, dth)?)
    }
}

/// A task set document: either a bare array of records or `{"tasks": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TaskSetFile {
    Wrapped { tasks: Vec<TaskRecord> },
    Bare(Vec<TaskRecord>),
}

impl TaskSetFile {
    pub fn records(&self) -> &[TaskRecord] {
        match self {
            TaskSetFile::Wrapped { tasks } | TaskSetFile::Bare(tasks) => tasks,
        }
    }

    pub fn to_tasks(&self) -> Result<Vec<TaskSpec>, CliError> {
        let mut seen = HashSet::new();
        self.records()
            .iter()
            .map(|r| {
                if !seen.insert(r.id.as_str()) {
                    return Err(CliError::Invalid(format!("duplicate task id `{}`", r.id)));
                }
                r.to_task()
            })
            .collect()
    }
}

/// Device profile document. Bandwidths are in MB (10^6 bytes) per ms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileFile {
    pub name: String,
    pub dma_engines: u8,
    pub htd_latency_ms: f64,
    pub htd_bandwidth_mb_per_ms: f64,
    pub dth_latency_ms: f64,
    pub dth_bandwidth_mb_per_ms: f64,
    pub overlap_sigma: f64,
}

impl ProfileFile {
    pub fn to_profile(&self) -> Result<DeviceProfile, CliError> {
        Ok(DeviceProfile::new(
            &self.name,
            self.dma_engines,
            TransferParams::new(
                self.htd_latency_ms,
                self.htd_bandwidth_mb_per_ms * BYTES_PER_MB,
            ),
            TransferParams::new(
                self.dth_latency_ms,
                self.dth_bandwidth_mb_per_ms * BYTES_PER_MB,
            ),
            self.overlap_sigma,
        )?)
    }
}

impl From<&DeviceProfile> for ProfileFile {
    fn from(p: &DeviceProfile) -> Self {
        let htd = p.transfer_params(batchorder::Direction::HtD);
        let dth = p.transfer_params(batchorder::Direction::DtH);
        Self {
            name: p.name().to_string(),
            dma_engines: p.dma_engines(),
            htd_latency_ms: htd.latency_ms,
            htd_bandwidth_mb_per_ms: htd.bytes_per_ms / BYTES_PER_MB,
            dth_latency_ms: dth.latency_ms,
            dth_bandwidth_mb_per_ms: dth.bytes_per_ms / BYTES_PER_MB,
            overlap_sigma: p.overlap_sigma(),
        }
    }
}

/// Multi-worker scenario configuration. `pool` and `profile` are resolved
/// like `--tasks` and `--profile`, relative to the configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub workers: usize,
    pub batch_depth: usize,
    pub pool: String,
    pub profile: String,
    pub seed: u64,
    #[serde(default = "default_cap")]
    pub cap: usize,
    #[serde(default = "default_true")]
    pub evaluate_noreorder: bool,
}

fn default_cap() -> usize {
    10_000
}

fn default_true() -> bool {
    true
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::parse(path, e))
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = read(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::parse(path, e))
}

/// Task set from a file or a built-in name.
pub fn load_tasks(spec: &str, seed: u64) -> Result<Vec<TaskSpec>, CliError> {
    load_tasks_in(Path::new("."), spec, seed)
}

fn load_tasks_in(base: &Path, spec: &str, seed: u64) -> Result<Vec<TaskSpec>, CliError> {
    let path = base.join(spec);
    if path.is_file() {
        return parse_json::<TaskSetFile>(&path)?.to_tasks();
    }
    builtin_tasks(spec, seed).ok_or_else(|| {
        CliError::parse(
            path,
            "no such file and not a built-in task set (table2, bk0..bk100, real-amd|phi|k20[:COUNT])",
        )
    })
}

fn builtin_tasks(name: &str, seed: u64) -> Option<Vec<TaskSpec>> {
    let name = name.to_ascii_lowercase();
    if name == "table2" {
        return Some(load_table2_tasks());
    }
    if let Ok(bk) = name.parse::<BenchmarkName>() {
        return Some(bk_benchmark(bk).tasks);
    }
    let rest = name.strip_prefix("real-")?;
    let (device, count) = match rest.split_once(':') {
        Some((d, c)) => (d, c.parse().ok().filter(|&c| c > 0)?),
        None => (rest, DEFAULT_REAL_COUNT),
    };
    let device: RealDevice = device.parse().ok()?;
    Some(sample_real_tasks(device, count, seed))
}

/// Device profile from a file or a built-in name.
pub fn load_profile(spec: &str) -> Result<DeviceProfile, CliError> {
    load_profile_in(Path::new("."), spec)
}

fn load_profile_in(base: &Path, spec: &str) -> Result<DeviceProfile, CliError> {
    let path = base.join(spec);
    if path.is_file() {
        return parse_json::<ProfileFile>(&path)?.to_profile();
    }
    match spec.to_ascii_lowercase().as_str() {
        "1dma" | "default-1dma" => Ok(DeviceProfile::default_one_dma()),
        "2dma" | "default-2dma" => Ok(DeviceProfile::default_two_dma()),
        _ => Err(CliError::parse(
            path,
            "no such file and not a built-in profile (1dma, 2dma)",
        )),
    }
}

/// A parsed bench configuration with its pool and profile resolved.
#[derive(Debug, Clone)]
pub struct ResolvedBench {
    pub config: BenchConfig,
    pub pool: Vec<TaskSpec>,
    pub profile: DeviceProfile,
}

pub fn load_bench_config(path: &Path) -> Result<ResolvedBench, CliError> {
    let config: BenchConfig = parse_json(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let profile = load_profile_in(base, &config.profile)?;
    let pool = load_tasks_in(base, &config.pool, config.seed)?;
    Ok(ResolvedBench {
        config,
        pool,
        profile,
    })
}

/// Writes `value` as pretty JSON followed by a newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Internal(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Internal(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))
}
