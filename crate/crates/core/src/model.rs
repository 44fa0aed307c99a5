//! Domain types and closed-form time estimators for transfer and kernel
//! commands.
//!
//! All times are milliseconds stored as `f64`. Byte counts are plain bytes and
//! bandwidths are bytes per millisecond.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid device profile: {0}")]
    InvalidProfile(String),
    #[error("invalid task `{id}`: {reason}")]
    InvalidTask { id: String, reason: String },
    #[error("kernel fit needs at least two distinct work sizes, got {distinct}")]
    InsufficientSamples { distinct: usize },
}

/// The three command kinds a task is split into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CommandKind {
    HtD,
    K,
    DtH,
}

impl CommandKind {
    pub const ALL: [CommandKind; 3] = [CommandKind::HtD, CommandKind::K, CommandKind::DtH];

    pub fn as_str(self) -> &'static str {
        match self {
            CommandKind::HtD => "HtD",
            CommandKind::K => "K",
            CommandKind::DtH => "DtH",
        }
    }

    pub(crate) fn index(self) -> usize {
        match self {
            CommandKind::HtD => 0,
            CommandKind::K => 1,
            CommandKind::DtH => 2,
        }
    }
}

impl fmt::Display for CommandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CommandKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "HtD" => Ok(CommandKind::HtD),
            "K" => Ok(CommandKind::K),
            "DtH" => Ok(CommandKind::DtH),
            other => Err(format!("unknown command kind `{other}`")),
        }
    }
}

/// Transfer direction over the host/device link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    HtD,
    DtH,
}

/// Latency/bandwidth pair describing one transfer direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferParams {
    pub latency_ms: f64,
    pub bytes_per_ms: f64,
}

impl TransferParams {
    pub fn new(latency_ms: f64, bytes_per_ms: f64) -> Self {
        Self {
            latency_ms,
            bytes_per_ms,
        }
    }
}

/// Accelerator description: number of copy engines, transfer parameters per
/// direction and the overlap degradation factor.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceProfile {
    name: String,
    dma_engines: u8,
    htd: TransferParams,
    dth: TransferParams,
    overlap_sigma: f64,
}

impl DeviceProfile {
    pub fn new(
        name: impl Into<String>,
        dma_engines: u8,
        htd: TransferParams,
        dth: TransferParams,
        overlap_sigma: f64,
    ) -> Result<Self, ModelError> {
        let name = name.into();
        if !(1..=2).contains(&dma_engines) {
            return Err(ModelError::InvalidProfile(format!(
                "dma_engines must be 1 or 2, got {dma_engines}"
            )));
        }
        for (label, p) in [("htd", htd), ("dth", dth)] {
            if !(p.bytes_per_ms.is_finite() && p.bytes_per_ms > 0.0) {
                return Err(ModelError::InvalidProfile(format!(
                    "{label} bandwidth must be positive, got {}",
                    p.bytes_per_ms
                )));
            }
            if !(p.latency_ms.is_finite() && p.latency_ms >= 0.0) {
                return Err(ModelError::InvalidProfile(format!(
                    "{label} latency must be non-negative, got {}",
                    p.latency_ms
                )));
            }
        }
        if !(overlap_sigma > 0.0 && overlap_sigma <= 1.0) {
            return Err(ModelError::InvalidProfile(format!(
                "overlap_sigma must lie in (0, 1], got {overlap_sigma}"
            )));
        }
        Ok(Self {
            name,
            dma_engines,
            htd,
            dth,
            overlap_sigma,
        })
    }

    /// Single copy engine device. Transfer parameters are illustrative.
    pub fn default_one_dma() -> Self {
        Self::new(
            "default-1dma",
            1,
            TransferParams::new(0.01, 6.0e6),
            TransferParams::new(0.01, 6.0e6),
            1.0,
        )
        .expect("valid built-in profile")
    }

    /// Dual copy engine device with symmetric overlap degradation of 0.5.
    pub fn default_two_dma() -> Self {
        Self::new(
            "default-2dma",
            2,
            TransferParams::new(0.01, 6.0e6),
            TransferParams::new(0.01, 6.0e6),
            0.5,
        )
        .expect("valid built-in profile")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dma_engines(&self) -> u8 {
        self.dma_engines
    }

    pub fn has_dual_dma(&self) -> bool {
        self.dma_engines == 2
    }

    pub fn transfer_params(&self, direction: Direction) -> TransferParams {
        match direction {
            Direction::HtD => self.htd,
            Direction::DtH => self.dth,
        }
    }

    /// Rate at which each transfer progresses while both copy engines are
    /// busy. Meaningless (and unused) on single-engine devices.
    pub fn overlap_sigma(&self) -> f64 {
        self.overlap_sigma
    }
}

/// `latency + bytes / bandwidth`; a zero-byte transfer is a null stage and
/// takes no time.
pub fn estimate_transfer(bytes: u64, direction: Direction, profile: &DeviceProfile) -> f64 {
    if bytes == 0 {
        return 0.0;
    }
    let p = profile.transfer_params(direction);
    p.latency_ms + bytes as f64 / p.bytes_per_ms
}

/// Linear kernel model: `eta * work + gamma`.
pub fn estimate_kernel(work: f64, eta: f64, gamma: f64) -> f64 {
    eta * work + gamma
}

/// Parameters of the linear kernel model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelModel {
    pub work: f64,
    pub eta: f64,
    pub gamma: f64,
}

impl KernelModel {
    pub fn estimate(&self) -> f64 {
        estimate_kernel(self.work, self.eta, self.gamma)
    }
}

/// Result of a least-squares kernel fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelFit {
    pub eta: f64,
    pub gamma: f64,
}

impl KernelFit {
    /// A negative rate or latency is physically meaningless; callers may
    /// still use the fit but should treat it with suspicion.
    pub fn is_negative(&self) -> bool {
        self.eta < 0.0 || self.gamma < 0.0
    }
}

/// Ordinary least-squares line through `(work, measured_time)` samples.
pub fn fit_kernel_model(samples: &[(f64, f64)]) -> Result<KernelFit, ModelError> {
    let mut xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() < 2 {
        return Err(ModelError::InsufficientSamples { distinct: xs.len() });
    }

    let n = samples.len() as f64;
    let mean_x = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let mean_y = samples.iter().map(|s| s.1).sum::<f64>() / n;
    // centred sums keep the fit well conditioned for large work sizes
    let (sxy, sxx) = samples.iter().fold((0.0, 0.0), |(sxy, sxx), &(x, y)| {
        let dx = x - mean_x;
        (sxy + dx * (y - mean_y), sxx + dx * dx)
    });
    let eta = sxy / sxx;
    let gamma = mean_y - eta * mean_x;
    Ok(KernelFit { eta, gamma })
}

/// Source of a transfer stage duration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TransferStage {
    Bytes(u64),
    Fixed(f64),
}

impl TransferStage {
    pub fn resolve(&self, direction: Direction, profile: &DeviceProfile) -> f64 {
        match *self {
            TransferStage::Bytes(b) => estimate_transfer(b, direction, profile),
            TransferStage::Fixed(ms) => ms,
        }
    }

    fn is_null(&self) -> bool {
        match *self {
            TransferStage::Bytes(b) => b == 0,
            TransferStage::Fixed(ms) => ms == 0.0,
        }
    }
}

/// Source of a kernel stage duration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelStage {
    Model(KernelModel),
    Fixed(f64),
}

impl KernelStage {
    pub fn resolve(&self) -> f64 {
        match self {
            KernelStage::Model(m) => m.estimate(),
            KernelStage::Fixed(ms) => *ms,
        }
    }
}

/// Resolved durations of the three stages of a task. A zero entry means the
/// stage is null and produces no command.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageTimes {
    pub htd: f64,
    pub k: f64,
    pub dth: f64,
}

impl StageTimes {
    pub fn new(htd: f64, k: f64, dth: f64) -> Self {
        Self { htd, k, dth }
    }

    pub fn get(&self, kind: CommandKind) -> f64 {
        match kind {
            CommandKind::HtD => self.htd,
            CommandKind::K => self.k,
            CommandKind::DtH => self.dth,
        }
    }

    pub fn transfer(&self) -> f64 {
        self.htd + self.dth
    }

    /// Length of the task's own dependency chain.
    pub fn total(&self) -> f64 {
        self.htd + self.k + self.dth
    }

    pub fn dominance(&self) -> TaskDominance {
        if self.transfer() > self.k {
            TaskDominance::DominantTransfer
        } else {
            TaskDominance::DominantKernel
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskDominance {
    DominantKernel,
    DominantTransfer,
}

/// One offloadable task: HtD transfer, kernel, DtH transfer.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    id: String,
    htd: TransferStage,
    kernel: KernelStage,
    dth: TransferStage,
}

impl TaskSpec {
    pub fn new(
        id: impl Into<String>,
        htd: TransferStage,
        kernel: KernelStage,
        dth: TransferStage,
    ) -> Result<Self, ModelError> {
        let id = id.into();
        let invalid = |reason: String| ModelError::InvalidTask {
            id: id.clone(),
            reason,
        };
        for (label, stage) in [("htd", &htd), ("dth", &dth)] {
            if let TransferStage::Fixed(ms) = stage {
                if !(ms.is_finite() && *ms >= 0.0) {
                    return Err(invalid(format!("{label} duration must be >= 0, got {ms}")));
                }
            }
        }
        match &kernel {
            KernelStage::Fixed(ms) => {
                if !(ms.is_finite() && *ms >= 0.0) {
                    return Err(invalid(format!("kernel duration must be >= 0, got {ms}")));
                }
            }
            KernelStage::Model(m) => {
                for (label, v) in [("work", m.work), ("eta", m.eta), ("gamma", m.gamma)] {
                    if !(v.is_finite() && v >= 0.0) {
                        return Err(invalid(format!("kernel {label} must be >= 0, got {v}")));
                    }
                }
            }
        }
        if htd.is_null() && dth.is_null() && kernel.resolve() == 0.0 {
            return Err(invalid("every stage is null".into()));
        }
        Ok(Self {
            id,
            htd,
            kernel,
            dth,
        })
    }

    /// Task given directly by its three stage durations in milliseconds.
    pub fn fixed(id: impl Into<String>, htd: f64, k: f64, dth: f64) -> Result<Self, ModelError> {
        Self::new(
            id,
            TransferStage::Fixed(htd),
            KernelStage::Fixed(k),
            TransferStage::Fixed(dth),
        )
    }

    /// Task whose durations come from the transfer and kernel estimators.
    pub fn modeled(
        id: impl Into<String>,
        htd_bytes: u64,
        kernel: KernelModel,
        dth_bytes: u64,
    ) -> Result<Self, ModelError> {
        Self::new(
            id,
            TransferStage::Bytes(htd_bytes),
            KernelStage::Model(kernel),
            TransferStage::Bytes(dth_bytes),
        )
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn htd(&self) -> TransferStage {
        self.htd
    }

    pub fn kernel(&self) -> KernelStage {
        self.kernel
    }

    pub fn dth(&self) -> TransferStage {
        self.dth
    }

    /// Stage durations when every stage is given directly.
    pub fn fixed_durations(&self) -> Option<StageTimes> {
        match (self.htd, self.kernel, self.dth) {
            (TransferStage::Fixed(h), KernelStage::Fixed(k), TransferStage::Fixed(d)) => {
                Some(StageTimes::new(h, k, d))
            }
            _ => None,
        }
    }

    pub fn with_id(&self, id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            ..self.clone()
        }
    }

    pub fn stage_times(&self, profile: &DeviceProfile) -> StageTimes {
        StageTimes {
            htd: self.htd.resolve(Direction::HtD, profile),
            k: self.kernel.resolve(),
            dth: self.dth.resolve(Direction::DtH, profile),
        }
    }
}

/// Dominant-transfer iff `t_HtD + t_DtH > t_K`; the boundary is kernel
/// dominant.
pub fn classify_task(task: &TaskSpec, profile: &DeviceProfile) -> TaskDominance {
    task.stage_times(profile).dominance()
}
