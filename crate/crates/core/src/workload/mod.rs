//! Benchmarks and the multi-worker offload scenario.
//!
//! Synthetic tasks T0..T7 are defined as fractions of a 10 ms time unit. The
//! five BK benchmarks mix them by share of kernel-dominant tasks. Real tasks
//! are sampled from per-kernel timing envelopes.

mod real;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{simulate_submissions, SimError, Submission, Timeline};
use crate::heuristic::reorder_batch_traced;
use crate::model::{classify_task, CommandKind, DeviceProfile, TaskDominance, TaskSpec};
use crate::oracle::{layered_orderings, PermutationEntry, PermutationReport};

pub use real::{envelope, envelopes, KernelEnvelope, RealDevice, REAL_KERNELS};

/// Time unit the synthetic task fractions refer to.
pub const SYNTHETIC_UNIT_MS: f64 = 10.0;

/// `(htd, k, dth)` fractions of the time unit for T0..T7.
const SYNTHETIC_FRACTIONS: [[f64; 3]; 8] = [
    [0.1, 0.8, 0.1],
    [0.2, 0.7, 0.1],
    [0.3, 0.6, 0.1],
    [0.1, 0.7, 0.2],
    [0.6, 0.2, 0.2],
    [0.2, 0.2, 0.6],
    [0.4, 0.2, 0.4],
    [0.8, 0.1, 0.1],
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorkloadError {
    #[error("unknown benchmark `{0}` (expected BK0, BK25, BK50, BK75 or BK100)")]
    UnknownBenchmark(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// The eight synthetic tasks with their stage times in milliseconds.
pub fn load_table2_tasks() -> Vec<TaskSpec> {
    SYNTHETIC_FRACTIONS
        .iter()
        .enumerate()
        .map(|(i, f)| {
            TaskSpec::fixed(
                format!("T{i}"),
                f[0] * SYNTHETIC_UNIT_MS,
                f[1] * SYNTHETIC_UNIT_MS,
                f[2] * SYNTHETIC_UNIT_MS,
            )
            .expect("synthetic tasks are valid")
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BenchmarkName {
    Bk0,
    Bk25,
    Bk50,
    Bk75,
    Bk100,
}

impl BenchmarkName {
    pub const ALL: [BenchmarkName; 5] = [
        BenchmarkName::Bk0,
        BenchmarkName::Bk25,
        BenchmarkName::Bk50,
        BenchmarkName::Bk75,
        BenchmarkName::Bk100,
    ];

    pub fn task_ids(self) -> [&'static str; 4] {
        match self {
            BenchmarkName::Bk0 => ["T6", "T7", "T4", "T5"],
            BenchmarkName::Bk25 => ["T0", "T4", "T6", "T7"],
            BenchmarkName::Bk50 => ["T0", "T1", "T4", "T5"],
            BenchmarkName::Bk75 => ["T0", "T1", "T2", "T4"],
            BenchmarkName::Bk100 => ["T0", "T1", "T2", "T3"],
        }
    }

    pub fn dk_percent(self) -> u32 {
        match self {
            BenchmarkName::Bk0 => 0,
            BenchmarkName::Bk25 => 25,
            BenchmarkName::Bk50 => 50,
            BenchmarkName::Bk75 => 75,
            BenchmarkName::Bk100 => 100,
        }
    }
}

impl fmt::Display for BenchmarkName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BK{}", self.dk_percent())
    }
}

impl FromStr for BenchmarkName {
    type Err = WorkloadError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BenchmarkName::ALL
            .into_iter()
            .find(|b| b.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| WorkloadError::UnknownBenchmark(s.to_string()))
    }
}

/// A named set of tasks.
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub name: String,
    pub tasks: Vec<TaskSpec>,
    /// Share of kernel-dominant tasks.
    pub dk_fraction: f64,
}

impl Benchmark {
    pub fn new(name: impl Into<String>, tasks: Vec<TaskSpec>, profile: &DeviceProfile) -> Self {
        let dk = tasks
            .iter()
            .filter(|t| classify_task(t, profile) == TaskDominance::DominantKernel)
            .count();
        let dk_fraction = if tasks.is_empty() {
            0.0
        } else {
            dk as f64 / tasks.len() as f64
        };
        Self {
            name: name.into(),
            tasks,
            dk_fraction,
        }
    }
}

/// One of the five synthetic benchmarks, by name (case-insensitive).
pub fn load_bk_benchmark(name: &str) -> Result<Benchmark, WorkloadError> {
    let bk: BenchmarkName = name.parse()?;
    Ok(bk_benchmark(bk))
}

pub fn bk_benchmark(bk: BenchmarkName) -> Benchmark {
    let all = load_table2_tasks();
    let tasks = bk
        .task_ids()
        .iter()
        .map(|id| {
            all.iter()
                .find(|t| t.id() == *id)
                .expect("benchmark references a synthetic task")
                .clone()
        })
        .collect();
    // fixed durations: the profile does not affect classification
    Benchmark::new(bk.to_string(), tasks, &DeviceProfile::default_two_dma())
}

/// `count` tasks, each an evenly drawn kernel with every stage time uniform
/// within that kernel's envelope on `device`.
pub fn sample_real_tasks(device: RealDevice, count: usize, seed: u64) -> Vec<TaskSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let table = envelopes(device);
    (0..count)
        .map(|i| {
            let e = &table[rng.random_range(0..table.len())];
            let mut draw = |r: [f64; 2]| {
                if r[1] > r[0] {
                    rng.random_range(r[0]..=r[1])
                } else {
                    r[0]
                }
            };
            let (h, k, d) = (draw(e.htd), draw(e.k), draw(e.dth));
            TaskSpec::fixed(format!("{}-{i}", e.kernel), h, k, d).expect("envelopes are positive")
        })
        .collect()
}

/// `workers` hosts threads, each offloading `batch_depth` dependent tasks.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub workers: usize,
    pub batch_depth: usize,
    pub pool: Benchmark,
    pub seed: u64,
    pub profile: DeviceProfile,
}

impl Scenario {
    fn validate(&self) -> Result<(), WorkloadError> {
        if self.workers == 0 || self.batch_depth == 0 {
            return Err(WorkloadError::InvalidScenario(
                "workers and batch depth must be at least 1".into(),
            ));
        }
        if self.pool.tasks.is_empty() {
            return Err(WorkloadError::InvalidScenario("task pool is empty".into()));
        }
        Ok(())
    }

    /// Tasks per worker. The pool is replicated until it covers
    /// `workers * batch_depth` slots and shuffled with the scenario seed, so
    /// every pool task is used as evenly as possible.
    pub fn draw(&self) -> Vec<Vec<TaskSpec>> {
        let needed = self.workers * self.batch_depth;
        let pool = &self.pool.tasks;
        let mut slots: Vec<usize> = (0..needed.div_ceil(pool.len()))
            .flat_map(|_| 0..pool.len())
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        slots.shuffle(&mut rng);
        slots.truncate(needed);
        slots
            .chunks(self.batch_depth)
            .enumerate()
            .map(|(w, chunk)| {
                chunk
                    .iter()
                    .enumerate()
                    .map(|(j, &p)| pool[p].with_id(format!("w{w}.{j}:{}", pool[p].id())))
                    .collect()
            })
            .collect()
    }
}

/// A task group formed by the proxy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskGroupRecord {
    pub formed_at_ms: f64,
    pub order: Vec<String>,
}

/// Speedups relative to the slowest NoReorder ordering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Speedups {
    pub heuristic: f64,
    pub median: f64,
    pub best: f64,
}

/// Host-side cost of reordering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedulingOverhead {
    pub task_groups: usize,
    pub engine_calls: usize,
    /// Wall-clock time spent inside the reordering, in milliseconds.
    pub wall_ms_total: f64,
    pub wall_ms_per_tg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub heuristic_makespan_ms: f64,
    pub heuristic_timeline: Timeline,
    pub task_groups: Vec<TaskGroupRecord>,
    pub noreorder: Option<PermutationReport>,
    pub speedups: Option<Speedups>,
    pub overhead: SchedulingOverhead,
}

impl ScenarioResult {
    /// True when the NoReorder distribution was sampled rather than complete.
    pub fn cap_exceeded(&self) -> bool {
        self.noreorder.as_ref().is_some_and(|r| r.sampled)
    }
}

/// Runs the proxy protocol with batch reordering and, optionally, the
/// NoReorder sweep over the same drawn tasks.
///
/// Proxy protocol: the available tasks (at most one per worker) form a task
/// group, which is reordered and appended to the device queues. The proxy
/// polls again once the last HtD of that group has started. A worker's next
/// task becomes available when its previous task has finished. When nothing
/// is available the proxy waits for the next task completion.
pub fn run_scenario(
    scenario: &Scenario,
    evaluate_noreorder: bool,
    cap: usize,
) -> Result<ScenarioResult, WorkloadError> {
    scenario.validate()?;
    if cap == 0 {
        return Err(WorkloadError::InvalidScenario(
            "ordering cap must be at least 1".into(),
        ));
    }
    let profile = &scenario.profile;
    let workers = scenario.draw();

    let mut subs: Vec<Submission> = Vec::new();
    let mut next_task = vec![0usize; workers.len()];
    let mut last_sub: Vec<Option<usize>> = vec![None; workers.len()];
    let mut groups = Vec::new();
    let mut engine_calls = 0;
    let mut wall_ms_total = 0.0;
    let mut timeline: Option<Timeline> = None;
    let mut now = 0.0;

    let completion = |tl: &Option<Timeline>, sub: Option<usize>| -> f64 {
        match (tl, sub) {
            (Some(tl), Some(s)) => tl.task_completion(s).unwrap_or(f64::INFINITY),
            _ => 0.0,
        }
    };

    while next_task.iter().zip(&workers).any(|(n, w)| *n < w.len()) {
        let pending: Vec<usize> = (0..workers.len())
            .filter(|&w| next_task[w] < workers[w].len())
            .collect();
        let available: Vec<usize> = pending
            .iter()
            .copied()
            .filter(|&w| completion(&timeline, last_sub[w]) <= now + 1e-9)
            .collect();
        if available.is_empty() {
            now = pending
                .iter()
                .map(|&w| completion(&timeline, last_sub[w]))
                .fold(f64::INFINITY, f64::min);
            continue;
        }

        let tg: Vec<TaskSpec> = available
            .iter()
            .map(|&w| workers[w][next_task[w]].clone())
            .collect();
        let started = Instant::now();
        let trace = reorder_batch_traced(&tg, profile)?;
        wall_ms_total += started.elapsed().as_secs_f64() * 1e3;
        engine_calls += trace.engine_calls;

        let batch = groups.len();
        let first_new = subs.len();
        for &pos in trace.ordering.indices() {
            let w = available[pos];
            let task = &tg[pos];
            subs.push(Submission {
                id: task.id().to_string(),
                stages: task.stage_times(profile),
                batch,
                release_ms: now,
                after: last_sub[w],
            });
            last_sub[w] = Some(subs.len() - 1);
            next_task[w] += 1;
        }
        groups.push(TaskGroupRecord {
            formed_at_ms: now,
            order: trace
                .ordering
                .apply(&tg)
                .iter()
                .map(|t| t.id().to_string())
                .collect(),
        });

        let tl = simulate_submissions(&subs, profile)?;
        // re-poll once the group's last HtD is issued
        let last_htd_start = tl
            .commands()
            .iter()
            .filter(|c| c.kind == CommandKind::HtD && c.task >= first_new)
            .map(|c| c.start_ms)
            .reduce(f64::max);
        now = last_htd_start.unwrap_or(now).max(now);
        timeline = Some(tl);
    }

    let heuristic_timeline = timeline.expect("scenario has at least one task");
    let heuristic_makespan_ms = heuristic_timeline.makespan();

    let noreorder = if evaluate_noreorder {
        Some(noreorder_sweep(&workers, profile, cap, scenario.seed)?)
    } else {
        None
    };
    let speedups = noreorder.as_ref().map(|r| Speedups {
        heuristic: r.worst_ms / heuristic_makespan_ms,
        median: r.worst_ms / r.median_ms,
        best: r.worst_ms / r.best_ms,
    });

    Ok(ScenarioResult {
        heuristic_makespan_ms,
        heuristic_timeline,
        overhead: SchedulingOverhead {
            task_groups: groups.len(),
            engine_calls,
            wall_ms_total,
            wall_ms_per_tg: wall_ms_total / groups.len() as f64,
        },
        task_groups: groups,
        noreorder,
        speedups,
    })
}

/// Submissions for one NoReorder ordering: layer `j` holds the `j`-th task of
/// every worker, permuted by `perms[j]`; each task waits for its worker's
/// previous task.
fn layered_submissions(
    workers: &[Vec<TaskSpec>],
    perms: &[Vec<usize>],
    profile: &DeviceProfile,
) -> Vec<Submission> {
    let mut subs = Vec::new();
    let mut last: Vec<Option<usize>> = vec![None; workers.len()];
    for (layer, perm) in perms.iter().enumerate() {
        for &w in perm {
            let task = &workers[w][layer];
            subs.push(Submission {
                id: task.id().to_string(),
                stages: task.stage_times(profile),
                batch: layer,
                release_ms: 0.0,
                after: last[w],
            });
            last[w] = Some(subs.len() - 1);
        }
    }
    subs
}

/// Makespan distribution over every ordering consistent with intra-worker
/// order, `(T!)^N` in total (sampled down to `cap`).
pub fn noreorder_sweep(
    workers: &[Vec<TaskSpec>],
    profile: &DeviceProfile,
    cap: usize,
    seed: u64,
) -> Result<PermutationReport, WorkloadError> {
    let depth = workers.first().map_or(0, Vec::len);
    if workers.is_empty() || depth == 0 || workers.iter().any(|w| w.len() != depth) {
        return Err(WorkloadError::InvalidScenario(
            "every worker needs the same non-zero number of tasks".into(),
        ));
    }
    let (orderings, total) = layered_orderings(&vec![workers.len(); depth], cap, seed);
    let entries = orderings
        .into_par_iter()
        .map(|perms| {
            let subs = layered_submissions(workers, &perms, profile);
            let tl = simulate_submissions(&subs, profile)?;
            Ok(PermutationEntry {
                order: subs.into_iter().map(|s| s.id).collect(),
                makespan_ms: tl.makespan(),
            })
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    Ok(PermutationReport::from_entries(entries, total))
}
