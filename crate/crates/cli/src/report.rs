//! Report documents written by the subcommands.

use batchorder::{CommandKind, PermutationReport, ScenarioResult, Timeline};
use serde::{Deserialize, Serialize};

use crate::decimal::{Millis, Ratio};
use crate::files::BenchConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandRecord {
    pub task_id: String,
    pub kind: CommandKind,
    pub start_ms: Millis,
    pub end_ms: Millis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdleRecord {
    pub htd_ms: Millis,
    pub k_ms: Millis,
    pub dth_ms: Millis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineReport {
    pub profile: String,
    pub order: Vec<String>,
    pub makespan_ms: Millis,
    pub idle: IdleRecord,
    /// In completion order.
    pub commands: Vec<CommandRecord>,
}

impl TimelineReport {
    pub fn new(profile: &str, tl: &Timeline) -> Self {
        let idle = tl.idle();
        Self {
            profile: profile.to_string(),
            order: tl.task_ids.clone(),
            makespan_ms: tl.makespan().into(),
            idle: IdleRecord {
                htd_ms: idle.htd_ms.into(),
                k_ms: idle.k_ms.into(),
                dth_ms: idle.dth_ms.into(),
            },
            commands: tl
                .commands()
                .iter()
                .map(|c| CommandRecord {
                    task_id: c.task_id.clone(),
                    kind: c.kind,
                    start_ms: c.start_ms.into(),
                    end_ms: c.end_ms.into(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleReport {
    pub profile: String,
    pub order: Vec<String>,
    pub makespan_ms: Millis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderRecord {
    pub order: Vec<String>,
    pub makespan_ms: Millis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicRecord {
    pub order: Vec<String>,
    pub makespan_ms: Millis,
    /// Share of evaluated orderings strictly faster than the heuristic, in percent.
    pub percentile: Ratio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermuteReport {
    pub profile: String,
    /// Number of distinct orderings; written as a string since it can exceed
    /// the range JSON readers handle exactly.
    #[serde(with = "as_string")]
    pub total_orderings: u128,
    pub evaluated: usize,
    pub sampled: bool,
    pub best_order: Vec<String>,
    pub best_ms: Millis,
    pub median_ms: Millis,
    pub worst_ms: Millis,
    pub geomean_ms: Millis,
    pub spread: Ratio,
    pub heuristic: HeuristicRecord,
    pub entries: Vec<OrderRecord>,
}

impl PermuteReport {
    pub fn new(profile: &str, report: &PermutationReport, heuristic: HeuristicRecord) -> Self {
        Self {
            profile: profile.to_string(),
            total_orderings: report.total_orderings,
            evaluated: report.len(),
            sampled: report.sampled,
            best_order: report.best_order.clone(),
            best_ms: report.best_ms.into(),
            median_ms: report.median_ms.into(),
            worst_ms: report.worst_ms.into(),
            geomean_ms: report.geomean_ms.into(),
            spread: report.spread().into(),
            heuristic,
            entries: report
                .entries
                .iter()
                .map(|e| OrderRecord {
                    order: e.order.clone(),
                    makespan_ms: e.makespan_ms.into(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskGroupRecord {
    pub formed_at_ms: Millis,
    pub order: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoReorderSummary {
    #[serde(with = "as_string")]
    pub total_orderings: u128,
    pub evaluated: usize,
    pub sampled: bool,
    pub best_ms: Millis,
    pub median_ms: Millis,
    pub worst_ms: Millis,
    pub geomean_ms: Millis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupRecord {
    pub heuristic: Ratio,
    pub median: Ratio,
    pub best: Ratio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverheadRecord {
    pub task_groups: usize,
    pub engine_calls: usize,
    /// Wall time is machine dependent, so it is only recorded on request.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_ms_per_tg: Option<Ratio>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub profile: String,
    pub pool: Vec<String>,
    pub heuristic_makespan_ms: Millis,
    pub task_groups: Vec<TaskGroupRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noreorder: Option<NoReorderSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speedups: Option<SpeedupRecord>,
    pub overhead: OverheadRecord,
}

impl BenchReport {
    pub fn new(
        config: &BenchConfig,
        profile: &str,
        pool: Vec<String>,
        result: &ScenarioResult,
        with_wall_time: bool,
    ) -> Self {
        Self {
            config: config.clone(),
            profile: profile.to_string(),
            pool,
            heuristic_makespan_ms: result.heuristic_makespan_ms.into(),
            task_groups: result
                .task_groups
                .iter()
                .map(|g| TaskGroupRecord {
                    formed_at_ms: g.formed_at_ms.into(),
                    order: g.order.clone(),
                })
                .collect(),
            noreorder: result.noreorder.as_ref().map(|r| NoReorderSummary {
                total_orderings: r.total_orderings,
                evaluated: r.len(),
                sampled: r.sampled,
                best_ms: r.best_ms.into(),
                median_ms: r.median_ms.into(),
                worst_ms: r.worst_ms.into(),
                geomean_ms: r.geomean_ms.into(),
            }),
            speedups: result.speedups.as_ref().map(|s| SpeedupRecord {
                heuristic: s.heuristic.into(),
                median: s.median.into(),
                best: s.best.into(),
            }),
            overhead: OverheadRecord {
                task_groups: result.overhead.task_groups,
                engine_calls: result.overhead.engine_calls,
                wall_ms_per_tg: with_wall_time.then(|| result.overhead.wall_ms_per_tg.into()),
            },
        }
    }
}

mod as_string {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u128, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u128, D::Error> {
        String::deserialize(d)?.parse().map_err(de::Error::custom)
    }
}
