//! Ground-truth machinery: a fixed-step reference simulator and exhaustive
//! permutation search.
//!
//! `micro_simulate` deliberately shares no code with the event-driven
//! engine beyond the input and output types, so the two can check each other.

use std::collections::HashSet;

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{self, ScheduledCommand, SimError, Timeline};
use crate::model::{CommandKind, DeviceProfile, TaskSpec};

/// Default step of the reference simulator: 1 µs.
pub const DEFAULT_DT_MS: f64 = 0.001;

/// Default maximum number of orderings evaluated by a search.
pub const DEFAULT_CAP: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("time step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("task group is empty")]
    EmptyTaskGroup,
    #[error("ordering cap must be at least 1")]
    ZeroCap,
    #[error(transparent)]
    Sim(#[from] SimError),
}

struct MicroCmd {
    task: usize,
    kind: CommandKind,
    nominal: f64,
    /// Remaining work in milliseconds of nominal execution.
    remaining: f64,
    start: Option<f64>,
    end: Option<f64>,
}

/// Fixed-step reference simulation. Every tick each running command consumes
/// `dt * rate` of its work, where the rate drops to sigma while both copy
/// engines of a 2-DMA device are busy. Start and end times are multiples of
/// `dt`.
pub fn micro_simulate(
    tasks: &[TaskSpec],
    profile: &DeviceProfile,
    dt: f64,
) -> Result<Timeline, OracleError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(OracleError::InvalidStep(dt));
    }
    if tasks.is_empty() {
        return Err(OracleError::EmptyTaskGroup);
    }

    let mut cmds: Vec<MicroCmd> = Vec::new();
    // per kind, command indices in task order
    let mut by_kind: [Vec<usize>; 3] = Default::default();
    // per task, command index per stage
    let mut stage: Vec<[Option<usize>; 3]> = vec![[None; 3]; tasks.len()];
    for (i, t) in tasks.iter().enumerate() {
        let st = t.stage_times(profile);
        for (slot, kind) in CommandKind::ALL.into_iter().enumerate() {
            let d = st.get(kind);
            if d > 0.0 {
                stage[i][slot] = Some(cmds.len());
                by_kind[slot].push(cmds.len());
                cmds.push(MicroCmd {
                    task: i,
                    kind,
                    nominal: d,
                    remaining: d,
                    start: None,
                    end: None,
                });
            }
        }
    }

    let dual = profile.has_dual_dma();
    let sigma = profile.overlap_sigma();
    let total_work: f64 = cmds.iter().map(|c| c.nominal).sum();
    let max_ticks = (total_work / sigma.min(1.0) / dt).ceil() as u64 + 16;
    let done_tol = dt * 1e-6;

    let mut next = [0usize; 3];
    let mut running: [Option<usize>; 3] = [None; 3];
    let mut finished: Vec<ScheduledCommand> = Vec::with_capacity(cmds.len());
    let mut tick: u64 = 0;

    while finished.len() < cmds.len() {
        if tick > max_ticks {
            return Err(SimError::Deadlock {
                at_ms: tick as f64 * dt,
            }
            .into());
        }
        let now = tick as f64 * dt;

        // start phase; slot order HtD, K, DtH
        for slot in 0..3 {
            if running[slot].is_some() || next[slot] >= by_kind[slot].len() {
                continue;
            }
            let c = by_kind[slot][next[slot]];
            let task = cmds[c].task;
            let pred_done = stage[task][..slot]
                .iter()
                .rev()
                .flatten()
                .next()
                .is_none_or(|&p| cmds[p].end.is_some());
            if !pred_done {
                continue;
            }
            if !dual && cmds[c].kind != CommandKind::K {
                // single copy engine: one transfer at a time, DtHs only
                // after every HtD of the group has finished
                let other = if slot == 0 { 2 } else { 0 };
                if running[other].is_some() {
                    continue;
                }
                if cmds[c].kind == CommandKind::DtH
                    && by_kind[0].iter().any(|&h| cmds[h].end.is_none())
                {
                    continue;
                }
            }
            cmds[c].start = Some(now);
            running[slot] = Some(c);
            next[slot] += 1;
        }

        let both_transfers = running[0].is_some() && running[2].is_some();
        let transfer_rate = if dual && both_transfers { sigma } else { 1.0 };
        let tick_end = (tick + 1) as f64 * dt;
        let mut ended: Vec<usize> = Vec::new();
        for (slot, lane) in running.iter_mut().enumerate() {
            let Some(c) = *lane else { continue };
            let rate = if slot == 1 { 1.0 } else { transfer_rate };
            cmds[c].remaining -= dt * rate;
            if cmds[c].remaining <= done_tol {
                cmds[c].remaining = 0.0;
                cmds[c].end = Some(tick_end);
                *lane = None;
                ended.push(c);
            }
        }
        for c in ended {
            let m = &cmds[c];
            finished.push(ScheduledCommand {
                task: m.task,
                task_id: tasks[m.task].id().to_string(),
                batch: 0,
                kind: m.kind,
                nominal_ms: m.nominal,
                start_ms: m.start.unwrap_or(now),
                end_ms: tick_end,
            });
        }
        tick += 1;
    }

    let first = finished
        .iter()
        .map(|c| c.start_ms)
        .fold(f64::INFINITY, f64::min);
    let last = finished.iter().map(|c| c.end_ms).fold(0.0, f64::max);
    Ok(Timeline {
        task_ids: tasks.iter().map(|t| t.id().to_string()).collect(),
        commands: finished,
        makespan_ms: last - first,
    })
}

/// One evaluated ordering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationEntry {
    pub order: Vec<String>,
    pub makespan_ms: f64,
}

/// Makespan distribution over a set of orderings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationReport {
    pub entries: Vec<PermutationEntry>,
    pub best_order: Vec<String>,
    pub best_ms: f64,
    pub worst_ms: f64,
    pub median_ms: f64,
    pub geomean_ms: f64,
    /// Size of the full ordering space, saturating.
    pub total_orderings: u128,
    /// True when only a random subset of `total_orderings` was evaluated.
    pub sampled: bool,
}

impl PermutationReport {
    pub fn from_entries(entries: Vec<PermutationEntry>, total_orderings: u128) -> Self {
        assert!(!entries.is_empty(), "a report needs at least one entry");
        let mut spans: Vec<f64> = entries.iter().map(|e| e.makespan_ms).collect();
        spans.sort_by(f64::total_cmp);
        let n = spans.len();
        let median_ms = if n % 2 == 1 {
            spans[n / 2]
        } else {
            0.5 * (spans[n / 2 - 1] + spans[n / 2])
        };
        let geomean_ms = (spans.iter().map(|s| s.ln()).sum::<f64>() / n as f64).exp();
        // first entry wins ties so the best order is deterministic
        let best = entries
            .iter()
            .reduce(|a, b| if b.makespan_ms < a.makespan_ms { b } else { a })
            .expect("non-empty");
        Self {
            best_order: best.order.clone(),
            best_ms: spans[0],
            worst_ms: spans[n - 1],
            median_ms,
            geomean_ms,
            sampled: (n as u128) < total_orderings,
            total_orderings,
            entries,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Percentage of evaluated orderings strictly faster than `makespan`.
    pub fn percentile_of(&self, makespan: f64) -> f64 {
        let tol = 1e-9 * makespan.abs().max(1.0);
        let faster = self
            .entries
            .iter()
            .filter(|e| e.makespan_ms < makespan - tol)
            .count();
        100.0 * faster as f64 / self.entries.len() as f64
    }

    /// `(worst - best) / worst`.
    pub fn spread(&self) -> f64 {
        (self.worst_ms - self.best_ms) / self.worst_ms
    }
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).fold(1u128, |acc, k| acc.saturating_mul(k))
}

/// Orderings of a sequence of layers where each layer is permuted
/// independently: `prod(|layer_i|!)` orderings in total. Returns every
/// ordering when that count fits within `cap`, otherwise `cap` distinct
/// orderings drawn uniformly with a seeded RNG.
pub fn layered_orderings(
    layer_sizes: &[usize],
    cap: usize,
    seed: u64,
) -> (Vec<Vec<Vec<usize>>>, u128) {
    let total = layer_sizes
        .iter()
        .fold(1u128, |acc, &n| acc.saturating_mul(factorial(n)));
    if total <= cap as u128 {
        let all = layer_sizes
            .iter()
            .map(|&n| (0..n).permutations(n).collect::<Vec<_>>())
            .multi_cartesian_product()
            .collect::<Vec<_>>();
        // an empty layer list yields one empty ordering
        let all = if layer_sizes.is_empty() {
            vec![Vec::new()]
        } else {
            all
        };
        return (all, total);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: HashSet<Vec<Vec<usize>>> = HashSet::with_capacity(cap);
    let mut out = Vec::with_capacity(cap);
    while out.len() < cap {
        let candidate: Vec<Vec<usize>> = layer_sizes
            .iter()
            .map(|&n| {
                let mut p: Vec<usize> = (0..n).collect();
                p.shuffle(&mut rng);
                p
            })
            .collect();
        if seen.insert(candidate.clone()) {
            out.push(candidate);
        }
    }
    (out, total)
}

/// Simulates every permutation of `tasks` (or a seeded uniform sample of
/// `cap` of them when there are more than `cap`).
pub fn exhaustive_search(
    tasks: &[TaskSpec],
    profile: &DeviceProfile,
    cap: usize,
    seed: u64,
) -> Result<PermutationReport, OracleError> {
    if tasks.is_empty() {
        return Err(OracleError::EmptyTaskGroup);
    }
    if cap == 0 {
        return Err(OracleError::ZeroCap);
    }
    let (orderings, total) = layered_orderings(&[tasks.len()], cap, seed);
    let entries = orderings
        .into_par_iter()
        .map(|layers| {
            let ordered: Vec<TaskSpec> = layers[0].iter().map(|&i| tasks[i].clone()).collect();
            let timeline = engine::simulate(&ordered, profile)?;
            Ok(PermutationEntry {
                order: ordered.iter().map(|t| t.id().to_string()).collect(),
                makespan_ms: timeline.makespan(),
            })
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    Ok(PermutationReport::from_entries(entries, total))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(id: &str, h: f64, k: f64, d: f64) -> TaskSpec {
        TaskSpec::fixed(id, h, k, d).unwrap()
    }

    #[test]
    fn single_chain() {
        let p = DeviceProfile::default_two_dma();
        let tl = micro_simulate(&[t("T0", 1.0, 8.0, 1.0)], &p, 0.001).unwrap();
        assert!((tl.makespan() - 10.0).abs() <= 0.001);
    }

    #[test]
    fn full_overlap_doubles_both_transfers() {
        // DtH-only and HtD-only tasks start together and share the link
        let p = DeviceProfile::default_two_dma();
        let tasks = [t("a", 10.0, 0.0, 0.0), t("b", 0.0, 0.0, 10.0)];
        let tl = micro_simulate(&tasks, &p, 0.001).unwrap();
        for c in tl.commands() {
            assert!((c.end_ms - 20.0).abs() <= 0.001, "{c:?}");
        }
    }

    #[test]
    fn rejects_bad_step() {
        let p = DeviceProfile::default_two_dma();
        let tasks = [t("a", 1.0, 1.0, 1.0)];
        assert_eq!(
            micro_simulate(&tasks, &p, 0.0).unwrap_err(),
            OracleError::InvalidStep(0.0)
        );
        assert!(micro_simulate(&tasks, &p, -1.0).is_err());
        assert_eq!(
            micro_simulate(&[], &p, 0.1).unwrap_err(),
            OracleError::EmptyTaskGroup
        );
    }

    #[test]
    fn layered_orderings_enumerates_product() {
        let (all, total) = layered_orderings(&[3, 2], 100, 0);
        assert_eq!(total, 12);
        assert_eq!(all.len(), 12);
        let distinct: HashSet<_> = all.iter().collect();
        assert_eq!(distinct.len(), 12);
    }

    #[test]
    fn layered_orderings_samples_when_capped() {
        let (a, total) = layered_orderings(&[8], 1000, 42);
        let (b, _) = layered_orderings(&[8], 1000, 42);
        let (c, _) = layered_orderings(&[8], 1000, 43);
        assert_eq!(total, 40320);
        assert_eq!(a.len(), 1000);
        assert_eq!(a, b);
        assert_ne!(a, c);
        let distinct: HashSet<_> = a.iter().collect();
        assert_eq!(distinct.len(), 1000);
    }

    #[test]
    fn report_statistics() {
        let entry = |m| PermutationEntry {
            order: vec![],
            makespan_ms: m,
        };
        let r = PermutationReport::from_entries(
            vec![entry(4.0), entry(1.0), entry(2.0), entry(8.0)],
            4,
        );
        assert_eq!(r.best_ms, 1.0);
        assert_eq!(r.worst_ms, 8.0);
        assert_eq!(r.median_ms, 3.0);
        assert!((r.geomean_ms - 64f64.powf(0.25)).abs() < 1e-12);
        assert!(!r.sampled);
        assert_eq!(r.percentile_of(1.0), 0.0);
        assert_eq!(r.percentile_of(3.0), 50.0);
        assert!((r.spread() - 0.875).abs() < 1e-12);
    }

    #[test]
    fn search_sizes() {
        let p = DeviceProfile::default_two_dma();
        let four: Vec<TaskSpec> = (0..4)
            .map(|i| t(&format!("T{i}"), 1.0 + i as f64, 2.0, 1.0))
            .collect();
        assert_eq!(exhaustive_search(&four, &p, 24, 0).unwrap().len(), 24);
        assert_eq!(exhaustive_search(&four, &p, 10, 0).unwrap().len(), 10);
        let one = exhaustive_search(&four[..1], &p, 5, 0).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one.best_ms, one.worst_ms);
        assert_eq!(
            exhaustive_search(&four, &p, 0, 0).unwrap_err(),
            OracleError::ZeroCap
        );
    }
}
