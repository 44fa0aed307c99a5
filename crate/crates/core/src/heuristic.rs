//! Batch reordering: greedy, simulation-guided construction of a task order
//! for one task group.
//!
//! The first task is the one with the shortest HtD relative to its kernel.
//! Subsequent tasks are chosen one at a time by simulating the partial order
//! extended with each candidate and keeping the candidate that finishes the
//! partial schedule earliest. The final two tasks are placed by simulating
//! both complete orders.

use std::cmp::Ordering as CmpOrdering;

use serde::{Deserialize, Serialize};

use crate::engine::{simulate_submissions, SimError, Submission, Timeline};
use crate::model::{CommandKind, DeviceProfile, StageTimes, TaskSpec};

fn approx_cmp(a: f64, b: f64) -> CmpOrdering {
    let tol = 1e-9 * a.abs().max(b.abs()).max(1.0);
    if (a - b).abs() <= tol {
        CmpOrdering::Equal
    } else {
        a.total_cmp(&b)
    }
}

/// A permutation of positions into a task group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ordering(pub Vec<usize>);

impl Ordering {
    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn apply<T: Clone>(&self, items: &[T]) -> Vec<T> {
        self.0.iter().map(|&i| items[i].clone()).collect()
    }

    /// True when the ordering is a permutation of `0..n`.
    pub fn is_permutation_of(&self, n: usize) -> bool {
        let mut seen = vec![false; n];
        self.0.len() == n
            && self
                .0
                .iter()
                .all(|&i| i < n && !std::mem::replace(&mut seen[i], true))
    }
}

/// Snapshot of the reordering loop after one `update(OT)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReorderState {
    /// Positions (into the task group) not yet ordered.
    pub remaining: Vec<usize>,
    /// Positions ordered so far.
    pub ordered: Vec<usize>,
    /// Completion time of the last command of each kind in the partial
    /// schedule of `ordered`.
    pub t_htd: f64,
    pub t_k: f64,
    pub t_dth: f64,
}

/// Ordering plus the intermediate states and engine call count.
#[derive(Debug, Clone, PartialEq)]
pub struct ReorderTrace {
    pub ordering: Ordering,
    pub states: Vec<ReorderState>,
    pub engine_calls: usize,
}

/// Task group with stage times resolved once against the profile.
struct Group<'a> {
    tasks: &'a [TaskSpec],
    stages: Vec<StageTimes>,
    profile: &'a DeviceProfile,
    engine_calls: usize,
}

impl<'a> Group<'a> {
    fn new(tasks: &'a [TaskSpec], profile: &'a DeviceProfile) -> Self {
        Self {
            tasks,
            stages: tasks.iter().map(|t| t.stage_times(profile)).collect(),
            profile,
            engine_calls: 0,
        }
    }

    fn simulate(&mut self, order: &[usize]) -> Result<Timeline, SimError> {
        self.engine_calls += 1;
        let subs: Vec<Submission> = order
            .iter()
            .map(|&i| Submission::new(self.tasks[i].id(), self.stages[i]))
            .collect();
        simulate_submissions(&subs, self.profile)
    }

    fn id(&self, i: usize) -> &str {
        self.tasks[i].id()
    }

    fn first(&self, rt: &[usize]) -> usize {
        *rt.iter()
            .min_by(|&&a, &&b| {
                let (sa, sb) = (&self.stages[a], &self.stages[b]);
                // larger k - htd first, then longer dth, then smaller id
                approx_cmp(sb.k - sb.htd, sa.k - sa.htd)
                    .then_with(|| approx_cmp(sb.dth, sa.dth))
                    .then_with(|| self.id(a).cmp(self.id(b)))
            })
            .expect("non-empty remaining set")
    }

    fn next(&mut self, rt: &[usize], ot: &[usize]) -> Result<usize, SimError> {
        if rt.len() == 1 {
            return Ok(rt[0]);
        }
        let mut best: Option<(usize, f64, f64)> = None;
        for &c in rt {
            let mut order = ot.to_vec();
            order.push(c);
            let tl = self.simulate(&order)?;
            let (span, k_idle) = (tl.makespan(), tl.idle().k_ms);
            let better = match best {
                None => true,
                Some((b, b_span, b_idle)) => approx_cmp(span, b_span)
                    .then_with(|| approx_cmp(k_idle, b_idle))
                    .then_with(|| self.id(c).cmp(self.id(b)))
                    .is_lt(),
            };
            if better {
                best = Some((c, span, k_idle));
            }
        }
        Ok(best.expect("non-empty remaining set").0)
    }

    fn last_two(&mut self, a: usize, b: usize, ot: &[usize]) -> Result<(usize, usize), SimError> {
        let mut ab = ot.to_vec();
        ab.extend([a, b]);
        let mut ba = ot.to_vec();
        ba.extend([b, a]);
        let span_ab = self.simulate(&ab)?.makespan();
        let span_ba = self.simulate(&ba)?.makespan();
        // `a` last means order (b, a)
        let a_last_preferred = approx_cmp(span_ba, span_ab)
            .then_with(|| approx_cmp(self.stages[a].dth, self.stages[b].dth))
            .then_with(|| self.id(b).cmp(self.id(a)))
            .is_lt();
        Ok(if a_last_preferred { (b, a) } else { (a, b) })
    }

    fn state(&mut self, rt: &[usize], ot: &[usize]) -> Result<ReorderState, SimError> {
        let tl = self.simulate(ot)?;
        Ok(ReorderState {
            remaining: rt.to_vec(),
            ordered: ot.to_vec(),
            t_htd: tl.last_end(CommandKind::HtD),
            t_k: tl.last_end(CommandKind::K),
            t_dth: tl.last_end(CommandKind::DtH),
        })
    }
}

/// Position in `rt` of the task with the largest `t_K - t_HtD`; ties go to
/// the longer DtH, then the smallest id.
pub fn select_first_task(rt: &[TaskSpec], profile: &DeviceProfile) -> usize {
    assert!(!rt.is_empty(), "select_first_task needs at least one task");
    let g = Group::new(rt, profile);
    g.first(&(0..rt.len()).collect::<Vec<_>>())
}

/// Position in `rt` of the candidate whose addition to `ot` yields the
/// shortest partial makespan; ties go to less kernel idle time, then the
/// smallest id.
pub fn select_next_task(
    rt: &[TaskSpec],
    ot: &[TaskSpec],
    profile: &DeviceProfile,
) -> Result<usize, SimError> {
    assert!(
        !rt.is_empty(),
        "select_next_task needs at least one candidate"
    );
    let all: Vec<TaskSpec> = ot.iter().chain(rt).cloned().collect();
    let mut g = Group::new(&all, profile);
    let ot_idx: Vec<usize> = (0..ot.len()).collect();
    let rt_idx: Vec<usize> = (ot.len()..all.len()).collect();
    Ok(g.next(&rt_idx, &ot_idx)? - ot.len())
}

/// Orders the final two tasks after `ot`, returning positions in `rt` as
/// `(before_last, last)`. The shorter complete makespan wins; on a tie the
/// task with the shorter DtH goes last.
pub fn select_last_tasks(
    rt: &[TaskSpec],
    ot: &[TaskSpec],
    profile: &DeviceProfile,
) -> Result<(usize, usize), SimError> {
    assert_eq!(rt.len(), 2, "select_last_tasks takes exactly two tasks");
    let all: Vec<TaskSpec> = ot.iter().chain(rt).cloned().collect();
    let mut g = Group::new(&all, profile);
    let ot_idx: Vec<usize> = (0..ot.len()).collect();
    let n = ot.len();
    let (a, b) = g.last_two(n, n + 1, &ot_idx)?;
    Ok((a - n, b - n))
}

/// Orders a task group. See the module docs for the procedure.
pub fn reorder_batch(tg: &[TaskSpec], profile: &DeviceProfile) -> Result<Ordering, SimError> {
    Ok(reorder_batch_traced(tg, profile)?.ordering)
}

pub fn reorder_batch_traced(
    tg: &[TaskSpec],
    profile: &DeviceProfile,
) -> Result<ReorderTrace, SimError> {
    if tg.is_empty() {
        return Err(SimError::EmptyTaskGroup);
    }
    let mut g = Group::new(tg, profile);
    let mut states = Vec::new();

    let ordering = match tg.len() {
        1 => Ordering::identity(1),
        2 => {
            let (a, b) = g.last_two(0, 1, &[])?;
            Ordering(vec![a, b])
        }
        _ => {
            let mut rt: Vec<usize> = (0..tg.len()).collect();
            let first = g.first(&rt);
            rt.retain(|&i| i != first);
            let mut ot = vec![first];
            states.push(g.state(&rt, &ot)?);
            while rt.len() > 2 {
                let next = g.next(&rt, &ot)?;
                rt.retain(|&i| i != next);
                ot.push(next);
                states.push(g.state(&rt, &ot)?);
            }
            let (before_last, last) = g.last_two(rt[0], rt[1], &ot)?;
            ot.extend([before_last, last]);
            Ordering(ot)
        }
    };
    Ok(ReorderTrace {
        ordering,
        states,
        engine_calls: g.engine_calls,
    })
}
