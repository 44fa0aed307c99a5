//! Event-driven simulation of a task group on the accelerator.
//!
//! Commands are placed in FIFO lanes, one per hardware resource. A 2-DMA
//! device has three lanes (HtD engine, kernel, DtH engine). A 1-DMA device
//! has a single transfer lane in which, per task group, every HtD precedes
//! every DtH, plus the kernel lane. Only the head of a lane may run and it
//! starts as soon as its intra-task predecessor has finished.
//!
//! Simulated time jumps from one event to the next: a command end or a task
//! release. Between two events every command progresses at a constant rate,
//! so the piecewise-linear end time re-estimation is exact.

mod trace;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CommandKind, DeviceProfile, StageTimes, TaskSpec};

pub use trace::{export_csv, export_trace, TraceDocument, TraceEvent};

const EVENT_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("task group is empty")]
    EmptyTaskGroup,
    #[error("task `{0}` has no resolvable stage durations")]
    UnresolvableDuration(String),
    #[error("task `{task}` waits on task index {after}, which is not submitted before it")]
    InvalidDependency { task: String, after: usize },
    #[error("task `{0}` belongs to an earlier task group than the task before it")]
    BatchOrder(String),
    #[error("simulation stalled at {at_ms} ms with commands still queued")]
    Deadlock { at_ms: f64 },
}

/// One task as seen by the device: resolved stage times plus the submission
/// constraints the host imposes on it.
#[derive(Debug, Clone, PartialEq)]
pub struct Submission {
    pub id: String,
    pub stages: StageTimes,
    /// Task group the task was submitted with. Must be non-decreasing along
    /// the submission list.
    pub batch: usize,
    /// Earliest instant any command of the task may start.
    pub release_ms: f64,
    /// Index of an earlier submission whose last command must finish before
    /// this task's first command starts.
    pub after: Option<usize>,
}

impl Submission {
    pub fn new(id: impl Into<String>, stages: StageTimes) -> Self {
        Self {
            id: id.into(),
            stages,
            batch: 0,
            release_ms: 0.0,
            after: None,
        }
    }
}

/// In-flight state of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct Command {
    pub task: usize,
    pub kind: CommandKind,
    pub nominal_duration: f64,
    pub start: Option<f64>,
    pub end: Option<f64>,
    /// Fraction of the nominal work still to do, valid as of the last event.
    pub remaining_work: f64,
}

impl Command {
    pub fn new(task: usize, kind: CommandKind, nominal_duration: f64) -> Self {
        Self {
            task,
            kind,
            nominal_duration,
            start: None,
            end: None,
            remaining_work: 1.0,
        }
    }
}

/// New provisional end times of an HtD and a DtH transfer that execute
/// simultaneously from `now` on: each remaining part is stretched by
/// `1 / sigma`.
pub fn recompute_overlap(
    executing_htd: &Command,
    executing_dth: &Command,
    now: f64,
    profile: &DeviceProfile,
) -> (f64, f64) {
    let sigma = profile.overlap_sigma();
    let stretch = |c: &Command| now + c.remaining_work * c.nominal_duration / sigma;
    (stretch(executing_htd), stretch(executing_dth))
}

/// A finalized command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledCommand {
    pub task: usize,
    pub task_id: String,
    pub batch: usize,
    pub kind: CommandKind,
    pub nominal_ms: f64,
    pub start_ms: f64,
    pub end_ms: f64,
}

impl ScheduledCommand {
    pub fn duration(&self) -> f64 {
        self.end_ms - self.start_ms
    }
}

/// Idle time per lane between its first command start and last command end.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct IdleReport {
    pub htd_ms: f64,
    pub k_ms: f64,
    pub dth_ms: f64,
}

impl IdleReport {
    pub fn get(&self, kind: CommandKind) -> f64 {
        match kind {
            CommandKind::HtD => self.htd_ms,
            CommandKind::K => self.k_ms,
            CommandKind::DtH => self.dth_ms,
        }
    }
}

/// Result of one simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timeline {
    pub task_ids: Vec<String>,
    /// Commands in the order they finished.
    pub commands: Vec<ScheduledCommand>,
    pub makespan_ms: f64,
}

impl Timeline {
    pub fn makespan(&self) -> f64 {
        self.makespan_ms
    }

    pub fn commands(&self) -> &[ScheduledCommand] {
        &self.commands
    }

    pub fn command(&self, task: usize, kind: CommandKind) -> Option<&ScheduledCommand> {
        self.commands
            .iter()
            .find(|c| c.task == task && c.kind == kind)
    }

    pub fn of_kind(&self, kind: CommandKind) -> impl Iterator<Item = &ScheduledCommand> {
        self.commands.iter().filter(move |c| c.kind == kind)
    }

    /// End of the last command of the given kind, 0 when there is none.
    pub fn last_end(&self, kind: CommandKind) -> f64 {
        self.of_kind(kind).map(|c| c.end_ms).fold(0.0, f64::max)
    }

    /// Instant the task's last command finished.
    pub fn task_completion(&self, task: usize) -> Option<f64> {
        self.commands
            .iter()
            .filter(|c| c.task == task)
            .map(|c| c.end_ms)
            .reduce(f64::max)
    }

    pub fn idle(&self) -> IdleReport {
        let lane_idle = |kind| {
            let mut spans: Vec<(f64, f64)> =
                self.of_kind(kind).map(|c| (c.start_ms, c.end_ms)).collect();
            if spans.is_empty() {
                return 0.0;
            }
            spans.sort_by(|a, b| a.0.total_cmp(&b.0));
            let first = spans[0].0;
            let mut busy = 0.0;
            let mut cursor = first;
            let mut last = first;
            for (s, e) in spans {
                let s = s.max(cursor);
                if e > s {
                    busy += e - s;
                    cursor = e;
                }
                last = last.max(e);
            }
            (last - first - busy).max(0.0)
        };
        IdleReport {
            htd_ms: lane_idle(CommandKind::HtD),
            k_ms: lane_idle(CommandKind::K),
            dth_ms: lane_idle(CommandKind::DtH),
        }
    }
}

/// Simulates one task group submitted at time zero in the given order.
pub fn simulate(tasks: &[TaskSpec], profile: &DeviceProfile) -> Result<Timeline, SimError> {
    let subs: Vec<Submission> = tasks
        .iter()
        .map(|t| Submission::new(t.id(), t.stage_times(profile)))
        .collect();
    simulate_submissions(&subs, profile)
}

/// Simulates an arbitrary sequence of task groups with release times and
/// cross-task gates.
pub fn simulate_submissions(
    subs: &[Submission],
    profile: &DeviceProfile,
) -> Result<Timeline, SimError> {
    Simulation::new(subs, profile)?.run()
}

struct Lane {
    queue: VecDeque<usize>,
    running: Option<usize>,
}

struct Simulation<'a> {
    subs: &'a [Submission],
    profile: &'a DeviceProfile,
    commands: Vec<Command>,
    /// Per task, the command index of each stage (HtD, K, DtH).
    stage_cmds: Vec<[Option<usize>; 3]>,
    lanes: Vec<Lane>,
    /// Current progress rate of each command.
    rates: Vec<f64>,
    /// Provisional end of each running command.
    ends: Vec<f64>,
    finished: Vec<ScheduledCommand>,
}

impl<'a> Simulation<'a> {
    fn new(subs: &'a [Submission], profile: &'a DeviceProfile) -> Result<Self, SimError> {
        if subs.is_empty() {
            return Err(SimError::EmptyTaskGroup);
        }
        let mut commands = Vec::new();
        let mut stage_cmds = Vec::with_capacity(subs.len());
        for (i, s) in subs.iter().enumerate() {
            let st = s.stages;
            if ![st.htd, st.k, st.dth]
                .iter()
                .all(|v| v.is_finite() && *v >= 0.0)
                || st.total() <= 0.0
            {
                return Err(SimError::UnresolvableDuration(s.id.clone()));
            }
            if i > 0 && s.batch < subs[i - 1].batch {
                return Err(SimError::BatchOrder(s.id.clone()));
            }
            if let Some(a) = s.after {
                if a >= i {
                    return Err(SimError::InvalidDependency {
                        task: s.id.clone(),
                        after: a,
                    });
                }
            }
            let mut slots = [None; 3];
            for kind in CommandKind::ALL {
                let d = st.get(kind);
                if d > 0.0 {
                    slots[kind.index()] = Some(commands.len());
                    commands.push(Command::new(i, kind, d));
                }
            }
            stage_cmds.push(slots);
        }

        let cmd_of = |task: usize, kind: CommandKind| stage_cmds[task][kind.index()];
        let mut lanes = Vec::new();
        let lane = |queue: VecDeque<usize>| Lane {
            queue,
            running: None,
        };
        if profile.has_dual_dma() {
            for kind in [CommandKind::HtD, CommandKind::DtH] {
                lanes.push(lane(
                    (0..subs.len()).filter_map(|t| cmd_of(t, kind)).collect(),
                ));
            }
        } else {
            // one copy engine: per task group all HtDs, then all DtHs
            let mut queue = VecDeque::new();
            let mut start = 0;
            while start < subs.len() {
                let batch = subs[start].batch;
                let end = (start..subs.len())
                    .find(|&t| subs[t].batch != batch)
                    .unwrap_or(subs.len());
                queue.extend((start..end).filter_map(|t| cmd_of(t, CommandKind::HtD)));
                queue.extend((start..end).filter_map(|t| cmd_of(t, CommandKind::DtH)));
                start = end;
            }
            lanes.push(lane(queue));
        }
        lanes.push(lane(
            (0..subs.len())
                .filter_map(|t| cmd_of(t, CommandKind::K))
                .collect(),
        ));

        let n = commands.len();
        Ok(Self {
            subs,
            profile,
            commands,
            stage_cmds,
            lanes,
            rates: vec![1.0; n],
            ends: vec![f64::INFINITY; n],
            finished: Vec::with_capacity(n),
        })
    }

    fn has_ended(&self, cmd: usize) -> bool {
        self.commands[cmd].end.is_some()
    }

    fn predecessor(&self, cmd: usize) -> Option<usize> {
        let c = &self.commands[cmd];
        let slots = &self.stage_cmds[c.task];
        slots[..c.kind.index()]
            .iter()
            .rev()
            .flatten()
            .next()
            .copied()
    }

    fn last_command_of(&self, task: usize) -> usize {
        self.stage_cmds[task]
            .iter()
            .rev()
            .flatten()
            .next()
            .copied()
            .expect("every task has at least one command")
    }

    fn is_ready(&self, cmd: usize, now: f64) -> bool {
        let task = self.commands[cmd].task;
        let sub = &self.subs[task];
        if sub.release_ms > now + EVENT_EPS {
            return false;
        }
        match self.predecessor(cmd) {
            Some(p) => self.has_ended(p),
            None => sub
                .after
                .is_none_or(|a| self.has_ended(self.last_command_of(a))),
        }
    }

    fn running(&self) -> impl Iterator<Item = usize> + '_ {
        self.lanes.iter().filter_map(|l| l.running)
    }

    fn running_of_kind(&self, kind: CommandKind) -> Option<usize> {
        self.running().find(|&c| self.commands[c].kind == kind)
    }

    /// Brings `remaining_work` of every running command up to `now`.
    fn settle(&mut self, now: f64) {
        let running: Vec<usize> = self.running().collect();
        for c in running {
            let cmd = &mut self.commands[c];
            cmd.remaining_work =
                ((self.ends[c] - now) * self.rates[c] / cmd.nominal_duration).max(0.0);
        }
    }

    fn start_ready(&mut self, now: f64) {
        for l in 0..self.lanes.len() {
            if self.lanes[l].running.is_some() {
                continue;
            }
            let Some(&head) = self.lanes[l].queue.front() else {
                continue;
            };
            if self.is_ready(head, now) {
                self.lanes[l].queue.pop_front();
                self.lanes[l].running = Some(head);
                let cmd = &mut self.commands[head];
                cmd.start = Some(now);
                cmd.remaining_work = 1.0;
                self.ends[head] = now + cmd.nominal_duration;
                self.rates[head] = 1.0;
            }
        }
    }

    /// Re-derives transfer rates and stretches end times where they changed.
    fn apply_overlap(&mut self, now: f64) {
        let htd = self.running_of_kind(CommandKind::HtD);
        let dth = self.running_of_kind(CommandKind::DtH);
        match (htd, dth) {
            (Some(h), Some(d)) if self.profile.has_dual_dma() => {
                let sigma = self.profile.overlap_sigma();
                if self.rates[h] != sigma || self.rates[d] != sigma {
                    let (eh, ed) =
                        recompute_overlap(&self.commands[h], &self.commands[d], now, self.profile);
                    self.ends[h] = eh;
                    self.ends[d] = ed;
                    self.rates[h] = sigma;
                    self.rates[d] = sigma;
                }
            }
            _ => {
                for c in [htd, dth].into_iter().flatten() {
                    if self.rates[c] != 1.0 {
                        let cmd = &self.commands[c];
                        self.ends[c] = now + cmd.remaining_work * cmd.nominal_duration;
                        self.rates[c] = 1.0;
                    }
                }
            }
        }
    }

    fn next_release(&self, now: f64) -> Option<f64> {
        self.lanes
            .iter()
            .filter_map(|l| l.queue.front())
            .map(|&c| self.subs[self.commands[c].task].release_ms)
            .filter(|&r| r > now + EVENT_EPS)
            .reduce(f64::min)
    }

    fn run(mut self) -> Result<Timeline, SimError> {
        let mut now = 0.0;
        loop {
            self.settle(now);
            self.start_ready(now);
            self.apply_overlap(now);

            let next_end = self.running().map(|c| self.ends[c]).reduce(f64::min);
            let next_release = self.next_release(now);
            let next = match (next_end, next_release) {
                (Some(e), Some(r)) => e.min(r),
                (Some(e), None) => e,
                (None, Some(r)) => r,
                (None, None) => {
                    if self.lanes.iter().all(|l| l.queue.is_empty()) {
                        break;
                    }
                    return Err(SimError::Deadlock { at_ms: now });
                }
            };
            self.settle(next);
            now = next;
            self.finalize_due(now);
        }
        Ok(self.into_timeline())
    }

    /// Finalizes every running command whose provisional end is `now`, in
    /// HtD, DtH, K order.
    fn finalize_due(&mut self, now: f64) {
        let mut due: Vec<usize> = self
            .running()
            .filter(|&c| self.ends[c] <= now + EVENT_EPS)
            .collect();
        due.sort_by_key(|&c| match self.commands[c].kind {
            CommandKind::HtD => 0,
            CommandKind::DtH => 1,
            CommandKind::K => 2,
        });
        for c in due {
            for lane in &mut self.lanes {
                if lane.running == Some(c) {
                    lane.running = None;
                }
            }
            let end = self.ends[c];
            let cmd = &mut self.commands[c];
            cmd.remaining_work = 0.0;
            cmd.end = Some(end);
            let sub = &self.subs[cmd.task];
            self.finished.push(ScheduledCommand {
                task: cmd.task,
                task_id: sub.id.clone(),
                batch: sub.batch,
                kind: cmd.kind,
                nominal_ms: cmd.nominal_duration,
                start_ms: cmd.start.expect("running command has a start"),
                end_ms: end,
            });
        }
    }

    fn into_timeline(self) -> Timeline {
        let first = self
            .finished
            .iter()
            .map(|c| c.start_ms)
            .fold(f64::INFINITY, f64::min);
        let last = self.finished.iter().map(|c| c.end_ms).fold(0.0, f64::max);
        Timeline {
            task_ids: self.subs.iter().map(|s| s.id.clone()).collect(),
            commands: self.finished,
            makespan_ms: last - first,
        }
    }
}

#[cfg(test)]
mod tests;
