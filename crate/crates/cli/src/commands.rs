use std::collections::HashMap;
use std::io::Write;
use std::path::PathBuf;

use batchorder::workload::Scenario;
use batchorder::{
    exhaustive_search, export_trace, micro_simulate, reorder_batch, run_scenario, simulate,
    Benchmark, BenchmarkName, DeviceProfile, TaskSpec,
};
use clap::{Args, Parser, Subcommand};

use crate::decimal::{Millis, Ratio};
use crate::error::CliError;
use crate::files::{load_bench_config, load_profile, load_tasks, write_json};
use crate::report::{BenchReport, HeuristicRecord, PermuteReport, ScheduleReport, TimelineReport};

#[derive(Debug, Parser)]
#[command(
    name = "batchorder",
    version,
    about = "Predict and reorder accelerator task batches"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one submission order and report its timeline.
    Simulate(SimulateArgs),
    /// Reorder a task group with the heuristic.
    Schedule(ScheduleArgs),
    /// Evaluate every (or a sample of) submission order.
    Permute(PermuteArgs),
    /// Run a multi-worker scenario against the NoReorder baseline.
    Bench(BenchArgs),
    /// Cross-check the event engine against the fixed-step simulator.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Inputs {
    /// Task set file or built-in name (table2, bk0..bk100, real-amd|phi|k20[:COUNT]).
    #[arg(long)]
    pub tasks: String,
    /// Device profile file or built-in name (1dma, 2dma).
    #[arg(long, default_value = "2dma")]
    pub profile: String,
    /// Seed for sampled task sets and orderings.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl Inputs {
    fn load(&self) -> Result<(Vec<TaskSpec>, DeviceProfile), CliError> {
        let profile = load_profile(&self.profile)?;
        let tasks = load_tasks(&self.tasks, self.seed)?;
        if tasks.is_empty() {
            return Err(CliError::Usage(format!(
                "task set `{}` is empty",
                self.tasks
            )));
        }
        Ok((tasks, profile))
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    /// Submission order as comma-separated task ids (default: file order).
    #[arg(long, value_delimiter = ',')]
    pub order: Option<Vec<String>>,
    /// Timeline report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Trace-event document path (chrome://tracing, Perfetto).
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ScheduleArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PermuteArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    /// Largest number of orderings to evaluate; above it a seeded sample is used.
    #[arg(long, default_value_t = 10_000)]
    pub cap: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Scenario configuration file.
    pub config: PathBuf,
    /// Overrides the configuration's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the configuration's ordering cap.
    #[arg(long)]
    pub cap: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Record scheduling wall time in the report (makes it machine dependent).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// Oracle time step in milliseconds.
    #[arg(long, default_value_t = 0.001)]
    pub dt: f64,
    /// Comma-separated benchmark names.
    #[arg(long, default_value = "BK0,BK25,BK50,BK75,BK100")]
    pub benchmarks: String,
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Schedule(a) => cmd_schedule(a, out),
        Command::Permute(a) => cmd_permute(a, out),
        Command::Bench(a) => cmd_bench(a, out),
        Command::Validate(a) => cmd_validate(a, out),
    }
}

fn io(e: std::io::Error) -> CliError {
    CliError::Internal(format!("writing output: {e}"))
}

/// Reorders `tasks` to follow `order`, which must name each task exactly once.
fn arrange(tasks: &[TaskSpec], order: &[String]) -> Result<Vec<TaskSpec>, CliError> {
    let mut by_id: HashMap<&str, &TaskSpec> = tasks.iter().map(|t| (t.id(), t)).collect();
    let arranged = order
        .iter()
        .map(|id| {
            by_id.remove(id.as_str()).cloned().ok_or_else(|| {
                CliError::Invalid(format!("unknown or repeated task id `{id}` in --order"))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    if !by_id.is_empty() {
        let mut missing: Vec<_> = by_id.into_keys().collect();
        missing.sort_unstable();
        return Err(CliError::Invalid(format!(
            "--order is missing {}",
            missing.join(", ")
        )));
    }
    Ok(arranged)
}

fn write_timeline(
    profile: &DeviceProfile,
    tl: &batchorder::Timeline,
    report: Option<&PathBuf>,
    trace: Option<&PathBuf>,
) -> Result<(), CliError> {
    if let Some(path) = report {
        write_json(path, &TimelineReport::new(profile.name(), tl))?;
    }
    if let Some(path) = trace {
        write_json(path, &export_trace(tl))?;
    }
    Ok(())
}

pub fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (tasks, profile) = args.inputs.load()?;
    let tasks = match &args.order {
        Some(order) => arrange(&tasks, order)?,
        None => tasks,
    };
    let tl = simulate(&tasks, &profile)?;
    write_timeline(&profile, &tl, args.out.as_ref(), args.trace.as_ref())?;
    writeln!(out, "makespan: {} ms", Millis::from(tl.makespan())).map_err(io)
}

pub fn cmd_schedule(args: &ScheduleArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (tasks, profile) = args.inputs.load()?;
    let ordered = reorder_batch(&tasks, &profile)?.apply(&tasks);
    let tl = simulate(&ordered, &profile)?;
    let order: Vec<String> = ordered.iter().map(|t| t.id().to_string()).collect();
    write_timeline(&profile, &tl, None, args.trace.as_ref())?;
    if let Some(path) = &args.out {
        write_json(
            path,
            &ScheduleReport {
                profile: profile.name().to_string(),
                order: order.clone(),
                makespan_ms: tl.makespan().into(),
            },
        )?;
    }
    writeln!(out, "order: {}", order.join(" ")).map_err(io)?;
    writeln!(out, "makespan: {} ms", Millis::from(tl.makespan())).map_err(io)
}

pub fn cmd_permute(args: &PermuteArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (tasks, profile) = args.inputs.load()?;
    let report = exhaustive_search(&tasks, &profile, args.cap, args.inputs.seed)?;
    let ordered = reorder_batch(&tasks, &profile)?.apply(&tasks);
    let heuristic_ms = simulate(&ordered, &profile)?.makespan();
    let percentile = report.percentile_of(heuristic_ms);
    let heuristic = HeuristicRecord {
        order: ordered.iter().map(|t| t.id().to_string()).collect(),
        makespan_ms: heuristic_ms.into(),
        percentile: percentile.into(),
    };
    let doc = PermuteReport::new(profile.name(), &report, heuristic);
    if let Some(path) = &args.out {
        write_json(path, &doc)?;
    }
    let sampled = if report.sampled { " (sampled)" } else { "" };
    writeln!(
        out,
        "orderings: {} of {}{sampled}",
        report.len(),
        report.total_orderings
    )
    .map_err(io)?;
    writeln!(
        out,
        "best: {} ms  [{}]",
        doc.best_ms,
        doc.best_order.join(" ")
    )
    .map_err(io)?;
    writeln!(out, "median: {} ms", doc.median_ms).map_err(io)?;
    writeln!(out, "worst: {} ms", doc.worst_ms).map_err(io)?;
    writeln!(
        out,
        "heuristic: {} ms  [{}]  percentile {:.1}",
        doc.heuristic.makespan_ms,
        doc.heuristic.order.join(" "),
        percentile
    )
    .map_err(io)
}

pub fn cmd_bench(args: &BenchArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut resolved = load_bench_config(&args.config)?;
    if let Some(seed) = args.seed {
        resolved.config.seed = seed;
    }
    if let Some(cap) = args.cap {
        resolved.config.cap = cap;
    }
    let config = &resolved.config;
    let pool = Benchmark::new(config.pool.clone(), resolved.pool, &resolved.profile);
    let pool_ids = pool.tasks.iter().map(|t| t.id().to_string()).collect();
    let scenario = Scenario {
        workers: config.workers,
        batch_depth: config.batch_depth,
        pool,
        seed: config.seed,
        profile: resolved.profile,
    };
    let result = run_scenario(&scenario, config.evaluate_noreorder, config.cap)?;
    let report = BenchReport::new(
        config,
        scenario.profile.name(),
        pool_ids,
        &result,
        args.timing,
    );
    if let Some(path) = &args.out {
        write_json(path, &report)?;
    }

    writeln!(
        out,
        "heuristic makespan: {} ms",
        report.heuristic_makespan_ms
    )
    .map_err(io)?;
    if let (Some(nr), Some(sp)) = (&report.noreorder, &report.speedups) {
        if nr.sampled {
            writeln!(
                out,
                "warning: {} orderings exceed the cap; NoReorder uses a sample of {}",
                nr.total_orderings, nr.evaluated
            )
            .map_err(io)?;
        }
        writeln!(
            out,
            "noreorder: best {} / median {} / worst {} ms",
            nr.best_ms, nr.median_ms, nr.worst_ms
        )
        .map_err(io)?;
        writeln!(
            out,
            "speedup vs worst: heuristic {}  median {}  best {}",
            fmt_ratio(sp.heuristic),
            fmt_ratio(sp.median),
            fmt_ratio(sp.best)
        )
        .map_err(io)?;
    }
    writeln!(
        out,
        "scheduling overhead: {:.4} ms per task group ({} groups of up to {} tasks, {} engine calls)",
        result.overhead.wall_ms_per_tg,
        result.overhead.task_groups,
        config.workers,
        result.overhead.engine_calls
    )
    .map_err(io)
}

fn fmt_ratio(r: Ratio) -> String {
    format!("{:.3}", r.to_f64())
}

/// Largest deviation between the two simulators over one benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct Deviation {
    pub benchmark: BenchmarkName,
    pub profile: String,
    pub orderings: usize,
    pub max_abs_ms: f64,
    pub max_rel: f64,
}

/// Runs every permutation of each benchmark through the event engine and the
/// fixed-step simulator on both bundled profiles.
pub fn validate(dt: f64, benchmarks: &[BenchmarkName]) -> Result<Vec<Deviation>, CliError> {
    use itertools::Itertools;
    use rayon::prelude::*;

    let mut rows = Vec::new();
    for profile in [
        DeviceProfile::default_one_dma(),
        DeviceProfile::default_two_dma(),
    ] {
        for &bk in benchmarks {
            let tasks = batchorder::workload::bk_benchmark(bk).tasks;
            let perms: Vec<Vec<TaskSpec>> =
                tasks.iter().cloned().permutations(tasks.len()).collect();
            let devs = perms
                .par_iter()
                .map(|perm| {
                    let fast = simulate(perm, &profile)?.makespan();
                    let slow = micro_simulate(perm, &profile, dt)?.makespan();
                    Ok(((fast - slow).abs(), (fast - slow).abs() / fast))
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            rows.push(Deviation {
                benchmark: bk,
                profile: profile.name().to_string(),
                orderings: devs.len(),
                max_abs_ms: devs.iter().map(|d| d.0).fold(0.0, f64::max),
                max_rel: devs.iter().map(|d| d.1).fold(0.0, f64::max),
            });
        }
    }
    Ok(rows)
}

pub fn cmd_validate(args: &ValidateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if !(args.dt.is_finite() && args.dt > 0.0) {
        return Err(CliError::Usage(format!(
            "--dt must be positive, got {}",
            args.dt
        )));
    }
    let benchmarks = args
        .benchmarks
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<BenchmarkName>()
                .map_err(|e| CliError::Usage(e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if benchmarks.is_empty() {
        return Err(CliError::Usage("no benchmarks selected".into()));
    }

    // deviation allowed: two steps, i.e. 2·dt relative to the makespan
    let tolerance = 2.0 * args.dt;
    let rows = validate(args.dt, &benchmarks)?;
    let mut failed = 0;
    for r in &rows {
        let ok = r.max_abs_ms <= tolerance + 1e-9 * args.dt;
        failed += usize::from(!ok);
        writeln!(
            out,
            "{:<6} {:<13} {:>3} orderings  max deviation {:.6} ms ({:.4}% of makespan)  {}",
            r.benchmark.to_string(),
            r.profile,
            r.orderings,
            r.max_abs_ms,
            r.max_rel * 100.0,
            if ok { "ok" } else { "FAIL" }
        )
        .map_err(io)?;
    }
    let worst = rows.iter().map(|r| r.max_rel).fold(0.0, f64::max);
    writeln!(out, "max relative deviation: {:.6}%", worst * 100.0).map_err(io)?;
    if failed > 0 {
        return Err(CliError::CheckFailed(format!(
            "{failed} of {} checks exceed the tolerance of {tolerance} ms",
            rows.len()
        )));
    }
    Ok(())
}
