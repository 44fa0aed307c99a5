//! Makespan prediction and submission ordering for groups of independent
//! host-to-accelerator tasks.
//!
//! A task is an HtD transfer, a kernel and a DtH transfer. The [`engine`]
//! predicts when every command of an ordered task group starts and ends,
//! accounting for copy-engine contention and the slowdown of simultaneous
//! bidirectional transfers. The [`heuristic`] builds a good submission order
//! for a task group by driving the engine greedily. The [`oracle`] module
//! holds the slow references used to check both.

pub mod engine;
pub mod heuristic;
pub mod model;
pub mod oracle;
pub mod workload;

pub use engine::{
    export_csv, export_trace, recompute_overlap, simulate, simulate_submissions, Command,
    IdleReport, ScheduledCommand, SimError, Submission, Timeline, TraceDocument, TraceEvent,
};
pub use heuristic::{
    reorder_batch, reorder_batch_traced, select_first_task, select_last_tasks, select_next_task,
    Ordering, ReorderState, ReorderTrace,
};
pub use model::{
    classify_task, estimate_kernel, estimate_transfer, fit_kernel_model, CommandKind,
    DeviceProfile, Direction, KernelFit, KernelModel, KernelStage, ModelError, StageTimes,
    TaskDominance, TaskSpec, TransferParams, TransferStage,
};
pub use oracle::{
    exhaustive_search, micro_simulate, OracleError, PermutationEntry, PermutationReport,
};
pub use workload::{
    load_bk_benchmark, load_table2_tasks, run_scenario, sample_real_tasks, Benchmark,
    BenchmarkName, RealDevice, Scenario, ScenarioResult, WorkloadError,
};
