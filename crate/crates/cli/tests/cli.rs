use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use batchorder_cli::report::{BenchReport, PermuteReport, ScheduleReport, TimelineReport};
use serde::de::DeserializeOwned;
use serde::Serialize;

fn batchorder(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_batchorder"))
        .args(args)
        .current_dir(workspace())
        .output()
        .unwrap()
}

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn round_trips<T: Serialize + DeserializeOwned + PartialEq + std::fmt::Debug>(path: &Path) -> T {
    let text = std::fs::read_to_string(path).unwrap();
    let parsed: T = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string_pretty(&parsed).unwrap() + "\n", text);
    let again: T = serde_json::from_str(&serde_json::to_string(&parsed).unwrap()).unwrap();
    assert_eq!(again, parsed);
    parsed
}

#[test]
fn simulate_single_task() {
    let dir = tempfile::tempdir().unwrap();
    let tasks = dir.path().join("t0.json");
    std::fs::write(
        &tasks,
        r#"[{"id": "T0", "htd_ms": 1, "k_ms": 8, "dth_ms": 1}]"#,
    )
    .unwrap();
    let out = batchorder(&["simulate", "--tasks", tasks.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "makespan: 10.000 ms\n");
}

#[test]
fn simulate_writes_report_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("bk0.json");
    let trace = dir.path().join("bk0.trace.json");
    let out = batchorder(&[
        "simulate",
        "--tasks",
        "assets/tasksets/bk0.json",
        "--profile",
        "assets/profiles/default-2dma.json",
        "--out",
        report.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");

    let tasks = batchorder::workload::bk_benchmark(batchorder::BenchmarkName::Bk0).tasks;
    let expected = batchorder::simulate(&tasks, &batchorder::DeviceProfile::default_two_dma())
        .unwrap()
        .makespan();
    let report: TimelineReport = round_trips(&report);
    assert_eq!(report.makespan_ms.to_f64(), expected);
    assert_eq!(report.commands.len(), 12);

    let trace: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(trace).unwrap()).unwrap();
    assert_eq!(trace["traceEvents"].as_array().unwrap().len(), 12);
}

#[test]
fn simulate_rejects_bad_orders() {
    for order in ["T6,T6,T4,T5", "T6,T7,T4", "T6,T7,T4,T5,T9"] {
        let out = batchorder(&["simulate", "--tasks", "bk0", "--order", order]);
        assert_eq!(out.status.code(), Some(4), "{order}");
    }
    let out = batchorder(&["simulate", "--tasks", "bk0", "--order", "T5,T4,T7,T6"]);
    assert!(out.status.success());
}

#[test]
fn schedule_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    let out = batchorder(&[
        "schedule",
        "--tasks",
        "bk100",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("order: T0 "));
    let report: ScheduleReport = round_trips(&path);
    assert_eq!(report.order[0], "T0");

    let single = dir.path().join("one.json");
    std::fs::write(
        &single,
        r#"{"tasks": [{"id": "solo", "htd_ms": 2, "k_ms": 1, "dth_ms": 1}]}"#,
    )
    .unwrap();
    let out = batchorder(&["schedule", "--tasks", single.to_str().unwrap()]);
    assert!(stdout(&out).starts_with("order: solo\n"));

    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, "[]").unwrap();
    let out = batchorder(&["schedule", "--tasks", empty.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn permute_counts_and_percentiles() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    let out = batchorder(&[
        "permute",
        "--tasks",
        "bk50",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let report: PermuteReport = round_trips(&path);
    assert_eq!(report.evaluated, 24);
    assert!(!report.sampled);

    let run = |p: &Path| {
        let out = batchorder(&[
            "permute",
            "--tasks",
            "table2",
            "--cap",
            "1000",
            "--seed",
            "9",
            "--out",
            p.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        std::fs::read(p).unwrap()
    };
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    assert_eq!(run(&a), run(&b));
    let sampled: PermuteReport = round_trips(&a);
    assert_eq!((sampled.evaluated, sampled.total_orderings), (1000, 40320));

    for bk in ["bk0", "bk25", "bk50", "bk75", "bk100"] {
        for profile in ["1dma", "2dma"] {
            let out = batchorder(&[
                "permute",
                "--tasks",
                bk,
                "--profile",
                profile,
                "--out",
                path.to_str().unwrap(),
            ]);
            assert!(out.status.success());
            let report: PermuteReport = round_trips(&path);
            assert!(
                report.heuristic.percentile.to_f64() <= 50.0,
                "{bk} {profile}"
            );
        }
    }
}

#[test]
fn bench_reports() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bench.json");
    let out = batchorder(&[
        "bench",
        "assets/scenarios/bk25-t4-n1.json",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let text = stdout(&out);
    assert!(text.contains("speedup vs worst"));
    let report: BenchReport = round_trips(&path);
    let sp = report.speedups.unwrap();
    assert!(sp.heuristic >= sp.median);
    assert!(report.overhead.wall_ms_per_tg.is_none());

    let config = dir.path().join("solo.json");
    std::fs::write(
        &config,
        r#"{"workers": 1, "batch_depth": 4, "pool": "bk50", "profile": "2dma", "seed": 3}"#,
    )
    .unwrap();
    let out = batchorder(&[
        "bench",
        config.to_str().unwrap(),
        "--out",
        path.to_str().unwrap(),
        "--timing",
    ]);
    assert!(out.status.success());
    let report: BenchReport = round_trips(&path);
    let sp = report.speedups.unwrap();
    assert_eq!(
        [sp.heuristic.to_f64(), sp.median.to_f64(), sp.best.to_f64()],
        [1.0; 3]
    );
    assert!(report.overhead.wall_ms_per_tg.is_some());
}

#[test]
fn bench_overhead_format_at_eight_workers() {
    let out = batchorder(&[
        "bench",
        "assets/scenarios/real-k20-t8-n1.json",
        "--cap",
        "200",
    ]);
    assert!(out.status.success(), "{out:?}");
    let text = stdout(&out);
    assert!(text.contains("warning:"));
    let line = text
        .lines()
        .find(|l| l.starts_with("scheduling overhead:"))
        .unwrap();
    let value = line.split_whitespace().nth(2).unwrap();
    assert!(value.split('.').nth(1).unwrap().len() >= 2, "{line}");
}

#[test]
fn validate_exit_codes() {
    let out = batchorder(&["validate", "--benchmarks", "BK25,BK100"]);
    assert!(out.status.success(), "{}", stdout(&out));
    assert_eq!(stdout(&out).lines().count(), 5);

    let out = batchorder(&["validate", "--dt", "5", "--benchmarks", "BK0"]);
    assert_eq!(out.status.code(), Some(1));

    assert_eq!(
        batchorder(&["validate", "--benchmarks", ""]).status.code(),
        Some(2)
    );
    assert_eq!(
        batchorder(&["validate", "--benchmarks", "BK10"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        batchorder(&["validate", "--dt", "0"]).status.code(),
        Some(2)
    );
}

#[test]
fn parse_errors_name_the_location() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "[\n  {\"id\": \"x\",\n   \"htd_ms\": }\n]").unwrap();
    let out = batchorder(&["simulate", "--tasks", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 3"), "{err}");

    let out = batchorder(&[
        "simulate",
        "--tasks",
        "bk0",
        "--profile",
        bad.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let out = batchorder(&["simulate", "--tasks", "missing.json"]);
    assert_eq!(out.status.code(), Some(3));
}
