use proptest::prelude::*;

use super::*;
use crate::model::TransferParams;
use crate::oracle::micro_simulate;

fn t(id: &str, h: f64, k: f64, d: f64) -> TaskSpec {
    TaskSpec::fixed(id, h, k, d).unwrap()
}

fn dual(sigma: f64) -> DeviceProfile {
    let p = TransferParams::new(0.0, 1.0e6);
    DeviceProfile::new("dual", 2, p, p, sigma).unwrap()
}

fn single() -> DeviceProfile {
    DeviceProfile::default_one_dma()
}

fn interval(tl: &Timeline, task: usize, kind: CommandKind) -> (f64, f64) {
    let c = tl.command(task, kind).unwrap();
    (c.start_ms, c.end_ms)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn single_task_is_a_chain() {
    let tl = simulate(&[t("T0", 1.0, 8.0, 1.0)], &DeviceProfile::default_two_dma()).unwrap();
    assert_eq!(tl.makespan(), 10.0);
    assert_eq!(interval(&tl, 0, CommandKind::HtD), (0.0, 1.0));
    assert_eq!(interval(&tl, 0, CommandKind::K), (1.0, 9.0));
    assert_eq!(interval(&tl, 0, CommandKind::DtH), (9.0, 10.0));
}

#[test]
fn two_copies_serialize_on_the_kernel_queue() {
    let p = dual(1.0);
    let tasks = [t("a", 1.0, 8.0, 1.0), t("b", 1.0, 8.0, 1.0)];
    let tl = simulate(&tasks, &p).unwrap();
    assert_eq!(tl.makespan(), 18.0);
    assert_eq!(interval(&tl, 0, CommandKind::HtD), (0.0, 1.0));
    assert_eq!(interval(&tl, 1, CommandKind::HtD), (1.0, 2.0));
    assert_eq!(interval(&tl, 0, CommandKind::K), (1.0, 9.0));
    assert_eq!(interval(&tl, 1, CommandKind::K), (9.0, 17.0));
    assert_eq!(interval(&tl, 0, CommandKind::DtH), (9.0, 10.0));
    assert_eq!(interval(&tl, 1, CommandKind::DtH), (17.0, 18.0));

    let micro = micro_simulate(&tasks, &p, 0.001).unwrap();
    assert!((micro.makespan() - 18.0).abs() <= 0.002);
}

#[test]
fn overlap_reestimation_walkthrough() {
    // HtD_1 starts at 200 and would end at 210; K_0 ends at 207 and DtH_0
    // then shares the link with it
    let p = dual(0.375);
    let tasks = [t("0", 200.0, 7.0, 8.0), t("1", 10.0, 5.0, 1.0)];
    let tl = simulate(&tasks, &p).unwrap();
    let (s, e) = interval(&tl, 1, CommandKind::HtD);
    assert!(close(s, 200.0));
    assert!(close(e, 215.0), "HtD_1 ends at {e}");
    // DtH_0 did 3 ms of work while overlapped, the remaining 5 ms alone
    let (s, e) = interval(&tl, 0, CommandKind::DtH);
    assert!(close(s, 207.0));
    assert!(close(e, 220.0), "DtH_0 ends at {e}");
}

#[test]
fn recompute_overlap_examples() {
    let p = dual(0.375);
    let mut htd = Command::new(0, CommandKind::HtD, 10.0);
    htd.remaining_work = 0.3;
    let dth = Command::new(1, CommandKind::DtH, 8.0);
    let (eh, ed) = recompute_overlap(&htd, &dth, 207.0, &p);
    assert!(close(eh, 215.0));
    assert!(close(ed, 207.0 + 8.0 / 0.375));

    let (eh, ed) = recompute_overlap(&htd, &dth, 207.0, &dual(1.0));
    assert!(close(eh, 210.0));
    assert!(close(ed, 215.0));

    let a = Command::new(0, CommandKind::HtD, 10.0);
    let b = Command::new(1, CommandKind::DtH, 10.0);
    assert_eq!(recompute_overlap(&a, &b, 0.0, &dual(0.5)), (20.0, 20.0));
}

#[test]
fn overlap_endpoints() {
    // full overlap: both directions start together
    let tasks = [t("h", 10.0, 0.0, 0.0), t("d", 0.0, 0.0, 10.0)];
    let tl = simulate(&tasks, &dual(0.5)).unwrap();
    assert_eq!(interval(&tl, 0, CommandKind::HtD), (0.0, 20.0));
    assert_eq!(interval(&tl, 1, CommandKind::DtH), (0.0, 20.0));

    // no overlap: the DtH only becomes ready after the HtD is done
    let tasks = [t("h", 10.0, 0.0, 0.0), t("d", 0.0, 12.0, 4.0)];
    let tl = simulate(&tasks, &dual(0.5)).unwrap();
    assert_eq!(interval(&tl, 0, CommandKind::HtD), (0.0, 10.0));
    assert_eq!(interval(&tl, 1, CommandKind::DtH), (12.0, 16.0));
}

#[test]
fn null_stages_emit_no_commands() {
    let p = DeviceProfile::default_two_dma();
    let tl = simulate(&[t("k", 0.0, 3.0, 0.0), t("x", 2.0, 1.0, 0.0)], &p).unwrap();
    assert_eq!(tl.commands().len(), 3);
    assert!(tl.command(0, CommandKind::HtD).is_none());
    assert!(tl.command(1, CommandKind::DtH).is_none());
    // a task without HtD starts its kernel immediately
    assert_eq!(interval(&tl, 0, CommandKind::K), (0.0, 3.0));
    assert_eq!(interval(&tl, 1, CommandKind::K), (3.0, 4.0));
}

#[test]
fn dth_follows_htd_when_kernel_is_null() {
    let tl = simulate(&[t("copy", 2.0, 0.0, 3.0)], &single()).unwrap();
    assert_eq!(interval(&tl, 0, CommandKind::DtH), (2.0, 5.0));
}

#[test]
fn single_dma_defers_dth_until_every_htd() {
    let tasks = [t("a", 1.0, 1.0, 1.0), t("b", 5.0, 1.0, 1.0)];
    let tl = simulate(&tasks, &single()).unwrap();
    // a's DtH would be ready at 2 but waits for b's HtD to end at 6
    assert_eq!(interval(&tl, 0, CommandKind::DtH), (6.0, 7.0));
    assert_eq!(interval(&tl, 1, CommandKind::DtH), (7.0, 8.0));
    assert_eq!(tl.makespan(), 8.0);
}

#[test]
fn errors() {
    let p = DeviceProfile::default_two_dma();
    assert_eq!(simulate(&[], &p), Err(SimError::EmptyTaskGroup));

    let mut bad = Submission::new("x", StageTimes::new(1.0, 1.0, 1.0));
    bad.after = Some(0);
    assert!(matches!(
        simulate_submissions(&[bad.clone()], &p),
        Err(SimError::InvalidDependency { .. })
    ));

    let zero = Submission::new("z", StageTimes::new(0.0, 0.0, 0.0));
    assert_eq!(
        simulate_submissions(&[zero], &p),
        Err(SimError::UnresolvableDuration("z".into()))
    );

    let mut a = Submission::new("a", StageTimes::new(1.0, 1.0, 1.0));
    a.batch = 1;
    let b = Submission::new("b", StageTimes::new(1.0, 1.0, 1.0));
    assert_eq!(
        simulate_submissions(&[a, b], &p),
        Err(SimError::BatchOrder("b".into()))
    );
}

#[test]
fn release_times_and_gates() {
    let p = dual(1.0);
    let mut first = Submission::new("a", StageTimes::new(1.0, 2.0, 1.0));
    first.release_ms = 3.0;
    let mut second = Submission::new("b", StageTimes::new(1.0, 1.0, 1.0));
    second.after = Some(0);
    let tl = simulate_submissions(&[first, second], &p).unwrap();
    assert_eq!(interval(&tl, 0, CommandKind::HtD), (3.0, 4.0));
    // b waits for a's DtH to finish at 7
    assert_eq!(interval(&tl, 1, CommandKind::HtD), (7.0, 8.0));
    assert_eq!(tl.makespan(), 7.0);
    assert_eq!(tl.last_end(CommandKind::DtH), 10.0);
}

#[test]
fn single_dma_batches_keep_transfer_order() {
    let p = single();
    let a = Submission::new("a", StageTimes::new(1.0, 5.0, 1.0));
    let mut b = Submission::new("b", StageTimes::new(1.0, 1.0, 1.0));
    b.batch = 1;
    b.release_ms = 1.0;
    let tl = simulate_submissions(&[a, b], &p).unwrap();
    // b's HtD sits behind a's DtH in the single transfer queue
    assert_eq!(interval(&tl, 0, CommandKind::DtH), (6.0, 7.0));
    assert_eq!(interval(&tl, 1, CommandKind::HtD), (7.0, 8.0));
}

#[test]
fn idle_report() {
    let p = dual(1.0);
    let tl = simulate(&[t("a", 1.0, 1.0, 1.0), t("b", 4.0, 1.0, 1.0)], &p).unwrap();
    // K: [1,2] then [5,6]
    assert_eq!(tl.idle().k_ms, 3.0);
    assert_eq!(tl.idle().htd_ms, 0.0);
    assert_eq!(tl.idle().get(CommandKind::DtH), 3.0);
}

#[test]
fn trace_export() {
    let p = dual(1.0);
    let one = simulate(&[t("T0", 1.0, 8.0, 1.0)], &p).unwrap();
    let doc = export_trace(&one);
    assert_eq!(doc.trace_events.len(), 3);
    let mut lanes: Vec<u32> = doc.trace_events.iter().map(|e| e.tid).collect();
    lanes.sort_unstable();
    assert_eq!(lanes, [1, 2, 3]);
    assert_eq!(doc.trace_events[1].ts, 1000);
    assert_eq!(doc.trace_events[1].dur, 8000);

    let no_dth = simulate(&[t("x", 1.0, 2.0, 0.0)], &p).unwrap();
    let doc = export_trace(&no_dth);
    assert_eq!(doc.trace_events.len(), 2);
    assert!(doc.trace_events.iter().all(|e| e.cat != "DtH"));

    let two = simulate(&[t("a", 1.0, 8.0, 1.0), t("b", 1.0, 8.0, 1.0)], &p).unwrap();
    let doc = export_trace(&two);
    assert_eq!(doc.trace_events.len(), 6);
    assert_eq!(
        doc.trace_events.iter().map(|e| e.ts + e.dur).max(),
        Some(18_000)
    );

    let json = serde_json::to_string(&doc).unwrap();
    assert!(json.contains("\"traceEvents\""));
    assert!(json.contains("\"ph\":\"X\""));

    let csv = export_csv(&one);
    assert_eq!(
        csv,
        "task_id,kind,start_ms,end_ms\nT0,HtD,0.000,1.000\nT0,K,1.000,9.000\nT0,DtH,9.000,10.000\n"
    );
}

fn arb_tasks() -> impl Strategy<Value = Vec<TaskSpec>> {
    // half-millisecond grid keeps the fixed-step oracle exact
    let stage = prop_oneof![Just(0u32), 1u32..16];
    prop::collection::vec((stage.clone(), 1u32..16, stage), 1..6).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (h, k, d))| {
                t(
                    &format!("t{i}"),
                    h as f64 * 0.5,
                    k as f64 * 0.5,
                    d as f64 * 0.5,
                )
            })
            .collect()
    })
}

fn arb_profile() -> impl Strategy<Value = DeviceProfile> {
    prop_oneof![
        Just(single()),
        Just(dual(1.0)),
        Just(dual(0.5)),
        (0.5f64..1.0).prop_map(dual),
    ]
}

fn check_invariants(tasks: &[TaskSpec], p: &DeviceProfile, tl: &Timeline) {
    let stages: Vec<StageTimes> = tasks.iter().map(|t| t.stage_times(p)).collect();
    let eps = 1e-9;

    // every non-null stage ran exactly once, never shorter than nominal
    let expected: usize = stages
        .iter()
        .map(|s| [s.htd, s.k, s.dth].iter().filter(|v| **v > 0.0).count())
        .sum();
    assert_eq!(tl.commands().len(), expected);
    for c in tl.commands() {
        assert!(c.end_ms >= c.start_ms);
        assert!(c.duration() >= c.nominal_ms - eps);
    }

    for (i, s) in stages.iter().enumerate() {
        let get = |k| tl.command(i, k);
        if let (Some(h), Some(k)) = (get(CommandKind::HtD), get(CommandKind::K)) {
            assert!(k.start_ms >= h.end_ms - eps);
        }
        if let Some(d) = get(CommandKind::DtH) {
            let pred = get(CommandKind::K).or(get(CommandKind::HtD));
            if let Some(pred) = pred {
                assert!(d.start_ms >= pred.end_ms - eps);
            }
        }
        assert!(tl.makespan() >= s.total() - eps);
    }

    // FIFO: per kind, ends follow task order
    for kind in CommandKind::ALL {
        let mut cmds: Vec<_> = tl.of_kind(kind).collect();
        cmds.sort_by_key(|c| c.task);
        for w in cmds.windows(2) {
            assert!(w[1].end_ms >= w[0].end_ms - eps);
            assert!(w[1].start_ms >= w[0].end_ms - eps);
        }
    }

    if !p.has_dual_dma() {
        let mut transfers: Vec<_> = tl
            .commands()
            .iter()
            .filter(|c| c.kind != CommandKind::K)
            .collect();
        transfers.sort_by(|a, b| a.start_ms.total_cmp(&b.start_ms));
        for w in transfers.windows(2) {
            assert!(w[1].start_ms >= w[0].end_ms - eps);
        }
        let last_htd = tl.last_end(CommandKind::HtD);
        for d in tl.of_kind(CommandKind::DtH) {
            assert!(d.start_ms >= last_htd - eps);
        }
    }

    if p.overlap_sigma() == 1.0 {
        for c in tl.commands() {
            assert!((c.duration() - c.nominal_ms).abs() <= eps);
        }
    }
    if p.overlap_sigma() >= 0.5 {
        let serial: f64 = stages.iter().map(StageTimes::total).sum();
        assert!(tl.makespan() <= serial + eps);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn timeline_invariants(tasks in arb_tasks(), p in arb_profile()) {
        let tl = simulate(&tasks, &p).unwrap();
        check_invariants(&tasks, &p, &tl);
        prop_assert_eq!(&tl, &simulate(&tasks, &p).unwrap());
    }

    #[test]
    fn agrees_with_fixed_step_oracle(tasks in arb_tasks(), sigma in prop_oneof![Just(0.5), Just(1.0)], one_dma in any::<bool>()) {
        let p = if one_dma { single() } else { dual(sigma) };
        let dt = 0.001;
        let fast = simulate(&tasks, &p).unwrap().makespan();
        let slow = micro_simulate(&tasks, &p, dt).unwrap().makespan();
        prop_assert!((fast - slow).abs() <= 2.0 * dt, "engine {} vs oracle {}", fast, slow);
    }
}
