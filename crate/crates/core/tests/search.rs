//! Cross-checks between the event engine, the fixed-step oracle, the
//! permutation search and the reordering heuristic.

use approx::assert_relative_eq;
use batchorder::workload::{bk_benchmark, BenchmarkName};
use batchorder::{
    exhaustive_search, micro_simulate, reorder_batch, sample_real_tasks, simulate, DeviceProfile,
    RealDevice, TaskSpec,
};
use itertools::Itertools;
use proptest::prelude::*;

fn profiles() -> [DeviceProfile; 2] {
    [
        DeviceProfile::default_one_dma(),
        DeviceProfile::default_two_dma(),
    ]
}

#[test]
fn every_benchmark_permutation_matches_the_oracle() {
    let dt = 0.001;
    for p in profiles() {
        for bk in BenchmarkName::ALL {
            let tasks = bk_benchmark(bk).tasks;
            for perm in tasks.iter().cloned().permutations(tasks.len()) {
                let fast = simulate(&perm, &p).unwrap().makespan();
                let slow = micro_simulate(&perm, &p, dt).unwrap().makespan();
                assert!(
                    (fast - slow).abs() <= 2.0 * dt,
                    "{bk} on {}: {fast} vs {slow}",
                    p.name()
                );
            }
        }
    }
}

#[test]
fn search_covers_all_orders_and_agrees_with_the_engine() {
    let p = DeviceProfile::default_two_dma();
    let tasks = bk_benchmark(BenchmarkName::Bk50).tasks;
    let report = exhaustive_search(&tasks, &p, 10_000, 0).unwrap();
    assert_eq!(report.len(), 24);
    assert!(!report.sampled);
    for e in &report.entries {
        let ordered: Vec<TaskSpec> = e
            .order
            .iter()
            .map(|id| tasks.iter().find(|t| t.id() == id).unwrap().clone())
            .collect();
        assert_relative_eq!(simulate(&ordered, &p).unwrap().makespan(), e.makespan_ms);
    }
    assert!(report.best_ms <= report.median_ms && report.median_ms <= report.worst_ms);
    assert_eq!(report.percentile_of(report.best_ms), 0.0);
}

#[test]
fn heuristic_on_sampled_real_tasks() {
    for device in RealDevice::ALL {
        let p = if device.dma_engines() == 1 {
            DeviceProfile::default_one_dma()
        } else {
            DeviceProfile::default_two_dma()
        };
        let tasks = sample_real_tasks(device, 6, 42);
        let order = reorder_batch(&tasks, &p).unwrap();
        assert!(order.is_permutation_of(6));
        let ours = simulate(&order.apply(&tasks), &p).unwrap().makespan();
        let report = exhaustive_search(&tasks, &p, 10_000, 0).unwrap();
        assert_eq!(report.len(), 720);
        assert!(ours >= report.best_ms - 1e-9 && ours <= report.worst_ms + 1e-9);
    }
}

fn arb_tasks() -> impl Strategy<Value = Vec<TaskSpec>> {
    prop::collection::vec((0.1f64..10.0, 0.1f64..10.0, 0.1f64..10.0), 1..7).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (h, k, d))| TaskSpec::fixed(format!("t{i}"), h, k, d).unwrap())
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn heuristic_returns_a_valid_order(tasks in arb_tasks(), two in any::<bool>()) {
        let p = if two { DeviceProfile::default_two_dma() } else { DeviceProfile::default_one_dma() };
        let order = reorder_batch(&tasks, &p).unwrap();
        prop_assert!(order.is_permutation_of(tasks.len()));
        prop_assert_eq!(&order, &reorder_batch(&tasks, &p).unwrap());
        let ms = simulate(&order.apply(&tasks), &p).unwrap().makespan();
        let report = exhaustive_search(&tasks, &p, 10_000, 0).unwrap();
        prop_assert!(ms >= report.best_ms - 1e-9);
        prop_assert!(ms <= report.worst_ms + 1e-9);
    }
}
