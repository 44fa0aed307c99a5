//! Shared inputs for the benchmarks.

use batchorder::{sample_real_tasks, DeviceProfile, RealDevice, TaskSpec};

/// Sampled real tasks for a task group of `size`, with the matching profile.
pub fn real_group(device: RealDevice, size: usize, seed: u64) -> (Vec<TaskSpec>, DeviceProfile) {
    let profile = if device.dma_engines() == 1 {
        DeviceProfile::default_one_dma()
    } else {
        DeviceProfile::default_two_dma()
    };
    (sample_real_tasks(device, size, seed), profile)
}
