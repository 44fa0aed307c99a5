//! Measured execution-time envelopes of eight SDK kernels on three devices.
//! Each entry is `[min, max]` in milliseconds for HtD, K and DtH.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RealDevice {
    /// AMD R9, two copy engines.
    Amd,
    /// Intel Xeon Phi 5100, one copy engine.
    Phi,
    /// NVIDIA K20c, two copy engines.
    K20,
}

impl RealDevice {
    pub const ALL: [RealDevice; 3] = [RealDevice::Amd, RealDevice::Phi, RealDevice::K20];

    pub fn dma_engines(self) -> u8 {
        match self {
            RealDevice::Phi => 1,
            RealDevice::Amd | RealDevice::K20 => 2,
        }
    }
}

impl fmt::Display for RealDevice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RealDevice::Amd => "AMD",
            RealDevice::Phi => "PHI",
            RealDevice::K20 => "K20",
        })
    }
}

impl FromStr for RealDevice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "AMD" | "R9" => Ok(RealDevice::Amd),
            "PHI" | "XEON-PHI" => Ok(RealDevice::Phi),
            "K20" | "K20C" => Ok(RealDevice::K20),
            other => Err(format!(
                "unknown device `{other}` (expected AMD, PHI or K20)"
            )),
        }
    }
}

pub type Range = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelEnvelope {
    pub kernel: &'static str,
    pub htd: Range,
    pub k: Range,
    pub dth: Range,
}

const fn env(kernel: &'static str, htd: Range, k: Range, dth: Range) -> KernelEnvelope {
    KernelEnvelope {
        kernel,
        htd,
        k,
        dth,
    }
}

pub const REAL_KERNELS: [&str; 8] = ["MM", "BS", "FWT", "FLW", "CONV", "VA", "TM", "DCT"];

const AMD: [KernelEnvelope; 8] = [
    env("MM", [0.97, 2.57], [1.80, 9.02], [0.14, 1.18]),
    env("BS", [0.08, 1.29], [2.98, 5.57], [0.16, 2.17]),
    env("FWT", [1.29, 2.57], [2.59, 5.47], [1.18, 2.35]),
    env("FLW", [0.05, 0.07], [7.77, 10.08], [0.09, 0.16]),
    env("CONV", [0.09, 0.37], [1.51, 14.58], [0.09, 0.37]),
    env("VA", [0.65, 3.86], [0.05, 0.30], [0.30, 1.81]),
    env("TM", [2.57, 5.15], [0.29, 3.59], [2.36, 4.70]),
    env("DCT", [2.57, 5.15], [0.95, 1.89], [2.35, 4.71]),
];

const PHI: [KernelEnvelope; 8] = [
    env("MM", [0.36, 0.90], [4.98, 5.03], [0.09, 0.16]),
    env("BS", [0.17, 0.63], [5.25, 12.03], [0.33, 1.24]),
    env("FWT", [0.67, 1.26], [4.59, 6.39], [0.61, 1.21]),
    env("FLW", [0.03, 0.06], [1.12, 9.05], [0.06, 0.12]),
    env("CONV", [0.06, 0.17], [0.56, 10.09], [0.17, 10.09]),
    env("VA", [1.27, 7.46], [0.18, 1.18], [0.61, 3.68]),
    // published as 2.36-1.09; bounds swapped into ascending order
    env("TM", [2.58, 4.98], [1.09, 2.36], [2.54, 4.93]),
    env("DCT", [1.71, 2.25], [6.97, 9.41], [1.67, 2.18]),
];

const K20: [KernelEnvelope; 8] = [
    env("MM", [2.51, 3.77], [3.99, 7.95], [1.24, 2.49]),
    env("BS", [0.31, 1.25], [1.25, 9.26], [0.62, 2.50]),
    env("FWT", [1.25, 5.01], [1.20, 4.94], [1.25, 4.98]),
    env("FLW", [0.01, 0.31], [1.32, 9.25], [0.03, 0.63]),
    env("CONV", [0.63, 2.53], [1.47, 9.20], [0.62, 2.50]),
    env("VA", [2.51, 12.54], [0.09, 0.44], [1.25, 6.19]),
    env("TM", [2.60, 5.01], [0.41, 2.61], [2.60, 4.96]),
    env("DCT", [2.51, 5.01], [1.55, 3.08], [2.48, 4.96]),
];

pub fn envelopes(device: RealDevice) -> &'static [KernelEnvelope; 8] {
    match device {
        RealDevice::Amd => &AMD,
        RealDevice::Phi => &PHI,
        RealDevice::K20 => &K20,
    }
}

pub fn envelope(device: RealDevice, kernel: &str) -> Option<&'static KernelEnvelope> {
    envelopes(device).iter().find(|e| e.kernel == kernel)
}
