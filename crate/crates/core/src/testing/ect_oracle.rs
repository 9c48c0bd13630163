//! Brute-force enumeration of every unit's completion time for one kernel,
//! computed straight from the profile and cost constants.

use crate::compute::KernelKind;
use crate::hwmodel::{ComputeUnitId, CostDefaults, HardwareProfile, UnitClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Alternative {
    pub unit: ComputeUnitId,
    pub completion: u64,
}

fn half_up(x: f64) -> u64 {
    (x + 0.5).floor() as u64
}

/// All eligible units with the completion time each would give at `now`,
/// listed asic first, then dpu cores, then host cores, each by index.
pub fn alternatives(
    profile: &HardwareProfile,
    defaults: &CostDefaults,
    available_at: impl Fn(ComputeUnitId) -> u64,
    now: u64,
    kind: KernelKind,
    bytes: u64,
) -> Vec<Alternative> {
    let mut out = Vec::new();
    for (i, acc) in profile.accelerators.iter().enumerate() {
        if acc.kernel_kinds.contains(&kind) {
            let unit = ComputeUnitId::asic(i as u32);
            let service = acc.startup_ns + half_up(bytes as f64 * 1e9 / acc.throughput_bps as f64);
            out.push(Alternative { unit, completion: available_at(unit).max(now) + service });
        }
    }
    let cost = defaults.kernel[&kind];
    let cycles = cost.fixed_cycles + cost.cycles_per_byte * bytes as f64;
    for (class, cores, clock) in [
        (UnitClass::DpuCpu, profile.dpu_cores, profile.dpu_clock_hz),
        (UnitClass::HostCpu, profile.host_cores, profile.host_clock_hz),
    ] {
        let service = half_up(cycles * 1e9 / clock as f64);
        for i in 0..cores {
            let unit = ComputeUnitId::new(class, i);
            out.push(Alternative { unit, completion: available_at(unit).max(now) + service });
        }
    }
    out
}

/// The unit the scheduler must pick: minimal completion, first in listing
/// order among ties.
pub fn expected(alts: &[Alternative]) -> Alternative {
    let mut best = alts[0];
    for a in &alts[1..] {
        if a.completion < best.completion {
            best = *a;
        }
    }
    best
}
