//! Timing formulas. Everything returns whole nanoseconds, rounded half-up.

use super::profile::AcceleratorSpec;

const NS_PER_SEC: f64 = 1e9;

/// CPU work as a linear function of the bytes touched.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WorkSpec {
    pub bytes: u64,
    pub cycles_per_byte: f64,
    pub fixed_cycles: f64,
}

impl WorkSpec {
    pub fn new(bytes: u64, cycles_per_byte: f64, fixed_cycles: f64) -> Self {
        debug_assert!(cycles_per_byte >= 0.0 && fixed_cycles >= 0.0);
        WorkSpec { bytes, cycles_per_byte, fixed_cycles }
    }

    /// Pure fixed cost, independent of payload.
    pub fn fixed(cycles: f64) -> Self {
        WorkSpec::new(0, 0.0, cycles)
    }

    pub fn cycles(&self) -> f64 {
        self.fixed_cycles + self.cycles_per_byte * self.bytes as f64
    }
}

pub fn round_half_up(x: f64) -> u64 {
    debug_assert!(x >= 0.0, "negative duration {x}");
    (x + 0.5).floor() as u64
}

pub fn cpu_service_exact(clock_hz: u64, work: &WorkSpec) -> f64 {
    assert!(clock_hz > 0, "clock_hz must be positive");
    work.cycles() * NS_PER_SEC / clock_hz as f64
}

pub fn cpu_service_ns(clock_hz: u64, work: &WorkSpec) -> u64 {
    round_half_up(cpu_service_exact(clock_hz, work))
}

pub fn accel_service_exact(spec: &AcceleratorSpec, bytes: u64) -> f64 {
    spec.startup_ns as f64 + bytes as f64 * NS_PER_SEC / spec.throughput_bps as f64
}

pub fn accel_service_ns(spec: &AcceleratorSpec, bytes: u64) -> u64 {
    round_half_up(accel_service_exact(spec, bytes))
}

/// `bw_bps` is in bits per second.
pub fn transfer_exact(bw_bps: u64, lat_ns: u64, bytes: u64) -> f64 {
    assert!(bw_bps > 0, "bandwidth must be positive");
    lat_ns as f64 + bytes as f64 * 8.0 * NS_PER_SEC / bw_bps as f64
}

pub fn transfer_ns(bw_bps: u64, lat_ns: u64, bytes: u64) -> u64 {
    round_half_up(transfer_exact(bw_bps, lat_ns, bytes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compute::KernelKind;

    fn accel(throughput_bps: u64, startup_ns: u64) -> AcceleratorSpec {
        AcceleratorSpec {
            kernel_kinds: [KernelKind::Encrypt].into_iter().collect(),
            throughput_bps,
            startup_ns,
            slots: 1,
        }
    }

    #[test]
    fn zero_work_is_free() {
        assert_eq!(cpu_service_ns(3_000_000_000, &WorkSpec::default()), 0);
    }

    #[test]
    fn storage_page_calibration_point() {
        // 18000 cycles per 8 KiB page on a 3 GHz core.
        let work = WorkSpec::new(8192, 18000.0 / 8192.0, 0.0);
        let per_page = cpu_service_ns(3_000_000_000, &work);
        assert_eq!(per_page, 6000);
        // 450k pages/s keeps 2.7 cores busy.
        assert_eq!(450_000 * per_page, 2_700_000_000);
    }

    #[test]
    fn doubling_clock_halves_time() {
        let work = WorkSpec::new(12345, 3.7, 911.0);
        let slow = cpu_service_exact(2_000_000_000, &work);
        let fast = cpu_service_exact(4_000_000_000, &work);
        assert!((slow - 2.0 * fast).abs() < 1e-9);
    }

    #[test]
    fn accelerator_latency_floor() {
        assert_eq!(accel_service_ns(&accel(1_000_000_000, 777), 0), 777);
    }

    #[test]
    fn accelerator_page_time() {
        assert_eq!(accel_service_ns(&accel(12_500_000_000, 0), 8192), 655);
    }

    #[test]
    fn page_over_100g() {
        assert_eq!(transfer_ns(100_000_000_000, 0, 8192), 655);
        assert_eq!(transfer_ns(100_000_000_000, 1234, 0), 1234);
    }

    #[test]
    fn transfer_doubles_with_bytes() {
        for bytes in [1000u64, 4096, 8192, 1 << 20] {
            let one = transfer_exact(100_000_000_000, 0, bytes);
            let two = transfer_exact(100_000_000_000, 0, 2 * bytes);
            assert_eq!(two, 2.0 * one);
        }
    }

    #[test]
    fn half_up_rounding() {
        assert_eq!(round_half_up(0.5), 1);
        assert_eq!(round_half_up(1.49), 1);
        assert_eq!(round_half_up(2.5), 3);
    }

    #[test]
    fn formulas_are_affine_in_bytes() {
        // Finite differences over sizes 0, 1 KiB, 2 KiB, ... 1 MiB (doubling).
        let mut sizes = vec![0u64];
        let mut s = 1024;
        while s <= 1 << 20 {
            sizes.push(s);
            s *= 2;
        }
        let work = |b| WorkSpec::new(b, 2.25, 1000.0);
        let base_cpu = cpu_service_exact(2_500_000_000, &work(0));
        let base_net = transfer_exact(25_000_000_000, 300, 0);
        for &b in &sizes[1..] {
            let slope_cpu = (cpu_service_exact(2_500_000_000, &work(b)) - base_cpu) / b as f64;
            let slope_net = (transfer_exact(25_000_000_000, 300, b) - base_net) / b as f64;
            assert!((slope_cpu - 2.25 / 2.5).abs() < 1e-9, "cpu slope at {b}");
            assert!((slope_net - 8.0 / 25.0).abs() < 1e-9, "net slope at {b}");
            // rounded forms stay within half a nanosecond of the exact line
            let r = cpu_service_ns(2_500_000_000, &work(b)) as f64;
            assert!((r - cpu_service_exact(2_500_000_000, &work(b))).abs() <= 0.5);
        }
    }
}
