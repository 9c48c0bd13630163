//! Versioned cost constants: per-kernel CPU costs, host and DPU software
//! path costs, and the emulated SSD. Same TOML dialect as profiles.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::cost::WorkSpec;
use super::PAGE_SIZE;
use crate::compute::KernelKind;
use crate::error::ProfileError;

pub const BUILTIN_DEFAULTS: &str = include_str!("../../defaults/v1.toml");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelCost {
    pub cycles_per_byte: f64,
    pub fixed_cycles: f64,
}

impl KernelCost {
    pub fn work(&self, bytes: u64) -> WorkSpec {
        WorkSpec::new(bytes, self.cycles_per_byte, self.fixed_cycles)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HostCosts {
    /// Library cost of pushing one descriptor onto a submission ring.
    pub ring_enqueue_cycles: f64,
    /// Library cost of reaping one completion.
    pub completion_poll_cycles: f64,
    /// Kernel storage stack cost per 8 KiB page (calibrated).
    pub io_cycles_per_page: f64,
    pub stack_cycles_per_byte: f64,
    pub stack_fixed_cycles: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpuCosts {
    pub stack_cycles_per_byte: f64,
    pub stack_fixed_cycles: f64,
    pub file_service_cycles: f64,
    pub director_cycles: f64,
    pub rdma_issue_cycles: f64,
    pub sproc_dispatch_cycles: f64,
    pub poll_batch: u32,
    pub ring_capacity: u32,
    pub rdma_send_queue: u32,
    pub mem_reserve_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SsdCosts {
    pub capacity_bytes: u64,
    pub lanes: u32,
    #[serde(rename = "read_bw_Bps")]
    pub read_bw_bps: u64,
    #[serde(rename = "write_bw_Bps")]
    pub write_bw_bps: u64,
    pub read_lat_ns: u64,
    pub write_lat_ns: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DefaultsFile {
    version: u32,
    kernel: BTreeMap<KernelKind, KernelCost>,
    host: HostCosts,
    dpu: DpuCosts,
    ssd: SsdCosts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostDefaults {
    pub version: u32,
    pub kernel: BTreeMap<KernelKind, KernelCost>,
    pub host: HostCosts,
    pub dpu: DpuCosts,
    pub ssd: SsdCosts,
    hash: String,
}

impl CostDefaults {
    pub fn builtin() -> Self {
        Self::load(BUILTIN_DEFAULTS).expect("built-in defaults are valid")
    }

    pub fn load(source: &str) -> Result<Self, ProfileError> {
        let file: DefaultsFile = toml::from_str(source).map_err(|e| ProfileError::Parse(e.to_string()))?;
        for kind in KernelKind::ALL {
            let cost = file
                .kernel
                .get(&kind)
                .ok_or_else(|| ProfileError::Invalid(format!("kernel.{kind} missing")))?;
            if !(cost.cycles_per_byte >= 0.0 && cost.fixed_cycles >= 0.0) {
                return Err(ProfileError::Invalid(format!("kernel.{kind} costs must be >= 0")));
            }
        }
        if file.dpu.poll_batch == 0 || file.dpu.ring_capacity == 0 || file.ssd.lanes == 0 {
            return Err(ProfileError::Invalid("poll_batch, ring_capacity and ssd.lanes must be >= 1".into()));
        }
        if !file.dpu.ring_capacity.is_power_of_two() {
            return Err(ProfileError::Invalid("dpu.ring_capacity must be a power of two".into()));
        }
        if file.ssd.read_bw_bps == 0 || file.ssd.write_bw_bps == 0 {
            return Err(ProfileError::Invalid("ssd bandwidth must be > 0".into()));
        }
        let hash = hex::encode(Sha256::digest(source.as_bytes()));
        Ok(CostDefaults {
            version: file.version,
            kernel: file.kernel,
            host: file.host,
            dpu: file.dpu,
            ssd: file.ssd,
            hash,
        })
    }

    /// SHA-256 of the source text this was loaded from.
    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn kernel_cost(&self, kind: KernelKind) -> KernelCost {
        self.kernel[&kind]
    }

    /// Host kernel-stack cost of moving `bytes` of storage I/O.
    pub fn host_io_work(&self, bytes: u64) -> WorkSpec {
        WorkSpec::new(bytes, self.host.io_cycles_per_page / PAGE_SIZE as f64, 0.0)
    }

    pub fn to_toml(&self) -> String {
        let file = DefaultsFile {
            version: self.version,
            kernel: self.kernel.clone(),
            host: self.host.clone(),
            dpu: self.dpu.clone(),
            ssd: self.ssd.clone(),
        };
        toml::to_string(&file).expect("defaults serialize")
    }

    /// Returns a copy with a new host storage calibration, re-hashed over
    /// its serialized form.
    pub fn with_io_cycles_per_page(&self, cycles: f64) -> Self {
        let mut next = self.clone();
        next.host.io_cycles_per_page = cycles;
        Self::load(&next.to_toml()).expect("calibrated defaults are valid")
    }
}

impl Default for CostDefaults {
    fn default() -> Self {
        Self::builtin()
    }
}
