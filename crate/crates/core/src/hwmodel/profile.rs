//! Hardware profiles: what a host+DPU server looks like to the cost model.
//!
//! Profiles are TOML documents with a fixed set of keys. Unknown keys are
//! rejected so that a typo never silently falls back to a default.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::compute::KernelKind;
use crate::error::ProfileError;

/// The three classes of compute unit a kernel can be placed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitClass {
    DpuAsic,
    DpuCpu,
    HostCpu,
}

impl UnitClass {
    /// Scheduling tie-break order: accelerators first, host last.
    pub const PREFERENCE: [UnitClass; 3] = [UnitClass::DpuAsic, UnitClass::DpuCpu, UnitClass::HostCpu];

    pub fn as_str(self) -> &'static str {
        match self {
            UnitClass::DpuAsic => "dpu_asic",
            UnitClass::DpuCpu => "dpu_cpu",
            UnitClass::HostCpu => "host_cpu",
        }
    }

    pub(crate) fn rank(self) -> u8 {
        match self {
            UnitClass::DpuAsic => 0,
            UnitClass::DpuCpu => 1,
            UnitClass::HostCpu => 2,
        }
    }
}

impl fmt::Display for UnitClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for UnitClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dpu_asic" => Ok(UnitClass::DpuAsic),
            "dpu_cpu" => Ok(UnitClass::DpuCpu),
            "host_cpu" => Ok(UnitClass::HostCpu),
            other => Err(format!("unknown unit class `{other}`")),
        }
    }
}

/// A concrete compute unit: a host core, a DPU core, or one accelerator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ComputeUnitId {
    pub class: UnitClass,
    pub index: u32,
}

impl ComputeUnitId {
    pub const fn new(class: UnitClass, index: u32) -> Self {
        ComputeUnitId { class, index }
    }

    pub const fn host(index: u32) -> Self {
        Self::new(UnitClass::HostCpu, index)
    }

    pub const fn dpu(index: u32) -> Self {
        Self::new(UnitClass::DpuCpu, index)
    }

    pub const fn asic(index: u32) -> Self {
        Self::new(UnitClass::DpuAsic, index)
    }
}

impl fmt::Display for ComputeUnitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.class, self.index)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcceleratorSpec {
    pub kernel_kinds: BTreeSet<KernelKind>,
    pub throughput_bps: u64,
    pub startup_ns: u64,
    pub slots: u32,
}

impl AcceleratorSpec {
    pub fn supports(&self, kind: KernelKind) -> bool {
        self.kernel_kinds.contains(&kind)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HardwareProfile {
    pub name: String,
    pub host_cores: u32,
    pub host_clock_hz: u64,
    pub dpu_cores: u32,
    pub dpu_clock_hz: u64,
    pub dpu_mem_bytes: u64,
    pub accelerators: Vec<AcceleratorSpec>,
    pub nic_bw_bps: u64,
    pub nic_lat_ns: u64,
    pub pcie_bw_bps: u64,
    pub pcie_lat_ns: u64,
    pub dma_poll_ns: u64,
}

impl HardwareProfile {
    /// Number of units of a class present in this profile.
    pub fn unit_count(&self, class: UnitClass) -> u32 {
        match class {
            UnitClass::HostCpu => self.host_cores,
            UnitClass::DpuCpu => self.dpu_cores,
            UnitClass::DpuAsic => self.accelerators.len() as u32,
        }
    }

    /// Builds a unit id, rejecting indices past the profile's count.
    pub fn unit(&self, class: UnitClass, index: u32) -> Result<ComputeUnitId, ProfileError> {
        let count = self.unit_count(class);
        if index >= count {
            return Err(ProfileError::UnitIndex { class, index, count });
        }
        Ok(ComputeUnitId::new(class, index))
    }

    pub fn clock_hz(&self, class: UnitClass) -> Option<u64> {
        match class {
            UnitClass::HostCpu => Some(self.host_clock_hz),
            UnitClass::DpuCpu => Some(self.dpu_clock_hz),
            UnitClass::DpuAsic => None,
        }
    }

    /// Accelerator indices that can run `kind`, in profile order.
    pub fn accelerators_for(&self, kind: KernelKind) -> impl Iterator<Item = usize> + '_ {
        self.accelerators
            .iter()
            .enumerate()
            .filter(move |(_, a)| a.supports(kind))
            .map(|(i, _)| i)
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        let positive = [
            ("host.cores", self.host_cores as u64),
            ("host.clock_hz", self.host_clock_hz),
            ("dpu.cores", self.dpu_cores as u64),
            ("dpu.clock_hz", self.dpu_clock_hz),
            ("dpu.mem_bytes", self.dpu_mem_bytes),
            ("nic.bw_bps", self.nic_bw_bps),
            ("pcie.bw_bps", self.pcie_bw_bps),
        ];
        for (key, value) in positive {
            if value == 0 {
                return Err(ProfileError::Invalid(format!("{key} must be > 0")));
            }
        }
        if self.name.trim().is_empty() {
            return Err(ProfileError::Invalid("name must be nonempty".into()));
        }
        for (i, acc) in self.accelerators.iter().enumerate() {
            if acc.kernel_kinds.is_empty() {
                return Err(ProfileError::Invalid(format!("accelerator[{i}].kinds is empty")));
            }
            if acc.throughput_bps == 0 {
                return Err(ProfileError::Invalid(format!("accelerator[{i}].throughput_Bps must be > 0")));
            }
            if acc.slots == 0 {
                return Err(ProfileError::Invalid(format!("accelerator[{i}].slots must be >= 1")));
            }
        }
        Ok(())
    }

    /// Same profile without any accelerator that supports `kind`.
    pub fn without_accelerator_for(&self, kind: KernelKind) -> HardwareProfile {
        let mut p = self.clone();
        p.accelerators.retain(|a| !a.supports(kind));
        p
    }

    pub fn to_toml(&self) -> String {
        let file = ProfileFile::from(self);
        toml::to_string(&file).expect("profile serializes")
    }
}

// On-disk layout. Field names are the documented keys.

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    name: String,
    host: CpuSection,
    dpu: DpuSection,
    nic: LinkSection,
    pcie: LinkSection,
    dma: DmaSection,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    accelerator: Vec<AcceleratorSection>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CpuSection {
    cores: u32,
    clock_hz: u64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DpuSection {
    cores: u32,
    clock_hz: u64,
    mem_bytes: u64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkSection {
    bw_bps: u64,
    lat_ns: u64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DmaSection {
    poll_ns: u64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AcceleratorSection {
    kinds: Vec<KernelKind>,
    #[serde(rename = "throughput_Bps")]
    throughput_bps: u64,
    startup_ns: u64,
    slots: u32,
}

impl From<&HardwareProfile> for ProfileFile {
    fn from(p: &HardwareProfile) -> Self {
        ProfileFile {
            name: p.name.clone(),
            host: CpuSection { cores: p.host_cores, clock_hz: p.host_clock_hz },
            dpu: DpuSection { cores: p.dpu_cores, clock_hz: p.dpu_clock_hz, mem_bytes: p.dpu_mem_bytes },
            nic: LinkSection { bw_bps: p.nic_bw_bps, lat_ns: p.nic_lat_ns },
            pcie: LinkSection { bw_bps: p.pcie_bw_bps, lat_ns: p.pcie_lat_ns },
            dma: DmaSection { poll_ns: p.dma_poll_ns },
            accelerator: p
                .accelerators
                .iter()
                .map(|a| AcceleratorSection {
                    kinds: a.kernel_kinds.iter().copied().collect(),
                    throughput_bps: a.throughput_bps,
                    startup_ns: a.startup_ns,
                    slots: a.slots,
                })
                .collect(),
        }
    }
}

impl From<ProfileFile> for HardwareProfile {
    fn from(f: ProfileFile) -> Self {
        HardwareProfile {
            name: f.name,
            host_cores: f.host.cores,
            host_clock_hz: f.host.clock_hz,
            dpu_cores: f.dpu.cores,
            dpu_clock_hz: f.dpu.clock_hz,
            dpu_mem_bytes: f.dpu.mem_bytes,
            accelerators: f
                .accelerator
                .into_iter()
                .map(|a| AcceleratorSpec {
                    kernel_kinds: a.kinds.into_iter().collect(),
                    throughput_bps: a.throughput_bps,
                    startup_ns: a.startup_ns,
                    slots: a.slots,
                })
                .collect(),
            nic_bw_bps: f.nic.bw_bps,
            nic_lat_ns: f.nic.lat_ns,
            pcie_bw_bps: f.pcie.bw_bps,
            pcie_lat_ns: f.pcie.lat_ns,
            dma_poll_ns: f.dma.poll_ns,
        }
    }
}

/// Parses and validates profile text.
pub fn load_profile(source: &str) -> Result<HardwareProfile, ProfileError> {
    let file: ProfileFile = toml::from_str(source).map_err(|e| ProfileError::Parse(e.to_string()))?;
    let profile = HardwareProfile::from(file);
    profile.validate()?;
    Ok(profile)
}

const BUILTIN: &[(&str, &str)] = &[
    ("bf2", include_str!("../../profiles/bf2.toml")),
    ("bf3", include_str!("../../profiles/bf3.toml")),
    ("cpu-only", include_str!("../../profiles/cpu-only.toml")),
];

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    BUILTIN.iter().map(|(n, _)| *n)
}

pub fn builtin_source(name: &str) -> Option<&'static str> {
    BUILTIN.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn builtin(name: &str) -> Result<HardwareProfile, ProfileError> {
    let src = builtin_source(name).ok_or_else(|| ProfileError::UnknownProfile(name.to_string()))?;
    load_profile(src)
}

/// A built-in profile name, or else a path to a profile file.
pub fn resolve_profile(name_or_path: &str) -> Result<HardwareProfile, ProfileError> {
    if let Some(src) = builtin_source(name_or_path) {
        return load_profile(src);
    }
    let path = Path::new(name_or_path);
    if path.exists() {
        let text = std::fs::read_to_string(path).map_err(|e| ProfileError::Io(e.to_string()))?;
        return load_profile(&text);
    }
    Err(ProfileError::UnknownProfile(name_or_path.to_string()))
}
