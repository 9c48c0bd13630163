//! Hardware model: profiles, timing formulas, the virtual clock and ledgers.

mod clock;
mod cost;
mod defaults;
mod ledger;
mod node;
mod profile;

pub use clock::{EventId, EventQueue, Fired};
pub use cost::{
    accel_service_exact, accel_service_ns, cpu_service_exact, cpu_service_ns, round_half_up, transfer_exact,
    transfer_ns, WorkSpec,
};
pub use defaults::{CostDefaults, DpuCosts, HostCosts, KernelCost, SsdCosts, BUILTIN_DEFAULTS};
pub use ledger::{Ledger, Link, LinkCounters, TenantId, TenantShare, UtilizationReport};
pub use node::{Node, Span};
pub use profile::{
    builtin, builtin_names, builtin_source, load_profile, resolve_profile, AcceleratorSpec, ComputeUnitId,
    HardwareProfile, UnitClass,
};

/// Database page size used throughout (8 KiB).
pub const PAGE_SIZE: u64 = 8192;
