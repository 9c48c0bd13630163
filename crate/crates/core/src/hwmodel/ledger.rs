//! Resource accounting. Every engine charges here; every report derives from here.

use std::collections::BTreeMap;
use std::io::Write;

use super::profile::{ComputeUnitId, UnitClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct TenantId(pub u8);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Link {
    Nic,
    Pcie,
    Dma,
}

impl Link {
    pub const ALL: [Link; 3] = [Link::Nic, Link::Pcie, Link::Dma];

    pub fn as_str(self) -> &'static str {
        match self {
            Link::Nic => "nic",
            Link::Pcie => "pcie",
            Link::Dma => "dma",
        }
    }

    fn slot(self) -> usize {
        match self {
            Link::Nic => 0,
            Link::Pcie => 1,
            Link::Dma => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LinkCounters {
    pub bytes: u64,
    pub transfers: u64,
}

/// Monotone counters. Nothing here ever decreases.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ledger {
    busy: BTreeMap<ComputeUnitId, u64>,
    links: [LinkCounters; 3],
    copies: u64,
    tenant_busy: BTreeMap<TenantId, u64>,
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn charge_busy(&mut self, unit: ComputeUnitId, ns: u64, tenant: Option<TenantId>) {
        *self.busy.entry(unit).or_default() += ns;
        if let Some(t) = tenant {
            *self.tenant_busy.entry(t).or_default() += ns;
        }
    }

    pub fn charge_link(&mut self, link: Link, bytes: u64) {
        let c = &mut self.links[link.slot()];
        c.bytes += bytes;
        c.transfers += 1;
    }

    pub fn charge_copy(&mut self, n: u64) {
        self.copies += n;
    }

    pub fn busy_ns(&self, unit: ComputeUnitId) -> u64 {
        self.busy.get(&unit).copied().unwrap_or(0)
    }

    pub fn class_busy_ns(&self, class: UnitClass) -> u64 {
        self.busy.iter().filter(|(u, _)| u.class == class).map(|(_, ns)| ns).sum()
    }

    pub fn link(&self, link: Link) -> LinkCounters {
        self.links[link.slot()]
    }

    pub fn copy_count(&self) -> u64 {
        self.copies
    }

    pub fn tenant_busy_ns(&self, tenant: TenantId) -> u64 {
        self.tenant_busy.get(&tenant).copied().unwrap_or(0)
    }

    pub fn units(&self) -> impl Iterator<Item = (ComputeUnitId, u64)> + '_ {
        self.busy.iter().map(|(u, ns)| (*u, *ns))
    }

    pub fn report(&self, horizon_ns: u64) -> UtilizationReport {
        assert!(horizon_ns > 0, "report horizon must be positive");
        let class_busy = UnitClass::PREFERENCE.map(|c| (c, self.class_busy_ns(c)));
        let tenant_total: u64 = self.tenant_busy.values().sum();
        let tenants = self
            .tenant_busy
            .iter()
            .map(|(t, ns)| TenantShare {
                tenant: *t,
                busy_ns: *ns,
                share: if tenant_total == 0 { 0.0 } else { *ns as f64 / tenant_total as f64 },
            })
            .collect();
        UtilizationReport {
            horizon_ns,
            class_busy,
            links: Link::ALL.map(|l| (l, self.link(l))),
            copy_count: self.copies,
            tenants,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TenantShare {
    pub tenant: TenantId,
    pub busy_ns: u64,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtilizationReport {
    pub horizon_ns: u64,
    pub class_busy: [(UnitClass, u64); 3],
    pub links: [(Link, LinkCounters); 3],
    pub copy_count: u64,
    pub tenants: Vec<TenantShare>,
}

impl UtilizationReport {
    pub fn busy_ns(&self, class: UnitClass) -> u64 {
        self.class_busy.iter().find(|(c, _)| *c == class).map(|(_, ns)| *ns).unwrap_or(0)
    }

    /// Busy time over the horizon, in units of fully occupied cores.
    pub fn core_equivalents(&self, class: UnitClass) -> f64 {
        self.busy_ns(class) as f64 / self.horizon_ns as f64
    }

    pub fn link(&self, link: Link) -> LinkCounters {
        self.links.iter().find(|(l, _)| *l == link).map(|(_, c)| *c).unwrap_or_default()
    }

    /// Columns: `metric,key,value`. One row per class, link, and tenant.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["metric", "key", "value"])?;
        w.write_record(["horizon_ns", "", &self.horizon_ns.to_string()])?;
        for (class, ns) in self.class_busy {
            w.write_record(["busy_ns", class.as_str(), &ns.to_string()])?;
            w.write_record(["core_equivalents", class.as_str(), &format!("{:.6}", self.core_equivalents(class))])?;
        }
        for (link, c) in self.links {
            w.write_record(["link_bytes", link.as_str(), &c.bytes.to_string()])?;
            w.write_record(["link_transfers", link.as_str(), &c.transfers.to_string()])?;
        }
        w.write_record(["copy_count", "", &self.copy_count.to_string()])?;
        for t in &self.tenants {
            w.write_record(["tenant_busy_ns", &t.tenant.0.to_string(), &t.busy_ns.to_string()])?;
            w.write_record(["tenant_share", &t.tenant.0.to_string(), &format!("{:.6}", t.share)])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_ledger_reports_zero() {
        let r = Ledger::new().report(1000);
        for c in UnitClass::PREFERENCE {
            assert_eq!(r.core_equivalents(c), 0.0);
        }
        assert_eq!(r.link(Link::Pcie), LinkCounters::default());
        assert_eq!(r.copy_count, 0);
        assert!(r.tenants.is_empty());
    }

    #[test]
    fn one_core_for_whole_horizon() {
        let mut l = Ledger::new();
        l.charge_busy(ComputeUnitId::host(3), 5000, None);
        assert_eq!(l.report(5000).core_equivalents(UnitClass::HostCpu), 1.0);
    }

    #[test]
    fn conservation_over_random_charges() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut l = Ledger::new();
        let mut expect = [0u64; 3];
        for _ in 0..10_000 {
            let class = UnitClass::PREFERENCE[rng.gen_range(0..3)];
            let ns = rng.gen_range(0..100_000u64);
            l.charge_busy(ComputeUnitId::new(class, rng.gen_range(0..4)), ns, Some(TenantId(rng.gen_range(0..3))));
            expect[class.rank() as usize] += ns;
        }
        let horizon = 7_777_777;
        let r = l.report(horizon);
        for class in UnitClass::PREFERENCE {
            assert_eq!(r.busy_ns(class), expect[class.rank() as usize]);
            let back = r.core_equivalents(class) * horizon as f64;
            assert!((back - expect[class.rank() as usize] as f64).abs() < 1e-3);
        }
        let tenant_sum: u64 = r.tenants.iter().map(|t| t.busy_ns).sum();
        assert_eq!(tenant_sum, expect.iter().sum::<u64>());
    }

    #[test]
    fn csv_has_header() {
        let mut l = Ledger::new();
        l.charge_link(Link::Nic, 100);
        let mut buf = Vec::new();
        l.report(10).write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("metric,key,value\n"));
        assert!(text.contains("link_bytes,nic,100"));
    }
}
