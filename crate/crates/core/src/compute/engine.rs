use std::sync::Arc;

use super::kernels::{KernelOp, KernelOutput};
use super::scheduler::{choose_ect, Candidate};
use super::KernelKind;
use crate::error::KernelError;
use crate::hwmodel::{accel_service_ns, ComputeUnitId, CostDefaults, Node, Span, TenantId, UnitClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    /// Run on this class or not at all. Only `DpuAsic` can be refused.
    Specified(UnitClass),
    /// Let the engine pick by earliest completion time.
    Scheduled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelCall {
    pub op: KernelOp,
    pub placement: Placement,
    pub tenant: TenantId,
}

impl KernelCall {
    pub fn new(op: KernelOp, placement: Placement) -> Self {
        KernelCall { op, placement, tenant: TenantId::default() }
    }

    pub fn tenant(mut self, tenant: TenantId) -> Self {
        self.tenant = tenant;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dispatch {
    pub unit: ComputeUnitId,
    pub span: Span,
    /// The kernel's result. Runtime errors (a corrupt stream, say) are still
    /// charged for the time the unit spent discovering them.
    pub output: Result<KernelOutput, KernelError>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Invocation {
    Dispatched(Dispatch),
    /// No accelerator slot free at the submission instant.
    Refused,
    /// Parameters failed validation; nothing was charged.
    Rejected(KernelError),
}

/// Stateless apart from cost constants; all unit occupancy lives in the
/// [`Node`] passed to each call.
#[derive(Debug, Clone)]
pub struct ComputeEngine {
    defaults: Arc<CostDefaults>,
}

impl ComputeEngine {
    pub fn new(defaults: Arc<CostDefaults>) -> Self {
        ComputeEngine { defaults }
    }

    pub fn defaults(&self) -> &CostDefaults {
        &self.defaults
    }

    pub fn service_ns(&self, node: &Node, unit: ComputeUnitId, kind: KernelKind, bytes: u64) -> u64 {
        match unit.class {
            UnitClass::DpuAsic => accel_service_ns(&node.profile().accelerators[unit.index as usize], bytes),
            class => node.cpu_time(class, &self.defaults.kernel_cost(kind).work(bytes)),
        }
    }

    /// Every unit able to run `kind`, as seen at `now`.
    pub fn candidates(&self, node: &Node, kind: KernelKind, bytes: u64) -> Vec<Candidate> {
        let p = node.profile();
        let accels = p.accelerators_for(kind).map(|i| ComputeUnitId::asic(i as u32));
        let dpus = (0..p.dpu_cores).map(ComputeUnitId::dpu);
        let hosts = (0..p.host_cores).map(ComputeUnitId::host);
        accels
            .chain(dpus)
            .chain(hosts)
            .map(|unit| Candidate {
                unit,
                available_at: node.available_at(unit),
                service_ns: self.service_ns(node, unit, kind, bytes),
            })
            .collect()
    }

    /// ECT placement; never refuses.
    pub fn schedule_kernel(
        &self,
        node: &mut Node,
        now: u64,
        kind: KernelKind,
        bytes: u64,
        tenant: Option<TenantId>,
    ) -> (ComputeUnitId, Span) {
        let best = choose_ect(now, &self.candidates(node, kind, bytes)).expect("cpu classes always exist");
        (best.unit, node.reserve(best.unit, now, best.service_ns, tenant))
    }

    /// Reserves a unit for `bytes` of `kind` under `placement`, or `None`
    /// when a specified accelerator has no free slot right now.
    pub fn place(
        &self,
        node: &mut Node,
        now: u64,
        kind: KernelKind,
        bytes: u64,
        placement: Placement,
        tenant: Option<TenantId>,
    ) -> Option<(ComputeUnitId, Span)> {
        match placement {
            Placement::Scheduled => Some(self.schedule_kernel(node, now, kind, bytes, tenant)),
            Placement::Specified(UnitClass::DpuAsic) => {
                let free: Vec<_> = node
                    .profile()
                    .accelerators_for(kind)
                    .filter(|&i| node.accel_slot_free(i, now))
                    .map(|i| ComputeUnitId::asic(i as u32))
                    .collect();
                let unit = free.into_iter().min_by_key(|u| (self.service_ns(node, *u, kind, bytes), u.index))?;
                let dur = self.service_ns(node, unit, kind, bytes);
                Some((unit, node.reserve(unit, now, dur, tenant)))
            }
            Placement::Specified(class) => {
                let unit = node.earliest_cpu(class);
                let dur = self.service_ns(node, unit, kind, bytes);
                Some((unit, node.reserve(unit, now, dur, tenant)))
            }
        }
    }

    pub fn invoke(&self, node: &mut Node, now: u64, call: &KernelCall) -> Invocation {
        if let Err(e) = call.op.validate() {
            return Invocation::Rejected(e);
        }
        let kind = call.op.kind();
        match self.place(node, now, kind, call.op.cost_bytes(), call.placement, Some(call.tenant)) {
            None => Invocation::Refused,
            Some((unit, span)) => Invocation::Dispatched(Dispatch { unit, span, output: call.op.execute() }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compute::kernels::deflate;
    use crate::hwmodel::builtin;

    fn engine() -> ComputeEngine {
        ComputeEngine::new(Arc::new(CostDefaults::builtin()))
    }

    fn node(name: &str) -> Node {
        Node::new(Arc::new(builtin(name).unwrap()))
    }

    fn dispatched(inv: Invocation) -> Dispatch {
        match inv {
            Invocation::Dispatched(d) => d,
            other => panic!("expected dispatch, got {other:?}"),
        }
    }

    #[test]
    fn missing_accelerator_refuses() {
        let mut n = node("bf3");
        let call = KernelCall::new(
            KernelOp::RegexMatch { data: b"abc".to_vec(), pattern: "b".into() },
            Placement::Specified(UnitClass::DpuAsic),
        );
        assert_eq!(engine().invoke(&mut n, 0, &call), Invocation::Refused);
        assert_eq!(n.ledger, Node::new(n.profile_arc()).ledger);
    }

    #[test]
    fn full_slots_refuse_then_free_up() {
        let e = engine();
        let mut n = node("bf2");
        let call = KernelCall::new(KernelOp::Compress(vec![0; 4096]), Placement::Specified(UnitClass::DpuAsic));
        for _ in 0..4 {
            dispatched(e.invoke(&mut n, 0, &call));
        }
        assert_eq!(e.invoke(&mut n, 0, &call), Invocation::Refused);
        let later = n.available_at(ComputeUnitId::asic(1));
        assert_eq!(dispatched(e.invoke(&mut n, later, &call)).span.start, later);
    }

    #[test]
    fn asic_order_of_magnitude_faster() {
        let e = engine();
        let data = vec![7u8; 1 << 20];
        let asic = dispatched(e.invoke(
            &mut node("bf2"),
            0,
            &KernelCall::new(KernelOp::Compress(data.clone()), Placement::Specified(UnitClass::DpuAsic)),
        ));
        let cpu = dispatched(e.invoke(
            &mut node("bf2"),
            0,
            &KernelCall::new(KernelOp::Compress(data.clone()), Placement::Specified(UnitClass::DpuCpu)),
        ));
        assert_eq!(asic.unit.class, UnitClass::DpuAsic);
        assert_eq!(cpu.unit.class, UnitClass::DpuCpu);
        assert!(asic.span.finish * 10 <= cpu.span.finish, "{} vs {}", asic.span.finish, cpu.span.finish);
        assert_eq!(asic.output, cpu.output);
        assert_eq!(deflate::decompress(&asic.output.unwrap().into_bytes().unwrap()).unwrap(), data);
    }

    #[test]
    fn scheduled_idle_prefers_accelerator() {
        let d = dispatched(engine().invoke(
            &mut node("bf2"),
            0,
            &KernelCall::new(KernelOp::Encrypt { data: vec![1; 8192], key: vec![2; 32] }, Placement::Scheduled),
        ));
        assert_eq!(d.unit, ComputeUnitId::asic(2));
    }

    #[test]
    fn fallback_without_compression_accelerator() {
        let p = builtin("bf2").unwrap().without_accelerator_for(KernelKind::Compress);
        let mut n = Node::new(Arc::new(p));
        let e = engine();
        let call = KernelCall::new(KernelOp::Compress(vec![3; 1000]), Placement::Specified(UnitClass::DpuAsic));
        assert_eq!(e.invoke(&mut n, 0, &call), Invocation::Refused);
        let d = dispatched(e.invoke(&mut n, 0, &KernelCall { placement: Placement::Scheduled, ..call }));
        assert_ne!(d.unit.class, UnitClass::DpuAsic);
    }

    #[test]
    fn validation_errors_charge_nothing() {
        let mut n = node("bf2");
        let inv = engine().invoke(
            &mut n,
            0,
            &KernelCall::new(KernelOp::Encrypt { data: vec![1], key: vec![0; 5] }, Placement::Scheduled),
        );
        assert_eq!(inv, Invocation::Rejected(KernelError::KeyLength(5)));
        assert!(n.ledger.units().next().is_none());
    }

    #[test]
    fn corrupt_stream_fails_but_is_charged() {
        let mut n = node("bf2");
        let d = dispatched(engine().invoke(
            &mut n,
            0,
            &KernelCall::new(KernelOp::Decompress(vec![0xff; 64]), Placement::Specified(UnitClass::DpuCpu)),
        ));
        assert!(matches!(d.output, Err(KernelError::CorruptStream(_))));
        assert!(n.ledger.class_busy_ns(UnitClass::DpuCpu) > 0);
    }

    #[test]
    fn host_placement_charges_host_only() {
        let mut n = node("bf2");
        let d = dispatched(engine().invoke(
            &mut n,
            0,
            &KernelCall::new(KernelOp::Compress(vec![1; 10]), Placement::Specified(UnitClass::HostCpu)).tenant(TenantId(4)),
        ));
        assert_eq!(d.unit, ComputeUnitId::host(0));
        assert_eq!(n.ledger.class_busy_ns(UnitClass::HostCpu), d.span.len());
        assert_eq!(n.ledger.tenant_busy_ns(TenantId(4)), d.span.len());
    }

    #[test]
    fn ect_dominance_by_enumeration() {
        use crate::testing::ect_oracle;
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xec7);
        let e = engine();
        for case in 0..1000 {
            let name = ["bf2", "bf3", "cpu-only"][case % 3];
            let mut n = node(name);
            let p = n.profile_arc();
            for _ in 0..rng.gen_range(0..40) {
                let class = UnitClass::PREFERENCE[rng.gen_range(0..3)];
                let count = p.unit_count(class);
                if count > 0 {
                    let unit = ComputeUnitId::new(class, rng.gen_range(0..count));
                    n.reserve(unit, rng.gen_range(0..50_000), rng.gen_range(0..200_000), None);
                }
            }
            let kind = KernelKind::ALL[rng.gen_range(0..KernelKind::ALL.len())];
            let bytes = if rng.gen_bool(0.2) { 0 } else { rng.gen_range(1..(1 << 20)) };
            let now = rng.gen_range(0..100_000);
            let alts = ect_oracle::alternatives(&p, e.defaults(), |u| n.available_at(u), now, kind, bytes);
            let want = ect_oracle::expected(&alts);
            let (unit, span) = e.schedule_kernel(&mut n, now, kind, bytes, None);
            assert_eq!((unit, span.finish), (want.unit, want.completion), "case {case}");
            assert!(alts.iter().all(|a| span.finish <= a.completion));
        }
    }
}
