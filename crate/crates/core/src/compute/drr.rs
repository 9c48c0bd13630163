use std::collections::{BTreeMap, VecDeque};

use crate::hwmodel::TenantId;

struct Flow<T> {
    weight: u64,
    deficit: u64,
    queue: VecDeque<(u64, T)>,
}

/// Deficit round robin over per-tenant FIFO queues. Each visit credits a
/// backlogged tenant `weight * quantum`; a tenant whose queue drains has its
/// deficit reset and leaves the rotation, so idle tenants accrue nothing.
pub struct Drr<T> {
    quantum: u64,
    flows: BTreeMap<TenantId, Flow<T>>,
    active: VecDeque<TenantId>,
    credited: bool,
    len: usize,
}

impl<T> Drr<T> {
    pub fn new(quantum: u64) -> Self {
        assert!(quantum > 0, "quantum must be positive");
        Drr { quantum, flows: BTreeMap::new(), active: VecDeque::new(), credited: false, len: 0 }
    }

    pub fn quantum(&self) -> u64 {
        self.quantum
    }

    /// Tenants default to weight 1.
    pub fn set_weight(&mut self, tenant: TenantId, weight: u64) {
        assert!(weight > 0, "weights must be positive");
        self.flow(tenant).weight = weight;
    }

    fn flow(&mut self, tenant: TenantId) -> &mut Flow<T> {
        self.flows.entry(tenant).or_insert_with(|| Flow { weight: 1, deficit: 0, queue: VecDeque::new() })
    }

    pub fn push(&mut self, tenant: TenantId, cost: u64, item: T) {
        let flow = self.flow(tenant);
        let was_idle = flow.queue.is_empty();
        flow.queue.push_back((cost, item));
        if was_idle {
            self.active.push_back(tenant);
        }
        self.len += 1;
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn deficit(&self, tenant: TenantId) -> u64 {
        self.flows.get(&tenant).map_or(0, |f| f.deficit)
    }

    /// Next task in DRR order, with its tenant and cost.
    pub fn pop(&mut self) -> Option<(TenantId, u64, T)> {
        loop {
            let tenant = *self.active.front()?;
            let quantum = self.quantum;
            let flow = self.flows.get_mut(&tenant).expect("active tenants have flows");
            if !self.credited {
                flow.deficit += flow.weight * quantum;
                self.credited = true;
            }
            let head_cost = flow.queue.front().expect("active tenants are backlogged").0;
            if head_cost <= flow.deficit {
                flow.deficit -= head_cost;
                let (cost, item) = flow.queue.pop_front().unwrap();
                if flow.queue.is_empty() {
                    flow.deficit = 0;
                    self.active.pop_front();
                    self.credited = false;
                }
                self.len -= 1;
                return Some((tenant, cost, item));
            }
            self.active.rotate_left(1);
            self.credited = false;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    const A: TenantId = TenantId(0);
    const B: TenantId = TenantId(1);

    #[test]
    fn single_tenant_is_fifo() {
        let mut d = Drr::new(10);
        for i in 0..20 {
            d.push(A, (i % 7) as u64 + 1, i);
        }
        let order: Vec<_> = std::iter::from_fn(|| d.pop()).map(|(_, _, i)| i).collect();
        assert_eq!(order, (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn idle_tenant_never_blocks() {
        let mut d = Drr::new(5);
        d.set_weight(B, 3);
        for i in 0..10 {
            d.push(A, 50, i);
        }
        let mut n = 0;
        while let Some((t, _, _)) = d.pop() {
            assert_eq!(t, A);
            n += 1;
        }
        assert_eq!(n, 10);
        assert_eq!(d.deficit(B), 0);
    }

    #[test]
    fn weight_ratio_equal_costs() {
        let mut d = Drr::new(100);
        d.set_weight(A, 2);
        for i in 0..2000 {
            d.push(A, 100, i);
            d.push(B, 100, i);
        }
        let mut sent = [0u64; 2];
        for _ in 0..1000 {
            let (t, c, _) = d.pop().unwrap();
            sent[t.0 as usize] += c;
        }
        let diff = (sent[0] as f64 / 2.0 - sent[1] as f64).abs();
        assert!(diff < 100.0, "a={} b={}", sent[0], sent[1]);
    }

    #[test]
    fn bound_at_visit_boundaries_random_costs() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for case in 0..50 {
            let quantum = rng.gen_range(1..200);
            let max_cost = rng.gen_range(1..500u64);
            let (wa, wb) = (rng.gen_range(1..5u64), rng.gen_range(1..5u64));
            let mut d = Drr::new(quantum);
            d.set_weight(A, wa);
            d.set_weight(B, wb);
            // enough backlog that neither tenant drains during the window
            for _ in 0..4000 {
                d.push(A, rng.gen_range(1..=max_cost), ());
                d.push(B, rng.gen_range(1..=max_cost), ());
            }
            let mut sent = [0u64; 2];
            let mut last = None;
            let mut checked = 0;
            for _ in 0..2000 {
                let (t, c, _) = d.pop().unwrap();
                assert!(d.deficit(t) < quantum * wa.max(wb) + max_cost);
                if last == Some(B) && t == A {
                    let gap = (sent[0] as f64 / wa as f64 - sent[1] as f64 / wb as f64).abs();
                    assert!(gap < max_cost as f64, "case {case}: gap {gap} max_cost {max_cost}");
                    checked += 1;
                }
                sent[t.0 as usize] += c;
                last = Some(t);
            }
            assert!(checked > 0);
        }
    }
}
