use std::collections::{BTreeMap, HashMap, HashSet};

/// LRU set of files whose mappings are held in DPU memory. Files marked
/// host-only are never admitted.
#[derive(Debug, Clone)]
pub struct Residency {
    budget: u64,
    used: u64,
    tick: u64,
    by_age: BTreeMap<u64, u64>,
    entries: HashMap<u64, (u64, u64)>,
    host_only: HashSet<u64>,
}

impl Residency {
    pub fn new(budget: u64) -> Self {
        Residency {
            budget,
            used: 0,
            tick: 0,
            by_age: BTreeMap::new(),
            entries: HashMap::new(),
            host_only: HashSet::new(),
        }
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn is_resident(&self, file_id: u64) -> bool {
        self.entries.contains_key(&file_id)
    }

    /// Makes the mapping resident, evicting least-recently-used entries as
    /// needed. Returns false when the file is host-only or larger than the
    /// whole budget.
    pub fn admit(&mut self, file_id: u64, cost: u64) -> bool {
        if self.host_only.contains(&file_id) || cost > self.budget {
            return false;
        }
        self.evict(file_id);
        while self.used + cost > self.budget {
            let (_, victim) = self.by_age.pop_first().expect("used > 0 implies entries");
            let (_, c) = self.entries.remove(&victim).unwrap();
            self.used -= c;
        }
        self.tick += 1;
        self.by_age.insert(self.tick, file_id);
        self.entries.insert(file_id, (self.tick, cost));
        self.used += cost;
        true
    }

    pub fn touch(&mut self, file_id: u64) {
        if let Some((age, _)) = self.entries.get_mut(&file_id) {
            self.by_age.remove(age);
            self.tick += 1;
            *age = self.tick;
            self.by_age.insert(self.tick, file_id);
        }
    }

    pub fn evict(&mut self, file_id: u64) {
        if let Some((age, cost)) = self.entries.remove(&file_id) {
            self.by_age.remove(&age);
            self.used -= cost;
        }
    }

    pub fn set_host_only(&mut self, file_id: u64, host_only: bool) {
        if host_only {
            self.host_only.insert(file_id);
            self.evict(file_id);
        } else {
            self.host_only.remove(&file_id);
        }
    }
}
