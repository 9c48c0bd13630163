use std::collections::HashMap;

use crate::error::StateError;

/// Key/value state in DPU memory shared by all engines on a node.
/// Last writer wins; there is no eviction.
#[derive(Debug, Clone, Default)]
pub struct SharedState {
    budget: u64,
    used: u64,
    map: HashMap<Vec<u8>, Vec<u8>>,
}

impl SharedState {
    pub fn new(budget: u64) -> Self {
        SharedState { budget, used: 0, map: HashMap::new() }
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    /// Sum of stored value sizes.
    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn put(&mut self, key: &[u8], value: Vec<u8>) -> Result<(), StateError> {
        if key.is_empty() {
            return Err(StateError::EmptyKey);
        }
        let old = self.map.get(key).map_or(0, |v| v.len() as u64);
        let after = self.used - old + value.len() as u64;
        if after > self.budget {
            return Err(StateError::OverBudget { needed: value.len() as u64, available: self.budget - (self.used - old) });
        }
        self.used = after;
        self.map.insert(key.to_vec(), value);
        Ok(())
    }

    pub fn get(&self, key: &[u8]) -> Option<&[u8]> {
        self.map.get(key).map(Vec::as_slice)
    }

    pub fn remove(&mut self, key: &[u8]) -> Option<Vec<u8>> {
        let v = self.map.remove(key)?;
        self.used -= v.len() as u64;
        Some(v)
    }
}
