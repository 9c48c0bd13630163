use crate::hwmodel::ComputeUnitId;

/// One unit that could run a kernel, with the time it frees up and how long
/// the kernel would take there.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Candidate {
    pub unit: ComputeUnitId,
    pub available_at: u64,
    pub service_ns: u64,
}

impl Candidate {
    pub fn completion(&self, now: u64) -> u64 {
        now.max(self.available_at) + self.service_ns
    }
}

/// Earliest-completion-time choice. Ties go to the preferred class
/// (asic, then dpu cpu, then host cpu), then to the lowest index.
pub fn choose_ect(now: u64, candidates: &[Candidate]) -> Option<Candidate> {
    candidates
        .iter()
        .copied()
        .min_by_key(|c| (c.completion(now), c.unit.class.rank(), c.unit.index))
}
