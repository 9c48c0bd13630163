//! Virtual clock with a min-ordered pending-event queue.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::ClockError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventId(pub u64);

#[derive(Debug)]
pub struct Fired<E> {
    pub id: EventId,
    pub time_ns: u64,
    pub payload: E,
}

struct Entry<E> {
    time_ns: u64,
    seq: u64,
    payload: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.time_ns == other.time_ns && self.seq == other.seq
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Reversed so the std max-heap pops the earliest (time, seq) first.
impl<E> Ord for Entry<E> {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time_ns
            .cmp(&self.time_ns)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Discrete-event core. Ties fire in insertion order.
pub struct EventQueue<E> {
    now: u64,
    next_seq: u64,
    heap: BinaryHeap<Entry<E>>,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        EventQueue { now: 0, next_seq: 0, heap: BinaryHeap::new() }
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn peek_time(&self) -> Option<u64> {
        self.heap.peek().map(|e| e.time_ns)
    }

    pub fn schedule(&mut self, at: u64, payload: E) -> Result<EventId, ClockError> {
        if at < self.now {
            return Err(ClockError::InPast { at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry { time_ns: at, seq, payload });
        Ok(EventId(seq))
    }

    /// Pops the earliest event and moves the clock to its time.
    /// Returns `None` (clock unchanged) when nothing is pending.
    pub fn advance(&mut self) -> Option<Fired<E>> {
        let entry = self.heap.pop()?;
        debug_assert!(entry.time_ns >= self.now);
        self.now = entry.time_ns;
        Some(Fired { id: EventId(entry.seq), time_ns: entry.time_ns, payload: entry.payload })
    }

    /// Pops the earliest event only if it is due at or before `limit`.
    pub fn advance_until(&mut self, limit: u64) -> Option<Fired<E>> {
        match self.peek_time() {
            Some(t) if t <= limit => self.advance(),
            _ => None,
        }
    }

    /// Moves the clock forward without firing anything.
    pub fn skip_to(&mut self, t: u64) -> Result<(), ClockError> {
        if t < self.now {
            return Err(ClockError::InPast { at: t, now: self.now });
        }
        if let Some(next) = self.peek_time() {
            if next < t {
                return Err(ClockError::PendingBefore { at: t, pending: next });
            }
        }
        self.now = t;
        Ok(())
    }
}
