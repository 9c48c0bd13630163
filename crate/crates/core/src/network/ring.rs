//! Bounded single-producer/single-consumer ring. `head` counts pushes and is
//! written only by the producer; `tail` counts pops and is written only by
//! the consumer.

use std::cell::UnsafeCell;
use std::fmt;
use std::mem::MaybeUninit;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

struct Shared<T> {
    slots: Box<[UnsafeCell<MaybeUninit<T>>]>,
    mask: u64,
    head: AtomicU64,
    tail: AtomicU64,
}

// Slot access is partitioned by the head/tail protocol: a slot is written by
// the producer only while outside [tail, head) and read by the consumer only
// while inside it.
unsafe impl<T: Send> Sync for Shared<T> {}
unsafe impl<T: Send> Send for Shared<T> {}

impl<T> Drop for Shared<T> {
    fn drop(&mut self) {
        let head = *self.head.get_mut();
        let mut tail = *self.tail.get_mut();
        while tail != head {
            unsafe { self.slots[(tail & self.mask) as usize].get_mut().assume_init_drop() };
            tail += 1;
        }
    }
}

pub struct Producer<T> {
    ring: Arc<Shared<T>>,
    head: u64,
    cached_tail: u64,
}

pub struct Consumer<T> {
    ring: Arc<Shared<T>>,
    tail: u64,
    cached_head: u64,
}

/// Returned by [`Producer::push`] when the ring is full; gives the value back.
#[derive(PartialEq, Eq)]
pub struct Full<T>(pub T);

impl<T> fmt::Debug for Full<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Full(..)")
    }
}

/// Creates a ring holding up to `capacity` items. Panics unless `capacity`
/// is a nonzero power of two.
pub fn ring<T: Send>(capacity: usize) -> (Producer<T>, Consumer<T>) {
    assert!(capacity.is_power_of_two(), "ring capacity must be a power of two");
    let slots = (0..capacity).map(|_| UnsafeCell::new(MaybeUninit::uninit())).collect();
    let shared = Arc::new(Shared {
        slots,
        mask: capacity as u64 - 1,
        head: AtomicU64::new(0),
        tail: AtomicU64::new(0),
    });
    (
        Producer { ring: shared.clone(), head: 0, cached_tail: 0 },
        Consumer { ring: shared, tail: 0, cached_head: 0 },
    )
}

impl<T> Producer<T> {
    pub fn capacity(&self) -> usize {
        self.ring.slots.len()
    }

    pub fn len(&self) -> usize {
        (self.head - self.ring.tail.load(Ordering::Acquire)) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_full(&self) -> bool {
        self.len() == self.capacity()
    }

    pub fn push(&mut self, value: T) -> Result<(), Full<T>> {
        let cap = self.ring.slots.len() as u64;
        if self.head - self.cached_tail == cap {
            self.cached_tail = self.ring.tail.load(Ordering::Acquire);
            if self.head - self.cached_tail == cap {
                return Err(Full(value));
            }
        }
        let slot = &self.ring.slots[(self.head & self.ring.mask) as usize];
        unsafe { (*slot.get()).write(value) };
        self.head += 1;
        self.ring.head.store(self.head, Ordering::Release);
        Ok(())
    }
}

impl<T> Consumer<T> {
    pub fn capacity(&self) -> usize {
        self.ring.slots.len()
    }

    pub fn len(&self) -> usize {
        (self.ring.head.load(Ordering::Acquire) - self.tail) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pop(&mut self) -> Option<T> {
        if self.tail == self.cached_head {
            self.cached_head = self.ring.head.load(Ordering::Acquire);
            if self.tail == self.cached_head {
                return None;
            }
        }
        let slot = &self.ring.slots[(self.tail & self.ring.mask) as usize];
        let value = unsafe { (*slot.get()).assume_init_read() };
        self.tail += 1;
        self.ring.tail.store(self.tail, Ordering::Release);
        Some(value)
    }
}

/// Fixed 64-byte ring entry. Request bodies stay in a per-node arena; the
/// descriptor carries only the completion token and the arena slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(C, align(64))]
pub struct Descriptor {
    pub token: u64,
    pub slot: u64,
    pub opcode: u8,
    _pad: [u8; 47],
}

pub const DESCRIPTOR_BYTES: u64 = std::mem::size_of::<Descriptor>() as u64;

impl Descriptor {
    pub fn new(token: u64, slot: u64, opcode: u8) -> Self {
        Descriptor { token, slot, opcode, _pad: [0; 47] }
    }
}
