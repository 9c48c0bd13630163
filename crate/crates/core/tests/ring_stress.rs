use std::thread;

use dpdpu_core::network::{ring, Descriptor};

fn stress(capacity: usize, count: u64) {
    let (mut tx, mut rx) = ring::<Descriptor>(capacity);
    let producer = thread::spawn(move || {
        for i in 0..count {
            let mut d = Descriptor::new(i, i.wrapping_mul(31), (i % 3) as u8);
            loop {
                match tx.push(d) {
                    Ok(()) => break,
                    Err(full) => {
                        d = full.0;
                        thread::yield_now();
                    }
                }
            }
        }
    });
    let mut next = 0u64;
    while next < count {
        match rx.pop() {
            Some(d) => {
                assert_eq!(d.token, next, "lost, duplicated or reordered");
                assert_eq!(d.slot, next.wrapping_mul(31));
                assert_eq!(d.opcode, (next % 3) as u8);
                next += 1;
            }
            None => thread::yield_now(),
        }
    }
    producer.join().unwrap();
    assert!(rx.pop().is_none());
}

#[test]
fn million_descriptors_exactly_once_in_order() {
    stress(256, 1_000_000);
}

#[test]
fn tiny_ring_under_contention() {
    stress(1, 100_000);
    stress(2, 100_000);
}
