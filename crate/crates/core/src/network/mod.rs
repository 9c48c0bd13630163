//! Network engine: host submission rings, framed message transport between
//! nodes with per-connection ordering, and RDMA-style verbs.

mod engine;
mod rdma;
mod ring;
mod wire;

pub use rdma::{RdmaVerb, RegionRef};
pub use ring::{ring, Consumer, Descriptor, Full, Producer, DESCRIPTOR_BYTES};
pub use wire::{Header, Message, MsgType, HEADER_LEN, MAGIC, VERSION};
