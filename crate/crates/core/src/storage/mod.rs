//! Storage engine: DPU-owned file mapping over an emulated SSD, the host
//! file API, and the traffic director that serves remote requests on the
//! DPU when it can.

mod director;
mod engine;
mod fs;
mod request;
mod residency;
mod ssd;

pub use director::{direct_traffic, parse_udf, OffloadUdf, RouteDecision};
pub use fs::{Extent, FileEntry, FileSystem};
pub use request::{decode_response, encode_response, parse_storage_request, FileOp, IoType, REQUEST_HEADER_LEN};
pub use residency::Residency;
pub use ssd::EmulatedSsd;
