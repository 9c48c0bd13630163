//! A discrete-event model of a host server with a DPU attached, with compute,
//! network and storage engines that run real data operations and charge
//! modeled time to a per-node ledger.

pub mod compute;
pub mod error;
pub mod hwmodel;
pub mod network;
pub mod runtime;
pub mod scenario;
pub mod storage;

pub use error::{Error, Result};

#[cfg(any(test, feature = "testing"))]
pub mod testing;
