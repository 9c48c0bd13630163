//! Compute engine: the DP-kernel catalog, placement and scheduling.

mod drr;
mod engine;
mod kind;
pub mod kernels;
mod scheduler;

pub use drr::Drr;
pub use engine::{ComputeEngine, Dispatch, Invocation, KernelCall, Placement};
pub use kernels::{KernelOp, KernelOutput};
pub use kind::KernelKind;
pub use scheduler::{choose_ect, Candidate};
