//! Traffic director: decides per incoming message whether the DPU serves it
//! or the host endpoint does.

use std::rc::Rc;

use super::request::{parse_storage_request, FileOp};
use crate::network::{Message, MsgType};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RouteDecision {
    Offload(FileOp),
    Forward,
}

/// User-supplied classifier. Must be pure and deterministic.
pub type OffloadUdf = Rc<dyn Fn(&Message) -> RouteDecision>;

/// Offloads every well-formed storage request.
pub fn parse_udf() -> OffloadUdf {
    Rc::new(|msg: &Message| match parse_storage_request(&msg.payload) {
        Ok(op) => RouteDecision::Offload(op),
        Err(_) => RouteDecision::Forward,
    })
}

pub fn direct_traffic(msg: &Message, udf: &OffloadUdf, resident: impl Fn(u64) -> bool) -> RouteDecision {
    if msg.header.msg_type != MsgType::StorageReq {
        return RouteDecision::Forward;
    }
    match udf(msg) {
        RouteDecision::Offload(op) if resident(op.file_id) => RouteDecision::Offload(op),
        _ => RouteDecision::Forward,
    }
}
