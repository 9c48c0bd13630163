use std::collections::BTreeMap;

use super::director::{direct_traffic, RouteDecision};
use super::fs::FileEntry;
use super::request::{encode_response, parse_storage_request, FileOp, IoType};
use crate::error::{Error, StorageError};
use crate::hwmodel::WorkSpec;
use crate::network::{Message, MsgType};
use crate::runtime::world::{
    Completion, DataPath, NodeId, Origin, Output, Request, Resequencer, RingKind, TokenId, TokenState, World,
};

/// DPU memory charged for holding one file's mapping.
pub(crate) fn mapping_cost(entry: &FileEntry) -> u64 {
    64 + 16 * entry.extents.len() as u64
}

impl World {
    pub(crate) fn fs_create(&mut self, node: NodeId, file_id: u64, len: u64) -> Result<(), StorageError> {
        let n = self.node(node);
        let cost = mapping_cost(n.fs.create(file_id, len)?);
        n.residency.admit(file_id, cost);
        Ok(())
    }

    pub(crate) fn fs_delete(&mut self, node: NodeId, file_id: u64) -> Result<(), StorageError> {
        let n = self.node(node);
        n.fs.delete(file_id)?;
        n.residency.evict(file_id);
        Ok(())
    }

    /// Functional effect of a file operation: read data, or empty for a write.
    pub(crate) fn apply_op(&mut self, node: NodeId, op: &FileOp) -> Result<Vec<u8>, StorageError> {
        let n = self.node(node);
        let extents = n.fs.lookup(op.file_id, op.offset, op.len as u64)?;
        match op.io_type {
            IoType::Read => {
                let mut out = Vec::with_capacity(op.len as usize);
                for e in extents {
                    out.extend(n.ssd.read(e.ssd_offset, e.len)?);
                }
                Ok(out)
            }
            IoType::Write => {
                if op.data.len() != op.len as usize {
                    return Err(StorageError::PayloadLength { expected: op.len, got: op.data.len() });
                }
                let mut pos = 0usize;
                for e in extents {
                    n.ssd.write(e.ssd_offset, &op.data[pos..pos + e.len as usize])?;
                    pos += e.len as usize;
                }
                Ok(Vec::new())
            }
        }
    }

    /// Media time plus the single PCIe crossing between SSD and memory.
    fn ssd_access(&mut self, node: NodeId, at: u64, io: IoType, len: u64) -> u64 {
        let n = self.node(node);
        match io {
            IoType::Read => {
                let t = n.ssd.service(at, false, len);
                n.hw.pcie_transfer(t, len)
            }
            IoType::Write => {
                let t = n.hw.pcie_transfer(at, len);
                n.ssd.service(t, true, len)
            }
        }
    }

    pub(crate) fn file_submit(&mut self, node: NodeId, op: FileOp, origin: Origin, at: u64) -> Result<TokenId, Error> {
        if op.len == 0 {
            return Err(StorageError::ZeroLength.into());
        }
        match (origin, self.node(node).storage_path) {
            (Origin::Host, DataPath::Offloaded) => {
                let token = self.new_token();
                if let Err(e) = self.submit(node, RingKind::Storage, token, Request::File { op, ready: 0 }) {
                    self.tokens.pop();
                    return Err(e.into());
                }
                Ok(token)
            }
            (Origin::Host, DataPath::HostStack) => {
                let token = self.new_token();
                let work = self.defaults.host_io_work(op.len as u64);
                let (unit, t) = self.host_work(node, at, &work);
                let result = self.apply_op(node, &op);
                let done = if result.is_ok() { self.ssd_access(node, t, op.io_type, op.len as u64) } else { t };
                let state = match result {
                    Ok(data) => TokenState::Ready(Completion { output: file_output(op.io_type, data), finish_ns: done, unit }),
                    Err(e) => TokenState::Failed(e.into()),
                };
                self.resolve_at(done, token, state);
                Ok(token)
            }
            (Origin::Dpu, _) => {
                let token = self.new_token();
                self.file_exec(node, token, origin, op, at);
                Ok(token)
            }
        }
    }

    /// DPU file service for a local (host or sproc) request.
    pub(crate) fn file_exec(&mut self, node: NodeId, token: TokenId, origin: Origin, op: FileOp, at: u64) {
        let work = WorkSpec::fixed(self.defaults.dpu.file_service_cycles);
        let (unit, t) = self.dpu_work(node, at, &work);
        self.node(node).residency.touch(op.file_id);
        let result = self.apply_op(node, &op);
        let done = if result.is_ok() { self.ssd_access(node, t, op.io_type, op.len as u64) } else { t };
        let result = result.map(|d| (file_output(op.io_type, d), unit)).map_err(Error::from);
        self.finish(node, origin, done, token, result);
    }

    /// Traffic director for an in-order storage request from the network.
    pub(crate) fn direct(&mut self, node: NodeId, msg: Message) {
        let now = self.now();
        let (conn, seq) = (msg.header.conn_id, msg.header.seq);
        let n = &self.nodes[node.ix()];
        let route = direct_traffic(&msg, &n.udf, |f| n.residency.is_resident(f));
        let work = WorkSpec::fixed(self.defaults.dpu.director_cycles);
        let (_, t) = self.dpu_work(node, now, &work);
        let response = match route {
            RouteDecision::Offload(op) => {
                let n = self.node(node);
                n.director.offloaded += 1;
                n.residency.touch(op.file_id);
                let work = WorkSpec::fixed(self.defaults.dpu.file_service_cycles);
                let (_, t) = self.dpu_work(node, t, &work);
                let result = self.apply_op(node, &op);
                let done = if result.is_ok() { self.ssd_access(node, t, op.io_type, op.len as u64) } else { t };
                self.hw(node).ledger.charge_copy(1);
                (encode_response(&result), done)
            }
            RouteDecision::Forward => {
                self.node(node).director.forwarded += 1;
                let t = self.hw(node).pcie_transfer(t, msg.wire_len());
                let parsed = parse_storage_request(&msg.payload);
                let bytes = parsed.as_ref().map_or(msg.payload.len() as u64, |op| op.len as u64);
                let work = self.defaults.host_io_work(bytes);
                let (_, t) = self.host_work(node, t, &work);
                let result = parsed.and_then(|op| {
                    let r = self.apply_op(node, &op);
                    r.map(|d| (d, op))
                });
                let (result, t) = match result {
                    Ok((data, op)) => (Ok(data), self.ssd_access(node, t, op.io_type, op.len as u64)),
                    Err(e) => (Err(e), t),
                };
                let payload = encode_response(&result);
                let done = self.hw(node).pcie_transfer(t, payload.len() as u64);
                self.hw(node).ledger.charge_copy(3);
                (payload, done)
            }
        };
        let (payload, done) = response;
        self.schedule(done, move |w| w.response_ready(node, conn, seq, Some((MsgType::StorageResp, payload))));
    }

    /// Marks a request seq that will never get a response.
    pub(crate) fn no_response(&mut self, node: NodeId, conn: u32, seq: u32) {
        self.response_ready(node, conn, seq, None);
    }

    /// Responses leave in request order, whichever path produced them.
    fn response_ready(&mut self, node: NodeId, conn: u32, seq: u32, resp: Option<(MsgType, Vec<u8>)>) {
        let r = self
            .node(node)
            .resequencers
            .entry(conn)
            .or_insert_with(|| Resequencer { next: 1, pending: BTreeMap::new() });
        r.pending.insert(seq, resp);
        let mut out = Vec::new();
        while let Some(entry) = r.pending.remove(&r.next) {
            r.next += 1;
            out.extend(entry);
        }
        let now = self.now();
        for (msg_type, payload) in out {
            self.ne_transmit(node, conn, msg_type, payload, now, false);
        }
    }
}

fn file_output(io: IoType, data: Vec<u8>) -> Output {
    match io {
        IoType::Read => Output::Bytes(data),
        IoType::Write => Output::Empty,
    }
}
