//! RDMA-style verbs over registered memory regions. One-sided reads and
//! writes touch only the remote NIC and PCIe, never the remote host CPU.

use super::wire::HEADER_LEN;
use crate::error::{Error, NetError};
use crate::hwmodel::{ComputeUnitId, WorkSpec};
use crate::runtime::world::{InboundSend, MemRegion, NodeId, Origin, Output, PostedRecv, Request, RingKind, TokenId, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionRef {
    pub region: MemRegion,
    pub offset: u64,
}

impl RegionRef {
    pub fn new(region: MemRegion, offset: u64) -> Self {
        RegionRef { region, offset }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RdmaVerb {
    /// Copy `len` bytes of `remote` into `local`.
    Read { local: RegionRef, remote: RegionRef, len: u64 },
    /// Copy `len` bytes of `local` into `remote`.
    Write { local: RegionRef, remote: RegionRef, len: u64 },
    /// Deliver `len` bytes of `local` into the next receive posted on `peer`.
    Send { local: RegionRef, peer: NodeId, len: u64 },
    /// Post a receive buffer for a later send.
    Recv { local: RegionRef, len: u64 },
}

const H: u64 = HEADER_LEN as u64;

impl World {
    pub(crate) fn rdma_register(&mut self, node: NodeId, len: u64) -> MemRegion {
        let mem = &mut self.node(node).memory;
        let base = mem.len() as u64;
        mem.resize((base + len) as usize, 0);
        let region = MemRegion { id: self.regions.len() as u64, node, base, len };
        self.regions.push(region);
        region
    }

    pub(crate) fn check_ref(&self, r: &RegionRef, len: u64, owner: Option<NodeId>) -> Result<(), NetError> {
        let known = self.regions.get(r.region.id as usize).filter(|m| **m == r.region);
        let region = known.ok_or(NetError::UnknownRegion(r.region.id))?;
        if owner.is_some_and(|n| n != region.node) {
            return Err(NetError::UnknownRegion(r.region.id));
        }
        if r.offset.checked_add(len).is_none_or(|end| end > region.len) {
            return Err(NetError::OutOfBounds { offset: r.offset, len, region_len: region.len });
        }
        Ok(())
    }

    pub(crate) fn read_mem(&self, r: &RegionRef, len: u64) -> Vec<u8> {
        let start = (r.region.base + r.offset) as usize;
        self.nodes[r.region.node.ix()].memory[start..start + len as usize].to_vec()
    }

    pub(crate) fn write_mem(&mut self, r: &RegionRef, data: &[u8]) {
        let start = (r.region.base + r.offset) as usize;
        self.nodes[r.region.node.ix()].memory[start..start + data.len()].copy_from_slice(data);
    }

    fn validate_verb(&self, node: NodeId, verb: &RdmaVerb) -> Result<(), Error> {
        match verb {
            RdmaVerb::Read { local, remote, len } | RdmaVerb::Write { local, remote, len } => {
                self.check_ref(local, *len, Some(node))?;
                self.check_ref(remote, *len, None)?;
            }
            RdmaVerb::Send { local, peer, len } => {
                self.check_ref(local, *len, Some(node))?;
                if peer.ix() >= self.nodes.len() {
                    return Err(Error::Invalid(format!("no node {}", peer.0)));
                }
            }
            RdmaVerb::Recv { local, len } => self.check_ref(local, *len, Some(node))?,
        }
        Ok(())
    }

    /// Validation failures are returned before anything is charged.
    pub(crate) fn rdma_submit(&mut self, node: NodeId, verb: RdmaVerb, origin: Origin) -> Result<TokenId, Error> {
        self.validate_verb(node, &verb)?;
        let token = self.new_token();
        match origin {
            Origin::Host => {
                if let Err(e) = self.submit(node, RingKind::Network, token, Request::Rdma { verb, ready: 0 }) {
                    self.tokens.pop();
                    return Err(e.into());
                }
            }
            Origin::Dpu => {
                let now = self.now();
                self.rdma_exec(node, token, origin, verb, now);
            }
        }
        Ok(token)
    }

    fn nic_hop(&mut self, from: NodeId, at: u64, bytes: u64) -> u64 {
        let hw = self.hw(from);
        hw.nic_send(at, bytes).finish + hw.profile().nic_lat_ns
    }

    pub(crate) fn rdma_exec(&mut self, node: NodeId, token: TokenId, origin: Origin, verb: RdmaVerb, at: u64) {
        let issue = WorkSpec::fixed(self.defaults.dpu.rdma_issue_cycles);
        let (unit, t) = self.dpu_work(node, at, &issue);
        match verb {
            RdmaVerb::Write { local, remote, len } => {
                let data = self.read_mem(&local, len);
                let arrive = self.nic_hop(node, t, len + H);
                let rnode = remote.region.node;
                self.schedule(arrive, move |w| {
                    let now = w.now();
                    let landed = w.hw(rnode).pcie_transfer(now, len);
                    w.write_mem(&remote, &data);
                    let back = w.nic_hop(rnode, landed, H);
                    w.finish(node, origin, back, token, Ok((Output::Empty, unit)));
                });
            }
            RdmaVerb::Read { local, remote, len } => {
                let arrive = self.nic_hop(node, t, H);
                let rnode = remote.region.node;
                self.schedule(arrive, move |w| {
                    let now = w.now();
                    let fetched = w.hw(rnode).pcie_transfer(now, len);
                    let data = w.read_mem(&remote, len);
                    let back = w.nic_hop(rnode, fetched, len + H);
                    w.schedule(back, move |w| {
                        let now = w.now();
                        let landed = w.hw(node).pcie_transfer(now, len);
                        w.write_mem(&local, &data);
                        w.finish(node, origin, landed, token, Ok((Output::Bytes(data), unit)));
                    });
                });
            }
            RdmaVerb::Send { local, peer, len } => {
                let data = self.read_mem(&local, len);
                let arrive = self.nic_hop(node, t, len + H);
                self.schedule(arrive, move |w| {
                    let limit = w.defaults.dpu.rdma_send_queue as usize;
                    // an unmatched backlog implies no receive is posted
                    if w.nodes[peer.ix()].unmatched_sends.len() >= limit {
                        let now = w.now();
                        let back = w.nic_hop(peer, now, H);
                        w.finish(node, origin, back, token, Err(NetError::RecvNotPosted.into()));
                        return;
                    }
                    w.node(peer).unmatched_sends.push_back(InboundSend { data, from: node, token, origin });
                    w.rdma_match(peer, unit);
                });
            }
            RdmaVerb::Recv { local, len } => {
                self.schedule(t, move |w| {
                    let region = local.region.id;
                    w.node(node).posted_recvs.push_back(PostedRecv { token, origin, region, offset: local.offset, len });
                    w.rdma_match(node, unit);
                });
            }
        }
    }

    fn rdma_match(&mut self, node: NodeId, unit: ComputeUnitId) {
        loop {
            let n = self.node(node);
            if n.posted_recvs.is_empty() || n.unmatched_sends.is_empty() {
                return;
            }
            let recv = n.posted_recvs.pop_front().unwrap();
            let send = n.unmatched_sends.pop_front().unwrap();
            let now = self.now();
            let len = send.data.len() as u64;
            if len > recv.len {
                let err = NetError::OutOfBounds { offset: recv.offset, len, region_len: recv.len };
                self.finish(node, recv.origin, now, recv.token, Err(err.clone().into()));
                let back = self.nic_hop(node, now, H);
                self.finish(send.from, send.origin, back, send.token, Err(err.into()));
                continue;
            }
            let landed = self.hw(node).pcie_transfer(now, len);
            let target = RegionRef::new(self.regions[recv.region as usize], recv.offset);
            self.write_mem(&target, &send.data);
            self.finish(node, recv.origin, landed, recv.token, Ok((Output::Bytes(send.data), unit)));
            let back = self.nic_hop(node, landed, H);
            self.finish(send.from, send.origin, back, send.token, Ok((Output::Empty, unit)));
        }
    }
}
