use super::ring::{Descriptor, DESCRIPTOR_BYTES};
use super::wire::{Message, MsgType, HEADER_LEN};
use crate::error::{Error, NetError};
use crate::hwmodel::{ComputeUnitId, WorkSpec};
use crate::runtime::world::{
    Channel, ChannelState, Completion, DataPath, NodeId, Origin, Output, Request, Role, RingKind, TokenId,
    TokenState, World,
};

const OP_SEND: u8 = 1;
const OP_RDMA: u8 = 2;
const OP_FILE: u8 = 3;

impl World {
    fn dpu_stack(&self, bytes: u64) -> WorkSpec {
        WorkSpec::new(bytes, self.defaults.dpu.stack_cycles_per_byte, self.defaults.dpu.stack_fixed_cycles)
    }

    fn host_stack(&self, bytes: u64) -> WorkSpec {
        WorkSpec::new(bytes, self.defaults.host.stack_cycles_per_byte, self.defaults.host.stack_fixed_cycles)
    }

    /// Host side of the submission path: pay the enqueue cost and push a
    /// descriptor. A full ring is reported before anything is charged.
    pub(crate) fn submit(&mut self, node: NodeId, kind: RingKind, token: TokenId, req: Request) -> Result<(), NetError> {
        let now = self.now();
        let enqueue = WorkSpec::fixed(self.defaults.host.ring_enqueue_cycles);
        let n = self.node(node);
        let ring = match kind {
            RingKind::Network => &mut n.ne_ring,
            RingKind::Storage => &mut n.se_ring,
        };
        if ring.tx.is_full() {
            return Err(NetError::Backpressure);
        }
        let (_, ready) = self.host_work(node, now, &enqueue);
        let n = self.node(node);
        let slot = n.next_slot;
        n.next_slot += 1;
        let opcode = match &req {
            Request::Send { .. } => OP_SEND,
            Request::Rdma { .. } => OP_RDMA,
            Request::File { .. } => OP_FILE,
        };
        n.requests.insert(slot, req.with_ready(ready));
        let ring = match kind {
            RingKind::Network => &mut n.ne_ring,
            RingKind::Storage => &mut n.se_ring,
        };
        ring.tx.push(Descriptor::new(token.0, slot, opcode)).expect("fullness checked above");
        if !ring.polling {
            ring.polling = true;
            self.schedule(ready, move |w| w.poll_ring(node, kind));
        }
        Ok(())
    }

    /// One DPU poll: pops up to `max_batch` descriptors, charging a poll on
    /// a DPU core plus the DMA of the descriptors fetched. Returns the batch
    /// and the time it is available to the DPU.
    pub(crate) fn dma_poll(&mut self, node: NodeId, kind: RingKind, max_batch: usize) -> (Vec<Descriptor>, u64) {
        let now = self.now();
        let n = self.node(node);
        let ring = match kind {
            RingKind::Network => &mut n.ne_ring,
            RingKind::Storage => &mut n.se_ring,
        };
        let mut batch = Vec::new();
        while batch.len() < max_batch {
            match ring.rx.pop() {
                Some(d) => batch.push(d),
                None => break,
            }
        }
        let poll_ns = n.hw.profile().dma_poll_ns;
        let unit = n.hw.earliest_cpu(crate::hwmodel::UnitClass::DpuCpu);
        let span = n.hw.reserve(unit, now, poll_ns, None);
        let ready = if batch.is_empty() {
            span.finish
        } else {
            n.hw.dma_fetch(span.finish, batch.len() as u64 * DESCRIPTOR_BYTES)
        };
        (batch, ready)
    }

    fn poll_ring(&mut self, node: NodeId, kind: RingKind) {
        let max = self.defaults.dpu.poll_batch as usize;
        let (batch, ready) = self.dma_poll(node, kind, max);
        for d in batch {
            let req = self.node(node).requests.remove(&d.slot).expect("descriptor slots are live");
            let at = ready.max(req.ready());
            let token = TokenId(d.token);
            match req {
                Request::Send { conn, msg_type, payload, .. } => {
                    let (unit, done) = self.ne_transmit(node, conn, msg_type, payload, at, true);
                    self.finish(node, Origin::Host, done, token, Ok((Output::Empty, unit)));
                }
                Request::Rdma { verb, .. } => self.rdma_exec(node, token, Origin::Host, verb, at),
                Request::File { op, .. } => self.file_exec(node, token, Origin::Host, op, at),
            }
        }
        let n = self.node(node);
        let ring = match kind {
            RingKind::Network => &mut n.ne_ring,
            RingKind::Storage => &mut n.se_ring,
        };
        if ring.rx.is_empty() {
            ring.polling = false;
        } else {
            self.schedule(ready, move |w| w.poll_ring(node, kind));
        }
    }

    pub(crate) fn ne_open(&mut self, node: NodeId, peer: NodeId) -> Result<Channel, Error> {
        if node == peer || peer.ix() >= self.nodes.len() || node.ix() >= self.nodes.len() {
            return Err(Error::Invalid(format!("cannot connect node {} to node {}", node.0, peer.0)));
        }
        let conn_id = self.next_conn;
        self.next_conn += 1;
        self.node(node).channels.insert(conn_id, ChannelState::new(peer));
        self.node(peer).channels.insert(conn_id, ChannelState::new(node));
        let server = Channel { conn_id, node: peer, peer: node, role: Role::Server };
        self.node(peer).accept_queue.push_back(server);
        Ok(Channel { conn_id, node, peer, role: Role::Client })
    }

    fn channel(&mut self, ch: &Channel) -> Result<&mut ChannelState, NetError> {
        self.nodes[ch.node.ix()].channels.get_mut(&ch.conn_id).ok_or(NetError::UnknownChannel(ch.conn_id))
    }

    pub(crate) fn ne_close(&mut self, ch: &Channel) -> Result<(), NetError> {
        self.channel(ch)?.open = false;
        Ok(())
    }

    pub(crate) fn ne_send(
        &mut self,
        ch: &Channel,
        msg_type: MsgType,
        payload: Vec<u8>,
        origin: Origin,
        at: u64,
    ) -> Result<TokenId, Error> {
        let state = self.channel(ch)?;
        if !state.open {
            return Err(NetError::Closed(ch.conn_id).into());
        }
        if payload.is_empty() {
            return Err(NetError::EmptySend.into());
        }
        let node = ch.node;
        match (origin, self.node(node).net_path) {
            (Origin::Host, DataPath::Offloaded) => {
                let token = self.new_token();
                let req = Request::Send { conn: ch.conn_id, msg_type, payload, ready: 0 };
                if let Err(e) = self.submit(node, RingKind::Network, token, req) {
                    self.tokens.pop();
                    return Err(e.into());
                }
                Ok(token)
            }
            (Origin::Host, DataPath::HostStack) => {
                let token = self.new_token();
                let (unit, done) = self.host_stack_transmit(node, ch.conn_id, msg_type, payload, at);
                self.resolve_at(done, token, ready(Output::Empty, done, unit));
                Ok(token)
            }
            (Origin::Dpu, _) => {
                let token = self.new_token();
                let (unit, done) = self.ne_transmit(node, ch.conn_id, msg_type, payload, at, false);
                self.finish(node, Origin::Dpu, done, token, Ok((Output::Empty, unit)));
                Ok(token)
            }
        }
    }

    fn frame(&mut self, node: NodeId, conn: u32, msg_type: MsgType, payload: Vec<u8>) -> (NodeId, Vec<u8>) {
        let ch = self.node(node).channels.get_mut(&conn).expect("channel checked at submission");
        ch.next_tx_seq += 1;
        ch.stats.sent += 1;
        let msg = Message::new(msg_type, 0, conn, ch.next_tx_seq, payload);
        (ch.peer, msg.encode())
    }

    fn wire_out(&mut self, node: NodeId, peer: NodeId, frame: Vec<u8>, at: u64) -> u64 {
        let hw = self.hw(node);
        let nic = hw.nic_send(at, frame.len() as u64);
        let arrival = nic.finish + hw.profile().nic_lat_ns;
        self.schedule(arrival, move |w| w.on_arrive(peer, frame));
        nic.finish
    }

    /// DPU transport send: protocol work on a DPU core, framing, NIC.
    /// Returns the protocol unit and the time the frame left the NIC.
    pub(crate) fn ne_transmit(
        &mut self,
        node: NodeId,
        conn: u32,
        msg_type: MsgType,
        payload: Vec<u8>,
        at: u64,
        from_host_memory: bool,
    ) -> (ComputeUnitId, u64) {
        let len = payload.len() as u64;
        let at = if from_host_memory { self.hw(node).dma_fetch(at, len) } else { at };
        let work = self.dpu_stack(len + HEADER_LEN as u64);
        let (unit, t) = self.dpu_work(node, at, &work);
        let (peer, frame) = self.frame(node, conn, msg_type, payload);
        (unit, self.wire_out(node, peer, frame, t))
    }

    fn host_stack_transmit(
        &mut self,
        node: NodeId,
        conn: u32,
        msg_type: MsgType,
        payload: Vec<u8>,
        at: u64,
    ) -> (ComputeUnitId, u64) {
        let work = self.host_stack(payload.len() as u64 + HEADER_LEN as u64);
        let (unit, t) = self.host_work(node, at, &work);
        let (peer, frame) = self.frame(node, conn, msg_type, payload);
        let t = self.hw(node).pcie_transfer(t, frame.len() as u64);
        (unit, self.wire_out(node, peer, frame, t))
    }

    fn on_arrive(&mut self, node: NodeId, frame: Vec<u8>) {
        let Ok(msg) = Message::decode(&frame) else {
            return;
        };
        let now = self.now();
        let len = frame.len() as u64;
        let (unit, t) = match self.node(node).net_path {
            DataPath::Offloaded => {
                let work = self.dpu_stack(len);
                self.dpu_work(node, now, &work)
            }
            DataPath::HostStack => {
                let t = self.hw(node).pcie_transfer(now, len);
                let work = self.host_stack(len);
                self.host_work(node, t, &work)
            }
        };
        self.schedule(t, move |w| w.inbound(node, msg, unit));
    }

    /// Transport receive: restores per-connection order before anything
    /// above the transport sees a message.
    fn inbound(&mut self, node: NodeId, msg: Message, unit: ComputeUnitId) {
        let Some(ch) = self.node(node).channels.get_mut(&msg.header.conn_id) else {
            return;
        };
        let seq = msg.header.seq;
        if seq < ch.next_rx_seq || ch.reorder.contains_key(&seq) {
            ch.stats.duplicates += 1;
            return;
        }
        ch.reorder.insert(seq, msg);
        let mut ready = Vec::new();
        while let Some(m) = ch.reorder.remove(&ch.next_rx_seq) {
            ch.next_rx_seq += 1;
            ready.push(m);
        }
        ch.stats.held = ch.reorder.len() as u64;
        for m in ready {
            self.dispatch_inbound(node, m, unit);
        }
    }

    fn dispatch_inbound(&mut self, node: NodeId, msg: Message, unit: ComputeUnitId) {
        if msg.header.msg_type == MsgType::StorageReq {
            self.direct(node, msg);
            return;
        }
        self.no_response(node, msg.header.conn_id, msg.header.seq);
        let now = self.now();
        let at = match self.node(node).net_path {
            DataPath::Offloaded => self.hw(node).pcie_transfer(now, msg.payload.len() as u64),
            DataPath::HostStack => now,
        };
        self.host_deliver(node, msg, unit, at);
    }

    pub(crate) fn host_deliver(&mut self, node: NodeId, msg: Message, unit: ComputeUnitId, at: u64) {
        let conn = msg.header.conn_id;
        let Some(ch) = self.node(node).channels.get_mut(&conn) else {
            return;
        };
        let at = at.max(ch.last_delivery);
        ch.last_delivery = at;
        self.schedule(at, move |w| {
            let ch = w.node(node).channels.get_mut(&conn).expect("channels are never removed");
            ch.inbox.push_back((msg, unit));
            ch.stats.delivered += 1;
            w.match_recvs(node, conn);
        });
    }

    fn match_recvs(&mut self, node: NodeId, conn: u32) {
        let now = self.now();
        loop {
            let ch = self.node(node).channels.get_mut(&conn).expect("channels are never removed");
            if ch.inbox.is_empty() || ch.recv_waiters.is_empty() {
                return;
            }
            let (msg, unit) = ch.inbox.pop_front().unwrap();
            let (token, origin) = ch.recv_waiters.pop_front().unwrap();
            self.finish(node, origin, now, token, Ok((Output::Message(msg), unit)));
        }
    }

    pub(crate) fn ne_recv(&mut self, ch: &Channel, origin: Origin) -> Result<TokenId, Error> {
        self.channel(ch)?;
        let token = self.new_token();
        self.channel(ch)?.recv_waiters.push_back((token, origin));
        self.match_recvs(ch.node, ch.conn_id);
        Ok(token)
    }
}

pub(crate) fn ready(output: Output, finish_ns: u64, unit: ComputeUnitId) -> TokenState {
    TokenState::Ready(Completion { output, finish_ns, unit })
}

impl Request {
    fn ready(&self) -> u64 {
        match self {
            Request::Send { ready, .. } | Request::Rdma { ready, .. } | Request::File { ready, .. } => *ready,
        }
    }

    fn with_ready(mut self, at: u64) -> Self {
        match &mut self {
            Request::Send { ready, .. } | Request::Rdma { ready, .. } | Request::File { ready, .. } => *ready = at,
        }
        self
    }
}
