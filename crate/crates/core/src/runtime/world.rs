//! Loop-owned simulation state. Every engine data path is a chain of
//! actions on the event queue that mutate this.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::Arc;
use std::task::Waker;

use super::state::SharedState;
use crate::compute::{ComputeEngine, Drr, KernelCall, KernelOutput};
use crate::error::Error;
use crate::hwmodel::{ComputeUnitId, CostDefaults, EventQueue, Node, UnitClass, WorkSpec};
use crate::network::{ring, Consumer, Descriptor, Message, MsgType, Producer, RdmaVerb};
use crate::storage::{EmulatedSsd, FileOp, FileSystem, OffloadUdf, Residency};

pub(crate) type Action = Box<dyn FnOnce(&mut World)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub(crate) fn ix(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TokenId(pub u64);

#[derive(Debug, Clone, PartialEq)]
pub enum Output {
    Empty,
    Bytes(Vec<u8>),
    Kernel(KernelOutput),
    Message(Message),
}

impl Output {
    pub fn into_bytes(self) -> Option<Vec<u8>> {
        match self {
            Output::Bytes(b) => Some(b),
            Output::Kernel(k) => k.into_bytes(),
            Output::Message(m) => Some(m.payload),
            Output::Empty => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub output: Output,
    pub finish_ns: u64,
    /// The unit that did the operation's main work.
    pub unit: ComputeUnitId,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenState {
    Pending,
    Ready(Completion),
    Refused,
    Failed(Error),
}

impl TokenState {
    pub fn is_pending(&self) -> bool {
        matches!(self, TokenState::Pending)
    }
}

/// Who issued an engine operation: a host application through the
/// submission rings, or a sproc already running on the DPU.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Host,
    Dpu,
}

/// Where protocol and storage-stack work runs for a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DataPath {
    #[default]
    Offloaded,
    /// Host kernel stacks do the work; kept for comparison.
    HostStack,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RingKind {
    Network,
    Storage,
}

pub(crate) enum Request {
    Send { conn: u32, msg_type: MsgType, payload: Vec<u8>, ready: u64 },
    Rdma { verb: RdmaVerb, ready: u64 },
    File { op: FileOp, ready: u64 },
}

pub(crate) struct SubmissionRing {
    pub tx: Producer<Descriptor>,
    pub rx: Consumer<Descriptor>,
    pub polling: bool,
}

impl SubmissionRing {
    fn new(capacity: usize) -> Self {
        let (tx, rx) = ring(capacity);
        SubmissionRing { tx, rx, polling: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Client,
    Server,
}

/// One endpoint of a connection, as held by the application.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Channel {
    pub conn_id: u32,
    pub node: NodeId,
    pub peer: NodeId,
    pub role: Role,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ChannelStats {
    pub sent: u64,
    pub delivered: u64,
    pub duplicates: u64,
    /// Out-of-order messages waiting for an earlier seq.
    pub held: u64,
}

pub(crate) struct ChannelState {
    pub peer: NodeId,
    pub open: bool,
    pub next_tx_seq: u32,
    pub next_rx_seq: u32,
    pub reorder: BTreeMap<u32, Message>,
    pub inbox: VecDeque<(Message, ComputeUnitId)>,
    pub recv_waiters: VecDeque<(TokenId, Origin)>,
    /// Host deliveries never overtake each other.
    pub last_delivery: u64,
    pub stats: ChannelStats,
}

impl ChannelState {
    pub fn new(peer: NodeId) -> Self {
        ChannelState {
            peer,
            open: true,
            next_tx_seq: 0,
            next_rx_seq: 1,
            reorder: BTreeMap::new(),
            inbox: VecDeque::new(),
            recv_waiters: VecDeque::new(),
            last_delivery: 0,
            stats: ChannelStats::default(),
        }
    }
}

/// Responses held until every earlier request on the connection answered.
#[derive(Default)]
pub(crate) struct Resequencer {
    pub next: u32,
    pub pending: BTreeMap<u32, Option<(MsgType, Vec<u8>)>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DirectorStats {
    pub offloaded: u64,
    pub forwarded: u64,
}

pub(crate) struct PostedRecv {
    pub token: TokenId,
    pub origin: Origin,
    pub region: u64,
    pub offset: u64,
    pub len: u64,
}

pub(crate) struct InboundSend {
    pub data: Vec<u8>,
    pub from: NodeId,
    pub token: TokenId,
    pub origin: Origin,
}

pub(crate) struct FairQueue {
    pub drr: Drr<(TokenId, KernelCall)>,
    pub in_flight: usize,
    pub window: usize,
}

pub(crate) struct NodeState {
    pub hw: Node,
    pub net_path: DataPath,
    pub storage_path: DataPath,
    pub ne_ring: SubmissionRing,
    pub se_ring: SubmissionRing,
    pub requests: HashMap<u64, Request>,
    pub next_slot: u64,
    pub channels: HashMap<u32, ChannelState>,
    pub accept_queue: VecDeque<Channel>,
    pub resequencers: HashMap<u32, Resequencer>,
    pub memory: Vec<u8>,
    pub posted_recvs: VecDeque<PostedRecv>,
    pub unmatched_sends: VecDeque<InboundSend>,
    pub fs: FileSystem,
    pub ssd: EmulatedSsd,
    pub residency: Residency,
    pub udf: OffloadUdf,
    pub director: DirectorStats,
    pub state: SharedState,
    pub fair: Option<FairQueue>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemRegion {
    pub id: u64,
    pub node: NodeId,
    pub base: u64,
    pub len: u64,
}

pub(crate) struct World {
    pub queue: EventQueue<Action>,
    pub defaults: Arc<CostDefaults>,
    pub ce: ComputeEngine,
    pub nodes: Vec<NodeState>,
    pub tokens: Vec<TokenState>,
    pub waiters: HashMap<TokenId, Vec<Waker>>,
    pub regions: Vec<MemRegion>,
    pub next_conn: u32,
}

/// DPU core that runs sproc control flow.
pub const CONTROL_CORE: ComputeUnitId = ComputeUnitId::dpu(0);

impl World {
    pub fn new(nodes: Vec<Node>, defaults: Arc<CostDefaults>, ssds: Vec<EmulatedSsd>, udf: OffloadUdf) -> Self {
        let cap = defaults.dpu.ring_capacity as usize;
        let nodes = nodes
            .into_iter()
            .zip(ssds)
            .map(|(hw, ssd)| {
                let budget = hw.profile().dpu_mem_bytes.saturating_sub(defaults.dpu.mem_reserve_bytes);
                NodeState {
                    net_path: DataPath::Offloaded,
                    storage_path: DataPath::Offloaded,
                    ne_ring: SubmissionRing::new(cap),
                    se_ring: SubmissionRing::new(cap),
                    requests: HashMap::new(),
                    next_slot: 0,
                    channels: HashMap::new(),
                    accept_queue: VecDeque::new(),
                    resequencers: HashMap::new(),
                    memory: Vec::new(),
                    posted_recvs: VecDeque::new(),
                    unmatched_sends: VecDeque::new(),
                    fs: FileSystem::new(ssd.capacity()),
                    ssd,
                    residency: Residency::new(budget),
                    udf: udf.clone(),
                    director: DirectorStats::default(),
                    state: SharedState::new(budget),
                    fair: None,
                    hw,
                }
            })
            .collect();
        World {
            queue: EventQueue::new(),
            ce: ComputeEngine::new(defaults.clone()),
            defaults,
            nodes,
            tokens: Vec::new(),
            waiters: HashMap::new(),
            regions: Vec::new(),
            next_conn: 1,
        }
    }

    pub fn now(&self) -> u64 {
        self.queue.now()
    }

    pub fn node(&mut self, id: NodeId) -> &mut NodeState {
        &mut self.nodes[id.ix()]
    }

    pub fn hw(&mut self, id: NodeId) -> &mut Node {
        &mut self.nodes[id.ix()].hw
    }

    pub fn schedule(&mut self, at: u64, action: impl FnOnce(&mut World) + 'static) {
        self.queue.schedule(at, Box::new(action)).expect("actions are never scheduled in the past");
    }

    pub fn new_token(&mut self) -> TokenId {
        self.tokens.push(TokenState::Pending);
        TokenId(self.tokens.len() as u64 - 1)
    }

    pub fn token(&self, id: TokenId) -> &TokenState {
        &self.tokens[id.0 as usize]
    }

    pub fn resolve(&mut self, id: TokenId, state: TokenState) {
        let slot = &mut self.tokens[id.0 as usize];
        debug_assert!(slot.is_pending(), "token {id:?} resolved twice");
        *slot = state;
        for w in self.waiters.remove(&id).unwrap_or_default() {
            w.wake();
        }
    }

    pub fn resolve_at(&mut self, at: u64, id: TokenId, state: TokenState) {
        self.schedule(at, move |w| w.resolve(id, state));
    }

    /// Completes an engine operation whose work ended at `t`. Host-issued
    /// operations are reaped by the host library, which costs one poll.
    pub fn finish(&mut self, node: NodeId, origin: Origin, t: u64, token: TokenId, result: Result<(Output, ComputeUnitId), Error>) {
        match origin {
            Origin::Dpu => {
                let state = match result {
                    Ok((output, unit)) => TokenState::Ready(Completion { output, finish_ns: t, unit }),
                    Err(e) => TokenState::Failed(e),
                };
                self.resolve_at(t, token, state);
            }
            Origin::Host => self.schedule(t, move |w| {
                let poll = WorkSpec::fixed(w.defaults.host.completion_poll_cycles);
                let (_, span) = w.hw(node).run_cpu(UnitClass::HostCpu, t, &poll, None);
                let state = match result {
                    Ok((output, unit)) => TokenState::Ready(Completion { output, finish_ns: span.finish, unit }),
                    Err(e) => TokenState::Failed(e),
                };
                w.resolve_at(span.finish, token, state);
            }),
        }
    }

    pub fn dpu_work(&mut self, node: NodeId, at: u64, work: &WorkSpec) -> (ComputeUnitId, u64) {
        let (unit, span) = self.hw(node).run_cpu(UnitClass::DpuCpu, at, work, None);
        (unit, span.finish)
    }

    pub fn host_work(&mut self, node: NodeId, at: u64, work: &WorkSpec) -> (ComputeUnitId, u64) {
        let (unit, span) = self.hw(node).run_cpu(UnitClass::HostCpu, at, work, None);
        (unit, span.finish)
    }
}
