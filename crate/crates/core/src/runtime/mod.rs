//! Event-loop runtime: a single-threaded executor that multiplexes sproc
//! bodies and drivers over the engines' event queue, plus the public
//! handle through which host code reaches every engine.

mod fair;
mod pipeline;
mod sproc;
mod state;
pub(crate) mod world;

use std::cell::{Cell, RefCell};
use std::collections::{HashMap, VecDeque};
use std::future::Future;
use std::path::PathBuf;
use std::pin::Pin;
use std::rc::Rc;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::task::{Context, Poll};

use futures::future::LocalBoxFuture;
use futures::task::{waker, ArcWake};
use futures::FutureExt;

pub use pipeline::{Pipeline, PipelineMode, PipelineStats, Stage, DEFAULT_WINDOW};
pub use sproc::SprocCtx;
pub use state::SharedState;
pub use world::{
    Channel, ChannelStats, Completion, DataPath, DirectorStats, MemRegion, NodeId, Origin, Output, RingKind, Role,
    TokenId, TokenState, CONTROL_CORE,
};

use crate::compute::KernelCall;
use crate::error::{Error, StateError};
use crate::hwmodel::{CostDefaults, HardwareProfile, Ledger, Node, TenantId, UtilizationReport};
use crate::network::{MsgType, RdmaVerb, RegionRef};
use crate::storage::{parse_udf, EmulatedSsd, Extent, FileOp, OffloadUdf};
use world::World;

type Task = LocalBoxFuture<'static, ()>;
type SprocFn = Rc<dyn Fn(SprocCtx, Vec<u8>) -> LocalBoxFuture<'static, Result<Vec<u8>, Error>>>;

struct TaskWaker {
    id: usize,
    queued: AtomicBool,
    woken: Arc<Mutex<VecDeque<usize>>>,
}

impl ArcWake for TaskWaker {
    fn wake_by_ref(arc: &Arc<Self>) {
        // a task sits in the wake queue at most once
        if !arc.queued.swap(true, Ordering::AcqRel) {
            arc.woken.lock().expect("wake queue poisoned").push_back(arc.id);
        }
    }
}

struct TaskSlot {
    future: Option<Task>,
    waker: Arc<TaskWaker>,
}

struct Inner {
    world: RefCell<World>,
    tasks: RefCell<Vec<TaskSlot>>,
    woken: Arc<Mutex<VecDeque<usize>>>,
    live: Cell<usize>,
    sprocs: RefCell<HashMap<String, SprocFn>>,
}

pub struct RuntimeBuilder {
    profile: HardwareProfile,
    defaults: CostDefaults,
    nodes: usize,
    backing: Option<PathBuf>,
    udf: OffloadUdf,
}

impl RuntimeBuilder {
    pub fn defaults(mut self, defaults: CostDefaults) -> Self {
        self.defaults = defaults;
        self
    }

    /// Number of identical nodes (default 2).
    pub fn nodes(mut self, n: usize) -> Self {
        self.nodes = n;
        self
    }

    /// Backs node 0's SSD with a file instead of memory.
    pub fn backing(mut self, path: impl Into<PathBuf>) -> Self {
        self.backing = Some(path.into());
        self
    }

    pub fn udf(mut self, udf: OffloadUdf) -> Self {
        self.udf = udf;
        self
    }

    pub fn build(self) -> Result<Runtime, Error> {
        self.profile.validate()?;
        if self.nodes == 0 {
            return Err(Error::Invalid("a runtime needs at least one node".into()));
        }
        let profile = Arc::new(self.profile);
        let defaults = Arc::new(self.defaults);
        let mut ssds = Vec::with_capacity(self.nodes);
        for i in 0..self.nodes {
            ssds.push(match (&self.backing, i) {
                (Some(path), 0) => EmulatedSsd::file_backed(&defaults.ssd, path)?,
                _ => EmulatedSsd::in_memory(&defaults.ssd),
            });
        }
        let nodes = (0..self.nodes).map(|_| Node::new(profile.clone())).collect();
        let world = World::new(nodes, defaults, ssds, self.udf);
        Ok(Runtime {
            inner: Rc::new(Inner {
                world: RefCell::new(world),
                tasks: RefCell::new(Vec::new()),
                woken: Arc::new(Mutex::new(VecDeque::new())),
                live: Cell::new(0),
                sprocs: RefCell::new(HashMap::new()),
            }),
        })
    }
}

/// Handle to one simulation. Cheap to clone; not `Send`.
#[derive(Clone)]
pub struct Runtime {
    inner: Rc<Inner>,
}

/// Resolves when its token leaves the pending state.
pub struct TokenWait {
    rt: Runtime,
    token: TokenId,
}

impl Future for TokenWait {
    type Output = Result<Completion, Error>;

    fn poll(self: Pin<&mut Self>, cx: &mut Context<'_>) -> Poll<Self::Output> {
        let mut w = self.rt.inner.world.borrow_mut();
        match w.token(self.token) {
            TokenState::Pending => {
                let waiters = w.waiters.entry(self.token).or_default();
                if !waiters.iter().any(|x| x.will_wake(cx.waker())) {
                    waiters.push(cx.waker().clone());
                }
                Poll::Pending
            }
            TokenState::Ready(c) => Poll::Ready(Ok(c.clone())),
            TokenState::Refused => Poll::Ready(Err(Error::Refused)),
            TokenState::Failed(e) => Poll::Ready(Err(e.clone())),
        }
    }
}

impl Runtime {
    pub fn builder(profile: HardwareProfile) -> RuntimeBuilder {
        RuntimeBuilder { profile, defaults: CostDefaults::builtin(), nodes: 2, backing: None, udf: parse_udf() }
    }

    fn with<R>(&self, f: impl FnOnce(&mut World) -> R) -> R {
        f(&mut self.inner.world.borrow_mut())
    }

    pub fn now(&self) -> u64 {
        self.with(|w| w.now())
    }

    pub fn defaults(&self) -> Arc<CostDefaults> {
        self.with(|w| w.defaults.clone())
    }

    pub fn node_count(&self) -> usize {
        self.with(|w| w.nodes.len())
    }

    pub fn profile(&self, node: NodeId) -> Arc<HardwareProfile> {
        self.with(|w| w.hw(node).profile_arc())
    }

    // ---- executor ----

    pub fn spawn(&self, fut: impl Future<Output = ()> + 'static) {
        let mut tasks = self.inner.tasks.borrow_mut();
        let id = tasks.len();
        let waker = Arc::new(TaskWaker { id, queued: AtomicBool::new(false), woken: self.inner.woken.clone() });
        ArcWake::wake_by_ref(&waker);
        tasks.push(TaskSlot { future: Some(fut.boxed_local()), waker });
        self.inner.live.set(self.inner.live.get() + 1);
    }

    fn poll_woken(&self) -> bool {
        let mut any = false;
        loop {
            let next = self.inner.woken.lock().expect("wake queue poisoned").pop_front();
            let Some(id) = next else {
                return any;
            };
            any = true;
            let (task, handle) = {
                let mut tasks = self.inner.tasks.borrow_mut();
                let slot = &mut tasks[id];
                slot.waker.queued.store(false, Ordering::Release);
                (slot.future.take(), slot.waker.clone())
            };
            let Some(mut task) = task else {
                continue;
            };
            let w = waker(handle);
            match task.as_mut().poll(&mut Context::from_waker(&w)) {
                Poll::Pending => self.inner.tasks.borrow_mut()[id].future = Some(task),
                Poll::Ready(()) => self.inner.live.set(self.inner.live.get() - 1),
            }
        }
    }

    fn step(&self, limit: Option<u64>) -> bool {
        let fired = {
            let mut w = self.inner.world.borrow_mut();
            match limit {
                Some(t) => w.queue.advance_until(t),
                None => w.queue.advance(),
            }
        };
        match fired {
            Some(f) => {
                (f.payload)(&mut self.inner.world.borrow_mut());
                true
            }
            None => false,
        }
    }

    /// Runs until no event is pending. Errors if spawned activities are
    /// still waiting on something that can never happen.
    pub fn run(&self) -> Result<(), Error> {
        loop {
            self.poll_woken();
            if !self.step(None) && !self.poll_woken() {
                break;
            }
        }
        match self.inner.live.get() {
            0 => Ok(()),
            n => Err(Error::Stalled(n)),
        }
    }

    /// Runs every event due at or before `t`, then moves the clock to `t`.
    pub fn run_until(&self, t: u64) -> Result<(), Error> {
        loop {
            self.poll_woken();
            if !self.step(Some(t)) && !self.poll_woken() {
                break;
            }
        }
        let mut w = self.inner.world.borrow_mut();
        if t > w.now() {
            w.queue.skip_to(t)?;
        }
        Ok(())
    }

    /// Spawns `fut`, runs the loop to quiescence and returns its output.
    pub fn block_on<T: 'static>(&self, fut: impl Future<Output = T> + 'static) -> Result<T, Error> {
        let slot = Rc::new(RefCell::new(None));
        let out = slot.clone();
        self.spawn(async move {
            *out.borrow_mut() = Some(fut.await);
        });
        let ran = self.run();
        let value = slot.borrow_mut().take();
        match (value, ran) {
            (Some(v), _) => Ok(v),
            (None, Err(e)) => Err(e),
            (None, Ok(())) => Err(Error::Stalled(1)),
        }
    }

    pub fn wait(&self, token: TokenId) -> TokenWait {
        TokenWait { rt: self.clone(), token }
    }

    pub fn token_state(&self, token: TokenId) -> TokenState {
        self.with(|w| w.token(token).clone())
    }

    /// Like [`Runtime::token_state`], but moves a finished token's output out
    /// instead of cloning it. Later reads see `Output::Empty`.
    pub fn take_token(&self, token: TokenId) -> TokenState {
        self.with(|w| match &mut w.tokens[token.0 as usize] {
            TokenState::Ready(c) => {
                let output = std::mem::replace(&mut c.output, Output::Empty);
                TokenState::Ready(Completion { output, ..*c })
            }
            other => other.clone(),
        })
    }

    /// A token that resolves at `t` (or now, if `t` is past).
    pub fn timer(&self, t: u64) -> TokenId {
        self.with(|w| {
            let token = w.new_token();
            let at = t.max(w.now());
            let done = TokenState::Ready(Completion { output: Output::Empty, finish_ns: at, unit: CONTROL_CORE });
            w.resolve_at(at, token, done);
            token
        })
    }

    // ---- accounting ----

    pub fn ledger(&self, node: NodeId) -> Ledger {
        self.with(|w| w.hw(node).ledger.clone())
    }

    pub fn report(&self, node: NodeId, horizon_ns: u64) -> UtilizationReport {
        self.with(|w| w.hw(node).ledger.report(horizon_ns))
    }

    // ---- compute ----

    pub fn invoke_kernel(&self, node: NodeId, call: &KernelCall) -> Result<TokenId, Error> {
        self.with(|w| w.invoke_kernel(node, call))
    }

    /// Routes later [`Runtime::submit_fair`] calls on `node` through a DRR
    /// queue with at most `window` kernels in flight.
    pub fn set_fair(&self, node: NodeId, quantum: u64, weights: &[(TenantId, u64)], window: usize) {
        self.with(|w| w.set_fair(node, quantum, weights, window))
    }

    pub fn submit_fair(&self, node: NodeId, call: KernelCall) -> Result<TokenId, Error> {
        self.with(|w| w.fair_submit(node, call))
    }

    // ---- network ----

    pub fn set_net_path(&self, node: NodeId, path: DataPath) {
        self.with(|w| w.node(node).net_path = path)
    }

    pub fn ne_open(&self, node: NodeId, peer: NodeId) -> Result<Channel, Error> {
        self.with(|w| w.ne_open(node, peer))
    }

    pub fn ne_accept(&self, node: NodeId) -> Option<Channel> {
        self.with(|w| w.node(node).accept_queue.pop_front())
    }

    pub fn ne_send(&self, ch: &Channel, payload: Vec<u8>) -> Result<TokenId, Error> {
        self.ne_send_typed(ch, MsgType::Data, payload)
    }

    pub fn ne_send_typed(&self, ch: &Channel, msg_type: MsgType, payload: Vec<u8>) -> Result<TokenId, Error> {
        self.with(|w| {
            let now = w.now();
            w.ne_send(ch, msg_type, payload, Origin::Host, now)
        })
    }

    pub fn ne_recv(&self, ch: &Channel) -> Result<TokenId, Error> {
        self.with(|w| w.ne_recv(ch, Origin::Host))
    }

    pub fn ne_close(&self, ch: &Channel) -> Result<(), Error> {
        Ok(self.with(|w| w.ne_close(ch))?)
    }

    pub fn channel_stats(&self, ch: &Channel) -> Option<ChannelStats> {
        self.with(|w| w.nodes[ch.node.ix()].channels.get(&ch.conn_id).map(|c| c.stats))
    }

    pub fn ring_len(&self, node: NodeId, kind: RingKind) -> usize {
        self.with(|w| {
            let n = w.node(node);
            match kind {
                RingKind::Network => n.ne_ring.tx.len(),
                RingKind::Storage => n.se_ring.tx.len(),
            }
        })
    }

    pub fn rdma_register(&self, node: NodeId, len: u64) -> MemRegion {
        self.with(|w| w.rdma_register(node, len))
    }

    pub fn rdma(&self, node: NodeId, verb: RdmaVerb) -> Result<TokenId, Error> {
        self.with(|w| w.rdma_submit(node, verb, Origin::Host))
    }

    /// Uncharged host store into registered memory.
    pub fn mem_write(&self, at: RegionRef, data: &[u8]) -> Result<(), Error> {
        self.with(|w| {
            w.check_ref(&at, data.len() as u64, None)?;
            w.write_mem(&at, data);
            Ok(())
        })
    }

    /// Uncharged host load from registered memory.
    pub fn mem_read(&self, at: RegionRef, len: u64) -> Result<Vec<u8>, Error> {
        self.with(|w| {
            w.check_ref(&at, len, None)?;
            Ok(w.read_mem(&at, len))
        })
    }

    // ---- storage ----

    pub fn set_storage_path(&self, node: NodeId, path: DataPath) {
        self.with(|w| w.node(node).storage_path = path)
    }

    pub fn set_udf(&self, node: NodeId, udf: OffloadUdf) {
        self.with(|w| w.node(node).udf = udf)
    }

    pub fn fs_create(&self, node: NodeId, file_id: u64, len: u64) -> Result<(), Error> {
        Ok(self.with(|w| w.fs_create(node, file_id, len))?)
    }

    pub fn fs_delete(&self, node: NodeId, file_id: u64) -> Result<(), Error> {
        Ok(self.with(|w| w.fs_delete(node, file_id))?)
    }

    pub fn fs_lookup(&self, node: NodeId, file_id: u64, offset: u64, len: u64) -> Result<Vec<Extent>, Error> {
        Ok(self.with(|w| w.node(node).fs.lookup(file_id, offset, len))?)
    }

    /// Uncharged bulk load of file contents, for setting up a scenario.
    pub fn preload(&self, node: NodeId, file_id: u64, offset: u64, data: Vec<u8>) -> Result<(), Error> {
        Ok(self.with(|w| w.apply_op(node, &FileOp::write(file_id, offset, data)).map(drop))?)
    }

    pub fn file_read(&self, node: NodeId, file_id: u64, offset: u64, len: u32) -> Result<TokenId, Error> {
        self.with(|w| {
            let now = w.now();
            w.file_submit(node, FileOp::read(file_id, offset, len), Origin::Host, now)
        })
    }

    pub fn file_write(&self, node: NodeId, file_id: u64, offset: u64, data: Vec<u8>) -> Result<TokenId, Error> {
        self.with(|w| {
            let now = w.now();
            w.file_submit(node, FileOp::write(file_id, offset, data), Origin::Host, now)
        })
    }

    /// Pins a file's requests to the host path regardless of the UDF.
    pub fn set_host_only(&self, node: NodeId, file_id: u64, host_only: bool) {
        self.with(|w| w.node(node).residency.set_host_only(file_id, host_only))
    }

    pub fn is_resident(&self, node: NodeId, file_id: u64) -> bool {
        self.with(|w| w.node(node).residency.is_resident(file_id))
    }

    pub fn inject_ssd_failure(&self, node: NodeId, offset: u64, len: u64) {
        self.with(|w| w.node(node).ssd.inject_failure(offset, len))
    }

    pub fn director_stats(&self, node: NodeId) -> DirectorStats {
        self.with(|w| w.node(node).director)
    }

    // ---- shared state ----

    pub fn state_put(&self, node: NodeId, key: &[u8], value: Vec<u8>) -> Result<(), StateError> {
        self.with(|w| w.node(node).state.put(key, value))
    }

    pub fn state_get(&self, node: NodeId, key: &[u8]) -> Option<Vec<u8>> {
        self.with(|w| w.node(node).state.get(key).map(<[u8]>::to_vec))
    }

    pub fn state_used(&self, node: NodeId) -> (u64, u64) {
        self.with(|w| {
            let s = &w.node(node).state;
            (s.used(), s.budget())
        })
    }

    // ---- sprocs ----

    pub fn register_sproc<F, Fut>(&self, name: &str, body: F) -> Result<(), Error>
    where
        F: Fn(SprocCtx, Vec<u8>) -> Fut + 'static,
        Fut: Future<Output = Result<Vec<u8>, Error>> + 'static,
    {
        let mut sprocs = self.inner.sprocs.borrow_mut();
        if sprocs.contains_key(name) {
            return Err(Error::DuplicateSproc(name.into()));
        }
        sprocs.insert(name.into(), Rc::new(move |ctx, req| body(ctx, req).boxed_local()));
        Ok(())
    }

    /// Starts a registered sproc on `node`'s DPU. The token carries the
    /// body's returned bytes.
    pub fn invoke_sproc(&self, node: NodeId, name: &str, request: Vec<u8>) -> Result<TokenId, Error> {
        let body = self.inner.sprocs.borrow().get(name).cloned().ok_or_else(|| Error::UnknownSproc(name.into()))?;
        if node.ix() >= self.node_count() {
            return Err(Error::Invalid(format!("no node {}", node.0)));
        }
        let token = self.with(|w| w.new_token());
        let ctx = self.ctx(node);
        let rt = self.clone();
        self.spawn(async move {
            let result = body(ctx, request).await;
            rt.with(|w| {
                let state = match result {
                    Ok(out) => {
                        TokenState::Ready(Completion { output: Output::Bytes(out), finish_ns: w.now(), unit: CONTROL_CORE })
                    }
                    Err(e) => TokenState::Failed(e),
                };
                w.resolve(token, state);
            });
        });
        Ok(token)
    }

    /// A DPU-side context on `node`, as a sproc body sees it.
    pub fn ctx(&self, node: NodeId) -> SprocCtx {
        SprocCtx::new(self.clone(), node)
    }
}
