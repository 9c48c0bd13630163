use super::pipeline::{run_pipeline, Pipeline, PipelineMode, PipelineStats};
use super::world::{Channel, Completion, NodeId, Origin, World, CONTROL_CORE};
use super::Runtime;
use crate::compute::KernelCall;
use crate::error::{Error, StateError};
use crate::hwmodel::{ComputeUnitId, WorkSpec};
use crate::network::{Message, MsgType, RdmaVerb};
use crate::storage::FileOp;

/// What a sproc body gets: engine operations issued from the DPU of one
/// node. Each engine operation first pays the dispatch cost on the
/// control core, then issues once that dispatch finishes.
#[derive(Clone)]
pub struct SprocCtx {
    rt: Runtime,
    node: NodeId,
}

impl SprocCtx {
    pub(crate) fn new(rt: Runtime, node: NodeId) -> Self {
        SprocCtx { rt, node }
    }

    pub fn node(&self) -> NodeId {
        self.node
    }

    pub fn now(&self) -> u64 {
        self.rt.now()
    }

    pub fn runtime(&self) -> &Runtime {
        &self.rt
    }

    async fn dispatch(&self) {
        let node = self.node;
        let t = self.rt.with(|w| {
            let work = WorkSpec::fixed(w.defaults.dpu.sproc_dispatch_cycles);
            let now = w.now();
            w.hw(node).run_on(CONTROL_CORE, now, &work, None).finish
        });
        if t > self.now() {
            self.sleep_until(t).await;
        }
    }

    async fn issue(
        &self,
        f: impl FnOnce(&mut World, u64) -> Result<super::TokenId, Error>,
    ) -> Result<Completion, Error> {
        self.dispatch().await;
        let token = self.rt.with(|w| {
            let now = w.now();
            f(w, now)
        })?;
        self.rt.wait(token).await
    }

    pub async fn sleep_until(&self, t: u64) {
        let token = self.rt.timer(t);
        let _ = self.rt.wait(token).await;
    }

    /// Invokes a kernel. A refused accelerator call is `Err(Error::Refused)`.
    pub async fn kernel(&self, call: KernelCall) -> Result<Completion, Error> {
        let node = self.node;
        self.issue(move |w, _| w.invoke_kernel(node, &call)).await
    }

    pub async fn file_read(&self, file_id: u64, offset: u64, len: u32) -> Result<Vec<u8>, Error> {
        let node = self.node;
        let c = self.issue(move |w, now| w.file_submit(node, FileOp::read(file_id, offset, len), Origin::Dpu, now)).await?;
        Ok(c.output.into_bytes().unwrap_or_default())
    }

    pub async fn file_write(&self, file_id: u64, offset: u64, data: Vec<u8>) -> Result<(), Error> {
        let node = self.node;
        self.issue(move |w, now| w.file_submit(node, FileOp::write(file_id, offset, data), Origin::Dpu, now)).await?;
        Ok(())
    }

    pub async fn send(&self, ch: &Channel, payload: Vec<u8>) -> Result<(), Error> {
        self.send_typed(ch, MsgType::Data, payload).await
    }

    pub async fn send_typed(&self, ch: &Channel, msg_type: MsgType, payload: Vec<u8>) -> Result<(), Error> {
        let ch = *ch;
        self.issue(move |w, now| w.ne_send(&ch, msg_type, payload, Origin::Dpu, now)).await?;
        Ok(())
    }

    pub async fn recv(&self, ch: &Channel) -> Result<Message, Error> {
        let ch = *ch;
        let c = self.issue(move |w, _| w.ne_recv(&ch, Origin::Dpu)).await?;
        match c.output {
            super::Output::Message(m) => Ok(m),
            other => Err(Error::Invalid(format!("receive completed with {other:?}"))),
        }
    }

    pub async fn rdma(&self, verb: RdmaVerb) -> Result<Completion, Error> {
        let node = self.node;
        self.issue(move |w, _| w.rdma_submit(node, verb, Origin::Dpu)).await
    }

    /// Holds `unit` for `ns` of synthetic work and returns when it ends.
    /// Local computation, so no dispatch is charged.
    pub async fn occupy(&self, unit: ComputeUnitId, ns: u64) -> Result<u64, Error> {
        let node = self.node;
        let finish = self.rt.with(|w| {
            w.hw(node).profile().unit(unit.class, unit.index)?;
            let now = w.now();
            Ok::<_, Error>(w.hw(node).reserve(unit, now, ns, None).finish)
        })?;
        self.sleep_until(finish).await;
        Ok(finish)
    }

    pub fn state_put(&self, key: &[u8], value: Vec<u8>) -> Result<(), StateError> {
        self.rt.state_put(self.node, key, value)
    }

    pub fn state_get(&self, key: &[u8]) -> Option<Vec<u8>> {
        self.rt.state_get(self.node, key)
    }

    pub async fn run_pipeline(&self, pipeline: &Pipeline, items: Vec<Vec<u8>>, mode: PipelineMode) -> PipelineStats {
        run_pipeline(self, pipeline, items, mode).await
    }
}
