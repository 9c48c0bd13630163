//! Kernel submission from host tenants: direct, or through a per-node DRR
//! queue that limits how many kernels are in flight at once.

use super::world::{Completion, FairQueue, NodeId, Output, TokenId, TokenState, World};
use crate::compute::{Drr, Invocation, KernelCall};
use crate::error::Error;
use crate::hwmodel::TenantId;

impl World {
    /// Places and runs one kernel now. A refused call resolves its token
    /// immediately as refused; a rejected one charges nothing and errors.
    pub(crate) fn invoke_kernel(&mut self, node: NodeId, call: &KernelCall) -> Result<TokenId, Error> {
        let now = self.now();
        let inv = self.ce.invoke(&mut self.nodes[node.ix()].hw, now, call);
        match inv {
            Invocation::Rejected(e) => Err(e.into()),
            Invocation::Refused => {
                let token = self.new_token();
                self.resolve(token, TokenState::Refused);
                Ok(token)
            }
            Invocation::Dispatched(d) => {
                let token = self.new_token();
                let state = match d.output {
                    Ok(out) => TokenState::Ready(Completion { output: Output::Kernel(out), finish_ns: d.span.finish, unit: d.unit }),
                    Err(e) => TokenState::Failed(e.into()),
                };
                self.resolve_at(d.span.finish, token, state);
                Ok(token)
            }
        }
    }

    pub(crate) fn set_fair(&mut self, node: NodeId, quantum: u64, weights: &[(TenantId, u64)], window: usize) {
        let mut drr = Drr::new(quantum);
        for &(t, w) in weights {
            drr.set_weight(t, w);
        }
        self.node(node).fair = Some(FairQueue { drr, in_flight: 0, window: window.max(1) });
    }

    pub(crate) fn fair_submit(&mut self, node: NodeId, call: KernelCall) -> Result<TokenId, Error> {
        call.op.validate()?;
        let token = self.new_token();
        let fair = self.node(node).fair.as_mut().ok_or_else(|| Error::Invalid("fair queue not configured".into()))?;
        fair.drr.push(call.tenant, call.op.cost_bytes(), (token, call));
        self.fair_pump(node);
        Ok(token)
    }

    fn fair_pump(&mut self, node: NodeId) {
        loop {
            let fair = self.node(node).fair.as_mut().expect("pump only runs when configured");
            if fair.in_flight >= fair.window {
                return;
            }
            let Some((_, _, (token, call))) = fair.drr.pop() else {
                return;
            };
            let now = self.now();
            match self.ce.invoke(&mut self.nodes[node.ix()].hw, now, &call) {
                Invocation::Rejected(e) => self.resolve(token, TokenState::Failed(e.into())),
                Invocation::Refused => self.resolve(token, TokenState::Refused),
                Invocation::Dispatched(d) => {
                    self.node(node).fair.as_mut().unwrap().in_flight += 1;
                    let state = match d.output {
                        Ok(out) => {
                            TokenState::Ready(Completion { output: Output::Kernel(out), finish_ns: d.span.finish, unit: d.unit })
                        }
                        Err(e) => TokenState::Failed(e.into()),
                    };
                    self.schedule(d.span.finish, move |w| {
                        w.resolve(token, state);
                        w.node(node).fair.as_mut().unwrap().in_flight -= 1;
                        w.fair_pump(node);
                    });
                }
            }
        }
    }
}
