//! Streamed multi-stage execution: item k may enter stage i+1 as soon as it
//! leaves stage i, with at most `window` items inside a stage at once.

use std::cell::RefCell;
use std::future::{poll_fn, Future};
use std::rc::Rc;
use std::task::{Poll, Waker};

use futures::future::{join_all, LocalBoxFuture};
use futures::FutureExt;

use super::sproc::SprocCtx;
use crate::error::Error;

pub const DEFAULT_WINDOW: usize = 8;

type StageFn = Rc<dyn Fn(SprocCtx, Vec<u8>) -> LocalBoxFuture<'static, Result<Vec<u8>, Error>>>;

#[derive(Clone)]
pub struct Stage {
    pub name: String,
    pub window: usize,
    f: StageFn,
}

impl Stage {
    pub fn new<F, Fut>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(SprocCtx, Vec<u8>) -> Fut + 'static,
        Fut: Future<Output = Result<Vec<u8>, Error>> + 'static,
    {
        Stage { name: name.into(), window: DEFAULT_WINDOW, f: Rc::new(move |ctx, item| f(ctx, item).boxed_local()) }
    }

    /// Clamped to at least 1.
    pub fn window(mut self, window: usize) -> Self {
        self.window = window.max(1);
        self
    }
}

#[derive(Clone, Default)]
pub struct Pipeline {
    stages: Vec<Stage>,
}

impl Pipeline {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stage(mut self, stage: Stage) -> Self {
        self.stages.push(stage);
        self
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PipelineMode {
    Pipelined,
    /// Each item runs through every stage before the next item starts.
    Sequential,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineStats {
    pub makespan_ns: u64,
    /// Sum over items of the time each spent inside the stage.
    pub stage_busy_ns: Vec<u64>,
    pub completed: usize,
    pub failed: usize,
    /// Per item, in input order.
    pub outputs: Vec<Result<Vec<u8>, Error>>,
}

impl PipelineStats {
    pub fn is_partial(&self) -> bool {
        self.failed > 0
    }
}

struct Gate {
    next: usize,
    active: usize,
    window: usize,
    waiters: Vec<Waker>,
}

impl Gate {
    fn wake_all(&mut self) {
        for w in self.waiters.drain(..) {
            w.wake();
        }
    }
}

type Gates = Rc<RefCell<Vec<Gate>>>;

/// Waits for `item`'s turn at `stage`. A skipping item only advances the
/// entry order and never occupies a window slot.
fn enter(gates: &Gates, stage: usize, item: usize, occupy: bool) -> impl Future<Output = ()> + '_ {
    poll_fn(move |cx| {
        let mut all = gates.borrow_mut();
        let g = &mut all[stage];
        if g.next == item && (!occupy || g.active < g.window) {
            g.next += 1;
            if occupy {
                g.active += 1;
            }
            g.wake_all();
            Poll::Ready(())
        } else {
            if !g.waiters.iter().any(|w| w.will_wake(cx.waker())) {
                g.waiters.push(cx.waker().clone());
            }
            Poll::Pending
        }
    })
}

fn leave(gates: &Gates, stage: usize) {
    let mut all = gates.borrow_mut();
    all[stage].active -= 1;
    all[stage].wake_all();
}

pub(crate) async fn run_pipeline(
    ctx: &SprocCtx,
    pipeline: &Pipeline,
    items: Vec<Vec<u8>>,
    mode: PipelineMode,
) -> PipelineStats {
    let start = ctx.now();
    let busy = Rc::new(RefCell::new(vec![0u64; pipeline.len()]));
    let outputs = match mode {
        PipelineMode::Sequential => {
            let mut outputs = Vec::with_capacity(items.len());
            for item in items {
                let mut data = Ok(item);
                for (s, stage) in pipeline.stages.iter().enumerate() {
                    let Ok(d) = data else { break };
                    let t0 = ctx.now();
                    data = (stage.f)(ctx.clone(), d).await;
                    busy.borrow_mut()[s] += ctx.now() - t0;
                }
                outputs.push(data);
            }
            outputs
        }
        PipelineMode::Pipelined => {
            let gates: Gates = Rc::new(RefCell::new(
                pipeline
                    .stages
                    .iter()
                    .map(|s| Gate { next: 0, active: 0, window: s.window.max(1), waiters: Vec::new() })
                    .collect(),
            ));
            let runs = items.into_iter().enumerate().map(|(k, item)| {
                let gates = gates.clone();
                let busy = busy.clone();
                async move {
                    let mut data = Ok(item);
                    for (s, stage) in pipeline.stages.iter().enumerate() {
                        match data {
                            Err(e) => {
                                enter(&gates, s, k, false).await;
                                data = Err(e);
                            }
                            Ok(d) => {
                                enter(&gates, s, k, true).await;
                                let t0 = ctx.now();
                                data = (stage.f)(ctx.clone(), d).await;
                                busy.borrow_mut()[s] += ctx.now() - t0;
                                leave(&gates, s);
                            }
                        }
                    }
                    data
                }
            });
            join_all(runs).await
        }
    };
    let failed = outputs.iter().filter(|o| o.is_err()).count();
    PipelineStats {
        makespan_ns: ctx.now() - start,
        stage_busy_ns: busy.take(),
        completed: outputs.len() - failed,
        failed,
        outputs,
    }
}
