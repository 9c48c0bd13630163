use std::cell::{Cell, RefCell};
use std::rc::Rc;

use super::{corpus, require, Report, Setup};
use crate::compute::kernels::deflate;
use crate::compute::{KernelCall, KernelOp, Placement};
use crate::error::Error;
use crate::hwmodel::{UnitClass, PAGE_SIZE};
use crate::runtime::{NodeId, Output, Pipeline, PipelineMode, PipelineStats, SprocCtx, Stage, TokenState};

#[derive(Debug, Clone)]
pub struct RcsParams {
    pub pages: u64,
    /// `None` runs both modes.
    pub pipeline: Option<bool>,
}

impl Default for RcsParams {
    fn default() -> Self {
        RcsParams { pages: 64, pipeline: None }
    }
}

const FILE: u64 = 7;

#[derive(Default)]
struct Counters {
    asic: Cell<u64>,
    dpu_cpu: Cell<u64>,
    bytes_sent: Cell<u64>,
}

fn page_no(item: &[u8]) -> Result<u64, Error> {
    let b: [u8; 8] = item.try_into().map_err(|_| Error::Invalid("page item must be 8 bytes".into()))?;
    Ok(u64::from_le_bytes(b))
}

async fn compress_page(ctx: SprocCtx, page: Vec<u8>, counters: Rc<Counters>) -> Result<Vec<u8>, Error> {
    let op = KernelOp::Compress(page);
    let done = match ctx.kernel(KernelCall::new(op.clone(), Placement::Specified(UnitClass::DpuAsic))).await {
        Err(Error::Refused) => {
            let c = ctx.kernel(KernelCall::new(op, Placement::Specified(UnitClass::DpuCpu))).await?;
            counters.dpu_cpu.set(counters.dpu_cpu.get() + 1);
            c
        }
        other => {
            let c = other?;
            counters.asic.set(counters.asic.get() + 1);
            c
        }
    };
    done.output.into_bytes().ok_or_else(|| Error::Invalid("compress returned no bytes".into()))
}

/// A DPU sproc reads file pages, compresses each (on the accelerator when a
/// slot is free, else on a DPU core) and streams them to a client that
/// decompresses and checks every page.
pub fn read_compress_send(setup: &Setup, params: &RcsParams) -> Result<Report, Error> {
    require(params.pages > 0, "pages must be > 0")?;
    let mut report = Report::new(
        setup,
        "read-compress-send",
        &["pipeline", "pages", "makespan_ns", "asic_kernels", "dpu_cpu_kernels", "bytes_in", "bytes_sent", "verified"],
    );
    report.param("pages", params.pages);
    let modes: &[bool] = match params.pipeline {
        Some(true) => &[true],
        Some(false) => &[false],
        None => &[true, false],
    };
    let content = corpus(&mut setup.rng(0), (params.pages * PAGE_SIZE) as usize);
    for &pipelined in modes {
        let rt = setup.runtime(2)?;
        let (server, client) = (NodeId(0), NodeId(1));
        rt.fs_create(server, FILE, params.pages * PAGE_SIZE)?;
        rt.preload(server, FILE, 0, content.clone())?;
        let out_ch = rt.ne_open(server, client)?;
        let in_ch = rt.ne_accept(client).ok_or_else(|| Error::Invalid("no connection to accept".into()))?;

        let counters = Rc::new(Counters::default());
        let stats: Rc<RefCell<Option<PipelineStats>>> = Rc::default();
        let pipeline = {
            let (c1, c2) = (counters.clone(), counters.clone());
            Pipeline::new()
                .stage(Stage::new("read", |ctx: SprocCtx, item: Vec<u8>| async move {
                    let p = page_no(&item)?;
                    ctx.file_read(FILE, p * PAGE_SIZE, PAGE_SIZE as u32).await
                }))
                .stage(Stage::new("compress", move |ctx, page| compress_page(ctx, page, c1.clone())))
                .stage(Stage::new("send", move |ctx: SprocCtx, data: Vec<u8>| {
                    let c = c2.clone();
                    async move {
                        c.bytes_sent.set(c.bytes_sent.get() + data.len() as u64);
                        ctx.send(&out_ch, data).await?;
                        Ok(Vec::new())
                    }
                }))
        };
        let mode = if pipelined { PipelineMode::Pipelined } else { PipelineMode::Sequential };
        let pages = params.pages;
        let sink = stats.clone();
        rt.register_sproc("read_compress_send", move |ctx, _req| {
            let (pipeline, sink) = (pipeline.clone(), sink.clone());
            async move {
                let items = (0..pages).map(|p| p.to_le_bytes().to_vec()).collect();
                let s = ctx.run_pipeline(&pipeline, items, mode).await;
                if let Some(Err(e)) = s.outputs.iter().find(|o| o.is_err()) {
                    return Err(e.clone());
                }
                *sink.borrow_mut() = Some(s);
                Ok(Vec::new())
            }
        })?;
        let recvs = (0..pages).map(|_| rt.ne_recv(&in_ch)).collect::<Result<Vec<_>, _>>()?;
        let token = rt.invoke_sproc(server, "read_compress_send", Vec::new())?;
        rt.run()?;
        if let TokenState::Failed(e) = rt.token_state(token) {
            return Err(e);
        }
        let stats = stats.borrow_mut().take().ok_or_else(|| Error::Invalid("sproc did not finish".into()))?;

        let mut verified = true;
        for (p, r) in recvs.iter().enumerate() {
            let page = &content[p * PAGE_SIZE as usize..(p + 1) * PAGE_SIZE as usize];
            verified &= match rt.token_state(*r) {
                TokenState::Ready(c) => match c.output {
                    Output::Message(m) => deflate::decompress(&m.payload).is_ok_and(|d| d == page),
                    _ => false,
                },
                _ => false,
            };
        }
        report.row(vec![
            if pipelined { "on" } else { "off" }.into(),
            pages.to_string(),
            stats.makespan_ns.to_string(),
            counters.asic.get().to_string(),
            counters.dpu_cpu.get().to_string(),
            (pages * PAGE_SIZE).to_string(),
            counters.bytes_sent.get().to_string(),
            verified.to_string(),
        ]);
    }
    Ok(report)
}
