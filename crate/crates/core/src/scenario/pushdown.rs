use std::cell::RefCell;
use std::rc::Rc;

use rand::Rng;
use sha2::{Digest, Sha256};

use super::{fixed, require, Report, Setup};
use crate::compute::kernels::relational::{decode_rows, encode_rows, CmpOp, ColumnType, Predicate, RowBatch, Schema, Value};
use crate::compute::{KernelCall, KernelOp, Placement};
use crate::error::Error;
use crate::hwmodel::{Link, UnitClass};
use crate::runtime::{NodeId, Output, SprocCtx};

#[derive(Debug, Clone)]
pub struct PushdownParams {
    pub rows: u64,
    pub selectivity: f64,
}

impl Default for PushdownParams {
    fn default() -> Self {
        PushdownParams { rows: 100_000, selectivity: 0.1 }
    }
}

type Answer = Result<(RowBatch, u64), Error>;

const TABLE: u64 = 3;
const DOMAIN: i64 = 1000;

fn filtered(call_out: Output) -> Result<RowBatch, Error> {
    match call_out {
        Output::Kernel(crate::compute::KernelOutput::Rows(r)) => Ok(r),
        other => Err(Error::Invalid(format!("filter returned {other:?}"))),
    }
}

/// Filters a table stored on node 0 for a client on node 1, either by
/// shipping every row to the client or by filtering on the server DPU and
/// shipping only the matches.
pub fn pushdown(setup: &Setup, params: &PushdownParams) -> Result<Report, Error> {
    require(params.rows > 0 && params.rows <= u64::from(u32::MAX), "rows must be in 1..=2^32-1")?;
    require((0.0..=1.0).contains(&params.selectivity), "selectivity must be within [0, 1]")?;
    let mut report = Report::new(
        setup,
        "pushdown",
        &[
            "mode",
            "rows",
            "selectivity",
            "result_rows",
            "network_bytes",
            "client_host_busy_ns",
            "server_host_busy_ns",
            "latency_ns",
            "result_sha256",
        ],
    );
    report.param("rows", params.rows);
    report.param("selectivity", fixed(params.selectivity, 4));

    let mut rng = setup.rng(0);
    let schema = Schema::new([("id", ColumnType::Int64), ("v", ColumnType::Int64)]);
    let rows = (0..params.rows as i64).map(|id| vec![Value::Int(id), Value::Int(rng.gen_range(0..DOMAIN))]).collect();
    let table = encode_rows(&RowBatch::new(schema, rows)?);
    let cut = (params.selectivity * DOMAIN as f64).round() as i64;
    let predicate = Predicate::cmp("v", CmpOp::Lt, Value::Int(cut));

    for (name, push) in [("host", false), ("pushdown", true)] {
        let rt = setup.runtime(2)?;
        let (server, client) = (NodeId(0), NodeId(1));
        rt.fs_create(server, TABLE, table.len() as u64)?;
        rt.preload(server, TABLE, 0, table.clone())?;
        let out_ch = rt.ne_open(server, client)?;
        let in_ch = rt.ne_accept(client).ok_or_else(|| Error::Invalid("no connection to accept".into()))?;

        let (len, pred) = (table.len() as u32, predicate.clone());
        rt.register_sproc("scan", move |ctx: SprocCtx, _req| {
            let pred = pred.clone();
            async move {
                let raw = ctx.file_read(TABLE, 0, len).await?;
                let payload = if push {
                    let batch = decode_rows(&raw)?;
                    let op = KernelOp::Filter { rows: batch, predicate: pred };
                    let done = ctx.kernel(KernelCall::new(op, Placement::Specified(UnitClass::DpuCpu))).await?;
                    encode_rows(&filtered(done.output)?)
                } else {
                    raw
                };
                ctx.send(&out_ch, payload).await?;
                Ok(Vec::new())
            }
        })?;

        let result: Rc<RefCell<Option<Answer>>> = Rc::default();
        let (driver, sink, pred) = (rt.clone(), result.clone(), predicate.clone());
        rt.spawn(async move {
            let outcome = async {
                let recv = driver.ne_recv(&in_ch)?;
                driver.invoke_sproc(server, "scan", Vec::new())?;
                let msg = driver.wait(recv).await?;
                let Output::Message(m) = msg.output else {
                    return Err(Error::Invalid("expected a message".into()));
                };
                let batch = decode_rows(&m.payload)?;
                if push {
                    return Ok((batch, msg.finish_ns));
                }
                let op = KernelOp::Filter { rows: batch, predicate: pred };
                let t = driver.invoke_kernel(client, &KernelCall::new(op, Placement::Specified(UnitClass::HostCpu)))?;
                let done = driver.wait(t).await?;
                Ok((filtered(done.output)?, done.finish_ns))
            };
            *sink.borrow_mut() = Some(outcome.await);
        });
        rt.run()?;
        let (batch, latency) = result.borrow_mut().take().ok_or_else(|| Error::Invalid("query did not finish".into()))??;
        let (sl, cl) = (rt.ledger(server), rt.ledger(client));
        report.row(vec![
            name.into(),
            params.rows.to_string(),
            fixed(params.selectivity, 4),
            batch.len().to_string(),
            sl.link(Link::Nic).bytes.to_string(),
            cl.class_busy_ns(UnitClass::HostCpu).to_string(),
            sl.class_busy_ns(UnitClass::HostCpu).to_string(),
            latency.to_string(),
            hex::encode(Sha256::digest(encode_rows(&batch))),
        ]);
    }
    Ok(report)
}
