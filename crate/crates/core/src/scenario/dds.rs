use std::cell::RefCell;
use std::rc::Rc;

use rand::{Rng, RngCore};
use sha2::{Digest, Sha256};

use super::{arrival_ns, fixed, require, sleep_until, submit_retrying, Report, Setup};
use crate::error::Error;
use crate::hwmodel::{Link, UnitClass};
use crate::network::MsgType;
use crate::runtime::{NodeId, Output, TokenState};
use crate::storage::{decode_response, FileOp};

#[derive(Debug, Clone)]
pub struct DdsParams {
    pub requests: u64,
    pub offload_fractions: Vec<f64>,
    pub request_sizes: Vec<u32>,
    pub files: u64,
    /// Requests per second.
    pub rate: u64,
    pub connections: u32,
}

impl Default for DdsParams {
    fn default() -> Self {
        DdsParams {
            requests: 10_000,
            offload_fractions: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            request_sizes: vec![8192],
            files: 16,
            rate: 20_000,
            connections: 4,
        }
    }
}

/// Each file holds this many request-sized blocks.
const BLOCKS_PER_FILE: u64 = 16;

struct Outcome {
    conn: usize,
    seq: u32,
    latency: u64,
    ok: bool,
    digest: [u8; 32],
}

/// Remote clients read file blocks from a storage server whose DPU serves
/// resident files itself and forwards the rest to the host. The trace is
/// the same for every offload fraction, so only the routing changes.
pub fn dds(setup: &Setup, params: &DdsParams) -> Result<Report, Error> {
    require(params.requests > 0, "requests must be > 0")?;
    require(params.files > 0, "files must be > 0")?;
    require(params.rate > 0, "rate must be > 0")?;
    require(params.connections > 0, "connections must be > 0")?;
    require(!params.request_sizes.is_empty() && params.request_sizes.iter().all(|&s| s > 0), "request sizes must be nonempty and > 0")?;
    require(
        !params.offload_fractions.is_empty() && params.offload_fractions.iter().all(|f| (0.0..=1.0).contains(f)),
        "offload fractions must be nonempty and within [0, 1]",
    )?;
    let mut report = Report::new(
        setup,
        "dds",
        &[
            "request_bytes",
            "offload_fraction",
            "requests",
            "offloaded",
            "forwarded",
            "host_core_eq",
            "mean_latency_ns",
            "pcie_per_req",
            "copies_per_req",
            "seq_gaps",
            "seq_dups",
            "errors",
            "payload_sha256",
        ],
    );
    report.param("requests", params.requests);
    report.param("files", params.files);
    report.param("rate", params.rate);
    report.param("connections", params.connections);

    for (si, &size) in params.request_sizes.iter().enumerate() {
        let file_len = u64::from(size) * BLOCKS_PER_FILE;
        let mut rng = setup.rng(si as u64);
        let contents: Vec<Vec<u8>> = (0..params.files)
            .map(|_| {
                let mut d = vec![0u8; file_len as usize];
                rng.fill_bytes(&mut d);
                d
            })
            .collect();
        let trace: Vec<(u64, u64)> = (0..params.requests)
            .map(|_| (rng.gen_range(0..params.files), rng.gen_range(0..BLOCKS_PER_FILE) * u64::from(size)))
            .collect();
        let trace = Rc::new(trace);
        let contents = Rc::new(contents);

        for &fraction in &params.offload_fractions {
            let rt = setup.runtime(2)?;
            let (server, client) = (NodeId(0), NodeId(1));
            let resident = (fraction * params.files as f64).round() as u64;
            for (f, data) in contents.iter().enumerate() {
                let f = f as u64;
                rt.fs_create(server, f, file_len)?;
                rt.preload(server, f, 0, data.clone())?;
                rt.set_host_only(server, f, f >= resident);
            }
            let channels = (0..params.connections).map(|_| rt.ne_open(client, server)).collect::<Result<Vec<_>, _>>()?;

            let outcomes: Rc<RefCell<Vec<Option<Outcome>>>> =
                Rc::new(RefCell::new((0..params.requests).map(|_| None).collect()));
            let (driver, sink, trace, contents) = (rt.clone(), outcomes.clone(), trace.clone(), contents.clone());
            let rate = params.rate;
            rt.spawn(async move {
                for (i, &(file, offset)) in trace.iter().enumerate() {
                    let at = arrival_ns(i as u64, rate);
                    sleep_until(&driver, at).await;
                    let conn = i % channels.len();
                    let ch = channels[conn];
                    let req = FileOp::read(file, offset, size).encode();
                    let sent = submit_retrying(&driver, || driver.ne_send_typed(&ch, MsgType::StorageReq, req.clone())).await;
                    sent.expect("request on an open channel");
                    let (recv, _) = submit_retrying(&driver, || driver.ne_recv(&ch)).await.expect("recv on an open channel");
                    let (rt, sink, contents) = (driver.clone(), sink.clone(), contents.clone());
                    driver.spawn(async move {
                        let _ = rt.wait(recv).await;
                        let TokenState::Ready(c) = rt.take_token(recv) else {
                            return;
                        };
                        let Output::Message(m) = c.output else {
                            return;
                        };
                        let want = &contents[file as usize][offset as usize..(offset + u64::from(size)) as usize];
                        let ok = matches!(decode_response(&m.payload), Ok((true, body)) if body == want);
                        sink.borrow_mut()[i] = Some(Outcome {
                            conn,
                            seq: m.header.seq,
                            latency: c.finish_ns.saturating_sub(at),
                            ok,
                            digest: Sha256::digest(&m.payload).into(),
                        });
                    });
                }
            });
            rt.run()?;

            let n = params.requests;
            let mut last_seq = vec![0u32; params.connections as usize];
            let (mut gaps, mut dups, mut errors, mut total) = (0u64, 0u64, 0u64, 0u64);
            let mut hasher = Sha256::new();
            for o in outcomes.borrow().iter() {
                let Some(o) = o else {
                    errors += 1;
                    continue;
                };
                let last = &mut last_seq[o.conn];
                if o.seq <= *last {
                    dups += 1;
                } else {
                    gaps += u64::from(o.seq - *last - 1);
                    *last = o.seq;
                }
                errors += u64::from(!o.ok);
                total += o.latency;
                hasher.update(o.digest);
            }
            let horizon = (u128::from(n) * 1_000_000_000 / u128::from(params.rate)) as u64;
            let stats = rt.director_stats(server);
            let ledger = rt.ledger(server);
            let report_u = ledger.report(horizon);
            report.row(vec![
                size.to_string(),
                fixed(fraction, 2),
                n.to_string(),
                stats.offloaded.to_string(),
                stats.forwarded.to_string(),
                fixed(report_u.core_equivalents(UnitClass::HostCpu), 4),
                (total / n).to_string(),
                fixed(ledger.link(Link::Pcie).transfers as f64 / n as f64, 4),
                fixed(ledger.copy_count() as f64 / n as f64, 4),
                gaps.to_string(),
                dups.to_string(),
                errors.to_string(),
                hex::encode(hasher.finalize()),
            ]);
        }
    }
    Ok(report)
}
