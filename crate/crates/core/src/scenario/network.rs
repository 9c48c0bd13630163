use std::cell::RefCell;
use std::rc::Rc;

use super::{arrival_ns, fixed, require, sleep_until, submit_retrying, Report, Setup};
use crate::error::Error;
use crate::hwmodel::UnitClass;
use crate::runtime::{DataPath, NodeId, TokenState};

#[derive(Debug, Clone)]
pub struct NetworkParams {
    /// Messages per second.
    pub rates: Vec<u64>,
    pub payload: u32,
    pub duration_ms: u64,
}

impl Default for NetworkParams {
    fn default() -> Self {
        NetworkParams { rates: vec![100_000, 250_000, 500_000, 1_000_000], payload: 8192, duration_ms: 10 }
    }
}

/// Open-loop one-way messages from node 0 to node 1, with both ends on the
/// same data path. Host time is summed over both nodes.
pub fn bench_network(setup: &Setup, params: &NetworkParams) -> Result<Report, Error> {
    require(!params.rates.is_empty() && params.rates.iter().all(|&r| r > 0), "rates must be nonempty and > 0")?;
    require(params.payload > 0, "payload must be > 0")?;
    require(params.duration_ms > 0, "duration must be > 0")?;
    let mut report = Report::new(
        setup,
        "bench-network",
        &[
            "mode",
            "rate_msgs_per_s",
            "payload_bytes",
            "messages",
            "host_busy_ns_per_msg",
            "host_core_eq",
            "dpu_core_eq",
            "mean_latency_ns",
        ],
    );
    report.param("rates", params.rates.iter().map(u64::to_string).collect::<Vec<_>>().join(";"));
    report.param("payload", params.payload);
    report.param("duration_ms", params.duration_ms);
    let horizon = params.duration_ms * 1_000_000;
    for (path, name) in [(DataPath::Offloaded, "offloaded"), (DataPath::HostStack, "host")] {
        for &rate in &params.rates {
            let rt = setup.runtime(2)?;
            let (src, dst) = (NodeId(0), NodeId(1));
            rt.set_net_path(src, path);
            rt.set_net_path(dst, path);
            let client = rt.ne_open(src, dst)?;
            let server = rt.ne_accept(dst).ok_or_else(|| Error::Invalid("no connection to accept".into()))?;
            let messages = (u128::from(rate) * u128::from(params.duration_ms) / 1000) as u64;
            // (delivered, summed latency)
            let done = Rc::new(RefCell::new((0u64, 0u64)));
            let (driver, log) = (rt.clone(), done.clone());
            let payload = vec![0x5a; params.payload as usize];
            rt.spawn(async move {
                for i in 0..messages {
                    let at = arrival_ns(i, rate);
                    sleep_until(&driver, at).await;
                    let sent = submit_retrying(&driver, || driver.ne_send(&client, payload.clone())).await;
                    sent.expect("send on an open channel");
                    let (recv, _) = submit_retrying(&driver, || driver.ne_recv(&server)).await.expect("recv on an open channel");
                    let (rt, log) = (driver.clone(), log.clone());
                    driver.spawn(async move {
                        let _ = rt.wait(recv).await;
                        if let TokenState::Ready(c) = rt.take_token(recv) {
                            let mut l = log.borrow_mut();
                            l.0 += 1;
                            l.1 += c.finish_ns.saturating_sub(at);
                        }
                    });
                }
            });
            rt.run()?;
            let (delivered, total) = *done.borrow();
            if delivered != messages {
                return Err(Error::Invalid(format!("{} of {messages} messages not delivered", messages - delivered)));
            }
            let (a, b) = (rt.report(src, horizon), rt.report(dst, horizon));
            let host_busy = a.busy_ns(UnitClass::HostCpu) + b.busy_ns(UnitClass::HostCpu);
            let n = messages.max(1);
            report.row(vec![
                name.into(),
                rate.to_string(),
                params.payload.to_string(),
                messages.to_string(),
                (host_busy / n).to_string(),
                fixed(a.core_equivalents(UnitClass::HostCpu) + b.core_equivalents(UnitClass::HostCpu), 4),
                fixed(a.core_equivalents(UnitClass::DpuCpu) + b.core_equivalents(UnitClass::DpuCpu), 4),
                (total / n).to_string(),
            ]);
        }
    }
    Ok(report)
}
