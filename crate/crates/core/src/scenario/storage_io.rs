use std::cell::RefCell;
use std::rc::Rc;

use rand::Rng;

use super::{arrival_ns, fixed, require, sleep_until, submit_retrying, Report, Setup};
use crate::error::Error;
use crate::hwmodel::{UnitClass, PAGE_SIZE};
use crate::runtime::{DataPath, NodeId, TokenState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IoMode {
    Host,
    Offload,
    Both,
}

#[derive(Debug, Clone)]
pub struct StorageIoParams {
    /// Page reads per second.
    pub rate: u64,
    pub mode: IoMode,
    pub duration_ms: u64,
}

impl Default for StorageIoParams {
    fn default() -> Self {
        StorageIoParams { rate: 450_000, mode: IoMode::Both, duration_ms: 100 }
    }
}

const FILE_PAGES: u64 = 8192;

/// Open-loop 8 KiB page reads from the local SSD, through the host kernel
/// stack or through the offloaded storage engine.
pub fn bench_storage_io(setup: &Setup, params: &StorageIoParams) -> Result<Report, Error> {
    require(params.rate > 0, "rate must be > 0")?;
    require(params.duration_ms > 0, "duration must be > 0")?;
    let mut report = Report::new(
        setup,
        "bench-storage-io",
        &["mode", "rate_pages_per_s", "duration_ms", "pages", "host_core_eq", "dpu_core_eq", "mean_latency_ns", "retries"],
    );
    report.param("rate", params.rate);
    report.param("duration_ms", params.duration_ms);
    let modes: &[(DataPath, &str)] = match params.mode {
        IoMode::Host => &[(DataPath::HostStack, "host")],
        IoMode::Offload => &[(DataPath::Offloaded, "offload")],
        IoMode::Both => &[(DataPath::HostStack, "host"), (DataPath::Offloaded, "offload")],
    };
    for &(path, name) in modes {
        let rt = setup.runtime(1)?;
        let node = NodeId(0);
        rt.set_storage_path(node, path);
        rt.fs_create(node, 1, FILE_PAGES * PAGE_SIZE)?;
        let horizon = params.duration_ms * 1_000_000;
        let pages = u128::from(params.rate) * u128::from(params.duration_ms) / 1000;
        let pages = pages as u64;
        // (completed, summed latency)
        let done = Rc::new(RefCell::new((0u64, 0u64)));
        let retries = Rc::new(RefCell::new(0u64));
        let driver = rt.clone();
        let (log, retry_count) = (done.clone(), retries.clone());
        let mut rng = setup.rng(0);
        let offsets: Vec<u64> = (0..pages).map(|_| rng.gen_range(0..FILE_PAGES) * PAGE_SIZE).collect();
        let rate = params.rate;
        rt.spawn(async move {
            for (i, off) in offsets.into_iter().enumerate() {
                let at = arrival_ns(i as u64, rate);
                sleep_until(&driver, at).await;
                let submitted = submit_retrying(&driver, || driver.file_read(node, 1, off, PAGE_SIZE as u32)).await;
                let (t, r) = submitted.expect("page read in range");
                *retry_count.borrow_mut() += r;
                let (rt, log) = (driver.clone(), log.clone());
                driver.spawn(async move {
                    let _ = rt.wait(t).await;
                    if let TokenState::Ready(c) = rt.take_token(t) {
                        let mut l = log.borrow_mut();
                        l.0 += 1;
                        l.1 += c.finish_ns - at;
                    }
                });
            }
        });
        rt.run()?;
        let (completed, total) = *done.borrow();
        if completed != pages {
            return Err(Error::Invalid(format!("{} of {pages} page reads did not complete", pages - completed)));
        }
        let r = rt.report(node, horizon);
        report.row(vec![
            name.into(),
            params.rate.to_string(),
            params.duration_ms.to_string(),
            pages.to_string(),
            fixed(r.core_equivalents(UnitClass::HostCpu), 4),
            fixed(r.core_equivalents(UnitClass::DpuCpu), 4),
            (total / pages.max(1)).to_string(),
            retries.borrow().to_string(),
        ]);
    }
    Ok(report)
}
