use super::{corpus, require, Report, Setup};
use crate::compute::{KernelCall, KernelOp, Placement};
use crate::error::Error;
use crate::hwmodel::UnitClass;
use crate::runtime::{NodeId, TokenState};

#[derive(Debug, Clone)]
pub struct CompressParams {
    pub sizes: Vec<u64>,
}

impl Default for CompressParams {
    fn default() -> Self {
        CompressParams { sizes: vec![64 << 10, 1 << 20, 16 << 20] }
    }
}

/// Latency of one compression of `size` bytes on each unit class, each on
/// an otherwise idle node. A class that cannot run it reports `refused`.
pub fn bench_compress(setup: &Setup, params: &CompressParams) -> Result<Report, Error> {
    require(!params.sizes.is_empty() && params.sizes.iter().all(|&s| s > 0), "sizes must be nonempty and > 0")?;
    let mut report = Report::new(
        setup,
        "bench-compress",
        &["size_bytes", "cpu_latency_ns", "dpu_cpu_latency_ns", "asic_latency_ns", "compressed_bytes"],
    );
    report.param("sizes", params.sizes.iter().map(u64::to_string).collect::<Vec<_>>().join(";"));
    for (i, &size) in params.sizes.iter().enumerate() {
        let data = corpus(&mut setup.rng(i as u64), size as usize);
        let mut cells = vec![size.to_string()];
        let mut compressed = None;
        for class in [UnitClass::HostCpu, UnitClass::DpuCpu, UnitClass::DpuAsic] {
            let rt = setup.runtime(1)?;
            let call = KernelCall::new(KernelOp::Compress(data.clone()), Placement::Specified(class));
            let token = rt.invoke_kernel(NodeId(0), &call)?;
            rt.run()?;
            match rt.token_state(token) {
                TokenState::Ready(c) => {
                    cells.push(c.finish_ns.to_string());
                    if compressed.is_none() {
                        compressed = c.output.into_bytes().map(|b| b.len());
                    }
                }
                TokenState::Refused => cells.push("refused".into()),
                TokenState::Failed(e) => return Err(e),
                TokenState::Pending => return Err(Error::Stalled(1)),
            }
        }
        cells.push(compressed.unwrap_or(0).to_string());
        report.row(cells);
    }
    Ok(report)
}
