//! Canned experiments over the engines. Each returns a [`Report`] whose CSV
//! form carries enough metadata to reproduce it.

mod compress;
mod dds;
mod network;
mod pushdown;
mod rcs;
mod storage_io;

use std::fmt::Display;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use compress::{bench_compress, CompressParams};
pub use dds::{dds, DdsParams};
pub use network::{bench_network, NetworkParams};
pub use pushdown::{pushdown, PushdownParams};
pub use rcs::{read_compress_send, RcsParams};
pub use storage_io::{bench_storage_io, IoMode, StorageIoParams};

use crate::error::{Error, NetError};
use crate::hwmodel::{CostDefaults, HardwareProfile};
use crate::runtime::{Runtime, TokenId};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything a scenario run depends on besides its own parameters.
#[derive(Debug, Clone)]
pub struct Setup {
    pub profile: HardwareProfile,
    pub defaults: CostDefaults,
    pub seed: u64,
    /// File that node 0's SSD persists to.
    pub backing: Option<PathBuf>,
}

impl Setup {
    pub fn new(profile: HardwareProfile, defaults: CostDefaults, seed: u64) -> Self {
        Setup { profile, defaults, seed, backing: None }
    }

    pub fn with_backing(mut self, path: impl Into<PathBuf>) -> Self {
        self.backing = Some(path.into());
        self
    }

    pub(crate) fn runtime(&self, nodes: usize) -> Result<Runtime, Error> {
        let mut b = Runtime::builder(self.profile.clone()).defaults(self.defaults.clone()).nodes(nodes);
        if let Some(path) = &self.backing {
            b = b.backing(path);
        }
        b.build()
    }

    pub(crate) fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub scenario: &'static str,
    meta: Vec<(String, String)>,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Report {
    pub(crate) fn new(setup: &Setup, scenario: &'static str, header: &[&'static str]) -> Self {
        let meta = vec![
            ("tool".into(), format!("dpdpu {TOOL_VERSION}")),
            ("scenario".into(), scenario.into()),
            ("profile".into(), setup.profile.name.clone()),
            ("seed".into(), setup.seed.to_string()),
            ("defaults_sha256".into(), setup.defaults.hash().into()),
        ];
        Report { scenario, meta, header: header.to_vec(), rows: Vec::new() }
    }

    pub(crate) fn param(&mut self, key: &str, value: impl Display) {
        self.meta.push((key.into(), value.to_string()));
    }

    pub(crate) fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// One column's cells, in row order.
    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let i = self.header.iter().position(|h| *h == name)?;
        Some(self.rows.iter().map(|r| r[i].as_str()).collect())
    }

    /// `# key=value` preamble lines, then a header row and data rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            out.push_str(&format!("# {k}={v}\n"));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory csv");
        for r in &self.rows {
            w.write_record(r).expect("in-memory csv");
        }
        out.push_str(&String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is utf-8"));
        out
    }
}

/// Fixed-point rendering so reports are byte-stable.
pub(crate) fn fixed(x: f64, places: usize) -> String {
    format!("{x:.places$}")
}

/// Issue time of the `i`th arrival of an open-loop source at `rate`/s.
pub(crate) fn arrival_ns(i: u64, rate: u64) -> u64 {
    (u128::from(i) * 1_000_000_000 / u128::from(rate)) as u64
}

/// Compressible text drawn from a small vocabulary.
pub(crate) fn corpus(rng: &mut ChaCha8Rng, len: usize) -> Vec<u8> {
    const WORDS: [&str; 16] = [
        "page", "tuple", "extent", "offload", "queue", "the", "of", "storage", "network", "kernel", "a", "dpu",
        "host", "ring", "file", "request",
    ];
    let mut out = Vec::with_capacity(len + 16);
    while out.len() < len {
        out.extend_from_slice(WORDS[rng.gen_range(0..WORDS.len())].as_bytes());
        out.push(if rng.gen_ratio(1, 12) { b'\n' } else { b' ' });
    }
    out.truncate(len);
    out
}

pub(crate) async fn sleep_until(rt: &Runtime, t: u64) {
    let _ = rt.wait(rt.timer(t)).await;
}

/// Retries a host submission every microsecond while its ring is full.
pub(crate) async fn submit_retrying(
    rt: &Runtime,
    mut submit: impl FnMut() -> Result<TokenId, Error>,
) -> Result<(TokenId, u64), Error> {
    let mut retries = 0;
    loop {
        match submit() {
            Err(Error::Net(NetError::Backpressure)) => {
                retries += 1;
                sleep_until(rt, rt.now() + 1_000).await;
            }
            other => return other.map(|t| (t, retries)),
        }
    }
}

pub(crate) fn require(ok: bool, msg: impl Into<String>) -> Result<(), Error> {
    if ok {
        Ok(())
    } else {
        Err(Error::Invalid(msg.into()))
    }
}

/// Host storage-stack calibration: cycles per page that make `rate` pages/s
/// cost `cores` fully busy cores at `clock_hz`. Rounded to 1e-6 cycles so
/// that decimal inputs like 2.7 give clean constants.
pub fn calibrate(rate: f64, cores: f64, clock_hz: f64) -> Result<f64, Error> {
    require(rate > 0.0 && clock_hz > 0.0 && cores >= 0.0, "rate and clock must be > 0 and cores >= 0")?;
    Ok((cores * clock_hz / rate * 1e6).round() / 1e6)
}
