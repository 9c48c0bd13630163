//! End-to-end acceptance checks. Runs as a plain binary so every criterion
//! prints its own PASS/FAIL line; exits nonzero if any fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use dpdpu_core::compute::kernels::{cipher, deflate, regex};
use dpdpu_core::compute::{ComputeEngine, Drr, KernelKind};
use dpdpu_core::hwmodel::{builtin, ComputeUnitId, CostDefaults, Node, TenantId, UnitClass};
use dpdpu_core::network::{ring, Descriptor};
use dpdpu_core::runtime::{NodeId, Pipeline, PipelineMode, Runtime, SprocCtx, Stage};
use dpdpu_core::testing::{ect_oracle, regex_oracle};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

type Check = Result<String, String>;
type Criterion<'a> = (&'a str, Box<dyn Fn() -> Check + 'a>);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn col(&self, name: &str) -> Vec<&str> {
        let i = self.header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
        self.rows.iter().map(|r| r[i].as_str()).collect()
    }

    fn num(&self, name: &str) -> Vec<f64> {
        self.col(name).iter().map(|c| c.parse().unwrap_or(f64::NAN)).collect()
    }

    fn select(&self, name: &str, value: &str) -> Table {
        let i = self.header.iter().position(|h| h == name).unwrap();
        Table { header: self.header.clone(), rows: self.rows.iter().filter(|r| r[i] == value).cloned().collect() }
    }
}

fn dpdpu(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_dpdpu")).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("dpdpu {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr).trim()));
    }
    String::from_utf8(out.stdout).map_err(|e| e.to_string())
}

fn parse(csv_text: &str) -> Result<Table, String> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(csv_text.as_bytes());
    let header = r.headers().map_err(|e| e.to_string())?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(String::from).collect()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    Ok(Table { header, rows })
}

fn scenario(args: &[&str]) -> Result<Table, String> {
    parse(&dpdpu(args)?)
}

fn within(limit_s: u64, start: Instant) -> Result<Duration, String> {
    let took = start.elapsed();
    ensure!(took < Duration::from_secs(limit_s), "took {took:.2?}, limit {limit_s}s");
    Ok(took)
}

fn calibration_anchor(dir: &Path) -> Check {
    let start = Instant::now();
    let defaults = dir.join("calibrated.toml");
    dpdpu(&["calibrate", "--rate", "450000", "--cores", "2.7", "--out", defaults.to_str().unwrap()])?;
    let t = scenario(&["--defaults", defaults.to_str().unwrap(), "bench-storage-io", "--rate", "450000", "--mode", "host"])?;
    let eq = t.num("host_core_eq");
    ensure!(eq.len() == 1, "expected one row, got {}", eq.len());
    ensure!((eq[0] - 2.7).abs() <= 0.05, "host core-equivalents {} not within 2.7 +- 0.05", eq[0]);
    let took = within(10, start)?;
    Ok(format!("host core-eq {:.4} ({took:.2?})", eq[0]))
}

fn accelerator_gap() -> Check {
    let start = Instant::now();
    let t = scenario(&["--profile", "bf2", "bench-compress", "--sizes", "64KiB,1MiB,16MiB"])?;
    let (cpu, asic) = (t.num("cpu_latency_ns"), t.num("asic_latency_ns"));
    let mut worst: f64 = 0.0;
    for (i, (c, a)) in cpu.iter().zip(&asic).enumerate() {
        ensure!(a.is_finite() && *a <= c / 10.0, "row {i}: asic {a} > cpu {c} / 10");
        worst = worst.max(a / c);
    }
    for w in cpu.windows(2).chain(asic.windows(2)) {
        ensure!(w[0] < w[1], "latency not increasing with size: {} then {}", w[0], w[1]);
    }
    let took = within(30, start)?;
    Ok(format!("worst asic/cpu ratio {worst:.4} ({took:.2?})"))
}

fn network_trend() -> Check {
    let start = Instant::now();
    let t = scenario(&["bench-network", "--rates", "100000,250000,500000,1000000", "--payload", "8KiB"])?;
    let off = t.select("mode", "offloaded");
    let host = t.select("mode", "host");
    let off_per = off.num("host_busy_ns_per_msg");
    ensure!(off_per.windows(2).all(|w| w[0] == w[1]), "offloaded per-message host cost varies: {off_per:?}");
    let rates = host.num("rate_msgs_per_s");
    let eq = host.num("host_core_eq");
    let slope = eq[0] / rates[0];
    for (r, e) in rates.iter().zip(&eq) {
        let want = slope * r;
        ensure!((e - want).abs() <= 0.01 * want, "host-stack core-eq {e} at rate {r} is not linear (expected {want:.4})");
    }
    let top = host.num("host_busy_ns_per_msg").last().copied().unwrap() / off_per.last().copied().unwrap();
    ensure!(top >= 5.0, "gap at top rate only {top:.2}x");
    let took = within(10, start)?;
    Ok(format!("offloaded {} ns/msg, gap {top:.1}x at top rate ({took:.2?})", off_per[0]))
}

fn dds_round_trips() -> Check {
    let start = Instant::now();
    let t = scenario(&[
        "dds",
        "--requests",
        "1000",
        "--request-size",
        "4KiB,8KiB,64KiB,256KiB",
        "--offload-fraction",
        "0,1",
    ])?;
    let mut notes = Vec::new();
    for size in ["4096", "8192", "65536", "262144"] {
        let s = t.select("request_bytes", size);
        let (fwd, off) = (s.select("offload_fraction", "0.00"), s.select("offload_fraction", "1.00"));
        ensure!(fwd.rows.len() == 1 && off.rows.len() == 1, "missing rows for size {size}");
        ensure!(fwd.num("offloaded")[0] == 0.0 && off.num("forwarded")[0] == 0.0, "size {size}: routes not pure");
        let (lf, lo) = (fwd.num("mean_latency_ns")[0], off.num("mean_latency_ns")[0]);
        ensure!(lo < lf, "size {size}: offloaded latency {lo} >= forwarded {lf}");
        let extra = fwd.num("pcie_per_req")[0] - off.num("pcie_per_req")[0];
        ensure!(extra == 2.0, "size {size}: forwarding adds {extra} pcie crossings, not 2");
        ensure!(fwd.col("payload_sha256") == off.col("payload_sha256"), "size {size}: payloads differ across paths");
        ensure!(fwd.num("errors")[0] == 0.0 && off.num("errors")[0] == 0.0, "size {size}: responses had errors");
        notes.push(format!("{size}B {lo:.0}<{lf:.0}"));
    }
    let took = within(10, start)?;
    Ok(format!("{} ({took:.2?})", notes.join(", ")))
}

fn partial_offload() -> Check {
    let start = Instant::now();
    let t = scenario(&["dds", "--requests", "10000", "--offload-fraction", "0,0.25,0.5,0.75,1"])?;
    let eq = t.num("host_core_eq");
    ensure!(eq.len() == 5, "expected 5 rows");
    ensure!(eq.windows(2).all(|w| w[1] <= w[0]), "host core-eq increases somewhere: {eq:?}");
    ensure!(eq[4] < eq[0], "no saving at full offload: {eq:?}");
    for col in ["seq_gaps", "seq_dups", "errors"] {
        ensure!(t.num(col).iter().all(|&x| x == 0.0), "nonzero {col}: {:?}", t.col(col));
    }
    let sums = t.col("payload_sha256");
    ensure!(sums.iter().all(|s| *s == sums[0]), "payload checksum differs across fractions");
    let took = within(30, start)?;
    Ok(format!("host core-eq {eq:?} ({took:.2?})"))
}

const CASES: usize = 1000;

fn prop_deflate(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for case in 0..CASES {
        let len = rng.gen_range(0..8192);
        let data: Vec<u8> = if case % 2 == 0 {
            (0..len).map(|_| rng.gen()).collect()
        } else {
            (0..len).map(|_| b"abcab "[rng.gen_range(0..6)]).collect()
        };
        let back = deflate::decompress(&deflate::compress(&data)).map_err(|e| format!("case {case}: {e}"))?;
        ensure!(back == data, "deflate case {case} did not round-trip");
    }
    Ok(())
}

fn prop_cipher(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for case in 0..CASES {
        let mut data = vec![0u8; rng.gen_range(0..4096)];
        rng.fill_bytes(&mut data);
        let key: [u8; 32] = rng.gen();
        let sealed = cipher::encrypt(&data, &key).map_err(|e| e.to_string())?;
        ensure!(cipher::decrypt(&sealed, &key).map_err(|e| e.to_string())? == data, "cipher case {case}");
    }
    Ok(())
}

fn prop_regex(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for case in 0..CASES {
        let c = regex_oracle::random_case(rng);
        let got: Vec<_> = regex::regex_match(&c.hay, &c.pattern)
            .map_err(|e| format!("case {case}: {e}"))?
            .into_iter()
            .map(|m| (m.offset, m.len))
            .collect();
        ensure!(got == c.expected(), "regex case {case}: {:?} on {:?}", c.pattern, String::from_utf8_lossy(&c.hay));
    }
    Ok(())
}

fn prop_ring(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for case in 0..CASES {
        let capacity = 1usize << rng.gen_range(0..9);
        let count = rng.gen_range(1..2000u64);
        let (mut tx, mut rx) = ring::<Descriptor>(capacity);
        let producer = thread::spawn(move || {
            for i in 0..count {
                let mut d = Descriptor::new(i, !i, (i % 7) as u8);
                while let Err(full) = tx.push(d) {
                    d = full.0;
                    thread::yield_now();
                }
            }
        });
        let mut next = 0;
        while next < count {
            match rx.pop() {
                Some(d) => {
                    ensure!(d.token == next && d.slot == !next, "ring case {case}: got {} expected {next}", d.token);
                    next += 1;
                }
                None => thread::yield_now(),
            }
        }
        producer.join().map_err(|_| "producer panicked")?;
        ensure!(rx.pop().is_none(), "ring case {case}: extra item");
    }
    Ok(())
}

fn prop_ect(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let engine = ComputeEngine::new(Arc::new(CostDefaults::builtin()));
    for case in 0..CASES {
        let profile = Arc::new(builtin(["bf2", "bf3", "cpu-only"][case % 3]).unwrap());
        let mut node = Node::new(profile.clone());
        for _ in 0..rng.gen_range(0..40) {
            let class = UnitClass::PREFERENCE[rng.gen_range(0..3)];
            let count = profile.unit_count(class);
            if count > 0 {
                let unit = ComputeUnitId::new(class, rng.gen_range(0..count));
                node.reserve(unit, rng.gen_range(0..50_000), rng.gen_range(0..200_000), None);
            }
        }
        let kind = KernelKind::ALL[rng.gen_range(0..KernelKind::ALL.len())];
        let bytes = rng.gen_range(0..(1u64 << 20));
        let now = rng.gen_range(0..100_000);
        let alts = ect_oracle::alternatives(&profile, engine.defaults(), |u| node.available_at(u), now, kind, bytes);
        let want = ect_oracle::expected(&alts);
        let (unit, span) = engine.schedule_kernel(&mut node, now, kind, bytes, None);
        ensure!((unit, span.finish) == (want.unit, want.completion), "ect case {case}: {unit:?} vs {:?}", want.unit);
        ensure!(alts.iter().all(|a| span.finish <= a.completion), "ect case {case}: dominated");
    }
    Ok(())
}

/// At every point where service passes from B back to A, the weighted
/// service gap is below one maximal item.
fn prop_drr(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let (a, b) = (TenantId(0), TenantId(1));
    for case in 0..CASES {
        let quantum = rng.gen_range(1..200);
        let max_cost = rng.gen_range(1..500u64);
        let (wa, wb) = (rng.gen_range(1..5u64), rng.gen_range(1..5u64));
        let mut d = Drr::new(quantum);
        d.set_weight(a, wa);
        d.set_weight(b, wb);
        for _ in 0..400 {
            d.push(a, rng.gen_range(1..=max_cost), ());
            d.push(b, rng.gen_range(1..=max_cost), ());
        }
        let mut sent = [0u64; 2];
        let mut last = None;
        for _ in 0..200 {
            let (t, c, _) = d.pop().ok_or("drr drained early")?;
            if last == Some(b) && t == a {
                let gap = (sent[0] as f64 / wa as f64 - sent[1] as f64 / wb as f64).abs();
                ensure!(gap < max_cost as f64, "drr case {case}: gap {gap} >= {max_cost}");
            }
            sent[t.0 as usize] += c;
            last = Some(t);
        }
    }
    Ok(())
}

fn occupy_stage(unit: ComputeUnitId, ns: u64) -> Stage {
    Stage::new("occupy", move |ctx: SprocCtx, item| async move {
        ctx.occupy(unit, ns).await?;
        Ok(item)
    })
}

fn makespans(times: &[u64], n: usize, window: usize) -> Result<(u64, u64), String> {
    let mut d = CostDefaults::builtin();
    d.dpu.sproc_dispatch_cycles = 0.0;
    let rt = Runtime::builder(builtin("bf2").unwrap()).defaults(d).nodes(1).build().map_err(|e| e.to_string())?;
    let p = times
        .iter()
        .enumerate()
        .fold(Pipeline::new(), |p, (i, &t)| p.stage(occupy_stage(ComputeUnitId::dpu(i as u32 + 1), t).window(window)));
    let ctx = rt.ctx(NodeId(0));
    let items = vec![vec![0u8]; n];
    rt.block_on(async move {
        let a = ctx.run_pipeline(&p, items.clone(), PipelineMode::Pipelined).await;
        let b = ctx.run_pipeline(&p, items, PipelineMode::Sequential).await;
        (a.makespan_ns, b.makespan_ns)
    })
    .map_err(|e| e.to_string())
}

fn prop_pipeline(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for case in 0..CASES {
        let s = rng.gen_range(1..6usize);
        let n = rng.gen_range(1..16usize);
        let window = rng.gen_range(1..9);
        if case % 2 == 0 {
            let t = rng.gen_range(1..10_000u64);
            let (piped, seq) = makespans(&vec![t; s], n, window)?;
            let want = (n + s - 1) as u64 * t;
            ensure!(piped == want, "pipeline case {case}: n={n} s={s} t={t}: {piped} != {want}");
            ensure!(seq == (n * s) as u64 * t, "pipeline case {case}: sequential {seq}");
        } else {
            let times: Vec<u64> = (0..s).map(|_| rng.gen_range(1..10_000)).collect();
            let (piped, seq) = makespans(&times, n, window)?;
            ensure!(piped <= seq, "pipeline case {case}: pipelined {piped} > sequential {seq} for {times:?}");
        }
    }
    Ok(())
}

fn property_suites() -> Check {
    let start = Instant::now();
    type Suite = fn(&mut ChaCha8Rng) -> Result<(), String>;
    let suites: [(&str, Suite); 7] = [
        ("deflate", prop_deflate),
        ("cipher", prop_cipher),
        ("regex", prop_regex),
        ("ring", prop_ring),
        ("ect", prop_ect),
        ("drr", prop_drr),
        ("pipeline", prop_pipeline),
    ];
    for (i, (name, suite)) in suites.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xacce97 + i as u64);
        suite(&mut rng).map_err(|e| format!("{name}: {e}"))?;
    }
    let took = within(60, start)?;
    Ok(format!("{} suites x {CASES} cases ({took:.2?})", suites.len()))
}

fn determinism() -> Check {
    let start = Instant::now();
    let runs: [&[&str]; 6] = [
        &["bench-compress", "--sizes", "64KiB,256KiB"],
        &["bench-storage-io", "--duration-ms", "5"],
        &["bench-network", "--duration-ms", "2"],
        &["read-compress-send", "--pages", "16"],
        &["pushdown", "--rows", "20000"],
        &["--seed", "7", "dds", "--requests", "1000"],
    ];
    for args in runs {
        let a = Sha256::digest(dpdpu(args)?);
        let b = Sha256::digest(dpdpu(args)?);
        ensure!(a == b, "{} produced different CSV on rerun", args.join(" "));
    }
    let took = within(5, start)?;
    Ok(format!("{} scenarios byte-identical ({took:.2?})", runs.len()))
}

fn main() -> ExitCode {
    let dir = tempfile::tempdir().expect("temp dir");
    let criteria: [Criterion; 7] = [
        ("1 calibration anchor", Box::new(|| calibration_anchor(dir.path()))),
        ("2 accelerator gap", Box::new(accelerator_gap)),
        ("3 network offload trend", Box::new(network_trend)),
        ("4 dds round-trip saving", Box::new(dds_round_trips)),
        ("5 partial-offload monotonicity", Box::new(partial_offload)),
        ("6 property suites", Box::new(property_suites)),
        ("7 determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        match check() {
            Ok(detail) => println!("criterion {name}: PASS - {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {name}: FAIL - {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
