use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dpdpu_core::hwmodel::{builtin_names, resolve_profile, CostDefaults, UnitClass};
use dpdpu_core::scenario::{self, IoMode, Report, Setup};

#[derive(Parser)]
#[command(name = "dpdpu", version, about = "Host + DPU offload simulator")]
struct Cli {
    /// Built-in profile name or path to a profile TOML.
    #[arg(long, global = true, default_value = "bf2")]
    profile: String,
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Cost defaults TOML; the built-in set when omitted.
    #[arg(long, global = true)]
    defaults: Option<PathBuf>,
    /// Persist node 0's emulated SSD to this file.
    #[arg(long, global = true)]
    backing: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compression latency on host cores, DPU cores and the accelerator.
    BenchCompress {
        #[arg(long, value_delimiter = ',', value_parser = parse_size, default_value = "64KiB,1MiB,16MiB")]
        sizes: Vec<u64>,
    },
    /// Host cost of local page reads, kernel stack vs offloaded.
    BenchStorageIo {
        /// Pages per second.
        #[arg(long, default_value_t = 450_000)]
        rate: u64,
        #[arg(long, value_enum, default_value_t = Mode::Both)]
        mode: Mode,
        #[arg(long, default_value_t = 100)]
        duration_ms: u64,
    },
    /// Host cost of messaging, kernel stack vs offloaded.
    BenchNetwork {
        /// Messages per second.
        #[arg(long, value_delimiter = ',', default_value = "100000,250000,500000,1000000")]
        rates: Vec<u64>,
        #[arg(long, value_parser = parse_size, default_value = "8KiB")]
        payload: u64,
        #[arg(long, default_value_t = 10)]
        duration_ms: u64,
    },
    /// DPU sproc that reads, compresses and sends file pages.
    ReadCompressSend {
        #[arg(long, default_value_t = 64)]
        pages: u64,
        #[arg(long, value_enum, default_value_t = Toggle::Both)]
        pipeline: Toggle,
    },
    /// Filter a remote table at the client or on the server DPU.
    Pushdown {
        #[arg(long, default_value_t = 100_000)]
        rows: u64,
        #[arg(long, default_value_t = 0.1)]
        selectivity: f64,
    },
    /// Remote storage server with a partially offloaded file set.
    Dds {
        #[arg(long, default_value_t = 10_000)]
        requests: u64,
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
        offload_fraction: Vec<f64>,
        #[arg(long, value_delimiter = ',', value_parser = parse_size, default_value = "8KiB")]
        request_size: Vec<u64>,
        #[arg(long, default_value_t = 16)]
        files: u64,
        /// Requests per second.
        #[arg(long, default_value_t = 20_000)]
        rate: u64,
        #[arg(long, default_value_t = 4)]
        connections: u32,
    },
    /// Inspect hardware profiles.
    Profiles {
        #[command(subcommand)]
        action: ProfilesCmd,
    },
    /// Derive the host storage-stack cycles per page from one measured point
    /// and emit a defaults file using it.
    Calibrate {
        /// Pages per second at the measured point.
        #[arg(long)]
        rate: f64,
        /// Host cores busy at that rate.
        #[arg(long)]
        cores: f64,
        /// Host clock in Hz; the profile's host clock when omitted.
        #[arg(long)]
        clock: Option<f64>,
    },
}

#[derive(Subcommand)]
enum ProfilesCmd {
    List,
    Show { name: String },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Host,
    Offload,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
    Both,
}

/// Byte counts with an optional binary suffix: `4096`, `64KiB`, `1MiB`, `2G`.
fn parse_size(s: &str) -> Result<u64, String> {
    let s = s.trim();
    let split = s.find(|c: char| !c.is_ascii_digit()).unwrap_or(s.len());
    let (num, unit) = s.split_at(split);
    let n: u64 = num.parse().map_err(|_| format!("bad size `{s}`"))?;
    let shift = match unit.to_ascii_lowercase().as_str() {
        "" | "b" => 0,
        "k" | "kib" | "kb" => 10,
        "m" | "mib" | "mb" => 20,
        "g" | "gib" | "gb" => 30,
        _ => return Err(format!("bad size unit in `{s}`")),
    };
    n.checked_mul(1 << shift).ok_or_else(|| format!("size `{s}` overflows"))
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<(), String> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| format!("writing {}: {e}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), String> {
    let defaults = match &cli.defaults {
        Some(path) => {
            let src = fs::read_to_string(path).map_err(|e| format!("reading {}: {e}", path.display()))?;
            CostDefaults::load(&src).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => CostDefaults::builtin(),
    };
    let scenario_setup = || -> Result<Setup, String> {
        let profile = resolve_profile(&cli.profile).map_err(|e| e.to_string())?;
        let setup = Setup::new(profile, defaults.clone(), cli.seed);
        Ok(match &cli.backing {
            Some(p) => setup.with_backing(p),
            None => setup,
        })
    };
    let report: Report = match &cli.command {
        Command::Profiles { action: ProfilesCmd::List } => {
            let names: Vec<&str> = builtin_names().collect();
            return emit(cli.out.as_ref(), &format!("{}\n", names.join("\n")));
        }
        Command::Profiles { action: ProfilesCmd::Show { name } } => {
            let p = resolve_profile(name).map_err(|e| e.to_string())?;
            return emit(cli.out.as_ref(), &p.to_toml());
        }
        Command::Calibrate { rate, cores, clock } => {
            let clock = match clock {
                Some(c) => *c,
                None => {
                    let p = resolve_profile(&cli.profile).map_err(|e| e.to_string())?;
                    p.clock_hz(UnitClass::HostCpu).ok_or("profile has no host cores")? as f64
                }
            };
            let cycles = scenario::calibrate(*rate, *cores, clock).map_err(|e| e.to_string())?;
            eprintln!("io_cycles_per_page = {cycles}");
            return emit(cli.out.as_ref(), &defaults.with_io_cycles_per_page(cycles).to_toml());
        }
        Command::BenchCompress { sizes } => {
            scenario::bench_compress(&scenario_setup()?, &scenario::CompressParams { sizes: sizes.clone() })
        }
        Command::BenchStorageIo { rate, mode, duration_ms } => {
            let mode = match mode {
                Mode::Host => IoMode::Host,
                Mode::Offload => IoMode::Offload,
                Mode::Both => IoMode::Both,
            };
            let params = scenario::StorageIoParams { rate: *rate, mode, duration_ms: *duration_ms };
            scenario::bench_storage_io(&scenario_setup()?, &params)
        }
        Command::BenchNetwork { rates, payload, duration_ms } => {
            let payload = u32::try_from(*payload).map_err(|_| "payload must fit in 32 bits".to_string())?;
            let params = scenario::NetworkParams { rates: rates.clone(), payload, duration_ms: *duration_ms };
            scenario::bench_network(&scenario_setup()?, &params)
        }
        Command::ReadCompressSend { pages, pipeline } => {
            let pipeline = match pipeline {
                Toggle::On => Some(true),
                Toggle::Off => Some(false),
                Toggle::Both => None,
            };
            scenario::read_compress_send(&scenario_setup()?, &scenario::RcsParams { pages: *pages, pipeline })
        }
        Command::Pushdown { rows, selectivity } => {
            let params = scenario::PushdownParams { rows: *rows, selectivity: *selectivity };
            scenario::pushdown(&scenario_setup()?, &params)
        }
        Command::Dds { requests, offload_fraction, request_size, files, rate, connections } => {
            let request_sizes = request_size
                .iter()
                .map(|&s| u32::try_from(s).map_err(|_| format!("request size {s} must fit in 32 bits")))
                .collect::<Result<Vec<_>, _>>()?;
            let params = scenario::DdsParams {
                requests: *requests,
                offload_fractions: offload_fraction.clone(),
                request_sizes,
                files: *files,
                rate: *rate,
                connections: *connections,
            };
            scenario::dds(&scenario_setup()?, &params)
        }
    }
    .map_err(|e| e.to_string())?;
    emit(cli.out.as_ref(), &report.to_csv())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dpdpu: error: {e}");
            ExitCode::FAILURE
        }
    }
}
