use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use skeap::experiment::{run_experiment, ExperimentSpec};
use skeap::sim::{ProtocolKind, SimMode};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Protocol {
    Skeap,
    SkeapPlus,
    Kselect,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Sync,
    Async,
}

/// Run a protocol over a sweep of network sizes and seeds.
#[derive(Parser, Debug)]
#[command(version)]
struct Args {
    #[arg(long, value_enum)]
    protocol: Protocol,
    /// Network sizes, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    /// Number of seeds per size; seeds are 0..SEEDS.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long, default_value_t = 1)]
    lambda: u32,
    #[arg(long)]
    priorities: Option<u64>,
    /// Priority universe n^q for skeap-plus, element count n^q for kselect.
    #[arg(long)]
    q: Option<u32>,
    #[arg(long, value_enum, default_value = "sync")]
    mode: Mode,
    #[arg(long, default_value_t = 4)]
    epochs: u32,
    #[arg(long)]
    c_delta: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write every trace event.
    #[arg(long)]
    trace: bool,
}

fn main() -> ExitCode {
    let a = Args::parse();
    let protocol = match a.protocol {
        Protocol::Skeap => ProtocolKind::Skeap,
        Protocol::SkeapPlus => ProtocolKind::SkeapPlus,
        Protocol::Kselect => ProtocolKind::Kselect,
    };
    let mut spec = ExperimentSpec::new(protocol, a.n, a.seeds);
    spec.lambda = a.lambda;
    spec.priorities = a.priorities;
    spec.q = a.q;
    spec.mode = match a.mode {
        Mode::Sync => SimMode::Sync,
        Mode::Async => SimMode::Async,
    };
    spec.epochs = a.epochs;
    spec.c_delta = a.c_delta;
    spec.out = a.out;
    spec.keep_trace = a.trace;
    let report = match run_experiment(&spec) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    println!("{:>6} {:>5} {:>10} {:>8} {:>6} {:>6} {:>6}", "n", "runs", "mean_time", "max_time", "cong", "bits", "pass");
    let mut ns: Vec<usize> = report.runs.iter().map(|r| r.n).collect();
    ns.dedup();
    for n in ns {
        let rs: Vec<_> = report.runs.iter().filter(|r| r.n == n).collect();
        let mean = rs.iter().map(|r| r.time as f64).sum::<f64>() / rs.len() as f64;
        println!(
            "{:>6} {:>5} {:>10.1} {:>8} {:>6} {:>6} {:>6}",
            n,
            rs.len(),
            mean,
            rs.iter().map(|r| r.time).max().unwrap_or(0),
            rs.iter().map(|r| r.max_congestion).max().unwrap_or(0),
            rs.iter().map(|r| r.max_message_bits).max().unwrap_or(0),
            rs.iter().filter(|r| r.passed).count()
        );
    }
    if let Some(s) = &report.summary {
        println!(
            "time ~ {:.2} log2 n + {:.2} (R^2 {:.3}); bits ~ {:.2} log2 n + {:.2} (R^2 {:.3}); congestion/lambda {:.1}",
            s.time_fit.slope,
            s.time_fit.intercept,
            s.time_fit.r2,
            s.bits_fit.slope,
            s.bits_fit.intercept,
            s.bits_fit.r2,
            s.max_congestion_per_lambda
        );
    }
    for r in report.runs.iter().filter(|r| !r.passed) {
        eprintln!("FAILED n={} seed={}", r.n, r.seed);
    }
    if report.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
