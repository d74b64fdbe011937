//! Sweeps over `(n, seed)`, per-run verdicts and scaling fits.
//!
//! Output layout under `out`:
//! `runs.jsonl`, `verdicts.jsonl`, `metrics/<protocol>-n<n>-s<seed>.json`,
//! `traces/<protocol>-n<n>-s<seed>.jsonl` (with `keep_trace`),
//! `summary.json` and `summary.csv`.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::consistency::{order_by_serial, verdict, OperationRecord, TieRule, Verdict};
use crate::kselect::{run_kselect, KParams, KStats};
use crate::sim::hash::{hash64, tag};
use crate::sim::{Fault, MetricsSummary, ProtocolKind, SimConfig, SimMode, Trace};
use crate::skeap::run_skeap;
use crate::skeap_plus::{constructed_order, phase_outcomes, run_skeap_plus_with, PlusConfig, SkeapPlusSim};
use crate::Topology;

/// Largest element count placed for a KSelect run.
pub const KSELECT_M_CAP: u64 = 200_000;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error("n={n} seed={seed}: {fault}")]
    Run { n: usize, seed: u64, fault: Fault },
    #[error("a fit needs at least 3 distinct n, got {0}")]
    InsufficientPoints(usize),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentSpec {
    pub protocol: ProtocolKind,
    pub ns: Vec<usize>,
    /// Runs use seeds `0..seeds`.
    pub seeds: u64,
    pub lambda: u32,
    /// Priority range. Defaults: 2 for SKEAP, `n^q` for SKEAP+, `m^2` for KSelect.
    pub priorities: Option<u64>,
    /// SKEAP+: priorities `1..=n^q`. KSelect: `m = n^q` elements, capped at
    /// [`KSELECT_M_CAP`].
    pub q: Option<u32>,
    pub mode: SimMode,
    pub epochs: u32,
    pub c_delta: Option<f64>,
    pub out: Option<PathBuf>,
    pub keep_trace: bool,
}

impl ExperimentSpec {
    pub fn new(protocol: ProtocolKind, ns: Vec<usize>, seeds: u64) -> Self {
        ExperimentSpec {
            protocol,
            ns,
            seeds,
            lambda: 1,
            priorities: None,
            q: None,
            mode: SimMode::Sync,
            epochs: 4,
            c_delta: None,
            out: None,
            keep_trace: false,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::Invalid(m.to_string()));
        if self.ns.is_empty() {
            return bad("no values of n");
        }
        if let Some(&n) = self.ns.iter().find(|&&n| n < 2) {
            return bad(&format!("n must be at least 2, got {n}"));
        }
        if self.seeds == 0 {
            return bad("seeds must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if self.priorities == Some(0) {
            return bad("priorities must be positive");
        }
        if self.q == Some(0) {
            return bad("q must be positive");
        }
        if self.c_delta.is_some_and(|c| !(c > 0.0 && c.is_finite())) {
            return bad("c_delta must be positive");
        }
        Ok(())
    }

    fn sim(&self, n: usize, seed: u64) -> SimConfig {
        let mut c = SimConfig::new(self.protocol, n, seed);
        c.lambda = self.lambda;
        c.mode = self.mode;
        c.epochs = self.epochs;
        c.keep_trace = self.keep_trace;
        c.priority_count = match self.protocol {
            ProtocolKind::Skeap => self.priorities.unwrap_or(2),
            ProtocolKind::SkeapPlus => self.priorities.unwrap_or_else(|| pow_sat(n as u64, self.q.unwrap_or(2))),
            ProtocolKind::Kselect => self.priorities.unwrap_or_else(|| self.kselect_m(n).saturating_mul(self.kselect_m(n))),
        };
        c
    }

    pub fn kselect_m(&self, n: usize) -> u64 {
        pow_sat(n as u64, self.q.unwrap_or(2)).min(KSELECT_M_CAP)
    }

    fn kparams(&self) -> KParams {
        let mut p = KParams::default();
        if let Some(c) = self.c_delta {
            p.c_delta = c;
        }
        p
    }
}

fn pow_sat(b: u64, e: u32) -> u64 {
    b.saturating_pow(e)
}

/// Rank selected for a KSelect run.
pub fn kselect_rank(n: usize, seed: u64, m: u64) -> u64 {
    1 + hash64(tag::WORKLOAD, &[n as u64, m], seed) % m
}

#[derive(Clone, Debug, Serialize)]
pub struct RunRecord {
    pub protocol: ProtocolKind,
    pub n: usize,
    pub seed: u64,
    pub mode: SimMode,
    /// Rounds in sync mode, scheduler steps in async mode.
    pub time: u64,
    pub max_congestion: u32,
    pub max_message_bits: u32,
    pub sent: u64,
    /// Heap operations for SKEAP and SKEAP+, placed elements for KSelect.
    pub ops: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_match: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kselect: Option<KStats>,
    pub passed: bool,
    pub trace_digest: u64,
}

struct RunOutput {
    record: RunRecord,
    metrics: MetricsSummary,
    trace: Trace,
}

fn run_one(spec: &ExperimentSpec, n: usize, seed: u64) -> Result<RunOutput, Fault> {
    let sim = spec.sim(n, seed);
    let rec = |time, metrics: &MetricsSummary, ops, trace_digest| RunRecord {
        protocol: spec.protocol,
        n,
        seed,
        mode: spec.mode,
        time,
        max_congestion: metrics.max_congestion,
        max_message_bits: metrics.max_message_bits,
        sent: metrics.sent,
        ops,
        verdict: None,
        oracle_match: None,
        kselect: None,
        passed: false,
        trace_digest,
    };
    match spec.protocol {
        ProtocolKind::Skeap => {
            let o = run_skeap(&sim)?;
            let v = verdict(&o.records, &order_by_serial(&o.records), TieRule::PriorityOnly);
            let mut r = rec(o.time, &o.metrics, o.records.len() as u64, o.trace_digest);
            r.passed = v.serializable && v.locally_consistent && v.heap_consistent;
            r.verdict = Some(v);
            Ok(RunOutput { record: r, metrics: o.metrics, trace: o.trace })
        }
        ProtocolKind::SkeapPlus => {
            let topo = Topology::build(n, seed).map_err(|e| Fault::protocol(e.to_string()))?;
            let mut pc = PlusConfig::from_sim(&sim);
            pc.kselect = spec.kparams();
            let o = run_skeap_plus_with(SkeapPlusSim::new(topo, pc), &sim)?;
            let v = plus_verdict(&o.records);
            let mut r = rec(o.time, &o.metrics, o.records.len() as u64, o.trace_digest);
            let phases_ok = phase_outcomes(&o.records).iter().all(|p| p.matches());
            r.passed = v.serializable && v.heap_consistent && phases_ok;
            r.oracle_match = Some(phases_ok);
            r.verdict = Some(v);
            Ok(RunOutput { record: r, metrics: o.metrics, trace: o.trace })
        }
        ProtocolKind::Kselect => {
            let m = spec.kselect_m(n);
            let k = kselect_rank(n, seed, m);
            let o = run_kselect(&sim, m as usize, k, spec.kparams())?;
            let mut r = rec(o.time, &o.metrics, m, o.trace_digest);
            r.passed = o.matches_oracle();
            r.oracle_match = Some(r.passed);
            r.kselect = Some(o.stats.clone());
            Ok(RunOutput { record: r, metrics: o.metrics, trace: o.trace })
        }
    }
}

/// SKEAP+ verdict on the constructed order. Local consistency is reported
/// but not required.
pub fn plus_verdict(records: &[OperationRecord]) -> Verdict {
    verdict(records, &constructed_order(records), TieRule::Strict)
}

#[derive(Clone, Debug, Serialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

/// Least-squares line through `(x, y)`. A series with no spread in `y` has
/// `r2 = 1`.
pub fn fit_linear(xs: &[f64], ys: &[f64]) -> Result<Fit, ExperimentError> {
    let n = xs.len();
    if n != ys.len() || n < 2 {
        return Err(ExperimentError::InsufficientPoints(n));
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(ExperimentError::InsufficientPoints(1));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(Fit { slope, intercept, r2, points: n })
}

#[derive(Clone, Debug, Serialize)]
pub struct NRow {
    pub n: usize,
    pub runs: usize,
    pub mean_time: f64,
    pub max_time: u64,
    pub max_congestion: u32,
    pub max_message_bits: u32,
    pub pass_rate: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub protocol: ProtocolKind,
    pub rows: Vec<NRow>,
    /// Mean time per n against log2 n.
    pub time_fit: Fit,
    /// Largest message per n against log2 n.
    pub bits_fit: Fit,
    pub max_congestion_per_lambda: f64,
    pub pass_rate: f64,
}

impl Summary {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,runs,mean_time,max_time,max_congestion,max_message_bits,pass_rate\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{:.3},{},{},{},{:.4}\n",
                r.n, r.runs, r.mean_time, r.max_time, r.max_congestion, r.max_message_bits, r.pass_rate
            ));
        }
        s
    }
}

/// Per-n table plus fits of time and message size against log2 n.
pub fn summarize(runs: &[RunRecord], lambda: u32) -> Result<Summary, ExperimentError> {
    let mut ns: Vec<usize> = runs.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < 3 {
        return Err(ExperimentError::InsufficientPoints(ns.len()));
    }
    let rows: Vec<NRow> = ns
        .iter()
        .map(|&n| {
            let rs: Vec<&RunRecord> = runs.iter().filter(|r| r.n == n).collect();
            NRow {
                n,
                runs: rs.len(),
                mean_time: rs.iter().map(|r| r.time as f64).sum::<f64>() / rs.len() as f64,
                max_time: rs.iter().map(|r| r.time).max().unwrap_or(0),
                max_congestion: rs.iter().map(|r| r.max_congestion).max().unwrap_or(0),
                max_message_bits: rs.iter().map(|r| r.max_message_bits).max().unwrap_or(0),
                pass_rate: rs.iter().filter(|r| r.passed).count() as f64 / rs.len() as f64,
            }
        })
        .collect();
    let xs: Vec<f64> = rows.iter().map(|r| (r.n as f64).log2()).collect();
    let time_fit = fit_linear(&xs, &rows.iter().map(|r| r.mean_time).collect::<Vec<_>>())?;
    let bits_fit = fit_linear(&xs, &rows.iter().map(|r| r.max_message_bits as f64).collect::<Vec<_>>())?;
    let max_c = rows.iter().map(|r| r.max_congestion).max().unwrap_or(0);
    Ok(Summary {
        protocol: runs[0].protocol,
        time_fit,
        bits_fit,
        max_congestion_per_lambda: max_c as f64 / lambda.max(1) as f64,
        pass_rate: runs.iter().filter(|r| r.passed).count() as f64 / runs.len() as f64,
        rows,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub runs: Vec<RunRecord>,
    /// Present when the sweep covers at least 3 values of n.
    pub summary: Option<Summary>,
}

impl ExperimentReport {
    pub fn all_passed(&self) -> bool {
        self.runs.iter().all(|r| r.passed)
    }
}

fn protocol_name(p: ProtocolKind) -> &'static str {
    match p {
        ProtocolKind::Skeap => "skeap",
        ProtocolKind::SkeapPlus => "skeap-plus",
        ProtocolKind::Kselect => "kselect",
    }
}

fn create(path: &Path) -> io::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Runs every `(n, seed)` in order and writes the output files when `out`
/// is set. Reruns of the same spec produce identical files.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport, ExperimentError> {
    spec.validate()?;
    let name = protocol_name(spec.protocol);
    let mut files = match &spec.out {
        Some(dir) => {
            fs::create_dir_all(dir.join("metrics"))?;
            if spec.keep_trace {
                fs::create_dir_all(dir.join("traces"))?;
            }
            Some((create(&dir.join("runs.jsonl"))?, create(&dir.join("verdicts.jsonl"))?))
        }
        None => None,
    };
    let mut runs = Vec::new();
    for &n in &spec.ns {
        for seed in 0..spec.seeds {
            let out = run_one(spec, n, seed).map_err(|fault| ExperimentError::Run { n, seed, fault })?;
            if let (Some(dir), Some((runs_f, verdicts_f))) = (&spec.out, files.as_mut()) {
                let stem = format!("{name}-n{n}-s{seed}");
                fs::write(dir.join("metrics").join(format!("{stem}.json")), out.metrics.to_json())?;
                if spec.keep_trace {
                    out.trace.write_jsonl(create(&dir.join("traces").join(format!("{stem}.jsonl")))?)?;
                }
                serde_json::to_writer(&mut *runs_f, &out.record).map_err(io::Error::other)?;
                writeln!(runs_f)?;
                let v = serde_json::json!({
                    "n": n,
                    "seed": seed,
                    "passed": out.record.passed,
                    "verdict": out.record.verdict,
                    "oracle_match": out.record.oracle_match,
                });
                serde_json::to_writer(&mut *verdicts_f, &v).map_err(io::Error::other)?;
                writeln!(verdicts_f)?;
            }
            runs.push(out.record);
        }
    }
    if let Some((mut a, mut b)) = files {
        a.flush()?;
        b.flush()?;
    }
    let summary = summarize(&runs, spec.lambda).ok();
    if let (Some(dir), Some(s)) = (&spec.out, &summary) {
        fs::write(dir.join("summary.json"), serde_json::to_string_pretty(s).map_err(io::Error::other)?)?;
        fs::write(dir.join("summary.csv"), s.to_csv())?;
    }
    Ok(ExperimentReport { runs, summary })
}
