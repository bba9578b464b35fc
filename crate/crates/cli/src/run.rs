//! Feeding a stream through a monitor and reporting witnesses and timings.

use std::io::{Read, Write};
use std::time::Instant;

use iomon::{
    BackendKind, Counters, Footprint, LabelInterner, Monitor, MonitorConfig, Norm, RawValue,
    Schema,
};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::ingest::{self, Format, Located, Record};
use crate::tune::{self, TauChoice};

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub config: MonitorConfig,
    /// Echo each witness's stored record next to its id.
    pub full_witnesses: bool,
    /// Window of the rolling latency average.
    pub window: usize,
    /// Recorded in the stats; the run itself draws no random numbers.
    pub seed: Option<u64>,
    /// Pick `tau` from timings on this many leading points.
    pub auto_tau: Option<AutoTau>,
}

#[derive(Clone, Copy, Debug)]
pub struct AutoTau {
    pub prefix: usize,
    pub horizon: u64,
}

impl RunOptions {
    pub fn new(config: MonitorConfig) -> Self {
        RunOptions {
            config,
            full_witnesses: false,
            window: 100_000,
            seed: None,
            auto_tau: None,
        }
    }
}

#[derive(Serialize)]
struct ReportLine<'a> {
    id: u64,
    witnesses: &'a [u64],
    count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness_records: Option<Vec<Echo<'a>>>,
}

#[derive(Serialize)]
struct Echo<'a> {
    id: u64,
    features: &'a [RawValue],
    label: &'a str,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct LatencySummary {
    pub total_s: f64,
    pub mean_ns: f64,
    pub p50_ns: u64,
    pub p99_ns: u64,
    pub max_ns: u64,
    /// Rolling mean over the last `window` steps at the end of the run.
    pub rolling_mean_ns: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunStats {
    pub backend: BackendKind,
    pub norm: Norm,
    pub epsilon: f64,
    pub tau: usize,
    pub blocks: Option<usize>,
    pub seed: Option<u64>,
    pub observed: u64,
    /// Number of steps with a nonempty witness set.
    pub violations: u64,
    pub witness_pairs: u64,
    pub counters: Counters,
    pub footprint: Footprint,
    pub window: usize,
    pub latency: LatencySummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auto_tau: Option<TauChoice>,
    /// Per-step monitor latency in nanoseconds.
    #[serde(skip)]
    pub latencies_ns: Vec<u64>,
}

impl RunStats {
    fn new(opts: &RunOptions, config: &MonitorConfig) -> Self {
        RunStats {
            backend: config.backend,
            norm: config.norm,
            epsilon: config.epsilon,
            tau: config.tau,
            blocks: config.blocks,
            seed: opts.seed,
            observed: 0,
            violations: 0,
            witness_pairs: 0,
            counters: Counters::default(),
            footprint: Footprint::default(),
            window: opts.window,
            latency: LatencySummary::default(),
            auto_tau: None,
            latencies_ns: Vec::new(),
        }
    }

    fn finish(&mut self) {
        let samples = &self.latencies_ns;
        if samples.is_empty() {
            return;
        }
        let total: u64 = samples.iter().sum();
        let mut sorted = samples.clone();
        sorted.sort_unstable();
        let pick = |q: f64| sorted[((sorted.len() - 1) as f64 * q).round() as usize];
        self.latency = LatencySummary {
            total_s: total as f64 * 1e-9,
            mean_ns: total as f64 / samples.len() as f64,
            p50_ns: pick(0.5),
            p99_ns: pick(0.99),
            max_ns: *sorted.last().unwrap(),
            rolling_mean_ns: rolling_mean(samples, self.window).last().copied().unwrap_or(0.0),
        };
    }

    /// A few human-readable lines for standard error.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "{} ({:?}, eps {}): {} decisions, {} with violations, {} witness pairs\n",
            self.backend, self.norm, self.epsilon, self.observed, self.violations, self.witness_pairs
        );
        s += &format!(
            "  distance evaluations {}, tree nodes visited {}, rebuilds {}\n",
            self.counters.comparisons, self.counters.nodes_visited, self.counters.rebuilds
        );
        if self.backend == BackendKind::Bdd {
            s += &format!(
                "  cases: empty {}, own cell {}, neighbours {}\n",
                self.counters.case_a, self.counters.case_b, self.counters.case_c
            );
        }
        s += &format!(
            "  stored {}, index nodes {}, bdd nodes {}\n",
            self.footprint.points_stored, self.footprint.index_nodes, self.footprint.bdd_nodes
        );
        s += &format!(
            "  latency mean {:.0} ns, p99 {} ns, total {:.3} s",
            self.latency.mean_ns, self.latency.p99_ns, self.latency.total_s
        );
        s
    }
}

/// Mean of each trailing window of up to `window` samples.
pub fn rolling_mean(samples: &[u64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut sum = 0u64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            sum += x;
            if i >= window {
                sum -= samples[i - window];
            }
            sum as f64 / (i + 1).min(window) as f64
        })
        .collect()
}

/// Runs the stream in `input` through the configured monitor, writing one
/// JSON line per decision to `out`. The configuration is checked against the
/// schema before anything is read.
pub fn run<R: Read, W: Write>(
    opts: &RunOptions,
    schema: &Schema,
    input: R,
    format: Format,
    out: W,
) -> Result<RunStats> {
    let mut config = opts.config.clone();
    config.validate_for(schema)?;
    let mut records = ingest::records(input, format, schema)?;
    let mut labels = LabelInterner::default();
    let mut out = std::io::BufWriter::new(out);

    let mut buffered: Vec<Located> = Vec::new();
    let mut choice = None;
    if let Some(auto) = opts.auto_tau {
        for r in records.by_ref().take(auto.prefix) {
            buffered.push(r?);
        }
        let mut scratch = LabelInterner::default();
        let prefix = buffered
            .iter()
            .enumerate()
            .map(|(id, r)| ingest::to_point(schema, &mut scratch, id as u64, r))
            .collect::<Result<Vec<_>>>()?;
        let c = tune::auto_tau(&config, schema, &prefix, auto.horizon)?;
        config.tau = c.tau;
        choice = Some(c);
    }

    let mut monitor = config.build::<f64>(std::sync::Arc::new(schema.clone()))?;
    let mut stats = RunStats::new(opts, &config);
    stats.auto_tau = choice;
    let mut kept: Vec<Record> = Vec::new();

    for (id, located) in buffered.into_iter().map(Ok).chain(records).enumerate() {
        let located = located?;
        let id = id as u64;
        let point = ingest::to_point(schema, &mut labels, id, &located)?;
        let start = Instant::now();
        let report = monitor
            .observe(&point)
            .map_err(|e| CliError::Ingest {
                line: located.0,
                message: e.to_string(),
            })?;
        stats.latencies_ns.push(start.elapsed().as_nanos() as u64);

        if opts.full_witnesses {
            kept.push(located.1);
        }
        let line = ReportLine {
            id,
            witnesses: &report.witness_ids,
            count: report.witness_ids.len(),
            witness_records: opts.full_witnesses.then(|| {
                report
                    .witness_ids
                    .iter()
                    .map(|&w| {
                        let r = &kept[w as usize];
                        Echo {
                            id: w,
                            features: &r.features,
                            label: &r.label,
                        }
                    })
                    .collect()
            }),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;

        stats.observed += 1;
        stats.violations += u64::from(report.violation());
        stats.witness_pairs += report.witness_ids.len() as u64;
    }
    out.flush()?;
    stats.counters = monitor.counters();
    stats.footprint = monitor.footprint();
    stats.finish();
    Ok(stats)
}
