//! Per-step latency sweeps across backends.

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use iomon::{DecisionPoint, LabelInterner, Monitor, MonitorConfig, Schema};
use serde::Serialize;

use crate::error::Result;
use crate::generate::Dataset;
use crate::ingest::to_point;
use crate::run::rolling_mean;

#[derive(Serialize)]
struct Row<'a> {
    backend: &'a str,
    step: u64,
    latency_ns: u64,
    rolling_mean_ns: f64,
    comparisons: u64,
}

/// Totals of one backend's pass over the stream.
#[derive(Clone, Debug, Serialize)]
pub struct BenchSummary {
    pub backend: String,
    pub steps: u64,
    pub total_s: f64,
    pub comparisons: u64,
    pub witness_pairs: u64,
}

/// Typed points of a generated dataset, ids in order.
pub fn points(dataset: &Dataset) -> Result<Vec<DecisionPoint<f64>>> {
    let mut labels = LabelInterner::default();
    dataset
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| to_point(&dataset.schema, &mut labels, i as u64, &(i as u64 + 1, r.clone())))
        .collect()
}

/// Runs every configuration over the same stream and writes one CSV row
/// per step: latency, rolling mean latency and exact distance evaluations.
pub fn sweep<W: Write>(
    configs: &[MonitorConfig],
    schema: &Schema,
    stream: &[DecisionPoint<f64>],
    window: usize,
    out: W,
) -> Result<Vec<BenchSummary>> {
    let mut w = csv::Writer::from_writer(out);
    let mut summaries = Vec::new();
    for cfg in configs {
        let mut m = cfg.build::<f64>(Arc::new(schema.clone()))?;
        let name = match cfg.blocks {
            Some(k) => format!("{}/k{k}", cfg.backend),
            None => cfg.backend.to_string(),
        };
        let mut latency = Vec::with_capacity(stream.len());
        let mut comparisons = Vec::with_capacity(stream.len());
        let mut pairs = 0u64;
        for p in stream {
            let before = m.counters().comparisons;
            let start = Instant::now();
            let report = m.observe(p)?;
            latency.push(start.elapsed().as_nanos() as u64);
            comparisons.push(m.counters().comparisons - before);
            pairs += report.witness_ids.len() as u64;
        }
        let rolling = rolling_mean(&latency, window);
        for (i, p) in stream.iter().enumerate() {
            w.serialize(Row {
                backend: &name,
                step: p.id,
                latency_ns: latency[i],
                rolling_mean_ns: rolling[i],
                comparisons: comparisons[i],
            })?;
        }
        summaries.push(BenchSummary {
            backend: name,
            steps: stream.len() as u64,
            total_s: latency.iter().sum::<u64>() as f64 * 1e-9,
            comparisons: comparisons.iter().sum(),
            witness_pairs: pairs,
        });
    }
    w.flush()?;
    Ok(summaries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::uniform;
    use iomon::{BackendKind, Norm};

    #[test]
    fn one_row_per_step_and_backend() {
        let data = uniform(100, 3, 2, 1).unwrap();
        let stream = points(&data).unwrap();
        let configs = [
            MonitorConfig::new(BackendKind::BruteForce, Norm::LInf, 0.2),
            MonitorConfig::new(BackendKind::Bdd, Norm::LInf, 0.2).with_blocks(2),
        ];
        let mut buf = Vec::new();
        let sums = sweep(&configs, &data.schema, &stream, 10, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 201);
        assert!(text.starts_with("backend,step,latency_ns,rolling_mean_ns,comparisons"));
        assert_eq!(sums[0].comparisons, 99 * 100 / 2);
        assert_eq!(sums[0].witness_pairs, sums[1].witness_pairs);
        assert_eq!(sums[1].backend, "bdd/k2");
    }
}
