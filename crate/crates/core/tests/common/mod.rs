#![allow(dead_code)]

use std::sync::Arc;

use iomon::{
    BruteForceMonitor, Column, DecisionPoint, Feature, Label, MetricSpec, Monitor, Norm, Schema,
    WitnessReport,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform points in the unit cube with `labels` distinct outputs.
pub fn uniform_stream(seed: u64, n: usize, d: usize, labels: u64) -> Vec<DecisionPoint<f64>> {
    let mut r = rng(seed);
    (0..n as u64)
        .map(|id| {
            let x: Vec<f64> = (0..d).map(|_| r.gen::<f64>()).collect();
            DecisionPoint::real(id, &x, Label(r.gen_range(0..labels)))
        })
        .collect()
}

/// Schema with `numeric` bounded columns, `cats` categorical columns of
/// three values each and one ignored column.
pub fn mixed_schema(numeric: usize, cats: usize) -> Schema {
    let mut cols = Vec::new();
    for i in 0..numeric {
        cols.push(Column::numeric(format!("x{i}"), 0.0, 1.0));
        if i < cats {
            cols.push(Column::categorical(format!("c{i}"), ["a", "b", "c"]));
        }
    }
    cols.push(Column::ignored("blind"));
    Schema::new(cols, "label").unwrap()
}

pub fn mixed_stream(seed: u64, schema: &Schema, n: usize, labels: u64) -> Vec<DecisionPoint<f64>> {
    let mut r = rng(seed);
    (0..n as u64)
        .map(|id| {
            let features = schema
                .columns
                .iter()
                .map(|c| {
                    if c.is_numeric() {
                        Feature::Real(r.gen::<f64>())
                    } else if c.is_categorical() {
                        // skewed so equal categories are common
                        Feature::Category(u32::from(r.gen_bool(0.3)))
                    } else {
                        Feature::Skipped
                    }
                })
                .collect();
            DecisionPoint::new(id, features, Label(r.gen_range(0..labels)))
        })
        .collect()
}

pub fn replay(m: &mut dyn Monitor<f64>, stream: &[DecisionPoint<f64>]) -> Vec<WitnessReport> {
    stream.iter().map(|p| m.observe(p).unwrap()).collect()
}

pub fn brute_force(
    schema: &Schema,
    metric: MetricSpec<f64>,
    stream: &[DecisionPoint<f64>],
) -> Vec<WitnessReport> {
    let mut m = BruteForceMonitor::new(Arc::new(schema.clone()), metric);
    replay(&mut m, stream)
}

pub fn metric(norm: Norm, eps: f64) -> MetricSpec<f64> {
    MetricSpec::with_epsilon(norm, eps).unwrap()
}

pub fn total_pairs(reports: &[WitnessReport]) -> usize {
    reports.iter().map(|r| r.witness_ids.len()).sum()
}
