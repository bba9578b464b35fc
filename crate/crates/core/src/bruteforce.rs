//! Linear-scan monitor. Every other backend is checked against it.

use std::sync::Arc;

use crate::error::Result;
use crate::model::{
    Counters, DecisionPoint, Footprint, MetricSpec, Monitor, Schema, StoredPoint, StreamOrder,
    WitnessReport,
};
use crate::scalar::Scalar;

/// Ids of all `points` that are witnesses for `query`. Bumps
/// `counters.comparisons` once per point.
pub fn scan<'a, T: Scalar>(
    points: impl IntoIterator<Item = &'a StoredPoint<T>>,
    query: &StoredPoint<T>,
    metric: &MetricSpec<T>,
    counters: &mut Counters,
) -> Vec<u64> {
    let mut out = Vec::new();
    for p in points {
        counters.comparisons += 1;
        if metric.is_witness(p, query) {
            out.push(p.id);
        }
    }
    out
}

pub struct BruteForceMonitor<T> {
    schema: Arc<Schema>,
    metric: MetricSpec<T>,
    points: Vec<StoredPoint<T>>,
    order: StreamOrder,
    counters: Counters,
}

impl<T: Scalar> BruteForceMonitor<T> {
    pub fn new(schema: Arc<Schema>, metric: MetricSpec<T>) -> Self {
        BruteForceMonitor {
            schema,
            metric,
            points: Vec::new(),
            order: StreamOrder::default(),
            counters: Counters::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[StoredPoint<T>] {
        &self.points
    }
}

impl<T: Scalar> Monitor<T> for BruteForceMonitor<T> {
    fn observe(&mut self, p: &DecisionPoint<T>) -> Result<WitnessReport> {
        self.order.check(p.id)?;
        let q = StoredPoint::from_point(&self.schema, p)?;
        let ids = scan(&self.points, &q, &self.metric, &mut self.counters);
        self.points.push(q);
        self.order.advance(p.id);
        self.counters.observed += 1;
        Ok(WitnessReport::new(p.id, ids))
    }

    fn counters(&self) -> Counters {
        self.counters
    }

    fn footprint(&self) -> Footprint {
        Footprint {
            points_stored: self.points.len() as u64,
            ..Footprint::default()
        }
    }

    fn name(&self) -> &'static str {
        "bruteforce"
    }
}
