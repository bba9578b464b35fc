//! Online monitoring on top of a static index.
//!
//! Past points live in two memories: a long-term set held by a static index
//! and a short-term buffer searched by linear scan. Once the buffer holds
//! `tau` points it is merged into the long-term set and the index is rebuilt
//! from scratch.

use std::sync::Arc;

use num_traits::{FromPrimitive, Num};

use crate::bruteforce::scan;
use crate::error::{MonitorError, Result};
use crate::model::{
    Counters, DecisionPoint, Footprint, MetricSpec, Monitor, Norm, Schema, StoredPoint,
    StreamOrder, WitnessReport,
};
use crate::scalar::Scalar;

pub const DEFAULT_TAU: usize = 4096;

/// A fixed-radius index built once over a point set.
pub trait StaticIndex<T: Scalar>: Send + Sized {
    type Params: Clone + Send;

    fn build(points: Vec<StoredPoint<T>>, params: &Self::Params) -> Self;

    /// Ids of stored witnesses of `query`, ascending.
    fn query(&self, query: &StoredPoint<T>, metric: &MetricSpec<T>, counters: &mut Counters)
        -> Vec<u64>;

    fn into_points(self) -> Vec<StoredPoint<T>>;

    fn len(&self) -> usize;

    fn node_count(&self) -> usize;

    fn name() -> &'static str;

    fn supports(_norm: Norm) -> bool {
        true
    }
}

pub struct PeriodicMonitor<T: Scalar, I: StaticIndex<T>> {
    schema: Arc<Schema>,
    metric: MetricSpec<T>,
    tau: usize,
    params: I::Params,
    long_term: I,
    short_term: Vec<StoredPoint<T>>,
    order: StreamOrder,
    counters: Counters,
}

impl<T: Scalar, I: StaticIndex<T>> PeriodicMonitor<T, I> {
    pub fn new(
        schema: Arc<Schema>,
        metric: MetricSpec<T>,
        tau: usize,
        params: I::Params,
    ) -> Result<Self> {
        if tau == 0 {
            return Err(MonitorError::Config("tau must be at least 1".into()));
        }
        if !I::supports(metric.norm) {
            return Err(MonitorError::Config(format!(
                "{} index does not support the {:?} norm",
                I::name(),
                metric.norm
            )));
        }
        let long_term = I::build(Vec::new(), &params);
        Ok(PeriodicMonitor {
            schema,
            metric,
            tau,
            params,
            long_term,
            short_term: Vec::with_capacity(tau.min(1 << 16)),
            order: StreamOrder::default(),
            counters: Counters::default(),
        })
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn long_term(&self) -> &I {
        &self.long_term
    }

    pub fn short_term(&self) -> &[StoredPoint<T>] {
        &self.short_term
    }

    fn rebuild(&mut self) {
        let empty = I::build(Vec::new(), &self.params);
        let mut points = std::mem::replace(&mut self.long_term, empty).into_points();
        points.append(&mut self.short_term);
        self.long_term = I::build(points, &self.params);
        self.counters.rebuilds += 1;
    }
}

impl<T: Scalar, I: StaticIndex<T>> Monitor<T> for PeriodicMonitor<T, I> {
    fn observe(&mut self, p: &DecisionPoint<T>) -> Result<WitnessReport> {
        self.order.check(p.id)?;
        let q = StoredPoint::from_point(&self.schema, p)?;
        let mut ids = self.long_term.query(&q, &self.metric, &mut self.counters);
        ids.extend(scan(&self.short_term, &q, &self.metric, &mut self.counters));
        self.short_term.push(q);
        self.order.advance(p.id);
        self.counters.observed += 1;
        if self.short_term.len() == self.tau {
            self.rebuild();
        }
        Ok(WitnessReport::new(p.id, ids))
    }

    fn counters(&self) -> Counters {
        self.counters
    }

    fn footprint(&self) -> Footprint {
        Footprint {
            points_stored: (self.long_term.len() + self.short_term.len()) as u64,
            index_nodes: self.long_term.node_count() as u64,
            bdd_nodes: 0,
        }
    }

    fn name(&self) -> &'static str {
        I::name()
    }
}

/// Amortized per-step cost of periodic re-indexing:
/// `(f(n + tau) + tau * g(n) + sum_{i=1..tau} h(i)) / tau`, where `f` is the
/// index build cost, `g` the long-term query cost and `h` the short-term
/// scan cost.
pub fn amortized_cost<C, F, G, H>(tau: u64, n: u64, f: F, g: G, h: H) -> C
where
    C: Num + Clone + FromPrimitive,
    F: Fn(u64) -> C,
    G: Fn(u64) -> C,
    H: Fn(u64) -> C,
{
    assert!(tau >= 1, "tau must be at least 1");
    let tau_c = C::from_u64(tau).expect("tau representable");
    let scan_total = (1..=tau).fold(C::zero(), |acc, i| acc + h(i));
    (f(n + tau) + tau_c.clone() * g(n) + scan_total) / tau_c
}

/// The candidate `tau` minimising [`amortized_cost`]; the smallest wins ties.
pub fn optimal_tau<C, F, G, H>(
    candidates: impl IntoIterator<Item = u64>,
    n: u64,
    f: F,
    g: G,
    h: H,
) -> Option<(u64, C)>
where
    C: Num + Clone + FromPrimitive + PartialOrd,
    F: Fn(u64) -> C,
    G: Fn(u64) -> C,
    H: Fn(u64) -> C,
{
    let mut best: Option<(u64, C)> = None;
    for tau in candidates {
        let cost = amortized_cost(tau, n, &f, &g, &h);
        let better = match &best {
            None => true,
            Some((bt, bc)) => cost < *bc || (cost == *bc && tau < *bt),
        };
        if better {
            best = Some((tau, cost));
        }
    }
    best
}

/// `1, 2, 4, ...` up to and including the largest power of two `<= max`.
pub fn log_grid(max: u64) -> Vec<u64> {
    std::iter::successors(Some(1u64), |&t| t.checked_mul(2))
        .take_while(|&t| t <= max.max(1))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bruteforce::BruteForceMonitor;
    use crate::kdtree::KdTree;
    use crate::model::Label;
    use crate::snn::SnnIndex;

    #[test]
    fn cost_by_hand() {
        let c: f64 = amortized_cost(2, 100, |m| m as f64, |_| 1.0, |i| i as f64);
        assert_eq!(c, 53.5);
        let c: f64 = amortized_cost(1, 40, |m| (m * m) as f64, |n| n as f64, |i| 7.0 * i as f64);
        assert_eq!(c, 41.0 * 41.0 + 40.0 + 7.0);
    }

    #[test]
    fn grid_argmin_matches_exhaustive() {
        let f = |m: u64| m as f64 * (m as f64).log2();
        let g = |n: u64| (n as f64).log2();
        let h = |i: u64| i as f64;
        let n = 100_000;
        let (tau, cost) = optimal_tau(1..=1000, n, f, g, h).unwrap();
        let costs: Vec<f64> = (1..=1000).map(|t| amortized_cost(t, n, f, g, h)).collect();
        let min = costs.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(cost, min);
        assert_eq!(costs[tau as usize - 1], min);
        assert!(costs.iter().take(tau as usize - 1).all(|&c| c > min));
    }

    #[test]
    fn log_grid_shape() {
        assert_eq!(log_grid(1), vec![1]);
        assert_eq!(log_grid(10), vec![1, 2, 4, 8]);
    }

    #[test]
    fn rejects_bad_configuration() {
        let schema = Arc::new(Schema::unit_cube(2));
        let l2 = MetricSpec::with_epsilon(Norm::L2, 0.1).unwrap();
        let linf = MetricSpec::with_epsilon(Norm::LInf, 0.1).unwrap();
        assert!(PeriodicMonitor::<f64, KdTree<f64>>::new(schema.clone(), l2, 0, 16).is_err());
        assert!(PeriodicMonitor::<f64, SnnIndex<f64>>::new(schema.clone(), linf, 8, ()).is_err());
        assert!(PeriodicMonitor::<f64, SnnIndex<f64>>::new(schema, l2, 8, ()).is_ok());
    }

    #[test]
    fn memories_partition_the_history() {
        let schema = Arc::new(Schema::unit_cube(1));
        let metric = MetricSpec::with_epsilon(Norm::L2, 0.3).unwrap();
        let mut m = PeriodicMonitor::<f64, KdTree<f64>>::new(schema.clone(), metric, 4, 2).unwrap();
        let mut bf = BruteForceMonitor::new(schema, metric);
        for i in 0..23u64 {
            let x = (i as f64 * 0.37) % 1.0;
            let p = DecisionPoint::real(i, &[x], Label(i % 3));
            assert_eq!(m.observe(&p).unwrap(), bf.observe(&p).unwrap());
            assert!(m.short_term().len() < 4);
            assert_eq!(m.long_term().len() + m.short_term().len(), i as usize + 1);
        }
        assert_eq!(m.counters().rebuilds, 23 / 4);
    }
}
