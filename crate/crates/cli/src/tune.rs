//! Choosing the re-indexing period from measured operation costs.

use std::time::Instant;

use iomon::bruteforce::scan;
use iomon::{
    log_grid, optimal_tau, BackendKind, Counters, DecisionPoint, KdTree, MetricSpec,
    MonitorConfig, Schema, SnnIndex, StaticIndex, StoredPoint,
};
use serde::Serialize;

use crate::error::{CliError, Result};

/// Power-law fits of the three costs in the amortized model, in seconds:
/// build `f(m) = a m^p`, query `g(m) = b m^q`, scan step `h(i) = c i`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CostModel {
    pub build_coef: f64,
    pub build_exp: f64,
    pub query_coef: f64,
    pub query_exp: f64,
    pub scan_coef: f64,
}

impl CostModel {
    pub fn build(&self, m: u64) -> f64 {
        self.build_coef * (m as f64).powf(self.build_exp)
    }

    pub fn query(&self, m: u64) -> f64 {
        self.query_coef * (m.max(1) as f64).powf(self.query_exp)
    }

    pub fn scan(&self, i: u64) -> f64 {
        self.scan_coef * i as f64
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TauChoice {
    pub tau: usize,
    pub horizon: u64,
    pub predicted_cost_s: f64,
    pub model: CostModel,
}

/// Measures the configured static index on `prefix` and picks the `tau` on a
/// power-of-two grid that minimises the predicted amortized cost at a long
/// term memory of `horizon` points.
pub fn auto_tau(
    config: &MonitorConfig,
    schema: &Schema,
    prefix: &[DecisionPoint<f64>],
    horizon: u64,
) -> Result<TauChoice> {
    if prefix.len() < 64 {
        return Err(CliError::Usage(
            "automatic tau needs at least 64 points to measure".into(),
        ));
    }
    let metric = config.metric::<f64>()?;
    let points = prefix
        .iter()
        .map(|p| StoredPoint::from_point(schema, p))
        .collect::<iomon::Result<Vec<_>>>()?;
    let model = match config.backend {
        BackendKind::KdTree => fit::<KdTree<f64>>(&points, &config.leaf_capacity, &metric),
        BackendKind::Snn => fit::<SnnIndex<f64>>(&points, &(), &metric),
        other => {
            return Err(CliError::Usage(format!(
                "backend {other} does not re-index, so tau has no effect"
            )))
        }
    };
    let horizon = horizon.max(1);
    let (tau, cost) = optimal_tau(
        log_grid(horizon),
        horizon,
        |m| model.build(m),
        |m| model.query(m),
        |i| model.scan(i),
    )
    .expect("grid is never empty");
    Ok(TauChoice {
        tau: tau as usize,
        horizon,
        predicted_cost_s: cost,
        model,
    })
}

fn fit<I: StaticIndex<f64>>(
    points: &[StoredPoint<f64>],
    params: &I::Params,
    metric: &MetricSpec<f64>,
) -> CostModel {
    let big = points.len();
    let small = big / 4;
    let (b1, q1) = time_index::<I>(&points[..small], params, metric);
    let (b2, q2) = time_index::<I>(points, params, metric);
    let ratio = (big as f64 / small as f64).ln();
    let exponent = |t1: f64, t2: f64, lo: f64, hi: f64| {
        let e = (t2 / t1).ln() / ratio;
        if e.is_finite() {
            e.clamp(lo, hi)
        } else {
            lo
        }
    };
    let build_exp = exponent(b1, b2, 1.0, 2.0);
    let query_exp = exponent(q1, q2, 0.0, 1.0);

    let mut counters = Counters::default();
    let start = Instant::now();
    for q in &points[..64] {
        std::hint::black_box(scan(points, q, metric, &mut counters));
    }
    let scan_coef = start.elapsed().as_secs_f64() / counters.comparisons as f64;

    CostModel {
        build_coef: b2 / (big as f64).powf(build_exp),
        build_exp,
        query_coef: q2 / (big as f64).powf(query_exp),
        query_exp,
        scan_coef,
    }
}

/// Seconds to build over `points` and mean seconds per query against it.
fn time_index<I: StaticIndex<f64>>(
    points: &[StoredPoint<f64>],
    params: &I::Params,
    metric: &MetricSpec<f64>,
) -> (f64, f64) {
    let start = Instant::now();
    let index = I::build(points.to_vec(), params);
    let build = start.elapsed().as_secs_f64().max(1e-9);
    let probes = points.len().min(256);
    let mut counters = Counters::default();
    let start = Instant::now();
    for q in &points[..probes] {
        std::hint::black_box(index.query(q, metric, &mut counters));
    }
    let query = (start.elapsed().as_secs_f64() / probes as f64).max(1e-12);
    (build, query)
}
