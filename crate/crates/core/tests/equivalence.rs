//! Every backend must reproduce the linear scan step for step.

mod common;

use std::sync::Arc;

use common::*;
use iomon::{
    BackendKind, BruteForceMonitor, DecisionPoint, KdTree, Label, Monitor, MonitorConfig, Norm,
    PeriodicMonitor, Schema, SnnIndex, StoredPoint,
};

/// Replays `stream` through the configured backend and the linear scan;
/// returns the number of violating pairs found.
fn check(config: &MonitorConfig, schema: &Schema, stream: &[DecisionPoint<f64>]) -> usize {
    let expect = brute_force(schema, config.metric().unwrap(), stream);
    let mut m = config.build::<f64>(Arc::new(schema.clone())).unwrap();
    let got = replay(&mut m, stream);
    for (g, e) in got.iter().zip(&expect) {
        assert_eq!(g, e, "{config:?} at id {}", e.query_id);
    }
    total_pairs(&expect)
}

#[test]
fn static_backends_match_for_every_tau() {
    for (d, eps) in [(2, 0.05), (8, 0.3), (24, 0.9)] {
        let schema = Schema::unit_cube(d);
        let stream = uniform_stream(d as u64, 600, d, 2);
        for tau in [1, 7, 64, 4096] {
            for norm in [Norm::L2, Norm::LInf] {
                check(
                    &MonitorConfig::new(BackendKind::KdTree, norm, eps).with_tau(tau),
                    &schema,
                    &stream,
                );
            }
            let pairs = check(
                &MonitorConfig::new(BackendKind::Snn, Norm::L2, eps).with_tau(tau),
                &schema,
                &stream,
            );
            assert!(pairs > 0, "d={d}");
        }
    }
}

#[test]
fn grid_backend_matches_on_mixed_streams() {
    for (numeric, cats, eps) in [(1, 1, 0.02), (4, 2, 0.2), (9, 3, 0.4)] {
        let schema = mixed_schema(numeric, cats);
        let stream = mixed_stream(numeric as u64, &schema, 2000, 3);
        let cfg = MonitorConfig::new(BackendKind::Bdd, Norm::LInf, eps);
        assert!(check(&cfg, &schema, &stream) > 0);
    }
}

#[test]
fn parallel_wrapper_matches_for_every_k() {
    let schema = mixed_schema(6, 2);
    let stream = mixed_stream(5, &schema, 800, 2);
    for backend in [BackendKind::BruteForce, BackendKind::KdTree, BackendKind::Bdd] {
        for k in [1, 2, 4, 6] {
            let cfg = MonitorConfig::new(backend, Norm::LInf, 0.3)
                .with_tau(32)
                .with_blocks(k);
            assert!(check(&cfg, &schema, &stream) > 0);
        }
    }
}

#[test]
fn categorical_and_ignored_columns_for_static_backends() {
    let schema = mixed_schema(3, 2);
    let stream = mixed_stream(9, &schema, 700, 2);
    for norm in [Norm::L2, Norm::LInf] {
        check(&MonitorConfig::new(BackendKind::KdTree, norm, 0.2).with_tau(50), &schema, &stream);
    }
    let pairs = check(&MonitorConfig::new(BackendKind::Snn, Norm::L2, 0.2).with_tau(50), &schema, &stream);
    assert!(pairs > 0);
}

#[test]
fn rebuild_count_is_floor_n_over_tau() {
    let schema = Arc::new(Schema::unit_cube(3));
    let stream = uniform_stream(1, 500, 3, 2);
    for tau in [1usize, 7, 64, 499, 500, 501] {
        let metric = metric(Norm::L2, 0.1);
        let mut m = PeriodicMonitor::<f64, KdTree<f64>>::new(schema.clone(), metric, tau, 16).unwrap();
        replay(&mut m, &stream);
        assert_eq!(m.counters().rebuilds, (500 / tau) as u64, "tau={tau}");
        let mut s = PeriodicMonitor::<f64, SnnIndex<f64>>::new(schema.clone(), metric, tau, ()).unwrap();
        replay(&mut s, &stream);
        assert_eq!(s.counters().rebuilds, (500 / tau) as u64);
    }
}

#[test]
fn long_term_index_alone_matches_scan_of_its_points() {
    let schema = Arc::new(Schema::unit_cube(4));
    let stream = uniform_stream(2, 300, 4, 2);
    let metric = metric(Norm::L2, 0.3);
    let mut m = PeriodicMonitor::<f64, SnnIndex<f64>>::new(schema.clone(), metric, 64, ()).unwrap();
    for p in &stream {
        m.observe(p).unwrap();
        if m.short_term().is_empty() {
            let lt = m.long_term();
            let probe = StoredPoint::from_point(&schema, &stream[7]).unwrap();
            let probe = StoredPoint {
                label: Label(99),
                ..probe
            };
            let mut c = Default::default();
            let got = iomon::StaticIndex::query(lt, &probe, &metric, &mut c);
            let mut expect: Vec<u64> = lt
                .entries()
                .filter(|(_, q)| metric.is_witness(q, &probe))
                .map(|(_, q)| q.id)
                .collect();
            expect.sort_unstable();
            assert_eq!(got, expect);
        }
    }
}

#[test]
fn tau_larger_than_stream_is_pure_scan() {
    let schema = Schema::unit_cube(2);
    let stream = uniform_stream(3, 400, 2, 2);
    let cfg = MonitorConfig::new(BackendKind::KdTree, Norm::L2, 0.05).with_tau(1_000_000_000);
    let mut m = cfg.build::<f64>(Arc::new(schema.clone())).unwrap();
    let got = replay(&mut m, &stream);
    assert_eq!(got, brute_force(&schema, cfg.metric().unwrap(), &stream));
    assert_eq!(m.counters().rebuilds, 0);
    assert_eq!(m.footprint().index_nodes, 0);
}

#[test]
fn f32_backends_agree_with_f32_scan() {
    let schema = Arc::new(Schema::unit_cube(3));
    let stream: Vec<DecisionPoint<f32>> = uniform_stream(4, 500, 3, 2)
        .into_iter()
        .map(|p| {
            let x: Vec<f32> = p
                .features
                .iter()
                .map(|f| match f {
                    iomon::Feature::Real(v) => *v as f32,
                    _ => unreachable!(),
                })
                .collect();
            DecisionPoint::real(p.id, &x, p.label)
        })
        .collect();
    let cfg = MonitorConfig::new(BackendKind::KdTree, Norm::LInf, 0.1).with_tau(16);
    let mut bf = BruteForceMonitor::<f32>::new(schema.clone(), cfg.metric().unwrap());
    let mut kd = cfg.build::<f32>(schema.clone()).unwrap();
    let mut grid = MonitorConfig::new(BackendKind::Bdd, Norm::LInf, 0.1)
        .build::<f32>(schema)
        .unwrap();
    for p in &stream {
        let e = bf.observe(p).unwrap();
        assert_eq!(kd.observe(p).unwrap(), e);
        assert_eq!(grid.observe(p).unwrap(), e);
    }
}
