mod common;

use std::collections::BTreeSet;
use std::sync::Arc;

use common::*;
use iomon::{
    numeric_distance, BackendKind, DecisionPoint, GridSpec, Label, MonitorConfig, Norm, Schema,
    SnnIndex, StoredPoint,
};
use proptest::prelude::*;

fn norm_strategy() -> impl Strategy<Value = Norm> {
    prop_oneof![Just(Norm::L2), Just(Norm::LInf)]
}

fn vec3() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 3)
}

/// Streams on a coarse lattice so that exact-boundary distances and
/// duplicate inputs are common.
fn lattice_stream(d: usize) -> impl Strategy<Value = Vec<DecisionPoint<f64>>> {
    prop::collection::vec((prop::collection::vec(0u8..8, d), 0u64..3), 1..120).prop_map(
        |rows| {
            rows.into_iter()
                .enumerate()
                .map(|(i, (x, l))| {
                    let coords: Vec<f64> = x.iter().map(|&v| f64::from(v) / 8.0).collect();
                    DecisionPoint::real(i as u64, &coords, Label(l))
                })
                .collect()
        },
    )
}

proptest! {
    #[test]
    fn input_distance_is_a_metric(a in vec3(), b in vec3(), c in vec3(), norm in norm_strategy()) {
        let ab = numeric_distance(norm, &a, &b);
        let ba = numeric_distance(norm, &b, &a);
        let bc = numeric_distance(norm, &b, &c);
        let ac = numeric_distance(norm, &a, &c);
        prop_assert_eq!(ab, ba);
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(numeric_distance(norm, &a, &a), 0.0);
        prop_assert!(ac <= ab + bc + 1e-12);
    }

    #[test]
    fn every_backend_matches_scan_on_lattices(stream in lattice_stream(3), k in 1usize..4) {
        let schema = Schema::unit_cube(3);
        // 0.25 is two lattice steps, so boundary hits are exact
        for (backend, norm) in [
            (BackendKind::KdTree, Norm::L2),
            (BackendKind::KdTree, Norm::LInf),
            (BackendKind::Snn, Norm::L2),
            (BackendKind::Bdd, Norm::LInf),
        ] {
            let cfg = MonitorConfig::new(backend, norm, 0.25).with_tau(5);
            let expect = brute_force(&schema, cfg.metric().unwrap(), &stream);
            let mut m = cfg.build::<f64>(Arc::new(schema.clone())).unwrap();
            prop_assert_eq!(replay(&mut m, &stream), expect);
        }
        let cfg = MonitorConfig::new(BackendKind::Bdd, Norm::LInf, 0.25).with_blocks(k);
        let expect = brute_force(&schema, cfg.metric().unwrap(), &stream);
        let mut m = cfg.build::<f64>(Arc::new(schema.clone())).unwrap();
        prop_assert_eq!(replay(&mut m, &stream), expect);
    }

    #[test]
    fn reports_are_stable_under_extension(stream in lattice_stream(2), cut in 0usize..120) {
        let schema = Schema::unit_cube(2);
        let metric = metric(Norm::L2, 0.25);
        let full = brute_force(&schema, metric, &stream);
        let cut = cut.min(stream.len());
        let prefix = brute_force(&schema, metric, &stream[..cut]);
        prop_assert_eq!(&full[..cut], &prefix[..]);
        // so the cumulative violation count can only grow
        let counts: Vec<usize> = (0..=stream.len()).map(|n| total_pairs(&full[..n])).collect();
        prop_assert!(counts.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn violation_relation_is_symmetric(stream in lattice_stream(2)) {
        let schema = Schema::unit_cube(2);
        let n = stream.len() as u64;
        let cfg = MonitorConfig::new(BackendKind::KdTree, Norm::LInf, 0.25).with_tau(3);
        let pairs = |reports: &[iomon::WitnessReport], to_orig: &dyn Fn(u64) -> u64| {
            reports
                .iter()
                .flat_map(|r| {
                    r.witness_ids.iter().map(move |&w| {
                        let (a, b) = (to_orig(r.query_id), to_orig(w));
                        (a.min(b), a.max(b))
                    })
                })
                .collect::<BTreeSet<_>>()
        };
        let mut fwd_m = cfg.build::<f64>(Arc::new(schema.clone())).unwrap();
        let forward = replay(&mut fwd_m, &stream);
        let reversed: Vec<DecisionPoint<f64>> = stream
            .iter()
            .rev()
            .enumerate()
            .map(|(i, p)| DecisionPoint { id: i as u64, ..p.clone() })
            .collect();
        let mut rev_m = cfg.build::<f64>(Arc::new(schema)).unwrap();
        let backward = replay(&mut rev_m, &reversed);
        prop_assert_eq!(pairs(&forward, &|id| id), pairs(&backward, &|id| n - 1 - id));
    }

    #[test]
    fn grid_cells_bracket_epsilon(x in 0.0f64..1.0, y in 0.0f64..1.0, eps in 0.01f64..0.5) {
        let schema = Schema::unit_cube(1);
        let grid = GridSpec::new(&schema, eps).unwrap();
        let cell = |v: f64| grid.discretize(&stored(&[v]), false).unwrap().0[0];
        let (cx, cy) = (cell(x), cell(y));
        if cx == cy {
            prop_assert!((x - y).abs() < eps);
        }
        if (x - y).abs() <= eps {
            prop_assert!(cx.abs_diff(cy) <= 1);
        }
    }

    #[test]
    fn sorted_keys_never_exceed_l2(points in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 4), 2..40)) {
        let stored_pts: Vec<StoredPoint<f64>> = points.iter().enumerate()
            .map(|(i, p)| StoredPoint { id: i as u64, ..stored(p) }).collect();
        let idx = SnnIndex::build(stored_pts);
        let unit: f64 = idx.direction().iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!((unit - 1.0).abs() < 1e-9);
        prop_assert!(idx.keys().windows(2).all(|w| w[0] <= w[1]));
        for a in &points {
            for b in &points {
                let dk = (idx.key(a) - idx.key(b)).abs();
                prop_assert!(dk <= numeric_distance(Norm::L2, a, b) + 1e-9);
            }
        }
    }
}

fn stored(coords: &[f64]) -> StoredPoint<f64> {
    StoredPoint {
        id: 0,
        label: Label(0),
        coords: coords.into(),
        cats: Box::new([]),
    }
}
