//! The embedding surface: a monitor made from a config mapping, fed raw
//! values one decision at a time, with counters readable at any point.

use iomon::{RawValue, Schema, Session32, Session64};

fn config(json: &str) -> iomon::MonitorConfig {
    serde_json::from_str(json).unwrap()
}

#[test]
fn mapping_to_witness_lists() {
    let cfg = config(r#"{"backend": "kdtree", "norm": "l2", "epsilon": 0.1, "tau": 2}"#);
    let mut s = Session64::new(&cfg, Schema::unit_cube(2)).unwrap();
    let x = |a: f64, b: f64| [RawValue::Number(a), RawValue::Number(b)];
    assert!(s.observe(&x(0.5, 0.5), "approve").unwrap().is_empty());
    assert_eq!(s.observe(&x(0.55, 0.5), "deny").unwrap(), vec![0]);
    assert!(s.observe(&x(0.9, 0.9), "deny").unwrap().is_empty());
    assert_eq!(s.observe(&x(0.52, 0.5), "approve").unwrap(), vec![1]);
    assert_eq!(s.observed(), 4);
    assert_eq!(s.labels().len(), 2);
    let c = s.counters();
    assert_eq!(c.observed, 4);
    assert_eq!(c.rebuilds, 2);
    assert_eq!(s.footprint().points_stored, 4);
}

#[test]
fn rejected_input_keeps_ids_dense() {
    let cfg = config(r#"{"backend": "bdd", "norm": "linf", "epsilon": 0.25}"#);
    let schema: Schema = serde_json::from_str(
        r#"{"columns": [{"name": "x", "kind": "numeric", "lower": 0, "upper": 1},
                        {"name": "c", "kind": "categorical", "values": ["u", "v"]}]}"#,
    )
    .unwrap();
    let mut s = Session64::new(&cfg, schema).unwrap();
    s.observe(&[0.1.into(), "u".into()], "a").unwrap();
    assert!(s.observe(&[1.5.into(), "u".into()], "b").is_err());
    assert!(s.observe(&[0.2.into(), "w".into()], "b").is_err());
    assert_eq!(s.observe(&[0.2.into(), "u".into()], "b").unwrap(), vec![0]);
    assert!(s.observe(&[0.2.into(), "v".into()], "b").unwrap().is_empty());
    assert_eq!(s.observed(), 3);
}

#[test]
fn unknown_keys_and_bad_combinations_are_rejected() {
    assert!(serde_json::from_str::<iomon::MonitorConfig>(
        r#"{"backend": "kdtree", "norm": "l2", "epsilon": 0.1, "colour": 1}"#
    )
    .is_err());
    let cfg = config(r#"{"backend": "snn", "norm": "linf", "epsilon": 0.1}"#);
    assert!(Session32::new(&cfg, Schema::unit_cube(2)).is_err());
}
