//! Synthetic streams: uniform samples and planted violations with ground truth.

use iomon::{ColumnKind, MetricSpec, Norm, RawValue, Schema};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CliError, Result};
use crate::ingest::Record;

/// The generators' random source. Seeded, portable across platforms.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub schema: Schema,
    pub records: Vec<Record>,
}

/// `n` points drawn i.i.d. from `[0, 1)^d`, labels uniform over the tokens
/// `"0"`, ..., `"labels - 1"`.
pub fn uniform(n: usize, d: usize, labels: u32, seed: u64) -> Result<Dataset> {
    if d == 0 || labels == 0 {
        return Err(CliError::Generator(
            "dimension and label count must be at least 1".into(),
        ));
    }
    let mut rng = seeded(seed);
    let records = (0..n)
        .map(|_| {
            let features = (0..d).map(|_| RawValue::Number(rng.gen::<f64>())).collect();
            let label = rng.gen_range(0..labels).to_string();
            Record { features, label }
        })
        .collect();
    Ok(Dataset {
        schema: Schema::unit_cube(d),
        records,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct PlantSpec {
    pub count: usize,
    pub epsilon: f64,
    pub norm: Norm,
}

#[derive(Clone, Debug)]
pub struct Planted {
    pub dataset: Dataset,
    /// `(original id, copy id)` of every planted pair, ascending.
    pub pairs: Vec<(u64, u64)>,
}

struct Row {
    x: Vec<f64>,
    label: usize,
}

/// Makes `base` violation-free at `epsilon` by resampling colliding points,
/// then plants `count` relabelled near-copies at random later positions.
/// Copies are perturbed by at most `epsilon / 2` in the chosen norm, so the
/// returned stream has exactly the planted violations.
pub fn plant(base: &Dataset, spec: PlantSpec, seed: u64) -> Result<Planted> {
    let schema = &base.schema;
    let bounds = numeric_bounds(schema)?;
    let metric = MetricSpec::with_epsilon(spec.norm, spec.epsilon)?;
    let n = base.records.len();
    if spec.count > n {
        return Err(CliError::Generator(format!(
            "cannot plant {} pairs in a stream of {n}",
            spec.count
        )));
    }

    let mut tokens: Vec<String> = Vec::new();
    let mut rows: Vec<Row> = Vec::with_capacity(n);
    for (i, r) in base.records.iter().enumerate() {
        let x = r
            .features
            .iter()
            .map(|v| match v {
                RawValue::Number(x) => Ok(*x),
                RawValue::Text(s) => s.trim().parse::<f64>().map_err(|_| {
                    CliError::Generator(format!("record {i}: `{s}` is not a number"))
                }),
            })
            .collect::<Result<Vec<f64>>>()?;
        let label = match tokens.iter().position(|t| *t == r.label) {
            Some(l) => l,
            None => {
                tokens.push(r.label.clone());
                tokens.len() - 1
            }
        };
        rows.push(Row { x, label });
    }
    if spec.count > 0 && tokens.len() < 2 {
        return Err(CliError::Generator(
            "planting needs at least two distinct labels".into(),
        ));
    }

    let mut rng = seeded(seed);
    let budget = (100 * spec.count).max(100);
    let mut attempts = 0usize;
    let mut spend = |what: &str| {
        attempts += 1;
        if attempts > budget {
            Err(CliError::Generator(format!(
                "no violation-free {what} after {budget} resample attempts"
            )))
        } else {
            Ok(())
        }
    };
    let collides = |a: &Row, b: &Row| a.label != b.label && metric.within(&a.x, &b.x);

    for i in 0..n {
        while rows[..i].iter().any(|p| collides(p, &rows[i])) {
            spend("base stream")?;
            rows[i].x = bounds.iter().map(|&(lo, hi)| rng.gen_range(lo..hi)).collect();
        }
    }

    let originals = rand::seq::index::sample(&mut rng, n, spec.count).into_vec();
    let d = bounds.len() as f64;
    let radius = match spec.norm {
        Norm::LInf => spec.epsilon / 2.0,
        Norm::L2 => spec.epsilon / (2.0 * d.sqrt()),
    };
    let mut copies: Vec<(usize, Row)> = Vec::with_capacity(spec.count);
    for &o in &originals {
        loop {
            let x: Vec<f64> = rows[o]
                .x
                .iter()
                .zip(&bounds)
                .map(|(&v, &(lo, hi))| {
                    let y = v + rng.gen_range(-radius..=radius);
                    y.clamp(lo, prev_float(hi))
                })
                .collect();
            let shift = rng.gen_range(1..tokens.len());
            let copy = Row {
                x,
                label: (rows[o].label + shift) % tokens.len(),
            };
            let clean = rows
                .iter()
                .enumerate()
                .all(|(j, p)| j == o || !collides(p, &copy))
                && copies.iter().all(|(_, c)| !collides(c, &copy));
            if clean && collides(&rows[o], &copy) {
                copies.push((o, copy));
                break;
            }
            spend("planted copy")?;
        }
    }

    // Base rows are referenced as Ok(index), copies as Err(index).
    let mut order: Vec<std::result::Result<usize, usize>> = (0..n).map(Ok).collect();
    for (c, &(o, _)) in copies.iter().enumerate() {
        let after = order.iter().position(|e| *e == Ok(o)).expect("original present");
        let at = rng.gen_range(after + 1..=order.len());
        order.insert(at, Err(c));
    }

    let mut ids = vec![(0u64, 0u64); copies.len()];
    let mut records = Vec::with_capacity(order.len());
    for (id, entry) in order.iter().enumerate() {
        let row = match *entry {
            Ok(i) => {
                for (c, &(o, _)) in copies.iter().enumerate() {
                    if o == i {
                        ids[c].0 = id as u64;
                    }
                }
                &rows[i]
            }
            Err(c) => {
                ids[c].1 = id as u64;
                &copies[c].1
            }
        };
        records.push(Record {
            features: row.x.iter().map(|&v| RawValue::Number(v)).collect(),
            label: tokens[row.label].clone(),
        });
    }
    ids.sort_unstable();
    Ok(Planted {
        dataset: Dataset {
            schema: schema.clone(),
            records,
        },
        pairs: ids,
    })
}

fn numeric_bounds(schema: &Schema) -> Result<Vec<(f64, f64)>> {
    schema
        .columns
        .iter()
        .map(|c| match c.kind {
            ColumnKind::Numeric {
                lower: Some(lo),
                upper: Some(hi),
            } => Ok((lo, hi)),
            _ => Err(CliError::Generator(format!(
                "column `{}`: planting needs bounded numeric columns only",
                c.name
            ))),
        })
        .collect()
}

fn prev_float(x: f64) -> f64 {
    // largest double below a positive finite x
    if x > 0.0 {
        f64::from_bits(x.to_bits() - 1)
    } else if x == 0.0 {
        -f64::MIN_POSITIVE
    } else {
        f64::from_bits(x.to_bits() + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_is_deterministic() {
        assert_eq!(uniform(50, 3, 2, 9).unwrap(), uniform(50, 3, 2, 9).unwrap());
        assert_ne!(uniform(50, 3, 2, 9).unwrap(), uniform(50, 3, 2, 10).unwrap());
        assert!(uniform(0, 3, 2, 9).unwrap().records.is_empty());
        let d = uniform(200, 12, 3, 1).unwrap();
        assert_eq!(d.schema.columns.len(), 12);
        for r in &d.records {
            assert!(r.features.iter().all(|v| matches!(v, RawValue::Number(x) if (0.0..1.0).contains(x))));
            assert!(["0", "1", "2"].contains(&r.label.as_str()));
        }
    }

    #[test]
    fn prev_float_steps_down() {
        assert!(prev_float(1.0) < 1.0);
        assert_eq!(prev_float(1.0), 1.0 - f64::EPSILON / 2.0);
        assert!(prev_float(-2.0) < -2.0);
    }

    #[test]
    fn copies_follow_originals() {
        let base = uniform(300, 4, 2, 3).unwrap();
        let spec = PlantSpec {
            count: 10,
            epsilon: 0.1,
            norm: Norm::L2,
        };
        let p = plant(&base, spec, 4).unwrap();
        assert_eq!(p.dataset.records.len(), 310);
        assert_eq!(p.pairs.len(), 10);
        for &(o, c) in &p.pairs {
            assert!(o < c);
            let (a, b) = (&p.dataset.records[o as usize], &p.dataset.records[c as usize]);
            assert_ne!(a.label, b.label);
        }
    }

    #[test]
    fn plant_errors() {
        let base = uniform(5, 2, 2, 0).unwrap();
        let spec = PlantSpec {
            count: 6,
            epsilon: 0.1,
            norm: Norm::LInf,
        };
        assert!(plant(&base, spec, 0).is_err());
        let one_label = uniform(20, 2, 1, 0).unwrap();
        assert!(plant(&one_label, PlantSpec { count: 1, ..spec }, 0).is_err());
        // a stream this dense cannot be made violation-free
        let dense = uniform(500, 1, 2, 0).unwrap();
        let err = plant(&dense, PlantSpec { count: 1, epsilon: 0.5, ..spec }, 0).unwrap_err();
        assert!(err.to_string().contains("resample"), "{err}");
    }
}
