//! Dimension decomposition for L∞ monitoring.
//!
//! Under L∞, two inputs are within `epsilon` iff they are within `epsilon`
//! on every group of columns. The wrapper splits the columns into blocks,
//! runs one sub-monitor per block on the projected points, and intersects
//! the candidate ids. Sub-monitors see every projected point under a label
//! unique to its id, so they act as plain neighbour searches; the output
//! test is applied once, after the intersection.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{MonitorError, Result};
use crate::model::{
    Counters, DecisionPoint, Footprint, Label, MetricSpec, Monitor, Norm, Schema, StoredPoint,
    StreamOrder, WitnessReport,
};
use crate::scalar::Scalar;

/// A group of schema columns handled by one sub-monitor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Block {
    /// Contiguous run of numeric columns (schema positions).
    Numeric(Vec<usize>),
    /// Every categorical column, matched by equality.
    Categorical(Vec<usize>),
}

impl Block {
    pub fn columns(&self) -> &[usize] {
        match self {
            Block::Numeric(c) | Block::Categorical(c) => c,
        }
    }
}

/// Partition of a schema's compared columns into blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockPlan {
    pub blocks: Vec<Block>,
}

impl BlockPlan {
    /// Splits numeric columns into `k` contiguous groups of near-equal size,
    /// the first groups taking one extra column each when `k` does not divide
    /// the count. `k` is capped at the number of numeric columns. Categorical
    /// columns, if any, form one extra block.
    pub fn new(schema: &Schema, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(MonitorError::Config("block count must be at least 1".into()));
        }
        let numeric = schema.numeric_columns();
        let k = k.min(numeric.len());
        let mut blocks = Vec::new();
        let mut rest = &numeric[..];
        for b in 0..k {
            let size = numeric.len() / k + usize::from(b < numeric.len() % k);
            let (head, tail) = rest.split_at(size);
            blocks.push(Block::Numeric(head.to_vec()));
            rest = tail;
        }
        let cats = schema.categorical_columns();
        if !cats.is_empty() {
            blocks.push(Block::Categorical(cats));
        }
        Ok(BlockPlan { blocks })
    }

    /// One block per numeric column, up to the available parallelism.
    pub fn default_k(schema: &Schema) -> usize {
        let threads = std::thread::available_parallelism().map_or(1, usize::from);
        schema.numeric_columns().len().min(threads).max(1)
    }

    pub fn numeric_blocks(&self) -> usize {
        self.blocks
            .iter()
            .filter(|b| matches!(b, Block::Numeric(_)))
            .count()
    }
}

/// The point restricted to `columns`, keeping its id and label.
pub fn project<T: Scalar>(p: &DecisionPoint<T>, columns: &[usize]) -> DecisionPoint<T> {
    DecisionPoint {
        id: p.id,
        features: columns.iter().map(|&c| p.features[c]).collect(),
        label: p.label,
    }
}

/// Exact-match index over categorical values.
pub struct EqualityMonitor {
    schema: Arc<Schema>,
    groups: HashMap<Box<[u32]>, Vec<u64>>,
    stored: u64,
    order: StreamOrder,
    counters: Counters,
}

impl EqualityMonitor {
    pub fn new(schema: Arc<Schema>) -> Self {
        EqualityMonitor {
            schema,
            groups: HashMap::new(),
            stored: 0,
            order: StreamOrder::default(),
            counters: Counters::default(),
        }
    }
}

impl<T: Scalar> Monitor<T> for EqualityMonitor {
    /// Reports every earlier point with identical categorical values.
    fn observe(&mut self, p: &DecisionPoint<T>) -> Result<WitnessReport> {
        self.order.check(p.id)?;
        let q = StoredPoint::from_point(&self.schema, p)?;
        let group = self.groups.entry(q.cats).or_default();
        let ids = group.clone();
        group.push(p.id);
        self.stored += 1;
        self.order.advance(p.id);
        self.counters.observed += 1;
        Ok(WitnessReport::new(p.id, ids))
    }

    fn counters(&self) -> Counters {
        self.counters
    }

    fn footprint(&self) -> Footprint {
        Footprint {
            points_stored: self.stored,
            index_nodes: self.groups.len() as u64,
            bdd_nodes: 0,
        }
    }

    fn name(&self) -> &'static str {
        "equality"
    }
}

struct BlockMonitor<T: Scalar> {
    columns: Vec<usize>,
    monitor: Box<dyn Monitor<T>>,
}

/// Builds the sub-monitor of one numeric block from its projected schema.
pub type SubMonitorFactory<'a, T> =
    dyn Fn(Arc<Schema>, MetricSpec<T>) -> Result<Box<dyn Monitor<T>>> + 'a;

pub struct ParallelMonitor<T: Scalar> {
    schema: Arc<Schema>,
    metric: MetricSpec<T>,
    plan: BlockPlan,
    blocks: Vec<BlockMonitor<T>>,
    // (id, label) of every stored decision, ascending by id
    labels: Vec<(u64, Label)>,
    order: StreamOrder,
    counters: Counters,
    // set once a block fails mid-step; blocks may then disagree on history
    poisoned: bool,
}

impl<T: Scalar> ParallelMonitor<T> {
    pub fn new(
        schema: Arc<Schema>,
        metric: MetricSpec<T>,
        k: usize,
        factory: &SubMonitorFactory<'_, T>,
    ) -> Result<Self> {
        if metric.norm != Norm::LInf {
            return Err(MonitorError::Config(
                "dimension decomposition is exact only under the L∞ norm".into(),
            ));
        }
        let plan = BlockPlan::new(&schema, k)?;
        let blocks = plan
            .blocks
            .iter()
            .map(|block| {
                let sub_schema = Arc::new(schema.project(block.columns()));
                let monitor: Box<dyn Monitor<T>> = match block {
                    Block::Numeric(_) => factory(sub_schema, metric)?,
                    Block::Categorical(_) => Box::new(EqualityMonitor::new(sub_schema)),
                };
                Ok(BlockMonitor {
                    columns: block.columns().to_vec(),
                    monitor,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ParallelMonitor {
            schema,
            metric,
            plan,
            blocks,
            labels: Vec::new(),
            order: StreamOrder::default(),
            counters: Counters::default(),
            poisoned: false,
        })
    }

    pub fn plan(&self) -> &BlockPlan {
        &self.plan
    }

    fn label_of(&self, id: u64) -> Label {
        let i = self
            .labels
            .binary_search_by_key(&id, |&(i, _)| i)
            .expect("every candidate id was stored");
        self.labels[i].1
    }
}

/// Intersection of ascending, duplicate-free id lists.
fn intersect_sorted(mut sets: Vec<Vec<u64>>) -> Vec<u64> {
    sets.sort_by_key(Vec::len);
    let mut iter = sets.into_iter();
    let Some(mut acc) = iter.next() else {
        return Vec::new();
    };
    for set in iter {
        acc.retain(|id| set.binary_search(id).is_ok());
        if acc.is_empty() {
            break;
        }
    }
    acc
}

impl<T: Scalar> Monitor<T> for ParallelMonitor<T> {
    fn observe(&mut self, p: &DecisionPoint<T>) -> Result<WitnessReport> {
        if self.poisoned {
            return Err(MonitorError::Config(
                "a block failed on an earlier point; the monitor must be rebuilt".into(),
            ));
        }
        self.order.check(p.id)?;
        self.schema.check(&p.features)?;
        let unique = Label::unique(p.id);
        let run = |b: &mut BlockMonitor<T>| {
            let mut sub = project(p, &b.columns);
            sub.label = unique;
            b.monitor.observe(&sub).map(|r| r.witness_ids)
        };
        // Each block queries before inserting into itself, and blocks share
        // no state, so no block can see the new point as a candidate.
        let results: Vec<Result<Vec<u64>>> = if self.blocks.len() > 1 {
            self.blocks.par_iter_mut().map(run).collect()
        } else {
            self.blocks.iter_mut().map(run).collect()
        };
        let sets = match results.into_iter().collect::<Result<Vec<_>>>() {
            Ok(sets) => sets,
            Err(e) => {
                self.poisoned = true;
                return Err(e);
            }
        };
        let candidates = intersect_sorted(sets);
        let ids: Vec<u64> = candidates
            .into_iter()
            .filter(|&id| self.metric.outputs_far(self.label_of(id), p.label))
            .collect();
        self.labels.push((p.id, p.label));
        self.order.advance(p.id);
        self.counters.observed += 1;
        Ok(WitnessReport::new(p.id, ids))
    }

    /// Own `observed` count plus the sums of every block's work counters.
    fn counters(&self) -> Counters {
        let mut c = Counters::default();
        for b in &self.blocks {
            c += b.monitor.counters();
        }
        c.observed = self.counters.observed;
        c
    }

    fn footprint(&self) -> Footprint {
        let mut f = Footprint::default();
        for b in &self.blocks {
            f += b.monitor.footprint();
        }
        f
    }

    fn name(&self) -> &'static str {
        "parallel"
    }
}
