//! Bi-level L∞ monitor: an ε-wide grid whose occupied cells are tracked in a
//! BDD, with exact checks on the points of neighbouring cells.
//!
//! Each numeric column is cut into half-open cells of width `epsilon`, so two
//! points within `epsilon` of each other always sit in the same or adjacent
//! cells. The set of occupied cells is a boolean function over the bits of
//! the cell indices. A query intersects it with the set of cells adjacent to
//! its own; only points in the surviving cells are compared exactly.

use std::collections::HashMap;
use std::sync::Arc;

use iomon_bdd::{BddManager, BddRef};

use crate::bruteforce::scan;
use crate::error::{MonitorError, Result};
use crate::model::{
    ColumnKind, Counters, DecisionPoint, Footprint, MetricSpec, Monitor, Norm, Schema,
    StoredPoint, StreamOrder, WitnessReport,
};
use crate::scalar::Scalar;

/// Per-column cell index (numeric) or value index (categorical).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabelVector(pub Vec<u32>);

#[derive(Clone, Debug, PartialEq)]
pub enum GridAxis<T> {
    Numeric {
        name: String,
        lower: T,
        upper: T,
        cells: u32,
        /// position within `StoredPoint::coords`
        source: usize,
    },
    Categorical {
        name: String,
        values: u32,
        /// position within `StoredPoint::cats`
        source: usize,
    },
}

impl<T> GridAxis<T> {
    /// Number of distinct indices on this axis.
    pub fn size(&self) -> u32 {
        match self {
            GridAxis::Numeric { cells, .. } => *cells,
            GridAxis::Categorical { values, .. } => *values,
        }
    }

    pub fn bits(&self) -> u32 {
        bits_for(self.size())
    }
}

fn bits_for(size: u32) -> u32 {
    // ceil(log2(size)); a single index needs no bits
    if size <= 1 {
        0
    } else {
        32 - (size - 1).leading_zeros()
    }
}

/// The ε-wide discretisation of a schema and its BDD variable layout.
#[derive(Clone, Debug)]
pub struct GridSpec<T> {
    width: T,
    axes: Vec<GridAxis<T>>,
    // BDD variable of each bit, most significant bit first, per axis
    vars: Vec<Vec<u32>>,
    // for each variable: its axis and how many of that axis's bits follow it
    owner: Vec<(usize, u32)>,
    num_vars: u32,
}

impl<T: Scalar> GridSpec<T> {
    /// Builds the grid for `schema` with cell width `width`. Every numeric
    /// column needs both bounds; ignored columns are left out.
    pub fn new(schema: &Schema, width: T) -> Result<Self> {
        if !(width > T::zero()) {
            return Err(MonitorError::Config("cell width must be positive".into()));
        }
        let mut axes = Vec::new();
        let (mut num_src, mut cat_src) = (0, 0);
        for col in &schema.columns {
            match &col.kind {
                ColumnKind::Numeric { lower, upper } => {
                    let (Some(lo), Some(hi)) = (*lower, *upper) else {
                        return Err(MonitorError::Config(format!(
                            "grid backend needs bounds on numeric column `{}`",
                            col.name
                        )));
                    };
                    let cells = ((hi - lo) / width.to_f64().expect("finite")).ceil();
                    if !(1.0..=f64::from(1u32 << 31)).contains(&cells) {
                        return Err(MonitorError::Config(format!(
                            "column `{}` would need {cells} cells",
                            col.name
                        )));
                    }
                    axes.push(GridAxis::Numeric {
                        name: col.name.clone(),
                        lower: T::of(lo),
                        upper: T::of(hi),
                        cells: cells as u32,
                        source: num_src,
                    });
                    num_src += 1;
                }
                ColumnKind::Categorical { values } => {
                    axes.push(GridAxis::Categorical {
                        name: col.name.clone(),
                        values: values.len() as u32,
                        source: cat_src,
                    });
                    cat_src += 1;
                }
                ColumnKind::Ignored => {}
            }
        }

        // Interleave: bit j of axis i precedes bit j of axis i + 1, and every
        // axis is read most significant bit first.
        let widths: Vec<u32> = axes.iter().map(GridAxis::bits).collect();
        let mut vars: Vec<Vec<u32>> = widths.iter().map(|&b| Vec::with_capacity(b as usize)).collect();
        let mut next = 0u32;
        for j in 0..widths.iter().copied().max().unwrap_or(0) {
            for (i, &b) in widths.iter().enumerate() {
                if j < b {
                    vars[i].push(next);
                    next += 1;
                }
            }
        }
        let mut owner = vec![(0, 0); next as usize];
        for (i, vs) in vars.iter().enumerate() {
            for (j, &v) in vs.iter().enumerate() {
                owner[v as usize] = (i, (vs.len() - 1 - j) as u32);
            }
        }
        Ok(GridSpec {
            width,
            axes,
            vars,
            owner,
            num_vars: next,
        })
    }

    pub fn width(&self) -> T {
        self.width
    }

    pub fn axes(&self) -> &[GridAxis<T>] {
        &self.axes
    }

    /// Total number of BDD variables.
    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    /// BDD variables of one axis, most significant bit first.
    pub fn axis_vars(&self, axis: usize) -> &[u32] {
        &self.vars[axis]
    }

    /// Cell of every axis. Numeric values map to `floor((x - lower) / width)`
    /// over half-open cells; values outside `[lower, upper)` are an error
    /// unless `clamp` is set, in which case they go to the boundary cell.
    pub fn discretize(&self, p: &StoredPoint<T>, clamp: bool) -> Result<LabelVector> {
        self.axes
            .iter()
            .map(|axis| match axis {
                GridAxis::Numeric {
                    name,
                    lower,
                    upper,
                    cells,
                    source,
                } => {
                    let x = p.coords[*source];
                    if x < *lower || x >= *upper {
                        if !clamp {
                            return Err(MonitorError::Range {
                                column: name.clone(),
                                value: x.to_f64().unwrap_or(f64::NAN),
                                lower: lower.to_f64().unwrap_or(f64::NAN),
                                upper: upper.to_f64().unwrap_or(f64::NAN),
                            });
                        }
                        return Ok(if x < *lower { 0 } else { cells - 1 });
                    }
                    let k = ((x - *lower) / self.width).floor().to_u64().unwrap_or(0);
                    Ok(k.min(u64::from(cells - 1)) as u32)
                }
                GridAxis::Categorical { source, .. } => Ok(p.cats[*source]),
            })
            .collect::<Result<Vec<u32>>>()
            .map(LabelVector)
    }

    /// Discretises a raw decision; see [`GridSpec::discretize`].
    pub fn discretize_point(
        &self,
        schema: &Schema,
        p: &DecisionPoint<T>,
        clamp: bool,
    ) -> Result<LabelVector> {
        self.discretize(&StoredPoint::from_point(schema, p)?, clamp)
    }

    fn axis_literals(&self, axis: usize, index: u32, out: &mut Vec<(u32, bool)>) {
        let vars = &self.vars[axis];
        let bits = vars.len() as u32;
        for (j, &var) in vars.iter().enumerate() {
            out.push((var, (index >> (bits - 1 - j as u32)) & 1 == 1));
        }
    }

    /// Literals fixing every variable to the encoding of `v`.
    pub fn encode(&self, v: &LabelVector) -> Vec<(u32, bool)> {
        let mut lits = Vec::with_capacity(self.num_vars as usize);
        for (axis, &index) in v.0.iter().enumerate() {
            self.axis_literals(axis, index, &mut lits);
        }
        lits
    }

    /// Inverse of [`GridSpec::encode`] for an assignment indexed by variable.
    pub fn decode(&self, assignment: &[bool]) -> LabelVector {
        LabelVector(
            self.vars
                .iter()
                .map(|vars| {
                    vars.iter()
                        .fold(0u32, |acc, &var| (acc << 1) | u32::from(assignment[var as usize]))
                })
                .collect(),
        )
    }

    /// Indices adjacent to `centre` on one axis, as an inclusive range.
    fn neighbor_range(&self, axis: usize, centre: u32) -> (u32, u32) {
        match &self.axes[axis] {
            GridAxis::Numeric { cells, .. } => {
                (centre.saturating_sub(1), (centre + 1).min(cells - 1))
            }
            GridAxis::Categorical { .. } => (centre, centre),
        }
    }

    /// Cells adjacent to `v`: within one cell on every numeric axis and equal
    /// on every categorical axis. `v` itself is included.
    ///
    /// Under the interleaved order this diagram can have a node count
    /// exponential in the number of axes (every axis may be undecided in the
    /// low bits at once), so the monitor uses [`GridSpec::neighbor_hits`].
    pub fn neighbor_predicate(&self, v: &LabelVector, mgr: &mut BddManager) -> BddRef {
        let mut acc = BddRef::TRUE;
        let mut lits = Vec::new();
        for axis in (0..self.axes.len()).rev() {
            let (lo, hi) = self.neighbor_range(axis, v.0[axis]);
            let mut any = BddRef::FALSE;
            for index in lo..=hi {
                lits.clear();
                self.axis_literals(axis, index, &mut lits);
                let cube = mgr.cube(&lits);
                any = mgr.or(any, cube);
            }
            acc = mgr.and(acc, any);
        }
        acc
    }

    /// `seen ∧ neighbor_predicate(v)` for a `seen` that is a union of cells,
    /// computed by walking `seen` under the per-axis index ranges without
    /// building the predicate. Work is bounded by the prefixes of occupied
    /// cells that stay inside the neighbourhood.
    pub fn neighbor_hits(&self, v: &LabelVector, seen: BddRef, mgr: &mut BddManager) -> BddRef {
        let ranges: Vec<(u32, u32)> = (0..self.axes.len())
            .map(|axis| self.neighbor_range(axis, v.0[axis]))
            .collect();
        let mut found = Vec::new();
        let mut prefix = vec![0u32; self.axes.len()];
        let mut path = Vec::with_capacity(self.num_vars as usize);
        self.walk(mgr, seen, &ranges, &mut prefix, &mut path, &mut found);
        let mut hits = BddRef::FALSE;
        for lits in found {
            let cube = mgr.cube(&lits);
            hits = mgr.or(hits, cube);
        }
        hits
    }

    fn walk(
        &self,
        mgr: &BddManager,
        node: BddRef,
        ranges: &[(u32, u32)],
        prefix: &mut [u32],
        path: &mut Vec<(u32, bool)>,
        found: &mut Vec<Vec<(u32, bool)>>,
    ) {
        if node == BddRef::FALSE {
            return;
        }
        let var = path.len() as u32;
        if var == self.num_vars {
            found.push(path.clone());
            return;
        }
        let (axis, rest) = self.owner[var as usize];
        let (lo, hi) = ranges[axis];
        let (low, high) = if mgr.top_var(node) == var {
            mgr.children(node).expect("inner node")
        } else {
            (node, node)
        };
        let saved = prefix[axis];
        for (bit, child) in [(false, low), (true, high)] {
            let p = (saved << 1) | u32::from(bit);
            let first = p << rest;
            let last = first | ((1u32 << rest) - 1);
            if last < lo || first > hi {
                continue;
            }
            prefix[axis] = p;
            path.push((var, bit));
            self.walk(mgr, child, ranges, prefix, path, found);
            path.pop();
        }
        prefix[axis] = saved;
    }
}

/// Which branch a query took.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QueryCase {
    /// No occupied cell near the query.
    Empty,
    /// Only the query's own cell is occupied.
    OwnCell,
    /// Neighbouring cells are occupied and their points are checked exactly.
    Neighbors,
}

pub struct GridMonitor<T> {
    schema: Arc<Schema>,
    metric: MetricSpec<T>,
    grid: GridSpec<T>,
    clamp: bool,
    mgr: BddManager,
    seen: BddRef,
    cells: HashMap<LabelVector, Vec<StoredPoint<T>>>,
    all_vars: Vec<u32>,
    stored: u64,
    order: StreamOrder,
    counters: Counters,
    last_case: Option<QueryCase>,
    /// Manager size (nodes plus memo entries) that triggers a rebuild.
    compact_at: usize,
}

/// Smallest manager size at which the diagram is rebuilt.
const MIN_COMPACT: usize = 1 << 18;

impl<T: Scalar> GridMonitor<T> {
    pub fn new(schema: Arc<Schema>, metric: MetricSpec<T>, clamp: bool) -> Result<Self> {
        if metric.norm != Norm::LInf {
            return Err(MonitorError::Config(
                "grid backend supports the L∞ norm only".into(),
            ));
        }
        let grid = GridSpec::new(&schema, metric.epsilon)?;
        let mgr = BddManager::new(grid.num_vars());
        Ok(GridMonitor {
            all_vars: (0..grid.num_vars()).collect(),
            schema,
            metric,
            grid,
            clamp,
            mgr,
            seen: BddRef::FALSE,
            cells: HashMap::new(),
            stored: 0,
            order: StreamOrder::default(),
            counters: Counters::default(),
            last_case: None,
            compact_at: MIN_COMPACT,
        })
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    pub fn manager(&self) -> &BddManager {
        &self.mgr
    }

    /// The set of occupied cells.
    pub fn seen(&self) -> BddRef {
        self.seen
    }

    pub fn occupied_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell(&self, v: &LabelVector) -> &[StoredPoint<T>] {
        cell_points(&self.cells, v)
    }

    pub fn last_case(&self) -> Option<QueryCase> {
        self.last_case
    }

    /// Rebuilds the occupied-cell diagram in a fresh manager. Every query
    /// leaves intermediate nodes and memo entries behind; without garbage
    /// collection they would grow with the stream.
    fn compact(&mut self) {
        self.mgr.reset();
        let n = self.grid.num_vars as usize;
        let mut rows: Vec<Vec<bool>> = self
            .cells
            .keys()
            .map(|v| {
                let mut bits = vec![false; n];
                for (var, b) in self.grid.encode(v) {
                    bits[var as usize] = b;
                }
                bits
            })
            .collect();
        rows.sort_unstable();
        self.seen = union_of_rows(&mut self.mgr, &rows, 0);
        self.compact_at = (4 * (self.mgr.total_nodes() + self.mgr.cache_len())).max(MIN_COMPACT);
    }

    /// Graphviz dump of the occupied-cell diagram.
    pub fn seen_dot(&self) -> String {
        self.mgr.to_dot(self.seen)
    }
}

fn cell_points<'a, T>(
    cells: &'a HashMap<LabelVector, Vec<StoredPoint<T>>>,
    v: &LabelVector,
) -> &'a [StoredPoint<T>] {
    cells.get(v).map(Vec::as_slice).unwrap_or(&[])
}

impl<T: Scalar> Monitor<T> for GridMonitor<T> {
    fn observe(&mut self, p: &DecisionPoint<T>) -> Result<WitnessReport> {
        self.order.check(p.id)?;
        let q = StoredPoint::from_point(&self.schema, p)?;
        let cell = self.grid.discretize(&q, self.clamp)?;

        let hits = self.grid.neighbor_hits(&cell, self.seen, &mut self.mgr);
        let own = self.mgr.cube(&self.grid.encode(&cell));
        let (case, ids) = if hits == BddRef::FALSE {
            (QueryCase::Empty, Vec::new())
        } else if hits == own {
            // Same-cell points are within epsilon in exact arithmetic; the
            // exact check still runs so rounding cannot admit a pair the
            // linear scan would reject.
            let ids = scan(cell_points(&self.cells, &cell), &q, &self.metric, &mut self.counters);
            (QueryCase::OwnCell, ids)
        } else {
            let mut ids = Vec::new();
            let candidates: Vec<LabelVector> = self
                .mgr
                .sat_all(hits, &self.all_vars)
                .map(|a| self.grid.decode(&a))
                .collect();
            for w in &candidates {
                ids.extend(scan(cell_points(&self.cells, w), &q, &self.metric, &mut self.counters));
            }
            (QueryCase::Neighbors, ids)
        };
        match case {
            QueryCase::Empty => self.counters.case_a += 1,
            QueryCase::OwnCell => self.counters.case_b += 1,
            QueryCase::Neighbors => self.counters.case_c += 1,
        }
        self.last_case = Some(case);

        self.seen = self.mgr.or(self.seen, own);
        self.cells.entry(cell).or_default().push(q);
        if self.mgr.total_nodes() + self.mgr.cache_len() > self.compact_at {
            self.compact();
        }
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
            index_nodes: self.cells.len() as u64,
            bdd_nodes: self.mgr.node_count(self.seen) as u64,
        }
    }

    fn name(&self) -> &'static str {
        "bdd"
    }
}

/// Union of the full assignments in `rows` (sorted, all over the same
/// variables), built bottom-up so no intermediate nodes are left behind.
fn union_of_rows(mgr: &mut BddManager, rows: &[Vec<bool>], var: usize) -> BddRef {
    if rows.is_empty() {
        return BddRef::FALSE;
    }
    if var == rows[0].len() {
        return BddRef::TRUE;
    }
    let split = rows.partition_point(|r| !r[var]);
    let lo = union_of_rows(mgr, &rows[..split], var + 1);
    let hi = union_of_rows(mgr, &rows[split..], var + 1);
    mgr.branch(var as u32, lo, hi)
}
