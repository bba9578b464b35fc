//! Static k-d tree with fixed-radius queries under L2 and L∞.
//!
//! The tree indexes numeric coordinates only. Labels and categorical values
//! are checked when a leaf's points are examined.

use crate::model::{Counters, MetricSpec, Norm, StoredPoint};
use crate::periodic::StaticIndex;
use crate::scalar::Scalar;

pub const DEFAULT_LEAF_CAPACITY: usize = 16;

#[derive(Clone, Debug)]
enum NodeKind<T> {
    Leaf { start: usize, end: usize },
    Split { dim: usize, value: T, left: usize, right: usize },
}

#[derive(Clone, Debug)]
struct KdNode<T> {
    // tight bounding box of the subtree's points
    lo: Box<[T]>,
    hi: Box<[T]>,
    kind: NodeKind<T>,
}

#[derive(Clone, Debug)]
pub struct KdTree<T> {
    points: Vec<StoredPoint<T>>,
    nodes: Vec<KdNode<T>>,
    leaf_capacity: usize,
}

impl<T: Scalar> KdTree<T> {
    /// Builds a tree by splitting at the median of the widest dimension.
    ///
    /// The layout depends only on the input order, so rebuilding from the
    /// same points gives the same tree.
    pub fn build(mut points: Vec<StoredPoint<T>>, leaf_capacity: usize) -> Self {
        let leaf_capacity = leaf_capacity.max(1);
        let mut nodes = Vec::new();
        if !points.is_empty() {
            let n = points.len();
            build_rec(&mut points, 0, n, leaf_capacity, &mut nodes);
        }
        KdTree {
            points,
            nodes,
            leaf_capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_capacity(&self) -> usize {
        self.leaf_capacity
    }

    /// Ids stored in leaves, in leaf order.
    pub fn leaf_ids(&self) -> Vec<u64> {
        self.points.iter().map(|p| p.id).collect()
    }

    /// Witnesses of `query` among the stored points, ascending.
    pub fn range_query(
        &self,
        query: &StoredPoint<T>,
        metric: &MetricSpec<T>,
        counters: &mut Counters,
    ) -> Vec<u64> {
        let mut out = Vec::new();
        if self.nodes.is_empty() {
            return out;
        }
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            counters.nodes_visited += 1;
            if box_distance(metric, &node.lo, &node.hi, &query.coords) > metric.epsilon {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, end } => {
                    for p in &self.points[start..end] {
                        counters.comparisons += 1;
                        if metric.is_witness(p, query) {
                            out.push(p.id);
                        }
                    }
                }
                NodeKind::Split { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Checks the split-ordering and bounding-box invariants.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.nodes.is_empty() {
            return Ok(());
        }
        self.check_node(0).map(|_| ())
    }

    fn check_node(&self, i: usize) -> Result<(usize, usize), String> {
        let node = &self.nodes[i];
        let (start, end) = match node.kind {
            NodeKind::Leaf { start, end } => (start, end),
            NodeKind::Split {
                dim,
                value,
                left,
                right,
            } => {
                let (ls, le) = self.check_node(left)?;
                let (rs, re) = self.check_node(right)?;
                if le != rs {
                    return Err(format!("node {i}: children are not contiguous"));
                }
                if self.points[ls..le].iter().any(|p| p.coords[dim] > value) {
                    return Err(format!("node {i}: left point above split value"));
                }
                if self.points[rs..re].iter().any(|p| p.coords[dim] < value) {
                    return Err(format!("node {i}: right point below split value"));
                }
                (ls, re)
            }
        };
        for p in &self.points[start..end] {
            for (d, &x) in p.coords.iter().enumerate() {
                if x < node.lo[d] || x > node.hi[d] {
                    return Err(format!("node {i}: point {} outside bounding box", p.id));
                }
            }
        }
        Ok((start, end))
    }
}

fn bounds<T: Scalar>(points: &[StoredPoint<T>]) -> (Box<[T]>, Box<[T]>) {
    let dims = points[0].coords.len();
    let mut lo = points[0].coords.clone();
    let mut hi = points[0].coords.clone();
    for p in &points[1..] {
        for d in 0..dims {
            lo[d] = lo[d].min(p.coords[d]);
            hi[d] = hi[d].max(p.coords[d]);
        }
    }
    (lo, hi)
}

fn build_rec<T: Scalar>(
    points: &mut [StoredPoint<T>],
    offset: usize,
    end: usize,
    leaf_capacity: usize,
    nodes: &mut Vec<KdNode<T>>,
) -> usize {
    let slice = &mut points[offset..end];
    let (lo, hi) = bounds(slice);
    let index = nodes.len();
    let widest = (0..lo.len())
        .map(|d| (d, hi[d] - lo[d]))
        .fold(None, |best: Option<(usize, T)>, (d, w)| match best {
            Some((_, bw)) if bw >= w => best,
            _ => Some((d, w)),
        });
    let split_dim = match widest {
        Some((d, w)) if slice.len() > leaf_capacity && w > T::zero() => d,
        _ => {
            nodes.push(KdNode {
                lo,
                hi,
                kind: NodeKind::Leaf { start: offset, end },
            });
            return index;
        }
    };
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |a, b| {
        a.coords[split_dim]
            .partial_cmp(&b.coords[split_dim])
            .expect("finite coordinates")
            .then(a.id.cmp(&b.id))
    });
    let value = slice[mid].coords[split_dim];
    // placeholder, patched once the children exist
    nodes.push(KdNode {
        lo,
        hi,
        kind: NodeKind::Leaf { start: offset, end },
    });
    let left = build_rec(points, offset, offset + mid, leaf_capacity, nodes);
    let right = build_rec(points, offset + mid, end, leaf_capacity, nodes);
    nodes[index].kind = NodeKind::Split {
        dim: split_dim,
        value,
        left,
        right,
    };
    index
}

/// Distance from `q` to the box `[lo, hi]`, computed term by term like
/// [`crate::model::numeric_distance`] so that it never exceeds the computed distance to
/// any point inside the box.
fn box_distance<T: Scalar>(metric: &MetricSpec<T>, lo: &[T], hi: &[T], q: &[T]) -> T {
    let zero = T::zero();
    let gap = |d: usize| {
        if q[d] < lo[d] {
            lo[d] - q[d]
        } else if q[d] > hi[d] {
            q[d] - hi[d]
        } else {
            zero
        }
    };
    match metric.norm {
        Norm::L2 => (0..q.len())
            .fold(zero, |acc, d| {
                let g = gap(d);
                acc + g * g
            })
            .sqrt(),
        Norm::LInf => (0..q.len()).fold(zero, |acc, d| acc.max(gap(d))),
    }
}

impl<T: Scalar> StaticIndex<T> for KdTree<T> {
    type Params = usize;

    fn build(points: Vec<StoredPoint<T>>, leaf_capacity: &usize) -> Self {
        KdTree::build(points, *leaf_capacity)
    }

    fn query(
        &self,
        query: &StoredPoint<T>,
        metric: &MetricSpec<T>,
        counters: &mut Counters,
    ) -> Vec<u64> {
        self.range_query(query, metric, counters)
    }

    fn into_points(self) -> Vec<StoredPoint<T>> {
        self.points
    }

    fn len(&self) -> usize {
        self.points.len()
    }

    fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn name() -> &'static str {
        "kdtree"
    }
}
