//! A small reduced ordered binary decision diagram (ROBDD) engine.
//!
//! Nodes live in a single [`BddManager`] and are hash-consed, so two
//! semantically equal functions built in the same manager always share a
//! [`BddRef`]. Variables are identified by their position in the fixed
//! order: variable `0` is tested first (closest to the root).
//!
//! The engine is deliberately plain: no complement edges, no garbage
//! collection and no dynamic reordering. Callers that need a different
//! variable order map their own variables onto positions before building.

use std::collections::{HashMap, HashSet};
use std::fmt::{self, Write as _};

/// Handle to a node inside the [`BddManager`] that created it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BddRef(u32);

impl BddRef {
    /// The constant-false terminal.
    pub const FALSE: BddRef = BddRef(0);
    /// The constant-true terminal.
    pub const TRUE: BddRef = BddRef(1);

    pub fn id(self) -> u32 {
        self.0
    }

    pub fn is_terminal(self) -> bool {
        self.0 < 2
    }
}

impl fmt::Display for BddRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            BddRef::FALSE => f.write_str("⊥"),
            BddRef::TRUE => f.write_str("⊤"),
            BddRef(id) => write!(f, "#{id}"),
        }
    }
}

/// Binary connectives supported by [`BddManager::apply`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoolOp {
    And,
    Or,
    Xor,
}

impl BoolOp {
    pub fn eval(self, a: bool, b: bool) -> bool {
        match self {
            BoolOp::And => a && b,
            BoolOp::Or => a || b,
            BoolOp::Xor => a != b,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct Node {
    var: u32,
    lo: BddRef,
    hi: BddRef,
}

/// Owner of every node and memo table.
///
/// A `BddRef` is only meaningful for the manager that produced it.
#[derive(Clone, Debug)]
pub struct BddManager {
    num_vars: u32,
    nodes: Vec<Node>,
    unique: HashMap<Node, BddRef>,
    apply_cache: HashMap<(BoolOp, BddRef, BddRef), BddRef>,
    not_cache: HashMap<BddRef, BddRef>,
}

impl BddManager {
    /// Creates a manager over variables `0..num_vars`.
    pub fn new(num_vars: u32) -> Self {
        // Terminals sit "below" every variable so level comparisons need no
        // special casing.
        let terminal = |id| Node {
            var: num_vars,
            lo: BddRef(id),
            hi: BddRef(id),
        };
        BddManager {
            num_vars,
            nodes: vec![terminal(0), terminal(1)],
            unique: HashMap::new(),
            apply_cache: HashMap::new(),
            not_cache: HashMap::new(),
        }
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    /// Total nodes held by the manager, terminals included.
    pub fn total_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Number of memoized `apply`/`not` results.
    pub fn cache_len(&self) -> usize {
        self.apply_cache.len() + self.not_cache.len()
    }

    /// Drops every node and cache entry. All outstanding refs except the
    /// terminals become invalid.
    pub fn reset(&mut self) {
        self.nodes.truncate(2);
        self.unique.clear();
        self.apply_cache.clear();
        self.not_cache.clear();
    }

    pub fn constant(&self, value: bool) -> BddRef {
        if value {
            BddRef::TRUE
        } else {
            BddRef::FALSE
        }
    }

    /// The projection function for one variable.
    pub fn var(&mut self, var: u32) -> BddRef {
        self.mk(var, BddRef::FALSE, BddRef::TRUE)
    }

    /// Variable tested at `f`, or `num_vars` for terminals.
    pub fn top_var(&self, f: BddRef) -> u32 {
        self.node(f).var
    }

    /// `(low, high)` children of a non-terminal node.
    pub fn children(&self, f: BddRef) -> Option<(BddRef, BddRef)> {
        if f.is_terminal() {
            None
        } else {
            let n = self.node(f);
            Some((n.lo, n.hi))
        }
    }

    fn node(&self, f: BddRef) -> Node {
        self.nodes[f.0 as usize]
    }

    fn mk(&mut self, var: u32, lo: BddRef, hi: BddRef) -> BddRef {
        assert!(var < self.num_vars, "variable {var} out of range");
        if lo == hi {
            return lo;
        }
        debug_assert!(self.top_var(lo) > var && self.top_var(hi) > var);
        let node = Node { var, lo, hi };
        if let Some(&r) = self.unique.get(&node) {
            return r;
        }
        let r = BddRef(u32::try_from(self.nodes.len()).expect("node store exhausted"));
        self.nodes.push(node);
        self.unique.insert(node, r);
        r
    }

    pub fn not(&mut self, f: BddRef) -> BddRef {
        match f {
            BddRef::FALSE => return BddRef::TRUE,
            BddRef::TRUE => return BddRef::FALSE,
            _ => {}
        }
        if let Some(&r) = self.not_cache.get(&f) {
            return r;
        }
        let n = self.node(f);
        let lo = self.not(n.lo);
        let hi = self.not(n.hi);
        let r = self.mk(n.var, lo, hi);
        self.not_cache.insert(f, r);
        self.not_cache.insert(r, f);
        r
    }

    pub fn and(&mut self, f: BddRef, g: BddRef) -> BddRef {
        self.apply(BoolOp::And, f, g)
    }

    pub fn or(&mut self, f: BddRef, g: BddRef) -> BddRef {
        self.apply(BoolOp::Or, f, g)
    }

    pub fn xor(&mut self, f: BddRef, g: BddRef) -> BddRef {
        self.apply(BoolOp::Xor, f, g)
    }

    /// Canonical diagram of `op(f, g)`.
    pub fn apply(&mut self, op: BoolOp, f: BddRef, g: BddRef) -> BddRef {
        if let Some(r) = self.apply_terminal(op, f, g) {
            return r;
        }
        // every supported op is commutative
        let (f, g) = if f <= g { (f, g) } else { (g, f) };
        let key = (op, f, g);
        if let Some(&r) = self.apply_cache.get(&key) {
            return r;
        }
        let nf = self.node(f);
        let ng = self.node(g);
        let var = nf.var.min(ng.var);
        let (f0, f1) = if nf.var == var { (nf.lo, nf.hi) } else { (f, f) };
        let (g0, g1) = if ng.var == var { (ng.lo, ng.hi) } else { (g, g) };
        let lo = self.apply(op, f0, g0);
        let hi = self.apply(op, f1, g1);
        let r = self.mk(var, lo, hi);
        self.apply_cache.insert(key, r);
        r
    }

    fn apply_terminal(&mut self, op: BoolOp, f: BddRef, g: BddRef) -> Option<BddRef> {
        use BddRef as B;
        match op {
            BoolOp::And => match (f, g) {
                (B::FALSE, _) | (_, B::FALSE) => Some(B::FALSE),
                (B::TRUE, x) | (x, B::TRUE) => Some(x),
                _ if f == g => Some(f),
                _ => None,
            },
            BoolOp::Or => match (f, g) {
                (B::TRUE, _) | (_, B::TRUE) => Some(B::TRUE),
                (B::FALSE, x) | (x, B::FALSE) => Some(x),
                _ if f == g => Some(f),
                _ => None,
            },
            BoolOp::Xor => match (f, g) {
                (B::FALSE, x) | (x, B::FALSE) => Some(x),
                (B::TRUE, x) | (x, B::TRUE) => Some(self.not(x)),
                _ if f == g => Some(B::FALSE),
                _ => None,
            },
        }
    }

    /// The function `if var then hi else lo`. Both branches must have their
    /// top variable below `var`.
    pub fn branch(&mut self, var: u32, lo: BddRef, hi: BddRef) -> BddRef {
        assert!(
            self.top_var(lo) > var && self.top_var(hi) > var,
            "branch on {var} above a child that depends on an earlier variable"
        );
        self.mk(var, lo, hi)
    }

    /// Conjunction of literals. Later entries for a repeated variable win.
    pub fn cube(&mut self, literals: &[(u32, bool)]) -> BddRef {
        let mut lits: Vec<(u32, bool)> = literals.to_vec();
        lits.sort_by_key(|&(v, _)| v);
        lits.dedup_by(|later, earlier| {
            if later.0 == earlier.0 {
                earlier.1 = later.1;
                true
            } else {
                false
            }
        });
        let mut acc = BddRef::TRUE;
        for &(var, value) in lits.iter().rev() {
            acc = if value {
                self.mk(var, BddRef::FALSE, acc)
            } else {
                self.mk(var, acc, BddRef::FALSE)
            };
        }
        acc
    }

    /// Co-factor of `f` with `var` fixed to `value`.
    pub fn restrict(&mut self, f: BddRef, var: u32, value: bool) -> BddRef {
        let mut memo = HashMap::new();
        self.restrict_rec(f, var, value, &mut memo)
    }

    fn restrict_rec(
        &mut self,
        f: BddRef,
        var: u32,
        value: bool,
        memo: &mut HashMap<BddRef, BddRef>,
    ) -> BddRef {
        let n = self.node(f);
        if n.var > var {
            return f;
        }
        if n.var == var {
            return if value { n.hi } else { n.lo };
        }
        if let Some(&r) = memo.get(&f) {
            return r;
        }
        let lo = self.restrict_rec(n.lo, var, value, memo);
        let hi = self.restrict_rec(n.hi, var, value, memo);
        let r = self.mk(n.var, lo, hi);
        memo.insert(f, r);
        r
    }

    /// Evaluates `f` on a total assignment indexed by variable.
    pub fn eval(&self, f: BddRef, assignment: &[bool]) -> bool {
        let mut cur = f;
        while !cur.is_terminal() {
            let n = self.node(cur);
            cur = if assignment[n.var as usize] { n.hi } else { n.lo };
        }
        cur == BddRef::TRUE
    }

    /// Follows one edge of `f` for `var` when `f` tests it; otherwise `f`
    /// does not depend on `var` at this point.
    fn cofactor_top(&self, f: BddRef, var: u32, value: bool) -> BddRef {
        let n = self.node(f);
        assert!(
            n.var >= var,
            "variable {} in support but missing from enumeration list",
            n.var
        );
        if n.var == var {
            if value {
                n.hi
            } else {
                n.lo
            }
        } else {
            f
        }
    }

    /// Enumerates the satisfying assignments of `f` over `vars`.
    ///
    /// `vars` must be strictly ascending and cover the support of `f`. Each
    /// yielded assignment is aligned with `vars`; variables the diagram
    /// skips are expanded to both values. Assignments come out in
    /// lexicographic order (false before true, earlier variables first).
    pub fn sat_all<'a>(&'a self, f: BddRef, vars: &[u32]) -> SatIter<'a> {
        assert!(
            vars.windows(2).all(|w| w[0] < w[1]),
            "enumeration variables must be strictly ascending"
        );
        let path = if f == BddRef::FALSE {
            Vec::new()
        } else {
            vec![(f, 0u8)]
        };
        SatIter {
            mgr: self,
            vars: vars.to_vec(),
            path,
            current: vec![false; vars.len()],
        }
    }

    /// Number of satisfying assignments over all `num_vars` variables.
    pub fn sat_count(&self, f: BddRef) -> u128 {
        let mut memo = HashMap::new();
        let top = self.top_var(f);
        self.sat_count_rec(f, &mut memo) << top
    }

    fn sat_count_rec(&self, f: BddRef, memo: &mut HashMap<BddRef, u128>) -> u128 {
        match f {
            BddRef::FALSE => return 0,
            BddRef::TRUE => return 1,
            _ => {}
        }
        if let Some(&c) = memo.get(&f) {
            return c;
        }
        let n = self.node(f);
        let lo = self.sat_count_rec(n.lo, memo) << (self.top_var(n.lo) - n.var - 1);
        let hi = self.sat_count_rec(n.hi, memo) << (self.top_var(n.hi) - n.var - 1);
        memo.insert(f, lo + hi);
        lo + hi
    }

    /// Nodes reachable from `f`, terminals included.
    pub fn node_count(&self, f: BddRef) -> usize {
        self.reachable(f).len()
    }

    fn reachable(&self, f: BddRef) -> Vec<BddRef> {
        let mut seen = HashSet::new();
        let mut order = Vec::new();
        let mut stack = vec![f];
        while let Some(r) = stack.pop() {
            if !seen.insert(r) {
                continue;
            }
            order.push(r);
            if !r.is_terminal() {
                let n = self.node(r);
                stack.push(n.hi);
                stack.push(n.lo);
            }
        }
        order
    }

    /// Variables `f` actually depends on, ascending.
    pub fn support(&self, f: BddRef) -> Vec<u32> {
        let mut vars: Vec<u32> = self
            .reachable(f)
            .into_iter()
            .filter(|r| !r.is_terminal())
            .map(|r| self.node(r).var)
            .collect();
        vars.sort_unstable();
        vars.dedup();
        vars
    }

    /// Checks the reduction, uniqueness and ordering rules over the whole
    /// node store.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut triples = HashSet::new();
        for (id, n) in self.nodes.iter().enumerate().skip(2) {
            if n.lo == n.hi {
                return Err(format!("node #{id} has identical children"));
            }
            if !triples.insert((n.var, n.lo, n.hi)) {
                return Err(format!("node #{id} duplicates another triple"));
            }
            for child in [n.lo, n.hi] {
                if self.top_var(child) <= n.var {
                    return Err(format!("node #{id} violates the variable order"));
                }
            }
        }
        Ok(())
    }

    /// Graphviz rendering of the diagram rooted at `f`.
    pub fn to_dot(&self, f: BddRef) -> String {
        let mut out = String::from("digraph bdd {\n");
        let mut nodes = self.reachable(f);
        nodes.sort();
        for r in nodes {
            match r {
                BddRef::FALSE => out.push_str("  n0 [shape=box,label=\"0\"];\n"),
                BddRef::TRUE => out.push_str("  n1 [shape=box,label=\"1\"];\n"),
                _ => {
                    let n = self.node(r);
                    let _ = writeln!(out, "  n{} [label=\"x{}\"];", r.0, n.var);
                    let _ = writeln!(out, "  n{} -> n{} [style=dashed];", r.0, n.lo.0);
                    let _ = writeln!(out, "  n{} -> n{};", r.0, n.hi.0);
                }
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Iterator returned by [`BddManager::sat_all`].
pub struct SatIter<'a> {
    mgr: &'a BddManager,
    vars: Vec<u32>,
    // (node reached at this depth, next branch to try: 0, 1, or 2 = done)
    path: Vec<(BddRef, u8)>,
    current: Vec<bool>,
}

impl Iterator for SatIter<'_> {
    type Item = Vec<bool>;

    fn next(&mut self) -> Option<Vec<bool>> {
        while let Some(&(node, branch)) = self.path.last() {
            let depth = self.path.len() - 1;
            if depth == self.vars.len() {
                self.path.pop();
                assert_eq!(
                    node,
                    BddRef::TRUE,
                    "enumeration variables do not cover the support"
                );
                return Some(self.current.clone());
            }
            if branch == 2 {
                self.path.pop();
                continue;
            }
            self.path.last_mut().expect("non-empty").1 += 1;
            let bit = branch == 1;
            let child = self.mgr.cofactor_top(node, self.vars[depth], bit);
            if child == BddRef::FALSE {
                continue;
            }
            self.current[depth] = bit;
            self.path.push((child, 0));
        }
        None
    }
}
