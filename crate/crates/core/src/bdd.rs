//! Reduced ordered binary decision diagrams with hash-consed apply.
//!
//! The manager owns a node table indexed by [`BddRef`]; references are only
//! meaningful within the manager that produced them. Diagrams are reduced
//! (no redundant tests, no duplicate triples) and ordered, so two equivalent
//! formulas compiled under the same order yield the same reference.

use std::collections::HashMap;

use thiserror::Error;

use crate::circuit::{Circuit, CircuitBuilder, NodeId};
use crate::logic::{Expr, Formula, VarId};

/// Default cap on the node table; compilation aborts instead of thrashing.
pub const DEFAULT_NODE_CAP: usize = 10_000_000;

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("node table exceeded the cap of {cap} nodes (compilation blowup)")]
    Blowup { cap: usize },
    #[error("formula universe has {formula} variables but the order covers {order}")]
    UniverseMismatch { formula: usize, order: usize },
}

/// Binary Boolean connectives supported by [`BddManager::apply`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoolOp {
    And,
    Or,
    Xor,
}

/// Reference to a node (or terminal) in a [`BddManager`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BddRef(u32);

impl BddRef {
    pub const FALSE: BddRef = BddRef(0);
    pub const TRUE: BddRef = BddRef(1);

    pub fn is_terminal(self) -> bool {
        self.0 < 2
    }

    fn node_index(self) -> usize {
        debug_assert!(!self.is_terminal());
        self.0 as usize - 2
    }

    fn from_node_index(i: usize) -> BddRef {
        BddRef(i as u32 + 2)
    }
}

#[derive(Debug, Clone, Copy)]
struct BddNode {
    var: VarId,
    lo: BddRef,
    hi: BddRef,
}

/// A permutation of the universe giving each variable a decision level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarOrder {
    by_level: Vec<VarId>,
    level_of: Vec<u32>,
}

impl VarOrder {
    /// Natural index order over `1..=n`.
    pub fn natural(n: usize) -> VarOrder {
        VarOrder::from_vars((1..=n as u32).map(VarId::new).collect())
            .expect("identity is a permutation")
    }

    /// Order by first occurrence in a depth-first walk of the formula;
    /// unmentioned variables follow in natural order.
    pub fn first_occurrence(f: &Formula) -> VarOrder {
        let n = f.universe();
        let mut seen = vec![false; n];
        let mut vars = Vec::with_capacity(n);
        fn walk(e: &Expr, seen: &mut [bool], vars: &mut Vec<VarId>) {
            match e {
                Expr::True | Expr::False => {}
                Expr::Lit(l) => {
                    if !seen[l.var.pos()] {
                        seen[l.var.pos()] = true;
                        vars.push(l.var);
                    }
                }
                Expr::Not(c) => walk(c, seen, vars),
                Expr::And(cs) | Expr::Or(cs) => {
                    for c in cs {
                        walk(c, seen, vars);
                    }
                }
            }
        }
        walk(f.root(), &mut seen, &mut vars);
        for (i, s) in seen.iter().enumerate() {
            if !s {
                vars.push(VarId::new(i as u32 + 1));
            }
        }
        VarOrder::from_vars(vars).expect("walk yields a permutation")
    }

    /// Builds an order from an explicit permutation of the universe.
    pub fn from_vars(by_level: Vec<VarId>) -> Option<VarOrder> {
        let n = by_level.len();
        let mut level_of = vec![u32::MAX; n];
        for (level, var) in by_level.iter().enumerate() {
            if var.pos() >= n || level_of[var.pos()] != u32::MAX {
                return None;
            }
            level_of[var.pos()] = level as u32;
        }
        Some(VarOrder { by_level, level_of })
    }

    pub fn len(&self) -> usize {
        self.by_level.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_level.is_empty()
    }

    pub fn level(&self, var: VarId) -> u32 {
        self.level_of[var.pos()]
    }
}

/// Hash-consed ROBDD node store with an apply cache.
pub struct BddManager {
    nodes: Vec<BddNode>,
    unique: HashMap<(VarId, BddRef, BddRef), BddRef>,
    apply_cache: HashMap<(BoolOp, BddRef, BddRef), BddRef>,
    not_cache: HashMap<BddRef, BddRef>,
    order: VarOrder,
    cap: usize,
}

impl BddManager {
    pub fn new(order: VarOrder) -> BddManager {
        BddManager::with_cap(order, DEFAULT_NODE_CAP)
    }

    pub fn with_cap(order: VarOrder, cap: usize) -> BddManager {
        BddManager {
            nodes: Vec::new(),
            unique: HashMap::new(),
            apply_cache: HashMap::new(),
            not_cache: HashMap::new(),
            order,
            cap,
        }
    }

    pub fn order(&self) -> &VarOrder {
        &self.order
    }

    pub fn universe_size(&self) -> usize {
        self.order.len()
    }

    /// Number of interned decision nodes (terminals excluded).
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn level(&self, r: BddRef) -> u32 {
        if r.is_terminal() {
            self.order.len() as u32
        } else {
            self.order.level(self.nodes[r.node_index()].var)
        }
    }

    /// Interns the decision node `(var, lo, hi)`, applying the reduction
    /// rules: equal branches collapse, duplicate triples are shared.
    pub fn mk(&mut self, var: VarId, lo: BddRef, hi: BddRef) -> Result<BddRef, CompileError> {
        if lo == hi {
            return Ok(lo);
        }
        debug_assert!(self.order.level(var) < self.level(lo).min(self.level(hi)));
        if let Some(&r) = self.unique.get(&(var, lo, hi)) {
            return Ok(r);
        }
        if self.nodes.len() >= self.cap {
            return Err(CompileError::Blowup { cap: self.cap });
        }
        let r = BddRef::from_node_index(self.nodes.len());
        self.nodes.push(BddNode { var, lo, hi });
        self.unique.insert((var, lo, hi), r);
        Ok(r)
    }

    /// The single-variable diagram for a literal.
    pub fn literal(&mut self, var: VarId, positive: bool) -> Result<BddRef, CompileError> {
        if positive {
            self.mk(var, BddRef::FALSE, BddRef::TRUE)
        } else {
            self.mk(var, BddRef::TRUE, BddRef::FALSE)
        }
    }

    /// Memoized complement.
    pub fn not(&mut self, f: BddRef) -> Result<BddRef, CompileError> {
        match f {
            BddRef::FALSE => return Ok(BddRef::TRUE),
            BddRef::TRUE => return Ok(BddRef::FALSE),
            _ => {}
        }
        if let Some(&r) = self.not_cache.get(&f) {
            return Ok(r);
        }
        let node = self.nodes[f.node_index()];
        let lo = self.not(node.lo)?;
        let hi = self.not(node.hi)?;
        let r = self.mk(node.var, lo, hi)?;
        self.not_cache.insert(f, r);
        Ok(r)
    }

    /// Memoized binary apply producing the canonical combination.
    pub fn apply(&mut self, op: BoolOp, a: BddRef, b: BddRef) -> Result<BddRef, CompileError> {
        if let Some(r) = terminal_case(op, a, b) {
            return Ok(r);
        }
        if a == BddRef::TRUE && op == BoolOp::Xor {
            return self.not(b);
        }
        if b == BddRef::TRUE && op == BoolOp::Xor {
            return self.not(a);
        }
        // Commutative ops: normalize the cache key.
        let key = if a <= b { (op, a, b) } else { (op, b, a) };
        if let Some(&r) = self.apply_cache.get(&key) {
            return Ok(r);
        }
        let (la, lb) = (self.level(a), self.level(b));
        let level = la.min(lb);
        let var = self.order.by_level[level as usize];
        let (a_lo, a_hi) = if la == level {
            let n = self.nodes[a.node_index()];
            (n.lo, n.hi)
        } else {
            (a, a)
        };
        let (b_lo, b_hi) = if lb == level {
            let n = self.nodes[b.node_index()];
            (n.lo, n.hi)
        } else {
            (b, b)
        };
        let lo = self.apply(op, a_lo, b_lo)?;
        let hi = self.apply(op, a_hi, b_hi)?;
        let r = self.mk(var, lo, hi)?;
        self.apply_cache.insert(key, r);
        Ok(r)
    }

    /// Compiles a formula bottom-up. The result is canonical for the
    /// manager's variable order.
    pub fn build(&mut self, e: &Expr) -> Result<BddRef, CompileError> {
        match e {
            Expr::True => Ok(BddRef::TRUE),
            Expr::False => Ok(BddRef::FALSE),
            Expr::Lit(l) => self.literal(l.var, l.positive),
            Expr::Not(c) => {
                let inner = self.build(c)?;
                self.not(inner)
            }
            Expr::And(cs) => {
                let mut acc = BddRef::TRUE;
                for c in cs {
                    let child = self.build(c)?;
                    acc = self.apply(BoolOp::And, acc, child)?;
                    if acc == BddRef::FALSE {
                        break;
                    }
                }
                Ok(acc)
            }
            Expr::Or(cs) => {
                let mut acc = BddRef::FALSE;
                for c in cs {
                    let child = self.build(c)?;
                    acc = self.apply(BoolOp::Or, acc, child)?;
                    if acc == BddRef::TRUE {
                        break;
                    }
                }
                Ok(acc)
            }
        }
    }

    /// Exact satisfying-assignment count over the declared universe,
    /// obtained by path counting with a factor of two per skipped level.
    pub fn model_count(&self, root: BddRef) -> u128 {
        let mut memo: HashMap<BddRef, u128> = HashMap::new();
        let below = self.count_below(root, &mut memo);
        below << self.level(root)
    }

    fn count_below(&self, r: BddRef, memo: &mut HashMap<BddRef, u128>) -> u128 {
        match r {
            BddRef::FALSE => return 0,
            BddRef::TRUE => return 1,
            _ => {}
        }
        if let Some(&c) = memo.get(&r) {
            return c;
        }
        let node = self.nodes[r.node_index()];
        let level = self.level(r);
        let lo = self.count_below(node.lo, memo) << (self.level(node.lo) - level - 1);
        let hi = self.count_below(node.hi, memo) << (self.level(node.hi) - level - 1);
        let c = lo + hi;
        memo.insert(r, c);
        c
    }

    /// Expands every decision node `(v, lo, hi)` into
    /// `sum(product(¬v, lo), product(v, hi))`, preserving sharing. The
    /// result is deterministic and decomposable by construction.
    pub fn to_circuit(&self, root: BddRef) -> Circuit {
        let mut builder = CircuitBuilder::new(self.order.len());
        let mut memo: HashMap<BddRef, NodeId> = HashMap::new();
        let root_id = self.convert(root, &mut builder, &mut memo);
        builder.finish(root_id)
    }

    fn convert(
        &self,
        r: BddRef,
        builder: &mut CircuitBuilder,
        memo: &mut HashMap<BddRef, NodeId>,
    ) -> NodeId {
        if let Some(&id) = memo.get(&r) {
            return id;
        }
        let id = match r {
            BddRef::FALSE => builder.constant(false),
            BddRef::TRUE => builder.constant(true),
            _ => {
                let node = self.nodes[r.node_index()];
                let lo = self.convert(node.lo, builder, memo);
                let hi = self.convert(node.hi, builder, memo);
                let neg = builder.literal(node.var, false);
                let pos = builder.literal(node.var, true);
                let lo_branch = builder.product_raw(vec![neg, lo]);
                let hi_branch = builder.product_raw(vec![pos, hi]);
                builder.sum_raw(vec![lo_branch, hi_branch])
            }
        };
        memo.insert(r, id);
        id
    }
}

fn terminal_case(op: BoolOp, a: BddRef, b: BddRef) -> Option<BddRef> {
    match op {
        BoolOp::And => match (a, b) {
            (BddRef::FALSE, _) | (_, BddRef::FALSE) => Some(BddRef::FALSE),
            (BddRef::TRUE, x) | (x, BddRef::TRUE) => Some(x),
            _ if a == b => Some(a),
            _ => None,
        },
        BoolOp::Or => match (a, b) {
            (BddRef::TRUE, _) | (_, BddRef::TRUE) => Some(BddRef::TRUE),
            (BddRef::FALSE, x) | (x, BddRef::FALSE) => Some(x),
            _ if a == b => Some(a),
            _ => None,
        },
        BoolOp::Xor => match (a, b) {
            (BddRef::FALSE, x) | (x, BddRef::FALSE) => Some(x),
            _ if a == b => Some(BddRef::FALSE),
            _ => None,
        },
    }
}

/// Compiles a formula into a fresh manager under the given order.
pub fn compile(f: &Formula, order: VarOrder) -> Result<(BddManager, BddRef), CompileError> {
    if order.len() != f.universe() {
        return Err(CompileError::UniverseMismatch {
            formula: f.universe(),
            order: order.len(),
        });
    }
    let mut mgr = BddManager::new(order);
    let root = mgr.build(f.root())?;
    Ok((mgr, root))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::exactly_one_cnf;
    use crate::logic::{enumerate_models, parse_dimacs};

    #[test]
    fn contradiction_collapses_to_false() {
        let mut mgr = BddManager::new(VarOrder::natural(1));
        let x = mgr.literal(VarId::new(1), true).unwrap();
        let nx = mgr.literal(VarId::new(1), false).unwrap();
        assert_eq!(mgr.apply(BoolOp::And, x, nx).unwrap(), BddRef::FALSE);
    }

    #[test]
    fn or_with_false_is_identity() {
        let mut mgr = BddManager::new(VarOrder::natural(1));
        let x = mgr.literal(VarId::new(1), true).unwrap();
        assert_eq!(mgr.apply(BoolOp::Or, x, BddRef::FALSE).unwrap(), x);
    }

    #[test]
    fn exactly_one_clauses_have_three_models() {
        let f = exactly_one_cnf(3);
        let (mgr, root) = compile(&f, VarOrder::natural(3)).unwrap();
        assert_eq!(mgr.model_count(root), 3);
    }

    #[test]
    fn constant_true_compiles_to_terminal() {
        let f = parse_dimacs("p cnf 2 0").unwrap();
        let (mgr, root) = compile(&f, VarOrder::natural(2)).unwrap();
        assert_eq!(root, BddRef::TRUE);
        assert_eq!(mgr.model_count(root), 4);
        let c = mgr.to_circuit(root);
        assert_eq!(c.node_count(), 1);
    }

    #[test]
    fn canonicity_equivalent_formulas_share_a_ref() {
        // x1 ∨ x2 versus ¬(¬x1 ∧ ¬x2).
        let f1 = Formula::new(Expr::or(vec![Expr::lit(1), Expr::lit(2)]));
        let f2 = Formula::new(Expr::not(Expr::and(vec![
            Expr::not(Expr::lit(1)),
            Expr::not(Expr::lit(2)),
        ])));
        let mut mgr = BddManager::new(VarOrder::natural(2));
        let r1 = mgr.build(f1.root()).unwrap();
        let r2 = mgr.build(f2.root()).unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn model_count_matches_enumeration_on_random_formulas() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let f = crate::logic::random_formula(&mut rng, 8, 3);
            let (mgr, root) = compile(&f, VarOrder::natural(8)).unwrap();
            let expected = enumerate_models(&f).unwrap().len() as u128;
            assert_eq!(mgr.model_count(root), expected);
        }
    }

    #[test]
    fn first_occurrence_order_compiles_equivalently() {
        let f = parse_dimacs("p cnf 4 2\n3 1 0\n-3 -1 0").unwrap();
        let order = VarOrder::first_occurrence(&f);
        assert_eq!(order.level(VarId::new(3)), 0);
        let (mgr, root) = compile(&f, order).unwrap();
        assert_eq!(mgr.model_count(root), 8);
    }

    #[test]
    fn cap_aborts_compilation() {
        let f = exactly_one_cnf(12);
        let mut mgr = BddManager::with_cap(VarOrder::natural(12), 4);
        assert!(matches!(mgr.build(f.root()), Err(CompileError::Blowup { cap: 4 })));
    }

    #[test]
    fn literal_bdd_expands_to_two_branch_sum() {
        let mut mgr = BddManager::new(VarOrder::natural(1));
        let x = mgr.literal(VarId::new(1), true).unwrap();
        let c = mgr.to_circuit(x);
        // sum(product(!x1, 0), product(x1, 1)) plus the four leaves
        assert_eq!(c.node_count(), 7);
        assert_eq!(c.model_count().unwrap(), 1);
    }

    #[test]
    fn xor_apply_matches_truth_table() {
        let f = Formula::new(Expr::or(vec![
            Expr::and(vec![Expr::lit(1), Expr::neg_lit(2)]),
            Expr::and(vec![Expr::neg_lit(1), Expr::lit(2)]),
        ]));
        let mut mgr = BddManager::new(VarOrder::natural(2));
        let via_or = mgr.build(f.root()).unwrap();
        let x1 = mgr.literal(VarId::new(1), true).unwrap();
        let x2 = mgr.literal(VarId::new(2), true).unwrap();
        let via_xor = mgr.apply(BoolOp::Xor, x1, x2).unwrap();
        assert_eq!(via_or, via_xor);
    }
}
