//! Deterministic, decomposable arithmetic circuits.
//!
//! A [`Circuit`] is an immutable DAG in topological order. Product nodes have
//! children over pairwise disjoint variable sets, and the children of a sum
//! node are mutually exclusive as logical functions, so pushing per-literal
//! probabilities up through the circuit computes an exact weighted model
//! count in one pass.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logic::{Expr, State, VarId};

/// Index of a node inside its circuit's node list.
pub type NodeId = u32;

#[derive(Debug, Error)]
pub enum CircuitError {
    #[error("node {node} references child {child}, which does not precede it")]
    NotTopological { node: NodeId, child: NodeId },
    #[error("root {root} is not a valid node index (node count {count})")]
    BadRoot { root: NodeId, count: usize },
    #[error("literal node {node} mentions x{var}, outside universe of size {universe}")]
    LiteralOutOfUniverse { node: NodeId, var: u32, universe: usize },
    #[error("circuit has no nodes")]
    Empty,
    #[error("model count exceeds the u128 range")]
    CountOverflow,
    #[error("determinism check supports at most {max} variables, circuit has {universe}")]
    TooLargeForCheck { universe: usize, max: usize },
    #[error("evidence mentions x{0}, outside the circuit universe")]
    EvidenceOutOfUniverse(u32),
}

/// One circuit node. `children` indices always point at earlier nodes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CircuitNode {
    False,
    True,
    Literal { var: u32, polarity: bool },
    Product { children: Vec<NodeId> },
    Sum { children: Vec<NodeId> },
}

/// Immutable arithmetic-circuit DAG with a designated root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CircuitRepr", into = "CircuitRepr")]
pub struct Circuit {
    universe_size: usize,
    nodes: Vec<CircuitNode>,
    root: NodeId,
}

/// Serialized form: `{universe_size, nodes, root}` with nodes in
/// topological order. Round trips are structure-exact.
#[derive(Serialize, Deserialize)]
struct CircuitRepr {
    universe_size: usize,
    nodes: Vec<CircuitNode>,
    root: NodeId,
}

impl From<Circuit> for CircuitRepr {
    fn from(c: Circuit) -> CircuitRepr {
        CircuitRepr { universe_size: c.universe_size, nodes: c.nodes, root: c.root }
    }
}

impl TryFrom<CircuitRepr> for Circuit {
    type Error = CircuitError;

    fn try_from(r: CircuitRepr) -> Result<Circuit, CircuitError> {
        Circuit::from_parts(r.universe_size, r.nodes, r.root)
    }
}

impl Circuit {
    /// Validates node indices and ordering and assembles a circuit.
    pub fn from_parts(
        universe_size: usize,
        nodes: Vec<CircuitNode>,
        root: NodeId,
    ) -> Result<Circuit, CircuitError> {
        if nodes.is_empty() {
            return Err(CircuitError::Empty);
        }
        if root as usize >= nodes.len() {
            return Err(CircuitError::BadRoot { root, count: nodes.len() });
        }
        for (i, node) in nodes.iter().enumerate() {
            match node {
                CircuitNode::Literal { var, .. } => {
                    if *var == 0 || *var as usize > universe_size {
                        return Err(CircuitError::LiteralOutOfUniverse {
                            node: i as NodeId,
                            var: *var,
                            universe: universe_size,
                        });
                    }
                }
                CircuitNode::Product { children } | CircuitNode::Sum { children } => {
                    for &c in children {
                        if c as usize >= i {
                            return Err(CircuitError::NotTopological {
                                node: i as NodeId,
                                child: c,
                            });
                        }
                    }
                }
                CircuitNode::True | CircuitNode::False => {}
            }
        }
        Ok(Circuit { universe_size, nodes, root })
    }

    pub fn universe_size(&self) -> usize {
        self.universe_size
    }

    pub fn nodes(&self) -> &[CircuitNode] {
        &self.nodes
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("circuit serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Circuit, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Per-node variable support as bitsets over the universe.
    fn supports(&self) -> Vec<VarSet> {
        let mut sup = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let s = match node {
                CircuitNode::True | CircuitNode::False => VarSet::empty(self.universe_size),
                CircuitNode::Literal { var, .. } => {
                    let mut s = VarSet::empty(self.universe_size);
                    s.insert(*var);
                    s
                }
                CircuitNode::Product { children } | CircuitNode::Sum { children } => {
                    let mut s = VarSet::empty(self.universe_size);
                    for &c in children {
                        s.union_with(&sup[c as usize]);
                    }
                    s
                }
            };
            sup.push(s);
        }
        sup
    }

    /// True when every product node's children mention pairwise disjoint
    /// variable sets.
    pub fn is_decomposable(&self) -> bool {
        let sup = self.supports();
        for node in &self.nodes {
            if let CircuitNode::Product { children } = node {
                let mut seen = VarSet::empty(self.universe_size);
                for &c in children {
                    if seen.intersects(&sup[c as usize]) {
                        return false;
                    }
                    seen.union_with(&sup[c as usize]);
                }
            }
        }
        true
    }

    /// Checks mutual exclusivity of every sum node's children by compiling
    /// each pairwise conjunction and testing it for unsatisfiability. Only
    /// feasible on small universes, hence the `max_vars` guard.
    pub fn is_deterministic(&self, max_vars: usize) -> Result<bool, CircuitError> {
        if self.universe_size > max_vars {
            return Err(CircuitError::TooLargeForCheck {
                universe: self.universe_size,
                max: max_vars,
            });
        }
        let order = crate::bdd::VarOrder::natural(self.universe_size);
        for node in &self.nodes {
            if let CircuitNode::Sum { children } = node {
                for (i, &a) in children.iter().enumerate() {
                    for &b in &children[i + 1..] {
                        let mut mgr = crate::bdd::BddManager::new(order.clone());
                        let fa = mgr.build(&self.node_to_expr(a)).expect("small circuit");
                        let fb = mgr.build(&self.node_to_expr(b)).expect("small circuit");
                        let both = mgr
                            .apply(crate::bdd::BoolOp::And, fa, fb)
                            .expect("small circuit");
                        if both != crate::bdd::BddRef::FALSE {
                            return Ok(false);
                        }
                    }
                }
            }
        }
        Ok(true)
    }

    /// The logical function rooted at `id`, as a formula tree.
    pub fn node_to_expr(&self, id: NodeId) -> Expr {
        match &self.nodes[id as usize] {
            CircuitNode::True => Expr::True,
            CircuitNode::False => Expr::False,
            CircuitNode::Literal { var, polarity } => {
                Expr::Lit(crate::logic::Literal::new(VarId::new(*var), *polarity))
            }
            CircuitNode::Product { children } => {
                Expr::and(children.iter().map(|&c| self.node_to_expr(c)).collect())
            }
            CircuitNode::Sum { children } => {
                Expr::or(children.iter().map(|&c| self.node_to_expr(c)).collect())
            }
        }
    }

    /// Crisp evaluation of the circuit's logical function in a state.
    pub fn eval_state(&self, s: &State) -> Result<bool, CircuitError> {
        if s.len() < self.universe_size {
            return Err(CircuitError::EvidenceOutOfUniverse(self.universe_size as u32));
        }
        let mut vals = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = match node {
                CircuitNode::True => true,
                CircuitNode::False => false,
                CircuitNode::Literal { var, polarity } => {
                    s.get(VarId::new(*var)).expect("state covers universe") == *polarity
                }
                CircuitNode::Product { children } => {
                    children.iter().all(|&c| vals[c as usize])
                }
                CircuitNode::Sum { children } => children.iter().any(|&c| vals[c as usize]),
            };
            vals.push(v);
        }
        Ok(vals[self.root as usize])
    }

    /// Exact model count over the declared universe.
    ///
    /// The circuits emitted here are not smoothed, so each node's count is
    /// taken over its own support and rescaled by a power of two wherever a
    /// sum child skips variables that its siblings mention.
    pub fn model_count(&self) -> Result<u128, CircuitError> {
        let sup = self.supports();
        let mut counts: Vec<u128> = Vec::with_capacity(self.nodes.len());
        for (i, node) in self.nodes.iter().enumerate() {
            let c = match node {
                CircuitNode::False => 0,
                CircuitNode::True | CircuitNode::Literal { .. } => 1,
                CircuitNode::Product { children } => {
                    let mut acc: u128 = 1;
                    for &ch in children {
                        acc = acc
                            .checked_mul(counts[ch as usize])
                            .ok_or(CircuitError::CountOverflow)?;
                    }
                    acc
                }
                CircuitNode::Sum { children } => {
                    let width = sup[i].len();
                    let mut acc: u128 = 0;
                    for &ch in children {
                        let missing = width - sup[ch as usize].len();
                        let scaled = shl_checked(counts[ch as usize], missing)?;
                        acc = acc.checked_add(scaled).ok_or(CircuitError::CountOverflow)?;
                    }
                    acc
                }
            };
            counts.push(c);
        }
        let free = self.universe_size - sup[self.root as usize].len();
        shl_checked(counts[self.root as usize], free)
    }

    /// Clamps the evidence variables to constants and folds the result.
    ///
    /// The weighted model count of the output over the free variables equals
    /// the count of `self` with the clamped probabilities substituted.
    pub fn condition(&self, evidence: &Evidence) -> Result<Circuit, CircuitError> {
        for (&var, _) in evidence.iter() {
            if var.index() as usize > self.universe_size {
                return Err(CircuitError::EvidenceOutOfUniverse(var.index()));
            }
        }
        let mut builder = CircuitBuilder::new(self.universe_size);
        let mut mapped: Vec<NodeId> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let id = match node {
                CircuitNode::True => builder.constant(true),
                CircuitNode::False => builder.constant(false),
                CircuitNode::Literal { var, polarity } => {
                    match evidence.get(VarId::new(*var)) {
                        Some(value) => builder.constant(value == *polarity),
                        None => builder.literal(VarId::new(*var), *polarity),
                    }
                }
                CircuitNode::Product { children } => {
                    let kids = children.iter().map(|&c| mapped[c as usize]).collect();
                    builder.product(kids)
                }
                CircuitNode::Sum { children } => {
                    let kids = children.iter().map(|&c| mapped[c as usize]).collect();
                    builder.sum(kids)
                }
            };
            mapped.push(id);
        }
        Ok(builder.finish(mapped[self.root as usize]))
    }

    /// Constant-folds and deduplicates without changing the function.
    pub fn normalized(&self) -> Circuit {
        self.condition(&Evidence::empty()).expect("empty evidence is always valid")
    }
}

/// Partial assignment clamping a subset of the universe.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Evidence {
    fixed: HashMap<VarId, bool>,
}

impl Evidence {
    pub fn empty() -> Evidence {
        Evidence::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (VarId, bool)>) -> Evidence {
        Evidence { fixed: pairs.into_iter().collect() }
    }

    pub fn set(&mut self, var: VarId, value: bool) {
        self.fixed.insert(var, value);
    }

    pub fn get(&self, var: VarId) -> Option<bool> {
        self.fixed.get(&var).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.fixed.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&VarId, &bool)> {
        self.fixed.iter()
    }
}

/// Hash-consing circuit builder.
///
/// `product`/`sum` constant-fold while building; the `_raw` variants keep
/// the given structure and only deduplicate, which the compiler uses so the
/// emitted circuit mirrors the decision-node expansion exactly.
pub struct CircuitBuilder {
    universe: usize,
    nodes: Vec<CircuitNode>,
    cache: HashMap<CircuitNode, NodeId>,
}

impl CircuitBuilder {
    pub fn new(universe: usize) -> CircuitBuilder {
        CircuitBuilder { universe, nodes: Vec::new(), cache: HashMap::new() }
    }

    fn intern(&mut self, node: CircuitNode) -> NodeId {
        if let Some(&id) = self.cache.get(&node) {
            return id;
        }
        let id = self.nodes.len() as NodeId;
        self.nodes.push(node.clone());
        self.cache.insert(node, id);
        id
    }

    pub fn constant(&mut self, value: bool) -> NodeId {
        self.intern(if value { CircuitNode::True } else { CircuitNode::False })
    }

    pub fn literal(&mut self, var: VarId, polarity: bool) -> NodeId {
        assert!(
            var.index() as usize <= self.universe,
            "literal {var} outside universe of {}",
            self.universe
        );
        self.intern(CircuitNode::Literal { var: var.index(), polarity })
    }

    pub fn product_raw(&mut self, children: Vec<NodeId>) -> NodeId {
        self.intern(CircuitNode::Product { children })
    }

    pub fn sum_raw(&mut self, children: Vec<NodeId>) -> NodeId {
        self.intern(CircuitNode::Sum { children })
    }

    pub fn product(&mut self, children: Vec<NodeId>) -> NodeId {
        let mut kept = Vec::with_capacity(children.len());
        for c in children {
            match self.nodes[c as usize] {
                CircuitNode::False => return self.constant(false),
                CircuitNode::True => {}
                _ => kept.push(c),
            }
        }
        match kept.len() {
            0 => self.constant(true),
            1 => kept[0],
            _ => self.intern(CircuitNode::Product { children: kept }),
        }
    }

    pub fn sum(&mut self, children: Vec<NodeId>) -> NodeId {
        let mut kept = Vec::with_capacity(children.len());
        for c in children {
            match self.nodes[c as usize] {
                CircuitNode::False => {}
                _ => kept.push(c),
            }
        }
        match kept.len() {
            0 => self.constant(false),
            1 => kept[0],
            _ => self.intern(CircuitNode::Sum { children: kept }),
        }
    }

    pub fn finish(self, root: NodeId) -> Circuit {
        Circuit::from_parts(self.universe, self.nodes, root)
            .expect("builder maintains topological order")
    }
}

fn shl_checked(value: u128, shift: usize) -> Result<u128, CircuitError> {
    if value == 0 {
        return Ok(0);
    }
    if shift >= 128 || value.leading_zeros() < shift as u32 {
        return Err(CircuitError::CountOverflow);
    }
    Ok(value << shift)
}

/// Small fixed-size bitset over variable indices `1..=n`.
#[derive(Clone)]
struct VarSet {
    words: Vec<u64>,
    len: usize,
}

impl VarSet {
    fn empty(n: usize) -> VarSet {
        VarSet { words: vec![0; n.div_ceil(64)], len: 0 }
    }

    fn insert(&mut self, var: u32) {
        let bit = (var - 1) as usize;
        let word = &mut self.words[bit / 64];
        if *word >> (bit % 64) & 1 == 0 {
            *word |= 1 << (bit % 64);
            self.len += 1;
        }
    }

    fn union_with(&mut self, other: &VarSet) {
        self.len = 0;
        for (w, o) in self.words.iter_mut().zip(&other.words) {
            *w |= o;
            self.len += w.count_ones() as usize;
        }
    }

    fn intersects(&self, other: &VarSet) -> bool {
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    fn len(&self) -> usize {
        self.len
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::VarId;

    fn one_hot_pair() -> Circuit {
        // sum(product(x1, !x2), product(!x1, x2))
        let mut b = CircuitBuilder::new(2);
        let x1 = b.literal(VarId::new(1), true);
        let nx1 = b.literal(VarId::new(1), false);
        let x2 = b.literal(VarId::new(2), true);
        let nx2 = b.literal(VarId::new(2), false);
        let p1 = b.product_raw(vec![x1, nx2]);
        let p2 = b.product_raw(vec![nx1, x2]);
        let root = b.sum_raw(vec![p1, p2]);
        b.finish(root)
    }

    #[test]
    fn json_roundtrip_is_structure_exact() {
        let c = one_hot_pair();
        let json = c.to_json();
        let back = Circuit::from_json(&json).unwrap();
        assert_eq!(c, back);
        assert_eq!(json, back.to_json());
    }

    #[test]
    fn rejects_forward_reference() {
        let nodes = vec![
            CircuitNode::Sum { children: vec![1] },
            CircuitNode::True,
        ];
        assert!(matches!(
            Circuit::from_parts(1, nodes, 0),
            Err(CircuitError::NotTopological { .. })
        ));
    }

    #[test]
    fn rejects_literal_outside_universe() {
        let nodes = vec![CircuitNode::Literal { var: 3, polarity: true }];
        assert!(Circuit::from_parts(2, nodes, 0).is_err());
    }

    #[test]
    fn model_count_scales_skipped_variables() {
        // x1 alone over a universe of 3: 1 << 2 models.
        let mut b = CircuitBuilder::new(3);
        let x1 = b.literal(VarId::new(1), true);
        let c = b.finish(x1);
        assert_eq!(c.model_count().unwrap(), 4);
    }

    #[test]
    fn structural_checks_pass_on_one_hot() {
        let c = one_hot_pair();
        assert!(c.is_decomposable());
        assert!(c.is_deterministic(12).unwrap());
        assert_eq!(c.model_count().unwrap(), 2);
    }

    #[test]
    fn non_deterministic_sum_is_flagged() {
        // sum(x1, x2) double counts the state 11.
        let mut b = CircuitBuilder::new(2);
        let x1 = b.literal(VarId::new(1), true);
        let x2 = b.literal(VarId::new(2), true);
        let root = b.sum_raw(vec![x1, x2]);
        let c = b.finish(root);
        assert!(!c.is_deterministic(12).unwrap());
    }

    #[test]
    fn non_decomposable_product_is_flagged() {
        let mut b = CircuitBuilder::new(1);
        let x1 = b.literal(VarId::new(1), true);
        let root = b.product_raw(vec![x1, x1]);
        let c = b.finish(root);
        assert!(!c.is_decomposable());
    }

    #[test]
    fn condition_clamps_and_folds() {
        let c = one_hot_pair();
        let e = Evidence::from_pairs([(VarId::new(1), true)]);
        let conditioned = c.condition(&e).unwrap();
        // Only the !x2 branch survives; x1 no longer occurs, so the count
        // over the two-variable universe doubles.
        assert_eq!(conditioned.model_count().unwrap(), 2);
        let s = State::new(vec![true, false]);
        assert!(conditioned.eval_state(&s).unwrap());
    }

    #[test]
    fn empty_evidence_is_identity_after_normalization() {
        let c = one_hot_pair().normalized();
        let same = c.condition(&Evidence::empty()).unwrap();
        assert_eq!(c, same);
    }

    #[test]
    fn contradictory_evidence_collapses_to_false() {
        let c = one_hot_pair();
        let e = Evidence::from_pairs([(VarId::new(1), true), (VarId::new(2), true)]);
        let conditioned = c.condition(&e).unwrap();
        assert_eq!(conditioned.model_count().unwrap(), 0);
    }
}
