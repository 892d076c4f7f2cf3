//! Constraint encoders for the three structured output spaces: one-hot
//! vectors, total orderings, and simple paths in a grid.

mod grid;

pub use grid::{grid_simple_path, GridSpec};

use thiserror::Error;

use crate::bdd::{compile, CompileError, VarOrder};
use crate::circuit::{Circuit, CircuitBuilder, Evidence};
use crate::logic::{Expr, Formula, VarId};

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("count must be at least 1")]
    ZeroCount,
    #[error("grid {rows}x{cols} exceeds the {max}x{max} limit for frontier construction")]
    GridTooLarge { rows: usize, cols: usize, max: usize },
    #[error("a 1x1 grid has no edges to form a path")]
    DegenerateGrid,
    #[error(transparent)]
    Compile(#[from] CompileError),
}

/// Clause encoding of the exactly-one constraint: one at-least-one clause
/// plus a pairwise at-most-one clause per variable pair.
pub fn exactly_one_cnf(n: usize) -> Formula {
    assert!(n >= 1);
    let vars: Vec<u32> = (1..=n as u32).collect();
    Formula::new(exactly_one_cnf_over(&vars))
}

/// The clause encoding over an arbitrary set of variables.
pub fn exactly_one_cnf_over(vars: &[u32]) -> Expr {
    let mut clauses = vec![Expr::or(vars.iter().map(|&v| Expr::lit(v)).collect())];
    for (i, &a) in vars.iter().enumerate() {
        for &b in &vars[i + 1..] {
            clauses.push(Expr::or(vec![Expr::neg_lit(a), Expr::neg_lit(b)]));
        }
    }
    Expr::and(clauses)
}

/// Disjunctive encoding of exactly-one: one term per variable, each
/// conjoining that variable with the negations of all others.
pub fn exactly_one_dnf(n: usize) -> Formula {
    assert!(n >= 1);
    let terms = (1..=n as u32)
        .map(|i| {
            let mut lits = vec![Expr::lit(i)];
            lits.extend((1..=n as u32).filter(|&j| j != i).map(Expr::neg_lit));
            Expr::and(lits)
        })
        .collect();
    Formula::new(Expr::or(terms))
}

/// Direct linear-size circuit for the exactly-one constraint.
///
/// Built as a chain over the suffixes of the variable list: at each level the
/// "exactly one remaining" function branches into "none remaining" on the
/// positive side, so the node count is Θ(n) instead of the Θ(n²) of the
/// clause encoding.
pub fn exactly_one(n: usize) -> Result<Circuit, EncodeError> {
    if n == 0 {
        return Err(EncodeError::ZeroCount);
    }
    let mut b = CircuitBuilder::new(n);
    let mut none_below = b.constant(true);
    let mut one_below = b.constant(false);
    for k in (1..=n as u32).rev() {
        let pos = b.literal(VarId::new(k), true);
        let neg = b.literal(VarId::new(k), false);
        let keep_looking = b.product_raw(vec![neg, one_below]);
        let found_here = b.product_raw(vec![pos, none_below]);
        one_below = b.sum_raw(vec![keep_looking, found_here]);
        none_below = b.product_raw(vec![neg, none_below]);
    }
    Ok(b.finish(one_below))
}

/// Circuit accepting exactly the n-by-n permutation matrices, over n²
/// variables in row-major order: variable `i * n + j + 1` means item `i`
/// sits at position `j`.
pub fn total_order(n: usize) -> Result<Circuit, EncodeError> {
    if n == 0 {
        return Err(EncodeError::ZeroCount);
    }
    let f = total_order_formula(n);
    let (mgr, root) = compile(&f, VarOrder::natural(n * n))?;
    Ok(mgr.to_circuit(root))
}

/// The ordering constraint as a formula: exactly-one per row and per column.
pub fn total_order_formula(n: usize) -> Formula {
    let var = |i: usize, j: usize| (i * n + j + 1) as u32;
    let mut parts = Vec::with_capacity(2 * n);
    for i in 0..n {
        let row: Vec<u32> = (0..n).map(|j| var(i, j)).collect();
        parts.push(exactly_one_cnf_over(&row));
    }
    for j in 0..n {
        let col: Vec<u32> = (0..n).map(|i| var(i, j)).collect();
        parts.push(exactly_one_cnf_over(&col));
    }
    Formula::with_universe(Expr::and(parts), n * n).expect("vars stay in range")
}

/// Evidence clamping every endpoint indicator of a grid: `s` and `t` true,
/// all other node indicators false.
pub fn endpoint_evidence(g: &GridSpec, s: usize, t: usize) -> Evidence {
    let mut e = Evidence::empty();
    for v in 0..g.n_nodes() {
        e.set(g.indicator_var(v), v == s || v == t);
    }
    e
}
