//! Valid-simple-path constraint over 4-neighbor grid graphs.
//!
//! The universe is `|V|` endpoint indicators followed by `|E|` edge
//! variables. The constraint is the disjunction, over unordered node pairs
//! `(s, t)`, of "exactly the indicators for s and t are set" conjoined with
//! "the chosen edges form a simple s–t path".
//!
//! Each per-pair path function is built edge by edge with a frontier (mate
//! array) construction: every partial edge set is summarized by which
//! vertices are path-segment endpoints and who their opposite ends are, so
//! the number of distinct states per level stays small on lattices.

use std::collections::HashMap;

use super::EncodeError;
use crate::bdd::{BddManager, BddRef, BoolOp, CompileError, VarOrder};
use crate::circuit::Circuit;
use crate::logic::VarId;

/// Frontier construction is kept to grids of at most this many rows/cols.
pub const MAX_GRID_DIM: usize = 6;

/// Mate-array sentinel for a vertex that can take no further path edges
/// (degree two, or degree zero after leaving the frontier).
const CLOSED: u8 = u8::MAX;

/// A rows-by-cols lattice with row-major node ids and deterministic edge
/// ids: for each node in row-major order, its rightward edge precedes its
/// downward edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridSpec {
    rows: usize,
    cols: usize,
    edges: Vec<(usize, usize)>,
}

impl GridSpec {
    pub fn new(rows: usize, cols: usize) -> Result<GridSpec, EncodeError> {
        if rows == 0 || cols == 0 {
            return Err(EncodeError::ZeroCount);
        }
        let node = |r: usize, c: usize| r * cols + c;
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                if c + 1 < cols {
                    edges.push((node(r, c), node(r, c + 1)));
                }
                if r + 1 < rows {
                    edges.push((node(r, c), node(r + 1, c)));
                }
            }
        }
        Ok(GridSpec { rows, cols, edges })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn n_nodes(&self) -> usize {
        self.rows * self.cols
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edge endpoints, indexed by edge id; always `(lower, higher)` node id.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Universe size of the path constraint: indicators then edges.
    pub fn universe_size(&self) -> usize {
        self.n_nodes() + self.n_edges()
    }

    /// Variable carrying the endpoint indicator of `node`.
    pub fn indicator_var(&self, node: usize) -> VarId {
        assert!(node < self.n_nodes());
        VarId::new(node as u32 + 1)
    }

    /// Variable carrying the selection bit of `edge`.
    pub fn edge_var(&self, edge: usize) -> VarId {
        assert!(edge < self.n_edges());
        VarId::new((self.n_nodes() + edge) as u32 + 1)
    }
}

/// Compiles the full valid-simple-path constraint for `g`.
pub fn grid_simple_path(g: &GridSpec) -> Result<Circuit, EncodeError> {
    if g.rows > MAX_GRID_DIM || g.cols > MAX_GRID_DIM {
        return Err(EncodeError::GridTooLarge {
            rows: g.rows,
            cols: g.cols,
            max: MAX_GRID_DIM,
        });
    }
    if g.n_nodes() < 2 {
        return Err(EncodeError::DegenerateGrid);
    }
    let mut mgr = BddManager::new(VarOrder::natural(g.universe_size()));
    // Last processed edge incident to each vertex: once passed, the vertex
    // leaves the frontier and its degree is final.
    let mut last_edge = vec![0usize; g.n_nodes()];
    for (id, &(u, v)) in g.edges.iter().enumerate() {
        last_edge[u] = id;
        last_edge[v] = id;
    }
    let mut total = BddRef::FALSE;
    for s in 0..g.n_nodes() {
        for t in s + 1..g.n_nodes() {
            let path = st_path_bdd(&mut mgr, g, s, t, &last_edge)?;
            let pair = with_indicator_pattern(&mut mgr, g, s, t, path)?;
            total = mgr.apply(BoolOp::Or, total, pair)?;
        }
    }
    Ok(mgr.to_circuit(total))
}

/// Prepends the complete indicator assignment for `(s, t)` above `below`.
/// Indicator variables occupy the top levels, so the conjunction is a chain
/// of decision nodes ending in the path diagram.
fn with_indicator_pattern(
    mgr: &mut BddManager,
    g: &GridSpec,
    s: usize,
    t: usize,
    below: BddRef,
) -> Result<BddRef, CompileError> {
    let mut acc = below;
    for v in (0..g.n_nodes()).rev() {
        let var = g.indicator_var(v);
        acc = if v == s || v == t {
            mgr.mk(var, BddRef::FALSE, acc)?
        } else {
            mgr.mk(var, acc, BddRef::FALSE)?
        };
    }
    Ok(acc)
}

/// Summary of a partial edge selection while sweeping the edge list.
///
/// `Active` carries the mate array: `mate[v] == v` means degree zero,
/// `mate[v] == CLOSED` means no further edge may touch `v`, and any other
/// value names the opposite endpoint of the open segment ending at `v`.
/// `Done` means the s–t segment is complete and all later edges must be
/// left out.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum PathState {
    Active(Vec<u8>),
    Done,
}

fn st_path_bdd(
    mgr: &mut BddManager,
    g: &GridSpec,
    s: usize,
    t: usize,
    last_edge: &[usize],
) -> Result<BddRef, CompileError> {
    let mut memo: HashMap<(usize, PathState), BddRef> = HashMap::new();
    let init = PathState::Active((0..g.n_nodes() as u8).collect());
    build(mgr, g, s, t, last_edge, 0, init, &mut memo)
}

#[allow(clippy::too_many_arguments)]
fn build(
    mgr: &mut BddManager,
    g: &GridSpec,
    s: usize,
    t: usize,
    last_edge: &[usize],
    level: usize,
    state: PathState,
    memo: &mut HashMap<(usize, PathState), BddRef>,
) -> Result<BddRef, CompileError> {
    if level == g.n_edges() {
        return Ok(if state == PathState::Done { BddRef::TRUE } else { BddRef::FALSE });
    }
    let key = (level, state.clone());
    if let Some(&r) = memo.get(&key) {
        return Ok(r);
    }
    let lo = match step_exclude(g, s, t, last_edge, level, &state) {
        Some(next) => build(mgr, g, s, t, last_edge, level + 1, next, memo)?,
        None => BddRef::FALSE,
    };
    let hi = match step_include(g, s, t, last_edge, level, &state) {
        Some(next) => build(mgr, g, s, t, last_edge, level + 1, next, memo)?,
        None => BddRef::FALSE,
    };
    let r = mgr.mk(g.edge_var(level), lo, hi)?;
    memo.insert(key, r);
    Ok(r)
}

/// Leave edge `k` out. Vertices whose last incident edge this was must end
/// with an admissible final degree.
fn step_exclude(
    g: &GridSpec,
    s: usize,
    t: usize,
    last_edge: &[usize],
    k: usize,
    state: &PathState,
) -> Option<PathState> {
    let mate = match state {
        PathState::Done => return Some(PathState::Done),
        PathState::Active(m) => m,
    };
    let mut mate = mate.clone();
    let (u, v) = g.edges[k];
    for w in [u, v] {
        if last_edge[w] == k && !close_vertex(&mut mate, w, s, t) {
            return None;
        }
    }
    Some(PathState::Active(mate))
}

/// Take edge `k`: join the segments at its endpoints, detect completion of
/// the s–t segment, then apply frontier-exit checks.
fn step_include(
    g: &GridSpec,
    s: usize,
    t: usize,
    last_edge: &[usize],
    k: usize,
    state: &PathState,
) -> Option<PathState> {
    let mate = match state {
        PathState::Done => return None,
        PathState::Active(m) => m,
    };
    let (u, v) = g.edges[k];
    let mu = mate[u];
    let mv = mate[v];
    if mu == CLOSED || mv == CLOSED {
        return None; // a third edge at u or v
    }
    if mu == v as u8 {
        return None; // closing a cycle
    }
    let mut mate = mate.clone();
    let a = mu as usize;
    let b = mv as usize;
    mate[u] = CLOSED;
    mate[v] = CLOSED;
    mate[a] = b as u8;
    mate[b] = a as u8;
    if (a == s && b == t) || (a == t && b == s) {
        // The s–t segment just closed. Any other open segment could now only
        // grow or close into a cycle, never terminate, so it must not exist.
        for w in 0..mate.len() {
            if w != a && w != b && mate[w] != w as u8 && mate[w] != CLOSED {
                return None;
            }
        }
        return Some(PathState::Done);
    }
    for w in [u, v] {
        if last_edge[w] == k && !close_vertex(&mut mate, w, s, t) {
            return None;
        }
    }
    Some(PathState::Active(mate))
}

/// Final-degree check when `w` leaves the frontier: the endpoints s and t
/// must have degree exactly one, every other vertex degree zero or two.
/// Degree-zero exits are normalized to CLOSED so equivalent states collide.
fn close_vertex(mate: &mut [u8], w: usize, s: usize, t: usize) -> bool {
    let m = mate[w];
    if w == s || w == t {
        m != w as u8 && m != CLOSED
    } else if m == w as u8 {
        mate[w] = CLOSED;
        true
    } else {
        m == CLOSED
    }
}
