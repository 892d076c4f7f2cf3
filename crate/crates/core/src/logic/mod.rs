//! Propositional formulas, states, and brute-force oracles.
//!
//! Everything downstream (compilation, weighted model counting, loss
//! evaluation) is checked against the enumeration oracles in this module, so
//! they are deliberately simple: no simplification, no sharing, no cleverness.

mod dimacs;
mod sexpr;

pub use dimacs::parse_dimacs;
pub use sexpr::parse_sexpr;

use rand::Rng;
use thiserror::Error;

/// Hard cap on universe size for the enumeration oracles.
pub const MAX_ENUM_VARS: usize = 24;

#[derive(Debug, Error)]
pub enum LogicError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("universe of {universe} variables exceeds enumeration limit of {max}")]
    UniverseTooLarge { universe: usize, max: usize },
    #[error("expected a vector of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("probability {value} at index {index} is outside [0, 1]")]
    InvalidProbability { index: usize, value: f64 },
    #[error("variable x{0} lies outside the declared universe")]
    VarOutOfUniverse(u32),
}

/// A Boolean variable, identified by a 1-based index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(u32);

impl VarId {
    /// Creates a variable from its 1-based index.
    ///
    /// Panics if `index` is zero.
    pub fn new(index: u32) -> VarId {
        assert!(index > 0, "variable indices are 1-based");
        VarId(index)
    }

    /// The 1-based index.
    pub fn index(self) -> u32 {
        self.0
    }

    /// The 0-based position inside vectors spanning the universe.
    pub fn pos(self) -> usize {
        self.0 as usize - 1
    }
}

impl std::fmt::Display for VarId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "x{}", self.0)
    }
}

/// A variable or its negation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Literal {
    pub var: VarId,
    pub positive: bool,
}

impl Literal {
    pub fn new(var: VarId, positive: bool) -> Literal {
        Literal { var, positive }
    }

    pub fn negated(self) -> Literal {
        Literal { var: self.var, positive: !self.positive }
    }
}

impl std::fmt::Display for Literal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.positive {
            write!(f, "{}", self.var)
        } else {
            write!(f, "!{}", self.var)
        }
    }
}

/// Formula syntax tree. Negation is kept as a node; nothing is simplified
/// here — pushing negations to literals happens inside the compiler.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    True,
    False,
    Lit(Literal),
    Not(Box<Expr>),
    And(Vec<Expr>),
    Or(Vec<Expr>),
}

impl Expr {
    pub fn lit(index: u32) -> Expr {
        Expr::Lit(Literal::new(VarId::new(index), true))
    }

    pub fn neg_lit(index: u32) -> Expr {
        Expr::Lit(Literal::new(VarId::new(index), false))
    }

    pub fn not(e: Expr) -> Expr {
        Expr::Not(Box::new(e))
    }

    /// N-ary conjunction; the empty conjunction is `true`.
    pub fn and(children: Vec<Expr>) -> Expr {
        match children.len() {
            0 => Expr::True,
            1 => children.into_iter().next().unwrap(),
            _ => Expr::And(children),
        }
    }

    /// N-ary disjunction; the empty disjunction is `false`.
    pub fn or(children: Vec<Expr>) -> Expr {
        match children.len() {
            0 => Expr::False,
            1 => children.into_iter().next().unwrap(),
            _ => Expr::Or(children),
        }
    }

    /// Largest variable index mentioned anywhere in the tree.
    pub fn max_var(&self) -> u32 {
        match self {
            Expr::True | Expr::False => 0,
            Expr::Lit(l) => l.var.index(),
            Expr::Not(e) => e.max_var(),
            Expr::And(cs) | Expr::Or(cs) => cs.iter().map(Expr::max_var).max().unwrap_or(0),
        }
    }
}

/// A sentence together with its declared variable universe `1..=universe`.
///
/// The universe can be larger than the set of mentioned variables (a DIMACS
/// header may declare variables that never appear in a clause); unmentioned
/// variables do not affect loss values but do fix vector lengths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Formula {
    root: Expr,
    universe: usize,
}

impl Formula {
    /// Wraps an expression; the universe is the set of mentioned variables.
    pub fn new(root: Expr) -> Formula {
        let universe = root.max_var() as usize;
        Formula { root, universe }
    }

    /// Wraps an expression with an explicitly declared universe.
    pub fn with_universe(root: Expr, universe: usize) -> Result<Formula, LogicError> {
        let mentioned = root.max_var();
        if (mentioned as usize) > universe {
            return Err(LogicError::VarOutOfUniverse(mentioned));
        }
        Ok(Formula { root, universe })
    }

    pub fn root(&self) -> &Expr {
        &self.root
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    /// Extends the declared universe to `universe` without touching the tree.
    pub fn declare_universe(mut self, universe: usize) -> Formula {
        self.universe = self.universe.max(universe);
        self
    }

    /// Replaces every variable occurrence by its negation (`X` becomes `¬X`).
    pub fn negate_vars(&self) -> Formula {
        fn go(e: &Expr) -> Expr {
            match e {
                Expr::True => Expr::True,
                Expr::False => Expr::False,
                Expr::Lit(l) => Expr::Lit(l.negated()),
                Expr::Not(c) => Expr::not(go(c)),
                Expr::And(cs) => Expr::And(cs.iter().map(go).collect()),
                Expr::Or(cs) => Expr::Or(cs.iter().map(go).collect()),
            }
        }
        Formula { root: go(&self.root), universe: self.universe }
    }

    /// Renames variables through `perm`, a permutation of `1..=universe`
    /// given as `perm[old_index - 1] = new_index`.
    pub fn permute_vars(&self, perm: &[u32]) -> Result<Formula, LogicError> {
        if perm.len() != self.universe {
            return Err(LogicError::DimensionMismatch {
                expected: self.universe,
                got: perm.len(),
            });
        }
        fn go(e: &Expr, perm: &[u32]) -> Expr {
            match e {
                Expr::True => Expr::True,
                Expr::False => Expr::False,
                Expr::Lit(l) => Expr::Lit(Literal::new(
                    VarId::new(perm[l.var.pos()]),
                    l.positive,
                )),
                Expr::Not(c) => Expr::not(go(c, perm)),
                Expr::And(cs) => Expr::And(cs.iter().map(|c| go(c, perm)).collect()),
                Expr::Or(cs) => Expr::Or(cs.iter().map(|c| go(c, perm)).collect()),
            }
        }
        Ok(Formula { root: go(&self.root, perm), universe: self.universe })
    }

    /// Shifts every variable index up by `offset`; the universe grows to
    /// `universe + offset`. Used to put two sentences over disjoint variables.
    pub fn shift_vars(&self, offset: u32) -> Formula {
        fn go(e: &Expr, offset: u32) -> Expr {
            match e {
                Expr::True => Expr::True,
                Expr::False => Expr::False,
                Expr::Lit(l) => Expr::Lit(Literal::new(
                    VarId::new(l.var.index() + offset),
                    l.positive,
                )),
                Expr::Not(c) => Expr::not(go(c, offset)),
                Expr::And(cs) => Expr::And(cs.iter().map(|c| go(c, offset)).collect()),
                Expr::Or(cs) => Expr::Or(cs.iter().map(|c| go(c, offset)).collect()),
            }
        }
        Formula {
            root: go(&self.root, offset),
            universe: self.universe + offset as usize,
        }
    }
}

/// A total assignment over a universe; index 0 holds variable `x1`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct State(Vec<bool>);

impl State {
    pub fn new(bits: Vec<bool>) -> State {
        State(bits)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, var: VarId) -> Option<bool> {
        self.0.get(var.pos()).copied()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    /// The state as a deterministic probability vector (entries 0 or 1).
    pub fn to_probs(&self) -> ProbVector {
        ProbVector(self.0.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())
    }

    /// The sentence `l1 ∧ l2 ∧ … ∧ ln` forcing exactly this state.
    pub fn to_formula(&self) -> Formula {
        let lits = self
            .0
            .iter()
            .enumerate()
            .map(|(i, &b)| Expr::Lit(Literal::new(VarId::new(i as u32 + 1), b)))
            .collect();
        Formula { root: Expr::and(lits), universe: self.0.len() }
    }
}

impl std::fmt::Display for State {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &b in &self.0 {
            write!(f, "{}", u8::from(b))?;
        }
        Ok(())
    }
}

/// Per-variable probabilities, one entry in [0, 1] per universe variable.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(values: Vec<f64>) -> Result<ProbVector, LogicError> {
        for (i, &v) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) || v.is_nan() {
                return Err(LogicError::InvalidProbability { index: i, value: v });
            }
        }
        Ok(ProbVector(values))
    }

    pub fn uniform(n: usize) -> ProbVector {
        ProbVector(vec![0.5; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, var: VarId) -> Option<f64> {
        self.0.get(var.pos()).copied()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Clamps every entry into `[eps, 1 - eps]`; used by the trainer before
    /// leaf evaluation, never by the pure engine.
    pub fn clamped(&self, eps: f64) -> ProbVector {
        ProbVector(self.0.iter().map(|&v| v.clamp(eps, 1.0 - eps)).collect())
    }
}

/// Evaluates `f` in state `s` under standard Boolean semantics.
pub fn eval_state(f: &Formula, s: &State) -> Result<bool, LogicError> {
    if s.len() < f.universe() {
        return Err(LogicError::DimensionMismatch { expected: f.universe(), got: s.len() });
    }
    fn go(e: &Expr, s: &State) -> bool {
        match e {
            Expr::True => true,
            Expr::False => false,
            Expr::Lit(l) => s.get(l.var).expect("state covers universe") == l.positive,
            Expr::Not(c) => !go(c, s),
            Expr::And(cs) => cs.iter().all(|c| go(c, s)),
            Expr::Or(cs) => cs.iter().any(|c| go(c, s)),
        }
    }
    Ok(go(f.root(), s))
}

/// Enumerates all satisfying states in lexicographic order (`x1` is the
/// most significant position).
pub fn enumerate_models(f: &Formula) -> Result<Vec<State>, LogicError> {
    let n = f.universe();
    if n > MAX_ENUM_VARS {
        return Err(LogicError::UniverseTooLarge { universe: n, max: MAX_ENUM_VARS });
    }
    let mut models = Vec::new();
    for m in 0u32..(1u32 << n) {
        let bits: Vec<bool> = (0..n).map(|i| m >> (n - 1 - i) & 1 == 1).collect();
        let s = State::new(bits);
        if eval_state(f, &s)? {
            models.push(s);
        }
    }
    Ok(models)
}

/// Ground-truth weighted model count: the probability that independently
/// sampling each variable with probability `p_i` yields a satisfying state.
pub fn brute_force_wmc(f: &Formula, p: &ProbVector) -> Result<f64, LogicError> {
    if p.len() != f.universe() {
        return Err(LogicError::DimensionMismatch { expected: f.universe(), got: p.len() });
    }
    let models = enumerate_models(f)?;
    let mut total = 0.0;
    for s in &models {
        let mut prob = 1.0;
        for (i, &b) in s.bits().iter().enumerate() {
            let pi = p.values()[i];
            prob *= if b { pi } else { 1.0 - pi };
        }
        total += prob;
    }
    Ok(total)
}

/// Samples a random formula over `1..=universe` with the given tree depth.
/// Internal nodes are drawn among negation, conjunction, and disjunction
/// with 2–3 children; leaves are literals of either polarity.
pub fn random_formula<R: Rng>(rng: &mut R, universe: usize, depth: usize) -> Formula {
    assert!(universe >= 1);
    fn go<R: Rng>(rng: &mut R, universe: usize, depth: usize) -> Expr {
        if depth == 0 {
            let var = rng.gen_range(1..=universe as u32);
            return Expr::Lit(Literal::new(VarId::new(var), rng.gen_bool(0.5)));
        }
        match rng.gen_range(0..5) {
            0 => Expr::not(go(rng, universe, depth - 1)),
            1 | 2 => {
                let k = rng.gen_range(2..=3);
                Expr::and((0..k).map(|_| go(rng, universe, depth - 1)).collect())
            }
            _ => {
                let k = rng.gen_range(2..=3);
                Expr::or((0..k).map(|_| go(rng, universe, depth - 1)).collect())
            }
        }
    }
    Formula::with_universe(go(rng, universe, depth), universe).expect("sampler stays in range")
}
