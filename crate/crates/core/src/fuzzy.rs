//! Fuzzy (soft-logic) relaxation of propositional formulas.
//!
//! Boolean connectives are replaced by the Łukasiewicz operators
//! `a ∧ b = max{0, a + b - 1}`, `a ∨ b = min{a + b, 1}`, `¬a = 1 - a`,
//! with n-ary nodes folded left to right. Unlike the weighted model count,
//! the resulting value depends on the syntax of the formula, which is the
//! point of the comparison: two equivalent encodings of the same constraint
//! can relax to different functions.

use crate::logic::{Expr, Formula, LogicError, ProbVector};

/// The operator family used for relaxation. Only the Łukasiewicz norms are
/// implemented; truth values stay in [0, 1] by construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FuzzyNorm {
    #[default]
    Lukasiewicz,
}

impl FuzzyNorm {
    pub fn conj(self, a: f64, b: f64) -> f64 {
        (a + b - 1.0).max(0.0)
    }

    pub fn disj(self, a: f64, b: f64) -> f64 {
        (a + b).min(1.0)
    }

    pub fn neg(self, a: f64) -> f64 {
        1.0 - a
    }
}

/// Evaluates the relaxed formula at `p`. N-ary conjunctions and
/// disjunctions fold left to right.
pub fn fuzzy_eval(f: &Formula, p: &ProbVector, norm: FuzzyNorm) -> Result<f64, LogicError> {
    if p.len() < f.universe() {
        return Err(LogicError::DimensionMismatch { expected: f.universe(), got: p.len() });
    }
    fn go(e: &Expr, p: &ProbVector, norm: FuzzyNorm) -> f64 {
        match e {
            Expr::True => 1.0,
            Expr::False => 0.0,
            Expr::Lit(l) => {
                let v = p.get(l.var).expect("dimension checked");
                if l.positive {
                    v
                } else {
                    norm.neg(v)
                }
            }
            Expr::Not(c) => norm.neg(go(c, p, norm)),
            Expr::And(cs) => {
                let mut it = cs.iter().map(|c| go(c, p, norm));
                let first = it.next().expect("nonempty conjunction");
                it.fold(first, |acc, v| norm.conj(acc, v))
            }
            Expr::Or(cs) => {
                let mut it = cs.iter().map(|c| go(c, p, norm));
                let first = it.next().expect("nonempty disjunction");
                it.fold(first, |acc, v| norm.disj(acc, v))
            }
        }
    }
    Ok(go(f.root(), p, norm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::{exactly_one_cnf, exactly_one_dnf};
    use crate::logic::{eval_state, State};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn probs(values: &[f64]) -> ProbVector {
        ProbVector::new(values.to_vec()).unwrap()
    }

    #[test]
    fn binary_conjunction_matches_hand_value() {
        let f = Formula::new(Expr::and(vec![Expr::lit(1), Expr::lit(2)]));
        let v = fuzzy_eval(&f, &probs(&[0.7, 0.6]), FuzzyNorm::Lukasiewicz).unwrap();
        assert!((v - 0.3).abs() < 1e-12);
    }

    #[test]
    fn clause_encoding_is_one_on_crisp_satisfying_state() {
        let f = exactly_one_cnf(3);
        let v = fuzzy_eval(&f, &probs(&[1.0, 0.0, 0.0]), FuzzyNorm::Lukasiewicz).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn crisp_inputs_reduce_to_boolean_semantics() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let n = rng.gen_range(1..=6);
            let f = crate::logic::random_formula(&mut rng, n, 3);
            let bits: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
            let s = State::new(bits);
            let fuzzy = fuzzy_eval(&f, &s.to_probs(), FuzzyNorm::Lukasiewicz).unwrap();
            let boolean = eval_state(&f, &s).unwrap();
            assert_eq!(fuzzy, if boolean { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn the_two_exactly_one_encodings_diverge_on_soft_inputs() {
        let cnf = exactly_one_cnf(3);
        let dnf = exactly_one_dnf(3);
        let p = probs(&[0.5, 0.5, 0.5]);
        let v_cnf = fuzzy_eval(&cnf, &p, FuzzyNorm::Lukasiewicz).unwrap();
        let v_dnf = fuzzy_eval(&dnf, &p, FuzzyNorm::Lukasiewicz).unwrap();
        assert!((v_cnf - 1.0).abs() < 1e-12);
        assert!((v_dnf - 0.0).abs() < 1e-12);
    }

    #[test]
    fn clause_encoding_is_constant_one_on_distributions() {
        // When p sums to one (softmax outputs), every clause of the
        // pairwise encoding saturates, so the relaxation carries no signal.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = exactly_one_cnf(3);
        for _ in 0..100 {
            let raw: Vec<f64> = (0..3).map(|_| rng.gen_range(0.01..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let p = probs(&raw.iter().map(|v| v / total).collect::<Vec<_>>());
            let v = fuzzy_eval(&f, &p, FuzzyNorm::Lukasiewicz).unwrap();
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn values_stay_in_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..100 {
            let n = rng.gen_range(1..=6);
            let f = crate::logic::random_formula(&mut rng, n, 4);
            let p = ProbVector::new((0..n).map(|_| rng.gen()).collect()).unwrap();
            let v = fuzzy_eval(&f, &p, FuzzyNorm::Lukasiewicz).unwrap();
            assert!((0.0..=1.0).contains(&v));
        }
    }
}
