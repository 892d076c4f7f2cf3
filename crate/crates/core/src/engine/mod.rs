//! Weighted model counting, semantic loss, and its exact gradient.
//!
//! Evaluation takes one upward pass for values and one downward pass for
//! partial derivatives, both linear in circuit size. The upward pass runs in
//! log space (log-sum-exp at sum nodes) so that constraints over hundreds of
//! variables evaluate without underflow; [`reference_wmc`] keeps the plain
//! linear-space recurrence around for cross-checking on small circuits.

pub mod axioms;

use thiserror::Error;

use crate::circuit::{Circuit, CircuitNode};
use crate::logic::ProbVector;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("circuit universe has {expected} variables but p has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("weighted model count is zero; the gradient is undefined")]
    ZeroWmc,
}

/// Pins the constant left free by the loss definition: natural logarithm
/// scaled by `constant`, with `epsilon` flooring log arguments.
#[derive(Debug, Clone, Copy)]
pub struct LossConfig {
    pub constant: f64,
    pub epsilon: f64,
}

impl Default for LossConfig {
    fn default() -> LossConfig {
        LossConfig { constant: 1.0, epsilon: 1e-30 }
    }
}

/// Per-node results of the two evaluation passes, in log space.
#[derive(Debug, Clone)]
pub struct EvalTrace {
    log_values: Vec<f64>,
    root: usize,
}

impl EvalTrace {
    /// Log of the weighted model count at the root.
    pub fn log_wmc(&self) -> f64 {
        self.log_values[self.root]
    }
}

fn check_dims(c: &Circuit, p: &ProbVector) -> Result<(), EngineError> {
    if p.len() != c.universe_size() {
        return Err(EngineError::DimensionMismatch {
            expected: c.universe_size(),
            got: p.len(),
        });
    }
    Ok(())
}

/// Upward pass: literal leaves take `p_i` or `1 - p_i`, products add logs,
/// sums combine by log-sum-exp.
pub fn forward(c: &Circuit, p: &ProbVector) -> Result<EvalTrace, EngineError> {
    check_dims(c, p)?;
    let values = p.values();
    let mut log_values = Vec::with_capacity(c.node_count());
    for node in c.nodes() {
        let v = match node {
            CircuitNode::False => f64::NEG_INFINITY,
            CircuitNode::True => 0.0,
            CircuitNode::Literal { var, polarity } => {
                let pi = values[*var as usize - 1];
                if *polarity {
                    pi.ln()
                } else {
                    (1.0 - pi).ln()
                }
            }
            CircuitNode::Product { children } => {
                children.iter().map(|&ch| log_values[ch as usize]).sum()
            }
            CircuitNode::Sum { children } => {
                log_sum_exp(children.iter().map(|&ch| log_values[ch as usize]))
            }
        };
        log_values.push(v);
    }
    Ok(EvalTrace { log_values, root: c.root() as usize })
}

/// Weighted model count of the circuit under `p`.
pub fn wmc(c: &Circuit, p: &ProbVector) -> Result<f64, EngineError> {
    Ok(forward(c, p)?.log_wmc().exp())
}

/// Plain linear-space evaluation, kept as an independent cross-check.
pub fn reference_wmc(c: &Circuit, p: &ProbVector) -> Result<f64, EngineError> {
    check_dims(c, p)?;
    let values = p.values();
    let mut vals = Vec::with_capacity(c.node_count());
    for node in c.nodes() {
        let v = match node {
            CircuitNode::False => 0.0,
            CircuitNode::True => 1.0,
            CircuitNode::Literal { var, polarity } => {
                let pi = values[*var as usize - 1];
                if *polarity {
                    pi
                } else {
                    1.0 - pi
                }
            }
            CircuitNode::Product { children } => {
                children.iter().map(|&ch| vals[ch as usize]).product()
            }
            CircuitNode::Sum { children } => {
                children.iter().map(|&ch| vals[ch as usize]).sum()
            }
        };
        vals.push(v);
    }
    Ok(vals[c.root() as usize])
}

/// Negative log weighted model count. Returns `f64::INFINITY` when the
/// count is exactly zero; callers wanting a finite surrogate apply the
/// epsilon floor themselves (the trainer does).
pub fn semantic_loss(c: &Circuit, p: &ProbVector, cfg: &LossConfig) -> Result<f64, EngineError> {
    Ok(loss_from_log_wmc(forward(c, p)?.log_wmc(), cfg))
}

fn loss_from_log_wmc(log_wmc: f64, cfg: &LossConfig) -> f64 {
    if log_wmc == f64::NEG_INFINITY {
        return f64::INFINITY;
    }
    -(cfg.constant * log_wmc.max(cfg.epsilon.ln())) + 0.0
}

/// Gradient of the semantic loss with respect to every universe variable.
/// Variables absent from the circuit get a zero component.
pub fn semantic_loss_grad(
    c: &Circuit,
    p: &ProbVector,
    cfg: &LossConfig,
) -> Result<Vec<f64>, EngineError> {
    Ok(loss_and_grad(c, p, cfg)?.1)
}

/// Loss together with its gradient, sharing the two passes.
pub fn loss_and_grad(
    c: &Circuit,
    p: &ProbVector,
    cfg: &LossConfig,
) -> Result<(f64, Vec<f64>), EngineError> {
    let trace = forward(c, p)?;
    let log_wmc = trace.log_wmc();
    if log_wmc == f64::NEG_INFINITY {
        return Err(EngineError::ZeroWmc);
    }
    let log_partials = backward(c, &trace);

    // d loss / d p_i = -K * (partial at x_i - partial at ¬x_i) / wmc,
    // assembled from ratios so that tiny counts stay stable.
    let mut grad = vec![0.0; c.universe_size()];
    for (id, node) in c.nodes().iter().enumerate() {
        if let CircuitNode::Literal { var, polarity } = node {
            let ratio = (log_partials[id] - log_wmc).exp();
            let i = *var as usize - 1;
            if *polarity {
                grad[i] -= cfg.constant * ratio;
            } else {
                grad[i] += cfg.constant * ratio;
            }
        }
    }
    Ok((loss_from_log_wmc(log_wmc, cfg), grad))
}

/// Downward pass accumulating log partial derivatives of the root value
/// with respect to each node value.
fn backward(c: &Circuit, trace: &EvalTrace) -> Vec<f64> {
    let n = c.node_count();
    let mut log_partials = vec![f64::NEG_INFINITY; n];
    log_partials[trace.root] = 0.0;
    for id in (0..n).rev() {
        let pi = log_partials[id];
        if pi == f64::NEG_INFINITY {
            continue;
        }
        match &c.nodes()[id] {
            CircuitNode::Sum { children } => {
                for &ch in children {
                    let slot = &mut log_partials[ch as usize];
                    *slot = log_add_exp(*slot, pi);
                }
            }
            CircuitNode::Product { children } => {
                // Product of the other children: track the finite-log sum
                // and the number of zero-valued children separately.
                let mut finite_sum = 0.0;
                let mut zeros = 0usize;
                for &ch in children {
                    let v = trace.log_values[ch as usize];
                    if v == f64::NEG_INFINITY {
                        zeros += 1;
                    } else {
                        finite_sum += v;
                    }
                }
                for &ch in children {
                    let v = trace.log_values[ch as usize];
                    let others = if v == f64::NEG_INFINITY {
                        if zeros == 1 {
                            finite_sum
                        } else {
                            f64::NEG_INFINITY
                        }
                    } else if zeros == 0 {
                        finite_sum - v
                    } else {
                        f64::NEG_INFINITY
                    };
                    if others != f64::NEG_INFINITY {
                        let slot = &mut log_partials[ch as usize];
                        *slot = log_add_exp(*slot, pi + others);
                    }
                }
            }
            _ => {}
        }
    }
    log_partials
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

fn log_sum_exp(items: impl Iterator<Item = f64>) -> f64 {
    let mut acc = f64::NEG_INFINITY;
    for x in items {
        acc = log_add_exp(acc, x);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bdd::{compile, VarOrder};
    use crate::encoders::{exactly_one, exactly_one_cnf};
    use crate::logic::{brute_force_wmc, random_formula, ProbVector, State};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn circuit_of(f: &crate::logic::Formula) -> Circuit {
        let (mgr, root) = compile(f, VarOrder::natural(f.universe())).unwrap();
        mgr.to_circuit(root)
    }

    /// Independent slope estimate through the linear-space evaluator.
    fn finite_difference_grad(c: &Circuit, p: &ProbVector, h: f64) -> Vec<f64> {
        let mut grad = vec![0.0; p.len()];
        for i in 0..p.len() {
            let mut hi = p.values().to_vec();
            let mut lo = p.values().to_vec();
            hi[i] += h;
            lo[i] -= h;
            let up = -reference_wmc(c, &ProbVector::new(hi).unwrap()).unwrap().ln();
            let down = -reference_wmc(c, &ProbVector::new(lo).unwrap()).unwrap().ln();
            grad[i] = (up - down) / (2.0 * h);
        }
        grad
    }

    fn assert_grad_close(got: &[f64], want: &[f64], rel: f64) {
        for (i, (&g, &w)) in got.iter().zip(want).enumerate() {
            if g.abs() < 1e-6 && w.abs() < 1e-6 {
                continue;
            }
            let err = (g - w).abs() / g.abs().max(w.abs());
            assert!(err < rel, "component {i}: got {g}, want {w} (rel err {err})");
        }
    }

    #[test]
    fn wmc_of_exactly_one_at_half() {
        let c = exactly_one(3).unwrap();
        let p = ProbVector::uniform(3);
        assert!((wmc(&c, &p).unwrap() - 0.375).abs() < 1e-12);
        assert!((reference_wmc(&c, &p).unwrap() - 0.375).abs() < 1e-15);
    }

    #[test]
    fn wmc_matches_brute_force_on_random_formulas() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..40 {
            let n = rng.gen_range(2..=8);
            let f = random_formula(&mut rng, n, 3);
            let c = circuit_of(&f);
            let p = ProbVector::new((0..n).map(|_| rng.gen()).collect()).unwrap();
            let expected = brute_force_wmc(&f, &p).unwrap();
            assert!((wmc(&c, &p).unwrap() - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn crisp_input_reduces_to_state_evaluation() {
        let c = exactly_one(4).unwrap();
        let sat = State::new(vec![false, true, false, false]);
        let unsat = State::new(vec![true, true, false, false]);
        assert_eq!(wmc(&c, &sat.to_probs()).unwrap(), 1.0);
        assert_eq!(wmc(&c, &unsat.to_probs()).unwrap(), 0.0);
    }

    #[test]
    fn constant_true_has_zero_loss() {
        let f = crate::logic::Formula::with_universe(crate::logic::Expr::True, 3).unwrap();
        let c = circuit_of(&f);
        let p = ProbVector::new(vec![0.3, 0.9, 0.1]).unwrap();
        assert_eq!(wmc(&c, &p).unwrap(), 1.0);
        assert_eq!(semantic_loss(&c, &p, &LossConfig::default()).unwrap(), 0.0);
    }

    #[test]
    fn loss_of_exactly_one_at_half() {
        let c = exactly_one(3).unwrap();
        let p = ProbVector::uniform(3);
        let loss = semantic_loss(&c, &p, &LossConfig::default()).unwrap();
        assert!((loss - 0.375f64.ln().abs()).abs() < 1e-12);
        assert!((loss - 0.98083).abs() < 1e-5);
    }

    #[test]
    fn state_loss_sums_the_literal_terms() {
        let s = State::new(vec![true, false, true]);
        let c = circuit_of(&s.to_formula());
        let p = ProbVector::new(vec![0.9, 0.2, 0.8]).unwrap();
        let loss = semantic_loss(&c, &p, &LossConfig::default()).unwrap();
        let expected = -(0.9f64.ln() + 0.8f64.ln() + 0.8f64.ln());
        assert!((loss - expected).abs() < 1e-12);
        assert!((loss - 0.55165).abs() < 1e-5);
    }

    #[test]
    fn unsat_circuit_signals_infinite_loss() {
        let f = crate::logic::Formula::new(crate::logic::Expr::and(vec![
            crate::logic::Expr::lit(1),
            crate::logic::Expr::neg_lit(1),
        ]));
        let c = circuit_of(&f);
        let p = ProbVector::uniform(1);
        assert_eq!(semantic_loss(&c, &p, &LossConfig::default()).unwrap(), f64::INFINITY);
        assert!(matches!(
            loss_and_grad(&c, &p, &LossConfig::default()),
            Err(EngineError::ZeroWmc)
        ));
    }

    #[test]
    fn exactly_one_gradient_at_half_is_two_thirds() {
        let c = exactly_one(3).unwrap();
        let p = ProbVector::uniform(3);
        let grad = semantic_loss_grad(&c, &p, &LossConfig::default()).unwrap();
        for g in &grad {
            assert!((g - 2.0 / 3.0).abs() < 1e-12, "{grad:?}");
        }
        let fd = finite_difference_grad(&c, &p, 1e-6);
        assert_grad_close(&grad, &fd, 1e-5);
    }

    #[test]
    fn absent_variable_has_zero_gradient() {
        let f = crate::logic::Formula::with_universe(
            crate::logic::Expr::or(vec![crate::logic::Expr::lit(1), crate::logic::Expr::lit(2)]),
            4,
        )
        .unwrap();
        let c = circuit_of(&f);
        let p = ProbVector::new(vec![0.3, 0.6, 0.2, 0.9]).unwrap();
        let grad = semantic_loss_grad(&c, &p, &LossConfig::default()).unwrap();
        assert_eq!(grad[2], 0.0);
        assert_eq!(grad[3], 0.0);
        assert!(grad[0] != 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences_on_random_circuits() {
        let mut rng = ChaCha8Rng::seed_from_u64(91);
        for _ in 0..25 {
            let n = rng.gen_range(2..=8);
            let f = random_formula(&mut rng, n, 3);
            let c = circuit_of(&f);
            let p =
                ProbVector::new((0..n).map(|_| rng.gen_range(0.05..0.95)).collect()).unwrap();
            if wmc(&c, &p).unwrap() < 1e-6 {
                continue;
            }
            let grad = semantic_loss_grad(&c, &p, &LossConfig::default()).unwrap();
            let fd = finite_difference_grad(&c, &p, 1e-6);
            assert_grad_close(&grad, &fd, 1e-5);
        }
    }

    #[test]
    fn log_space_agrees_with_reference_on_long_products() {
        // A conjunction of 200 literals underflows in linear space but stays
        // exact in log space.
        let n = 200;
        let lits: Vec<crate::logic::Expr> =
            (1..=n as u32).map(crate::logic::Expr::lit).collect();
        let f = crate::logic::Formula::new(crate::logic::Expr::and(lits));
        let c = circuit_of(&f);
        let p = ProbVector::new(vec![0.5; n]).unwrap();
        let lw = forward(&c, &p).unwrap().log_wmc();
        assert!((lw - (n as f64) * 0.5f64.ln()).abs() < 1e-9);
        // The default floor caps the loss at -ln(epsilon)...
        let floored = semantic_loss(&c, &p, &LossConfig::default()).unwrap();
        assert_eq!(floored, -(1e-30f64.ln()));
        // ...while a lower floor exposes the true value.
        let cfg = LossConfig { epsilon: f64::MIN_POSITIVE, ..LossConfig::default() };
        let loss = semantic_loss(&c, &p, &cfg).unwrap();
        assert!((loss - (n as f64) * std::f64::consts::LN_2).abs() < 1e-9);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let c = exactly_one(3).unwrap();
        let p = ProbVector::uniform(2);
        assert!(matches!(
            wmc(&c, &p),
            Err(EngineError::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn clause_encoding_and_direct_encoder_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 2..=6 {
            let direct = exactly_one(n).unwrap();
            let compiled = circuit_of(&exactly_one_cnf(n));
            for _ in 0..10 {
                let p = ProbVector::new((0..n).map(|_| rng.gen()).collect()).unwrap();
                let a = wmc(&direct, &p).unwrap();
                let b = wmc(&compiled, &p).unwrap();
                assert!((a - b).abs() < 1e-9, "n={n}: {a} vs {b}");
            }
        }
    }
}
