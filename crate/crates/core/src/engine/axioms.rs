//! Executable property checks for the loss function's defining axioms.
//!
//! Each check draws seeded random formulas and probability vectors, runs
//! both sides of the identity through the full compile-and-evaluate path,
//! and records the worst deviation. The CLI surfaces the report and fails
//! the process when any check has failures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{semantic_loss, LossConfig};
use crate::bdd::{compile, VarOrder};
use crate::circuit::Circuit;
use crate::logic::{enumerate_models, random_formula, Formula, ProbVector};

/// Result of one axiom check over a batch of sampled instances.
#[derive(Debug, Clone)]
pub struct AxiomOutcome {
    pub name: &'static str,
    pub instances: usize,
    pub failures: usize,
    pub max_error: f64,
}

impl AxiomOutcome {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Full report over all checks, reproducible from the seed.
#[derive(Debug, Clone)]
pub struct AxiomReport {
    pub seed: u64,
    pub outcomes: Vec<AxiomOutcome>,
}

impl AxiomReport {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(AxiomOutcome::passed)
    }
}

fn circuit_of(f: &Formula) -> Circuit {
    let (mgr, root) = compile(f, VarOrder::natural(f.universe())).expect("small formula");
    mgr.to_circuit(root)
}

fn loss_of(f: &Formula, p: &ProbVector) -> f64 {
    semantic_loss(&circuit_of(f), p, &LossConfig::default()).expect("dims match")
}

fn random_probs<R: Rng>(rng: &mut R, n: usize) -> ProbVector {
    ProbVector::new((0..n).map(|_| rng.gen()).collect()).expect("in range")
}

/// A satisfiable random formula (resampled until one is found).
fn random_sat_formula<R: Rng>(rng: &mut R, n: usize, depth: usize) -> Formula {
    loop {
        let f = random_formula(rng, n, depth);
        if !enumerate_models(&f).expect("small universe").is_empty() {
            return f;
        }
    }
}

/// Runs every axiom check on `instances` sampled instances each.
pub fn run_axiom_suite(seed: u64, instances: usize) -> AxiomReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let outcomes = vec![
        check_truth(&mut rng, instances),
        check_additive_independence(&mut rng, instances),
        check_locality(&mut rng, instances),
        check_monotonicity(&mut rng, instances),
        check_identity(&mut rng, instances),
        check_satisfaction(&mut rng, instances),
        check_label_literal(&mut rng, instances),
        check_value_symmetry(&mut rng, instances),
        check_variable_symmetry(&mut rng, instances),
    ];
    AxiomReport { seed, outcomes }
}

fn summarize(
    name: &'static str,
    instances: usize,
    errors: impl Iterator<Item = f64>,
    tolerance: f64,
) -> AxiomOutcome {
    let mut failures = 0;
    let mut max_error: f64 = 0.0;
    for e in errors {
        max_error = max_error.max(e);
        if !(e <= tolerance) {
            failures += 1;
        }
    }
    AxiomOutcome { name, instances, failures, max_error }
}

/// A tautology costs nothing, no matter the predictions.
fn check_truth(rng: &mut ChaCha8Rng, instances: usize) -> AxiomOutcome {
    let errors: Vec<f64> = (0..instances)
        .map(|_| {
            let n = rng.gen_range(1..=6);
            let f = Formula::with_universe(crate::logic::Expr::True, n).unwrap();
            let p = random_probs(rng, n);
            loss_of(&f, &p).abs()
        })
        .collect();
    summarize("truth", instances, errors.into_iter(), 0.0)
}

/// Constraints over disjoint variables cost the sum of their parts.
fn check_additive_independence(rng: &mut ChaCha8Rng, instances: usize) -> AxiomOutcome {
    let errors: Vec<f64> = (0..instances)
        .map(|_| {
            let n = rng.gen_range(2..=4);
            let m = rng.gen_range(2..=4);
            let alpha = random_sat_formula(rng, n, 2);
            let beta = random_sat_formula(rng, m, 2);
            let p = random_probs(rng, n);
            let q = random_probs(rng, m);
            let joint = Formula::new(crate::logic::Expr::and(vec![
                alpha.root().clone(),
                beta.shift_vars(n as u32).root().clone(),
            ]))
            .declare_universe(n + m);
            let mut pq = p.values().to_vec();
            pq.extend_from_slice(q.values());
            let pq = ProbVector::new(pq).unwrap();
            (loss_of(&joint, &pq) - loss_of(&alpha, &p) - loss_of(&beta, &q)).abs()
        })
        .collect();
    summarize("additive_independence", instances, errors.into_iter(), 1e-9)
}

/// Variables outside the constraint never change the loss.
fn check_locality(rng: &mut ChaCha8Rng, instances: usize) -> AxiomOutcome {
    let errors: Vec<f64> = (0..instances)
        .map(|_| {
            let n = rng.gen_range(2..=5);
            let extra = rng.gen_range(1..=3);
            let f = random_sat_formula(rng, n, 2);
            let p = random_probs(rng, n);
            let wide = f.clone().declare_universe(n + extra);
            let mut pq = p.values().to_vec();
            pq.extend((0..extra).map(|_| rng.gen::<f64>()));
            let pq = ProbVector::new(pq).unwrap();
            (loss_of(&wide, &pq) - loss_of(&f, &p)).abs()
        })
        .collect();
    summarize("locality", instances, errors.into_iter(), 0.0)
}

/// Strengthening a constraint can only increase the loss.
fn check_monotonicity(rng: &mut ChaCha8Rng, instances: usize) -> AxiomOutcome {
    let errors: Vec<f64> = (0..instances)
        .map(|_| {
            let n = rng.gen_range(2..=6);
            let beta = random_formula(rng, n, 2);
            let gamma = random_formula(rng, n, 2);
            let alpha = Formula::new(crate::logic::Expr::and(vec![
                beta.root().clone(),
                gamma.root().clone(),
            ]))
            .declare_universe(n);
            let p = random_probs(rng, n);
            // alpha entails beta, so loss(alpha) >= loss(beta).
            (loss_of(&beta, &p) - loss_of(&alpha, &p)).max(0.0)
        })
        .collect();
    summarize("monotonicity", instances, errors.into_iter(), 1e-12)
}

/// A state, compared against itself as a deterministic vector, costs zero.
fn check_identity(rng: &mut ChaCha8Rng, instances: usize) -> AxiomOutcome {
    let errors: Vec<f64> = (0..instances)
        .map(|_| {
            let n = rng.gen_range(1..=8);
            let bits: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
            let state = crate::logic::State::new(bits);
            loss_of(&state.to_formula(), &state.to_probs()).abs()
        })
        .collect();
    summarize("identity", instances, errors.into_iter(), 0.0)
}

/// Any satisfying deterministic vector costs zero.
fn check_satisfaction(rng: &mut ChaCha8Rng, instances: usize) -> AxiomOutcome {
    let errors: Vec<f64> = (0..instances)
        .map(|_| {
            let n = rng.gen_range(2..=6);
            let f = random_sat_formula(rng, n, 2);
            let models = enumerate_models(&f).unwrap();
            let model = &models[rng.gen_range(0..models.len())];
            loss_of(&f, &model.to_probs()).abs()
        })
        .collect();
    summarize("satisfaction", instances, errors.into_iter(), 0.0)
}

/// Single literals reduce to cross entropy with constant one.
fn check_label_literal(rng: &mut ChaCha8Rng, instances: usize) -> AxiomOutcome {
    let errors: Vec<f64> = (0..instances)
        .map(|_| {
            let p_val: f64 = rng.gen_range(0.01..0.99);
            let pos = Formula::new(crate::logic::Expr::lit(1));
            let neg = Formula::new(crate::logic::Expr::neg_lit(1));
            let p = ProbVector::new(vec![p_val]).unwrap();
            let e1 = (loss_of(&pos, &p) - -p_val.ln()).abs();
            let e2 = (loss_of(&neg, &p) - -(1.0 - p_val).ln()).abs();
            e1.max(e2)
        })
        .collect();
    summarize("label_literal_correspondence", instances, errors.into_iter(), 0.0)
}

/// Negating every variable and flipping every probability changes nothing.
fn check_value_symmetry(rng: &mut ChaCha8Rng, instances: usize) -> AxiomOutcome {
    let errors: Vec<f64> = (0..instances)
        .map(|_| {
            let n = rng.gen_range(2..=6);
            let f = random_sat_formula(rng, n, 3);
            let p = random_probs(rng, n);
            let flipped =
                ProbVector::new(p.values().iter().map(|&v| 1.0 - v).collect()).unwrap();
            (loss_of(&f, &p) - loss_of(&f.negate_vars(), &flipped)).abs()
        })
        .collect();
    summarize("value_symmetry", instances, errors.into_iter(), 1e-9)
}

/// Renaming variables and permuting the vector the same way changes nothing.
fn check_variable_symmetry(rng: &mut ChaCha8Rng, instances: usize) -> AxiomOutcome {
    let errors: Vec<f64> = (0..instances)
        .map(|_| {
            let n = rng.gen_range(2..=6);
            let f = random_sat_formula(rng, n, 3);
            let p = random_probs(rng, n);
            let mut perm: Vec<u32> = (1..=n as u32).collect();
            for i in (1..n).rev() {
                perm.swap(i, rng.gen_range(0..=i));
            }
            let pf = f.permute_vars(&perm).unwrap();
            let mut permuted = vec![0.0; n];
            for (old, &new) in perm.iter().enumerate() {
                permuted[new as usize - 1] = p.values()[old];
            }
            let pp = ProbVector::new(permuted).unwrap();
            (loss_of(&f, &p) - loss_of(&pf, &pp)).abs()
        })
        .collect();
    summarize("variable_symmetry", instances, errors.into_iter(), 1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_on_seeded_instances() {
        let report = run_axiom_suite(7, 25);
        assert_eq!(report.outcomes.len(), 9);
        for o in &report.outcomes {
            assert!(o.passed(), "{} failed {} of {} (max err {})",
                o.name, o.failures, o.instances, o.max_error);
        }
        assert!(report.all_passed());
    }

    #[test]
    fn suite_is_deterministic_per_seed() {
        let a = run_axiom_suite(3, 10);
        let b = run_axiom_suite(3, 10);
        for (x, y) in a.outcomes.iter().zip(&b.outcomes) {
            assert_eq!(x.max_error, y.max_error);
            assert_eq!(x.failures, y.failures);
        }
    }
}
