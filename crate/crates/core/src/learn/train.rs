//! Full-batch Adam trainer and the three-way accuracy metrics.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use super::{
    combined_loss, entropy_loss, AdamState, GradBuffer, LearnError, MlpModel, SemanticTerm,
};
use crate::circuit::{Circuit, Evidence};
use crate::logic::{State, VarId};

/// One supervised or unlabeled example. Unlabeled examples still contribute
/// the semantic term during training but are skipped by the metrics.
#[derive(Debug, Clone)]
pub struct TrainExample {
    pub features: Vec<f64>,
    pub label: Option<State>,
}

/// Which regularizer the objective adds on top of cross entropy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularizer {
    #[default]
    Semantic,
    Entropy,
}

/// Training hyperparameters. Full-batch Adam throughout; runs are
/// deterministic given the seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub semantic_weight: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub regularizer: Regularizer,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            semantic_weight: 0.0,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            max_epochs: 2000,
            patience: 50,
            seed: 0,
            regularizer: Regularizer::Semantic,
        }
    }
}

/// Coherent, incoherent, and constraint accuracy, as percentages.
///
/// Coherent counts exactly-right output vectors, incoherent counts
/// individually right bits, constraint counts predictions that satisfy the
/// constraint (conditioned on the example's evidence where applicable).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub coherent: f64,
    pub incoherent: f64,
    pub constraint: f64,
}

/// Per-epoch history entry; metrics are computed on the validation set.
#[derive(Debug, Clone, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: f64,
    pub metrics: Metrics,
}

/// Result of a run: the best model by validation loss (the final model when
/// no validation set was given), the per-epoch history, and the epoch the
/// returned weights come from.
pub struct TrainOutcome {
    pub model: MlpModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

/// Resolves the constraint circuit each example trains against.
///
/// Tasks whose constraint is fixed (orderings, one-hot) use a single
/// circuit; the grid task conditions the shared path constraint on each
/// example's endpoint indicators, cached per distinct evidence pattern.
pub struct ConstraintContext {
    base: Rc<Circuit>,
    output_vars: Vec<VarId>,
    extractor: Option<Box<dyn Fn(&[f64]) -> Evidence>>,
    cache: RefCell<HashMap<Vec<(u32, bool)>, SemanticTerm>>,
}

impl ConstraintContext {
    /// Constraint directly over the model's output units.
    pub fn fixed(circuit: Circuit) -> ConstraintContext {
        let output_vars = (1..=circuit.universe_size() as u32).map(VarId::new).collect();
        ConstraintContext {
            base: Rc::new(circuit.normalized()),
            output_vars,
            extractor: None,
            cache: RefCell::new(HashMap::new()),
        }
    }

    /// Constraint over a larger universe: `output_vars[i]` is the circuit
    /// variable carrying output `i`, and `extractor` reads each example's
    /// evidence (the clamped variables) from its feature vector.
    pub fn conditioned(
        circuit: Circuit,
        output_vars: Vec<VarId>,
        extractor: impl Fn(&[f64]) -> Evidence + 'static,
    ) -> ConstraintContext {
        ConstraintContext {
            base: Rc::new(circuit),
            output_vars,
            extractor: Some(Box::new(extractor)),
            cache: RefCell::new(HashMap::new()),
        }
    }

    /// The semantic term for one example, conditioning and caching by
    /// evidence pattern when an extractor is present.
    pub fn term_for(&self, features: &[f64]) -> SemanticTerm {
        let Some(extractor) = &self.extractor else {
            return SemanticTerm::embedded(Rc::clone(&self.base), self.output_vars.clone());
        };
        let evidence = extractor(features);
        let mut key: Vec<(u32, bool)> =
            evidence.iter().map(|(v, &b)| (v.index(), b)).collect();
        key.sort_unstable();
        if let Some(term) = self.cache.borrow().get(&key) {
            return term.clone();
        }
        let conditioned =
            self.base.condition(&evidence).expect("evidence within universe");
        let term =
            SemanticTerm::embedded(Rc::new(conditioned), self.output_vars.clone());
        self.cache.borrow_mut().insert(key, term.clone());
        term
    }
}

/// Batch objective: the mean cross entropy over the labeled examples plus
/// `w` times the mean regularizer over all examples. The two pools carry
/// their own normalization so that a handful of labels keeps full weight
/// next to a large unlabeled set. Examples are visited in order and summed
/// sequentially, so the reduction is deterministic.
fn batch_loss_and_grads(
    model: &MlpModel,
    examples: &[TrainExample],
    context: &ConstraintContext,
    cfg: &TrainConfig,
    grads: Option<&mut GradBuffer>,
) -> Result<f64, LearnError> {
    let n_all = examples.len().max(1) as f64;
    let n_labeled = examples.iter().filter(|e| e.label.is_some()).count().max(1) as f64;
    let w = cfg.semantic_weight;
    let mut ce_sum = 0.0;
    let mut reg_sum = 0.0;
    let mut grads = grads;
    for ex in examples {
        let trace = model.forward_trace(&ex.features)?;
        let p = crate::logic::ProbVector::new(trace.output().to_vec())
            .expect("activations stay in range");
        let mut dldp = vec![0.0; p.len()];
        if let Some(label) = &ex.label {
            let (ce, ce_grad) = combined_loss(
                &p,
                Some(label),
                &context.term_for(&ex.features),
                0.0,
                model.output_activation(),
            )?;
            ce_sum += ce;
            for (g, d) in dldp.iter_mut().zip(ce_grad) {
                *g += d / n_labeled;
            }
        }
        if w != 0.0 {
            let (reg, reg_grad) = match cfg.regularizer {
                Regularizer::Semantic => context.term_for(&ex.features).eval(p.values())?,
                Regularizer::Entropy => entropy_loss(&p),
            };
            reg_sum += reg;
            for (g, d) in dldp.iter_mut().zip(reg_grad) {
                *g += w * d / n_all;
            }
        }
        if let Some(buf) = grads.as_deref_mut() {
            model.accumulate_grads(&trace, &dldp, buf);
        }
    }
    Ok(ce_sum / n_labeled + w * reg_sum / n_all)
}

/// Full-batch Adam with early stopping on validation loss.
///
/// With a validation set, training stops after `patience` epochs without
/// improvement and the best-scoring weights are returned; without one it
/// runs to `max_epochs` and returns the final weights.
pub fn train(
    mut model: MlpModel,
    cfg: &TrainConfig,
    train_set: &[TrainExample],
    valid_set: Option<&[TrainExample]>,
    context: &ConstraintContext,
) -> Result<TrainOutcome, LearnError> {
    let mut adam = AdamState::new(&model);
    let mut history = Vec::new();
    let mut best: Option<(f64, MlpModel, usize)> = None;
    let mut stagnant = 0usize;

    for epoch in 0..cfg.max_epochs {
        let mut grads = GradBuffer::zeros_like(&model);
        let train_loss =
            batch_loss_and_grads(&model, train_set, context, cfg, Some(&mut grads))?;
        if !train_loss.is_finite() {
            return Err(LearnError::Diverged { epoch });
        }
        adam.update(
            &mut model,
            &grads,
            cfg.learning_rate,
            cfg.beta1,
            cfg.beta2,
            cfg.adam_epsilon,
        );

        let (valid_loss, metrics) = match valid_set {
            Some(vs) => {
                let loss = batch_loss_and_grads(&model, vs, context, cfg, None)?;
                (loss, evaluate_metrics(&model, vs, context)?)
            }
            None => (
                f64::NAN,
                Metrics { coherent: 0.0, incoherent: 0.0, constraint: 0.0 },
            ),
        };
        history.push(EpochRecord { epoch, train_loss, valid_loss, metrics });

        if valid_set.is_some() {
            if !valid_loss.is_finite() {
                return Err(LearnError::Diverged { epoch });
            }
            let improved = best.as_ref().map_or(true, |(b, _, _)| valid_loss < *b);
            if improved {
                best = Some((valid_loss, model.clone(), epoch));
                stagnant = 0;
            } else {
                stagnant += 1;
                if stagnant >= cfg.patience {
                    break;
                }
            }
        }
    }

    let (model, best_epoch) = match best {
        Some((_, m, e)) => (m, e),
        None => {
            let last = history.len().saturating_sub(1);
            (model, last)
        }
    };
    Ok(TrainOutcome { model, history, best_epoch })
}

/// Binarizes predictions at 0.5 and scores the labeled examples.
pub fn evaluate_metrics(
    model: &MlpModel,
    examples: &[TrainExample],
    context: &ConstraintContext,
) -> Result<Metrics, LearnError> {
    let mut n_examples = 0usize;
    let mut coherent = 0usize;
    let mut bits_right = 0usize;
    let mut bits_total = 0usize;
    let mut satisfied = 0usize;
    for ex in examples {
        let Some(label) = &ex.label else { continue };
        n_examples += 1;
        let p = model.forward(&ex.features)?;
        let bits: Vec<bool> = p.values().iter().map(|&v| v >= 0.5).collect();
        let matching =
            bits.iter().zip(label.bits()).filter(|(a, b)| a == b).count();
        bits_right += matching;
        bits_total += bits.len();
        if matching == bits.len() {
            coherent += 1;
        }
        if context.term_for(&ex.features).satisfied_by(&bits) {
            satisfied += 1;
        }
    }
    let pct = |num: usize, den: usize| {
        if den == 0 {
            0.0
        } else {
            100.0 * num as f64 / den as f64
        }
    };
    Ok(Metrics {
        coherent: pct(coherent, n_examples),
        incoherent: pct(bits_right, bits_total),
        constraint: pct(satisfied, n_examples),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::exactly_one;
    use crate::learn::OutputActivation;
    use crate::logic::ProbVector;

    fn one_hot(n: usize, i: usize) -> State {
        State::new((0..n).map(|j| j == i).collect())
    }

    /// A separable three-class toy problem on one-hot features.
    fn toy_examples() -> Vec<TrainExample> {
        let mut out = Vec::new();
        for class in 0..3usize {
            for rep in 0..6 {
                let mut features = vec![0.0; 3];
                features[class] = 1.0;
                features.push(0.1 * rep as f64);
                out.push(TrainExample { features, label: Some(one_hot(3, class)) });
            }
        }
        out
    }

    #[test]
    fn zero_weight_trajectory_matches_cross_entropy_only_run() {
        let examples = toy_examples();
        let context = ConstraintContext::fixed(exactly_one(3).unwrap());
        let base = MlpModel::new(vec![4, 6, 3], OutputActivation::Softmax, 3);
        let cfg_a = TrainConfig {
            semantic_weight: 0.0,
            max_epochs: 40,
            ..TrainConfig::default()
        };
        // An entropy run with zero weight is exactly cross entropy too.
        let cfg_b = TrainConfig { regularizer: Regularizer::Entropy, ..cfg_a.clone() };
        let a = train(base.clone(), &cfg_a, &examples, None, &context).unwrap();
        let b = train(base, &cfg_b, &examples, None, &context).unwrap();
        assert_eq!(a.model.to_json(), b.model.to_json());
        for (ra, rb) in a.history.iter().zip(&b.history) {
            assert_eq!(ra.train_loss, rb.train_loss);
        }
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let examples = toy_examples();
        let context = ConstraintContext::fixed(exactly_one(3).unwrap());
        let cfg = TrainConfig {
            semantic_weight: 0.1,
            max_epochs: 30,
            ..TrainConfig::default()
        };
        let run = |seed| {
            let model = MlpModel::new(vec![4, 6, 3], OutputActivation::Softmax, seed);
            train(model, &cfg, &toy_examples(), None, &context).unwrap().model.to_json()
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
        drop(examples);
    }

    #[test]
    fn metrics_on_perfect_and_broken_predictions() {
        // A "model" with weights forced to produce near-label outputs is
        // overkill; instead check the arithmetic on a tiny hand case using
        // evaluate_metrics against a trained-to-convergence model.
        let examples = toy_examples();
        let context = ConstraintContext::fixed(exactly_one(3).unwrap());
        let cfg = TrainConfig {
            semantic_weight: 0.0,
            learning_rate: 0.05,
            max_epochs: 400,
            ..TrainConfig::default()
        };
        let model = MlpModel::new(vec![4, 8, 3], OutputActivation::Softmax, 1);
        let outcome = train(model, &cfg, &examples, None, &context).unwrap();
        let m = evaluate_metrics(&outcome.model, &examples, &context).unwrap();
        assert_eq!(m.coherent, 100.0);
        assert_eq!(m.incoherent, 100.0);
        assert_eq!(m.constraint, 100.0);
    }

    #[test]
    fn coherent_never_exceeds_incoherent() {
        let examples = toy_examples();
        let context = ConstraintContext::fixed(exactly_one(3).unwrap());
        for seed in 0..5 {
            let model = MlpModel::new(vec![4, 6, 3], OutputActivation::Softmax, seed);
            let m = evaluate_metrics(&model, &examples, &context).unwrap();
            assert!(m.coherent <= m.incoherent + 1e-12);
        }
    }

    #[test]
    fn single_example_bitwise_accuracy() {
        // Label 1010 against binarized prediction 1000: coherent 0,
        // incoherent 75.
        let context = ConstraintContext::fixed(exactly_one(4).unwrap());
        let mut model = MlpModel::new(vec![1, 4], OutputActivation::Sigmoid, 0);
        for layer in model.param_layers_mut() {
            layer.iter_mut().for_each(|w| *w = 0.0);
        }
        // Bias the first output high, the rest low.
        model_set_bias(&mut model, &[4.0, -4.0, -4.0, -4.0]);
        let examples = vec![TrainExample {
            features: vec![0.0],
            label: Some(State::new(vec![true, false, true, false])),
        }];
        let m = evaluate_metrics(&model, &examples, &context).unwrap();
        assert_eq!(m.coherent, 0.0);
        assert_eq!(m.incoherent, 75.0);
        assert_eq!(m.constraint, 100.0); // 1000 is a valid one-hot vector
    }

    fn model_set_bias(model: &mut MlpModel, bias: &[f64]) {
        let last = model.biases.last_mut().unwrap();
        last.copy_from_slice(bias);
    }

    #[test]
    fn end_to_end_parameter_gradients_match_finite_differences() {
        let context = ConstraintContext::fixed(exactly_one(3).unwrap());
        let term = context.term_for(&[]);
        let cfg = TrainConfig { semantic_weight: 0.7, ..TrainConfig::default() };
        let model = MlpModel::new(vec![2, 4, 3], OutputActivation::Sigmoid, 11);
        let example = TrainExample {
            features: vec![0.4, -0.8],
            label: Some(State::new(vec![false, true, false])),
        };

        let objective = |m: &MlpModel| {
            let p = m.forward(&example.features).unwrap();
            combined_loss(
                &p,
                example.label.as_ref(),
                &term,
                cfg.semantic_weight,
                m.output_activation(),
            )
            .unwrap()
            .0
        };

        let mut grads = GradBuffer::zeros_like(&model);
        let trace = model.forward_trace(&example.features).unwrap();
        let p = ProbVector::new(trace.output().to_vec()).unwrap();
        let (_, dldp) = combined_loss(
            &p,
            example.label.as_ref(),
            &term,
            cfg.semantic_weight,
            model.output_activation(),
        )
        .unwrap();
        model.accumulate_grads(&trace, &dldp, &mut grads);

        let h = 1e-6;
        for layer in 0..model.weights.len() {
            for idx in 0..model.weights[layer].len() {
                let mut hi = model.clone();
                let mut lo = model.clone();
                hi.weights[layer][idx] += h;
                lo.weights[layer][idx] -= h;
                let fd = (objective(&hi) - objective(&lo)) / (2.0 * h);
                let got = grads.weights[layer][idx];
                if fd.abs() < 1e-7 && got.abs() < 1e-7 {
                    continue;
                }
                let rel = (got - fd).abs() / got.abs().max(fd.abs());
                assert!(rel < 1e-4, "layer {layer} idx {idx}: {got} vs {fd}");
            }
            for idx in 0..model.biases[layer].len() {
                let mut hi = model.clone();
                let mut lo = model.clone();
                hi.biases[layer][idx] += h;
                lo.biases[layer][idx] -= h;
                let fd = (objective(&hi) - objective(&lo)) / (2.0 * h);
                let got = grads.biases[layer][idx];
                if fd.abs() < 1e-7 && got.abs() < 1e-7 {
                    continue;
                }
                let rel = (got - fd).abs() / got.abs().max(fd.abs());
                assert!(rel < 1e-4, "bias layer {layer} idx {idx}: {got} vs {fd}");
            }
        }
    }

    #[test]
    fn early_stopping_restores_the_best_epoch() {
        let examples = toy_examples();
        let context = ConstraintContext::fixed(exactly_one(3).unwrap());
        let cfg = TrainConfig {
            semantic_weight: 0.0,
            learning_rate: 0.05,
            max_epochs: 300,
            patience: 10,
            ..TrainConfig::default()
        };
        let model = MlpModel::new(vec![4, 6, 3], OutputActivation::Softmax, 2);
        let outcome = train(model, &cfg, &examples, Some(&examples), &context).unwrap();
        let best = outcome.history[outcome.best_epoch].valid_loss;
        for r in &outcome.history {
            assert!(best <= r.valid_loss + 1e-15);
        }
    }
}
