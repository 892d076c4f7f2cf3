//! End-to-end task assembly: wiring datasets, constraint circuits, and
//! model architectures together for the three evaluation problems.

use thiserror::Error;

use crate::circuit::Evidence;
use crate::data::{Dataset, Split};
use crate::encoders::{grid_simple_path, total_order, EncodeError, GridSpec};
use crate::learn::{
    evaluate_metrics, train, ConstraintContext, LearnError, Metrics, MlpModel,
    OutputActivation, TrainConfig, TrainExample, TrainOutcome,
};
use crate::logic::VarId;

#[derive(Debug, Error)]
pub enum TaskError {
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error("dataset has {got} feature columns, task expects {expected}")]
    FeatureWidth { expected: usize, got: usize },
}

/// Outcome of a supervised run: the trained model plus metrics on the
/// validation and test splits.
pub struct RunResult {
    pub outcome: TrainOutcome,
    pub valid_metrics: Metrics,
    pub test_metrics: Metrics,
}

/// Hidden-layer shape used for the grid task: four sigmoid layers of 50.
pub fn grid_architecture(g: &GridSpec) -> Vec<usize> {
    vec![g.universe_size(), 50, 50, 50, 50, g.n_edges()]
}

/// Hidden-layer shape used for the preference task: two sigmoid layers of 25.
pub fn pref_architecture() -> Vec<usize> {
    vec![36, 25, 25, 16]
}

/// Constraint context for the grid task: the path circuit conditioned per
/// example on its endpoint indicators, with the edge variables carried by
/// the model outputs.
pub fn grid_context(g: &GridSpec) -> Result<ConstraintContext, EncodeError> {
    let circuit = grid_simple_path(g)?;
    let n_nodes = g.n_nodes();
    let output_vars: Vec<VarId> = (0..g.n_edges()).map(|e| g.edge_var(e)).collect();
    Ok(ConstraintContext::conditioned(circuit, output_vars, move |features| {
        let mut e = Evidence::empty();
        for v in 0..n_nodes {
            e.set(VarId::new(v as u32 + 1), features[v] > 0.5);
        }
        e
    }))
}

/// Trains the grid shortest-path predictor on `dataset`.
pub fn run_grid(g: &GridSpec, dataset: &Dataset, cfg: &TrainConfig) -> Result<RunResult, TaskError> {
    if dataset.n_features() != g.universe_size() {
        return Err(TaskError::FeatureWidth {
            expected: g.universe_size(),
            got: dataset.n_features(),
        });
    }
    let context = grid_context(g)?;
    let model = MlpModel::new(grid_architecture(g), OutputActivation::Sigmoid, cfg.seed);
    run_supervised(model, dataset, cfg, context)
}

/// Trains the preference-ranking predictor on `dataset`.
pub fn run_pref(dataset: &Dataset, cfg: &TrainConfig) -> Result<RunResult, TaskError> {
    if dataset.n_features() != 36 {
        return Err(TaskError::FeatureWidth { expected: 36, got: dataset.n_features() });
    }
    let context = ConstraintContext::fixed(total_order(4)?);
    let model = MlpModel::new(pref_architecture(), OutputActivation::Sigmoid, cfg.seed);
    run_supervised(model, dataset, cfg, context)
}

fn run_supervised(
    model: MlpModel,
    dataset: &Dataset,
    cfg: &TrainConfig,
    context: ConstraintContext,
) -> Result<RunResult, TaskError> {
    let train_set = dataset.examples(Split::Train);
    let valid_set = dataset.examples(Split::Valid);
    let test_set = dataset.examples(Split::Test);
    let outcome = train(model, cfg, &train_set, Some(&valid_set), &context)?;
    let valid_metrics = evaluate_metrics(&outcome.model, &valid_set, &context)?;
    let test_metrics = evaluate_metrics(&outcome.model, &test_set, &context)?;
    Ok(RunResult { outcome, valid_metrics, test_metrics })
}

/// Outcome of a toy run: accuracy and mean predictive entropy over the
/// unlabeled points, plus the linear decision boundary for plotting.
pub struct ToyRunResult {
    pub outcome: TrainOutcome,
    pub unlabeled_accuracy: f64,
    pub mean_entropy: f64,
    /// Coefficients `[a, b, c]` of the boundary `a*x + b*y + c = 0`.
    pub boundary: [f64; 3],
}

/// Trains the linear toy classifier on all rows (labeled cross entropy,
/// regularizer on everything) and scores the unlabeled points against
/// their hidden true labels.
pub fn run_toy(dataset: &Dataset, cfg: &TrainConfig) -> Result<ToyRunResult, TaskError> {
    if dataset.n_features() != 2 {
        return Err(TaskError::FeatureWidth { expected: 2, got: dataset.n_features() });
    }
    let context = ConstraintContext::fixed(crate::encoders::exactly_one(2)?);
    let model = MlpModel::new(vec![2, 2], OutputActivation::Softmax, cfg.seed);
    let examples: Vec<TrainExample> = dataset.examples(Split::Train);
    let outcome = train(model, cfg, &examples, None, &context)?;

    let mut correct = 0usize;
    let mut total = 0usize;
    let mut entropy_sum = 0.0;
    for row in dataset.rows().iter().filter(|r| !r.labeled) {
        let p = outcome.model.forward(&row.features)?;
        let predicted = if p.values()[0] >= p.values()[1] { 0 } else { 1 };
        let truth = usize::from(row.labels[1]);
        if predicted == truth {
            correct += 1;
        }
        entropy_sum += crate::learn::entropy_loss(&p).0;
        total += 1;
    }
    let boundary = linear_boundary(&outcome.model);
    Ok(ToyRunResult {
        outcome,
        unlabeled_accuracy: 100.0 * correct as f64 / total.max(1) as f64,
        mean_entropy: entropy_sum / total.max(1) as f64,
        boundary,
    })
}

/// Decision boundary of a softmax pair on linear features: the locus where
/// both class scores tie.
fn linear_boundary(model: &MlpModel) -> [f64; 3] {
    let w = model.weights_of_layer(0);
    let b = model.biases_of_layer(0);
    [w[0] - w[2], w[1] - w[3], b[0] - b[1]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_grid_dataset, gen_toy_2d};

    #[test]
    fn grid_run_produces_metrics_on_a_small_slice() {
        let g = GridSpec::new(3, 3).unwrap();
        let ds = gen_grid_dataset(&g, 40, 5).unwrap();
        let cfg = TrainConfig {
            semantic_weight: 0.5,
            max_epochs: 20,
            patience: 5,
            ..TrainConfig::default()
        };
        let result = run_grid(&g, &ds, &cfg).unwrap();
        assert!(result.test_metrics.coherent <= result.test_metrics.incoherent);
        assert!(!result.outcome.history.is_empty());
    }

    #[test]
    fn feature_width_mismatch_is_reported() {
        let g = GridSpec::new(4, 4).unwrap();
        let ds = gen_toy_2d(0, 2, 2);
        assert!(matches!(
            run_grid(&g, &ds, &TrainConfig::default()),
            Err(TaskError::FeatureWidth { expected: 40, got: 2 })
        ));
    }

    #[test]
    fn toy_run_reports_boundary_and_entropy() {
        let ds = gen_toy_2d(1, 4, 40);
        let cfg = TrainConfig {
            semantic_weight: 0.0,
            learning_rate: 0.1,
            max_epochs: 200,
            ..TrainConfig::default()
        };
        let result = run_toy(&ds, &cfg).unwrap();
        assert!(result.unlabeled_accuracy >= 0.0 && result.unlabeled_accuracy <= 100.0);
        assert!(result.mean_entropy >= 0.0);
        assert!(result.boundary.iter().any(|&c| c != 0.0));
    }
}
