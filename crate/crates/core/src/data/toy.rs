//! Two-cluster 2D toy set for the semi-supervised demonstration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DataRow, Dataset, Split};

const CLUSTER_MEANS: [[f64; 2]; 2] = [[-1.0, 0.0], [1.0, 0.5]];
const CLUSTER_VARIANCE: f64 = 0.4;
/// Labeled points are drawn from small off-center patches, one per class,
/// so that a classifier fit to the labels alone picks a poor boundary that
/// the unlabeled cluster structure can correct.
const LABELED_CENTERS: [[f64; 2]; 2] = [[-0.2, 1.0], [0.2, -0.5]];
const LABELED_SPREAD: f64 = 0.15;

/// Samples `n_labeled` visible-label points and `n_unlabeled` hidden-label
/// points. True class labels are recorded for every row (evaluation needs
/// them); the `labeled` mask controls what the trainer may see. All rows
/// are tagged as training data.
pub fn gen_toy_2d(seed: u64, n_labeled: usize, n_unlabeled: usize) -> Dataset {
    assert!(n_labeled >= 1 && n_unlabeled >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let provenance =
        format!("generator=toy2d seed={seed} labeled={n_labeled} unlabeled={n_unlabeled}");
    let mut ds = Dataset::new(2, 2, Some(provenance));
    let sigma = CLUSTER_VARIANCE.sqrt();
    for i in 0..n_labeled {
        let class = i % 2;
        let features = vec![
            LABELED_CENTERS[class][0] + LABELED_SPREAD * normal(&mut rng),
            LABELED_CENTERS[class][1] + LABELED_SPREAD * normal(&mut rng),
        ];
        ds.push(DataRow {
            features,
            labels: one_hot(class),
            split: Split::Train,
            labeled: true,
        });
    }
    for i in 0..n_unlabeled {
        let class = i % 2;
        let features = vec![
            CLUSTER_MEANS[class][0] + sigma * normal(&mut rng),
            CLUSTER_MEANS[class][1] + sigma * normal(&mut rng),
        ];
        ds.push(DataRow {
            features,
            labels: one_hot(class),
            split: Split::Train,
            labeled: false,
        });
    }
    ds
}

fn one_hot(class: usize) -> Vec<bool> {
    vec![class == 0, class == 1]
}

/// Standard normal via Box–Muller; two uniforms per draw keeps the stream
/// layout independent of any library distribution internals.
fn normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_mask_match_the_request() {
        let ds = gen_toy_2d(1, 4, 200);
        assert_eq!(ds.len(), 204);
        assert_eq!(ds.rows().iter().filter(|r| r.labeled).count(), 4);
        assert_eq!(ds.n_features(), 2);
        assert_eq!(ds.n_labels(), 2);
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(gen_toy_2d(3, 4, 50).to_csv(), gen_toy_2d(3, 4, 50).to_csv());
        assert_ne!(gen_toy_2d(3, 4, 50).to_csv(), gen_toy_2d(4, 4, 50).to_csv());
    }

    #[test]
    fn clusters_sit_near_their_means() {
        let ds = gen_toy_2d(7, 2, 400);
        let mut sums = [[0.0f64; 2]; 2];
        let mut counts = [0usize; 2];
        for row in ds.rows().iter().filter(|r| !r.labeled) {
            let class = usize::from(row.labels[1]);
            sums[class][0] += row.features[0];
            sums[class][1] += row.features[1];
            counts[class] += 1;
        }
        for class in 0..2 {
            let mean_x = sums[class][0] / counts[class] as f64;
            let mean_y = sums[class][1] / counts[class] as f64;
            assert!((mean_x - CLUSTER_MEANS[class][0]).abs() < 0.15, "class {class} x");
            assert!((mean_y - CLUSTER_MEANS[class][1]).abs() < 0.15, "class {class} y");
        }
    }

    #[test]
    fn csv_roundtrip_keeps_the_mask_column() {
        let ds = gen_toy_2d(2, 3, 5);
        let csv = ds.to_csv();
        assert!(csv.lines().nth(1).unwrap().ends_with("labeled"));
        let back = Dataset::from_csv(&csv).unwrap();
        assert_eq!(csv, back.to_csv());
        assert_eq!(back.rows().iter().filter(|r| !r.labeled).count(), 5);
    }
}
