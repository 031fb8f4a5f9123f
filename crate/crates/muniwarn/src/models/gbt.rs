//! Gradient-boosted trees for the weighted logistic loss.
//!
//! Boosting is stagewise and second-order: each round computes per-row
//! gradients `g_i = w_i (p_i - y_i)` and curvatures `h_i = w_i p_i (1-p_i)`
//! of the current log-odds `F_i`, fits a depth-limited regression tree that
//! maximizes the exact gain
//!
//! ```text
//! gain = ½ [ G_L²/(H_L+λ) + G_R²/(H_R+λ) − G²/(H+λ) ],   λ = 1
//! ```
//!
//! stores `−G/(H+λ)` in the leaves, and advances `F` by `learning_rate`
//! times the leaf values. The predicted probability is
//! `sigmoid(base_score + learning_rate · Σ_t tree_t(x))` with `base_score`
//! the log-odds of the weighted positive rate.
//!
//! There is no row or feature subsampling, so the procedure is fully
//! deterministic; the `seed` argument only flows into the model metadata
//! for provenance symmetry with the forest trainer.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::logistic::sigmoid;
use super::tree::{Tree, TreeNode};
use super::{base_metadata, validate_training_input, ClassWeights};
use crate::features::FeatureMatrix;
use crate::{Error, Result};

/// Fixed second-order regularization λ on leaf curvature.
const LAMBDA: f64 = 1.0;
const PROBABILITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtHyperparameters {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
}

impl Default for GbtHyperparameters {
    fn default() -> Self {
        GbtHyperparameters {
            n_estimators: 100,
            max_depth: 5,
            learning_rate: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbtModel {
    pub columns: Vec<String>,
    pub hyperparameters: GbtHyperparameters,
    pub base_score: f64,
    pub trees: Vec<Tree>,
    pub metadata: BTreeMap<String, String>,
}

impl GbtModel {
    /// Accumulated log-odds of one row.
    pub fn log_odds(&self, row: &[f64]) -> f64 {
        self.base_score
            + self.hyperparameters.learning_rate
                * self.trees.iter().map(|t| t.evaluate(row)).sum::<f64>()
    }

    pub(crate) fn scores(&self, matrix: &FeatureMatrix) -> Vec<f64> {
        (0..matrix.n_rows())
            .map(|i| sigmoid(self.log_odds(matrix.row(i))))
            .collect()
    }
}

/// Fit a boosted ensemble.
pub fn train_gbt(
    matrix: &FeatureMatrix,
    weights: &ClassWeights,
    hyperparameters: &GbtHyperparameters,
    seed: u64,
) -> Result<GbtModel> {
    validate_training_input(matrix)?;
    if !(hyperparameters.learning_rate.is_finite() && hyperparameters.learning_rate > 0.0) {
        return Err(Error::InvalidInput(format!(
            "learning rate must be positive and finite, got {}",
            hyperparameters.learning_rate
        )));
    }
    let n = matrix.n_rows();
    let sample_weights = weights.expand(matrix.labels());
    let targets: Vec<f64> = matrix
        .labels()
        .iter()
        .map(|&y| if y { 1.0 } else { 0.0 })
        .collect();

    let weight_total: f64 = sample_weights.iter().sum();
    let weighted_positive: f64 = sample_weights
        .iter()
        .zip(&targets)
        .map(|(w, y)| w * y)
        .sum();
    let rate = (weighted_positive / weight_total).clamp(PROBABILITY_FLOOR, 1.0 - PROBABILITY_FLOOR);
    let base_score = (rate / (1.0 - rate)).ln();

    let mut log_odds = vec![base_score; n];
    let mut gradients = vec![0.0f64; n];
    let mut curvatures = vec![0.0f64; n];
    let mut trees = Vec::with_capacity(hyperparameters.n_estimators);
    let all_rows: Vec<usize> = (0..n).collect();

    for _round in 0..hyperparameters.n_estimators {
        for i in 0..n {
            let p = sigmoid(log_odds[i]);
            gradients[i] = sample_weights[i] * (p - targets[i]);
            curvatures[i] = sample_weights[i] * p * (1.0 - p);
        }
        let mut nodes = Vec::new();
        grow(
            matrix,
            &gradients,
            &curvatures,
            hyperparameters.max_depth,
            &mut nodes,
            all_rows.clone(),
            0,
        );
        let tree = Tree { nodes };
        for i in 0..n {
            log_odds[i] += hyperparameters.learning_rate * tree.evaluate(matrix.row(i));
        }
        trees.push(tree);
    }

    let mut metadata = base_metadata(matrix, weights);
    metadata.insert("seed".into(), seed.to_string());
    Ok(GbtModel {
        columns: matrix.column_names().to_vec(),
        hyperparameters: hyperparameters.clone(),
        base_score,
        trees,
        metadata,
    })
}

/// Grow the gradient tree for `rows`, returning its root node index.
fn grow(
    matrix: &FeatureMatrix,
    gradients: &[f64],
    curvatures: &[f64],
    max_depth: usize,
    nodes: &mut Vec<TreeNode>,
    rows: Vec<usize>,
    depth: usize,
) -> usize {
    let gradient_sum: f64 = rows.iter().map(|&i| gradients[i]).sum();
    let curvature_sum: f64 = rows.iter().map(|&i| curvatures[i]).sum();
    let leaf_value = -gradient_sum / (curvature_sum + LAMBDA);

    let split = if depth < max_depth && rows.len() >= 2 {
        best_gain_split(
            matrix,
            gradients,
            curvatures,
            &rows,
            gradient_sum,
            curvature_sum,
        )
    } else {
        None
    };
    let Some((feature, threshold)) = split else {
        nodes.push(TreeNode::Leaf { value: leaf_value });
        return nodes.len() - 1;
    };

    let (left, right): (Vec<usize>, Vec<usize>) = rows
        .into_iter()
        .partition(|&i| matrix.value(i, feature) < threshold);
    let index = nodes.len();
    nodes.push(TreeNode::Leaf { value: leaf_value });
    let left_index = grow(
        matrix,
        gradients,
        curvatures,
        max_depth,
        nodes,
        left,
        depth + 1,
    );
    let right_index = grow(
        matrix,
        gradients,
        curvatures,
        max_depth,
        nodes,
        right,
        depth + 1,
    );
    nodes[index] = TreeNode::Split {
        feature,
        threshold,
        left: left_index,
        right: right_index,
    };
    index
}

/// The split maximizing the second-order gain, scanning every feature and
/// every boundary between distinct values; `None` when no gain is positive.
fn best_gain_split(
    matrix: &FeatureMatrix,
    gradients: &[f64],
    curvatures: &[f64],
    rows: &[usize],
    gradient_sum: f64,
    curvature_sum: f64,
) -> Option<(usize, f64)> {
    let parent_term = gradient_sum * gradient_sum / (curvature_sum + LAMBDA);
    let mut best: Option<(f64, usize, f64)> = None;
    let mut column: Vec<(f64, usize)> = Vec::with_capacity(rows.len());
    for feature in 0..matrix.n_cols() {
        column.clear();
        column.extend(rows.iter().map(|&i| (matrix.value(i, feature), i)));
        column.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

        let mut left_gradient = 0.0f64;
        let mut left_curvature = 0.0f64;
        for window in 0..column.len() - 1 {
            let (value, row) = column[window];
            left_gradient += gradients[row];
            left_curvature += curvatures[row];
            let next_value = column[window + 1].0;
            if next_value == value {
                continue;
            }
            let right_gradient = gradient_sum - left_gradient;
            let right_curvature = curvature_sum - left_curvature;
            let gain = 0.5
                * (left_gradient * left_gradient / (left_curvature + LAMBDA)
                    + right_gradient * right_gradient / (right_curvature + LAMBDA)
                    - parent_term);
            if gain > 0.0 && best.map_or(true, |(g, _, _)| gain > g) {
                best = Some((gain, feature, 0.5 * (value + next_value)));
            }
        }
    }
    best.map(|(_, feature, threshold)| (feature, threshold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn six_points() -> FeatureMatrix {
        FeatureMatrix::from_rows(
            vec!["x".into()],
            vec![
                vec![1.0],
                vec![2.0],
                vec![3.0],
                vec![7.0],
                vec![8.0],
                vec![9.0],
            ],
            vec![false, false, false, true, true, true],
        )
        .unwrap()
    }

    fn noisy(seed: u64, n: usize) -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                vec![
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                ]
            })
            .collect();
        let labels: Vec<bool> = rows
            .iter()
            .map(|r| r[0] + 0.5 * r[1] + rng.gen_range(-0.8..0.8) > 0.0)
            .collect();
        FeatureMatrix::from_rows(vec!["a".into(), "b".into(), "c".into()], rows, labels).unwrap()
    }

    #[test]
    fn single_stump_leaves_match_hand_computed_statistics() {
        // Balanced 6-point fixture: base log-odds 0, p = 1/2 everywhere,
        // so g = ±1/2 and h = 1/4 per row. The class boundary split gives
        // G = ±3/2 and H = 3/4 per side, hence leaves ∓(3/2)/(3/4 + 1).
        let matrix = six_points();
        let hp = GbtHyperparameters {
            n_estimators: 1,
            max_depth: 1,
            learning_rate: 0.5,
        };
        let model = train_gbt(&matrix, &ClassWeights::uniform(), &hp, 0).unwrap();
        assert_eq!(model.base_score, 0.0);
        assert_eq!(model.trees.len(), 1);
        let tree = &model.trees[0];
        match tree.nodes[0] {
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                assert_eq!(feature, 0);
                assert_eq!(threshold, 5.0);
                let expected = 1.5 / 1.75;
                match (&tree.nodes[left], &tree.nodes[right]) {
                    (TreeNode::Leaf { value: l }, TreeNode::Leaf { value: r }) => {
                        assert!((l + expected).abs() < 1e-12, "left leaf {l}");
                        assert!((r - expected).abs() < 1e-12, "right leaf {r}");
                    }
                    other => panic!("expected two leaves, got {other:?}"),
                }
            }
            ref other => panic!("expected a root split, got {other:?}"),
        }
    }

    #[test]
    fn zero_estimators_predict_the_weighted_base_rate() {
        let matrix = FeatureMatrix::from_rows(
            vec!["x".into()],
            vec![
                vec![0.0],
                vec![1.0],
                vec![2.0],
                vec![3.0],
                vec![4.0],
                vec![5.0],
            ],
            vec![true, true, false, false, false, false],
        )
        .unwrap();
        let hp = GbtHyperparameters {
            n_estimators: 0,
            max_depth: 3,
            learning_rate: 0.1,
        };
        let model = train_gbt(&matrix, &ClassWeights::uniform(), &hp, 0).unwrap();
        for score in model.scores(&matrix) {
            assert!((score - 1.0 / 3.0).abs() < 1e-12);
        }
        // Balanced weights recenter the base rate to one half.
        let weights = ClassWeights::balanced(matrix.labels()).unwrap();
        let model = train_gbt(&matrix, &weights, &hp, 0).unwrap();
        for score in model.scores(&matrix) {
            assert!((score - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn training_loss_never_increases_per_round() {
        let matrix = noisy(29, 60);
        let weights = ClassWeights::balanced(matrix.labels()).unwrap();
        let sample_weights = weights.expand(matrix.labels());
        let hp = GbtHyperparameters {
            n_estimators: 25,
            max_depth: 3,
            learning_rate: 0.1,
        };
        let model = train_gbt(&matrix, &weights, &hp, 0).unwrap();

        // Replay the ensemble prefix by prefix.
        let mut log_odds = vec![model.base_score; matrix.n_rows()];
        let loss = |f: &[f64]| -> f64 {
            f.iter()
                .zip(matrix.labels())
                .zip(&sample_weights)
                .map(|((&z, &y), w)| {
                    let target = if y { 1.0 } else { 0.0 };
                    w * (z.max(0.0) + (-z.abs()).exp().ln_1p() - target * z)
                })
                .sum()
        };
        let mut previous = loss(&log_odds);
        for tree in &model.trees {
            for (i, z) in log_odds.iter_mut().enumerate() {
                *z += hp.learning_rate * tree.evaluate(matrix.row(i));
            }
            let current = loss(&log_odds);
            assert!(
                current <= previous + 1e-9,
                "loss rose: {previous} -> {current}"
            );
            previous = current;
        }
    }

    #[test]
    fn one_extra_round_moves_log_odds_by_at_most_one_scaled_leaf() {
        let matrix = noisy(31, 50);
        let weights = ClassWeights::balanced(matrix.labels()).unwrap();
        let short = train_gbt(
            &matrix,
            &weights,
            &GbtHyperparameters {
                n_estimators: 8,
                max_depth: 3,
                learning_rate: 0.1,
            },
            0,
        )
        .unwrap();
        let long = train_gbt(
            &matrix,
            &weights,
            &GbtHyperparameters {
                n_estimators: 9,
                max_depth: 3,
                learning_rate: 0.1,
            },
            0,
        )
        .unwrap();
        // Determinism makes the first eight trees identical.
        assert_eq!(short.trees[..], long.trees[..8]);
        let last = &long.trees[8];
        let max_leaf = last
            .nodes
            .iter()
            .filter_map(|n| match n {
                TreeNode::Leaf { value } => Some(value.abs()),
                _ => None,
            })
            .fold(0.0f64, f64::max);
        for i in 0..matrix.n_rows() {
            let delta = (long.log_odds(matrix.row(i)) - short.log_odds(matrix.row(i))).abs();
            assert!(delta <= 0.1 * max_leaf + 1e-9, "row {i}: delta {delta}");
        }
    }

    #[test]
    fn tree_depths_respect_the_cap() {
        let matrix = noisy(37, 80);
        let weights = ClassWeights::balanced(matrix.labels()).unwrap();
        for max_depth in [1usize, 2, 4] {
            let hp = GbtHyperparameters {
                n_estimators: 10,
                max_depth,
                learning_rate: 0.2,
            };
            let model = train_gbt(&matrix, &weights, &hp, 0).unwrap();
            assert!(model.trees.iter().all(|t| t.depth() <= max_depth));
        }
    }

    #[test]
    fn boosting_fits_the_six_point_fixture() {
        let matrix = six_points();
        let weights = ClassWeights::balanced(matrix.labels()).unwrap();
        let hp = GbtHyperparameters {
            n_estimators: 50,
            max_depth: 2,
            learning_rate: 0.3,
        };
        let model = train_gbt(&matrix, &weights, &hp, 0).unwrap();
        let labels = crate::models::apply_threshold(&model.scores(&matrix), 0.5);
        assert_eq!(labels, matrix.labels());
    }

    #[test]
    fn training_is_deterministic_and_seed_independent() {
        let matrix = noisy(41, 40);
        let weights = ClassWeights::balanced(matrix.labels()).unwrap();
        let hp = GbtHyperparameters {
            n_estimators: 12,
            max_depth: 3,
            learning_rate: 0.1,
        };
        let a = train_gbt(&matrix, &weights, &hp, 1).unwrap();
        let b = train_gbt(&matrix, &weights, &hp, 2).unwrap();
        // Different seeds change only the recorded metadata.
        assert_eq!(a.trees, b.trees);
        assert_eq!(a.base_score, b.base_score);
        assert_ne!(a.metadata.get("seed"), b.metadata.get("seed"));
    }

    #[test]
    fn rejects_nonpositive_learning_rate() {
        let matrix = six_points();
        let weights = ClassWeights::balanced(matrix.labels()).unwrap();
        let hp = GbtHyperparameters {
            n_estimators: 5,
            max_depth: 2,
            learning_rate: 0.0,
        };
        assert!(train_gbt(&matrix, &weights, &hp, 0).is_err());
    }
}
