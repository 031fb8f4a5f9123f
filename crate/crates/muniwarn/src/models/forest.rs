//! Random forest of class-weighted Gini trees.
//!
//! Each tree trains on a bootstrap resample (`n` draws with replacement)
//! whose multiplicities multiply the class weights, subsamples `⌊√d⌋`
//! candidate features afresh at every node, and stores weighted positive
//! frequencies in its leaves. The forest's score is the plain mean of leaf
//! frequencies, a probability in `[0, 1]`.
//!
//! Trees train in parallel, but every tree derives its own random stream
//! from the master seed and its index, so the result is identical to a
//! sequential build.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{Tree, TreeNode};
use super::{base_metadata, validate_training_input, ClassWeights};
use crate::features::FeatureMatrix;
use crate::seeding;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestHyperparameters {
    pub n_trees: usize,
    /// Maximum split levels; 0 degenerates every tree to its root leaf.
    pub max_depth: usize,
    /// Minimum bootstrap sample count (with multiplicity) a node needs to
    /// be considered for splitting.
    pub min_samples_split: usize,
}

impl Default for ForestHyperparameters {
    fn default() -> Self {
        ForestHyperparameters {
            n_trees: 100,
            max_depth: 7,
            min_samples_split: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub columns: Vec<String>,
    pub hyperparameters: ForestHyperparameters,
    pub trees: Vec<Tree>,
    pub metadata: BTreeMap<String, String>,
}

impl ForestModel {
    /// Mean leaf frequency across trees.
    pub fn probability(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.evaluate(row)).sum::<f64>() / self.trees.len() as f64
    }

    pub(crate) fn scores(&self, matrix: &FeatureMatrix) -> Vec<f64> {
        (0..matrix.n_rows())
            .map(|i| self.probability(matrix.row(i)))
            .collect()
    }
}

/// Fit a random forest.
pub fn train_random_forest(
    matrix: &FeatureMatrix,
    weights: &ClassWeights,
    hyperparameters: &ForestHyperparameters,
    seed: u64,
) -> Result<ForestModel> {
    validate_training_input(matrix)?;
    if hyperparameters.n_trees == 0 {
        return Err(Error::InvalidInput(
            "a forest needs at least one tree".into(),
        ));
    }
    let trees: Vec<Tree> = (0..hyperparameters.n_trees)
        .into_par_iter()
        .map(|index| {
            build_tree(
                matrix,
                weights,
                hyperparameters,
                seeding::derive(seed, "forest-tree", index as u64),
            )
        })
        .collect();

    let mut metadata = base_metadata(matrix, weights);
    metadata.insert("seed".into(), seed.to_string());
    Ok(ForestModel {
        columns: matrix.column_names().to_vec(),
        hyperparameters: hyperparameters.clone(),
        trees,
        metadata,
    })
}

/// One bootstrap row: index into the matrix, resample multiplicity, and the
/// product of multiplicity and class weight.
#[derive(Clone, Copy)]
struct BootstrapRow {
    row: usize,
    count: u32,
    weight: f64,
}

fn build_tree(
    matrix: &FeatureMatrix,
    weights: &ClassWeights,
    hyperparameters: &ForestHyperparameters,
    tree_seed: u64,
) -> Tree {
    let mut rng = seeding::stream(tree_seed, "draws", 0);
    let n = matrix.n_rows();
    let mut counts = vec![0u32; n];
    for _ in 0..n {
        counts[rng.gen_range(0..n)] += 1;
    }
    let samples: Vec<BootstrapRow> = counts
        .iter()
        .enumerate()
        .filter(|(_, &count)| count > 0)
        .map(|(row, &count)| BootstrapRow {
            row,
            count,
            weight: count as f64 * weights.weight(matrix.labels()[row]),
        })
        .collect();

    let mut nodes = Vec::new();
    grow(matrix, hyperparameters, &mut rng, &mut nodes, samples, 0);
    Tree { nodes }
}

/// Recursively grow the subtree for `samples`, returning its root index.
fn grow(
    matrix: &FeatureMatrix,
    hyperparameters: &ForestHyperparameters,
    rng: &mut rand_chacha::ChaCha8Rng,
    nodes: &mut Vec<TreeNode>,
    samples: Vec<BootstrapRow>,
    depth: usize,
) -> usize {
    let weight_positive: f64 = samples
        .iter()
        .filter(|s| matrix.labels()[s.row])
        .map(|s| s.weight)
        .sum();
    let weight_total: f64 = samples.iter().map(|s| s.weight).sum();
    let leaf_value = weight_positive / weight_total;

    let raw_count: u32 = samples.iter().map(|s| s.count).sum();
    let is_pure = weight_positive == 0.0 || weight_positive == weight_total;
    let splittable = depth < hyperparameters.max_depth
        && (raw_count as usize) >= hyperparameters.min_samples_split
        && !is_pure;

    let split = if splittable {
        best_gini_split(matrix, &samples, weight_positive, weight_total, rng)
    } else {
        None
    };
    let Some((feature, threshold)) = split else {
        nodes.push(TreeNode::Leaf { value: leaf_value });
        return nodes.len() - 1;
    };

    let (left, right): (Vec<BootstrapRow>, Vec<BootstrapRow>) = samples
        .into_iter()
        .partition(|s| matrix.value(s.row, feature) < threshold);
    let index = nodes.len();
    // Placeholder; child indices are known only after their subtrees exist.
    nodes.push(TreeNode::Leaf { value: leaf_value });
    let left_index = grow(matrix, hyperparameters, rng, nodes, left, depth + 1);
    let right_index = grow(matrix, hyperparameters, rng, nodes, right, depth + 1);
    nodes[index] = TreeNode::Split {
        feature,
        threshold,
        left: left_index,
        right: right_index,
    };
    index
}

/// The best weighted-Gini split over a fresh `⌊√d⌋` feature subsample, or
/// `None` when no candidate strictly reduces impurity.
fn best_gini_split(
    matrix: &FeatureMatrix,
    samples: &[BootstrapRow],
    weight_positive: f64,
    weight_total: f64,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Option<(usize, f64)> {
    let d = matrix.n_cols();
    let subsample_size = ((d as f64).sqrt().floor() as usize).max(1);
    // Partial Fisher-Yates, then ascending order so evaluation order (and
    // thus tie-breaking) does not depend on draw order.
    let mut pool: Vec<usize> = (0..d).collect();
    for k in 0..subsample_size {
        let j = rng.gen_range(k..d);
        pool.swap(k, j);
    }
    let mut features = pool[..subsample_size].to_vec();
    features.sort_unstable();

    let parent_score = weight_total * gini(weight_positive, weight_total);
    let mut best: Option<(f64, usize, f64)> = None;
    let mut column: Vec<(f64, f64, bool)> = Vec::with_capacity(samples.len());
    for &feature in &features {
        column.clear();
        column.extend(samples.iter().map(|s| {
            (
                matrix.value(s.row, feature),
                s.weight,
                matrix.labels()[s.row],
            )
        }));
        column.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

        let mut left_positive = 0.0f64;
        let mut left_total = 0.0f64;
        for window in 0..column.len() - 1 {
            let (value, weight, label) = column[window];
            left_total += weight;
            if label {
                left_positive += weight;
            }
            let next_value = column[window + 1].0;
            if next_value == value {
                continue;
            }
            let right_total = weight_total - left_total;
            let right_positive = weight_positive - left_positive;
            let children_score = left_total * gini(left_positive, left_total)
                + right_total * gini(right_positive, right_total);
            let gain = parent_score - children_score;
            if gain > 0.0 && best.map_or(true, |(g, _, _)| gain > g) {
                // Midpoint between the distinct neighbors.
                best = Some((gain, feature, 0.5 * (value + next_value)));
            }
        }
    }
    best.map(|(_, feature, threshold)| (feature, threshold))
}

fn gini(positive: f64, total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    let p = positive / total;
    let q = 1.0 - p;
    1.0 - p * p - q * q
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn separable_line(n_per_class: usize) -> FeatureMatrix {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n_per_class {
            rows.push(vec![-1.0 - i as f64 / n_per_class as f64]);
            labels.push(false);
            rows.push(vec![1.0 + i as f64 / n_per_class as f64]);
            labels.push(true);
        }
        FeatureMatrix::from_rows(vec!["x".into()], rows, labels).unwrap()
    }

    fn noisy_blobs(seed: u64, n: usize) -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let label = i % 2 == 0;
            let center = if label { 0.8 } else { -0.8 };
            rows.push(vec![
                center + rng.gen_range(-1.5..1.5),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ]);
            labels.push(label);
        }
        FeatureMatrix::from_rows(vec!["a".into(), "b".into(), "c".into()], rows, labels).unwrap()
    }

    #[test]
    fn zero_depth_forest_is_all_root_leaves() {
        let matrix = noisy_blobs(3, 30);
        let weights = ClassWeights::balanced(matrix.labels()).unwrap();
        let hp = ForestHyperparameters {
            n_trees: 20,
            max_depth: 0,
            min_samples_split: 2,
        };
        let model = train_random_forest(&matrix, &weights, &hp, 7).unwrap();
        for tree in &model.trees {
            assert_eq!(tree.nodes.len(), 1);
            match &tree.nodes[0] {
                TreeNode::Leaf { value } => assert!((0.0..=1.0).contains(value)),
                other => panic!("expected a leaf, got {other:?}"),
            }
        }
        // Every row receives the same pooled prior.
        let scores = model.scores(&matrix);
        assert!(scores.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn pure_nodes_stop_immediately_on_separable_data() {
        let matrix = separable_line(25);
        let weights = ClassWeights::balanced(matrix.labels()).unwrap();
        let hp = ForestHyperparameters {
            n_trees: 30,
            max_depth: 7,
            min_samples_split: 2,
        };
        let model = train_random_forest(&matrix, &weights, &hp, 11).unwrap();
        for tree in &model.trees {
            // One split at the class boundary, then two pure leaves.
            assert_eq!(tree.depth(), 1, "tree over-grew: {tree:?}");
            for node in &tree.nodes {
                if let TreeNode::Leaf { value } = node {
                    assert!(*value == 0.0 || *value == 1.0);
                }
            }
        }
        let scores = model.scores(&matrix);
        for (score, &label) in scores.iter().zip(matrix.labels()) {
            assert_eq!(*score >= 0.5, label);
        }
    }

    #[test]
    fn min_samples_split_caps_growth() {
        let matrix = noisy_blobs(5, 40);
        let weights = ClassWeights::balanced(matrix.labels()).unwrap();
        // A split threshold larger than the bootstrap size: nothing splits.
        let hp = ForestHyperparameters {
            n_trees: 5,
            max_depth: 7,
            min_samples_split: 41,
        };
        let model = train_random_forest(&matrix, &weights, &hp, 3).unwrap();
        assert!(model.trees.iter().all(|t| t.nodes.len() == 1));
    }

    #[test]
    fn same_seed_reproduces_the_forest_exactly() {
        let matrix = noisy_blobs(9, 60);
        let weights = ClassWeights::balanced(matrix.labels()).unwrap();
        let hp = ForestHyperparameters {
            n_trees: 12,
            max_depth: 4,
            min_samples_split: 2,
        };
        let a = train_random_forest(&matrix, &weights, &hp, 42).unwrap();
        let b = train_random_forest(&matrix, &weights, &hp, 42).unwrap();
        assert_eq!(a, b);
        let c = train_random_forest(&matrix, &weights, &hp, 43).unwrap();
        assert_ne!(a.trees, c.trees);
    }

    #[test]
    fn parallel_and_single_threaded_builds_agree() {
        let matrix = noisy_blobs(13, 50);
        let weights = ClassWeights::balanced(matrix.labels()).unwrap();
        let hp = ForestHyperparameters {
            n_trees: 16,
            max_depth: 5,
            min_samples_split: 2,
        };
        let parallel = train_random_forest(&matrix, &weights, &hp, 5).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let single = pool
            .install(|| train_random_forest(&matrix, &weights, &hp, 5))
            .unwrap();
        assert_eq!(parallel, single);
    }

    #[test]
    fn probabilities_stay_within_unit_interval() {
        let matrix = noisy_blobs(17, 80);
        let weights = ClassWeights::balanced(matrix.labels()).unwrap();
        let model =
            train_random_forest(&matrix, &weights, &ForestHyperparameters::default(), 1).unwrap();
        for score in model.scores(&matrix) {
            assert!((0.0..=1.0).contains(&score));
        }
    }

    #[test]
    fn empty_forest_is_rejected() {
        let matrix = noisy_blobs(1, 10);
        let weights = ClassWeights::balanced(matrix.labels()).unwrap();
        let hp = ForestHyperparameters {
            n_trees: 0,
            max_depth: 3,
            min_samples_split: 2,
        };
        assert!(train_random_forest(&matrix, &weights, &hp, 0).is_err());
    }
}
