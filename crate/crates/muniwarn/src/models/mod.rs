//! Class-weighted model families behind one serializable interface.
//!
//! Four trainers are implemented from first principles — penalized logistic
//! regression, a sequential-minimal-optimization support-vector machine, a
//! random forest, and second-order gradient-boosted trees. All share:
//!
//! * per-class loss weights (see [`ClassWeights`]) to counteract the heavy
//!   class imbalance of distress labels;
//! * deterministic training — a pure function of (data, hyperparameters,
//!   seed) even when trees train on multiple threads;
//! * a common scoring surface: probabilities in `[0, 1]` for the
//!   probabilistic families, signed margins for the SVM, with matching
//!   default thresholds (0.5 and 0.0);
//! * a versioned JSON model format whose round-trip reproduces predictions
//!   bit-exactly.

mod linalg;

pub mod forest;
pub mod gbt;
pub mod logistic;
pub mod svm;
pub mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::features::FeatureMatrix;
use crate::{report, Error, Result};

pub use forest::{train_random_forest, ForestHyperparameters, ForestModel};
pub use gbt::{train_gbt, GbtHyperparameters, GbtModel};
pub use logistic::{
    train_logistic, CoefficientStandardErrors, LogisticHyperparameters, LogisticModel, Penalty,
};
pub use svm::{train_svm, SvmHyperparameters, SvmKernel, SvmModel, SvmSolution};
pub use tree::{Tree, TreeNode};

/// The serialized model layout this build writes and accepts.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// The four supported model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFamily {
    Logistic,
    Svm,
    Forest,
    Gbt,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 4] = [
        ModelFamily::Logistic,
        ModelFamily::Svm,
        ModelFamily::Forest,
        ModelFamily::Gbt,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ModelFamily::Logistic => "logistic",
            ModelFamily::Svm => "svm",
            ModelFamily::Forest => "forest",
            ModelFamily::Gbt => "gbt",
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "logistic" => Ok(ModelFamily::Logistic),
            "svm" => Ok(ModelFamily::Svm),
            "forest" | "random-forest" | "random_forest" => Ok(ModelFamily::Forest),
            "gbt" | "boosted" | "gradient-boosting" => Ok(ModelFamily::Gbt),
            other => Err(Error::InvalidInput(format!(
                "unknown model family `{other}` (expected logistic, svm, forest, or gbt)"
            ))),
        }
    }
}

/// Per-class loss multipliers, inversely proportional to class frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub negative: f64,
    pub positive: f64,
}

impl ClassWeights {
    /// Balanced inverse-frequency weights `w_c = n / (2 * n_c)`.
    ///
    /// The normalization keeps the weighted sample count at `n`, so loss
    /// magnitudes (and hence regularization strengths) stay comparable
    /// across prevalence levels.
    pub fn balanced(labels: &[bool]) -> Result<Self> {
        let n = labels.len();
        let positives = labels.iter().filter(|&&y| y).count();
        let negatives = n - positives;
        if positives == 0 || negatives == 0 {
            return Err(Error::InvalidInput(format!(
                "class weights need both classes; got {positives} positive of {n} rows"
            )));
        }
        Ok(ClassWeights {
            negative: n as f64 / (2.0 * negatives as f64),
            positive: n as f64 / (2.0 * positives as f64),
        })
    }

    /// Uniform weights, for unweighted training.
    pub fn uniform() -> Self {
        ClassWeights {
            negative: 1.0,
            positive: 1.0,
        }
    }

    pub fn weight(&self, label: bool) -> f64 {
        if label {
            self.positive
        } else {
            self.negative
        }
    }

    /// One weight per row.
    pub fn expand(&self, labels: &[bool]) -> Vec<f64> {
        labels.iter().map(|&y| self.weight(y)).collect()
    }
}

/// Hyperparameters for any family, tagged for reports and grid results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "settings", rename_all = "lowercase")]
pub enum Hyperparameters {
    Logistic(LogisticHyperparameters),
    Svm(SvmHyperparameters),
    Forest(ForestHyperparameters),
    Gbt(GbtHyperparameters),
}

impl Hyperparameters {
    pub fn family(&self) -> ModelFamily {
        match self {
            Hyperparameters::Logistic(_) => ModelFamily::Logistic,
            Hyperparameters::Svm(_) => ModelFamily::Svm,
            Hyperparameters::Forest(_) => ModelFamily::Forest,
            Hyperparameters::Gbt(_) => ModelFamily::Gbt,
        }
    }

    /// The configured default settings for a family.
    pub fn default_for(family: ModelFamily) -> Self {
        match family {
            ModelFamily::Logistic => Hyperparameters::Logistic(LogisticHyperparameters::default()),
            ModelFamily::Svm => Hyperparameters::Svm(SvmHyperparameters::default()),
            ModelFamily::Forest => Hyperparameters::Forest(ForestHyperparameters::default()),
            ModelFamily::Gbt => Hyperparameters::Gbt(GbtHyperparameters::default()),
        }
    }

    /// Compact single-line rendering for tables and logs.
    pub fn describe(&self) -> String {
        match self {
            Hyperparameters::Logistic(h) => format!("penalty={} C={}", h.penalty, h.c),
            Hyperparameters::Svm(h) => match h.kernel {
                SvmKernel::Linear => format!("kernel=linear C={}", h.c),
                SvmKernel::Rbf => format!("kernel=rbf C={} gamma={}", h.c, h.gamma),
            },
            Hyperparameters::Forest(h) => format!(
                "trees={} max_depth={} min_samples_split={}",
                h.n_trees, h.max_depth, h.min_samples_split
            ),
            Hyperparameters::Gbt(h) => format!(
                "estimators={} max_depth={} learning_rate={}",
                h.n_estimators, h.max_depth, h.learning_rate
            ),
        }
    }
}

/// A trained model of any family.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Logistic(LogisticModel),
    Svm(SvmModel),
    Forest(ForestModel),
    Gbt(GbtModel),
}

impl TrainedModel {
    pub fn family(&self) -> ModelFamily {
        match self {
            TrainedModel::Logistic(_) => ModelFamily::Logistic,
            TrainedModel::Svm(_) => ModelFamily::Svm,
            TrainedModel::Forest(_) => ModelFamily::Forest,
            TrainedModel::Gbt(_) => ModelFamily::Gbt,
        }
    }

    /// The feature columns the model was fitted on, in training order.
    pub fn columns(&self) -> &[String] {
        match self {
            TrainedModel::Logistic(m) => &m.columns,
            TrainedModel::Svm(m) => &m.columns,
            TrainedModel::Forest(m) => &m.columns,
            TrainedModel::Gbt(m) => &m.columns,
        }
    }

    pub fn hyperparameters(&self) -> Hyperparameters {
        match self {
            TrainedModel::Logistic(m) => Hyperparameters::Logistic(m.hyperparameters.clone()),
            TrainedModel::Svm(m) => Hyperparameters::Svm(m.hyperparameters.clone()),
            TrainedModel::Forest(m) => Hyperparameters::Forest(m.hyperparameters.clone()),
            TrainedModel::Gbt(m) => Hyperparameters::Gbt(m.hyperparameters.clone()),
        }
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        match self {
            TrainedModel::Logistic(m) => &m.metadata,
            TrainedModel::Svm(m) => &m.metadata,
            TrainedModel::Forest(m) => &m.metadata,
            TrainedModel::Gbt(m) => &m.metadata,
        }
    }

    /// Whether scores are probabilities (`[0, 1]`) rather than margins.
    pub fn is_probabilistic(&self) -> bool {
        !matches!(self, TrainedModel::Svm(_))
    }

    /// 0.5 for probabilistic scores, 0.0 for signed margins.
    pub fn default_threshold(&self) -> f64 {
        if self.is_probabilistic() {
            0.5
        } else {
            0.0
        }
    }

    /// Whether the solver hit its convergence tolerance (tree ensembles
    /// always converge by construction).
    pub fn converged(&self) -> bool {
        match self {
            TrainedModel::Logistic(m) => m.converged,
            TrainedModel::Svm(m) => m.converged,
            TrainedModel::Forest(_) | TrainedModel::Gbt(_) => true,
        }
    }

    /// One score per row: a probability for logistic/forest/gbt, a signed
    /// margin for the SVM. The matrix columns must match the training
    /// layout exactly.
    pub fn predict_scores(&self, matrix: &FeatureMatrix) -> Result<Vec<f64>> {
        check_columns(self.columns(), matrix)?;
        Ok(match self {
            TrainedModel::Logistic(m) => m.scores(matrix),
            TrainedModel::Svm(m) => m.scores(matrix),
            TrainedModel::Forest(m) => m.scores(matrix),
            TrainedModel::Gbt(m) => m.scores(matrix),
        })
    }

    /// Thresholded labels; a score exactly at the threshold is positive
    /// (in an early-warning setting, ties escalate).
    pub fn predict_labels(&self, matrix: &FeatureMatrix, threshold: f64) -> Result<Vec<bool>> {
        Ok(apply_threshold(&self.predict_scores(matrix)?, threshold))
    }

    /// Serialize as versioned pretty JSON.
    pub fn to_json(&self) -> Result<String> {
        let (hyperparameters, parameters) = match self {
            TrainedModel::Logistic(m) => (
                serde_json::to_value(&m.hyperparameters)?,
                serde_json::json!({
                    "coefficients": m.coefficients,
                    "intercept": m.intercept,
                    "converged": m.converged,
                }),
            ),
            TrainedModel::Svm(m) => (
                serde_json::to_value(&m.hyperparameters)?,
                serde_json::json!({
                    "solution": serde_json::to_value(&m.solution)?,
                    "converged": m.converged,
                }),
            ),
            TrainedModel::Forest(m) => (
                serde_json::to_value(&m.hyperparameters)?,
                serde_json::json!({ "trees": serde_json::to_value(&m.trees)? }),
            ),
            TrainedModel::Gbt(m) => (
                serde_json::to_value(&m.hyperparameters)?,
                serde_json::json!({
                    "base_score": m.base_score,
                    "trees": serde_json::to_value(&m.trees)?,
                }),
            ),
        };
        let envelope = ModelEnvelope {
            format_version: MODEL_FORMAT_VERSION,
            family: self.family(),
            columns: self.columns().to_vec(),
            hyperparameters,
            parameters,
            metadata: self.metadata().clone(),
        };
        report::to_json_pretty(&envelope)
    }

    /// Parse a model serialized by [`TrainedModel::to_json`].
    pub fn from_json(text: &str) -> Result<TrainedModel> {
        let envelope: ModelEnvelope = serde_json::from_str(text)
            .map_err(|e| Error::ModelFormat(format!("malformed model file: {e}")))?;
        if envelope.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported model format_version {} (this build reads {MODEL_FORMAT_VERSION})",
                envelope.format_version
            )));
        }
        let bad = |what: &str, e: serde_json::Error| {
            Error::ModelFormat(format!(
                "invalid {what} for family `{}`: {e}",
                envelope.family
            ))
        };
        let model = match envelope.family {
            ModelFamily::Logistic => {
                let hp: LogisticHyperparameters = serde_json::from_value(envelope.hyperparameters)
                    .map_err(|e| bad("hyperparameters", e))?;
                #[derive(Deserialize)]
                struct P {
                    coefficients: Vec<f64>,
                    intercept: f64,
                    converged: bool,
                }
                let p: P = serde_json::from_value(envelope.parameters)
                    .map_err(|e| bad("parameters", e))?;
                if p.coefficients.len() != envelope.columns.len() {
                    return Err(Error::ModelFormat(format!(
                        "{} coefficients for {} columns",
                        p.coefficients.len(),
                        envelope.columns.len()
                    )));
                }
                TrainedModel::Logistic(LogisticModel {
                    columns: envelope.columns,
                    hyperparameters: hp,
                    coefficients: p.coefficients,
                    intercept: p.intercept,
                    converged: p.converged,
                    metadata: envelope.metadata,
                })
            }
            ModelFamily::Svm => {
                let hp: SvmHyperparameters = serde_json::from_value(envelope.hyperparameters)
                    .map_err(|e| bad("hyperparameters", e))?;
                #[derive(Deserialize)]
                struct P {
                    solution: SvmSolution,
                    converged: bool,
                }
                let p: P = serde_json::from_value(envelope.parameters)
                    .map_err(|e| bad("parameters", e))?;
                TrainedModel::Svm(SvmModel {
                    columns: envelope.columns,
                    hyperparameters: hp,
                    solution: p.solution,
                    converged: p.converged,
                    metadata: envelope.metadata,
                })
            }
            ModelFamily::Forest => {
                let hp: ForestHyperparameters = serde_json::from_value(envelope.hyperparameters)
                    .map_err(|e| bad("hyperparameters", e))?;
                #[derive(Deserialize)]
                struct P {
                    trees: Vec<Tree>,
                }
                let p: P = serde_json::from_value(envelope.parameters)
                    .map_err(|e| bad("parameters", e))?;
                TrainedModel::Forest(ForestModel {
                    columns: envelope.columns,
                    hyperparameters: hp,
                    trees: p.trees,
                    metadata: envelope.metadata,
                })
            }
            ModelFamily::Gbt => {
                let hp: GbtHyperparameters = serde_json::from_value(envelope.hyperparameters)
                    .map_err(|e| bad("hyperparameters", e))?;
                #[derive(Deserialize)]
                struct P {
                    base_score: f64,
                    trees: Vec<Tree>,
                }
                let p: P = serde_json::from_value(envelope.parameters)
                    .map_err(|e| bad("parameters", e))?;
                TrainedModel::Gbt(GbtModel {
                    columns: envelope.columns,
                    hyperparameters: hp,
                    base_score: p.base_score,
                    trees: p.trees,
                    metadata: envelope.metadata,
                })
            }
        };
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        report::write_string_atomic(path, &self.to_json()?)
    }

    pub fn load(path: &Path) -> Result<TrainedModel> {
        TrainedModel::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelEnvelope {
    format_version: u32,
    family: ModelFamily,
    columns: Vec<String>,
    hyperparameters: serde_json::Value,
    parameters: serde_json::Value,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
}

/// Train a model of the family selected by `hyperparameters`.
///
/// The seed feeds the randomized families (bootstrap draws of the forest);
/// logistic and SVM training is deterministic and ignores it.
pub fn train(
    matrix: &FeatureMatrix,
    weights: &ClassWeights,
    hyperparameters: &Hyperparameters,
    seed: u64,
) -> Result<TrainedModel> {
    Ok(match hyperparameters {
        Hyperparameters::Logistic(hp) => {
            TrainedModel::Logistic(train_logistic(matrix, weights, hp)?)
        }
        Hyperparameters::Svm(hp) => TrainedModel::Svm(train_svm(matrix, weights, hp)?),
        Hyperparameters::Forest(hp) => {
            TrainedModel::Forest(train_random_forest(matrix, weights, hp, seed)?)
        }
        Hyperparameters::Gbt(hp) => TrainedModel::Gbt(train_gbt(matrix, weights, hp, seed)?),
    })
}

/// `score >= threshold` per row; ties go to the positive class.
pub fn apply_threshold(scores: &[f64], threshold: f64) -> Vec<bool> {
    scores.iter().map(|&s| s >= threshold).collect()
}

/// Require both classes and at least one row before training.
pub(crate) fn validate_training_input(matrix: &FeatureMatrix) -> Result<()> {
    if matrix.n_rows() == 0 {
        return Err(Error::EmptyDataset(
            "cannot train on an empty matrix".into(),
        ));
    }
    let positives = matrix.labels().iter().filter(|&&y| y).count();
    if positives == 0 || positives == matrix.n_rows() {
        return Err(Error::InvalidInput(format!(
            "training needs both classes; got {positives} positive of {} rows",
            matrix.n_rows()
        )));
    }
    Ok(())
}

/// Shared training metadata recorded in every serialized model.
pub(crate) fn base_metadata(
    matrix: &FeatureMatrix,
    weights: &ClassWeights,
) -> BTreeMap<String, String> {
    let positives = matrix.labels().iter().filter(|&&y| y).count();
    BTreeMap::from([
        ("training_rows".to_string(), matrix.n_rows().to_string()),
        ("positive_rows".to_string(), positives.to_string()),
        ("weight_negative".to_string(), weights.negative.to_string()),
        ("weight_positive".to_string(), weights.positive.to_string()),
    ])
}

/// Exact column-layout check shared by all predictors; the error names the
/// first missing column when there is one.
pub(crate) fn check_columns(expected: &[String], matrix: &FeatureMatrix) -> Result<()> {
    if matrix.column_names() == expected {
        return Ok(());
    }
    if let Some(missing) = expected.iter().find(|c| matrix.column_index(c).is_none()) {
        return Err(Error::InvalidInput(format!(
            "matrix is missing model column `{missing}`"
        )));
    }
    Err(Error::InvalidInput(
        "matrix columns do not match the model's training layout (same names, different order or extra columns)"
            .into(),
    ))
}
