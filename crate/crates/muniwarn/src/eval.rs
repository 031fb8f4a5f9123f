//! Splitting, cross-validation, classification metrics, ranking curves, and
//! grid search.
//!
//! Everything here is deterministic given a seed: stratified partitions
//! shuffle through named substreams, grid-search tasks derive one seed per
//! (candidate, fold) cell, and aggregation is keyed by candidate index rather
//! than completion order so parallel execution cannot reorder results.
//!
//! The metric conventions for a heavily imbalanced problem are pinned here
//! once: undefined `0/0` ratios collapse to 0 and raise a `degenerate` flag,
//! the ROC area is the trapezoidal rule (which equals the tie-corrected
//! rank statistic), and the precision–recall area is average precision with
//! stepwise (never linear) interpolation.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::Year;
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, Standardizer};
use crate::models::{
    apply_threshold, train, ClassWeights, ForestHyperparameters, GbtHyperparameters,
    Hyperparameters, LogisticHyperparameters, ModelFamily, Penalty, SvmHyperparameters, SvmKernel,
    TrainedModel,
};
use crate::seeding;

/// Number of points on the fixed averaging grid (x = 0, 0.01, ..., 1.00).
pub const CURVE_GRID_POINTS: usize = 101;

// ---------------------------------------------------------------------------
// Stratified partitions
// ---------------------------------------------------------------------------

/// Split row indices into (train, test) with per-class proportions preserved.
///
/// Each class is shuffled independently under the seed and cut so the train
/// side receives `round(train_fraction * class_count)` rows (half rounds up).
/// When rounding would leave a class absent from either side, the cut moves
/// by one so both sides keep at least one row of each class. Returned index
/// lists are sorted ascending.
pub fn stratified_split(
    labels: &[bool],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !train_fraction.is_finite() || train_fraction <= 0.0 || train_fraction >= 1.0 {
        return Err(Error::InvalidInput(format!(
            "train fraction must lie strictly between 0 and 1; got {train_fraction}"
        )));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, label) in [(0u64, false), (1u64, true)] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == label).collect();
        if members.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "stratified split needs at least 2 rows per class; the {} class has {}",
                class_name(label),
                members.len()
            )));
        }
        shuffle(
            &mut members,
            &mut seeding::stream(seed, "split-class", class),
        );
        let exact = members.len() as f64 * train_fraction;
        let rounded = (exact + 0.5).floor() as usize;
        let take = rounded.clamp(1, members.len() - 1);
        train.extend_from_slice(&members[..take]);
        test.extend_from_slice(&members[take..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Partition row indices into `k` disjoint folds with per-fold class counts
/// within one row of the exact per-class quota.
///
/// Each class is shuffled independently under the seed and dealt into the
/// folds as contiguous chunks; the first `class_count mod k` folds receive
/// the remainder rows. Fold index lists are sorted ascending.
pub fn stratified_kfold(labels: &[bool], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidInput(format!(
            "fold count must be at least 2; got {k}"
        )));
    }
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (class, label) in [(0u64, false), (1u64, true)] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == label).collect();
        if members.len() < k {
            return Err(Error::InvalidInput(format!(
                "every class needs at least k rows for {k}-fold validation; the {} class has {}",
                class_name(label),
                members.len()
            )));
        }
        shuffle(
            &mut members,
            &mut seeding::stream(seed, "fold-class", class),
        );
        let base = members.len() / k;
        let extras = members.len() % k;
        let mut cursor = 0;
        for (f, fold) in folds.iter_mut().enumerate() {
            let take = base + usize::from(f < extras);
            fold.extend_from_slice(&members[cursor..cursor + take]);
            cursor += take;
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(folds)
}

fn class_name(label: bool) -> &'static str {
    if label {
        "positive"
    } else {
        "negative"
    }
}

/// Fisher–Yates shuffle driven by the given stream.
fn shuffle(items: &mut [usize], rng: &mut impl rand::Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
}

/// Indices of `0..n` not present in `exclude` (which must be sorted).
fn complement(n: usize, exclude: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(n - exclude.len());
    let mut next = exclude.iter().copied().peekable();
    for i in 0..n {
        if next.peek() == Some(&i) {
            next.next();
        } else {
            out.push(i);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Confusion matrix and metrics
// ---------------------------------------------------------------------------

/// Prediction-versus-truth counts for the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub true_positives: u64,
    pub false_negatives: u64,
    pub false_positives: u64,
    pub true_negatives: u64,
}

impl ConfusionMatrix {
    pub fn new(
        true_positives: u64,
        false_negatives: u64,
        false_positives: u64,
        true_negatives: u64,
    ) -> Self {
        ConfusionMatrix {
            true_positives,
            false_negatives,
            false_positives,
            true_negatives,
        }
    }

    /// Count outcomes from parallel truth/prediction vectors.
    pub fn from_labels(y_true: &[bool], y_pred: &[bool]) -> Result<Self> {
        if y_true.len() != y_pred.len() {
            return Err(Error::InvalidInput(format!(
                "label vectors differ in length: {} truth rows vs {} predictions",
                y_true.len(),
                y_pred.len()
            )));
        }
        let mut cm = ConfusionMatrix::new(0, 0, 0, 0);
        for (&truth, &pred) in y_true.iter().zip(y_pred) {
            match (truth, pred) {
                (true, true) => cm.true_positives += 1,
                (true, false) => cm.false_negatives += 1,
                (false, true) => cm.false_positives += 1,
                (false, false) => cm.true_negatives += 1,
            }
        }
        Ok(cm)
    }

    pub fn total(&self) -> u64 {
        self.true_positives + self.false_negatives + self.false_positives + self.true_negatives
    }

    /// The same outcomes viewed with the negative class as the target.
    pub fn flipped(&self) -> ConfusionMatrix {
        ConfusionMatrix {
            true_positives: self.true_negatives,
            false_negatives: self.false_positives,
            false_positives: self.false_negatives,
            true_negatives: self.true_positives,
        }
    }
}

/// Precision, recall, and their harmonic mean for one class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Per-class and aggregate classification quality.
///
/// `macro_f1` is the unweighted mean of the two per-class F1 scores, so the
/// rare class counts as much as the common one. Any ratio whose numerator and
/// denominator are both zero is reported as 0 and sets `degenerate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub positive: ClassMetrics,
    pub negative: ClassMetrics,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub degenerate: bool,
}

/// Compute both classes' metrics from the positive-class confusion matrix.
pub fn metrics(cm: &ConfusionMatrix) -> ClassificationMetrics {
    let mut degenerate = false;
    let positive = class_metrics(cm, &mut degenerate);
    let negative = class_metrics(&cm.flipped(), &mut degenerate);
    let accuracy = ratio(
        (cm.true_positives + cm.true_negatives) as f64,
        cm.total() as f64,
        &mut degenerate,
    );
    ClassificationMetrics {
        positive,
        negative,
        macro_f1: (positive.f1 + negative.f1) / 2.0,
        accuracy,
        degenerate,
    }
}

fn class_metrics(cm: &ConfusionMatrix, degenerate: &mut bool) -> ClassMetrics {
    let tp = cm.true_positives as f64;
    let precision = ratio(tp, tp + cm.false_positives as f64, degenerate);
    let recall = ratio(tp, tp + cm.false_negatives as f64, degenerate);
    let f1 = ratio(2.0 * precision * recall, precision + recall, degenerate);
    ClassMetrics {
        precision,
        recall,
        f1,
    }
}

fn ratio(numerator: f64, denominator: f64, degenerate: &mut bool) -> f64 {
    if denominator == 0.0 {
        *degenerate = true;
        0.0
    } else {
        numerator / denominator
    }
}

// ---------------------------------------------------------------------------
// Ranking curves
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    Roc,
    Pr,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub y: f64,
}

/// An ROC or precision–recall curve with its area.
///
/// ROC points are (false positive rate, true positive rate) and the area is
/// the trapezoidal rule. Precision–recall points are (recall, precision), the
/// area is average precision, and `baseline` carries the positive prevalence
/// a no-skill classifier would score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub kind: CurveKind,
    pub points: Vec<CurvePoint>,
    pub auc: f64,
    pub baseline: Option<f64>,
}

/// Cumulative (true positive, false positive) counts after each distinct
/// score threshold, swept from the highest score downward with equal scores
/// grouped into one step.
fn threshold_sweep(y_true: &[bool], scores: &[f64]) -> Result<Vec<(u64, u64)>> {
    if y_true.len() != scores.len() {
        return Err(Error::InvalidInput(format!(
            "label and score vectors differ in length: {} vs {}",
            y_true.len(),
            scores.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidInput("scores must be finite".into()));
    }
    let positives = y_true.iter().filter(|&&y| y).count();
    if positives == 0 || positives == y_true.len() {
        return Err(Error::InvalidInput(
            "ranking curves need both classes present in the truth labels".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("finite scores compare")
            .then(a.cmp(&b))
    });
    let mut steps = Vec::new();
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut i = 0;
    while i < order.len() {
        let score = scores[order[i]];
        while i < order.len() && scores[order[i]] == score {
            if y_true[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        steps.push((tp, fp));
    }
    Ok(steps)
}

/// Receiver operating characteristic: true positive rate against false
/// positive rate over all distinct score thresholds, descending.
///
/// The curve starts at (0, 0), ends at (1, 1), and its trapezoidal area
/// equals the tie-corrected probability that a random positive outscores a
/// random negative.
pub fn roc_curve(y_true: &[bool], scores: &[f64]) -> Result<Curve> {
    let steps = threshold_sweep(y_true, scores)?;
    let n_pos = y_true.iter().filter(|&&y| y).count() as f64;
    let n_neg = y_true.len() as f64 - n_pos;
    let mut points = vec![CurvePoint { x: 0.0, y: 0.0 }];
    points.extend(steps.iter().map(|&(tp, fp)| CurvePoint {
        x: fp as f64 / n_neg,
        y: tp as f64 / n_pos,
    }));
    let mut auc = 0.0;
    for pair in points.windows(2) {
        auc += (pair[1].x - pair[0].x) * (pair[0].y + pair[1].y) / 2.0;
    }
    Ok(Curve {
        kind: CurveKind::Roc,
        points,
        auc,
        baseline: None,
    })
}

/// Precision against recall over all distinct score thresholds, descending.
///
/// The area is average precision: the sum of each step's precision weighted
/// by its recall increment, with no interpolation between steps. `baseline`
/// is the positive prevalence.
pub fn pr_curve(y_true: &[bool], scores: &[f64]) -> Result<Curve> {
    let steps = threshold_sweep(y_true, scores)?;
    let n_pos = y_true.iter().filter(|&&y| y).count() as f64;
    let mut points = Vec::with_capacity(steps.len());
    let mut auc = 0.0;
    let mut previous_recall = 0.0;
    for &(tp, fp) in &steps {
        let recall = tp as f64 / n_pos;
        let precision = tp as f64 / (tp + fp) as f64;
        auc += (recall - previous_recall) * precision;
        previous_recall = recall;
        points.push(CurvePoint {
            x: recall,
            y: precision,
        });
    }
    Ok(Curve {
        kind: CurveKind::Pr,
        points,
        auc,
        baseline: Some(n_pos / y_true.len() as f64),
    })
}

/// One grid point of an averaged curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AveragedPoint {
    pub x: f64,
    pub mean: f64,
    pub std: f64,
}

/// Pointwise mean and dispersion of several same-kind curves on the fixed
/// 101-point grid x = 0, 0.01, ..., 1.00.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedCurve {
    pub kind: CurveKind,
    pub points: Vec<AveragedPoint>,
    pub mean_auc: f64,
    pub std_auc: f64,
}

/// Average two or more curves of the same kind vertically on the fixed grid.
///
/// ROC curves are linearly interpolated in x (vertical segments collapse to
/// their upper envelope); precision–recall curves are evaluated stepwise from
/// the right, taking the precision of the first sweep point whose recall
/// reaches the grid value. The dispersion is the population standard
/// deviation at each grid point.
pub fn average_curves(curves: &[Curve]) -> Result<AveragedCurve> {
    if curves.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "curve averaging needs at least 2 curves; got {}",
            curves.len()
        )));
    }
    let kind = curves[0].kind;
    if curves.iter().any(|c| c.kind != kind) {
        return Err(Error::InvalidInput(
            "cannot average curves of mixed kinds".into(),
        ));
    }
    let grid: Vec<f64> = (0..CURVE_GRID_POINTS).map(|i| i as f64 / 100.0).collect();
    let per_curve: Vec<Vec<f64>> = curves
        .iter()
        .map(|curve| match kind {
            CurveKind::Roc => {
                let envelope = upper_envelope(&curve.points);
                grid.iter().map(|&x| interpolate(&envelope, x)).collect()
            }
            CurveKind::Pr => grid
                .iter()
                .map(|&r| step_from_right(&curve.points, r))
                .collect(),
        })
        .collect();
    let k = curves.len() as f64;
    let points = grid
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let mean = per_curve.iter().map(|ys| ys[i]).sum::<f64>() / k;
            let variance = per_curve
                .iter()
                .map(|ys| (ys[i] - mean).powi(2))
                .sum::<f64>()
                / k;
            AveragedPoint {
                x,
                mean,
                std: variance.sqrt(),
            }
        })
        .collect();
    let mean_auc = curves.iter().map(|c| c.auc).sum::<f64>() / k;
    let auc_variance = curves
        .iter()
        .map(|c| (c.auc - mean_auc).powi(2))
        .sum::<f64>()
        / k;
    Ok(AveragedCurve {
        kind,
        points,
        mean_auc,
        std_auc: auc_variance.sqrt(),
    })
}

/// Collapse duplicate x values to their maximum y, preserving order.
fn upper_envelope(points: &[CurvePoint]) -> Vec<CurvePoint> {
    let mut out: Vec<CurvePoint> = Vec::with_capacity(points.len());
    for &p in points {
        match out.last_mut() {
            Some(last) if last.x == p.x => last.y = last.y.max(p.y),
            _ => out.push(p),
        }
    }
    out
}

/// Piecewise-linear evaluation of an x-sorted polyline at `x`.
fn interpolate(points: &[CurvePoint], x: f64) -> f64 {
    match points.iter().position(|p| p.x >= x) {
        Some(0) => points[0].y,
        Some(i) => {
            let (lo, hi) = (points[i - 1], points[i]);
            lo.y + (hi.y - lo.y) * (x - lo.x) / (hi.x - lo.x)
        }
        None => points.last().expect("curves have points").y,
    }
}

/// Precision of the first sweep point whose recall reaches `r`.
fn step_from_right(points: &[CurvePoint], r: f64) -> f64 {
    points
        .iter()
        .find(|p| p.x >= r)
        .unwrap_or_else(|| points.last().expect("curves have points"))
        .y
}

/// Render a curve as a `x,y,std` table (std is 0 for a single curve).
pub fn curve_table(curve: &Curve) -> String {
    let mut out = String::from("x,y,std\n");
    for p in &curve.points {
        out.push_str(&format!("{},{},0\n", p.x, p.y));
    }
    out
}

/// Render an averaged curve as a `x,y,std` table.
pub fn averaged_curve_table(curve: &AveragedCurve) -> String {
    let mut out = String::from("x,y,std\n");
    for p in &curve.points {
        out.push_str(&format!("{},{},{}\n", p.x, p.mean, p.std));
    }
    out
}

// ---------------------------------------------------------------------------
// Hyperparameter grids
// ---------------------------------------------------------------------------

/// Declared hyperparameter value lists for one model family.
///
/// Expansion walks the full Cartesian product with the first list as the
/// outermost loop, preserving the declared value order. The linear kernel
/// ignores gamma, so candidates differing only in gamma collapse to one
/// (recorded with the first declared gamma value).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "values", rename_all = "lowercase")]
pub enum GridSpec {
    Logistic {
        penalty: Vec<Penalty>,
        c: Vec<f64>,
    },
    Svm {
        kernel: Vec<SvmKernel>,
        c: Vec<f64>,
        gamma: Vec<f64>,
    },
    Forest {
        n_trees: Vec<usize>,
        max_depth: Vec<usize>,
        min_samples_split: Vec<usize>,
    },
    Gbt {
        max_depth: Vec<usize>,
        learning_rate: Vec<f64>,
        n_estimators: Vec<usize>,
    },
}

impl GridSpec {
    pub fn family(&self) -> ModelFamily {
        match self {
            GridSpec::Logistic { .. } => ModelFamily::Logistic,
            GridSpec::Svm { .. } => ModelFamily::Svm,
            GridSpec::Forest { .. } => ModelFamily::Forest,
            GridSpec::Gbt { .. } => ModelFamily::Gbt,
        }
    }

    /// The default search space for each family.
    pub fn default_for(family: ModelFamily) -> GridSpec {
        match family {
            ModelFamily::Logistic => GridSpec::Logistic {
                penalty: vec![Penalty::L1, Penalty::L2],
                c: vec![0.1, 0.5, 1.0, 5.0, 10.0],
            },
            ModelFamily::Svm => GridSpec::Svm {
                kernel: vec![SvmKernel::Linear, SvmKernel::Rbf],
                c: vec![0.1, 0.5, 1.0, 5.0, 10.0],
                gamma: vec![0.001, 0.01, 0.1],
            },
            ModelFamily::Forest => GridSpec::Forest {
                n_trees: vec![100, 200, 300, 400],
                max_depth: vec![3, 5, 7],
                min_samples_split: vec![2, 5, 10],
            },
            ModelFamily::Gbt => GridSpec::Gbt {
                max_depth: vec![3, 5, 7],
                learning_rate: vec![0.1, 0.01, 0.001],
                n_estimators: vec![100, 200, 300, 400],
            },
        }
    }

    /// Expand to the ordered candidate list.
    pub fn expand(&self) -> Result<Vec<Hyperparameters>> {
        let mut out = Vec::new();
        match self {
            GridSpec::Logistic { penalty, c } => {
                require_values("penalty", penalty.len())?;
                require_values("c", c.len())?;
                for &p in penalty {
                    for &c in c {
                        out.push(Hyperparameters::Logistic(LogisticHyperparameters {
                            penalty: p,
                            c,
                        }));
                    }
                }
            }
            GridSpec::Svm { kernel, c, gamma } => {
                require_values("kernel", kernel.len())?;
                require_values("c", c.len())?;
                require_values("gamma", gamma.len())?;
                for &k in kernel {
                    for &c in c {
                        match k {
                            SvmKernel::Linear => {
                                out.push(Hyperparameters::Svm(SvmHyperparameters {
                                    kernel: k,
                                    c,
                                    gamma: gamma[0],
                                }));
                            }
                            SvmKernel::Rbf => {
                                for &g in gamma {
                                    out.push(Hyperparameters::Svm(SvmHyperparameters {
                                        kernel: k,
                                        c,
                                        gamma: g,
                                    }));
                                }
                            }
                        }
                    }
                }
            }
            GridSpec::Forest {
                n_trees,
                max_depth,
                min_samples_split,
            } => {
                require_values("n_trees", n_trees.len())?;
                require_values("max_depth", max_depth.len())?;
                require_values("min_samples_split", min_samples_split.len())?;
                for &t in n_trees {
                    for &d in max_depth {
                        for &m in min_samples_split {
                            out.push(Hyperparameters::Forest(ForestHyperparameters {
                                n_trees: t,
                                max_depth: d,
                                min_samples_split: m,
                            }));
                        }
                    }
                }
            }
            GridSpec::Gbt {
                max_depth,
                learning_rate,
                n_estimators,
            } => {
                require_values("max_depth", max_depth.len())?;
                require_values("learning_rate", learning_rate.len())?;
                require_values("n_estimators", n_estimators.len())?;
                for &d in max_depth {
                    for &lr in learning_rate {
                        for &n in n_estimators {
                            out.push(Hyperparameters::Gbt(GbtHyperparameters {
                                n_estimators: n,
                                max_depth: d,
                                learning_rate: lr,
                            }));
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

fn require_values(list: &str, len: usize) -> Result<()> {
    if len == 0 {
        Err(Error::InvalidInput(format!(
            "grid value list '{list}' is empty"
        )))
    } else {
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Grid search
// ---------------------------------------------------------------------------

/// One evaluated hyperparameter combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCandidate {
    pub index: usize,
    pub hyperparameters: Hyperparameters,
    pub fold_macro_f1: Vec<f64>,
    pub mean_macro_f1: f64,
}

/// Outcome of a cross-validated grid search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub candidates: Vec<GridCandidate>,
    /// Index of the candidate with the highest mean macro F1; ties resolve
    /// to the earliest candidate in declared grid order.
    pub best_index: usize,
    pub folds: usize,
    pub seed: u64,
    /// One fingerprint per fold of the standardizer fitted on that fold's
    /// training portion; differing values show the refit happened per fold.
    pub fold_fingerprints: Vec<u64>,
}

impl GridSearchResult {
    pub fn best(&self) -> &GridCandidate {
        &self.candidates[self.best_index]
    }

    /// Candidate table as delimiter-separated text, one row per candidate.
    pub fn table(&self) -> String {
        let mut out = String::from("candidate,settings,mean_macro_f1");
        for f in 1..=self.folds {
            out.push_str(&format!(",fold_{f}"));
        }
        out.push('\n');
        for candidate in &self.candidates {
            out.push_str(&format!(
                "{},{},{}",
                candidate.index,
                candidate.hyperparameters.describe(),
                candidate.mean_macro_f1
            ));
            for f1 in &candidate.fold_macro_f1 {
                out.push_str(&format!(",{f1}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Evaluate every candidate of `grid` by stratified k-fold cross-validation.
///
/// For each (candidate, fold) cell the standardizer and class weights are
/// fitted on the training folds only, the model is trained with a seed
/// derived from the cell index, and the held-out fold is scored at the
/// family's default threshold. Candidates are ranked by mean macro F1 across
/// folds. Cells run in parallel; results are keyed by cell index, so the
/// outcome is independent of scheduling.
pub fn grid_search(
    matrix: &FeatureMatrix,
    standardize: &[String],
    grid: &GridSpec,
    k: usize,
    seed: u64,
) -> Result<GridSearchResult> {
    let candidates = grid.expand()?;
    let folds = stratified_kfold(matrix.labels(), k, seed)?;
    let splits: Vec<(Vec<usize>, &Vec<usize>)> = folds
        .iter()
        .map(|fold| (complement(matrix.n_rows(), fold), fold))
        .collect();

    let cells: Vec<(usize, f64, u64)> = (0..candidates.len() * k)
        .into_par_iter()
        .map(|cell| -> Result<(usize, f64, u64)> {
            let candidate = cell / k;
            let fold = cell % k;
            let (train_idx, test_idx) = &splits[fold];
            let train_raw = matrix.subset(train_idx);
            let test_raw = matrix.subset(test_idx);
            let standardizer = Standardizer::fit(&train_raw, standardize)?;
            let train_matrix = standardizer.apply(&train_raw)?;
            let test_matrix = standardizer.apply(&test_raw)?;
            let weights = ClassWeights::balanced(train_matrix.labels())?;
            let model = train(
                &train_matrix,
                &weights,
                &candidates[candidate],
                seeding::derive(seed, "grid-train", cell as u64),
            )?;
            let scores = model.predict_scores(&test_matrix)?;
            let predicted = apply_threshold(&scores, model.default_threshold());
            let cm = ConfusionMatrix::from_labels(test_matrix.labels(), &predicted)?;
            Ok((cell, metrics(&cm).macro_f1, standardizer.fingerprint()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut fold_scores = vec![vec![0.0; k]; candidates.len()];
    let mut fold_fingerprints = vec![0u64; k];
    for (cell, f1, fingerprint) in cells {
        let candidate = cell / k;
        let fold = cell % k;
        fold_scores[candidate][fold] = f1;
        if candidate == 0 {
            fold_fingerprints[fold] = fingerprint;
        }
    }

    let candidates: Vec<GridCandidate> = candidates
        .into_iter()
        .zip(fold_scores)
        .enumerate()
        .map(|(index, (hyperparameters, fold_macro_f1))| {
            let mean_macro_f1 = fold_macro_f1.iter().sum::<f64>() / k as f64;
            GridCandidate {
                index,
                hyperparameters,
                fold_macro_f1,
                mean_macro_f1,
            }
        })
        .collect();
    let mut best_index = 0;
    for (i, candidate) in candidates.iter().enumerate().skip(1) {
        if candidate.mean_macro_f1 > candidates[best_index].mean_macro_f1 {
            best_index = i;
        }
    }

    Ok(GridSearchResult {
        candidates,
        best_index,
        folds: k,
        seed,
        fold_fingerprints,
    })
}

// ---------------------------------------------------------------------------
// Final fit and evaluation report
// ---------------------------------------------------------------------------

/// One scored test row in an evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub municipality_id: String,
    pub year: Year,
    pub label: bool,
    pub score: f64,
    pub predicted: bool,
}

/// Everything produced by a final fit: the test-set confusion matrix and
/// metrics, both ranking curves, per-row predictions, and the trained model
/// in its portable serialized form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub family: ModelFamily,
    pub hyperparameters: Hyperparameters,
    pub threshold: f64,
    pub train_rows: usize,
    pub test_rows: usize,
    pub confusion: ConfusionMatrix,
    pub metrics: ClassificationMetrics,
    pub roc: Curve,
    pub pr: Curve,
    pub predictions: Vec<PredictionRow>,
    pub model: serde_json::Value,
}

impl EvaluationReport {
    /// Reconstruct the embedded trained model.
    pub fn load_model(&self) -> Result<TrainedModel> {
        TrainedModel::from_json(&self.model.to_string())
    }
}

/// Refit on the full training set and evaluate once on the held-out test set.
///
/// The standardizer and class weights are fitted on the training matrix only
/// and applied to both sides. `threshold` defaults to the family's own
/// (0.5 for probabilistic models, 0 for margin scores). The two matrices
/// must not share any (municipality, year) row.
pub fn final_fit_and_test(
    train_matrix: &FeatureMatrix,
    test_matrix: &FeatureMatrix,
    standardize: &[String],
    hyperparameters: &Hyperparameters,
    threshold: Option<f64>,
    seed: u64,
) -> Result<EvaluationReport> {
    let train_keys: HashSet<_> = train_matrix.row_keys().iter().collect();
    if let Some((id, year)) = test_matrix
        .row_keys()
        .iter()
        .find(|key| train_keys.contains(key))
    {
        return Err(Error::InvalidInput(format!(
            "train and test sets overlap: municipality {id} year {year} appears in both"
        )));
    }
    drop(train_keys);

    let standardizer = Standardizer::fit(train_matrix, standardize)?;
    let train_std = standardizer.apply(train_matrix)?;
    let test_std = standardizer.apply(test_matrix)?;
    let weights = ClassWeights::balanced(train_std.labels())?;
    let model = train(
        &train_std,
        &weights,
        hyperparameters,
        seeding::derive(seed, "final-train", 0),
    )?;
    let threshold = threshold.unwrap_or_else(|| model.default_threshold());

    let scores = model.predict_scores(&test_std)?;
    let predicted = apply_threshold(&scores, threshold);
    let labels = test_std.labels();
    let confusion = ConfusionMatrix::from_labels(labels, &predicted)?;
    let roc = roc_curve(labels, &scores)?;
    let pr = pr_curve(labels, &scores)?;
    let predictions = test_std
        .row_keys()
        .iter()
        .zip(labels)
        .zip(scores.iter().zip(&predicted))
        .map(|(((id, year), &label), (&score, &pred))| PredictionRow {
            municipality_id: id.clone(),
            year: *year,
            label,
            score,
            predicted: pred,
        })
        .collect();

    Ok(EvaluationReport {
        family: hyperparameters.family(),
        hyperparameters: hyperparameters.clone(),
        threshold,
        train_rows: train_std.n_rows(),
        test_rows: test_std.n_rows(),
        confusion,
        metrics: metrics(&confusion),
        roc,
        pr,
        predictions,
        model: serde_json::from_str(&model.to_json()?)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    /// Probability that a random positive outscores a random negative,
    /// counting score ties as half, by direct pair enumeration.
    fn pair_count_auc(y_true: &[bool], scores: &[f64]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for i in 0..y_true.len() {
            if !y_true[i] {
                continue;
            }
            for j in 0..y_true.len() {
                if y_true[j] {
                    continue;
                }
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
        wins / pairs
    }

    /// Average precision by re-counting the confusion at every distinct
    /// threshold from scratch.
    fn enumerated_average_precision(y_true: &[bool], scores: &[f64]) -> f64 {
        let mut thresholds = scores.to_vec();
        thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
        thresholds.dedup();
        let n_pos = y_true.iter().filter(|&&y| y).count() as f64;
        let mut ap = 0.0;
        let mut previous_recall = 0.0;
        for t in thresholds {
            let tp = y_true
                .iter()
                .zip(scores)
                .filter(|&(&y, &s)| y && s >= t)
                .count() as f64;
            let fp = y_true
                .iter()
                .zip(scores)
                .filter(|&(&y, &s)| !y && s >= t)
                .count() as f64;
            let recall = tp / n_pos;
            ap += (recall - previous_recall) * (tp / (tp + fp));
            previous_recall = recall;
        }
        ap
    }

    /// Random scores quantized onto a coarse lattice so ties occur.
    fn tied_instance(n: usize, seed: u64) -> (Vec<bool>, Vec<f64>) {
        let mut rng = seeding::stream(seed, "eval-test-instance", 0);
        loop {
            let labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.3)).collect();
            let positives = labels.iter().filter(|&&y| y).count();
            if positives == 0 || positives == n {
                continue;
            }
            let scores: Vec<f64> = (0..n)
                .map(|_| (rng.gen_range(-10i32..=10) as f64) / 4.0)
                .collect();
            return (labels, scores);
        }
    }

    /// Two-cluster matrix with distinct row keys and every third row
    /// positive, suitable for training.
    fn blobs(n: usize, separation: f64, seed: u64, prefix: &str) -> FeatureMatrix {
        let mut rng = seeding::stream(seed, "eval-test-blobs", 0);
        let mut keys = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        let mut data = Vec::with_capacity(n * 2);
        for i in 0..n {
            let label = i % 3 == 0;
            let center = if label { separation } else { -separation };
            keys.push((format!("{prefix}-{i:04}"), Year(2016)));
            labels.push(label);
            data.push(center + rng.gen_range(-1.0..1.0));
            data.push(center + rng.gen_range(-1.0..1.0));
        }
        FeatureMatrix::new(vec!["x1".into(), "x2".into()], keys, labels, data).unwrap()
    }

    fn class_counts(labels: &[bool], indices: &[usize]) -> (usize, usize) {
        let pos = indices.iter().filter(|&&i| labels[i]).count();
        (pos, indices.len() - pos)
    }

    #[test]
    fn split_preserves_class_proportions() {
        let labels: Vec<bool> = (0..100).map(|i| i < 10).collect();
        let (train, test) = stratified_split(&labels, 0.8, 7).unwrap();
        assert_eq!(class_counts(&labels, &train), (8, 72));
        assert_eq!(class_counts(&labels, &test), (2, 18));
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn split_is_deterministic_and_seed_sensitive() {
        let labels: Vec<bool> = (0..60).map(|i| i % 6 == 0).collect();
        let a = stratified_split(&labels, 0.8, 11).unwrap();
        let b = stratified_split(&labels, 0.8, 11).unwrap();
        let c = stratified_split(&labels, 0.8, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn split_keeps_both_classes_on_both_sides() {
        let labels: Vec<bool> = (0..100).map(|i| i < 2).collect();
        let (train, test) = stratified_split(&labels, 0.9, 3).unwrap();
        assert_eq!(class_counts(&labels, &train).0, 1);
        assert_eq!(class_counts(&labels, &test).0, 1);
    }

    #[test]
    fn split_rejects_bad_inputs() {
        let labels: Vec<bool> = (0..10).map(|i| i == 0).collect();
        assert!(stratified_split(&labels, 0.8, 0).is_err());
        let balanced: Vec<bool> = (0..10).map(|i| i < 5).collect();
        assert!(stratified_split(&balanced, 0.0, 0).is_err());
        assert!(stratified_split(&balanced, 1.0, 0).is_err());
    }

    #[test]
    fn kfold_exact_divisibility() {
        let labels: Vec<bool> = (0..1000).map(|i| i < 10).collect();
        let folds = stratified_kfold(&labels, 5, 21).unwrap();
        for fold in &folds {
            assert_eq!(class_counts(&labels, fold), (2, 198));
        }
    }

    #[test]
    fn kfold_quota_within_one() {
        let labels: Vec<bool> = (0..20).map(|i| i < 7).collect();
        let folds = stratified_kfold(&labels, 5, 4).unwrap();
        let mut pos: Vec<usize> = folds.iter().map(|f| class_counts(&labels, f).0).collect();
        pos.sort_unstable();
        assert_eq!(pos, vec![1, 1, 1, 2, 2]);
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn kfold_rejects_small_classes() {
        let labels: Vec<bool> = (0..20).map(|i| i < 4).collect();
        assert!(stratified_kfold(&labels, 5, 0).is_err());
        assert!(stratified_kfold(&labels, 1, 0).is_err());
    }

    #[test]
    fn confusion_counts_each_quadrant() {
        let mut y_true = Vec::new();
        let mut y_pred = Vec::new();
        for (truth, pred, count) in [
            (true, true, 67),
            (true, false, 0),
            (false, true, 420),
            (false, false, 7215),
        ] {
            for _ in 0..count {
                y_true.push(truth);
                y_pred.push(pred);
            }
        }
        let cm = ConfusionMatrix::from_labels(&y_true, &y_pred).unwrap();
        assert_eq!(cm, ConfusionMatrix::new(67, 0, 420, 7215));
        assert_eq!(cm.total(), 7702);

        let identity = ConfusionMatrix::from_labels(&y_true, &y_true).unwrap();
        assert_eq!(identity.false_positives, 0);
        assert_eq!(identity.false_negatives, 0);

        let all_positive = vec![true; y_true.len()];
        let cm = ConfusionMatrix::from_labels(&y_true, &all_positive).unwrap();
        assert_eq!(cm.true_negatives, 0);
        assert_eq!(cm.false_negatives, 0);
    }

    #[test]
    fn confusion_rejects_length_mismatch() {
        assert!(ConfusionMatrix::from_labels(&[true, false], &[true]).is_err());
    }

    #[test]
    fn prediction_flip_swaps_quadrants() {
        let y_true = [true, true, false, false, true, false];
        let y_pred = [true, false, true, false, true, false];
        let flipped: Vec<bool> = y_pred.iter().map(|p| !p).collect();
        let a = ConfusionMatrix::from_labels(&y_true, &y_pred).unwrap();
        let b = ConfusionMatrix::from_labels(&y_true, &flipped).unwrap();
        assert_eq!(a.true_positives, b.false_negatives);
        assert_eq!(a.false_negatives, b.true_positives);
        assert_eq!(a.true_negatives, b.false_positives);
        assert_eq!(a.false_positives, b.true_negatives);
    }

    #[test]
    fn metrics_match_hand_computed_ratios() {
        let m = metrics(&ConfusionMatrix::new(67, 0, 420, 7215));
        assert!((m.positive.precision - 0.1376).abs() < 1e-4);
        assert_eq!(m.positive.recall, 1.0);
        assert!((m.positive.f1 - 0.2419).abs() < 1e-4);
        assert!(!m.degenerate);
        for v in [
            m.positive.precision,
            m.positive.recall,
            m.positive.f1,
            m.negative.precision,
            m.negative.recall,
            m.negative.f1,
            m.macro_f1,
            m.accuracy,
        ] {
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn f1_equals_precision_when_precision_equals_recall() {
        let m = metrics(&ConfusionMatrix::new(3, 1, 1, 5));
        assert_eq!(m.positive.precision, 0.75);
        assert_eq!(m.positive.recall, 0.75);
        assert!((m.positive.f1 - 0.75).abs() < 1e-15);
    }

    #[test]
    fn zero_over_zero_ratios_collapse_to_zero_and_flag() {
        let m = metrics(&ConfusionMatrix::new(0, 0, 0, 5));
        assert_eq!(m.positive.precision, 0.0);
        assert_eq!(m.positive.recall, 0.0);
        assert_eq!(m.positive.f1, 0.0);
        assert!(m.degenerate);
    }

    #[test]
    fn roc_perfect_and_tied_scores() {
        let y = [true, true, false, false];
        let perfect = roc_curve(&y, &[0.9, 0.8, 0.2, 0.1]).unwrap();
        assert_eq!(perfect.auc, 1.0);
        let tied = roc_curve(&y, &[0.5; 4]).unwrap();
        assert_eq!(
            tied.points,
            vec![CurvePoint { x: 0.0, y: 0.0 }, CurvePoint { x: 1.0, y: 1.0 }]
        );
        assert!((tied.auc - 0.5).abs() < 1e-15);
    }

    #[test]
    fn roc_matches_pair_counting_oracle() {
        for seed in 0..30 {
            let (labels, scores) = tied_instance(50, seed);
            let curve = roc_curve(&labels, &scores).unwrap();
            let oracle = pair_count_auc(&labels, &scores);
            assert!(
                (curve.auc - oracle).abs() <= 1e-12,
                "seed {seed}: trapezoid {} vs pair count {oracle}",
                curve.auc
            );
        }
    }

    #[test]
    fn curves_reject_single_class_or_bad_scores() {
        assert!(roc_curve(&[true, true], &[0.1, 0.2]).is_err());
        assert!(pr_curve(&[false, false], &[0.1, 0.2]).is_err());
        assert!(roc_curve(&[true, false], &[f64::NAN, 0.2]).is_err());
        assert!(roc_curve(&[true, false], &[0.1]).is_err());
    }

    #[test]
    fn pr_perfect_ranking_and_baseline() {
        let y = [true, false, false, false];
        let curve = pr_curve(&y, &[0.9, 0.3, 0.2, 0.1]).unwrap();
        assert_eq!(curve.auc, 1.0);
        assert_eq!(curve.baseline, Some(0.25));
    }

    #[test]
    fn pr_matches_threshold_enumeration_oracle() {
        for seed in 100..130 {
            let (labels, scores) = tied_instance(50, seed);
            let curve = pr_curve(&labels, &scores).unwrap();
            let oracle = enumerated_average_precision(&labels, &scores);
            assert!(
                (curve.auc - oracle).abs() <= 1e-12,
                "seed {seed}: sweep {} vs enumeration {oracle}",
                curve.auc
            );
        }
    }

    #[test]
    fn averaging_identical_curves_is_identity_with_zero_spread() {
        let y = [true, false, true, false, false];
        let s = [0.9, 0.6, 0.55, 0.3, 0.1];
        let curve = roc_curve(&y, &s).unwrap();

        let pair = average_curves(&[curve.clone(), curve.clone()]).unwrap();
        assert_eq!(pair.points.len(), CURVE_GRID_POINTS);
        for p in &pair.points {
            assert_eq!(p.std, 0.0);
        }
        assert_eq!(pair.mean_auc, curve.auc);
        assert_eq!(pair.std_auc, 0.0);

        let triple = average_curves(&[curve.clone(), curve.clone(), curve.clone()]).unwrap();
        for (p2, p3) in pair.points.iter().zip(&triple.points) {
            assert!((p3.mean - p2.mean).abs() <= 1e-12);
            assert!(p3.std <= 1e-12);
        }
    }

    #[test]
    fn averaging_perfect_and_chance_roc() {
        let y = [true, false];
        let perfect = roc_curve(&y, &[1.0, 0.0]).unwrap();
        let chance = roc_curve(&y, &[0.5, 0.5]).unwrap();
        let averaged = average_curves(&[perfect, chance]).unwrap();
        let at_half = averaged.points.iter().find(|p| p.x == 0.5).unwrap();
        assert!((at_half.mean - 0.75).abs() < 1e-12);
        assert!((averaged.mean_auc - 0.75).abs() < 1e-12);
    }

    #[test]
    fn averaging_rejects_mixed_kinds_and_singletons() {
        let y = [true, false, true, false];
        let s = [0.8, 0.6, 0.4, 0.2];
        let roc = roc_curve(&y, &s).unwrap();
        let pr = pr_curve(&y, &s).unwrap();
        assert!(average_curves(&[roc.clone(), pr]).is_err());
        assert!(average_curves(&[roc]).is_err());
    }

    #[test]
    fn default_grids_expand_to_declared_cardinalities() {
        let sizes: Vec<usize> = ModelFamily::ALL
            .iter()
            .map(|&f| GridSpec::default_for(f).expand().unwrap().len())
            .collect();
        assert_eq!(sizes, vec![10, 20, 36, 36]);
    }

    #[test]
    fn grid_expansion_order_is_declared_order() {
        let logistic = GridSpec::default_for(ModelFamily::Logistic)
            .expand()
            .unwrap();
        assert_eq!(
            logistic[0],
            Hyperparameters::Logistic(LogisticHyperparameters {
                penalty: Penalty::L1,
                c: 0.1
            })
        );
        assert_eq!(
            logistic[5],
            Hyperparameters::Logistic(LogisticHyperparameters {
                penalty: Penalty::L2,
                c: 0.1
            })
        );

        let svm = GridSpec::default_for(ModelFamily::Svm).expand().unwrap();
        for (i, candidate) in svm.iter().take(5).enumerate() {
            match candidate {
                Hyperparameters::Svm(h) => {
                    assert_eq!(h.kernel, SvmKernel::Linear);
                    assert_eq!(h.c, [0.1, 0.5, 1.0, 5.0, 10.0][i]);
                }
                other => panic!("unexpected candidate {other:?}"),
            }
        }
        assert_eq!(
            svm[5],
            Hyperparameters::Svm(SvmHyperparameters {
                kernel: SvmKernel::Rbf,
                c: 0.1,
                gamma: 0.001
            })
        );

        let forest = GridSpec::default_for(ModelFamily::Forest).expand().unwrap();
        assert_eq!(
            forest[0],
            Hyperparameters::Forest(ForestHyperparameters {
                n_trees: 100,
                max_depth: 3,
                min_samples_split: 2
            })
        );
        assert_eq!(
            forest[35],
            Hyperparameters::Forest(ForestHyperparameters {
                n_trees: 400,
                max_depth: 7,
                min_samples_split: 10
            })
        );

        let gbt = GridSpec::default_for(ModelFamily::Gbt).expand().unwrap();
        assert_eq!(
            gbt[0],
            Hyperparameters::Gbt(GbtHyperparameters {
                n_estimators: 100,
                max_depth: 3,
                learning_rate: 0.1
            })
        );
        assert_eq!(
            gbt[35],
            Hyperparameters::Gbt(GbtHyperparameters {
                n_estimators: 400,
                max_depth: 7,
                learning_rate: 0.001
            })
        );
    }

    #[test]
    fn grid_spec_round_trips_through_json() {
        let spec = GridSpec::default_for(ModelFamily::Svm);
        let text = serde_json::to_string(&spec).unwrap();
        let back: GridSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(spec, back);

        let handwritten = r#"{
            "family": "logistic",
            "values": { "penalty": ["l1", "l2"], "c": [0.5, 5.0] }
        }"#;
        let parsed: GridSpec = serde_json::from_str(handwritten).unwrap();
        assert_eq!(parsed.expand().unwrap().len(), 4);
    }

    #[test]
    fn grid_rejects_empty_value_lists() {
        let spec = GridSpec::Logistic {
            penalty: vec![],
            c: vec![1.0],
        };
        assert!(spec.expand().is_err());
    }

    #[test]
    fn grid_search_refits_per_fold_and_is_deterministic() {
        let matrix = blobs(90, 2.0, 5, "gs");
        let standardize = vec!["x1".to_string(), "x2".to_string()];
        let grid = GridSpec::Logistic {
            penalty: vec![Penalty::L2],
            c: vec![1.0, 10.0],
        };
        let result = grid_search(&matrix, &standardize, &grid, 3, 17).unwrap();

        assert_eq!(result.candidates.len(), 2);
        assert_eq!(result.fold_fingerprints.len(), 3);
        let distinct: HashSet<u64> = result.fold_fingerprints.iter().copied().collect();
        assert!(distinct.len() > 1, "standardizer must be refit per fold");
        for candidate in &result.candidates {
            assert_eq!(candidate.fold_macro_f1.len(), 3);
            let mean = candidate.fold_macro_f1.iter().sum::<f64>() / 3.0;
            assert!((candidate.mean_macro_f1 - mean).abs() < 1e-15);
        }
        assert!(result
            .candidates
            .iter()
            .all(|c| { c.mean_macro_f1 <= result.best().mean_macro_f1 }));

        let again = grid_search(&matrix, &standardize, &grid, 3, 17).unwrap();
        assert_eq!(
            serde_json::to_string(&result).unwrap(),
            serde_json::to_string(&again).unwrap()
        );

        let single_thread = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| grid_search(&matrix, &standardize, &grid, 3, 17))
            .unwrap();
        assert_eq!(
            serde_json::to_string(&result).unwrap(),
            serde_json::to_string(&single_thread).unwrap()
        );
    }

    #[test]
    fn grid_search_table_lists_every_candidate() {
        let matrix = blobs(60, 2.0, 9, "tb");
        let standardize = vec!["x1".to_string(), "x2".to_string()];
        let grid = GridSpec::Logistic {
            penalty: vec![Penalty::L1, Penalty::L2],
            c: vec![1.0],
        };
        let result = grid_search(&matrix, &standardize, &grid, 2, 3).unwrap();
        let table = result.table();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "candidate,settings,mean_macro_f1,fold_1,fold_2");
        assert!(lines[1].starts_with("0,penalty=l1 C=1,"));
    }

    #[test]
    fn final_fit_produces_complete_deterministic_report() {
        let train = blobs(75, 3.0, 41, "train");
        let test = blobs(30, 3.0, 42, "test");
        let standardize = vec!["x1".to_string(), "x2".to_string()];
        let hp = Hyperparameters::Logistic(LogisticHyperparameters::default());

        let report = final_fit_and_test(&train, &test, &standardize, &hp, None, 23).unwrap();
        assert_eq!(report.test_rows, 30);
        assert_eq!(report.predictions.len(), 30);
        assert_eq!(report.train_rows, 75);
        assert_eq!(report.threshold, 0.5);
        assert_eq!(report.confusion.total(), 30);
        assert_eq!(
            report.confusion.false_negatives, 0,
            "wide margin should leave no misses"
        );

        let again = final_fit_and_test(&train, &test, &standardize, &hp, None, 23).unwrap();
        assert_eq!(
            crate::report::to_json_pretty(&report).unwrap(),
            crate::report::to_json_pretty(&again).unwrap()
        );

        let model = report.load_model().unwrap();
        assert_eq!(model.family(), ModelFamily::Logistic);
    }

    #[test]
    fn final_fit_rejects_overlapping_rows() {
        let matrix = blobs(30, 2.0, 8, "same");
        let standardize = vec!["x1".to_string(), "x2".to_string()];
        let hp = Hyperparameters::Logistic(LogisticHyperparameters::default());
        let err = final_fit_and_test(&matrix, &matrix, &standardize, &hp, None, 1).unwrap_err();
        assert!(err.to_string().contains("overlap"));
    }

    proptest! {
        /// The trapezoidal ROC area is exactly the tie-corrected rank
        /// statistic, whatever the tie structure.
        #[test]
        fn prop_roc_auc_is_rank_statistic(
            rows in proptest::collection::vec((any::<bool>(), -8i32..=8), 5..40)
        ) {
            let labels: Vec<bool> = rows.iter().map(|r| r.0).collect();
            let positives = labels.iter().filter(|&&y| y).count();
            prop_assume!(positives > 0 && positives < labels.len());
            let scores: Vec<f64> = rows.iter().map(|r| r.1 as f64 / 4.0).collect();
            let curve = roc_curve(&labels, &scores).unwrap();
            prop_assert!((curve.auc - pair_count_auc(&labels, &scores)).abs() <= 1e-12);
        }

        /// Average precision from the incremental sweep equals the
        /// from-scratch enumeration at every distinct threshold.
        #[test]
        fn prop_ap_matches_enumeration(
            rows in proptest::collection::vec((any::<bool>(), -8i32..=8), 5..40)
        ) {
            let labels: Vec<bool> = rows.iter().map(|r| r.0).collect();
            let positives = labels.iter().filter(|&&y| y).count();
            prop_assume!(positives > 0 && positives < labels.len());
            let scores: Vec<f64> = rows.iter().map(|r| r.1 as f64 / 4.0).collect();
            let curve = pr_curve(&labels, &scores).unwrap();
            prop_assert!(
                (curve.auc - enumerated_average_precision(&labels, &scores)).abs() <= 1e-12
            );
        }

        /// Macro F1 does not change when the class encoding is swapped.
        #[test]
        fn prop_macro_f1_swap_invariant(tp in 0u64..40, fn_ in 0u64..40, fp in 0u64..40, tn in 0u64..40) {
            let cm = ConfusionMatrix::new(tp, fn_, fp, tn);
            prop_assert_eq!(metrics(&cm).macro_f1, metrics(&cm.flipped()).macro_f1);
        }

        /// Every fold's class counts stay within one row of the exact quota.
        #[test]
        fn prop_kfold_quota(seed in any::<u64>(), k in 2usize..6, n_pos in 8usize..20, n_neg in 20usize..60) {
            let labels: Vec<bool> =
                (0..n_pos + n_neg).map(|i| i < n_pos).collect();
            let folds = stratified_kfold(&labels, k, seed).unwrap();
            for fold in &folds {
                let (pos, neg) = class_counts(&labels, fold);
                let pos_quota = n_pos as f64 / k as f64;
                let neg_quota = n_neg as f64 / k as f64;
                prop_assert!((pos as f64 - pos_quota).abs() <= 1.0);
                prop_assert!((neg as f64 - neg_quota).abs() <= 1.0);
            }
            let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n_pos + n_neg).collect::<Vec<_>>());
        }
    }
}
