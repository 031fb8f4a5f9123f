//! Penalized, class-weighted logistic regression.
//!
//! The trainer minimizes
//!
//! ```text
//! J(b, beta) = (1/W) * sum_i w_i * logloss_i  +  (1/(C*W)) * R(beta)
//! ```
//!
//! where `W = sum_i w_i`, `R` is `‖beta‖₁` or `½‖beta‖₂²`, larger `C` means
//! weaker regularization, and the intercept is never penalized. Normalizing
//! by the weight total (rather than the row count) makes duplicating a row
//! `k` times with weight 1 exactly equivalent to weighting it `k` once —
//! and the two coincide under balanced class weights, whose total is `n`.
//!
//! L2 problems are solved with damped Newton iterations (the Hessian is a
//! few dozen columns wide at most); L1 problems with monotone accelerated
//! proximal gradient steps and soft-thresholding. Both stop when the
//! objective decrease falls under `1e-8` or the (sub)gradient infinity norm
//! under `1e-6`, with a hard cap of 10000 iterations; hitting the cap
//! leaves the model usable but flagged [`LogisticModel::converged`]` = false`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{base_metadata, linalg, validate_training_input, ClassWeights};
use crate::features::FeatureMatrix;
use crate::{Error, Result};

const MAX_ITERATIONS: usize = 10_000;
const OBJECTIVE_TOLERANCE: f64 = 1e-8;
const GRADIENT_TOLERANCE: f64 = 1e-6;

/// Regularization type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    L1,
    L2,
}

impl fmt::Display for Penalty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Penalty::L1 => "l1",
            Penalty::L2 => "l2",
        })
    }
}

impl FromStr for Penalty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Penalty::L1),
            "l2" => Ok(Penalty::L2),
            other => Err(Error::InvalidInput(format!(
                "unknown penalty `{other}` (expected l1 or l2)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticHyperparameters {
    pub penalty: Penalty,
    /// Inverse regularization strength; larger is weaker.
    pub c: f64,
}

impl Default for LogisticHyperparameters {
    fn default() -> Self {
        LogisticHyperparameters {
            penalty: Penalty::L2,
            c: 5.0,
        }
    }
}

/// A fitted logistic model: probability = sigmoid(x·coefficients + intercept).
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub columns: Vec<String>,
    pub hyperparameters: LogisticHyperparameters,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub converged: bool,
    pub metadata: BTreeMap<String, String>,
}

impl LogisticModel {
    /// Linear score of one row.
    pub fn margin(&self, row: &[f64]) -> f64 {
        dot(row, &self.coefficients) + self.intercept
    }

    pub(crate) fn scores(&self, matrix: &FeatureMatrix) -> Vec<f64> {
        (0..matrix.n_rows())
            .map(|i| sigmoid(self.margin(matrix.row(i))))
            .collect()
    }
}

/// Standard errors from the (regularized) observed information matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientStandardErrors {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

/// Fit a logistic model on a standardized matrix.
pub fn train_logistic(
    matrix: &FeatureMatrix,
    weights: &ClassWeights,
    hyperparameters: &LogisticHyperparameters,
) -> Result<LogisticModel> {
    validate_training_input(matrix)?;
    if !(hyperparameters.c.is_finite() && hyperparameters.c > 0.0) {
        return Err(Error::InvalidInput(format!(
            "penalty parameter C must be positive and finite, got {}",
            hyperparameters.c
        )));
    }
    let sample_weights = weights.expand(matrix.labels());
    let fit = match hyperparameters.penalty {
        Penalty::L2 => newton_l2(matrix, &sample_weights, hyperparameters.c),
        Penalty::L1 => proximal_l1(matrix, &sample_weights, hyperparameters.c),
    };

    let mut metadata = base_metadata(matrix, weights);
    metadata.insert("iterations".into(), fit.iterations.to_string());
    metadata.insert(
        "solver".into(),
        match hyperparameters.penalty {
            Penalty::L2 => "damped-newton".into(),
            Penalty::L1 => "proximal-gradient".into(),
        },
    );
    Ok(LogisticModel {
        columns: matrix.column_names().to_vec(),
        hyperparameters: hyperparameters.clone(),
        coefficients: fit.coefficients,
        intercept: fit.intercept,
        converged: fit.converged,
        metadata,
    })
}

/// The penalized weighted objective `J` at a given parameter vector.
///
/// Public so verification can compare the trainer's internal quantities
/// against independent finite-difference computations.
pub fn objective(
    matrix: &FeatureMatrix,
    sample_weights: &[f64],
    hyperparameters: &LogisticHyperparameters,
    coefficients: &[f64],
    intercept: f64,
) -> f64 {
    let weight_total: f64 = sample_weights.iter().sum();
    let mut loss = 0.0;
    for i in 0..matrix.n_rows() {
        let margin = dot(matrix.row(i), coefficients) + intercept;
        let y = if matrix.labels()[i] { 1.0 } else { 0.0 };
        loss += sample_weights[i] * (softplus(margin) - y * margin);
    }
    let penalty = match hyperparameters.penalty {
        Penalty::L1 => coefficients.iter().map(|c| c.abs()).sum::<f64>(),
        Penalty::L2 => 0.5 * coefficients.iter().map(|c| c * c).sum::<f64>(),
    };
    loss / weight_total + penalty / (hyperparameters.c * weight_total)
}

/// Analytic gradient of [`objective`]: `(d/d coefficients, d/d intercept)`.
///
/// For L1 the penalty contributes its subgradient `sign(beta)` (zero at
/// exactly zero), which matches finite differences anywhere off the kink.
pub fn gradient(
    matrix: &FeatureMatrix,
    sample_weights: &[f64],
    hyperparameters: &LogisticHyperparameters,
    coefficients: &[f64],
    intercept: f64,
) -> (Vec<f64>, f64) {
    let (mut grad, grad_intercept) =
        smooth_gradient(matrix, sample_weights, coefficients, intercept);
    let weight_total: f64 = sample_weights.iter().sum();
    let strength = 1.0 / (hyperparameters.c * weight_total);
    match hyperparameters.penalty {
        Penalty::L2 => {
            for (g, c) in grad.iter_mut().zip(coefficients) {
                *g += strength * c;
            }
        }
        Penalty::L1 => {
            for (g, c) in grad.iter_mut().zip(coefficients) {
                if *c != 0.0 {
                    *g += strength * c.signum();
                }
            }
        }
    }
    (grad, grad_intercept)
}

/// Observed-information standard errors of a fitted model.
///
/// The curvature is taken from the unnormalized weighted log-likelihood,
/// plus the ridge term for L2 models (L1 curvature is zero away from the
/// kinks). Useful for asking whether a coefficient clears zero by a
/// comfortable multiple of its uncertainty.
pub fn standard_errors(
    model: &LogisticModel,
    matrix: &FeatureMatrix,
    weights: &ClassWeights,
) -> Result<CoefficientStandardErrors> {
    super::check_columns(&model.columns, matrix)?;
    validate_training_input(matrix)?;
    let d = model.coefficients.len();
    let sample_weights = weights.expand(matrix.labels());

    // Information matrix over (intercept, coefficients...).
    let mut info = vec![vec![0.0f64; d + 1]; d + 1];
    for i in 0..matrix.n_rows() {
        let row = matrix.row(i);
        let p = sigmoid(model.margin(row));
        let curvature = sample_weights[i] * p * (1.0 - p);
        info[0][0] += curvature;
        for a in 0..d {
            info[0][a + 1] += curvature * row[a];
            for b in a..d {
                info[a + 1][b + 1] += curvature * row[a] * row[b];
            }
        }
    }
    for a in 0..=d {
        for b in (a + 1)..=d {
            info[b][a] = info[a][b];
        }
    }
    if model.hyperparameters.penalty == Penalty::L2 {
        for a in 1..=d {
            info[a][a] += 1.0 / model.hyperparameters.c;
        }
    }
    let diag = linalg::inverse_diagonal(&info).ok_or_else(|| {
        Error::InvalidInput("information matrix is singular; standard errors undefined".into())
    })?;
    Ok(CoefficientStandardErrors {
        intercept: diag[0].max(0.0).sqrt(),
        coefficients: diag[1..].iter().map(|v| v.max(0.0).sqrt()).collect(),
    })
}

struct Fit {
    coefficients: Vec<f64>,
    intercept: f64,
    converged: bool,
    iterations: usize,
}

fn newton_l2(matrix: &FeatureMatrix, sample_weights: &[f64], c: f64) -> Fit {
    let d = matrix.n_cols();
    let weight_total: f64 = sample_weights.iter().sum();
    let ridge = 1.0 / (c * weight_total);
    let hp = LogisticHyperparameters {
        penalty: Penalty::L2,
        c,
    };

    let mut coefficients = vec![0.0f64; d];
    let mut intercept = 0.0f64;
    let mut current = objective(matrix, sample_weights, &hp, &coefficients, intercept);
    let mut converged = false;
    let mut iterations = 0;

    for iteration in 0..MAX_ITERATIONS {
        iterations = iteration + 1;
        let (grad, grad_intercept) =
            gradient(matrix, sample_weights, &hp, &coefficients, intercept);
        let grad_norm = grad
            .iter()
            .chain(std::iter::once(&grad_intercept))
            .fold(0.0f64, |m, g| m.max(g.abs()));
        if grad_norm < GRADIENT_TOLERANCE {
            converged = true;
            break;
        }

        // Hessian over (intercept, coefficients...): weighted curvature plus
        // the ridge on the coefficient block only.
        let mut hessian = vec![vec![0.0f64; d + 1]; d + 1];
        for i in 0..matrix.n_rows() {
            let row = matrix.row(i);
            let p = sigmoid(dot(row, &coefficients) + intercept);
            let curvature = sample_weights[i] * p * (1.0 - p) / weight_total;
            hessian[0][0] += curvature;
            for a in 0..d {
                hessian[0][a + 1] += curvature * row[a];
                for b in a..d {
                    hessian[a + 1][b + 1] += curvature * row[a] * row[b];
                }
            }
        }
        for a in 0..=d {
            for b in (a + 1)..=d {
                hessian[b][a] = hessian[a][b];
            }
        }
        for a in 1..=d {
            hessian[a][a] += ridge;
        }

        // Factor, jittering the diagonal if curvature degenerated.
        let rhs: Vec<f64> = std::iter::once(-grad_intercept)
            .chain(grad.iter().map(|g| -g))
            .collect();
        let mut jitter = 1e-12;
        let factor = loop {
            match linalg::cholesky(&hessian) {
                Some(l) => break Some(l),
                None if jitter < 1.0 => {
                    for (a, row) in hessian.iter_mut().enumerate() {
                        row[a] += jitter;
                    }
                    jitter *= 100.0;
                }
                None => break None,
            }
        };
        let Some(factor) = factor else { break };
        let direction = linalg::cholesky_solve(&factor, &rhs);

        let slope = grad_intercept * direction[0]
            + grad
                .iter()
                .zip(&direction[1..])
                .map(|(g, s)| g * s)
                .sum::<f64>();

        // Backtracking line search on the Armijo condition.
        let mut step = 1.0f64;
        let mut accepted = None;
        while step >= 1e-12 {
            let trial_intercept = intercept + step * direction[0];
            let trial: Vec<f64> = coefficients
                .iter()
                .zip(&direction[1..])
                .map(|(c, s)| c + step * s)
                .collect();
            let value = objective(matrix, sample_weights, &hp, &trial, trial_intercept);
            if value <= current + 1e-4 * step * slope {
                accepted = Some((trial, trial_intercept, value));
                break;
            }
            step /= 2.0;
        }
        let Some((trial, trial_intercept, value)) = accepted else {
            break;
        };

        let decrease = current - value;
        coefficients = trial;
        intercept = trial_intercept;
        current = value;
        if decrease < OBJECTIVE_TOLERANCE {
            converged = true;
            break;
        }
    }
    Fit {
        coefficients,
        intercept,
        converged,
        iterations,
    }
}

fn proximal_l1(matrix: &FeatureMatrix, sample_weights: &[f64], c: f64) -> Fit {
    let d = matrix.n_cols();
    let weight_total: f64 = sample_weights.iter().sum();
    let strength = 1.0 / (c * weight_total);
    let hp = LogisticHyperparameters {
        penalty: Penalty::L1,
        c,
    };

    // Lipschitz bound of the smooth gradient over (coefficients, intercept):
    // the logistic curvature never exceeds 1/4.
    let lipschitz = (0..matrix.n_rows())
        .map(|i| {
            let norm2: f64 = matrix.row(i).iter().map(|x| x * x).sum::<f64>() + 1.0;
            sample_weights[i] * norm2
        })
        .sum::<f64>()
        / (4.0 * weight_total);
    let step = 1.0 / lipschitz.max(f64::MIN_POSITIVE);

    let mut coefficients = vec![0.0f64; d];
    let mut intercept = 0.0f64;
    let mut previous: (Vec<f64>, f64);
    let mut momentum_coefficients = coefficients.clone();
    let mut momentum_intercept = intercept;
    let mut t = 1.0f64;
    let mut current = objective(matrix, sample_weights, &hp, &coefficients, intercept);
    let mut converged = false;
    let mut iterations = 0;

    let proximal_step = |from_coefficients: &[f64], from_intercept: f64| {
        let (grad, grad_intercept) =
            smooth_gradient(matrix, sample_weights, from_coefficients, from_intercept);
        let next: Vec<f64> = from_coefficients
            .iter()
            .zip(&grad)
            .map(|(x, g)| soft_threshold(x - step * g, step * strength))
            .collect();
        (next, from_intercept - step * grad_intercept)
    };

    for iteration in 0..MAX_ITERATIONS {
        iterations = iteration + 1;
        let (mut next, mut next_intercept) =
            proximal_step(&momentum_coefficients, momentum_intercept);
        let mut value = objective(matrix, sample_weights, &hp, &next, next_intercept);
        if value > current {
            // Momentum overshot: restart from the best iterate, where the
            // majorization guarantees a non-increasing step.
            t = 1.0;
            (next, next_intercept) = proximal_step(&coefficients, intercept);
            value = objective(matrix, sample_weights, &hp, &next, next_intercept);
            if value > current {
                // No representable progress remains.
                converged = true;
                break;
            }
        }

        let decrease = current - value;
        previous = (std::mem::take(&mut coefficients), intercept);
        coefficients = next;
        intercept = next_intercept;
        current = value;

        // Optimality measure: the minimal-norm subgradient of J at the new
        // iterate.
        let (grad, grad_intercept) =
            smooth_gradient(matrix, sample_weights, &coefficients, intercept);
        let subgradient_norm = coefficients
            .iter()
            .zip(&grad)
            .map(|(&x, &g)| {
                if x > 0.0 {
                    (g + strength).abs()
                } else if x < 0.0 {
                    (g - strength).abs()
                } else {
                    (g.abs() - strength).max(0.0)
                }
            })
            .fold(grad_intercept.abs(), f64::max);

        if subgradient_norm < GRADIENT_TOLERANCE || decrease < OBJECTIVE_TOLERANCE {
            converged = true;
            break;
        }

        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let ratio = (t - 1.0) / t_next;
        momentum_coefficients = coefficients
            .iter()
            .zip(&previous.0)
            .map(|(x, p)| x + ratio * (x - p))
            .collect();
        momentum_intercept = intercept + ratio * (intercept - previous.1);
        t = t_next;
    }
    Fit {
        coefficients,
        intercept,
        converged,
        iterations,
    }
}

fn smooth_gradient(
    matrix: &FeatureMatrix,
    sample_weights: &[f64],
    coefficients: &[f64],
    intercept: f64,
) -> (Vec<f64>, f64) {
    let weight_total: f64 = sample_weights.iter().sum();
    let mut grad = vec![0.0f64; coefficients.len()];
    let mut grad_intercept = 0.0;
    for i in 0..matrix.n_rows() {
        let row = matrix.row(i);
        let y = if matrix.labels()[i] { 1.0 } else { 0.0 };
        let residual = sample_weights[i] * (sigmoid(dot(row, coefficients) + intercept) - y);
        grad_intercept += residual;
        for (g, x) in grad.iter_mut().zip(row) {
            *g += residual * x;
        }
    }
    for g in grad.iter_mut() {
        *g /= weight_total;
    }
    (grad, grad_intercept / weight_total)
}

fn soft_threshold(value: f64, threshold: f64) -> f64 {
    if value > threshold {
        value - threshold
    } else if value < -threshold {
        value + threshold
    } else {
        0.0
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable `ln(1 + exp(x))`.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn separable_line() -> FeatureMatrix {
        let rows: Vec<Vec<f64>> = (-10..10).map(|i| vec![i as f64 / 5.0]).collect();
        let labels: Vec<bool> = (-10..10).map(|i| i >= 0).collect();
        FeatureMatrix::from_rows(vec!["x".into()], rows, labels).unwrap()
    }

    fn random_problem(seed: u64, n: usize, d: usize) -> (FeatureMatrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let labels: Vec<bool> = (0..n).map(|i| i % 3 == 0 || rng.gen_bool(0.3)).collect();
        let names = (0..d).map(|j| format!("f{j}")).collect();
        let matrix = FeatureMatrix::from_rows(names, rows, labels).unwrap();
        let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.25..4.0)).collect();
        (matrix, weights)
    }

    #[test]
    fn zero_model_scores_one_half_everywhere() {
        let matrix = separable_line();
        let model = LogisticModel {
            columns: vec!["x".into()],
            hyperparameters: LogisticHyperparameters::default(),
            coefficients: vec![0.0],
            intercept: 0.0,
            converged: true,
            metadata: BTreeMap::new(),
        };
        assert!(model.scores(&matrix).iter().all(|&p| p == 0.5));
    }

    #[test]
    fn separable_data_reaches_full_training_recall() {
        let matrix = separable_line();
        let weights = ClassWeights::balanced(matrix.labels()).unwrap();
        let hp = LogisticHyperparameters {
            penalty: Penalty::L2,
            c: 10.0,
        };
        let model = train_logistic(&matrix, &weights, &hp).unwrap();
        assert!(model.converged);
        for i in 0..matrix.n_rows() {
            let p = sigmoid(model.margin(matrix.row(i)));
            if matrix.labels()[i] {
                assert!(p >= 0.5, "row {i} scored {p}");
            }
        }
    }

    #[test]
    fn gradient_matches_central_finite_differences() {
        for seed in [1u64, 2, 3] {
            let (matrix, weights) = random_problem(seed, 10, 5);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xFEED);
            let coefficients: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let intercept: f64 = rng.gen_range(-1.0..1.0);
            for penalty in [Penalty::L2, Penalty::L1] {
                let hp = LogisticHyperparameters { penalty, c: 0.7 };
                let (grad, grad_intercept) =
                    gradient(&matrix, &weights, &hp, &coefficients, intercept);
                let h = 1e-6;
                for j in 0..=5 {
                    let mut plus = coefficients.clone();
                    let mut minus = coefficients.clone();
                    let (ip, im) = if j == 5 {
                        (intercept + h, intercept - h)
                    } else {
                        plus[j] += h;
                        minus[j] -= h;
                        (intercept, intercept)
                    };
                    let numeric = (objective(&matrix, &weights, &hp, &plus, ip)
                        - objective(&matrix, &weights, &hp, &minus, im))
                        / (2.0 * h);
                    let analytic = if j == 5 { grad_intercept } else { grad[j] };
                    let relative = (numeric - analytic).abs() / analytic.abs().max(1.0);
                    assert!(
                        relative < 1e-5,
                        "seed {seed} {penalty} coord {j}: {relative}"
                    );
                }
            }
        }
    }

    #[test]
    fn duplicating_a_row_equals_weighting_it() {
        let base = FeatureMatrix::from_rows(
            vec!["x".into(), "z".into()],
            vec![vec![1.0, -0.5], vec![-1.0, 0.25], vec![0.5, 2.0]],
            vec![true, false, true],
        )
        .unwrap();
        // Row 0 repeated three times with unit weight...
        let duplicated = FeatureMatrix::from_rows(
            vec!["x".into(), "z".into()],
            vec![
                vec![1.0, -0.5],
                vec![1.0, -0.5],
                vec![1.0, -0.5],
                vec![-1.0, 0.25],
                vec![0.5, 2.0],
            ],
            vec![true, true, true, false, true],
        )
        .unwrap();
        // ...versus weighted three in place.
        let weighted = [3.0, 1.0, 1.0];
        let uniform = [1.0; 5];
        let coefficients = [0.3, -0.8];
        for penalty in [Penalty::L1, Penalty::L2] {
            let hp = LogisticHyperparameters { penalty, c: 2.0 };
            let a = objective(&duplicated, &uniform, &hp, &coefficients, 0.1);
            let b = objective(&base, &weighted, &hp, &coefficients, 0.1);
            assert!((a - b).abs() < 1e-10, "{penalty}: {a} vs {b}");
        }
    }

    #[test]
    fn strong_l1_penalty_zeroes_every_coefficient() {
        let (matrix, _) = random_problem(9, 60, 4);
        let weights = ClassWeights::balanced(matrix.labels()).unwrap();
        let hp = LogisticHyperparameters {
            penalty: Penalty::L1,
            c: 1e-4,
        };
        let model = train_logistic(&matrix, &weights, &hp).unwrap();
        for (j, c) in model.coefficients.iter().enumerate() {
            assert!(c.abs() < 1e-6, "coefficient {j} survived: {c}");
        }
    }

    #[test]
    fn moderate_l1_induces_sparsity() {
        let (matrix, _) = random_problem(17, 80, 6);
        let weights = ClassWeights::balanced(matrix.labels()).unwrap();
        let l1 = train_logistic(
            &matrix,
            &weights,
            &LogisticHyperparameters {
                penalty: Penalty::L1,
                c: 0.05,
            },
        )
        .unwrap();
        let zeroes = l1.coefficients.iter().filter(|c| c.abs() < 1e-9).count();
        assert!(zeroes > 0, "expected sparsity, got {:?}", l1.coefficients);
    }

    #[test]
    fn score_increases_with_a_positive_coefficient_feature() {
        let model = LogisticModel {
            columns: vec!["up".into(), "down".into()],
            hyperparameters: LogisticHyperparameters::default(),
            coefficients: vec![1.5, -0.7],
            intercept: 0.2,
            converged: true,
            metadata: BTreeMap::new(),
        };
        let low = sigmoid(model.margin(&[0.0, 1.0]));
        let high = sigmoid(model.margin(&[1.0, 1.0]));
        assert!(high > low);
    }

    #[test]
    fn training_is_deterministic() {
        let (matrix, _) = random_problem(23, 50, 5);
        let weights = ClassWeights::balanced(matrix.labels()).unwrap();
        for penalty in [Penalty::L1, Penalty::L2] {
            let hp = LogisticHyperparameters { penalty, c: 1.0 };
            let a = train_logistic(&matrix, &weights, &hp).unwrap();
            let b = train_logistic(&matrix, &weights, &hp).unwrap();
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.coefficients), bits(&b.coefficients));
            assert_eq!(a.intercept.to_bits(), b.intercept.to_bits());
        }
    }

    #[test]
    fn standard_errors_shrink_with_more_data() {
        let build = |n: usize| {
            let mut rng = ChaCha8Rng::seed_from_u64(31);
            let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen_range(-1.0..1.0)]).collect();
            let labels: Vec<bool> = rows
                .iter()
                .map(|r| rng.gen_bool(sigmoid(2.0 * r[0])))
                .collect();
            FeatureMatrix::from_rows(vec!["x".into()], rows, labels).unwrap()
        };
        let hp = LogisticHyperparameters {
            penalty: Penalty::L2,
            c: 100.0,
        };
        let small = build(60);
        let large = build(960);
        let weights_small = ClassWeights::balanced(small.labels()).unwrap();
        let weights_large = ClassWeights::balanced(large.labels()).unwrap();
        let se_small = standard_errors(
            &train_logistic(&small, &weights_small, &hp).unwrap(),
            &small,
            &weights_small,
        )
        .unwrap();
        let se_large = standard_errors(
            &train_logistic(&large, &weights_large, &hp).unwrap(),
            &large,
            &weights_large,
        )
        .unwrap();
        assert!(se_small.coefficients[0] > 0.0);
        assert!(se_large.coefficients[0] < se_small.coefficients[0]);
    }

    #[test]
    fn rejects_single_class_and_bad_c() {
        let matrix = FeatureMatrix::from_rows(
            vec!["x".into()],
            vec![vec![1.0], vec![2.0]],
            vec![true, true],
        )
        .unwrap();
        let weights = ClassWeights::uniform();
        assert!(train_logistic(&matrix, &weights, &LogisticHyperparameters::default()).is_err());

        let ok = separable_line();
        let weights = ClassWeights::balanced(ok.labels()).unwrap();
        let hp = LogisticHyperparameters {
            penalty: Penalty::L2,
            c: 0.0,
        };
        assert!(train_logistic(&ok, &weights, &hp).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// The L2 objective is convex in (coefficients, intercept).
        #[test]
        fn l2_objective_is_convex(
            seed in 0u64..200,
            scale_a in -2.0f64..2.0,
            scale_b in -2.0f64..2.0,
        ) {
            let (matrix, weights) = random_problem(seed, 20, 3);
            let hp = LogisticHyperparameters { penalty: Penalty::L2, c: 1.0 };
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(77));
            let theta_a: Vec<f64> = (0..3).map(|_| scale_a * rng.gen_range(-1.0..1.0)).collect();
            let theta_b: Vec<f64> = (0..3).map(|_| scale_b * rng.gen_range(-1.0..1.0)).collect();
            let (ia, ib) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let mid: Vec<f64> =
                theta_a.iter().zip(&theta_b).map(|(a, b)| 0.5 * (a + b)).collect();
            let j_mid = objective(&matrix, &weights, &hp, &mid, 0.5 * (ia + ib));
            let j_a = objective(&matrix, &weights, &hp, &theta_a, ia);
            let j_b = objective(&matrix, &weights, &hp, &theta_b, ib);
            prop_assert!(j_mid <= 0.5 * (j_a + j_b) + 1e-10);
        }
    }
}
