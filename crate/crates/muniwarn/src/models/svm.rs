//! Soft-margin support-vector machine trained by sequential minimal
//! optimization over the dual.
//!
//! Class imbalance enters through per-sample box constraints: sample `i` of
//! class `y_i` is bounded by `C · w_{y_i}` instead of a single `C`. The
//! pair-selection heuristics are fully deterministic (largest error gap,
//! ties to the lowest index, then index-ordered scans), so training is a
//! pure function of the data and hyperparameters.
//!
//! Scores are raw decision values `Σ α_i y_i k(x_i, x) + b`, not
//! probabilities; rank-based metrics (ROC/PR) consume them directly and the
//! default classification threshold is 0.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{base_metadata, validate_training_input, ClassWeights};
use crate::features::FeatureMatrix;
use crate::{Error, Result};

const KKT_TOLERANCE: f64 = 1e-3;
const MAX_EPOCHS: usize = 100;
/// Minimum meaningful relative change of a dual variable.
const STEP_EPSILON: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SvmKernel {
    Linear,
    Rbf,
}

impl fmt::Display for SvmKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SvmKernel::Linear => "linear",
            SvmKernel::Rbf => "rbf",
        })
    }
}

impl FromStr for SvmKernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(SvmKernel::Linear),
            "rbf" | "radial" | "radial-basis" => Ok(SvmKernel::Rbf),
            other => Err(Error::InvalidInput(format!(
                "unknown kernel `{other}` (expected linear or rbf)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmHyperparameters {
    pub kernel: SvmKernel,
    pub c: f64,
    /// RBF width; ignored by the linear kernel.
    pub gamma: f64,
}

impl Default for SvmHyperparameters {
    fn default() -> Self {
        SvmHyperparameters {
            kernel: SvmKernel::Linear,
            c: 1.0,
            gamma: 0.01,
        }
    }
}

/// The trained decision function, in whichever form is compact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SvmSolution {
    /// Linear kernels collapse to a dense weight vector.
    Linear { weights: Vec<f64>, bias: f64 },
    /// Kernel machines keep their support vectors and `α_i y_i` factors.
    Kernel {
        support_vectors: Vec<Vec<f64>>,
        dual_coefficients: Vec<f64>,
        bias: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub columns: Vec<String>,
    pub hyperparameters: SvmHyperparameters,
    pub solution: SvmSolution,
    pub converged: bool,
    pub metadata: BTreeMap<String, String>,
}

impl SvmModel {
    /// Signed margin of one row.
    pub fn decision(&self, row: &[f64]) -> f64 {
        match &self.solution {
            SvmSolution::Linear { weights, bias } => dot(row, weights) + bias,
            SvmSolution::Kernel {
                support_vectors,
                dual_coefficients,
                bias,
            } => {
                let gamma = self.hyperparameters.gamma;
                support_vectors
                    .iter()
                    .zip(dual_coefficients)
                    .map(|(sv, coef)| coef * rbf(row, sv, gamma))
                    .sum::<f64>()
                    + bias
            }
        }
    }

    pub(crate) fn scores(&self, matrix: &FeatureMatrix) -> Vec<f64> {
        (0..matrix.n_rows())
            .map(|i| self.decision(matrix.row(i)))
            .collect()
    }
}

/// Fit an SVM on a standardized matrix.
pub fn train_svm(
    matrix: &FeatureMatrix,
    weights: &ClassWeights,
    hyperparameters: &SvmHyperparameters,
) -> Result<SvmModel> {
    validate_training_input(matrix)?;
    if !(hyperparameters.c.is_finite() && hyperparameters.c > 0.0) {
        return Err(Error::InvalidInput(format!(
            "regularization parameter C must be positive and finite, got {}",
            hyperparameters.c
        )));
    }
    if hyperparameters.kernel == SvmKernel::Rbf
        && !(hyperparameters.gamma.is_finite() && hyperparameters.gamma > 0.0)
    {
        return Err(Error::InvalidInput(format!(
            "gamma must be positive and finite for the rbf kernel, got {}",
            hyperparameters.gamma
        )));
    }

    let signed: Vec<f64> = matrix
        .labels()
        .iter()
        .map(|&y| if y { 1.0 } else { -1.0 })
        .collect();
    let box_c: Vec<f64> = matrix
        .labels()
        .iter()
        .map(|&y| hyperparameters.c * weights.weight(y))
        .collect();
    let dual = solve_dual(
        matrix,
        &signed,
        &box_c,
        hyperparameters.kernel,
        hyperparameters.gamma,
    );

    let solution = match hyperparameters.kernel {
        SvmKernel::Linear => {
            let mut w = vec![0.0f64; matrix.n_cols()];
            for i in 0..matrix.n_rows() {
                let coef = dual.alpha[i] * signed[i];
                if coef != 0.0 {
                    for (wj, xj) in w.iter_mut().zip(matrix.row(i)) {
                        *wj += coef * xj;
                    }
                }
            }
            SvmSolution::Linear {
                weights: w,
                bias: dual.bias,
            }
        }
        SvmKernel::Rbf => {
            let mut support_vectors = Vec::new();
            let mut dual_coefficients = Vec::new();
            for i in 0..matrix.n_rows() {
                if dual.alpha[i] > 0.0 {
                    support_vectors.push(matrix.row(i).to_vec());
                    dual_coefficients.push(dual.alpha[i] * signed[i]);
                }
            }
            SvmSolution::Kernel {
                support_vectors,
                dual_coefficients,
                bias: dual.bias,
            }
        }
    };

    let mut metadata = base_metadata(matrix, weights);
    metadata.insert("epochs".into(), dual.epochs.to_string());
    metadata.insert(
        "support_vectors".into(),
        dual.alpha.iter().filter(|&&a| a > 0.0).count().to_string(),
    );
    Ok(SvmModel {
        columns: matrix.column_names().to_vec(),
        hyperparameters: hyperparameters.clone(),
        solution,
        converged: dual.converged,
        metadata,
    })
}

pub(crate) struct DualSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub converged: bool,
    pub epochs: usize,
}

/// Solve the dual with Platt-style SMO under per-sample boxes `box_c`.
pub(crate) fn solve_dual(
    matrix: &FeatureMatrix,
    signed: &[f64],
    box_c: &[f64],
    kernel: SvmKernel,
    gamma: f64,
) -> DualSolution {
    let mut state = Smo {
        matrix,
        signed,
        box_c,
        kernel,
        gamma,
        norms: (0..matrix.n_rows())
            .map(|i| dot(matrix.row(i), matrix.row(i)))
            .collect(),
        alpha: vec![0.0; matrix.n_rows()],
        // With all-zero alpha the decision function is identically 0, so
        // the initial error is -y.
        errors: signed.iter().map(|y| -y).collect(),
        bias: 0.0,
    };
    let n = matrix.n_rows();
    let mut epochs = 0usize;
    let mut converged = false;
    let mut examine_all = true;
    loop {
        epochs += 1;
        let mut changed = 0usize;
        for i in 0..n {
            if examine_all || state.is_unbound(i) {
                changed += usize::from(state.examine(i));
            }
        }
        if examine_all {
            if changed == 0 {
                // A full KKT sweep with no update: optimal within tolerance.
                converged = true;
                break;
            }
            examine_all = false;
        } else if changed == 0 {
            examine_all = true;
        }
        if epochs >= MAX_EPOCHS {
            break;
        }
    }
    DualSolution {
        alpha: state.alpha,
        bias: state.bias,
        converged,
        epochs,
    }
}

struct Smo<'a> {
    matrix: &'a FeatureMatrix,
    signed: &'a [f64],
    box_c: &'a [f64],
    kernel: SvmKernel,
    gamma: f64,
    norms: Vec<f64>,
    alpha: Vec<f64>,
    /// `f(x_i) - y_i`, kept incrementally up to date.
    errors: Vec<f64>,
    bias: f64,
}

impl Smo<'_> {
    fn kernel(&self, i: usize, j: usize) -> f64 {
        let product = dot(self.matrix.row(i), self.matrix.row(j));
        match self.kernel {
            SvmKernel::Linear => product,
            SvmKernel::Rbf => {
                let squared_distance = (self.norms[i] + self.norms[j] - 2.0 * product).max(0.0);
                (-self.gamma * squared_distance).exp()
            }
        }
    }

    fn is_unbound(&self, i: usize) -> bool {
        self.alpha[i] > 0.0 && self.alpha[i] < self.box_c[i]
    }

    fn examine(&mut self, i2: usize) -> bool {
        let y2 = self.signed[i2];
        let a2 = self.alpha[i2];
        let e2 = self.errors[i2];
        let r2 = e2 * y2;
        let violates =
            (r2 < -KKT_TOLERANCE && a2 < self.box_c[i2]) || (r2 > KKT_TOLERANCE && a2 > 0.0);
        if !violates {
            return false;
        }

        // First choice: the unbound sample with the largest error gap
        // (ties to the lowest index).
        let mut best: Option<(f64, usize)> = None;
        for i1 in 0..self.alpha.len() {
            if i1 != i2 && self.is_unbound(i1) {
                let gap = (self.errors[i1] - e2).abs();
                if best.map_or(true, |(g, _)| gap > g) {
                    best = Some((gap, i1));
                }
            }
        }
        if let Some((_, i1)) = best {
            if self.take_step(i1, i2) {
                return true;
            }
        }
        // Second: every unbound sample in index order.
        for i1 in 0..self.alpha.len() {
            if i1 != i2 && self.is_unbound(i1) && self.take_step(i1, i2) {
                return true;
            }
        }
        // Last resort: every sample.
        for i1 in 0..self.alpha.len() {
            if i1 != i2 && self.take_step(i1, i2) {
                return true;
            }
        }
        false
    }

    fn take_step(&mut self, i1: usize, i2: usize) -> bool {
        let (a1, a2) = (self.alpha[i1], self.alpha[i2]);
        let (y1, y2) = (self.signed[i1], self.signed[i2]);
        let (e1, e2) = (self.errors[i1], self.errors[i2]);
        let (c1, c2) = (self.box_c[i1], self.box_c[i2]);
        let s = y1 * y2;

        let (low, high) = if s < 0.0 {
            ((a2 - a1).max(0.0), c2.min(c1 + a2 - a1))
        } else {
            ((a1 + a2 - c1).max(0.0), c2.min(a1 + a2))
        };
        if low >= high {
            return false;
        }

        let k11 = self.kernel(i1, i1);
        let k12 = self.kernel(i1, i2);
        let k22 = self.kernel(i2, i2);
        let eta = k11 + k22 - 2.0 * k12;

        let a2_new = if eta > 0.0 {
            (a2 + y2 * (e1 - e2) / eta).clamp(low, high)
        } else {
            // Degenerate curvature: compare the dual objective at the two
            // clipping endpoints.
            let f1 = y1 * (e1 + self.bias) - a1 * k11 - s * a2 * k12;
            let f2 = y2 * (e2 + self.bias) - s * a1 * k12 - a2 * k22;
            let l1 = a1 + s * (a2 - low);
            let h1 = a1 + s * (a2 - high);
            let at_low = l1 * f1
                + low * f2
                + 0.5 * l1 * l1 * k11
                + 0.5 * low * low * k22
                + s * low * l1 * k12;
            let at_high = h1 * f1
                + high * f2
                + 0.5 * h1 * h1 * k11
                + 0.5 * high * high * k22
                + s * high * h1 * k12;
            if at_low < at_high - 1e-12 {
                low
            } else if at_low > at_high + 1e-12 {
                high
            } else {
                return false;
            }
        };
        // Clipping arithmetic can leave dust like 1e-17 next to a box
        // bound; snap it so bound/unbound classification stays exact.
        let a2_new = snap_to_box(a2_new, c2);
        if (a2_new - a2).abs() < STEP_EPSILON * (a2_new + a2 + STEP_EPSILON) {
            return false;
        }
        let a1_new = snap_to_box((a1 + s * (a2 - a2_new)).clamp(0.0, c1), c1);

        let delta1 = (a1_new - a1) * y1;
        let delta2 = (a2_new - a2) * y2;
        let b1 = self.bias - e1 - delta1 * k11 - delta2 * k12;
        let b2 = self.bias - e2 - delta1 * k12 - delta2 * k22;
        let bias_new = if a1_new > 0.0 && a1_new < c1 {
            b1
        } else if a2_new > 0.0 && a2_new < c2 {
            b2
        } else {
            0.5 * (b1 + b2)
        };
        let delta_bias = bias_new - self.bias;

        for k in 0..self.errors.len() {
            self.errors[k] +=
                delta1 * self.kernel(i1, k) + delta2 * self.kernel(i2, k) + delta_bias;
        }
        self.alpha[i1] = a1_new;
        self.alpha[i2] = a2_new;
        self.bias = bias_new;
        true
    }
}

fn snap_to_box(alpha: f64, c: f64) -> f64 {
    if alpha < 1e-10 * c {
        0.0
    } else if alpha > c * (1.0 - 1e-10) {
        c
    } else {
        alpha
    }
}

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let squared_distance: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * squared_distance).exp()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
