//! The full train/test protocol: stratified 80/20 split, standardize on the
//! training side only, fit with balanced weights, and report confusion
//! counts, per-class metrics, and both ranking curves on the held-out rows.

use muniwarn::eval::{final_fit_and_test, stratified_split};
use muniwarn::features::{build_matrix, standardizable_columns, LAG_FEATURES};
use muniwarn::models::{Hyperparameters, ModelFamily};
use muniwarn::synth::{generate, SynthConfig};

fn main() -> muniwarn::Result<()> {
    let config = SynthConfig {
        n_municipalities: 500,
        seed: 6,
        ..SynthConfig::default()
    };
    let (panel, _, _) = generate(&config)?;
    let matrix = build_matrix(&panel, &LAG_FEATURES)?;

    let (train_rows, test_rows) = stratified_split(matrix.labels(), 0.8, 12)?;
    let train = matrix.subset(&train_rows);
    let test = matrix.subset(&test_rows);
    println!(
        "split: {} train rows / {} test rows ({} / {} positives)",
        train.n_rows(),
        test.n_rows(),
        train.labels().iter().filter(|&&y| y).count(),
        test.labels().iter().filter(|&&y| y).count()
    );

    let report = final_fit_and_test(
        &train,
        &test,
        &standardizable_columns(&train),
        &Hyperparameters::default_for(ModelFamily::Logistic),
        Some(0.5),
        34,
    )?;

    let c = &report.confusion;
    println!(
        "confusion at {}: tp={} fp={} fn={} tn={}",
        report.threshold, c.true_positives, c.false_positives, c.false_negatives, c.true_negatives
    );
    let positive = &report.metrics.positive;
    println!(
        "positive class: precision {:.4}, recall {:.4}, F1 {:.4}",
        positive.precision, positive.recall, positive.f1
    );
    println!("macro F1 {:.4}", report.metrics.macro_f1);
    println!(
        "ROC AUC {:.4} ({} sweep points)",
        report.roc.auc,
        report.roc.points.len()
    );
    // The PR baseline is the realized test prevalence: a no-skill model's
    // precision at every recall.
    println!(
        "PR AUC {:.4} (baseline {:.4})",
        report.pr.auc,
        report.pr.baseline.unwrap_or(f64::NAN)
    );
    Ok(())
}
