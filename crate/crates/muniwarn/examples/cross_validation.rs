//! Stratified k-fold cross-validation: every fold holds out a class-balanced
//! slice, fits the standardizer and model on the rest, and scores the
//! held-out rows. Fold curves are averaged point-by-point over a fixed
//! 101-point x-axis.

use muniwarn::eval::{average_curves, final_fit_and_test, stratified_kfold};
use muniwarn::features::{build_matrix, standardizable_columns, LAG_FEATURES};
use muniwarn::models::{Hyperparameters, ModelFamily};
use muniwarn::synth::{generate, SynthConfig};

fn main() -> muniwarn::Result<()> {
    let config = SynthConfig {
        n_municipalities: 400,
        seed: 33,
        ..SynthConfig::default()
    };
    let (panel, _, _) = generate(&config)?;
    let matrix = build_matrix(&panel, &LAG_FEATURES)?;
    let standardize = standardizable_columns(&matrix);
    let hyperparameters = Hyperparameters::default_for(ModelFamily::Logistic);

    let k = 5;
    let folds = stratified_kfold(matrix.labels(), k, 99)?;
    let mut roc_curves = Vec::new();
    for (f, fold_rows) in folds.iter().enumerate() {
        let held_out: std::collections::HashSet<usize> = fold_rows.iter().copied().collect();
        let train_rows: Vec<usize> = (0..matrix.n_rows())
            .filter(|i| !held_out.contains(i))
            .collect();
        let report = final_fit_and_test(
            &matrix.subset(&train_rows),
            &matrix.subset(fold_rows),
            &standardize,
            &hyperparameters,
            Some(0.5),
            1000 + f as u64,
        )?;
        println!(
            "fold {f}: {} held-out rows ({} positives), ROC AUC {:.4}, PR AUC {:.4}",
            fold_rows.len(),
            fold_rows.iter().filter(|&&i| matrix.labels()[i]).count(),
            report.roc.auc,
            report.pr.auc
        );
        roc_curves.push(report.roc);
    }

    let averaged = average_curves(&roc_curves)?;
    println!(
        "\naveraged ROC: mean AUC {:.4} (sd {:.4}) over {k} folds; {} grid points",
        averaged.mean_auc,
        averaged.std_auc,
        averaged.points.len()
    );
    Ok(())
}
