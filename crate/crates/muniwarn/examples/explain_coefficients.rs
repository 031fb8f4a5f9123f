//! Turn a fitted logistic model into a ranked coefficient report: which
//! standardized indicators push the distress probability up, which pull it
//! down, and how the one-hot levels group under their parent field.

use muniwarn::analysis::coefficient_report;
use muniwarn::features::{build_matrix, standardizable_columns, Standardizer, LAG_FEATURES};
use muniwarn::models::{train, ClassWeights, Hyperparameters, ModelFamily};
use muniwarn::synth::{generate, SynthConfig};

fn main() -> muniwarn::Result<()> {
    let config = SynthConfig {
        n_municipalities: 500,
        seed: 2,
        ..SynthConfig::default()
    };
    let (panel, _, truth) = generate(&config)?;
    let matrix = build_matrix(&panel, &LAG_FEATURES)?;
    let standardizer = Standardizer::fit(&matrix, &standardizable_columns(&matrix))?;
    let standardized = standardizer.apply(&matrix)?;
    let weights = ClassWeights::balanced(standardized.labels())?;
    let model = train(
        &standardized,
        &weights,
        &Hyperparameters::default_for(ModelFamily::Logistic),
        55,
    )?;

    let report = coefficient_report(&model)?;
    println!(
        "intercept {:+.4}; coefficients by signed value:",
        report.intercept
    );
    for entry in &report.entries {
        let planted = truth
            .coefficients
            .iter()
            .find(|(name, _)| name == &entry.column)
            .map(|(_, v)| *v)
            .unwrap_or(0.0);
        println!(
            "  {:+8.4}  {:<42} (group: {:<20} planted {:+.2})",
            entry.value,
            entry.column,
            entry.group.as_deref().unwrap_or("-"),
            planted
        );
    }
    Ok(())
}
