//! Train every model family on the same standardized training data with
//! balanced class weights, then compare their scores on a few rows. All four
//! trainers sit behind one serializable model type.

use muniwarn::features::{build_matrix, standardizable_columns, Standardizer, LAG_FEATURES};
use muniwarn::models::{train, ClassWeights, Hyperparameters, ModelFamily};
use muniwarn::synth::{generate, SynthConfig};

fn main() -> muniwarn::Result<()> {
    let config = SynthConfig {
        n_municipalities: 200,
        seed: 21,
        ..SynthConfig::default()
    };
    let (panel, _, _) = generate(&config)?;
    let matrix = build_matrix(&panel, &LAG_FEATURES)?;
    let standardizer = Standardizer::fit(&matrix, &standardizable_columns(&matrix))?;
    let standardized = standardizer.apply(&matrix)?;

    // Positives are rare, so the loss re-weights classes inversely to their
    // frequency; without this, "always negative" is near-optimal.
    let weights = ClassWeights::balanced(standardized.labels())?;
    println!(
        "class weights: negative {:.3}, positive {:.3}",
        weights.negative, weights.positive
    );

    for family in ModelFamily::ALL {
        let hyperparameters = Hyperparameters::default_for(family);
        let model = train(&standardized, &weights, &hyperparameters, 77)?;
        let scores = model.predict_scores(&standardized)?;
        let mean_positive: f64 = scores
            .iter()
            .zip(standardized.labels())
            .filter(|(_, &y)| y)
            .map(|(s, _)| *s)
            .sum::<f64>()
            / standardized.labels().iter().filter(|&&y| y).count() as f64;
        let mean_negative: f64 = scores
            .iter()
            .zip(standardized.labels())
            .filter(|(_, &y)| !y)
            .map(|(s, _)| *s)
            .sum::<f64>()
            / standardized.labels().iter().filter(|&&y| !y).count() as f64;
        println!(
            "{:<8} ({}): converged={} mean score positives {:+.4} / negatives {:+.4}",
            family.name(),
            hyperparameters.describe(),
            model.converged(),
            mean_positive,
            mean_negative
        );
    }
    Ok(())
}
