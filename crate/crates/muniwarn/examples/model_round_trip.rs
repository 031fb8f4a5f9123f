//! Save and reload models: every family serializes to one versioned JSON
//! envelope, and a reloaded model reproduces its scores bit for bit — which
//! is what makes archived models auditable later.

use muniwarn::features::{build_matrix, standardizable_columns, Standardizer, LAG_FEATURES};
use muniwarn::models::{train, ClassWeights, Hyperparameters, ModelFamily, TrainedModel};
use muniwarn::synth::{generate, SynthConfig};

fn main() -> muniwarn::Result<()> {
    let config = SynthConfig {
        n_municipalities: 150,
        seed: 28,
        ..SynthConfig::default()
    };
    let (panel, _, _) = generate(&config)?;
    let matrix = build_matrix(&panel, &LAG_FEATURES)?;
    let standardizer = Standardizer::fit(&matrix, &standardizable_columns(&matrix))?;
    let standardized = standardizer.apply(&matrix)?;
    let weights = ClassWeights::balanced(standardized.labels())?;

    for family in ModelFamily::ALL {
        let model = train(
            &standardized,
            &weights,
            &Hyperparameters::default_for(family),
            90,
        )?;
        let json = model.to_json()?;
        let reloaded = TrainedModel::from_json(&json)?;
        let before = model.predict_scores(&standardized)?;
        let after = reloaded.predict_scores(&standardized)?;
        let bit_identical = before
            .iter()
            .zip(&after)
            .all(|(a, b)| a.to_bits() == b.to_bits());
        println!(
            "{:<8}: {} bytes serialized, scores bit-identical after reload: {}",
            family.name(),
            json.len(),
            bit_identical
        );
    }
    Ok(())
}
