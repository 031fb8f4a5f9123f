//! Walk the feature pipeline on a small panel: lagged deltas, one-hot
//! encoding, the assembled design matrix, and train-only standardization.

use muniwarn::features::{
    build_matrix, lagged_deltas, standardizable_columns, Standardizer, LAG_FEATURES,
};
use muniwarn::synth::{generate, SynthConfig};

fn main() -> muniwarn::Result<()> {
    let config = SynthConfig {
        n_municipalities: 60,
        seed: 4,
        ..SynthConfig::default()
    };
    let (panel, _, _) = generate(&config)?;

    // Year-over-year differences for the designated indicators; a
    // municipality's first observed year has no predecessor and gets 0.
    let deltas = lagged_deltas(&panel, &LAG_FEATURES)?;
    println!(
        "deltas: {} columns over {} rows, {} first-year values imputed to 0",
        deltas.names.len(),
        panel.len(),
        deltas.first_year_imputed
    );

    let matrix = build_matrix(&panel, &LAG_FEATURES)?;
    println!(
        "matrix: {} rows x {} columns:",
        matrix.n_rows(),
        matrix.n_cols()
    );
    for (i, name) in matrix.column_names().iter().enumerate() {
        println!("  [{i:2}] {name}");
    }

    // Standardization covers only the continuous and delta columns; the 0/1
    // columns keep their raw values. Fitting on one matrix and applying to
    // another is what keeps held-out data leak-free.
    let continuous = standardizable_columns(&matrix);
    let standardizer = Standardizer::fit(&matrix, &continuous)?;
    let standardized = standardizer.apply(&matrix)?;
    let j = matrix.column_index("indebtedness_per_capita").unwrap();
    let raw_mean: f64 = (0..matrix.n_rows())
        .map(|i| matrix.value(i, j))
        .sum::<f64>()
        / matrix.n_rows() as f64;
    let std_mean: f64 = (0..standardized.n_rows())
        .map(|i| standardized.value(i, j))
        .sum::<f64>()
        / standardized.n_rows() as f64;
    println!(
        "standardized {} of {} columns; indebtedness_per_capita mean {raw_mean:.2} -> {std_mean:.2e}",
        continuous.len(),
        matrix.n_cols()
    );
    Ok(())
}
