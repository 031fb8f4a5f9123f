//! Principal component analysis of the standardized continuous indicators:
//! eigenvalue spectrum, cumulative explained variance, and the projection of
//! every municipality-year onto the leading components.

use muniwarn::features::{
    build_matrix, fit_pca, standardizable_columns, Standardizer, LAG_FEATURES,
};
use muniwarn::synth::{generate, SynthConfig};

fn main() -> muniwarn::Result<()> {
    let config = SynthConfig {
        n_municipalities: 400,
        seed: 15,
        ..SynthConfig::default()
    };
    let (panel, _, _) = generate(&config)?;
    let matrix = build_matrix(&panel, &LAG_FEATURES)?;

    // PCA is scale-sensitive, so it runs on the standardized continuous
    // block (levels and deltas), not on the raw units or the 0/1 columns.
    let continuous = matrix.select_columns(&standardizable_columns(&matrix))?;
    let standardizer = Standardizer::fit(&continuous, continuous.column_names())?;
    let standardized = standardizer.apply(&continuous)?;

    let full = fit_pca(&standardized, standardized.n_cols())?;
    println!("component  eigenvalue  ratio    cumulative");
    let mut cumulative = 0.0;
    for (i, (eigenvalue, ratio)) in full
        .explained_variance
        .iter()
        .zip(&full.explained_variance_ratio)
        .enumerate()
    {
        cumulative += ratio;
        println!(
            "  pc{:<6} {eigenvalue:>9.4}  {ratio:>6.4}   {cumulative:>6.4}",
            i + 1
        );
    }

    let pca = fit_pca(&standardized, 2)?;
    let projection = pca.project(&standardized)?;
    println!("\nfirst rows projected onto (pc1, pc2):");
    for (((id, year), label), point) in standardized
        .row_keys()
        .iter()
        .zip(standardized.labels())
        .zip(&projection)
        .take(8)
    {
        println!(
            "  {id} {year} label={} -> ({:+.3}, {:+.3})",
            *label as u8, point[0], point[1]
        );
    }
    Ok(())
}
