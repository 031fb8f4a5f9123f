//! Generate synthetic municipal panels: a default one calibrated to a target
//! prevalence, and a wide-margin one whose distressed group is nearly
//! separable. Writes both as CSV next to a ground-truth sidecar.

use muniwarn::ingest::{archive_to_csv, panel_to_csv};
use muniwarn::report::write_json_atomic;
use muniwarn::synth::{generate, SynthConfig};

fn main() -> muniwarn::Result<()> {
    // Default configuration, scaled down for a fast run. The intercept is
    // calibrated by bisection so the expected positive rate matches
    // `target_prevalence` within 2% relative error.
    let config = SynthConfig {
        n_municipalities: 500,
        seed: 11,
        ..SynthConfig::default()
    };
    let (panel, archive, truth) = generate(&config)?;
    println!(
        "default panel: {} records, {} positives (target prevalence {:.5}, expected {:.5})",
        panel.len(),
        panel.positives(),
        truth.target_prevalence,
        truth.expected_prevalence
    );
    println!(
        "archive: {} distress events across {} municipalities",
        archive.events().len(),
        archive
            .events()
            .iter()
            .map(|e| e.municipality_id.as_str())
            .collect::<std::collections::BTreeSet<_>>()
            .len()
    );

    // A margin of 3 noise units pushes the two latent groups far apart, so a
    // well-tuned classifier can reach zero false negatives. Pick a target
    // prevalence representable as a whole number of municipalities: the
    // distressed group is an exact count, not a coin flip per municipality.
    let margin = SynthConfig {
        n_municipalities: 500,
        target_prevalence: 5.0 / 500.0,
        seed: 11,
        ..SynthConfig::with_margin(3.0)
    };
    let (margin_panel, _, margin_truth) = generate(&margin)?;
    println!(
        "margin panel: {} records, {} positives, planted intercept {:.3}",
        margin_panel.len(),
        margin_panel.positives(),
        margin_truth.intercept
    );

    let dir = std::env::temp_dir().join("muniwarn-synthesize-panel");
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("panel.csv"), panel_to_csv(&panel)?)?;
    std::fs::write(dir.join("archive.csv"), archive_to_csv(&archive)?)?;
    write_json_atomic(&dir.join("ground_truth.json"), &truth)?;
    println!(
        "wrote panel.csv, archive.csv, ground_truth.json to {}",
        dir.display()
    );
    Ok(())
}
