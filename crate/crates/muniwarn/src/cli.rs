//! Subcommand runner behind the `muniwarn` binary: one thin dispatch layer
//! wiring data generation, ingestion, feature building, model selection,
//! training, evaluation, and follow-up analysis into the standard workflow.
//!
//! Every subcommand reads its inputs, runs the corresponding library
//! operations in pipeline order (clean → lag → encode → split →
//! standardize-on-train → train → evaluate), writes its artifacts under the
//! output directory, and prints a one-line summary. All artifact files are
//! written atomically (write-then-rename), so an interrupted run never
//! leaves a truncated report behind. Exit codes: `0` success, `1` invalid
//! input or flags, `2` internal fault. Every flag can also be set through an
//! environment variable with the `MUNIWARN_` prefix (for example
//! `MUNIWARN_SEED` for `--seed`).

use std::fs::File;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::analysis::{coefficient_report, forward_fp_analysis};
use crate::domain::{Panel, Year, YearRange};
use crate::eval::{
    average_curves, averaged_curve_table, curve_table, final_fit_and_test, grid_search,
    stratified_kfold, stratified_split, ClassificationMetrics, ConfusionMatrix, Curve, GridSpec,
    PredictionRow,
};
use crate::features::{
    build_matrix, fit_pca, standardizable_columns, FeatureMatrix, Standardizer, LAG_FEATURES,
};
use crate::ingest::{
    archive_to_csv, clean, merge_panel, panel_to_csv, parse_distress_archive,
    parse_financial_panel, CleanPolicy, CleaningReport, MergeReport, PanelSchema, ParseDiagnostic,
};
use crate::models::{train, ClassWeights, Hyperparameters, ModelFamily, TrainedModel};
use crate::report::{write_json_atomic, write_string_atomic};
use crate::seeding;
use crate::synth::{generate, SynthConfig, DEFAULT_SEED};
use crate::{Error, Result};

/// Shared pipeline options, available on every subcommand.
#[derive(Args, Debug, Clone)]
pub struct RunConfig {
    /// Financial panel CSV (one row per municipality-year).
    #[arg(long, global = true, env = "MUNIWARN_PANEL")]
    pub panel: Option<PathBuf>,

    /// Distress-event archive CSV.
    #[arg(long, global = true, env = "MUNIWARN_ARCHIVE")]
    pub archive: Option<PathBuf>,

    /// Directory all artifacts are written into.
    #[arg(long, global = true, env = "MUNIWARN_OUT", default_value = "artifacts")]
    pub out: PathBuf,

    /// Master random seed; every stage derives its own stream from it.
    #[arg(long, global = true, env = "MUNIWARN_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    /// First observation year.
    #[arg(
        long,
        global = true,
        env = "MUNIWARN_FIRST_YEAR",
        default_value_t = 2016
    )]
    pub first_year: i32,

    /// Last observation year (inclusive).
    #[arg(
        long,
        global = true,
        env = "MUNIWARN_LAST_YEAR",
        default_value_t = 2020
    )]
    pub last_year: i32,

    /// Fraction of rows in the training split.
    #[arg(
        long,
        global = true,
        env = "MUNIWARN_TRAIN_FRACTION",
        default_value_t = 0.8
    )]
    pub train_fraction: f64,

    /// Number of cross-validation folds.
    #[arg(long, global = true, env = "MUNIWARN_FOLDS", default_value_t = 5)]
    pub folds: usize,

    /// Decision threshold on the model score.
    #[arg(long, global = true, env = "MUNIWARN_THRESHOLD", default_value_t = 0.5)]
    pub threshold: f64,

    /// Model family: logistic, svm, forest, or gbt.
    #[arg(long, global = true, env = "MUNIWARN_FAMILY", default_value = "logistic",
          value_parser = parse_family)]
    pub family: ModelFamily,

    /// Hyperparameter grid file (JSON value lists); when given, `train` and
    /// `evaluate` pick the best candidate by cross-validated grid search
    /// instead of using the family's defaults.
    #[arg(long, global = true, env = "MUNIWARN_GRID")]
    pub grid: Option<PathBuf>,

    /// Forward-looking horizon, in years, for false-positive follow-up.
    #[arg(long, global = true, env = "MUNIWARN_HORIZON", default_value_t = 4)]
    pub horizon: u32,

    /// Anchor year for false-positive follow-up (default: earliest scored year).
    #[arg(long, global = true, env = "MUNIWARN_ANCHOR_YEAR")]
    pub anchor_year: Option<i32>,

    /// Cap on concurrently evaluated grid-search cells (default: all cores).
    #[arg(long, global = true, env = "MUNIWARN_JOBS")]
    pub jobs: Option<usize>,
}

fn parse_family(text: &str) -> std::result::Result<ModelFamily, String> {
    text.parse().map_err(|e: Error| e.to_string())
}

impl RunConfig {
    /// Reject numeric options outside their documented ranges.
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "--train-fraction must be in (0, 1], got {}",
                self.train_fraction
            )));
        }
        if self.folds < 2 {
            return Err(Error::InvalidInput(format!(
                "--folds must be at least 2, got {}",
                self.folds
            )));
        }
        if !(0.0..=1.0).contains(&self.threshold) || self.threshold.is_nan() {
            return Err(Error::InvalidInput(format!(
                "--threshold must be in [0, 1], got {}",
                self.threshold
            )));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidInput("--horizon must be at least 1".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::InvalidInput("--jobs must be at least 1".into()));
        }
        self.years()?;
        Ok(())
    }

    fn years(&self) -> Result<YearRange> {
        YearRange::new(self.first_year, self.last_year)
    }
}

#[derive(Args, Debug, Clone)]
struct SynthArgs {
    /// Number of municipalities in the generated panel.
    #[arg(long, default_value_t = 7904)]
    municipalities: usize,

    /// Target expected positive rate over all municipality-year records.
    #[arg(long, default_value_t = 416.0 / 39520.0)]
    prevalence: f64,

    /// Separate a distressed group from the rest by this multiple of the
    /// noise scale, making the two classes nearly separable.
    #[arg(long)]
    margin: Option<f64>,

    /// Standard deviation of the idiosyncratic indicator noise.
    #[arg(long, default_value_t = 1.0)]
    noise_scale: f64,
}

#[derive(Args, Debug, Clone)]
struct PredictArgs {
    /// Trained model file (JSON).
    #[arg(long)]
    model: PathBuf,

    /// Standardizer file fitted at training time, applied before scoring.
    #[arg(long)]
    standardizer: Option<PathBuf>,

    /// Pre-built feature matrix CSV; when absent, features are built from
    /// the panel sources.
    #[arg(long)]
    features: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct ExplainArgs {
    /// Trained model file (JSON); must be a logistic model.
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct FpAnalysisArgs {
    /// Trained model file; when given, the whole matrix is scored with it
    /// (paired with --standardizer if training standardized features).
    /// When absent, a model is trained on the training split first and the
    /// held-out split is scored.
    #[arg(long)]
    model: Option<PathBuf>,

    /// Standardizer file matching --model.
    #[arg(long)]
    standardizer: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct PcaArgs {
    /// Number of principal components to keep.
    #[arg(long, default_value_t = 2)]
    components: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic panel, event archive, and ground-truth sidecar.
    Synth(SynthArgs),
    /// Parse, label, and clean the panel sources; write the cleaned panel.
    Ingest,
    /// Build the encoded feature matrix and write it as CSV.
    Featurize,
    /// Cross-validate one model family with fixed hyperparameters.
    Cv,
    /// Rank a hyperparameter grid by cross-validated macro F1.
    Grid,
    /// Fit a model (plus standardizer) on the training split and save both.
    Train,
    /// Train on the split, evaluate once on the held-out test set.
    Evaluate,
    /// Score rows with a saved model.
    Predict(PredictArgs),
    /// Report a logistic model's coefficients, largest first.
    Explain(ExplainArgs),
    /// Follow false positives forward and count later distress.
    FpAnalysis(FpAnalysisArgs),
    /// Project standardized continuous features onto principal components.
    Pca(PcaArgs),
}

/// Command-line interface of the `muniwarn` binary.
#[derive(Parser, Debug)]
#[command(
    name = "muniwarn",
    version,
    about = "Early-warning pipeline for municipal financial distress"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    run: RunConfig,
}

/// Parse the process arguments, run the requested subcommand, and return the
/// process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version are not failures; anything else is a
            // usage error and exits 1 after the usage text.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<String> {
    cli.run.validate()?;
    if let Some(jobs) = cli.run.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::InvalidInput(format!("cannot size the worker pool: {e}")))?;
    }
    std::fs::create_dir_all(&cli.run.out)?;
    let run = &cli.run;
    match &cli.command {
        Command::Synth(args) => cmd_synth(run, args),
        Command::Ingest => cmd_ingest(run),
        Command::Featurize => cmd_featurize(run),
        Command::Cv => cmd_cv(run),
        Command::Grid => cmd_grid(run),
        Command::Train => cmd_train(run),
        Command::Evaluate => cmd_evaluate(run),
        Command::Predict(args) => cmd_predict(run, args),
        Command::Explain(args) => cmd_explain(run, args),
        Command::FpAnalysis(args) => cmd_fp_analysis(run, args),
        Command::Pca(args) => cmd_pca(run, args),
    }
}

fn open_input(path: &Path) -> Result<File> {
    File::open(path)
        .map_err(|e| Error::InvalidInput(format!("cannot open {}: {e}", path.display())))
}

/// Reads a user-supplied JSON artifact. Both an unopenable path and malformed
/// contents are the caller's input at fault, not an internal error.
fn read_input_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot open {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::InvalidInput(format!("cannot parse {}: {e}", path.display())))
}

fn load_model_input(path: &Path) -> Result<TrainedModel> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot open {}: {e}", path.display())))?;
    TrainedModel::from_json(&text)
        .map_err(|e| Error::InvalidInput(format!("cannot parse {}: {e}", path.display())))
}

/// Where a subcommand's panel came from, with the ingestion side reports.
struct LoadedPanel {
    panel: Panel,
    from_files: bool,
    diagnostics: Vec<ParseDiagnostic>,
    merge: MergeReport,
    cleaning: CleaningReport,
}

/// Load the panel from `--panel`/`--archive`; with neither flag, fall back
/// to the default synthetic panel generated from `--seed`.
fn load_panel(run: &RunConfig) -> Result<LoadedPanel> {
    match (&run.panel, &run.archive) {
        (Some(panel_path), Some(archive_path)) => {
            let (rows, diagnostics) =
                parse_financial_panel(open_input(panel_path)?, &PanelSchema::default())?;
            let archive = parse_distress_archive(open_input(archive_path)?, b',')?;
            let (panel, merge) = merge_panel(&rows, &archive, run.years()?);
            let (panel, cleaning) = clean(panel, &CleanPolicy::default())?;
            Ok(LoadedPanel {
                panel,
                from_files: true,
                diagnostics,
                merge,
                cleaning,
            })
        }
        (None, None) => {
            let config = SynthConfig {
                seed: run.seed,
                years: run.years()?,
                ..SynthConfig::default()
            };
            let (panel, _, _) = generate(&config)?;
            Ok(LoadedPanel {
                panel,
                from_files: false,
                diagnostics: Vec::new(),
                merge: MergeReport::default(),
                cleaning: CleaningReport::default(),
            })
        }
        _ => Err(Error::InvalidInput(
            "--panel and --archive must be given together (or neither, to use the default \
             synthetic panel)"
                .into(),
        )),
    }
}

fn source_label(loaded: &LoadedPanel) -> &'static str {
    if loaded.from_files {
        "input files"
    } else {
        "default synthetic panel"
    }
}

/// The chosen hyperparameters: the grid-search winner when `--grid` was
/// given, the family defaults otherwise.
fn resolve_hyperparameters(
    run: &RunConfig,
    train_matrix: &FeatureMatrix,
) -> Result<Hyperparameters> {
    match &run.grid {
        Some(path) => {
            let spec: GridSpec = read_input_json(path)?;
            let standardize = standardizable_columns(train_matrix);
            let search = grid_search(
                train_matrix,
                &standardize,
                &spec,
                run.folds,
                seeding::derive(run.seed, "grid", 0),
            )?;
            Ok(search.best().hyperparameters.clone())
        }
        None => Ok(Hyperparameters::default_for(run.family)),
    }
}

fn predictions_table(rows: &[PredictionRow]) -> String {
    let mut out = String::from("municipality_id,year,label,score,predicted\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.municipality_id, row.year, row.label as u8, row.score, row.predicted as u8
        ));
    }
    out
}

fn cmd_synth(run: &RunConfig, args: &SynthArgs) -> Result<String> {
    let config = SynthConfig {
        n_municipalities: args.municipalities,
        years: run.years()?,
        target_prevalence: args.prevalence,
        seed: run.seed,
        noise_scale: args.noise_scale,
        margin: args.margin,
        ..SynthConfig::default()
    };
    let (panel, archive, truth) = generate(&config)?;
    write_string_atomic(&run.out.join("panel.csv"), &panel_to_csv(&panel)?)?;
    write_string_atomic(&run.out.join("archive.csv"), &archive_to_csv(&archive)?)?;
    write_json_atomic(&run.out.join("ground_truth.json"), &truth)?;
    Ok(format!(
        "synth: wrote {} records ({} positives, {} archive events) to {}",
        panel.len(),
        panel.positives(),
        archive.events().len(),
        run.out.display()
    ))
}

/// Everything `ingest` learned about its inputs, kept next to the data.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct IngestReport {
    records: usize,
    positives: usize,
    diagnostics: Vec<ParseDiagnostic>,
    merge: MergeReport,
    cleaning: CleaningReport,
}

fn cmd_ingest(run: &RunConfig) -> Result<String> {
    if run.panel.is_none() || run.archive.is_none() {
        return Err(Error::InvalidInput(
            "ingest requires both --panel and --archive".into(),
        ));
    }
    let loaded = load_panel(run)?;
    let report = IngestReport {
        records: loaded.panel.len(),
        positives: loaded.panel.positives(),
        diagnostics: loaded.diagnostics,
        merge: loaded.merge,
        cleaning: loaded.cleaning,
    };
    write_string_atomic(
        &run.out.join("cleaned_panel.csv"),
        &panel_to_csv(&loaded.panel)?,
    )?;
    write_json_atomic(&run.out.join("ingest_report.json"), &report)?;
    Ok(format!(
        "ingest: kept {} records ({} positives), {} row diagnostics, {} duplicates removed",
        report.records,
        report.positives,
        report.diagnostics.len(),
        report.cleaning.duplicates_removed
    ))
}

fn cmd_featurize(run: &RunConfig) -> Result<String> {
    let loaded = load_panel(run)?;
    let matrix = build_matrix(&loaded.panel, &LAG_FEATURES)?;
    let path = run.out.join("features.csv");
    let mut buffer = Vec::new();
    matrix.write_csv(&mut buffer, b',')?;
    let text = String::from_utf8(buffer)
        .map_err(|e| Error::InvalidInput(format!("non-UTF-8 feature table: {e}")))?;
    write_string_atomic(&path, &text)?;
    Ok(format!(
        "featurize: {} rows x {} columns from {} -> {}",
        matrix.n_rows(),
        matrix.n_cols(),
        source_label(&loaded),
        path.display()
    ))
}

/// One fold's held-out result inside a [`CvSummary`].
#[derive(Debug, Clone, Serialize, Deserialize)]
struct CvFold {
    fold: usize,
    confusion: ConfusionMatrix,
    metrics: ClassificationMetrics,
    roc_auc: f64,
    pr_auc: f64,
}

/// Cross-validation outcome of one family at fixed hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct CvSummary {
    family: ModelFamily,
    hyperparameters: Hyperparameters,
    folds: usize,
    threshold: f64,
    per_fold: Vec<CvFold>,
    mean_roc_auc: f64,
    sd_roc_auc: f64,
    mean_pr_auc: f64,
    sd_pr_auc: f64,
}

fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, variance.sqrt())
}

fn cmd_cv(run: &RunConfig) -> Result<String> {
    let loaded = load_panel(run)?;
    let matrix = build_matrix(&loaded.panel, &LAG_FEATURES)?;
    let hyperparameters = Hyperparameters::default_for(run.family);
    let standardize = standardizable_columns(&matrix);
    let folds = stratified_kfold(
        matrix.labels(),
        run.folds,
        seeding::derive(run.seed, "cv-folds", 0),
    )?;

    let mut per_fold = Vec::new();
    let mut roc_curves: Vec<Curve> = Vec::new();
    let mut pr_curves: Vec<Curve> = Vec::new();
    for (f, fold_rows) in folds.iter().enumerate() {
        let held_out: std::collections::HashSet<usize> = fold_rows.iter().copied().collect();
        let train_rows: Vec<usize> = (0..matrix.n_rows())
            .filter(|i| !held_out.contains(i))
            .collect();
        let train_matrix = matrix.subset(&train_rows);
        let test_matrix = matrix.subset(fold_rows);
        let report = final_fit_and_test(
            &train_matrix,
            &test_matrix,
            &standardize,
            &hyperparameters,
            Some(run.threshold),
            seeding::derive(run.seed, "cv-fold", f as u64),
        )?;
        per_fold.push(CvFold {
            fold: f,
            confusion: report.confusion,
            metrics: report.metrics.clone(),
            roc_auc: report.roc.auc,
            pr_auc: report.pr.auc,
        });
        roc_curves.push(report.roc);
        pr_curves.push(report.pr);
    }

    let (mean_roc_auc, sd_roc_auc) =
        mean_and_sd(&per_fold.iter().map(|f| f.roc_auc).collect::<Vec<_>>());
    let (mean_pr_auc, sd_pr_auc) =
        mean_and_sd(&per_fold.iter().map(|f| f.pr_auc).collect::<Vec<_>>());
    let summary = CvSummary {
        family: run.family,
        hyperparameters,
        folds: run.folds,
        threshold: run.threshold,
        per_fold,
        mean_roc_auc,
        sd_roc_auc,
        mean_pr_auc,
        sd_pr_auc,
    };
    write_json_atomic(&run.out.join("cv_report.json"), &summary)?;
    write_string_atomic(
        &run.out.join("cv_roc_points.csv"),
        &averaged_curve_table(&average_curves(&roc_curves)?),
    )?;
    write_string_atomic(
        &run.out.join("cv_pr_points.csv"),
        &averaged_curve_table(&average_curves(&pr_curves)?),
    )?;
    Ok(format!(
        "cv: {} over {} folds on {}: mean ROC AUC {:.4} (sd {:.4}), mean PR AUC {:.4} (sd {:.4})",
        run.family,
        run.folds,
        source_label(&loaded),
        mean_roc_auc,
        sd_roc_auc,
        mean_pr_auc,
        sd_pr_auc
    ))
}

fn cmd_grid(run: &RunConfig) -> Result<String> {
    let loaded = load_panel(run)?;
    let matrix = build_matrix(&loaded.panel, &LAG_FEATURES)?;
    let (train_rows, _test_rows) = stratified_split(
        matrix.labels(),
        run.train_fraction,
        seeding::derive(run.seed, "split", 0),
    )?;
    let train_matrix = matrix.subset(&train_rows);
    let spec: GridSpec = match &run.grid {
        Some(path) => read_input_json(path)?,
        None => GridSpec::default_for(run.family),
    };
    let standardize = standardizable_columns(&train_matrix);
    let search = grid_search(
        &train_matrix,
        &standardize,
        &spec,
        run.folds,
        seeding::derive(run.seed, "grid", 0),
    )?;
    write_json_atomic(&run.out.join("grid_results.json"), &search)?;
    write_string_atomic(&run.out.join("grid_table.csv"), &search.table())?;
    let best = search.best();
    Ok(format!(
        "grid: {} candidates on {}; best mean macro F1 {:.4} with {}",
        search.candidates.len(),
        source_label(&loaded),
        best.mean_macro_f1,
        best.hyperparameters.describe()
    ))
}

fn cmd_train(run: &RunConfig) -> Result<String> {
    let loaded = load_panel(run)?;
    let matrix = build_matrix(&loaded.panel, &LAG_FEATURES)?;
    let train_matrix = if run.train_fraction < 1.0 {
        let (train_rows, _) = stratified_split(
            matrix.labels(),
            run.train_fraction,
            seeding::derive(run.seed, "split", 0),
        )?;
        matrix.subset(&train_rows)
    } else {
        matrix
    };
    let hyperparameters = resolve_hyperparameters(run, &train_matrix)?;
    let standardizer = Standardizer::fit(&train_matrix, &standardizable_columns(&train_matrix))?;
    let standardized = standardizer.apply(&train_matrix)?;
    let weights = ClassWeights::balanced(standardized.labels())?;
    let model = train(
        &standardized,
        &weights,
        &hyperparameters,
        seeding::derive(run.seed, "train", 0),
    )?;
    let model_path = run.out.join("model.json");
    write_string_atomic(&model_path, &model.to_json()?)?;
    write_json_atomic(&run.out.join("standardizer.json"), &standardizer)?;
    Ok(format!(
        "train: {} ({}) fitted on {} rows of {} (converged: {}); model.json and \
         standardizer.json written to {}",
        run.family,
        hyperparameters.describe(),
        standardized.n_rows(),
        source_label(&loaded),
        model.converged(),
        run.out.display()
    ))
}

fn cmd_evaluate(run: &RunConfig) -> Result<String> {
    let loaded = load_panel(run)?;
    let matrix = build_matrix(&loaded.panel, &LAG_FEATURES)?;
    let (train_rows, test_rows) = stratified_split(
        matrix.labels(),
        run.train_fraction,
        seeding::derive(run.seed, "split", 0),
    )?;
    let train_matrix = matrix.subset(&train_rows);
    let test_matrix = matrix.subset(&test_rows);
    let hyperparameters = resolve_hyperparameters(run, &train_matrix)?;
    let standardize = standardizable_columns(&train_matrix);
    let report = final_fit_and_test(
        &train_matrix,
        &test_matrix,
        &standardize,
        &hyperparameters,
        Some(run.threshold),
        seeding::derive(run.seed, "evaluate", 0),
    )?;
    write_json_atomic(&run.out.join("evaluation_report.json"), &report)?;
    write_string_atomic(&run.out.join("roc_points.csv"), &curve_table(&report.roc))?;
    write_string_atomic(&run.out.join("pr_points.csv"), &curve_table(&report.pr))?;
    write_string_atomic(
        &run.out.join("predictions.csv"),
        &predictions_table(&report.predictions),
    )?;
    let c = &report.confusion;
    Ok(format!(
        "evaluate: {} on {}: ROC AUC {:.4}, PR AUC {:.4}, confusion tp={} fp={} fn={} tn={} \
         at threshold {}",
        run.family,
        source_label(&loaded),
        report.roc.auc,
        report.pr.auc,
        c.true_positives,
        c.false_positives,
        c.false_negatives,
        c.true_negatives,
        report.threshold
    ))
}

fn load_matrix_for_scoring(run: &RunConfig, args: &PredictArgs) -> Result<FeatureMatrix> {
    match &args.features {
        Some(path) => FeatureMatrix::read_csv(open_input(path)?, b','),
        None => {
            let loaded = load_panel(run)?;
            build_matrix(&loaded.panel, &LAG_FEATURES)
        }
    }
}

fn cmd_predict(run: &RunConfig, args: &PredictArgs) -> Result<String> {
    let model = load_model_input(&args.model)?;
    let mut matrix = load_matrix_for_scoring(run, args)?;
    if let Some(path) = &args.standardizer {
        let standardizer: Standardizer = read_input_json(path)?;
        matrix = standardizer.apply(&matrix)?;
    }
    let scores = model.predict_scores(&matrix)?;
    let predicted = model.predict_labels(&matrix, run.threshold)?;
    let rows: Vec<PredictionRow> = matrix
        .row_keys()
        .iter()
        .zip(matrix.labels())
        .zip(scores.iter().zip(&predicted))
        .map(|(((id, year), &label), (&score, &pred))| PredictionRow {
            municipality_id: id.clone(),
            year: *year,
            label,
            score,
            predicted: pred,
        })
        .collect();
    let flagged = rows.iter().filter(|r| r.predicted).count();
    write_string_atomic(&run.out.join("predictions.csv"), &predictions_table(&rows))?;
    Ok(format!(
        "predict: scored {} rows, {} flagged positive at threshold {}",
        rows.len(),
        flagged,
        run.threshold
    ))
}

fn cmd_explain(run: &RunConfig, args: &ExplainArgs) -> Result<String> {
    let model = load_model_input(&args.model)?;
    let report = coefficient_report(&model)?;
    write_json_atomic(&run.out.join("coefficient_report.json"), &report)?;
    write_string_atomic(&run.out.join("coefficients.csv"), &report.table())?;
    let top = report.entries.first();
    let bottom = report.entries.last();
    Ok(format!(
        "explain: {} coefficients (intercept {:.4}); strongest up {}, strongest down {}",
        report.entries.len(),
        report.intercept,
        top.map(|e| format!("{} ({:+.4})", e.column, e.value))
            .unwrap_or_default(),
        bottom
            .map(|e| format!("{} ({:+.4})", e.column, e.value))
            .unwrap_or_default()
    ))
}

fn earliest_year(matrix: &FeatureMatrix) -> Option<Year> {
    matrix.row_keys().iter().map(|(_, year)| *year).min()
}

fn cmd_fp_analysis(run: &RunConfig, args: &FpAnalysisArgs) -> Result<String> {
    let loaded = load_panel(run)?;
    let matrix = build_matrix(&loaded.panel, &LAG_FEATURES)?;

    let (model, scored) = match &args.model {
        Some(path) => {
            let model = load_model_input(path)?;
            let scored = match &args.standardizer {
                Some(std_path) => {
                    let standardizer: Standardizer = read_input_json(std_path)?;
                    standardizer.apply(&matrix)?
                }
                None => matrix,
            };
            (model, scored)
        }
        None => {
            let (train_rows, test_rows) = stratified_split(
                matrix.labels(),
                run.train_fraction,
                seeding::derive(run.seed, "split", 0),
            )?;
            let train_matrix = matrix.subset(&train_rows);
            let standardizer =
                Standardizer::fit(&train_matrix, &standardizable_columns(&train_matrix))?;
            let train_std = standardizer.apply(&train_matrix)?;
            let weights = ClassWeights::balanced(train_std.labels())?;
            let model = train(
                &train_std,
                &weights,
                &Hyperparameters::default_for(run.family),
                seeding::derive(run.seed, "train", 0),
            )?;
            let test_std = standardizer.apply(&matrix.subset(&test_rows))?;
            (model, test_std)
        }
    };

    let anchor = match run.anchor_year {
        Some(year) => Year(year),
        None => earliest_year(&scored).ok_or_else(|| {
            Error::EmptyDataset("no rows available for false-positive follow-up".into())
        })?,
    };
    let report = forward_fp_analysis(
        &model,
        &scored,
        &loaded.panel,
        anchor,
        run.horizon,
        Some(run.threshold),
    )?;
    write_json_atomic(&run.out.join("fp_report.json"), &report)?;
    write_string_atomic(&run.out.join("fp_details.csv"), &report.table())?;
    Ok(format!(
        "fp-analysis: anchor {} horizon {}: {} false positives, {} later distressed \
         (fraction {:.4}), {} with incomplete follow-up",
        report.anchor_year,
        report.horizon,
        report.n_false_positive,
        report.n_fp_later_distressed,
        report.fraction_later_distressed,
        report.n_fp_incomplete_coverage
    ))
}

fn cmd_pca(run: &RunConfig, args: &PcaArgs) -> Result<String> {
    let loaded = load_panel(run)?;
    let matrix = build_matrix(&loaded.panel, &LAG_FEATURES)?;
    let continuous = matrix.select_columns(&standardizable_columns(&matrix))?;
    let standardizer = Standardizer::fit(&continuous, continuous.column_names())?;
    let standardized = standardizer.apply(&continuous)?;
    let pca = fit_pca(&standardized, args.components)?;
    let projection = pca.project(&standardized)?;

    let mut variance = String::from("component,eigenvalue,variance_ratio,cumulative_ratio\n");
    let mut cumulative = 0.0;
    for (i, (eigenvalue, ratio)) in pca
        .explained_variance
        .iter()
        .zip(&pca.explained_variance_ratio)
        .enumerate()
    {
        cumulative += ratio;
        variance.push_str(&format!("{},{eigenvalue},{ratio},{cumulative}\n", i + 1));
    }

    let mut points = String::from("municipality_id,year,label");
    for i in 1..=args.components {
        points.push_str(&format!(",pc{i}"));
    }
    points.push('\n');
    for (((id, year), &label), row) in standardized
        .row_keys()
        .iter()
        .zip(standardized.labels())
        .zip(&projection)
    {
        points.push_str(&format!("{id},{year},{}", label as u8));
        for value in row {
            points.push_str(&format!(",{value}"));
        }
        points.push('\n');
    }

    write_json_atomic(&run.out.join("pca_model.json"), &pca)?;
    write_string_atomic(&run.out.join("pca_variance.csv"), &variance)?;
    write_string_atomic(&run.out.join("pca_projection.csv"), &points)?;
    Ok(format!(
        "pca: {} components over {} standardized columns explain {:.1}% of variance",
        args.components,
        standardized.n_cols(),
        100.0 * cumulative
    ))
}
