//! Post-hoc analyses: forward tracking of flagged-but-not-distressed
//! municipalities, and coefficient explainability for linear models.
//!
//! The forward analysis asks the question that matters for an early-warning
//! deployment: of the municipalities the model flagged at some anchor year
//! that were *not* distressed then, how many actually fell into distress
//! within the following years? A high fraction reclassifies "false" alarms
//! as early alarms. The analysis only ever consults labels strictly after
//! the anchor year, so it cannot leak the outcome it is measuring.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::domain::{Panel, Year};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::models::{apply_threshold, TrainedModel};

/// Default number of years scanned after the anchor year.
pub const DEFAULT_HORIZON: u32 = 4;

/// One false positive of the anchor-year slice and what became of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FalsePositiveDetail {
    pub municipality_id: String,
    pub score: f64,
    /// Earliest distress label inside the horizon window, if any.
    pub first_later_distress_year: Option<Year>,
    /// How many of the horizon years have a panel record for this
    /// municipality (distinct years).
    pub later_years_observed: u32,
}

/// Outcome of scoring one anchor year and following its false positives
/// forward through the panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardFpReport {
    pub anchor_year: Year,
    pub horizon: u32,
    pub threshold: f64,
    /// Rows in the anchor-year slice that were scored.
    pub n_evaluated: usize,
    pub n_predicted_positive: usize,
    pub n_true_positive: usize,
    pub n_false_positive: usize,
    /// False positives with a distress label within the horizon window.
    pub n_fp_later_distressed: usize,
    /// `n_fp_later_distressed / n_false_positive`; 0 when there are no
    /// false positives, with `degenerate` set.
    pub fraction_later_distressed: f64,
    pub degenerate: bool,
    /// False positives observed in fewer than `horizon` later years, so
    /// their "never distressed" verdict is right-censored.
    pub n_fp_incomplete_coverage: usize,
    pub false_positives: Vec<FalsePositiveDetail>,
}

impl ForwardFpReport {
    /// Detail rows as a delimiter-separated table.
    pub fn table(&self) -> String {
        let mut out =
            String::from("municipality_id,score,first_later_distress_year,later_years_observed\n");
        for row in &self.false_positives {
            let year = row
                .first_later_distress_year
                .map(|y| y.to_string())
                .unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{}\n",
                row.municipality_id, row.score, year, row.later_years_observed
            ));
        }
        out
    }
}

/// Score the anchor-year rows of `matrix` and follow every false positive
/// through the next `horizon` years of `panel`.
///
/// `matrix` must be in the model's feature space (same columns, same
/// standardization as training); typically it is the held-out test matrix.
/// A false positive is a row predicted positive whose anchor-year label is
/// false; it counts as later-distressed if the same municipality has a
/// distress label in `(anchor, anchor + horizon]`. Labels at or before the
/// anchor year are never consulted. Each municipality counts once, with its
/// earliest later distress year recorded.
pub fn forward_fp_analysis(
    model: &TrainedModel,
    matrix: &FeatureMatrix,
    panel: &Panel,
    anchor_year: Year,
    horizon: u32,
    threshold: Option<f64>,
) -> Result<ForwardFpReport> {
    if horizon == 0 {
        return Err(Error::InvalidInput(
            "forward horizon must be at least 1 year".into(),
        ));
    }
    let anchor_rows: Vec<usize> = matrix
        .row_keys()
        .iter()
        .enumerate()
        .filter(|(_, (_, year))| *year == anchor_year)
        .map(|(i, _)| i)
        .collect();
    if anchor_rows.is_empty() {
        return Err(Error::InvalidInput(format!(
            "anchor year {anchor_year} has no rows in the feature matrix"
        )));
    }
    let slice = matrix.subset(&anchor_rows);
    let scores = model.predict_scores(&slice)?;
    let threshold = threshold.unwrap_or_else(|| model.default_threshold());
    let predicted = apply_threshold(&scores, threshold);

    let mut n_true_positive = 0;
    let mut candidates: Vec<(usize, &str, f64)> = Vec::new();
    for i in 0..slice.n_rows() {
        if !predicted[i] {
            continue;
        }
        if slice.labels()[i] {
            n_true_positive += 1;
        } else {
            candidates.push((i, slice.row_keys()[i].0.as_str(), scores[i]));
        }
    }

    // One pass over the panel collects, per false-positive municipality,
    // the distinct later years observed and the earliest later distress.
    let mut outcomes: HashMap<&str, (Vec<Year>, Option<Year>)> = candidates
        .iter()
        .map(|&(_, id, _)| (id, (Vec::new(), None)))
        .collect();
    let window_end = anchor_year.0 + horizon as i32;
    for record in &panel.records {
        if record.year.0 <= anchor_year.0 || record.year.0 > window_end {
            continue;
        }
        let Some((observed, first_distress)) = outcomes.get_mut(record.municipality_id.as_str())
        else {
            continue;
        };
        if !observed.contains(&record.year) {
            observed.push(record.year);
        }
        if record.label == Some(true)
            && first_distress.map_or(true, |current| record.year < current)
        {
            *first_distress = Some(record.year);
        }
    }

    let mut false_positives = Vec::with_capacity(candidates.len());
    let mut n_fp_later_distressed = 0;
    let mut n_fp_incomplete_coverage = 0;
    for (_, id, score) in &candidates {
        let (observed, first_distress) = &outcomes[id];
        if first_distress.is_some() {
            n_fp_later_distressed += 1;
        }
        if (observed.len() as u32) < horizon {
            n_fp_incomplete_coverage += 1;
        }
        false_positives.push(FalsePositiveDetail {
            municipality_id: (*id).to_string(),
            score: *score,
            first_later_distress_year: *first_distress,
            later_years_observed: observed.len() as u32,
        });
    }

    let n_false_positive = false_positives.len();
    let degenerate = n_false_positive == 0;
    let fraction_later_distressed = if degenerate {
        0.0
    } else {
        n_fp_later_distressed as f64 / n_false_positive as f64
    };

    Ok(ForwardFpReport {
        anchor_year,
        horizon,
        threshold,
        n_evaluated: slice.n_rows(),
        n_predicted_positive: n_true_positive + n_false_positive,
        n_true_positive,
        n_false_positive,
        n_fp_later_distressed,
        fraction_later_distressed,
        degenerate,
        n_fp_incomplete_coverage,
        false_positives,
    })
}

/// One model coefficient with its column and, for one-hot columns, the
/// categorical field it belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientEntry {
    pub column: String,
    /// `Some(parent)` for columns named `parent=level`.
    pub group: Option<String>,
    pub value: f64,
}

/// A linear model's coefficients ordered by signed value, largest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientReport {
    pub entries: Vec<CoefficientEntry>,
    pub intercept: f64,
}

impl CoefficientReport {
    /// Entries as a delimiter-separated table (the intercept is a report
    /// field, not a row).
    pub fn table(&self) -> String {
        let mut out = String::from("column,group,value\n");
        for entry in &self.entries {
            out.push_str(&format!(
                "{},{},{}\n",
                entry.column,
                entry.group.as_deref().unwrap_or(""),
                entry.value
            ));
        }
        out
    }
}

/// Pair a logistic model's coefficients with its column names, sorted by
/// signed value descending (ties keep column order). The intercept is
/// reported separately. Only the logistic family has linear coefficients;
/// any other model is rejected.
pub fn coefficient_report(model: &TrainedModel) -> Result<CoefficientReport> {
    let logistic = match model {
        TrainedModel::Logistic(m) => m,
        other => {
            return Err(Error::InvalidInput(format!(
                "coefficient report requires a logistic model; the {} family has no linear coefficients",
                other.family().name()
            )))
        }
    };
    if logistic.coefficients.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "model has non-finite coefficients".into(),
        ));
    }
    let mut entries: Vec<CoefficientEntry> = logistic
        .columns
        .iter()
        .zip(&logistic.coefficients)
        .map(|(column, &value)| CoefficientEntry {
            column: column.clone(),
            group: column.split_once('=').map(|(parent, _)| parent.to_string()),
            value,
        })
        .collect();
    entries.sort_by(|a, b| b.value.partial_cmp(&a.value).expect("finite coefficients"));
    Ok(CoefficientReport {
        entries,
        intercept: logistic.intercept,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    use crate::domain::{
        BankruptcyRisk, DemographicCategory, GeoArea, MunicipalityYearRecord, RawIndicators,
        YearRange,
    };
    use crate::models::{
        ForestHyperparameters, ForestModel, LogisticHyperparameters, LogisticModel, Tree,
    };

    /// Logistic scorer `sigmoid(x)` over a single column `x`.
    fn unit_model() -> TrainedModel {
        TrainedModel::Logistic(LogisticModel {
            columns: vec!["x".to_string()],
            hyperparameters: LogisticHyperparameters::default(),
            coefficients: vec![1.0],
            intercept: 0.0,
            converged: true,
            metadata: BTreeMap::new(),
        })
    }

    fn record(id: &str, year: i32, label: Option<bool>) -> MunicipalityYearRecord {
        MunicipalityYearRecord {
            municipality_id: id.to_string(),
            year: Year(year),
            indicators: RawIndicators {
                population: 1000,
                geo_area: GeoArea::South,
                demographic_category: DemographicCategory::III,
                bankruptcy_risk: BankruptcyRisk::Level1,
                incidence_of_investment: 0.0,
                financial_autonomy_degree: 0.0,
                indebtedness_per_capita: 0.0,
                total_investment_financed_by_debt: 0.0,
                rigid_expenditure: 0.0,
                expense_management_speed: 0.0,
                collecting_capacity: 0.0,
                extra_budgetary_debts: 0.0,
                off_balance_sheet_debts: false,
            },
            label,
        }
    }

    /// Anchor-year matrix: 10 false positives, 2 true positives, 5 true
    /// negatives under `unit_model` at threshold 0.5.
    fn anchor_matrix() -> FeatureMatrix {
        let mut keys = Vec::new();
        let mut labels = Vec::new();
        let mut data = Vec::new();
        for i in 0..10 {
            keys.push((format!("fp{i}"), Year(2016)));
            labels.push(false);
            data.push(2.0);
        }
        for i in 0..2 {
            keys.push((format!("tp{i}"), Year(2016)));
            labels.push(true);
            data.push(2.0);
        }
        for i in 0..5 {
            keys.push((format!("tn{i}"), Year(2016)));
            labels.push(false);
            data.push(-2.0);
        }
        FeatureMatrix::new(vec!["x".to_string()], keys, labels, data).unwrap()
    }

    /// Panel matching [`anchor_matrix`] labels at 2016, with later years:
    /// fp0..fp2 distressed in 2018, fp3..fp6 fully observed and never
    /// distressed, fp7 seen only in 2017, fp8/fp9 never seen again.
    fn forward_panel() -> Panel {
        let mut records = Vec::new();
        for i in 0..10 {
            records.push(record(&format!("fp{i}"), 2016, Some(false)));
        }
        for i in 0..2 {
            records.push(record(&format!("tp{i}"), 2016, Some(true)));
        }
        for i in 0..5 {
            records.push(record(&format!("tn{i}"), 2016, Some(false)));
        }
        for i in 0..3 {
            records.push(record(&format!("fp{i}"), 2018, Some(true)));
        }
        for i in 3..7 {
            for year in 2017..=2020 {
                records.push(record(&format!("fp{i}"), year, Some(false)));
            }
        }
        records.push(record("fp7", 2017, Some(false)));
        Panel::new(records, YearRange::new(2016, 2020).unwrap())
    }

    #[test]
    fn forward_fraction_matches_constructed_fixture() {
        let report = forward_fp_analysis(
            &unit_model(),
            &anchor_matrix(),
            &forward_panel(),
            Year(2016),
            DEFAULT_HORIZON,
            None,
        )
        .unwrap();

        assert_eq!(report.n_evaluated, 17);
        assert_eq!(report.n_predicted_positive, 12);
        assert_eq!(report.n_true_positive, 2);
        assert_eq!(report.n_false_positive, 10);
        assert_eq!(report.n_fp_later_distressed, 3);
        assert_eq!(report.fraction_later_distressed, 0.3);
        assert!(!report.degenerate);
        assert_eq!(report.threshold, 0.5);
        // fp0..fp2 seen once, fp7 once, fp8/fp9 never: six of ten censored.
        assert_eq!(report.n_fp_incomplete_coverage, 6);
        assert_eq!(report.false_positives.len(), 10);
        assert_eq!(
            report.false_positives[0].first_later_distress_year,
            Some(Year(2018))
        );
        assert_eq!(report.false_positives[3].first_later_distress_year, None);
        assert_eq!(report.false_positives[3].later_years_observed, 4);
        assert_eq!(report.false_positives[9].later_years_observed, 0);
        assert_eq!(
            report.n_true_positive + report.n_false_positive,
            report.n_predicted_positive
        );
    }

    #[test]
    fn zero_false_positives_flag_the_degenerate_fraction() {
        let mut model = unit_model();
        if let TrainedModel::Logistic(m) = &mut model {
            m.intercept = -10.0;
        }
        let report = forward_fp_analysis(
            &model,
            &anchor_matrix(),
            &forward_panel(),
            Year(2016),
            DEFAULT_HORIZON,
            None,
        )
        .unwrap();
        assert_eq!(report.n_false_positive, 0);
        assert_eq!(report.fraction_later_distressed, 0.0);
        assert!(report.degenerate);
        assert!(report.false_positives.is_empty());
    }

    #[test]
    fn labels_at_or_before_the_anchor_are_never_consulted() {
        let baseline = forward_fp_analysis(
            &unit_model(),
            &anchor_matrix(),
            &forward_panel(),
            Year(2016),
            DEFAULT_HORIZON,
            None,
        )
        .unwrap();

        // Distress before and at the anchor year must not count as "later".
        let mut panel = forward_panel();
        panel.records.push(record("fp8", 2015, Some(true)));
        panel.records.push(record("fp9", 2014, Some(true)));
        let report = forward_fp_analysis(
            &unit_model(),
            &anchor_matrix(),
            &panel,
            Year(2016),
            DEFAULT_HORIZON,
            None,
        )
        .unwrap();
        assert_eq!(report, baseline);
    }

    #[test]
    fn horizon_clips_the_window_and_repeat_events_count_once() {
        let mut panel = forward_panel();
        // A second, later event for fp0 must not double-count it, and the
        // recorded year stays the earliest one.
        panel.records.push(record("fp0", 2019, Some(true)));
        // fp8 distressed beyond the horizon: invisible at horizon 1.
        panel.records.push(record("fp8", 2020, Some(true)));

        let wide = forward_fp_analysis(
            &unit_model(),
            &anchor_matrix(),
            &panel,
            Year(2016),
            DEFAULT_HORIZON,
            None,
        )
        .unwrap();
        assert_eq!(wide.n_fp_later_distressed, 4);
        assert_eq!(
            wide.false_positives[0].first_later_distress_year,
            Some(Year(2018))
        );

        let narrow =
            forward_fp_analysis(&unit_model(), &anchor_matrix(), &panel, Year(2016), 1, None)
                .unwrap();
        assert_eq!(narrow.n_fp_later_distressed, 0);
    }

    #[test]
    fn forward_analysis_rejects_bad_inputs() {
        let err = forward_fp_analysis(
            &unit_model(),
            &anchor_matrix(),
            &forward_panel(),
            Year(2019),
            DEFAULT_HORIZON,
            None,
        )
        .unwrap_err();
        assert!(err.to_string().contains("2019"));

        assert!(forward_fp_analysis(
            &unit_model(),
            &anchor_matrix(),
            &forward_panel(),
            Year(2016),
            0,
            None,
        )
        .is_err());
    }

    #[test]
    fn forward_table_lists_false_positives() {
        let report = forward_fp_analysis(
            &unit_model(),
            &anchor_matrix(),
            &forward_panel(),
            Year(2016),
            DEFAULT_HORIZON,
            None,
        )
        .unwrap();
        let table = report.table();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 11);
        assert_eq!(
            lines[0],
            "municipality_id,score,first_later_distress_year,later_years_observed"
        );
        assert!(lines[1].starts_with("fp0,"));
        assert!(lines[1].ends_with(",2018,1"));
    }

    #[test]
    fn coefficients_sort_by_signed_value_with_stable_ties() {
        let model = TrainedModel::Logistic(LogisticModel {
            columns: vec![
                "rigid_expenditure".to_string(),
                "geo_area=south".to_string(),
                "demographic_category=III".to_string(),
                "delta_collecting_capacity".to_string(),
            ],
            hyperparameters: LogisticHyperparameters::default(),
            coefficients: vec![0.5, -1.25, 2.0, 0.5],
            intercept: -0.75,
            converged: true,
            metadata: BTreeMap::new(),
        });
        let report = coefficient_report(&model).unwrap();
        let order: Vec<&str> = report.entries.iter().map(|e| e.column.as_str()).collect();
        assert_eq!(
            order,
            vec![
                "demographic_category=III",
                "rigid_expenditure",
                "delta_collecting_capacity",
                "geo_area=south"
            ]
        );
        assert_eq!(
            report.entries[0].group.as_deref(),
            Some("demographic_category")
        );
        assert_eq!(report.entries[1].group, None);
        assert_eq!(report.intercept, -0.75);

        let mut values: Vec<f64> = report.entries.iter().map(|e| e.value).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(values, vec![-1.25, 0.5, 0.5, 2.0]);
    }

    #[test]
    fn zero_coefficients_keep_column_order() {
        let model = TrainedModel::Logistic(LogisticModel {
            columns: vec!["a".to_string(), "b".to_string(), "c".to_string()],
            hyperparameters: LogisticHyperparameters::default(),
            coefficients: vec![0.0, 0.0, 0.0],
            intercept: 0.0,
            converged: true,
            metadata: BTreeMap::new(),
        });
        let report = coefficient_report(&model).unwrap();
        let order: Vec<&str> = report.entries.iter().map(|e| e.column.as_str()).collect();
        assert_eq!(order, vec!["a", "b", "c"]);
    }

    #[test]
    fn non_logistic_models_are_rejected() {
        let model = TrainedModel::Forest(ForestModel {
            columns: vec!["x".to_string()],
            hyperparameters: ForestHyperparameters::default(),
            trees: vec![Tree::leaf(0.5)],
            metadata: BTreeMap::new(),
        });
        let err = coefficient_report(&model).unwrap_err();
        assert!(err.to_string().contains("forest"));
    }

    #[test]
    fn coefficient_table_renders_groups() {
        let model = TrainedModel::Logistic(LogisticModel {
            columns: vec!["x".to_string(), "geo_area=islands".to_string()],
            hyperparameters: LogisticHyperparameters::default(),
            coefficients: vec![1.5, -0.5],
            intercept: 0.0,
            converged: true,
            metadata: BTreeMap::new(),
        });
        let table = coefficient_report(&model).unwrap().table();
        assert_eq!(
            table,
            "column,group,value\nx,,1.5\ngeo_area=islands,geo_area,-0.5\n"
        );
    }
}
