//! CSV ingestion: the financial panel, the distress-event archive, label and
//! risk merging, and cleaning.
//!
//! Parsing is lenient about row content and strict about structure: a file
//! without the mandatory columns is an error, while a malformed row becomes
//! a [`ParseDiagnostic`] carrying its line number and is skipped — never
//! silently. Missing numeric values (`""`, `"n/a"`, …) are carried as `NaN`
//! so [`clean`] can impute them with column medians.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::domain::{
    bankruptcy_risk_of, demographic_category_of, DemographicCategory, DistressEventKind, GeoArea,
    MunicipalityYearRecord, Panel, RawIndicators, Year, YearRange,
};
use crate::{Error, Result};

/// Mandatory columns of the panel file, in canonical order.
pub const PANEL_COLUMNS: [&str; 13] = [
    "municipality_id",
    "year",
    "population",
    "geo_area",
    "incidence_of_investment",
    "financial_autonomy_degree",
    "indebtedness_per_capita",
    "total_investment_financed_by_debt",
    "rigid_expenditure",
    "expense_management_speed",
    "collecting_capacity",
    "extra_budgetary_debts",
    "off_balance_sheet_debts",
];

/// Mandatory columns of the archive file.
pub const ARCHIVE_COLUMNS: [&str; 3] = ["municipality_id", "year", "event_kind"];

/// How to read a panel file: the field delimiter plus optional renames from
/// canonical column names to the names actually present in the header.
#[derive(Debug, Clone)]
pub struct PanelSchema {
    pub delimiter: u8,
    /// canonical name -> header name, for files with nonstandard headers.
    pub renames: BTreeMap<String, String>,
}

impl Default for PanelSchema {
    fn default() -> Self {
        PanelSchema {
            delimiter: b',',
            renames: BTreeMap::new(),
        }
    }
}

impl PanelSchema {
    fn header_name<'a>(&'a self, canonical: &'a str) -> &'a str {
        self.renames
            .get(canonical)
            .map(String::as_str)
            .unwrap_or(canonical)
    }
}

/// Severity of a per-row parse finding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiagnosticKind {
    /// Row skipped: a structural field could not be parsed.
    Malformed,
    /// Row kept: a numeric value is missing and was carried as `NaN`.
    MissingValue,
}

/// One finding about one input row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseDiagnostic {
    pub line: u64,
    pub kind: DiagnosticKind,
    pub message: String,
}

/// A parsed panel row before labels and risk levels are attached.
///
/// `population: None` and `NaN` indicator values survive until [`clean`].
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateRecord {
    pub municipality_id: String,
    pub year: Year,
    pub population: Option<u64>,
    pub geo_area: GeoArea,
    pub incidence_of_investment: f64,
    pub financial_autonomy_degree: f64,
    pub indebtedness_per_capita: f64,
    pub total_investment_financed_by_debt: f64,
    pub rigid_expenditure: f64,
    pub expense_management_speed: f64,
    pub collecting_capacity: f64,
    pub extra_budgetary_debts: f64,
    pub off_balance_sheet_debts: bool,
}

fn is_missing_marker(text: &str) -> bool {
    let t = text.trim();
    t.is_empty()
        || t.eq_ignore_ascii_case("n/a")
        || t.eq_ignore_ascii_case("na")
        || t.eq_ignore_ascii_case("null")
}

fn parse_bool_field(text: &str) -> Option<bool> {
    match text.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" => Some(true),
        "0" | "false" | "no" => Some(false),
        _ => None,
    }
}

/// Read the financial panel from `source`.
///
/// Returns the well-formed candidate rows plus diagnostics for everything
/// else. A header missing a mandatory column is an error; malformed rows are
/// skipped with a [`DiagnosticKind::Malformed`] entry, and missing numeric
/// values are carried as `NaN` with a [`DiagnosticKind::MissingValue`] entry.
pub fn parse_financial_panel<R: Read>(
    source: R,
    schema: &PanelSchema,
) -> Result<(Vec<CandidateRecord>, Vec<ParseDiagnostic>)> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .flexible(true)
        .from_reader(source);

    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: format!("unreadable header: {e}"),
        })?
        .clone();
    let mut index = BTreeMap::new();
    for canonical in PANEL_COLUMNS {
        let wanted = schema.header_name(canonical);
        match headers.iter().position(|h| h.trim() == wanted) {
            Some(pos) => {
                index.insert(canonical, pos);
            }
            None => return Err(Error::MissingColumn(wanted.to_string())),
        }
    }

    let mut rows = Vec::new();
    let mut diagnostics = Vec::new();
    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                diagnostics.push(ParseDiagnostic {
                    line,
                    kind: DiagnosticKind::Malformed,
                    message: format!("unreadable row: {e}"),
                });
                continue;
            }
        };
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |canonical: &str| record.get(index[canonical]).unwrap_or("");

        let municipality_id = field("municipality_id").trim().to_string();
        if municipality_id.is_empty() {
            diagnostics.push(ParseDiagnostic {
                line,
                kind: DiagnosticKind::Malformed,
                message: "empty municipality_id".into(),
            });
            continue;
        }
        let year = match field("year").trim().parse::<i32>() {
            Ok(y) => Year(y),
            Err(_) => {
                diagnostics.push(ParseDiagnostic {
                    line,
                    kind: DiagnosticKind::Malformed,
                    message: format!("unparseable year `{}`", field("year")),
                });
                continue;
            }
        };
        let geo_area = match GeoArea::parse(field("geo_area")) {
            Some(a) => a,
            None => {
                diagnostics.push(ParseDiagnostic {
                    line,
                    kind: DiagnosticKind::Malformed,
                    message: format!("unknown geo_area `{}`", field("geo_area")),
                });
                continue;
            }
        };
        let off_balance = field("off_balance_sheet_debts");
        let off_balance_sheet_debts = match parse_bool_field(off_balance) {
            Some(b) => b,
            None => {
                diagnostics.push(ParseDiagnostic {
                    line,
                    kind: DiagnosticKind::Malformed,
                    message: format!("unparseable off_balance_sheet_debts `{off_balance}`"),
                });
                continue;
            }
        };
        let population = {
            let raw = field("population");
            if is_missing_marker(raw) {
                diagnostics.push(ParseDiagnostic {
                    line,
                    kind: DiagnosticKind::MissingValue,
                    message: "missing population".into(),
                });
                None
            } else {
                match raw.trim().parse::<u64>() {
                    Ok(p) => Some(p),
                    Err(_) => {
                        diagnostics.push(ParseDiagnostic {
                            line,
                            kind: DiagnosticKind::MissingValue,
                            message: format!("unparseable population `{raw}`"),
                        });
                        None
                    }
                }
            }
        };

        let mut numeric = |canonical: &str| -> f64 {
            let raw = field(canonical);
            if is_missing_marker(raw) {
                diagnostics.push(ParseDiagnostic {
                    line,
                    kind: DiagnosticKind::MissingValue,
                    message: format!("missing {canonical}"),
                });
                return f64::NAN;
            }
            match raw.trim().parse::<f64>() {
                Ok(v) => v,
                Err(_) => {
                    diagnostics.push(ParseDiagnostic {
                        line,
                        kind: DiagnosticKind::MissingValue,
                        message: format!("unparseable {canonical} `{raw}`"),
                    });
                    f64::NAN
                }
            }
        };

        rows.push(CandidateRecord {
            incidence_of_investment: numeric("incidence_of_investment"),
            financial_autonomy_degree: numeric("financial_autonomy_degree"),
            indebtedness_per_capita: numeric("indebtedness_per_capita"),
            total_investment_financed_by_debt: numeric("total_investment_financed_by_debt"),
            rigid_expenditure: numeric("rigid_expenditure"),
            expense_management_speed: numeric("expense_management_speed"),
            collecting_capacity: numeric("collecting_capacity"),
            extra_budgetary_debts: numeric("extra_budgetary_debts"),
            municipality_id,
            year,
            population,
            geo_area,
            off_balance_sheet_debts,
        });
    }
    Ok((rows, diagnostics))
}

/// One entry of the distress archive.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DistressEvent {
    pub municipality_id: String,
    pub year: Year,
    pub kind: DistressEventKind,
}

/// The historical record of pre-distress procedures and bankruptcy
/// declarations, deduplicated and sorted by `(municipality, year, kind)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DistressArchive {
    events: Vec<DistressEvent>,
}

impl DistressArchive {
    pub fn new(mut events: Vec<DistressEvent>) -> Self {
        events.sort();
        events.dedup();
        DistressArchive { events }
    }

    pub fn events(&self) -> &[DistressEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Event kinds of one municipality strictly before `year`, in
    /// chronological order (pre-distress sorts before bankruptcy within the
    /// same year).
    pub fn history_before(&self, municipality_id: &str, year: Year) -> Vec<DistressEventKind> {
        self.events
            .iter()
            .filter(|e| e.municipality_id == municipality_id && e.year < year)
            .map(|e| e.kind)
            .collect()
    }

    /// Was distress declared for this municipality in exactly this year?
    pub fn bankruptcy_in(&self, municipality_id: &str, year: Year) -> bool {
        self.events.iter().any(|e| {
            e.municipality_id == municipality_id
                && e.year == year
                && e.kind == DistressEventKind::Bankruptcy
        })
    }

    /// Distinct municipalities appearing in the archive.
    pub fn municipalities(&self) -> BTreeSet<&str> {
        self.events
            .iter()
            .map(|e| e.municipality_id.as_str())
            .collect()
    }
}

fn parse_event_kind(text: &str) -> Option<DistressEventKind> {
    match text.trim().to_ascii_lowercase().replace('_', "-").as_str() {
        "pre-distress" | "predistress" => Some(DistressEventKind::PreDistress),
        "bankruptcy" => Some(DistressEventKind::Bankruptcy),
        _ => None,
    }
}

/// Read the distress archive from `source`.
///
/// The event vocabulary is closed: anything other than `pre-distress` or
/// `bankruptcy` is a hard parse error. Duplicate `(municipality, year, kind)`
/// entries collapse to one.
pub fn parse_distress_archive<R: Read>(source: R, delimiter: u8) -> Result<DistressArchive> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: format!("unreadable header: {e}"),
        })?
        .clone();
    let mut index = BTreeMap::new();
    for canonical in ARCHIVE_COLUMNS {
        match headers.iter().position(|h| h.trim() == canonical) {
            Some(pos) => {
                index.insert(canonical, pos);
            }
            None => return Err(Error::MissingColumn(canonical.to_string())),
        }
    }

    let mut events = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: format!("unreadable row: {e}"),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |canonical: &str| record.get(index[canonical]).unwrap_or("");

        let municipality_id = field("municipality_id").trim().to_string();
        if municipality_id.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty municipality_id".into(),
            });
        }
        let year = field("year")
            .trim()
            .parse::<i32>()
            .map_err(|_| Error::Parse {
                line,
                message: format!("unparseable year `{}`", field("year")),
            })?;
        let kind = parse_event_kind(field("event_kind")).ok_or_else(|| Error::Parse {
            line,
            message: format!("unknown event kind `{}`", field("event_kind")),
        })?;
        events.push(DistressEvent {
            municipality_id,
            year: Year(year),
            kind,
        });
    }
    Ok(DistressArchive::new(events))
}

/// Side information from [`merge_panel`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MergeReport {
    /// Candidate rows outside the observation window, dropped.
    pub out_of_range_dropped: usize,
    /// Municipalities referenced by the archive but absent from the panel
    /// (a warning, not a fault: the archive spans more years than the panel).
    pub unknown_archive_municipalities: Vec<String>,
}

/// Attach labels and risk levels to candidate rows.
///
/// For each row at year `t`: the label is 1 exactly when the archive holds a
/// bankruptcy declared at `(municipality, t)`; the bankruptcy-risk feature is
/// computed from archive events strictly before `t`, so the feature never
/// peeks at the year it describes. Rows outside `year_range` are dropped and
/// counted. Row order is preserved.
pub fn merge_panel(
    rows: &[CandidateRecord],
    archive: &DistressArchive,
    year_range: YearRange,
) -> (Panel, MergeReport) {
    let mut report = MergeReport::default();
    let mut records = Vec::with_capacity(rows.len());
    for row in rows {
        if !year_range.contains(row.year) {
            report.out_of_range_dropped += 1;
            continue;
        }
        let (population, demographic_category) = match row.population {
            // 0 marks a missing count; cleaning drops such rows. The category
            // placeholder is never used because the row cannot survive.
            None => (0, DemographicCategory::I),
            Some(p) if p < 1 => (0, DemographicCategory::I),
            Some(p) => (
                p,
                demographic_category_of(p).expect("positive population maps to a band"),
            ),
        };
        let history = archive.history_before(&row.municipality_id, row.year);
        let record = MunicipalityYearRecord {
            municipality_id: row.municipality_id.clone(),
            year: row.year,
            indicators: RawIndicators {
                population,
                geo_area: row.geo_area,
                demographic_category,
                bankruptcy_risk: bankruptcy_risk_of(&history),
                incidence_of_investment: row.incidence_of_investment,
                financial_autonomy_degree: row.financial_autonomy_degree,
                indebtedness_per_capita: row.indebtedness_per_capita,
                total_investment_financed_by_debt: row.total_investment_financed_by_debt,
                rigid_expenditure: row.rigid_expenditure,
                expense_management_speed: row.expense_management_speed,
                collecting_capacity: row.collecting_capacity,
                extra_budgetary_debts: row.extra_budgetary_debts,
                off_balance_sheet_debts: row.off_balance_sheet_debts,
            },
            label: Some(archive.bankruptcy_in(&row.municipality_id, row.year)),
        };
        records.push(record);
    }

    let panel_ids: BTreeSet<&str> = records.iter().map(|r| r.municipality_id.as_str()).collect();
    report.unknown_archive_municipalities = archive
        .municipalities()
        .into_iter()
        .filter(|id| !panel_ids.contains(id))
        .map(str::to_string)
        .collect();

    (Panel::new(records, year_range), report)
}

/// Knobs for [`clean`]. Median imputation is the only strategy offered; the
/// switches exist to turn steps off in experiments.
#[derive(Debug, Clone)]
pub struct CleanPolicy {
    pub drop_duplicates: bool,
    pub impute_missing_numeric: bool,
}

impl Default for CleanPolicy {
    fn default() -> Self {
        CleanPolicy {
            drop_duplicates: true,
            impute_missing_numeric: true,
        }
    }
}

/// What [`clean`] did, suitable for serialization next to the cleaned data.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub rows_read: usize,
    pub rows_kept: usize,
    /// Drop counts by reason (`duplicate`, `missing_population`,
    /// `missing_label`).
    pub rows_dropped: BTreeMap<String, usize>,
    /// Imputed value counts per column.
    pub values_imputed: BTreeMap<String, usize>,
    /// Medians used for imputation, per column.
    pub imputation_medians: BTreeMap<String, f64>,
    /// Columns that could not be imputed because no finite value exists.
    pub unimputable_columns: Vec<String>,
    pub duplicates_removed: usize,
}

impl CleaningReport {
    pub fn rows_dropped_total(&self) -> usize {
        self.rows_dropped.values().sum()
    }
}

/// Median of the finite values; `None` when there are none.
fn finite_median(values: &mut Vec<f64>) -> Option<f64> {
    values.retain(|v| v.is_finite());
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

/// Establish the panel's structural rules.
///
/// Removes duplicate `(municipality, year)` rows keeping the first
/// occurrence, drops rows with a missing label or population, and imputes
/// missing continuous indicators with the column median computed over the
/// whole panel. Every drop and imputation is counted in the report;
/// `rows_read == rows_kept + dropped` always holds. An empty result is an
/// error.
pub fn clean(panel: Panel, policy: &CleanPolicy) -> Result<(Panel, CleaningReport)> {
    use crate::domain::CONTINUOUS_INDICATORS;

    let mut report = CleaningReport {
        rows_read: panel.records.len(),
        ..Default::default()
    };
    let year_range = panel.year_range;

    let mut seen = BTreeSet::new();
    let mut kept = Vec::with_capacity(panel.records.len());
    for record in panel.records {
        if policy.drop_duplicates && !seen.insert((record.municipality_id.clone(), record.year)) {
            *report.rows_dropped.entry("duplicate".into()).or_default() += 1;
            continue;
        }
        if record.label.is_none() {
            *report
                .rows_dropped
                .entry("missing_label".into())
                .or_default() += 1;
            continue;
        }
        if record.indicators.population < 1 {
            *report
                .rows_dropped
                .entry("missing_population".into())
                .or_default() += 1;
            continue;
        }
        kept.push(record);
    }
    report.duplicates_removed = report.rows_dropped.get("duplicate").copied().unwrap_or(0);

    if policy.impute_missing_numeric {
        for column in CONTINUOUS_INDICATORS {
            let mut values: Vec<f64> = kept
                .iter()
                .map(|r| r.indicators.continuous(column).unwrap())
                .collect();
            let missing = values.iter().filter(|v| !v.is_finite()).count();
            if missing == 0 {
                continue;
            }
            match finite_median(&mut values) {
                Some(median) => {
                    for record in &mut kept {
                        if !record.indicators.continuous(column).unwrap().is_finite() {
                            record.indicators.set_continuous(column, median);
                        }
                    }
                    report.values_imputed.insert(column.into(), missing);
                    report.imputation_medians.insert(column.into(), median);
                }
                None => report.unimputable_columns.push(column.into()),
            }
        }
    }

    report.rows_kept = kept.len();
    if kept.is_empty() {
        return Err(Error::EmptyDataset(
            "no rows survived cleaning (all dropped for missing labels/population or duplicates)"
                .into(),
        ));
    }
    Ok((Panel::new(kept, year_range), report))
}

fn csv_failure(context: &str, error: csv::Error) -> Error {
    if error.is_io_error() {
        match error.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::InvalidInput(format!("{context}: {other:?}")),
        }
    } else {
        Error::InvalidInput(format!("{context}: {error}"))
    }
}

/// Render a panel in the exact [`PANEL_COLUMNS`] schema.
///
/// Floats use the shortest round-tripping decimal form, so parsing the
/// output with [`parse_financial_panel`] recovers every value bit for bit.
/// Labels, demographic categories, and risk levels are deliberately absent:
/// they are derived fields, reattached by [`merge_panel`].
pub fn panel_to_csv(panel: &Panel) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(PANEL_COLUMNS)
        .map_err(|e| csv_failure("panel header", e))?;
    for record in &panel.records {
        let ind = &record.indicators;
        let fields = [
            record.municipality_id.clone(),
            record.year.to_string(),
            ind.population.to_string(),
            ind.geo_area.label().to_string(),
            ind.incidence_of_investment.to_string(),
            ind.financial_autonomy_degree.to_string(),
            ind.indebtedness_per_capita.to_string(),
            ind.total_investment_financed_by_debt.to_string(),
            ind.rigid_expenditure.to_string(),
            ind.expense_management_speed.to_string(),
            ind.collecting_capacity.to_string(),
            ind.extra_budgetary_debts.to_string(),
            if ind.off_balance_sheet_debts {
                "1"
            } else {
                "0"
            }
            .to_string(),
        ];
        writer
            .write_record(&fields)
            .map_err(|e| csv_failure("panel row", e))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::InvalidInput(format!("panel writer: {e}")))?;
    String::from_utf8(bytes)
        .map_err(|e| Error::InvalidInput(format!("panel output not UTF-8: {e}")))
}

/// Render a distress archive in the exact [`ARCHIVE_COLUMNS`] schema,
/// one row per event in the archive's sorted order.
pub fn archive_to_csv(archive: &DistressArchive) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(ARCHIVE_COLUMNS)
        .map_err(|e| csv_failure("archive header", e))?;
    for event in archive.events() {
        let fields = [
            event.municipality_id.clone(),
            event.year.to_string(),
            event.kind.label().to_string(),
        ];
        writer
            .write_record(&fields)
            .map_err(|e| csv_failure("archive row", e))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::InvalidInput(format!("archive writer: {e}")))?;
    String::from_utf8(bytes)
        .map_err(|e| Error::InvalidInput(format!("archive output not UTF-8: {e}")))
}
