//! Core domain types for the municipal distress panel.
//!
//! A panel row is one municipality observed in one year, carrying the raw
//! fiscal indicators plus three derived attributes: the demographic category
//! (a population band), the geographic area, and a bankruptcy-risk level
//! computed from the municipality's distress history. Validation never
//! panics on bad data: [`validate_record`] reports violations as values so
//! callers can decide what to drop.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Calendar year of a panel observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Year(pub i32);

impl fmt::Display for Year {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Inclusive range of panel years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearRange {
    pub first: Year,
    pub last: Year,
}

impl YearRange {
    pub fn new(first: i32, last: i32) -> Result<Self> {
        if first > last {
            return Err(Error::InvalidInput(format!(
                "year range start {first} is after end {last}"
            )));
        }
        Ok(YearRange {
            first: Year(first),
            last: Year(last),
        })
    }

    pub fn contains(&self, year: Year) -> bool {
        self.first <= year && year <= self.last
    }

    pub fn iter(&self) -> impl Iterator<Item = Year> {
        (self.first.0..=self.last.0).map(Year)
    }

    pub fn len(&self) -> usize {
        (self.last.0 - self.first.0 + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false // constructor guarantees first <= last
    }
}

impl Default for YearRange {
    /// The default observation window used throughout: 2016-2020.
    fn default() -> Self {
        YearRange {
            first: Year(2016),
            last: Year(2020),
        }
    }
}

/// Population band of a municipality, ordered I (smallest) to XII (largest).
///
/// Bands are half-open `[lower, upper)` intervals on resident population:
/// category I is below 500, II is `[500, 1000)`, and so on up to XII at
/// 500 000 or more.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DemographicCategory {
    I,
    II,
    III,
    IV,
    V,
    VI,
    VII,
    VIII,
    IX,
    X,
    XI,
    XII,
}

impl DemographicCategory {
    pub const ALL: [DemographicCategory; 12] = [
        DemographicCategory::I,
        DemographicCategory::II,
        DemographicCategory::III,
        DemographicCategory::IV,
        DemographicCategory::V,
        DemographicCategory::VI,
        DemographicCategory::VII,
        DemographicCategory::VIII,
        DemographicCategory::IX,
        DemographicCategory::X,
        DemographicCategory::XI,
        DemographicCategory::XII,
    ];

    /// Lower population bounds of each band; band `i` covers
    /// `[BOUNDS[i], BOUNDS[i+1])`, the last band is unbounded above.
    const LOWER_BOUNDS: [u64; 12] = [
        1, 500, 1_000, 2_000, 3_000, 5_000, 10_000, 20_000, 60_000, 100_000, 250_000, 500_000,
    ];

    /// Ordinal position, 1 for `I` through 12 for `XII`.
    pub fn level(&self) -> u8 {
        Self::ALL.iter().position(|c| c == self).unwrap() as u8 + 1
    }

    pub fn label(&self) -> &'static str {
        match self {
            DemographicCategory::I => "I",
            DemographicCategory::II => "II",
            DemographicCategory::III => "III",
            DemographicCategory::IV => "IV",
            DemographicCategory::V => "V",
            DemographicCategory::VI => "VI",
            DemographicCategory::VII => "VII",
            DemographicCategory::VIII => "VIII",
            DemographicCategory::IX => "IX",
            DemographicCategory::X => "X",
            DemographicCategory::XI => "XI",
            DemographicCategory::XII => "XII",
        }
    }
}

impl fmt::Display for DemographicCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Map a resident count to its demographic category.
///
/// Returns an error for a population below 1; every valid population maps to
/// exactly one band.
pub fn demographic_category_of(population: u64) -> Result<DemographicCategory> {
    if population < 1 {
        return Err(Error::InvalidInput(format!(
            "population must be at least 1, got {population}"
        )));
    }
    let idx = DemographicCategory::LOWER_BOUNDS
        .iter()
        .rposition(|&lower| population >= lower)
        .expect("population >= 1 is covered by the first band");
    Ok(DemographicCategory::ALL[idx])
}

/// Macro-area of the country a municipality belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeoArea {
    NorthWest,
    NorthEast,
    Center,
    South,
    Islands,
}

impl GeoArea {
    pub const ALL: [GeoArea; 5] = [
        GeoArea::NorthWest,
        GeoArea::NorthEast,
        GeoArea::Center,
        GeoArea::South,
        GeoArea::Islands,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            GeoArea::NorthWest => "north-west",
            GeoArea::NorthEast => "north-east",
            GeoArea::Center => "center",
            GeoArea::South => "south",
            GeoArea::Islands => "islands",
        }
    }

    /// Parse the closed vocabulary used in CSV files. Case-insensitive;
    /// accepts `_` in place of `-`.
    pub fn parse(text: &str) -> Option<GeoArea> {
        let norm = text.trim().to_ascii_lowercase().replace('_', "-");
        GeoArea::ALL.iter().copied().find(|a| a.label() == norm)
    }
}

impl fmt::Display for GeoArea {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Kind of an entry in the distress-event archive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistressEventKind {
    /// A pre-distress procedure (rebalancing plan) was opened.
    PreDistress,
    /// Financial distress (bankruptcy) was formally declared.
    Bankruptcy,
}

impl DistressEventKind {
    pub fn label(&self) -> &'static str {
        match self {
            DistressEventKind::PreDistress => "pre-distress",
            DistressEventKind::Bankruptcy => "bankruptcy",
        }
    }
}

impl fmt::Display for DistressEventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Bankruptcy-risk level derived from a municipality's event history,
/// ordered from 1 (low) to 5 (high).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BankruptcyRisk {
    Level1,
    Level2,
    Level3,
    Level4,
    Level5,
}

impl BankruptcyRisk {
    pub const ALL: [BankruptcyRisk; 5] = [
        BankruptcyRisk::Level1,
        BankruptcyRisk::Level2,
        BankruptcyRisk::Level3,
        BankruptcyRisk::Level4,
        BankruptcyRisk::Level5,
    ];

    pub fn level(&self) -> u8 {
        match self {
            BankruptcyRisk::Level1 => 1,
            BankruptcyRisk::Level2 => 2,
            BankruptcyRisk::Level3 => 3,
            BankruptcyRisk::Level4 => 4,
            BankruptcyRisk::Level5 => 5,
        }
    }

    pub fn from_level(level: u8) -> Option<BankruptcyRisk> {
        BankruptcyRisk::ALL
            .get(level.checked_sub(1)? as usize)
            .copied()
    }

    pub fn description(&self) -> &'static str {
        match self {
            BankruptcyRisk::Level1 => "low",
            BankruptcyRisk::Level2 => "medium-low",
            BankruptcyRisk::Level3 => "medium",
            BankruptcyRisk::Level4 => "medium-high",
            BankruptcyRisk::Level5 => "high",
        }
    }
}

impl fmt::Display for BankruptcyRisk {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.level())
    }
}

/// Classify a municipality's risk from its event history.
///
/// `history` lists events in chronological order (only events strictly
/// before the year being scored should be passed). Rules are checked in
/// order of precedence, highest level first:
///
/// 5. two or more bankruptcies;
/// 4. some pre-distress occurred before a bankruptcy;
/// 3. exactly one bankruptcy and no pre-distress;
/// 2. two or more pre-distress procedures and no bankruptcy;
/// 1. anything else (at most one pre-distress, no bankruptcy history that
///    matches the rules above).
///
/// Ordering matters only through rule 4: permuting the history cannot change
/// the level unless it changes whether a pre-distress precedes a bankruptcy.
pub fn bankruptcy_risk_of(history: &[DistressEventKind]) -> BankruptcyRisk {
    let bankruptcies = history
        .iter()
        .filter(|e| **e == DistressEventKind::Bankruptcy)
        .count();
    let pre_distress = history.len() - bankruptcies;
    let pre_before_bankruptcy = history
        .iter()
        .scan(false, |seen_pre, event| {
            let fires = *event == DistressEventKind::Bankruptcy && *seen_pre;
            *seen_pre |= *event == DistressEventKind::PreDistress;
            Some(fires)
        })
        .any(|fires| fires);

    if bankruptcies >= 2 {
        BankruptcyRisk::Level5
    } else if pre_before_bankruptcy {
        BankruptcyRisk::Level4
    } else if bankruptcies == 1 && pre_distress == 0 {
        BankruptcyRisk::Level3
    } else if pre_distress >= 2 && bankruptcies == 0 {
        BankruptcyRisk::Level2
    } else {
        BankruptcyRisk::Level1
    }
}

/// Raw indicator values for one municipality-year.
///
/// The eight continuous indicators are percentages or per-capita amounts as
/// reported; a missing value is carried as `NaN` until [`crate::ingest::clean`]
/// imputes it. `population = 0` marks an unknown resident count and is
/// rejected by validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawIndicators {
    pub population: u64,
    pub geo_area: GeoArea,
    pub demographic_category: DemographicCategory,
    pub bankruptcy_risk: BankruptcyRisk,
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

/// Names of the eight continuous indicator columns, in canonical order.
pub const CONTINUOUS_INDICATORS: [&str; 8] = [
    "incidence_of_investment",
    "financial_autonomy_degree",
    "indebtedness_per_capita",
    "total_investment_financed_by_debt",
    "rigid_expenditure",
    "expense_management_speed",
    "collecting_capacity",
    "extra_budgetary_debts",
];

impl RawIndicators {
    /// Value of a continuous indicator by canonical column name.
    pub fn continuous(&self, name: &str) -> Option<f64> {
        match name {
            "incidence_of_investment" => Some(self.incidence_of_investment),
            "financial_autonomy_degree" => Some(self.financial_autonomy_degree),
            "indebtedness_per_capita" => Some(self.indebtedness_per_capita),
            "total_investment_financed_by_debt" => Some(self.total_investment_financed_by_debt),
            "rigid_expenditure" => Some(self.rigid_expenditure),
            "expense_management_speed" => Some(self.expense_management_speed),
            "collecting_capacity" => Some(self.collecting_capacity),
            "extra_budgetary_debts" => Some(self.extra_budgetary_debts),
            _ => None,
        }
    }

    pub fn set_continuous(&mut self, name: &str, value: f64) -> bool {
        match name {
            "incidence_of_investment" => self.incidence_of_investment = value,
            "financial_autonomy_degree" => self.financial_autonomy_degree = value,
            "indebtedness_per_capita" => self.indebtedness_per_capita = value,
            "total_investment_financed_by_debt" => self.total_investment_financed_by_debt = value,
            "rigid_expenditure" => self.rigid_expenditure = value,
            "expense_management_speed" => self.expense_management_speed = value,
            "collecting_capacity" => self.collecting_capacity = value,
            "extra_budgetary_debts" => self.extra_budgetary_debts = value,
            _ => return false,
        }
        true
    }
}

/// One observation: a municipality in a year.
///
/// `label` is `Some(true)` when distress was declared in that year,
/// `Some(false)` when not, and `None` when no label could be attached yet
/// (such rows are dropped by cleaning).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MunicipalityYearRecord {
    pub municipality_id: String,
    pub year: Year,
    pub indicators: RawIndicators,
    pub label: Option<bool>,
}

impl MunicipalityYearRecord {
    pub fn key(&self) -> (&str, Year) {
        (&self.municipality_id, self.year)
    }
}

/// A rule broken by a single record, reported as data rather than a panic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    /// A continuous indicator is NaN or infinite.
    NonFinite { field: String },
    /// A field that must be nonnegative is below zero.
    Negative { field: String, value: f64 },
    /// Resident count below 1 (0 marks a missing population).
    PopulationMissing,
    /// Stored demographic category disagrees with the population band.
    CategoryMismatch {
        stored: DemographicCategory,
        expected: DemographicCategory,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonFinite { field } => write!(f, "non-finite value in `{field}`"),
            Violation::Negative { field, value } => {
                write!(f, "negative value {value} in `{field}`")
            }
            Violation::PopulationMissing => write!(f, "population below 1"),
            Violation::CategoryMismatch { stored, expected } => write!(
                f,
                "demographic category {stored} does not match population band {expected}"
            ),
        }
    }
}

/// Check one record against the indicator rules.
///
/// Returns every violation found (empty means the record is well-formed):
/// non-finite continuous values, negative `indebtedness_per_capita` or
/// `extra_budgetary_debts`, a population below 1, and a demographic category
/// inconsistent with the population.
pub fn validate_record(record: &MunicipalityYearRecord) -> Vec<Violation> {
    let mut violations = Vec::new();
    let ind = &record.indicators;

    for name in CONTINUOUS_INDICATORS {
        let value = ind.continuous(name).unwrap();
        if !value.is_finite() {
            violations.push(Violation::NonFinite {
                field: name.to_string(),
            });
        }
    }
    for name in ["indebtedness_per_capita", "extra_budgetary_debts"] {
        let value = ind.continuous(name).unwrap();
        if value.is_finite() && value < 0.0 {
            violations.push(Violation::Negative {
                field: name.to_string(),
                value,
            });
        }
    }
    if ind.population < 1 {
        violations.push(Violation::PopulationMissing);
    } else {
        let expected =
            demographic_category_of(ind.population).expect("population >= 1 always maps to a band");
        if expected != ind.demographic_category {
            violations.push(Violation::CategoryMismatch {
                stored: ind.demographic_category,
                expected,
            });
        }
    }
    violations
}

/// Structural problems of a whole panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PanelIssue {
    DuplicateKey { municipality_id: String, year: Year },
    YearOutOfRange { municipality_id: String, year: Year },
}

/// The yearly panel: every record of every municipality, plus the intended
/// observation window.
///
/// A freshly merged panel may still violate the structural rules (duplicate
/// keys, stray years, missing values); [`crate::ingest::clean`] establishes
/// them and [`Panel::issues`] reports what is still wrong.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub records: Vec<MunicipalityYearRecord>,
    pub year_range: YearRange,
}

impl Panel {
    pub fn new(records: Vec<MunicipalityYearRecord>, year_range: YearRange) -> Self {
        Panel {
            records,
            year_range,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Count of records labeled distressed.
    pub fn positives(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.label == Some(true))
            .count()
    }

    /// Structural violations: duplicate `(municipality, year)` keys and
    /// years outside the observation window.
    pub fn issues(&self) -> Vec<PanelIssue> {
        let mut seen = std::collections::HashSet::new();
        let mut issues = Vec::new();
        for record in &self.records {
            if !self.year_range.contains(record.year) {
                issues.push(PanelIssue::YearOutOfRange {
                    municipality_id: record.municipality_id.clone(),
                    year: record.year,
                });
            }
            if !seen.insert((record.municipality_id.clone(), record.year)) {
                issues.push(PanelIssue::DuplicateKey {
                    municipality_id: record.municipality_id.clone(),
                    year: record.year,
                });
            }
        }
        issues
    }
}
