//! Feature engineering: lagged deltas, one-hot encoding, standardization,
//! and principal component analysis.
//!
//! The canonical design matrix built by [`build_matrix`] has, in order: the
//! eight continuous indicators, one `delta_*` column per requested lag
//! feature, the `off_balance_sheet_debts` 0/1 column, and the full one-hot
//! vocabularies of the three categorical fields (12 demographic bands, 5
//! geographic areas, 5 risk levels) with no level dropped. Standardization
//! touches only the continuous and delta columns; encoders fit on training
//! data and are applied unchanged elsewhere, so no statistic ever leaks from
//! a held-out row.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::domain::{
    BankruptcyRisk, DemographicCategory, GeoArea, MunicipalityYearRecord, Panel, Year,
    CONTINUOUS_INDICATORS,
};
use crate::{Error, Result};

/// The indicators whose year-over-year change is informative enough to keep
/// as an extra column, in canonical order.
pub const LAG_FEATURES: [&str; 6] = [
    "expense_management_speed",
    "rigid_expenditure",
    "total_investment_financed_by_debt",
    "financial_autonomy_degree",
    "collecting_capacity",
    "indebtedness_per_capita",
];

/// A dense row-major numeric matrix with named columns, one row per
/// municipality-year, carrying its labels alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    column_names: Vec<String>,
    row_keys: Vec<(String, Year)>,
    labels: Vec<bool>,
    data: Vec<f64>,
}

impl FeatureMatrix {
    /// Assemble a matrix from parts. Row-major `data` must be
    /// `rows.len() * column_names.len()` long.
    pub fn new(
        column_names: Vec<String>,
        row_keys: Vec<(String, Year)>,
        labels: Vec<bool>,
        data: Vec<f64>,
    ) -> Result<Self> {
        if row_keys.len() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} row keys but {} labels",
                row_keys.len(),
                labels.len()
            )));
        }
        if data.len() != row_keys.len() * column_names.len() {
            return Err(Error::InvalidInput(format!(
                "data length {} does not match {} rows x {} columns",
                data.len(),
                row_keys.len(),
                column_names.len()
            )));
        }
        Ok(FeatureMatrix {
            column_names,
            row_keys,
            labels,
            data,
        })
    }

    /// Test/demo helper: build a matrix from per-row vectors with synthetic
    /// row keys.
    pub fn from_rows(
        column_names: Vec<String>,
        rows: Vec<Vec<f64>>,
        labels: Vec<bool>,
    ) -> Result<Self> {
        let keys = (0..rows.len())
            .map(|i| (format!("row-{i}"), Year(0)))
            .collect();
        let width = column_names.len();
        let mut data = Vec::with_capacity(rows.len() * width);
        for row in &rows {
            if row.len() != width {
                return Err(Error::InvalidInput(format!(
                    "row has {} values, expected {width}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        FeatureMatrix::new(column_names, keys, labels, data)
    }

    pub fn n_rows(&self) -> usize {
        self.row_keys.len()
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.n_cols();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n_cols() + col]
    }

    pub fn value_mut(&mut self, row: usize, col: usize) -> &mut f64 {
        let w = self.n_cols();
        &mut self.data[row * w + col]
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn row_keys(&self) -> &[(String, Year)] {
        &self.row_keys
    }

    /// Copy out the named columns, preserving the given order.
    pub fn select_columns(&self, names: &[String]) -> Result<FeatureMatrix> {
        let positions: Vec<usize> = names
            .iter()
            .map(|name| {
                self.column_index(name)
                    .ok_or_else(|| Error::MissingColumn(name.clone()))
            })
            .collect::<Result<_>>()?;
        let mut data = Vec::with_capacity(self.n_rows() * positions.len());
        for i in 0..self.n_rows() {
            let row = self.row(i);
            data.extend(positions.iter().map(|&p| row[p]));
        }
        Ok(FeatureMatrix {
            column_names: names.to_vec(),
            row_keys: self.row_keys.clone(),
            labels: self.labels.clone(),
            data,
        })
    }

    /// Copy out the rows at `indices`, preserving the given order.
    pub fn subset(&self, indices: &[usize]) -> FeatureMatrix {
        let w = self.n_cols();
        let mut data = Vec::with_capacity(indices.len() * w);
        let mut keys = Vec::with_capacity(indices.len());
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(self.row(i));
            keys.push(self.row_keys[i].clone());
            labels.push(self.labels[i]);
        }
        FeatureMatrix {
            column_names: self.column_names.clone(),
            row_keys: keys,
            labels,
            data,
        }
    }

    /// Write the matrix as delimiter-separated text with a header:
    /// `municipality_id, year, label, <feature columns...>`.
    pub fn write_csv<W: Write>(&self, writer: W, delimiter: u8) -> Result<()> {
        let mut out = csv::WriterBuilder::new()
            .delimiter(delimiter)
            .from_writer(writer);
        let mut header = vec!["municipality_id".to_string(), "year".into(), "label".into()];
        header.extend(self.column_names.iter().cloned());
        out.write_record(&header).map_err(csv_error)?;
        for i in 0..self.n_rows() {
            let (id, year) = &self.row_keys[i];
            let mut record = vec![
                id.clone(),
                year.to_string(),
                if self.labels[i] {
                    "1".into()
                } else {
                    "0".to_string()
                },
            ];
            record.extend(self.row(i).iter().map(|v| v.to_string()));
            out.write_record(&record).map_err(csv_error)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Parse a matrix written by [`FeatureMatrix::write_csv`]: the three key
    /// columns in front, every remaining header cell taken as a feature
    /// column, values as decimal floats and labels as `1`/`0`.
    pub fn read_csv<R: std::io::Read>(reader: R, delimiter: u8) -> Result<FeatureMatrix> {
        let mut input = csv::ReaderBuilder::new()
            .delimiter(delimiter)
            .has_headers(true)
            .from_reader(reader);
        let header = input
            .headers()
            .map_err(|e| Error::InvalidInput(format!("unreadable matrix header: {e}")))?
            .clone();
        for (i, expected) in ["municipality_id", "year", "label"].iter().enumerate() {
            if header.get(i) != Some(expected) {
                return Err(Error::MissingColumn((*expected).into()));
            }
        }
        let column_names: Vec<String> = header.iter().skip(3).map(str::to_string).collect();
        if column_names.is_empty() {
            return Err(Error::InvalidInput(
                "matrix file has no feature columns".into(),
            ));
        }

        let mut row_keys = Vec::new();
        let mut labels = Vec::new();
        let mut data = Vec::new();
        for record in input.records() {
            let record =
                record.map_err(|e| Error::InvalidInput(format!("unreadable matrix row: {e}")))?;
            let line = record.position().map_or(0, |p| p.line());
            let parse = |message: String| Error::Parse { line, message };
            if record.len() != column_names.len() + 3 {
                return Err(parse(format!(
                    "expected {} fields, found {}",
                    column_names.len() + 3,
                    record.len()
                )));
            }
            let year: i32 = record[1]
                .parse()
                .map_err(|_| parse(format!("`{}` is not a year", &record[1])))?;
            let label = match &record[2] {
                "1" => true,
                "0" => false,
                other => return Err(parse(format!("`{other}` is not a 0/1 label"))),
            };
            row_keys.push((record[0].to_string(), Year(year)));
            labels.push(label);
            for value in record.iter().skip(3) {
                data.push(
                    value
                        .parse::<f64>()
                        .map_err(|_| parse(format!("`{value}` is not a number")))?,
                );
            }
        }
        FeatureMatrix::new(column_names, row_keys, labels, data)
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::InvalidInput(format!("csv write failed: {e}"))
}

/// Year-over-year delta columns aligned with the panel's record order.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaColumns {
    /// `delta_<indicator>` per requested feature, in request order.
    pub names: Vec<String>,
    /// Row-major `n x names.len()` values.
    pub values: Vec<f64>,
    /// Rows whose previous year was absent; their deltas were set to 0.
    pub first_year_imputed: usize,
}

/// Compute `value(t) - value(t-1)` per municipality for each named
/// indicator.
///
/// A row whose `(municipality, t-1)` record is absent (the first panel year,
/// or a gap) gets delta 0 and is counted in `first_year_imputed`. Only the
/// indicators in [`LAG_FEATURES`] are eligible; any other name is an error.
pub fn lagged_deltas(panel: &Panel, feature_names: &[&str]) -> Result<DeltaColumns> {
    for name in feature_names {
        if !LAG_FEATURES.contains(name) {
            return Err(Error::InvalidInput(format!(
                "`{name}` is not a lag-eligible indicator (expected one of {:?})",
                LAG_FEATURES
            )));
        }
    }
    let index: HashMap<(&str, Year), usize> = panel
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| ((r.municipality_id.as_str(), r.year), i))
        .collect();

    let mut values = Vec::with_capacity(panel.len() * feature_names.len());
    let mut imputed_rows = 0usize;
    for record in &panel.records {
        let previous = index
            .get(&(record.municipality_id.as_str(), Year(record.year.0 - 1)))
            .map(|&i| &panel.records[i]);
        if previous.is_none() {
            imputed_rows += 1;
        }
        for name in feature_names {
            let current = record.indicators.continuous(name).unwrap();
            let delta = match previous {
                Some(prev) => current - prev.indicators.continuous(name).unwrap(),
                None => 0.0,
            };
            values.push(delta);
        }
    }
    Ok(DeltaColumns {
        names: feature_names.iter().map(|n| format!("delta_{n}")).collect(),
        values,
        first_year_imputed: imputed_rows,
    })
}

/// Categorical fields that can be one-hot encoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CategoricalField {
    DemographicCategory,
    GeoArea,
    BankruptcyRisk,
}

impl CategoricalField {
    pub const ALL: [CategoricalField; 3] = [
        CategoricalField::DemographicCategory,
        CategoricalField::GeoArea,
        CategoricalField::BankruptcyRisk,
    ];

    /// Column names of the field's full vocabulary, `parent=level`.
    pub fn column_names(&self) -> Vec<String> {
        match self {
            CategoricalField::DemographicCategory => DemographicCategory::ALL
                .iter()
                .map(|c| format!("demographic_category={c}"))
                .collect(),
            CategoricalField::GeoArea => GeoArea::ALL
                .iter()
                .map(|a| format!("geo_area={a}"))
                .collect(),
            CategoricalField::BankruptcyRisk => BankruptcyRisk::ALL
                .iter()
                .map(|r| format!("bankruptcy_risk={r}"))
                .collect(),
        }
    }

    fn hot_index(&self, record: &MunicipalityYearRecord) -> usize {
        match self {
            CategoricalField::DemographicCategory => DemographicCategory::ALL
                .iter()
                .position(|c| *c == record.indicators.demographic_category)
                .unwrap(),
            CategoricalField::GeoArea => GeoArea::ALL
                .iter()
                .position(|a| *a == record.indicators.geo_area)
                .unwrap(),
            CategoricalField::BankruptcyRisk => BankruptcyRisk::ALL
                .iter()
                .position(|r| *r == record.indicators.bankruptcy_risk)
                .unwrap(),
        }
    }
}

/// One-hot columns for a set of records.
#[derive(Debug, Clone, PartialEq)]
pub struct OneHotColumns {
    pub names: Vec<String>,
    /// Row-major `n x names.len()` 0/1 values.
    pub values: Vec<f64>,
}

/// Encode the categorical fields over their full closed vocabularies.
///
/// Every level gets a column even when no record carries it, and no level is
/// dropped, so each field's columns sum to exactly 1 per row.
pub fn one_hot(records: &[MunicipalityYearRecord], fields: &[CategoricalField]) -> OneHotColumns {
    let mut names = Vec::new();
    let mut field_offsets = Vec::new();
    for field in fields {
        field_offsets.push(names.len());
        names.extend(field.column_names());
    }
    let width = names.len();
    let mut values = vec![0.0; records.len() * width];
    for (i, record) in records.iter().enumerate() {
        for (field, offset) in fields.iter().zip(&field_offsets) {
            values[i * width + offset + field.hot_index(record)] = 1.0;
        }
    }
    OneHotColumns { names, values }
}

/// Build the canonical design matrix from a cleaned panel.
///
/// Requires every record labeled and every continuous value finite (run
/// [`crate::ingest::clean`] first). `lag_features` selects which delta
/// columns to add; pass [`LAG_FEATURES`] for the full set.
/// Column names of the encoded design matrix, in the exact order
/// [`build_matrix`] emits them: the eight continuous indicators, one
/// `delta_*` column per requested lag feature, the off-balance flag, then
/// the full one-hot vocabularies of the three categorical fields.
pub fn encoded_column_names(lag_features: &[&str]) -> Vec<String> {
    let mut names: Vec<String> = CONTINUOUS_INDICATORS
        .iter()
        .map(|s| s.to_string())
        .collect();
    names.extend(lag_features.iter().map(|n| format!("delta_{n}")));
    names.push("off_balance_sheet_debts".into());
    for field in CategoricalField::ALL {
        names.extend(field.column_names());
    }
    names
}

pub fn build_matrix(panel: &Panel, lag_features: &[&str]) -> Result<FeatureMatrix> {
    if panel.is_empty() {
        return Err(Error::EmptyDataset(
            "cannot build features from an empty panel".into(),
        ));
    }
    let deltas = lagged_deltas(panel, lag_features)?;
    let hot = one_hot(&panel.records, &CategoricalField::ALL);
    let column_names = encoded_column_names(lag_features);

    let width = column_names.len();
    let mut data = Vec::with_capacity(panel.len() * width);
    let mut row_keys = Vec::with_capacity(panel.len());
    let mut labels = Vec::with_capacity(panel.len());
    let delta_width = deltas.names.len();
    let hot_width = hot.names.len();

    for (i, record) in panel.records.iter().enumerate() {
        let label = record.label.ok_or_else(|| {
            Error::InvalidInput(format!(
                "record ({}, {}) has no label; clean the panel first",
                record.municipality_id, record.year
            ))
        })?;
        for name in CONTINUOUS_INDICATORS {
            let value = record.indicators.continuous(name).unwrap();
            if !value.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "non-finite `{name}` at ({}, {}); clean the panel first",
                    record.municipality_id, record.year
                )));
            }
            data.push(value);
        }
        data.extend_from_slice(&deltas.values[i * delta_width..(i + 1) * delta_width]);
        data.push(if record.indicators.off_balance_sheet_debts {
            1.0
        } else {
            0.0
        });
        data.extend_from_slice(&hot.values[i * hot_width..(i + 1) * hot_width]);
        row_keys.push((record.municipality_id.clone(), record.year));
        labels.push(label);
    }
    FeatureMatrix::new(column_names, row_keys, labels, data)
}

/// The columns of the canonical matrix that standardization should touch:
/// the eight continuous indicators plus the delta columns actually present.
pub fn standardizable_columns(matrix: &FeatureMatrix) -> Vec<String> {
    matrix
        .column_names()
        .iter()
        .filter(|name| {
            CONTINUOUS_INDICATORS.contains(&name.as_str())
                || name
                    .strip_prefix("delta_")
                    .is_some_and(|base| LAG_FEATURES.contains(&base))
        })
        .cloned()
        .collect()
}

/// Per-column location/scale parameters fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizedColumn {
    pub name: String,
    pub mean: f64,
    /// Biased (1/n) standard deviation.
    pub std: f64,
    /// Constant columns are flagged and passed through unchanged.
    pub zero_variance: bool,
}

/// A fitted standardizer: `(x - mean) / std` per covered column, applied
/// without refitting wherever the matrix came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub columns: Vec<StandardizedColumn>,
}

impl Standardizer {
    /// Fit means and biased standard deviations of the named columns.
    pub fn fit(matrix: &FeatureMatrix, column_names: &[String]) -> Result<Self> {
        if matrix.n_rows() == 0 {
            return Err(Error::EmptyDataset(
                "cannot fit a standardizer on zero rows".into(),
            ));
        }
        let n = matrix.n_rows() as f64;
        let mut columns = Vec::with_capacity(column_names.len());
        for name in column_names {
            let idx = matrix
                .column_index(name)
                .ok_or_else(|| Error::InvalidInput(format!("unknown column `{name}`")))?;
            let mean = (0..matrix.n_rows())
                .map(|i| matrix.value(i, idx))
                .sum::<f64>()
                / n;
            let var = (0..matrix.n_rows())
                .map(|i| {
                    let d = matrix.value(i, idx) - mean;
                    d * d
                })
                .sum::<f64>()
                / n;
            let std = var.sqrt();
            columns.push(StandardizedColumn {
                name: name.clone(),
                mean,
                std,
                zero_variance: std == 0.0,
            });
        }
        Ok(Standardizer { columns })
    }

    /// Standardize the covered columns of `matrix`, leaving every other
    /// column untouched. The matrix must contain each fitted column.
    pub fn apply(&self, matrix: &FeatureMatrix) -> Result<FeatureMatrix> {
        let mut out = matrix.clone();
        for column in &self.columns {
            let idx = matrix.column_index(&column.name).ok_or_else(|| {
                Error::InvalidInput(format!("matrix is missing fitted column `{}`", column.name))
            })?;
            if column.zero_variance {
                continue;
            }
            for i in 0..out.n_rows() {
                let v = out.value(i, idx);
                *out.value_mut(i, idx) = (v - column.mean) / column.std;
            }
        }
        Ok(out)
    }

    /// A cheap order-sensitive fingerprint of the fitted parameters, used by
    /// cross-validation reports to show that each fold refit its own scaler.
    pub fn fingerprint(&self) -> u64 {
        let mut hash = 0xcbf29ce484222325u64; // FNV-1a
        let mut eat = |bits: u64| {
            for byte in bits.to_le_bytes() {
                hash ^= byte as u64;
                hash = hash.wrapping_mul(0x100000001b3);
            }
        };
        for column in &self.columns {
            eat(column.mean.to_bits());
            eat(column.std.to_bits());
        }
        hash
    }
}

/// A fitted principal-component basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub column_names: Vec<String>,
    /// Column means subtracted before projection.
    pub means: Vec<f64>,
    /// `k x d` row-per-component directions, unit length, mutually
    /// orthogonal; each direction's largest-magnitude coordinate is
    /// positive (ties broken toward the lowest index).
    pub components: Vec<Vec<f64>>,
    /// Variance captured by each kept component (eigenvalues, descending).
    pub explained_variance: Vec<f64>,
    /// Fraction of total variance per kept component; over all `d`
    /// components the fractions sum to 1.
    pub explained_variance_ratio: Vec<f64>,
    /// Sum of all `d` eigenvalues of the covariance.
    pub total_variance: f64,
}

/// Fit the top-`k` principal components of the (already standardized)
/// matrix, using the biased `1/n` covariance.
pub fn fit_pca(matrix: &FeatureMatrix, k: usize) -> Result<PcaModel> {
    let d = matrix.n_cols();
    let n = matrix.n_rows();
    if n == 0 {
        return Err(Error::EmptyDataset("cannot fit PCA on zero rows".into()));
    }
    if k == 0 || k > d {
        return Err(Error::InvalidInput(format!(
            "component count {k} out of range 1..={d}"
        )));
    }

    let means: Vec<f64> = (0..d)
        .map(|j| (0..n).map(|i| matrix.value(i, j)).sum::<f64>() / n as f64)
        .collect();
    // Covariance, biased: C = (1/n) * Xc^T Xc.
    let mut cov = vec![vec![0.0f64; d]; d];
    for i in 0..n {
        let row = matrix.row(i);
        for a in 0..d {
            let da = row[a] - means[a];
            for b in a..d {
                cov[a][b] += da * (row[b] - means[b]);
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            cov[a][b] /= n as f64;
            cov[b][a] = cov[a][b];
        }
    }

    let (mut eigenvalues, mut eigenvectors) = jacobi_eigen(cov);
    // Sort descending by eigenvalue; clamp tiny negatives from roundoff.
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eigenvalues[b].partial_cmp(&eigenvalues[a]).unwrap());
    eigenvalues = order.iter().map(|&i| eigenvalues[i].max(0.0)).collect();
    eigenvectors = order
        .iter()
        .map(|&i| std::mem::take(&mut eigenvectors[i]))
        .collect();

    // Deterministic sign: flip so the largest-|coordinate| entry is positive.
    for vector in &mut eigenvectors {
        let lead = vector
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| {
                a.abs().partial_cmp(&b.abs()).unwrap().then(ib.cmp(ia)) // tie -> lowest index wins
            })
            .map(|(_, v)| *v)
            .unwrap_or(0.0);
        if lead < 0.0 {
            for v in vector.iter_mut() {
                *v = -*v;
            }
        }
    }

    let total_variance: f64 = eigenvalues.iter().sum();
    let ratio_denominator = if total_variance > 0.0 {
        total_variance
    } else {
        1.0
    };
    Ok(PcaModel {
        column_names: matrix.column_names().to_vec(),
        means,
        components: eigenvectors.into_iter().take(k).collect(),
        explained_variance: eigenvalues[..k].to_vec(),
        explained_variance_ratio: eigenvalues[..k]
            .iter()
            .map(|l| l / ratio_denominator)
            .collect(),
        total_variance,
    })
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    /// Project rows onto the kept components: `(x - mean) . v` per
    /// component. The matrix must have exactly the fitted columns.
    pub fn project(&self, matrix: &FeatureMatrix) -> Result<Vec<Vec<f64>>> {
        if matrix.column_names() != self.column_names.as_slice() {
            let missing = self
                .column_names
                .iter()
                .find(|c| matrix.column_index(c).is_none());
            return Err(Error::InvalidInput(match missing {
                Some(c) => format!("matrix is missing fitted column `{c}`"),
                None => "matrix columns do not match the fitted layout".into(),
            }));
        }
        let mut scores = Vec::with_capacity(matrix.n_rows());
        for i in 0..matrix.n_rows() {
            let row = matrix.row(i);
            let score = self
                .components
                .iter()
                .map(|v| {
                    row.iter()
                        .zip(v)
                        .zip(&self.means)
                        .map(|((x, w), m)| (x - m) * w)
                        .sum::<f64>()
                })
                .collect();
            scores.push(score);
        }
        Ok(scores)
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// (eigenvalues, eigenvectors-as-rows), unsorted.
fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let d = a.len();
    let mut v = vec![vec![0.0f64; d]; d];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let scale: f64 = a
        .iter()
        .map(|row| row.iter().map(|x| x * x).sum::<f64>())
        .sum::<f64>()
        .sqrt()
        .max(f64::MIN_POSITIVE);

    for _sweep in 0..100 {
        let off: f64 = (0..d)
            .map(|p| ((p + 1)..d).map(|q| a[p][q] * a[p][q]).sum::<f64>())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-14 * scale {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                if a[p][q].abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..d {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let eigenvalues: Vec<f64> = (0..d).map(|i| a[i][i]).collect();
    // v columns are eigenvectors; return them as rows.
    let eigenvectors: Vec<Vec<f64>> = (0..d).map(|j| (0..d).map(|i| v[i][j]).collect()).collect();
    (eigenvalues, eigenvectors)
}
