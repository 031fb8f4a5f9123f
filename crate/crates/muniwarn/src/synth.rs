//! Synthetic municipality panels with planted ground truth.
//!
//! The generator plants a logistic model over the encoded feature space and
//! samples every label from it, so downstream trainers face a well-specified
//! recovery problem instead of an unfalsifiable imitation of real fiscal
//! data. A persistent latent stress score per municipality (plus a slow
//! municipal trend and yearly wobble) drives all eight continuous indicators
//! through fixed affine maps; categorical features and the off-balance flag
//! enter the planted model directly. The intercept is then calibrated by
//! bisection until the expected positive rate matches the target prevalence,
//! and each (municipality, year) label is one Bernoulli draw against the
//! planted log-odds.
//!
//! Consistency is by construction rather than by bookkeeping: the generator
//! emits plain panel rows and a distress-event archive, then runs the same
//! merge step the ingest path uses, so labels, demographic categories, and
//! risk levels in the returned panel are exactly what re-ingesting the CSV
//! output would produce. A label that fires becomes a bankruptcy event in
//! the archive, which in turn raises the municipality's risk level for the
//! remaining panel years — the planted model sees that evolving risk too.
//!
//! Everything is deterministic given the seed: each municipality draws from
//! its own derived stream, so parallel generation is bit-identical to
//! serial, and label draws come from a further dedicated stream so the same
//! underlying economy can be relabeled under a different intercept without
//! disturbing the indicators.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{
    bankruptcy_risk_of, demographic_category_of, DemographicCategory, DistressEventKind, GeoArea,
    Panel, Year, YearRange, CONTINUOUS_INDICATORS,
};
use crate::features::{encoded_column_names, LAG_FEATURES};
use crate::ingest::{merge_panel, CandidateRecord, DistressArchive, DistressEvent};
use crate::seeding::stream;
use crate::{Error, Result};

/// Seed used by [`SynthConfig::default`]; chosen so the default panel's
/// sampled positive count lands inside the documented band around the
/// expected 416.
pub const DEFAULT_SEED: u64 = 7;

/// Weight of the stress score inside each indicator's latent driver.
const STRESS_LOADING: f64 = 0.3;
/// Standard deviation of the per-municipality stress trend (per year).
const STRESS_TREND_SD: f64 = 0.12;
/// Standard deviation of the yearly stress wobble.
const STRESS_YEAR_SD: f64 = 0.45;
/// Within-mode stress spread when a margin is planted.
const MARGIN_MODE_SD: f64 = 0.5;
/// Stress separation per margin multiple, in units of `noise_scale`. Sized
/// so that after population standardization recenters the scores, the
/// calibrated intercept leaves both latent modes several noise standard
/// deviations away from the decision boundary.
const MARGIN_STRESS_FACTOR: f64 = 7.0;
/// Probability that a record reports off-balance-sheet debts.
const OFF_BALANCE_RATE: f64 = 0.15;
/// Probability that a municipality carries distress events predating the
/// observation window (this is what spreads risk levels beyond level 1).
const HISTORY_RATE: f64 = 0.08;
/// How far back pre-window events may reach, in years before the window.
const PRE_WINDOW_YEARS: i32 = 27;
/// Share of pre-window events that are pre-distress rather than bankruptcy.
const PRE_DISTRESS_SHARE: f64 = 0.55;
/// Relative tolerance for the calibrated expected positive rate.
const CALIBRATION_TOLERANCE: f64 = 0.02;
/// The intercept search never leaves `[-INTERCEPT_BOUND, INTERCEPT_BOUND]`.
const INTERCEPT_BOUND: f64 = 60.0;
/// Bisection budget for intercept calibration.
const MAX_BISECTION_ITERATIONS: usize = 60;

/// Raw-unit shape of one continuous indicator: `value = center + scale · z`,
/// where `z` mixes the municipality's stress score (signed by `direction`)
/// with idiosyncratic noise, then the result is clamped to `[low, high]`.
struct IndicatorShape {
    /// Indicator this shape belongs to; tests assert the table stays aligned
    /// with the canonical indicator order.
    #[allow(dead_code)]
    name: &'static str,
    center: f64,
    scale: f64,
    direction: f64,
    low: f64,
    high: f64,
}

/// One shape per continuous indicator, in the canonical indicator order.
/// Ratio-like indicators live on [0, 1]; per-capita amounts are clamped at
/// zero so every generated record passes validation.
const INDICATOR_SHAPES: [IndicatorShape; 8] = [
    IndicatorShape {
        name: "incidence_of_investment",
        center: 0.15,
        scale: 0.08,
        direction: -1.0,
        low: 0.0,
        high: 1.0,
    },
    IndicatorShape {
        name: "financial_autonomy_degree",
        center: 0.55,
        scale: 0.15,
        direction: -1.0,
        low: 0.0,
        high: 1.0,
    },
    IndicatorShape {
        name: "indebtedness_per_capita",
        center: 600.0,
        scale: 350.0,
        direction: 1.0,
        low: 0.0,
        high: f64::INFINITY,
    },
    IndicatorShape {
        name: "total_investment_financed_by_debt",
        center: 0.35,
        scale: 0.18,
        direction: 1.0,
        low: 0.0,
        high: 1.0,
    },
    IndicatorShape {
        name: "rigid_expenditure",
        center: 0.45,
        scale: 0.12,
        direction: 1.0,
        low: 0.0,
        high: 1.0,
    },
    IndicatorShape {
        name: "expense_management_speed",
        center: 0.65,
        scale: 0.15,
        direction: -1.0,
        low: 0.0,
        high: 1.0,
    },
    IndicatorShape {
        name: "collecting_capacity",
        center: 0.70,
        scale: 0.15,
        direction: -1.0,
        low: 0.0,
        high: 1.0,
    },
    IndicatorShape {
        name: "extra_budgetary_debts",
        center: 40.0,
        scale: 30.0,
        direction: 1.0,
        low: 0.0,
        high: f64::INFINITY,
    },
];

/// Default planted coefficients: every continuous indicator and lagged delta
/// carries a clearly recoverable weight whose sign matches the stress
/// direction of the indicator, the off-balance flag is strongly positive,
/// and each one-hot family gets small mean-zero nudges. Mean-zero per family
/// matters because a full one-hot vocabulary is collinear with the
/// intercept: the ridge-penalized representative of any such model is the
/// mean-zero one, so planting it makes fitted and planted coefficients
/// directly comparable.
pub fn default_planted_coefficients() -> Vec<(String, f64)> {
    let named: Vec<(&str, f64)> = vec![
        ("incidence_of_investment", -2.5),
        ("financial_autonomy_degree", -3.0),
        ("indebtedness_per_capita", 3.0),
        ("total_investment_financed_by_debt", 2.5),
        ("rigid_expenditure", 2.75),
        ("expense_management_speed", -2.5),
        ("collecting_capacity", -2.75),
        ("extra_budgetary_debts", 3.0),
        ("delta_expense_management_speed", -2.25),
        ("delta_rigid_expenditure", 2.5),
        ("delta_total_investment_financed_by_debt", 2.25),
        ("delta_financial_autonomy_degree", -2.5),
        ("delta_collecting_capacity", -2.25),
        ("delta_indebtedness_per_capita", 2.5),
        ("off_balance_sheet_debts", 3.0),
        ("demographic_category=I", 0.55),
        ("demographic_category=II", 0.45),
        ("demographic_category=III", 0.35),
        ("demographic_category=IV", 0.25),
        ("demographic_category=V", 0.15),
        ("demographic_category=VI", 0.05),
        ("demographic_category=VII", -0.05),
        ("demographic_category=VIII", -0.15),
        ("demographic_category=IX", -0.25),
        ("demographic_category=X", -0.35),
        ("demographic_category=XI", -0.45),
        ("demographic_category=XII", -0.55),
        ("geo_area=north-west", -0.6),
        ("geo_area=north-east", -0.6),
        ("geo_area=center", -0.3),
        ("geo_area=south", 0.9),
        ("geo_area=islands", 0.6),
        ("bankruptcy_risk=1", -0.8),
        ("bankruptcy_risk=2", -0.4),
        ("bankruptcy_risk=3", 0.0),
        ("bankruptcy_risk=4", 0.4),
        ("bankruptcy_risk=5", 0.8),
    ];
    named.into_iter().map(|(n, v)| (n.to_string(), v)).collect()
}

/// Default geographic mix, weighted toward the south.
pub fn default_regional_mix() -> Vec<(GeoArea, f64)> {
    vec![
        (GeoArea::NorthWest, 0.20),
        (GeoArea::NorthEast, 0.15),
        (GeoArea::Center, 0.15),
        (GeoArea::South, 0.30),
        (GeoArea::Islands, 0.20),
    ]
}

/// Configuration for [`generate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_municipalities: usize,
    pub years: YearRange,
    /// Desired expected positive rate over all (municipality, year) records.
    pub target_prevalence: f64,
    pub seed: u64,
    /// Planted log-odds coefficients, named by encoded column; columns not
    /// listed get coefficient zero.
    pub planted_coefficients: Vec<(String, f64)>,
    /// Standard deviation of the idiosyncratic indicator noise.
    pub noise_scale: f64,
    /// `Some(m)` splits municipalities into two latent modes separated by
    /// `m × noise_scale` margin units (a fixed internal stress factor turns
    /// the multiple into raw stress separation), so that positives sit far
    /// from the decision boundary. The distressed mode holds exactly
    /// `round(target_prevalence · n_municipalities)` municipalities — an
    /// exact count rather than a coin per municipality — because intercept
    /// calibration tolerates only ±2% relative error: on small panels,
    /// choose a target close to a multiple of `1/n_municipalities` or the
    /// rounding alone can exceed that budget. `None` draws one continuous
    /// stress population.
    pub margin: Option<f64>,
    /// Relative frequency of each geographic area; weights must sum to 1.
    pub regional_mix: Vec<(GeoArea, f64)>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_municipalities: 7904,
            years: YearRange::default(),
            target_prevalence: 416.0 / 39520.0,
            seed: DEFAULT_SEED,
            planted_coefficients: default_planted_coefficients(),
            noise_scale: 1.0,
            margin: None,
            regional_mix: default_regional_mix(),
        }
    }
}

impl SynthConfig {
    /// Default generator with a planted margin of `multiple × noise_scale`.
    pub fn with_margin(multiple: f64) -> Self {
        SynthConfig {
            margin: Some(multiple),
            ..SynthConfig::default()
        }
    }
}

/// Per-column standardization constants the generator used when planting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub column: String,
    pub mean: f64,
    pub std: f64,
}

/// The linear score one record's label was drawn against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogOddsRow {
    pub municipality_id: String,
    pub year: Year,
    pub log_odds: f64,
    pub probability: f64,
    pub label: bool,
}

/// What the generator planted, for comparing fitted models against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Dense planted coefficient vector, one entry per encoded column.
    pub coefficients: Vec<(String, f64)>,
    /// Intercept found by prevalence calibration.
    pub intercept: f64,
    pub target_prevalence: f64,
    /// Expected positive rate of the planted model at the calibrated
    /// intercept (risk levels taken as of the window start).
    pub expected_prevalence: f64,
    /// Positive labels actually sampled.
    pub realized_positives: usize,
    /// Standardization constants behind the planted continuous terms.
    pub standardization: Vec<ColumnScale>,
    /// One row per (municipality, year), in panel row order.
    pub log_odds: Vec<LogOddsRow>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn validate_config(config: &SynthConfig) -> Result<()> {
    if config.n_municipalities == 0 {
        return Err(Error::InvalidInput("need at least one municipality".into()));
    }
    if !(config.target_prevalence > 0.0 && config.target_prevalence < 1.0) {
        return Err(Error::InvalidInput(format!(
            "target prevalence must lie strictly between 0 and 1, got {}",
            config.target_prevalence
        )));
    }
    if !config.noise_scale.is_finite() || config.noise_scale <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "noise scale must be a positive finite number, got {}",
            config.noise_scale
        )));
    }
    if let Some(multiple) = config.margin {
        if !multiple.is_finite() || multiple <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "margin multiple must be a positive finite number, got {multiple}"
            )));
        }
    }
    if config.regional_mix.is_empty() {
        return Err(Error::InvalidInput("regional mix must not be empty".into()));
    }
    let mut seen = BTreeSet::new();
    let mut total = 0.0;
    for (area, weight) in &config.regional_mix {
        if !weight.is_finite() || *weight < 0.0 {
            return Err(Error::InvalidInput(format!(
                "regional weight for {area} must be finite and non-negative, got {weight}"
            )));
        }
        if !seen.insert(area.label()) {
            return Err(Error::InvalidInput(format!(
                "regional mix lists {area} twice"
            )));
        }
        total += weight;
    }
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidInput(format!(
            "regional mix weights must sum to 1, got {total}"
        )));
    }
    Ok(())
}

/// Expand named coefficients into a dense vector over `columns`.
fn densify_coefficients(named: &[(String, f64)], columns: &[String]) -> Result<Vec<f64>> {
    let index: BTreeMap<&str, usize> = columns
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let mut dense = vec![0.0; columns.len()];
    let mut seen = BTreeSet::new();
    for (name, value) in named {
        let Some(&i) = index.get(name.as_str()) else {
            return Err(Error::InvalidInput(format!(
                "`{name}` is not an encoded feature column"
            )));
        };
        if !seen.insert(i) {
            return Err(Error::InvalidInput(format!(
                "planted coefficient `{name}` listed more than once"
            )));
        }
        if !value.is_finite() {
            return Err(Error::InvalidInput(format!(
                "planted coefficient `{name}` must be finite, got {value}"
            )));
        }
        dense[i] = *value;
    }
    Ok(dense)
}

/// Everything sampled for one municipality before labels exist.
struct MunicipalityDraw {
    id: String,
    geo_area: GeoArea,
    population: u64,
    /// Raw indicator values, one row per panel year.
    values: Vec<[f64; 8]>,
    off_balance: Vec<bool>,
    /// Events dated before the first panel year, sorted.
    pre_events: Vec<DistressEvent>,
    /// Uniform draws that decide each year's label.
    label_draws: Vec<f64>,
}

fn draw_municipality(config: &SynthConfig, index: usize, distressed: bool) -> MunicipalityDraw {
    let n_years = config.years.len();
    let mut rng = stream(config.seed, "synth-municipality", index as u64);
    let id = format!("M{:05}", index + 1);

    let geo_area = {
        let mark: f64 = rng.gen();
        let mut cumulative = 0.0;
        let mut chosen = config.regional_mix.last().expect("validated non-empty").0;
        for (area, weight) in &config.regional_mix {
            cumulative += weight;
            if mark < cumulative {
                chosen = *area;
                break;
            }
        }
        chosen
    };

    // log-uniform population over [100, 1e6)
    let population = {
        let u: f64 = rng.gen();
        let raw = (100.0 * 10_000f64.powf(u)).floor();
        (raw as u64).clamp(100, 999_999)
    };

    let noise = config.noise_scale;
    let base_stress = match config.margin {
        None => rng.sample::<f64, _>(StandardNormal),
        Some(multiple) => {
            let offset = if distressed {
                MARGIN_STRESS_FACTOR * multiple * noise
            } else {
                0.0
            };
            offset + MARGIN_MODE_SD * rng.sample::<f64, _>(StandardNormal)
        }
    };
    let trend = STRESS_TREND_SD * rng.sample::<f64, _>(StandardNormal);

    let mut values = Vec::with_capacity(n_years);
    let mut off_balance = Vec::with_capacity(n_years);
    for year_index in 0..n_years {
        let wobble: f64 = rng.sample(StandardNormal);
        let stress = base_stress + trend * year_index as f64 + STRESS_YEAR_SD * wobble;
        let mut row = [0.0f64; 8];
        for (i, shape) in INDICATOR_SHAPES.iter().enumerate() {
            let idiosyncratic: f64 = rng.sample(StandardNormal);
            let z = shape.direction * STRESS_LOADING * stress + noise * idiosyncratic;
            row[i] = (shape.center + shape.scale * z).clamp(shape.low, shape.high);
        }
        values.push(row);
        off_balance.push(rng.gen::<f64>() < OFF_BALANCE_RATE);
    }

    let mut pre_events = Vec::new();
    if rng.gen::<f64>() < HISTORY_RATE {
        let count = rng.gen_range(1..=3);
        for _ in 0..count {
            let back = rng.gen_range(1..=PRE_WINDOW_YEARS);
            let kind = if rng.gen::<f64>() < PRE_DISTRESS_SHARE {
                DistressEventKind::PreDistress
            } else {
                DistressEventKind::Bankruptcy
            };
            pre_events.push(DistressEvent {
                municipality_id: id.clone(),
                year: Year(config.years.first.0 - back),
                kind,
            });
        }
        pre_events.sort();
        pre_events.dedup();
    }

    let mut label_rng = stream(config.seed, "synth-label", index as u64);
    let label_draws: Vec<f64> = (0..n_years).map(|_| label_rng.gen()).collect();

    MunicipalityDraw {
        id,
        geo_area,
        population,
        values,
        off_balance,
        pre_events,
        label_draws,
    }
}

/// Population mean and standard deviation of the 8 indicator levels and the
/// 6 lagged deltas over every generated record, in canonical column order.
fn standardization_constants(
    draws: &[MunicipalityDraw],
    lag_positions: &[usize],
) -> Vec<ColumnScale> {
    let n_level = CONTINUOUS_INDICATORS.len();
    let n_cols = n_level + lag_positions.len();
    let mut count = 0usize;
    let mut sums = vec![0.0; n_cols];
    for draw in draws {
        for year_index in 0..draw.values.len() {
            count += 1;
            for i in 0..n_level {
                sums[i] += draw.values[year_index][i];
            }
            for (j, &p) in lag_positions.iter().enumerate() {
                let delta = if year_index == 0 {
                    0.0
                } else {
                    draw.values[year_index][p] - draw.values[year_index - 1][p]
                };
                sums[n_level + j] += delta;
            }
        }
    }
    let means: Vec<f64> = sums.iter().map(|s| s / count as f64).collect();

    let mut squares = vec![0.0; n_cols];
    for draw in draws {
        for year_index in 0..draw.values.len() {
            for i in 0..n_level {
                let d = draw.values[year_index][i] - means[i];
                squares[i] += d * d;
            }
            for (j, &p) in lag_positions.iter().enumerate() {
                let delta = if year_index == 0 {
                    0.0
                } else {
                    draw.values[year_index][p] - draw.values[year_index - 1][p]
                };
                let d = delta - means[n_level + j];
                squares[n_level + j] += d * d;
            }
        }
    }

    let mut scales = Vec::with_capacity(n_cols);
    for (i, name) in CONTINUOUS_INDICATORS
        .iter()
        .map(|s| s.to_string())
        .chain(
            lag_positions
                .iter()
                .map(|&p| format!("delta_{}", CONTINUOUS_INDICATORS[p])),
        )
        .enumerate()
    {
        scales.push(ColumnScale {
            column: name,
            mean: means[i],
            std: (squares[i] / count as f64).sqrt(),
        });
    }
    scales
}

/// `(value - mean) / std`, with the same zero-variance passthrough the
/// pipeline's standardizer applies.
fn standardized(value: f64, scale: &ColumnScale) -> f64 {
    if scale.std > 0.0 {
        (value - scale.mean) / scale.std
    } else {
        value
    }
}

/// Planted log-odds of one record, excluding the risk block and intercept
/// (those vary between calibration and sampling).
#[allow(clippy::too_many_arguments)]
fn base_log_odds(
    draw: &MunicipalityDraw,
    year_index: usize,
    scales: &[ColumnScale],
    planted: &[f64],
    lag_positions: &[usize],
    off_index: usize,
    demographic_offset: usize,
    geo_offset: usize,
) -> f64 {
    let n_level = CONTINUOUS_INDICATORS.len();
    let mut lo = 0.0;
    for i in 0..n_level {
        lo += planted[i] * standardized(draw.values[year_index][i], &scales[i]);
    }
    for (j, &p) in lag_positions.iter().enumerate() {
        let delta = if year_index == 0 {
            0.0
        } else {
            draw.values[year_index][p] - draw.values[year_index - 1][p]
        };
        lo += planted[n_level + j] * standardized(delta, &scales[n_level + j]);
    }
    if draw.off_balance[year_index] {
        lo += planted[off_index];
    }
    let category =
        demographic_category_of(draw.population).expect("generated population is at least 100");
    lo += planted[demographic_offset + category.level() as usize - 1];
    let geo_index = GeoArea::ALL
        .iter()
        .position(|a| *a == draw.geo_area)
        .expect("every area is listed");
    lo += planted[geo_offset + geo_index];
    lo
}

/// Find the intercept whose expected positive rate matches `target` to
/// within the calibration tolerance, by bisection over a bounded interval.
fn calibrate_intercept(log_odds: &[f64], target: f64) -> Result<(f64, f64)> {
    let n = log_odds.len() as f64;
    let expected = |b: f64| log_odds.iter().map(|&lo| sigmoid(lo + b)).sum::<f64>() / n;
    let within = |e: f64| (e - target).abs() <= CALIBRATION_TOLERANCE * target;

    let mut low = -INTERCEPT_BOUND;
    let mut high = INTERCEPT_BOUND;
    let expected_low = expected(low);
    let expected_high = expected(high);
    if within(expected_low) {
        return Ok((low, expected_low));
    }
    if within(expected_high) {
        return Ok((high, expected_high));
    }
    if expected_low > target || expected_high < target {
        return Err(Error::Calibration(format!(
            "target positive rate {target:.6} is unreachable for any intercept in \
             [{:.0}, {:.0}] (reachable rates span {expected_low:.6}..{expected_high:.6})",
            -INTERCEPT_BOUND, INTERCEPT_BOUND
        )));
    }
    for _ in 0..MAX_BISECTION_ITERATIONS {
        let mid = 0.5 * (low + high);
        let e = expected(mid);
        if within(e) {
            return Ok((mid, e));
        }
        if e < target {
            low = mid;
        } else {
            high = mid;
        }
    }
    Err(Error::Calibration(format!(
        "intercept bisection did not reach the target positive rate {target:.6} \
         within {MAX_BISECTION_ITERATIONS} iterations"
    )))
}

/// Labels and archive additions for one municipality, sampled year by year
/// so that a bankruptcy raises the risk level of the following years.
struct MunicipalityOutcome {
    rows: Vec<LogOddsRow>,
    new_events: Vec<DistressEvent>,
}

fn municipality_outcome(
    draw: &MunicipalityDraw,
    base: &[f64],
    risk_coefficients: &[f64],
    intercept: f64,
    years: &[Year],
) -> MunicipalityOutcome {
    let mut events = draw.pre_events.clone();
    let mut rows = Vec::with_capacity(years.len());
    let mut new_events = Vec::new();
    for (year_index, &year) in years.iter().enumerate() {
        let history: Vec<DistressEventKind> = events
            .iter()
            .filter(|e| e.year < year)
            .map(|e| e.kind)
            .collect();
        let risk = bankruptcy_risk_of(&history);
        let log_odds = base[year_index] + risk_coefficients[risk.level() as usize - 1] + intercept;
        let probability = sigmoid(log_odds);
        let label = draw.label_draws[year_index] < probability;
        rows.push(LogOddsRow {
            municipality_id: draw.id.clone(),
            year,
            log_odds,
            probability,
            label,
        });
        if label {
            let event = DistressEvent {
                municipality_id: draw.id.clone(),
                year,
                kind: DistressEventKind::Bankruptcy,
            };
            events.push(event.clone());
            new_events.push(event);
        }
    }
    MunicipalityOutcome { rows, new_events }
}

/// Generate a synthetic panel, its distress archive, and the ground truth
/// behind every label.
///
/// The returned panel is exactly what merging the generator's own rows and
/// archive produces, so writing the outputs with the CSV emitters and
/// re-ingesting them reproduces it bit for bit.
pub fn generate(config: &SynthConfig) -> Result<(Panel, DistressArchive, GroundTruth)> {
    validate_config(config)?;
    let columns = encoded_column_names(&LAG_FEATURES);
    let planted = densify_coefficients(&config.planted_coefficients, &columns)?;

    let n_level = CONTINUOUS_INDICATORS.len();
    let lag_positions: Vec<usize> = LAG_FEATURES
        .iter()
        .map(|n| {
            CONTINUOUS_INDICATORS
                .iter()
                .position(|c| c == n)
                .expect("every lag feature is a continuous indicator")
        })
        .collect();
    let off_index = n_level + lag_positions.len();
    let demographic_offset = off_index + 1;
    let geo_offset = demographic_offset + DemographicCategory::ALL.len();
    let risk_offset = geo_offset + GeoArea::ALL.len();
    let risk_coefficients = &planted[risk_offset..];

    let n_years = config.years.len();
    let years: Vec<Year> = config.years.iter().collect();

    // With a planted margin, exactly round(target · n) municipalities join
    // the distressed mode, drawn by a seeded shuffle. A per-municipality
    // coin would leave the saturated positive rate a binomial ±10% away
    // from the target, which the ±2% calibration tolerance cannot absorb.
    let distressed: Option<BTreeSet<usize>> = config.margin.map(|_| {
        let mut rng = stream(config.seed, "synth-distress", 0);
        let mut order: Vec<usize> = (0..config.n_municipalities).collect();
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let count = (config.target_prevalence * config.n_municipalities as f64).round();
        order.into_iter().take((count as usize).max(1)).collect()
    });

    let draws: Vec<MunicipalityDraw> = (0..config.n_municipalities)
        .into_par_iter()
        .map(|m| {
            let in_distressed_mode = distressed.as_ref().is_some_and(|set| set.contains(&m));
            draw_municipality(config, m, in_distressed_mode)
        })
        .collect();

    let scales = standardization_constants(&draws, &lag_positions);

    // Planted log-odds except risk and intercept, per (municipality, year).
    let base: Vec<Vec<f64>> = draws
        .par_iter()
        .map(|draw| {
            (0..n_years)
                .map(|year_index| {
                    base_log_odds(
                        draw,
                        year_index,
                        &scales,
                        &planted,
                        &lag_positions,
                        off_index,
                        demographic_offset,
                        geo_offset,
                    )
                })
                .collect()
        })
        .collect();

    // Calibrate against window-start risk levels: later bankruptcies are not
    // known yet, and sampling will shift realized prevalence only slightly.
    let calibration_logits: Vec<f64> = draws
        .iter()
        .zip(&base)
        .flat_map(|(draw, rows)| {
            let kinds: Vec<DistressEventKind> = draw.pre_events.iter().map(|e| e.kind).collect();
            let risk = bankruptcy_risk_of(&kinds);
            let shift = risk_coefficients[risk.level() as usize - 1];
            rows.iter().map(move |b| b + shift)
        })
        .collect();
    let (intercept, expected_prevalence) =
        calibrate_intercept(&calibration_logits, config.target_prevalence)?;

    let outcomes: Vec<MunicipalityOutcome> = draws
        .par_iter()
        .zip(&base)
        .map(|(draw, rows)| municipality_outcome(draw, rows, risk_coefficients, intercept, &years))
        .collect();

    let mut candidates = Vec::with_capacity(config.n_municipalities * n_years);
    for draw in &draws {
        for (year_index, &year) in years.iter().enumerate() {
            let v = &draw.values[year_index];
            candidates.push(CandidateRecord {
                municipality_id: draw.id.clone(),
                year,
                population: Some(draw.population),
                geo_area: draw.geo_area,
                incidence_of_investment: v[0],
                financial_autonomy_degree: v[1],
                indebtedness_per_capita: v[2],
                total_investment_financed_by_debt: v[3],
                rigid_expenditure: v[4],
                expense_management_speed: v[5],
                collecting_capacity: v[6],
                extra_budgetary_debts: v[7],
                off_balance_sheet_debts: draw.off_balance[year_index],
            });
        }
    }

    let mut events = Vec::new();
    for draw in &draws {
        events.extend(draw.pre_events.iter().cloned());
    }
    for outcome in &outcomes {
        events.extend(outcome.new_events.iter().cloned());
    }
    let archive = DistressArchive::new(events);

    let log_odds: Vec<LogOddsRow> = outcomes.into_iter().flat_map(|o| o.rows).collect();
    let realized_positives = log_odds.iter().filter(|r| r.label).count();

    let (panel, _) = merge_panel(&candidates, &archive, config.years);

    let ground_truth = GroundTruth {
        coefficients: columns.into_iter().zip(planted).collect(),
        intercept,
        target_prevalence: config.target_prevalence,
        expected_prevalence,
        realized_positives,
        standardization: scales,
        log_odds,
    };
    Ok((panel, archive, ground_truth))
}
