//! Parse the two input CSV schemas, merge events into labels and risk
//! levels, and clean the result — all on a small handwritten dataset, so
//! every transformation is visible.

use muniwarn::domain::YearRange;
use muniwarn::ingest::{
    clean, merge_panel, parse_distress_archive, parse_financial_panel, CleanPolicy, PanelSchema,
};

const PANEL_CSV: &str = "\
municipality_id,year,population,geo_area,incidence_of_investment,financial_autonomy_degree,\
indebtedness_per_capita,total_investment_financed_by_debt,rigid_expenditure,\
expense_management_speed,collecting_capacity,extra_budgetary_debts,off_balance_sheet_debts
A001,2016,1200,south,0.12,0.55,640,0.31,0.44,0.61,0.72,35,0
A001,2017,1180,south,0.10,0.52,702,0.35,0.47,0.58,0.69,41,1
A001,2017,1180,south,0.10,0.52,702,0.35,0.47,0.58,0.69,41,1
B002,2016,54000,north-west,0.18,0.71,388,0.22,0.39,0.74,,12,0
B002,2017,54150,north-west,0.19,0.72,365,0.21,0.38,0.75,0.81,11,0
C003,2016,800,islands,0.09,0.41,910,0.52,0.55,0.49,0.58,88,1
C003,2017,790,islands,not-a-number,0.40,too-much,0.55,0.57,0.47,0.55,92,1
";

const ARCHIVE_CSV: &str = "\
municipality_id,year,event_kind
C003,2014,pre-distress
C003,2017,bankruptcy
Z999,2015,bankruptcy
";

fn main() -> muniwarn::Result<()> {
    let (rows, diagnostics) = parse_financial_panel(PANEL_CSV.as_bytes(), &PanelSchema::default())?;
    println!(
        "parsed {} candidate rows, {} diagnostics:",
        rows.len(),
        diagnostics.len()
    );
    for d in &diagnostics {
        println!("  line {}: {:?} — {}", d.line, d.kind, d.message);
    }

    let archive = parse_distress_archive(ARCHIVE_CSV.as_bytes(), b',')?;
    println!("archive holds {} events", archive.events().len());

    // Labels: 1 exactly when a bankruptcy is declared that year. Risk
    // levels: computed from events strictly before the record's year, so
    // the feature never sees the future.
    let (panel, merge_report) = merge_panel(&rows, &archive, YearRange::new(2016, 2017)?);
    println!(
        "merged: {} records, {} positives; unknown archive municipalities: {:?}",
        panel.len(),
        panel.positives(),
        merge_report.unknown_archive_municipalities
    );

    let (cleaned, cleaning) = clean(panel, &CleanPolicy::default())?;
    println!(
        "cleaned: kept {}/{} rows, removed {} duplicates, imputed {:?}",
        cleaning.rows_kept,
        cleaning.rows_read,
        cleaning.duplicates_removed,
        cleaning.values_imputed
    );
    for record in &cleaned.records {
        println!(
            "  {} {}: label={} risk={:?} category={:?}",
            record.municipality_id,
            record.year,
            record.label.map(|l| l as u8).unwrap_or_default(),
            record.indicators.bankruptcy_risk,
            record.indicators.demographic_category
        );
    }
    Ok(())
}
