use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::experiment::{CellOutcome, RunRecord};
use crate::error::{Error, Result};
use crate::rank::{self, ConsistencyReport, RankKey, Ranking};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Table,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            "table" => Ok(Self::Table),
            other => Err(Error::argument(format!("unknown report format `{other}` (csv, json, table)"))),
        }
    }
}

/// The JSON report: the record plus consistency of its CD and `p` rankings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JsonReport {
    pub record: RunRecord,
    pub cd_consistency: Option<ConsistencyReport>,
    pub p_consistency: Option<ConsistencyReport>,
}

/// One ranking per setting, over the averaged measurements.
pub fn rankings(record: &RunRecord, key: RankKey) -> Result<Vec<Ranking>> {
    record
        .measurements_by_setting()
        .iter()
        .map(|(s, ms)| rank::rank_by(ms, s, key))
        .collect()
}

/// Consistency across settings, or `None` with fewer than two settings.
/// Settings that lost a model to failed cells are left out.
pub fn consistency(record: &RunRecord, key: RankKey) -> Result<Option<ConsistencyReport>> {
    let all = rankings(record, key)?;
    let full = record.config.models.len();
    let complete: Vec<Ranking> = all.into_iter().filter(|r| r.ordered.len() == full).collect();
    if complete.len() < 2 {
        return Ok(None);
    }
    rank::consistency_report(&complete).map(Some)
}

pub const CELL_CSV_HEADER: &str =
    "cell,dataset_id,optimizer_id,repeat,p,delta,cd,bound_prob,alpha,m,err,model_id,setting_id,seed";

fn cells_csv(record: &RunRecord) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| Error::format("<csv output>", e.to_string());
    w.write_record(CELL_CSV_HEADER.split(',')).map_err(to_err)?;
    for c in record.successful_cells() {
        let m = c.measurement().expect("successful");
        w.write_record([
            c.key.index.to_string(),
            c.key.dataset_id.clone(),
            c.key.optimizer_id.clone(),
            c.key.repeat.to_string(),
            m.p.to_string(),
            m.delta.to_string(),
            m.cd.to_string(),
            m.bound_prob.to_string(),
            m.alpha.to_string(),
            m.m.to_string(),
            m.err.to_string(),
            m.model_id.clone(),
            m.setting_id.clone(),
            m.seed.to_string(),
        ])
        .map_err(to_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::format("<csv output>", e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

fn consistency_lines(out: &mut String, label: &str, report: &Option<ConsistencyReport>) {
    match report {
        Some(r) => {
            let verdict = if r.consistent { "consistent" } else { "inconsistent" };
            writeln!(out, "{label} ranking across {} settings: min_tau = {:.4} ({verdict})", r.rankings.len(), r.min_tau).unwrap();
        }
        None => writeln!(out, "{label} ranking: fewer than two complete settings").unwrap(),
    }
}

/// Renders `record` in `format`. Requires at least one successful cell.
pub fn emit_report(record: &RunRecord, format: ReportFormat) -> Result<String> {
    if record.successful_cells().next().is_none() {
        return Err(Error::argument("run record has no successful cells"));
    }
    match format {
        ReportFormat::Csv => cells_csv(record),
        ReportFormat::Json => {
            let doc = JsonReport {
                record: record.clone(),
                cd_consistency: consistency(record, RankKey::Cd)?,
                p_consistency: consistency(record, RankKey::P)?,
            };
            Ok(serde_json::to_string_pretty(&doc).expect("report serializes"))
        }
        ReportFormat::Table => {
            let mut out = rank::render_table(&record.measurements_by_setting())?;
            consistency_lines(&mut out, "CD", &consistency(record, RankKey::Cd)?);
            consistency_lines(&mut out, "p", &consistency(record, RankKey::P)?);
            let failed: Vec<String> = record
                .failed_cells()
                .map(|c| match &c.outcome {
                    CellOutcome::Failed { error } => format!("cell {} ({}): {error}", c.key.index, c.setting_id),
                    CellOutcome::Ok { .. } => unreachable!(),
                })
                .collect();
            if !failed.is_empty() {
                writeln!(out, "failed cells:").unwrap();
                for f in failed {
                    writeln!(out, "  {f}").unwrap();
                }
            }
            Ok(out)
        }
    }
}

/// Plot-ready CSV: one row per setting, one CD column per model.
pub fn plot_csv(record: &RunRecord) -> Result<String> {
    let models: Vec<&str> = record.config.models.iter().map(|m| m.id.as_str()).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| Error::format("<csv output>", e.to_string());
    w.write_record(std::iter::once("setting").chain(models.iter().copied())).map_err(to_err)?;
    for (setting, ms) in record.measurements_by_setting() {
        let row: Vec<String> = std::iter::once(setting)
            .chain(models.iter().map(|id| {
                ms.iter()
                    .find(|m| m.model_id == *id)
                    .map_or_else(String::new, |m| m.cd.to_string())
            }))
            .collect();
        w.write_record(&row).map_err(to_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::format("<csv output>", e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}
