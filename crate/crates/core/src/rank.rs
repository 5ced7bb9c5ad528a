//! Rankings of models within a setting and their agreement across settings.
//!
//! Rank 1 is the lowest value, i.e. the best relative generalization. Ties on
//! the ranked value break by lower training error, then by model id.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::CdMeasurement;

/// Which measured quantity a ranking orders by.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankKey {
    #[default]
    Cd,
    P,
}

impl RankKey {
    fn of(self, m: &CdMeasurement) -> f64 {
        match self {
            RankKey::Cd => m.cd,
            RankKey::P => m.p,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedModel {
    pub model_id: String,
    pub value: f64,
    pub err: f64,
    pub rank: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub setting_id: String,
    #[serde(default)]
    pub key: RankKey,
    pub ordered: Vec<RankedModel>,
}

impl Ranking {
    pub fn model_ids(&self) -> Vec<&str> {
        self.ordered.iter().map(|r| r.model_id.as_str()).collect()
    }

    pub fn rank_of(&self, model_id: &str) -> Option<usize> {
        self.ordered.iter().find(|r| r.model_id == model_id).map(|r| r.rank)
    }

    /// Ranks are `1..=n` in order and values never decrease.
    pub fn is_valid(&self) -> bool {
        self.ordered.iter().enumerate().all(|(i, r)| r.rank == i + 1)
            && self.ordered.windows(2).all(|w| w[0].value <= w[1].value)
    }
}

fn tie_break(a: &RankedModel, b: &RankedModel) -> Ordering {
    a.value
        .total_cmp(&b.value)
        .then(a.err.total_cmp(&b.err))
        .then_with(|| a.model_id.cmp(&b.model_id))
}

fn order(setting_id: &str, key: RankKey, mut entries: Vec<RankedModel>) -> Result<Ranking> {
    if entries.is_empty() {
        return Err(Error::argument(format!("no measurements to rank for setting `{setting_id}`")));
    }
    let mut seen = BTreeSet::new();
    for e in &entries {
        if !seen.insert(e.model_id.as_str()) {
            return Err(Error::argument(format!(
                "model `{}` appears twice in setting `{setting_id}`",
                e.model_id
            )));
        }
    }
    entries.sort_by(tie_break);
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = i + 1;
    }
    Ok(Ranking {
        setting_id: setting_id.to_string(),
        key,
        ordered: entries,
    })
}

/// Orders the measurements of one setting by `key`.
pub fn rank_by(measurements: &[CdMeasurement], setting_id: &str, key: RankKey) -> Result<Ranking> {
    if let Some(other) = measurements.iter().find(|m| m.setting_id != setting_id) {
        return Err(Error::argument(format!(
            "measurement of `{}` belongs to setting `{}`, not `{setting_id}`",
            other.model_id, other.setting_id
        )));
    }
    let entries = measurements
        .iter()
        .map(|m| RankedModel {
            model_id: m.model_id.clone(),
            value: key.of(m),
            err: m.err,
            rank: 0,
        })
        .collect();
    order(setting_id, key, entries)
}

pub fn rank_by_cd(measurements: &[CdMeasurement], setting_id: &str) -> Result<Ranking> {
    rank_by(measurements, setting_id, RankKey::Cd)
}

pub fn rank_by_p(measurements: &[CdMeasurement], setting_id: &str) -> Result<Ranking> {
    rank_by(measurements, setting_id, RankKey::P)
}

/// Sorts a ranking's own entries again.
pub fn rerank(r: &Ranking) -> Result<Ranking> {
    order(&r.setting_id, r.key, r.ordered.clone())
}

/// Kendall's τ between two rankings of the same models:
/// `(concordant − discordant) / (n(n − 1)/2)`. A single model gives 1.
pub fn kendall_tau(a: &Ranking, b: &Ranking) -> Result<f64> {
    let pos_b: HashMap<&str, usize> = b
        .ordered
        .iter()
        .enumerate()
        .map(|(i, r)| (r.model_id.as_str(), i))
        .collect();
    let same_set = a.ordered.len() == b.ordered.len() && a.ordered.iter().all(|r| pos_b.contains_key(r.model_id.as_str()));
    if !same_set {
        return Err(Error::argument(format!(
            "rankings `{}` and `{}` cover different models: {:?} vs {:?}",
            a.setting_id,
            b.setting_id,
            a.model_ids(),
            b.model_ids()
        )));
    }
    let n = a.ordered.len() as i64;
    if n < 2 {
        return Ok(1.0);
    }
    let in_b: Vec<usize> = a.ordered.iter().map(|r| pos_b[r.model_id.as_str()]).collect();
    let mut score = 0i64;
    for i in 0..in_b.len() {
        for j in i + 1..in_b.len() {
            score += if in_b[i] < in_b[j] { 1 } else { -1 };
        }
    }
    let pairs = n * (n - 1) / 2;
    Ok(score as f64 / pairs as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub rankings: Vec<Ranking>,
    /// Symmetric, unit diagonal; entry `[i][j]` is τ between rankings `i` and `j`.
    pub tau_matrix: Vec<Vec<f64>>,
    pub min_tau: f64,
    /// Every pair of rankings agrees exactly.
    pub consistent: bool,
}

pub fn consistency_report(rankings: &[Ranking]) -> Result<ConsistencyReport> {
    if rankings.len() < 2 {
        return Err(Error::argument(format!(
            "consistency needs at least two rankings, got {}",
            rankings.len()
        )));
    }
    let n = rankings.len();
    let mut tau = vec![vec![1.0; n]; n];
    let mut min_tau = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            let t = kendall_tau(&rankings[i], &rankings[j])?;
            tau[i][j] = t;
            tau[j][i] = t;
            min_tau = min_tau.min(t);
        }
    }
    Ok(ConsistencyReport {
        rankings: rankings.to_vec(),
        tau_matrix: tau,
        min_tau,
        consistent: min_tau == 1.0,
    })
}

/// Plain-text table with one block per setting, rows ordered by CD rank:
/// setting, model, training set size, training error, `p/Rank`, `CD/Rank`.
pub fn render_table(groups: &[(String, Vec<CdMeasurement>)]) -> Result<String> {
    let header = ["Setting", "Model", "Training set size", "Training error", "p/Rank", "CD/Rank"];
    let mut rows: Vec<[String; 6]> = Vec::new();
    let mut block_ends = Vec::new();
    for (setting, ms) in groups {
        let by_cd = rank_by_cd(ms, setting)?;
        let by_p = rank_by_p(ms, setting)?;
        for (i, entry) in by_cd.ordered.iter().enumerate() {
            let m = ms.iter().find(|m| m.model_id == entry.model_id).expect("ranked from ms");
            rows.push([
                if i == 0 { setting.clone() } else { String::new() },
                m.model_id.clone(),
                m.m.to_string(),
                format!("{:.3}", m.err),
                format!("{:.3}/{}", m.p, by_p.rank_of(&m.model_id).expect("same models")),
                format!("{:.3}/{}", m.cd, entry.rank),
            ]);
        }
        block_ends.push(rows.len());
    }
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let rule: String = widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-");
    let line = |cells: &[String]| -> String {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join(" | ")
            .trim_end()
            .to_string()
    };
    let mut out = String::new();
    writeln!(out, "{}", line(&header.map(String::from))).unwrap();
    writeln!(out, "{rule}").unwrap();
    for (i, row) in rows.iter().enumerate() {
        writeln!(out, "{}", line(row)).unwrap();
        if block_ends.contains(&(i + 1)) {
            writeln!(out, "{rule}").unwrap();
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(super) fn meas(model: &str, setting: &str, p: f64, cd: f64, err: f64) -> CdMeasurement {
        CdMeasurement {
            p,
            delta: cd - p,
            cd,
            bound_prob: 1.0 - (2.0 + err).powi(-4),
            alpha: 1.0,
            m: 10_000,
            err,
            model_id: model.into(),
            setting_id: setting.into(),
            seed: 0,
        }
    }

    fn ranking(ids: &[&str]) -> Ranking {
        let ms: Vec<_> = ids
            .iter()
            .enumerate()
            .map(|(i, id)| meas(id, "s", 0.1, 0.1 * (i + 1) as f64, 0.0))
            .collect();
        rank_by_cd(&ms, "s").unwrap()
    }

    #[test]
    fn single_model_ranks_first() {
        let r = rank_by_cd(&[meas("a", "s", 0.2, 0.3, 0.1)], "s").unwrap();
        assert_eq!(r.ordered[0].rank, 1);
        assert!(r.is_valid());
    }

    #[test]
    fn ties_break_by_err_then_id() {
        let ms = vec![
            meas("zeta", "s", 0.2, 0.5, 0.1),
            meas("alpha", "s", 0.2, 0.5, 0.1),
            meas("beta", "s", 0.2, 0.5, 0.05),
        ];
        let r = rank_by_cd(&ms, "s").unwrap();
        assert_eq!(r.model_ids(), vec!["beta", "alpha", "zeta"]);
    }

    #[test]
    fn duplicates_and_foreign_settings_are_rejected() {
        let ms = vec![meas("a", "s", 0.1, 0.2, 0.0), meas("a", "s", 0.1, 0.3, 0.0)];
        assert!(matches!(rank_by_cd(&ms, "s"), Err(Error::Argument(_))));
        let ms = vec![meas("a", "s", 0.1, 0.2, 0.0), meas("b", "t", 0.1, 0.3, 0.0)];
        assert!(rank_by_cd(&ms, "s").is_err());
        assert!(rank_by_cd(&[], "s").is_err());
    }

    #[test]
    fn tau_extremes_and_one_swap() {
        let a = ranking(&["w", "x", "y", "z"]);
        assert_eq!(kendall_tau(&a, &a).unwrap(), 1.0);
        assert_eq!(kendall_tau(&a, &ranking(&["z", "y", "x", "w"])).unwrap(), -1.0);
        let swapped = ranking(&["w", "y", "x", "z"]);
        assert!((kendall_tau(&a, &swapped).unwrap() - 4.0 / 6.0).abs() < 1e-15);
        assert!(kendall_tau(&a, &ranking(&["w", "x", "y", "q"])).is_err());
        assert!(kendall_tau(&a, &ranking(&["w", "x", "y"])).is_err());
    }

    #[test]
    fn report_needs_two_and_flags_reversal() {
        let a = ranking(&["a", "b", "c"]);
        assert!(consistency_report(std::slice::from_ref(&a)).is_err());
        let same = consistency_report(&[a.clone(), a.clone(), a.clone()]).unwrap();
        assert!(same.consistent);
        assert_eq!(same.min_tau, 1.0);
        let rev = consistency_report(&[a.clone(), a.clone(), ranking(&["c", "b", "a"])]).unwrap();
        assert_eq!(rev.min_tau, -1.0);
        assert!(!rev.consistent);
        for i in 0..3 {
            assert_eq!(rev.tau_matrix[i][i], 1.0);
            for j in 0..3 {
                assert_eq!(rev.tau_matrix[i][j], rev.tau_matrix[j][i]);
            }
        }
    }

    #[test]
    fn table_has_the_expected_columns() {
        let groups = vec![(
            "2-class".to_string(),
            vec![meas("big", "2-class", 0.1, 0.2, 0.05), meas("small", "2-class", 0.3, 0.35, 0.2)],
        )];
        let t = render_table(&groups).unwrap();
        assert!(t.contains("p/Rank") && t.contains("CD/Rank"));
        assert!(t.contains("0.100/1") && t.contains("0.350/2"));
    }
}
