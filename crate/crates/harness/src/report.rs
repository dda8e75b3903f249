//! Report tables and their CSV / JSON files.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cmtg_learn::metrics::UpdateMetrics;
use cmtg_learn::K;
use cmtg_stats::CiMethod;
use serde::{Deserialize, Serialize};

use crate::{HarnessError, Result};

/// Settings shared by every statistic in a report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatSettings {
    pub resamples: usize,
    pub seed: u64,
    pub ci_method: CiMethod,
    pub confidence: f64,
}

impl Default for StatSettings {
    fn default() -> Self {
        StatSettings { resamples: 10_000, seed: 0x0b00_7571, ci_method: CiMethod::Percentile, confidence: 0.95 }
    }
}

/// One (deck, agent) line. The first nine columns follow the headline
/// table layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub deck: String,
    pub agent: String,
    /// Mean of per-(seed, opponent) win rates.
    pub win_rate: f64,
    /// Wilson interval on pooled decisive games.
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_s: usize,
    pub delta_pp: Option<f64>,
    pub p_boot: Option<f64>,
    pub p_holm: Option<f64>,
    pub family: Option<String>,
    pub reference: Option<String>,
    pub wins: u64,
    pub draws: u64,
    pub losses: u64,
    /// Bootstrap interval of the mean cell rate.
    pub boot_low: Option<f64>,
    pub boot_high: Option<f64>,
    pub boot_method: String,
}

/// One (agent, deck, seed, opponent) evaluation cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRow {
    pub agent: String,
    pub deck: String,
    pub seed: u64,
    pub opponent: String,
    pub wins: u64,
    pub draws: u64,
    pub losses: u64,
    pub win_rate: Option<f64>,
}

/// Leave-one-out transfer line for one agent. Δ is in percentage points,
/// positive for a drop on the held-out opponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferRow {
    pub agent: String,
    pub in_dist: f64,
    pub held_out: f64,
    /// Δ from rates pooled over all folds.
    pub delta_pooled_pp: f64,
    /// Mean of per-fold Δ.
    pub delta_fold_mean_pp: f64,
    pub n_folds: usize,
    pub n_s: usize,
    pub p_boot: f64,
    pub p_holm: f64,
    pub family: String,
}

/// A pre-registered comparison family and its Holm adjustment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Family {
    pub name: String,
    pub members: Vec<String>,
    pub p_boot: Vec<f64>,
    pub p_holm: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub agent: String,
    pub seed: u64,
    pub update: usize,
    pub env_steps: u64,
    pub corr: [f64; K],
    pub credit_share: [f64; K],
    pub gate_mean: f64,
    pub gate_min: f64,
    pub gate_max: f64,
}

impl CalibrationRow {
    pub fn series(agent: &str, seed: u64, metrics: &[UpdateMetrics]) -> Vec<CalibrationRow> {
        metrics
            .iter()
            .map(|m| CalibrationRow {
                agent: agent.to_string(),
                seed,
                update: m.update,
                env_steps: m.env_steps,
                corr: m.calibration.corr,
                credit_share: m.calibration.credit_share,
                gate_mean: m.calibration.gate_mean,
                gate_min: m.calibration.gate_min,
                gate_max: m.calibration.gate_max,
            })
            .collect()
    }
}

/// Per-turn factor values, advantages and predicted effects of one
/// episode. `v_k` is taken at the turn's first agent decision; `a_k` and
/// `eps_k` are summed over the turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStudyRow {
    pub turn: u32,
    pub decisions: usize,
    pub v_k: [f64; K],
    pub a_k: [f64; K],
    pub eps_k: [f64; K],
    pub gate: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StatReport {
    pub kind: String,
    pub settings: Option<StatSettings>,
    pub summary: Vec<SummaryRow>,
    pub cells: Vec<CellRow>,
    pub transfer: Vec<TransferRow>,
    pub families: Vec<Family>,
    pub calibration: Vec<CalibrationRow>,
    pub case_study: Vec<CaseStudyRow>,
}

impl StatReport {
    pub fn new(kind: &str) -> Self {
        StatReport { kind: kind.to_string(), ..Default::default() }
    }

    pub fn is_empty(&self) -> bool {
        self.summary.is_empty()
            && self.cells.is_empty()
            && self.transfer.is_empty()
            && self.calibration.is_empty()
            && self.case_study.is_empty()
    }

    /// Every adjusted p is at least its raw p and belongs to a named family.
    pub fn check(&self) -> Result<()> {
        let fams: BTreeMap<&str, &Family> = self.families.iter().map(|f| (f.name.as_str(), f)).collect();
        for f in &self.families {
            if f.members.len() != f.p_boot.len() || f.p_boot.len() != f.p_holm.len() {
                return Err(HarnessError::Invariant(format!("family {} has ragged columns", f.name)));
            }
            for (raw, adj) in f.p_boot.iter().zip(&f.p_holm) {
                if adj < raw {
                    return Err(HarnessError::Invariant(format!("family {}: p_holm {adj} < p_boot {raw}", f.name)));
                }
            }
        }
        let check_row = |family: Option<&str>, raw: Option<f64>, adj: Option<f64>, what: &str| -> Result<()> {
            if let (Some(r), Some(a)) = (raw, adj) {
                if a < r {
                    return Err(HarnessError::Invariant(format!("{what}: p_holm {a} < p_boot {r}")));
                }
            }
            if adj.is_some() {
                let name = family.ok_or_else(|| HarnessError::Invariant(format!("{what}: adjusted p without family")))?;
                if !fams.contains_key(name) {
                    return Err(HarnessError::Invariant(format!("{what}: unknown family {name}")));
                }
            }
            Ok(())
        };
        for r in &self.summary {
            check_row(r.family.as_deref(), r.p_boot, r.p_holm, &format!("{}/{}", r.deck, r.agent))?;
        }
        for r in &self.transfer {
            check_row(Some(&r.family), Some(r.p_boot), Some(r.p_holm), &r.agent)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(HarnessError::UnknownFormat(other.to_string())),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

/// Write `rep` under `dir`; returns the files written.
pub fn report(rep: &StatReport, format: Format, dir: &Path) -> Result<Vec<PathBuf>> {
    if rep.is_empty() {
        return Err(HarnessError::EmptyReport);
    }
    rep.check()?;
    std::fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    match format {
        Format::Json => {
            let p = dir.join(format!("{}.json", rep.kind));
            std::fs::write(&p, serde_json::to_string_pretty(rep)?)?;
            out.push(p);
        }
        Format::Csv => {
            let stem = |name: &str| dir.join(format!("{}_{name}.csv", rep.kind));
            if !rep.summary.is_empty() {
                out.push(write_serde(&rep.summary, &stem("summary"))?);
            }
            if !rep.cells.is_empty() {
                out.push(write_serde(&rep.cells, &stem("cells"))?);
            }
            if !rep.transfer.is_empty() {
                out.push(write_serde(&rep.transfer, &stem("transfer"))?);
            }
            if !rep.calibration.is_empty() {
                out.push(write_calibration(&rep.calibration, &stem("calibration"))?);
            }
            if !rep.case_study.is_empty() {
                out.push(write_case_study(&rep.case_study, &stem("case_study"))?);
            }
        }
    }
    Ok(out)
}

fn write_serde<T: Serialize>(rows: &[T], path: &Path) -> Result<PathBuf> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(path.to_path_buf())
}

fn factor_cols(prefix: &str) -> Vec<String> {
    cmtg_core::scm::FACTORS.iter().map(|f| format!("{prefix}_{}", f.name())).collect()
}

fn nums(xs: &[f64]) -> impl Iterator<Item = String> + '_ {
    xs.iter().map(|x| x.to_string())
}

/// Three channels: per-factor correlation, credit-share stack, gate stats.
fn write_calibration(rows: &[CalibrationRow], path: &Path) -> Result<PathBuf> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = ["agent", "seed", "update", "env_steps"].map(String::from).to_vec();
    header.extend(factor_cols("corr"));
    header.extend(factor_cols("share"));
    header.extend(["gate_mean", "gate_min", "gate_max"].map(String::from));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.agent.clone(), r.seed.to_string(), r.update.to_string(), r.env_steps.to_string()];
        rec.extend(nums(&r.corr));
        rec.extend(nums(&r.credit_share));
        rec.extend(nums(&[r.gate_mean, r.gate_min, r.gate_max]));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(path.to_path_buf())
}

fn write_case_study(rows: &[CaseStudyRow], path: &Path) -> Result<PathBuf> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = vec!["turn".into(), "decisions".into()];
    header.extend(factor_cols("v"));
    header.extend(factor_cols("a"));
    header.extend(factor_cols("eps"));
    header.push("gate".into());
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.turn.to_string(), r.decisions.to_string()];
        rec.extend(nums(&r.v_k));
        rec.extend(nums(&r.a_k));
        rec.extend(nums(&r.eps_k));
        rec.push(r.gate.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(path.to_path_buf())
}
