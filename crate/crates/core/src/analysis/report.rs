use std::io::Write;
use std::path::Path;

use indexmap::IndexMap;
use serde::Serialize;

use super::correlation::CorrelationResult;
use super::rank::RankResult;
use crate::diversity::Measure;
use crate::error::{Error, Result};
use crate::fsutil::atomic_write_with;

#[derive(Serialize)]
struct AnalysisJson<'a> {
    ranks: &'a RankResult,
    #[serde(skip_serializing_if = "IndexMap::is_empty")]
    correlations: IndexMap<&'static str, &'a CorrelationResult>,
}

/// Writes `analysis.json`, `ranks.csv` and, when there are correlations,
/// `correlations.csv` into `destination` (created if missing).
pub fn emit_report(
    ranks: &RankResult,
    correlations: &IndexMap<Measure, CorrelationResult>,
    destination: &Path,
) -> Result<()> {
    std::fs::create_dir_all(destination).map_err(|e| Error::io(destination, e))?;
    let json = AnalysisJson {
        ranks,
        correlations: correlations.iter().map(|(m, c)| (m.name(), c)).collect(),
    };
    let mut bytes = serde_json::to_vec_pretty(&json).expect("analysis serialises");
    bytes.push(b'\n');
    atomic_write_with(&destination.join("analysis.json"), |w| w.write_all(&bytes))?;

    let mut header = vec!["dataset".to_string(), "average_rank".to_string()];
    header.extend(ranks.tasks.iter().map(|t| format!("rank:{t}")));
    let mut rows = vec![header];
    for e in &ranks.entries {
        let mut row = vec![e.dataset.clone(), e.average_rank.to_string()];
        row.extend(e.per_task.iter().map(|r| r.map(|v| v.to_string()).unwrap_or_default()));
        rows.push(row);
    }
    write_csv(&destination.join("ranks.csv"), &rows)?;

    let corr_path = destination.join("correlations.csv");
    if correlations.is_empty() {
        if corr_path.exists() {
            std::fs::remove_file(&corr_path).map_err(|e| Error::io(&corr_path, e))?;
        }
        return Ok(());
    }
    let mut rows = vec![["measure", "rho", "p_value", "n", "method", "y_scaling"].map(String::from).to_vec()];
    for (m, c) in correlations {
        rows.push(vec![
            m.name().to_string(),
            c.rho.to_string(),
            c.p_value.to_string(),
            c.n.to_string(),
            c.method.clone(),
            c.y_scaling
                .map(|s| serde_json::to_value(s).expect("enum").as_str().unwrap_or_default().to_string())
                .unwrap_or_default(),
        ]);
    }
    write_csv(&corr_path, &rows)
}

fn write_csv(path: &Path, rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.write_record(r).map_err(|e| Error::Validation(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Validation(e.to_string()))?;
    atomic_write_with(path, |f| f.write_all(&bytes))
}
