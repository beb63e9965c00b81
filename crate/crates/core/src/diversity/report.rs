use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::entropy::LogBase;
use super::spectral::{HistogramSpec, RangeMode};
use crate::error::{Error, Result};

/// Diversity measures of one dataset. Measures that were not computed are
/// `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub dataset: String,
    pub sample_count: usize,
    pub h_continent: Option<f64>,
    pub h_biome: Option<f64>,
    pub h_landcover: Option<f64>,
    pub h_spectral: Option<f64>,
    pub per_band_entropy: Option<IndexMap<String, f64>>,
    pub sample_biome_entropy: Option<f64>,
    pub sample_landcover_entropy: Option<f64>,
    /// Samples or tiles left out of a measure, keyed by measure name.
    #[serde(default)]
    pub excluded: IndexMap<String, usize>,
    pub histogram: HistogramSpec,
    pub log_base: LogBase,
}

impl DiversityReport {
    pub fn new(dataset: impl Into<String>, sample_count: usize, histogram: HistogramSpec, log_base: LogBase) -> Self {
        DiversityReport {
            dataset: dataset.into(),
            sample_count,
            h_continent: None,
            h_biome: None,
            h_landcover: None,
            h_spectral: None,
            per_band_entropy: None,
            sample_biome_entropy: None,
            sample_landcover_entropy: None,
            excluded: IndexMap::new(),
            histogram,
            log_base,
        }
    }

    pub fn value(&self, m: Measure) -> Option<f64> {
        match m {
            Measure::Continent => self.h_continent,
            Measure::Biome => self.h_biome,
            Measure::Landcover => self.h_landcover,
            Measure::Spectral => self.h_spectral,
            Measure::SampleBiome => self.sample_biome_entropy,
            Measure::SampleLandcover => self.sample_landcover_entropy,
        }
    }
}

/// A scalar diversity measure usable for correlation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Measure {
    Continent,
    Biome,
    Landcover,
    Spectral,
    SampleBiome,
    SampleLandcover,
}

impl Measure {
    pub const ALL: [Measure; 6] = [
        Measure::Continent,
        Measure::Biome,
        Measure::Landcover,
        Measure::Spectral,
        Measure::SampleBiome,
        Measure::SampleLandcover,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Measure::Continent => "continent",
            Measure::Biome => "biome",
            Measure::Landcover => "landcover",
            Measure::Spectral => "spectral",
            Measure::SampleBiome => "sample-biome",
            Measure::SampleLandcover => "sample-landcover",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Measure> {
        Measure::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown measure `{s}`")))
    }
}

pub fn write_report_json(report: &DiversityReport, path: &Path) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(report).expect("report serialises");
    bytes.push(b'\n');
    crate::fsutil::atomic_write(path, &bytes)
}

pub fn read_report(path: &Path) -> Result<DiversityReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

const CSV_HEADER: [&str; 12] = [
    "dataset",
    "sample_count",
    "h_continent",
    "h_biome",
    "h_landcover",
    "h_spectral",
    "sample_biome_entropy",
    "sample_landcover_entropy",
    "log_base",
    "bins",
    "range_mode",
    "excluded",
];

/// Writes a header plus one flat row per report; empty cells for measures
/// that were not computed.
pub fn write_report_csv(reports: &[DiversityReport], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in reports {
        let excluded: Vec<String> = r.excluded.iter().map(|(k, v)| format!("{k}={v}")).collect();
        w.write_record([
            r.dataset.clone(),
            r.sample_count.to_string(),
            cell(r.h_continent),
            cell(r.h_biome),
            cell(r.h_landcover),
            cell(r.h_spectral),
            cell(r.sample_biome_entropy),
            cell(r.sample_landcover_entropy),
            r.log_base.to_string(),
            r.histogram.bins.to_string(),
            match r.histogram.range {
                RangeMode::PerSample => "per_sample".into(),
                RangeMode::Fixed { .. } => "fixed".into(),
            },
            excluded.join(";"),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Validation(e.to_string()))?;
    crate::fsutil::atomic_write_with(path, |f| f.write_all(&bytes))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Validation(format!("csv: {e}"))
}
