//! Tile acquisition: fetch a tile per manifest sample, optionally normalise
//! it, and store it as `<id>.tif` with a `<id>.json` sidecar holding its
//! checksum.

mod catalog;
mod normalize;
mod source;

pub use catalog::{order_candidates, CatalogSource, DirCatalog, HttpCatalog, RetryPolicy, Scene, SceneCatalog};
pub use normalize::{denormalize, denormalize_value, normalize, BandStat, BandStats};
pub use source::{crop_centered, fetch_tile, FetchedTile, LocalStore, TileMetadata, TileRequest, TileSource};

use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, FetchError, Result};
use crate::fsutil::{atomic_write, partial_path};
use crate::manifest::{DatasetManifest, GeoSample};
use crate::raster::encode_geotiff;

/// File name of the updated manifest inside the output directory.
pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Clone, Debug, PartialEq)]
pub struct IngestOptions {
    pub date_window: (NaiveDate, NaiveDate),
    pub max_cloud_pct: f64,
    /// (height, width)
    pub size_px: (usize, usize),
    pub parallelism: usize,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            date_window: (
                NaiveDate::from_ymd_opt(2024, 1, 1).expect("valid date"),
                NaiveDate::from_ymd_opt(2024, 12, 31).expect("valid date"),
            ),
            max_cloud_pct: 20.0,
            size_px: (96, 96),
            parallelism: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    CloudRejected,
    Unavailable,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleFailure {
    pub id: String,
    pub kind: FailureKind,
    pub message: String,
}

/// Per-category counts. `succeeded + cloud_rejected + unavailable + failed
/// + skipped == total`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub total: usize,
    pub succeeded: usize,
    pub cloud_rejected: usize,
    pub unavailable: usize,
    pub failed: usize,
    pub skipped: usize,
    /// In manifest order.
    pub failures: Vec<SampleFailure>,
}

impl IngestReport {
    pub fn is_conserved(&self) -> bool {
        self.succeeded + self.cloud_rejected + self.unavailable + self.failed + self.skipped == self.total
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IngestOutcome {
    pub report: IngestReport,
    /// Samples with a stored tile, `tile_uri` set relative to the output
    /// directory.
    pub manifest: DatasetManifest,
}

/// Sidecar written next to each stored tile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TileRecord {
    pub sha256: String,
    pub normalized: bool,
    pub acquisition_date: Option<NaiveDate>,
    pub cloud_cover_pct: Option<f64>,
}

enum Outcome {
    Stored(TileRecord),
    Skipped(TileRecord),
    Failed(FailureKind, String),
}

/// Fetches, optionally normalises and stores a tile for every sample of
/// `manifest`. Per-sample failures are counted, not returned. Re-running
/// over the same directory skips samples whose stored tile still matches its
/// sidecar checksum.
///
/// Writes `<out_dir>/<id>.tif`, `<out_dir>/<id>.json` and
/// `<out_dir>/manifest.jsonl`. An empty manifest writes nothing.
pub fn ingest_manifest(
    manifest: &DatasetManifest,
    source: &dyn TileSource,
    stats: Option<&BandStats>,
    out_dir: &Path,
    opts: &IngestOptions,
) -> Result<IngestOutcome> {
    manifest.validate()?;
    if opts.parallelism == 0 {
        return Err(Error::Config("parallelism must be at least 1".into()));
    }
    if let Some(s) = stats {
        s.validate()?;
    }
    let mut updated = manifest.clone();
    updated.samples.clear();
    if manifest.is_empty() {
        return Ok(IngestOutcome {
            report: IngestReport::default(),
            manifest: updated,
        });
    }
    ensure_writable(out_dir)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.parallelism)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let outcomes: Vec<Outcome> = pool.install(|| {
        manifest
            .samples
            .par_iter()
            .map(|s| ingest_one(s, source, stats, out_dir, opts))
            .collect()
    });

    let mut report = IngestReport {
        total: manifest.len(),
        ..IngestReport::default()
    };
    for (sample, outcome) in manifest.samples.iter().zip(outcomes) {
        let record = match outcome {
            Outcome::Stored(r) => {
                report.succeeded += 1;
                r
            }
            Outcome::Skipped(r) => {
                report.skipped += 1;
                r
            }
            Outcome::Failed(kind, message) => {
                match kind {
                    FailureKind::CloudRejected => report.cloud_rejected += 1,
                    FailureKind::Unavailable => report.unavailable += 1,
                    FailureKind::Failed => report.failed += 1,
                }
                report.failures.push(SampleFailure {
                    id: sample.id.clone(),
                    kind,
                    message,
                });
                continue;
            }
        };
        let mut s = sample.clone();
        s.tile_uri = Some(format!("{}.tif", s.id));
        s.acquisition_date = record.acquisition_date.or(s.acquisition_date);
        s.cloud_cover_pct = record.cloud_cover_pct.or(s.cloud_cover_pct);
        updated.samples.push(s);
    }
    debug_assert!(report.is_conserved());
    atomic_write(&out_dir.join(MANIFEST_FILE), &updated.to_jsonl())?;
    Ok(IngestOutcome {
        report,
        manifest: updated,
    })
}

fn ensure_writable(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let probe = partial_path(&dir.join(".write-probe"));
    std::fs::write(&probe, b"").map_err(|e| Error::io(dir, e))?;
    std::fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// The stored record when `<id>.tif` exists and matches its sidecar.
fn existing(out_dir: &Path, id: &str, normalized: bool) -> Option<TileRecord> {
    let text = std::fs::read_to_string(out_dir.join(format!("{id}.json"))).ok()?;
    let record: TileRecord = serde_json::from_str(&text).ok()?;
    if record.normalized != normalized {
        return None;
    }
    let bytes = std::fs::read(out_dir.join(format!("{id}.tif"))).ok()?;
    (sha256_hex(&bytes) == record.sha256).then_some(record)
}

fn ingest_one(
    sample: &GeoSample,
    source: &dyn TileSource,
    stats: Option<&BandStats>,
    out_dir: &Path,
    opts: &IngestOptions,
) -> Outcome {
    // ids become file names
    if sample.id.contains(['/', '\\']) || sample.id.starts_with('.') {
        return Outcome::Failed(FailureKind::Failed, format!("id `{}` is not a valid file name", sample.id));
    }
    let normalized = stats.is_some();
    if let Some(r) = existing(out_dir, &sample.id, normalized) {
        return Outcome::Skipped(r);
    }
    let request = TileRequest {
        sample_id: sample.id.clone(),
        lat: sample.lat,
        lon: sample.lon,
        size_px: opts.size_px,
        date_window: opts.date_window,
        max_cloud_pct: opts.max_cloud_pct,
    };
    if let Err(e) = request.validate() {
        return Outcome::Failed(FailureKind::Failed, e.to_string());
    }
    let fetched = match source.fetch(&request) {
        Ok(f) => f,
        Err(e) => {
            let kind = match e {
                FetchError::CloudFilter { .. } => FailureKind::CloudRejected,
                FetchError::Unavailable(_) => FailureKind::Unavailable,
                FetchError::Source(_) => FailureKind::Failed,
            };
            return Outcome::Failed(kind, e.to_string());
        }
    };
    let encoded = match (stats, fetched.original_bytes) {
        (None, Some(bytes)) => Ok(bytes),
        (None, None) => encode_geotiff(&fetched.tile),
        (Some(s), _) => normalize(&fetched.tile, s).and_then(|t| encode_geotiff(&t)),
    };
    let bytes = match encoded {
        Ok(b) => b,
        Err(e) => return Outcome::Failed(FailureKind::Failed, e.to_string()),
    };
    let record = TileRecord {
        sha256: sha256_hex(&bytes),
        normalized,
        acquisition_date: fetched.acquisition_date,
        cloud_cover_pct: fetched.cloud_cover_pct,
    };
    let mut sidecar = serde_json::to_vec_pretty(&record).expect("record serialises");
    sidecar.push(b'\n');
    let written = atomic_write(&out_dir.join(format!("{}.tif", sample.id)), &bytes)
        .and_then(|()| atomic_write(&out_dir.join(format!("{}.json", sample.id)), &sidecar));
    match written {
        Ok(()) => Outcome::Stored(record),
        Err(e) => Outcome::Failed(FailureKind::Failed, e.to_string()),
    }
}
