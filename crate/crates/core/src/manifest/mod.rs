//! Dataset manifests: the sample records of a dataset and their JSONL form.
//!
//! A manifest file is one header object followed by one object per sample:
//!
//! ```text
//! {"schema_version":1,"name":"global","groups":["Africa",...],"allocation":[0.5,...],"seed":7}
//! {"id":"global-Africa-000000","lat":..,"lon":..,"group_label":"Africa","acquisition_date":null,...}
//! ```
//!
//! Keys always appear in the order above, so writing the same manifest twice
//! yields identical bytes.

mod subsets;

pub use subsets::{build_downstream_subsets, build_global_subset, split_counts, SplitSpec, Splits};

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoSample {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
    pub group_label: String,
    pub acquisition_date: Option<NaiveDate>,
    pub cloud_cover_pct: Option<f64>,
    pub tile_uri: Option<String>,
    pub class_label: Option<String>,
}

impl GeoSample {
    pub fn new(id: impl Into<String>, lat: f64, lon: f64, group_label: impl Into<String>) -> Self {
        GeoSample {
            id: id.into(),
            lat,
            lon,
            group_label: group_label.into(),
            acquisition_date: None,
            cloud_cover_pct: None,
            tile_uri: None,
            class_label: None,
        }
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if !(-90.0..=90.0).contains(&self.lat) {
            return Err(format!("lat {} outside [-90, 90]", self.lat));
        }
        if !(-180.0..=180.0).contains(&self.lon) {
            return Err(format!("lon {} outside [-180, 180]", self.lon));
        }
        if let Some(c) = self.cloud_cover_pct {
            if !(0.0..=100.0).contains(&c) {
                return Err(format!("cloud_cover_pct {c} outside [0, 100]"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub name: String,
    pub groups: Vec<String>,
    /// Declared target proportions, aligned with `groups`.
    pub allocation: Vec<f64>,
    pub samples: Vec<GeoSample>,
    pub seed: u64,
    pub schema_version: u32,
}

#[derive(Serialize, Deserialize)]
struct Header {
    schema_version: u32,
    name: String,
    groups: Vec<String>,
    allocation: Vec<f64>,
    seed: u64,
}

impl DatasetManifest {
    pub fn new(name: impl Into<String>, groups: Vec<String>, allocation: Vec<f64>, seed: u64) -> Self {
        DatasetManifest {
            name: name.into(),
            groups,
            allocation,
            samples: Vec::new(),
            seed,
            schema_version: SCHEMA_VERSION,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Number of samples per declared group, aligned with `groups`.
    pub fn realized_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.groups.len()];
        for s in &self.samples {
            if let Some(g) = self.groups.iter().position(|g| *g == s.group_label) {
                counts[g] += 1;
            }
        }
        counts
    }

    /// Realized proportions n_g / n. All zero for an empty manifest.
    pub fn realized_allocation(&self) -> Vec<f64> {
        let n = self.samples.len();
        self.realized_counts()
            .into_iter()
            .map(|c| if n == 0 { 0.0 } else { c as f64 / n as f64 })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Validation(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let mut seen = HashSet::new();
        for g in &self.groups {
            if !seen.insert(g.as_str()) {
                return Err(Error::Validation(format!("group `{g}` declared twice")));
            }
        }
        if self.allocation.len() != self.groups.len() {
            return Err(Error::Validation(format!(
                "allocation has {} weights for {} groups",
                self.allocation.len(),
                self.groups.len()
            )));
        }
        if self.allocation.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Validation("allocation weights must be finite and non-negative".into()));
        }
        let total: f64 = self.allocation.iter().sum();
        // an all-zero allocation marks a reserved empty dataset
        if total != 0.0 && (total - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!("allocation sums to {total}, not 1")));
        }
        let groups: HashSet<&str> = self.groups.iter().map(String::as_str).collect();
        let mut ids = HashSet::new();
        for s in &self.samples {
            s.check().map_err(|reason| Error::InvalidSample {
                id: s.id.clone(),
                reason,
            })?;
            if !groups.contains(s.group_label.as_str()) {
                return Err(Error::InvalidSample {
                    id: s.id.clone(),
                    reason: format!("group_label `{}` is not a declared group", s.group_label),
                });
            }
            if !ids.insert(s.id.as_str()) {
                return Err(Error::InvalidSample {
                    id: s.id.clone(),
                    reason: "duplicate id".into(),
                });
            }
        }
        Ok(())
    }

    /// Serialises the manifest to JSONL bytes.
    pub fn to_jsonl(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let header = Header {
            schema_version: self.schema_version,
            name: self.name.clone(),
            groups: self.groups.clone(),
            allocation: self.allocation.clone(),
            seed: self.seed,
        };
        serde_json::to_writer(&mut out, &header).expect("header serialises");
        out.push(b'\n');
        for s in &self.samples {
            serde_json::to_writer(&mut out, s).expect("sample serialises");
            out.push(b'\n');
        }
        out
    }
}

/// Writes `manifest` to `destination` atomically.
pub fn write_manifest(manifest: &DatasetManifest, destination: &Path) -> Result<()> {
    crate::fsutil::atomic_write_with(destination, |w| w.write_all(&manifest.to_jsonl()))
}

pub fn read_manifest(source: &Path) -> Result<DatasetManifest> {
    let file = std::fs::File::open(source).map_err(|e| Error::io(source, e))?;
    parse_manifest(BufReader::new(file), source)
}

/// Parses JSONL from `reader`; `origin` only labels error messages.
pub fn parse_manifest(reader: impl BufRead, origin: &Path) -> Result<DatasetManifest> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut lines = reader.lines().enumerate();
    let header: Header = loop {
        match lines.next() {
            None => return Err(parse_err(1, "missing header line".into())),
            Some((i, line)) => {
                let line = line.map_err(|e| Error::io(origin, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                break serde_json::from_str(&line).map_err(|e| parse_err(i + 1, e.to_string()))?;
            }
        }
    };
    if header.schema_version != SCHEMA_VERSION {
        return Err(Error::Validation(format!(
            "{}: unsupported schema_version {}",
            origin.display(),
            header.schema_version
        )));
    }
    let mut samples = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let s: GeoSample = serde_json::from_str(&line).map_err(|e| parse_err(i + 1, e.to_string()))?;
        samples.push(s);
    }
    let m = DatasetManifest {
        name: header.name,
        groups: header.groups,
        allocation: header.allocation,
        samples,
        seed: header.seed,
        schema_version: header.schema_version,
    };
    m.validate()?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest(n: usize) -> DatasetManifest {
        let mut m = DatasetManifest::new("toy", vec!["A".into(), "B".into()], vec![0.5, 0.5], 42);
        for i in 0..n {
            let mut s = GeoSample::new(format!("s{i}"), 10.0 + i as f64, -20.5, if i % 2 == 0 { "A" } else { "B" });
            s.acquisition_date = NaiveDate::from_ymd_opt(2021, 6, 1 + i as u32);
            s.cloud_cover_pct = Some(3.25);
            s.class_label = Some("forest".into());
            m.samples.push(s);
        }
        m
    }

    fn round_trip(m: &DatasetManifest) -> Result<DatasetManifest> {
        parse_manifest(std::io::Cursor::new(m.to_jsonl()), Path::new("mem"))
    }

    #[test]
    fn empty_manifest_is_header_only() {
        let m = manifest(0);
        let bytes = m.to_jsonl();
        assert_eq!(bytes.iter().filter(|&&b| b == b'\n').count(), 1);
        assert_eq!(round_trip(&m).unwrap(), m);
    }

    #[test]
    fn three_samples_four_lines() {
        let m = manifest(3);
        let text = String::from_utf8(m.to_jsonl()).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with(r#"{"schema_version":1,"name":"toy","groups":["A","B"],"allocation":[0.5,0.5],"seed":42}"#));
        assert_eq!(round_trip(&m).unwrap(), m);
    }

    #[test]
    fn writes_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
        let m = manifest(5);
        write_manifest(&m, &a).unwrap();
        write_manifest(&m, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        assert_eq!(read_manifest(&a).unwrap(), m);
    }

    #[test]
    fn out_of_range_latitude_names_sample() {
        let mut m = manifest(2);
        m.samples[1].lat = 95.0;
        match round_trip(&m) {
            Err(Error::InvalidSample { id, .. }) => assert_eq!(id, "s1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_id_rejected() {
        let mut m = manifest(3);
        m.samples[2].id = "s0".into();
        assert!(matches!(round_trip(&m), Err(Error::InvalidSample { .. })));
    }

    #[test]
    fn malformed_line_names_line_number() {
        let mut bytes = manifest(2).to_jsonl();
        bytes.extend_from_slice(b"{not json\n");
        match parse_manifest(std::io::Cursor::new(bytes), Path::new("m.jsonl")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_schema_version_rejected() {
        let text = r#"{"schema_version":2,"name":"x","groups":[],"allocation":[],"seed":0}"#;
        assert!(parse_manifest(std::io::Cursor::new(text), Path::new("m")).is_err());
    }

    #[test]
    fn undeclared_group_rejected() {
        let mut m = manifest(1);
        m.samples[0].group_label = "C".into();
        assert!(m.validate().is_err());
    }

    #[test]
    fn realized_allocation_counts() {
        let m = manifest(3);
        assert_eq!(m.realized_counts(), vec![2, 1]);
        assert_eq!(m.realized_allocation(), vec![2.0 / 3.0, 1.0 / 3.0]);
    }
}
