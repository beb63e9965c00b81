//! Histogram entropy of pixel values.
//!
//! Bins follow the usual equal-width convention: with range `[lo, hi]` and
//! `K` bins the edges are `e_i = lo + (hi − lo)·i/K` for `i < K` (evaluated in that order) and
//! `e_K = hi`; bin `k` holds `e_k ≤ x < e_{k+1}`, except that the last bin
//! is closed and also holds `hi`.

use std::borrow::Cow;
use std::path::PathBuf;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::entropy::{compensated_sum, entropy_of_weights, LogBase};
use crate::error::{Error, Result};
use crate::raster::{read_geotiff, RasterTile};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RangeMode {
    /// Each band of each tile is binned over its own min–max.
    PerSample,
    /// Fixed `(lo, hi)` per band id; values outside are clamped into the
    /// first or last bin.
    Fixed { ranges: IndexMap<String, (f64, f64)> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramSpec {
    pub bins: usize,
    pub range: RangeMode,
}

impl Default for HistogramSpec {
    fn default() -> Self {
        HistogramSpec {
            bins: 100,
            range: RangeMode::PerSample,
        }
    }
}

impl HistogramSpec {
    pub fn validate(&self) -> Result<()> {
        if self.bins < 2 {
            return Err(Error::Config(format!("histogram needs at least 2 bins, got {}", self.bins)));
        }
        if let RangeMode::Fixed { ranges } = &self.range {
            for (b, (lo, hi)) in ranges {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::Config(format!("band `{b}`: fixed range needs lo < hi, got ({lo}, {hi})")));
                }
            }
        }
        Ok(())
    }

    fn range_for(&self, band: &str, values: &[f64]) -> Result<(f64, f64)> {
        match &self.range {
            RangeMode::PerSample => {
                let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                Ok((lo, hi))
            }
            RangeMode::Fixed { ranges } => ranges
                .get(band)
                .copied()
                .ok_or_else(|| Error::Config(format!("no fixed histogram range for band `{band}`"))),
        }
    }
}

/// Bin of `x` for `bins` equal-width bins over `[lo, hi]`, `lo < hi`.
/// Values outside the range clamp to the end bins.
pub fn bin_index(x: f64, lo: f64, hi: f64, bins: usize) -> usize {
    let edge = |i: usize| if i == bins { hi } else { lo + (hi - lo) * i as f64 / bins as f64 };
    if x <= lo {
        return 0;
    }
    if x >= hi {
        return bins - 1;
    }
    let mut k = (((x - lo) / (hi - lo)) * bins as f64).floor() as usize;
    k = k.min(bins - 1);
    // rounding in the estimate can be off by one either way
    while k > 0 && x < edge(k) {
        k -= 1;
    }
    while k < bins - 1 && x >= edge(k + 1) {
        k += 1;
    }
    k
}

/// Counts of `values` in `bins` equal-width bins over `[lo, hi]`. A
/// degenerate range (`lo == hi`) puts everything in bin 0.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<u64> {
    let mut counts = vec![0u64; bins];
    if values.is_empty() {
        return counts;
    }
    if !(hi > lo) {
        counts[0] = values.len() as u64;
        return counts;
    }
    for &x in values {
        counts[bin_index(x, lo, hi, bins)] += 1;
    }
    counts
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleSpectral {
    /// H_{i,b} per band, in tile band order.
    pub per_band: IndexMap<String, f64>,
    /// H_i, the mean over bands.
    pub mean: f64,
}

/// Per-band histogram entropies of one tile and their mean.
pub fn spectral_entropy_sample(tile: &RasterTile, spec: &HistogramSpec, base: LogBase) -> Result<SampleSpectral> {
    spec.validate()?;
    let bands: Vec<usize> = (0..tile.bands.len()).collect();
    sample_over(tile, &bands, spec, base)
}

fn sample_over(tile: &RasterTile, bands: &[usize], spec: &HistogramSpec, base: LogBase) -> Result<SampleSpectral> {
    let mut per_band = IndexMap::with_capacity(bands.len());
    for &b in bands {
        let name = &tile.bands[b];
        let values = tile.valid_values(b);
        if values.is_empty() {
            return Err(Error::Degenerate(format!("band `{name}` has no valid pixels")));
        }
        let (lo, hi) = spec.range_for(name, &values)?;
        let counts = histogram(&values, lo, hi, spec.bins);
        let weights: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        per_band.insert(name.clone(), entropy_of_weights(&weights) / base.ln_base());
    }
    let mean = compensated_sum(per_band.values().copied()) / per_band.len() as f64;
    Ok(SampleSpectral { per_band, mean })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DatasetSpectral {
    /// Mean of H_i over included tiles.
    pub h_spectral: f64,
    /// Mean of H_{i,b} over included tiles.
    pub per_band_mean: IndexMap<String, f64>,
    pub tiles_used: usize,
    /// Tiles with a band lacking any valid pixel.
    pub tiles_excluded: usize,
}

/// Dataset-level spectral entropy over in-memory tiles.
pub fn spectral_entropy_dataset(tiles: &[RasterTile], spec: &HistogramSpec, base: LogBase) -> Result<DatasetSpectral> {
    dataset_over(tiles, |t| Ok(Cow::Borrowed(t)), spec, base)
}

/// Dataset-level spectral entropy over GeoTIFF files, read one at a time.
pub fn spectral_entropy_paths(paths: &[PathBuf], spec: &HistogramSpec, base: LogBase) -> Result<DatasetSpectral> {
    dataset_over(paths, |p| read_geotiff(p).map(Cow::Owned), spec, base)
}

fn dataset_over<T: Sync>(
    items: &[T],
    load: impl Fn(&T) -> Result<Cow<'_, RasterTile>> + Sync,
    spec: &HistogramSpec,
    base: LogBase,
) -> Result<DatasetSpectral> {
    spec.validate()?;
    if items.is_empty() {
        return Err(Error::Degenerate("spectral entropy of an empty dataset".into()));
    }
    // common band set: first tile's order, restricted to bands in every tile
    let band_sets: Vec<Vec<String>> = items
        .par_iter()
        .map(|it| load(it).map(|t| t.bands.clone()))
        .collect::<Result<_>>()?;
    let common: Vec<String> = band_sets[0]
        .iter()
        .filter(|b| band_sets.iter().all(|s| s.contains(b)))
        .cloned()
        .collect();
    if common.is_empty() {
        return Err(Error::Degenerate("tiles share no band".into()));
    }
    if band_sets.iter().any(|s| s.len() != common.len()) {
        log::warn!("ignoring bands not present in every tile; using {}", common.join(","));
    }

    let per_tile: Vec<Option<SampleSpectral>> = items
        .par_iter()
        .map(|it| {
            let tile = load(it)?;
            let idx: Vec<usize> = common.iter().map(|b| tile.band_index(b).expect("common band")).collect();
            match sample_over(&tile, &idx, spec, base) {
                Ok(s) => Ok(Some(s)),
                Err(Error::Degenerate(m)) => {
                    log::warn!("excluding tile from spectral means: {m}");
                    Ok(None)
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let used: Vec<&SampleSpectral> = per_tile.iter().flatten().collect();
    if used.is_empty() {
        return Err(Error::Degenerate("no tile has valid pixels in every band".into()));
    }
    let n = used.len() as f64;
    let h_spectral = compensated_sum(used.iter().map(|s| s.mean)) / n;
    let per_band_mean = common
        .iter()
        .map(|b| (b.clone(), compensated_sum(used.iter().map(|s| s.per_band[b])) / n))
        .collect();
    Ok(DatasetSpectral {
        h_spectral,
        per_band_mean,
        tiles_used: used.len(),
        tiles_excluded: per_tile.len() - used.len(),
    })
}
