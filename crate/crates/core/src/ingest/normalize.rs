use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{DType, PixelData, RasterTile};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandStat {
    pub mean: f64,
    pub std: f64,
}

/// Per-band mean and standard deviation in sensor units.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BandStats(pub IndexMap<String, BandStat>);

impl BandStats {
    /// Reads a JSON object `{"B2": {"mean": .., "std": ..}, ...}`.
    pub fn read(path: &Path) -> Result<BandStats> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let stats: BandStats = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        stats.validate()?;
        Ok(stats)
    }

    pub fn validate(&self) -> Result<()> {
        for (b, s) in &self.0 {
            if !s.mean.is_finite() {
                return Err(Error::Validation(format!("band `{b}`: mean is not finite")));
            }
            if !(s.std.is_finite() && s.std > 0.0) {
                return Err(Error::Validation(format!("band `{b}`: std must be positive, got {}", s.std)));
            }
        }
        Ok(())
    }

    fn for_tile(&self, tile: &RasterTile) -> Result<Vec<BandStat>> {
        self.validate()?;
        tile.bands
            .iter()
            .map(|b| {
                self.0
                    .get(b)
                    .copied()
                    .ok_or_else(|| Error::Config(format!("band statistics missing band `{b}`")))
            })
            .collect()
    }
}

/// Per-band z-scores as float32. Nodata and NaN pixels become NaN, which is
/// also the output nodata value.
pub fn normalize(tile: &RasterTile, stats: &BandStats) -> Result<RasterTile> {
    let per_band = stats.for_tile(tile)?;
    let n = tile.band_len();
    let mut out = Vec::with_capacity(tile.pixels.len());
    for (b, s) in per_band.iter().enumerate() {
        out.extend(tile.band_values(b).map(|v| {
            if v.is_nan() || tile.nodata == Some(v) {
                f32::NAN
            } else {
                ((v - s.mean) / s.std) as f32
            }
        }));
    }
    debug_assert_eq!(out.len(), n * per_band.len());
    let nodata = if tile.nodata.is_some() || out.iter().any(|v| v.is_nan()) {
        Some(f64::NAN)
    } else {
        None
    };
    RasterTile::new(
        tile.bands.clone(),
        tile.height,
        tile.width,
        PixelData::F32(out),
        tile.geotransform,
        tile.crs,
        nodata,
    )
}

/// Inverse of a single normalised value.
pub fn denormalize_value(z: f32, s: BandStat) -> f64 {
    z as f64 * s.std + s.mean
}

/// Undoes [`normalize`]. For `DType::Uint16` values are rounded and NaN maps
/// to `nodata` (0 if unset).
pub fn denormalize(tile: &RasterTile, stats: &BandStats, dtype: DType, nodata: Option<f64>) -> Result<RasterTile> {
    let per_band = stats.for_tile(tile)?;
    let PixelData::F32(z) = &tile.pixels else {
        return Err(Error::Validation("denormalize expects a float32 tile".into()));
    };
    let n = tile.band_len();
    let pixels = match dtype {
        DType::Float32 => PixelData::F32(
            z.iter()
                .enumerate()
                .map(|(i, &v)| denormalize_value(v, per_band[i / n]) as f32)
                .collect(),
        ),
        DType::Uint16 => {
            let fill = nodata.unwrap_or(0.0).clamp(0.0, u16::MAX as f64) as u16;
            PixelData::U16(
                z.iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        if v.is_nan() {
                            fill
                        } else {
                            denormalize_value(v, per_band[i / n]).round().clamp(0.0, u16::MAX as f64) as u16
                        }
                    })
                    .collect(),
            )
        }
    };
    RasterTile::new(
        tile.bands.clone(),
        tile.height,
        tile.width,
        pixels,
        tile.geotransform,
        tile.crs,
        match dtype {
            DType::Float32 => tile.nodata,
            DType::Uint16 => nodata,
        },
    )
}
