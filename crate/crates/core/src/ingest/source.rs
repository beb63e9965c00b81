use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, FetchError, Result};
use crate::raster::{decode_geotiff, RasterTile};

#[derive(Clone, Debug, PartialEq)]
pub struct TileRequest {
    pub sample_id: String,
    pub lat: f64,
    pub lon: f64,
    /// (height, width) in pixels.
    pub size_px: (usize, usize),
    /// Inclusive acquisition date window.
    pub date_window: (NaiveDate, NaiveDate),
    pub max_cloud_pct: f64,
}

impl TileRequest {
    pub fn validate(&self) -> Result<()> {
        if self.size_px.0 == 0 || self.size_px.1 == 0 {
            return Err(Error::Config(format!("tile size {:?} must be positive", self.size_px)));
        }
        if self.date_window.0 > self.date_window.1 {
            return Err(Error::Config(format!(
                "empty date window {} to {}",
                self.date_window.0, self.date_window.1
            )));
        }
        if !(0.0..=100.0).contains(&self.max_cloud_pct) {
            return Err(Error::Config(format!("max cloud {} outside [0, 100]", self.max_cloud_pct)));
        }
        Ok(())
    }
}

/// A tile with the scene metadata it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct FetchedTile {
    pub tile: RasterTile,
    pub acquisition_date: Option<NaiveDate>,
    pub cloud_cover_pct: Option<f64>,
    /// The encoded GeoTIFF when the tile is passed through unmodified, so it
    /// can be stored byte for byte.
    pub original_bytes: Option<Vec<u8>>,
}

/// Somewhere tiles come from. Implementations are shared across worker
/// threads.
pub trait TileSource: Send + Sync {
    fn fetch(&self, request: &TileRequest) -> std::result::Result<FetchedTile, FetchError>;

    fn describe(&self) -> String;
}

/// Fetches a single tile.
pub fn fetch_tile(request: &TileRequest, source: &dyn TileSource) -> std::result::Result<RasterTile, FetchError> {
    request.validate().map_err(|e| FetchError::Source(e.to_string()))?;
    source.fetch(request).map(|f| f.tile)
}

/// Cuts a `size_px` window centred on the request point. A raster that
/// already has exactly that size is returned unchanged.
pub fn crop_centered(tile: &RasterTile, request: &TileRequest) -> std::result::Result<RasterTile, FetchError> {
    let (h, w) = request.size_px;
    if tile.height == h && tile.width == w {
        return Ok(tile.clone());
    }
    if tile.height < h || tile.width < w {
        return Err(FetchError::Unavailable(format!(
            "raster {}×{} is smaller than the requested {h}×{w}",
            tile.height, tile.width
        )));
    }
    let (x, y) = tile.crs.from_wgs84(request.lon, request.lat);
    let (col, row) = tile.geotransform.invert(x, y);
    let row0 = (row - h as f64 / 2.0).round();
    let col0 = (col - w as f64 / 2.0).round();
    if row0 < 0.0 || col0 < 0.0 || row0 as usize + h > tile.height || col0 as usize + w > tile.width {
        return Err(FetchError::Unavailable(format!(
            "scene does not cover a {h}×{w} window around ({}, {})",
            request.lat, request.lon
        )));
    }
    tile.window(row0 as usize, col0 as usize, h, w)
        .map_err(|e| FetchError::Source(e.to_string()))
}

/// Optional `<id>.json` next to a stored tile.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TileMetadata {
    pub acquisition_date: Option<NaiveDate>,
    pub cloud_cover_pct: Option<f64>,
}

/// A directory of GeoTIFFs named `<sample id>.tif`.
#[derive(Clone, Debug)]
pub struct LocalStore {
    root: PathBuf,
}

impl LocalStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        LocalStore { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn tile_path(&self, id: &str) -> PathBuf {
        self.root.join(format!("{id}.tif"))
    }
}

impl TileSource for LocalStore {
    fn fetch(&self, request: &TileRequest) -> std::result::Result<FetchedTile, FetchError> {
        let path = self.tile_path(&request.sample_id);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(FetchError::Unavailable(format!("{} not found", path.display())));
            }
            Err(e) => return Err(FetchError::Source(format!("{}: {e}", path.display()))),
        };
        let meta_path = self.root.join(format!("{}.json", request.sample_id));
        let meta: TileMetadata = match std::fs::read_to_string(&meta_path) {
            Ok(text) => serde_json::from_str(&text)
                .map_err(|e| FetchError::Source(format!("{}: {e}", meta_path.display())))?,
            Err(_) => TileMetadata::default(),
        };
        if let Some(c) = meta.cloud_cover_pct {
            if c > request.max_cloud_pct {
                return Err(FetchError::CloudFilter {
                    candidates: 1,
                    best_cloud_pct: c,
                    max_cloud_pct: request.max_cloud_pct,
                });
            }
        }
        if let Some(d) = meta.acquisition_date {
            if d < request.date_window.0 || d > request.date_window.1 {
                return Err(FetchError::Unavailable(format!("stored tile acquired {d}, outside the date window")));
            }
        }
        let tile = decode_geotiff(&bytes).map_err(|e| FetchError::Source(format!("{}: {e}", path.display())))?;
        let exact = tile.height == request.size_px.0 && tile.width == request.size_px.1;
        let tile = crop_centered(&tile, request)?;
        Ok(FetchedTile {
            tile,
            acquisition_date: meta.acquisition_date,
            cloud_cover_pct: meta.cloud_cover_pct,
            original_bytes: exact.then_some(bytes),
        })
    }

    fn describe(&self) -> String {
        format!("local store {}", self.root.display())
    }
}
