//! Multi-band raster tiles and their georeferencing.

mod geotiff;

pub use geotiff::{decode_categorical, decode_geotiff, encode_geotiff, read_categorical, read_geotiff, write_geotiff, CategoricalGrid};

use serde::{Deserialize, Serialize};

use crate::crs::Crs;
use crate::error::{Error, Result};

/// Affine pixel→CRS mapping in GDAL coefficient order:
/// `x = c[0] + col·c[1] + row·c[2]`, `y = c[3] + col·c[4] + row·c[5]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoTransform(pub [f64; 6]);

impl GeoTransform {
    /// North-up transform with the given origin (top-left corner) and pixel size.
    pub fn north_up(origin_x: f64, origin_y: f64, pixel_w: f64, pixel_h: f64) -> Self {
        GeoTransform([origin_x, pixel_w, 0.0, origin_y, 0.0, -pixel_h])
    }

    pub fn apply(&self, col: f64, row: f64) -> (f64, f64) {
        let c = &self.0;
        (c[0] + col * c[1] + row * c[2], c[3] + col * c[4] + row * c[5])
    }

    pub fn determinant(&self) -> f64 {
        self.0[1] * self.0[5] - self.0[2] * self.0[4]
    }

    /// CRS coordinates → fractional (col, row).
    pub fn invert(&self, x: f64, y: f64) -> (f64, f64) {
        let c = &self.0;
        let det = self.determinant();
        let (dx, dy) = (x - c[0], y - c[3]);
        ((dx * c[5] - dy * c[2]) / det, (dy * c[1] - dx * c[4]) / det)
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("geotransform has non-finite coefficients".into()));
        }
        if self.determinant() == 0.0 || self.0[1] == 0.0 && self.0[2] == 0.0 || self.0[4] == 0.0 && self.0[5] == 0.0 {
            return Err(Error::Validation("geotransform has a zero pixel size".into()));
        }
        Ok(())
    }

    /// The transform of a sub-window starting at (`row0`, `col0`).
    pub fn shifted(&self, row0: usize, col0: usize) -> GeoTransform {
        let (x, y) = self.apply(col0 as f64, row0 as f64);
        let mut c = self.0;
        c[0] = x;
        c[3] = y;
        GeoTransform(c)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    Uint16,
    Float32,
}

/// Band-sequential pixel storage: all of band 0, then band 1, …
#[derive(Clone, Debug, PartialEq)]
pub enum PixelData {
    U16(Vec<u16>),
    F32(Vec<f32>),
}

impl PixelData {
    pub fn len(&self) -> usize {
        match self {
            PixelData::U16(v) => v.len(),
            PixelData::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> DType {
        match self {
            PixelData::U16(_) => DType::Uint16,
            PixelData::F32(_) => DType::Float32,
        }
    }

    fn get(&self, i: usize) -> f64 {
        match self {
            PixelData::U16(v) => v[i] as f64,
            PixelData::F32(v) => v[i] as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RasterTile {
    pub bands: Vec<String>,
    pub height: usize,
    pub width: usize,
    pub pixels: PixelData,
    pub geotransform: GeoTransform,
    pub crs: Crs,
    pub nodata: Option<f64>,
}

impl RasterTile {
    pub fn new(
        bands: Vec<String>,
        height: usize,
        width: usize,
        pixels: PixelData,
        geotransform: GeoTransform,
        crs: Crs,
        nodata: Option<f64>,
    ) -> Result<Self> {
        let tile = RasterTile {
            bands,
            height,
            width,
            pixels,
            geotransform,
            crs,
            nodata,
        };
        tile.validate()?;
        Ok(tile)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bands.is_empty() || self.height == 0 || self.width == 0 {
            return Err(Error::Validation("raster must have at least one band and pixel".into()));
        }
        let expected = self.bands.len() * self.height * self.width;
        if self.pixels.len() != expected {
            return Err(Error::Validation(format!(
                "pixel buffer holds {} values, expected {} bands × {} × {}",
                self.pixels.len(),
                self.bands.len(),
                self.height,
                self.width
            )));
        }
        self.geotransform.validate()
    }

    pub fn dtype(&self) -> DType {
        self.pixels.dtype()
    }

    pub fn band_len(&self) -> usize {
        self.height * self.width
    }

    pub fn band_index(&self, name: &str) -> Option<usize> {
        self.bands.iter().position(|b| b == name)
    }

    /// Raw values of band `b` as `f64`, row-major.
    pub fn band_values(&self, b: usize) -> impl Iterator<Item = f64> + '_ {
        let n = self.band_len();
        (b * n..(b + 1) * n).map(move |i| self.pixels.get(i))
    }

    /// Values of band `b` excluding NaN and the nodata sentinel.
    pub fn valid_values(&self, b: usize) -> Vec<f64> {
        let nodata = self.nodata;
        self.band_values(b)
            .filter(|v| !v.is_nan() && (nodata != Some(*v)))
            .collect()
    }

    /// Copies the `h × w` window whose top-left pixel is (`row0`, `col0`).
    pub fn window(&self, row0: usize, col0: usize, h: usize, w: usize) -> Result<RasterTile> {
        if h == 0 || w == 0 || row0 + h > self.height || col0 + w > self.width {
            return Err(Error::Validation(format!(
                "window {h}×{w} at ({row0}, {col0}) exceeds raster {}×{}",
                self.height, self.width
            )));
        }
        let n = self.band_len();
        let indices = (0..self.bands.len()).flat_map(move |b| {
            (row0..row0 + h).flat_map(move |r| (col0..col0 + w).map(move |c| b * n + r * self.width + c))
        });
        let pixels = match &self.pixels {
            PixelData::U16(v) => PixelData::U16(indices.map(|i| v[i]).collect()),
            PixelData::F32(v) => PixelData::F32(indices.map(|i| v[i]).collect()),
        };
        RasterTile::new(
            self.bands.clone(),
            h,
            w,
            pixels,
            self.geotransform.shifted(row0, col0),
            self.crs,
            self.nodata,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tile() -> RasterTile {
        RasterTile::new(
            vec!["B2".into(), "B3".into()],
            2,
            3,
            PixelData::U16((0..12).collect()),
            GeoTransform::north_up(10.0, 50.0, 0.5, 0.25),
            Crs::Wgs84,
            Some(4.0),
        )
        .unwrap()
    }

    #[test]
    fn geotransform_inverse() {
        let gt = GeoTransform([100.0, 2.0, 0.5, 200.0, 0.25, -3.0]);
        let (x, y) = gt.apply(7.0, 11.0);
        let (c, r) = gt.invert(x, y);
        assert!((c - 7.0).abs() < 1e-12 && (r - 11.0).abs() < 1e-12);
    }

    #[test]
    fn zero_pixel_size_rejected() {
        let gt = GeoTransform([0.0, 0.0, 0.0, 0.0, 0.0, -1.0]);
        assert!(gt.validate().is_err());
    }

    #[test]
    fn valid_values_skip_nodata() {
        let t = tile();
        assert_eq!(t.valid_values(0), vec![0.0, 1.0, 2.0, 3.0, 5.0]);
        assert_eq!(t.valid_values(1).len(), 6);
    }

    #[test]
    fn window_shifts_origin() {
        let t = tile();
        let w = t.window(1, 1, 1, 2).unwrap();
        assert_eq!(w.pixels, PixelData::U16(vec![4, 5, 10, 11]));
        assert_eq!(w.geotransform.apply(0.0, 0.0), (10.5, 49.75));
        assert!(t.window(1, 2, 1, 2).is_err());
    }

    #[test]
    fn buffer_size_checked() {
        let r = RasterTile::new(
            vec!["a".into()],
            2,
            2,
            PixelData::F32(vec![0.0; 3]),
            GeoTransform::north_up(0.0, 0.0, 1.0, 1.0),
            Crs::Wgs84,
            None,
        );
        assert!(r.is_err());
    }
}
