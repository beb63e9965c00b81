//! Tile footprints and their per-class area breakdown over categorical maps.
//!
//! Vector maps in WGS84 are measured on the authalic sphere: the footprint is
//! clipped against each class polygon and the clipped rings are integrated
//! exactly for lon/lat-straight edges. Vector maps in a projected CRS use
//! planar area. Raster maps count pixels whose centre falls inside the
//! footprint, each weighted by its own area (spherical for geographic grids).

use std::collections::HashMap;
use std::path::Path;

use indexmap::IndexMap;
use serde::Serialize;

use crate::crs::Crs;
use crate::diversity::compensated_sum;
use crate::error::{Error, Result};
use crate::geometry::{
    is_convex, signed_area, spherical_signed_area, BBox, Location, MultiPolygon, Point, Polygon,
};
use crate::raster::{read_categorical, CategoricalGrid, RasterTile};

#[derive(Clone, Debug, PartialEq)]
pub enum MapForm {
    /// Polygons aligned with `RegionMap::classes`.
    Vector { crs: Crs, polygons: Vec<MultiPolygon> },
    /// Categorical grid; `codes` maps grid values to class indices.
    Raster { grid: CategoricalGrid, codes: HashMap<i64, usize> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionMap {
    pub classes: Vec<String>,
    /// Class id → human-readable label.
    pub class_names: IndexMap<String, String>,
    pub form: MapForm,
}

impl RegionMap {
    pub fn vector(crs: Crs, layers: IndexMap<String, MultiPolygon>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Validation("region map has no classes".into()));
        }
        let classes: Vec<String> = layers.keys().cloned().collect();
        Ok(RegionMap {
            class_names: classes.iter().map(|c| (c.clone(), c.clone())).collect(),
            classes,
            form: MapForm::Vector {
                crs,
                polygons: layers.into_values().collect(),
            },
        })
    }

    /// `legend` maps grid codes to class ids; every non-nodata value in the
    /// grid must be listed.
    pub fn raster(grid: CategoricalGrid, legend: IndexMap<i64, String>) -> Result<Self> {
        let mut classes: Vec<String> = Vec::new();
        let mut codes = HashMap::new();
        for (code, name) in &legend {
            let idx = match classes.iter().position(|c| c == name) {
                Some(i) => i,
                None => {
                    classes.push(name.clone());
                    classes.len() - 1
                }
            };
            codes.insert(*code, idx);
        }
        if classes.is_empty() {
            return Err(Error::Validation("raster legend is empty".into()));
        }
        let mut missing: Vec<i64> = grid
            .values
            .iter()
            .filter(|v| Some(**v) != grid.nodata && !codes.contains_key(v))
            .copied()
            .collect();
        missing.sort_unstable();
        missing.dedup();
        if !missing.is_empty() {
            return Err(Error::Validation(format!("legend does not cover grid values {missing:?}")));
        }
        Ok(RegionMap {
            class_names: classes.iter().map(|c| (c.clone(), c.clone())).collect(),
            classes,
            form: MapForm::Raster { grid, codes },
        })
    }

    /// GeoJSON (WGS84) with one category per feature under `property`.
    pub fn from_geojson(path: &Path, property: &str) -> Result<Self> {
        RegionMap::vector(Crs::Wgs84, crate::geojson::read_categorised(path, property)?)
    }

    /// Categorical GeoTIFF plus a JSON legend `{"<code>": "<class>", ...}`.
    pub fn from_raster_files(tif: &Path, legend: &Path) -> Result<Self> {
        let grid = read_categorical(tif)?;
        let text = std::fs::read_to_string(legend).map_err(|e| Error::io(legend, e))?;
        let raw: IndexMap<String, String> = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: legend.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        let mut parsed = IndexMap::new();
        for (k, v) in raw {
            let code: i64 = k
                .trim()
                .parse()
                .map_err(|_| Error::Validation(format!("{}: legend key `{k}` is not an integer", legend.display())))?;
            parsed.insert(code, v);
        }
        RegionMap::raster(grid, parsed)
    }

    /// Checks the class count against a declared taxonomy size.
    pub fn expect_class_count(&self, n: usize) -> Result<()> {
        if self.classes.len() != n {
            return Err(Error::Validation(format!(
                "map has {} classes, taxonomy declares {n}",
                self.classes.len()
            )));
        }
        Ok(())
    }

    pub fn crs(&self) -> Crs {
        match &self.form {
            MapForm::Vector { crs, .. } => *crs,
            MapForm::Raster { grid, .. } => grid.crs,
        }
    }
}

/// Per-class areas (m² for geographic maps, CRS units² for projected ones).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AreaVector {
    pub classes: Vec<String>,
    pub areas: Vec<f64>,
    pub total_area: f64,
}

impl AreaVector {
    pub fn new(classes: Vec<String>, areas: Vec<f64>) -> Self {
        let total_area = compensated_sum(areas.iter().copied());
        AreaVector {
            classes,
            areas,
            total_area,
        }
    }

    pub fn scaled(&self, k: f64) -> AreaVector {
        AreaVector::new(self.classes.clone(), self.areas.iter().map(|a| a * k).collect())
    }
}

/// Ground quadrilateral of a tile's pixel grid, in WGS84 lon/lat.
pub fn footprint(tile: &RasterTile) -> Result<Polygon> {
    tile.geotransform.validate()?;
    let (w, h) = (tile.width as f64, tile.height as f64);
    let corners = [(0.0, 0.0), (w, 0.0), (w, h), (0.0, h)]
        .iter()
        .map(|&(c, r)| {
            let (x, y) = tile.geotransform.apply(c, r);
            let (lon, lat) = tile.crs.to_wgs84(x, y);
            Point::new(lon, lat)
        })
        .collect();
    Polygon::new(corners, vec![])
}

/// Breaks `tile_footprint` (WGS84) down into per-class areas of `map`.
pub fn area_vector(tile_footprint: &Polygon, map: &RegionMap) -> Result<AreaVector> {
    if !tile_footprint.holes().is_empty() || !is_convex(tile_footprint.exterior()) {
        return Err(Error::Validation("footprint must be a convex polygon without holes".into()));
    }
    let areas = match &map.form {
        MapForm::Vector { crs, polygons } => {
            let (ring, area_fn): (Vec<Point>, fn(&[Point]) -> f64) = if crs.is_geographic() {
                (tile_footprint.exterior().to_vec(), spherical_signed_area)
            } else {
                (project_ring(tile_footprint.exterior(), *crs)?, signed_area)
            };
            polygons
                .iter()
                .map(|mp| {
                    let parts = mp.polygons().iter().map(|p| p.clipped_area(&ring, area_fn));
                    compensated_sum(parts).max(0.0)
                })
                .collect()
        }
        MapForm::Raster { grid, codes } => raster_areas(tile_footprint, grid, codes, map.classes.len())?,
    };
    let av = AreaVector::new(map.classes.clone(), areas);
    if !(av.total_area > 0.0) {
        return Err(Error::NoOverlap("footprint does not intersect any mapped class".into()));
    }
    Ok(av)
}

/// Projects a WGS84 ring into `crs`, keeping it counterclockwise.
fn project_ring(ring: &[Point], crs: Crs) -> Result<Vec<Point>> {
    let mut out: Vec<Point> = ring
        .iter()
        .map(|p| {
            let (x, y) = crs.from_wgs84(p.x, p.y);
            Point::new(x, y)
        })
        .collect();
    if signed_area(&out) < 0.0 {
        out.reverse();
    }
    if !is_convex(&out) {
        return Err(Error::Validation(format!("footprint is not convex in {crs}")));
    }
    Ok(out)
}

fn raster_areas(
    tile_footprint: &Polygon,
    grid: &CategoricalGrid,
    codes: &HashMap<i64, usize>,
    n_classes: usize,
) -> Result<Vec<f64>> {
    let ring = if grid.crs.is_geographic() {
        tile_footprint.exterior().to_vec()
    } else {
        project_ring(tile_footprint.exterior(), grid.crs)?
    };
    let fp = Polygon::new(ring.clone(), vec![])?;
    let gt = grid.geotransform;
    // pixel window covering the footprint's bounding box
    let b = BBox::of(&ring);
    let (mut c0, mut c1, mut r0, mut r1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in [(b.min_x, b.min_y), (b.max_x, b.min_y), (b.max_x, b.max_y), (b.min_x, b.max_y)] {
        let (c, r) = gt.invert(x, y);
        c0 = c0.min(c);
        c1 = c1.max(c);
        r0 = r0.min(r);
        r1 = r1.max(r);
    }
    let clamp = |v: f64, hi: usize| v.max(0.0).min(hi as f64) as usize;
    let (cs, ce) = (clamp(c0.floor(), grid.width), clamp(c1.ceil() + 1.0, grid.width));
    let (rs, re) = (clamp(r0.floor(), grid.height), clamp(r1.ceil() + 1.0, grid.height));

    let planar_pixel = gt.determinant().abs();
    let mut parts: Vec<Vec<f64>> = vec![Vec::new(); n_classes];
    for row in rs..re {
        for col in cs..ce {
            let v = grid.values[row * grid.width + col];
            if Some(v) == grid.nodata {
                continue;
            }
            let (cx, cy) = gt.apply(col as f64 + 0.5, row as f64 + 0.5);
            if fp.locate(Point::new(cx, cy)) == Location::Outside {
                continue;
            }
            let area = if grid.crs.is_geographic() {
                let corners: Vec<Point> = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
                    .iter()
                    .map(|&(dc, dr)| {
                        let (x, y) = gt.apply(col as f64 + dc, row as f64 + dr);
                        Point::new(x, y)
                    })
                    .collect();
                spherical_signed_area(&corners).abs()
            } else {
                planar_pixel
            };
            parts[codes[&v]].push(area);
        }
    }
    Ok(parts.into_iter().map(compensated_sum).collect())
}

/// Class of the first polygon, in map order, containing the point.
pub fn point_group(lat: f64, lon: f64, map: &RegionMap) -> Result<String> {
    let MapForm::Vector { crs, polygons } = &map.form else {
        return Err(Error::Config("point lookup needs a vector region map".into()));
    };
    let (x, y) = crs.from_wgs84(lon, lat);
    let p = Point::new(x, y);
    polygons
        .iter()
        .position(|mp| mp.contains(p))
        .map(|i| map.classes[i].clone())
        .ok_or_else(|| Error::NoOverlap(format!("({lat}, {lon}) lies in no mapped region")))
}
