//! Allocation-controlled point sampling inside region polygons.
//!
//! Group counts come from largest-remainder rounding of `n · α_g`. Within a
//! group, a polygon is chosen with probability proportional to its spherical
//! area, then a point is drawn uniformly on the sphere inside the polygon's
//! bounding box (longitude uniform, sine of latitude uniform) and kept only if
//! the polygon contains it. The accepted points are therefore uniform per unit
//! of surface area.
//!
//! Where regions of different groups overlap, a point belongs to the first
//! group in region order that contains it; candidates drawn for a later group
//! inside an earlier one are rejected. Polygons must not cross the
//! antimeridian; split them at ±180° first.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use indexmap::IndexMap;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::apportion::largest_remainder;
use crate::error::{Error, Result};
use crate::geometry::{
    edges, haversine_m, segments_cross_properly, Location, MultiPolygon, Point, Polygon, AUTHALIC_RADIUS_M,
};
use crate::manifest::{DatasetManifest, GeoSample};
use crate::rng;

/// Target proportions over mutually exclusive groups.
#[derive(Clone, Debug, PartialEq)]
pub struct AllocationVector {
    groups: Vec<String>,
    weights: Vec<f64>,
}

impl AllocationVector {
    pub fn new(groups: Vec<String>, weights: Vec<f64>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::Config("allocation needs at least one group".into()));
        }
        if groups.len() != weights.len() {
            return Err(Error::Config(format!(
                "{} groups but {} weights",
                groups.len(),
                weights.len()
            )));
        }
        let mut seen = HashSet::new();
        for g in &groups {
            if !seen.insert(g.as_str()) {
                return Err(Error::Config(format!("group `{g}` listed twice")));
            }
        }
        if let Some((g, w)) = groups.iter().zip(&weights).find(|(_, w)| !w.is_finite() || **w < 0.0) {
            return Err(Error::Config(format!("weight {w} for `{g}` is not a non-negative number")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("weights sum to {sum}, not 1")));
        }
        Ok(AllocationVector { groups, weights })
    }

    /// Equal weight on every group.
    pub fn global(groups: Vec<String>) -> Result<Self> {
        let w = 1.0 / groups.len().max(1) as f64;
        let n = groups.len();
        let mut weights = vec![w; n];
        // make the weights sum to exactly 1 in floating point
        if n > 0 {
            weights[n - 1] = 1.0 - w * (n - 1) as f64;
        }
        AllocationVector::new(groups, weights)
    }

    /// All weight on `group`.
    pub fn one_hot(groups: Vec<String>, group: &str) -> Result<Self> {
        let weights = groups.iter().map(|g| if g == group { 1.0 } else { 0.0 }).collect();
        if !groups.iter().any(|g| g == group) {
            return Err(Error::Config(format!("unknown group `{group}`")));
        }
        AllocationVector::new(groups, weights)
    }

    pub fn groups(&self) -> &[String] {
        &self.groups
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, group: &str) -> Option<f64> {
        self.groups.iter().position(|g| g == group).map(|i| self.weights[i])
    }
}

/// Largest-remainder rounding of `n · α_g`; sums to `n`.
pub fn allocate_counts(alpha: &AllocationVector, n: u64) -> IndexMap<String, u64> {
    let counts = largest_remainder(&alpha.weights, n);
    alpha.groups.iter().cloned().zip(counts).collect()
}

/// Group polygons in priority order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RegionSet {
    pub regions: IndexMap<String, MultiPolygon>,
    /// Optional per-group land-area share γ_g.
    pub population_fraction: Option<IndexMap<String, f64>>,
}

impl RegionSet {
    pub fn new(regions: IndexMap<String, MultiPolygon>) -> Self {
        RegionSet {
            regions,
            population_fraction: None,
        }
    }

    /// Reads a GeoJSON FeatureCollection whose features carry a `group` property.
    pub fn from_geojson(path: &Path) -> Result<Self> {
        Ok(RegionSet::new(crate::geojson::read_categorised(path, "group")?))
    }

    pub fn groups(&self) -> impl Iterator<Item = &str> {
        self.regions.keys().map(String::as_str)
    }

    /// Each group's share of the total spherical area.
    pub fn area_fractions(&self) -> IndexMap<String, f64> {
        let areas: Vec<f64> = self.regions.values().map(MultiPolygon::spherical_area).collect();
        let total: f64 = areas.iter().sum();
        self.regions.keys().cloned().zip(areas.into_iter().map(|a| a / total)).collect()
    }

    /// First group, in region order, whose polygons contain `p` (boundary inclusive).
    pub fn first_containing(&self, p: Point) -> Option<&str> {
        self.regions.iter().find(|(_, mp)| mp.contains(p)).map(|(g, _)| g.as_str())
    }

    /// Returns the first detected pair of groups whose polygons overlap with
    /// positive area. Shared borders are not overlaps.
    pub fn find_overlap(&self) -> Option<(String, String)> {
        let groups: Vec<(&String, &MultiPolygon)> = self.regions.iter().collect();
        for (i, (ga, a)) in groups.iter().enumerate() {
            for (gb, b) in &groups[i + 1..] {
                let overlapping = a.polygons().iter().any(|p| b.polygons().iter().any(|q| polygons_overlap(p, q)));
                if overlapping {
                    return Some((ga.to_string(), gb.to_string()));
                }
            }
        }
        None
    }
}

fn polygons_overlap(p: &Polygon, q: &Polygon) -> bool {
    if !p.bbox().intersects(&q.bbox()) {
        return false;
    }
    for ra in p.rings() {
        for (a, b) in edges(ra) {
            for rb in q.rings() {
                if edges(rb).any(|(c, d)| segments_cross_properly(a, b, c, d)) {
                    return true;
                }
            }
        }
    }
    // no proper crossings: overlap shows up as a probe point of one strictly inside the other
    let strictly_inside = |x: &Polygon, y: &Polygon| {
        let mut probes: Vec<Point> = x.interior_point().into_iter().collect();
        for r in x.rings() {
            for (a, b) in edges(r) {
                probes.push(a);
                probes.push(Point::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y)));
            }
        }
        probes.into_iter().any(|pt| y.locate(pt) == Location::Inside)
    };
    strictly_inside(p, q) || strictly_inside(q, p)
}

#[derive(Clone, Debug)]
pub struct SamplerOptions {
    /// Manifest name.
    pub name: String,
    pub min_separation_m: Option<f64>,
    /// Reject region sets with overlapping groups instead of resolving by order.
    pub strict: bool,
    /// Consecutive rejected candidates tolerated before giving up on a point.
    pub max_attempts: u64,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        SamplerOptions {
            name: "sample".into(),
            min_separation_m: None,
            strict: false,
            max_attempts: 100_000,
        }
    }
}

/// [`sample_points_with`] using default options and the given separation.
pub fn sample_points(
    regions: &RegionSet,
    alpha: &AllocationVector,
    n: u64,
    seed: u64,
    min_separation_m: Option<f64>,
) -> Result<DatasetManifest> {
    let opts = SamplerOptions {
        min_separation_m,
        ..SamplerOptions::default()
    };
    sample_points_with(regions, alpha, n, seed, &opts)
}

pub fn sample_points_with(
    regions: &RegionSet,
    alpha: &AllocationVector,
    n: u64,
    seed: u64,
    opts: &SamplerOptions,
) -> Result<DatasetManifest> {
    if let Some(sep) = opts.min_separation_m {
        if !(sep.is_finite() && sep >= 0.0) {
            return Err(Error::Config(format!("min separation {sep} must be a non-negative distance")));
        }
    }
    if opts.strict {
        if let Some((a, b)) = regions.find_overlap() {
            return Err(Error::Config(format!("regions `{a}` and `{b}` overlap")));
        }
    }
    let counts = allocate_counts(alpha, n);
    let mut plans = Vec::new();
    for (g, &count) in &counts {
        if count == 0 {
            continue;
        }
        let Some(idx) = regions.regions.get_index_of(g) else {
            return Err(Error::Config(format!("group `{g}` has no region polygons")));
        };
        let mp = &regions.regions[idx];
        let area = mp.spherical_area();
        if mp.is_empty() || !(area > 0.0) {
            return Err(Error::Config(format!("group `{g}` has no region polygons")));
        }
        plans.push(GroupPlan {
            group: g.as_str(),
            region_index: idx,
            polygons: mp.polygons(),
            cumulative: cumulative_areas(mp.polygons()),
            count: count as usize,
        });
    }

    let draws: Vec<Vec<Point>> = match opts.min_separation_m.filter(|s| *s > 0.0) {
        None => plans
            .par_iter()
            .map(|p| p.draw(regions, seed, opts.max_attempts, None))
            .collect::<Result<_>>()?,
        Some(sep) => {
            let mut grid = SeparationGrid::new(sep);
            let mut out = Vec::with_capacity(plans.len());
            for p in &plans {
                out.push(p.draw(regions, seed, opts.max_attempts, Some(&mut grid))?);
            }
            out
        }
    };

    let groups: Vec<String> = alpha.groups().to_vec();
    let slugs = unique_slugs(&groups);
    let mut manifest = DatasetManifest::new(opts.name.clone(), groups.clone(), alpha.weights().to_vec(), seed);
    for (plan, points) in plans.iter().zip(draws) {
        let slug = &slugs[plan.group];
        for (i, p) in points.into_iter().enumerate() {
            manifest
                .samples
                .push(GeoSample::new(format!("{slug}-{i:06}"), p.y, p.x, plan.group));
        }
    }
    manifest.validate()?;
    Ok(manifest)
}

struct GroupPlan<'a> {
    group: &'a str,
    region_index: usize,
    polygons: &'a [Polygon],
    cumulative: Vec<f64>,
    count: usize,
}

impl GroupPlan<'_> {
    fn draw(
        &self,
        regions: &RegionSet,
        seed: u64,
        max_attempts: u64,
        mut grid: Option<&mut SeparationGrid>,
    ) -> Result<Vec<Point>> {
        let mut rng = rng::stream(seed, self.group);
        let earlier: Vec<&MultiPolygon> = regions.regions.values().take(self.region_index).collect();
        let mut out = Vec::with_capacity(self.count);
        while out.len() < self.count {
            let mut attempts = 0u64;
            let p = loop {
                if attempts >= max_attempts {
                    return Err(Error::Saturation {
                        group: self.group.to_string(),
                        achieved: out.len(),
                        requested: self.count,
                    });
                }
                attempts += 1;
                let poly = &self.polygons[pick(&self.cumulative, &mut rng)];
                let c = uniform_in_bbox(poly, &mut rng);
                if !poly.contains(c) || earlier.iter().any(|mp| mp.contains(c)) {
                    continue;
                }
                if let Some(g) = grid.as_deref() {
                    if g.too_close(c) {
                        continue;
                    }
                }
                break c;
            };
            if let Some(g) = grid.as_deref_mut() {
                g.insert(p);
            }
            out.push(p);
        }
        Ok(out)
    }
}

fn cumulative_areas(polys: &[Polygon]) -> Vec<f64> {
    let mut acc = 0.0;
    polys
        .iter()
        .map(|p| {
            acc += p.spherical_area().max(0.0);
            acc
        })
        .collect()
}

fn pick(cumulative: &[f64], rng: &mut ChaCha20Rng) -> usize {
    if cumulative.len() == 1 {
        return 0;
    }
    let total = *cumulative.last().expect("nonempty");
    let u = rng.gen::<f64>() * total;
    cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1)
}

/// Uniform on the sphere within the polygon's lon/lat bounding box.
fn uniform_in_bbox(poly: &Polygon, rng: &mut ChaCha20Rng) -> Point {
    let b = poly.bbox();
    let lon = b.min_x + rng.gen::<f64>() * (b.max_x - b.min_x);
    let (s0, s1) = (b.min_y.to_radians().sin(), b.max_y.to_radians().sin());
    let lat = (s0 + rng.gen::<f64>() * (s1 - s0)).clamp(-1.0, 1.0).asin().to_degrees();
    Point::new(lon, lat.clamp(b.min_y, b.max_y))
}

fn unique_slugs(groups: &[String]) -> HashMap<&str, String> {
    let mut used = HashSet::new();
    let mut out = HashMap::new();
    for (i, g) in groups.iter().enumerate() {
        let mut slug: String = g
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
            .collect();
        if slug.is_empty() || !used.insert(slug.clone()) {
            slug = format!("{slug}~{i}");
            used.insert(slug.clone());
        }
        out.insert(g.as_str(), slug);
    }
    out
}

/// Spatial hash over accepted points for great-circle separation checks.
struct SeparationGrid {
    sep_m: f64,
    cell_deg: f64,
    lon_cells: i64,
    cells: HashMap<(i64, i64), Vec<Point>>,
}

impl SeparationGrid {
    fn new(sep_m: f64) -> Self {
        let cell_deg = (sep_m / AUTHALIC_RADIUS_M).to_degrees().clamp(1e-6, 180.0);
        SeparationGrid {
            sep_m,
            cell_deg,
            lon_cells: (360.0 / cell_deg).ceil() as i64,
            cells: HashMap::new(),
        }
    }

    fn key(&self, p: Point) -> (i64, i64) {
        let row = ((p.y + 90.0) / self.cell_deg).floor() as i64;
        let col = ((p.x + 180.0) / self.cell_deg).floor() as i64;
        (row, col.rem_euclid(self.lon_cells))
    }

    fn insert(&mut self, p: Point) {
        let k = self.key(p);
        self.cells.entry(k).or_default().push(p);
    }

    fn too_close(&self, p: Point) -> bool {
        let (row, col) = self.key(p);
        // longitude reach of the separation disc at the most poleward latitude in range
        let lat_edge = (p.y.abs() + self.cell_deg).min(90.0);
        let cos = lat_edge.to_radians().cos();
        let reach = if cos <= 1e-12 {
            self.lon_cells
        } else {
            ((self.cell_deg / cos) / self.cell_deg).ceil() as i64 + 1
        };
        let cols: Vec<i64> = if 2 * reach + 1 >= self.lon_cells {
            (0..self.lon_cells).collect()
        } else {
            (col - reach..=col + reach).map(|c| c.rem_euclid(self.lon_cells)).collect()
        };
        for r in row - 1..=row + 1 {
            for &c in &cols {
                if let Some(pts) = self.cells.get(&(r, c)) {
                    if pts.iter().any(|q| haversine_m(p, *q) < self.sep_m) {
                        return true;
                    }
                }
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_regions() -> RegionSet {
        let mut regions = IndexMap::new();
        for (i, g) in ["A", "B", "C"].iter().enumerate() {
            let x = i as f64 * 10.0;
            regions.insert(g.to_string(), MultiPolygon(vec![Polygon::rectangle(x, 0.0, x + 10.0, 10.0).unwrap()]));
        }
        RegionSet::new(regions)
    }

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn allocation_validation() {
        assert!(AllocationVector::new(names(&["a", "b"]), vec![0.5, 0.6]).is_err());
        assert!(AllocationVector::new(names(&["a", "a"]), vec![0.5, 0.5]).is_err());
        assert!(AllocationVector::new(names(&["a", "b"]), vec![-0.1, 1.1]).is_err());
        assert!(AllocationVector::one_hot(names(&["a", "b"]), "c").is_err());
        let g = AllocationVector::global(names(&["a", "b", "c", "d", "e", "f"])).unwrap();
        assert_eq!(g.weights().iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn one_hot_counts() {
        let groups = names(&["Africa", "Asia", "Europe", "North America", "Oceania", "South America"]);
        let a = AllocationVector::one_hot(groups, "Africa").unwrap();
        let c = allocate_counts(&a, 700_000);
        assert_eq!(c["Africa"], 700_000);
        assert_eq!(c.values().sum::<u64>(), 700_000);
    }

    #[test]
    fn uniform_six_gives_one_each() {
        let a = AllocationVector::global(names(&["1", "2", "3", "4", "5", "6"])).unwrap();
        assert!(allocate_counts(&a, 6).values().all(|&c| c == 1));
    }

    #[test]
    fn points_fall_in_their_group() {
        let r = square_regions();
        let a = AllocationVector::global(names(&["A", "B", "C"])).unwrap();
        let m = sample_points(&r, &a, 300, 11, None).unwrap();
        assert_eq!(m.realized_counts(), vec![100, 100, 100]);
        for s in &m.samples {
            assert_eq!(r.first_containing(Point::new(s.lon, s.lat)), Some(s.group_label.as_str()));
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let r = square_regions();
        let a = AllocationVector::global(names(&["A", "B", "C"])).unwrap();
        let m1 = sample_points(&r, &a, 150, 5, None).unwrap();
        let m2 = sample_points(&r, &a, 150, 5, None).unwrap();
        let m3 = sample_points(&r, &a, 150, 6, None).unwrap();
        assert_eq!(m1, m2);
        let same = m1.samples.iter().zip(&m3.samples).filter(|(a, b)| a.lat == b.lat && a.lon == b.lon).count();
        assert_eq!(same, 0);
    }

    #[test]
    fn missing_group_is_config_error() {
        let r = square_regions();
        let a = AllocationVector::new(names(&["A", "Z"]), vec![0.5, 0.5]).unwrap();
        assert!(matches!(sample_points(&r, &a, 10, 0, None), Err(Error::Config(_))));
        // zero weight on an absent group is fine
        let a = AllocationVector::new(names(&["A", "Z"]), vec![1.0, 0.0]).unwrap();
        assert_eq!(sample_points(&r, &a, 10, 0, None).unwrap().len(), 10);
    }

    #[test]
    fn overlap_resolution_and_strict_mode() {
        let mut regions = IndexMap::new();
        regions.insert("first".to_string(), MultiPolygon(vec![Polygon::rectangle(0.0, 0.0, 2.0, 2.0).unwrap()]));
        regions.insert("second".to_string(), MultiPolygon(vec![Polygon::rectangle(1.0, 0.0, 3.0, 2.0).unwrap()]));
        let r = RegionSet::new(regions);
        assert_eq!(r.find_overlap(), Some(("first".into(), "second".into())));
        let a = AllocationVector::one_hot(names(&["first", "second"]), "second").unwrap();
        let m = sample_points(&r, &a, 200, 1, None).unwrap();
        assert!(m.samples.iter().all(|s| s.lon > 2.0));
        let strict = SamplerOptions {
            strict: true,
            ..SamplerOptions::default()
        };
        assert!(sample_points_with(&r, &a, 10, 1, &strict).is_err());
    }

    #[test]
    fn touching_regions_do_not_overlap() {
        assert_eq!(square_regions().find_overlap(), None);
    }

    #[test]
    fn separation_respected() {
        let r = square_regions();
        let a = AllocationVector::global(names(&["A", "B", "C"])).unwrap();
        let m = sample_points(&r, &a, 90, 3, Some(50_000.0)).unwrap();
        for (i, s) in m.samples.iter().enumerate() {
            for t in &m.samples[i + 1..] {
                assert!(haversine_m(Point::new(s.lon, s.lat), Point::new(t.lon, t.lat)) >= 50_000.0);
            }
        }
    }

    #[test]
    fn separation_saturates() {
        // a 0.1° square is ~11 km across, so 23 km separation admits one point
        let mut regions = IndexMap::new();
        regions.insert("tiny".to_string(), MultiPolygon(vec![Polygon::rectangle(5.0, 5.0, 5.1, 5.1).unwrap()]));
        let r = RegionSet::new(regions);
        let a = AllocationVector::global(names(&["tiny"])).unwrap();
        let opts = SamplerOptions {
            min_separation_m: Some(23_000.0),
            max_attempts: 2_000,
            ..SamplerOptions::default()
        };
        match sample_points_with(&r, &a, 50, 0, &opts) {
            Err(Error::Saturation { achieved, requested, .. }) => {
                assert_eq!((achieved, requested), (1, 50));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
