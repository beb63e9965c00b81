//! Planar polygon primitives on lon/lat (or projected) coordinates.
//!
//! Rings are stored open (the closing vertex is not repeated). After
//! construction, exteriors wind counterclockwise and holes clockwise, so the
//! signed area of a polygon is the sum of the signed areas of its rings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Radius of the authalic sphere for the WGS84 ellipsoid, in metres.
pub const AUTHALIC_RADIUS_M: f64 = 6_371_007.2;

const BOUNDARY_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BBox {
    pub fn of(points: &[Point]) -> BBox {
        let mut b = BBox {
            min_x: f64::INFINITY,
            min_y: f64::INFINITY,
            max_x: f64::NEG_INFINITY,
            max_y: f64::NEG_INFINITY,
        };
        for p in points {
            b.min_x = b.min_x.min(p.x);
            b.min_y = b.min_y.min(p.y);
            b.max_x = b.max_x.max(p.x);
            b.max_y = b.max_y.max(p.y);
        }
        b
    }

    pub fn union(&self, other: &BBox) -> BBox {
        BBox {
            min_x: self.min_x.min(other.min_x),
            min_y: self.min_y.min(other.min_y),
            max_x: self.max_x.max(other.max_x),
            max_y: self.max_y.max(other.max_y),
        }
    }

    pub fn intersects(&self, other: &BBox) -> bool {
        self.min_x <= other.max_x
            && other.min_x <= self.max_x
            && self.min_y <= other.max_y
            && other.min_y <= self.max_y
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }
}

/// Where a point lies relative to a ring or polygon.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Location {
    Inside,
    Boundary,
    Outside,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Polygon {
    exterior: Vec<Point>,
    holes: Vec<Vec<Point>>,
    bbox: BBox,
}

impl Polygon {
    /// Builds a validated polygon: rings are closed/deduplicated, oriented and
    /// checked for self-intersections.
    pub fn new(exterior: Vec<Point>, holes: Vec<Vec<Point>>) -> Result<Polygon> {
        let mut exterior = normalize_ring(exterior)?;
        if signed_area(&exterior) < 0.0 {
            exterior.reverse();
        }
        let mut norm_holes = Vec::with_capacity(holes.len());
        for h in holes {
            let mut h = normalize_ring(h)?;
            if signed_area(&h) > 0.0 {
                h.reverse();
            }
            norm_holes.push(h);
        }
        let poly = Polygon {
            bbox: BBox::of(&exterior),
            exterior,
            holes: norm_holes,
        };
        poly.check_simple()?;
        Ok(poly)
    }

    /// An axis-aligned rectangle, counterclockwise.
    pub fn rectangle(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Result<Polygon> {
        Polygon::new(
            vec![
                Point::new(min_x, min_y),
                Point::new(max_x, min_y),
                Point::new(max_x, max_y),
                Point::new(min_x, max_y),
            ],
            vec![],
        )
    }

    pub fn exterior(&self) -> &[Point] {
        &self.exterior
    }

    pub fn holes(&self) -> &[Vec<Point>] {
        &self.holes
    }

    pub fn rings(&self) -> impl Iterator<Item = &[Point]> {
        std::iter::once(self.exterior.as_slice()).chain(self.holes.iter().map(|h| h.as_slice()))
    }

    pub fn bbox(&self) -> BBox {
        self.bbox
    }

    pub fn locate(&self, p: Point) -> Location {
        if !self.bbox.contains(p) {
            return Location::Outside;
        }
        match locate_in_ring(p, &self.exterior) {
            Location::Outside => Location::Outside,
            Location::Boundary => Location::Boundary,
            Location::Inside => {
                for h in &self.holes {
                    match locate_in_ring(p, h) {
                        Location::Inside => return Location::Outside,
                        Location::Boundary => return Location::Boundary,
                        Location::Outside => {}
                    }
                }
                Location::Inside
            }
        }
    }

    /// Boundary-inclusive containment.
    pub fn contains(&self, p: Point) -> bool {
        self.locate(p) != Location::Outside
    }

    /// Planar (shoelace) area in squared coordinate units.
    pub fn planar_area(&self) -> f64 {
        self.rings().map(signed_area).sum()
    }

    /// Area on the authalic sphere, in square metres, of the region bounded by
    /// straight lon/lat edges (coordinates in degrees).
    pub fn spherical_area(&self) -> f64 {
        self.rings().map(spherical_signed_area).sum()
    }

    /// Signed area of `self ∩ clip` where `clip` is a convex counterclockwise
    /// ring, measured with `area`.
    pub fn clipped_area(&self, clip: &[Point], area: impl Fn(&[Point]) -> f64) -> f64 {
        let cb = BBox::of(clip);
        if !self.bbox.intersects(&cb) {
            return 0.0;
        }
        self.rings()
            .map(|r| {
                let clipped = clip_ring_convex(r, clip);
                if clipped.len() < 3 {
                    0.0
                } else {
                    area(&clipped)
                }
            })
            .sum()
    }

    /// Some point strictly inside the polygon.
    pub fn interior_point(&self) -> Option<Point> {
        // scan a few horizontal lines and take the midpoint of the widest interior span
        let b = self.bbox;
        let mut best: Option<(f64, Point)> = None;
        for k in 1..8 {
            let y = b.min_y + (b.max_y - b.min_y) * (k as f64) / 8.0 + (b.max_y - b.min_y) * 1e-7;
            let mut xs: Vec<f64> = Vec::new();
            for ring in self.rings() {
                for (a, c) in edges(ring) {
                    if (a.y > y) != (c.y > y) {
                        xs.push(a.x + (y - a.y) * (c.x - a.x) / (c.y - a.y));
                    }
                }
            }
            xs.sort_by(f64::total_cmp);
            for pair in xs.chunks_exact(2) {
                let width = pair[1] - pair[0];
                let mid = Point::new(0.5 * (pair[0] + pair[1]), y);
                if width > 0.0
                    && best.is_none_or(|(w, _)| width > w)
                    && self.locate(mid) == Location::Inside
                {
                    best = Some((width, mid));
                }
            }
        }
        best.map(|(_, p)| p)
    }

    fn check_simple(&self) -> Result<()> {
        let mut segs: Vec<(Point, Point)> = Vec::new();
        for ring in self.rings() {
            segs.extend(edges(ring));
        }
        let n_ext = self.exterior.len();
        let ring_of = |i: usize| -> (usize, usize, usize) {
            // (ring index, position in ring, ring length)
            if i < n_ext {
                return (0, i, n_ext);
            }
            let mut off = n_ext;
            for (k, h) in self.holes.iter().enumerate() {
                if i < off + h.len() {
                    return (k + 1, i - off, h.len());
                }
                off += h.len();
            }
            unreachable!()
        };
        let mut idx: Vec<usize> = (0..segs.len()).collect();
        let min_x = |i: usize| segs[i].0.x.min(segs[i].1.x);
        let max_x = |i: usize| segs[i].0.x.max(segs[i].1.x);
        idx.sort_by(|&a, &b| min_x(a).total_cmp(&min_x(b)));
        for (pos, &i) in idx.iter().enumerate() {
            for &j in &idx[pos + 1..] {
                if min_x(j) > max_x(i) {
                    break;
                }
                let (ri, pi, li) = ring_of(i);
                let (rj, pj, _) = ring_of(j);
                let adjacent = ri == rj && (pi + 1) % li == pj || ri == rj && (pj + 1) % li == pi;
                let (a, b) = segs[i];
                let (c, d) = segs[j];
                if adjacent {
                    // neighbouring edges may only share their common vertex
                    if collinear_overlap(a, b, c, d) {
                        return Err(Error::Validation("polygon ring folds back on itself".into()));
                    }
                    continue;
                }
                if segments_intersect(a, b, c, d) {
                    return Err(Error::Validation(format!(
                        "polygon is self-intersecting near ({}, {})",
                        a.x, a.y
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A union of disjoint polygons.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MultiPolygon(pub Vec<Polygon>);

impl MultiPolygon {
    pub fn polygons(&self) -> &[Polygon] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bbox(&self) -> Option<BBox> {
        self.0.iter().map(Polygon::bbox).reduce(|a, b| a.union(&b))
    }

    pub fn contains(&self, p: Point) -> bool {
        self.0.iter().any(|poly| poly.contains(p))
    }

    pub fn spherical_area(&self) -> f64 {
        self.0.iter().map(Polygon::spherical_area).sum()
    }
}

pub(crate) fn edges(ring: &[Point]) -> impl Iterator<Item = (Point, Point)> + '_ {
    let n = ring.len();
    (0..n).map(move |i| (ring[i], ring[(i + 1) % n]))
}

fn normalize_ring(mut ring: Vec<Point>) -> Result<Vec<Point>> {
    if ring.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(Error::Validation("ring has non-finite coordinates".into()));
    }
    ring.dedup();
    while ring.len() > 1 && ring.first() == ring.last() {
        ring.pop();
    }
    if ring.len() < 3 {
        return Err(Error::Validation(format!(
            "ring needs at least 3 distinct vertices, got {}",
            ring.len()
        )));
    }
    if signed_area(&ring) == 0.0 {
        return Err(Error::Validation("ring has zero area".into()));
    }
    Ok(ring)
}

/// Shoelace signed area; positive for counterclockwise rings.
pub fn signed_area(ring: &[Point]) -> f64 {
    let n = ring.len();
    if n < 3 {
        return 0.0;
    }
    // shift to the first vertex to limit cancellation
    let o = ring[0];
    let mut s = 0.0;
    for i in 1..n - 1 {
        let a = ring[i];
        let b = ring[i + 1];
        s += (a.x - o.x) * (b.y - o.y) - (b.x - o.x) * (a.y - o.y);
    }
    0.5 * s
}

/// Signed area (m²) on the authalic sphere of a ring whose edges are straight
/// in lon/lat degrees; positive for counterclockwise rings.
///
/// Integrates `R² cos(φ) dφ dλ` exactly via Green's theorem:
/// `A = -R² ∮ sin(φ) dλ`, with `φ` linear in `λ` along every edge.
pub fn spherical_signed_area(ring: &[Point]) -> f64 {
    let mut s = 0.0;
    for (a, b) in edges(ring) {
        let (la, lb) = (a.x.to_radians(), b.x.to_radians());
        let (pa, pb) = (a.y.to_radians(), b.y.to_radians());
        let half = 0.5 * (pb - pa);
        let sinc = if half.abs() < 1e-8 {
            1.0 - half * half / 6.0
        } else {
            half.sin() / half
        };
        s += (lb - la) * (0.5 * (pa + pb)).sin() * sinc;
    }
    -AUTHALIC_RADIUS_M * AUTHALIC_RADIUS_M * s
}

/// Area (m²) of the lon/lat cell `[lon0, lon1] × [lat0, lat1]` in degrees.
pub fn spherical_cell_area(lon0: f64, lon1: f64, lat0: f64, lat1: f64) -> f64 {
    AUTHALIC_RADIUS_M
        * AUTHALIC_RADIUS_M
        * (lon1 - lon0).to_radians().abs()
        * (lat1.to_radians().sin() - lat0.to_radians().sin()).abs()
}

/// Great-circle distance in metres between two lon/lat points (degrees).
pub fn haversine_m(a: Point, b: Point) -> f64 {
    let (p1, p2) = (a.y.to_radians(), b.y.to_radians());
    let dp = p2 - p1;
    let dl = (b.x - a.x).to_radians();
    let h = (dp * 0.5).sin().powi(2) + p1.cos() * p2.cos() * (dl * 0.5).sin().powi(2);
    2.0 * AUTHALIC_RADIUS_M * h.sqrt().min(1.0).asin()
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn on_segment(p: Point, a: Point, b: Point) -> bool {
    let scale = (b.x - a.x).abs().max((b.y - a.y).abs()).max(1.0);
    cross(a, b, p).abs() <= BOUNDARY_EPS * scale
        && p.x >= a.x.min(b.x) - BOUNDARY_EPS
        && p.x <= a.x.max(b.x) + BOUNDARY_EPS
        && p.y >= a.y.min(b.y) - BOUNDARY_EPS
        && p.y <= a.y.max(b.y) + BOUNDARY_EPS
}

/// Crossing-number point location with an explicit boundary test.
pub fn locate_in_ring(p: Point, ring: &[Point]) -> Location {
    let mut inside = false;
    for (a, b) in edges(ring) {
        if on_segment(p, a, b) {
            return Location::Boundary;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x_cross {
                inside = !inside;
            }
        }
    }
    if inside {
        Location::Inside
    } else {
        Location::Outside
    }
}

/// True if the closed segments `ab` and `cd` share any point.
pub fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(a, c, d))
        || (d2 == 0.0 && on_segment(b, c, d))
        || (d3 == 0.0 && on_segment(c, a, b))
        || (d4 == 0.0 && on_segment(d, a, b))
}

/// True if the segments cross at a single interior point of both.
pub fn segments_cross_properly(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

fn collinear_overlap(a: Point, b: Point, c: Point, d: Point) -> bool {
    if cross(a, b, c) != 0.0 || cross(a, b, d) != 0.0 {
        return false;
    }
    // shared endpoint is fine; anything more is a fold
    let shared = [a, b].iter().filter(|p| **p == c || **p == d).count();
    let inner = |p: Point, s: Point, e: Point| p != s && p != e && on_segment(p, s, e);
    shared == 2 || inner(a, c, d) || inner(b, c, d) || inner(c, a, b) || inner(d, a, b)
}

pub fn is_convex(ring: &[Point]) -> bool {
    let n = ring.len();
    if n < 3 {
        return false;
    }
    let mut sign = 0.0f64;
    for i in 0..n {
        let c = cross(ring[i], ring[(i + 1) % n], ring[(i + 2) % n]);
        if c != 0.0 {
            if sign != 0.0 && c.signum() != sign {
                return false;
            }
            sign = c.signum();
        }
    }
    sign != 0.0
}

/// Sutherland–Hodgman clipping of `subject` against a convex counterclockwise
/// `clip` ring. For a non-convex subject the output may contain degenerate
/// back-and-forth edges along the clip boundary; those cancel in any line
/// integral, so signed areas remain exact.
pub fn clip_ring_convex(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let mut output: Vec<Point> = subject.to_vec();
    for (ca, cb) in edges(clip) {
        if output.is_empty() {
            break;
        }
        let input = std::mem::take(&mut output);
        let inside = |p: Point| cross(ca, cb, p) >= 0.0;
        let intersect = |p: Point, q: Point| {
            let dp = cross(ca, cb, p);
            let dq = cross(ca, cb, q);
            let t = dp / (dp - dq);
            Point::new(p.x + t * (q.x - p.x), p.y + t * (q.y - p.y))
        };
        let n = input.len();
        for i in 0..n {
            let cur = input[i];
            let prev = input[(i + n - 1) % n];
            match (inside(prev), inside(cur)) {
                (true, true) => output.push(cur),
                (true, false) => output.push(intersect(prev, cur)),
                (false, true) => {
                    output.push(intersect(prev, cur));
                    output.push(cur);
                }
                (false, false) => {}
            }
        }
    }
    output
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn square(x0: f64, y0: f64, s: f64) -> Polygon {
        Polygon::rectangle(x0, y0, x0 + s, y0 + s).unwrap()
    }

    #[test]
    fn orientation_normalised() {
        let cw = vec![
            Point::new(0.0, 0.0),
            Point::new(0.0, 1.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 0.0),
        ];
        let p = Polygon::new(cw, vec![]).unwrap();
        assert!(signed_area(p.exterior()) > 0.0);
        assert_eq!(p.exterior().len(), 4);
    }

    #[test]
    fn bowtie_rejected() {
        let bowtie = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
        ];
        assert!(matches!(Polygon::new(bowtie, vec![]), Err(Error::Validation(_))));
    }

    #[test]
    fn too_few_vertices_rejected() {
        let r = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 0.0)];
        assert!(Polygon::new(r, vec![]).is_err());
    }

    #[test]
    fn hole_excludes_points() {
        let p = Polygon::new(
            square(0.0, 0.0, 4.0).exterior().to_vec(),
            vec![square(1.0, 1.0, 2.0).exterior().to_vec()],
        )
        .unwrap();
        assert!(p.contains(Point::new(0.5, 0.5)));
        assert!(!p.contains(Point::new(2.0, 2.0)));
        assert_eq!(p.locate(Point::new(1.0, 2.0)), Location::Boundary);
        assert_relative_eq!(p.planar_area(), 12.0);
    }

    #[test]
    fn boundary_points_located() {
        let s = square(0.0, 0.0, 1.0);
        assert_eq!(s.locate(Point::new(1.0, 0.5)), Location::Boundary);
        assert_eq!(s.locate(Point::new(0.0, 0.0)), Location::Boundary);
        assert_eq!(s.locate(Point::new(0.5, 0.5)), Location::Inside);
        assert_eq!(s.locate(Point::new(1.5, 0.5)), Location::Outside);
    }

    #[test]
    fn cell_area_matches_ring_integral() {
        let r = square(10.0, 40.0, 2.0);
        assert_relative_eq!(
            r.spherical_area(),
            spherical_cell_area(10.0, 12.0, 40.0, 42.0),
            max_relative = 1e-12
        );
    }

    #[test]
    fn whole_sphere_band_area() {
        // a full 360° band from pole to pole covers 4πR²
        let band = Polygon::rectangle(-180.0, -90.0, 180.0, 90.0).unwrap();
        let expected = 4.0 * std::f64::consts::PI * AUTHALIC_RADIUS_M.powi(2);
        assert_relative_eq!(band.spherical_area(), expected, max_relative = 1e-12);
    }

    #[test]
    fn sloped_edge_area_converges_to_subdivided_cells() {
        // triangle with a sloped edge vs. a fine Riemann sum of cell areas
        let tri = Polygon::new(
            vec![Point::new(0.0, 0.0), Point::new(10.0, 0.0), Point::new(0.0, 60.0)],
            vec![],
        )
        .unwrap();
        let n = 20_000;
        let mut riemann = 0.0;
        for i in 0..n {
            let lat0 = 60.0 * i as f64 / n as f64;
            let lat1 = 60.0 * (i + 1) as f64 / n as f64;
            let mid = 0.5 * (lat0 + lat1);
            let lon_max = 10.0 * (1.0 - mid / 60.0);
            riemann += spherical_cell_area(0.0, lon_max, lat0, lat1);
        }
        assert_relative_eq!(tri.spherical_area(), riemann, max_relative = 1e-7);
    }

    #[test]
    fn clipping_concave_subject() {
        // U-shaped subject clipped by a square across both arms
        let u = Polygon::new(
            vec![
                Point::new(0.0, 0.0),
                Point::new(3.0, 0.0),
                Point::new(3.0, 3.0),
                Point::new(2.0, 3.0),
                Point::new(2.0, 1.0),
                Point::new(1.0, 1.0),
                Point::new(1.0, 3.0),
                Point::new(0.0, 3.0),
            ],
            vec![],
        )
        .unwrap();
        let clip = square(0.0, 2.0, 3.0);
        let a = u.clipped_area(clip.exterior(), signed_area);
        assert_relative_eq!(a, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn convexity() {
        assert!(is_convex(square(0.0, 0.0, 1.0).exterior()));
        let l = [
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(2.0, 1.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 2.0),
            Point::new(0.0, 2.0),
        ];
        assert!(!is_convex(&l));
    }

    #[test]
    fn haversine_quarter_meridian() {
        let d = haversine_m(Point::new(0.0, 0.0), Point::new(0.0, 90.0));
        assert_relative_eq!(d, AUTHALIC_RADIUS_M * std::f64::consts::FRAC_PI_2, max_relative = 1e-12);
    }

    #[test]
    fn interior_point_is_inside() {
        let u = Polygon::new(
            vec![
                Point::new(0.0, 0.0),
                Point::new(3.0, 0.0),
                Point::new(3.0, 3.0),
                Point::new(2.0, 3.0),
                Point::new(2.0, 1.0),
                Point::new(1.0, 1.0),
                Point::new(1.0, 3.0),
                Point::new(0.0, 3.0),
            ],
            vec![],
        )
        .unwrap();
        let p = u.interior_point().unwrap();
        assert_eq!(u.locate(p), Location::Inside);
    }
}
