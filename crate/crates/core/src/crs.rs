//! Coordinate reference systems understood by the toolkit.
//!
//! Only what tile footprints and region maps need: WGS84 geographic, Web
//! Mercator and the UTM zones on WGS84. The transverse Mercator projection uses
//! the Krüger n-series to sixth order, accurate to a few nanometres within a
//! UTM zone.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

const WGS84_A: f64 = 6_378_137.0;
const WGS84_F: f64 = 1.0 / 298.257_223_563;
const UTM_K0: f64 = 0.9996;
const UTM_FALSE_EASTING: f64 = 500_000.0;
const UTM_FALSE_NORTHING_SOUTH: f64 = 10_000_000.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Crs {
    /// EPSG:4326, coordinates are (lon, lat) in degrees.
    Wgs84,
    /// EPSG:3857.
    WebMercator,
    /// EPSG:326zz (north) / EPSG:327zz (south).
    Utm { zone: u8, north: bool },
}

impl Crs {
    pub fn from_epsg(code: u32) -> Result<Crs> {
        match code {
            4326 => Ok(Crs::Wgs84),
            3857 | 900913 => Ok(Crs::WebMercator),
            32601..=32660 => Ok(Crs::Utm {
                zone: (code - 32600) as u8,
                north: true,
            }),
            32701..=32760 => Ok(Crs::Utm {
                zone: (code - 32700) as u8,
                north: false,
            }),
            _ => Err(Error::Config(format!("unsupported CRS EPSG:{code}"))),
        }
    }

    pub fn epsg(&self) -> u32 {
        match *self {
            Crs::Wgs84 => 4326,
            Crs::WebMercator => 3857,
            Crs::Utm { zone, north: true } => 32600 + zone as u32,
            Crs::Utm { zone, north: false } => 32700 + zone as u32,
        }
    }

    pub fn is_geographic(&self) -> bool {
        matches!(self, Crs::Wgs84)
    }

    /// Projects WGS84 (lon, lat) degrees into this CRS.
    pub fn from_wgs84(&self, lon: f64, lat: f64) -> (f64, f64) {
        match *self {
            Crs::Wgs84 => (lon, lat),
            Crs::WebMercator => {
                let x = WGS84_A * lon.to_radians();
                let y = WGS84_A * (std::f64::consts::FRAC_PI_4 + lat.to_radians() / 2.0).tan().ln();
                (x, y)
            }
            Crs::Utm { zone, north } => {
                let (e, n) = TransverseMercator::utm(zone).forward(lon, lat);
                (e, if north { n } else { n + UTM_FALSE_NORTHING_SOUTH })
            }
        }
    }

    /// Inverse of [`Crs::from_wgs84`]: returns (lon, lat) degrees.
    pub fn to_wgs84(&self, x: f64, y: f64) -> (f64, f64) {
        match *self {
            Crs::Wgs84 => (x, y),
            Crs::WebMercator => {
                let lon = (x / WGS84_A).to_degrees();
                let lat = (2.0 * (y / WGS84_A).exp().atan() - std::f64::consts::FRAC_PI_2).to_degrees();
                (lon, lat)
            }
            Crs::Utm { zone, north } => {
                let n = if north { y } else { y - UTM_FALSE_NORTHING_SOUTH };
                TransverseMercator::utm(zone).inverse(x, n)
            }
        }
    }
}

impl fmt::Display for Crs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EPSG:{}", self.epsg())
    }
}

impl FromStr for Crs {
    type Err = Error;

    fn from_str(s: &str) -> Result<Crs> {
        let code = s
            .trim()
            .strip_prefix("EPSG:")
            .or_else(|| s.trim().strip_prefix("epsg:"))
            .unwrap_or(s.trim());
        let code: u32 = code
            .parse()
            .map_err(|_| Error::Config(format!("unrecognised CRS identifier `{s}`")))?;
        Crs::from_epsg(code)
    }
}

impl Serialize for Crs {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Crs {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

struct TransverseMercator {
    lon0: f64,
    k0: f64,
    false_easting: f64,
    a_hat: f64,
    e: f64,
    alpha: [f64; 6],
    beta: [f64; 6],
}

impl TransverseMercator {
    fn utm(zone: u8) -> Self {
        let lon0 = (zone as f64 - 1.0) * 6.0 - 180.0 + 3.0;
        let n = WGS84_F / (2.0 - WGS84_F);
        let [n2, n3, n4, n5, n6] = [n.powi(2), n.powi(3), n.powi(4), n.powi(5), n.powi(6)];
        TransverseMercator {
            lon0,
            k0: UTM_K0,
            false_easting: UTM_FALSE_EASTING,
            a_hat: WGS84_A / (1.0 + n) * (1.0 + n2 / 4.0 + n4 / 64.0 + n6 / 256.0),
            e: (WGS84_F * (2.0 - WGS84_F)).sqrt(),
            alpha: [
                n / 2.0 - 2.0 * n2 / 3.0 + 5.0 * n3 / 16.0 + 41.0 * n4 / 180.0 - 127.0 * n5 / 288.0
                    + 7891.0 * n6 / 37800.0,
                13.0 * n2 / 48.0 - 3.0 * n3 / 5.0 + 557.0 * n4 / 1440.0 + 281.0 * n5 / 630.0
                    - 1983433.0 * n6 / 1935360.0,
                61.0 * n3 / 240.0 - 103.0 * n4 / 140.0 + 15061.0 * n5 / 26880.0 + 167603.0 * n6 / 181440.0,
                49561.0 * n4 / 161280.0 - 179.0 * n5 / 168.0 + 6601661.0 * n6 / 7257600.0,
                34729.0 * n5 / 80640.0 - 3418889.0 * n6 / 1995840.0,
                212378941.0 * n6 / 319334400.0,
            ],
            beta: [
                n / 2.0 - 2.0 * n2 / 3.0 + 37.0 * n3 / 96.0 - n4 / 360.0 - 81.0 * n5 / 512.0
                    + 96199.0 * n6 / 604800.0,
                n2 / 48.0 + n3 / 15.0 - 437.0 * n4 / 1440.0 + 46.0 * n5 / 105.0 - 1118711.0 * n6 / 3870720.0,
                17.0 * n3 / 480.0 - 37.0 * n4 / 840.0 - 209.0 * n5 / 4480.0 + 5569.0 * n6 / 90720.0,
                4397.0 * n4 / 161280.0 - 11.0 * n5 / 504.0 - 830251.0 * n6 / 7257600.0,
                4583.0 * n5 / 161280.0 - 108847.0 * n6 / 3991680.0,
                20648693.0 * n6 / 638668800.0,
            ],
        }
    }

    fn forward(&self, lon: f64, lat: f64) -> (f64, f64) {
        let phi = lat.to_radians();
        let dl = (lon - self.lon0).to_radians();
        let e = self.e;
        let t = (phi.sin().atanh() - e * (e * phi.sin()).atanh()).sinh();
        let xi_p = t.atan2(dl.cos());
        let eta_p = (dl.sin() / (1.0 + t * t).sqrt()).atanh();
        let mut xi = xi_p;
        let mut eta = eta_p;
        for (j, a) in self.alpha.iter().enumerate() {
            let k = 2.0 * (j + 1) as f64;
            xi += a * (k * xi_p).sin() * (k * eta_p).cosh();
            eta += a * (k * xi_p).cos() * (k * eta_p).sinh();
        }
        (
            self.false_easting + self.k0 * self.a_hat * eta,
            self.k0 * self.a_hat * xi,
        )
    }

    fn inverse(&self, easting: f64, northing: f64) -> (f64, f64) {
        let xi = northing / (self.k0 * self.a_hat);
        let eta = (easting - self.false_easting) / (self.k0 * self.a_hat);
        let mut xi_p = xi;
        let mut eta_p = eta;
        for (j, b) in self.beta.iter().enumerate() {
            let k = 2.0 * (j + 1) as f64;
            xi_p -= b * (k * xi).sin() * (k * eta).cosh();
            eta_p -= b * (k * xi).cos() * (k * eta).sinh();
        }
        // conformal latitude chi, then invert t(phi) = tan(chi) by fixed point
        let chi = (xi_p.sin() / eta_p.cosh()).asin();
        let e = self.e;
        let mut phi = chi;
        for _ in 0..30 {
            let s = e * phi.sin();
            let next = 2.0 * ((std::f64::consts::FRAC_PI_4 + chi / 2.0).tan() * ((1.0 + s) / (1.0 - s)).powf(e / 2.0)).atan()
                - std::f64::consts::FRAC_PI_2;
            let done = (next - phi).abs() < 1e-15;
            phi = next;
            if done {
                break;
            }
        }
        let lon = self.lon0 + eta_p.sinh().atan2(xi_p.cos()).to_degrees();
        (lon, phi.to_degrees())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn epsg_round_trip() {
        for code in [4326, 3857, 32601, 32633, 32660, 32701, 32756] {
            assert_eq!(Crs::from_epsg(code).unwrap().epsg(), code);
        }
        assert!(Crs::from_epsg(2154).is_err());
        assert_eq!("EPSG:32633".parse::<Crs>().unwrap(), Crs::Utm { zone: 33, north: true });
    }

    #[test]
    fn utm_central_meridian_on_equator() {
        let crs = Crs::Utm { zone: 31, north: true };
        let (e, n) = crs.from_wgs84(3.0, 0.0);
        assert_abs_diff_eq!(e, 500_000.0, epsilon = 1e-6);
        assert_abs_diff_eq!(n, 0.0, epsilon = 1e-6);
    }

    #[test]
    fn utm_round_trip() {
        let crs = Crs::Utm { zone: 33, north: false };
        for &(lon, lat) in &[(15.0, -33.9), (12.3, -0.5), (17.9, -70.0)] {
            let (x, y) = crs.from_wgs84(lon, lat);
            let (lon2, lat2) = crs.to_wgs84(x, y);
            assert_abs_diff_eq!(lon, lon2, epsilon = 1e-9);
            assert_abs_diff_eq!(lat, lat2, epsilon = 1e-9);
        }
    }

    #[test]
    fn web_mercator_round_trip() {
        let (x, y) = Crs::WebMercator.from_wgs84(-122.4, 37.8);
        let (lon, lat) = Crs::WebMercator.to_wgs84(x, y);
        assert_abs_diff_eq!(lon, -122.4, epsilon = 1e-10);
        assert_abs_diff_eq!(lat, 37.8, epsilon = 1e-10);
    }
}
