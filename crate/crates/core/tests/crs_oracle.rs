use geodiverse::crs::Crs;
use proptest::prelude::*;

/// (zone, north, lon, lat, easting, northing) from Snyder's transverse
/// Mercator series evaluated in 50-digit arithmetic.
#[allow(clippy::excessive_precision)]
const SNYDER: [(u8, bool, f64, f64, f64, f64); 10] = [
    (31, true, 3.0, 0.0, 500000.0, 0.0),
    (31, true, 4.0, 45.0, 578815.30291673325, 4983436.7686033385),
    (32, true, 9.5, 47.3, 537799.45467570889, 5238624.1115012584),
    (33, false, 15.0, -33.9, 500000.0, 6248931.7338197856),
    (33, false, 13.2, -0.8, 299691.29849692724, 9911531.9632120586),
    (18, true, -75.0, 40.0, 500000.0, 4427757.2188789735),
    (18, true, -77.5, 40.5, 288154.70892097244, 4486257.3515598073),
    (56, false, 151.2, -33.87, 333510.65007925063, 6250800.2411276468),
    (35, true, 27.0, 60.0, 500000.0, 6651411.1911221811),
    (30, true, -2.1, 51.5, 562470.89098184705, 5705813.164258637),
];

#[test]
fn utm_forward_matches_snyder_series() {
    // the truncated Snyder series stays within ~1 mm of the exact projection
    // inside a zone
    for (zone, north, lon, lat, e, n) in SNYDER {
        let (x, y) = Crs::Utm { zone, north }.from_wgs84(lon, lat);
        let d = (x - e).abs().max((y - n).abs());
        assert!(d < 2e-3, "zone {zone}{} ({lon}, {lat}): ({x}, {y}) vs ({e}, {n})", if north { 'N' } else { 'S' });
    }
}

#[test]
fn utm_inverse_recovers_snyder_inputs() {
    for (zone, north, lon, lat, e, n) in SNYDER {
        let (lo, la) = Crs::Utm { zone, north }.to_wgs84(e, n);
        assert!((lo - lon).abs() < 2e-7 && (la - lat).abs() < 2e-7, "zone {zone}: ({lo}, {la}) vs ({lon}, {lat})");
    }
}

#[test]
fn web_mercator_closed_form() {
    const R: f64 = 6_378_137.0;
    for (lon, lat) in [(0.0, 0.0), (13.4, 52.5), (-122.4, 37.8), (151.2, -33.9), (179.9, 84.0)] {
        let (x, y) = Crs::WebMercator.from_wgs84(lon, lat);
        let want_y = R * (std::f64::consts::FRAC_PI_4 + f64::to_radians(lat) / 2.0).tan().ln();
        assert!((x - R * f64::to_radians(lon)).abs() < 1e-6);
        assert!((y - want_y).abs() < 1e-6 * want_y.abs().max(1.0));
    }
}

proptest! {
    #[test]
    fn utm_round_trip_within_zone(zone in 1u8..=60, north in any::<bool>(), dlon in -3.0f64..3.0, lat in 0.0f64..80.0) {
        let crs = Crs::Utm { zone, north };
        let lon = -183.0 + 6.0 * zone as f64 + dlon;
        let lat = if north { lat } else { -lat };
        let (x, y) = crs.from_wgs84(lon, lat);
        let (lo, la) = crs.to_wgs84(x, y);
        let dlon = (lo - lon + 540.0).rem_euclid(360.0) - 180.0;
        prop_assert!(dlon.abs() < 1e-9 && (la - lat).abs() < 1e-9, "({lon}, {lat}) -> ({lo}, {la})");
    }

    #[test]
    fn epsg_codes_round_trip(zone in 1u8..=60, north in any::<bool>()) {
        let crs = Crs::Utm { zone, north };
        prop_assert_eq!(Crs::from_epsg(crs.epsg()).unwrap(), crs);
    }
}
