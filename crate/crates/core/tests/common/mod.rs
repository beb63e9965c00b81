//! Independent oracles and shared property checks for the integration tests.
#![allow(dead_code)]

use geodiverse::crs::Crs;
use geodiverse::diversity::{
    class_area_diversity, sample_class_diversity, spectral_entropy_sample, HistogramSpec, LogBase,
};
use geodiverse::overlay::AreaVector;
use geodiverse::raster::{GeoTransform, PixelData, RasterTile};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

/// Frozen extended-precision values (mpmath, 40 digits).
#[allow(clippy::excessive_precision)]
pub mod frozen {
    /// FMoW continent vector renormalised from its printed sum of 0.98.
    pub const FMOW_RENORMALISED: f64 = 1.541_239_231_718_772_357_4;
    pub const HALF_QUARTER_QUARTER: f64 = 1.039_720_770_839_917_964_1;
    pub const FIVE_THREE_TWO: f64 = 1.029_653_014_064_573_527_4;
    pub const THREE_QUARTERS_ONE_QUARTER: f64 = 0.562_335_144_618_808_350_29;
}

pub const FMOW_VECTOR: [f64; 6] = [0.21, 0.09, 0.35, 0.23, 0.08, 0.02];

/// Error-free addition (Knuth TwoSum).
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Double-double accumulation; the result carries ~106 bits before the final
/// rounding.
pub fn dd_sum(terms: impl IntoIterator<Item = f64>) -> f64 {
    let (mut hi, mut lo) = (0.0f64, 0.0f64);
    for t in terms {
        let (s, e) = two_sum(hi, t);
        let (h, l) = two_sum(s, e + lo);
        hi = h;
        lo = l;
    }
    hi + lo
}

/// −Σ pᵢ ln pᵢ with pᵢ = wᵢ / Σw, accumulated in double-double.
pub fn entropy_oracle(weights: &[f64]) -> f64 {
    let total = dd_sum(weights.iter().copied());
    -dd_sum(weights.iter().filter(|w| **w > 0.0).map(|w| {
        let p = w / total;
        p * p.ln()
    }))
}

/// Bin of `x` by scanning the edges `lo + (hi − lo)·k/K` left to right.
pub fn scan_bin(x: f64, lo: f64, hi: f64, bins: usize) -> usize {
    for k in 0..bins - 1 {
        let upper = lo + (hi - lo) * (k + 1) as f64 / bins as f64;
        if x < upper {
            return k;
        }
    }
    bins - 1
}

/// Per-band entropies of `tile` under per-sample min–max binning, by
/// explicit assignment. NaN and nodata pixels are skipped.
pub fn brute_force_spectral(tile: &RasterTile, bins: usize) -> Vec<f64> {
    (0..tile.bands.len())
        .map(|b| {
            let vals: Vec<f64> = tile
                .band_values(b)
                .filter(|v| !v.is_nan() && tile.nodata != Some(*v))
                .collect();
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if lo == hi {
                return 0.0;
            }
            let mut counts = vec![0u64; bins];
            for &x in &vals {
                counts[scan_bin(x, lo, hi, bins)] += 1;
            }
            entropy_oracle(&counts.iter().map(|&c| c as f64).collect::<Vec<_>>())
        })
        .collect()
}

pub fn tile_f32(bands: usize, h: usize, w: usize, values: Vec<f32>) -> RasterTile {
    RasterTile::new(
        (0..bands).map(|b| format!("B{}", b + 1)).collect(),
        h,
        w,
        PixelData::F32(values),
        GeoTransform::north_up(10.0, 50.0, 0.001, 0.001),
        Crs::Wgs84,
        None,
    )
    .expect("valid tile")
}

pub fn tile_f64_values(bands: usize, h: usize, w: usize, values: &[f64]) -> RasterTile {
    tile_f32(bands, h, w, values.iter().map(|&v| v as f32).collect())
}

// ---- shared property checks ---------------------------------------------

pub const TOL: f64 = 1e-12;

fn close(a: f64, b: f64, what: &str) -> Result<(), TestCaseError> {
    prop_assert!((a - b).abs() <= TOL, "{what}: {a} vs {b} (diff {:e})", (a - b).abs());
    Ok(())
}

/// Continuous random band data: (bands, h, w, values in [0, 1)).
pub fn band_data() -> impl Strategy<Value = (usize, usize, usize, Vec<f64>)> {
    (1usize..=4, 1usize..=8, 1usize..=8).prop_flat_map(|(b, h, w)| {
        (Just(b), Just(h), Just(w), proptest::collection::vec(0.0f64..1.0, b * h * w))
    })
}

/// `x → a·x + b` with `a > 0` leaves per-sample-range entropies unchanged.
///
/// Checked twice: on f64 band values through `histogram` with arbitrary
/// `(a, b)`, and end to end on f32 tiles with `a = 2^k`, `b = m/64`, where the
/// transform is exact in f32 and so cannot merge distinct pixel values.
pub fn check_affine(
    data: &(usize, usize, usize, Vec<f64>),
    a: f64,
    b: f64,
    k: i32,
    m: i32,
) -> Result<(), TestCaseError> {
    use geodiverse::diversity::{histogram, shannon_entropy, Distribution};
    let (nb, h, w, vals) = data;
    let n = h * w;
    let bins = 100;
    let entropy = |counts: &[u64]| {
        let wts: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        let labels = (0..wts.len()).map(|i| i.to_string()).collect();
        shannon_entropy(&Distribution::from_weights(labels, &wts).unwrap(), LogBase::Natural)
    };
    for band in vals.chunks(n) {
        let moved: Vec<f64> = band.iter().map(|&x| a * x + b).collect();
        let range = |v: &[f64]| {
            (
                v.iter().copied().fold(f64::INFINITY, f64::min),
                v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            )
        };
        let (lo0, hi0) = range(band);
        let (lo1, hi1) = range(&moved);
        let c0 = histogram(band, lo0, hi0, bins);
        let c1 = histogram(&moved, lo1, hi1, bins);
        close(entropy(&c0), entropy(&c1), "band entropy under affine map")?;
    }

    let scale = 2f64.powi(k);
    let offset = m as f64 / 64.0;
    let base: Vec<f32> = vals.iter().map(|&v| ((v * 4096.0).floor() / 4096.0) as f32).collect();
    let moved: Vec<f32> = base.iter().map(|&v| (scale * v as f64 + offset) as f32).collect();
    debug_assert!(base.iter().zip(&moved).all(|(x, y)| (scale * *x as f64 + offset) == *y as f64));
    let spec = HistogramSpec::default();
    let t0 = spectral_entropy_sample(&tile_f32(*nb, *h, *w, base), &spec, LogBase::Natural).unwrap();
    let t1 = spectral_entropy_sample(&tile_f32(*nb, *h, *w, moved), &spec, LogBase::Natural).unwrap();
    for (key, v) in &t0.per_band {
        close(*v, t1.per_band[key], &format!("band {key}"))?;
    }
    close(t0.mean, t1.mean, "sample mean")
}

/// Shuffling pixels within bands and reordering bands leaves entropies
/// unchanged.
pub fn check_pixel_and_band_permutation(
    data: &(usize, usize, usize, Vec<f64>),
    seed: u64,
) -> Result<(), TestCaseError> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let (nb, h, w, vals) = data;
    let n = h * w;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let spec = HistogramSpec::default();
    let tile = tile_f64_values(*nb, *h, *w, vals);
    let base = spectral_entropy_sample(&tile, &spec, LogBase::Natural).unwrap();
    let mut order: Vec<usize> = (0..*nb).collect();
    order.shuffle(&mut rng);
    let mut shuffled = Vec::with_capacity(vals.len());
    for &b in &order {
        let mut band = vals[b * n..(b + 1) * n].to_vec();
        band.shuffle(&mut rng);
        shuffled.extend(band);
    }
    let mut moved = tile_f64_values(*nb, *h, *w, &shuffled);
    moved.bands = order.iter().map(|&b| format!("B{}", b + 1)).collect();
    let other = spectral_entropy_sample(&moved, &spec, LogBase::Natural).unwrap();
    for (k, v) in &base.per_band {
        close(*v, other.per_band[k], &format!("band {k}"))?;
    }
    close(base.mean, other.mean, "sample mean")
}

/// Random area vectors over `k` classes, some tiles possibly empty in a class.
pub fn area_vectors() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..=8).prop_flat_map(|k| {
        proptest::collection::vec(
            proptest::collection::vec(prop_oneof![1 => Just(0.0), 4 => 1.0f64..1e6], k),
            1..=12,
        )
        .prop_filter("some area", |v| v.iter().flatten().any(|a| *a > 0.0))
    })
}

fn to_vectors(raw: &[Vec<f64>], classes: &[String]) -> Vec<AreaVector> {
    raw.iter().map(|a| AreaVector::new(classes.to_vec(), a.clone())).collect()
}

/// Scaling every tile's areas by `s` leaves the area entropy unchanged.
pub fn check_area_scale(raw: &[Vec<f64>], s: f64) -> Result<(), TestCaseError> {
    let classes: Vec<String> = (0..raw[0].len()).map(|c| format!("c{c}")).collect();
    let v = to_vectors(raw, &classes);
    let scaled: Vec<AreaVector> = v.iter().map(|a| a.scaled(s)).collect();
    close(
        class_area_diversity(&v, LogBase::Natural).unwrap(),
        class_area_diversity(&scaled, LogBase::Natural).unwrap(),
        "class area diversity under scaling",
    )
}

/// Reordering tiles or classes leaves both area entropies unchanged.
pub fn check_area_permutation(raw: &[Vec<f64>], seed: u64) -> Result<(), TestCaseError> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let k = raw[0].len();
    let classes: Vec<String> = (0..k).map(|c| format!("c{c}")).collect();
    let mut perm: Vec<usize> = (0..k).collect();
    perm.shuffle(&mut rng);
    let mut tiles = raw.to_vec();
    tiles.shuffle(&mut rng);
    let permuted: Vec<Vec<f64>> = tiles.iter().map(|a| perm.iter().map(|&c| a[c]).collect()).collect();
    let permuted_classes: Vec<String> = perm.iter().map(|&c| classes[c].clone()).collect();
    let a = to_vectors(raw, &classes);
    let b = to_vectors(&permuted, &permuted_classes);
    close(
        class_area_diversity(&a, LogBase::Natural).unwrap(),
        class_area_diversity(&b, LogBase::Natural).unwrap(),
        "class area diversity under permutation",
    )?;
    if a.iter().all(|t| t.total_area == 0.0) {
        return Ok(());
    }
    close(
        sample_class_diversity(&a, LogBase::Natural).unwrap().mean,
        sample_class_diversity(&b, LogBase::Natural).unwrap().mean,
        "sample class diversity under permutation",
    )
}
