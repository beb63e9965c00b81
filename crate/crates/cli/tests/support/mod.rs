//! Fixture builders and a runner for the `geodiverse` binary.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use geodiverse::crs::Crs;
use geodiverse::ingest::TileMetadata;
use geodiverse::manifest::read_manifest;
use geodiverse::raster::{write_geotiff, GeoTransform, PixelData, RasterTile};
use rand::{Rng, SeedableRng};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn continents() -> PathBuf {
    fixtures().join("continents_toy.geojson")
}

pub fn geodiverse(args: &[&str], env: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_geodiverse"));
    cmd.args(args).env_remove("GEODIVERSE_CONFIG").env_remove("RUST_LOG");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

pub fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

/// Six-band uint16 tile of `size × size` pixels at `pixel_deg` spacing,
/// centred on (`lat`, `lon`).
pub fn tile_at(lat: f64, lon: f64, size: usize, pixel_deg: f64, seed: u64) -> RasterTile {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let bands = 6;
    // a per-band spread makes the bands differ in entropy
    let pixels: Vec<u16> = (0..bands)
        .flat_map(|b| (0..size * size).map(move |_| b))
        .map(|b| rng.gen_range(0..(50 + 400 * b as u16)))
        .collect();
    let half = size as f64 * pixel_deg / 2.0;
    RasterTile::new(
        ["B2", "B3", "B4", "B8", "B11", "B12"].map(String::from).to_vec(),
        size,
        size,
        PixelData::U16(pixels),
        GeoTransform::north_up(lon - half, lat + half, pixel_deg, pixel_deg),
        Crs::Wgs84,
        None,
    )
    .expect("valid tile")
}

/// A local store holding a tile and metadata sidecar for every sample of
/// the manifest at `manifest_path`; every `skip_every`-th sample is left out.
pub fn build_store(manifest_path: &Path, store: &Path, size: usize, skip_every: Option<usize>) {
    std::fs::create_dir_all(store).unwrap();
    let m = read_manifest(manifest_path).unwrap();
    for (i, s) in m.samples.iter().enumerate() {
        if skip_every.is_some_and(|k| i % k == 0) {
            continue;
        }
        let seed = s.lat.to_bits() ^ s.lon.to_bits().rotate_left(17);
        write_geotiff(&store.join(format!("{}.tif", s.id)), &tile_at(s.lat, s.lon, size, 0.25, seed)).unwrap();
        let meta = TileMetadata {
            acquisition_date: chrono::NaiveDate::from_ymd_opt(2024, 6, 1),
            cloud_cover_pct: Some(5.0),
        };
        std::fs::write(store.join(format!("{}.json", s.id)), serde_json::to_vec(&meta).unwrap()).unwrap();
    }
}

/// Whole-world 1° landcover grid with a checkerboard of four classes, and
/// its legend.
pub fn write_landcover(dir: &Path) -> (PathBuf, PathBuf) {
    let (w, h) = (360, 180);
    let codes: Vec<u16> = (0..h)
        .flat_map(|r| (0..w).map(move |c| 10 * (1 + ((r / 3 + c / 3) % 4) as u16)))
        .collect();
    let grid = RasterTile::new(
        vec!["class".into()],
        h,
        w,
        PixelData::U16(codes),
        GeoTransform::north_up(-180.0, 90.0, 1.0, 1.0),
        Crs::Wgs84,
        None,
    )
    .unwrap();
    let tif = dir.join("landcover.tif");
    write_geotiff(&tif, &grid).unwrap();
    let legend = dir.join("landcover_legend.json");
    std::fs::write(&legend, r#"{"10": "tree", "20": "grass", "30": "crop", "40": "water"}"#).unwrap();
    (tif, legend)
}

/// Config file for an end-to-end run rooted at `dir`.
pub fn write_config(dir: &Path, store: &Path, landcover: &(PathBuf, PathBuf)) -> PathBuf {
    let text = format!(
        "continents = {}\nbiomes = {}\nmap_property = class\nlandcover = {}\nlandcover_legend = {}\n\
         tile_source = {}\nout_dir = {}\nseed = 7\ntile_size = 16\nparallelism = 4\n",
        continents().display(),
        continents().display(),
        landcover.0.display(),
        landcover.1.display(),
        store.display(),
        dir.join("out").display(),
    );
    let path = dir.join("geodiverse.ini");
    std::fs::write(&path, text).unwrap();
    path
}

/// Toy scores for the three end-to-end datasets.
pub fn write_toy_scores(dir: &Path) -> PathBuf {
    let path = dir.join("scores.csv");
    std::fs::write(
        &path,
        "dataset,task,mean,ci,higher_is_better\n\
         global,probe,0.40,0.01,true\n\
         global,error,1.2,,false\n\
         europe,probe,0.45,0.02,true\n\
         europe,error,1.0,,false\n\
         africa,probe,0.30,0.01,true\n\
         africa,error,1.5,,false\n",
    )
    .unwrap();
    path
}

/// Every file under `dir`, relative path → bytes.
pub fn snapshot(dir: &Path) -> std::collections::BTreeMap<PathBuf, Vec<u8>> {
    let mut out = std::collections::BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

pub struct E2eRun {
    pub root: tempfile::TempDir,
    /// Stdout of every stage, in order.
    pub stdout: Vec<serde_json::Value>,
}

/// sample (three allocations, n = 50 each) → build store → ingest → audit →
/// analyze, all through the binary.
pub fn end_to_end() -> E2eRun {
    let root = tempfile::tempdir().unwrap();
    let dir = root.path();
    let store = dir.join("store");
    std::fs::create_dir_all(&store).unwrap();
    let lc = write_landcover(dir);
    let cfg = write_config(dir, &store, &lc);
    let env = [("GEODIVERSE_CONFIG", cfg.as_path())];
    let mut stdout = Vec::new();
    let mut reports = Vec::new();
    for (name, alpha) in [("global", "global"), ("europe", "one-hot:Europe"), ("africa", "one-hot:Africa")] {
        let manifest = dir.join(format!("{name}.jsonl"));
        let m = manifest.to_str().unwrap();
        stdout.push(stdout_json(&geodiverse(
            &["sample", "--alpha", alpha, "--n", "50", "--name", name, "--out", m],
            &env,
        )));
        build_store(&manifest, &store, 20, None);
        let tiles = dir.join("tiles").join(name);
        stdout.push(stdout_json(&geodiverse(
            &["ingest", "--manifest", m, "--out-dir", tiles.to_str().unwrap()],
            &env,
        )));
        stdout.push(stdout_json(&geodiverse(
            &["audit", "--tile-dir", tiles.to_str().unwrap(), "--name", name],
            &env,
        )));
        reports.push(dir.join("out").join(format!("{name}.diversity.json")));
    }
    let scores = write_toy_scores(dir);
    let mut args = vec!["analyze", "--scores", scores.to_str().unwrap(), "--reports"];
    args.extend(reports.iter().map(|p| p.to_str().unwrap()));
    stdout.push(stdout_json(&geodiverse(&args, &env)));
    E2eRun { root, stdout }
}
