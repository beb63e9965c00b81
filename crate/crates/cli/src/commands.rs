use std::path::{Path, PathBuf};

use clap::Args;
use indexmap::IndexMap;

use geodiverse::analysis::{
    correlate_diversity, emit_report, rank_datasets_with, read_score_table, CorrelationOptions,
};
use geodiverse::diversity::{
    class_area_diversity, continent_diversity, read_report, sample_class_diversity, spectral_entropy_paths,
    write_report_csv, write_report_json, ContinentSource, DiversityReport, Measure,
};
use geodiverse::fsutil::{atomic_write, partial_path};
use geodiverse::geometry::MultiPolygon;
use geodiverse::ingest::{
    ingest_manifest, BandStats, CatalogSource, DirCatalog, HttpCatalog, IngestOptions, LocalStore, RetryPolicy,
    TileSource, MANIFEST_FILE,
};
use geodiverse::manifest::{read_manifest, write_manifest, DatasetManifest, GeoSample};
use geodiverse::overlay::{area_vector, footprint, AreaVector, RegionMap};
use geodiverse::raster::read_geotiff;
use geodiverse::sampler::{allocate_counts, sample_points_with, AllocationVector, RegionSet, SamplerOptions};
use geodiverse::{Error, Result};

use crate::config::{Config, TileSourceSpec};

fn print_json(value: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("serialisable"));
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serialisable");
    bytes.push(b'\n');
    atomic_write(path, &bytes)
}

/// Reads categorised GeoJSON, taking the first of `properties` present.
fn read_layers(path: &Path, properties: &[&str]) -> Result<IndexMap<String, MultiPolygon>> {
    let mut last = None;
    for p in properties {
        match geodiverse::geojson::read_categorised(path, p) {
            Ok(layers) => return Ok(layers),
            Err(e @ Error::Io { .. }) => return Err(e),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one property"))
}

fn slug(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '-' }).collect()
}

// ---- sample -------------------------------------------------------------

#[derive(Args, Debug)]
pub struct SampleArgs {
    /// `global`, `one-hot:<group>` or `group=weight,...`
    #[arg(long)]
    pub alpha: String,
    /// Number of points
    #[arg(long)]
    pub n: u64,
    /// Minimum great-circle distance between points, metres
    #[arg(long, value_name = "METRES")]
    pub min_sep: Option<f64>,
    /// Region polygons (GeoJSON, `group` property); defaults to the continents map
    #[arg(long, value_name = "PATH")]
    pub regions: Option<PathBuf>,
    /// Manifest name (derived from --alpha if omitted)
    #[arg(long)]
    pub name: Option<String>,
    /// Reject overlapping regions instead of resolving them by order
    #[arg(long)]
    pub strict: bool,
    /// Output manifest; defaults to `<out_dir>/<name>.jsonl`
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

/// Parses the `--alpha` forms against the available groups.
pub fn parse_alpha(spec: &str, groups: &[String]) -> Result<(AllocationVector, String)> {
    let spec = spec.trim();
    if spec == "global" {
        return Ok((AllocationVector::global(groups.to_vec())?, "global".into()));
    }
    if let Some(g) = spec.strip_prefix("one-hot:") {
        return Ok((AllocationVector::one_hot(groups.to_vec(), g.trim())?, format!("one-hot-{}", g.trim())));
    }
    let mut weights = vec![0.0; groups.len()];
    for part in spec.split(',').filter(|p| !p.trim().is_empty()) {
        let (name, w) = part
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("alpha: expected group=weight, got `{part}`")))?;
        let i = groups
            .iter()
            .position(|g| g == name.trim())
            .ok_or_else(|| Error::Config(format!("alpha: unknown group `{}`", name.trim())))?;
        weights[i] = w
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("alpha: weight `{}` is not a number", w.trim())))?;
    }
    Ok((AllocationVector::new(groups.to_vec(), weights)?, "custom".into()))
}

pub fn sample(cfg: &Config, args: &SampleArgs) -> Result<()> {
    let path = args
        .regions
        .clone()
        .or_else(|| cfg.continents.clone())
        .ok_or_else(|| Error::Config("no regions: pass --regions or set `continents`".into()))?;
    let regions = RegionSet::new(read_layers(&path, &["group", &cfg.map_property])?);
    let groups: Vec<String> = regions.groups().map(String::from).collect();
    let (alpha, default_name) = parse_alpha(&args.alpha, &groups)?;
    let name = args.name.clone().unwrap_or(default_name);
    let opts = SamplerOptions {
        name: name.clone(),
        min_separation_m: args.min_sep,
        strict: args.strict,
        ..SamplerOptions::default()
    };
    let manifest = sample_points_with(&regions, &alpha, args.n, cfg.seed, &opts)?;
    let out = match (&args.out, &cfg.out_dir) {
        (Some(p), _) => p.clone(),
        (None, Some(d)) => {
            std::fs::create_dir_all(d).map_err(|e| Error::Io { path: d.clone(), source: e })?;
            d.join(format!("{}.jsonl", slug(&name)))
        }
        (None, None) => return Err(Error::Config("no output: pass --out or set `out_dir`".into())),
    };
    write_manifest(&manifest, &out)?;
    log::info!("wrote {} samples to {}", manifest.len(), out.display());
    let realized: IndexMap<&str, u64> =
        manifest.groups.iter().map(String::as_str).zip(manifest.realized_counts()).collect();
    debug_assert_eq!(
        realized.values().copied().collect::<Vec<_>>(),
        allocate_counts(&alpha, args.n).values().copied().collect::<Vec<_>>()
    );
    print_json(&realized);
    Ok(())
}

// ---- ingest -------------------------------------------------------------

#[derive(Args, Debug)]
pub struct IngestArgs {
    #[arg(long, value_name = "PATH")]
    pub manifest: PathBuf,
}

fn tile_source(cfg: &Config) -> Result<Box<dyn TileSource>> {
    let spec = cfg
        .tile_source
        .as_ref()
        .ok_or_else(|| Error::Config("no tile source: set `tile_source`".into()))?;
    Ok(match spec {
        TileSourceSpec::Remote(url) => {
            let retry = RetryPolicy {
                max_attempts: cfg.retry_attempts,
                ..RetryPolicy::default()
            };
            Box::new(CatalogSource::new(HttpCatalog::new(url)?.with_retry(retry)))
        }
        TileSourceSpec::Local(dir) if dir.join("catalog.json").is_file() => {
            Box::new(CatalogSource::new(DirCatalog::open(dir)?))
        }
        TileSourceSpec::Local(dir) => Box::new(LocalStore::new(dir)),
    })
}

pub fn ingest(cfg: &Config, args: &IngestArgs) -> Result<()> {
    let out_dir = cfg
        .out_dir
        .clone()
        .ok_or_else(|| Error::Config("no output directory: pass --out-dir or set `out_dir`".into()))?;
    let manifest = read_manifest(&args.manifest)?;
    let stats = cfg.band_stats.as_deref().map(BandStats::read).transpose()?;
    let source = tile_source(cfg)?;
    if !manifest.is_empty() {
        // an unusable destination is a configuration problem, reported before any fetch
        let probe = partial_path(&out_dir.join(".probe"));
        std::fs::create_dir_all(&out_dir)
            .and_then(|()| std::fs::write(&probe, b""))
            .and_then(|()| std::fs::remove_file(&probe))
            .map_err(|e| Error::Config(format!("output directory {} is not writable: {e}", out_dir.display())))?;
    }
    let opts = IngestOptions {
        date_window: cfg.date_window,
        max_cloud_pct: cfg.max_cloud_pct,
        size_px: cfg.tile_size,
        parallelism: cfg.parallelism,
    };
    log::info!("ingesting {} samples from {}", manifest.len(), source.describe());
    let outcome = ingest_manifest(&manifest, source.as_ref(), stats.as_ref(), &out_dir, &opts)?;
    if !manifest.is_empty() {
        write_json(&out_dir.join("ingest_report.json"), &outcome.report)?;
    }
    print_json(&outcome.report);
    Ok(())
}

// ---- audit --------------------------------------------------------------

#[derive(Args, Debug)]
pub struct AuditArgs {
    /// Manifest whose `tile_uri`s point at the tiles
    #[arg(long, value_name = "PATH", conflicts_with = "tile_dir", required_unless_present = "tile_dir")]
    pub manifest: Option<PathBuf>,
    /// Directory of `.tif` tiles (uses its manifest.jsonl when present)
    #[arg(long, value_name = "DIR")]
    pub tile_dir: Option<PathBuf>,
    /// Comma-separated: continent, biome, landcover, spectral, per-band,
    /// sample-biome, sample-landcover. Defaults to every measure whose
    /// inputs are configured.
    #[arg(long, value_delimiter = ',')]
    pub measures: Option<Vec<String>>,
    /// Dataset name in the report
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum AuditMeasure {
    Continent,
    Biome,
    Landcover,
    Spectral,
    PerBand,
    SampleBiome,
    SampleLandcover,
}

impl AuditMeasure {
    const ALL: [AuditMeasure; 7] = [
        AuditMeasure::Continent,
        AuditMeasure::Biome,
        AuditMeasure::Landcover,
        AuditMeasure::Spectral,
        AuditMeasure::PerBand,
        AuditMeasure::SampleBiome,
        AuditMeasure::SampleLandcover,
    ];

    fn name(self) -> &'static str {
        match self {
            AuditMeasure::Continent => "continent",
            AuditMeasure::Biome => "biome",
            AuditMeasure::Landcover => "landcover",
            AuditMeasure::Spectral => "spectral",
            AuditMeasure::PerBand => "per-band",
            AuditMeasure::SampleBiome => "sample-biome",
            AuditMeasure::SampleLandcover => "sample-landcover",
        }
    }
}

struct AuditInput {
    name: String,
    manifest: Option<DatasetManifest>,
    tiles: Vec<PathBuf>,
    /// Samples without a stored tile.
    missing_tiles: usize,
}

fn audit_input(args: &AuditArgs) -> Result<AuditInput> {
    let manifest_path = match (&args.manifest, &args.tile_dir) {
        (Some(m), _) => Some(m.clone()),
        (None, Some(d)) if d.join(MANIFEST_FILE).is_file() => Some(d.join(MANIFEST_FILE)),
        _ => None,
    };
    if let Some(path) = manifest_path {
        let manifest = read_manifest(&path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let tiles: Vec<PathBuf> = manifest
            .samples
            .iter()
            .filter_map(|s| s.tile_uri.as_ref().map(|u| base.join(u)))
            .filter(|p| p.is_file())
            .collect();
        return Ok(AuditInput {
            name: args.name.clone().unwrap_or_else(|| manifest.name.clone()),
            missing_tiles: manifest.len() - tiles.len(),
            manifest: Some(manifest),
            tiles,
        });
    }
    let dir = args.tile_dir.as_ref().expect("clap enforces one input");
    let mut tiles: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::Io { path: dir.clone(), source: e })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("tif") || x.eq_ignore_ascii_case("tiff")))
        .collect();
    tiles.sort();
    let name = args.name.clone().unwrap_or_else(|| {
        dir.canonicalize()
            .ok()
            .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .unwrap_or_else(|| "tiles".into())
    });
    Ok(AuditInput {
        name,
        manifest: None,
        tiles,
        missing_tiles: 0,
    })
}

fn load_class_map(path: &Path, legend: Option<&Path>, property: &str) -> Result<RegionMap> {
    let is_tif = path
        .extension()
        .is_some_and(|x| x.eq_ignore_ascii_case("tif") || x.eq_ignore_ascii_case("tiff"));
    if is_tif {
        let legend = legend.ok_or_else(|| {
            Error::Config(format!("{} is a raster map and needs a legend file", path.display()))
        })?;
        RegionMap::from_raster_files(path, legend)
    } else {
        RegionMap::vector(geodiverse::crs::Crs::Wgs84, read_layers(path, &[property, "group"])?)
    }
}

/// Area vectors of every tile; tiles off the map are counted, not returned.
fn area_vectors(tiles: &[PathBuf], map: &RegionMap) -> Result<(Vec<AreaVector>, usize)> {
    let mut out = Vec::with_capacity(tiles.len());
    let mut off_map = 0;
    for p in tiles {
        let tile = read_geotiff(p)?;
        match area_vector(&footprint(&tile)?, map) {
            Ok(v) => out.push(v),
            Err(Error::NoOverlap(m)) => {
                log::warn!("{}: {m}", p.display());
                off_map += 1;
            }
            Err(e) => return Err(e),
        }
    }
    Ok((out, off_map))
}

/// A manifest with one sample at each tile's centre.
fn manifest_from_tiles(name: &str, tiles: &[PathBuf]) -> Result<DatasetManifest> {
    let mut m = DatasetManifest::new(name, vec![], vec![], 0);
    for p in tiles {
        let t = read_geotiff(p)?;
        let (x, y) = t.geotransform.apply(t.width as f64 / 2.0, t.height as f64 / 2.0);
        let (lon, lat) = t.crs.to_wgs84(x, y);
        let id = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        m.samples.push(GeoSample::new(id, lat, lon, ""));
    }
    Ok(m)
}

pub fn audit(cfg: &Config, args: &AuditArgs) -> Result<()> {
    let input = audit_input(args)?;
    let requested: Vec<AuditMeasure> = match &args.measures {
        Some(list) => list
            .iter()
            .map(|s| {
                AuditMeasure::ALL
                    .into_iter()
                    .find(|m| m.name() == s.trim())
                    .ok_or_else(|| Error::Config(format!("unknown measure `{s}`")))
            })
            .collect::<Result<_>>()?,
        None => AuditMeasure::ALL
            .into_iter()
            .filter(|m| match m {
                AuditMeasure::Continent => input.manifest.is_some() || cfg.continents.is_some(),
                AuditMeasure::Biome | AuditMeasure::SampleBiome => cfg.biomes.is_some(),
                AuditMeasure::Landcover | AuditMeasure::SampleLandcover => cfg.landcover.is_some(),
                AuditMeasure::Spectral | AuditMeasure::PerBand => true,
            })
            .collect(),
    };
    let wants = |m: AuditMeasure| requested.contains(&m);
    let sample_count = input.manifest.as_ref().map_or(input.tiles.len(), DatasetManifest::len);
    let mut report = DiversityReport::new(&input.name, sample_count, cfg.histogram.clone(), cfg.log_base);

    if wants(AuditMeasure::Continent) {
        let continents = match &cfg.continents {
            Some(p) => Some(RegionMap::vector(
                geodiverse::crs::Crs::Wgs84,
                read_layers(p, &[&cfg.map_property, "group"])?,
            )?),
            None => None,
        };
        let synthetic;
        let manifest = match &input.manifest {
            Some(m) => m,
            None => {
                synthetic = manifest_from_tiles(&input.name, &input.tiles)?;
                &synthetic
            }
        };
        let source = match &continents {
            Some(map) => ContinentSource::Map { map, strict: false },
            None if input.manifest.is_some() => ContinentSource::GroupLabel,
            None => return Err(Error::Config("continent measure on a tile directory needs `continents`".into())),
        };
        let c = continent_diversity(manifest, source, cfg.log_base)?;
        report.h_continent = Some(c.entropy);
        if c.unresolved > 0 {
            report.excluded.insert("continent".into(), c.unresolved);
        }
    }

    if wants(AuditMeasure::Spectral) || wants(AuditMeasure::PerBand) {
        let s = spectral_entropy_paths(&input.tiles, &cfg.histogram, cfg.log_base)?;
        if wants(AuditMeasure::Spectral) {
            report.h_spectral = Some(s.h_spectral);
        }
        if wants(AuditMeasure::PerBand) {
            report.per_band_entropy = Some(s.per_band_mean);
        }
        let excluded = s.tiles_excluded + input.missing_tiles;
        if excluded > 0 {
            report.excluded.insert("spectral".into(), excluded);
        }
    }

    let class_measures = [
        (
            "biome",
            AuditMeasure::Biome,
            AuditMeasure::SampleBiome,
            &cfg.biomes,
            &cfg.biomes_legend,
        ),
        (
            "landcover",
            AuditMeasure::Landcover,
            AuditMeasure::SampleLandcover,
            &cfg.landcover,
            &cfg.landcover_legend,
        ),
    ];
    for (label, dataset_m, sample_m, path, legend) in class_measures {
        if !wants(dataset_m) && !wants(sample_m) {
            continue;
        }
        let path = path
            .as_ref()
            .ok_or_else(|| Error::Config(format!("{label} measures need the `{label}` map")))?;
        let map = load_class_map(path, legend.as_deref(), &cfg.map_property)?;
        let (vectors, off_map) = area_vectors(&input.tiles, &map)?;
        if wants(dataset_m) {
            let h = class_area_diversity(&vectors, cfg.log_base)?;
            if dataset_m == AuditMeasure::Biome {
                report.h_biome = Some(h);
            } else {
                report.h_landcover = Some(h);
            }
        }
        if wants(sample_m) {
            let s = sample_class_diversity(&vectors, cfg.log_base)?;
            if sample_m == AuditMeasure::SampleBiome {
                report.sample_biome_entropy = Some(s.mean);
            } else {
                report.sample_landcover_entropy = Some(s.mean);
            }
        }
        let excluded = off_map + input.missing_tiles;
        if excluded > 0 {
            report.excluded.insert(label.into(), excluded);
        }
    }

    if let Some(dir) = &cfg.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
        let stem = slug(&input.name);
        write_report_json(&report, &dir.join(format!("{stem}.diversity.json")))?;
        write_report_csv(std::slice::from_ref(&report), &dir.join(format!("{stem}.diversity.csv")))?;
    }
    print_json(&report);
    Ok(())
}

// ---- analyze ------------------------------------------------------------

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Score table CSV: dataset,task,mean,ci,higher_is_better
    #[arg(long, value_name = "PATH")]
    pub scores: PathBuf,
    /// Diversity report JSON files
    #[arg(long, num_args = 1.., value_name = "PATH")]
    pub reports: Vec<PathBuf>,
    /// Measures to correlate; defaults to those present in every report
    #[arg(long, value_delimiter = ',')]
    pub measures: Option<Vec<String>>,
}

pub fn analyze(cfg: &Config, args: &AnalyzeArgs) -> Result<()> {
    let out_dir = cfg
        .out_dir
        .clone()
        .ok_or_else(|| Error::Config("no output directory: pass --out-dir or set `out_dir`".into()))?;
    let table = read_score_table(&args.scores)?;
    let ranks = rank_datasets_with(&table, cfg.tie_method)?;
    let reports: Vec<DiversityReport> = args.reports.iter().map(|p| read_report(p)).collect::<Result<_>>()?;
    let correlations = if reports.is_empty() {
        IndexMap::new()
    } else {
        let measures: Vec<Measure> = match &args.measures {
            Some(list) => list.iter().map(|s| s.parse()).collect::<Result<_>>()?,
            None => Measure::ALL
                .into_iter()
                .filter(|&m| reports.iter().all(|r| r.value(m).is_some()))
                .collect(),
        };
        let opts = CorrelationOptions {
            scaling: cfg.scaling,
            p_value: cfg.p_value,
        };
        correlate_diversity(&reports, &table, &measures, opts)?
    };
    emit_report(&ranks, &correlations, &out_dir)?;
    let summary = serde_json::json!({
        "order": ranks.order(),
        "correlations": correlations.iter().map(|(m, c)| (m.name(), serde_json::json!({"rho": c.rho, "p_value": c.p_value}))).collect::<IndexMap<_, _>>(),
    });
    print_json(&summary);
    Ok(())
}
