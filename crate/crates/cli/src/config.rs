//! Flat `key = value` configuration with flag overrides.
//!
//! Relative paths in the file resolve against the file's directory; paths
//! given as flags resolve against the working directory.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::Args;
use indexmap::IndexMap;

use geodiverse::analysis::{PValueMethod, Scaling, TieMethod};
use geodiverse::diversity::{HistogramSpec, LogBase, RangeMode};
use geodiverse::{Error, Result};

pub const CONFIG_ENV: &str = "GEODIVERSE_CONFIG";

/// Every configuration key, also accepted as `--<key>` with `_` spelled `-`.
#[derive(Args, Debug, Default, Clone)]
pub struct Overrides {
    /// Configuration file (falls back to $GEODIVERSE_CONFIG)
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Continent map (GeoJSON)
    #[arg(long, global = true, value_name = "PATH")]
    pub continents: Option<String>,
    /// Biome map (GeoJSON, or GeoTIFF with --biomes-legend)
    #[arg(long, global = true, value_name = "PATH")]
    pub biomes: Option<String>,
    #[arg(long, global = true, value_name = "PATH")]
    pub biomes_legend: Option<String>,
    /// Landcover map (GeoJSON, or GeoTIFF with --landcover-legend)
    #[arg(long, global = true, value_name = "PATH")]
    pub landcover: Option<String>,
    #[arg(long, global = true, value_name = "PATH")]
    pub landcover_legend: Option<String>,
    /// GeoJSON feature property holding the class name
    #[arg(long, global = true, value_name = "NAME")]
    pub map_property: Option<String>,
    /// Tile directory or http(s) catalog URL
    #[arg(long, global = true, value_name = "DIR|URL")]
    pub tile_source: Option<String>,
    /// Per-band mean/std JSON used to normalise ingested tiles
    #[arg(long, global = true, value_name = "PATH")]
    pub band_stats: Option<String>,
    #[arg(long, global = true)]
    pub bins: Option<String>,
    /// `per-sample`, or a JSON file mapping band → [lo, hi]
    #[arg(long, global = true, value_name = "MODE|PATH")]
    pub histogram_range: Option<String>,
    /// e, 2 or 10
    #[arg(long, global = true)]
    pub log_base: Option<String>,
    #[arg(long, global = true, value_name = "DIR")]
    pub out_dir: Option<String>,
    #[arg(long, global = true)]
    pub parallelism: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<String>,
    #[arg(long, global = true)]
    pub max_cloud_pct: Option<String>,
    #[arg(long, global = true, value_name = "YYYY-MM-DD")]
    pub date_start: Option<String>,
    #[arg(long, global = true, value_name = "YYYY-MM-DD")]
    pub date_end: Option<String>,
    /// Tile edge in pixels, or HxW
    #[arg(long, global = true)]
    pub tile_size: Option<String>,
    #[arg(long, global = true)]
    pub retry_attempts: Option<String>,
    /// `t`, or `permutation[:N]`
    #[arg(long, global = true)]
    pub p_value: Option<String>,
    /// `minmax` or `raw`
    #[arg(long, global = true)]
    pub scaling: Option<String>,
    /// `midrank`, `min` or `dense`
    #[arg(long, global = true)]
    pub tie_method: Option<String>,
}

const PATH_KEYS: [&str; 8] = [
    "continents",
    "biomes",
    "biomes_legend",
    "landcover",
    "landcover_legend",
    "tile_source",
    "band_stats",
    "out_dir",
];

impl Overrides {
    fn pairs(&self) -> Vec<(&'static str, Option<&String>)> {
        vec![
            ("continents", self.continents.as_ref()),
            ("biomes", self.biomes.as_ref()),
            ("biomes_legend", self.biomes_legend.as_ref()),
            ("landcover", self.landcover.as_ref()),
            ("landcover_legend", self.landcover_legend.as_ref()),
            ("map_property", self.map_property.as_ref()),
            ("tile_source", self.tile_source.as_ref()),
            ("band_stats", self.band_stats.as_ref()),
            ("bins", self.bins.as_ref()),
            ("histogram_range", self.histogram_range.as_ref()),
            ("log_base", self.log_base.as_ref()),
            ("out_dir", self.out_dir.as_ref()),
            ("parallelism", self.parallelism.as_ref()),
            ("seed", self.seed.as_ref()),
            ("max_cloud_pct", self.max_cloud_pct.as_ref()),
            ("date_start", self.date_start.as_ref()),
            ("date_end", self.date_end.as_ref()),
            ("tile_size", self.tile_size.as_ref()),
            ("retry_attempts", self.retry_attempts.as_ref()),
            ("p_value", self.p_value.as_ref()),
            ("scaling", self.scaling.as_ref()),
            ("tie_method", self.tie_method.as_ref()),
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TileSourceSpec {
    Local(PathBuf),
    Remote(String),
}

#[derive(Clone, Debug)]
pub struct Config {
    pub continents: Option<PathBuf>,
    pub biomes: Option<PathBuf>,
    pub biomes_legend: Option<PathBuf>,
    pub landcover: Option<PathBuf>,
    pub landcover_legend: Option<PathBuf>,
    pub map_property: String,
    pub tile_source: Option<TileSourceSpec>,
    pub band_stats: Option<PathBuf>,
    pub histogram: HistogramSpec,
    pub log_base: LogBase,
    pub out_dir: Option<PathBuf>,
    pub parallelism: usize,
    pub seed: u64,
    pub max_cloud_pct: f64,
    pub date_window: (NaiveDate, NaiveDate),
    pub tile_size: (usize, usize),
    pub retry_attempts: u32,
    pub p_value: PValueMethod,
    pub scaling: Scaling,
    pub tie_method: TieMethod,
}

impl Config {
    /// Reads the file named by `--config` or `$GEODIVERSE_CONFIG` (if any),
    /// then applies flag overrides.
    pub fn load(overrides: &Overrides) -> Result<Config> {
        let file = overrides
            .config
            .clone()
            .or_else(|| std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from));
        let mut values: IndexMap<&'static str, String> = IndexMap::new();
        if let Some(path) = &file {
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            for (k, v) in read_file(path)? {
                let key = overrides
                    .pairs()
                    .iter()
                    .map(|p| p.0)
                    .find(|known| *known == k)
                    .ok_or_else(|| Error::Config(format!("{}: unknown key `{k}`", path.display())))?;
                let is_path = PATH_KEYS.contains(&key)
                    || (key == "histogram_range" && !matches!(v.trim(), "per-sample" | "per_sample"));
                let v = if is_path && !is_url(&v) {
                    base.join(&v).to_string_lossy().into_owned()
                } else {
                    v
                };
                values.insert(key, v);
            }
        }
        for (k, v) in overrides.pairs() {
            if let Some(v) = v {
                values.insert(k, v.clone());
            }
        }
        Config::from_values(&values)
    }

    fn from_values(values: &IndexMap<&'static str, String>) -> Result<Config> {
        let get = |k: &str| values.get(k).map(|s| s.trim()).filter(|s| !s.is_empty());
        let existing = |k: &str| -> Result<Option<PathBuf>> {
            match get(k) {
                None => Ok(None),
                Some(p) => {
                    let p = PathBuf::from(p);
                    if p.exists() {
                        Ok(Some(p))
                    } else {
                        Err(Error::Config(format!("{k}: {} does not exist", p.display())))
                    }
                }
            }
        };
        let tile_source = match get("tile_source") {
            None => None,
            Some(s) if is_url(s) => Some(TileSourceSpec::Remote(s.to_string())),
            Some(_) => existing("tile_source")?.map(TileSourceSpec::Local),
        };
        let bins = parse_or(get("bins"), "bins", 100usize)?;
        let range = match get("histogram_range") {
            None | Some("per-sample") | Some("per_sample") => RangeMode::PerSample,
            Some(_) => {
                let path = existing("histogram_range")?.expect("present");
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::Config(format!("histogram_range: {}: {e}", path.display())))?;
                let ranges: IndexMap<String, (f64, f64)> = serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("histogram_range: {}: {e}", path.display())))?;
                RangeMode::Fixed { ranges }
            }
        };
        let histogram = HistogramSpec { bins, range };
        histogram.validate()?;
        let parallelism = parse_or(get("parallelism"), "parallelism", 1usize)?;
        if parallelism == 0 {
            return Err(Error::Config("parallelism must be at least 1".into()));
        }
        let date_start = parse_or(get("date_start"), "date_start", NaiveDate::from_ymd_opt(2024, 1, 1).expect("date"))?;
        let date_end = parse_or(get("date_end"), "date_end", NaiveDate::from_ymd_opt(2024, 12, 31).expect("date"))?;
        if date_start > date_end {
            return Err(Error::Config(format!("date window {date_start} to {date_end} is empty")));
        }
        let max_cloud_pct = parse_or(get("max_cloud_pct"), "max_cloud_pct", 20.0f64)?;
        if !(0.0..=100.0).contains(&max_cloud_pct) {
            return Err(Error::Config(format!("max_cloud_pct {max_cloud_pct} outside [0, 100]")));
        }
        Ok(Config {
            continents: existing("continents")?,
            biomes: existing("biomes")?,
            biomes_legend: existing("biomes_legend")?,
            landcover: existing("landcover")?,
            landcover_legend: existing("landcover_legend")?,
            map_property: get("map_property").unwrap_or("class").to_string(),
            tile_source,
            band_stats: existing("band_stats")?,
            histogram,
            log_base: parse_or(get("log_base"), "log_base", LogBase::Natural)?,
            out_dir: get("out_dir").map(PathBuf::from),
            parallelism,
            seed: parse_or(get("seed"), "seed", 0u64)?,
            max_cloud_pct,
            date_window: (date_start, date_end),
            tile_size: parse_tile_size(get("tile_size"))?,
            retry_attempts: parse_or(get("retry_attempts"), "retry_attempts", 3u32)?.max(1),
            p_value: parse_p_value(get("p_value"), parse_or(get("seed"), "seed", 0u64)?)?,
            scaling: match get("scaling") {
                None | Some("minmax") | Some("min-max") => Scaling::MinMax,
                Some("raw") => Scaling::Raw,
                Some(s) => return Err(Error::Config(format!("scaling: expected minmax or raw, got `{s}`"))),
            },
            tie_method: match get("tie_method") {
                None | Some("midrank") => TieMethod::Midrank,
                Some("min") => TieMethod::Min,
                Some("dense") => TieMethod::Dense,
                Some(s) => return Err(Error::Config(format!("tie_method: expected midrank, min or dense, got `{s}`"))),
            },
        })
    }
}

fn is_url(s: &str) -> bool {
    s.starts_with("http://") || s.starts_with("https://")
}

fn parse_or<T: std::str::FromStr>(v: Option<&str>, key: &str, default: T) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    match v {
        None => Ok(default),
        Some(s) => s.parse().map_err(|e| Error::Config(format!("{key}: cannot parse `{s}`: {e}"))),
    }
}

fn parse_tile_size(v: Option<&str>) -> Result<(usize, usize)> {
    let Some(s) = v else { return Ok((96, 96)) };
    let bad = || Error::Config(format!("tile_size: expected N or HxW, got `{s}`"));
    let (h, w) = match s.split_once(['x', 'X']) {
        Some((h, w)) => (h.trim().parse().map_err(|_| bad())?, w.trim().parse().map_err(|_| bad())?),
        None => {
            let n: usize = s.parse().map_err(|_| bad())?;
            (n, n)
        }
    };
    if h == 0 || w == 0 {
        return Err(bad());
    }
    Ok((h, w))
}

fn parse_p_value(v: Option<&str>, seed: u64) -> Result<PValueMethod> {
    match v {
        None | Some("t") => Ok(PValueMethod::TApprox),
        Some(s) => {
            let rest = s
                .strip_prefix("permutation")
                .ok_or_else(|| Error::Config(format!("p_value: expected t or permutation[:N], got `{s}`")))?;
            let permutations = match rest.strip_prefix(':') {
                Some(n) => n.parse().map_err(|_| Error::Config(format!("p_value: bad permutation count `{n}`")))?,
                None if rest.is_empty() => 1_000_000,
                None => return Err(Error::Config(format!("p_value: expected t or permutation[:N], got `{s}`"))),
            };
            Ok(PValueMethod::Permutation { permutations, seed })
        }
    }
}

/// Key/value pairs of a flat INI file. Sections are rejected.
fn read_file(path: &Path) -> Result<Vec<(String, String)>> {
    let ini = ini::Ini::load_from_file(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (section, props) in ini.iter() {
        if let Some(s) = section {
            return Err(Error::Config(format!(
                "{}: sections are not supported (found [{s}])",
                path.display()
            )));
        }
        for (k, v) in props.iter() {
            out.push((k.trim().replace('-', "_"), v.to_string()));
        }
    }
    Ok(out)
}
