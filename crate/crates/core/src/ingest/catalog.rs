use std::path::PathBuf;
use std::time::Duration;

use chrono::NaiveDate;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::source::{crop_centered, FetchedTile, TileRequest, TileSource};
use crate::error::FetchError;
use crate::geometry::BBox;
use crate::raster::decode_geotiff;

type FetchResult<T> = std::result::Result<T, FetchError>;

/// One entry of a catalog search response.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub id: String,
    pub cloud_pct: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub datetime: Option<NaiveDate>,
    #[serde(default)]
    pub assets: IndexMap<String, String>,
}

/// The two operations a scene catalog offers.
pub trait SceneCatalog: Send + Sync {
    /// Scenes intersecting `bbox` (lon/lat) acquired inside `window` with
    /// cloud cover ≤ `max_cloud_pct`.
    fn search(&self, bbox: &BBox, window: (NaiveDate, NaiveDate), max_cloud_pct: f64) -> FetchResult<Vec<Scene>>;

    /// GeoTIFF bytes of a scene.
    fn asset(&self, scene: &Scene) -> FetchResult<Vec<u8>>;

    fn describe(&self) -> String;
}

/// Lowest cloud cover first, then earliest acquisition, then id. Scenes
/// without a date sort after dated ones at the same cloud cover.
pub fn order_candidates(scenes: &mut [Scene]) {
    scenes.sort_by(|a, b| {
        a.cloud_pct
            .total_cmp(&b.cloud_pct)
            .then_with(|| match (a.datetime, b.datetime) {
                (Some(x), Some(y)) => x.cmp(&y),
                (Some(_), None) => std::cmp::Ordering::Less,
                (None, Some(_)) => std::cmp::Ordering::Greater,
                (None, None) => std::cmp::Ordering::Equal,
            })
            .then_with(|| a.id.cmp(&b.id))
    });
}

/// Adapts a [`SceneCatalog`] into a [`TileSource`] that cuts the requested
/// window out of the best acceptable scene.
pub struct CatalogSource<C> {
    catalog: C,
    /// Half-width of the search box in degrees.
    pub search_radius_deg: f64,
}

impl<C: SceneCatalog> CatalogSource<C> {
    pub fn new(catalog: C) -> Self {
        CatalogSource {
            catalog,
            search_radius_deg: 0.01,
        }
    }

    pub fn catalog(&self) -> &C {
        &self.catalog
    }
}

impl<C: SceneCatalog> TileSource for CatalogSource<C> {
    fn fetch(&self, request: &TileRequest) -> FetchResult<FetchedTile> {
        let r = self.search_radius_deg;
        let bbox = BBox {
            min_x: request.lon - r,
            min_y: request.lat - r,
            max_x: request.lon + r,
            max_y: request.lat + r,
        };
        let mut scenes: Vec<Scene> = self
            .catalog
            .search(&bbox, request.date_window, request.max_cloud_pct)?
            .into_iter()
            // the catalog's filter is advisory
            .filter(|s| s.cloud_pct <= request.max_cloud_pct)
            .collect();
        if scenes.is_empty() {
            let all = self.catalog.search(&bbox, request.date_window, 100.0)?;
            return Err(match all.iter().map(|s| s.cloud_pct).min_by(f64::total_cmp) {
                Some(best) => FetchError::CloudFilter {
                    candidates: all.len(),
                    best_cloud_pct: best,
                    max_cloud_pct: request.max_cloud_pct,
                },
                None => FetchError::Unavailable(format!(
                    "no scene within {} to {} at ({}, {})",
                    request.date_window.0, request.date_window.1, request.lat, request.lon
                )),
            });
        }
        order_candidates(&mut scenes);
        let mut last = None;
        for scene in scenes {
            let bytes = self.catalog.asset(&scene)?;
            let tile = decode_geotiff(&bytes).map_err(|e| FetchError::Source(format!("asset {}: {e}", scene.id)))?;
            let exact = tile.height == request.size_px.0 && tile.width == request.size_px.1;
            match crop_centered(&tile, request) {
                Ok(tile) => {
                    return Ok(FetchedTile {
                        tile,
                        acquisition_date: scene.datetime,
                        cloud_cover_pct: Some(scene.cloud_pct),
                        original_bytes: exact.then_some(bytes),
                    })
                }
                Err(e @ FetchError::Unavailable(_)) => last = Some(e),
                Err(e) => return Err(e),
            }
        }
        Err(last.expect("at least one candidate"))
    }

    fn describe(&self) -> String {
        self.catalog.describe()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_millis(200),
            max_delay: Duration::from_secs(5),
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (1-based): base·2^(attempt−1), capped.
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt.saturating_sub(1)).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

/// Client for a remote catalog exposing
/// `GET /search?bbox=&datetime=&max_cloud=` and `GET /asset/{id}`.
pub struct HttpCatalog {
    base: String,
    client: reqwest::blocking::Client,
    pub retry: RetryPolicy,
}

enum Attempt<T> {
    Done(T),
    /// Transient failure; `unreachable` when no response was received.
    Retry { message: String, unreachable: bool },
}

impl HttpCatalog {
    pub fn new(base_url: &str) -> FetchResult<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| FetchError::Source(format!("http client: {e}")))?;
        Ok(HttpCatalog {
            base: base_url.trim_end_matches('/').to_string(),
            client,
            retry: RetryPolicy::default(),
        })
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    fn get(&self, url: &str, query: &[(&str, String)]) -> FetchResult<Vec<u8>> {
        let mut attempt = 0;
        loop {
            attempt += 1;
            let outcome = match self.client.get(url).query(query).send() {
                Err(e) => Attempt::Retry {
                    message: format!("GET {url}: {e}"),
                    unreachable: e.is_connect() || e.is_timeout(),
                },
                Ok(resp) => {
                    let status = resp.status();
                    if status == reqwest::StatusCode::NOT_FOUND {
                        return Err(FetchError::Unavailable(format!("GET {url}: 404")));
                    } else if status.is_server_error() || status == reqwest::StatusCode::TOO_MANY_REQUESTS {
                        Attempt::Retry {
                            message: format!("GET {url}: {status}"),
                            unreachable: false,
                        }
                    } else if !status.is_success() {
                        return Err(FetchError::Source(format!("GET {url}: {status}")));
                    } else {
                        match resp.bytes() {
                            Ok(b) => Attempt::Done(b.to_vec()),
                            Err(e) => Attempt::Retry {
                                message: format!("GET {url}: reading body: {e}"),
                                unreachable: false,
                            },
                        }
                    }
                }
            };
            match outcome {
                Attempt::Done(b) => return Ok(b),
                Attempt::Retry { message, unreachable } if attempt >= self.retry.max_attempts => {
                    let message = format!("{message} (after {attempt} attempts)");
                    // a catalog that cannot be reached offers no scene
                    return Err(if unreachable {
                        FetchError::Unavailable(message)
                    } else {
                        FetchError::Source(message)
                    });
                }
                Attempt::Retry { message, .. } => {
                    log::debug!("{message}; retrying");
                    std::thread::sleep(self.retry.delay(attempt));
                }
            }
        }
    }
}

impl SceneCatalog for HttpCatalog {
    fn search(&self, bbox: &BBox, window: (NaiveDate, NaiveDate), max_cloud_pct: f64) -> FetchResult<Vec<Scene>> {
        let url = format!("{}/search", self.base);
        let query = [
            ("bbox", format!("{},{},{},{}", bbox.min_x, bbox.min_y, bbox.max_x, bbox.max_y)),
            ("datetime", format!("{}/{}", window.0, window.1)),
            ("max_cloud", max_cloud_pct.to_string()),
        ];
        let body = self.get(&url, &query)?;
        serde_json::from_slice(&body).map_err(|e| FetchError::Source(format!("search response: {e}")))
    }

    fn asset(&self, scene: &Scene) -> FetchResult<Vec<u8>> {
        self.get(&format!("{}/asset/{}", self.base, scene.id), &[])
    }

    fn describe(&self) -> String {
        format!("http catalog {}", self.base)
    }
}

/// An offline catalog: `catalog.json` (a scene list with a lon/lat `bbox`
/// per scene) next to `<scene id>.tif`.
pub struct DirCatalog {
    root: PathBuf,
    scenes: Vec<(Scene, BBox)>,
}

#[derive(Deserialize)]
struct DirScene {
    #[serde(flatten)]
    scene: Scene,
    bbox: [f64; 4],
}

impl DirCatalog {
    pub fn open(root: impl Into<PathBuf>) -> FetchResult<Self> {
        let root = root.into();
        let path = root.join("catalog.json");
        let text = std::fs::read_to_string(&path).map_err(|e| FetchError::Source(format!("{}: {e}", path.display())))?;
        let raw: Vec<DirScene> =
            serde_json::from_str(&text).map_err(|e| FetchError::Source(format!("{}: {e}", path.display())))?;
        let scenes = raw
            .into_iter()
            .map(|d| {
                let [min_x, min_y, max_x, max_y] = d.bbox;
                (d.scene, BBox { min_x, min_y, max_x, max_y })
            })
            .collect();
        Ok(DirCatalog { root, scenes })
    }
}

impl SceneCatalog for DirCatalog {
    fn search(&self, bbox: &BBox, window: (NaiveDate, NaiveDate), max_cloud_pct: f64) -> FetchResult<Vec<Scene>> {
        Ok(self
            .scenes
            .iter()
            .filter(|(s, b)| {
                b.intersects(bbox)
                    && s.cloud_pct <= max_cloud_pct
                    && s.datetime.is_none_or(|d| d >= window.0 && d <= window.1)
            })
            .map(|(s, _)| s.clone())
            .collect())
    }

    fn asset(&self, scene: &Scene) -> FetchResult<Vec<u8>> {
        let path = self.root.join(format!("{}.tif", scene.id));
        std::fs::read(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => FetchError::Unavailable(format!("{} not found", path.display())),
            _ => FetchError::Source(format!("{}: {e}", path.display())),
        })
    }

    fn describe(&self) -> String {
        format!("directory catalog {}", self.root.display())
    }
}
