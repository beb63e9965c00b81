//! Just enough GeoJSON to read and write categorised polygon layers.
//!
//! Each feature must carry a Polygon or MultiPolygon geometry and a string
//! property naming its category (`group` for sampling regions, `class` for
//! overlay maps).

use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::geometry::{MultiPolygon, Point, Polygon};

#[derive(Debug, Deserialize, Serialize)]
struct FeatureCollection {
    #[serde(rename = "type")]
    kind: String,
    features: Vec<Feature>,
}

#[derive(Debug, Deserialize, Serialize)]
struct Feature {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default)]
    properties: Option<serde_json::Map<String, Value>>,
    geometry: Option<Geometry>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(tag = "type")]
enum Geometry {
    Polygon { coordinates: Vec<Vec<Vec<f64>>> },
    MultiPolygon { coordinates: Vec<Vec<Vec<Vec<f64>>>> },
}

/// Reads a FeatureCollection and groups its polygons by the string value of
/// `property`, preserving first-appearance order of categories.
pub fn read_categorised(path: &Path, property: &str) -> Result<IndexMap<String, MultiPolygon>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_categorised(&text, property).map_err(|e| match e {
        Error::Validation(m) => Error::Validation(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_categorised(text: &str, property: &str) -> Result<IndexMap<String, MultiPolygon>> {
    let fc: FeatureCollection = serde_json::from_str(text)
        .map_err(|e| Error::Validation(format!("not a GeoJSON FeatureCollection: {e}")))?;
    if fc.kind != "FeatureCollection" {
        return Err(Error::Validation(format!("expected FeatureCollection, got {}", fc.kind)));
    }
    let mut out: IndexMap<String, MultiPolygon> = IndexMap::new();
    for (i, f) in fc.features.into_iter().enumerate() {
        let category = f
            .properties
            .as_ref()
            .and_then(|p| p.get(property))
            .and_then(|v| match v {
                Value::String(s) => Some(s.clone()),
                Value::Number(n) => Some(n.to_string()),
                _ => None,
            })
            .ok_or_else(|| Error::Validation(format!("feature {i} lacks a `{property}` property")))?;
        let polys = match f.geometry {
            Some(Geometry::Polygon { coordinates }) => vec![polygon_from(coordinates, i)?],
            Some(Geometry::MultiPolygon { coordinates }) => coordinates
                .into_iter()
                .map(|c| polygon_from(c, i))
                .collect::<Result<Vec<_>>>()?,
            None => continue,
        };
        out.entry(category).or_default().0.extend(polys);
    }
    Ok(out)
}

fn polygon_from(rings: Vec<Vec<Vec<f64>>>, feature: usize) -> Result<Polygon> {
    let mut rings = rings.into_iter().map(|r| {
        r.into_iter()
            .map(|c| match c.as_slice() {
                [x, y, ..] => Ok(Point::new(*x, *y)),
                _ => Err(Error::Validation(format!("feature {feature}: position needs two coordinates"))),
            })
            .collect::<Result<Vec<_>>>()
    });
    let exterior = rings
        .next()
        .ok_or_else(|| Error::Validation(format!("feature {feature}: polygon without rings")))??;
    let holes = rings.collect::<Result<Vec<_>>>()?;
    Polygon::new(exterior, holes)
        .map_err(|e| Error::Validation(format!("feature {feature}: {e}")))
}

/// Serialises categorised polygons as a FeatureCollection.
pub fn to_string_categorised<'a>(
    layers: impl IntoIterator<Item = (&'a str, &'a MultiPolygon)>,
    property: &str,
) -> String {
    let ring = |r: &[Point]| -> Vec<Vec<f64>> {
        let mut v: Vec<Vec<f64>> = r.iter().map(|p| vec![p.x, p.y]).collect();
        if let Some(first) = r.first() {
            v.push(vec![first.x, first.y]);
        }
        v
    };
    let features = layers
        .into_iter()
        .map(|(name, mp)| {
            let mut props = serde_json::Map::new();
            props.insert(property.to_string(), Value::String(name.to_string()));
            Feature {
                kind: "Feature".into(),
                properties: Some(props),
                geometry: Some(Geometry::MultiPolygon {
                    coordinates: mp
                        .polygons()
                        .iter()
                        .map(|p| p.rings().map(ring).collect())
                        .collect(),
                }),
            }
        })
        .collect();
    serde_json::to_string_pretty(&FeatureCollection {
        kind: "FeatureCollection".into(),
        features,
    })
    .expect("geojson serialisation cannot fail")
}
