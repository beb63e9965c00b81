use indexmap::IndexMap;
use serde::Serialize;

use super::entropy::{compensated_sum, entropy_of_weights, LogBase};
use crate::error::{Error, Result};
use crate::manifest::DatasetManifest;
use crate::overlay::{point_group, AreaVector, RegionMap};

/// Where a sample's continent comes from.
#[derive(Clone, Copy, Debug)]
pub enum ContinentSource<'a> {
    /// The sample's stored `group_label`.
    GroupLabel,
    /// Point lookup in a vector map. With `strict`, an unresolvable sample is
    /// an error; otherwise it is skipped and counted.
    Map { map: &'a RegionMap, strict: bool },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContinentDiversity {
    pub entropy: f64,
    pub counts: IndexMap<String, u64>,
    pub unresolved: usize,
}

pub fn continent_diversity(
    manifest: &DatasetManifest,
    source: ContinentSource<'_>,
    base: LogBase,
) -> Result<ContinentDiversity> {
    let mut unresolved = 0;
    let counts: IndexMap<String, u64> = match source {
        ContinentSource::GroupLabel => {
            let mut c: IndexMap<String, u64> = manifest.groups.iter().map(|g| (g.clone(), 0)).collect();
            for s in &manifest.samples {
                *c.entry(s.group_label.clone()).or_default() += 1;
            }
            c
        }
        ContinentSource::Map { map, strict } => {
            let mut c: IndexMap<String, u64> = map.classes.iter().map(|g| (g.clone(), 0)).collect();
            for s in &manifest.samples {
                match point_group(s.lat, s.lon, map) {
                    Ok(g) => *c.entry(g).or_default() += 1,
                    Err(Error::NoOverlap(_)) if !strict => unresolved += 1,
                    Err(Error::NoOverlap(m)) => {
                        return Err(Error::NoOverlap(format!("sample `{}`: {m}", s.id)));
                    }
                    Err(e) => return Err(e),
                }
            }
            c
        }
    };
    if counts.values().all(|&c| c == 0) {
        return Err(Error::Degenerate(format!("manifest `{}` has no resolvable samples", manifest.name)));
    }
    let weights: Vec<f64> = counts.values().map(|&c| c as f64).collect();
    Ok(ContinentDiversity {
        entropy: entropy_of_weights(&weights) / base.ln_base(),
        counts,
        unresolved,
    })
}

/// Entropy of the total area per class, summed over all tiles.
pub fn class_area_diversity<'a>(tiles: impl IntoIterator<Item = &'a AreaVector>, base: LogBase) -> Result<f64> {
    let tiles: Vec<&AreaVector> = tiles.into_iter().collect();
    let first = tiles.first().ok_or_else(|| Error::Degenerate("no area vectors".into()))?;
    let k = first.areas.len();
    if let Some(bad) = tiles.iter().find(|t| t.areas.len() != k || t.classes != first.classes) {
        return Err(Error::Validation(format!(
            "area vectors disagree on classes ({} vs {} entries)",
            k,
            bad.areas.len()
        )));
    }
    let totals: Vec<f64> = (0..k).map(|c| compensated_sum(tiles.iter().map(|t| t.areas[c]))).collect();
    if !(compensated_sum(totals.iter().copied()) > 0.0) {
        return Err(Error::Degenerate("total area is zero".into()));
    }
    Ok(entropy_of_weights(&totals) / base.ln_base())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleClassDiversity {
    pub mean: f64,
    pub included: usize,
    /// Tiles with zero total area.
    pub excluded: usize,
}

/// Mean over tiles of each tile's own area-distribution entropy.
pub fn sample_class_diversity<'a>(
    tiles: impl IntoIterator<Item = &'a AreaVector>,
    base: LogBase,
) -> Result<SampleClassDiversity> {
    let mut per_tile = Vec::new();
    let mut excluded = 0;
    for t in tiles {
        if t.total_area > 0.0 {
            per_tile.push(entropy_of_weights(&t.areas) / base.ln_base());
        } else {
            excluded += 1;
        }
    }
    if per_tile.is_empty() {
        return Err(Error::Degenerate("no tile with positive area".into()));
    }
    Ok(SampleClassDiversity {
        mean: compensated_sum(per_tile.iter().copied()) / per_tile.len() as f64,
        included: per_tile.len(),
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{MultiPolygon, Polygon};
    use crate::manifest::GeoSample;
    use approx::assert_abs_diff_eq;

    fn av(areas: &[f64]) -> AreaVector {
        AreaVector::new((0..areas.len()).map(|i| format!("c{i}")).collect(), areas.to_vec())
    }

    fn manifest(counts: &[usize]) -> DatasetManifest {
        let groups: Vec<String> = (0..counts.len()).map(|i| format!("g{i}")).collect();
        let mut m = DatasetManifest::new("m", groups.clone(), vec![1.0 / counts.len() as f64; counts.len()], 0);
        for (g, &c) in counts.iter().enumerate() {
            for i in 0..c {
                m.samples.push(GeoSample::new(format!("{g}-{i}"), g as f64 + 0.5, 0.5, groups[g].clone()));
            }
        }
        m
    }

    #[test]
    fn continent_cases() {
        let h = |c: &[usize]| continent_diversity(&manifest(c), ContinentSource::GroupLabel, LogBase::Natural).unwrap().entropy;
        assert_eq!(h(&[5, 0, 0, 0, 0, 0]), 0.0);
        assert_abs_diff_eq!(h(&[3; 6]), 6f64.ln(), epsilon = 1e-12);
        let expected = -(0.5f64 * 0.5f64.ln() + 2.0 * 0.25 * 0.25f64.ln());
        assert_abs_diff_eq!(h(&[2, 1, 1, 0, 0, 0]), expected, epsilon = 1e-15);
    }

    #[test]
    fn continent_from_map_strict_and_lenient() {
        let mut layers = IndexMap::new();
        layers.insert("g0".into(), MultiPolygon(vec![Polygon::rectangle(0.0, 0.0, 1.0, 1.0).unwrap()]));
        let map = RegionMap::vector(crate::crs::Crs::Wgs84, layers).unwrap();
        let m = manifest(&[2, 1]);
        let lenient = continent_diversity(&m, ContinentSource::Map { map: &map, strict: false }, LogBase::Natural).unwrap();
        assert_eq!((lenient.entropy, lenient.unresolved), (0.0, 1));
        let strict = continent_diversity(&m, ContinentSource::Map { map: &map, strict: true }, LogBase::Natural);
        assert!(matches!(strict, Err(Error::NoOverlap(m)) if m.contains("1-0")));
    }

    #[test]
    fn class_area_cases() {
        assert_eq!(class_area_diversity(&[av(&[3.0, 0.0]), av(&[5.0, 0.0])], LogBase::Natural).unwrap(), 0.0);
        assert_abs_diff_eq!(
            class_area_diversity(&[av(&[2.0, 0.0]), av(&[0.0, 2.0])], LogBase::Natural).unwrap(),
            2f64.ln(),
            epsilon = 1e-15
        );
        let h = class_area_diversity(&[av(&[0.2, 0.1, 0.0]), av(&[0.3, 0.0, 0.1]), av(&[0.0, 0.2, 0.1])], LogBase::Natural)
            .unwrap();
        let expected = -(0.5f64 * 0.5f64.ln() + 0.3 * 0.3f64.ln() + 0.2 * 0.2f64.ln());
        assert_abs_diff_eq!(h, expected, epsilon = 1e-12);
        assert!(class_area_diversity(&[av(&[0.0, 0.0])], LogBase::Natural).is_err());
        assert!(class_area_diversity(&[av(&[1.0]), av(&[1.0, 2.0])], LogBase::Natural).is_err());
    }

    #[test]
    fn sample_level_cases() {
        let one_hot = [av(&[1.0, 0.0]), av(&[0.0, 4.0])];
        assert_eq!(sample_class_diversity(&one_hot, LogBase::Natural).unwrap().mean, 0.0);
        assert_abs_diff_eq!(class_area_diversity(&one_hot, LogBase::Natural).unwrap(), (0.2f64.ln() * -0.2) - 0.8 * 0.8f64.ln(), epsilon = 1e-12);
        let mixed = [av(&[1.0, 0.0]), av(&[3.0, 3.0]), av(&[0.0, 0.0])];
        let r = sample_class_diversity(&mixed, LogBase::Natural).unwrap();
        assert_abs_diff_eq!(r.mean, 2f64.ln() / 2.0, epsilon = 1e-15);
        assert_eq!((r.included, r.excluded), (2, 1));
    }
}
