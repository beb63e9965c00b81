//! Labelled downstream subsets: per-group top-k class pools split into
//! train/val/test, and the balanced global subset assembled from them.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;

use super::{DatasetManifest, GeoSample};
use crate::apportion::sainte_lague;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Debug, PartialEq)]
pub struct SplitSpec {
    /// (train, val, test) fractions.
    pub ratios: [f64; 3],
    pub top_k_classes: usize,
    pub per_class_cap: usize,
    pub total_cap: usize,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if self.ratios.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::Config(format!("split ratios must be positive, got {:?}", self.ratios)));
        }
        let sum: f64 = self.ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split ratios sum to {sum}, not 1")));
        }
        if self.top_k_classes == 0 || self.per_class_cap == 0 || self.total_cap == 0 {
            return Err(Error::Config("top_k_classes, per_class_cap and total_cap must be positive".into()));
        }
        Ok(())
    }

    /// Samples drawn per class: `min(per_class_cap, total_cap / top_k_classes)`.
    pub fn effective_class_cap(&self) -> usize {
        self.per_class_cap.min(self.total_cap / self.top_k_classes)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Splits {
    pub train: DatasetManifest,
    pub val: DatasetManifest,
    pub test: DatasetManifest,
}

impl Splits {
    pub fn iter(&self) -> impl Iterator<Item = &DatasetManifest> {
        [&self.train, &self.val, &self.test].into_iter()
    }
}

/// Per-class (train, val, test) sizes for `m` samples.
///
/// Highest-averages (Sainte-Laguë) apportionment, ties resolved train, val,
/// test. For 70:15:15 this gives 175/38/38 at 251 and 7/2/1 at 10.
pub fn split_counts(ratios: [f64; 3], m: usize) -> [usize; 3] {
    let c = sainte_lague(&ratios, m as u64);
    [c[0] as usize, c[1] as usize, c[2] as usize]
}

/// Restricts `labeled` to one group (or all), keeps the `top_k_classes` most
/// frequent classes, caps each class, and splits every class by
/// [`split_counts`].
pub fn build_downstream_subsets(
    labeled: &DatasetManifest,
    group_filter: Option<&str>,
    spec: &SplitSpec,
    seed: u64,
) -> Result<Splits> {
    spec.validate()?;
    if let Some(g) = group_filter {
        if !labeled.groups.iter().any(|d| d == g) {
            return Err(Error::Config(format!("group `{g}` is not declared in manifest `{}`", labeled.name)));
        }
    }
    let pool: Vec<(usize, &GeoSample)> = labeled
        .samples
        .iter()
        .enumerate()
        .filter(|(_, s)| group_filter.is_none_or(|g| s.group_label == g))
        .collect();
    if pool.is_empty() {
        return Err(Error::EmptyGroup(group_filter.unwrap_or("*").to_string()));
    }

    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for &(i, s) in &pool {
        let class = s.class_label.as_deref().ok_or_else(|| Error::InvalidSample {
            id: s.id.clone(),
            reason: "missing class_label".into(),
        })?;
        by_class.entry(class).or_default().push(i);
    }
    if by_class.len() < spec.top_k_classes {
        return Err(Error::Degenerate(format!(
            "{} classes requested but only {} available: {}",
            spec.top_k_classes,
            by_class.len(),
            by_class.keys().copied().collect::<Vec<_>>().join(", ")
        )));
    }
    let mut ranked: Vec<(&str, Vec<usize>)> = by_class.into_iter().collect();
    // BTreeMap order is lexicographic, and the sort is stable
    ranked.sort_by(|a, b| b.1.len().cmp(&a.1.len()));
    ranked.truncate(spec.top_k_classes);

    let cap = spec.effective_class_cap();
    let scope = group_filter.unwrap_or("*");
    let mut parts: [Vec<usize>; 3] = Default::default();
    for (class, mut members) in ranked {
        let mut rng = rng::stream(seed, &format!("{scope}\u{1f}{class}"));
        members.shuffle(&mut rng);
        members.truncate(cap);
        let counts = split_counts(spec.ratios, members.len());
        let mut it = members.into_iter();
        for (part, &k) in parts.iter_mut().zip(&counts) {
            part.extend(it.by_ref().take(k));
        }
    }

    let suffix = group_filter.unwrap_or("global");
    let [train, val, test] = parts.map(|mut idx| {
        idx.sort_unstable();
        idx.into_iter().map(|i| labeled.samples[i].clone()).collect::<Vec<_>>()
    });
    Ok(Splits {
        train: subset_manifest(&format!("{}-{suffix}-train", labeled.name), &labeled.groups, train, seed),
        val: subset_manifest(&format!("{}-{suffix}-val", labeled.name), &labeled.groups, val, seed),
        test: subset_manifest(&format!("{}-{suffix}-test", labeled.name), &labeled.groups, test, seed),
    })
}

/// Draws exactly `quota` samples per (group, class, split) from each group's
/// pool. The class vocabulary is the union over groups, so a class absent from
/// any group is reported as an insufficient cell.
pub fn build_global_subset(
    per_group_subsets: &[DatasetManifest],
    per_class_quota: (usize, usize, usize),
    seed: u64,
) -> Result<Splits> {
    let (qt, qv, qe) = per_class_quota;
    let need = qt + qv + qe;
    let mut groups = Vec::with_capacity(per_group_subsets.len());
    let mut cells: Vec<HashMap<&str, Vec<&GeoSample>>> = Vec::with_capacity(per_group_subsets.len());
    let mut vocabulary = BTreeSet::new();
    for m in per_group_subsets {
        let first = m.samples.first().ok_or_else(|| Error::EmptyGroup(m.name.clone()))?;
        let group = first.group_label.clone();
        if let Some(s) = m.samples.iter().find(|s| s.group_label != group) {
            return Err(Error::Validation(format!(
                "subset `{}` mixes groups `{group}` and `{}`",
                m.name, s.group_label
            )));
        }
        if groups.contains(&group) {
            return Err(Error::Validation(format!("group `{group}` supplied twice")));
        }
        let mut by_class: HashMap<&str, Vec<&GeoSample>> = HashMap::new();
        for s in &m.samples {
            let class = s.class_label.as_deref().ok_or_else(|| Error::InvalidSample {
                id: s.id.clone(),
                reason: "missing class_label".into(),
            })?;
            vocabulary.insert(class);
            by_class.entry(class).or_default().push(s);
        }
        groups.push(group);
        cells.push(by_class);
    }
    if vocabulary.is_empty() {
        return Err(Error::Degenerate("no labelled samples in any group".into()));
    }

    let mut parts: [Vec<GeoSample>; 3] = Default::default();
    for (group, by_class) in groups.iter().zip(&cells) {
        for &class in &vocabulary {
            let mut members: Vec<&GeoSample> = by_class.get(class).cloned().unwrap_or_default();
            if members.len() < need {
                return Err(Error::Insufficient {
                    group: group.clone(),
                    class: class.to_string(),
                    needed: need,
                    available: members.len(),
                });
            }
            let mut rng = rng::stream(seed, &format!("{group}\u{1f}{class}"));
            members.shuffle(&mut rng);
            let mut it = members.into_iter().cloned();
            for (part, k) in parts.iter_mut().zip([qt, qv, qe]) {
                part.extend(it.by_ref().take(k));
            }
        }
    }
    let [train, val, test] = parts;
    Ok(Splits {
        train: subset_manifest("global-train", &groups, train, seed),
        val: subset_manifest("global-val", &groups, val, seed),
        test: subset_manifest("global-test", &groups, test, seed),
    })
}

/// A subset manifest whose declared allocation is its realized one.
fn subset_manifest(name: &str, groups: &[String], samples: Vec<GeoSample>, seed: u64) -> DatasetManifest {
    let mut m = DatasetManifest::new(name, groups.to_vec(), vec![0.0; groups.len()], seed);
    m.samples = samples;
    m.allocation = m.realized_allocation();
    m
}
