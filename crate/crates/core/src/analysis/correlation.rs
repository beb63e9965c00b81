use indexmap::IndexMap;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::scores::ScoreTable;
use crate::diversity::{DiversityReport, Measure};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "method")]
pub enum PValueMethod {
    /// Student-t approximation with n − 2 degrees of freedom.
    #[default]
    TApprox,
    /// Permutation test: exact enumeration when `n!` does not exceed
    /// `permutations`, otherwise seeded Monte Carlo with the +1 correction.
    Permutation { permutations: u64, seed: u64 },
}


/// How per-task scores are combined into one performance value per dataset.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scaling {
    /// Each task min–max scaled to [0, 1] over the matched datasets (flipped
    /// when lower is better), then averaged.
    #[default]
    MinMax,
    /// Plain mean of the raw scores.
    Raw,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelationResult {
    pub rho: f64,
    /// Two-sided.
    pub p_value: f64,
    pub n: usize,
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y_scaling: Option<Scaling>,
}

/// 1-based ranks with ties sharing the mean of their positions.
pub fn midranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && v[order[j]] == v[order[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Two-sided p-value of a Spearman coefficient via the t-approximation.
pub fn spearman_p_value(rho: f64, n: usize) -> f64 {
    if n < 3 {
        return 1.0;
    }
    if rho.abs() >= 1.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    let t = rho * (df / (1.0 - rho * rho)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    spearman_with(x, y, PValueMethod::TApprox)
}

pub fn spearman_with(x: &[f64], y: &[f64], method: PValueMethod) -> Result<CorrelationResult> {
    if x.len() != y.len() {
        return Err(Error::Validation(format!("lengths differ: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::Validation(format!("need at least 3 pairs, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Validation("correlation inputs must be finite".into()));
    }
    let (rx, ry) = (midranks(x), midranks(y));
    let rho = pearson(&rx, &ry).ok_or_else(|| Error::UndefinedCorrelation("an input has zero rank variance".into()))?;
    let n = x.len();
    let (p_value, tag) = match method {
        PValueMethod::TApprox => (spearman_p_value(rho, n), "t-approx".to_string()),
        PValueMethod::Permutation { permutations, seed } => permutation_p(&rx, &ry, rho, permutations, seed),
    };
    Ok(CorrelationResult {
        rho,
        p_value,
        n,
        method: tag,
        y_scaling: None,
    })
}

fn permutation_p(rx: &[f64], ry: &[f64], rho: f64, permutations: u64, seed: u64) -> (f64, String) {
    let n = rx.len();
    let threshold = rho.abs() - 1e-12;
    let factorial = (1..=n as u64).try_fold(1u64, |acc, k| acc.checked_mul(k));
    let extreme = |perm: &[f64]| pearson(rx, perm).is_some_and(|r| r.abs() >= threshold);
    match factorial {
        Some(total) if total <= permutations.max(1) => {
            // Heap's algorithm over all orderings of ry
            let mut a = ry.to_vec();
            let mut c = vec![0usize; n];
            let mut hits = extreme(&a) as u64;
            let mut i = 0;
            while i < n {
                if c[i] < i {
                    if i % 2 == 0 {
                        a.swap(0, i);
                    } else {
                        a.swap(c[i], i);
                    }
                    hits += extreme(&a) as u64;
                    c[i] += 1;
                    i = 0;
                } else {
                    c[i] = 0;
                    i += 1;
                }
            }
            (hits as f64 / total as f64, format!("permutation-exact({total})"))
        }
        _ => {
            let mut rng = rng::stream(seed, "spearman-permutation");
            let mut a = ry.to_vec();
            let mut hits = 0u64;
            for _ in 0..permutations {
                a.shuffle(&mut rng);
                hits += extreme(&a) as u64;
            }
            (
                (hits + 1) as f64 / (permutations + 1) as f64,
                format!("permutation-monte-carlo({permutations},seed={seed})"),
            )
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CorrelationOptions {
    pub scaling: Scaling,
    pub p_value: PValueMethod,
}

/// One performance value per listed dataset: the mean over tasks of its
/// (optionally min–max scaled) scores. Scaling uses only `datasets`.
pub fn performance_means(table: &ScoreTable, datasets: &[&str], scaling: Scaling) -> Result<Vec<f64>> {
    let rows: Vec<usize> = datasets
        .iter()
        .map(|d| table.dataset_index(d).ok_or_else(|| Error::Alignment(vec![d.to_string()])))
        .collect::<Result<_>>()?;
    let mut sums = vec![0.0; rows.len()];
    let mut counts = vec![0usize; rows.len()];
    for t in 0..table.tasks.len() {
        let vals: Vec<Option<f64>> = rows.iter().map(|&r| table.mean[r][t]).collect();
        let present: Vec<f64> = vals.iter().flatten().copied().collect();
        if present.is_empty() {
            continue;
        }
        let lo = present.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = present.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (i, v) in vals.iter().enumerate() {
            let Some(v) = *v else { continue };
            let y = match scaling {
                Scaling::Raw => v,
                Scaling::MinMax if hi > lo => {
                    let s = (v - lo) / (hi - lo);
                    if table.higher_is_better[t] {
                        s
                    } else {
                        1.0 - s
                    }
                }
                // a task on which all datasets tie carries no ordering information
                Scaling::MinMax => 0.0,
            };
            sums[i] += y;
            counts[i] += 1;
        }
    }
    rows.iter()
        .zip(sums.iter().zip(&counts))
        .map(|(&r, (&s, &c))| {
            if c == 0 {
                Err(Error::Validation(format!("dataset `{}` has no scores", table.datasets[r])))
            } else {
                Ok(s / c as f64)
            }
        })
        .collect()
}

/// Spearman correlation between each selected diversity measure and mean
/// downstream performance. Every report must name a table dataset; table rows
/// without a report are ignored.
pub fn correlate_diversity(
    reports: &[DiversityReport],
    table: &ScoreTable,
    measures: &[Measure],
    opts: CorrelationOptions,
) -> Result<IndexMap<Measure, CorrelationResult>> {
    table.validate()?;
    let unmatched: Vec<String> = reports
        .iter()
        .filter(|r| table.dataset_index(&r.dataset).is_none())
        .map(|r| r.dataset.clone())
        .collect();
    if !unmatched.is_empty() {
        return Err(Error::Alignment(unmatched));
    }
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = reports.iter().find(|r| !seen.insert(r.dataset.as_str())) {
        return Err(Error::Validation(format!("two reports for dataset `{}`", dup.dataset)));
    }
    if reports.len() < 3 {
        return Err(Error::Validation(format!("need at least 3 matched datasets, got {}", reports.len())));
    }
    let names: Vec<&str> = reports.iter().map(|r| r.dataset.as_str()).collect();
    let y = performance_means(table, &names, opts.scaling)?;
    let mut out = IndexMap::new();
    for &m in measures {
        let x: Vec<f64> = reports
            .iter()
            .map(|r| {
                r.value(m)
                    .ok_or_else(|| Error::Config(format!("report `{}` lacks the {m} measure", r.dataset)))
            })
            .collect::<Result<_>>()?;
        let mut res = spearman_with(&x, &y, opts.p_value).map_err(|e| match e {
            Error::UndefinedCorrelation(msg) => Error::UndefinedCorrelation(format!("{m}: {msg}")),
            other => other,
        })?;
        res.y_scaling = Some(opts.scaling);
        out.insert(m, res);
    }
    Ok(out)
}
