use serde::{Deserialize, Serialize};

use super::scores::ScoreTable;
use crate::error::{Error, Result};

/// How tied scores share ranks. Ranks are 0-based, 0 = best.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieMethod {
    /// Tied entries get the mean of the positions they span.
    #[default]
    Midrank,
    /// Tied entries share the lowest position they span.
    Min,
    /// Distinct score levels are numbered consecutively.
    Dense,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankEntry {
    pub dataset: String,
    pub average_rank: f64,
    /// Rank per task in table task order; `None` for absent cells.
    pub per_task: Vec<Option<f64>>,
}

/// Datasets sharing one rank on one task.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tie {
    pub task: String,
    pub rank: f64,
    pub datasets: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankResult {
    pub method: TieMethod,
    pub tasks: Vec<String>,
    /// Ascending by average rank; equal averages keep table order.
    pub entries: Vec<RankEntry>,
    pub ties: Vec<Tie>,
}

impl RankResult {
    pub fn order(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.dataset.as_str()).collect()
    }

    pub fn get(&self, dataset: &str) -> Option<&RankEntry> {
        self.entries.iter().find(|e| e.dataset == dataset)
    }
}

pub fn rank_datasets(table: &ScoreTable) -> Result<RankResult> {
    rank_datasets_with(table, TieMethod::Midrank)
}

/// Ranks datasets per task and averages each dataset's ranks over the tasks
/// where it has a score.
pub fn rank_datasets_with(table: &ScoreTable, method: TieMethod) -> Result<RankResult> {
    table.validate()?;
    if table.datasets.len() < 2 || table.tasks.is_empty() {
        return Err(Error::Validation("ranking needs at least 2 datasets and 1 task".into()));
    }
    let nd = table.datasets.len();
    let mut per_task: Vec<Vec<Option<f64>>> = vec![vec![None; table.tasks.len()]; nd];
    let mut ties = Vec::new();
    for (t, task) in table.tasks.iter().enumerate() {
        let sign = if table.higher_is_better[t] { -1.0 } else { 1.0 };
        // smaller key is better
        let present: Vec<(usize, f64)> = (0..nd).filter_map(|d| table.mean[d][t].map(|v| (d, sign * v))).collect();
        let keys: Vec<f64> = present.iter().map(|p| p.1).collect();
        let ranks = rank_values(&keys, method);
        for (&(d, _), &r) in present.iter().zip(&ranks) {
            per_task[d][t] = Some(r);
        }
        let mut groups: Vec<(f64, Vec<String>)> = Vec::new();
        for (i, &(d, _)) in present.iter().enumerate() {
            if present.iter().enumerate().any(|(j, p)| j != i && p.1 == present[i].1) {
                match groups.iter_mut().find(|g| g.0 == ranks[i]) {
                    Some(g) => g.1.push(table.datasets[d].clone()),
                    None => groups.push((ranks[i], vec![table.datasets[d].clone()])),
                }
            }
        }
        groups.sort_by(|a, b| a.0.total_cmp(&b.0));
        ties.extend(groups.into_iter().map(|(rank, datasets)| Tie {
            task: task.clone(),
            rank,
            datasets,
        }));
    }
    let mut entries: Vec<RankEntry> = table
        .datasets
        .iter()
        .zip(per_task)
        .map(|(name, ranks)| {
            let have: Vec<f64> = ranks.iter().flatten().copied().collect();
            let average_rank = if have.is_empty() {
                f64::NAN
            } else {
                have.iter().sum::<f64>() / have.len() as f64
            };
            RankEntry {
                dataset: name.clone(),
                average_rank,
                per_task: ranks,
            }
        })
        .collect();
    if let Some(e) = entries.iter().find(|e| e.average_rank.is_nan()) {
        return Err(Error::Validation(format!("dataset `{}` has no scores", e.dataset)));
    }
    entries.sort_by(|a, b| a.average_rank.total_cmp(&b.average_rank));
    Ok(RankResult {
        method,
        tasks: table.tasks.clone(),
        entries,
        ties,
    })
}

/// 0-based ranks of `keys`, smallest first.
fn rank_values(keys: &[f64], method: TieMethod) -> Vec<f64> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]));
    let mut ranks = vec![0.0; keys.len()];
    let mut pos = 0;
    let mut level = 0;
    while pos < order.len() {
        let mut end = pos + 1;
        while end < order.len() && keys[order[end]] == keys[order[pos]] {
            end += 1;
        }
        let r = match method {
            TieMethod::Midrank => (pos + end - 1) as f64 / 2.0,
            TieMethod::Min => pos as f64,
            TieMethod::Dense => level as f64,
        };
        for &i in &order[pos..end] {
            ranks[i] = r;
        }
        level += 1;
        pos = end;
    }
    ranks
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[(&str, &[f64])], hib: &[bool]) -> ScoreTable {
        let tasks: Vec<String> = (0..hib.len()).map(|i| format!("t{i}")).collect();
        let mut t = ScoreTable::new(rows.iter().map(|r| r.0.to_string()).collect(), tasks.clone(), hib.to_vec());
        for (d, vals) in rows {
            for (i, v) in vals.iter().enumerate() {
                t.set(d, &tasks[i], *v, None).unwrap();
            }
        }
        t
    }

    #[test]
    fn midrank_ties() {
        let t = table(&[("a", &[1.0, 2.0]), ("b", &[1.0, 2.0])], &[true, true]);
        let r = rank_datasets(&t).unwrap();
        assert!(r.entries.iter().all(|e| e.average_rank == 0.5));
        assert_eq!(r.ties.len(), 2);
    }

    #[test]
    fn single_task_and_direction() {
        let t = table(&[("a", &[3.0]), ("b", &[1.0]), ("c", &[2.0])], &[false]);
        let r = rank_datasets(&t).unwrap();
        assert_eq!(r.order(), ["b", "c", "a"]);
        assert_eq!(r.get("a").unwrap().average_rank, 2.0);
    }

    #[test]
    fn methods_differ_on_ties() {
        let keys = [0.1, 0.2, 0.2, 0.3];
        assert_eq!(rank_values(&keys, TieMethod::Midrank), [0.0, 1.5, 1.5, 3.0]);
        assert_eq!(rank_values(&keys, TieMethod::Min), [0.0, 1.0, 1.0, 3.0]);
        assert_eq!(rank_values(&keys, TieMethod::Dense), [0.0, 1.0, 1.0, 2.0]);
    }

    #[test]
    fn absent_cells_skip_task() {
        let mut t = table(&[("a", &[1.0, 5.0]), ("b", &[2.0, 4.0]), ("c", &[3.0, 3.0])], &[true, true]);
        t.mean[0][1] = None;
        let r = rank_datasets(&t).unwrap();
        assert_eq!(r.get("a").unwrap().per_task, vec![Some(2.0), None]);
        assert_eq!(r.get("a").unwrap().average_rank, 2.0);
    }

    #[test]
    fn non_finite_score_named() {
        let t = table(&[("a", &[f64::INFINITY]), ("b", &[1.0])], &[true]);
        assert!(matches!(rank_datasets(&t), Err(Error::Validation(m)) if m.contains("`a`")));
    }
}
