use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

/// Mean downstream score per (dataset, task). Absent cells are `None` and are
/// left out of that task's ranking.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreTable {
    pub datasets: Vec<String>,
    pub tasks: Vec<String>,
    /// `mean[d][t]`.
    pub mean: Vec<Vec<Option<f64>>>,
    pub ci_halfwidth: Vec<Vec<Option<f64>>>,
    pub higher_is_better: Vec<bool>,
}

impl ScoreTable {
    pub fn new(datasets: Vec<String>, tasks: Vec<String>, higher_is_better: Vec<bool>) -> Self {
        let (d, t) = (datasets.len(), tasks.len());
        ScoreTable {
            datasets,
            tasks,
            mean: vec![vec![None; t]; d],
            ci_halfwidth: vec![vec![None; t]; d],
            higher_is_better,
        }
    }

    pub fn dataset_index(&self, name: &str) -> Option<usize> {
        self.datasets.iter().position(|d| d == name)
    }

    pub fn set(&mut self, dataset: &str, task: &str, mean: f64, ci: Option<f64>) -> Result<()> {
        let d = self
            .dataset_index(dataset)
            .ok_or_else(|| Error::Validation(format!("unknown dataset `{dataset}`")))?;
        let t = self
            .tasks
            .iter()
            .position(|x| x == task)
            .ok_or_else(|| Error::Validation(format!("unknown task `{task}`")))?;
        self.mean[d][t] = Some(mean);
        self.ci_halfwidth[d][t] = ci;
        Ok(())
    }

    /// Rejects non-finite scores, naming the offending cell.
    pub fn validate(&self) -> Result<()> {
        if self.higher_is_better.len() != self.tasks.len() {
            return Err(Error::Validation("higher_is_better must have one flag per task".into()));
        }
        for (d, row) in self.mean.iter().enumerate() {
            for (t, v) in row.iter().enumerate() {
                if let Some(v) = v {
                    if !v.is_finite() {
                        return Err(Error::Validation(format!(
                            "score for dataset `{}`, task `{}` is not finite ({v})",
                            self.datasets[d], self.tasks[t]
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct Row {
    dataset: String,
    task: String,
    mean: Option<f64>,
    ci: Option<f64>,
    higher_is_better: String,
}

/// Reads the long-form CSV `dataset,task,mean,ci,higher_is_better`. Datasets
/// and tasks keep first-appearance order; an empty `mean` marks an absent
/// cell.
pub fn read_score_table(path: &Path) -> Result<ScoreTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_score_table(&text, path)
}

pub(crate) fn parse_score_table(text: &str, origin: &Path) -> Result<ScoreTable> {
    let perr = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| perr(1, e.to_string()))?.clone();
    let expected = ["dataset", "task", "mean", "ci", "higher_is_better"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(perr(1, format!("header must be `{}`", expected.join(","))));
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.deserialize::<Row>().enumerate() {
        let line = i + 2;
        let row = rec.map_err(|e| perr(line, e.to_string()))?;
        let hib = match row.higher_is_better.to_ascii_lowercase().as_str() {
            "true" | "1" | "yes" => true,
            "false" | "0" | "no" => false,
            other => return Err(perr(line, format!("higher_is_better must be true/false, got `{other}`"))),
        };
        rows.push((line, row, hib));
    }
    let mut datasets: Vec<String> = Vec::new();
    let mut tasks: Vec<String> = Vec::new();
    let mut flags: Vec<bool> = Vec::new();
    for (line, row, hib) in &rows {
        if !datasets.contains(&row.dataset) {
            datasets.push(row.dataset.clone());
        }
        match tasks.iter().position(|t| *t == row.task) {
            Some(t) if flags[t] != *hib => {
                return Err(perr(*line, format!("task `{}` has inconsistent higher_is_better", row.task)));
            }
            Some(_) => {}
            None => {
                tasks.push(row.task.clone());
                flags.push(*hib);
            }
        }
    }
    let mut table = ScoreTable::new(datasets, tasks, flags);
    let mut seen = std::collections::HashSet::new();
    for (line, row, _) in rows {
        if !seen.insert((row.dataset.clone(), row.task.clone())) {
            return Err(perr(line, format!("duplicate cell ({}, {})", row.dataset, row.task)));
        }
        if let Some(m) = row.mean {
            table.set(&row.dataset, &row.task, m, row.ci)?;
        }
    }
    table.validate()?;
    Ok(table)
}
