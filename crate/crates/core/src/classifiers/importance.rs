use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Importance {
    pub feature: String,
    pub index: usize,
    /// metric(all features) − metric(all but this one).
    pub importance: f64,
}

/// Drop-one importance. `metric_for(columns)` retrains and evaluates using
/// only the listed feature columns; it is called once with every column and
/// once per dropped column. Sorted by importance, descending.
pub fn feature_importance<F>(names: &[&str], mut metric_for: F) -> Result<Vec<Importance>>
where
    F: FnMut(&[usize]) -> Result<f64>,
{
    if names.len() < 2 {
        return Err(Error::invalid("feature importance needs >= 2 features"));
    }
    let all: Vec<usize> = (0..names.len()).collect();
    let base = metric_for(&all)?;
    let mut out = Vec::with_capacity(names.len());
    for f in 0..names.len() {
        let keep: Vec<usize> = all.iter().copied().filter(|&c| c != f).collect();
        out.push(Importance {
            feature: names[f].to_string(),
            index: f,
            importance: base - metric_for(&keep)?,
        });
    }
    out.sort_by(|a, b| b.importance.total_cmp(&a.importance).then(a.index.cmp(&b.index)));
    Ok(out)
}

/// Keep the listed columns of every row.
pub fn select_columns(rows: &[Vec<f64>], columns: &[usize]) -> Vec<Vec<f64>> {
    rows.iter().map(|r| columns.iter().map(|&c| r[c]).collect()).collect()
}
