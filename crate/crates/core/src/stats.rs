//! System-level correlation analysis: Pearson's r between metric scores and
//! external judgment scores, with optional robust-z outlier removal
//! (median/MAD with the 1.483 consistency constant).

use serde::Serialize;

use crate::error::{Error, Result};

/// One system's paired scores.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemScore {
    pub system_id: String,
    pub metric_score: f64,
    pub judgment_score: f64,
}

/// A table of systems with unique ids.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SystemScoreTable {
    pub rows: Vec<SystemScore>,
}

impl SystemScoreTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Parses TSV rows `system_id<TAB>metric_score<TAB>judgment_score`. A
    /// first row whose numeric columns do not parse is treated as a header.
    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(Error::parse(
                    lineno,
                    format!("expected 3 tab-separated columns, found {}", cols.len()),
                ));
            }
            let scores = (cols[1].parse::<f64>(), cols[2].parse::<f64>());
            let (metric_score, judgment_score) = match scores {
                (Ok(m), Ok(j)) => (m, j),
                _ if rows.is_empty() && idx == 0 => continue, // header row
                _ => {
                    return Err(Error::parse(
                        lineno,
                        format!("non-numeric score in `{line}`"),
                    ))
                }
            };
            if !seen.insert(cols[0].to_string()) {
                return Err(Error::Data(format!("duplicate system id `{}`", cols[0])));
            }
            rows.push(SystemScore {
                system_id: cols[0].to_string(),
                metric_score,
                judgment_score,
            });
        }
        Ok(SystemScoreTable { rows })
    }
}

/// Sample Pearson correlation coefficient. `None` when either series is
/// constant or fewer than two pairs are given.
pub fn pearson_r(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return None;
    }
    Some(cov / (var_x * var_y).sqrt())
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Robust z-scores of the judgment column: (x - median) / (1.483 * MAD).
/// `None` when the table is too small or MAD is zero.
pub fn robust_z_scores(table: &SystemScoreTable) -> Option<Vec<f64>> {
    if table.rows.len() < 3 {
        return None;
    }
    let mut values: Vec<f64> = table.rows.iter().map(|r| r.judgment_score).collect();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let med = median(&values);
    let mut deviations: Vec<f64> = table
        .rows
        .iter()
        .map(|r| (r.judgment_score - med).abs())
        .collect();
    deviations.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mad = median(&deviations);
    if mad == 0.0 {
        return None;
    }
    Some(
        table
            .rows
            .iter()
            .map(|r| (r.judgment_score - med) / (1.483 * mad))
            .collect(),
    )
}

/// Drops systems whose judgment score has |robust z| above `cutoff`. When
/// MAD is zero or fewer than three rows are present, the table is returned
/// unchanged.
pub fn remove_outliers(table: &SystemScoreTable, cutoff: f64) -> SystemScoreTable {
    match robust_z_scores(table) {
        Some(zs) => SystemScoreTable {
            rows: table
                .rows
                .iter()
                .zip(&zs)
                .filter(|(_, z)| z.abs() <= cutoff)
                .map(|(r, _)| r.clone())
                .collect(),
        },
        None => table.clone(),
    }
}

/// Correlation outcome over a score table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub n_used: usize,
    pub n_removed: usize,
    pub r: Option<f64>,
}

impl CorrelationReport {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serialization");
        text.push('\n');
        text
    }
}

/// Correlates metric scores with judgment scores, optionally removing
/// outlier systems first (cutoff on |robust z| of the judgment score).
pub fn correlate_systems(
    table: &SystemScoreTable,
    remove_outlier_systems: bool,
    cutoff: f64,
) -> CorrelationReport {
    let filtered = if remove_outlier_systems {
        remove_outliers(table, cutoff)
    } else {
        table.clone()
    };
    let xs: Vec<f64> = filtered.rows.iter().map(|r| r.metric_score).collect();
    let ys: Vec<f64> = filtered.rows.iter().map(|r| r.judgment_score).collect();
    CorrelationReport {
        n_used: filtered.rows.len(),
        n_removed: table.rows.len() - filtered.rows.len(),
        r: pearson_r(&xs, &ys),
    }
}
