use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{raw_values, MetricError, MetricId, MetricOptions, MetricResult, Result, Scenario};
use crate::tabular::Column;

/// r x c table of co-occurrence counts; rows are groups, columns outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contingency {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl Contingency {
    /// Cross-tabulates rows where both cells are present. Labels sort ascending.
    pub fn from_columns(group: &Column, outcome: &Column) -> Self {
        let mut cells: BTreeMap<(String, String), u64> = BTreeMap::new();
        for (g, o) in group.labels().into_iter().zip(outcome.labels()) {
            if let (Some(g), Some(o)) = (g, o) {
                *cells.entry((g, o)).or_default() += 1;
            }
        }
        let rows: Vec<String> = cells
            .keys()
            .map(|(g, _)| g.clone())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let cols: Vec<String> = cells
            .keys()
            .map(|(_, o)| o.clone())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let counts = rows
            .iter()
            .map(|r| {
                cols.iter()
                    .map(|c| cells.get(&(r.clone(), c.clone())).copied().unwrap_or(0))
                    .collect()
            })
            .collect();
        Contingency { rows, cols, counts }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Self {
        let rows = (0..counts.len()).map(|i| format!("g{i}")).collect();
        let cols = (0..counts.first().map_or(0, Vec::len))
            .map(|j| format!("y{j}"))
            .collect();
        Contingency { rows, cols, counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_totals(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_totals(&self) -> Vec<u64> {
        (0..self.cols.len())
            .map(|j| self.counts.iter().map(|r| r[j]).sum())
            .collect()
    }

    fn validate(&self) -> Result<()> {
        let r = self.rows.len();
        let c = self.cols.len();
        if r < 2 || c < 2 {
            return Err(MetricError::SingleCategory(r.min(c)));
        }
        if self.counts.len() != r || self.counts.iter().any(|row| row.len() != c) {
            return Err(MetricError::DegenerateTable);
        }
        if self.row_totals().contains(&0) || self.col_totals().contains(&0) {
            return Err(MetricError::DegenerateTable);
        }
        Ok(())
    }

    /// P(outcome | group) for each group row.
    fn conditionals(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let t: u64 = row.iter().sum();
                row.iter().map(|&c| c as f64 / t as f64).collect()
            })
            .collect()
    }

    fn marginal_outcome(&self) -> Vec<f64> {
        let n = self.total() as f64;
        self.col_totals().iter().map(|&c| c as f64 / n).collect()
    }
}

fn tvd(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// elift(x, y) = P(y | x) / P(y) for every cell; `None` where the cell count
/// is below `min_support`.
pub fn elift_cells(table: &Contingency, min_support: u64) -> Vec<Vec<Option<f64>>> {
    let cond = table.conditionals();
    let marg = table.marginal_outcome();
    table
        .counts
        .iter()
        .zip(&cond)
        .map(|(row, crow)| {
            row.iter()
                .zip(crow)
                .zip(&marg)
                .map(|((&count, &p_cond), &p_y)| (count >= min_support).then(|| p_cond / p_y))
                .collect()
        })
        .collect()
}

pub(super) fn evaluate(table: &Contingency, metric: MetricId, opts: &MetricOptions) -> Result<MetricResult> {
    table.validate()?;
    let n = table.total();
    let nf = n as f64;
    let (raw, details) = match metric {
        MetricId::CramersV => {
            let rt = table.row_totals();
            let ct = table.col_totals();
            let mut chi2 = 0.0;
            for (i, row) in table.counts.iter().enumerate() {
                for (j, &o) in row.iter().enumerate() {
                    let e = rt[i] as f64 * ct[j] as f64 / nf;
                    if e > 0.0 {
                        chi2 += (o as f64 - e).powi(2) / e;
                    }
                }
            }
            let dof = (table.rows.len().min(table.cols.len()) - 1) as f64;
            let v = (chi2 / (nf * dof)).sqrt().clamp(0.0, 1.0);
            (
                raw_values([("chi2", chi2), ("v", v)]),
                format!("{}x{} table", table.rows.len(), table.cols.len()),
            )
        }
        MetricId::Elift => {
            let cells = elift_cells(table, opts.elift_min_support);
            let mut sym: f64 = 1.0;
            let mut max_ratio: f64 = 0.0;
            let mut considered = 0usize;
            for e in cells.iter().flatten().flatten() {
                considered += 1;
                max_ratio = max_ratio.max(*e);
                sym = sym.max(e.max(1.0 / e));
            }
            (
                raw_values([
                    ("elift", sym),
                    ("max_elift", max_ratio),
                    ("cells_considered", considered as f64),
                ]),
                format!("cells with support >= {}", opts.elift_min_support),
            )
        }
        MetricId::StatisticalParity => {
            let rt = table.row_totals();
            let mut delta: f64 = 0.0;
            let mut z_max: f64 = 0.0;
            for j in 0..table.cols.len() {
                for g in 0..table.rows.len() {
                    for h in (g + 1)..table.rows.len() {
                        let (ng, nh) = (rt[g] as f64, rt[h] as f64);
                        let (cg, ch) = (table.counts[g][j] as f64, table.counts[h][j] as f64);
                        let d = (cg / ng - ch / nh).abs();
                        let pooled = (cg + ch) / (ng + nh);
                        let se = (pooled * (1.0 - pooled) * (1.0 / ng + 1.0 / nh)).sqrt();
                        let z = if se > 0.0 { d / se } else { 0.0 };
                        delta = delta.max(d);
                        z_max = z_max.max(z);
                    }
                }
            }
            (
                raw_values([("delta", delta), ("z", z_max)]),
                "pairwise group differences in outcome rates".to_string(),
            )
        }
        MetricId::Lipschitz => {
            let cond = table.conditionals();
            let mut l: f64 = 0.0;
            for g in 0..cond.len() {
                for h in (g + 1)..cond.len() {
                    l = l.max(tvd(&cond[g], &cond[h]));
                }
            }
            (
                raw_values([("lipschitz", l)]),
                "max pairwise TVD of conditional outcome distributions".to_string(),
            )
        }
        MetricId::TotalVariation => {
            let cond = table.conditionals();
            let marg = table.marginal_outcome();
            let t = cond.iter().map(|c| tvd(c, &marg)).fold(0.0, f64::max);
            (
                raw_values([("tvd", t)]),
                "max TVD between a group's outcome distribution and the overall one".to_string(),
            )
        }
        other => {
            return Err(MetricError::ScenarioMismatch {
                metric: other,
                scenario: Scenario::CatCat,
            })
        }
    };
    Ok(MetricResult::new(metric, raw, n as usize, details))
}
