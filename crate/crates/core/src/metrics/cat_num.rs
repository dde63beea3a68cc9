use std::collections::BTreeMap;

use super::{raw_values, require_kind, MetricError, MetricId, MetricResult, Result, Scenario};
use crate::stats::{self, MAD_SCALE};
use crate::tabular::{Column, ColumnKind};

/// Extra columns some categorical-numerical metrics consult.
#[derive(Debug, Clone, Copy, Default)]
pub struct Auxiliary<'a> {
    /// Numerical mediator for the path-specific effect.
    pub mediator: Option<&'a Column>,
    /// Stratification variable for the causal effect.
    pub covariate: Option<&'a Column>,
}

struct Paired {
    groups: Vec<Option<String>>,
    ys: Vec<Option<f64>>,
}

impl Paired {
    fn rows(&self) -> impl Iterator<Item = (usize, &str, f64)> {
        self.groups
            .iter()
            .zip(&self.ys)
            .enumerate()
            .filter_map(|(i, (g, y))| Some((i, g.as_deref()?, (*y)?)))
    }

    fn by_group(&self) -> BTreeMap<String, Vec<f64>> {
        let mut out: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for (_, g, y) in self.rows() {
            out.entry(g.to_string()).or_default().push(y);
        }
        out
    }
}

/// The two most frequent groups, larger first; ties go to the smaller label.
/// Treatment and control candidates: the two largest groups. When sizes tie
/// at the cut every qualifying pair is a candidate, so the choice does not
/// depend on label names; callers keep the strongest effect. Within a pair
/// of equal sizes the smaller label is the treatment.
fn candidate_pairs(groups: &BTreeMap<String, Vec<f64>>) -> Vec<(String, String)> {
    let mut sizes: Vec<usize> = groups.values().map(Vec::len).collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    let with_size =
        |s: usize| -> Vec<&String> { groups.iter().filter(|(_, v)| v.len() == s).map(|(k, _)| k).collect() };
    let top = with_size(sizes[0]);
    if top.len() >= 2 {
        let mut out = Vec::new();
        for i in 0..top.len() {
            for j in (i + 1)..top.len() {
                out.push((top[i].clone(), top[j].clone()));
            }
        }
        out
    } else {
        with_size(sizes[1])
            .into_iter()
            .map(|c| (top[0].clone(), c.clone()))
            .collect()
    }
}

/// Evaluates `effect` on every candidate pair and keeps the one with the
/// largest `strength`. Fails only if every candidate fails.
fn strongest<T>(
    groups: &BTreeMap<String, Vec<f64>>,
    effect: impl Fn(&str, &str) -> Result<T>,
    strength: impl Fn(&T) -> f64,
) -> Result<(String, String, T)> {
    let mut best: Option<(String, String, T)> = None;
    let mut first_err = None;
    for (t, c) in candidate_pairs(groups) {
        match effect(&t, &c) {
            Ok(v) => {
                if best.as_ref().is_none_or(|b| strength(&v) > strength(&b.2)) {
                    best = Some((t, c, v));
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.unwrap_or(MetricError::SingleCategory(groups.len())))
}

fn pairs(groups: &BTreeMap<String, Vec<f64>>) -> Vec<(&String, &Vec<f64>, &String, &Vec<f64>)> {
    let items: Vec<_> = groups.iter().collect();
    let mut out = Vec::new();
    for i in 0..items.len() {
        for j in (i + 1)..items.len() {
            out.push((items[i].0, items[i].1, items[j].0, items[j].1));
        }
    }
    out
}

pub(super) fn detect(group: &Column, outcome: &Column, metric: MetricId, aux: &Auxiliary<'_>) -> Result<MetricResult> {
    let paired = Paired {
        groups: group.labels(),
        ys: outcome.reals(),
    };
    let groups = paired.by_group();
    if groups.len() < 2 {
        return Err(MetricError::SingleCategory(groups.len()));
    }
    let all_y: Vec<f64> = paired.rows().map(|(_, _, y)| y).collect();
    let n = all_y.len();
    let sd_y = stats::population_sd(&all_y);

    let (raw, details) = match metric {
        MetricId::MaxAbsMean => {
            if !(sd_y > 0.0) {
                return Err(MetricError::ZeroVariance);
            }
            let mean_y = stats::mean(&all_y);
            let (label, nv) = groups
                .iter()
                .map(|(g, ys)| (g, ((stats::mean(ys) - mean_y) / sd_y).abs()))
                .fold((None, 0.0f64), |acc, (g, v)| if v > acc.1 { (Some(g), v) } else { acc });
            (
                raw_values([("n_value", nv)]),
                format!(
                    "largest standardized group mean in {:?}",
                    label.map_or("-", |s| s.as_str())
                ),
            )
        }
        MetricId::CohensD => {
            if let Some((g, _)) = groups.iter().find(|(_, ys)| ys.len() < 2) {
                return Err(MetricError::SingletonGroup(g.clone()));
            }
            let mut best: f64 = 0.0;
            let mut which = String::new();
            for (g, yg, h, yh) in pairs(&groups) {
                let (ng, nh) = (yg.len() as f64, yh.len() as f64);
                let pooled = (((ng - 1.0) * stats::sample_variance(yg) + (nh - 1.0) * stats::sample_variance(yh))
                    / (ng + nh - 2.0))
                    .sqrt();
                if !(pooled > 0.0) {
                    return Err(MetricError::ZeroVariance);
                }
                let d = (stats::mean(yg) - stats::mean(yh)) / pooled;
                if d.abs() > best {
                    best = d.abs();
                    which = format!("{g} vs {h}");
                }
            }
            (raw_values([("d", best)]), format!("largest pair: {which}"))
        }
        MetricId::StandardizedDifference => {
            let mad = stats::mad(&all_y);
            if !(mad > 0.0) {
                return Err(MetricError::DegenerateMad);
            }
            let scale = MAD_SCALE * mad;
            let best = pairs(&groups)
                .into_iter()
                .map(|(_, yg, _, yh)| ((stats::mean(yg) - stats::mean(yh)) / scale).abs())
                .fold(0.0, f64::max);
            (
                raw_values([("sd", best), ("mad", mad)]),
                "pairwise mean gaps over 1.4826*MAD".to_string(),
            )
        }
        MetricId::CausalEffect => {
            if !(sd_y > 0.0) {
                return Err(MetricError::ZeroVariance);
            }
            let (t, c, ace) = strongest(
                &groups,
                |t, c| match aux.covariate {
                    None => Ok(stats::mean(&groups[t]) - stats::mean(&groups[c])),
                    Some(cov) => stratified_effect(&paired, cov, t, c),
                },
                |ace| ace.abs(),
            )?;
            (
                raw_values([("ace", ace), ("ace_std", ace.abs() / sd_y)]),
                format!(
                    "treatment={t}, control={c}{}",
                    aux.covariate
                        .map_or(String::new(), |c| format!(", stratified on {}", c.name))
                ),
            )
        }
        MetricId::Pse => {
            let mediator = aux.mediator.ok_or(MetricError::MissingMediator)?;
            require_kind(mediator, ColumnKind::Numerical)?;
            let (t, c, fit) = strongest(
                &groups,
                |t, c| mediation(&paired, mediator, t, c),
                |fit| fit.ade.abs().max(fit.aie.abs()) / fit.sd_y,
            )?;
            let pse = fit.ade.abs().max(fit.aie.abs()) / fit.sd_y;
            let binarized = if groups.len() > 2 {
                format!(", binarized from {} groups", groups.len())
            } else {
                String::new()
            };
            (
                raw_values([
                    ("ade", fit.ade),
                    ("aie", fit.aie),
                    ("total", fit.ade + fit.aie),
                    ("pse", pse),
                ]),
                format!("treatment={t}, control={c}, mediator={}{binarized}", mediator.name),
            )
        }
        other => {
            return Err(MetricError::ScenarioMismatch {
                metric: other,
                scenario: Scenario::CatNum,
            })
        }
    };
    Ok(MetricResult::new(
        metric,
        raw,
        n,
        format!("group={} outcome={}; {details}", group.name, outcome.name),
    ))
}

/// Stratum-size weighted average of treatment-control mean differences.
fn stratified_effect(paired: &Paired, covariate: &Column, t: &str, c: &str) -> Result<f64> {
    let strata_labels = covariate.labels();
    let mut strata: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (i, g, y) in paired.rows() {
        let Some(s) = strata_labels.get(i).cloned().flatten() else {
            continue;
        };
        let entry = strata.entry(s).or_default();
        if g == t {
            entry.0.push(y);
        } else if g == c {
            entry.1.push(y);
        }
    }
    let mut weighted = 0.0;
    let mut weight = 0.0;
    for (yt, yc) in strata.values() {
        if yt.is_empty() || yc.is_empty() {
            continue;
        }
        let w = (yt.len() + yc.len()) as f64;
        weighted += w * (stats::mean(yt) - stats::mean(yc));
        weight += w;
    }
    if weight == 0.0 {
        return Err(MetricError::NoCommonStrata);
    }
    Ok(weighted / weight)
}

struct Mediation {
    ade: f64,
    aie: f64,
    sd_y: f64,
}

/// Product-of-coefficients mediation with a binary treatment.
///
/// m = a0 + a1 t and y = b0 + b1 t + b2 m by least squares; ADE = b1 and
/// AIE = a1 b2. With a binary regressor, a1 is the difference in group means
/// of m and b2 follows from regressing y on the group-demeaned mediator.
fn mediation(paired: &Paired, mediator: &Column, t: &str, c: &str) -> Result<Mediation> {
    let ms = mediator.reals();
    let mut rows: Vec<(f64, f64, f64)> = Vec::new();
    for (i, g, y) in paired.rows() {
        let Some(m) = ms.get(i).copied().flatten() else {
            continue;
        };
        if g == t {
            rows.push((1.0, m, y));
        } else if g == c {
            rows.push((0.0, m, y));
        }
    }
    let split = |flag: f64| -> (Vec<f64>, Vec<f64>) { rows.iter().filter(|r| r.0 == flag).map(|r| (r.1, r.2)).unzip() };
    let (m1, y1) = split(1.0);
    let (m0, y0) = split(0.0);
    if m1.len() < 2 || m0.len() < 2 {
        let g = if m1.len() < 2 { t } else { c };
        return Err(MetricError::SingletonGroup(g.to_string()));
    }
    let (mean_m1, mean_m0) = (stats::mean(&m1), stats::mean(&m0));
    let a1 = mean_m1 - mean_m0;

    // Frisch-Waugh: partial out the treatment from both m and y.
    let (mean_y1, mean_y0) = (stats::mean(&y1), stats::mean(&y0));
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(flag, m, y) in &rows {
        let (mm, my) = if flag == 1.0 {
            (mean_m1, mean_y1)
        } else {
            (mean_m0, mean_y0)
        };
        let em = m - mm;
        sxx += em * em;
        sxy += em * (y - my);
    }
    let all_m: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let total_ss = stats::population_variance(&all_m) * all_m.len() as f64;
    if sxx <= 1e-12 * total_ss || sxx == 0.0 {
        return Err(MetricError::CollinearMediator);
    }
    let b2 = sxy / sxx;
    let b1 = (mean_y1 - mean_y0) - b2 * a1;

    let ys: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let sd_y = stats::population_sd(&ys);
    if !(sd_y > 0.0) {
        return Err(MetricError::ZeroVariance);
    }
    Ok(Mediation {
        ade: b1,
        aie: a1 * b2,
        sd_y,
    })
}
