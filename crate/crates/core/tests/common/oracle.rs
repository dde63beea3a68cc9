//! Reference implementations of the 25 metrics computed straight from their
//! definitions on plain vectors: explicit loops, explicit kernel and
//! centering matrices, normal equations solved by Cramer's rule, and a
//! Jacobi eigen-solver for the HGR singular value. Nothing here calls the
//! library's statistics helpers.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use biasaudit::metrics::{
    detect_cat_cat, detect_cat_dist, detect_cat_num, detect_num_dist, detect_num_num, Auxiliary, MetricError, MetricId,
    MetricOptions, MetricResult, Scenario,
};
use biasaudit::tabular::Column;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Raw = BTreeMap<&'static str, f64>;

pub const TOLERANCE: f64 = 1e-9;
const MAD_CONSISTENCY: f64 = 1.4826;

#[derive(Debug, Clone)]
pub enum Instance {
    CatDist(Vec<String>),
    NumDist(Vec<f64>),
    CatCat(Vec<String>, Vec<String>),
    CatNum {
        groups: Vec<String>,
        ys: Vec<f64>,
        mediator: Vec<f64>,
        covariate: Option<Vec<String>>,
    },
    NumNum(Vec<f64>, Vec<f64>),
}

const LABELS: [&str; 3] = ["a", "b", "c"];

fn labels(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<String> {
    (0..n).map(|_| LABELS[rng.gen_range(0..k)].to_string()).collect()
}

/// Quarter-step values so ties occur but columns are rarely constant.
fn grid_values(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| f64::from(rng.gen_range(-12i32..=12)) * 0.25).collect()
}

/// A random instance of `scenario` with at most 12 rows and 3 categories.
pub fn instance(scenario: Scenario, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match scenario {
        Scenario::CatDist => {
            let n = rng.gen_range(2..=12);
            let k = rng.gen_range(1..=3);
            Instance::CatDist(labels(&mut rng, n, k))
        }
        Scenario::NumDist => {
            let n = rng.gen_range(3..=12);
            let mut xs = grid_values(&mut rng, n);
            if rng.gen_bool(0.3) {
                xs[0] = f64::from(rng.gen_range(20..40));
            }
            Instance::NumDist(xs)
        }
        Scenario::CatCat => {
            let n = rng.gen_range(4..=12);
            let (r, c) = (rng.gen_range(2..=3), rng.gen_range(2..=3));
            let g = labels(&mut rng, n, r);
            let o = labels(&mut rng, n, c);
            Instance::CatCat(g, o)
        }
        Scenario::CatNum => {
            let n = rng.gen_range(5..=12);
            let k = rng.gen_range(2..=3);
            let groups = labels(&mut rng, n, k);
            let mediator: Vec<f64> = groups
                .iter()
                .map(|g| if g == "a" { 1.0 } else { 0.0 } + rng.gen_range(-1.0..1.0))
                .collect();
            let ys: Vec<f64> = mediator
                .iter()
                .map(|m| 0.5 * m + f64::from(rng.gen_range(-8i32..=8)) * 0.25)
                .collect();
            let covariate = (seed % 2 == 1).then(|| labels(&mut rng, n, 2));
            Instance::CatNum {
                groups,
                ys,
                mediator,
                covariate,
            }
        }
        Scenario::NumNum => {
            let n = rng.gen_range(10..=12);
            let xs = grid_values(&mut rng, n);
            let slope = rng.gen_range(-1.0..1.0);
            let ys = xs.iter().map(|x| slope * x + rng.gen_range(-1.0..1.0)).collect();
            Instance::NumNum(xs, ys)
        }
    }
}

/// The library's result on `inst`.
pub fn library(metric: MetricId, inst: &Instance, opts: &MetricOptions) -> Result<MetricResult, MetricError> {
    match inst {
        Instance::CatDist(l) => detect_cat_dist(&Column::categorical("x", l.clone()), metric, opts),
        Instance::NumDist(x) => detect_num_dist(&Column::numerical("x", x.iter().copied()), metric, opts),
        Instance::CatCat(g, o) => detect_cat_cat(
            &Column::categorical("g", g.clone()),
            &Column::categorical("o", o.clone()),
            metric,
            opts,
        ),
        Instance::CatNum {
            groups,
            ys,
            mediator,
            covariate,
        } => {
            let m = Column::numerical("m", mediator.iter().copied());
            let c = covariate.as_ref().map(|c| Column::categorical("c", c.clone()));
            let aux = Auxiliary {
                mediator: Some(&m),
                covariate: c.as_ref(),
            };
            detect_cat_num(
                &Column::categorical("g", groups.clone()),
                &Column::numerical("y", ys.iter().copied()),
                metric,
                opts,
                &aux,
            )
        }
        Instance::NumNum(x, y) => detect_num_num(
            &Column::numerical("x", x.iter().copied()),
            &Column::numerical("y", y.iter().copied()),
            metric,
            opts,
        ),
    }
}

/// Reference value of `metric` on `inst`; `None` when the metric's data
/// preconditions fail.
pub fn oracle(metric: MetricId, inst: &Instance, opts: &MetricOptions) -> Option<Raw> {
    match inst {
        Instance::CatDist(l) => cat_dist(metric, l),
        Instance::NumDist(x) => num_dist(metric, x, opts.z_cutoff),
        Instance::CatCat(g, o) => cat_cat(metric, g, o, opts.elift_min_support),
        Instance::CatNum {
            groups,
            ys,
            mediator,
            covariate,
        } => cat_num(metric, groups, ys, mediator, covariate.as_deref()),
        Instance::NumNum(x, y) => num_num(metric, x, y, opts),
    }
}

fn raw<const N: usize>(pairs: [(&'static str, f64); N]) -> Option<Raw> {
    Some(pairs.into_iter().collect())
}

fn close(a: f64, b: f64) -> bool {
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= TOLERANCE * a.abs().max(b.abs()).max(1.0)
}

/// Checks the library against the oracle: both fail, or every oracle key
/// matches. Returns whether a numeric comparison took place.
pub fn check(metric: MetricId, inst: &Instance, opts: &MetricOptions) -> Result<bool, String> {
    let lib = library(metric, inst, opts);
    let reference = oracle(metric, inst, opts);
    match (lib, reference) {
        (Err(e), None) if e.is_inapplicable() => Ok(false),
        (Err(e), None) => Err(format!("{metric}: unexpected error kind {e}")),
        (Err(e), Some(r)) => Err(format!(
            "{metric}: library failed ({e}) but reference gives {r:?} on {inst:?}"
        )),
        (Ok(res), None) => Err(format!(
            "{metric}: library gives {:?} but reference rejects {inst:?}",
            res.raw
        )),
        (Ok(res), Some(r)) => {
            for (k, v) in &r {
                let got = res.get(k).ok_or_else(|| format!("{metric}: missing key {k}"))?;
                if !close(got, *v) {
                    return Err(format!("{metric}.{k}: library {got} vs reference {v} on {inst:?}"));
                }
            }
            Ok(true)
        }
    }
}

#[derive(Debug, Default)]
pub struct SuiteOutcome {
    /// Numeric comparisons per metric.
    pub compared: BTreeMap<MetricId, usize>,
    pub mismatches: Vec<String>,
}

impl SuiteOutcome {
    pub fn min_compared(&self) -> usize {
        MetricId::ALL
            .iter()
            .map(|m| self.compared.get(m).copied().unwrap_or(0))
            .min()
            .unwrap_or(0)
    }
}

/// Compares every metric on random instances until each has `per_metric`
/// numeric comparisons or `max_tries` instances were drawn.
pub fn run_suite(per_metric: usize, max_tries: u64) -> SuiteOutcome {
    let opts = MetricOptions {
        elift_min_support: 1,
        ..MetricOptions::default()
    };
    let mut out = SuiteOutcome::default();
    for metric in MetricId::ALL {
        let mut compared = 0;
        for seed in 0..max_tries {
            if compared >= per_metric {
                break;
            }
            let inst = instance(metric.scenario(), seed * 31 + metric as u64);
            match check(metric, &inst, &opts) {
                Ok(true) => compared += 1,
                Ok(false) => {}
                Err(e) => out.mismatches.push(e),
            }
        }
        out.compared.insert(metric, compared);
    }
    out
}

fn counts_of<T: Ord + Clone>(xs: &[T]) -> BTreeMap<T, usize> {
    let mut m = BTreeMap::new();
    for x in xs {
        *m.entry(x.clone()).or_insert(0) += 1;
    }
    m
}

fn cat_dist(metric: MetricId, labels: &[String]) -> Option<Raw> {
    let counts: Vec<f64> = counts_of(labels).values().map(|&c| c as f64).collect();
    let n = labels.len() as f64;
    let k = counts.len() as f64;
    let entropy = -counts.iter().map(|c| (c / n) * (c / n).ln()).sum::<f64>();
    match metric {
        MetricId::ShannonBalance if k >= 2.0 => raw([("h", entropy), ("balance", (entropy / k.ln()).clamp(0.0, 1.0))]),
        MetricId::Entropy if k >= 2.0 => raw([("h", entropy), ("h_norm", (entropy / k.ln()).clamp(0.0, 1.0))]),
        MetricId::MaxMinRatio => {
            let max = counts.iter().cloned().fold(f64::MIN, f64::max);
            let min = counts.iter().cloned().fold(f64::MAX, f64::min);
            raw([("ratio", max / min)])
        }
        MetricId::Gini if k >= 2.0 => {
            let mut sq = 0.0;
            for c in &counts {
                let q = (c + 1.0) / (n + k);
                sq += q * q;
            }
            let g = 1.0 - sq;
            raw([("g", g), ("g_norm", (g * k / (k - 1.0)).clamp(0.0, 1.0))])
        }
        MetricId::RelativeRisk => {
            let rr: Vec<f64> = counts.iter().map(|c| (c / n) / (1.0 / k)).collect();
            raw([
                (
                    "max_rr_deviation",
                    rr.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max),
                ),
                ("rr_min", rr.iter().cloned().fold(f64::MAX, f64::min)),
                ("rr_max", rr.iter().cloned().fold(f64::MIN, f64::max)),
            ])
        }
        _ => None,
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Linear interpolation between order statistics at position (n-1)p.
fn quantile(xs: &[f64], p: f64) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let pos = (s.len() - 1) as f64 * p;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < s.len() {
        s[i] * (1.0 - frac) + s[i + 1] * frac
    } else {
        s[i]
    }
}

fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

fn moment(xs: &[f64], j: i32) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(j)).sum::<f64>() / xs.len() as f64
}

fn pop_sd(xs: &[f64]) -> f64 {
    moment(xs, 2).sqrt()
}

fn num_dist(metric: MetricId, xs: &[f64], z_cutoff: f64) -> Option<Raw> {
    let m2 = moment(xs, 2);
    let constant = m2 <= 0.0;
    let med = median(xs);
    let mad = median(&xs.iter().map(|x| (x - med).abs()).collect::<Vec<_>>());
    match metric {
        MetricId::Skewness if !constant => raw([("skewness", moment(xs, 3) / m2 / m2.sqrt())]),
        MetricId::Kurtosis if !constant => raw([("excess_kurtosis", moment(xs, 4) / (m2 * m2) - 3.0)]),
        MetricId::Outlier if !constant => {
            let (mu, sd) = (mean(xs), m2.sqrt());
            let count = xs.iter().filter(|x| ((**x - mu) / sd).abs() > z_cutoff).count() as f64;
            raw([("outlier_fraction", count / xs.len() as f64), ("outlier_count", count)])
        }
        MetricId::CohensDMad if !constant && mad > 0.0 => {
            let mu = mean(xs);
            raw([
                ("d", (mu - med) / (MAD_CONSISTENCY * mad)),
                ("mean", mu),
                ("median", med),
                ("mad", mad),
            ])
        }
        MetricId::QuantileDeviation => {
            let (q1, q2, q3) = (quantile(xs, 0.25), med, quantile(xs, 0.75));
            if q3 <= q1 {
                return None;
            }
            let qd = (q3 - q2) / (q3 - q1);
            raw([("qd", qd), ("deviation", (qd - 0.5).abs())])
        }
        _ => None,
    }
}

fn cat_cat(metric: MetricId, g: &[String], o: &[String], min_support: u64) -> Option<Raw> {
    let n = g.len() as f64;
    let groups: Vec<&String> = g.iter().collect::<BTreeSet<_>>().into_iter().collect();
    let outcomes: Vec<&String> = o.iter().collect::<BTreeSet<_>>().into_iter().collect();
    if groups.len() < 2 || outcomes.len() < 2 {
        return None;
    }
    let count = |gi: &str, oj: &str| g.iter().zip(o).filter(|(a, b)| *a == gi && *b == oj).count() as f64;
    let n_g = |gi: &str| g.iter().filter(|a| *a == gi).count() as f64;
    let n_o = |oj: &str| o.iter().filter(|b| *b == oj).count() as f64;
    let cond = |gi: &str| -> Vec<f64> { outcomes.iter().map(|oj| count(gi, oj) / n_g(gi)).collect() };
    let marginal: Vec<f64> = outcomes.iter().map(|oj| n_o(oj) / n).collect();
    let tvd = |p: &[f64], q: &[f64]| 0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>();
    match metric {
        MetricId::CramersV => {
            let mut chi2 = 0.0;
            for gi in &groups {
                for oj in &outcomes {
                    let e = n_g(gi) * n_o(oj) / n;
                    chi2 += (count(gi, oj) - e).powi(2) / e;
                }
            }
            let dof = (groups.len().min(outcomes.len()) - 1) as f64;
            raw([("chi2", chi2), ("v", (chi2 / (n * dof)).sqrt().min(1.0))])
        }
        MetricId::Elift => {
            let (mut sym, mut max_e, mut considered) = (1.0f64, 0.0f64, 0.0);
            for gi in &groups {
                for oj in &outcomes {
                    let c = count(gi, oj);
                    if c >= min_support as f64 {
                        let e = (c / n_g(gi)) / (n_o(oj) / n);
                        sym = sym.max(e).max(1.0 / e);
                        max_e = max_e.max(e);
                        considered += 1.0;
                    }
                }
            }
            raw([("elift", sym), ("max_elift", max_e), ("cells_considered", considered)])
        }
        MetricId::StatisticalParity => {
            let (mut delta, mut z) = (0.0f64, 0.0f64);
            for oj in &outcomes {
                for (i, gi) in groups.iter().enumerate() {
                    for gh in &groups[i + 1..] {
                        let (a, b) = (count(gi, oj), count(gh, oj));
                        let (na, nb) = (n_g(gi), n_g(gh));
                        let d = (a / na - b / nb).abs();
                        let p = (a + b) / (na + nb);
                        let se = (p * (1.0 - p) * (1.0 / na + 1.0 / nb)).sqrt();
                        delta = delta.max(d);
                        if se > 0.0 {
                            z = z.max(d / se);
                        }
                    }
                }
            }
            raw([("delta", delta), ("z", z)])
        }
        MetricId::Lipschitz => {
            let mut l = 0.0f64;
            for (i, gi) in groups.iter().enumerate() {
                for gh in &groups[i + 1..] {
                    l = l.max(tvd(&cond(gi), &cond(gh)));
                }
            }
            raw([("lipschitz", l)])
        }
        MetricId::TotalVariation => {
            let t = groups.iter().map(|gi| tvd(&cond(gi), &marginal)).fold(0.0, f64::max);
            raw([("tvd", t)])
        }
        _ => None,
    }
}

fn sample_var(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Least squares y ~ 1 + t + m by Cramer's rule on the normal equations.
fn ols3(t: &[f64], m: &[f64], y: &[f64]) -> [f64; 3] {
    let cols = [vec![1.0; t.len()], t.to_vec(), m.to_vec()];
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let mut a = [[0.0; 3]; 3];
    let mut rhs = [0.0; 3];
    for i in 0..3 {
        for j in 0..3 {
            a[i][j] = dot(&cols[i], &cols[j]);
        }
        rhs[i] = dot(&cols[i], y);
    }
    let d = det3(a);
    let mut beta = [0.0; 3];
    for (k, b) in beta.iter_mut().enumerate() {
        let mut ak = a;
        for i in 0..3 {
            ak[i][k] = rhs[i];
        }
        *b = det3(ak) / d;
    }
    beta
}

fn cat_num(
    metric: MetricId,
    groups: &[String],
    ys: &[f64],
    mediator: &[f64],
    covariate: Option<&[String]>,
) -> Option<Raw> {
    let mut by: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (g, y) in groups.iter().zip(ys) {
        by.entry(g.as_str()).or_default().push(*y);
    }
    if by.len() < 2 {
        return None;
    }
    let sd_y = pop_sd(ys);
    let labels: Vec<&str> = by.keys().copied().collect();
    // Candidate treatment/control pairs: the two largest groups, with every
    // pair that qualifies under size ties; the strongest effect wins.
    let mut sizes: Vec<usize> = by.values().map(Vec::len).collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    let top: Vec<&str> = labels.iter().copied().filter(|g| by[g].len() == sizes[0]).collect();
    let candidates: Vec<(&str, &str)> = if top.len() >= 2 {
        top.iter()
            .enumerate()
            .flat_map(|(i, t)| top[i + 1..].iter().map(move |c| (*t, *c)))
            .collect()
    } else {
        labels
            .iter()
            .filter(|g| by[*g].len() == sizes[1])
            .map(|c| (top[0], *c))
            .collect()
    };
    let strongest = |eval: &dyn Fn(&str, &str) -> Option<Raw>, key: &str| -> Option<Raw> {
        candidates
            .iter()
            .filter_map(|(t, c)| eval(t, c))
            .fold(None, |best: Option<Raw>, r| match best {
                Some(b) if b[key] >= r[key] => Some(b),
                _ => Some(r),
            })
    };
    match metric {
        MetricId::MaxAbsMean if sd_y > 0.0 => {
            let mu = mean(ys);
            raw([(
                "n_value",
                labels
                    .iter()
                    .map(|g| ((mean(&by[g]) - mu) / sd_y).abs())
                    .fold(0.0, f64::max),
            )])
        }
        MetricId::CohensD => {
            if by.values().any(|v| v.len() < 2) {
                return None;
            }
            let mut best = 0.0f64;
            for (i, g) in labels.iter().enumerate() {
                for h in &labels[i + 1..] {
                    let (a, b) = (&by[g], &by[h]);
                    let (na, nb) = (a.len() as f64, b.len() as f64);
                    let pooled = (((na - 1.0) * sample_var(a) + (nb - 1.0) * sample_var(b)) / (na + nb - 2.0)).sqrt();
                    if pooled <= 0.0 {
                        return None;
                    }
                    best = best.max(((mean(a) - mean(b)) / pooled).abs());
                }
            }
            raw([("d", best)])
        }
        MetricId::StandardizedDifference => {
            let med = median(ys);
            let mad = median(&ys.iter().map(|y| (y - med).abs()).collect::<Vec<_>>());
            if mad <= 0.0 {
                return None;
            }
            let mut best = 0.0f64;
            for (i, g) in labels.iter().enumerate() {
                for h in &labels[i + 1..] {
                    best = best.max((mean(&by[g]) - mean(&by[h])).abs() / (MAD_CONSISTENCY * mad));
                }
            }
            raw([("sd", best), ("mad", mad)])
        }
        MetricId::CausalEffect if sd_y > 0.0 => {
            let eval = |t: &str, c: &str| -> Option<Raw> {
                let ace = match covariate {
                    None => mean(&by[t]) - mean(&by[c]),
                    Some(cov) => {
                        let strata: BTreeSet<&String> = cov.iter().collect();
                        let (mut num, mut den) = (0.0, 0.0);
                        for s in strata {
                            let pick = |label: &str| -> Vec<f64> {
                                (0..ys.len())
                                    .filter(|&i| &cov[i] == s && groups[i] == label)
                                    .map(|i| ys[i])
                                    .collect()
                            };
                            let (yt, yc) = (pick(t), pick(c));
                            if !yt.is_empty() && !yc.is_empty() {
                                let w = (yt.len() + yc.len()) as f64;
                                num += w * (mean(&yt) - mean(&yc));
                                den += w;
                            }
                        }
                        if den == 0.0 {
                            return None;
                        }
                        num / den
                    }
                };
                raw([("ace", ace), ("ace_std", ace.abs() / sd_y)])
            };
            strongest(&eval, "ace_std")
        }
        MetricId::Pse => {
            let eval = |t: &str, c: &str| -> Option<Raw> {
                let rows: Vec<usize> = (0..ys.len()).filter(|&i| groups[i] == t || groups[i] == c).collect();
                let tv: Vec<f64> = rows.iter().map(|&i| if groups[i] == t { 1.0 } else { 0.0 }).collect();
                let mv: Vec<f64> = rows.iter().map(|&i| mediator[i]).collect();
                let yv: Vec<f64> = rows.iter().map(|&i| ys[i]).collect();
                let treated = tv.iter().filter(|&&x| x == 1.0).count();
                if treated < 2 || rows.len() - treated < 2 {
                    return None;
                }
                // Collinearity: the mediator has no variation left within groups.
                let within: f64 = [1.0, 0.0]
                    .iter()
                    .map(|&f| {
                        let ms: Vec<f64> = mv.iter().zip(&tv).filter(|(_, &x)| x == f).map(|(m, _)| *m).collect();
                        let mu = mean(&ms);
                        ms.iter().map(|m| (m - mu).powi(2)).sum::<f64>()
                    })
                    .sum();
                let total = mv.len() as f64 * moment(&mv, 2);
                if within == 0.0 || within <= 1e-12 * total {
                    return None;
                }
                let sd = pop_sd(&yv);
                if sd <= 0.0 {
                    return None;
                }
                let [_, b1, b2] = ols3(&tv, &mv, &yv);
                let mean_where = |v: &[f64], f: f64| {
                    let sel: Vec<f64> = v.iter().zip(&tv).filter(|(_, &x)| x == f).map(|(a, _)| *a).collect();
                    mean(&sel)
                };
                let a1 = mean_where(&mv, 1.0) - mean_where(&mv, 0.0);
                let (ade, aie) = (b1, a1 * b2);
                raw([
                    ("ade", ade),
                    ("aie", aie),
                    ("total", ade + aie),
                    ("pse", ade.abs().max(aie.abs()) / sd),
                ])
            };
            strongest(&eval, "pse")
        }
        _ => None,
    }
}

fn standardized(xs: &[f64]) -> Option<Vec<f64>> {
    let (mu, sd) = (mean(xs), pop_sd(xs));
    (sd > 0.0).then(|| xs.iter().map(|x| (x - mu) / sd).collect())
}

fn bin_index(xs: &[f64], bins: usize) -> Vec<usize> {
    let n = xs.len();
    xs.iter()
        .map(|v| {
            let below = xs.iter().filter(|w| *w < v).count();
            ((bins * below) / n).min(bins - 1)
        })
        .collect()
}

fn plug_in_entropy(counts: &BTreeMap<usize, usize>, n: f64) -> f64 {
    -counts.values().map(|&c| c as f64 / n).map(|p| p * p.ln()).sum::<f64>()
}

fn median_pairwise_distance(xs: &[f64]) -> f64 {
    let mut d = Vec::new();
    for i in 0..xs.len() {
        for j in (i + 1)..xs.len() {
            d.push((xs[i] - xs[j]).abs());
        }
    }
    let med = median(&d);
    if med > 0.0 {
        return med;
    }
    let pos: Vec<f64> = d.into_iter().filter(|v| *v > 0.0).collect();
    if pos.is_empty() {
        1.0
    } else {
        median(&pos)
    }
}

type Matrix = Vec<Vec<f64>>;

fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let (n, m, p) = (a.len(), b.len(), b[0].len());
    (0..n)
        .map(|i| (0..p).map(|j| (0..m).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

fn trace(a: &Matrix) -> f64 {
    (0..a.len()).map(|i| a[i][i]).sum()
}

fn rbf_gram(xs: &[f64], sigma: f64) -> Matrix {
    xs.iter()
        .map(|a| {
            xs.iter()
                .map(|b| (-(a - b).powi(2) / (2.0 * sigma * sigma)).exp())
                .collect()
        })
        .collect()
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
#[allow(clippy::needless_range_loop)]
fn symmetric_eigenvalues(mut a: Matrix) -> Vec<f64> {
    let n = a.len();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

fn hgr(zx: &[f64], zy: &[f64], bins: usize, grid: usize) -> (f64, f64) {
    let n = zx.len() as f64;
    let h = n.powf(-0.2);
    let lattice = |z: &[f64]| -> Vec<f64> {
        let lo = z.iter().cloned().fold(f64::MAX, f64::min) - 3.0 * h;
        let hi = z.iter().cloned().fold(f64::MIN, f64::max) + 3.0 * h;
        (0..grid)
            .map(|j| lo + (hi - lo) * j as f64 / (grid - 1) as f64)
            .collect()
    };
    let (gx, gy) = (lattice(zx), lattice(zy));
    let edges = |z: &[f64]| -> Vec<f64> { (1..bins).map(|j| quantile(z, j as f64 / bins as f64)).collect() };
    let (ex, ey) = (edges(zx), edges(zy));
    let bin = |v: f64, e: &[f64]| e.iter().filter(|&&x| x < v).count();
    let mut p = vec![vec![0.0; bins]; bins];
    for &u in &gx {
        for &v in &gy {
            let density: f64 = zx
                .iter()
                .zip(zy)
                .map(|(a, b)| (-0.5 * ((u - a) / h).powi(2)).exp() * (-0.5 * ((v - b) / h).powi(2)).exp())
                .sum();
            p[bin(u, &ex)][bin(v, &ey)] += density;
        }
    }
    let total: f64 = p.iter().flatten().sum();
    p.iter_mut().flatten().for_each(|v| *v /= total);
    let row: Vec<f64> = p.iter().map(|r| r.iter().sum()).collect();
    let col: Vec<f64> = (0..bins).map(|b| p.iter().map(|r| r[b]).sum()).collect();
    let ri: Vec<usize> = (0..bins).filter(|&a| row[a] > 0.0).collect();
    let ci: Vec<usize> = (0..bins).filter(|&b| col[b] > 0.0).collect();
    if ri.len() < 2 || ci.len() < 2 {
        return (0.0, 0.0);
    }
    let q: Matrix = ri
        .iter()
        .map(|&a| ci.iter().map(|&b| p[a][b] / (row[a] * col[b]).sqrt()).collect())
        .collect();
    let chi2 = q.iter().flatten().map(|v| v * v).sum::<f64>() - 1.0;
    let qt: Matrix = (0..ci.len())
        .map(|j| (0..ri.len()).map(|i| q[i][j]).collect())
        .collect();
    let ev = symmetric_eigenvalues(matmul(&qt, &q));
    (ev[1].max(0.0).sqrt().min(1.0), chi2.max(0.0))
}

fn num_num(metric: MetricId, xs: &[f64], ys: &[f64], opts: &MetricOptions) -> Option<Raw> {
    let n = xs.len();
    let (zx, zy) = (standardized(xs), standardized(ys));
    match metric {
        MetricId::Pearson => {
            let (zx, zy) = (zx?, zy?);
            raw([(
                "r",
                (zx.iter().zip(&zy).map(|(a, b)| a * b).sum::<f64>() / n as f64).clamp(-1.0, 1.0),
            )])
        }
        MetricId::Nmi => {
            if n < opts.bins.max(8) {
                return None;
            }
            let (bx, by) = (bin_index(xs, opts.bins), bin_index(ys, opts.bins));
            let nf = n as f64;
            let joint = counts_of(&bx.iter().zip(&by).map(|(a, b)| (*a, *b)).collect::<Vec<_>>());
            let (cx, cy) = (counts_of(&bx), counts_of(&by));
            let mi: f64 = joint
                .iter()
                .map(|((a, b), &c)| {
                    let pab = c as f64 / nf;
                    pab * (pab / ((cx[a] as f64 / nf) * (cy[b] as f64 / nf))).ln()
                })
                .sum::<f64>()
                .max(0.0);
            let (hx, hy) = (plug_in_entropy(&cx, nf), plug_in_entropy(&cy, nf));
            let nmi = if hx > 0.0 && hy > 0.0 {
                (mi / (hx * hy).sqrt()).min(1.0)
            } else {
                0.0
            };
            raw([("nmi", nmi), ("mi", mi)])
        }
        MetricId::HgrApproximation => {
            if n < opts.bins.max(8) {
                return None;
            }
            let (h, chi2) = hgr(&zx?, &zy?, opts.bins, opts.kde_grid);
            raw([("hgr", h), ("chi2_divergence", chi2)])
        }
        MetricId::Wasserstein => {
            let (mut a, mut b) = (zx?, zy?);
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            raw([(
                "w2",
                (a.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>() / n as f64).sqrt(),
            )])
        }
        MetricId::Hsic => {
            if n < 4 || zx.is_none() || zy.is_none() {
                return None;
            }
            let (sx, sy) = (median_pairwise_distance(xs), median_pairwise_distance(ys));
            let (k, l) = (rbf_gram(xs, sx), rbf_gram(ys, sy));
            let h: Matrix = (0..n)
                .map(|i| (0..n).map(|j| f64::from(u8::from(i == j)) - 1.0 / n as f64).collect())
                .collect();
            let (kh, lh) = (matmul(&k, &h), matmul(&l, &h));
            let kl = trace(&matmul(&kh, &lh)).max(0.0);
            let kk = trace(&matmul(&kh, &kh)).max(0.0);
            let ll = trace(&matmul(&lh, &lh)).max(0.0);
            let nhsic = if kk > 0.0 && ll > 0.0 {
                (kl / (kk * ll).sqrt()).min(1.0)
            } else {
                0.0
            };
            raw([
                ("hsic", kl / ((n - 1) as f64).powi(2)),
                ("nhsic", nhsic),
                ("sigma_x", sx),
                ("sigma_y", sy),
            ])
        }
        _ => None,
    }
}

/// Rows shuffled by `rng`.
pub fn permuted(inst: &Instance, rng: &mut ChaCha8Rng) -> Instance {
    use rand::seq::SliceRandom;
    let n = match inst {
        Instance::CatDist(l) => l.len(),
        Instance::NumDist(x) | Instance::NumNum(x, _) => x.len(),
        Instance::CatCat(g, _) => g.len(),
        Instance::CatNum { ys, .. } => ys.len(),
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let pick = |v: &[f64]| -> Vec<f64> { order.iter().map(|&i| v[i]).collect() };
    let pick_s = |v: &[String]| -> Vec<String> { order.iter().map(|&i| v[i].clone()).collect() };
    match inst {
        Instance::CatDist(l) => Instance::CatDist(pick_s(l)),
        Instance::NumDist(x) => Instance::NumDist(pick(x)),
        Instance::CatCat(g, o) => Instance::CatCat(pick_s(g), pick_s(o)),
        Instance::CatNum {
            groups,
            ys,
            mediator,
            covariate,
        } => Instance::CatNum {
            groups: pick_s(groups),
            ys: pick(ys),
            mediator: pick(mediator),
            covariate: covariate.as_deref().map(pick_s),
        },
        Instance::NumNum(x, y) => Instance::NumNum(pick(x), pick(y)),
    }
}

/// Category labels renamed by an order-reversing bijection.
pub fn relabelled(inst: &Instance) -> Instance {
    let rename = |v: &[String]| -> Vec<String> { v.iter().map(|s| format!("z{}", 255 - s.as_bytes()[0])).collect() };
    match inst {
        Instance::CatDist(l) => Instance::CatDist(rename(l)),
        Instance::CatCat(g, o) => Instance::CatCat(rename(g), rename(o)),
        Instance::CatNum {
            groups,
            ys,
            mediator,
            covariate,
        } => Instance::CatNum {
            groups: rename(groups),
            ys: ys.clone(),
            mediator: mediator.clone(),
            covariate: covariate.as_deref().map(rename),
        },
        other => other.clone(),
    }
}

/// Numerical values mapped through `v -> scale * v + shift` with a positive
/// scale; the second column of a pair gets its own transform.
pub fn affine(inst: &Instance, scale: f64, shift: f64) -> Instance {
    let map = |v: &[f64], a: f64, b: f64| -> Vec<f64> { v.iter().map(|x| a * x + b).collect() };
    match inst {
        Instance::NumDist(x) => Instance::NumDist(map(x, scale, shift)),
        Instance::CatNum {
            groups,
            ys,
            mediator,
            covariate,
        } => Instance::CatNum {
            groups: groups.clone(),
            ys: map(ys, scale, shift),
            mediator: mediator.clone(),
            covariate: covariate.clone(),
        },
        Instance::NumNum(x, y) => Instance::NumNum(map(x, scale, shift), map(y, 1.0 / scale, -shift)),
        other => other.clone(),
    }
}

fn same_outcome(metric: MetricId, a: &Instance, b: &Instance, opts: &MetricOptions) -> Result<(), String> {
    match (library(metric, a, opts), library(metric, b, opts)) {
        (Err(_), Err(_)) => Ok(()),
        (Ok(x), Ok(y)) => {
            let (p, q) = (x.primary_value(), y.primary_value());
            if (p - q).abs() <= 1e-8 * p.abs().max(q.abs()).max(1.0) || p == q {
                Ok(())
            } else {
                Err(format!("{metric}: {p} vs {q}"))
            }
        }
        (x, y) => Err(format!("{metric}: {:?} vs {:?}", x.map(|r| r.raw), y.map(|r| r.raw))),
    }
}

/// Checks one random instance of `metric` against permutation, relabelling
/// and positive affine rescaling. Returns the first violation.
pub fn invariance_trial(metric: MetricId, seed: u64, scale: f64, shift: f64) -> Result<(), String> {
    let opts = MetricOptions {
        elift_min_support: 1,
        ..MetricOptions::default()
    };
    let inst = instance(metric.scenario(), seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    same_outcome(metric, &inst, &permuted(&inst, &mut rng), &opts).map_err(|e| format!("permutation {e}"))?;
    same_outcome(metric, &inst, &relabelled(&inst), &opts).map_err(|e| format!("relabel {e}"))?;
    same_outcome(metric, &inst, &affine(&inst, scale, shift), &opts).map_err(|e| format!("affine {e}"))
}
