use nalgebra::DMatrix;

use super::{raw_values, MetricError, MetricId, MetricOptions, MetricResult, Result, Scenario};
use crate::stats;
use crate::tabular::Column;

/// Binned metrics need this many paired rows (or `bins`, if larger).
const MIN_BINNED_SAMPLES: usize = 8;
/// Pairwise distances for the HSIC bandwidth use at most this many order
/// statistics of each variable.
const BANDWIDTH_SUBSAMPLE: usize = 1000;

fn paired(x: &Column, y: &Column) -> (Vec<f64>, Vec<f64>) {
    x.reals()
        .into_iter()
        .zip(y.reals())
        .filter_map(|(a, b)| Some((a?, b?)))
        .unzip()
}

pub(super) fn detect(x: &Column, y: &Column, metric: MetricId, opts: &MetricOptions) -> Result<MetricResult> {
    let (xs, ys) = paired(x, y);
    let n = xs.len();
    let need = match metric {
        MetricId::Nmi | MetricId::HgrApproximation => MIN_BINNED_SAMPLES.max(opts.bins),
        MetricId::Hsic => 4,
        _ => 2,
    };
    if n < need {
        return Err(MetricError::InsufficientSamples { needed: need, got: n });
    }
    let zx = stats::standardize(&xs).ok_or_else(|| MetricError::ConstantColumn(x.name.clone()));
    let zy = stats::standardize(&ys).ok_or_else(|| MetricError::ConstantColumn(y.name.clone()));

    let (raw, details) = match metric {
        MetricId::Pearson => {
            zx?;
            zy?;
            let r = stats::pearson(&xs, &ys);
            (raw_values([("r", r)]), "Pearson product-moment correlation".to_string())
        }
        MetricId::Nmi => {
            let bx = equal_frequency_bins(&xs, opts.bins);
            let by = equal_frequency_bins(&ys, opts.bins);
            let (nmi, mi) = normalized_mutual_information(&bx, &by, opts.bins);
            (
                raw_values([("nmi", nmi), ("mi", mi)]),
                format!("{} equal-frequency bins per variable", opts.bins),
            )
        }
        MetricId::HgrApproximation => {
            let (hgr, chi2) = hgr_estimate(&zx?, &zy?, opts.bins, opts.kde_grid);
            (
                raw_values([("hgr", hgr), ("chi2_divergence", chi2)]),
                format!("KDE on a {0}x{0} lattice, {1}x{1} bins", opts.kde_grid, opts.bins),
            )
        }
        MetricId::Wasserstein => {
            let mut a = zx?;
            let mut b = zy?;
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            let w2sq = a.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>() / n as f64;
            (
                raw_values([("w2", w2sq.sqrt())]),
                "W2 between standardized marginals".to_string(),
            )
        }
        MetricId::Hsic => {
            zx?;
            zy?;
            let sx = hsic_bandwidth(&xs);
            let sy = hsic_bandwidth(&ys);
            let (kl, kk, ll) = hsic_statistic(&xs, &ys, sx, sy);
            let denom = (n as f64 - 1.0).powi(2);
            let nhsic = if kk > 0.0 && ll > 0.0 {
                (kl / (kk * ll).sqrt()).clamp(0.0, 1.0)
            } else {
                0.0
            };
            (
                raw_values([("hsic", kl / denom), ("nhsic", nhsic), ("sigma_x", sx), ("sigma_y", sy)]),
                "RBF kernels, median-heuristic bandwidths".to_string(),
            )
        }
        other => {
            return Err(MetricError::ScenarioMismatch {
                metric: other,
                scenario: Scenario::NumNum,
            })
        }
    };
    Ok(MetricResult::new(
        metric,
        raw,
        n,
        format!("x={} y={}; {details}", x.name, y.name),
    ))
}

/// Equal-frequency bin index per value: `floor(bins * #{v' < v} / n)`.
/// Tied values always share a bin.
pub fn equal_frequency_bins(xs: &[f64], bins: usize) -> Vec<usize> {
    let sorted = stats::sorted(xs);
    let n = xs.len();
    xs.iter()
        .map(|v| {
            let less = sorted.partition_point(|s| s < v);
            ((bins * less) / n).min(bins - 1)
        })
        .collect()
}

fn entropy_of(counts: &[f64], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / n;
            -p * p.ln()
        })
        .sum()
}

fn normalized_mutual_information(bx: &[usize], by: &[usize], bins: usize) -> (f64, f64) {
    let n = bx.len() as f64;
    let mut joint = vec![vec![0.0; bins]; bins];
    let mut mx = vec![0.0; bins];
    let mut my = vec![0.0; bins];
    for (&a, &b) in bx.iter().zip(by) {
        joint[a][b] += 1.0;
        mx[a] += 1.0;
        my[b] += 1.0;
    }
    let hx = entropy_of(&mx, n);
    let hy = entropy_of(&my, n);
    let mut mi = 0.0;
    for a in 0..bins {
        for b in 0..bins {
            let c = joint[a][b];
            if c > 0.0 {
                mi += c / n * (c * n / (mx[a] * my[b])).ln();
            }
        }
    }
    let mi = mi.max(0.0);
    if hx <= 0.0 || hy <= 0.0 {
        return (0.0, mi);
    }
    ((mi / (hx * hy).sqrt()).clamp(0.0, 1.0), mi)
}

/// Quantile edges splitting `xs` into `bins` equal-frequency intervals.
fn quantile_edges(xs: &[f64], bins: usize) -> Vec<f64> {
    let sorted = stats::sorted(xs);
    (1..bins)
        .map(|j| stats::quantile_sorted(&sorted, j as f64 / bins as f64))
        .collect()
}

fn bin_of(v: f64, edges: &[f64]) -> usize {
    edges.iter().filter(|&&e| e < v).count()
}

/// Gaussian-kernel weights of every sample at every lattice point.
fn kde_weights(zs: &[f64], grid: usize, h: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let lo = zs.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * h;
    let hi = zs.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * h;
    let step = (hi - lo) / (grid - 1) as f64;
    let lattice: Vec<f64> = (0..grid).map(|j| lo + step * j as f64).collect();
    let weights = zs
        .iter()
        .map(|z| lattice.iter().map(|g| (-0.5 * ((g - z) / h).powi(2)).exp()).collect())
        .collect();
    (lattice, weights)
}

/// HGR maximal-correlation estimate and chi-squared divergence.
///
/// A product-Gaussian KDE of the standardized pair is evaluated on a
/// `grid x grid` lattice, the lattice mass is pooled into `bins x bins`
/// equal-frequency cells, and the HGR estimate is the second singular value
/// of Q_ab = p_ab / sqrt(p_a p_b).
fn hgr_estimate(zx: &[f64], zy: &[f64], bins: usize, grid: usize) -> (f64, f64) {
    let n = zx.len();
    // Scott's rule on unit-variance data.
    let h = (n as f64).powf(-0.2);
    let (gx, wx) = kde_weights(zx, grid, h);
    let (gy, wy) = kde_weights(zy, grid, h);

    let ex = quantile_edges(zx, bins);
    let ey = quantile_edges(zy, bins);
    let bx: Vec<usize> = gx.iter().map(|&g| bin_of(g, &ex)).collect();
    let by: Vec<usize> = gy.iter().map(|&g| bin_of(g, &ey)).collect();

    // Pool each sample's kernel mass per bin first; the joint is then a sum
    // of per-sample outer products.
    let mut joint = vec![vec![0.0; bins]; bins];
    let mut px = vec![0.0; bins];
    let mut py = vec![0.0; bins];
    for (rx, ry) in wx.iter().zip(&wy) {
        px.iter_mut().for_each(|v| *v = 0.0);
        py.iter_mut().for_each(|v| *v = 0.0);
        for (j, w) in rx.iter().enumerate() {
            px[bx[j]] += w;
        }
        for (l, w) in ry.iter().enumerate() {
            py[by[l]] += w;
        }
        for a in 0..bins {
            for b in 0..bins {
                joint[a][b] += px[a] * py[b];
            }
        }
    }
    let total: f64 = joint.iter().flatten().sum();
    let p: Vec<Vec<f64>> = joint.iter().map(|r| r.iter().map(|v| v / total).collect()).collect();
    let row_m: Vec<f64> = p.iter().map(|r| r.iter().sum()).collect();
    let col_m: Vec<f64> = (0..bins).map(|b| p.iter().map(|r| r[b]).sum()).collect();
    let rows: Vec<usize> = (0..bins).filter(|&a| row_m[a] > 0.0).collect();
    let cols: Vec<usize> = (0..bins).filter(|&b| col_m[b] > 0.0).collect();
    if rows.len() < 2 || cols.len() < 2 {
        return (0.0, 0.0);
    }
    let q = DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        let (a, b) = (rows[i], cols[j]);
        p[a][b] / (row_m[a] * col_m[b]).sqrt()
    });
    let chi2 = q.iter().map(|v| v * v).sum::<f64>() - 1.0;
    let mut sv: Vec<f64> = q.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    (sv[1].clamp(0.0, 1.0), chi2.max(0.0))
}

/// Median-heuristic RBF bandwidth: the median pairwise distance. Large inputs
/// use evenly spaced order statistics, which keeps the result independent of
/// row order.
pub fn hsic_bandwidth(xs: &[f64]) -> f64 {
    let sorted = stats::sorted(xs);
    let n = sorted.len();
    let sample: Vec<f64> = if n > BANDWIDTH_SUBSAMPLE {
        let m = BANDWIDTH_SUBSAMPLE;
        (0..m).map(|i| sorted[i * (n - 1) / (m - 1)]).collect()
    } else {
        sorted
    };
    let mut d = Vec::with_capacity(sample.len() * (sample.len() - 1) / 2);
    for i in 0..sample.len() {
        for j in (i + 1)..sample.len() {
            d.push(sample[j] - sample[i]);
        }
    }
    let med = stats::median(&d);
    if med > 0.0 {
        return med;
    }
    let positive: Vec<f64> = d.into_iter().filter(|v| *v > 0.0).collect();
    if positive.is_empty() {
        1.0
    } else {
        stats::median(&positive)
    }
}

/// Unnormalized centered traces `(tr(KHLH), tr(KHKH), tr(LHLH))` for RBF
/// kernels of width `sx`, `sy`. Computed in O(n) memory from row sums.
pub fn hsic_statistic(xs: &[f64], ys: &[f64], sx: f64, sy: f64) -> (f64, f64, f64) {
    let n = xs.len();
    let gx = -0.5 / (sx * sx);
    let gy = -0.5 / (sy * sy);
    let mut rk = vec![0.0; n];
    let mut rl = vec![0.0; n];
    let (mut kl, mut kk, mut ll) = (0.0, 0.0, 0.0);
    for i in 0..n {
        // Diagonal entries are exactly 1.
        rk[i] += 1.0;
        rl[i] += 1.0;
        kl += 1.0;
        kk += 1.0;
        ll += 1.0;
        let (xi, yi) = (xs[i], ys[i]);
        let mut row_k = 0.0;
        let mut row_l = 0.0;
        let (mut acc_kl, mut acc_kk, mut acc_ll) = (0.0, 0.0, 0.0);
        for j in (i + 1)..n {
            let k = (gx * (xi - xs[j]).powi(2)).exp();
            let l = (gy * (yi - ys[j]).powi(2)).exp();
            row_k += k;
            row_l += l;
            rk[j] += k;
            rl[j] += l;
            acc_kl += k * l;
            acc_kk += k * k;
            acc_ll += l * l;
        }
        rk[i] += row_k;
        rl[i] += row_l;
        kl += 2.0 * acc_kl;
        kk += 2.0 * acc_kk;
        ll += 2.0 * acc_ll;
    }
    let nf = n as f64;
    let sk: f64 = rk.iter().sum();
    let sl: f64 = rl.iter().sum();
    let cross = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let centered = |frob: f64, ra: &[f64], rb: &[f64], sa: f64, sb: f64| {
        (frob - 2.0 / nf * cross(ra, rb) + sa * sb / (nf * nf)).max(0.0)
    };
    (
        centered(kl, &rk, &rl, sk, sl),
        centered(kk, &rk, &rk, sk, sk),
        centered(ll, &rl, &rl, sl, sl),
    )
}
