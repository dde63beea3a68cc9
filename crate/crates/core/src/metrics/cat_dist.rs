use super::{raw_values, MetricError, MetricId, MetricResult, RawValues, Result};
use crate::tabular::{category_counts, Column};

fn shannon(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * p.ln()
        })
        .sum()
}

/// Evaluates a categorical-distribution metric from category counts.
///
/// Counts may include declared categories with zero observations; those make
/// the max/min ratio infinite.
pub fn evaluate_counts(metric: MetricId, counts: &[u64]) -> Result<(RawValues, String)> {
    let k = counts.len();
    let n: u64 = counts.iter().sum();
    if n == 0 || k == 0 {
        return Err(MetricError::SingleCategory(0));
    }
    let nf = n as f64;
    let kf = k as f64;
    let needs_two = matches!(metric, MetricId::ShannonBalance | MetricId::Entropy | MetricId::Gini);
    if needs_two && k < 2 {
        return Err(MetricError::SingleCategory(k));
    }
    Ok(match metric {
        MetricId::ShannonBalance => {
            let h = shannon(counts);
            let balance = (h / kf.ln()).clamp(0.0, 1.0);
            (
                raw_values([("h", h), ("balance", balance)]),
                format!("k={k}, H={h:.6} nats"),
            )
        }
        MetricId::Entropy => {
            let h = shannon(counts);
            let h_norm = (h / kf.ln()).clamp(0.0, 1.0);
            (raw_values([("h", h), ("h_norm", h_norm)]), format!("k={k}"))
        }
        MetricId::MaxMinRatio => {
            let max = *counts.iter().max().unwrap();
            let min = *counts.iter().min().unwrap();
            let ratio = if min == 0 {
                f64::INFINITY
            } else {
                max as f64 / min as f64
            };
            let note = if min == 0 {
                "a category has zero count; ratio is unbounded".to_string()
            } else {
                format!("max count {max}, min count {min}")
            };
            (raw_values([("ratio", ratio)]), note)
        }
        MetricId::Gini => {
            // Laplace smoothing: q_i = (c_i + 1) / (n + k).
            let sum_sq: f64 = counts.iter().map(|&c| ((c as f64 + 1.0) / (nf + kf)).powi(2)).sum();
            let g = 1.0 - sum_sq;
            let g_norm = (g / (1.0 - 1.0 / kf)).clamp(0.0, 1.0);
            (raw_values([("g", g), ("g_norm", g_norm)]), format!("k={k}, n={n}"))
        }
        MetricId::RelativeRisk => {
            let rr: Vec<f64> = counts.iter().map(|&c| c as f64 / nf * kf).collect();
            let dev = rr.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max);
            let rr_min = rr.iter().copied().fold(f64::INFINITY, f64::min);
            let rr_max = rr.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (
                raw_values([("max_rr_deviation", dev), ("rr_min", rr_min), ("rr_max", rr_max)]),
                format!("expected share 1/{k} per category"),
            )
        }
        other => {
            return Err(MetricError::ScenarioMismatch {
                metric: other,
                scenario: super::Scenario::CatDist,
            })
        }
    })
}

pub(super) fn detect(col: &Column, metric: MetricId) -> Result<MetricResult> {
    let counts = category_counts(col);
    let values: Vec<u64> = counts.iter().map(|(_, c)| *c).collect();
    let n = values.iter().sum::<u64>() as usize;
    let (raw, details) = evaluate_counts(metric, &values)?;
    Ok(MetricResult::new(
        metric,
        raw,
        n,
        format!("column={}; {details}", col.name),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn eval(m: MetricId, c: &[u64]) -> RawValues {
        evaluate_counts(m, c).unwrap().0
    }

    #[test]
    fn uniform_is_perfectly_balanced() {
        let r = eval(MetricId::ShannonBalance, &[25, 25, 25, 25]);
        assert_relative_eq!(r["balance"], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn entropy_ninety_ten() {
        let r = eval(MetricId::Entropy, &[90, 10]);
        let h = -(0.9f64 * 0.9f64.ln() + 0.1 * 0.1f64.ln());
        assert_relative_eq!(r["h"], h, epsilon = 1e-12);
        assert!((r["h"] - 0.3251).abs() < 1e-4);
        assert!((r["h_norm"] - 0.4690).abs() < 1e-4);
    }

    #[test]
    fn max_min_ratio_cases() {
        assert_eq!(eval(MetricId::MaxMinRatio, &[200, 2])["ratio"], 100.0);
        assert_eq!(eval(MetricId::MaxMinRatio, &[5, 0, 3])["ratio"], f64::INFINITY);
        // A single category is perfectly "balanced" against itself.
        assert_eq!(eval(MetricId::MaxMinRatio, &[7])["ratio"], 1.0);
    }

    #[test]
    fn gini_laplace() {
        let r = eval(MetricId::Gini, &[75, 25]);
        // q = (76/102, 26/102); G = 1 - 6452/10404.
        let g = 1.0 - 6452.0 / 10404.0;
        assert_relative_eq!(r["g"], g, epsilon = 1e-12);
        assert!((r["g"] - 0.3798).abs() < 1e-4);
        assert_relative_eq!(r["g_norm"], 2.0 * g, epsilon = 1e-12);
    }

    #[test]
    fn relative_risk_sixty_forty() {
        let r = eval(MetricId::RelativeRisk, &[60, 40]);
        assert_relative_eq!(r["rr_max"], 1.2, epsilon = 1e-12);
        assert_relative_eq!(r["rr_min"], 0.8, epsilon = 1e-12);
        assert_relative_eq!(r["max_rr_deviation"], 0.2, epsilon = 1e-12);
    }

    #[test]
    fn single_category_rejected_for_normalized() {
        for m in [MetricId::ShannonBalance, MetricId::Entropy, MetricId::Gini] {
            assert!(matches!(evaluate_counts(m, &[10]), Err(MetricError::SingleCategory(1))));
        }
    }
}
