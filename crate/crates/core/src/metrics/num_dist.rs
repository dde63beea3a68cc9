use super::{raw_values, MetricError, MetricId, MetricOptions, MetricResult, Result, Scenario};
use crate::stats::{self, MAD_SCALE};
use crate::tabular::Column;

const MIN_SAMPLES: usize = 3;

pub(super) fn detect(col: &Column, metric: MetricId, opts: &MetricOptions) -> Result<MetricResult> {
    let xs: Vec<f64> = col.reals().into_iter().flatten().collect();
    let n = xs.len();
    if n < MIN_SAMPLES {
        return Err(MetricError::InsufficientSamples {
            needed: MIN_SAMPLES,
            got: n,
        });
    }
    let constant = || MetricError::ConstantColumn(col.name.clone());
    let m2 = stats::central_moment(&xs, 2);

    let (raw, details) = match metric {
        MetricId::Skewness => {
            if !(m2 > 0.0) {
                return Err(constant());
            }
            let g1 = stats::central_moment(&xs, 3) / m2.powf(1.5);
            (raw_values([("skewness", g1)]), "moment skewness m3/m2^1.5".to_string())
        }
        MetricId::Kurtosis => {
            if !(m2 > 0.0) {
                return Err(constant());
            }
            let g2 = stats::central_moment(&xs, 4) / (m2 * m2) - 3.0;
            (
                raw_values([("excess_kurtosis", g2)]),
                "excess kurtosis m4/m2^2 - 3".to_string(),
            )
        }
        MetricId::Outlier => {
            let sd = m2.sqrt();
            if !(sd > 0.0) {
                return Err(constant());
            }
            let mean = stats::mean(&xs);
            let count = xs.iter().filter(|x| ((*x - mean) / sd).abs() > opts.z_cutoff).count();
            (
                raw_values([
                    ("outlier_fraction", count as f64 / n as f64),
                    ("outlier_count", count as f64),
                ]),
                format!("|z| > {}", opts.z_cutoff),
            )
        }
        MetricId::CohensDMad => {
            if !(m2 > 0.0) {
                return Err(constant());
            }
            let mad = stats::mad(&xs);
            if !(mad > 0.0) {
                return Err(MetricError::DegenerateMad);
            }
            let mean = stats::mean(&xs);
            let median = stats::median(&xs);
            let d = (mean - median) / (MAD_SCALE * mad);
            (
                raw_values([("d", d), ("mean", mean), ("median", median), ("mad", mad)]),
                "(mean - median) / (1.4826 * MAD)".to_string(),
            )
        }
        MetricId::QuantileDeviation => {
            let sorted = stats::sorted(&xs);
            let q1 = stats::quantile_sorted(&sorted, 0.25);
            let q2 = stats::quantile_sorted(&sorted, 0.5);
            let q3 = stats::quantile_sorted(&sorted, 0.75);
            if !(q3 > q1) {
                return Err(MetricError::DegenerateIqr);
            }
            let qd = (q3 - q2) / (q3 - q1);
            (
                raw_values([("qd", qd), ("deviation", (qd - 0.5).abs())]),
                format!("Q1={q1}, Q2={q2}, Q3={q3}"),
            )
        }
        other => {
            return Err(MetricError::ScenarioMismatch {
                metric: other,
                scenario: Scenario::NumDist,
            })
        }
    };
    Ok(MetricResult::new(
        metric,
        raw,
        n,
        format!("column={}; {details}", col.name),
    ))
}
