//! Closed-form values the metrics must reproduce, and the severity bands at
//! the top of the max/min ratio scale.

#![allow(dead_code)]

use biasaudit::bench::{score_end_results, BiasType, EndResultRecord};
use biasaudit::metrics::{detect_cat_cat, detect_cat_dist, detect_num_num, MetricId, MetricOptions};
use biasaudit::severity::{map_to_level, BiasLevel, ThresholdTable};
use biasaudit::tabular::Column;

pub struct Anchor {
    pub name: &'static str,
    pub got: f64,
    pub want: f64,
}

impl Anchor {
    pub fn holds(&self, tolerance: f64) -> bool {
        (self.got - self.want).abs() <= tolerance
    }
}

fn repeated(parts: &[(&str, usize)]) -> Vec<String> {
    parts
        .iter()
        .flat_map(|(l, n)| std::iter::repeat_n(l.to_string(), *n))
        .collect()
}

pub fn anchors() -> Vec<Anchor> {
    let opts = MetricOptions::default();
    let uniform = Column::categorical("x", repeated(&[("a", 25), ("b", 25), ("c", 25), ("d", 25)]));
    let balance = detect_cat_dist(&uniform, MetricId::ShannonBalance, &opts)
        .unwrap()
        .primary_value();

    // [[30,10],[10,30]]
    let g = Column::categorical("g", repeated(&[("a", 40), ("b", 40)]));
    let o = Column::categorical("o", repeated(&[("x", 30), ("y", 10), ("x", 10), ("y", 30)]));
    let v = detect_cat_cat(&g, &o, MetricId::CramersV, &opts)
        .unwrap()
        .primary_value();

    let x = Column::numerical("x", [1.0, 2.0, 3.0, 4.0]);
    let y = Column::numerical("y", [1.0, 3.0, 2.0, 4.0]);
    let r = detect_num_num(&x, &y, MetricId::Pearson, &opts)
        .unwrap()
        .primary_value();

    // 100 rows per group, positive rates 0.7 and 0.5.
    let g = Column::categorical("g", repeated(&[("a", 100), ("b", 100)]));
    let o = Column::categorical("o", repeated(&[("1", 70), ("0", 30), ("1", 50), ("0", 50)]));
    let z = detect_cat_cat(&g, &o, MetricId::StatisticalParity, &opts)
        .unwrap()
        .get("z")
        .unwrap();

    let records = [
        EndResultRecord::new("t1", BiasType::Distribution, level(3), level(3)),
        EndResultRecord::new("t2", BiasType::Distribution, level(2), level(4)),
    ];
    let s_avg = score_end_results(&records).unwrap().s_avg;

    vec![
        Anchor {
            name: "uniform column balance",
            got: balance,
            want: 1.0,
        },
        Anchor {
            name: "Cramer's V on [[30,10],[10,30]]",
            got: v,
            want: 0.5,
        },
        Anchor {
            name: "Pearson on the four-point example",
            got: r,
            want: 0.8,
        },
        Anchor {
            name: "parity z on 70/100 vs 50/100",
            got: z,
            want: 0.2 / (0.6f64 * 0.4 * 0.02).sqrt(),
        },
        Anchor {
            name: "S_avg for preds {3,2} vs truth {3,4}",
            got: s_avg,
            want: 75.0,
        },
    ]
}

pub fn level(v: u8) -> BiasLevel {
    BiasLevel::new(v).unwrap()
}

/// Severity level of a two-category column whose counts have ratio `ratio`.
pub fn ratio_level(ratio: usize) -> u8 {
    let col = Column::categorical("x", repeated(&[("a", ratio), ("b", 1)]));
    let result = detect_cat_dist(&col, MetricId::MaxMinRatio, &MetricOptions::default()).unwrap();
    map_to_level(MetricId::MaxMinRatio, &result, &ThresholdTable::default())
        .unwrap()
        .value()
}
