//! Hand-written SVG renderers for the nine chart kinds.
//!
//! Output is deterministic: fixed canvas, fixed palette, coordinates printed
//! with two decimals and no timestamps. Data marks carry `data-category`
//! (and `data-series` for two-way charts) so tests can parse them back.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats;
use crate::tabular::{category_counts, Column, ColumnKind, Table, TabularError};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 10] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac",
];
const HISTOGRAM_BINS: usize = 10;

#[derive(Debug, Error)]
pub enum ChartError {
    #[error("chart has no data")]
    EmptyData,
    #[error("{kind:?} chart cannot show {got}")]
    ArityMismatch { kind: ChartKind, got: String },
    #[error(transparent)]
    Table(#[from] TabularError),
    #[error("cannot write chart: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = ChartError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartKind {
    Bar,
    Pie,
    HorizontalBar,
    Treemap,
    Heatmap,
    CorrelationHeatmap,
    StackedBar,
    GroupedBar,
    Box,
}

impl ChartKind {
    pub const ALL: [ChartKind; 9] = [
        ChartKind::Bar,
        ChartKind::Pie,
        ChartKind::HorizontalBar,
        ChartKind::Treemap,
        ChartKind::Heatmap,
        ChartKind::CorrelationHeatmap,
        ChartKind::StackedBar,
        ChartKind::GroupedBar,
        ChartKind::Box,
    ];

    pub fn tool_name(self) -> &'static str {
        match self {
            ChartKind::Bar => "plot_bar_chart",
            ChartKind::Pie => "plot_pie_chart",
            ChartKind::HorizontalBar => "plot_horizontal_bar_chart",
            ChartKind::Treemap => "plot_treemap",
            ChartKind::Heatmap => "plot_heatmap",
            ChartKind::CorrelationHeatmap => "plot_correlation_heatmap",
            ChartKind::StackedBar => "plot_stacked_bar_chart",
            ChartKind::GroupedBar => "plot_grouped_bar_chart",
            ChartKind::Box => "plot_box_plot",
        }
    }

    pub fn from_tool_name(name: &str) -> Option<ChartKind> {
        ChartKind::ALL.into_iter().find(|k| k.tool_name() == name)
    }

    pub fn file_stem(self) -> &'static str {
        self.tool_name().trim_start_matches("plot_")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartData {
    /// One value per category.
    Counts(Vec<(String, f64)>),
    /// rows x cols counts of two categorical variables.
    Cross {
        rows: Vec<String>,
        cols: Vec<String>,
        counts: Vec<Vec<f64>>,
    },
    /// Square matrix of correlations in [-1, 1].
    Matrix { labels: Vec<String>, values: Vec<Vec<f64>> },
    /// Numerical samples per group.
    Groups(Vec<(String, Vec<f64>)>),
}

impl ChartData {
    fn shape(&self) -> &'static str {
        match self {
            ChartData::Counts(_) => "one series of counts",
            ChartData::Cross { .. } => "a two-way table",
            ChartData::Matrix { .. } => "a correlation matrix",
            ChartData::Groups(_) => "grouped numerical samples",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub kind: ChartKind,
    pub data: ChartData,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub output: PathBuf,
}

impl ChartSpec {
    fn validate(&self) -> Result<()> {
        let arity_ok = matches!(
            (self.kind, &self.data),
            (
                ChartKind::Bar | ChartKind::Pie | ChartKind::HorizontalBar | ChartKind::Treemap | ChartKind::Heatmap,
                ChartData::Counts(_)
            ) | (
                ChartKind::StackedBar | ChartKind::GroupedBar | ChartKind::Heatmap,
                ChartData::Cross { .. }
            ) | (ChartKind::CorrelationHeatmap, ChartData::Matrix { .. })
                | (ChartKind::Box, ChartData::Groups(_))
        );
        if !arity_ok {
            return Err(ChartError::ArityMismatch {
                kind: self.kind,
                got: self.data.shape().to_string(),
            });
        }
        let empty = match &self.data {
            ChartData::Counts(c) => c.is_empty() || c.iter().all(|(_, v)| *v <= 0.0),
            ChartData::Cross { rows, cols, counts } => {
                rows.is_empty() || cols.is_empty() || counts.iter().flatten().all(|v| *v <= 0.0)
            }
            ChartData::Matrix { labels, .. } => labels.is_empty(),
            ChartData::Groups(g) => g.is_empty() || g.iter().all(|(_, v)| v.is_empty()),
        };
        if empty {
            return Err(ChartError::EmptyData);
        }
        match &self.data {
            ChartData::Cross { rows, cols, counts }
                if counts.len() != rows.len() || counts.iter().any(|r| r.len() != cols.len()) =>
            {
                Err(ChartError::ArityMismatch {
                    kind: self.kind,
                    got: "a ragged two-way table".into(),
                })
            }
            ChartData::Matrix { labels, values }
                if values.len() != labels.len()
                    || values.iter().any(|r| r.len() != labels.len())
                    || values.iter().flatten().any(|v| !(-1.0..=1.0).contains(v)) =>
            {
                Err(ChartError::ArityMismatch {
                    kind: self.kind,
                    got: "a non-square or out-of-range matrix".into(),
                })
            }
            ChartData::Groups(g) if g.iter().any(|(_, v)| v.is_empty()) => Err(ChartError::EmptyData),
            _ => Ok(()),
        }
    }
}

/// Builds chart data from table columns: category counts (or a histogram for
/// a numerical column), a two-way table, a correlation matrix or grouped
/// samples depending on `kind`.
pub fn spec_from_table(kind: ChartKind, table: &Table, columns: &[&str], output: &Path) -> Result<ChartSpec> {
    let cols: Vec<&Column> = columns
        .iter()
        .map(|c| table.column(c))
        .collect::<std::result::Result<_, _>>()?;
    let mismatch = |got: &str| ChartError::ArityMismatch {
        kind,
        got: got.to_string(),
    };
    let (data, x_label, y_label) = match kind {
        ChartKind::Bar | ChartKind::Pie | ChartKind::HorizontalBar | ChartKind::Treemap | ChartKind::Heatmap => {
            match cols.as_slice() {
                [c] => (
                    ChartData::Counts(counts_or_histogram(c)),
                    c.name.clone(),
                    "count".to_string(),
                ),
                [a, b] if kind == ChartKind::Heatmap => {
                    let (rows, cols, counts) = cross(a, b);
                    (ChartData::Cross { rows, cols, counts }, b.name.clone(), a.name.clone())
                }
                _ => return Err(mismatch(&format!("{} columns", cols.len()))),
            }
        }
        ChartKind::StackedBar | ChartKind::GroupedBar => match cols.as_slice() {
            [a, b] if a.kind == ColumnKind::Categorical && b.kind == ColumnKind::Categorical => {
                let (rows, c, counts) = cross(a, b);
                (
                    ChartData::Cross { rows, cols: c, counts },
                    a.name.clone(),
                    "count".to_string(),
                )
            }
            _ => return Err(mismatch("anything but two categorical columns")),
        },
        ChartKind::CorrelationHeatmap => {
            if cols.len() < 2 || cols.iter().any(|c| c.kind != ColumnKind::Numerical) {
                return Err(mismatch("fewer than two numerical columns"));
            }
            let (labels, values) = correlation_matrix(&cols);
            (ChartData::Matrix { labels, values }, String::new(), String::new())
        }
        ChartKind::Box => match cols.as_slice() {
            [num] if num.kind == ColumnKind::Numerical => (
                ChartData::Groups(vec![(num.name.clone(), num.reals().into_iter().flatten().collect())]),
                String::new(),
                num.name.clone(),
            ),
            [a, b] => {
                let (cat, num) = match (a.kind, b.kind) {
                    (ColumnKind::Categorical, ColumnKind::Numerical) => (a, b),
                    (ColumnKind::Numerical, ColumnKind::Categorical) => (b, a),
                    _ => return Err(mismatch("two columns of the same kind")),
                };
                (ChartData::Groups(grouped(cat, num)), cat.name.clone(), num.name.clone())
            }
            _ => return Err(mismatch(&format!("{} columns", cols.len()))),
        },
    };
    Ok(ChartSpec {
        kind,
        data,
        title: format!("{} of {}", title_case(kind), columns.join(" and ")),
        x_label,
        y_label,
        output: output.to_path_buf(),
    })
}

fn title_case(kind: ChartKind) -> &'static str {
    match kind {
        ChartKind::Bar => "Bar chart",
        ChartKind::Pie => "Pie chart",
        ChartKind::HorizontalBar => "Horizontal bar chart",
        ChartKind::Treemap => "Treemap",
        ChartKind::Heatmap => "Heatmap",
        ChartKind::CorrelationHeatmap => "Correlation heatmap",
        ChartKind::StackedBar => "Stacked bar chart",
        ChartKind::GroupedBar => "Grouped bar chart",
        ChartKind::Box => "Box plot",
    }
}

fn counts_or_histogram(col: &Column) -> Vec<(String, f64)> {
    if col.kind == ColumnKind::Categorical {
        return category_counts(col).into_iter().map(|(k, v)| (k, v as f64)).collect();
    }
    let xs: Vec<f64> = col.reals().into_iter().flatten().collect();
    if xs.is_empty() {
        return Vec::new();
    }
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return vec![(crate::tabular::format_real(lo), xs.len() as f64)];
    }
    let w = (hi - lo) / HISTOGRAM_BINS as f64;
    let mut counts = vec![0.0; HISTOGRAM_BINS];
    for x in &xs {
        let b = (((x - lo) / w) as usize).min(HISTOGRAM_BINS - 1);
        counts[b] += 1.0;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            let a = lo + w * i as f64;
            (format!("[{}, {})", super::fmt_sig(a), super::fmt_sig(a + w)), c)
        })
        .collect()
}

fn cross(a: &Column, b: &Column) -> (Vec<String>, Vec<String>, Vec<Vec<f64>>) {
    let t = crate::metrics::Contingency::from_columns(a, b);
    let counts = t.counts.iter().map(|r| r.iter().map(|&c| c as f64).collect()).collect();
    (t.rows, t.cols, counts)
}

fn correlation_matrix(cols: &[&Column]) -> (Vec<String>, Vec<Vec<f64>>) {
    let labels = cols.iter().map(|c| c.name.clone()).collect();
    let values = cols
        .iter()
        .map(|a| {
            cols.iter()
                .map(|b| {
                    let (xs, ys): (Vec<f64>, Vec<f64>) = a
                        .reals()
                        .into_iter()
                        .zip(b.reals())
                        .filter_map(|(x, y)| Some((x?, y?)))
                        .unzip();
                    let r = stats::pearson(&xs, &ys);
                    if r.is_nan() {
                        0.0
                    } else {
                        r
                    }
                })
                .collect()
        })
        .collect();
    (labels, values)
}

fn grouped(cat: &Column, num: &Column) -> Vec<(String, Vec<f64>)> {
    let mut groups: std::collections::BTreeMap<String, Vec<f64>> = Default::default();
    for (g, y) in cat.labels().into_iter().zip(num.reals()) {
        if let (Some(g), Some(y)) = (g, y) {
            groups.entry(g).or_default().push(y);
        }
    }
    groups.into_iter().collect()
}

/// Renders the chart and writes it to `spec.output`.
pub fn render_chart(spec: &ChartSpec) -> Result<PathBuf> {
    let svg = render_svg(spec)?;
    if let Some(dir) = spec.output.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(&spec.output, svg)?;
    Ok(spec.output.clone())
}

pub fn render_svg(spec: &ChartSpec) -> Result<String> {
    spec.validate()?;
    let mut svg = Svg::new(&spec.title);
    match (&spec.data, spec.kind) {
        (ChartData::Counts(c), ChartKind::Bar) => bar(&mut svg, c, false),
        (ChartData::Counts(c), ChartKind::HorizontalBar) => bar(&mut svg, c, true),
        (ChartData::Counts(c), ChartKind::Pie) => pie(&mut svg, c),
        (ChartData::Counts(c), ChartKind::Treemap) => treemap(&mut svg, c),
        (ChartData::Counts(c), ChartKind::Heatmap) => {
            let counts = vec![c.iter().map(|(_, v)| *v).collect()];
            let cols: Vec<String> = c.iter().map(|(k, _)| k.clone()).collect();
            heatmap(&mut svg, std::slice::from_ref(&spec.y_label), &cols, &counts, false)
        }
        (ChartData::Cross { rows, cols, counts }, ChartKind::Heatmap) => heatmap(&mut svg, rows, cols, counts, false),
        (ChartData::Matrix { labels, values }, _) => heatmap(&mut svg, labels, labels, values, true),
        (ChartData::Cross { rows, cols, counts }, ChartKind::StackedBar) => two_way(&mut svg, rows, cols, counts, true),
        (ChartData::Cross { rows, cols, counts }, _) => two_way(&mut svg, rows, cols, counts, false),
        (ChartData::Groups(g), _) => box_plot(&mut svg, g),
        _ => unreachable!("validated above"),
    }
    svg.axis_labels(&spec.x_label, &spec.y_label);
    Ok(svg.finish())
}

struct Svg {
    body: String,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

impl Svg {
    fn new(title: &str) -> Self {
        let mut body = String::new();
        let _ = write!(
            body,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n<title>{}</title>\n<text x=\"{:.2}\" y=\"28\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
            esc(title),
            WIDTH / 2.0,
            esc(title)
        );
        Svg { body }
    }

    #[allow(clippy::too_many_arguments)]
    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, category: &str, series: Option<&str>, value: f64) {
        let series = series.map_or(String::new(), |s| format!(" data-series=\"{}\"", esc(s)));
        let _ = writeln!(
            self.body,
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" fill=\"{fill}\" data-category=\"{}\"{series} data-value=\"{}\"/>",
            esc(category),
            super::fmt_sig(value)
        );
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, s: &str) {
        let _ = writeln!(
            self.body,
            "<text x=\"{x:.2}\" y=\"{y:.2}\" text-anchor=\"{anchor}\">{}</text>",
            esc(s)
        );
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64) {
        let _ = writeln!(
            self.body,
            "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" stroke=\"#333\"/>"
        );
    }

    fn swatch(&mut self, x: f64, y: f64, fill: &str, label: &str) {
        let _ = writeln!(
            self.body,
            "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"5\" fill=\"{fill}\"/>"
        );
        self.text(x + 9.0, y + 4.0, "start", label);
    }

    fn axis_labels(&mut self, x: &str, y: &str) {
        if !x.is_empty() {
            self.text(WIDTH / 2.0, HEIGHT - 12.0, "middle", x);
        }
        if !y.is_empty() {
            let _ = writeln!(
                self.body,
                "<text x=\"16\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.2})\">{}</text>",
                HEIGHT / 2.0,
                HEIGHT / 2.0,
                esc(y)
            );
        }
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

fn plot_w() -> f64 {
    WIDTH - LEFT - RIGHT
}

fn plot_h() -> f64 {
    HEIGHT - TOP - BOTTOM
}

fn bar(svg: &mut Svg, counts: &[(String, f64)], horizontal: bool) {
    let max = counts.iter().map(|(_, v)| *v).fold(0.0, f64::max);
    let n = counts.len() as f64;
    svg.line(LEFT, TOP, LEFT, TOP + plot_h());
    svg.line(LEFT, TOP + plot_h(), LEFT + plot_w(), TOP + plot_h());
    for (i, (label, v)) in counts.iter().enumerate() {
        let fill = PALETTE[i % PALETTE.len()];
        if horizontal {
            let slot = plot_h() / n;
            let len = if max > 0.0 { v / max * plot_w() } else { 0.0 };
            let y = TOP + slot * i as f64 + slot * 0.1;
            svg.rect(LEFT, y, len, slot * 0.8, fill, label, None, *v);
            svg.text(LEFT - 4.0, y + slot * 0.4 + 4.0, "end", label);
        } else {
            let slot = plot_w() / n;
            let len = if max > 0.0 { v / max * plot_h() } else { 0.0 };
            let x = LEFT + slot * i as f64 + slot * 0.1;
            svg.rect(x, TOP + plot_h() - len, slot * 0.8, len, fill, label, None, *v);
            svg.text(x + slot * 0.4, TOP + plot_h() + 16.0, "middle", label);
        }
    }
}

fn pie(svg: &mut Svg, counts: &[(String, f64)]) {
    let total: f64 = counts.iter().map(|(_, v)| v.max(0.0)).sum();
    let (cx, cy) = (WIDTH / 2.0 - 80.0, TOP + plot_h() / 2.0);
    let r = plot_h() / 2.0;
    let positive: Vec<(usize, &(String, f64))> = counts.iter().enumerate().filter(|(_, (_, v))| *v > 0.0).collect();
    if positive.len() == 1 {
        let (i, (label, v)) = positive[0];
        let _ = writeln!(
            svg.body,
            "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"{r:.2}\" fill=\"{}\" data-category=\"{}\" data-value=\"{}\"/>",
            PALETTE[i % PALETTE.len()],
            esc(label),
            super::fmt_sig(*v)
        );
    } else {
        let mut angle: f64 = -std::f64::consts::FRAC_PI_2;
        for &(i, (label, v)) in &positive {
            let sweep = v / total * std::f64::consts::TAU;
            let (x0, y0) = (cx + r * angle.cos(), cy + r * angle.sin());
            angle += sweep;
            let (x1, y1) = (cx + r * angle.cos(), cy + r * angle.sin());
            let large = if sweep > std::f64::consts::PI { 1 } else { 0 };
            let _ = writeln!(
                svg.body,
                "<path d=\"M {cx:.2} {cy:.2} L {x0:.2} {y0:.2} A {r:.2} {r:.2} 0 {large} 1 {x1:.2} {y1:.2} Z\" fill=\"{}\" data-category=\"{}\" data-value=\"{}\"/>",
                PALETTE[i % PALETTE.len()],
                esc(label),
                super::fmt_sig(*v)
            );
        }
    }
    for (k, &(i, (label, v))) in positive.iter().enumerate() {
        let share = 100.0 * v / total;
        svg.swatch(
            WIDTH - 200.0,
            TOP + 10.0 + 18.0 * k as f64,
            PALETTE[i % PALETTE.len()],
            &format!("{label} ({}%)", super::fmt_sig(share)),
        );
    }
}

/// Squarified treemap (Bruls, Huizing, van Wijk) over values sorted
/// descending, ties by label.
fn treemap(svg: &mut Svg, counts: &[(String, f64)]) {
    let mut items: Vec<(usize, &String, f64)> = counts
        .iter()
        .enumerate()
        .filter(|(_, (_, v))| *v > 0.0)
        .map(|(i, (l, v))| (i, l, *v))
        .collect();
    items.sort_by(|a, b| b.2.total_cmp(&a.2).then_with(|| a.1.cmp(b.1)));
    let total: f64 = items.iter().map(|t| t.2).sum();
    let area = plot_w() * plot_h();
    let scaled: Vec<f64> = items.iter().map(|t| t.2 / total * area).collect();
    let rects = squarify(&scaled, (LEFT, TOP, plot_w(), plot_h()));
    for ((i, label, v), (x, y, w, h)) in items.iter().zip(rects) {
        svg.rect(x, y, w, h, PALETTE[i % PALETTE.len()], label, None, *v);
        if w > 40.0 && h > 16.0 {
            svg.text(x + w / 2.0, y + h / 2.0 + 4.0, "middle", label);
        }
    }
}

type Frame = (f64, f64, f64, f64);

fn worst(row: &[f64], side: f64) -> f64 {
    let s: f64 = row.iter().sum();
    let max = row.iter().copied().fold(0.0, f64::max);
    let min = row.iter().copied().fold(f64::INFINITY, f64::min);
    let s2 = s * s;
    let side2 = side * side;
    (side2 * max / s2).max(s2 / (side2 * min))
}

fn squarify(values: &[f64], frame: Frame) -> Vec<Frame> {
    let mut out = Vec::with_capacity(values.len());
    let (mut x, mut y, mut w, mut h) = frame;
    let mut i = 0;
    while i < values.len() {
        let side = w.min(h);
        let mut j = i + 1;
        while j < values.len() && worst(&values[i..=j], side) <= worst(&values[i..j], side) {
            j += 1;
        }
        let row = &values[i..j];
        let s: f64 = row.iter().sum();
        if w >= h {
            let rw = if h > 0.0 { s / h } else { 0.0 };
            let mut yy = y;
            for v in row {
                let rh = if rw > 0.0 { v / rw } else { 0.0 };
                out.push((x, yy, rw, rh));
                yy += rh;
            }
            x += rw;
            w -= rw;
        } else {
            let rh = if w > 0.0 { s / w } else { 0.0 };
            let mut xx = x;
            for v in row {
                let rw = if rh > 0.0 { v / rh } else { 0.0 };
                out.push((xx, y, rw, rh));
                xx += rw;
            }
            y += rh;
            h -= rh;
        }
        i = j;
    }
    out
}

fn heat_color(t: f64, diverging: bool) -> String {
    // Sequential: white -> blue. Diverging: red (-1) -> white (0) -> blue (+1).
    let (r, g, b) = if diverging {
        if t < 0.0 {
            let a = -t;
            (255.0, 255.0 * (1.0 - a) + 87.0 * a, 255.0 * (1.0 - a) + 89.0 * a)
        } else {
            (
                255.0 * (1.0 - t) + 78.0 * t,
                255.0 * (1.0 - t) + 121.0 * t,
                255.0 * (1.0 - t) + 167.0 * t,
            )
        }
    } else {
        (
            255.0 * (1.0 - t) + 78.0 * t,
            255.0 * (1.0 - t) + 121.0 * t,
            255.0 * (1.0 - t) + 167.0 * t,
        )
    };
    format!("#{:02x}{:02x}{:02x}", r.round() as u8, g.round() as u8, b.round() as u8)
}

fn heatmap(svg: &mut Svg, rows: &[String], cols: &[String], values: &[Vec<f64>], diverging: bool) {
    let max = values.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
    let cw = plot_w() / cols.len() as f64;
    let ch = plot_h() / rows.len() as f64;
    for (i, r) in rows.iter().enumerate() {
        svg.text(LEFT - 4.0, TOP + ch * (i as f64 + 0.5) + 4.0, "end", r);
        for (j, c) in cols.iter().enumerate() {
            let v = values[i][j];
            let t = if diverging {
                v.clamp(-1.0, 1.0)
            } else if max > 0.0 {
                v / max
            } else {
                0.0
            };
            let (x, y) = (LEFT + cw * j as f64, TOP + ch * i as f64);
            svg.rect(x, y, cw, ch, &heat_color(t, diverging), r, Some(c), v);
            svg.text(x + cw / 2.0, y + ch / 2.0 + 4.0, "middle", &super::fmt_sig(v));
        }
    }
    for (j, c) in cols.iter().enumerate() {
        svg.text(LEFT + cw * (j as f64 + 0.5), TOP + plot_h() + 16.0, "middle", c);
    }
}

fn two_way(svg: &mut Svg, rows: &[String], cols: &[String], counts: &[Vec<f64>], stacked: bool) {
    let max = if stacked {
        counts.iter().map(|r| r.iter().sum::<f64>()).fold(0.0, f64::max)
    } else {
        counts.iter().flatten().copied().fold(0.0, f64::max)
    };
    let slot = plot_w() / rows.len() as f64;
    svg.line(LEFT, TOP, LEFT, TOP + plot_h());
    svg.line(LEFT, TOP + plot_h(), LEFT + plot_w(), TOP + plot_h());
    for (i, r) in rows.iter().enumerate() {
        let x0 = LEFT + slot * i as f64 + slot * 0.1;
        let mut base = TOP + plot_h();
        for (j, c) in cols.iter().enumerate() {
            let v = counts[i][j];
            let len = if max > 0.0 { v / max * plot_h() } else { 0.0 };
            let fill = PALETTE[j % PALETTE.len()];
            if stacked {
                base -= len;
                svg.rect(x0, base, slot * 0.8, len, fill, r, Some(c), v);
            } else {
                let bw = slot * 0.8 / cols.len() as f64;
                svg.rect(x0 + bw * j as f64, TOP + plot_h() - len, bw, len, fill, r, Some(c), v);
            }
        }
        svg.text(x0 + slot * 0.4, TOP + plot_h() + 16.0, "middle", r);
    }
    for (j, c) in cols.iter().enumerate() {
        svg.swatch(
            WIDTH - RIGHT - 90.0,
            TOP + 8.0 + 16.0 * j as f64,
            PALETTE[j % PALETTE.len()],
            c,
        );
    }
}

fn box_plot(svg: &mut Svg, groups: &[(String, Vec<f64>)]) {
    let all: Vec<f64> = groups.iter().flat_map(|(_, v)| v.iter().copied()).collect();
    let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let ypos = |v: f64| TOP + plot_h() - (v - lo) / span * plot_h();
    svg.line(LEFT, TOP, LEFT, TOP + plot_h());
    svg.text(LEFT - 4.0, ypos(hi) + 4.0, "end", &super::fmt_sig(hi));
    svg.text(LEFT - 4.0, ypos(lo) + 4.0, "end", &super::fmt_sig(lo));
    let slot = plot_w() / groups.len() as f64;
    for (i, (label, xs)) in groups.iter().enumerate() {
        let sorted = stats::sorted(xs);
        let q1 = stats::quantile_sorted(&sorted, 0.25);
        let q2 = stats::quantile_sorted(&sorted, 0.5);
        let q3 = stats::quantile_sorted(&sorted, 0.75);
        let iqr = q3 - q1;
        let (fence_lo, fence_hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        let wlo = sorted.iter().copied().find(|v| *v >= fence_lo).unwrap_or(q1);
        let whi = sorted.iter().rev().copied().find(|v| *v <= fence_hi).unwrap_or(q3);
        let cx = LEFT + slot * (i as f64 + 0.5);
        let bw = slot * 0.5;
        svg.line(cx, ypos(whi), cx, ypos(q3));
        svg.line(cx, ypos(q1), cx, ypos(wlo));
        svg.line(cx - bw / 4.0, ypos(whi), cx + bw / 4.0, ypos(whi));
        svg.line(cx - bw / 4.0, ypos(wlo), cx + bw / 4.0, ypos(wlo));
        let top = ypos(q3);
        svg.rect(
            cx - bw / 2.0,
            top,
            bw,
            (ypos(q1) - top).max(0.5),
            PALETTE[i % PALETTE.len()],
            label,
            None,
            q2,
        );
        svg.line(cx - bw / 2.0, ypos(q2), cx + bw / 2.0, ypos(q2));
        for v in sorted.iter().filter(|v| **v < fence_lo || **v > fence_hi) {
            let _ = writeln!(
                svg.body,
                "<circle cx=\"{cx:.2}\" cy=\"{:.2}\" r=\"2\" fill=\"none\" stroke=\"#333\"/>",
                ypos(*v)
            );
        }
        svg.text(cx, TOP + plot_h() + 16.0, "middle", label);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: ChartKind, data: ChartData) -> ChartSpec {
        ChartSpec {
            kind,
            data,
            title: "t".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            output: PathBuf::from("unused.svg"),
        }
    }

    fn counts(pairs: &[(&str, f64)]) -> ChartData {
        ChartData::Counts(pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect())
    }

    #[test]
    fn bar_has_one_rect_per_category() {
        let svg = render_svg(&spec(ChartKind::Bar, counts(&[("a", 3.0), ("b", 1.0)]))).unwrap();
        assert_eq!(svg.matches("<rect").count(), 2);
        assert!(svg.contains("data-category=\"a\""));
        assert!(svg.contains("data-category=\"b\""));
    }

    #[test]
    fn single_category_pie_is_a_circle() {
        let svg = render_svg(&spec(ChartKind::Pie, counts(&[("only", 5.0)]))).unwrap();
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(svg.contains("<circle cx=\"240.00\""));
        assert!(!svg.contains("<path"));
    }

    #[test]
    fn empty_box_rejected() {
        let s = spec(ChartKind::Box, ChartData::Groups(vec![("g".into(), vec![])]));
        assert!(matches!(render_svg(&s), Err(ChartError::EmptyData)));
    }

    #[test]
    fn arity_checked() {
        let s = spec(ChartKind::Box, counts(&[("a", 1.0)]));
        assert!(matches!(render_svg(&s), Err(ChartError::ArityMismatch { .. })));
        let m = ChartData::Matrix {
            labels: vec!["x".into(), "y".into()],
            values: vec![vec![1.0, 2.0], vec![2.0, 1.0]],
        };
        assert!(matches!(
            render_svg(&spec(ChartKind::CorrelationHeatmap, m)),
            Err(ChartError::ArityMismatch { .. })
        ));
    }

    #[test]
    fn treemap_areas_are_proportional() {
        let values = [6.0, 6.0, 4.0, 3.0, 2.0, 2.0, 1.0];
        let rects = squarify(&values, (0.0, 0.0, 6.0, 4.0));
        for (v, (_, _, w, h)) in values.iter().zip(&rects) {
            assert!((w * h - v).abs() < 1e-9);
        }
        let svg = render_svg(&spec(ChartKind::Treemap, counts(&[("a", 3.0), ("b", 1.0), ("c", 2.0)]))).unwrap();
        assert_eq!(svg.matches("<rect").count(), 3);
    }

    #[test]
    fn all_kinds_render_deterministically() {
        let cross = ChartData::Cross {
            rows: vec!["m".into(), "f".into()],
            cols: vec!["y".into(), "n".into()],
            counts: vec![vec![3.0, 1.0], vec![2.0, 2.0]],
        };
        let specs = [
            spec(ChartKind::HorizontalBar, counts(&[("a", 3.0), ("b", 1.0)])),
            spec(ChartKind::Heatmap, counts(&[("a", 3.0), ("b", 1.0)])),
            spec(ChartKind::StackedBar, cross.clone()),
            spec(ChartKind::GroupedBar, cross),
            spec(
                ChartKind::CorrelationHeatmap,
                ChartData::Matrix {
                    labels: vec!["x".into(), "y".into()],
                    values: vec![vec![1.0, -0.5], vec![-0.5, 1.0]],
                },
            ),
            spec(
                ChartKind::Box,
                ChartData::Groups(vec![
                    ("a".into(), vec![1.0, 2.0, 3.0, 40.0]),
                    ("b".into(), vec![2.0, 3.0]),
                ]),
            ),
        ];
        for s in &specs {
            let a = render_svg(s).unwrap();
            assert_eq!(a, render_svg(s).unwrap());
            assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
        }
        let stacked = render_svg(&specs[2]).unwrap();
        assert_eq!(stacked.matches("<rect").count(), 4);
    }

    #[test]
    fn labels_are_escaped() {
        let svg = render_svg(&spec(ChartKind::Bar, counts(&[("<a&b>", 1.0), ("c", 2.0)]))).unwrap();
        assert!(svg.contains("data-category=\"&lt;a&amp;b&gt;\""));
    }

    #[test]
    fn tool_names_round_trip() {
        for k in ChartKind::ALL {
            assert_eq!(ChartKind::from_tool_name(k.tool_name()), Some(k));
        }
    }
}
