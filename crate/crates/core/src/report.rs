//! Report emission: CSV tables with header rows, schema-versioned JSON and a
//! static SVG dot-and-interval chart.

use std::fmt::Write as _;

use serde::Serialize;

use crate::benchmark::BenchResult;
use crate::cv::RiskRow;
use crate::error::{Error, Result};
use crate::metrics::MetricTable;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Shortest round-trip decimal; undefined values are written as `NA`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NA".to_string()
    } else {
        format!("{v}")
    }
}

fn csv_string<I, R>(header: &[&str], rows: I) -> Result<String>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let err = |e: csv::Error| Error::Serialization(e.to_string());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r.into_iter().collect::<Vec<_>>()).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Serialization(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Serialization(e.to_string()))
}

#[derive(Serialize)]
struct Versioned<'a, T: Serialize> {
    schema_version: u32,
    kind: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

fn versioned_json<T: Serialize>(kind: &str, body: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&Versioned { schema_version: REPORT_SCHEMA_VERSION, kind, body })?;
    s.push('\n');
    Ok(s)
}

/// Long-format metric values: group, algorithm, value.
pub fn metric_table_csv(table: &MetricTable) -> Result<String> {
    csv_string(
        &["group", "algorithm", table.metric.as_str()],
        table.rows.iter().map(|r| [r.group.clone(), r.algorithm.clone(), fmt_f64(r.value)]),
    )
}

/// Plot data: one row per (group, algorithm).
pub fn metric_plot_csv(table: &MetricTable) -> Result<String> {
    csv_string(
        &["group", "algorithm", "count", "mean", "q25", "q75"],
        table.summary.iter().map(|s| {
            [s.group.clone(), s.algorithm.clone(), s.count.to_string(), fmt_f64(s.mean), fmt_f64(s.q25), fmt_f64(s.q75)]
        }),
    )
}

pub fn metric_table_json(table: &MetricTable) -> Result<String> {
    versioned_json("metric_table", table)
}

pub fn risk_table_csv(rows: &[RiskRow]) -> Result<String> {
    csv_string(
        &["label", "cv_risk", "weight"],
        rows.iter().map(|r| [r.label.clone(), fmt_f64(r.cv_risk), r.weight.map(fmt_f64).unwrap_or_default()]),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchPoint {
    pub dataset_id: String,
    pub relative_mse: f64,
}

/// One row per algorithm, ascending by geometric mean.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchPlotRow {
    pub algorithm: String,
    pub geometric_mean: f64,
    pub n_datasets: usize,
    pub points: Vec<BenchPoint>,
}

pub fn bench_plot_rows(result: &BenchResult) -> Vec<BenchPlotRow> {
    result
        .summary
        .iter()
        .map(|s| BenchPlotRow {
            algorithm: s.algorithm.clone(),
            geometric_mean: s.geometric_mean,
            n_datasets: s.n_datasets,
            points: result
                .datasets
                .iter()
                .flat_map(|d| {
                    d.rows
                        .iter()
                        .filter(|r| r.algorithm == s.algorithm)
                        .map(|r| BenchPoint { dataset_id: d.id.clone(), relative_mse: r.relative_mse })
                })
                .collect(),
        })
        .collect()
}

pub fn bench_rows_csv(result: &BenchResult) -> Result<String> {
    csv_string(
        &["dataset_id", "algorithm", "cvmse", "relative_mse"],
        result.datasets.iter().flat_map(|d| {
            d.rows.iter().map(|r| [d.id.clone(), r.algorithm.clone(), fmt_f64(r.cvmse), fmt_f64(r.relative_mse)])
        }),
    )
}

pub fn bench_summary_csv(result: &BenchResult) -> Result<String> {
    csv_string(
        &["algorithm", "geometric_mean", "n_datasets"],
        result.summary.iter().map(|s| [s.algorithm.clone(), fmt_f64(s.geometric_mean), s.n_datasets.to_string()]),
    )
}

/// Long-format plot data: per-dataset points with each algorithm's rank and
/// geometric mean repeated on every line.
pub fn bench_plot_csv(result: &BenchResult) -> Result<String> {
    let plot = bench_plot_rows(result);
    csv_string(
        &["rank", "algorithm", "geometric_mean", "n_datasets", "dataset_id", "relative_mse"],
        plot.iter().enumerate().flat_map(|(k, row)| {
            row.points.iter().map(move |p| {
                [
                    (k + 1).to_string(),
                    row.algorithm.clone(),
                    fmt_f64(row.geometric_mean),
                    row.n_datasets.to_string(),
                    p.dataset_id.clone(),
                    fmt_f64(p.relative_mse),
                ]
            })
        }),
    )
}

pub fn bench_json(result: &BenchResult) -> Result<String> {
    #[derive(Serialize)]
    struct Body<'a> {
        #[serde(flatten)]
        result: &'a BenchResult,
        plot: Vec<BenchPlotRow>,
    }
    versioned_json("bench_result", &Body { result, plot: bench_plot_rows(result) })
}

/// Every rendered artifact of a benchmark run.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows_csv: String,
    pub summary_csv: String,
    pub plot_csv: String,
    pub json: String,
    pub svg: String,
}

pub fn render_bench_report(result: &BenchResult) -> Result<BenchReport> {
    Ok(BenchReport {
        rows_csv: bench_rows_csv(result)?,
        summary_csv: bench_summary_csv(result)?,
        plot_csv: bench_plot_csv(result)?,
        json: bench_json(result)?,
        svg: bench_svg(result),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub table_csv: String,
    pub plot_csv: String,
    pub json: String,
    pub svg: String,
}

pub fn render_sim_report(table: &MetricTable) -> Result<SimReport> {
    Ok(SimReport {
        table_csv: metric_table_csv(table)?,
        plot_csv: metric_plot_csv(table)?,
        json: metric_table_json(table)?,
        svg: metric_svg(table),
    })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

const LABEL_W: f64 = 140.0;
const PLOT_W: f64 = 420.0;
const ROW_H: f64 = 18.0;
const PAD: f64 = 24.0;

struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    fn from_values(values: impl Iterator<Item = f64>) -> Axis {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            return Axis { lo: 0.0, hi: 1.0 };
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        let margin = 0.05 * (hi - lo);
        Axis { lo: lo - margin, hi: hi + margin }
    }

    fn x(&self, v: f64) -> f64 {
        LABEL_W + PLOT_W * (v - self.lo) / (self.hi - self.lo)
    }

    fn draw(&self, svg: &mut String, y: f64) {
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="black"/>"#,
            LABEL_W,
            LABEL_W + PLOT_W
        );
        for k in 0..=4 {
            let v = self.lo + (self.hi - self.lo) * k as f64 / 4.0;
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="middle">{:.3}</text>"#,
                self.x(v),
                y + 12.0,
                v
            );
        }
    }
}

fn svg_open(height: f64) -> String {
    let width = LABEL_W + PLOT_W + PAD;
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"sans-serif\">\n"
    )
}

/// Dot at the mean, segment over the interquartile range, one panel per group.
pub fn metric_svg(table: &MetricTable) -> String {
    let mut groups: Vec<&str> = Vec::new();
    for s in &table.summary {
        if !groups.contains(&s.group.as_str()) {
            groups.push(&s.group);
        }
    }
    let axis = Axis::from_values(table.summary.iter().flat_map(|s| [s.mean, s.q25, s.q75]));
    let rows = table.summary.len() as f64;
    let height = PAD + groups.len() as f64 * (ROW_H + 8.0) + rows * ROW_H + 2.0 * PAD;
    let mut svg = svg_open(height);
    let mut y = PAD;
    for g in groups {
        let _ = writeln!(svg, r#"<text x="4" y="{y:.2}" font-size="12" font-weight="bold">{}</text>"#, escape(g));
        y += ROW_H;
        for s in table.summary.iter().filter(|s| s.group == g) {
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#,
                LABEL_W - 6.0,
                y + 4.0,
                escape(&s.algorithm)
            );
            if s.q25.is_finite() && s.q75.is_finite() {
                let _ = writeln!(
                    svg,
                    r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="gray" stroke-width="2"/>"#,
                    axis.x(s.q25),
                    axis.x(s.q75)
                );
            }
            if s.mean.is_finite() {
                let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{y:.2}" r="3.5"/>"#, axis.x(s.mean));
            }
            y += ROW_H;
        }
        y += 8.0;
    }
    axis.draw(&mut svg, y);
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#,
        LABEL_W + PLOT_W / 2.0,
        y + 28.0,
        escape(&table.metric)
    );
    svg.push_str("</svg>\n");
    svg
}

/// Per-dataset relative MSE as dots, geometric mean as a plus sign, sorted
/// by geometric mean.
pub fn bench_svg(result: &BenchResult) -> String {
    let plot = bench_plot_rows(result);
    let axis = Axis::from_values(
        plot.iter().flat_map(|r| r.points.iter().map(|p| p.relative_mse).chain(std::iter::once(r.geometric_mean))),
    );
    let height = 2.0 * PAD + plot.len() as f64 * ROW_H + 2.0 * PAD;
    let mut svg = svg_open(height);
    let mut y = PAD;
    let ref_x = axis.x(1.0);
    if (LABEL_W..=LABEL_W + PLOT_W).contains(&ref_x) {
        let _ = writeln!(
            svg,
            r#"<line x1="{ref_x:.2}" y1="{:.2}" x2="{ref_x:.2}" y2="{:.2}" stroke="lightgray" stroke-dasharray="4 3"/>"#,
            PAD - ROW_H / 2.0,
            PAD + plot.len() as f64 * ROW_H
        );
    }
    for row in &plot {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#,
            LABEL_W - 6.0,
            y + 4.0,
            escape(&row.algorithm)
        );
        for p in row.points.iter().filter(|p| p.relative_mse.is_finite()) {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{y:.2}" r="2.5" fill="none" stroke="gray"/>"#,
                axis.x(p.relative_mse)
            );
        }
        let gx = axis.x(row.geometric_mean);
        let _ = writeln!(
            svg,
            r#"<path d="M {:.2} {y:.2} H {:.2} M {gx:.2} {:.2} V {:.2}" stroke="black" stroke-width="2"/>"#,
            gx - 5.0,
            gx + 5.0,
            y - 5.0,
            y + 5.0
        );
        y += ROW_H;
    }
    y += 8.0;
    axis.draw(&mut svg, y);
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">relative MSE (reference {})</text>"#,
        LABEL_W + PLOT_W / 2.0,
        y + 28.0,
        escape(&result.reference)
    );
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmark::{AlgorithmSummary, BenchRow, DatasetResult};
    use crate::metrics::MetricRow;

    fn table() -> MetricTable {
        let row = |g: &str, a: &str, v| MetricRow { group: g.into(), algorithm: a.into(), value: v };
        MetricTable::new(
            "r_squared",
            vec![row("sim1_n100", "ols", 0.2), row("sim1_n100", "SL", 0.7), row("sim1_n100", "ols", f64::NAN)],
        )
    }

    fn bench() -> BenchResult {
        let row = |a: &str, r| BenchRow { algorithm: a.into(), cvmse: 2.0 * r, relative_mse: r };
        BenchResult {
            reference: "ols".into(),
            datasets: vec![DatasetResult {
                id: "d,1".into(),
                n: 10,
                p: 1,
                rows: vec![row("ols", 1.0), row("SL", 0.5)],
                failed: vec![],
            }],
            summary: vec![
                AlgorithmSummary { algorithm: "SL".into(), geometric_mean: 0.5, n_datasets: 1 },
                AlgorithmSummary { algorithm: "ols".into(), geometric_mean: 1.0, n_datasets: 1 },
            ],
        }
    }

    #[test]
    fn metric_csvs() {
        let t = table();
        assert_eq!(
            metric_table_csv(&t).unwrap(),
            "group,algorithm,r_squared\nsim1_n100,ols,0.2\nsim1_n100,SL,0.7\nsim1_n100,ols,NA\n"
        );
        assert_eq!(
            metric_plot_csv(&t).unwrap(),
            "group,algorithm,count,mean,q25,q75\nsim1_n100,ols,1,0.2,0.2,0.2\nsim1_n100,SL,1,0.7,0.7,0.7\n"
        );
    }

    #[test]
    fn json_is_versioned() {
        let v: serde_json::Value = serde_json::from_str(&metric_table_json(&table()).unwrap()).unwrap();
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["kind"], "metric_table");
        assert_eq!(v["summary"].as_array().unwrap().len(), 2);
        let b: serde_json::Value = serde_json::from_str(&bench_json(&bench()).unwrap()).unwrap();
        assert_eq!(b["plot"][0]["algorithm"], "SL");
    }

    #[test]
    fn bench_csvs_quote_fields() {
        let r = bench();
        assert_eq!(
            bench_rows_csv(&r).unwrap(),
            "dataset_id,algorithm,cvmse,relative_mse\n\"d,1\",ols,2,1\n\"d,1\",SL,1,0.5\n"
        );
        assert_eq!(bench_summary_csv(&r).unwrap(), "algorithm,geometric_mean,n_datasets\nSL,0.5,1\nols,1,1\n");
        assert!(bench_plot_csv(&r).unwrap().starts_with("rank,algorithm"));
    }

    #[test]
    fn svg_has_one_mark_per_row() {
        let s = metric_svg(&table());
        assert_eq!(s.matches("<circle").count(), 2);
        let b = bench_svg(&bench());
        assert_eq!(b.matches("<path").count(), 2);
        assert!(b.starts_with("<svg") && b.ends_with("</svg>\n"));
    }

    #[test]
    fn risk_csv_blank_weight_for_sl() {
        let rows = vec![
            RiskRow { label: "SL".into(), cv_risk: 0.25, weight: None },
            RiskRow { label: "ols".into(), cv_risk: 0.5, weight: Some(1.0) },
        ];
        assert_eq!(risk_table_csv(&rows).unwrap(), "label,cv_risk,weight\nSL,0.25,\nols,0.5,1\n");
    }
}
