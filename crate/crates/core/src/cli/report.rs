//! Report files: score histogram, box-whisker stats per comparison and
//! retained counts per level, each as CSV, JSON or a static SVG chart.

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::Serialize;

use crate::experiment::{ExperimentError, Label, RunDir, StatsReport, TruncationLabel};
use crate::semscore::{box_whisker, histogram, BoxWhisker, Comparison, Histogram, ScoreRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ReportFormat {
    Csv,
    Json,
    Svg,
}

impl ReportFormat {
    fn ext(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
            Self::Svg => "svg",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error("no reference scores to plot")]
    EmptyScores,
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxRow {
    pub comparison: String,
    pub n: usize,
    #[serde(flatten)]
    pub stats: BoxWhisker,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetainedRow {
    pub level: u8,
    pub late_uninformative: usize,
    pub late_informative: usize,
    pub total: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportData {
    pub histogram: Histogram,
    pub boxes: Vec<BoxRow>,
    pub retained: Vec<RetainedRow>,
}

pub const REPORT_INPUTS: [&str; 3] = ["scores.jsonl", "labels.jsonl", "stats.json"];

pub fn collect(run: &RunDir, bins: usize) -> Result<ReportData, ReportError> {
    run.require(&REPORT_INPUTS)?;
    let scores: Vec<ScoreRecord> = run.scores()?;
    let labels: Vec<TruncationLabel> = run.labels()?;
    let stats: StatsReport = run.stats()?;
    let refs: Vec<f64> = scores
        .iter()
        .filter(|s| s.comparison == Comparison::RefVsRes0)
        .map(|s| s.value)
        .collect();
    let lo = if refs.iter().any(|v| *v < 0.0) {
        -1.0
    } else {
        0.0
    };
    let histogram = if refs.is_empty() {
        Histogram {
            bins: Vec::new(),
            below_range: 0,
            above_range: 0,
        }
    } else {
        histogram(&refs, bins, (lo, 1.0)).map_err(ExperimentError::from)?
    };
    let mut boxes = Vec::new();
    if !refs.is_empty() {
        boxes.push(BoxRow {
            comparison: Comparison::RefVsRes0.as_str().into(),
            n: refs.len(),
            stats: box_whisker(&refs).map_err(ExperimentError::from)?,
        });
    }
    for comparison in Comparison::TRUNCATION {
        let level = comparison.level().expect("truncation level");
        let values: Vec<f64> = labels
            .iter()
            .filter(|l| l.level == level)
            .map(|l| l.similarity_to_res0)
            .collect();
        if values.is_empty() {
            continue;
        }
        boxes.push(BoxRow {
            comparison: comparison.as_str().into(),
            n: values.len(),
            stats: box_whisker(&values).map_err(ExperimentError::from)?,
        });
    }
    let retained = stats
        .retained
        .iter()
        .map(|(level, r)| RetainedRow {
            level: *level,
            late_uninformative: r.count,
            late_informative: labels
                .iter()
                .filter(|l| l.level == *level && l.label == Label::LateInformative)
                .count(),
            total: stats.total_examples,
            fraction: r.fraction,
        })
        .collect();
    Ok(ReportData {
        histogram,
        boxes,
        retained,
    })
}

/// Writes `figures/{histogram,boxplots,retained}.<ext>` and returns the
/// paths written.
pub fn emit_report(
    run: &RunDir,
    format: ReportFormat,
    bins: usize,
) -> Result<Vec<PathBuf>, ReportError> {
    let data = collect(run, bins)?;
    if format == ReportFormat::Svg && data.histogram.bins.is_empty() {
        return Err(ReportError::EmptyScores);
    }
    let dir = run.path("figures");
    std::fs::create_dir_all(&dir)
        .map_err(|e| ReportError::Io(format!("{}: {e}", dir.display())))?;
    let files = match format {
        ReportFormat::Csv => [
            histogram_csv(&data.histogram),
            boxes_csv(&data.boxes),
            retained_csv(&data.retained),
        ],
        ReportFormat::Json => [
            to_json(&data.histogram),
            to_json(&data.boxes),
            to_json(&data.retained),
        ],
        ReportFormat::Svg => [
            histogram_svg(&data.histogram),
            boxes_svg(&data.boxes),
            retained_svg(&data.retained),
        ],
    };
    let mut written = Vec::new();
    for (stem, body) in ["histogram", "boxplots", "retained"].into_iter().zip(files) {
        let path = dir.join(format!("{stem}.{}", format.ext()));
        crate::jsonl::write_atomic(&path, body.as_bytes())
            .map_err(|e| ReportError::Io(format!("{}: {e}", path.display())))?;
        written.push(path);
    }
    Ok(written)
}

fn to_json<T: Serialize + ?Sized>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes") + "\n"
}

fn csv_string<R: Serialize>(header: &[&str], rows: impl IntoIterator<Item = R>) -> String {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.serialize(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

fn histogram_csv(h: &Histogram) -> String {
    csv_string(
        &["bin_lo", "bin_hi", "count"],
        h.bins.iter().map(|b| (b.bin_lo, b.bin_hi, b.count)),
    )
}

fn boxes_csv(rows: &[BoxRow]) -> String {
    csv_string(
        &[
            "comparison",
            "n",
            "q1",
            "median",
            "q3",
            "whisker_low",
            "whisker_high",
            "outliers",
        ],
        rows.iter().map(|r| {
            (
                &r.comparison,
                r.n,
                r.stats.q1,
                r.stats.median,
                r.stats.q3,
                r.stats.whisker_low,
                r.stats.whisker_high,
                r.stats.outliers.len(),
            )
        }),
    )
}

fn retained_csv(rows: &[RetainedRow]) -> String {
    csv_string(
        &[
            "level",
            "late_uninformative",
            "late_informative",
            "total",
            "fraction",
        ],
        rows.iter().map(|r| {
            (
                r.level,
                r.late_uninformative,
                r.late_informative,
                r.total,
                r.fraction,
            )
        }),
    )
}

const W: f64 = 480.0;
const H: f64 = 300.0;
const PAD: f64 = 40.0;
const FILL: &str = "#4e79a7";
const STROKE: &str = "#333333";

fn svg_open(title: &str) -> String {
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{title}</text>"#,
        W / 2.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<line x1="{PAD}" y1="{}" x2="{}" y2="{}" stroke="{STROKE}"/>"#,
        H - PAD,
        W - PAD,
        H - PAD
    )
    .unwrap();
    writeln!(
        s,
        r#"<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{}" stroke="{STROKE}"/>"#,
        H - PAD
    )
    .unwrap();
    s
}

fn bars(title: &str, labels: &[String], values: &[f64], max: f64) -> String {
    let mut s = svg_open(title);
    let n = values.len().max(1) as f64;
    let slot = (W - 2.0 * PAD) / n;
    let scale = if max > 0.0 {
        (H - 2.0 * PAD) / max
    } else {
        0.0
    };
    for (i, (label, v)) in labels.iter().zip(values).enumerate() {
        let h = v * scale;
        let x = PAD + i as f64 * slot;
        writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{FILL}"/>"#,
            x + slot * 0.1,
            H - PAD - h,
            slot * 0.8,
            h
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{label}</text>"#,
            x + slot / 2.0,
            H - PAD + 14.0
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn histogram_svg(h: &Histogram) -> String {
    let labels: Vec<String> = h
        .bins
        .iter()
        .enumerate()
        .map(|(i, b)| {
            if i % 5 == 0 {
                format!("{:.2}", b.bin_lo)
            } else {
                String::new()
            }
        })
        .collect();
    let values: Vec<f64> = h.bins.iter().map(|b| b.count as f64).collect();
    let max = values.iter().copied().fold(0.0, f64::max);
    bars("Reference vs. res0 similarity", &labels, &values, max)
}

fn retained_svg(rows: &[RetainedRow]) -> String {
    let labels: Vec<String> = rows.iter().map(|r| format!("-{}", r.level)).collect();
    let values: Vec<f64> = rows.iter().map(|r| r.late_uninformative as f64).collect();
    let max = rows.first().map(|r| r.total as f64).unwrap_or(0.0);
    bars("Answer retained after truncation", &labels, &values, max)
}

fn boxes_svg(rows: &[BoxRow]) -> String {
    let mut s = svg_open("Similarity by comparison");
    let slot = (W - 2.0 * PAD) / rows.len().max(1) as f64;
    // y axis spans [-1, 1] when anything is negative, else [0, 1]
    let lo = if rows
        .iter()
        .any(|r| r.stats.whisker_low < 0.0 || r.stats.outliers.iter().any(|o| *o < 0.0))
    {
        -1.0
    } else {
        0.0
    };
    let y = |v: f64| H - PAD - (v - lo) / (1.0 - lo) * (H - 2.0 * PAD);
    for (i, r) in rows.iter().enumerate() {
        let cx = PAD + (i as f64 + 0.5) * slot;
        let half = slot * 0.25;
        let b = &r.stats;
        writeln!(
            s,
            r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="{STROKE}"/>"#,
            y(b.whisker_low),
            y(b.whisker_high)
        )
        .unwrap();
        writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{FILL}" stroke="{STROKE}"/>"#,
            cx - half,
            y(b.q3),
            2.0 * half,
            y(b.q1) - y(b.q3)
        )
        .unwrap();
        writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="white"/>"#,
            cx - half,
            y(b.median),
            cx + half,
            y(b.median)
        )
        .unwrap();
        for o in &b.outliers {
            writeln!(
                s,
                r#"<circle cx="{cx:.2}" cy="{:.2}" r="2" fill="none" stroke="{STROKE}"/>"#,
                y(*o)
            )
            .unwrap();
        }
        writeln!(
            s,
            r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            H - PAD + 14.0,
            r.comparison
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}
