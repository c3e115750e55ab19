//! CSV, Markdown and JSON renderings of grid and sweep results.
//!
//! Output is a pure function of the result and [`ReportOptions`]: wall-clock
//! fields are blanked (CSV) or zeroed (JSON) unless timings are requested, so
//! reruns are byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::pca::ScatterPoint;
use super::sweep::{SweepEntry, SweepResult};
use super::{CellRecord, GridResult};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 10] = [
    "algorithm",
    "layer",
    "hyperparameters",
    "dev_f1",
    "dev_eer_pct",
    "eval_f1",
    "eval_eer_pct",
    "param_count",
    "train_seconds",
    "status",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::usage(format!("unknown report format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportOptions {
    /// Include wall-clock training seconds.
    pub timings: bool,
    /// Describes the embedding front-end in summary rows.
    pub front_end: String,
    /// Appended to Markdown documents, e.g. a manifest digest.
    pub footer: Option<String>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            timings: false,
            front_end: "wav2vec 2.0 BASE (frozen)".into(),
            footer: None,
        }
    }
}

/// One line of the system comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub system: String,
    pub params: usize,
    pub front_end: String,
    pub eer_pct: Option<f64>,
}

impl SummaryRow {
    pub fn for_grid(r: &GridResult, opts: &ReportOptions) -> SummaryRow {
        SummaryRow {
            system: r.algorithm.name().to_string(),
            params: r.param_count(),
            front_end: format!("{}, layer {}", opts.front_end, r.layer),
            eer_pct: r.eval.map(|m| 100.0 * m.eer),
        }
    }

    fn markdown_table(rows: &[SummaryRow]) -> String {
        let mut s = String::from("| system | #params | front-end | EER % |\n|---|---:|---|---:|\n");
        for r in rows {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} |",
                r.system,
                r.params,
                r.front_end,
                opt(r.eer_pct, 2)
            );
        }
        s
    }
}

fn opt(v: Option<f64>, places: usize) -> String {
    v.map(|x| format!("{x:.places$}")).unwrap_or_default()
}

fn pct(v: Option<f64>) -> String {
    opt(v.map(|x| 100.0 * x), 4)
}

fn csv_string(rows: Vec<Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for r in rows {
        w.write_record(&r).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8 fields")
}

fn header() -> Vec<String> {
    CSV_HEADER.iter().map(|s| s.to_string()).collect()
}

fn cell_row(r: &GridResult, c: &CellRecord, opts: &ReportOptions) -> Vec<String> {
    let chosen = c.index == r.chosen;
    let eval = if chosen { r.eval } else { None };
    vec![
        r.algorithm.name().into(),
        r.layer.to_string(),
        c.hyper.canonical(),
        opt(c.dev_f1, 6),
        pct(c.dev_eer),
        opt(eval.map(|m| m.f1), 6),
        pct(eval.map(|m| m.eer)),
        c.param_count.map(|p| p.to_string()).unwrap_or_default(),
        if opts.timings {
            format!("{:.3}", c.train_seconds)
        } else {
            String::new()
        },
        c.status.label(),
    ]
}

/// Header plus one row per grid cell; eval columns only on the chosen row.
pub fn grid_csv(r: &GridResult, opts: &ReportOptions) -> String {
    let mut rows = vec![header()];
    rows.extend(r.cells.iter().map(|c| cell_row(r, c, opts)));
    csv_string(rows)
}

/// Header plus one row per (algorithm, layer): the chosen cell, or a blank
/// row with status `absent` / `failed: ...`.
pub fn sweep_csv(s: &SweepResult, opts: &ReportOptions) -> String {
    let mut rows = vec![header()];
    for e in &s.entries {
        rows.push(match e {
            SweepEntry::Done(r) => cell_row(r, r.chosen_cell(), opts),
            other => {
                let mut row = vec![String::new(); CSV_HEADER.len()];
                row[0] = other.algorithm().name().into();
                row[1] = other.layer().to_string();
                row[9] = match other {
                    SweepEntry::Failed { reason, .. } => format!("failed: {reason}"),
                    _ => "absent".into(),
                };
                row
            }
        });
    }
    csv_string(rows)
}

/// Every cell of every completed grid search in the sweep.
pub fn cells_csv(s: &SweepResult, opts: &ReportOptions) -> String {
    let mut rows = vec![header()];
    for r in s.completed() {
        rows.extend(r.cells.iter().map(|c| cell_row(r, c, opts)));
    }
    csv_string(rows)
}

fn boxplot(groups: Vec<(String, Vec<Option<f64>>)>) -> String {
    let mut rows = vec![vec!["group".to_string(), "value".to_string()]];
    for (g, values) in groups {
        for v in values.into_iter().flatten() {
            rows.push(vec![g.clone(), format!("{:.4}", 100.0 * v)]);
        }
    }
    csv_string(rows)
}

/// EER % of each algorithm across layers, long format (`group,value`).
pub fn boxplot_by_algorithm(s: &SweepResult) -> String {
    boxplot(
        s.eer_by_algorithm()
            .into_iter()
            .map(|(a, v)| (a.name().to_string(), v))
            .collect(),
    )
}

/// EER % of each layer across algorithms, long format (`group,value`).
pub fn boxplot_by_layer(s: &SweepResult) -> String {
    boxplot(
        s.eer_by_layer()
            .into_iter()
            .map(|(l, v)| (format!("layer {l}"), v))
            .collect(),
    )
}

pub fn scatter_csv(points: &[ScatterPoint]) -> String {
    let mut rows = vec![vec![
        "utt_id".into(),
        "label".into(),
        "pc1".into(),
        "pc2".into(),
    ]];
    for p in points {
        rows.push(vec![
            p.utt_id.clone(),
            p.label.to_string(),
            format!("{:.9e}", p.x),
            format!("{:.9e}", p.y),
        ]);
    }
    csv_string(rows)
}

fn markdown_rows(rows: &[Vec<String>]) -> String {
    let mut s = String::from(
        "| algorithm | layer | hyperparameters | dev F1 | dev EER % | eval F1 | eval EER % | #params | train s | status |\n\
         |---|---:|---|---:|---:|---:|---:|---:|---:|---|\n",
    );
    for r in rows {
        let _ = writeln!(s, "| {} |", r.join(" | "));
    }
    s
}

fn footer(s: &mut String, opts: &ReportOptions) {
    if let Some(f) = &opts.footer {
        let _ = write!(s, "\n---\n{f}\n");
    }
}

pub fn grid_markdown(r: &GridResult, opts: &ReportOptions) -> String {
    let rows: Vec<Vec<String>> = r.cells.iter().map(|c| cell_row(r, c, opts)).collect();
    let mut s = format!(
        "# Grid search: {}, layer {}\n\n",
        r.algorithm.name(),
        r.layer
    );
    s += &markdown_rows(&rows);
    let _ = write!(
        s,
        "\nChosen: `{}` (max dev F1, ties to fewer parameters then grid order).\n\n## Summary\n\n",
        r.chosen_cell().hyper.canonical()
    );
    s += &SummaryRow::markdown_table(&[SummaryRow::for_grid(r, opts)]);
    if r.eval.is_none() {
        s += "\nEval labels unavailable: eval metrics suppressed.\n";
    }
    let _ = write!(
        s,
        "\n## Notes\n\n\
         - F1 threshold: {} (score >= threshold is bonafide)\n\
         - parameter count convention: {}\n\
         - features standardized: {}\n\
         - seed: {}\n",
        r.threshold,
        r.param_convention,
        if r.standardized { "yes" } else { "no" },
        r.seed
    );
    footer(&mut s, opts);
    s
}

fn stats(values: &[f64]) -> Option<(f64, f64, f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let median = if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    };
    let mean = v.iter().sum::<f64>() / n as f64;
    Some((v[0], median, mean, v[n - 1]))
}

pub fn sweep_markdown(sw: &SweepResult, opts: &ReportOptions) -> String {
    let rows: Vec<Vec<String>> = csv::ReaderBuilder::new()
        .from_reader(sweep_csv(sw, opts).as_bytes())
        .records()
        .map(|r| r.expect("own csv").iter().map(str::to_string).collect())
        .collect();
    let mut s = format!(
        "# Layer sweep: {} algorithm(s) x {} layer(s)\n\n",
        sw.algorithms.len(),
        sw.layers.len()
    );
    s += &markdown_rows(&rows);

    let _ = write!(
        s,
        "\n## EER % over layers ({} partition)\n\n| algorithm | layers | min | median | mean | max |\n|---|---:|---:|---:|---:|---:|\n",
        sw.basis.as_str()
    );
    for (a, v) in sw.eer_by_algorithm() {
        let present: Vec<f64> = v.iter().flatten().map(|x| 100.0 * x).collect();
        if let Some((lo, med, mean, hi)) = stats(&present) {
            let _ = writeln!(
                s,
                "| {} | {} | {lo:.4} | {med:.4} | {mean:.4} | {hi:.4} |",
                a.name(),
                present.len()
            );
        }
    }
    let _ = write!(
        s,
        "\n## EER % over algorithms ({} partition)\n\n| layer | algorithms | min | median | mean | max |\n|---|---:|---:|---:|---:|---:|\n",
        sw.basis.as_str()
    );
    for (l, v) in sw.eer_by_layer() {
        let present: Vec<f64> = v.iter().flatten().map(|x| 100.0 * x).collect();
        if let Some((lo, med, mean, hi)) = stats(&present) {
            let _ = writeln!(
                s,
                "| {l} | {} | {lo:.4} | {med:.4} | {mean:.4} | {hi:.4} |",
                present.len()
            );
        }
    }

    s += "\n## Summary\n\n";
    if let Some(best) = sw.argmin {
        let _ = write!(
            s,
            "Lowest {} EER: {} on layer {} ({:.4} %).\n\n",
            sw.basis.as_str(),
            best.algorithm.name(),
            best.layer,
            100.0 * best.eer
        );
    }
    let summary: Vec<SummaryRow> = sw
        .algorithms
        .iter()
        .filter_map(|&a| {
            sw.completed()
                .filter(|r| r.algorithm == a)
                .filter_map(|r| sw.eer_of(r).map(|e| (e, r)))
                .min_by(|x, y| x.0.total_cmp(&y.0))
                .map(|(e, r)| SummaryRow {
                    eer_pct: Some(100.0 * e),
                    ..SummaryRow::for_grid(r, opts)
                })
        })
        .collect();
    s += &SummaryRow::markdown_table(&summary);

    s += "\n## Notes\n\n";
    let _ = writeln!(
        s,
        "- aggregates use the selected cell of each (algorithm, layer) on the {} partition",
        sw.basis.as_str()
    );
    for &a in &sw.algorithms {
        if let Some(r) = sw.completed().find(|r| r.algorithm == a) {
            let _ = writeln!(
                s,
                "- {}: F1 threshold {}, parameters counted as {}, standardized: {}",
                a.name(),
                r.threshold,
                r.param_convention,
                if r.standardized { "yes" } else { "no" }
            );
        }
    }
    let absent = sw
        .entries
        .iter()
        .filter(|e| matches!(e, SweepEntry::Absent { .. }))
        .count();
    if absent > 0 {
        let _ = writeln!(
            s,
            "- {absent} (algorithm, layer) pair(s) absent: layer files missing"
        );
    }
    footer(&mut s, opts);
    s
}

fn scrub_grid(r: &GridResult, opts: &ReportOptions) -> GridResult {
    let mut r = r.clone();
    if !opts.timings {
        for c in &mut r.cells {
            c.train_seconds = 0.0;
        }
    }
    r
}

fn scrub_sweep(sw: &SweepResult, opts: &ReportOptions) -> SweepResult {
    let mut sw = sw.clone();
    for e in &mut sw.entries {
        if let SweepEntry::Done(r) = e {
            *r = scrub_grid(r, opts);
        }
    }
    sw
}

pub fn render_grid(r: &GridResult, format: ReportFormat, opts: &ReportOptions) -> String {
    match format {
        ReportFormat::Csv => grid_csv(r, opts),
        ReportFormat::Markdown => grid_markdown(r, opts),
        ReportFormat::Json => {
            serde_json::to_string_pretty(&scrub_grid(r, opts)).expect("serializable") + "\n"
        }
    }
}

pub fn render_sweep(sw: &SweepResult, format: ReportFormat, opts: &ReportOptions) -> String {
    match format {
        ReportFormat::Csv => sweep_csv(sw, opts),
        ReportFormat::Markdown => sweep_markdown(sw, opts),
        ReportFormat::Json => {
            serde_json::to_string_pretty(&scrub_sweep(sw, opts)).expect("serializable") + "\n"
        }
    }
}

fn write_all(dir: &Path, files: Vec<(&str, String)>) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    files
        .into_iter()
        .map(|(name, body)| {
            let p = dir.join(name);
            fs::write(&p, body)?;
            Ok(p)
        })
        .collect()
}

/// Writes `grid.csv`, `grid.md` and `grid.json` into `dir`.
pub fn write_grid_report(r: &GridResult, dir: &Path, opts: &ReportOptions) -> Result<Vec<PathBuf>> {
    write_all(
        dir,
        vec![
            ("grid.csv", render_grid(r, ReportFormat::Csv, opts)),
            ("grid.md", render_grid(r, ReportFormat::Markdown, opts)),
            ("grid.json", render_grid(r, ReportFormat::Json, opts)),
        ],
    )
}

/// Writes the sweep tables, the full cell table and both box-plot files.
pub fn write_sweep_report(
    sw: &SweepResult,
    dir: &Path,
    opts: &ReportOptions,
) -> Result<Vec<PathBuf>> {
    write_all(
        dir,
        vec![
            ("sweep.csv", render_sweep(sw, ReportFormat::Csv, opts)),
            ("sweep_cells.csv", cells_csv(sw, opts)),
            ("sweep.md", render_sweep(sw, ReportFormat::Markdown, opts)),
            ("sweep.json", render_sweep(sw, ReportFormat::Json, opts)),
            ("boxplot_by_algorithm.csv", boxplot_by_algorithm(sw)),
            ("boxplot_by_layer.csv", boxplot_by_layer(sw)),
        ],
    )
}
