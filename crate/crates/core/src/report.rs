//! Aggregated CSV tables and log-scale SVG line plots of relative error
//! against `c`, one pair per `(task, k)`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::experiments::{ModelKind, ReTable, Task};
use crate::util::write_atomic;

pub const REPORT_HEADER: &str = "task,k,model,c,median_re,mean_re,seeds";

/// Errors below this are drawn at the floor of the log axis.
pub const RE_FLOOR: f64 = 1e-12;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 130.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

#[derive(Debug, Clone, Default)]
pub struct ReportOptions {
    /// Restrict to these `k` values; every `k` when `None`.
    pub ks: Option<Vec<u64>>,
    pub svg: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportFile {
    pub name: String,
    pub contents: String,
}

/// Per `(task, k)`: model → list of `(c, median, mean, seeds)` sorted by `c`.
type Series = BTreeMap<(Task, u64), BTreeMap<ModelKind, Vec<(u64, f64, f64, usize)>>>;

/// Reads every `*metrics.csv` in `dir`, in file-name order.
pub fn load_runs(dir: &Path) -> Result<ReTable> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with("metrics.csv")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::invalid(format!("no metrics CSV files in {}", dir.display())));
    }
    let mut table = ReTable::default();
    for f in files {
        let text = std::fs::read_to_string(&f)?;
        table.extend(ReTable::from_csv(&text, &f.display().to_string())?);
    }
    if table.is_empty() {
        return Err(Error::invalid(format!("metrics CSV files in {} hold no rows", dir.display())));
    }
    Ok(table)
}

fn series(table: &ReTable, opts: &ReportOptions) -> Series {
    let mut out: Series = BTreeMap::new();
    for ((task, model, k, c), s) in table.aggregates() {
        if opts.ks.as_ref().is_some_and(|ks| !ks.contains(&k)) {
            continue;
        }
        out.entry((task, k)).or_default().entry(model).or_default().push((c, s.median, s.mean, s.seeds));
    }
    out
}

/// Builds the report files in memory. Output is a pure function of the table.
pub fn render(table: &ReTable, opts: &ReportOptions) -> Result<Vec<ReportFile>> {
    let all = series(table, opts);
    if all.is_empty() {
        return Err(Error::invalid("no metrics rows match the requested k values"));
    }
    let mut files = Vec::new();
    for ((task, k), models) in &all {
        let mut csv = String::from(REPORT_HEADER);
        csv.push('\n');
        for (model, points) in models {
            for &(c, median, mean, seeds) in points {
                let _ = writeln!(csv, "{task},{k},{model},{c},{median},{mean},{seeds}");
            }
        }
        files.push(ReportFile { name: format!("report_{task}_k{k}.csv"), contents: csv });
        if opts.svg {
            files.push(ReportFile { name: format!("report_{task}_k{k}.svg"), contents: svg_plot(*task, *k, models) });
        }
    }
    Ok(files)
}

/// Loads `runs`, renders and writes into `out` (created if missing).
pub fn write_report(runs: &Path, out: &Path, opts: &ReportOptions) -> Result<Vec<PathBuf>> {
    let table = load_runs(runs)?;
    let files = render(&table, opts)?;
    std::fs::create_dir_all(out)?;
    let mut written = Vec::with_capacity(files.len());
    for f in files {
        let path = out.join(&f.name);
        write_atomic(&path, f.contents.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

fn svg_plot(task: Task, k: u64, models: &BTreeMap<ModelKind, Vec<(u64, f64, f64, usize)>>) -> String {
    let log = |re: f64| re.max(RE_FLOOR).log10();
    let (mut c_lo, mut c_hi) = (u64::MAX, 0);
    let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for points in models.values() {
        for &(c, median, ..) in points {
            c_lo = c_lo.min(c);
            c_hi = c_hi.max(c);
            if median.is_finite() {
                y_lo = y_lo.min(log(median));
                y_hi = y_hi.max(log(median));
            }
        }
    }
    if !y_lo.is_finite() {
        (y_lo, y_hi) = (0.0, 0.0);
    }
    let (d_lo, mut d_hi) = (y_lo.floor() as i32, y_hi.ceil() as i32);
    if d_hi <= d_lo {
        d_hi = d_lo + 1;
    }
    let c_span = if c_hi > c_lo { (c_hi - c_lo) as f64 } else { 1.0 };
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |c: u64| LEFT + (c - c_lo) as f64 / c_span * plot_w;
    let py = |l: f64| TOP + (d_hi as f64 - l) / (d_hi - d_lo) as f64 * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="14">{} k={}: relative error vs c</text>"#,
        LEFT + plot_w / 2.0,
        task.name().to_uppercase(),
        k
    );
    for d in d_lo..=d_hi {
        let y = py(d as f64);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##,
            LEFT + plot_w
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{d}</text>"#, LEFT - 6.0, y + 4.0);
    }
    let ticks = 5u64.min(c_hi - c_lo.min(c_hi));
    for i in 0..=ticks {
        let c = c_lo + ((c_hi - c_lo) * i).checked_div(ticks).unwrap_or(0);
        let x = px(c);
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{c}</text>"#,
            TOP + plot_h + 18.0
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">c</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">median relative error (log)</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );
    for (i, (model, points)) in models.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = points
            .iter()
            .filter(|p| p.1.is_finite())
            .map(|&(c, median, ..)| format!("{:.2},{:.2}", px(c), py(log(median))))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = TOP + 14.0 + 18.0 * i as f64;
        let lx = LEFT + plot_w + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{model}</text>"#, lx + 26.0, ly + 4.0);
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::ReEntry;

    fn table() -> ReTable {
        let mut e = Vec::new();
        for model in [ModelKind::Sum, ModelKind::Mean] {
            for seed in 0..2 {
                for k in [31, 40] {
                    for c in 31..=35 {
                        let re = if model == ModelKind::Mean { 0.0 } else { 0.01 * c as f64 + seed as f64 };
                        e.push(ReEntry { task: Task::Uc, model, seed, k, c, re });
                    }
                }
            }
        }
        ReTable::new(e)
    }

    #[test]
    fn one_csv_and_svg_per_task_k() {
        let files = render(&table(), &ReportOptions { ks: None, svg: true }).unwrap();
        let names: Vec<&str> = files.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names, ["report_uc_k31.csv", "report_uc_k31.svg", "report_uc_k40.csv", "report_uc_k40.svg"]);
        assert!(files[0].contents.starts_with("task,k,model,c,median_re,mean_re,seeds\n"));
        assert_eq!(files[0].contents.lines().count(), 1 + 2 * 5);
        assert_eq!(files[1].contents.matches("<polyline").count(), 2);
        assert!(files[1].contents.contains(">1e-12<"));
    }

    #[test]
    fn k_filter_and_determinism() {
        let opts = ReportOptions { ks: Some(vec![40]), svg: true };
        let a = render(&table(), &opts).unwrap();
        let b = render(&table(), &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
        assert!(render(&table(), &ReportOptions { ks: Some(vec![7]), svg: false }).is_err());
    }

    #[test]
    fn empty_dir_is_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(load_runs(dir.path()).is_err());
    }

    #[test]
    fn writes_from_run_dir() {
        let runs = tempfile::tempdir().unwrap();
        std::fs::write(runs.path().join("uc_sum_metrics.csv"), table().to_csv()).unwrap();
        let out = runs.path().join("out");
        let paths = write_report(runs.path(), &out, &ReportOptions { ks: None, svg: false }).unwrap();
        assert_eq!(paths.len(), 2);
        assert!(paths.iter().all(|p| p.exists()));
    }
}
