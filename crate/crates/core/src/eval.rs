//! Batch evaluation over an image directory: metric rows, per-mode
//! summaries and SVG plots.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image_io::load_image;
use crate::metrics::{
    auc, density_from_fixations, evaluate_with_density, inter_subject_aucs, FixationSet, RocCurve,
    DEFAULT_BLUR_SIGMA, DEFAULT_THRESHOLDS,
};
use crate::saliency::{analyze, ModeConfig, ModelKind, SaliencyOptions};

/// One row of `metrics.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub image: String,
    pub mode: String,
    pub lcc: f64,
    pub nss: f64,
    pub auc: f64,
    pub time_s: f64,
}

/// One row of `summary.csv`: column means over a mode's rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub mode: String,
    pub images: usize,
    pub lcc: f64,
    pub nss: f64,
    pub auc: f64,
    pub time_s: f64,
}

/// Paired inter-subject and model AUC for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct IsRocPoint {
    pub image: String,
    pub inter_subject_auc: f64,
    pub model_auc: f64,
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub saliency: SaliencyOptions,
    pub blur_sigma: f64,
    pub thresholds: usize,
    /// Worker threads; 0 uses every logical core.
    pub threads: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            saliency: SaliencyOptions::default(),
            blur_sigma: DEFAULT_BLUR_SIGMA,
            thresholds: DEFAULT_THRESHOLDS,
            threads: 0,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct EvalReport {
    /// Sorted by image name, then by the order of the requested modes.
    pub rows: Vec<MetricsRow>,
    pub summary: Vec<SummaryRow>,
    /// Mean ROC curve per mode.
    pub roc: BTreeMap<String, RocCurve>,
    pub isroc: BTreeMap<String, Vec<IsRocPoint>>,
    /// Images with no fixation record.
    pub skipped: Vec<String>,
}

/// Image files (PNG, PPM/PNM) directly inside `dir`, sorted.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_image_path(p))
        .collect();
    out.sort();
    Ok(out)
}

pub fn is_image_path(p: &Path) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "ppm" | "pnm"))
        .unwrap_or(false)
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Fixations for `path`, keyed either by file name or by file stem.
fn fixations_for<'a>(
    path: &Path,
    fx: &'a BTreeMap<String, FixationSet>,
) -> Option<&'a FixationSet> {
    let name = file_name(path);
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    fx.get(&name)
        .or_else(|| stem.and_then(|s| fx.get(&s)))
        .filter(|f| !f.is_empty())
}

struct ImageResult {
    rows: Vec<MetricsRow>,
    curves: Vec<(String, RocCurve)>,
    isroc: Vec<(String, IsRocPoint)>,
}

fn evaluate_image(
    path: &Path,
    fx: &FixationSet,
    modes: &[ModeConfig],
    opts: &EvalOptions,
) -> Result<ImageResult> {
    let img = load_image(path)?;
    let name = file_name(path);
    let kinds: BTreeSet<ModelKind> = modes.iter().map(|m| m.model).collect();
    let mut analyses = BTreeMap::new();
    for kind in kinds {
        let t = Instant::now();
        let a = analyze(&img, kind, &opts.saliency)?;
        analyses.insert(kind, (a, t.elapsed().as_secs_f64()));
    }
    let density = density_from_fixations(fx, img.width, img.height, opts.blur_sigma)?;
    let inter_subject = if fx.subject_count() >= 2 {
        let per = inter_subject_aucs(fx, img.width, img.height, opts.blur_sigma)?;
        Some(per.iter().sum::<f64>() / per.len() as f64)
    } else {
        None
    };
    let mut out = ImageResult {
        rows: Vec::new(),
        curves: Vec::new(),
        isroc: Vec::new(),
    };
    for &mode in modes {
        let (a, fit_time) = &analyses[&mode.model];
        let t = Instant::now();
        let map = a.map(mode)?;
        let time_s = fit_time + t.elapsed().as_secs_f64();
        let (m, curve) = evaluate_with_density(&map.values, fx, &density, opts.thresholds)?;
        out.rows.push(MetricsRow {
            image: name.clone(),
            mode: mode.to_string(),
            lcc: m.lcc,
            nss: m.nss,
            auc: m.auc,
            time_s,
        });
        if let Some(inter_subject_auc) = inter_subject {
            out.isroc.push((
                mode.to_string(),
                IsRocPoint {
                    image: name.clone(),
                    inter_subject_auc,
                    model_auc: auc(&curve),
                },
            ));
        }
        out.curves.push((mode.to_string(), curve));
    }
    Ok(out)
}

fn mean_curve(curves: &[&RocCurve]) -> RocCurve {
    let n = curves.len() as f64;
    let len = curves[0].points.len();
    RocCurve {
        points: (0..len)
            .map(|i| {
                let (x, y) = curves.iter().fold((0.0, 0.0), |(x, y), c| {
                    (x + c.points[i].0, y + c.points[i].1)
                });
                (x / n, y / n)
            })
            .collect(),
    }
}

/// Per-mode column means, in the order modes first appear in `rows`.
pub fn summarize(rows: &[MetricsRow]) -> Vec<SummaryRow> {
    let mut order: Vec<String> = Vec::new();
    let mut acc: BTreeMap<String, SummaryRow> = BTreeMap::new();
    for r in rows {
        let e = acc.entry(r.mode.clone()).or_insert_with(|| {
            order.push(r.mode.clone());
            SummaryRow {
                mode: r.mode.clone(),
                images: 0,
                lcc: 0.0,
                nss: 0.0,
                auc: 0.0,
                time_s: 0.0,
            }
        });
        e.images += 1;
        e.lcc += r.lcc;
        e.nss += r.nss;
        e.auc += r.auc;
        e.time_s += r.time_s;
    }
    order
        .into_iter()
        .map(|m| {
            let mut s = acc.remove(&m).unwrap();
            let n = s.images as f64;
            s.lcc /= n;
            s.nss /= n;
            s.auc /= n;
            s.time_s /= n;
            s
        })
        .collect()
}

/// Evaluates every mode on every image that has fixations.
pub fn evaluate_batch(
    images: &[PathBuf],
    fixations: &BTreeMap<String, FixationSet>,
    modes: &[ModeConfig],
    opts: &EvalOptions,
) -> Result<EvalReport> {
    let mut images = images.to_vec();
    images.sort_by_key(|p| file_name(p));
    let mut report = EvalReport::default();
    let mut work = Vec::new();
    for p in &images {
        match fixations_for(p, fixations) {
            Some(f) => work.push((p.clone(), f)),
            None => {
                report.skipped.push(file_name(p));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads)
        .build()
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    let results: Vec<ImageResult> = pool.install(|| {
        work.par_iter()
            .map(|(p, f)| evaluate_image(p, f, modes, opts))
            .collect::<Result<_>>()
    })?;

    let mut curves: BTreeMap<String, Vec<RocCurve>> = BTreeMap::new();
    for r in results {
        report.rows.extend(r.rows);
        for (m, c) in r.curves {
            curves.entry(m).or_default().push(c);
        }
        for (m, p) in r.isroc {
            report.isroc.entry(m).or_default().push(p);
        }
    }
    report.summary = summarize(&report.rows);
    report.roc = curves
        .into_iter()
        .map(|(m, cs)| {
            let refs: Vec<&RocCurve> = cs.iter().collect();
            (m, mean_curve(&refs))
        })
        .collect();
    Ok(report)
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|x| x.map_err(Error::from)).collect()
}

const SVG_W: f64 = 800.0;
const SVG_H: f64 = 600.0;
const MARGIN: f64 = 60.0;
const COLOURS: [&str; 7] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf",
];

fn to_px(x: f64, y: f64) -> (f64, f64) {
    (
        MARGIN + x * (SVG_W - 2.0 * MARGIN),
        SVG_H - MARGIN - y * (SVG_H - 2.0 * MARGIN),
    )
}

/// Unit-square axes with 0.1 gridlines and one polyline per series.
pub fn svg_plot(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<(f64, f64)>)],
    diagonal: bool,
) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {SVG_W} {SVG_H}" width="{SVG_W}" height="{SVG_H}">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{SVG_W}" height="{SVG_H}" fill="white"/>"#
    );
    for i in 0..=10 {
        let t = i as f64 / 10.0;
        let (x0, y0) = to_px(t, 0.0);
        let (x1, y1) = to_px(t, 1.0);
        let _ = writeln!(
            s,
            r##"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y1}" stroke="#ddd"/>"##
        );
        let (a0, b0) = to_px(0.0, t);
        let (a1, b1) = to_px(1.0, t);
        let _ = writeln!(
            s,
            r##"<line x1="{a0}" y1="{b0}" x2="{a1}" y2="{b1}" stroke="#ddd"/>"##
        );
        let _ = writeln!(
            s,
            r#"<text x="{x0}" y="{}" font-size="11" text-anchor="middle">{t:.1}</text>"#,
            y0 + 16.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{t:.1}</text>"#,
            a0 - 6.0,
            b0 + 4.0
        );
    }
    let (ox, oy) = to_px(0.0, 0.0);
    let (ex, ey) = to_px(1.0, 1.0);
    let _ = writeln!(
        s,
        r#"<rect x="{ox}" y="{ey}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        ex - ox,
        oy - ey
    );
    if diagonal {
        let _ = writeln!(
            s,
            r##"<line x1="{ox}" y1="{oy}" x2="{ex}" y2="{ey}" stroke="#999" stroke-dasharray="4 4"/>"##
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="30" font-size="16" text-anchor="middle">{}</text>"#,
        SVG_W / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">{}</text>"#,
        SVG_W / 2.0,
        SVG_H - 15.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" font-size="13" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        SVG_H / 2.0,
        SVG_H / 2.0,
        escape(y_label)
    );
    for (i, (name, pts)) in series.iter().enumerate() {
        let colour = COLOURS[i % COLOURS.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| {
                let (px, py) = to_px(x, y);
                format!("{px:.2},{py:.2}")
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="2" points="{}"/>"#,
            path.join(" ")
        );
        let ly = MARGIN + 20.0 + 18.0 * i as f64;
        let lx = SVG_W - MARGIN - 150.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="2"/>"#,
            lx + 24.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12">{}</text>"#,
            lx + 30.0,
            ly + 4.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

pub fn roc_svg(mode: &str, curve: &RocCurve) -> String {
    svg_plot(
        &format!("ROC {mode}"),
        "false positive rate",
        "true positive rate",
        &[(mode.to_string(), curve.points.clone())],
        true,
    )
}

/// Model AUC against inter-subject AUC, images ordered by the latter.
pub fn isroc_svg(mode: &str, points: &[IsRocPoint]) -> String {
    let mut pts: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.inter_subject_auc, p.model_auc))
        .collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    svg_plot(
        &format!("ISROC {mode}"),
        "inter-subject AUC",
        "model AUC",
        &[(mode.to_string(), pts)],
        true,
    )
}

/// Writes `metrics.csv`, `summary.csv`, `roc_<mode>.svg` and `isroc_<mode>.svg`.
pub fn write_report(report: &EvalReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_csv(&dir.join("metrics.csv"), &report.rows)?;
    write_csv(&dir.join("summary.csv"), &report.summary)?;
    for (mode, curve) in &report.roc {
        std::fs::write(dir.join(format!("roc_{mode}.svg")), roc_svg(mode, curve))?;
        let pts = report.isroc.get(mode).map(Vec::as_slice).unwrap_or(&[]);
        std::fs::write(dir.join(format!("isroc_{mode}.svg")), isroc_svg(mode, pts))?;
    }
    Ok(())
}
