//! Summary tables and plots computed from a run record.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::experiment::{write_atomic, RunRecord};
use crate::error::{Error, Result};
use crate::metrics::{
    aggregate_seeds, label_efficiency, relative_auc, wilcoxon_signed_rank, Trace,
};
use crate::selectors::SelectorKind;
use crate::weights::PolicySpec;

pub const BASELINE: &str = "iGS";
pub const MILESTONES: [f64; 2] = [0.7, 0.8];

#[derive(Debug, Serialize)]
struct RelAucRow<'a> {
    dataset: &'a str,
    method: &'a str,
    n_seeds: usize,
    mean_rel_auc: f64,
    std_rel_auc: f64,
}

#[derive(Debug, Serialize)]
struct LabelEfficiencyRow<'a> {
    dataset: &'a str,
    method: &'a str,
    seed: u64,
    q: f64,
    n_method: usize,
    n_igs: usize,
    n_rel: f64,
}

#[derive(Debug, Serialize)]
struct LabelEfficiencySummaryRow<'a> {
    dataset: &'a str,
    method: &'a str,
    q: f64,
    n_seeds: usize,
    mean_n_rel: f64,
}

#[derive(Debug, Serialize)]
struct DeltaRow<'a> {
    dataset: &'a str,
    method: &'a str,
    iteration: usize,
    mean_rmse: f64,
    var_rmse: f64,
    delta_mean: f64,
    delta_std: f64,
}

#[derive(Debug, Serialize)]
struct WeightRow {
    method: String,
    iteration: usize,
    mean_weight: f64,
}

#[derive(Debug, Serialize)]
struct PositionRow {
    method: String,
    seed: u64,
    iteration: usize,
    x_position: f64,
    weight: f64,
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(header)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    write_atomic(path, &bytes)
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (
        m,
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt(),
    )
}

/// Methods whose weight changes over a run.
fn has_weight_dynamics(kind: &SelectorKind) -> bool {
    matches!(kind, SelectorKind::Wigs { policy } if !matches!(policy, PolicySpec::Static { .. }))
}

/// `(method trace, iGS trace)` pairs sharing a seed.
fn paired<'a>(record: &'a RunRecord, method: &'a str) -> Vec<(&'a Trace, &'a Trace)> {
    record
        .traces_for(method)
        .filter_map(|t| record.trace(BASELINE, t.seed).map(|b| (t, b)))
        .collect()
}

/// Writes every table and plot into `dir` and returns the written paths.
pub fn emit_report(record: &RunRecord, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let ds = record.dataset.as_str();
    let labels: Vec<String> = record
        .method_labels()
        .into_iter()
        .filter(|m| record.traces_for(m).next().is_some())
        .collect();
    let has_baseline = record.traces_for(BASELINE).next().is_some();
    if !has_baseline {
        log::warn!("no {BASELINE} traces; relative metrics are skipped");
    }

    let mut rel = Vec::new();
    let mut le_rows = Vec::new();
    let mut le_summary = Vec::new();
    let mut delta_rows = Vec::new();
    let mut delta_series = Vec::new();
    if has_baseline {
        for m in &labels {
            let pairs = paired(record, m);
            if pairs.is_empty() {
                continue;
            }
            let ratios = pairs
                .iter()
                .map(|(t, b)| relative_auc(&t.curve(), &b.curve()))
                .collect::<Result<Vec<_>>>()?;
            let (mean, std) = mean_std(&ratios);
            rel.push(RelAucRow {
                dataset: ds,
                method: m,
                n_seeds: ratios.len(),
                mean_rel_auc: mean,
                std_rel_auc: std,
            });
            for q in MILESTONES {
                let mut n_rels = Vec::new();
                for (t, b) in &pairs {
                    match label_efficiency(&t.curve(), &b.curve(), q) {
                        Ok(le) => {
                            n_rels.push(le.n_rel);
                            le_rows.push(LabelEfficiencyRow {
                                dataset: ds,
                                method: m,
                                seed: t.seed,
                                q,
                                n_method: le.n_method,
                                n_igs: le.n_igs,
                                n_rel: le.n_rel,
                            });
                        }
                        Err(e) => log::warn!("label efficiency for {m} seed {}: {e}", t.seed),
                    }
                }
                if !n_rels.is_empty() {
                    le_summary.push(LabelEfficiencySummaryRow {
                        dataset: ds,
                        method: m,
                        q,
                        n_seeds: n_rels.len(),
                        mean_n_rel: mean_std(&n_rels).0,
                    });
                }
            }
            let curves: Vec<Vec<f64>> = pairs.iter().map(|(t, _)| t.curve()).collect();
            let base: Vec<Vec<f64>> = pairs.iter().map(|(_, b)| b.curve()).collect();
            let agg = aggregate_seeds(&curves, &base)?;
            for i in 0..agg.mean.len() {
                delta_rows.push(DeltaRow {
                    dataset: ds,
                    method: m,
                    iteration: i,
                    mean_rmse: agg.mean[i],
                    var_rmse: agg.variance[i],
                    delta_mean: agg.delta_mean[i],
                    delta_std: agg.delta_std[i],
                });
            }
            delta_series.push(Series {
                label: m.clone(),
                values: agg.delta_mean,
                band: Some(agg.delta_std),
            });
        }
    }
    let out = |name: &str| dir.join(name);
    write_csv(
        &out("rel_auc.csv"),
        &rel,
        &[
            "dataset",
            "method",
            "n_seeds",
            "mean_rel_auc",
            "std_rel_auc",
        ],
    )?;
    write_csv(
        &out("label_efficiency.csv"),
        &le_rows,
        &[
            "dataset", "method", "seed", "q", "n_method", "n_igs", "n_rel",
        ],
    )?;
    write_csv(
        &out("label_efficiency_summary.csv"),
        &le_summary,
        &["dataset", "method", "q", "n_seeds", "mean_n_rel"],
    )?;
    write_csv(
        &out("delta_trace.csv"),
        &delta_rows,
        &[
            "dataset",
            "method",
            "iteration",
            "mean_rmse",
            "var_rmse",
            "delta_mean",
            "delta_std",
        ],
    )?;
    written.extend(
        [
            "rel_auc.csv",
            "label_efficiency.csv",
            "label_efficiency_summary.csv",
            "delta_trace.csv",
        ]
        .map(out),
    );
    let svg = line_chart(
        "Mean RMSE difference to iGS",
        "labels acquired",
        "ΔRMSE",
        &delta_series,
    );
    write_atomic(&out("delta_trace.svg"), svg.as_bytes())?;
    written.push(out("delta_trace.svg"));

    write_atomic(
        &out("wilcoxon.csv"),
        wilcoxon_matrix(record, &labels)?.as_bytes(),
    )?;
    written.push(out("wilcoxon.csv"));

    let mut weight_rows = Vec::new();
    let mut weight_series = Vec::new();
    let mut positions = Vec::new();
    for kind in &record.config.methods {
        let m = kind.label();
        let traces: Vec<&Trace> = record.traces_for(&m).collect();
        if !kind.is_wigs() || traces.is_empty() {
            continue;
        }
        for t in &traces {
            for r in &t.rows {
                if let Some(w) = r.weight {
                    positions.push(PositionRow {
                        method: m.clone(),
                        seed: t.seed,
                        iteration: r.iteration,
                        x_position: r.x_position,
                        weight: w,
                    });
                }
            }
        }
        if has_weight_dynamics(kind) {
            let len = traces.iter().map(|t| t.rows.len()).min().unwrap_or(0);
            let mean: Vec<f64> = (0..len)
                .map(|i| {
                    traces
                        .iter()
                        .map(|t| t.rows[i].weight.unwrap_or(f64::NAN))
                        .sum::<f64>()
                        / traces.len() as f64
                })
                .collect();
            for (i, &w) in mean.iter().enumerate() {
                weight_rows.push(WeightRow {
                    method: m.clone(),
                    iteration: i,
                    mean_weight: w,
                });
            }
            weight_series.push(Series {
                label: m.clone(),
                values: mean,
                band: None,
            });
        }
    }
    write_csv(
        &out("weight_trace.csv"),
        &weight_rows,
        &["method", "iteration", "mean_weight"],
    )?;
    write_csv(
        &out("policy_positions.csv"),
        &positions,
        &["method", "seed", "iteration", "x_position", "weight"],
    )?;
    let svg = line_chart(
        "Mean exploration weight",
        "iteration",
        "w_x",
        &weight_series,
    );
    write_atomic(&out("weights.svg"), svg.as_bytes())?;
    written.extend(["weight_trace.csv", "policy_positions.csv", "weights.svg"].map(out));
    Ok(written)
}

/// Two-sided p-values on per-seed mean full-pool RMSE over the curve.
fn wilcoxon_matrix(record: &RunRecord, labels: &[String]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["method".to_string()];
    header.extend(labels.iter().cloned());
    w.write_record(&header)?;
    for a in labels {
        let mut row = vec![a.clone()];
        for b in labels {
            let p = if a == b {
                1.0
            } else {
                let (x, y): (Vec<f64>, Vec<f64>) = record
                    .traces_for(a)
                    .filter_map(|ta| {
                        record
                            .trace(b, ta.seed)
                            .map(|tb| (ta.mean_rmse(), tb.mean_rmse()))
                    })
                    .unzip();
                wilcoxon_signed_rank(&x, &y)?.p_value
            };
            row.push(p.to_string());
        }
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::invalid(e.to_string()))
}

/// One line on a chart; `band` is a symmetric half-width drawn as a shaded region.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub values: Vec<f64>,
    pub band: Option<Vec<f64>>,
}

const PALETTE: [&str; 14] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#393b79", "#637939", "#8c6d31", "#843c39",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Self-contained SVG line chart with one `<polyline>` per series.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (w, h) = (860.0, 500.0);
    let (left, right, top, bottom) = (70.0, 200.0, 40.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let finite = |v: &f64| v.is_finite();
    let len = series
        .iter()
        .map(|s| s.values.len())
        .max()
        .unwrap_or(0)
        .max(2);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in series {
        for (i, v) in s.values.iter().enumerate().filter(|(_, v)| finite(v)) {
            let b = s
                .band
                .as_ref()
                .and_then(|b| b.get(i))
                .copied()
                .unwrap_or(0.0);
            lo = lo.min(v - b);
            hi = hi.max(v + b);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        lo = 0.0;
        hi = 1.0;
    }
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let sx = |i: usize| left + pw * i as f64 / (len - 1) as f64;
    let sy = |v: f64| top + ph * (hi - v) / (hi - lo);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        left + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r##"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##
    );
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let y = sy(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{left}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#ddd"/><text x="{}" y="{:.2}" text-anchor="end">{v:.3}</text>"##,
            left + pw,
            left - 6.0,
            y + 4.0
        );
        let i = (len - 1) * k / 4;
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{i}</text>"#,
            sx(i),
            top + ph + 18.0
        );
    }
    if lo < 0.0 && hi > 0.0 {
        let _ = writeln!(
            svg,
            r##"<line x1="{left}" y1="{0:.2}" x2="{1}" y2="{0:.2}" stroke="#000" stroke-dasharray="4 3"/>"##,
            sy(0.0),
            left + pw
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        left + pw / 2.0,
        h - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
        top + ph / 2.0,
        escape(y_label)
    );
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<(usize, f64)> = s
            .values
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .collect();
        if let Some(band) = &s.band {
            let mut poly = String::new();
            for &(i, v) in &pts {
                let b = band.get(i).copied().unwrap_or(0.0);
                let _ = write!(poly, "{:.2},{:.2} ", sx(i), sy(v + b));
            }
            for &(i, v) in pts.iter().rev() {
                let b = band.get(i).copied().unwrap_or(0.0);
                let _ = write!(poly, "{:.2},{:.2} ", sx(i), sy(v - b));
            }
            let _ = writeln!(
                svg,
                r#"<polygon points="{}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#,
                poly.trim_end()
            );
        }
        let line: Vec<String> = pts
            .iter()
            .map(|&(i, v)| format!("{:.2},{:.2}", sx(i), sy(v)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"><title>{}</title></polyline>"#,
            line.join(" "),
            escape(&s.label)
        );
        let ly = top + 14.0 + 18.0 * k as f64;
        let lx = left + pw + 14.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}
