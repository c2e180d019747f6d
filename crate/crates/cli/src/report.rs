//! Rendering of summary.md and the ROC panels from a results directory.
//!
//! Both the `experiment` and `report` commands go through this module, and it
//! reads only the emitted CSVs, so re-rendering a results directory
//! reproduces the original bytes exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use privtraj_core::{Error, Result};

use crate::plot;

#[derive(Debug, Clone)]
pub struct ResultRow {
    pub cell_id: String,
    pub detector: String,
    pub privacy: String,
    pub epsilon: Option<f64>,
    pub c_m: f64,
    pub q: f64,
    pub od_mode: String,
    pub status: String,
    pub auc: Option<f64>,
    pub n_pos: usize,
    pub n_neg: usize,
    pub min_pts: Option<usize>,
    pub sentinels: usize,
    pub note: String,
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, e.to_string()),
        ),
        _ => Error::csv(path, e),
    })?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let r = record.map_err(|e| Error::csv(path, e))?;
        let get = |i: usize| r.get(i).unwrap_or_default().to_string();
        let opt_f = |i: usize| get(i).parse::<f64>().ok();
        let opt_u = |i: usize| get(i).parse::<usize>().ok();
        rows.push(ResultRow {
            cell_id: get(0),
            detector: get(1),
            privacy: get(2),
            epsilon: opt_f(3),
            c_m: opt_f(4).unwrap_or(0.0),
            q: opt_f(5).unwrap_or(0.0),
            od_mode: get(6),
            status: get(7),
            auc: opt_f(8),
            n_pos: opt_u(9).unwrap_or(0),
            n_neg: opt_u(10).unwrap_or(0),
            min_pts: opt_u(11),
            sentinels: opt_u(12).unwrap_or(0),
            note: get(13),
        });
    }
    Ok(rows)
}

pub fn read_meta(path: &Path) -> Result<BTreeMap<String, String>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut meta = BTreeMap::new();
    for record in reader.records() {
        let r = record.map_err(|e| Error::csv(path, e))?;
        if let (Some(k), Some(v)) = (r.get(0), r.get(1)) {
            meta.insert(k.to_string(), v.to_string());
        }
    }
    Ok(meta)
}

pub fn write_meta(path: &Path, entries: &[(&str, String)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(["key", "value"])
        .map_err(|e| Error::csv(path, e))?;
    for (k, v) in entries {
        w.write_record([*k, v.as_str()])
            .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn mean_auc<'a>(rows: impl Iterator<Item = &'a ResultRow>) -> Option<f64> {
    let aucs: Vec<f64> = rows.filter_map(|r| r.auc).collect();
    if aucs.is_empty() {
        None
    } else {
        Some(aucs.iter().sum::<f64>() / aucs.len() as f64)
    }
}

fn fmt_auc(a: Option<f64>) -> String {
    a.map(|v| format!("{v:.3}"))
        .unwrap_or_else(|| "n/a".to_string())
}

/// The Table-I-shaped matrix plus the per-cell listing and OD sensitivity.
pub fn render_summary(rows: &[ResultRow], meta: &BTreeMap<String, String>) -> String {
    let mut md = String::new();
    let _ = writeln!(md, "# Privacy vs. anomaly detection: experiment summary\n");
    if !meta.is_empty() {
        let g = |k: &str| meta.get(k).cloned().unwrap_or_else(|| "?".to_string());
        let _ = writeln!(
            md,
            "Corpus: {} train / {} test trips in {} OD groups; seed {}.\n",
            g("n_train"),
            g("n_test"),
            g("n_groups"),
            g("seed"),
        );
    }

    let mut privacy_tags: Vec<String> = rows.iter().map(|r| r.privacy.clone()).collect();
    privacy_tags.sort();
    privacy_tags.dedup();
    let mut detectors: Vec<String> = rows.iter().map(|r| r.detector.clone()).collect();
    detectors.sort();
    detectors.dedup();

    let _ = writeln!(md, "## Mean AUC by privacy mechanism and detector\n");
    let _ = writeln!(md, "| privacy | {} |", detectors.join(" | "));
    let _ = writeln!(
        md,
        "|---|{}|",
        detectors
            .iter()
            .map(|_| "---")
            .collect::<Vec<_>>()
            .join("|")
    );
    for privacy in &privacy_tags {
        let mut cells = Vec::new();
        for det in &detectors {
            let relevant = rows
                .iter()
                .filter(|r| &r.privacy == privacy && &r.detector == det);
            let any_na = rows.iter().any(|r| {
                &r.privacy == privacy && &r.detector == det && r.status == "not_applicable"
            });
            if any_na {
                cells.push(
                    "not applicable (offline detector needs complete trajectories)".to_string(),
                );
            } else {
                cells.push(format!("mean AUC {}", fmt_auc(mean_auc(relevant))));
            }
        }
        let _ = writeln!(md, "| {} | {} |", privacy, cells.join(" | "));
    }

    // Headline comparison at the small perturbation level.
    let at_loc_01 = |r: &&ResultRow| r.privacy.starts_with("loc-") && r.epsilon == Some(0.1);
    let dbscan_01 = mean_auc(
        rows.iter()
            .filter(|r| r.detector == "dbscan")
            .filter(at_loc_01),
    );
    let seq_01 = mean_auc(
        rows.iter()
            .filter(|r| r.detector == "seq")
            .filter(at_loc_01),
    );
    if let (Some(d), Some(s)) = (dbscan_01, seq_01) {
        let _ = writeln!(
            md,
            "\nAUC(dbscan, eps=0.1 location) < AUC(seq, eps=0.1 location): **{}** \
             ({:.3} vs {:.3})",
            if d < s { "yes" } else { "no" },
            d,
            s
        );
    }

    // Shifted-minus-same AUC gaps.
    let _ = writeln!(md, "\n## OD sensitivity (shifted minus same AUC)\n");
    let _ = writeln!(
        md,
        "| detector | privacy | c (m) | q | same | shifted | gap |"
    );
    let _ = writeln!(md, "|---|---|---|---|---|---|---|");
    let mut seen = std::collections::BTreeSet::new();
    for r in rows {
        if r.od_mode != "same" || r.auc.is_none() {
            continue;
        }
        let twin = rows.iter().find(|t| {
            t.detector == r.detector
                && t.privacy == r.privacy
                && t.c_m == r.c_m
                && t.q == r.q
                && t.od_mode == "shifted"
                && t.auc.is_some()
        });
        let Some(twin) = twin else { continue };
        let key = format!("{}-{}-{}-{}", r.detector, r.privacy, r.c_m, r.q);
        if !seen.insert(key) {
            continue;
        }
        let (same, shifted) = (r.auc.unwrap(), twin.auc.unwrap());
        let _ = writeln!(
            md,
            "| {} | {} | {:.0} | {} | {:.3} | {:.3} | {:+.3} |",
            r.detector,
            r.privacy,
            r.c_m,
            r.q,
            same,
            shifted,
            shifted - same
        );
    }

    let _ = writeln!(md, "\n## All cells\n");
    let _ = writeln!(
        md,
        "| cell | status | auc | pos/neg | min_pts | sentinels | note |"
    );
    let _ = writeln!(md, "|---|---|---|---|---|---|---|");
    let mut sorted: Vec<&ResultRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.cell_id.cmp(&b.cell_id));
    for r in sorted {
        let _ = writeln!(
            md,
            "| {} | {} | {} | {}/{} | {} | {} | {} |",
            r.cell_id,
            r.status,
            fmt_auc(r.auc),
            r.n_pos,
            r.n_neg,
            r.min_pts
                .map(|m| m.to_string())
                .unwrap_or_else(|| "-".into()),
            r.sentinels,
            if r.note.is_empty() { "-" } else { &r.note }
        );
    }
    md
}

/// One ROC panel per malicious intent, same-OD curves for every
/// (detector, privacy) cell that produced a curve.
pub fn render_plots(rows: &[ResultRow], results_dir: &Path) -> Result<Vec<(String, String)>> {
    let mut intents: Vec<(f64, f64)> = rows.iter().map(|r| (r.c_m, r.q)).collect();
    intents.sort_by(|a, b| a.partial_cmp(b).expect("finite intents"));
    intents.dedup();

    let mut panels = Vec::new();
    for (c, q) in intents {
        let mut series = Vec::new();
        let mut cells: Vec<&ResultRow> = rows
            .iter()
            .filter(|r| r.c_m == c && r.q == q && r.od_mode == "same" && r.status == "ok")
            .collect();
        cells.sort_by(|a, b| (&a.detector, &a.privacy).cmp(&(&b.detector, &b.privacy)));
        for cell in cells {
            let roc_path = results_dir
                .join("roc")
                .join(format!("{}.csv", cell.cell_id));
            if !roc_path.exists() {
                continue;
            }
            let mut reader =
                csv::Reader::from_path(&roc_path).map_err(|e| Error::csv(&roc_path, e))?;
            let mut points = Vec::new();
            for record in reader.records() {
                let r = record.map_err(|e| Error::csv(&roc_path, e))?;
                let fpr: f64 = r.get(0).unwrap_or("0").parse().unwrap_or(0.0);
                let tpr: f64 = r.get(1).unwrap_or("0").parse().unwrap_or(0.0);
                points.push((fpr, tpr));
            }
            series.push(plot::Series {
                label: format!(
                    "{} {} (AUC {})",
                    cell.detector,
                    cell.privacy,
                    fmt_auc(cell.auc)
                ),
                points,
            });
        }
        let title = format!("ROC, intent c = {c:.0} m, q = {q}");
        let svg = plot::roc_panel(&title, &series);
        panels.push((format!("roc_c{:.0}_q{:.0}.svg", c, q * 100.0), svg));
    }
    Ok(panels)
}

/// Render summary.md and plots/ into `out_dir` from the CSVs in
/// `results_dir`.
pub fn render_all(results_dir: &Path, out_dir: &Path) -> Result<()> {
    let rows = read_results(&results_dir.join("results.csv"))?;
    if rows.is_empty() {
        return Err(Error::io(
            results_dir.join("results.csv"),
            std::io::Error::new(std::io::ErrorKind::NotFound, "results.csv has no rows"),
        ));
    }
    let meta = read_meta(&results_dir.join("meta.csv")).unwrap_or_default();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let summary = render_summary(&rows, &meta);
    let summary_path = out_dir.join("summary.md");
    std::fs::write(&summary_path, summary).map_err(|e| Error::io(&summary_path, e))?;

    let plots_dir = out_dir.join("plots");
    std::fs::create_dir_all(&plots_dir).map_err(|e| Error::io(&plots_dir, e))?;
    for (name, svg) in render_plots(&rows, results_dir)? {
        let path = plots_dir.join(name);
        std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
