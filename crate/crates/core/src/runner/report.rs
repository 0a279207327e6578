use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::reference::group;
use super::{RunManifest, Stage, StageStatus, MANIFEST_FILE};
use crate::error::{Error, Result};
use crate::eval::{EvalReport, ScoreSummary};
use crate::model::{SourceId, Task};
use crate::prompts::Catalog;

pub const REPORT_FILE: &str = "report.json";
pub const SUMMARY_FILE: &str = "summary.txt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestEntry {
    pub template_id: String,
    pub score: f64,
}

/// Machine-readable scores of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run_id: String,
    pub task: Task,
    pub source: SourceId,
    pub backend_id: String,
    pub dataset_hash: Option<String>,
    pub catalog_hash: String,
    pub reports: Vec<EvalReport>,
    /// Template id -> family.
    pub families: BTreeMap<String, String>,
    pub best: Option<BestEntry>,
    pub best_by_family: BTreeMap<String, BestEntry>,
    pub notes: Vec<String>,
}

impl RunReport {
    pub fn new(manifest: &RunManifest, scores: &ScoreSummary, catalog: &Catalog) -> Self {
        let families: BTreeMap<String, String> = scores
            .reports
            .iter()
            .map(|r| {
                let family = catalog
                    .get(&r.template_id)
                    .map(|t| t.family.as_str().to_string())
                    .unwrap_or_else(|| "unknown".into());
                (r.template_id.clone(), family)
            })
            .collect();
        let mut best_by_family: BTreeMap<String, BestEntry> = BTreeMap::new();
        for r in &scores.reports {
            let family = families[&r.template_id].clone();
            let entry = BestEntry {
                template_id: r.template_id.clone(),
                score: r.headline(),
            };
            match best_by_family.get(&family) {
                Some(b) if b.score >= entry.score => {}
                _ => {
                    best_by_family.insert(family, entry);
                }
            }
        }
        RunReport {
            run_id: manifest.run_id.clone(),
            task: manifest.config.task,
            source: manifest.config.source,
            backend_id: manifest.backend.backend_id.clone(),
            dataset_hash: manifest.dataset_hash.clone(),
            catalog_hash: manifest.catalog_hash.clone(),
            reports: scores.reports.clone(),
            families,
            best: scores.best().map(|r| BestEntry {
                template_id: r.template_id.clone(),
                score: r.headline(),
            }),
            best_by_family,
            notes: manifest.notes.clone(),
        }
    }
}

/// A run as shown in a summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunView {
    pub manifest: RunManifest,
    pub report: Option<RunReport>,
}

impl RunView {
    pub fn from_parts(manifest: &RunManifest, report: Option<&RunReport>) -> Self {
        RunView {
            manifest: manifest.clone(),
            report: report.cloned(),
        }
    }

    fn dataset_id(&self) -> String {
        format!("{}.{}", self.manifest.config.task, self.manifest.config.source)
    }

    fn cell(&self) -> String {
        let m = &self.manifest;
        if let Some(best) = self.report.as_ref().and_then(|r| r.best.as_ref()) {
            return pct(best.score);
        }
        if m.is_partial() {
            return format!("partial: {}/{} items", group(m.items_done), group(m.items_total));
        }
        if let Some(f) = m.failure() {
            return format!("failed at {}", stage_name(f.stage));
        }
        "pending".into()
    }
}

fn stage_name(stage: Stage) -> &'static str {
    match stage {
        Stage::Ingest => "ingest",
        Stage::Build => "build",
        Stage::Render => "render",
        Stage::Invoke => "invoke",
        Stage::Score => "score",
    }
}

fn pct(x: f64) -> String {
    format!("{:.1}", x * 100.0)
}

fn table(rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        out.push_str(cells.join(" | ").trim_end());
        out.push('\n');
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            out.push_str(&rule.join("-+-"));
            out.push('\n');
        }
    }
    out
}

/// Plain-text summary: a dataset-by-backend grid of best-template scores,
/// then per-template scores and notes for each run.
pub fn render_runs(views: &[RunView]) -> String {
    let mut out = String::new();
    out.push_str("Best-template scores in % (MAP@1 for task A, F1 for tasks B and C)\n\n");
    let datasets: BTreeSet<String> = views.iter().map(RunView::dataset_id).collect();
    let backends: BTreeSet<String> = views.iter().map(|v| v.manifest.backend.backend_id.clone()).collect();
    let mut rows = vec![std::iter::once("dataset".to_string()).chain(backends.iter().cloned()).collect::<Vec<_>>()];
    for d in &datasets {
        let mut row = vec![d.clone()];
        for b in &backends {
            let cells: Vec<String> = views
                .iter()
                .filter(|v| &v.dataset_id() == d && &v.manifest.backend.backend_id == b)
                .map(RunView::cell)
                .collect();
            row.push(if cells.is_empty() { "-".into() } else { cells.join(", ") });
        }
        rows.push(row);
    }
    out.push_str(&table(&rows));

    for v in views {
        let m = &v.manifest;
        let _ = writeln!(
            out,
            "\nrun {} ({}, backend {}, {}/{} items)",
            m.run_id,
            v.dataset_id(),
            m.backend.backend_id,
            group(m.items_done),
            group(m.items_total)
        );
        if let Some(r) = &v.report {
            let boolean = r.task.is_boolean();
            let mut rows = vec![if boolean {
                vec!["template", "family", "n", "P", "R", "F1", "misses"]
            } else {
                vec!["template", "family", "n", "MAP@1", "MAP@k", "misses", "ambiguous"]
            }
            .into_iter()
            .map(String::from)
            .collect::<Vec<_>>()];
            for e in &r.reports {
                let family = r.families.get(&e.template_id).cloned().unwrap_or_default();
                let mut row = vec![e.template_id.clone(), family, group(e.n_items)];
                if boolean {
                    row.extend([e.precision, e.recall, e.f1].map(|x| pct(x.unwrap_or(0.0))));
                    row.push(group(e.misses));
                } else {
                    row.extend([pct(e.map_at_1), pct(e.map_at_k), group(e.misses), group(e.ambiguous)]);
                }
                rows.push(row);
            }
            out.push_str(&table(&rows));
            if let Some(b) = &r.best {
                let _ = writeln!(out, "best template: {} ({})", b.template_id, pct(b.score));
            }
            for (family, b) in &r.best_by_family {
                let _ = writeln!(out, "best {family} template: {} ({})", b.template_id, pct(b.score));
            }
        } else {
            let _ = writeln!(out, "status: {}", v.cell());
        }
        for note in &m.notes {
            let _ = writeln!(out, "note: {note}");
        }
    }
    out
}

/// Summaries for runs under `output_dir`, checked against their manifests.
pub fn report(output_dir: &Path, run_ids: &[String]) -> Result<(String, Vec<RunView>)> {
    let mut views = Vec::new();
    for id in run_ids {
        let run_dir = output_dir.join(id);
        if !run_dir.join(MANIFEST_FILE).exists() {
            return Err(Error::NotFound(format!("run `{id}` under {}", output_dir.display())));
        }
        let manifest = RunManifest::load(&run_dir)?;
        manifest.verify(&run_dir)?;
        let report = if manifest.status(Stage::Score) == StageStatus::Done {
            let path = run_dir.join(REPORT_FILE);
            let text = fs::read_to_string(&path)?;
            Some(serde_json::from_str(&text).map_err(|e| Error::parse(&path, e.line(), e.to_string()))?)
        } else {
            None
        };
        views.push(RunView { manifest, report });
    }
    if views.is_empty() {
        return Err(Error::Config("no runs named".into()));
    }
    Ok((render_runs(&views), views))
}
