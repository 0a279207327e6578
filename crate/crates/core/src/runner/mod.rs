//! Staged, resumable runs and their on-disk artifacts.

mod config;
mod finetune;
mod manifest;
mod reference;
mod report;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use config::{supported, RunConfig, TemplateSelection, DEFAULT_TASK_C_NEGATIVES, STUB_CONSTANT_PREFIX, STUB_ECHO_GOLD};
pub use finetune::{export_finetune_samples, FinetuneSpec};
pub use manifest::{RunLock, RunManifest, Stage, StageRecord, StageStatus, LOCK_FILE, MANIFEST_FILE};
pub use reference::{count_notes, group, observed, reference, ReferenceCounts, REFERENCE_COUNTS, SCHEMAORG_NOTE};
pub use report::{report, RunReport, REPORT_FILE, SUMMARY_FILE};

use crate::backends::{connect, dispatch, InvokeRequest, Payload, RawResponse, ResponseCache};
use crate::datasets::{
    apply_split, build_relation_triples, build_taxonomy_pairs, build_term_typing, split_dataset, DatasetItems, SplitSpec,
    TaskDataset,
};
use crate::error::{Error, Result};
use crate::eval::{evaluation_golds, score_run, AnswerSpace, ScoreSummary};
use crate::ingest::{parse_geonames, parse_schemaorg, parse_semantic_network, parse_umls, parse_wn18rr, GeonamesPaths, UmlsPaths, Wn18rrPaths};
use crate::model::{SourceCorpus, SourceId, Task};
use crate::prompts::{render, Catalog, PromptItem, PromptTemplate, RenderedPrompt};

pub const RESPONSES_FILE: &str = "responses.jsonl";
pub const PROMPTS_FILE: &str = "prompts.jsonl";
pub const ANSWER_SPACE_FILE: &str = "answer_space.json";
pub const LEDGER_DIR: &str = "ledger";

/// Raw file roles per source, with their usual file names.
fn input_roles(source: SourceId) -> &'static [(&'static str, &'static str, bool)] {
    match source {
        SourceId::Wordnet => &[
            ("train", "train.txt", true),
            ("valid", "valid.txt", true),
            ("test", "test.txt", true),
            ("gloss", "wordnet-mlj12-definitions.txt", false),
        ],
        SourceId::Geonames => &[
            ("features", "allCountries.txt", true),
            ("country_info", "countryInfo.txt", true),
            ("feature_codes", "featureCodes_en.txt", false),
        ],
        SourceId::Schemaorg => &[("types", "schemaorg-current-https-types.csv", true)],
        SourceId::Umls => &[("srdef", "SRDEF", true), ("srstr", "SRSTR", false)],
        _ => &[
            ("mrconso", "MRCONSO.RRF", true),
            ("mrsty", "MRSTY.RRF", true),
            ("srdef", "SRDEF", false),
            ("srstr", "SRSTR", false),
        ],
    }
}

/// Locate raw input files: explicit overrides (relative to `data_dir`),
/// then the usual names inside `data_dir`. Optional files that do not exist
/// are left out.
pub fn resolve_inputs(
    source: SourceId,
    data_dir: Option<&Path>,
    overrides: &BTreeMap<String, PathBuf>,
) -> Result<BTreeMap<&'static str, PathBuf>> {
    let roles = input_roles(source);
    if let Some(unknown) = overrides.keys().find(|k| !roles.iter().any(|(r, _, _)| r == k)) {
        let known: Vec<&str> = roles.iter().map(|(r, _, _)| *r).collect();
        return Err(Error::Config(format!(
            "input role `{unknown}` is not used by {source} (roles: {})",
            known.join(", ")
        )));
    }
    let mut found = BTreeMap::new();
    for &(role, default, required) in roles {
        let path = match (overrides.get(role), data_dir) {
            (Some(p), Some(dir)) if p.is_relative() => dir.join(p),
            (Some(p), _) => p.clone(),
            (None, Some(dir)) => dir.join(default),
            (None, None) if required => {
                return Err(Error::Config(format!("{source} needs a data directory or an `{role}` input")))
            }
            (None, None) => continue,
        };
        if required || path.exists() {
            found.insert(role, path);
        }
    }
    Ok(found)
}

/// Parse a source from its raw files.
pub fn ingest_source(source: SourceId, data_dir: Option<&Path>, overrides: &BTreeMap<String, PathBuf>) -> Result<SourceCorpus> {
    let mut files = resolve_inputs(source, data_dir, overrides)?;
    let mut take = |role: &str| files.remove(role);
    match source {
        SourceId::Wordnet => parse_wn18rr(&Wn18rrPaths {
            train: take("train").expect("required"),
            valid: take("valid").expect("required"),
            test: take("test").expect("required"),
            gloss: take("gloss"),
        }),
        SourceId::Geonames => parse_geonames(&GeonamesPaths {
            features: take("features").expect("required"),
            country_info: take("country_info").expect("required"),
            feature_codes: take("feature_codes"),
        }),
        SourceId::Schemaorg => parse_schemaorg(&take("types").expect("required")),
        SourceId::Umls => parse_semantic_network(&take("srdef").expect("required"), take("srstr").as_deref()),
        umls => parse_umls(
            &UmlsPaths {
                mrconso: take("mrconso").expect("required"),
                mrsty: take("mrsty").expect("required"),
                srdef: take("srdef"),
                srstr: take("srstr"),
            },
            umls,
        ),
    }
}

/// Options for materializing a dataset from a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildOptions {
    pub split: Option<SplitSpec>,
    pub max_gap: Option<usize>,
    pub negatives: usize,
    pub seed: u64,
}

impl BuildOptions {
    pub fn from_config(config: &RunConfig) -> Result<Self> {
        Ok(BuildOptions {
            split: config.split_spec()?,
            max_gap: config.max_gap,
            negatives: config.negatives(),
            seed: config.seed,
        })
    }
}

fn split_items<T: crate::datasets::Splittable>(items: Vec<T>, split: Option<&SplitSpec>) -> Vec<T> {
    match split {
        Some(spec) => {
            let (train, test) = split_dataset(items, spec);
            train.into_iter().chain(test).collect()
        }
        None => items,
    }
}

/// Build the task dataset for a corpus.
pub fn build_dataset(corpus: &SourceCorpus, task: Task, options: &BuildOptions) -> Result<TaskDataset> {
    if !supported(task, corpus.source_id) {
        return Err(Error::Config(format!("task {task} is not defined for source {}", corpus.source_id)));
    }
    let taxonomy = || {
        corpus
            .taxonomy
            .as_ref()
            .ok_or_else(|| Error::EmptyDataset(format!("{} corpus has no taxonomy", corpus.source_id)))
    };
    let items = match task {
        Task::A => {
            let needs_split = options.split.is_some() || corpus.records.iter().any(|r| r.partition.is_none());
            let items = match (&options.split, needs_split) {
                (Some(spec), true) => build_term_typing(&apply_split(corpus, spec))?,
                _ => build_term_typing(corpus)?,
            };
            DatasetItems::A(items)
        }
        Task::B => {
            let pairs = build_taxonomy_pairs(taxonomy()?, options.max_gap)?;
            DatasetItems::B(split_items(pairs, options.split.as_ref()))
        }
        Task::C => {
            let relations = corpus
                .relations
                .as_deref()
                .ok_or_else(|| Error::EmptyDataset(format!("{} corpus has no relations", corpus.source_id)))?;
            let triples = build_relation_triples(relations, taxonomy()?, options.negatives, options.seed)?;
            DatasetItems::C(split_items(triples, options.split.as_ref()))
        }
    };
    let mut items = items;
    sort_by_id(&mut items);
    Ok(TaskDataset {
        source_id: corpus.source_id,
        items,
        type_names: if task == Task::A { corpus.type_names() } else { BTreeMap::new() },
    })
}

fn sort_by_id(items: &mut DatasetItems) {
    match items {
        DatasetItems::A(v) => v.sort_by(|a, b| a.item_id.cmp(&b.item_id)),
        DatasetItems::B(v) => v.sort_by(|a, b| a.item_id.cmp(&b.item_id)),
        DatasetItems::C(v) => v.sort_by(|a, b| a.item_id.cmp(&b.item_id)),
    }
}

/// Templates named by a selection, for a task, source and family.
pub fn select_templates(
    catalog: &Catalog,
    selection: &TemplateSelection,
    task: Task,
    source: SourceId,
    family: crate::prompts::Family,
) -> Result<Vec<PromptTemplate>> {
    match selection {
        TemplateSelection::All => catalog.template_catalog(task, source, family),
        TemplateSelection::BestOf8 => {
            let templates = catalog.template_catalog(task, source, family)?;
            if templates.len() != 8 {
                return Err(Error::Config(format!(
                    "best-of-8 needs 8 templates; the task {task} {source} {} catalog has {}",
                    family.as_str(),
                    templates.len()
                )));
            }
            Ok(templates)
        }
        TemplateSelection::Ids(ids) => {
            let allowed = catalog.template_catalog(task, source, family)?;
            ids.iter()
                .map(|id| {
                    allowed.iter().find(|t| &t.template_id == id).cloned().ok_or_else(|| {
                        Error::Config(format!(
                            "template `{id}` is not in the task {task} {source} {} catalog",
                            family.as_str()
                        ))
                    })
                })
                .collect()
        }
    }
}

/// The surface form the echo stub returns for an item.
fn gold_hint(dataset: &TaskDataset, space: &AnswerSpace, index: usize) -> String {
    match &dataset.items {
        DatasetItems::A(v) => {
            let label = &v[index].gold_types[0];
            space.preferred_surface(label, dataset.type_names.get(label).map(String::as_str))
        }
        DatasetItems::B(v) => v[index].label.to_string(),
        DatasetItems::C(v) => v[index].label.to_string(),
    }
}

fn item_at(items: &DatasetItems, index: usize) -> &dyn PromptItem {
    match items {
        DatasetItems::A(v) => &v[index],
        DatasetItems::B(v) => &v[index],
        DatasetItems::C(v) => &v[index],
    }
}

fn item_ids(items: &DatasetItems) -> Vec<&str> {
    match items {
        DatasetItems::A(v) => v.iter().map(|i| i.item_id.as_str()).collect(),
        DatasetItems::B(v) => v.iter().map(|i| i.item_id.as_str()).collect(),
        DatasetItems::C(v) => v.iter().map(|i| i.item_id.as_str()).collect(),
    }
}

/// Requests for every scored item, item-major: all templates of one item
/// before the next item.
pub fn render_requests(
    dataset: &TaskDataset,
    space: &AnswerSpace,
    templates: &[PromptTemplate],
    mask_token: &str,
) -> Result<Vec<InvokeRequest>> {
    let index: BTreeMap<&str, usize> = item_ids(&dataset.items)
        .into_iter()
        .enumerate()
        .map(|(i, id)| (id, i))
        .collect();
    let mut requests = Vec::new();
    for (id, _) in evaluation_golds(&dataset.items) {
        let i = index[id.as_str()];
        let item = item_at(&dataset.items, i);
        let hint = gold_hint(dataset, space, i);
        for t in templates {
            requests.push(InvokeRequest {
                prompt: render(t, item, mask_token)?,
                gold_hint: Some(hint.clone()),
            });
        }
    }
    Ok(requests)
}

/// A response as stored in `responses.jsonl`. Timing and cache provenance
/// stay out so a replayed run writes the same bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredResponse {
    pub item_id: String,
    pub template_id: String,
    pub backend_id: String,
    pub payload: Payload,
}

impl From<&RawResponse> for StoredResponse {
    fn from(r: &RawResponse) -> Self {
        StoredResponse {
            item_id: r.item_id.clone(),
            template_id: r.template_id.clone(),
            backend_id: r.backend_id.clone(),
            payload: r.payload.clone(),
        }
    }
}

impl From<StoredResponse> for RawResponse {
    fn from(r: StoredResponse) -> Self {
        RawResponse {
            item_id: r.item_id,
            template_id: r.template_id,
            backend_id: r.backend_id,
            payload: r.payload,
            latency_ms: 0,
            from_cache: true,
        }
    }
}

fn write_lines<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for row in rows {
        serde_json::to_writer(&mut out, &row)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes)?;
    Ok(())
}

/// What a call to [`run`] did.
#[derive(Debug)]
pub struct RunOutcome {
    pub run_dir: PathBuf,
    pub manifest: RunManifest,
    /// `None` for interrupted runs.
    pub scores: Option<ScoreSummary>,
    pub wire_requests: usize,
    pub cache_hits: usize,
}

fn dataset_id(task: Task, source: SourceId) -> String {
    format!("{task}.{source}")
}

fn staged<T>(manifest: &mut RunManifest, run_dir: &Path, stage: Stage, f: impl FnOnce(&mut RunManifest) -> Result<T>) -> Result<T> {
    match f(manifest) {
        Ok(v) => {
            if manifest.status(stage) == StageStatus::Pending {
                manifest.mark(stage, StageStatus::Done, None);
            }
            manifest.save(run_dir)?;
            Ok(v)
        }
        Err(e) => {
            manifest.mark(stage, StageStatus::Failed, Some(e.to_string()));
            manifest.save(run_dir)?;
            Err(e)
        }
    }
}

/// Execute every stage of a run. A rerun of the same config resumes: the
/// dataset must hash identically and cached responses are replayed.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    let backend = config.backend_config()?;
    let run_dir = config.run_dir();
    let _lock = RunLock::acquire(&run_dir)?;

    let catalog = match &config.template_dir {
        Some(dir) => Catalog::from_dir(dir)?,
        None => Catalog::builtin(),
    };
    let templates = select_templates(&catalog, &config.templates, config.task, config.source, backend.family())?;
    let previous = RunManifest::load(&run_dir).ok();
    let mut manifest = RunManifest::new(config, &backend, catalog.hash());
    if let Some(prev) = &previous {
        manifest.created_at = prev.created_at.clone();
        if prev.catalog_hash != manifest.catalog_hash {
            return Err(Error::Integrity(format!(
                "template catalog changed since run `{}` started ({} -> {})",
                config.run_id, prev.catalog_hash, manifest.catalog_hash
            )));
        }
    }
    manifest.templates = templates.iter().map(|t| t.template_id.clone()).collect();
    manifest.save(&run_dir)?;

    let corpus = match &config.dataset_dir {
        Some(_) => {
            manifest.mark(Stage::Ingest, StageStatus::Skipped, None);
            None
        }
        None => Some(staged(&mut manifest, &run_dir, Stage::Ingest, |_| {
            ingest_source(config.source, config.data_dir.as_deref(), &config.inputs)
        })?),
    };

    let dataset = staged(&mut manifest, &run_dir, Stage::Build, |m| {
        let dataset = match (&config.dataset_dir, &corpus) {
            (Some(dir), _) => TaskDataset::load(dir)?,
            (None, Some(corpus)) => build_dataset(corpus, config.task, &BuildOptions::from_config(config)?)?,
            (None, None) => unreachable!(),
        };
        if dataset.task() != config.task || dataset.source_id != config.source {
            return Err(Error::Config(format!(
                "dataset is task {} {}, run wants task {} {}",
                dataset.task(),
                dataset.source_id,
                config.task,
                config.source
            )));
        }
        let hash = dataset.save(&run_dir)?;
        if let Some(prev) = previous.as_ref().and_then(|p| p.dataset_hash.as_ref()) {
            if prev != &hash {
                return Err(Error::Integrity(format!(
                    "dataset for run `{}` no longer matches the one it started with ({prev} -> {hash})",
                    config.run_id
                )));
            }
        }
        m.dataset_hash = Some(hash);
        m.notes = count_notes(&dataset);
        for note in &m.notes {
            log::warn!("{note}");
        }
        Ok(dataset)
    })?;
    drop(corpus);

    let (space, requests) = staged(&mut manifest, &run_dir, Stage::Render, |m| {
        let space = AnswerSpace::for_dataset(&dataset, config.answer_space_dir.as_deref())?;
        write_json(&run_dir.join(ANSWER_SPACE_FILE), &space)?;
        let requests = render_requests(&dataset, &space, &templates, &backend.mask_token)?;
        write_lines(&run_dir.join(PROMPTS_FILE), requests.iter().map(|r| &r.prompt))?;
        m.items_total = requests.len() / templates.len().max(1);
        Ok((space, requests))
    })?;

    let per_item = templates.len().max(1);
    let limit = config.interrupt_after.map_or(manifest.items_total, |n| n.min(manifest.items_total));
    let (responses, wire_requests, cache_hits) = staged(&mut manifest, &run_dir, Stage::Invoke, |m| {
        let invoker = connect(&backend)?;
        let cache = if backend.kind.is_stub() {
            None
        } else {
            Some(ResponseCache::open(&config.cache_dir(), &backend.backend_id)?)
        };
        let outcome = dispatch(&*invoker, cache.as_ref(), &requests[..limit * per_item], config.parallelism);
        let mut responses: Vec<RawResponse> = Vec::new();
        let mut first_error = None;
        for slot in outcome.responses {
            match slot {
                Some(Ok(r)) => responses.push(r),
                Some(Err(e)) => {
                    first_error.get_or_insert(e);
                }
                None => {}
            }
        }
        write_lines(&run_dir.join(RESPONSES_FILE), responses.iter().map(StoredResponse::from))?;
        let mut answered: BTreeMap<&str, usize> = BTreeMap::new();
        for r in &responses {
            *answered.entry(r.item_id.as_str()).or_default() += 1;
        }
        m.items_done = answered.values().filter(|&&n| n == per_item).count();
        if let Some(e) = first_error {
            return Err(e);
        }
        if limit < m.items_total {
            m.mark(Stage::Invoke, StageStatus::Partial, Some(format!("interrupted after {limit} items")));
        }
        Ok((responses, invoker.wire_requests(), outcome.cache_hits))
    })?;

    let scores = if manifest.is_partial() {
        let rendered = report::render_runs(&[report::RunView::from_parts(&manifest, None)]);
        fs::write(run_dir.join(SUMMARY_FILE), rendered)?;
        None
    } else {
        Some(staged(&mut manifest, &run_dir, Stage::Score, |m| {
            let scores = score_run(&responses, &dataset, &dataset_id(config.task, config.source), &space, config.k)?;
            write_scores(&run_dir, m, &scores, &catalog)?;
            Ok(scores)
        })?)
    };
    manifest.save(&run_dir)?;
    Ok(RunOutcome {
        run_dir,
        manifest,
        scores,
        wire_requests,
        cache_hits,
    })
}

fn write_scores(run_dir: &Path, manifest: &RunManifest, scores: &ScoreSummary, catalog: &Catalog) -> Result<()> {
    let ledger_dir = run_dir.join(LEDGER_DIR);
    if ledger_dir.exists() {
        fs::remove_dir_all(&ledger_dir)?;
    }
    fs::create_dir_all(&ledger_dir)?;
    for r in &scores.reports {
        write_lines(&ledger_dir.join(format!("{}.jsonl", r.template_id)), &r.per_item)?;
    }
    let run_report = RunReport::new(manifest, scores, catalog);
    write_json(&run_dir.join(REPORT_FILE), &run_report)?;
    let view = report::RunView::from_parts(manifest, Some(&run_report));
    fs::write(run_dir.join(SUMMARY_FILE), report::render_runs(&[view]))?;
    Ok(())
}

/// Re-score a completed run directory from its stored responses, with an
/// optional replacement synonym directory.
pub fn score_dir(run_dir: &Path, answer_space_dir: Option<&Path>, k: Option<usize>) -> Result<ScoreSummary> {
    let _lock = RunLock::acquire(run_dir)?;
    let mut manifest = RunManifest::load(run_dir)?;
    manifest.verify(run_dir)?;
    if manifest.status(Stage::Invoke) != StageStatus::Done {
        return Err(Error::Config(format!(
            "run `{}` has not finished its invoke stage",
            manifest.run_id
        )));
    }
    let dataset = TaskDataset::load(run_dir)?;
    let space = match answer_space_dir {
        Some(dir) => AnswerSpace::for_dataset(&dataset, Some(dir))?,
        None => AnswerSpace::from_json(&fs::read_to_string(run_dir.join(ANSWER_SPACE_FILE))?)?,
    };
    let responses: Vec<RawResponse> = crate::datasets::read_jsonl::<StoredResponse>(&run_dir.join(RESPONSES_FILE))?
        .into_iter()
        .map(RawResponse::from)
        .collect();
    let catalog = match &manifest.config.template_dir {
        Some(dir) => Catalog::from_dir(dir)?,
        None => Catalog::builtin(),
    };
    let k = k.unwrap_or(manifest.config.k);
    let id = dataset_id(dataset.task(), dataset.source_id);
    let scores = staged(&mut manifest, run_dir, Stage::Score, |m| {
        let scores = score_run(&responses, &dataset, &id, &space, k)?;
        m.mark(Stage::Score, StageStatus::Done, None);
        write_json(&run_dir.join(ANSWER_SPACE_FILE), &space)?;
        write_scores(run_dir, m, &scores, &catalog)?;
        Ok(scores)
    })?;
    Ok(scores)
}

/// Prompts of a rendered run, in request order.
pub fn read_prompts(run_dir: &Path) -> Result<Vec<RenderedPrompt>> {
    crate::datasets::read_jsonl(&run_dir.join(PROMPTS_FILE))
}
