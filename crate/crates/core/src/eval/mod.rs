//! Answer normalization, answer-space mapping and scoring.

pub mod metrics;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::backends::{Payload, RawResponse};
use crate::datasets::{DatasetItems, TaskDataset};
use crate::error::{Error, Result};
use crate::model::{Partition, SourceId, Task};

pub use metrics::{map_at_k, prf1, Prf};

const BUILTIN_SYNONYMS: [(&str, &str); 4] = [
    ("boolean", include_str!("../../answer_spaces/boolean.json")),
    ("wordnet", include_str!("../../answer_spaces/wordnet.json")),
    ("geonames", include_str!("../../answer_spaces/geonames.json")),
    ("umls", include_str!("../../answer_spaces/umls.json")),
];

const ARTICLES: [&str; 3] = ["a ", "an ", "the "];

/// Canonical label -> extra accepted surface forms.
pub type Synonyms = BTreeMap<String, Vec<String>>;

fn normalize_step(text: &str) -> String {
    let lowered: String = text.to_lowercase().nfc().collect();
    let mut s = lowered.trim_matches(|c: char| !c.is_alphanumeric()).to_string();
    for article in ARTICLES {
        if let Some(rest) = s.strip_prefix(article) {
            s = rest.to_string();
            break;
        }
    }
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// NFC, lowercase, strip surrounding punctuation and whitespace, drop a
/// leading article and collapse internal whitespace, repeated to a fixed
/// point.
pub fn normalize(text: &str) -> String {
    let mut current: String = text.nfc().collect();
    loop {
        let next = normalize_step(&current);
        if next == current {
            return next;
        }
        current = next;
    }
}

/// Synonym table for an answer-space key (`boolean`, `wordnet`, `geonames`,
/// `umls`). A file `<key>.json` under `dir` replaces the shipped table.
pub fn load_synonyms(key: &str, dir: Option<&Path>) -> Result<Synonyms> {
    if let Some(dir) = dir {
        let path = dir.join(format!("{key}.json"));
        if path.exists() {
            let text = std::fs::read_to_string(&path)?;
            return serde_json::from_str(&text).map_err(|e| Error::parse(&path, e.line(), e.to_string()));
        }
    }
    Ok(BUILTIN_SYNONYMS
        .iter()
        .find(|(k, _)| *k == key)
        .map(|(_, text)| serde_json::from_str(text).expect("shipped synonym table parses"))
        .unwrap_or_default())
}

/// Synonym-table key for a source's term types.
pub fn synonym_key(source: SourceId) -> &'static str {
    match source {
        SourceId::Wordnet => "wordnet",
        SourceId::Geonames => "geonames",
        SourceId::Schemaorg => "schemaorg",
        _ => "umls",
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerSpace {
    pub task: Task,
    pub labels: BTreeMap<String, BTreeSet<String>>,
    /// Normalized variant -> canonical label.
    #[serde(skip)]
    lookup: BTreeMap<String, String>,
}

impl AnswerSpace {
    /// Build a space from canonical labels, their display names and synonyms.
    /// Each label first claims its own normalized form, then its display
    /// name, then its synonyms; a variant already claimed stays with the
    /// earlier label.
    pub fn new(task: Task, names: &BTreeMap<String, Option<String>>, synonyms: &Synonyms) -> Result<Self> {
        let mut space = AnswerSpace {
            task,
            labels: BTreeMap::new(),
            lookup: BTreeMap::new(),
        };
        for label in names.keys() {
            let own = normalize(label);
            if own.is_empty() {
                return Err(Error::Config(format!("answer label `{label}` is empty after normalization")));
            }
            if let Some(other) = space.lookup.get(&own) {
                return Err(Error::Config(format!(
                    "answer labels `{other}` and `{label}` normalize to the same text"
                )));
            }
            space.claim(label, own);
        }
        for (label, name) in names {
            if let Some(name) = name {
                space.claim(label, normalize(name));
            }
        }
        for (label, extra) in synonyms {
            if names.contains_key(label) {
                for variant in extra {
                    space.claim(label, normalize(variant));
                }
            }
        }
        Ok(space)
    }

    fn claim(&mut self, label: &str, variant: String) {
        if variant.is_empty() || self.lookup.contains_key(&variant) {
            return;
        }
        self.lookup.insert(variant.clone(), label.to_string());
        self.labels.entry(label.to_string()).or_default().insert(variant);
    }

    pub fn boolean(task: Task, synonyms: &Synonyms) -> Result<Self> {
        if !task.is_boolean() {
            return Err(Error::Config(format!("task {task} is not a true/false task")));
        }
        let names = BTreeMap::from([("true".to_string(), None), ("false".to_string(), None)]);
        AnswerSpace::new(task, &names, synonyms)
    }

    /// The space a dataset is scored against.
    pub fn for_dataset(dataset: &TaskDataset, synonym_dir: Option<&Path>) -> Result<Self> {
        let task = dataset.task();
        if task.is_boolean() {
            return AnswerSpace::boolean(task, &load_synonyms("boolean", synonym_dir)?);
        }
        let DatasetItems::A(items) = &dataset.items else { unreachable!() };
        let names: BTreeMap<String, Option<String>> = items
            .iter()
            .flat_map(|i| i.gold_types.iter())
            .map(|label| (label.clone(), dataset.type_names.get(label).cloned()))
            .collect();
        let synonyms = load_synonyms(synonym_key(dataset.source_id), synonym_dir)?;
        AnswerSpace::new(task, &names, &synonyms)
    }

    pub fn canonical(&self, variant: &str) -> Option<&str> {
        self.lookup.get(&normalize(variant)).map(String::as_str)
    }

    /// A surface form that maps back to `label`: its display name when that
    /// was claimed, otherwise its normalized label.
    pub fn preferred_surface(&self, label: &str, display: Option<&str>) -> String {
        if let Some(d) = display {
            if self.canonical(d) == Some(label) {
                return d.to_string();
            }
        }
        normalize(label)
    }

    fn rebuild_lookup(&mut self) {
        self.lookup = self
            .labels
            .iter()
            .flat_map(|(label, variants)| variants.iter().map(move |v| (v.clone(), label.clone())))
            .collect();
    }

    /// Read a space written with `serde_json`.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut space: AnswerSpace = serde_json::from_str(text)?;
        space.rebuild_lookup();
        Ok(space)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub item_id: String,
    pub ranked_labels: Vec<String>,
    pub raw_text: String,
    #[serde(default)]
    pub ambiguous: bool,
}

impl Prediction {
    pub fn top(&self) -> Option<&str> {
        self.ranked_labels.first().map(String::as_str)
    }
}

fn whole_word_prefix(text: &str, prefix: &str) -> bool {
    text.strip_prefix(prefix)
        .is_some_and(|rest| rest.chars().next().is_none_or(|c| !c.is_alphanumeric()))
}

fn raw_text(payload: &Payload) -> String {
    match payload {
        Payload::Text(t) => t.clone(),
        Payload::Ranked(tokens) => tokens
            .iter()
            .map(|t| format!("{} ({:.4})", t.token, t.score))
            .collect::<Vec<_>>()
            .join(" | "),
    }
}

fn strip_piece_marker(token: &str) -> &str {
    token.trim_start_matches(['Ġ', '▁', '#'])
}

fn ranked_by_score(payload: &Payload) -> Vec<&str> {
    let Payload::Ranked(tokens) = payload else { return Vec::new() };
    let mut order: Vec<usize> = (0..tokens.len()).collect();
    order.sort_by(|&a, &b| tokens[b].score.total_cmp(&tokens[a].score).then(a.cmp(&b)));
    order.into_iter().map(|i| strip_piece_marker(&tokens[i].token)).collect()
}

fn dedup(labels: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut seen = BTreeSet::new();
    labels.into_iter().filter(|l| seen.insert(l.clone())).collect()
}

/// Map a term-typing response onto canonical type labels.
pub fn map_term_type(item_id: &str, payload: &Payload, space: &AnswerSpace) -> Prediction {
    let raw = raw_text(payload);
    if let Payload::Ranked(_) = payload {
        let labels = ranked_by_score(payload)
            .into_iter()
            .filter_map(|t| space.canonical(t).map(str::to_string));
        return Prediction {
            item_id: item_id.to_string(),
            ranked_labels: dedup(labels),
            raw_text: raw,
            ambiguous: false,
        };
    }
    let text = normalize(&raw);
    let mut prediction = Prediction {
        item_id: item_id.to_string(),
        ranked_labels: Vec::new(),
        raw_text: raw,
        ambiguous: false,
    };
    if let Some(label) = space.lookup.get(&text) {
        prediction.ranked_labels.push(label.clone());
        return prediction;
    }
    // Longest matching variant per label, then rank labels by it.
    let mut best: BTreeMap<&str, usize> = BTreeMap::new();
    for (variant, label) in &space.lookup {
        if whole_word_prefix(&text, variant) {
            let len = best.entry(label.as_str()).or_default();
            *len = (*len).max(variant.chars().count());
        }
    }
    let mut ranked: Vec<(&str, usize)> = best.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    prediction.ambiguous = ranked.len() > 1;
    prediction.ranked_labels = ranked.into_iter().map(|(l, _)| l.to_string()).collect();
    prediction
}

/// Map a true/false response onto `true` or `false`.
pub fn map_boolean(item_id: &str, payload: &Payload, space: &AnswerSpace) -> Prediction {
    let raw = raw_text(payload);
    let label = match payload {
        Payload::Ranked(_) => ranked_by_score(payload)
            .into_iter()
            .find_map(|t| space.canonical(t).map(str::to_string)),
        Payload::Text(t) => {
            let text = normalize(t);
            // Earliest whole-word hit; the longer variant wins at equal start.
            let mut hit: Option<(usize, usize, &str)> = None;
            for (start, _) in text.char_indices() {
                if start > 0 && text[..start].chars().next_back().is_some_and(char::is_alphanumeric) {
                    continue;
                }
                for (variant, label) in &space.lookup {
                    if whole_word_prefix(&text[start..], variant) {
                        let len = variant.len();
                        if hit.is_none_or(|(s, l, _)| start < s || (start == s && len > l)) {
                            hit = Some((start, len, label));
                        }
                    }
                }
                if hit.is_some() {
                    break;
                }
            }
            hit.map(|(_, _, l)| l.to_string())
        }
    };
    Prediction {
        item_id: item_id.to_string(),
        ranked_labels: label.into_iter().collect(),
        raw_text: raw,
        ambiguous: false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub item_id: String,
    pub predicted: Option<String>,
    pub gold: Vec<String>,
    pub hit: bool,
    /// No answer-space label matched the response.
    pub miss: bool,
    pub ambiguous: bool,
    pub raw_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub dataset_id: String,
    pub backend_id: String,
    pub template_id: String,
    pub n_items: usize,
    pub k: usize,
    pub map_at_1: f64,
    pub map_at_k: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recall: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f1: Option<f64>,
    pub misses: usize,
    pub ambiguous: usize,
    #[serde(skip)]
    pub per_item: Vec<LedgerRow>,
}

impl EvalReport {
    /// MAP@1 for term typing, F1 otherwise.
    pub fn headline(&self) -> f64 {
        self.f1.unwrap_or(self.map_at_1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub reports: Vec<EvalReport>,
    /// Template with the highest headline score; ties go to the smaller id.
    pub best_template: Option<String>,
}

impl ScoreSummary {
    pub fn best(&self) -> Option<&EvalReport> {
        let id = self.best_template.as_deref()?;
        self.reports.iter().find(|r| r.template_id == id)
    }
}

/// Scored items with their gold answers: the test partition, or every item
/// when the dataset was never split.
pub fn evaluation_golds(items: &DatasetItems) -> Vec<(String, BTreeSet<String>)> {
    fn pick<T>(items: &[T], part: impl Fn(&T) -> Option<Partition>) -> Vec<&T> {
        let split = items.iter().any(|i| part(i).is_some());
        items
            .iter()
            .filter(|i| !split || part(i) == Some(Partition::Test))
            .collect()
    }
    let bool_gold = |b: bool| BTreeSet::from([b.to_string()]);
    match items {
        DatasetItems::A(v) => pick(v, |i| Some(i.partition))
            .into_iter()
            .map(|i| (i.item_id.clone(), i.gold_types.iter().cloned().collect()))
            .collect(),
        DatasetItems::B(v) => pick(v, |i| i.partition)
            .into_iter()
            .map(|i| (i.item_id.clone(), bool_gold(i.label)))
            .collect(),
        DatasetItems::C(v) => pick(v, |i| i.partition)
            .into_iter()
            .map(|i| (i.item_id.clone(), bool_gold(i.label)))
            .collect(),
    }
}

/// Score one backend's responses, template by template.
pub fn score_run(
    responses: &[RawResponse],
    dataset: &TaskDataset,
    dataset_id: &str,
    space: &AnswerSpace,
    k: usize,
) -> Result<ScoreSummary> {
    let task = dataset.task();
    if space.task != task {
        return Err(Error::Config(format!("answer space is for task {}, dataset is task {task}", space.task)));
    }
    let golds_list = evaluation_golds(&dataset.items);
    let golds: BTreeMap<String, BTreeSet<String>> = golds_list.iter().cloned().collect();

    let mut by_template: BTreeMap<&str, BTreeMap<&str, &RawResponse>> = BTreeMap::new();
    for r in responses {
        if !golds.contains_key(&r.item_id) {
            return Err(Error::Integrity(format!("response for unknown item `{}`", r.item_id)));
        }
        if by_template
            .entry(&r.template_id)
            .or_default()
            .insert(&r.item_id, r)
            .is_some()
        {
            return Err(Error::Integrity(format!(
                "item `{}` answered twice under template {}",
                r.item_id, r.template_id
            )));
        }
    }

    let mut reports = Vec::new();
    for (template_id, answered) in by_template {
        let missing: Vec<String> = golds_list
            .iter()
            .filter(|(id, _)| !answered.contains_key(id.as_str()))
            .map(|(id, _)| id.clone())
            .collect();
        if !missing.is_empty() {
            return Err(Error::Coverage {
                template_id: template_id.to_string(),
                missing,
            });
        }
        let backend_id = answered.values().next().map(|r| r.backend_id.clone()).unwrap_or_default();
        let predictions: Vec<Prediction> = golds_list
            .iter()
            .map(|(id, _)| {
                let r = answered[id.as_str()];
                if task.is_boolean() {
                    map_boolean(id, &r.payload, space)
                } else {
                    map_term_type(id, &r.payload, space)
                }
            })
            .collect();
        reports.push(report(task, dataset_id, &backend_id, template_id, &predictions, &golds, k)?);
    }

    let best_template = reports
        .iter()
        .fold(None::<&EvalReport>, |best, r| match best {
            Some(b) if b.headline() >= r.headline() => Some(b),
            _ => Some(r),
        })
        .map(|r| r.template_id.clone());
    Ok(ScoreSummary { reports, best_template })
}

fn report(
    task: Task,
    dataset_id: &str,
    backend_id: &str,
    template_id: &str,
    predictions: &[Prediction],
    golds: &BTreeMap<String, BTreeSet<String>>,
    k: usize,
) -> Result<EvalReport> {
    let (precision, recall, f1) = if task.is_boolean() {
        let truth: BTreeMap<String, bool> = predictions
            .iter()
            .map(|p| (p.item_id.clone(), golds[&p.item_id].contains("true")))
            .collect();
        let prf = prf1(predictions, &truth)?;
        (Some(prf.precision), Some(prf.recall), Some(prf.f1))
    } else {
        (None, None, None)
    };
    let per_item: Vec<LedgerRow> = predictions
        .iter()
        .map(|p| {
            let gold = &golds[&p.item_id];
            LedgerRow {
                item_id: p.item_id.clone(),
                predicted: p.top().map(str::to_string),
                gold: gold.iter().cloned().collect(),
                hit: p.top().is_some_and(|t| gold.contains(t)),
                miss: p.ranked_labels.is_empty(),
                ambiguous: p.ambiguous,
                raw_text: p.raw_text.clone(),
            }
        })
        .collect();
    Ok(EvalReport {
        task,
        dataset_id: dataset_id.to_string(),
        backend_id: backend_id.to_string(),
        template_id: template_id.to_string(),
        n_items: predictions.len(),
        k,
        map_at_1: map_at_k(predictions, golds, 1)?,
        map_at_k: map_at_k(predictions, golds, k)?,
        precision,
        recall,
        f1,
        misses: per_item.iter().filter(|r| r.miss).count(),
        ambiguous: per_item.iter().filter(|r| r.ambiguous).count(),
        per_item,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::RankedToken;
    use crate::datasets::TermTypingItem;

    fn wordnet_space() -> AnswerSpace {
        let names = ["noun", "verb", "adjective", "adverb"]
            .into_iter()
            .map(|l| (l.to_string(), None))
            .collect();
        AnswerSpace::new(Task::A, &names, &load_synonyms("wordnet", None).unwrap()).unwrap()
    }

    fn text(t: &str) -> Payload {
        Payload::Text(t.into())
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize(" A Noun."), "noun");
        assert_eq!(normalize("TRUE"), "true");
        assert_eq!(normalize("the Parent  Class"), "parent class");
        assert_eq!(normalize("\"The  answer:\n lake\"."), "answer: lake");
        assert_eq!(normalize("a"), "a");
        assert_eq!(normalize("...the a noun"), "noun");
        assert_eq!(normalize("Cafe\u{301}"), "café");
    }

    #[test]
    fn term_type_mapping() {
        let s = wordnet_space();
        assert_eq!(map_term_type("1", &text("noun"), &s).ranked_labels, ["noun"]);
        assert_eq!(map_term_type("1", &text("noun phrase"), &s).ranked_labels, ["noun"]);
        assert_eq!(map_term_type("1", &text("Verbs."), &s).ranked_labels, ["verb"]);
        assert_eq!(map_term_type("1", &text("Noun.\nExplanation: it names a thing"), &s).ranked_labels, ["noun"]);
        assert!(map_term_type("1", &text("qwertyuiop"), &s).ranked_labels.is_empty());
        assert!(map_term_type("1", &text("nounish"), &s).ranked_labels.is_empty());
    }

    #[test]
    fn longer_variant_wins() {
        let names = BTreeMap::from([("x".to_string(), None), ("y".to_string(), None)]);
        let syn = Synonyms::from([
            ("x".to_string(), vec!["red".to_string()]),
            ("y".to_string(), vec!["red wine".to_string(), "red".to_string()]),
        ]);
        let s = AnswerSpace::new(Task::A, &names, &syn).unwrap();
        // "red" was claimed by x first; y keeps only "red wine".
        assert_eq!(s.labels["y"], BTreeSet::from(["y".to_string(), "red wine".to_string()]));
        let p = map_term_type("1", &text("red wine from france"), &s);
        assert_eq!(p.ranked_labels, ["y", "x"]);
        assert!(p.ambiguous);
        assert!(!map_term_type("1", &text("red"), &s).ambiguous);
    }

    #[test]
    fn variant_sets_are_disjoint_and_contain_their_label() {
        let s = wordnet_space();
        let mut seen = BTreeSet::new();
        for (label, variants) in &s.labels {
            assert!(variants.contains(label));
            for v in variants {
                assert!(seen.insert(v.clone()), "{v} claimed twice");
            }
        }
    }

    #[test]
    fn clashing_labels_are_rejected() {
        let names = BTreeMap::from([("Lake".to_string(), None), ("lake".to_string(), None)]);
        assert!(AnswerSpace::new(Task::A, &names, &Synonyms::new()).unwrap_err().is_config());
    }

    #[test]
    fn boolean_mapping() {
        let s = AnswerSpace::boolean(Task::B, &load_synonyms("boolean", None).unwrap()).unwrap();
        assert_eq!(map_boolean("1", &text("This statement is true."), &s).ranked_labels, ["true"]);
        assert_eq!(map_boolean("1", &text("No, that is wrong"), &s).ranked_labels, ["false"]);
        assert!(map_boolean("1", &text("I cannot determine"), &s).ranked_labels.is_empty());
        assert!(map_boolean("1", &text("I do not know"), &s).ranked_labels.is_empty());
        let ranked = Payload::Ranked(vec![
            RankedToken { token: "false".into(), score: 0.6 },
            RankedToken { token: "true".into(), score: 0.3 },
        ]);
        assert_eq!(map_boolean("1", &ranked, &s).ranked_labels, ["false"]);
        let ranked = Payload::Ranked(vec![
            RankedToken { token: "maybe".into(), score: 0.9 },
            RankedToken { token: "ĠTrue".into(), score: 0.1 },
        ]);
        assert_eq!(map_boolean("1", &ranked, &s).ranked_labels, ["true"]);
        assert!(AnswerSpace::boolean(Task::A, &Synonyms::new()).is_err());
    }

    #[test]
    fn geonames_space_uses_type_names() {
        let item = |id: &str, ty: &str| TermTypingItem {
            item_id: id.into(),
            term: id.into(),
            sentence: None,
            gold_types: vec![ty.into()],
            partition: Partition::Test,
        };
        let ds = TaskDataset {
            source_id: SourceId::Geonames,
            items: DatasetItems::A(vec![item("Loch Ness", "LK"), item("Thames", "STM")]),
            type_names: BTreeMap::from([("LK".into(), "lake".into()), ("STM".into(), "stream".into())]),
        };
        let s = AnswerSpace::for_dataset(&ds, None).unwrap();
        assert_eq!(s.canonical("Lake"), Some("LK"));
        assert_eq!(s.canonical("a river"), Some("STM"));
        assert_eq!(s.preferred_surface("LK", Some("lake")), "lake");
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(AnswerSpace::from_json(&json).unwrap(), s);
    }

    #[test]
    fn shipped_tables_override_from_dir() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("wordnet.json"), r#"{"noun": ["thing word"]}"#).unwrap();
        let syn = load_synonyms("wordnet", Some(dir.path())).unwrap();
        assert_eq!(syn["noun"], ["thing word"]);
        assert!(load_synonyms("umls", Some(dir.path())).unwrap().contains_key("Disease or Syndrome"));
        assert!(load_synonyms("schemaorg", None).unwrap().is_empty());
    }

    fn ds_a(n: usize) -> TaskDataset {
        TaskDataset {
            source_id: SourceId::Wordnet,
            items: DatasetItems::A(
                (0..n)
                    .map(|i| TermTypingItem {
                        item_id: format!("i{i}"),
                        term: format!("t{i}"),
                        sentence: None,
                        gold_types: vec![if i % 2 == 0 { "noun" } else { "verb" }.into()],
                        partition: Partition::Test,
                    })
                    .collect(),
            ),
            type_names: BTreeMap::new(),
        }
    }

    fn resp(item: &str, template: &str, t: &str) -> RawResponse {
        RawResponse {
            item_id: item.into(),
            template_id: template.into(),
            backend_id: "b".into(),
            payload: text(t),
            latency_ms: 0,
            from_cache: false,
        }
    }

    #[test]
    fn score_run_reports_each_template_and_the_best() {
        let ds = ds_a(4);
        let space = AnswerSpace::for_dataset(&ds, None).unwrap();
        let mut rs = Vec::new();
        for i in 0..4 {
            rs.push(resp(&format!("i{i}"), "t1", "noun"));
            rs.push(resp(&format!("i{i}"), "t2", if i % 2 == 0 { "noun" } else { "verb" }));
            rs.push(resp(&format!("i{i}"), "t3", "gibberish"));
        }
        let s = score_run(&rs, &ds, "wordnet", &space, 1).unwrap();
        let scores: Vec<_> = s.reports.iter().map(|r| (r.template_id.as_str(), r.map_at_1)).collect();
        assert_eq!(scores, [("t1", 0.5), ("t2", 1.0), ("t3", 0.0)]);
        assert_eq!(s.best_template.as_deref(), Some("t2"));
        assert_eq!(s.reports[2].misses, 4);
        assert_eq!(s.best().unwrap().per_item.len(), 4);
    }

    #[test]
    fn coverage_gaps_and_strays_are_errors() {
        let ds = ds_a(3);
        let space = AnswerSpace::for_dataset(&ds, None).unwrap();
        let rs = vec![resp("i0", "t1", "noun"), resp("i2", "t1", "noun")];
        match score_run(&rs, &ds, "d", &space, 1) {
            Err(Error::Coverage { template_id, missing }) => {
                assert_eq!(template_id, "t1");
                assert_eq!(missing, ["i1"]);
            }
            other => panic!("{other:?}"),
        }
        let rs = vec![resp("zz", "t1", "noun")];
        assert!(matches!(score_run(&rs, &ds, "d", &space, 1), Err(Error::Integrity(_))));
    }
}
