//! Template catalogs and prompt rendering.
//!
//! Catalogs ship as line-delimited JSON under `templates/`, one file per
//! task/source table, and are embedded at build time.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datasets::{RelationTripleItem, TermTypingItem, TypePairItem};
use crate::error::{Error, Result};
use crate::model::{SourceId, Task};

/// In file-name order, matching [`Catalog::from_dir`].
const BUILTIN: [(&str, &str); 5] = [
    ("task_a_geonames.jsonl", include_str!("../../templates/task_a_geonames.jsonl")),
    ("task_a_umls.jsonl", include_str!("../../templates/task_a_umls.jsonl")),
    ("task_a_wordnet.jsonl", include_str!("../../templates/task_a_wordnet.jsonl")),
    ("task_b.jsonl", include_str!("../../templates/task_b.jsonl")),
    ("task_c.jsonl", include_str!("../../templates/task_c.jsonl")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Cloze with a mask token (BERT/BART style).
    Masked,
    /// Encoder-decoder prefix prompts (Flan-T5 style).
    Seq2seq,
    /// Instruction prefix for decoder-only models.
    Causal,
    /// Instruction prefix ending in "The answer is" (LLaMA style).
    CausalAnswerSuffix,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Masked, Family::Seq2seq, Family::Causal, Family::CausalAnswerSuffix];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Masked => "masked",
            Family::Seq2seq => "seq2seq",
            Family::Causal => "causal",
            Family::CausalAnswerSuffix => "causal_answer_suffix",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase().replace('-', "_");
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s || (s == "cloze" && *f == Family::Masked))
            .ok_or_else(|| Error::Config(format!("unknown model family `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub template_id: String,
    pub task: Task,
    /// Catalog key: `wordnet`, `geonames`, `umls`, or `any`.
    pub source: String,
    pub family: Family,
    pub pattern: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_phrase: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hierarchy_phrase: Option<String>,
}

impl PromptTemplate {
    /// Placeholder names in order of appearance.
    pub fn placeholders(&self) -> Vec<&str> {
        let mut names = Vec::new();
        let mut rest = self.pattern.as_str();
        while let Some(open) = rest.find('{') {
            let Some(close) = rest[open..].find('}') else { break };
            names.push(&rest[open + 1..open + close]);
            rest = &rest[open + close + 1..];
        }
        names
    }
}

fn allowed_placeholders(task: Task) -> &'static [&'static str] {
    match task {
        Task::A => &["S", "L", "P_domain", "MASK"],
        Task::B => &["a", "b", "MASK"],
        Task::C => &["h", "r", "t", "MASK"],
    }
}

/// Catalog key for a (task, source) combination, or `None` when the
/// combination has no catalog.
fn catalog_source(task: Task, source: SourceId) -> Option<&'static str> {
    match (task, source) {
        (Task::A, SourceId::Wordnet) => Some("wordnet"),
        (Task::A, SourceId::Geonames) => Some("geonames"),
        (Task::A, s) if s.is_umls() => Some("umls"),
        (Task::B, SourceId::Geonames | SourceId::Schemaorg) => Some("any"),
        (Task::B, s) if s.is_umls() => Some("any"),
        (Task::C, s) if s.is_umls() => Some("umls"),
        _ => None,
    }
}

#[derive(Debug, Clone)]
pub struct Catalog {
    templates: Vec<PromptTemplate>,
    hash: String,
}

impl Catalog {
    pub fn builtin() -> Self {
        Catalog::from_files(BUILTIN.iter().map(|(n, t)| (n.to_string(), t.to_string())))
            .expect("shipped template data is valid")
    }

    /// The shipped template data files as `(file name, contents)`.
    pub fn builtin_files() -> impl Iterator<Item = (&'static str, &'static str)> {
        BUILTIN.into_iter()
    }

    /// Load every `*.jsonl` file in a directory, in file-name order.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let mut files = Vec::new();
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "jsonl") {
                let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
                files.push((name, std::fs::read_to_string(&path)?));
            }
        }
        files.sort();
        Catalog::from_files(files)
    }

    fn from_files(files: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let mut templates = Vec::new();
        let mut hasher = Sha256::new();
        for (name, text) in files {
            hasher.update(name.as_bytes());
            hasher.update([0]);
            hasher.update(text.as_bytes());
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let t: PromptTemplate = serde_json::from_str(line)
                    .map_err(|e| Error::TemplateData(format!("{name}:{}: {e}", i + 1)))?;
                validate_template(&t)?;
                templates.push(t);
            }
        }
        let mut seen = BTreeMap::new();
        for t in &templates {
            if seen.insert(t.template_id.as_str(), ()).is_some() {
                return Err(Error::TemplateData(format!("duplicate template id `{}`", t.template_id)));
            }
        }
        Ok(Catalog {
            templates,
            hash: hex::encode(hasher.finalize()),
        })
    }

    pub fn all(&self) -> &[PromptTemplate] {
        &self.templates
    }

    /// SHA-256 over the catalog files, for run manifests.
    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn get(&self, template_id: &str) -> Option<&PromptTemplate> {
        self.templates.iter().find(|t| t.template_id == template_id)
    }

    /// Templates for one (task, source, family), in t1..t8 order.
    pub fn template_catalog(&self, task: Task, source: SourceId, family: Family) -> Result<Vec<PromptTemplate>> {
        let missing = || Error::CatalogMissing {
            task: task.to_string(),
            source_id: source.to_string(),
            family: family.to_string(),
        };
        let key = catalog_source(task, source).ok_or_else(missing)?;
        let found: Vec<PromptTemplate> = self
            .templates
            .iter()
            .filter(|t| t.task == task && t.source == key && t.family == family)
            .cloned()
            .collect();
        if found.is_empty() {
            return Err(missing());
        }
        Ok(found)
    }
}

fn validate_template(t: &PromptTemplate) -> Result<()> {
    let bad = |msg: String| Err(Error::TemplateData(format!("{}: {msg}", t.template_id)));
    let allowed = allowed_placeholders(t.task);
    let names = t.placeholders();
    if let Some(p) = names.iter().find(|p| !allowed.contains(p)) {
        return bad(format!("placeholder {{{p}}} is not valid for task {}", t.task));
    }
    let masks = names.iter().filter(|p| **p == "MASK").count();
    match (t.family, masks) {
        (Family::Masked, 1) => {}
        (Family::Masked, n) => return bad(format!("masked pattern needs exactly one {{MASK}}, found {n}")),
        (_, 0) => {}
        (_, _) => return bad("only masked patterns may contain {MASK}".into()),
    }
    if names.contains(&"P_domain") && t.domain_phrase.is_none() {
        return bad("{P_domain} used without a domain_phrase".into());
    }
    Ok(())
}

/// Values available for substitution.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Slots {
    pub task: Option<Task>,
    pub values: BTreeMap<&'static str, String>,
}

impl Slots {
    fn with(task: Task, pairs: impl IntoIterator<Item = (&'static str, Option<String>)>) -> Self {
        Slots {
            task: Some(task),
            values: pairs.into_iter().filter_map(|(k, v)| v.map(|v| (k, v))).collect(),
        }
    }
}

/// Relation names are stored with underscores (`associated_with`).
pub fn humanize_relation(name: &str) -> String {
    name.split('_').filter(|s| !s.is_empty()).collect::<Vec<_>>().join(" ")
}

pub trait PromptItem {
    fn item_id(&self) -> &str;
    fn slots(&self) -> Slots;
}

impl PromptItem for TermTypingItem {
    fn item_id(&self) -> &str {
        &self.item_id
    }
    fn slots(&self) -> Slots {
        Slots::with(Task::A, [("S", self.sentence.clone()), ("L", Some(self.term.clone()))])
    }
}

impl PromptItem for TypePairItem {
    fn item_id(&self) -> &str {
        &self.item_id
    }
    fn slots(&self) -> Slots {
        Slots::with(Task::B, [("a", Some(self.a.clone())), ("b", Some(self.b.clone()))])
    }
}

impl PromptItem for RelationTripleItem {
    fn item_id(&self) -> &str {
        &self.item_id
    }
    fn slots(&self) -> Slots {
        Slots::with(
            Task::C,
            [
                ("h", Some(self.h.clone())),
                ("r", Some(humanize_relation(&self.r))),
                ("t", Some(self.t.clone())),
            ],
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub template_id: String,
    pub item_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_token_used: Option<String>,
}

/// Substitute every placeholder. When the item has no sentence, the
/// `"{S}. "` segment is dropped whole.
pub fn render<I: PromptItem + ?Sized>(template: &PromptTemplate, item: &I, mask_token: &str) -> Result<RenderedPrompt> {
    let slots = item.slots();
    let task_ok = slots.task.is_none_or(|t| t == template.task);
    let mut pattern = template.pattern.clone();
    if !slots.values.contains_key("S") {
        pattern = pattern.replace("{S}. ", "");
    }
    let mut text = String::with_capacity(pattern.len() + 32);
    let mut missing = Vec::new();
    let mut rest = pattern.as_str();
    let mut used_mask = false;
    while let Some(open) = rest.find('{') {
        let Some(close) = rest[open..].find('}') else { break };
        text.push_str(&rest[..open]);
        let name = &rest[open + 1..open + close];
        let value = match name {
            "MASK" if template.family == Family::Masked => {
                used_mask = true;
                Some(mask_token.to_string())
            }
            "P_domain" => template.domain_phrase.clone(),
            _ if task_ok => slots.values.get(name).cloned(),
            _ => None,
        };
        match value {
            Some(v) => text.push_str(&v),
            None => missing.push(format!("{{{name}}}")),
        }
        rest = &rest[open + close + 1..];
    }
    text.push_str(rest);
    if !missing.is_empty() {
        return Err(Error::Render {
            template_id: template.template_id.clone(),
            placeholders: missing,
        });
    }
    Ok(RenderedPrompt {
        template_id: template.template_id.clone(),
        item_id: item.item_id().to_string(),
        text,
        mask_token_used: used_mask.then(|| mask_token.to_string()),
    })
}
