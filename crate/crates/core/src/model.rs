//! Uniform in-memory model shared by every knowledge source: term records,
//! leveled type taxonomies, and non-taxonomic relation assertions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Knowledge source (or sub-vocabulary) a dataset is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceId {
    Wordnet,
    Geonames,
    Nci,
    Medcin,
    SnomedctUs,
    /// The UMLS semantic network as a whole (taxonomy and relation tasks).
    Umls,
    Schemaorg,
}

impl SourceId {
    pub const ALL: [SourceId; 7] = [
        SourceId::Wordnet,
        SourceId::Geonames,
        SourceId::Nci,
        SourceId::Medcin,
        SourceId::SnomedctUs,
        SourceId::Umls,
        SourceId::Schemaorg,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SourceId::Wordnet => "wordnet",
            SourceId::Geonames => "geonames",
            SourceId::Nci => "nci",
            SourceId::Medcin => "medcin",
            SourceId::SnomedctUs => "snomedct_us",
            SourceId::Umls => "umls",
            SourceId::Schemaorg => "schemaorg",
        }
    }

    /// UMLS sub-vocabularies share the semantic-network type system.
    pub fn is_umls(self) -> bool {
        matches!(
            self,
            SourceId::Nci | SourceId::Medcin | SourceId::SnomedctUs | SourceId::Umls
        )
    }
}

impl fmt::Display for SourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lowered = s.trim().to_ascii_lowercase().replace(['-', '.'], "_");
        SourceId::ALL
            .into_iter()
            .find(|id| id.as_str() == lowered || (lowered == "schema_org" && *id == SourceId::Schemaorg))
            .ok_or_else(|| Error::Config(format!("unknown source `{s}`")))
    }
}

/// Ontology-learning task: term typing (A), taxonomy discovery (B),
/// non-taxonomic relation extraction (C).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Task {
    A,
    B,
    C,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::A => "A",
            Task::B => "B",
            Task::C => "C",
        }
    }

    /// Tasks B and C are true/false decisions.
    pub fn is_boolean(self) -> bool {
        self != Task::A
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" | "term_typing" | "term-typing" => Ok(Task::A),
            "b" | "taxonomy" | "taxonomy_discovery" | "taxonomy-discovery" => Ok(Task::B),
            "c" | "relations" | "relation_extraction" | "relation-extraction" => Ok(Task::C),
            _ => Err(Error::Config(format!("unknown task `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    Train,
    Test,
}

impl Partition {
    pub fn as_str(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Test => "test",
        }
    }
}

/// A lexical term with its gold type labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermRecord {
    pub term_id: String,
    pub surface_form: String,
    pub context_sentence: Option<String>,
    pub gold_types: BTreeSet<String>,
    pub source_id: SourceId,
    pub partition: Option<Partition>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeNode {
    pub label: String,
    pub level: usize,
    /// Human-readable name used in prompts when it differs from the label
    /// (GeoNames feature codes, for instance).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl TypeNode {
    pub fn new(label: impl Into<String>, level: usize) -> Self {
        TypeNode {
            label: label.into(),
            level,
            name: None,
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn display(&self) -> &str {
        self.name.as_deref().unwrap_or(&self.label)
    }
}

/// Leveled type hierarchy. Edges are `(child_label, parent_label)`.
///
/// Construction does not enforce the invariants; run
/// [`crate::ingest::validate_taxonomy`] to check them.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Taxonomy {
    pub nodes: Vec<TypeNode>,
    pub parent_edges: BTreeSet<(String, String)>,
    pub level_count: usize,
}

impl Taxonomy {
    /// Nodes are kept sorted by `(level, label)`; `level_count` is derived.
    pub fn new(mut nodes: Vec<TypeNode>, parent_edges: BTreeSet<(String, String)>) -> Self {
        nodes.sort_by(|a, b| a.level.cmp(&b.level).then_with(|| a.label.cmp(&b.label)));
        let level_count = nodes.iter().map(|n| n.level + 1).max().unwrap_or(0);
        Taxonomy {
            nodes,
            parent_edges,
            level_count,
        }
    }

    pub fn node(&self, label: &str) -> Option<&TypeNode> {
        self.nodes.iter().find(|n| n.label == label)
    }

    pub fn node_index(&self) -> BTreeMap<&str, &TypeNode> {
        self.nodes.iter().map(|n| (n.label.as_str(), n)).collect()
    }

    pub fn labels(&self) -> BTreeSet<String> {
        self.nodes.iter().map(|n| n.label.clone()).collect()
    }

    pub fn labels_sorted(&self) -> Vec<&str> {
        let mut labels: Vec<&str> = self.nodes.iter().map(|n| n.label.as_str()).collect();
        labels.sort_unstable();
        labels.dedup();
        labels
    }

    /// Prompt text per label. Colliding display names are disambiguated by
    /// appending the label so every type keeps a distinct surface form.
    pub fn display_names(&self) -> BTreeMap<String, String> {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for n in &self.nodes {
            *counts.entry(n.display()).or_default() += 1;
        }
        self.nodes
            .iter()
            .map(|n| {
                let shown = if counts[n.display()] > 1 && n.name.is_some() {
                    format!("{} ({})", n.display(), n.label)
                } else {
                    n.display().to_string()
                };
                (n.label.clone(), shown)
            })
            .collect()
    }

    pub fn parents_of(&self) -> BTreeMap<&str, Vec<&str>> {
        let mut map: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (child, parent) in &self.parent_edges {
            map.entry(child.as_str()).or_default().push(parent.as_str());
        }
        map
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RelationAssertion {
    pub head_type: String,
    pub relation: String,
    pub tail_type: String,
}

impl RelationAssertion {
    pub fn new(head: impl Into<String>, relation: impl Into<String>, tail: impl Into<String>) -> Self {
        RelationAssertion {
            head_type: head.into(),
            relation: relation.into(),
            tail_type: tail.into(),
        }
    }
}

/// Counted, non-fatal ingestion events (skipped rows, missing lookups).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestWarnings(pub BTreeMap<String, usize>);

impl IngestWarnings {
    pub fn bump(&mut self, kind: &str) {
        *self.0.entry(kind.to_string()).or_default() += 1;
    }

    pub fn count(&self, kind: &str) -> usize {
        self.0.get(kind).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.0.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceCorpus {
    pub source_id: SourceId,
    pub records: Vec<TermRecord>,
    pub type_inventory: BTreeSet<String>,
    pub taxonomy: Option<Taxonomy>,
    pub relations: Option<Vec<RelationAssertion>>,
    /// Relation names declared by the source, asserted or not.
    #[serde(default)]
    pub relation_inventory: BTreeSet<String>,
    #[serde(default)]
    pub warnings: IngestWarnings,
}

impl SourceCorpus {
    /// Labels referenced by records but missing from the type inventory.
    pub fn dangling_gold_types(&self) -> BTreeSet<String> {
        self.records
            .iter()
            .flat_map(|r| r.gold_types.iter())
            .filter(|t| !self.type_inventory.contains(*t))
            .cloned()
            .collect()
    }

    pub fn partition_counts(&self) -> (usize, usize, usize) {
        let mut train = 0;
        let mut test = 0;
        let mut unassigned = 0;
        for r in &self.records {
            match r.partition {
                Some(Partition::Train) => train += 1,
                Some(Partition::Test) => test += 1,
                None => unassigned += 1,
            }
        }
        (train, test, unassigned)
    }

    /// Human-readable names for type labels, where the source provides them.
    pub fn type_names(&self) -> BTreeMap<String, String> {
        self.taxonomy
            .as_ref()
            .map(|t| {
                t.nodes
                    .iter()
                    .filter_map(|n| n.name.clone().map(|name| (n.label.clone(), name)))
                    .collect()
            })
            .unwrap_or_default()
    }
}
