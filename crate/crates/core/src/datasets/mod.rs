//! Task A/B/C evaluation datasets built from parsed corpora.

mod split;

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use split::{split_dataset, SplitSpec, Splittable};

use crate::error::{Error, Result};
use crate::ingest::{open_lines, validate_taxonomy};
use crate::model::{Partition, RelationAssertion, SourceCorpus, SourceId, Task, Taxonomy, TermRecord};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermTypingItem {
    pub item_id: String,
    pub term: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentence: Option<String>,
    pub gold_types: Vec<String>,
    pub partition: Partition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Direct,
    Inverted,
    Transitive,
    TransitiveInverted,
}

/// "`a` is the superclass of `b`", true or false. `a` and `b` hold the
/// prompt-facing type names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypePairItem {
    pub item_id: String,
    pub a: String,
    pub b: String,
    pub label: bool,
    pub provenance: Provenance,
    #[serde(default)]
    pub partition: Option<Partition>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationTripleItem {
    pub item_id: String,
    pub h: String,
    pub r: String,
    pub t: String,
    pub label: bool,
    #[serde(default)]
    pub partition: Option<Partition>,
}

impl Splittable for TermRecord {
    fn sort_key(&self) -> String {
        self.term_id.clone()
    }
    fn stratum(&self) -> String {
        self.gold_types.iter().cloned().collect::<Vec<_>>().join("\u{1f}")
    }
    fn set_partition(&mut self, partition: Partition) {
        self.partition = Some(partition);
    }
}

impl Splittable for TypePairItem {
    fn sort_key(&self) -> String {
        self.item_id.clone()
    }
    fn stratum(&self) -> String {
        self.label.to_string()
    }
    fn set_partition(&mut self, partition: Partition) {
        self.partition = Some(partition);
    }
}

impl Splittable for RelationTripleItem {
    fn sort_key(&self) -> String {
        self.item_id.clone()
    }
    fn stratum(&self) -> String {
        self.label.to_string()
    }
    fn set_partition(&mut self, partition: Partition) {
        self.partition = Some(partition);
    }
}

/// Assign train/test partitions to a corpus whose source has no native
/// split. Records come back sorted by `term_id`.
pub fn apply_split(corpus: &SourceCorpus, spec: &SplitSpec) -> SourceCorpus {
    let (train, test) = split_dataset(corpus.records.clone(), spec);
    let mut records: Vec<TermRecord> = train.into_iter().chain(test).collect();
    records.sort_by(|a, b| a.term_id.cmp(&b.term_id));
    SourceCorpus {
        records,
        ..corpus.clone()
    }
}

/// One item per record, sorted by `term_id`. Every record must already
/// carry a partition.
pub fn build_term_typing(corpus: &SourceCorpus) -> Result<Vec<TermTypingItem>> {
    if corpus.records.is_empty() {
        return Err(Error::EmptyDataset(format!("{} corpus has no records", corpus.source_id)));
    }
    let mut items = corpus
        .records
        .iter()
        .map(|r| {
            let partition = r.partition.ok_or_else(|| {
                Error::Config(format!(
                    "record `{}` has no partition; apply a split to the {} corpus first",
                    r.term_id, corpus.source_id
                ))
            })?;
            Ok(TermTypingItem {
                item_id: r.term_id.clone(),
                term: r.surface_form.clone(),
                sentence: r.context_sentence.clone(),
                gold_types: r.gold_types.iter().cloned().collect(),
                partition,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    items.sort_by(|a, b| a.item_id.cmp(&b.item_id));
    Ok(items)
}

/// Superclass/subclass pairs from a validated taxonomy.
///
/// Positives are every `(ancestor, descendant)` pair within `max_gap`
/// levels (`None` = full transitive closure); each positive has its
/// inversion as a negative. Positives come first, both halves sorted by
/// label pair.
pub fn build_taxonomy_pairs(taxonomy: &Taxonomy, max_gap: Option<usize>) -> Result<Vec<TypePairItem>> {
    let report = validate_taxonomy(taxonomy);
    if !report.is_empty() {
        return Err(Error::InvalidTaxonomy(serde_json::to_string(&report)?));
    }
    let parents = taxonomy.parents_of();
    let max_gap = max_gap.unwrap_or(usize::MAX);
    // (ancestor, descendant) -> hops
    let mut positives: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    for node in &taxonomy.nodes {
        let child = node.label.as_str();
        let mut frontier = vec![child];
        let mut seen = BTreeSet::new();
        let mut hops = 0;
        while !frontier.is_empty() && hops < max_gap {
            hops += 1;
            let mut next = Vec::new();
            for n in frontier {
                for &p in parents.get(n).into_iter().flatten() {
                    if seen.insert(p) {
                        positives.insert((p, child), hops);
                        next.push(p);
                    }
                }
            }
            frontier = next;
        }
    }

    let names = taxonomy.display_names();
    let mut items = Vec::with_capacity(positives.len() * 2);
    let mut push = |a: &str, b: &str, label: bool, provenance: Provenance| {
        items.push(TypePairItem {
            item_id: format!("B-{:06}", items.len() + 1),
            a: names[a].clone(),
            b: names[b].clone(),
            label,
            provenance,
            partition: None,
        });
    };
    for (&(a, b), &hops) in &positives {
        let prov = if hops == 1 { Provenance::Direct } else { Provenance::Transitive };
        push(a, b, true, prov);
    }
    let mut negatives: Vec<_> = positives.iter().map(|(&(a, b), &hops)| ((b, a), hops)).collect();
    negatives.sort();
    for ((b, a), hops) in negatives {
        let prov = if hops == 1 { Provenance::Inverted } else { Provenance::TransitiveInverted };
        push(b, a, false, prov);
    }
    Ok(items)
}

/// Head/relation/tail triples: every assertion as a positive plus
/// `negative_count` non-asserted combinations over the taxonomy's types and
/// the asserted relation names, drawn uniformly without replacement.
pub fn build_relation_triples(
    relations: &[RelationAssertion],
    taxonomy: &Taxonomy,
    negative_count: usize,
    seed: u64,
) -> Result<Vec<RelationTripleItem>> {
    if relations.is_empty() {
        return Err(Error::EmptyDataset("no relation assertions".into()));
    }
    let asserted: BTreeSet<&RelationAssertion> = relations.iter().collect();
    let types: Vec<&str> = taxonomy.labels_sorted();
    let names: Vec<&str> = relations
        .iter()
        .map(|r| r.relation.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let known: BTreeSet<&str> = types.iter().copied().collect();
    for a in &asserted {
        for ty in [&a.head_type, &a.tail_type] {
            if !known.contains(ty.as_str()) {
                return Err(Error::InvalidTaxonomy(format!("relation argument `{ty}` is not a taxonomy type")));
            }
        }
    }

    // Combination index: (h * |R| + r) * |T| + t, i.e. lexicographic (h, r, t).
    let (nt, nr) = (types.len(), names.len());
    let combo = |h: usize, r: usize, t: usize| (h * nr + r) * nt + t;
    let type_idx: BTreeMap<&str, usize> = types.iter().enumerate().map(|(i, t)| (*t, i)).collect();
    let rel_idx: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, r)| (*r, i)).collect();
    let asserted_idx: BTreeSet<usize> = asserted
        .iter()
        .map(|a| combo(type_idx[a.head_type.as_str()], rel_idx[a.relation.as_str()], type_idx[a.tail_type.as_str()]))
        .collect();
    let total = nt * nr * nt;
    let available = total - asserted_idx.len();
    if negative_count > available {
        return Err(Error::Capacity {
            requested: negative_count,
            max: available,
        });
    }
    let candidates: Vec<usize> = (0..total).filter(|i| !asserted_idx.contains(i)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut drawn: Vec<usize> = rand::seq::index::sample(&mut rng, candidates.len(), negative_count)
        .into_iter()
        .map(|i| candidates[i])
        .collect();
    drawn.sort_unstable();

    let mut items = Vec::with_capacity(asserted.len() + drawn.len());
    for a in &asserted {
        items.push((a.head_type.as_str(), a.relation.as_str(), a.tail_type.as_str(), true));
    }
    for i in drawn {
        let (h, rest) = (i / (nr * nt), i % (nr * nt));
        items.push((types[h], names[rest / nt], types[rest % nt], false));
    }
    Ok(items
        .into_iter()
        .enumerate()
        .map(|(i, (h, r, t, label))| RelationTripleItem {
            item_id: format!("C-{:06}", i + 1),
            h: h.to_string(),
            r: r.to_string(),
            t: t.to_string(),
            label,
            partition: None,
        })
        .collect())
}

/// Items of one task, as stored in a dataset file.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetItems {
    A(Vec<TermTypingItem>),
    B(Vec<TypePairItem>),
    C(Vec<RelationTripleItem>),
}

impl DatasetItems {
    pub fn task(&self) -> Task {
        match self {
            DatasetItems::A(_) => Task::A,
            DatasetItems::B(_) => Task::B,
            DatasetItems::C(_) => Task::C,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            DatasetItems::A(v) => v.len(),
            DatasetItems::B(v) => v.len(),
            DatasetItems::C(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(train, test)` counts; unassigned items count as neither.
    pub fn partition_counts(&self) -> (usize, usize) {
        let parts: Vec<Option<Partition>> = match self {
            DatasetItems::A(v) => v.iter().map(|i| Some(i.partition)).collect(),
            DatasetItems::B(v) => v.iter().map(|i| i.partition).collect(),
            DatasetItems::C(v) => v.iter().map(|i| i.partition).collect(),
        };
        let train = parts.iter().filter(|p| **p == Some(Partition::Train)).count();
        let test = parts.iter().filter(|p| **p == Some(Partition::Test)).count();
        (train, test)
    }

    /// Positive/negative counts for boolean tasks.
    pub fn label_counts(&self) -> Option<(usize, usize)> {
        let labels: Vec<bool> = match self {
            DatasetItems::A(_) => return None,
            DatasetItems::B(v) => v.iter().map(|i| i.label).collect(),
            DatasetItems::C(v) => v.iter().map(|i| i.label).collect(),
        };
        let pos = labels.iter().filter(|l| **l).count();
        Some((pos, labels.len() - pos))
    }

    pub fn write_jsonl<W: Write>(&self, out: W) -> Result<()> {
        match self {
            DatasetItems::A(v) => write_jsonl(v, out),
            DatasetItems::B(v) => write_jsonl(v, out),
            DatasetItems::C(v) => write_jsonl(v, out),
        }
    }

    pub fn read_jsonl(task: Task, path: &Path) -> Result<Self> {
        Ok(match task {
            Task::A => DatasetItems::A(read_jsonl(path)?),
            Task::B => DatasetItems::B(read_jsonl(path)?),
            Task::C => DatasetItems::C(read_jsonl(path)?),
        })
    }
}

/// A materialized dataset for one (task, source).
#[derive(Debug, Clone, PartialEq)]
pub struct TaskDataset {
    pub source_id: SourceId,
    pub items: DatasetItems,
    /// Canonical label -> prompt-facing name, for sources whose labels are
    /// codes.
    pub type_names: BTreeMap<String, String>,
}

impl TaskDataset {
    pub fn task(&self) -> Task {
        self.items.task()
    }

    /// Write `dataset.jsonl` and `dataset_meta.json` under `dir`; returns the
    /// content hash.
    pub fn save(&self, dir: &Path) -> Result<String> {
        fs::create_dir_all(dir)?;
        let meta = DatasetMeta {
            task: self.task(),
            source_id: self.source_id,
            items: self.items.len(),
            type_names: self.type_names.clone(),
        };
        let mut meta_bytes = serde_json::to_vec_pretty(&meta)?;
        meta_bytes.push(b'\n');
        fs::write(dir.join(DATASET_META), meta_bytes)?;
        self.items.write_jsonl(File::create(dir.join(DATASET_FILE))?)?;
        dataset_hash(dir)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta_path = dir.join(DATASET_META);
        let text = fs::read_to_string(&meta_path).map_err(|e| Error::SourceUnavailable {
            path: meta_path.clone(),
            reason: e.to_string(),
        })?;
        let meta: DatasetMeta = serde_json::from_str(&text).map_err(|e| Error::parse(&meta_path, e.line(), e.to_string()))?;
        let items = DatasetItems::read_jsonl(meta.task, &dir.join(DATASET_FILE))?;
        if items.len() != meta.items {
            return Err(Error::Integrity(format!(
                "{} holds {} items, metadata says {}",
                dir.join(DATASET_FILE).display(),
                items.len(),
                meta.items
            )));
        }
        Ok(TaskDataset {
            source_id: meta.source_id,
            items,
            type_names: meta.type_names,
        })
    }
}

pub const DATASET_FILE: &str = "dataset.jsonl";
pub const DATASET_META: &str = "dataset_meta.json";

#[derive(Serialize, Deserialize)]
struct DatasetMeta {
    task: Task,
    source_id: SourceId,
    items: usize,
    type_names: BTreeMap<String, String>,
}

/// SHA-256 over the metadata and item files of a saved dataset.
pub fn dataset_hash(dir: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    for name in [DATASET_META, DATASET_FILE] {
        let path = dir.join(name);
        let bytes = fs::read(&path).map_err(|e| Error::SourceUnavailable {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        hasher.update(&bytes);
    }
    Ok(hex::encode(hasher.finalize()))
}

pub fn write_jsonl<T: Serialize, W: Write>(items: &[T], out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut items = Vec::new();
    for (line_no, line) in open_lines(path)? {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        items.push(serde_json::from_str(&line).map_err(|e| Error::parse(path, line_no, e.to_string()))?);
    }
    Ok(items)
}
