use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fs;
use std::path::Path;

use serde_json::Value;

use super::nfc;
use super::validate::find_cycle;
use crate::error::{Error, Result};
use crate::model::{IngestWarnings, SourceCorpus, SourceId, Taxonomy, TypeNode};

pub const WARN_UNKNOWN_PARENT: &str = "unknown_parent_type";
pub const WARN_SKIPPED_EDGE: &str = "non_adjacent_parent_edge";

fn local_name(iri: &str) -> &str {
    let iri = iri.trim();
    iri.rsplit(['/', ':', '#']).next().unwrap_or(iri)
}

/// `(label, parent references)` rows from the CSV types export.
fn read_csv(path: &Path, text: &str) -> Result<Vec<(String, String, Vec<String>)>> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let id_col = col("id");
    let label_col = col("label");
    let parent_col = col("subTypeOf")
        .ok_or_else(|| Error::parse(path, 1, "header has no `subTypeOf` column"))?;
    if id_col.is_none() && label_col.is_none() {
        return Err(Error::parse(path, 1, "header needs an `id` or `label` column"));
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(path, i + 2, e.to_string()))?;
        let id = id_col.and_then(|c| rec.get(c)).unwrap_or_default().trim().to_string();
        let label = label_col
            .and_then(|c| rec.get(c))
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .unwrap_or_else(|| local_name(&id).to_string());
        if label.is_empty() {
            return Err(Error::parse(path, i + 2, "row has neither id nor label"));
        }
        let id = if id.is_empty() { label.clone() } else { id };
        let parents = rec
            .get(parent_col)
            .unwrap_or_default()
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(str::to_string)
            .collect();
        rows.push((id, label, parents));
    }
    Ok(rows)
}

fn ids_of(value: Option<&Value>) -> Vec<String> {
    match value {
        Some(Value::Object(o)) => o
            .get("@id")
            .and_then(Value::as_str)
            .map(|s| vec![s.to_string()])
            .unwrap_or_default(),
        Some(Value::Array(items)) => items.iter().flat_map(|v| ids_of(Some(v))).collect(),
        Some(Value::String(s)) => vec![s.clone()],
        _ => Vec::new(),
    }
}

fn read_jsonld(path: &Path, text: &str) -> Result<Vec<(String, String, Vec<String>)>> {
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
    let graph = doc
        .get("@graph")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::parse(path, 1, "document has no `@graph` array"))?;
    let mut rows = Vec::new();
    for entry in graph {
        let is_class = match entry.get("@type") {
            Some(Value::String(t)) => t == "rdfs:Class",
            Some(Value::Array(ts)) => ts.iter().any(|t| t.as_str() == Some("rdfs:Class")),
            _ => false,
        };
        let Some(id) = entry.get("@id").and_then(Value::as_str) else {
            continue;
        };
        if !is_class {
            continue;
        }
        let label = match entry.get("rdfs:label") {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Object(o)) => o
                .get("@value")
                .and_then(Value::as_str)
                .unwrap_or(local_name(id))
                .to_string(),
            _ => local_name(id).to_string(),
        };
        rows.push((id.to_string(), label, ids_of(entry.get("rdfs:subClassOf"))));
    }
    Ok(rows)
}

/// Parse a schema.org vocabulary export (CSV types table or JSON-LD) into a
/// type taxonomy. There are no term instances.
///
/// Levels are shortest-path depths from the roots; with multiple
/// inheritance, parent edges that do not climb exactly one level are
/// dropped and counted.
pub fn parse_schemaorg(path: &Path) -> Result<SourceCorpus> {
    let text = fs::read_to_string(path).map_err(|e| Error::SourceUnavailable {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let rows = if text.trim_start().starts_with('{') {
        read_jsonld(path, &text)?
    } else {
        read_csv(path, &text)?
    };
    if rows.is_empty() {
        return Err(Error::NoRecords(path.to_path_buf()));
    }

    let mut warnings = IngestWarnings::default();
    let mut label_of: BTreeMap<String, String> = BTreeMap::new();
    for (id, label, _) in &rows {
        let label = nfc(label);
        label_of.insert(id.clone(), label.clone());
        label_of.entry(local_name(id).to_string()).or_insert(label);
    }
    let labels: BTreeSet<String> = label_of.values().cloned().collect();
    let mut edges = BTreeSet::new();
    for (id, _, parents) in &rows {
        let child = label_of[id].clone();
        for parent in parents {
            match label_of.get(parent).or_else(|| label_of.get(local_name(parent))) {
                Some(p) => {
                    edges.insert((child.clone(), p.clone()));
                }
                None => warnings.bump(WARN_UNKNOWN_PARENT),
            }
        }
    }
    if let Some(cycle) = find_cycle(&edges) {
        return Err(Error::TaxonomyIntegrity { cycle });
    }

    let mut children: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut has_parent = BTreeSet::new();
    for (child, parent) in &edges {
        children.entry(parent.as_str()).or_default().push(child.as_str());
        has_parent.insert(child.as_str());
    }
    let mut depth: BTreeMap<&str, usize> = BTreeMap::new();
    let mut queue = VecDeque::new();
    for label in &labels {
        if !has_parent.contains(label.as_str()) {
            depth.insert(label.as_str(), 0);
            queue.push_back(label.as_str());
        }
    }
    while let Some(node) = queue.pop_front() {
        let d = depth[node];
        for child in children.get(node).into_iter().flatten() {
            if !depth.contains_key(child) {
                depth.insert(child, d + 1);
                queue.push_back(child);
            }
        }
    }
    let kept: BTreeSet<(String, String)> = edges
        .iter()
        .filter(|(c, p)| {
            let ok = depth[p.as_str()] + 1 == depth[c.as_str()];
            if !ok {
                warnings.bump(WARN_SKIPPED_EDGE);
            }
            ok
        })
        .cloned()
        .collect();
    let nodes = labels
        .iter()
        .map(|l| TypeNode::new(l.clone(), depth[l.as_str()]))
        .collect();
    let taxonomy = Taxonomy::new(nodes, kept);

    Ok(SourceCorpus {
        source_id: SourceId::Schemaorg,
        records: Vec::new(),
        type_inventory: labels,
        taxonomy: Some(taxonomy),
        relations: None,
        relation_inventory: BTreeSet::new(),
        warnings,
    })
}
