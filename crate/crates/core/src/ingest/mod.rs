//! Parsers for the raw knowledge-source distributions.
//!
//! Every parser is single-threaded over its own files and shares no mutable
//! state, so callers may parse several sources in parallel. All text is
//! normalized to Unicode NFC on the way in.

mod geonames;
mod schemaorg;
mod umls;
mod validate;
mod wn18rr;

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use unicode_normalization::UnicodeNormalization;

pub use geonames::{parse_geonames, GeonamesPaths, FEATURE_CLASSES};
pub use schemaorg::parse_schemaorg;
pub use umls::{parse_semantic_network, parse_umls, UmlsPaths};
pub use validate::{validate_taxonomy, ValidationReport};
pub use wn18rr::{parse_wn18rr, Wn18rrPaths, WORDNET_TYPES};

use crate::error::{Error, Result};
use crate::model::{Partition, SourceCorpus, SourceId, TermRecord};

pub(crate) fn nfc(s: &str) -> String {
    s.nfc().collect()
}

pub(crate) fn open_lines(path: &Path) -> Result<impl Iterator<Item = (usize, std::io::Result<String>)>> {
    let file = File::open(path).map_err(|e| Error::SourceUnavailable {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    Ok(BufReader::new(file)
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l)))
}

/// A parsed row before duplicate merging.
#[derive(Debug, Clone)]
pub(crate) struct RawTerm {
    pub id: String,
    pub surface_form: String,
    pub context_sentence: Option<String>,
    pub gold_type: String,
    pub partition: Option<Partition>,
}

/// Merge rows whose prompt inputs are indistinguishable (same partition,
/// surface form and context sentence) into one record carrying every gold
/// type. The smallest source id names the merged record.
pub(crate) fn merge_terms(source_id: SourceId, raw: Vec<RawTerm>) -> Vec<TermRecord> {
    type Key = (Option<Partition>, String, Option<String>);
    let mut merged: BTreeMap<Key, TermRecord> = BTreeMap::new();
    for term in raw {
        let key = (term.partition, term.surface_form.clone(), term.context_sentence.clone());
        merged
            .entry(key)
            .and_modify(|rec| {
                rec.gold_types.insert(term.gold_type.clone());
                if term.id < rec.term_id {
                    rec.term_id = term.id.clone();
                }
            })
            .or_insert_with(|| TermRecord {
                term_id: term.id.clone(),
                surface_form: term.surface_form.clone(),
                context_sentence: term.context_sentence.clone(),
                gold_types: BTreeSet::from([term.gold_type.clone()]),
                source_id,
                partition: term.partition,
            });
    }
    let mut records: Vec<TermRecord> = merged.into_values().collect();
    records.sort_by(|a, b| a.term_id.cmp(&b.term_id));
    records
}

#[derive(Serialize)]
struct CorpusLine<'a> {
    term_id: &'a str,
    surface_form: &'a str,
    context_sentence: Option<&'a str>,
    gold_types: Vec<&'a str>,
    source_id: SourceId,
    partition: Option<Partition>,
}

/// Canonical corpus JSONL: one record per line, fixed field order, `\n`
/// line endings.
pub fn write_corpus_jsonl<W: Write>(corpus: &SourceCorpus, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    for r in &corpus.records {
        let line = CorpusLine {
            term_id: &r.term_id,
            surface_form: &r.surface_form,
            context_sentence: r.context_sentence.as_deref(),
            gold_types: r.gold_types.iter().map(String::as_str).collect(),
            source_id: r.source_id,
            partition: r.partition,
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_corpus_jsonl(path: &Path) -> Result<Vec<TermRecord>> {
    let mut records = Vec::new();
    for (line_no, line) in open_lines(path)? {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TermRecord = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        records.push(rec);
    }
    Ok(records)
}
