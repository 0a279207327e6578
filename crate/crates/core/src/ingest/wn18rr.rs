use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use super::{merge_terms, nfc, open_lines, RawTerm};
use crate::error::{Error, Result};
use crate::model::{Partition, SourceCorpus, SourceId};

pub const WORDNET_TYPES: [&str; 4] = ["noun", "verb", "adverb", "adjective"];

/// The WN18RR distribution files. Validation and test triples together form
/// the test partition.
#[derive(Debug, Clone)]
pub struct Wn18rrPaths {
    pub train: PathBuf,
    pub valid: PathBuf,
    pub test: PathBuf,
    /// Optional `entity<TAB>gloss` file supplying context sentences.
    pub gloss: Option<PathBuf>,
}

/// Decode an entity identifier into `(surface form, part of speech)`.
///
/// Accepts synset names (`dog.n.01`) and the text release's
/// `__dog_NN_1` form. Satellite adjectives (`.s`) fold into `adjective`.
pub(crate) fn decode_entity(id: &str) -> Option<(String, &'static str)> {
    if let Some(rest) = id.strip_prefix("__") {
        let mut parts = rest.rsplitn(3, '_');
        let sense = parts.next()?;
        let tag = parts.next()?;
        let name = parts.next()?;
        if sense.is_empty() || !sense.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let pos = match tag {
            "NN" => "noun",
            "VB" => "verb",
            "JJ" => "adjective",
            "RB" => "adverb",
            _ => return None,
        };
        return surface(name).map(|s| (s, pos));
    }
    let mut parts = id.rsplitn(3, '.');
    let sense = parts.next()?;
    let tag = parts.next()?;
    let name = parts.next()?;
    if sense.is_empty() || !sense.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let pos = match tag {
        "n" => "noun",
        "v" => "verb",
        "a" | "s" => "adjective",
        "r" => "adverb",
        _ => return None,
    };
    surface(name).map(|s| (s, pos))
}

fn surface(name: &str) -> Option<String> {
    let s = nfc(name.replace('_', " ").trim());
    (!s.is_empty()).then_some(s)
}

fn read_triples(path: &Path, entities: &mut BTreeSet<String>) -> Result<()> {
    for (line_no, line) in open_lines(path)? {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        for entity in [fields[0], fields[2]] {
            let entity = entity.trim();
            if decode_entity(entity).is_none() {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("entity `{entity}` does not encode a surface form and part of speech"),
                ));
            }
            entities.insert(entity.to_string());
        }
    }
    Ok(())
}

fn read_glosses(path: &Path) -> Result<BTreeMap<String, String>> {
    let mut glosses = BTreeMap::new();
    for (line_no, line) in open_lines(path)? {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (entity, gloss) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, line_no, "expected `entity<TAB>gloss`"))?;
        let gloss = nfc(gloss.trim());
        if !gloss.is_empty() {
            glosses.insert(entity.trim().to_string(), gloss);
        }
    }
    Ok(glosses)
}

pub fn parse_wn18rr(paths: &Wn18rrPaths) -> Result<SourceCorpus> {
    let mut train = BTreeSet::new();
    read_triples(&paths.train, &mut train)?;
    let mut test = BTreeSet::new();
    read_triples(&paths.valid, &mut test)?;
    read_triples(&paths.test, &mut test)?;
    if train.is_empty() && test.is_empty() {
        return Err(Error::NoRecords(paths.train.clone()));
    }
    let glosses = match &paths.gloss {
        Some(p) => read_glosses(p)?,
        None => BTreeMap::new(),
    };

    let mut raw = Vec::with_capacity(train.len() + test.len());
    for (partition, entities) in [(Partition::Train, &train), (Partition::Test, &test)] {
        for entity in entities {
            let (surface_form, pos) = decode_entity(entity).expect("validated while reading");
            raw.push(RawTerm {
                id: format!("{}:{entity}", partition.as_str()),
                surface_form,
                context_sentence: glosses.get(entity).cloned(),
                gold_type: pos.to_string(),
                partition: Some(partition),
            });
        }
    }
    let records = merge_terms(SourceId::Wordnet, raw);
    let type_inventory = records
        .iter()
        .flat_map(|r| r.gold_types.iter().cloned())
        .collect();
    Ok(SourceCorpus {
        source_id: SourceId::Wordnet,
        records,
        type_inventory,
        taxonomy: None,
        relations: None,
        relation_inventory: BTreeSet::new(),
        warnings: Default::default(),
    })
}
