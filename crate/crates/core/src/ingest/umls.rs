use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use super::{merge_terms, nfc, open_lines, RawTerm};
use crate::error::{Error, Result};
use crate::model::{IngestWarnings, RelationAssertion, SourceCorpus, SourceId, Taxonomy, TypeNode};

pub const WARN_NO_SEMANTIC_TYPE: &str = "concept_without_semantic_type";
pub const WARN_UNKNOWN_RELATION_ARG: &str = "relation_argument_not_a_type";
pub const WARN_BLOCKED_RELATION: &str = "blocked_relation";

/// Locally licensed UMLS release files. The tool never downloads UMLS.
#[derive(Debug, Clone)]
pub struct UmlsPaths {
    /// `MRCONSO.RRF`: CUI|LAT|TS|LUI|STT|SUI|ISPREF|AUI|SAUI|SCUI|SDUI|SAB|TTY|CODE|STR|SRL|SUPPRESS|CVF|
    pub mrconso: PathBuf,
    /// `MRSTY.RRF`: CUI|TUI|STN|STY|ATUI|CVF|
    pub mrsty: PathBuf,
    /// Semantic network `SRDEF`: RT|UI|STY/RL|STN/RTN|DEF|EX|UN|NH|ABR|RIN|
    pub srdef: Option<PathBuf>,
    /// Semantic network structure: `SRSTR` (STY|RL|STY|LS|) or the fully
    /// inherited `SRSTRE2` (STY|RL|STY|).
    pub srstr: Option<PathBuf>,
}

impl SourceId {
    /// Source abbreviation (`SAB`) of a UMLS sub-vocabulary.
    pub fn umls_sab(self) -> Option<&'static str> {
        match self {
            SourceId::Nci => Some("NCI"),
            SourceId::Medcin => Some("MEDCIN"),
            SourceId::SnomedctUs => Some("SNOMEDCT_US"),
            _ => None,
        }
    }
}

fn rrf_fields<'a>(path: &Path, line_no: usize, line: &'a str, min: usize) -> Result<Vec<&'a str>> {
    let line = line.trim_end_matches(['\r', '\n']);
    let line = line.strip_suffix('|').unwrap_or(line);
    let fields: Vec<&str> = line.split('|').collect();
    if fields.len() < min {
        let context: String = line.chars().take(80).collect();
        return Err(Error::parse(
            path,
            line_no,
            format!(
                "expected at least {min} pipe-delimited fields, found {} in `{context}`",
                fields.len()
            ),
        ));
    }
    Ok(fields)
}

/// Semantic types per concept.
fn read_mrsty(path: &Path) -> Result<BTreeMap<String, BTreeSet<String>>> {
    let mut types: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (line_no, line) in open_lines(path)? {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f = rrf_fields(path, line_no, &line, 6)?;
        types.entry(f[0].to_string()).or_default().insert(nfc(f[3].trim()));
    }
    Ok(types)
}

struct SemanticNetwork {
    taxonomy: Taxonomy,
    relation_inventory: BTreeSet<String>,
}

fn tree_parent(stn: &str) -> Option<String> {
    if let Some((head, _)) = stn.rsplit_once('.') {
        return Some(head.to_string());
    }
    // `A1` hangs under `A`; single letters are roots.
    let letters = stn.trim_end_matches(|c: char| c.is_ascii_digit());
    (letters.len() < stn.len() && !letters.is_empty()).then(|| letters.to_string())
}

fn tree_depth(stn: &str) -> usize {
    let dotted = stn.matches('.').count();
    if stn.chars().any(|c| c.is_ascii_digit()) {
        dotted + 1
    } else {
        0
    }
}

fn read_srdef(path: &Path) -> Result<SemanticNetwork> {
    let mut by_stn: BTreeMap<String, String> = BTreeMap::new();
    let mut relation_inventory = BTreeSet::new();
    for (line_no, line) in open_lines(path)? {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f = rrf_fields(path, line_no, &line, 10)?;
        match f[0] {
            "STY" => {
                by_stn.insert(f[3].trim().to_string(), nfc(f[2].trim()));
            }
            "RL" => {
                let name = f[2].trim();
                if name != "isa" {
                    relation_inventory.insert(name.to_string());
                }
            }
            other => {
                return Err(Error::parse(path, line_no, format!("unknown record type `{other}`")));
            }
        }
    }
    let mut nodes = Vec::new();
    let mut edges = BTreeSet::new();
    for (stn, name) in &by_stn {
        nodes.push(TypeNode::new(name.clone(), tree_depth(stn)));
        if let Some(parent) = tree_parent(stn).and_then(|p| by_stn.get(&p)) {
            edges.insert((name.clone(), parent.clone()));
        }
    }
    Ok(SemanticNetwork {
        taxonomy: Taxonomy::new(nodes, edges),
        relation_inventory,
    })
}

fn read_srstr(
    path: &Path,
    types: &BTreeSet<String>,
    warnings: &mut IngestWarnings,
) -> Result<(Vec<RelationAssertion>, BTreeSet<String>)> {
    let mut assertions = BTreeSet::new();
    let mut relation_names = BTreeSet::new();
    for (line_no, line) in open_lines(path)? {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f = rrf_fields(path, line_no, &line, 3)?;
        let (head, relation, tail) = (nfc(f[0].trim()), f[1].trim(), nfc(f[2].trim()));
        if relation == "isa" {
            continue;
        }
        if f.get(3).is_some_and(|ls| ls.trim() == "B") {
            warnings.bump(WARN_BLOCKED_RELATION);
            continue;
        }
        if !types.contains(&head) || !types.contains(&tail) {
            warnings.bump(WARN_UNKNOWN_RELATION_ARG);
            continue;
        }
        relation_names.insert(relation.to_string());
        assertions.insert(RelationAssertion::new(head, relation, tail));
    }
    Ok((assertions.into_iter().collect(), relation_names))
}

/// Parse one UMLS sub-vocabulary. The shared semantic-network taxonomy and
/// relation assertions are attached when the network files are supplied.
pub fn parse_umls(paths: &UmlsPaths, subontology: SourceId) -> Result<SourceCorpus> {
    let sab = subontology
        .umls_sab()
        .ok_or_else(|| Error::Config(format!("`{subontology}` is not a UMLS sub-vocabulary")))?;
    let semantic_types = read_mrsty(&paths.mrsty)?;
    let mut warnings = IngestWarnings::default();
    let mut raw = Vec::new();

    for (line_no, line) in open_lines(&paths.mrconso)? {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f = rrf_fields(&paths.mrconso, line_no, &line, 18)?;
        if f[11] != sab || f[1] != "ENG" {
            continue;
        }
        let Some(types) = semantic_types.get(f[0]) else {
            warnings.bump(WARN_NO_SEMANTIC_TYPE);
            continue;
        };
        let surface_form = nfc(f[14].trim());
        if surface_form.is_empty() {
            continue;
        }
        for ty in types {
            raw.push(RawTerm {
                id: f[7].to_string(),
                surface_form: surface_form.clone(),
                context_sentence: None,
                gold_type: ty.clone(),
                partition: None,
            });
        }
    }
    if raw.is_empty() {
        return Err(Error::SourceUnavailable {
            path: paths.mrconso.clone(),
            reason: format!("no English {sab} concepts with semantic types"),
        });
    }
    let records = merge_terms(subontology, raw);
    let type_inventory = records
        .iter()
        .flat_map(|r| r.gold_types.iter().cloned())
        .collect();

    let (taxonomy, relations, relation_inventory) = match &paths.srdef {
        Some(srdef) => {
            let network = read_srdef(srdef)?;
            let (relations, used) = match &paths.srstr {
                Some(srstr) => {
                    let (rels, used) = read_srstr(srstr, &network.taxonomy.labels(), &mut warnings)?;
                    (Some(rels), used)
                }
                None => (None, BTreeSet::new()),
            };
            let mut inventory = network.relation_inventory;
            inventory.extend(used);
            (Some(network.taxonomy), relations, inventory)
        }
        None => (None, None, BTreeSet::new()),
    };

    Ok(SourceCorpus {
        source_id: subontology,
        records,
        type_inventory,
        taxonomy,
        relations,
        relation_inventory,
        warnings,
    })
}

/// The UMLS semantic network alone: its type taxonomy and, when `srstr` is
/// given, the non-taxonomic relation assertions between types.
pub fn parse_semantic_network(srdef: &Path, srstr: Option<&Path>) -> Result<SourceCorpus> {
    let network = read_srdef(srdef)?;
    let mut warnings = IngestWarnings::default();
    let labels = network.taxonomy.labels();
    let (relations, used) = match srstr {
        Some(path) => {
            let (rels, used) = read_srstr(path, &labels, &mut warnings)?;
            (Some(rels), used)
        }
        None => (None, BTreeSet::new()),
    };
    let mut relation_inventory = network.relation_inventory;
    relation_inventory.extend(used);
    Ok(SourceCorpus {
        source_id: SourceId::Umls,
        records: Vec::new(),
        type_inventory: labels,
        taxonomy: Some(network.taxonomy),
        relations,
        relation_inventory,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    pub(crate) fn fixture(dir: &Path) -> UmlsPaths {
        let mrconso = dir.join("MRCONSO.RRF");
        fs::write(
            &mrconso,
            "C0001|ENG|P|L0001|PF|S0001|Y|A0001|||C1|NCI|PT|C1|Aspirin|0|N||\n\
             C0002|ENG|P|L0002|PF|S0002|Y|A0002|||C2|MEDCIN|PT|C2|Headache|0|N||\n",
        )
        .unwrap();
        let mrsty = dir.join("MRSTY.RRF");
        fs::write(
            &mrsty,
            "C0001|T121|A1.4.1.1.1|Pharmacologic Substance|AT01||\n\
             C0002|T184|A2.2.2|Sign or Symptom|AT02||\n",
        )
        .unwrap();
        let srdef = dir.join("SRDEF");
        fs::write(
            &srdef,
            "STY|T071|Entity|A|def||||||\n\
             STY|T072|Physical Object|A1|def||||||\n\
             STY|T167|Substance|A1.4|def||||||\n\
             STY|T051|Event|B|def||||||\n\
             STY|T052|Activity|B1|def||||||\n\
             RL|T186|isa|H|def|||||inverse_isa|\n\
             RL|T154|affects|R3.1|def|||||affected_by|\n\
             RL|T147|treats|R3.1.1|def|||||treated_by|\n",
        )
        .unwrap();
        let srstr = dir.join("SRSTR");
        fs::write(
            &srstr,
            "Physical Object|isa|Entity|D|\n\
             Substance|affects|Activity|D|\n\
             Substance|treats|Physical Object|B|\n\
             affects|location_of|Entity|D|\n",
        )
        .unwrap();
        UmlsPaths {
            mrconso,
            mrsty,
            srdef: Some(srdef),
            srstr: Some(srstr),
        }
    }

    #[test]
    fn one_nci_concept_becomes_one_record() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = parse_umls(&fixture(dir.path()), SourceId::Nci).unwrap();
        assert_eq!(corpus.records.len(), 1);
        assert_eq!(corpus.records[0].surface_form, "Aspirin");
        assert_eq!(corpus.records[0].term_id, "A0001");
        assert_eq!(
            corpus.type_inventory,
            BTreeSet::from(["Pharmacologic Substance".to_string()])
        );
    }

    #[test]
    fn semantic_network_attaches_taxonomy_and_relations() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = parse_umls(&fixture(dir.path()), SourceId::Medcin).unwrap();
        let tax = corpus.taxonomy.as_ref().unwrap();
        assert_eq!(tax.nodes.len(), 5);
        assert_eq!(tax.level_count, 3);
        assert!(tax.parent_edges.contains(&("Substance".into(), "Physical Object".into())));
        assert!(tax.parent_edges.contains(&("Activity".into(), "Event".into())));
        assert!(crate::ingest::validate_taxonomy(tax).is_empty());
        assert_eq!(
            corpus.relations.as_deref().unwrap(),
            &[RelationAssertion::new("Substance", "affects", "Activity")]
        );
        assert_eq!(
            corpus.relation_inventory,
            BTreeSet::from(["affects".to_string(), "treats".to_string()])
        );
        assert_eq!(corpus.warnings.count(WARN_BLOCKED_RELATION), 1);
        assert_eq!(corpus.warnings.count(WARN_UNKNOWN_RELATION_ARG), 1);
    }

    #[test]
    fn missing_subontology_is_source_unavailable() {
        let dir = tempfile::tempdir().unwrap();
        let err = parse_umls(&fixture(dir.path()), SourceId::SnomedctUs).unwrap_err();
        assert!(matches!(err, Error::SourceUnavailable { .. }));
    }

    #[test]
    fn wrong_delimiter_is_parse_error_with_context() {
        let dir = tempfile::tempdir().unwrap();
        let mut p = fixture(dir.path());
        p.mrconso = dir.path().join("bad.RRF");
        fs::write(&p.mrconso, "C0001\tENG\tP\tL0001\n").unwrap();
        match parse_umls(&p, SourceId::Nci) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 1);
                assert!(message.contains("C0001"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn tree_numbers_map_to_levels() {
        assert_eq!(tree_depth("A"), 0);
        assert_eq!(tree_depth("A1"), 1);
        assert_eq!(tree_depth("A1.4.1"), 3);
        assert_eq!(tree_parent("A"), None);
        assert_eq!(tree_parent("A1").as_deref(), Some("A"));
        assert_eq!(tree_parent("A1.4.1").as_deref(), Some("A1.4"));
    }

    #[test]
    fn semantic_network_alone() {
        let dir = tempfile::tempdir().unwrap();
        let p = fixture(dir.path());
        let corpus = parse_semantic_network(p.srdef.as_deref().unwrap(), p.srstr.as_deref()).unwrap();
        assert_eq!(corpus.source_id, SourceId::Umls);
        assert!(corpus.records.is_empty());
        assert_eq!(corpus.type_inventory.len(), 5);
        assert_eq!(corpus.relations.as_ref().unwrap().len(), 1);
        assert_eq!(corpus.warnings.count(WARN_BLOCKED_RELATION), 1);
    }
}
