use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use super::{merge_terms, nfc, open_lines, RawTerm};
use crate::error::{Error, Result};
use crate::model::{IngestWarnings, SourceCorpus, SourceId, Taxonomy, TypeNode};

/// The nine GeoNames feature classes with their documented headings.
pub const FEATURE_CLASSES: [(&str, &str); 9] = [
    ("A", "administrative boundary features"),
    ("H", "hydrographic features"),
    ("L", "area features"),
    ("P", "populated place features"),
    ("R", "road / railroad features"),
    ("S", "spot features"),
    ("T", "hypsographic features"),
    ("U", "undersea features"),
    ("V", "vegetation features"),
];

// Column offsets in the main dump.
const COL_NAME: usize = 1;
const COL_CLASS: usize = 6;
const COL_CODE: usize = 7;
const COL_COUNTRY: usize = 8;

pub const WARN_UNKNOWN_CODE: &str = "unknown_feature_code";
pub const WARN_UNKNOWN_COUNTRY: &str = "unknown_country_code";
pub const WARN_EMPTY_NAME: &str = "empty_name";

#[derive(Debug, Clone)]
pub struct GeonamesPaths {
    /// Main tab-separated dump (`allCountries.txt` layout).
    pub features: PathBuf,
    /// `countryInfo.txt`: ISO code in column 0, country name in column 4.
    pub country_info: PathBuf,
    /// Optional `featureCodes_en.txt` (`H.LK<TAB>lake<TAB>description`).
    /// When given it defines the code inventory and the display names.
    pub feature_codes: Option<PathBuf>,
}

fn read_country_info(path: &Path) -> Result<BTreeMap<String, String>> {
    let mut countries = BTreeMap::new();
    for (line_no, line) in open_lines(path)? {
        let line = line?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 5 {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected at least 5 columns, found {}", fields.len()),
            ));
        }
        let name = nfc(fields[4].trim());
        if !fields[0].trim().is_empty() && !name.is_empty() {
            countries.insert(fields[0].trim().to_string(), name);
        }
    }
    Ok(countries)
}

/// `code -> (class, name)` from the feature-code listing.
fn read_feature_codes(path: &Path) -> Result<BTreeMap<String, (String, String)>> {
    let mut codes = BTreeMap::new();
    for (line_no, line) in open_lines(path)? {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let qualified = fields.next().unwrap_or_default().trim();
        let name = nfc(fields.next().unwrap_or_default().trim());
        // the listing carries a `null` placeholder row
        let Some((class, code)) = qualified.split_once('.') else {
            continue;
        };
        if !FEATURE_CLASSES.iter().any(|(c, _)| *c == class) || code.is_empty() {
            return Err(Error::parse(path, line_no, format!("unrecognized feature code `{qualified}`")));
        }
        let name = if name.is_empty() { code.to_string() } else { name };
        codes.insert(code.to_string(), (class.to_string(), name));
    }
    Ok(codes)
}

pub fn parse_geonames(paths: &GeonamesPaths) -> Result<SourceCorpus> {
    let countries = read_country_info(&paths.country_info)?;
    let declared = match &paths.feature_codes {
        Some(p) => Some(read_feature_codes(p)?),
        None => None,
    };
    let mut warnings = IngestWarnings::default();
    // code -> class, for codes seen in the dump (inventory without a listing)
    let mut observed: BTreeMap<String, String> = BTreeMap::new();
    let mut raw = Vec::new();

    for (line_no, line) in open_lines(&paths.features)? {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() <= COL_COUNTRY {
            return Err(Error::parse(
                &paths.features,
                line_no,
                format!("expected at least {} columns, found {}", COL_COUNTRY + 1, fields.len()),
            ));
        }
        let class = fields[COL_CLASS].trim();
        let code = fields[COL_CODE].trim();
        let known = match &declared {
            Some(codes) => codes.get(code).is_some_and(|(c, _)| c == class),
            None => !code.is_empty() && FEATURE_CLASSES.iter().any(|(c, _)| *c == class),
        };
        if !known {
            warnings.bump(WARN_UNKNOWN_CODE);
            continue;
        }
        let name = nfc(fields[COL_NAME].trim());
        if name.is_empty() {
            warnings.bump(WARN_EMPTY_NAME);
            continue;
        }
        let country_code = fields[COL_COUNTRY].trim();
        let context_sentence = match countries.get(country_code) {
            Some(country) => Some(format!("{name} is a place in {country}.")),
            None => {
                warnings.bump(WARN_UNKNOWN_COUNTRY);
                None
            }
        };
        observed.entry(code.to_string()).or_insert_with(|| class.to_string());
        raw.push(RawTerm {
            id: fields[0].trim().to_string(),
            surface_form: name,
            context_sentence,
            gold_type: code.to_string(),
            partition: None,
        });
    }
    if raw.is_empty() {
        return Err(Error::NoRecords(paths.features.clone()));
    }

    let codes: BTreeMap<String, (String, Option<String>)> = match declared {
        Some(codes) => codes
            .into_iter()
            .map(|(code, (class, name))| (code, (class, Some(name))))
            .collect(),
        None => observed.into_iter().map(|(code, class)| (code, (class, None))).collect(),
    };
    let mut nodes: Vec<TypeNode> = FEATURE_CLASSES
        .iter()
        .map(|(class, heading)| TypeNode::new(*class, 0).with_name(*heading))
        .collect();
    let mut edges = BTreeSet::new();
    for (code, (class, name)) in &codes {
        let mut node = TypeNode::new(code.clone(), 1);
        node.name = name.clone();
        nodes.push(node);
        edges.insert((code.clone(), class.clone()));
    }
    let taxonomy = Taxonomy::new(nodes, edges);

    Ok(SourceCorpus {
        source_id: SourceId::Geonames,
        records: merge_terms(SourceId::Geonames, raw),
        type_inventory: codes.keys().cloned().collect(),
        taxonomy: Some(taxonomy),
        relations: None,
        relation_inventory: BTreeSet::new(),
        warnings,
    })
}
