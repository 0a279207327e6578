//! Synthetic raw source files in each source's native layout.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

const POS: [&str; 4] = ["n", "v", "r", "s"];

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    fs::create_dir_all(dir).unwrap();
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn wn_lines(prefix: &str, pairs: usize) -> String {
    let mut body = String::new();
    for i in 0..pairs {
        let h = format!("{prefix}{}.{}.01", 2 * i, POS[(2 * i) % 4]);
        let t = format!("{prefix}{}.{}.01", 2 * i + 1, POS[(2 * i + 1) % 4]);
        let _ = writeln!(body, "{h}\t_hypernym\t{t}");
    }
    body
}

/// WN18RR-style triples; every line introduces two new entities, so the
/// test partition holds `2 * (valid_pairs + test_pairs)` terms.
pub fn wordnet(dir: &Path, train_pairs: usize, valid_pairs: usize, test_pairs: usize) -> PathBuf {
    write(dir, "train.txt", &wn_lines("trainterm", train_pairs));
    write(dir, "valid.txt", &wn_lines("validterm", valid_pairs));
    write(dir, "test.txt", &wn_lines("testterm", test_pairs));
    dir.to_path_buf()
}

pub const GEONAMES_CODES: [(&str, &str, &str); 8] = [
    ("H", "LK", "lake"),
    ("H", "STM", "stream"),
    ("H", "BAY", "bay"),
    ("P", "PPL", "populated place"),
    ("P", "PPLC", "capital of a political entity"),
    ("T", "MT", "mountain"),
    ("S", "HTL", "hotel"),
    ("L", "PRK", "park"),
];

/// GeoNames dump with `per_code` features for each code.
pub fn geonames(dir: &Path, per_code: usize) -> PathBuf {
    let mut features = String::new();
    let mut id = 1;
    for (class, code, _) in GEONAMES_CODES {
        for j in 0..per_code {
            let mut cols = vec![String::new(); 19];
            cols[0] = id.to_string();
            cols[1] = format!("Place {code} {j}");
            cols[2] = cols[1].clone();
            cols[4] = "0.0".into();
            cols[5] = "0.0".into();
            cols[6] = class.into();
            cols[7] = code.into();
            cols[8] = if j % 2 == 0 { "US" } else { "DE" }.into();
            let _ = writeln!(features, "{}", cols.join("\t"));
            id += 1;
        }
    }
    write(dir, "allCountries.txt", &features);
    write(
        dir,
        "countryInfo.txt",
        "#ISO\tISO3\tISO-Numeric\tfips\tCountry\nUS\tUSA\t840\tUS\tUnited States\nDE\tDEU\t276\tGM\tGermany\n",
    );
    let mut codes = String::new();
    for (class, code, name) in GEONAMES_CODES {
        let _ = writeln!(codes, "{class}.{code}\t{name}\tdescription of {name}");
    }
    write(dir, "featureCodes_en.txt", &codes);
    dir.to_path_buf()
}

/// Semantic-network types as (STN, name); three tree levels.
pub const UMLS_TYPES: [(&str, &str); 11] = [
    ("A", "Entity"),
    ("A1", "Physical Object"),
    ("A1.1", "Organism"),
    ("A1.2", "Anatomical Structure"),
    ("A1.4", "Substance"),
    ("A2", "Conceptual Entity"),
    ("A2.1", "Finding"),
    ("B", "Event"),
    ("B1", "Activity"),
    ("B1.1", "Diagnostic Procedure"),
    ("B2", "Phenomenon or Process"),
];

pub const UMLS_RELATIONS: [(&str, &str, &str); 6] = [
    ("Substance", "affects", "Organism"),
    ("Substance", "affects", "Phenomenon or Process"),
    ("Diagnostic Procedure", "analyzes", "Substance"),
    ("Diagnostic Procedure", "diagnoses", "Finding"),
    ("Organism", "location_of", "Substance"),
    ("Anatomical Structure", "location_of", "Phenomenon or Process"),
];

/// MRCONSO/MRSTY for NCI, MEDCIN and SNOMEDCT_US concepts typed over the
/// leaf types, plus SRDEF/SRSTR.
pub fn umls(dir: &Path, per_vocab: usize) -> PathBuf {
    let typed: Vec<(&str, &str)> = UMLS_TYPES.iter().copied().filter(|(stn, _)| stn.contains('.')).collect();
    let mut conso = String::new();
    let mut sty = String::new();
    let mut n = 0;
    for sab in ["NCI", "MEDCIN", "SNOMEDCT_US"] {
        for j in 0..per_vocab {
            n += 1;
            let cui = format!("C{n:07}");
            let _ = writeln!(
                conso,
                "{cui}|ENG|P|L{n:07}|PF|S{n:07}|Y|A{n:07}|||X{n}|{sab}|PT|X{n}|{sab} concept {j}|0|N||"
            );
            let (stn, name) = typed[j % typed.len()];
            let _ = writeln!(sty, "{cui}|T{:03}|{stn}|{name}|AT{n}||", j % typed.len());
        }
    }
    write(dir, "MRCONSO.RRF", &conso);
    write(dir, "MRSTY.RRF", &sty);
    let mut srdef = String::new();
    for (i, (stn, name)) in UMLS_TYPES.iter().enumerate() {
        let _ = writeln!(srdef, "STY|T{:03}|{name}|{stn}|def||||||", i + 1);
    }
    let _ = writeln!(srdef, "RL|T186|isa|H|def|||||inverse_isa|");
    for (i, rel) in ["affects", "analyzes", "diagnoses", "location_of"].iter().enumerate() {
        let _ = writeln!(srdef, "RL|T{}|{rel}|R{}|def|||||x|", 150 + i, i + 1);
    }
    write(dir, "SRDEF", &srdef);
    let mut srstr = String::new();
    for (h, r, t) in UMLS_RELATIONS {
        let _ = writeln!(srstr, "{h}|{r}|{t}|D|");
    }
    write(dir, "SRSTR", &srstr);
    dir.to_path_buf()
}

/// schema.org CSV export: a small multi-level taxonomy.
pub fn schemaorg(dir: &Path) -> PathBuf {
    let rows = [
        ("Thing", ""),
        ("Place", "https://schema.org/Thing"),
        ("Organization", "https://schema.org/Thing"),
        ("LocalBusiness", "https://schema.org/Place, https://schema.org/Organization"),
        ("Store", "https://schema.org/LocalBusiness"),
        ("BookStore", "https://schema.org/Store"),
        ("Landform", "https://schema.org/Place"),
    ];
    let mut body = "id,label,comment,subTypeOf,enumerationtype,equivalentClass,properties,subTypes,supersedes,supersededBy,isPartOf\n".to_string();
    for (label, parents) in rows {
        let _ = writeln!(body, "https://schema.org/{label},{label},\"A {label}.\",\"{parents}\",,,,,,,");
    }
    write(dir, "schemaorg-current-https-types.csv", &body);
    dir.to_path_buf()
}
