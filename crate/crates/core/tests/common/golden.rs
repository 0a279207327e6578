//! Golden renderings of every catalog entry.

use std::collections::BTreeSet;
use std::path::PathBuf;

use ontoeval::datasets::{Provenance, RelationTripleItem, TermTypingItem, TypePairItem};
use ontoeval::model::{Partition, Task};
use ontoeval::prompts::{render, Catalog, RenderedPrompt};
use serde::Deserialize;

#[derive(Deserialize)]
pub struct Golden {
    pub template_id: String,
    pub sentence: bool,
    pub mask_token: Option<String>,
    pub text: String,
}

pub fn golden_rows() -> Vec<Golden> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let mut rows = Vec::new();
    for name in ["task_a_wordnet", "task_a_geonames", "task_a_umls", "task_b", "task_c"] {
        let text = std::fs::read_to_string(dir.join(format!("{name}.jsonl"))).unwrap();
        rows.extend(text.lines().map(|l| serde_json::from_str::<Golden>(l).unwrap()));
    }
    rows
}

pub fn render_fixture(catalog: &Catalog, g: &Golden) -> RenderedPrompt {
    let t = catalog
        .get(&g.template_id)
        .unwrap_or_else(|| panic!("golden row names unknown template {}", g.template_id));
    let mask = g.mask_token.as_deref().unwrap_or("[MASK]");
    match t.task {
        Task::A => render(
            t,
            &TermTypingItem {
                item_id: "golden".into(),
                term: "dog".into(),
                sentence: g.sentence.then(|| "The dog barked at the mailman".to_string()),
                gold_types: vec!["noun".into()],
                partition: Partition::Test,
            },
            mask,
        ),
        Task::B => render(
            t,
            &TypePairItem {
                item_id: "golden".into(),
                a: "waterbody".into(),
                b: "lake".into(),
                label: true,
                provenance: Provenance::Direct,
                partition: None,
            },
            mask,
        ),
        Task::C => render(
            t,
            &RelationTripleItem {
                item_id: "golden".into(),
                h: "Gene".into(),
                r: "is associated with".into(),
                t: "Disease".into(),
                label: true,
                partition: None,
            },
            mask,
        ),
    }
    .unwrap()
}

/// Rows whose rendering differs from the golden text, and catalog entries
/// with no golden row.
pub fn mismatches(catalog: &Catalog) -> Vec<String> {
    let rows = golden_rows();
    let mut out = Vec::new();
    for g in &rows {
        let got = render_fixture(catalog, g);
        if got.text != g.text {
            out.push(format!("{} (sentence={}):\n  got  {:?}\n  want {:?}", g.template_id, g.sentence, got.text, g.text));
        }
    }
    let covered: BTreeSet<&str> = rows.iter().map(|g| g.template_id.as_str()).collect();
    for t in catalog.all() {
        if !covered.contains(t.template_id.as_str()) {
            out.push(format!("{} has no golden row", t.template_id));
        }
    }
    out
}
