use crate::datasets::TaskDataset;
use crate::model::{SourceId, Task};

/// Published dataset sizes a build is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReferenceCounts {
    pub task: Task,
    pub source: SourceId,
    pub train: usize,
    pub test: usize,
    /// Task A: distinct types. Tasks B/C: positive and negative items.
    pub types: Option<usize>,
    pub positives: Option<usize>,
    pub negatives: Option<usize>,
}

const fn a(source: SourceId, train: usize, test: usize, types: usize) -> ReferenceCounts {
    ReferenceCounts {
        task: Task::A,
        source,
        train,
        test,
        types: Some(types),
        positives: None,
        negatives: None,
    }
}

const fn bc(task: Task, source: SourceId, positives: usize, negatives: usize, train: usize, test: usize) -> ReferenceCounts {
    ReferenceCounts {
        task,
        source,
        train,
        test,
        types: None,
        positives: Some(positives),
        negatives: Some(negatives),
    }
}

pub const REFERENCE_COUNTS: [ReferenceCounts; 9] = [
    a(SourceId::Wordnet, 40_559, 9_470, 4),
    a(SourceId::Geonames, 8_078_865, 702_510, 680),
    a(SourceId::Nci, 96_177, 24_045, 125),
    a(SourceId::Medcin, 277_028, 69_258, 87),
    a(SourceId::SnomedctUs, 278_374, 69_594, 125),
    bc(Task::B, SourceId::Geonames, 680, 680, 272, 1_088),
    bc(Task::B, SourceId::Umls, 254, 254, 101, 407),
    bc(Task::B, SourceId::Schemaorg, 2_670, 2_670, 1_086, 4_727),
    bc(Task::C, SourceId::Umls, 5_641, 1_896, 1_507, 6_030),
];

pub const SCHEMAORG_NOTE: &str = "schema.org taxonomy pairs: the reference pair counts (2,670 positive / 2,670 negative = 5,340 items) \
and the reference split (1,086 train / 4,727 test = 5,813 items) cannot both hold; this build reports its own counts and does not try to match either";

pub fn reference(task: Task, source: SourceId) -> Option<&'static ReferenceCounts> {
    REFERENCE_COUNTS.iter().find(|r| r.task == task && r.source == source)
}

/// Thousands separators: 9470 -> "9,470".
pub fn group(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

/// Observed counts in the same shape as [`ReferenceCounts`].
pub fn observed(dataset: &TaskDataset) -> ReferenceCounts {
    let (train, test) = dataset.items.partition_counts();
    let (positives, negatives) = dataset.items.label_counts().unzip();
    let types = match &dataset.items {
        crate::datasets::DatasetItems::A(items) => {
            let set: std::collections::BTreeSet<&str> =
                items.iter().flat_map(|i| i.gold_types.iter().map(String::as_str)).collect();
            Some(set.len())
        }
        _ => None,
    };
    ReferenceCounts {
        task: dataset.task(),
        source: dataset.source_id,
        train,
        test,
        types,
        positives,
        negatives,
    }
}

fn describe(c: &ReferenceCounts) -> String {
    let mut parts = vec![format!("train/test {}/{}", group(c.train), group(c.test))];
    if let Some(t) = c.types {
        parts.push(format!("types {}", group(t)));
    }
    if let (Some(p), Some(n)) = (c.positives, c.negatives) {
        parts.push(format!("positive/negative {}/{}", group(p), group(n)));
    }
    parts.join(", ")
}

/// Notes comparing a built dataset with its reference counts.
pub fn count_notes(dataset: &TaskDataset) -> Vec<String> {
    let mut notes = Vec::new();
    let seen = observed(dataset);
    if let Some(r) = reference(seen.task, seen.source) {
        if seen != *r {
            notes.push(format!(
                "{} {}: counts differ from reference: built {}; reference {}",
                seen.task,
                seen.source,
                describe(&seen),
                describe(r)
            ));
        }
    }
    if seen.task == Task::B && seen.source == SourceId::Schemaorg {
        notes.push(SCHEMAORG_NOTE.to_string());
    }
    notes
}
