use std::io::{BufWriter, Write};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::datasets::{DatasetItems, TaskDataset};
use crate::error::{Error, Result};
use crate::model::{Partition, SourceId, Task};
use crate::prompts::{render, Catalog, Family, PromptItem};

#[derive(Debug, Clone, PartialEq)]
pub struct FinetuneSpec {
    pub shots_per_source: usize,
    pub seed: u64,
    pub family: Family,
    pub mask_token: String,
}

impl Default for FinetuneSpec {
    fn default() -> Self {
        FinetuneSpec {
            shots_per_source: 8,
            seed: crate::datasets::SplitSpec::DEFAULT_SEED,
            family: Family::Seq2seq,
            mask_token: "[MASK]".into(),
        }
    }
}

#[derive(Serialize)]
struct SourceEntry {
    task: Task,
    source: SourceId,
    train_items: usize,
    records: usize,
}

#[derive(Serialize)]
struct Header<'a> {
    kind: &'static str,
    artifact_version: &'static str,
    shots_per_source: usize,
    seed: u64,
    family: &'static str,
    catalog_hash: &'a str,
    sources: Vec<SourceEntry>,
    records: usize,
}

#[derive(Serialize)]
struct Sample<'a> {
    kind: &'static str,
    task: Task,
    source: SourceId,
    item_id: &'a str,
    template_id: String,
    instruction: String,
    target: String,
}

fn stream(task: Task, source: SourceId) -> u64 {
    let s = SourceId::ALL.iter().position(|&x| x == source).unwrap_or(0) as u64;
    let t = match task {
        Task::A => 0,
        Task::B => 1,
        Task::C => 2,
    };
    s * 3 + t
}

fn train_items(dataset: &TaskDataset) -> Vec<(&dyn PromptItem, &str, String)> {
    let display = |label: &String| dataset.type_names.get(label).cloned().unwrap_or_else(|| label.clone());
    match &dataset.items {
        DatasetItems::A(v) => v
            .iter()
            .filter(|i| i.partition == Partition::Train)
            .map(|i| (i as &dyn PromptItem, i.item_id.as_str(), display(&i.gold_types[0])))
            .collect(),
        DatasetItems::B(v) => v
            .iter()
            .filter(|i| i.partition == Some(Partition::Train))
            .map(|i| (i as &dyn PromptItem, i.item_id.as_str(), i.label.to_string()))
            .collect(),
        DatasetItems::C(v) => v
            .iter()
            .filter(|i| i.partition == Some(Partition::Train))
            .map(|i| (i as &dyn PromptItem, i.item_id.as_str(), i.label.to_string()))
            .collect(),
    }
}

/// Instruction/target pairs drawn from each dataset's train partition, one
/// header line first. Returns the number of sample records.
pub fn export_finetune_samples<W: Write>(datasets: &[TaskDataset], catalog: &Catalog, spec: &FinetuneSpec, out: W) -> Result<usize> {
    let mut records = Vec::new();
    let mut sources = Vec::new();
    for dataset in datasets {
        let (task, source) = (dataset.task(), dataset.source_id);
        let train = train_items(dataset);
        if spec.shots_per_source > train.len() {
            return Err(Error::Capacity {
                requested: spec.shots_per_source,
                max: train.len(),
            });
        }
        let templates = if spec.shots_per_source == 0 {
            Vec::new()
        } else {
            catalog.template_catalog(task, source, spec.family)?
        };
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(stream(task, source));
        let mut picks = sample(&mut rng, train.len(), spec.shots_per_source).into_vec();
        picks.sort_unstable();
        for i in &picks {
            let (item, item_id, target) = &train[*i];
            let template = &templates[rng.random_range(0..templates.len())];
            records.push(Sample {
                kind: "sample",
                task,
                source,
                item_id,
                template_id: template.template_id.clone(),
                instruction: render(template, *item, &spec.mask_token)?.text,
                target: target.clone(),
            });
        }
        sources.push(SourceEntry {
            task,
            source,
            train_items: train.len(),
            records: picks.len(),
        });
    }
    let header = Header {
        kind: "manifest",
        artifact_version: env!("CARGO_PKG_VERSION"),
        shots_per_source: spec.shots_per_source,
        seed: spec.seed,
        family: spec.family.as_str(),
        catalog_hash: catalog.hash(),
        sources,
        records: records.len(),
    };
    let mut out = BufWriter::new(out);
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for r in &records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(records.len())
}
