use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backends::BackendConfig;
use crate::datasets::SplitSpec;
use crate::error::{Error, Result};
use crate::model::{SourceId, Task};

pub const STUB_ECHO_GOLD: &str = "stub_echo_gold";
pub const STUB_CONSTANT_PREFIX: &str = "stub_constant:";
pub const DEFAULT_TASK_C_NEGATIVES: usize = 1896;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum TemplateSelection {
    #[default]
    All,
    /// The full 8-template catalog, scored per template with the best one
    /// reported.
    BestOf8,
    Ids(Vec<String>),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SelectionRepr {
    One(String),
    Many(Vec<String>),
}

impl TryFrom<SelectionRepr> for TemplateSelection {
    type Error = String;

    fn try_from(repr: SelectionRepr) -> std::result::Result<Self, String> {
        match repr {
            SelectionRepr::One(s) if s == "all" => Ok(TemplateSelection::All),
            SelectionRepr::One(s) if s == "best-of-8" => Ok(TemplateSelection::BestOf8),
            SelectionRepr::One(s) => Err(format!("unknown template selection `{s}` (use all, best-of-8 or a list of ids)")),
            SelectionRepr::Many(ids) if ids.is_empty() => Err("template list is empty".into()),
            SelectionRepr::Many(ids) => Ok(TemplateSelection::Ids(ids)),
        }
    }
}

impl From<TemplateSelection> for SelectionRepr {
    fn from(s: TemplateSelection) -> Self {
        match s {
            TemplateSelection::All => SelectionRepr::One("all".into()),
            TemplateSelection::BestOf8 => SelectionRepr::One("best-of-8".into()),
            TemplateSelection::Ids(ids) => SelectionRepr::Many(ids),
        }
    }
}

impl Serialize for TemplateSelection {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SelectionRepr::from(self.clone()).serialize(s)
    }
}

impl<'de> Deserialize<'de> for TemplateSelection {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        TemplateSelection::try_from(SelectionRepr::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

fn default_seed() -> u64 {
    SplitSpec::DEFAULT_SEED
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}
fn default_parallelism() -> usize {
    4
}
fn default_k() -> usize {
    1
}

/// One declarative run. Relative paths resolve against the working
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub run_id: String,
    pub task: Task,
    pub source: SourceId,
    /// Directory holding the source's raw files under their usual names.
    #[serde(default)]
    pub data_dir: Option<PathBuf>,
    /// Per-file overrides by role (`train`, `features`, `mrconso`, ...).
    #[serde(default)]
    pub inputs: BTreeMap<String, PathBuf>,
    /// A dataset directory written by `build`; skips ingestion.
    #[serde(default)]
    pub dataset_dir: Option<PathBuf>,
    #[serde(default)]
    pub templates: TemplateSelection,
    pub backend: String,
    #[serde(default)]
    pub backends: Vec<BackendConfig>,
    /// `"4/5"` or `"0.8"`; defaults depend on task and source.
    #[serde(default)]
    pub test_fraction: Option<String>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub max_gap: Option<usize>,
    #[serde(default)]
    pub negatives: Option<usize>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub template_dir: Option<PathBuf>,
    #[serde(default)]
    pub answer_space_dir: Option<PathBuf>,
    /// Stop the invoke stage after this many items.
    #[serde(default)]
    pub interrupt_after: Option<usize>,
}

impl RunConfig {
    /// Merge an optional TOML file with overrides; overrides win, serde
    /// defaults fill the rest.
    pub fn resolve(file: Option<&Path>, overrides: toml::Table) -> Result<Self> {
        let mut table = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
            None => toml::Table::new(),
        };
        table.extend(overrides);
        let config: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("run config: {}", e.message())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(format!("run config: {}", e.message())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.run_id.is_empty()
            || !self
                .run_id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
            || self.run_id.starts_with('.')
        {
            return Err(Error::Config(format!(
                "run_id `{}` must be non-empty ASCII letters, digits, '-', '_' or '.'",
                self.run_id
            )));
        }
        if self.parallelism == 0 {
            return Err(Error::Config("parallelism must be at least 1".into()));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if !supported(self.task, self.source) {
            return Err(Error::Config(format!(
                "task {} is not defined for source {}",
                self.task, self.source
            )));
        }
        for b in &self.backends {
            b.validate()?;
        }
        self.split_spec()?;
        self.backend_config()?;
        Ok(())
    }

    /// The explicit split, or the per-source default. WordNet keeps its
    /// native partitions unless a fraction is given.
    pub fn split_spec(&self) -> Result<Option<SplitSpec>> {
        if let Some(f) = &self.test_fraction {
            return SplitSpec::parse_fraction(f, self.seed).map(Some);
        }
        let (num, den) = match (self.task, self.source) {
            (Task::A, SourceId::Wordnet) => return Ok(None),
            (Task::A, SourceId::Geonames) => (2, 25),
            (Task::A, _) => (1, 5),
            _ => (4, 5),
        };
        SplitSpec::new(num, den, self.seed).map(Some)
    }

    pub fn negatives(&self) -> usize {
        self.negatives.unwrap_or(DEFAULT_TASK_C_NEGATIVES)
    }

    /// The named backend: a `[[backends]]` entry, `stub_echo_gold`, or
    /// `stub_constant:<text>`.
    pub fn backend_config(&self) -> Result<BackendConfig> {
        if let Some(b) = self.backends.iter().find(|b| b.backend_id == self.backend) {
            return Ok(b.clone());
        }
        if self.backend == STUB_ECHO_GOLD {
            return Ok(BackendConfig::stub_echo_gold(STUB_ECHO_GOLD));
        }
        if let Some(text) = self.backend.strip_prefix(STUB_CONSTANT_PREFIX) {
            return Ok(BackendConfig::stub_constant(format!("stub_constant_{}", sanitize(text)), text));
        }
        Err(Error::Config(format!("backend `{}` is not defined", self.backend)))
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output_dir.join(&self.run_id)
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| self.output_dir.join("cache"))
    }
}

/// Whether a (task, source) pair has a dataset.
pub fn supported(task: Task, source: SourceId) -> bool {
    match task {
        Task::A => !matches!(source, SourceId::Umls | SourceId::Schemaorg),
        Task::B => matches!(source, SourceId::Geonames | SourceId::Umls | SourceId::Schemaorg),
        Task::C => source == SourceId::Umls,
    }
}

fn sanitize(text: &str) -> String {
    text.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}
