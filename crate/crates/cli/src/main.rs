use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ontoeval::datasets::TaskDataset;
use ontoeval::model::{SourceId, Task};
use ontoeval::prompts::{Catalog, Family};
use ontoeval::runner::{
    build_dataset, count_notes, export_finetune_samples, group, ingest_source, observed, report, run, score_dir, BuildOptions,
    FinetuneSpec, RunConfig, STUB_ECHO_GOLD,
};
use ontoeval::{Error, Result};

#[derive(Parser)]
#[command(name = "ontoeval", version, about = "Evaluate language models on ontology-learning tasks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a knowledge source and report what was found.
    Ingest {
        #[arg(long)]
        source: SourceId,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Raw file for one input role, as ROLE=PATH.
        #[arg(long = "input", value_parser = parse_pair)]
        inputs: Vec<(String, String)>,
        /// Write the parsed corpus as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a task dataset and write it to a directory.
    Build {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Template catalog utilities.
    Templates {
        #[command(subcommand)]
        command: TemplatesCommand,
    },
    /// Run every stage for one configuration.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Rescore the stored responses of a run.
    Score {
        #[arg(long)]
        run_dir: PathBuf,
        #[arg(long)]
        answer_space_dir: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Summarize runs.
    Report {
        #[arg(long, default_value = "runs")]
        output_dir: PathBuf,
        #[arg(required = true)]
        run_ids: Vec<String>,
        /// Print the machine-readable views instead of the text summary.
        #[arg(long)]
        json: bool,
    },
    /// Write instruction/target samples from dataset train partitions.
    ExportFinetune {
        /// Dataset directory written by `build`; repeat per source.
        #[arg(long = "dataset", required = true)]
        datasets: Vec<PathBuf>,
        #[arg(long, default_value_t = 8)]
        shots: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "seq2seq")]
        family: Family,
        #[arg(long, default_value = "[MASK]")]
        mask_token: String,
        #[arg(long)]
        template_dir: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum TemplatesCommand {
    /// Print templates as JSON lines, or write the shipped data files to a
    /// directory.
    Dump {
        #[arg(long)]
        task: Option<Task>,
        /// Catalog key: wordnet, geonames, umls or any.
        #[arg(long)]
        source: Option<String>,
        #[arg(long)]
        family: Option<Family>,
        #[arg(long)]
        template_dir: Option<PathBuf>,
        #[arg(long, conflicts_with_all = ["task", "source", "family", "template_dir"])]
        out_dir: Option<PathBuf>,
    },
}

/// Run configuration: a TOML file plus flag overrides.
#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    run_id: Option<String>,
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    source: Option<String>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long = "input", value_parser = parse_pair)]
    inputs: Vec<(String, String)>,
    #[arg(long)]
    dataset_dir: Option<PathBuf>,
    /// all, best-of-8, or a comma-separated list of template ids.
    #[arg(long)]
    templates: Option<String>,
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    test_fraction: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_gap: Option<usize>,
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    parallelism: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    template_dir: Option<PathBuf>,
    #[arg(long)]
    answer_space_dir: Option<PathBuf>,
    #[arg(long)]
    interrupt_after: Option<usize>,
    /// Any other config key, as KEY=VALUE with a TOML value.
    #[arg(long = "set", value_parser = parse_pair)]
    set: Vec<(String, String)>,
}

fn parse_pair(s: &str) -> std::result::Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.to_string()))
        .ok_or_else(|| format!("expected KEY=VALUE, got `{s}`"))
}

fn path_value(p: &Path) -> toml::Value {
    toml::Value::String(p.to_string_lossy().into_owned())
}

fn int_value(n: impl TryInto<i64>) -> Result<toml::Value> {
    n.try_into()
        .map(toml::Value::Integer)
        .map_err(|_| Error::Config("number out of range".into()))
}

impl ConfigArgs {
    fn overrides(&self) -> Result<toml::Table> {
        let mut t = toml::Table::new();
        for (key, raw) in &self.set {
            // TOML value if it parses, bare string otherwise.
            let value = format!("v = {raw}")
                .parse::<toml::Table>()
                .ok()
                .and_then(|mut v| v.remove("v"))
                .unwrap_or_else(|| toml::Value::String(raw.clone()));
            t.insert(key.clone(), value);
        }
        let strings = [
            ("run_id", &self.run_id),
            ("task", &self.task),
            ("source", &self.source),
            ("backend", &self.backend),
            ("test_fraction", &self.test_fraction),
        ];
        for (key, v) in strings {
            if let Some(v) = v {
                t.insert(key.into(), toml::Value::String(v.clone()));
            }
        }
        let paths = [
            ("data_dir", &self.data_dir),
            ("dataset_dir", &self.dataset_dir),
            ("output_dir", &self.output_dir),
            ("cache_dir", &self.cache_dir),
            ("template_dir", &self.template_dir),
            ("answer_space_dir", &self.answer_space_dir),
        ];
        for (key, v) in paths {
            if let Some(v) = v {
                t.insert(key.into(), path_value(v));
            }
        }
        let numbers = [
            ("max_gap", self.max_gap),
            ("negatives", self.negatives),
            ("parallelism", self.parallelism),
            ("k", self.k),
            ("interrupt_after", self.interrupt_after),
        ];
        for (key, v) in numbers {
            if let Some(v) = v {
                t.insert(key.into(), int_value(v)?);
            }
        }
        if let Some(seed) = self.seed {
            t.insert("seed".into(), int_value(seed)?);
        }
        if let Some(sel) = &self.templates {
            let value = if sel == "all" || sel == "best-of-8" {
                toml::Value::String(sel.clone())
            } else {
                toml::Value::Array(sel.split(',').map(|s| toml::Value::String(s.trim().to_string())).collect())
            };
            t.insert("templates".into(), value);
        }
        if !self.inputs.is_empty() {
            let mut inputs = match t.remove("inputs") {
                Some(toml::Value::Table(existing)) => existing,
                _ => toml::Table::new(),
            };
            for (role, path) in &self.inputs {
                inputs.insert(role.clone(), toml::Value::String(path.clone()));
            }
            t.insert("inputs".into(), toml::Value::Table(inputs));
        }
        Ok(t)
    }

    fn resolve(&self) -> Result<RunConfig> {
        RunConfig::resolve(self.config.as_deref(), self.overrides()?)
    }

    /// A config for dataset building alone; run id and backend get
    /// placeholders when absent.
    fn resolve_for_build(&self) -> Result<RunConfig> {
        let mut t = toml::Table::new();
        t.insert("run_id".into(), toml::Value::String("build".into()));
        t.insert("backend".into(), toml::Value::String(STUB_ECHO_GOLD.into()));
        let file = match &self.config {
            Some(path) => fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?
                .parse::<toml::Table>()
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
            None => toml::Table::new(),
        };
        t.extend(file);
        t.extend(self.overrides()?);
        let text = toml::to_string(&t).map_err(|e| Error::Config(e.to_string()))?;
        RunConfig::from_toml(&text)
    }
}

fn input_map(inputs: &[(String, String)]) -> BTreeMap<String, PathBuf> {
    inputs.iter().map(|(k, v)| (k.clone(), PathBuf::from(v))).collect()
}

fn print_counts(dataset: &TaskDataset) {
    let c = observed(dataset);
    println!("{} {}: {} items", c.task, c.source, group(dataset.items.len()));
    println!("  train/test: {}/{}", group(c.train), group(c.test));
    if let Some(types) = c.types {
        println!("  types: {}", group(types));
    }
    if let (Some(p), Some(n)) = (c.positives, c.negatives) {
        println!("  positive/negative: {}/{}", group(p), group(n));
    }
    for note in count_notes(dataset) {
        println!("note: {note}");
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest {
            source,
            data_dir,
            inputs,
            out,
        } => {
            let corpus = ingest_source(source, data_dir.as_deref(), &input_map(&inputs))?;
            println!("{source}: {} records, {} types", group(corpus.records.len()), group(corpus.type_inventory.len()));
            if let Some(tax) = &corpus.taxonomy {
                println!("  taxonomy: {} nodes, {} edges, {} levels", group(tax.nodes.len()), group(tax.parent_edges.len()), tax.level_count);
            }
            if let Some(rel) = &corpus.relations {
                println!("  relations: {} assertions", group(rel.len()));
            }
            for (kind, n) in &corpus.warnings.0 {
                println!("  warning: {kind}: {}", group(*n));
            }
            if let Some(out) = out {
                let mut w = io::BufWriter::new(File::create(&out)?);
                serde_json::to_writer(&mut w, &corpus)?;
                w.flush()?;
            }
        }
        Command::Build { config, out } => {
            let c = config.resolve_for_build()?;
            let corpus = ingest_source(c.source, c.data_dir.as_deref(), &c.inputs)?;
            let dataset = build_dataset(&corpus, c.task, &BuildOptions::from_config(&c)?)?;
            let hash = dataset.save(&out)?;
            print_counts(&dataset);
            println!("written to {} (sha256 {hash})", out.display());
        }
        Command::Templates {
            command:
                TemplatesCommand::Dump {
                    task,
                    source,
                    family,
                    template_dir,
                    out_dir,
                },
        } => {
            if let Some(dir) = out_dir {
                fs::create_dir_all(&dir)?;
                for (name, text) in Catalog::builtin_files() {
                    fs::write(dir.join(name), text)?;
                }
                println!("template data written to {}", dir.display());
                return Ok(());
            }
            let catalog = match template_dir {
                Some(dir) => Catalog::from_dir(&dir)?,
                None => Catalog::builtin(),
            };
            let mut out = io::BufWriter::new(io::stdout().lock());
            for t in catalog.all() {
                if task.is_some_and(|x| x != t.task)
                    || source.as_ref().is_some_and(|s| *s != t.source)
                    || family.is_some_and(|f| f != t.family)
                {
                    continue;
                }
                serde_json::to_writer(&mut out, t)?;
                out.write_all(b"\n")?;
            }
            out.flush()?;
        }
        Command::Run { config } => {
            let c = config.resolve()?;
            let outcome = run(&c)?;
            let (text, _) = report(&c.output_dir, std::slice::from_ref(&c.run_id))?;
            print!("{text}");
            eprintln!(
                "{} wire requests, {} cache hits; outputs in {}",
                outcome.wire_requests,
                outcome.cache_hits,
                outcome.run_dir.display()
            );
        }
        Command::Score { run_dir, answer_space_dir, k } => {
            let scores = score_dir(&run_dir, answer_space_dir.as_deref(), k)?;
            for r in &scores.reports {
                match r.f1 {
                    Some(f1) => println!("{} F1 {:.4}", r.template_id, f1),
                    None => println!("{} MAP@1 {:.4} MAP@{} {:.4}", r.template_id, r.map_at_1, r.k, r.map_at_k),
                }
            }
            if let Some(best) = scores.best() {
                println!("best template: {} ({:.4})", best.template_id, best.headline());
            }
        }
        Command::Report { output_dir, run_ids, json } => {
            let (text, views) = report(&output_dir, &run_ids)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&views)?);
            } else {
                print!("{text}");
            }
        }
        Command::ExportFinetune {
            datasets,
            shots,
            seed,
            family,
            mask_token,
            template_dir,
            out,
        } => {
            let datasets = datasets.iter().map(|d| TaskDataset::load(d)).collect::<Result<Vec<_>>>()?;
            let catalog = match template_dir {
                Some(dir) => Catalog::from_dir(&dir)?,
                None => Catalog::builtin(),
            };
            let spec = FinetuneSpec {
                shots_per_source: shots,
                seed,
                family,
                mask_token,
            };
            let n = export_finetune_samples(&datasets, &catalog, &spec, File::create(&out)?)?;
            println!("{n} samples written to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}
