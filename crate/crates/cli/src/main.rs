//! `partshap`: explain an image classifier by the parts annotated on its
//! inputs.
//!
//! Every command writes into `--out`, starting with `config.json`, a
//! snapshot that `partshap replay` can re-run on its own.

mod plot;
mod store;

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use partshap::aggregation::{task_histogram, ClassHistogram, SampleFilter};
use partshap::dataset::Manifest;
use partshap::explain::{class_histograms, explain_dataset, explain_record, SampleExplanation};
use partshap::masking::generate_set;
use partshap::sanity::{
    compare_annotation_sources, run_exclusion, run_inclusion, InclusionExclusionReport,
};
use partshap::shapley::{EstimatorOptions, EstimatorRegistry, ShapleyEstimator, TargetMode};
use partshap::value_fn::{ModelOptions, ModelRegistry, ValueFunction};
use partshap::{Error, ErrorKind, Result};
use serde::{Deserialize, Serialize};

use crate::plot::bar_chart;
use crate::store::{file_stem, SampleFile, Store};

const CONFIG_FILE: &str = "config.json";

#[derive(Parser)]
#[command(
    name = "partshap",
    version,
    about = "Part-level Shapley explanations for image classifiers"
)]
struct Cli {
    #[command(flatten)]
    run: RunArgs,
    /// Output directory of the result store.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses one per core.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

/// Everything that determines the results of a run.
#[derive(Args, Clone, Debug, Serialize, Deserialize)]
struct RunArgs {
    /// Dataset manifest (newline-delimited JSON).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Model spec: toy:additive:<file>, toy:table:<file>, exec:<command>,
    /// http:<url>.
    #[arg(long, global = true)]
    model: Option<String>,
    /// Seed for the permutation estimator.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// explain-sample: class whose logit is explained instead of the
    /// predicted one. explain-class: only report this class.
    #[arg(long, global = true)]
    class: Option<String>,
    /// explain-class/explain-task: explain every sample against this class
    /// instead of its prediction.
    #[arg(long, global = true)]
    target_class: Option<String>,
    /// Count misclassified samples in class histograms.
    #[arg(long, global = true)]
    include_misclassified: bool,
    /// Estimate with this many sampled join orders instead of the full
    /// power set.
    #[arg(long, global = true)]
    mc_permutations: Option<usize>,
    /// Requests in flight to an external model.
    #[arg(long, global = true, default_value_t = 4)]
    pool_size: usize,
}

#[derive(Subcommand, Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "name")]
enum Command {
    /// Shapley histogram of one sample, with its coalition logits.
    ExplainSample {
        #[arg(long)]
        sample: String,
    },
    /// Class-level histograms over the dataset.
    ExplainClass,
    /// Class-level histograms and their task-level sum.
    ExplainTask,
    /// Inclusion/exclusion accuracy or annotation-source comparison.
    Sanity {
        #[arg(long, value_enum)]
        mode: SanityKind,
        /// Second annotation source for annotation-compare.
        #[arg(long)]
        second_manifest: Option<PathBuf>,
    },
    /// Writes every coalition image of a sample as <presence>.png.
    GenerateMasks {
        #[arg(long)]
        sample: String,
    },
    /// Re-runs the command recorded in a config snapshot.
    #[serde(skip)]
    Replay {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
enum SanityKind {
    Inclusion,
    Exclusion,
    AnnotationCompare,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    version: String,
    command: Command,
    #[serde(flatten)]
    run: RunArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Info
        } else {
            log::LevelFilter::Warn
        })
        .parse_default_env()
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(match e.kind() {
                ErrorKind::Usage => 2,
                ErrorKind::Data => 3,
                ErrorKind::Model => 4,
            })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let (command, run) = match cli.command {
        Command::Replay { config } => {
            let text = std::fs::read_to_string(&config).map_err(|e| Error::io(&config, e))?;
            let snap: Snapshot = serde_json::from_str(&text).map_err(|e| {
                Error::Usage(format!("{}: not a config snapshot: {e}", config.display()))
            })?;
            (snap.command, snap.run)
        }
        command => (command, cli.run),
    };
    let out = cli
        .out
        .ok_or_else(|| Error::Usage("--out is required".into()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {} workers: {e}", cli.jobs)))?;
    let run = run.resolved()?;
    let store = Store::create(&out)?;
    store.write_json(
        CONFIG_FILE,
        &Snapshot {
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.clone(),
            run: run.clone(),
        },
    )?;
    pool.install(|| Runner::new(run, store)?.execute(&command))
}

impl RunArgs {
    /// Absolute paths, so a snapshot can be replayed from anywhere.
    fn resolved(mut self) -> Result<Self> {
        if let Some(m) = &self.manifest {
            self.manifest = Some(absolute(m)?);
        }
        if let Some(spec) = self.model.take() {
            let mut resolved = spec.clone();
            for scheme in ["toy:additive:", "toy:table:"] {
                if let Some(path) = spec.strip_prefix(scheme) {
                    resolved = format!("{scheme}{}", absolute(Path::new(path))?.display());
                }
            }
            self.model = Some(resolved);
        }
        if self.mc_permutations == Some(0) {
            return Err(Error::Usage("--mc-permutations must be positive".into()));
        }
        if self.pool_size == 0 {
            return Err(Error::Usage("--pool-size must be positive".into()));
        }
        Ok(self)
    }

    fn filter(&self) -> SampleFilter {
        if self.include_misclassified {
            SampleFilter::All
        } else {
            SampleFilter::CorrectOnly
        }
    }
}

impl Command {
    fn needs_model(&self) -> bool {
        !matches!(self, Command::GenerateMasks { .. })
    }
}

fn absolute(path: &Path) -> Result<PathBuf> {
    std::fs::canonicalize(path).map_err(|e| Error::io(path, e))
}

struct Runner {
    args: RunArgs,
    store: Store,
    manifest: Manifest,
}

impl Runner {
    fn new(args: RunArgs, store: Store) -> Result<Self> {
        let path = args
            .manifest
            .clone()
            .ok_or_else(|| Error::Usage("--manifest is required".into()))?;
        let manifest = Manifest::load(&path)?;
        info!(
            "{} samples, {} classes",
            manifest.len(),
            manifest.classes().len()
        );
        Ok(Self {
            args,
            store,
            manifest,
        })
    }

    fn execute(&self, command: &Command) -> Result<()> {
        let model = if command.needs_model() {
            Some(self.model()?)
        } else {
            None
        };
        let model = || model.as_deref().expect("model opened");
        match command {
            Command::ExplainSample { sample } => self.explain_sample(model(), sample),
            Command::ExplainClass => self.explain_classes(model(), false),
            Command::ExplainTask => self.explain_classes(model(), true),
            Command::Sanity {
                mode,
                second_manifest,
            } => self.sanity(model(), *mode, second_manifest.as_deref()),
            Command::GenerateMasks { sample } => self.generate_masks(sample),
            Command::Replay { .. } => Err(Error::Usage("a snapshot cannot replay another".into())),
        }
    }

    fn model(&self) -> Result<Arc<dyn ValueFunction>> {
        let spec = self
            .args
            .model
            .as_deref()
            .ok_or_else(|| Error::Usage("--model is required".into()))?;
        ModelRegistry::default().open(
            spec,
            &ModelOptions {
                pool_size: self.args.pool_size,
                expected_classes: Some(self.manifest.classes().len()),
            },
        )
    }

    fn estimator(&self) -> Result<Box<dyn ShapleyEstimator>> {
        let (name, permutations) = match self.args.mc_permutations {
            Some(m) => ("permutation", m),
            None => ("exact", 0),
        };
        EstimatorRegistry::default().create(
            name,
            &EstimatorOptions {
                permutations,
                seed: self.args.seed,
            },
        )
    }

    fn class_arg(&self, name: Option<&String>) -> Result<Option<usize>> {
        name.map(|n| self.manifest.class_index(n)).transpose()
    }

    fn write_sample(&self, e: &SampleExplanation, estimator: &str) -> Result<()> {
        let record = self.manifest.sample(&e.record.sample_id)?;
        let file = SampleFile::new(e, &record.image, &record.label, estimator);
        self.store
            .write_json(&format!("samples/{}.json", file_stem(&record.id)), &file)?;
        Ok(())
    }

    fn explain_sample(&self, vf: &dyn ValueFunction, id: &str) -> Result<()> {
        let record = self.manifest.sample(id)?;
        let mode = match self.class_arg(self.args.class.as_ref())? {
            Some(c) => TargetMode::Label(c),
            None => TargetMode::Predicted,
        };
        let estimator = self.estimator()?;
        let e = explain_record(vf, estimator.as_ref(), &self.manifest, record, mode)?;
        self.write_sample(&e, estimator.name())?;
        let vocab = self.manifest.vocabulary();
        let title = format!(
            "{} ({} -> {})",
            id,
            record.label,
            self.manifest.classes()[e.record.target_class]
        );
        self.store.write_text(
            &format!("plots/sample_{}.svg", file_stem(id)),
            &bar_chart(
                &title,
                "normalized Shapley value",
                vocab,
                &e.record.normalized,
            ),
        )?;
        println!(
            "{id}: label {}, predicted {}, explained class {}",
            record.label,
            self.manifest.classes()[e.record.predicted_label],
            self.manifest.classes()[e.record.target_class]
        );
        for (k, name) in vocab.iter().enumerate() {
            let mark = if k == e.record.argmax_part { " *" } else { "" };
            match (e.record.histogram[k], e.record.normalized[k]) {
                (Some(v), Some(n)) => println!("  {name:<16} {v:>12.6} {n:>9.4}{mark}"),
                _ => println!("  {name:<16} {:>12}", "-"),
            }
        }
        Ok(())
    }

    fn explain_all(&self, vf: &dyn ValueFunction) -> Result<Vec<SampleExplanation>> {
        let mut stems = HashSet::new();
        for r in &self.manifest.records {
            if !stems.insert(file_stem(&r.id)) {
                return Err(Error::Manifest {
                    line: 0,
                    message: format!("sample id '{}' collides with another as a file name", r.id),
                });
            }
        }
        let mode = match self.class_arg(self.args.target_class.as_ref())? {
            Some(c) => TargetMode::Label(c),
            None => TargetMode::Predicted,
        };
        let estimator = self.estimator()?;
        let explanations = explain_dataset(vf, estimator.as_ref(), &self.manifest, mode)?;
        for e in &explanations {
            self.write_sample(e, estimator.name())?;
        }
        Ok(explanations)
    }

    fn histograms(&self, vf: &dyn ValueFunction) -> Result<Vec<ClassHistogram>> {
        let records: Vec<_> = self
            .explain_all(vf)?
            .into_iter()
            .map(|e| e.record)
            .collect();
        class_histograms(&records, &self.manifest, self.args.filter())
    }

    fn explain_classes(&self, vf: &dyn ValueFunction, task: bool) -> Result<()> {
        let mut hists = self.histograms(vf)?;
        let vocab = self.manifest.vocabulary();
        let classes = self.manifest.classes();
        if task {
            let t = task_histogram(&hists)?;
            self.store.write_json("task_histogram.json", &t)?;
            self.store.write_text(
                "plots/task.svg",
                &bar_chart("task", "summed class frequency", vocab, &some(&t.values)),
            )?;
            println!("task ({} contributing classes)", t.contributing_classes);
            print_row(vocab, &t.values);
        }
        if !task {
            if let Some(c) = self.class_arg(self.args.class.as_ref())? {
                hists.retain(|h| h.class == c);
            }
        }
        self.store.write_json("class_histograms.json", &hists)?;
        for h in &hists {
            let name = &classes[h.class];
            self.store.write_text(
                &format!("plots/class_{}.svg", file_stem(name)),
                &bar_chart(
                    &format!("{name} ({} samples)", h.samples),
                    "top-part frequency",
                    vocab,
                    &some(&h.frequencies),
                ),
            )?;
            println!("{name} ({} samples)", h.samples);
            print_row(vocab, &h.frequencies);
        }
        Ok(())
    }

    fn sanity(
        &self,
        vf: &dyn ValueFunction,
        mode: SanityKind,
        second: Option<&Path>,
    ) -> Result<()> {
        if mode == SanityKind::AnnotationCompare {
            let second = second
                .ok_or_else(|| Error::Usage("annotation-compare needs --second-manifest".into()))?;
            let other = Manifest::load(&absolute(second)?)?;
            let estimator = self.estimator()?;
            let cmp = compare_annotation_sources(
                vf,
                estimator.as_ref(),
                &self.manifest,
                &other,
                self.args.filter(),
            )?;
            self.store
                .write_json("sanity/annotation_compare.json", &cmp)?;
            self.store.write_text(
                "plots/annotation_compare.svg",
                &bar_chart(
                    "annotation sources",
                    "cosine similarity",
                    &cmp.class_names,
                    &cmp.per_class,
                ),
            )?;
            for (name, s) in cmp.class_names.iter().zip(&cmp.per_class) {
                match s {
                    Some(s) => println!("  {name:<16} {s:.6}"),
                    None => println!("  {name:<16} -"),
                }
            }
            if let Some(avg) = cmp.average {
                println!("  average          {avg:.6}");
            }
            return Ok(());
        }
        if second.is_some() {
            return Err(Error::Usage(
                "--second-manifest only applies to annotation-compare".into(),
            ));
        }

        let (accuracy, label) = match mode {
            SanityKind::Inclusion => (run_inclusion(vf, &self.manifest)?, "inclusion"),
            _ => (run_exclusion(vf, &self.manifest)?, "exclusion"),
        };
        let hists = self.histograms(vf)?;
        let task = task_histogram(&hists)?;
        self.store.write_json("class_histograms.json", &hists)?;
        self.store.write_json("task_histogram.json", &task)?;
        let report = InclusionExclusionReport::build(&accuracy, &hists, &task, &self.manifest);
        self.store
            .write_json(&format!("sanity/{label}.json"), &report)?;
        self.store
            .write_json(&format!("sanity/{label}_accuracy.json"), &accuracy)?;
        self.store
            .write_text(&format!("sanity/{label}.csv"), &report.to_csv())?;
        for class in &report.classes {
            let names: Vec<String> = class.parts.iter().map(|p| p.name.clone()).collect();
            let acc: Vec<Option<f64>> = class.parts.iter().map(|p| p.accuracy).collect();
            self.store.write_text(
                &format!("plots/{label}_{}.svg", file_stem(&class.name)),
                &bar_chart(
                    &format!("{label}: {} (parts by contribution)", class.name),
                    "accuracy",
                    &names,
                    &acc,
                ),
            )?;
            let baseline = class
                .baseline_accuracy
                .map(|a| format!("{a:.4}"))
                .unwrap_or("-".into());
            println!(
                "{} ({} samples, unmasked accuracy {baseline})",
                class.name, class.samples
            );
            for p in &class.parts {
                let acc = p.accuracy.map(|a| format!("{a:.4}")).unwrap_or("-".into());
                println!("  {:<16} {:>8.4} {acc:>8}", p.name, p.contribution);
            }
        }
        Ok(())
    }

    fn generate_masks(&self, id: &str) -> Result<()> {
        let record = self.manifest.sample(id)?;
        let local = self.manifest.sample_parts(record)?;
        let set = generate_set(self.manifest.load_image(record)?, local.parts)?;
        let space = set.space()?;
        for c in space.coalitions() {
            let img = set.render(c)?;
            let path = self
                .store
                .root()
                .join(format!("{}.png", c.to_presence_string()));
            img.save_png(&path)?;
        }
        println!(
            "wrote {} images for parts {} to {}",
            space.len(),
            set.parts().names().join(","),
            self.store.root().display()
        );
        Ok(())
    }
}

fn some(values: &[f64]) -> Vec<Option<f64>> {
    values.iter().copied().map(Some).collect()
}

fn print_row(names: &[String], values: &[f64]) {
    for (n, v) in names.iter().zip(values) {
        println!("  {n:<16} {v:.4}");
    }
}
