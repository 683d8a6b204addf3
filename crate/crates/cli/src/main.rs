use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use twig_core::features::{featurize_kg, GraphStats};
use twig_core::harness::{
    assemble_batches, enumerate_grid, evaluate_configs, generate_ground_truth, make_split, run_experiment, shot_label,
    ExperimentConfig, ExperimentReport, GroundTruth, KgData, RunManifest, SplitMode, WORKERS_ENV,
};
use twig_core::synth::{generate_kg, SynthKgSpec};
use twig_core::twig::{finetune_twig, train_twig, TwigModel};
use twig_core::{KnowledgeGraph, Split};

mod config;

#[derive(Parser)]
#[command(
    name = "twig",
    version,
    about = "Link-prediction hyperparameter studies and the TWIG simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a graph's three split files and write normalized copies plus dictionaries.
    Parse {
        #[command(flatten)]
        input: GraphArgs,
        /// Output directory; only a summary is printed when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic graph in the split-file layout.
    Generate {
        #[arg(long, value_enum, default_value = "small")]
        preset: Preset,
        #[arg(long, default_value = "synthetic")]
        name: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Structural features of every query in one split, as CSV.
    Featurize {
        #[command(flatten)]
        input: GraphArgs,
        #[arg(long, default_value = "test")]
        split: Split,
        /// Written to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and evaluate every (graph, configuration, seed) cell not already on disk.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Pretrain the simulator on the training configurations of the seen graphs.
    TrainTwig {
        #[command(flatten)]
        run: RunArgs,
        /// Defaults to `<run-dir>/checkpoints/twig.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finetune a pretrained simulator on the held-out graph's finetuning configurations.
    FinetuneTwig {
        #[command(flatten)]
        run: RunArgs,
        /// Defaults to `<run-dir>/checkpoints/twig.json`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Defaults to `<run-dir>/checkpoints/twig-finetuned.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a simulator on the test configurations, or run the whole experiment
    /// (pretrain, finetune, score) when no checkpoint is given.
    Evaluate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Defaults to `<run-dir>/report.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify a report and print its R² table.
    Report {
        report: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: ReportFormat,
    },
}

#[derive(clap::Args)]
struct GraphArgs {
    /// Directory holding train.txt, valid.txt and test.txt.
    #[arg(long, conflicts_with_all = ["train", "valid", "test"])]
    dir: Option<PathBuf>,
    #[arg(long, requires_all = ["valid", "test"])]
    train: Option<PathBuf>,
    #[arg(long)]
    valid: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long, default_value = "kg")]
    name: String,
}

impl GraphArgs {
    fn load(&self) -> Result<KnowledgeGraph> {
        let kg = match (&self.dir, &self.train, &self.valid, &self.test) {
            (Some(dir), ..) => KnowledgeGraph::load_dir(self.name.clone(), dir)?,
            (None, Some(train), Some(valid), Some(test)) => {
                KnowledgeGraph::parse(self.name.clone(), train, valid, test)?
            }
            _ => bail!("give either --dir or all of --train, --valid and --test"),
        };
        Ok(kg)
    }
}

#[derive(clap::Args)]
struct RunArgs {
    /// Experiment configuration (TOML, or JSON by extension).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    run_dir: PathBuf,
    /// Worker threads for the sweep.
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Small,
    KinshipsLike,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Text,
    Csv,
    Json,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Parse { input, out } => parse(&input, out.as_deref()),
        Command::Generate {
            preset,
            name,
            seed,
            out,
        } => generate(preset, &name, seed, &out),
        Command::Featurize { input, split, out } => featurize(&input, split, out.as_deref()),
        Command::Sweep { run } => sweep(&Run::open(&run)?),
        Command::TrainTwig { run, out } => {
            let run = Run::open(&run)?;
            let out = out.unwrap_or_else(|| run.checkpoint("twig.json"));
            train(&run, &out)
        }
        Command::FinetuneTwig { run, checkpoint, out } => {
            let run = Run::open(&run)?;
            let checkpoint = checkpoint.unwrap_or_else(|| run.checkpoint("twig.json"));
            let out = out.unwrap_or_else(|| run.checkpoint("twig-finetuned.json"));
            finetune(&run, &checkpoint, &out)
        }
        Command::Evaluate { run, checkpoint, out } => {
            let run = Run::open(&run)?;
            let out = out.unwrap_or_else(|| run.dir.join("report.json"));
            evaluate(&run, checkpoint.as_deref(), &out)
        }
        Command::Report { report, format } => print_report(&report, format),
    }
}

fn parse(input: &GraphArgs, out: Option<&Path>) -> Result<()> {
    let kg = input.load()?;
    println!(
        "{}: {} entities, {} relations, train {}, valid {}, test {}",
        kg.name(),
        kg.entity_count(),
        kg.relation_count(),
        kg.train().len(),
        kg.valid().len(),
        kg.test().len()
    );
    if let Some(out) = out {
        kg.write_tsv(out)?;
        let dicts = serde_json::to_string_pretty(&kg.dictionaries())?;
        let path = out.join("dictionaries.json");
        std::fs::write(&path, dicts).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn generate(preset: Preset, name: &str, seed: u64, out: &Path) -> Result<()> {
    let mut spec = match preset {
        Preset::Small => SynthKgSpec::small(name),
        Preset::KinshipsLike => SynthKgSpec::kinships_like(),
    };
    spec.name = name.to_owned();
    let kg = generate_kg(&spec, seed)?;
    kg.write_tsv(out)?;
    info!(
        "wrote {} ({} train triples) to {}",
        name,
        kg.train().len(),
        out.display()
    );
    Ok(())
}

fn featurize(input: &GraphArgs, split: Split, out: Option<&Path>) -> Result<()> {
    let kg = input.load()?;
    let stats = GraphStats::build(&kg);
    let table = featurize_kg(&kg, &stats, split);
    match out {
        Some(path) => table.write_csv(path)?,
        None => print!("{}", table.to_csv()),
    }
    Ok(())
}

/// A configuration file with its graphs loaded, bound to a run directory.
struct Run {
    config: ExperimentConfig,
    kgs: Vec<KnowledgeGraph>,
    grid: Vec<twig_core::kge::HyperparamConfig>,
    dir: PathBuf,
}

impl Run {
    fn open(args: &RunArgs) -> Result<Self> {
        if let Some(n) = args.workers {
            // the core reads the pool size from the environment
            std::env::set_var(WORKERS_ENV, n.to_string());
        }
        let config = config::load(&args.config)?;
        let base = args.config.parent().unwrap_or(Path::new("."));
        let kgs = config.load_kgs(base)?;
        let grid = enumerate_grid(&config.grid)?;
        std::fs::create_dir_all(&args.run_dir).with_context(|| format!("creating {}", args.run_dir.display()))?;
        Ok(Run {
            config,
            kgs,
            grid,
            dir: args.run_dir.clone(),
        })
    }

    fn results(&self) -> PathBuf {
        self.dir.join("results")
    }

    fn checkpoint(&self, file: &str) -> PathBuf {
        self.dir.join("checkpoints").join(file)
    }

    fn seeds(&self) -> &[u64] {
        &self.config.grid.replicate_seeds
    }

    fn truth(&self) -> Result<GroundTruth> {
        let names: Vec<String> = self.kgs.iter().map(|k| k.name().to_owned()).collect();
        GroundTruth::load(&self.results(), &names, &self.grid, self.seeds())
            .context("ground truth incomplete; run `twig sweep` first")
    }

    fn data(&self) -> Vec<KgData> {
        self.kgs.iter().map(KgData::new).collect()
    }

    fn holdout(&self) -> Option<&str> {
        match self.config.split.mode {
            SplitMode::HoldoutKg => self.config.split.holdout_kg.as_deref(),
            SplitMode::UnseenHyperparameters => None,
        }
    }
}

fn save_model(model: &TwigModel, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    model.save(path)?;
    info!("checkpoint written to {}", path.display());
    Ok(())
}

fn sweep(run: &Run) -> Result<()> {
    let results = run.results();
    let outcome = generate_ground_truth(&run.kgs, &run.grid, run.seeds(), Some(&results), run.config.eval)?;
    let manifest = RunManifest::from_sweep(&run.kgs, &run.grid, run.seeds(), run.config.eval, &outcome);
    manifest.save(&run.dir.join("manifest.json"))?;
    println!(
        "{} cells: {} computed, {} reused, {} failed",
        outcome.computed + outcome.reused + outcome.failures.len(),
        outcome.computed,
        outcome.reused,
        outcome.failures.len()
    );
    if !outcome.failures.is_empty() {
        bail!("{} cells failed; see manifest.json", outcome.failures.len());
    }
    Ok(())
}

fn train(run: &Run, out: &Path) -> Result<()> {
    let truth = run.truth()?;
    let data = run.data();
    let split = make_split(run.grid.len(), &run.config.split)?;
    let seen: Vec<&KgData> = data.iter().filter(|d| Some(d.name.as_str()) != run.holdout()).collect();
    let batches = assemble_batches(&seen, &run.grid, &split.train, run.seeds(), &truth)?;
    let model = train_twig(&batches, &run.config.twig)?;
    save_model(&model, out)
}

fn finetune(run: &Run, checkpoint: &Path, out: &Path) -> Result<()> {
    let Some(holdout) = run.holdout() else {
        bail!("finetuning needs split.mode = \"holdout-kg\" and split.holdout_kg");
    };
    let truth = run.truth()?;
    let data = run.data();
    let held = data
        .iter()
        .find(|d| d.name == holdout)
        .with_context(|| format!("held-out graph '{holdout}' is not in the configuration"))?;
    let split = make_split(run.grid.len(), &run.config.split)?;
    let batches = assemble_batches(&[held], &run.grid, &split.finetune, run.seeds(), &truth)?;
    let mut model = TwigModel::load(checkpoint)?;
    let settings = &run.config.finetune;
    if let Some(w) = settings.mse_weight {
        model.settings.mse_weight = w;
    }
    let tuned = finetune_twig(&model, &batches, settings.epochs, settings.learning_rate, settings.seed)?;
    save_model(&tuned, out)
}

fn evaluate(run: &Run, checkpoint: Option<&Path>, out: &Path) -> Result<()> {
    let truth = run.truth()?;
    let data = run.data();
    let report = match checkpoint {
        None => {
            let output = run_experiment(
                &data,
                &run.grid,
                run.seeds(),
                &truth,
                &run.config.split,
                &run.config.twig,
                &run.config.finetune,
            )?;
            save_model(&output.pretrained, &run.checkpoint("twig.json"))?;
            if let Some(tuned) = &output.finetuned {
                save_model(tuned, &run.checkpoint("twig-finetuned.json"))?;
            }
            output.report
        }
        Some(path) => score_checkpoint(run, &data, &truth, path)?,
    };
    report.save(out)?;
    info!("report written to {}", out.display());
    print!("{}", render_text(&report));
    Ok(())
}

/// Scores a saved simulator on the test configurations without retraining.
/// The provenance records the checkpoint's own settings.
fn score_checkpoint(run: &Run, data: &[KgData], truth: &GroundTruth, path: &Path) -> Result<ExperimentReport> {
    let model = TwigModel::load(path)?;
    let split = make_split(run.grid.len(), &run.config.split)?;
    let mut evaluations = Vec::new();
    for d in data {
        let (indices, setting) = if Some(d.name.as_str()) == run.holdout() {
            (&split.holdout_test, shot_label(run.config.split.shot_fraction))
        } else {
            (&split.test, twig_core::harness::UNSEEN_HYPERPARAMETERS.to_owned())
        };
        evaluations.push(evaluate_configs(
            &model,
            d,
            &run.grid,
            indices,
            run.seeds(),
            truth,
            &setting,
        )?);
    }
    let digest = twig_core::eval::sha256_hex(model.to_json()?.as_bytes());
    Ok(ExperimentReport {
        mode: run.config.split.mode,
        evaluations,
        provenance: twig_core::harness::Provenance {
            grid_hash: twig_core::harness::grid_hash(&run.grid),
            replicate_seeds: run.seeds().to_vec(),
            plan: run.config.split.clone(),
            twig: model.settings.clone(),
            finetune: None,
            checkpoint_sha256: digest,
            finetuned_checkpoint_sha256: None,
        },
    })
}

fn render_text(report: &ExperimentReport) -> String {
    let mut s = format!("{:<24} {:<24} {:>8} {:>6}\n", "kg", "setting", "R2", "n");
    for e in &report.evaluations {
        s.push_str(&format!(
            "{:<24} {:<24} {:>8.4} {:>6}\n",
            e.kg,
            e.setting,
            e.r2,
            e.pairs.len()
        ));
    }
    s
}

fn print_report(path: &Path, format: ReportFormat) -> Result<()> {
    let report = ExperimentReport::load(path)?;
    report.verify().context("report failed verification")?;
    match format {
        ReportFormat::Text => print!("{}", render_text(&report)),
        ReportFormat::Json => println!("{}", report.to_json()?),
        ReportFormat::Csv => {
            println!("kg,setting,config_hash,true_mrr,predicted_mrr");
            for e in &report.evaluations {
                for p in &e.pairs {
                    println!(
                        "{},{},{},{},{}",
                        e.kg, e.setting, p.config_hash, p.true_mrr, p.predicted_mrr
                    );
                }
            }
        }
    }
    Ok(())
}
