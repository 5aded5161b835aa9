//! Batch command-line front end. stdout carries data only (verdict lines,
//! tables); diagnostics go to stderr so the tool composes in pipelines.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::corpus::{
    build_dataset, cache_features, generate_synthetic_corpus, ingest_manifest, resolve_path,
    CorpusProfile, DatasetSpec, ExtractMode, FeatureCache, ManifestEntry, Task,
};
use crate::features::extract_feature_vector;
use crate::matrix::Matrix;
use crate::pe::{parse_pe, ParseOutcome, RawBinary};
use crate::pipeline::{
    benchmark_predict_batch, bilayer_predict_batch, load_benchmark, load_bilayer, save_benchmark,
    save_bilayer, train_benchmark, train_bilayer, BenchmarkModel, BiLayeredModel, ModelFamily,
    TrainerSettings, Verdict,
};
use crate::eval::{compute_metrics, render_report, run_experiment, EvalReport, RunMetadata};

#[derive(Parser)]
#[command(name = "pesentry", about = "PE static analysis and malware triage toolkit")]
pub struct Cli {
    /// Seed for every stochastic step; falls back to PESENTRY_SEED.
    #[arg(long, global = true, env = "PESENTRY_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for extraction fan-out; 0 means all cores.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Suppress stderr diagnostics.
    #[arg(long, global = true, default_value_t = false)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a synthetic PE corpus with a manifest.
    Synth(SynthArgs),
    /// Extract features for every manifest entry into a cache file.
    Extract(ExtractArgs),
    /// Train a model or pipeline and write a run directory.
    Train(TrainArgs),
    /// Score files with a saved bundle, one JSON verdict line each.
    Predict(PredictArgs),
    /// Evaluate saved bundles on a held-out test split.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
pub struct SynthArgs {
    /// Output directory; receives files/ and manifest.jsonl.
    #[arg(long)]
    pub out: PathBuf,
    /// Files per class (6 classes).
    #[arg(long, default_value_t = 50)]
    pub per_class: usize,
}

#[derive(Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// vector (2381-wide) or grayscale (4096-wide).
    #[arg(long, default_value = "vector")]
    pub mode: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct TrainArgs {
    /// malware | families | ransomware | bilayer | benchmark
    #[arg(long)]
    pub task: String,
    /// xgb-like | lgbm-like | mlp
    #[arg(long, default_value = "xgb-like")]
    pub model: String,
    #[arg(long)]
    pub cache: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Boosting rounds (trees) or MLP epochs.
    #[arg(long, default_value_t = 40)]
    pub rounds: usize,
}

#[derive(Args)]
pub struct PredictArgs {
    /// Bundle directory written by train (bilayer or benchmark).
    #[arg(long)]
    pub bundle: PathBuf,
    /// A PE file, or a .jsonl manifest listing many.
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// Bi-layered bundle directory.
    #[arg(long)]
    pub bilayer: Option<PathBuf>,
    /// Benchmark bundle directory.
    #[arg(long)]
    pub benchmark: Option<PathBuf>,
    #[arg(long)]
    pub cache: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        // Ignore the error from repeat initialization in test harnesses.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    let quiet = cli.quiet;
    let code = match &cli.command {
        Command::Synth(args) => cmd_synth(&cli, args),
        Command::Extract(args) => cmd_extract(&cli, args),
        Command::Train(args) => cmd_train(&cli, args),
        Command::Predict(args) => cmd_predict(&cli, args),
        Command::Evaluate(args) => cmd_evaluate(&cli, args),
    };
    match code {
        Ok(code) => code,
        Err(err) => {
            if !quiet {
                eprintln!("error: {err}");
            }
            ExitCode::from(1)
        }
    }
}

fn diag(cli: &Cli, message: &str) {
    if !cli.quiet {
        eprintln!("{message}");
    }
}

fn cmd_synth(cli: &Cli, args: &SynthArgs) -> anyhow::Result<ExitCode> {
    let profile = CorpusProfile::balanced(args.per_class);
    let entries = generate_synthetic_corpus(&args.out, &profile, cli.seed)?;
    diag(
        cli,
        &format!(
            "wrote {} files under {} with manifest.jsonl",
            entries.len(),
            args.out.display()
        ),
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_extract(cli: &Cli, args: &ExtractArgs) -> anyhow::Result<ExitCode> {
    let mode: ExtractMode = args
        .mode
        .parse()
        .map_err(|e: String| anyhow::anyhow!(e))?;
    let ingest = ingest_manifest(&args.manifest)?;
    let report = cache_features(&args.manifest, &ingest.entries, mode);
    report.cache.write(&args.out)?;
    for failure in &report.failures {
        diag(cli, &format!("skipped: {failure}"));
    }
    let skipped = report.failures.len() + ingest.missing_files.len();
    diag(
        cli,
        &format!(
            "cached {} rows of width {} to {}",
            report.cache.rows(),
            report.cache.width,
            args.out.display()
        ),
    );
    if skipped > 0 {
        if !cli.quiet {
            eprintln!("error: partial_extraction skipped={skipped}");
        }
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_task(task: &str) -> anyhow::Result<Task> {
    task.parse::<Task>().map_err(|e| anyhow::anyhow!(e))
}

fn cmd_train(cli: &Cli, args: &TrainArgs) -> anyhow::Result<ExitCode> {
    let family: ModelFamily = args.model.parse().map_err(|e: String| anyhow::anyhow!(e))?;
    let mut settings = TrainerSettings::new(family, cli.seed);
    settings.rounds = args.rounds;
    let ingest = ingest_manifest(&args.manifest)?;
    let cache = FeatureCache::read(&args.cache)?;

    if args.task == "bilayer" || args.task == "benchmark" {
        let spec = DatasetSpec::new(Task::BilayerEval, cli.seed);
        let dataset = build_dataset(&ingest.entries, &spec, &cache)?;
        std::fs::create_dir_all(&args.out)?;
        std::fs::write(
            args.out.join("spec.json"),
            serde_json::to_string_pretty(&spec)?,
        )?;
        if args.task == "bilayer" {
            let model = train_bilayer(&dataset.train.features, &dataset.train.labels, &settings)?;
            save_bilayer(&model, &args.out)?;
        } else {
            let model = train_benchmark(&dataset.train.features, &dataset.train.labels, &settings)?;
            save_benchmark(&model, &args.out)?;
        }
        diag(cli, &format!("bundle written to {}", args.out.display()));
        return Ok(ExitCode::SUCCESS);
    }

    let task = parse_task(&args.task)?;
    let spec = DatasetSpec::new(task, cli.seed);
    let reports = run_experiment(&ingest.entries, &cache, &spec, &settings, &args.out)?;
    for report in &reports {
        diag(
            cli,
            &format!(
                "{}: accuracy {:.4} f1_macro {:.4}",
                report.metadata.topology, report.accuracy, report.f1_macro
            ),
        );
    }
    Ok(ExitCode::SUCCESS)
}

enum Bundle {
    Bilayer(BiLayeredModel),
    Benchmark(BenchmarkModel),
}

fn load_bundle(dir: &Path) -> anyhow::Result<Bundle> {
    match load_bilayer(dir) {
        Ok(m) => Ok(Bundle::Bilayer(m)),
        Err(_) => Ok(Bundle::Benchmark(load_benchmark(dir)?)),
    }
}

fn predict_rows(bundle: &Bundle, features: &Matrix) -> anyhow::Result<Vec<Verdict>> {
    Ok(match bundle {
        Bundle::Bilayer(m) => bilayer_predict_batch(m, features)?,
        Bundle::Benchmark(m) => benchmark_predict_batch(m, features)?,
    })
}

fn cmd_predict(_cli: &Cli, args: &PredictArgs) -> anyhow::Result<ExitCode> {
    let bundle = load_bundle(&args.bundle)?;
    let inputs: Vec<PathBuf> = if args.input.extension().is_some_and(|e| e == "jsonl") {
        let ingest = ingest_manifest(&args.input)?;
        ingest
            .entries
            .iter()
            .map(|e: &ManifestEntry| resolve_path(&args.input, e))
            .collect()
    } else {
        vec![args.input.clone()]
    };
    for path in &inputs {
        let raw = RawBinary::from_file(path)?;
        let degraded = match parse_pe(&raw) {
            ParseOutcome::Parsed(_) => None,
            ParseOutcome::Degraded(d) => Some(d.reason),
        };
        let fv = extract_feature_vector(&raw);
        let features = Matrix::from_rows(&[fv.values.clone()]);
        let verdict = predict_rows(&bundle, &features)?.remove(0);
        let mut line = serde_json::json!({
            "path": path.display().to_string(),
            "label": verdict.label.name(),
            "malware_score": verdict.malware_score,
            "ransomware_score": verdict.ransomware_score,
        });
        if let Some(reason) = degraded {
            line["degraded"] = serde_json::to_value(reason)?;
        }
        println!("{line}");
    }
    Ok(ExitCode::SUCCESS)
}

fn evaluate_bundle(
    bundle: &Bundle,
    features: &Matrix,
    labels: &[usize],
    classes: &[String],
    metadata: RunMetadata,
) -> anyhow::Result<EvalReport> {
    let width = match bundle {
        Bundle::Bilayer(m) => m.stage1.input_width(),
        Bundle::Benchmark(m) => m.model.input_width(),
    };
    if width != features.cols {
        anyhow::bail!(
            "schema_mismatch bundle_width={width} cache_width={}",
            features.cols
        );
    }
    let predictions: Vec<usize> = predict_rows(bundle, features)?
        .iter()
        .map(|v| v.label.index())
        .collect();
    let mut report = compute_metrics(labels, &predictions, classes, None)?;
    report.metadata = metadata;
    Ok(report)
}

fn cmd_evaluate(cli: &Cli, args: &EvaluateArgs) -> anyhow::Result<ExitCode> {
    if args.bilayer.is_none() && args.benchmark.is_none() {
        anyhow::bail!("nothing to evaluate: pass --bilayer and/or --benchmark");
    }
    let ingest = ingest_manifest(&args.manifest)?;
    let cache = FeatureCache::read(&args.cache)?;
    let spec = DatasetSpec::new(Task::BilayerEval, cli.seed);
    let dataset = build_dataset(&ingest.entries, &spec, &cache)?;
    std::fs::create_dir_all(&args.out)?;
    std::fs::write(
        args.out.join("spec.json"),
        serde_json::to_string_pretty(&spec)?,
    )?;

    let mut reports: Vec<EvalReport> = Vec::new();
    for (flag, topology) in [(&args.bilayer, "bilayer"), (&args.benchmark, "benchmark")] {
        let Some(dir) = flag else { continue };
        let bundle = load_bundle(dir)?;
        let metadata = RunMetadata {
            topology: topology.into(),
            model_family: String::new(),
            dataset_digest: spec.digest(),
            seed: cli.seed,
        };
        let report = evaluate_bundle(
            &bundle,
            &dataset.test.features,
            &dataset.test.labels,
            &dataset.class_names,
            metadata,
        )?;
        let json = serde_json::to_string_pretty(&report)?;
        std::fs::write(args.out.join(format!("report_{topology}.json")), json)?;
        std::fs::write(
            args.out.join(format!("report_{topology}.txt")),
            render_report(&report),
        )?;
        std::fs::write(
            args.out.join(format!("confusion_{topology}.csv")),
            report.confusion.to_csv(),
        )?;
        reports.push(report);
    }

    if reports.len() == 2 {
        println!("metric      {:>12}  {:>12}", "bilayer", "benchmark");
        println!(
            "accuracy    {:>12.4}  {:>12.4}",
            reports[0].accuracy, reports[1].accuracy
        );
        println!(
            "f1_macro    {:>12.4}  {:>12.4}",
            reports[0].f1_macro, reports[1].f1_macro
        );
    } else {
        print!("{}", render_report(&reports[0]));
    }
    Ok(ExitCode::SUCCESS)
}
