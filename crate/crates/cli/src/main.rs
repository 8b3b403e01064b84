//! `pvqa`: answer one visual question, or evaluate a dataset.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use pvqa_core::config::Config;
use pvqa_core::eval::{evaluate, ingest, EvalOptions, TraceStore};
use pvqa_core::llm::Gateway;
use pvqa_core::model::{ImageRef, PipelineConfig, Query};
use pvqa_core::pipeline::Pipeline;
use pvqa_core::prompt::DatasetProfile;

const DEFAULT_CONFIG: &str = "pvqa.toml";

#[derive(Parser)]
#[command(name = "pvqa", version, about = "Programmatic visual question answering with candidate programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Answer one question about one image (or an image pair).
    Ask(AskArgs),
    /// Run a JSONL dataset and report exact-match accuracy.
    Eval(EvalArgs),
}

#[derive(Args)]
struct Common {
    /// Configuration file.
    #[arg(long, default_value = DEFAULT_CONFIG)]
    config: PathBuf,
    /// Replay this mock script instead of the configured backend.
    #[arg(long)]
    mock_script: Option<PathBuf>,
    /// One rephrasing, one program, no aggregation.
    #[arg(long)]
    io_baseline: bool,
}

#[derive(Args)]
struct AskArgs {
    #[arg(long)]
    image: String,
    /// Second image, for statement-about-a-pair questions.
    #[arg(long)]
    image2: Option<String>,
    #[arg(long)]
    question: String,
    /// Write the full run trace as JSON.
    #[arg(long)]
    trace_out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct EvalArgs {
    /// JSONL file, one record per line.
    #[arg(long)]
    dataset: PathBuf,
    /// gqa, vqav2 or nlvr2; defaults to the config's prompts.profile.
    #[arg(long)]
    profile: Option<DatasetProfile>,
    /// Directory for report.json, summary.txt and per-record traces.
    #[arg(long, default_value = "runs/latest")]
    run_dir: PathBuf,
    /// Reuse traces already stored under --run-dir.
    #[arg(long)]
    resume: bool,
    #[command(flatten)]
    common: Common,
}

/// Config problems exit 2, everything else 1.
enum Failure {
    Config(anyhow::Error),
    Run(anyhow::Error),
}

impl Failure {
    fn exit(self) -> ExitCode {
        let (code, err) = match self {
            Failure::Config(e) => (2, e),
            Failure::Run(e) => (1, e),
        };
        eprintln!("error: {err:#}");
        ExitCode::from(code)
    }
}

struct Setup {
    config: Config,
    gateway: Arc<Gateway>,
}

fn setup(common: &Common) -> Result<Setup> {
    let mut config = Config::load(&common.config).with_context(|| format!("loading {}", common.config.display()))?;
    if common.io_baseline {
        config.pipeline = PipelineConfig {
            llm_params: config.pipeline.llm_params.clone(),
            step_budget: config.pipeline.step_budget,
            ..PipelineConfig::io_baseline()
        };
    }
    let gateway = Arc::new(config.gateway(common.mock_script.as_deref())?);
    Ok(Setup { config, gateway })
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn ask(args: AskArgs) -> Result<(), Failure> {
    let Setup { config, gateway } = setup(&args.common).map_err(Failure::Config)?;
    let images = match &args.image2 {
        Some(right) => ImageRef::pair(&args.image, right),
        None => ImageRef::single(&args.image),
    };
    let query = Query::new("ask", &args.question).map_err(|e| Failure::Config(e.into()))?;
    let bundle = config.bundle(config.prompts.profile).map_err(|e| Failure::Config(e.into()))?;
    let provider = config.provider(gateway.clone()).map_err(|e| Failure::Config(e.into()))?;
    let pipeline = Pipeline::new(config.pipeline.clone(), &bundle, &gateway, provider.as_ref())
        .map_err(|e| Failure::Config(e.into()))?
        .with_parallelism(config.run.parallelism);

    match pipeline.run(&query, &images) {
        Ok(trace) => {
            if let Some(path) = &args.trace_out {
                write_json(path, &trace).map_err(Failure::Run)?;
            }
            let agg = &trace.aggregation;
            println!("answer: {}", agg.final_answer);
            println!("method: {:?}", agg.method);
            println!("code:\n{}", agg.final_code);
            Ok(())
        }
        Err(failure) => {
            if let Some(path) = &args.trace_out {
                write_json(path, &failure.partial).map_err(Failure::Run)?;
            }
            Err(Failure::Run(anyhow::anyhow!("{:?} stage failed: {}", failure.stage, failure.error)))
        }
    }
}

fn eval(args: EvalArgs) -> Result<(), Failure> {
    let Setup { config, gateway } = setup(&args.common).map_err(Failure::Config)?;
    let profile = args.profile.unwrap_or(config.prompts.profile);
    let records = ingest(&args.dataset, profile).map_err(|e| Failure::Config(e.into()))?;
    let bundle = config.bundle(profile).map_err(|e| Failure::Config(e.into()))?;
    let provider = config.provider(gateway.clone()).map_err(|e| Failure::Config(e.into()))?;
    let pipeline = Pipeline::new(config.pipeline.clone(), &bundle, &gateway, provider.as_ref())
        .map_err(|e| Failure::Config(e.into()))?
        .with_parallelism(config.run.parallelism);

    let run = || -> Result<()> {
        let store = TraceStore::open(args.run_dir.join("traces"))?;
        let (report, progress) = evaluate(&records, &pipeline, Some(&store), EvalOptions { profile, resume: args.resume })?;
        report.write(&args.run_dir).with_context(|| format!("writing report to {}", args.run_dir.display()))?;
        print!("{}", report.summary());
        println!("accuracy: {:.2}%", report.accuracy * 100.0);
        println!(
            "records: {} executed, {} resumed; llm calls: {}",
            progress.executed,
            progress.resumed,
            gateway.stats().backend_calls
        );
        Ok(())
    };
    run().map_err(Failure::Run)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ask(args) => ask(args),
        Command::Eval(args) => eval(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.exit(),
    }
}

