use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use decode_core::graph::{generate_synthetic, load_dataset, write_dataset, GeneratorConfig};
use decode_core::pipeline::{
    cache, evaluate_model, run_pipeline, train_single, validate_dataset, PipelineError, RunConfig, Stages,
};
use decode_core::Execution;

/// Density-aware graph classification pipeline.
#[derive(Parser, Debug)]
#[command(name = "decode", version, about)]
struct Cli {
    /// Run configuration file (`key = value` lines).
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Override a config key; may be repeated. Applied after the file.
    #[arg(long = "set", short = 's', value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Dataset root (same as `dataset_root`).
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    /// Output directory (same as `output_dir`).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Use this single seed for model training and data generation.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 1 runs everything sequentially. Defaults to all cores.
    #[arg(long, short, global = true)]
    jobs: Option<usize>,
    /// Log level when RUST_LOG is unset.
    #[arg(long, global = true, default_value = "info")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct StageArgs {
    /// Density metric (defaults to the first configured).
    #[arg(long)]
    metric: Option<String>,
    /// Threshold rule (defaults to the first configured).
    #[arg(long)]
    rule: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write `<graph-id>.density.csv` for every graph.
    Density(StageArgs),
    /// Write `<graph-id>.walks.txt` for every graph.
    Walk(StageArgs),
    /// Write `<graph-id>.emb.tsv` for every graph.
    Embed(StageArgs),
    /// Train one model with the first grid values; writes model.bin and train_log.csv.
    Train,
    /// Evaluate a saved model on the test split.
    Eval {
        /// Model file; defaults to `<output_dir>/model.bin`.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Generate a planted dense-core vs background dataset.
    Synth {
        #[arg(long, default_value_t = 60)]
        graphs_per_class: usize,
        #[arg(long, default_value_t = 90)]
        min_nodes: usize,
        #[arg(long, default_value_t = 110)]
        max_nodes: usize,
        /// Destination; defaults to the dataset root.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a dataset layout and print size statistics per class.
    Validate {
        /// Dataset root; defaults to the configured one.
        root: Option<PathBuf>,
    },
    /// Run every stage and the full evaluation sweep.
    Pipeline,
}

fn config_error(msg: impl Into<String>) -> anyhow::Error {
    PipelineError::Config(msg.into()).into()
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    for o in &cli.overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| config_error(format!("--set {o}: expected KEY=VALUE")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(d) = &cli.dataset {
        cfg.dataset_root = d.clone();
    }
    if let Some(o) = &cli.output_dir {
        cfg.output_dir = o.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seeds = vec![s];
    }
    if let Command::Density(a) | Command::Walk(a) | Command::Embed(a) = &cli.command {
        if let Some(m) = &a.metric {
            cfg.set("density_metric", m)?;
        }
        if let Some(r) = &a.rule {
            cfg.set("threshold_rule", r)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execution(jobs: Option<usize>) -> Result<Execution> {
    match jobs {
        Some(0) => Err(config_error("--jobs must be at least 1")),
        Some(1) => Ok(Execution::Sequential),
        #[cfg(feature = "parallel")]
        Some(n) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .context("configuring the thread pool")?;
            Ok(Execution::Parallel)
        }
        #[cfg(not(feature = "parallel"))]
        Some(_) => {
            log::warn!("built without the parallel feature; --jobs is ignored");
            Ok(Execution::Sequential)
        }
        None => Ok(Execution::default()),
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn stage_files(cmd: &Command, cfg: &RunConfig, exec: Execution) -> Result<()> {
    let data = load_dataset(&cfg.dataset_root).map_err(|e| PipelineError::Stage {
        stage: "load",
        graph: None,
        message: e.to_string(),
    })?;
    let stages = Stages::new(exec, cfg, &data);
    let (metric, rule) = (cfg.density_metrics[0], cfg.threshold_rules[0]);
    let out = &cfg.output_dir;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    match cmd {
        Command::Density(_) => {
            for (id, p) in data.ids().iter().zip(stages.density(metric)?) {
                write_file(&out.join(format!("{id}.density.csv")), &cache::encode_density(&p))?;
            }
        }
        Command::Walk(_) => {
            for (id, c) in data.ids().iter().zip(stages.walks(metric, rule)?) {
                write_file(&out.join(format!("{id}.walks.txt")), &cache::encode_walks(&c))?;
            }
        }
        Command::Embed(_) => {
            for (id, e) in data.ids().iter().zip(stages.embeddings(metric, rule)?.iter()) {
                write_file(&out.join(format!("{id}.emb.tsv")), &cache::encode_embedding(e))?;
            }
        }
        _ => unreachable!("only stage commands write per-graph files"),
    }
    for s in stages.stats() {
        println!("{s}");
    }
    println!("wrote {} graph file(s) to {}", data.len(), out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let exec = execution(cli.jobs)?;
    match &cli.command {
        Command::Validate { root } => {
            let root = match root {
                Some(r) => r.clone(),
                None => load_config(&cli)?.dataset_root,
            };
            print!("{}", validate_dataset(&root)?);
        }
        Command::Synth { graphs_per_class, min_nodes, max_nodes, out } => {
            let cfg = load_config(&cli)?;
            let gen = GeneratorConfig {
                graphs_per_class: *graphs_per_class,
                node_count_range: *min_nodes..=*max_nodes,
                seed: cli.seed.unwrap_or(0),
                ..GeneratorConfig::default()
            };
            gen.validate().map_err(|e| config_error(e.to_string()))?;
            let dest = out.clone().unwrap_or(cfg.dataset_root);
            let data = generate_synthetic(&gen).context("generating dataset")?;
            write_dataset(&data, &dest).with_context(|| format!("writing {}", dest.display()))?;
            println!("wrote {} graphs to {}", data.len(), dest.display());
        }
        Command::Density(_) | Command::Walk(_) | Command::Embed(_) => {
            let cfg = load_config(&cli)?;
            stage_files(&cli.command, &cfg, exec)?;
        }
        Command::Train => {
            let cfg = load_config(&cli)?;
            let out = train_single(&cfg, exec)?;
            println!(
                "best epoch {} (val loss {:.4}); wrote {}",
                out.best_epoch,
                out.best_val_loss,
                cfg.output_dir.join("model.bin").display()
            );
        }
        Command::Eval { model } => {
            let cfg = load_config(&cli)?;
            let path = model.clone().unwrap_or_else(|| cfg.output_dir.join("model.bin"));
            let outcome = evaluate_model(&cfg, &path, exec)?;
            print!("{}", decode_core::eval::summary_markdown(&outcome));
        }
        Command::Pipeline => {
            let cfg = load_config(&cli)?;
            let outcome = run_pipeline(&cfg, exec)?;
            for s in &outcome.stages {
                println!("{s}");
            }
            print!("{}", decode_core::eval::summary_markdown(&outcome.sweep));
            println!("reports in {}", outcome.output_dir.display());
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<PipelineError>() {
        Some(e) => e.exit_code() as u8,
        None => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(&cli.log_level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
