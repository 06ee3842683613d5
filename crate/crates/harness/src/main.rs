use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use scale_core::{Engine, JobRequest, LanguageRegistry, Mode};
use scale_harness::bench::{bench_latency, render_table, BenchOptions};
use scale_harness::evaluate::{analyze_report, run_evaluate, EvalOptions, DEFAULT_WORKERS};
use scale_harness::{load_dataset, open_pool, report, HarnessConfig, HarnessError, Result};
use scale_mock::{MockKind, MockServer, Script};

#[derive(Parser)]
#[command(name = "scale", version, about = "Draft-and-refine translation gateway")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Endpoints {
    /// Engine config JSON; `SCALE_*` variables override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Demonstration pool JSONL (overrides the config's `pool`).
    #[arg(long)]
    pool: Option<PathBuf>,
}

impl Endpoints {
    fn load(&self) -> Result<HarnessConfig> {
        let mut cfg = HarnessConfig::load(self.config.as_deref())?;
        if self.pool.is_some() {
            cfg.pool.clone_from(&self.pool);
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Translate one job and print the result as JSON.
    Translate {
        #[arg(long)]
        job: PathBuf,
        #[command(flatten)]
        endpoints: Endpoints,
    },
    /// Translate a dataset and write a report.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        endpoints: Endpoints,
        #[arg(long, default_value = "refine")]
        mode: Mode,
        #[arg(long, default_value_t = 10)]
        shots: usize,
        #[arg(long, default_value_t = 1)]
        paths: usize,
        #[arg(long)]
        no_confidence: bool,
        #[arg(long)]
        pivot_lang: Option<String>,
        #[arg(long, default_value_t = DEFAULT_WORKERS)]
        workers: usize,
        #[arg(long)]
        out: PathBuf,
        /// Per-segment CSV summary.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Add perplexity and literalness scores to an existing report.
    Analyze {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Dataset holding reference alignments, used when no aligner is configured.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Defaults to rewriting the input report.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Pre-generate STM drafts for every pool entry and save them into the pool file.
    BuildDemos {
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "refine")]
        mode: Mode,
        #[arg(long)]
        source_lang: String,
        /// Language the drafts are written in: the target for refine, the pivot for pivot.
        #[arg(long)]
        draft_lang: String,
        #[arg(long, default_value_t = 1)]
        paths: usize,
        /// Defaults to rewriting the input pool.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scripted mock server until interrupted.
    ServeMock {
        #[arg(long)]
        kind: MockKind,
        #[arg(long)]
        script: PathBuf,
        #[arg(long, default_value_t = 9001)]
        port: u16,
    },
    /// Replay a dataset at several shot counts and report mean latencies.
    BenchLatency {
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        endpoints: Endpoints,
        #[arg(long, value_delimiter = ',', default_value = "0,1,10")]
        shots: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[arg(long, default_value_t = 1)]
        paths: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Serve the engine over HTTP.
    Serve {
        #[command(flatten)]
        endpoints: Endpoints,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut body = serde_json::to_vec_pretty(value)?;
    body.push(b'\n');
    std::fs::write(path, body)?;
    Ok(())
}

async fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Translate { job, endpoints } => {
            let cfg = endpoints.load()?;
            let request: JobRequest = serde_json::from_str(&std::fs::read_to_string(&job)?)?;
            let job = request.resolve(&LanguageRegistry::bundled(), &cfg.engine.defaults)?;
            let pool = open_pool(cfg.pool.as_deref())?;
            let result = Engine::new(cfg.engine)?.translate(&job, &pool).await?;
            println!("{}", serde_json::to_string_pretty(&result)?);
        }
        Command::Evaluate {
            dataset,
            endpoints,
            mode,
            shots,
            paths,
            no_confidence,
            pivot_lang,
            workers,
            out,
            csv,
        } => {
            let cfg = endpoints.load()?;
            let records = load_dataset(&dataset)?;
            let pool = open_pool(cfg.pool.as_deref())?;
            let engine = Engine::new(cfg.engine.clone())?;
            let options = EvalOptions {
                mode,
                shots,
                num_paths: paths,
                include_confidence: !no_confidence,
                pivot_lang,
                workers,
            };
            let mut evaluation = run_evaluate(&records, &engine, &pool, &cfg.metrics, &options).await?;
            evaluation.run.config.pool.clone_from(&cfg.pool);
            report::write_json(&evaluation, &out)?;
            if let Some(csv) = csv {
                report::write_csv_file(&evaluation, csv)?;
            }
            let agg = &evaluation.aggregates;
            eprintln!(
                "{} segments, {} failed; chrF++ {:?}, BLEU {:?}",
                agg.segments, agg.failed_segments, agg.chrf_pp, agg.bleu
            );
            if evaluation.failed() {
                return Err(HarnessError::RunFailed {
                    failed: agg.failed_segments,
                    total: agg.segments,
                });
            }
        }
        Command::Analyze {
            report: path,
            config,
            dataset,
            out,
            csv,
        } => {
            let mut evaluation = report::read_json(&path)?;
            let metrics = match config {
                Some(config) => HarnessConfig::load(Some(&config))?.metrics,
                // Reports store redacted keys; only the environment can supply real ones.
                None => {
                    let mut stored = evaluation.run.config.clone();
                    for endpoint in stored.metrics.scorers.iter_mut().chain(stored.metrics.aligner.as_mut()).chain(stored.metrics.lm.as_mut()) {
                        endpoint.api_key = None;
                    }
                    HarnessConfig::resolve(Some(stored), &scale_env())?.metrics
                }
            };
            let records = dataset.map(load_dataset).transpose()?;
            analyze_report(&mut evaluation, &metrics, records.as_deref()).await?;
            report::write_json(&evaluation, out.as_deref().unwrap_or(&path))?;
            if let Some(csv) = csv {
                report::write_csv_file(&evaluation, csv)?;
            }
        }
        Command::BuildDemos {
            pool: pool_path,
            config,
            mode,
            source_lang,
            draft_lang,
            paths,
            out,
        } => {
            let cfg = HarnessConfig::load(config.as_deref())?;
            let registry = LanguageRegistry::bundled();
            let pool = scale_core::DemoPool::load(&pool_path)?;
            let engine = Engine::new(cfg.engine)?;
            let generated = engine
                .warm_demo_drafts(&pool, mode, &registry.parse_tag(&source_lang)?, &registry.parse_tag(&draft_lang)?, paths)
                .await?;
            pool.save(out.as_deref().unwrap_or(&pool_path))?;
            eprintln!("generated drafts for {generated} of {} entries", pool.len());
        }
        Command::ServeMock { kind, script, port } => {
            let script = Script::load(&script)?;
            let server = MockServer::start(kind, script, port).await?;
            eprintln!("{kind:?} mock listening on {}", server.url());
            server.run_until_ctrl_c().await?;
        }
        Command::BenchLatency {
            dataset,
            endpoints,
            shots,
            repeats,
            paths,
            out,
            csv,
        } => {
            let cfg = endpoints.load()?;
            let records = load_dataset(&dataset)?;
            let pool = open_pool(cfg.pool.as_deref())?;
            let options = BenchOptions {
                shots,
                repeats,
                num_paths: paths,
            };
            let rows = bench_latency(&cfg.engine, &pool, &records, &options).await?;
            print!("{}", render_table(&rows));
            if let Some(out) = out {
                write_json(&rows, &out)?;
            }
            if let Some(csv) = csv {
                let mut w = csv::Writer::from_path(csv)?;
                for row in &rows {
                    w.serialize(row)?;
                }
                w.flush()?;
            }
        }
        Command::Serve { endpoints, addr } => {
            let cfg = endpoints.load()?;
            let pool = open_pool(cfg.pool.as_deref())?;
            let engine = Engine::new(cfg.engine)?;
            scale_harness::serve::serve(addr, Arc::new(engine), Arc::new(pool)).await?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn scale_env() -> std::collections::HashMap<String, String> {
    std::env::vars().filter(|(k, _)| k.starts_with("SCALE_")).collect()
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse().command).await {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
