use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Context;
use clap::{Parser, Subcommand};
use pragmachat::config::BackendKind;
use pragmachat::jobs::{analyze_fixture, FixtureSpec, JobSpec, JobStatus};
use pragmachat::{App, AppConfig};
use pragmachat_core::experiment::{emit_comparison, ExperimentConfig, OutputFormat};
use pragmachat_core::metrics::METRIC_NAMES;

#[derive(Parser)]
#[command(name = "pragmachat", version, about = "Document-grounded chat with speech-act prompting")]
struct Cli {
    /// TOML config file.
    #[arg(long, global = true, env = "PRAGMACHAT_CONFIG")]
    config: Option<PathBuf>,
    /// Data directory (overrides the config file).
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Generation backend (overrides the config file).
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendKind>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP API.
    Serve {
        #[arg(long)]
        bind: Option<String>,
    },
    /// Add a .txt or .pdf document to the knowledge store.
    Ingest {
        path: PathBuf,
        #[arg(long)]
        title: Option<String>,
    },
    /// Send one message in a new session and print the reply with its metrics.
    Chat {
        #[arg(long)]
        model: String,
        /// Document id or title.
        #[arg(long)]
        doc: String,
        #[arg(long)]
        include_force: bool,
        #[arg(long)]
        message: String,
        /// Print the full reply as JSON.
        #[arg(long)]
        json: bool,
    },
    #[command(subcommand)]
    Experiment(ExperimentCommand),
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Run an experiment config (JSON or TOML); prints the results CSV.
    Run {
        config: PathBuf,
        /// Also copy every artifact into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare a without-force and a with-force results CSV.
    Analyze {
        without: PathBuf,
        with: PathBuf,
        #[arg(long, default_value = "markdown")]
        format: OutputFormat,
        #[arg(long, default_value_t = 0.0)]
        tie_epsilon: f64,
    },
}

fn load_config(cli: &Cli) -> anyhow::Result<AppConfig> {
    let mut config = AppConfig::load(cli.config.as_deref())?;
    if let Some(dir) = &cli.data {
        config.data_dir = dir.clone();
    }
    if let Some(kind) = cli.backend {
        config.backend = kind;
    }
    Ok(config)
}

fn open(cli: &Cli) -> anyhow::Result<Arc<App>> {
    Ok(App::open(load_config(cli)?)?)
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Serve { bind } => {
            let app = open(&cli)?;
            let bind = bind.clone().unwrap_or_else(|| app.config().bind.clone());
            app.start_worker();
            tokio::runtime::Runtime::new()?.block_on(async move {
                let listener = tokio::net::TcpListener::bind(&bind)
                    .await
                    .with_context(|| format!("binding {bind}"))?;
                log::info!("listening on {bind}");
                eprintln!("listening on http://{bind}");
                axum::serve(listener, pragmachat::http::router(app))
                    .with_graceful_shutdown(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await?;
                anyhow::Ok(())
            })?;
        }
        Command::Ingest { path, title } => {
            let doc = open(&cli)?.ingest_path(path, title.as_deref())?;
            println!("{}\t{}\t{}\t{} bytes", doc.id, doc.title, doc.format, doc.byte_size);
        }
        Command::Chat {
            model,
            doc,
            include_force,
            message,
            json,
        } => {
            let app = open(&cli)?;
            let session = app.create_session(model, doc, *include_force)?;
            let reply = app.chat(&session.id, message, Some(*include_force))?;
            if *json {
                println!("{}", serde_json::to_string_pretty(&reply)?);
            } else {
                println!("{}", reply.assistant_text);
                if let Some(act) = reply.speech_act {
                    println!("speech act: {act}");
                }
                match &reply.metrics {
                    Some(m) => {
                        println!("response time: {:.2} s", m.response_time_s);
                        for (name, v) in METRIC_NAMES.iter().zip(m.values()) {
                            println!("{name}: {v:.4}");
                        }
                    }
                    None => println!(
                        "metrics unavailable: {}",
                        reply.metrics_error.as_deref().unwrap_or("unknown error")
                    ),
                }
            }
        }
        Command::Experiment(ExperimentCommand::Run { config, out }) => {
            let experiment = ExperimentConfig::load(config)
                .with_context(|| format!("loading {}", config.display()))?;
            let app = open(&cli)?;
            let job = app.submit(JobSpec::Config(experiment))?;
            let job = app.execute(&job.id)?;
            if job.status != JobStatus::Done {
                anyhow::bail!("experiment {} failed: {}", job.id, job.error.unwrap_or_default());
            }
            eprintln!("experiment {} done", job.id);
            if let Some(dir) = out {
                std::fs::create_dir_all(dir)?;
                for name in ["results.csv", "results.md", "comparison.md", "comparison.csv"] {
                    if let Ok(bytes) = app.artifact(&job.id, name) {
                        std::fs::write(dir.join(name), bytes)?;
                    }
                }
            }
            print!("{}", String::from_utf8(app.artifact(&job.id, "results.csv")?)?);
        }
        Command::Experiment(ExperimentCommand::Analyze {
            without,
            with,
            format,
            tie_epsilon,
        }) => {
            let read = |p: &PathBuf| {
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))
            };
            let artifacts = analyze_fixture(&FixtureSpec {
                without_csv: read(without)?,
                with_csv: read(with)?,
                tie_epsilon: *tie_epsilon,
                rounding: 2,
            })?;
            let comparison = artifacts.comparison.expect("fixture analysis always compares");
            print!("{}", String::from_utf8(emit_comparison(&comparison, *format))?);
        }
    }
    Ok(())
}
