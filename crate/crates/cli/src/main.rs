//! `atlas`: build knowledge-map artifacts and explore them.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

mod config;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};
use thiserror::Error;

use atlas_core::gateway::Gateway;
use atlas_core::pipeline::{run_pipeline, InputFormat, PipelineConfig};
use atlas_core::synthesis::IDEA_LOG_FILE;
use atlas_service::{load_state, search, ExploreError, ServiceState};

use config::FileConfig;

const PRECEDENCE: &str = "Settings precedence: command-line flags, then the --config TOML file, \
then environment variables (LL_API_KEY, LL_ENDPOINT, LL_EMBED_MODEL, LL_CHAT_MODEL), then defaults. \
The provider is mock unless --provider remote (or provider = \"remote\" in the config file) is given.";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Runtime(_) => ExitCode::from(1),
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "atlas", version, about = "Semantic knowledge maps: ingest, serve, search, validate", after_help = PRECEDENCE)]
struct Cli {
    /// TOML config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the pipeline and write projects.json, topics.json and reducer.model.
    Ingest(IngestArgs),
    /// Serve the exploration API over HTTP.
    Serve(ServeArgs),
    /// Print the projects most similar to a query.
    Search(SearchArgs),
    /// Check an artifact directory.
    Validate(ArtifactArgs),
}

#[derive(Debug, Args)]
struct ProviderArgs {
    /// `mock` (default) or `remote`.
    #[arg(long)]
    provider: Option<String>,
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    /// `json` or `csv`; guessed from the extension when omitted.
    #[arg(long, value_parser = parse_format)]
    format: Option<InputFormat>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    provider: ProviderArgs,
}

fn parse_format(s: &str) -> Result<InputFormat, String> {
    s.parse().map_err(|e: atlas_core::pipeline::PipelineError| e.to_string())
}

#[derive(Debug, Args)]
struct ArtifactArgs {
    /// Directory holding the three artifacts.
    #[arg(long)]
    artifacts: Option<PathBuf>,
    #[command(flatten)]
    provider: ProviderArgs,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[command(flatten)]
    artifacts: ArtifactArgs,
    /// Port to listen on (default 8080; 0 picks a free port).
    #[arg(long)]
    port: Option<u16>,
    /// Address to bind (default 127.0.0.1).
    #[arg(long)]
    host: Option<String>,
    /// Idea log path (default: ideas.log.jsonl inside the artifact directory).
    #[arg(long)]
    ideas_log: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SearchArgs {
    #[command(flatten)]
    artifacts: ArtifactArgs,
    query: String,
    #[arg(long, default_value_t = atlas_service::explore::DEFAULT_K)]
    k: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            if !e.use_stderr() {
                return ExitCode::SUCCESS;
            }
            if !e.render().to_string().contains("Usage:") {
                eprintln!("\n{}", usage_for_args());
            }
            return ExitCode::from(2);
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, CliError::Usage(_)) {
                eprintln!("run `atlas --help` for usage");
            }
            e.exit_code()
        }
    }
}

/// Usage of the subcommand named on the command line, or of the whole tool.
fn usage_for_args() -> String {
    let mut cmd = Cli::command();
    cmd.build();
    let name = std::env::args()
        .skip(1)
        .find(|a| cmd.get_subcommands().any(|s| s.get_name() == a));
    match name.and_then(|n| cmd.find_subcommand_mut(&n).map(|s| s.render_usage())) {
        Some(u) => u.to_string(),
        None => cmd.render_usage().to_string(),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Ingest(args) => ingest(&file, args),
        Command::Serve(args) => serve(&file, args),
        Command::Search(args) => search_cmd(&file, args),
        Command::Validate(args) => validate(&file, args),
    }
}

fn gateway(file: &FileConfig, provider: &ProviderArgs) -> Result<Gateway, CliError> {
    let cfg = file.provider(provider.provider.as_deref())?;
    Gateway::from_config(&cfg).map_err(|e| CliError::Usage(e.to_string()))
}

fn artifact_dir(file: &FileConfig, args: &ArtifactArgs) -> Result<PathBuf, CliError> {
    args.artifacts
        .clone()
        .or_else(|| file.artifacts.clone())
        .ok_or_else(|| CliError::Usage("--artifacts is required".into()))
}

fn load(file: &FileConfig, args: &ArtifactArgs) -> Result<ServiceState, CliError> {
    let dir = artifact_dir(file, args)?;
    load_state(&dir, gateway(file, &args.provider)?).map_err(runtime)
}

fn ingest(file: &FileConfig, args: IngestArgs) -> Result<(), CliError> {
    let format = match args.format.or_else(|| InputFormat::from_path(&args.input)) {
        Some(f) => f,
        None => {
            return Err(CliError::Usage(format!(
                "cannot tell the format of {}; pass --format json|csv",
                args.input.display()
            )))
        }
    };
    let config = PipelineConfig {
        reducer: file.reducer(args.seed)?,
    };
    let gw = gateway(file, &args.provider)?;
    match run_pipeline(&args.input, format, &args.out, &config, &gw) {
        Ok(report) => {
            print!("{report}");
            Ok(())
        }
        Err(failure) => {
            eprint!("{}", failure.report);
            Err(runtime(failure.error))
        }
    }
}

fn search_cmd(file: &FileConfig, args: SearchArgs) -> Result<(), CliError> {
    if args.query.trim().is_empty() {
        return Err(CliError::Usage("query is empty".into()));
    }
    if args.k == 0 {
        return Err(CliError::Usage("--k must be at least 1".into()));
    }
    let state = load(file, &args.artifacts)?;
    let result = search(&state, &args.query, args.k).map_err(|e| match e {
        ExploreError::EmptyQuery | ExploreError::InvalidK => CliError::Usage(e.to_string()),
        other => runtime(other),
    })?;
    for (rank, hit) in result.hits.iter().enumerate() {
        println!("{}\t{:.6}\t{}\t{}", rank + 1, hit.score, hit.id, hit.title);
    }
    Ok(())
}

fn validate(file: &FileConfig, args: ArtifactArgs) -> Result<(), CliError> {
    let state = load(file, &args)?;
    println!(
        "ok: {} projects, {} topics, model v{} ({} x {})",
        state.corpus.len(),
        state.corpus.topics.len(),
        state.artifact_version(),
        state.model.n(),
        state.model.dim()
    );
    Ok(())
}

fn serve(file: &FileConfig, args: ServeArgs) -> Result<(), CliError> {
    let dir = artifact_dir(file, &args.artifacts)?;
    let log_path = args.ideas_log.clone().unwrap_or_else(|| dir.join(IDEA_LOG_FILE));
    let state = load(file, &args.artifacts)?
        .with_idea_log(&log_path)
        .map_err(runtime)?;
    let host = args.host.or_else(|| file.host.clone()).unwrap_or_else(|| "127.0.0.1".into());
    let port = args.port.or(file.port).unwrap_or(8080);
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|e| CliError::Usage(format!("bad listen address {host}:{port}: {e}")))?;

    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(runtime)?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| runtime(format!("cannot listen on {addr}: {e}")))?;
        let bound = listener.local_addr().map_err(runtime)?;
        println!("listening on http://{bound} ({} projects from {})", state.corpus.len(), display(&dir));
        atlas_service::serve(listener, state, shutdown_signal())
            .await
            .map_err(runtime)
    })?;
    eprintln!("shut down cleanly");
    Ok(())
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let terminate = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let terminate = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = terminate => {},
    }
}
