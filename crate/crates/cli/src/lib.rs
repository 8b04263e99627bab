//! Command-line entry points: analyze one program, serve the session API,
//! summarize edit traces from event logs.

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use stylefb_core::analytics::{render_metrics_table, trace_metrics, traces_from_events, SnapshotTrace};
use stylefb_core::frontend::SourceProgram;
use stylefb_core::report::{render_text, FeedbackReport};
use stylefb_core::service::{parse_events, router, ServiceConfig, SessionService, SystemClock, TransportKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SYNTAX: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TransportArg {
    Mock,
    Live,
}

impl From<TransportArg> for TransportKind {
    fn from(t: TransportArg) -> Self {
        match t {
            TransportArg::Mock => TransportKind::Mock,
            TransportArg::Live => TransportKind::Live,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "stylefb", version, about = "Style feedback for introductory Python programs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print a style feedback report for one program.
    Analyze {
        path: PathBuf,
        #[arg(long, value_enum)]
        transport: Option<TransportArg>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Problem id recorded in the report; defaults to the file stem.
        #[arg(long)]
        problem_id: Option<String>,
        /// Report timestamp (RFC 3339); defaults to the current time.
        #[arg(long)]
        now: Option<DateTime<Utc>>,
    },
    /// Run the session HTTP API.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        transport: Option<TransportArg>,
        /// Event log path; without one, state lives in memory only.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Summarize post-functionality edits from event logs or trace files.
    Metrics {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("syntax error on line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Syntax { .. } => EXIT_SYNTAX,
            CliError::Config(_) | CliError::Io(_) => EXIT_CONFIG,
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn load_config(path: Option<&Path>) -> Result<ServiceConfig, CliError> {
    match path {
        Some(p) => ServiceConfig::load(p).map_err(config_err),
        None => Ok(ServiceConfig::default()),
    }
}

/// Parses `args` and runs the command, writing to the given streams.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Analyze { path, transport, format, config, problem_id, now } => {
            let report = analyze(&path, transport, config.as_deref(), problem_id, now)?;
            match format {
                Format::Text => write!(out, "{}", render_text(&report))?,
                Format::Json => writeln!(out, "{}", report.to_canonical_json())?,
            }
            Ok(())
        }
        Command::Serve { config, port, seed, transport, log, host } => {
            serve(config.as_deref(), port, seed, transport, log, &host, err)
        }
        Command::Metrics { paths, format } => metrics(&paths, format, out, err),
    }
}

pub fn analyze(
    path: &Path,
    transport: Option<TransportArg>,
    config: Option<&Path>,
    problem_id: Option<String>,
    now: Option<DateTime<Utc>>,
) -> Result<FeedbackReport, CliError> {
    let mut cfg = load_config(config)?;
    if let Some(t) = transport {
        cfg.transport = t.into();
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let problem_id = problem_id.unwrap_or_else(|| {
        path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "program".into())
    });
    let source = SourceProgram::new(problem_id, text).map_err(config_err)?;
    let engine = cfg.build_engine().map_err(config_err)?;
    engine
        .generate(&source, now.unwrap_or_else(Utc::now))
        .map_err(|e| CliError::Syntax { line: e.line, message: e.message })
}

fn serve(
    config: Option<&Path>,
    port: Option<u16>,
    seed: Option<u64>,
    transport: Option<TransportArg>,
    log: Option<PathBuf>,
    host: &str,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let mut cfg = load_config(config)?;
    if let Some(p) = port {
        cfg.port = p;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = transport {
        cfg.transport = t.into();
    }
    if log.is_some() {
        cfg.log_path = log;
    }
    let settings = cfg.settings().map_err(config_err)?;
    // Built outside the runtime: the live transport uses a blocking client.
    let engine = cfg.build_engine().map_err(config_err)?;
    let service = match &cfg.log_path {
        Some(path) => {
            let (svc, warnings) = SessionService::with_log(settings, engine, path).map_err(config_err)?;
            for w in warnings {
                writeln!(err, "warning: {}: line {}: {}", path.display(), w.line_no, w.message)?;
            }
            svc
        }
        None => SessionService::in_memory(settings, engine),
    };
    let addr: SocketAddr =
        format!("{host}:{}", cfg.port).parse().map_err(|e| CliError::Config(format!("bad listen address: {e}")))?;
    let app = router(Arc::new(service), Arc::new(SystemClock));
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        tracing::info!(%addr, "listening");
        axum::serve(listener, app).with_graceful_shutdown(shutdown_signal()).await
    })?;
    Ok(())
}

/// Resolves on Ctrl-C or, on Unix, SIGTERM.
async fn shutdown_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        if let Ok(mut term) = signal(SignalKind::terminate()) {
            tokio::select! {
                _ = tokio::signal::ctrl_c() => {}
                _ = term.recv() => {}
            }
            return;
        }
    }
    let _ = tokio::signal::ctrl_c().await;
}

/// Traces from one input. JSON arrays are taken as traces; anything else is an event log.
fn load_traces(path: &Path, err: &mut dyn Write) -> Result<Vec<SnapshotTrace>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: not a trace list: {e}", path.display())));
    }
    let (events, warnings) = parse_events(&text);
    for w in warnings {
        writeln!(err, "warning: {}: line {}: {}", path.display(), w.line_no, w.message)?;
    }
    Ok(traces_from_events(&events))
}

fn metrics(paths: &[PathBuf], format: Format, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let mut traces = Vec::new();
    for p in paths {
        traces.extend(load_traces(p, err)?);
    }
    let summary = trace_metrics(&traces);
    match format {
        Format::Text => write!(out, "{}", render_metrics_table(&summary))?,
        Format::Json => {
            writeln!(out, "{}", serde_json::to_string_pretty(&summary).map_err(|e| CliError::Config(e.to_string()))?)?
        }
    }
    Ok(())
}
