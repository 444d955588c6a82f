//! Operator command line.
//!
//! Exit codes: `0` success, `1` a domain or IO failure (one line on stderr
//! naming the error), `2` a usage error.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use eod_core::{DatasetId, Decision, Status};
use thiserror::Error;

use crate::api::{self, ServeError};
use crate::clock::SystemClock;
use crate::config::{ApiConfig, ConfigError};
use crate::snapshot::{Snapshot, SnapshotError};
use crate::store::{Store, StoreError};

/// Snapshot loaded by `eod seed` when no path is given.
pub const LAUNCH_SNAPSHOT: &[u8] = include_bytes!("../fixtures/launch.snapshot");

/// Moderator id recorded for approvals made by `eod seed`.
pub const SEED_MODERATOR: &str = "seed";

#[derive(Debug, Parser)]
#[command(name = "eod", version, about = "Earth-observation dataset catalogue")]
pub struct Cli {
    /// Directory holding the snapshot, log and teaser images.
    #[arg(long, global = true, env = "EOD_DATA_DIR")]
    pub data_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP API.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Load a snapshot (the bundled launch set by default) and approve its pending records.
    Seed { path: Option<PathBuf> },
    /// Write a snapshot of the whole store to a file, or `-` for stdout.
    Export { out: PathBuf },
    /// Load a snapshot from a file, or `-` for stdin.
    Import {
        input: PathBuf,
        /// Merge into a non-empty store, skipping ids that already exist.
        #[arg(long)]
        merge: bool,
    },
    /// Review submissions.
    Moderate {
        #[command(subcommand)]
        action: ModerateAction,
    },
    /// Record counts by status and total views.
    Stats,
}

#[derive(Debug, clap::Args)]
pub struct Remote {
    /// Base URL of a running server; moderates through its API instead of the data directory.
    #[arg(long, requires = "token")]
    pub remote: Option<String>,
    /// Moderator token for `--remote`.
    #[arg(long, env = "EOD_MODERATOR_TOKEN", hide_env_values = true)]
    pub token: Option<String>,
    /// Moderator id recorded for local decisions.
    #[arg(long, default_value = "cli")]
    pub moderator: String,
}

#[derive(Debug, Subcommand)]
pub enum ModerateAction {
    /// List records awaiting review.
    List {
        #[command(flatten)]
        remote: Remote,
    },
    Approve {
        id: String,
        #[command(flatten)]
        remote: Remote,
    },
    Reject {
        id: String,
        reason: String,
        #[command(flatten)]
        remote: Remote,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Serve(#[from] ServeError),
    #[error("StorageFailure: {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Remote(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Stream handles for a single invocation.
pub struct Io<'a> {
    pub stdin: &'a mut dyn Read,
    pub stdout: &'a mut dyn Write,
    pub stderr: &'a mut dyn Write,
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I, io: Io<'_>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            let sink = if e.use_stderr() { io.stderr } else { io.stdout };
            let _ = sink.write_all(rendered.as_bytes());
            return code;
        }
    };
    match execute(cli, io.stdin, io.stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(io.stderr, "error: {}", e.to_string().replace('\n', " "));
            1
        }
    }
}

fn data_dir(cli: &Cli) -> PathBuf {
    cli.data_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("data"))
}

fn open_store(dir: &Path) -> Result<Store, CliError> {
    Ok(Store::open(dir, Arc::new(SystemClock))?)
}

fn runtime() -> Result<tokio::runtime::Runtime, CliError> {
    tokio::runtime::Runtime::new().map_err(io_err(Path::new("<runtime>")))
}

fn execute(cli: Cli, stdin: &mut dyn Read, stdout: &mut dyn Write) -> Result<(), CliError> {
    let out = |stdout: &mut dyn Write, text: String| {
        stdout
            .write_all(text.as_bytes())
            .map_err(io_err(Path::new("<stdout>")))
    };
    match &cli.command {
        Command::Serve { config } => {
            let mut config = ApiConfig::load(config.as_deref())?;
            if let Some(dir) = &cli.data_dir {
                config.data_dir = dir.clone();
            }
            runtime()?.block_on(api::serve(config))?;
            Ok(())
        }
        Command::Seed { path } => {
            let bytes = match path {
                Some(p) => std::fs::read(p).map_err(io_err(p))?,
                None => LAUNCH_SNAPSHOT.to_vec(),
            };
            let seeded = seed(&open_store(&data_dir(&cli))?, &bytes)?;
            out(stdout, format!("seeded {seeded} record(s)\n"))
        }
        Command::Export { out: target } => {
            let bytes = open_store(&data_dir(&cli))?.export();
            if target.as_os_str() == "-" {
                stdout.write_all(&bytes).map_err(io_err(target))
            } else {
                std::fs::write(target, bytes).map_err(io_err(target))
            }
        }
        Command::Import { input, merge } => {
            let mut bytes = Vec::new();
            if input.as_os_str() == "-" {
                stdin.read_to_end(&mut bytes).map_err(io_err(input))?;
            } else {
                bytes = std::fs::read(input).map_err(io_err(input))?;
            }
            let added = open_store(&data_dir(&cli))?.import(&bytes, *merge)?;
            out(stdout, format!("imported {added} record(s)\n"))
        }
        Command::Moderate { action } => {
            let text = moderate(&data_dir(&cli), action)?;
            out(stdout, text)
        }
        Command::Stats => {
            let stats = open_store(&data_dir(&cli))?.stats();
            out(stdout, stats.to_string())
        }
    }
}

/// Teaser given to seeded records that arrive without image bytes.
pub const PLACEHOLDER_TEASER: &[u8] = include_bytes!("../fixtures/placeholder.png");

/// Imports `bytes` in merge mode, approves whichever of its records are
/// still pending and gives image-less records the placeholder teaser.
pub fn seed(store: &Store, bytes: &[u8]) -> Result<usize, CliError> {
    let snapshot = Snapshot::decode(bytes)?;
    let ids: BTreeSet<DatasetId> = snapshot.records.iter().map(|r| r.id.clone()).collect();
    let added = store.import(bytes, true)?;
    for id in &ids {
        if store.get(id).is_some_and(|r| r.status == Status::Pending) {
            store.moderate(id, Decision::Approve, SEED_MODERATOR, None)?;
        }
        if store.teaser(id).is_none() {
            store.put_teaser(id, PLACEHOLDER_TEASER)?;
        }
    }
    Ok(added)
}

fn moderate(dir: &Path, action: &ModerateAction) -> Result<String, CliError> {
    let (remote, decision) = match action {
        ModerateAction::List { remote } => (remote, None),
        ModerateAction::Approve { id, remote } => (remote, Some((id, Decision::Approve, None))),
        ModerateAction::Reject { id, reason, remote } => {
            (remote, Some((id, Decision::Reject, Some(reason.clone()))))
        }
    };
    if let Some(url) = &remote.remote {
        let token = remote.token.as_deref().unwrap_or_default();
        return runtime()?.block_on(remote_moderate(url, token, decision));
    }

    let store = open_store(dir)?;
    match decision {
        None => Ok(store.read(|c| {
            let mut pending: Vec<_> = c
                .records()
                .filter(|r| r.status == Status::Pending)
                .collect();
            pending.sort_by(|a, b| {
                a.created_at
                    .cmp(&b.created_at)
                    .then_with(|| a.id.cmp(&b.id))
            });
            pending
                .into_iter()
                .map(|r| {
                    let flags: Vec<String> = r
                        .private
                        .review_flags
                        .iter()
                        .map(|f| format!("{f:?}"))
                        .collect();
                    format!(
                        "{}\t{}\t{}\t{}\n",
                        r.id,
                        r.created_at.format("%Y-%m-%dT%H:%M:%SZ"),
                        r.name,
                        flags.join(",")
                    )
                })
                .collect()
        })),
        Some((id, decision, reason)) => {
            let status = store.moderate(
                &DatasetId::new(id.as_str()),
                decision,
                &remote.moderator,
                reason,
            )?;
            Ok(format!("{id}: {status}\n"))
        }
    }
}

async fn remote_moderate(
    base: &str,
    token: &str,
    decision: Option<(&String, Decision, Option<String>)>,
) -> Result<String, CliError> {
    let remote_err = |e: reqwest::Error| CliError::Remote(format!("RemoteUnavailable: {e}"));
    let client = reqwest::Client::new();
    let base = base.trim_end_matches('/');
    let request = match &decision {
        None => client.get(format!("{base}/api/admin/datasets?status=pending")),
        Some((id, Decision::Approve, _)) => {
            client.post(format!("{base}/api/admin/datasets/{id}/approve"))
        }
        Some((id, Decision::Reject, reason)) => client
            .post(format!("{base}/api/admin/datasets/{id}/reject"))
            .json(&serde_json::json!({ "reason": reason })),
    };
    let response = request
        .bearer_auth(token)
        .send()
        .await
        .map_err(remote_err)?;
    let status = response.status();
    let body: serde_json::Value = response.json().await.map_err(remote_err)?;
    if !status.is_success() {
        let message = body["message"].as_str().unwrap_or("request failed");
        let name = match (status.as_u16(), &decision) {
            (404, Some((id, ..))) => format!("UnknownId: {id}"),
            (409, _) => format!("InvalidTransition: {message}"),
            _ => message.to_string(),
        };
        return Err(CliError::Remote(name));
    }
    Ok(match decision {
        None => body["items"]
            .as_array()
            .map(|items| {
                items
                    .iter()
                    .map(|r| {
                        format!(
                            "{}\t{}\t{}\n",
                            r["id"].as_str().unwrap_or_default(),
                            r["created_at"].as_str().unwrap_or_default(),
                            r["name"].as_str().unwrap_or_default()
                        )
                    })
                    .collect()
            })
            .unwrap_or_default(),
        Some((id, ..)) => format!("{id}: {}\n", body["status"].as_str().unwrap_or_default()),
    })
}
