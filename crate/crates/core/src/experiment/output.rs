//! Result persistence: JSON-lines records, CSV tables and a run manifest.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use super::run::{Command, CommandOutput};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "MSALAB_OUT";
pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRoster {
    pub seed: u64,
    /// Half-open trial range `[first, end)`.
    pub trials: [u64; 2],
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub config_hash: String,
    pub started: String,
    pub finished: String,
    pub workers: usize,
    pub files: Vec<String>,
    pub seeds: SeedRoster,
}

/// One manifest per output directory, with an entry per subcommand run there.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub runs: BTreeMap<String, ManifestEntry>,
}

/// Hex SHA-256 of the canonical JSON form of the configuration.
pub fn config_hash(cfg: &RunConfig) -> String {
    hex::encode(Sha256::digest(cfg.canonical_json().as_bytes()))
}

/// Output directory: explicit value, then `$MSALAB_OUT`, then `msalab-out`.
pub fn resolve_out_dir(explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("msalab-out"))
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()
}

/// Writes the records, tables and an updated manifest; returns the file
/// names written, manifest last.
pub fn persist(
    dir: &Path,
    cmd: Command,
    cfg: &RunConfig,
    output: &CommandOutput,
    started: String,
) -> std::io::Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();

    let jsonl = format!("{}.jsonl", cmd.name());
    let mut w = BufWriter::new(File::create(dir.join(&jsonl))?);
    for r in &output.records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    files.push(jsonl);

    for table in &output.tables {
        let name = format!("{}{}.csv", cmd.name(), table.suffix);
        write_csv(&dir.join(&name), &table.header, &table.rows)?;
        files.push(name);
    }

    let manifest_path = dir.join(MANIFEST);
    let mut manifest: RunManifest = fs::read(&manifest_path)
        .ok()
        .and_then(|bytes| serde_json::from_slice(&bytes).ok())
        .unwrap_or_default();
    manifest.version = env!("CARGO_PKG_VERSION").to_string();
    manifest.runs.insert(
        cmd.name().to_string(),
        ManifestEntry {
            config_hash: config_hash(cfg),
            started,
            finished: now(),
            workers: cfg.execution.workers,
            files: files.clone(),
            seeds: SeedRoster {
                seed: cfg.execution.seed,
                trials: [0, cfg.execution.trials],
            },
        },
    );
    fs::write(&manifest_path, serde_json::to_vec_pretty(&manifest)?)?;
    files.push(MANIFEST.to_string());
    Ok(files)
}

/// Current UTC time in RFC 3339 form.
pub fn now() -> String {
    chrono::Utc::now().to_rfc3339()
}
