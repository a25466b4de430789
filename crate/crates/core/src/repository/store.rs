//! On-disk layout:
//!
//! ```text
//! catalog.json               file, privilege and lease tables
//! files/<id>/v<seq>.bin      immutable snapshots
//! files/<id>/versions.json   version records
//! security.log               append-only event lines
//! retired.log                append-only digests of superseded tokens
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use super::{FileId, Privileges, RepoError, Version};

pub(super) const CATALOG: &str = "catalog.json";
pub(super) const SECURITY_LOG: &str = "security.log";
pub(super) const RETIRED_LOG: &str = "retired.log";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub(super) struct FileEntry {
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub(super) struct Grant {
    pub user: String,
    pub file_id: FileId,
    pub privileges: Privileges,
}

/// A lease as persisted: secrets are kept only as SHA-256 digests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub(super) struct LeaseRecord {
    pub lease_id: u64,
    pub user: String,
    pub token_sha256: String,
    pub otp_sha256: String,
    pub acquired_at: DateTime<Utc>,
    pub last_activity: DateTime<Utc>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub(super) struct Catalog {
    pub admins: BTreeSet<String>,
    pub next_file_id: FileId,
    pub next_lease_id: u64,
    pub files: BTreeMap<FileId, FileEntry>,
    pub privileges: Vec<Grant>,
    pub leases: BTreeMap<FileId, LeaseRecord>,
    /// Digest of every superseded token → the lease it belonged to. Kept in
    /// `retired.log` so that rotating a token costs one appended line.
    #[serde(skip)]
    pub retired_tokens: BTreeMap<String, u64>,
}

fn file_dir(root: &Path, id: FileId) -> PathBuf {
    root.join("files").join(id.to_string())
}

pub(super) fn snapshot_path(root: &Path, id: FileId, seq: u64) -> PathBuf {
    file_dir(root, id).join(format!("v{seq}.bin"))
}

/// Replaces `path` via a sibling temp file and rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("json.tmp");
    let mut f = File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    fs::rename(tmp, path)
}

pub(super) fn write_catalog(root: &Path, catalog: &Catalog) -> Result<(), RepoError> {
    write_atomic(&root.join(CATALOG), &serde_json::to_vec_pretty(catalog)?)?;
    Ok(())
}

pub(super) fn write_versions(root: &Path, id: FileId, versions: &[Version]) -> Result<(), RepoError> {
    write_atomic(
        &file_dir(root, id).join("versions.json"),
        &serde_json::to_vec_pretty(versions)?,
    )?;
    Ok(())
}

/// Stores a snapshot. Refuses to overwrite: stored bytes never change.
pub(super) fn write_snapshot(root: &Path, id: FileId, seq: u64, bytes: &[u8]) -> Result<(), RepoError> {
    fs::create_dir_all(file_dir(root, id))?;
    let mut f = OpenOptions::new()
        .write(true)
        .create_new(true)
        .open(snapshot_path(root, id, seq))?;
    f.write_all(bytes)?;
    f.sync_all()?;
    Ok(())
}

pub(super) fn load(root: &Path) -> Result<(Catalog, BTreeMap<FileId, Vec<Version>>), RepoError> {
    let raw = match fs::read(root.join(CATALOG)) {
        Ok(raw) => raw,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(RepoError::NotARepository(root.to_path_buf())),
        Err(e) => return Err(e.into()),
    };
    let mut catalog: Catalog = serde_json::from_slice(&raw)?;
    let retired = match fs::read_to_string(root.join(RETIRED_LOG)) {
        Ok(text) => text,
        Err(e) if e.kind() == io::ErrorKind::NotFound => String::new(),
        Err(e) => return Err(e.into()),
    };
    for line in retired.lines() {
        let parsed = line
            .split_once(' ')
            .and_then(|(d, id)| Some((d.to_string(), id.parse().ok()?)));
        let (digest, lease_id) =
            parsed.ok_or_else(|| RepoError::Corrupt(format!("bad retired-token line {line:?}")))?;
        catalog.retired_tokens.insert(digest, lease_id);
    }
    let mut versions = BTreeMap::new();
    for &id in catalog.files.keys() {
        let raw = fs::read(file_dir(root, id).join("versions.json"))?;
        let list: Vec<Version> = serde_json::from_slice(&raw)?;
        if list.iter().enumerate().any(|(i, v)| v.seq != i as u64 + 1) {
            return Err(RepoError::Corrupt(format!("file {id}: version sequence has gaps")));
        }
        versions.insert(id, list);
    }
    Ok((catalog, versions))
}

pub(super) fn retire(root: &Path, digest: &str, lease_id: u64) -> Result<(), RepoError> {
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(root.join(RETIRED_LOG))?;
    writeln!(f, "{digest} {lease_id}")?;
    Ok(())
}

pub(super) fn log_event(
    root: &Path,
    at: DateTime<Utc>,
    event: &str,
    user: &str,
    file: Option<FileId>,
) -> Result<(), RepoError> {
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(root.join(SECURITY_LOG))?;
    let file = file.map_or_else(|| "-".to_string(), |id| id.to_string());
    writeln!(
        f,
        "{}\t{event}\t{user}\t{file}",
        at.to_rfc3339_opts(SecondsFormat::Secs, true)
    )?;
    Ok(())
}
