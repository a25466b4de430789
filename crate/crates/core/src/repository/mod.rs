//! A versioned file store. Editing a file requires an exclusive lease,
//! identified by a rolling session token and a one-time password; every
//! saved state is kept as an immutable, checksummed snapshot.

mod privileges;
mod store;

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard};

use chrono::{DateTime, Utc};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use privileges::Privileges;
use store::{Catalog, FileEntry, Grant, LeaseRecord};

pub type FileId = u64;

pub const DEFAULT_INACTIVITY_TIMEOUT: u64 = 1800;
pub const MIN_TOKEN_BITS: u32 = 128;

#[derive(Debug, Error)]
pub enum RepoError {
    #[error("{} exists and is not empty", .0.display())]
    PathNotEmpty(PathBuf),
    #[error("{} is not a repository", .0.display())]
    NotARepository(PathBuf),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{0} is not an administrator")]
    NotAdmin(String),
    #[error("a file named {0:?} already exists")]
    DuplicateName(String),
    #[error("invalid file name {0:?}")]
    InvalidName(String),
    #[error("no file with id {0}")]
    UnknownFile(FileId),
    #[error("file {file_id} has no version {seq}")]
    UnknownVersion { file_id: FileId, seq: u64 },
    #[error("locked by {holder} since {since}")]
    Locked { holder: String, since: DateTime<Utc> },
    #[error("{user} lacks {needed} privilege on file {file_id}")]
    NoPrivilege {
        user: String,
        file_id: FileId,
        needed: &'static str,
    },
    #[error("stale session token; the lease has been revoked")]
    StaleToken,
    #[error("no active lease")]
    NoActiveLease,
    #[error("lease expired after inactivity")]
    LeaseExpired,
    #[error("repository data is corrupt: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepoConfig {
    pub root: PathBuf,
    /// Seconds of inactivity after which a sweep releases a lease.
    pub inactivity_timeout: u64,
    pub token_bits: u32,
}

impl RepoConfig {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            inactivity_timeout: DEFAULT_INACTIVITY_TIMEOUT,
            token_bits: MIN_TOKEN_BITS,
        }
    }

    pub fn validate(&self) -> Result<(), RepoError> {
        if self.inactivity_timeout == 0 {
            return Err(RepoError::InvalidConfig("inactivity_timeout must be positive".into()));
        }
        if self.token_bits < MIN_TOKEN_BITS || self.token_bits % 8 != 0 {
            return Err(RepoError::InvalidConfig(format!(
                "token_bits must be a multiple of 8 and at least {MIN_TOKEN_BITS}, got {}",
                self.token_bits
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Version {
    pub seq: u64,
    pub author: String,
    pub saved_at: DateTime<Utc>,
    /// SHA-256 of the stored bytes, lowercase hex.
    pub checksum: String,
    pub size: u64,
}

/// A granted lease, including its secrets. Only the holder ever sees this.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lease {
    pub file_id: FileId,
    pub user: String,
    pub session_token: String,
    pub otp: String,
    pub acquired_at: DateTime<Utc>,
    pub last_activity: DateTime<Utc>,
}

/// A lease as anyone may see it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeaseInfo {
    pub file_id: FileId,
    pub user: String,
    pub acquired_at: DateTime<Utc>,
    pub last_activity: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Checkout {
    pub lease: Lease,
    pub version: u64,
    pub content: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Checkin<'a> {
    Save(&'a [u8]),
    Discard,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileListing {
    pub file_id: FileId,
    pub name: String,
    pub privileges: Privileges,
}

/// Everything observable about a repository except lease secrets, for
/// comparing two repositories.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepoSnapshot {
    pub admins: Vec<String>,
    pub files: Vec<(FileId, String, Vec<Version>)>,
    pub privileges: Vec<(String, FileId, Privileges)>,
    pub leases: Vec<LeaseInfo>,
}

struct State {
    catalog: Catalog,
    versions: BTreeMap<FileId, Vec<Version>>,
}

pub struct Repository {
    config: RepoConfig,
    state: Mutex<State>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn info(file_id: FileId, l: &LeaseRecord) -> LeaseInfo {
    LeaseInfo {
        file_id,
        user: l.user.clone(),
        acquired_at: l.acquired_at,
        last_activity: l.last_activity,
    }
}

impl Repository {
    /// Creates the on-disk layout in an empty or absent directory. `admins`
    /// may add files and manage every file's privileges.
    pub fn init(config: RepoConfig, admins: &[&str]) -> Result<Self, RepoError> {
        config.validate()?;
        let root = &config.root;
        if root.exists() && (!root.is_dir() || fs::read_dir(root)?.next().is_some()) {
            return Err(RepoError::PathNotEmpty(root.clone()));
        }
        fs::create_dir_all(root.join("files"))?;
        let catalog = Catalog {
            admins: admins.iter().map(|a| a.to_string()).collect(),
            next_file_id: 1,
            next_lease_id: 1,
            ..Catalog::default()
        };
        store::write_catalog(root, &catalog)?;
        fs::File::create(root.join(store::SECURITY_LOG))?;
        Ok(Self {
            config,
            state: Mutex::new(State {
                catalog,
                versions: BTreeMap::new(),
            }),
        })
    }

    pub fn open(config: RepoConfig) -> Result<Self, RepoError> {
        config.validate()?;
        let (catalog, versions) = store::load(&config.root)?;
        Ok(Self {
            config,
            state: Mutex::new(State { catalog, versions }),
        })
    }

    pub fn config(&self) -> &RepoConfig {
        &self.config
    }

    fn root(&self) -> &Path {
        &self.config.root
    }

    fn lock(&self) -> MutexGuard<'_, State> {
        // A panic mid-operation never leaves the catalog half-written on
        // disk, so the in-memory copy stays usable.
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn fresh_secret(&self, st: &State) -> String {
        let mut bytes = vec![0u8; (self.config.token_bits / 8) as usize];
        loop {
            rand::rng().fill_bytes(&mut bytes);
            let token = hex::encode(&bytes);
            let digest = sha256_hex(token.as_bytes());
            let reused = st.catalog.retired_tokens.contains_key(&digest)
                || st
                    .catalog
                    .leases
                    .values()
                    .any(|l| l.token_sha256 == digest || l.otp_sha256 == digest);
            if !reused {
                return token;
            }
        }
    }

    fn privileges_in(st: &State, user: &str, file_id: FileId) -> Privileges {
        if st.catalog.admins.contains(user) {
            return Privileges::ALL;
        }
        st.catalog
            .privileges
            .iter()
            .find(|g| g.user == user && g.file_id == file_id)
            .map_or(Privileges::NONE, |g| g.privileges)
    }

    fn known_file(st: &State, file_id: FileId) -> Result<(), RepoError> {
        if st.catalog.files.contains_key(&file_id) {
            Ok(())
        } else {
            Err(RepoError::UnknownFile(file_id))
        }
    }

    fn require(
        st: &State,
        user: &str,
        file_id: FileId,
        needed: &'static str,
        ok: impl Fn(&Privileges) -> bool,
    ) -> Result<(), RepoError> {
        Self::known_file(st, file_id)?;
        if ok(&Self::privileges_in(st, user, file_id)) {
            Ok(())
        } else {
            Err(RepoError::NoPrivilege {
                user: user.to_string(),
                file_id,
                needed,
            })
        }
    }

    fn append_version(
        &self,
        st: &mut State,
        file_id: FileId,
        author: &str,
        bytes: &[u8],
        now: DateTime<Utc>,
    ) -> Result<Version, RepoError> {
        let list = st.versions.entry(file_id).or_default();
        let version = Version {
            seq: list.len() as u64 + 1,
            author: author.to_string(),
            saved_at: now,
            checksum: sha256_hex(bytes),
            size: bytes.len() as u64,
        };
        store::write_snapshot(self.root(), file_id, version.seq, bytes)?;
        list.push(version.clone());
        store::write_versions(self.root(), file_id, list)?;
        Ok(version)
    }

    fn read_checked(&self, file_id: FileId, version: &Version) -> Result<Vec<u8>, RepoError> {
        let bytes = fs::read(store::snapshot_path(self.root(), file_id, version.seq))?;
        if sha256_hex(&bytes) != version.checksum {
            return Err(RepoError::Corrupt(format!(
                "file {file_id} version {} does not match its checksum",
                version.seq
            )));
        }
        Ok(bytes)
    }

    pub fn add_file(
        &self,
        admin: &str,
        name: &str,
        bytes: &[u8],
        now: DateTime<Utc>,
    ) -> Result<(FileId, Version), RepoError> {
        let mut st = self.lock();
        if !st.catalog.admins.contains(admin) {
            return Err(RepoError::NotAdmin(admin.to_string()));
        }
        if name.trim().is_empty() || name.contains(['/', '\\', '\0']) {
            return Err(RepoError::InvalidName(name.to_string()));
        }
        if st.catalog.files.values().any(|f| f.name == name) {
            return Err(RepoError::DuplicateName(name.to_string()));
        }
        let file_id = st.catalog.next_file_id;
        let version = self.append_version(&mut st, file_id, admin, bytes, now)?;
        st.catalog.next_file_id += 1;
        st.catalog.files.insert(file_id, FileEntry { name: name.to_string() });
        store::write_catalog(self.root(), &st.catalog)?;
        Ok((file_id, version))
    }

    pub fn find_file(&self, name: &str) -> Option<FileId> {
        let st = self.lock();
        st.catalog.files.iter().find(|(_, f)| f.name == name).map(|(&id, _)| id)
    }

    /// Files on which `user` holds any privilege, by id.
    pub fn list_files(&self, user: &str) -> Vec<FileListing> {
        let st = self.lock();
        st.catalog
            .files
            .iter()
            .filter_map(|(&file_id, f)| {
                let privileges = Self::privileges_in(&st, user, file_id);
                (!privileges.is_empty()).then(|| FileListing {
                    file_id,
                    name: f.name.clone(),
                    privileges,
                })
            })
            .collect()
    }

    pub fn privileges(&self, user: &str, file_id: FileId) -> Privileges {
        Self::privileges_in(&self.lock(), user, file_id)
    }

    pub fn lease_info(&self, file_id: FileId) -> Option<LeaseInfo> {
        self.lock().catalog.leases.get(&file_id).map(|l| info(file_id, l))
    }

    pub fn checkout(&self, user: &str, file_id: FileId, now: DateTime<Utc>) -> Result<Checkout, RepoError> {
        let mut st = self.lock();
        Self::require(&st, user, file_id, "edit", |p| p.edit)?;
        if let Some(l) = st.catalog.leases.get(&file_id) {
            return Err(RepoError::Locked {
                holder: l.user.clone(),
                since: l.acquired_at,
            });
        }
        let latest = st
            .versions
            .get(&file_id)
            .and_then(|v| v.last())
            .cloned()
            .ok_or_else(|| RepoError::Corrupt(format!("file {file_id} has no versions")))?;
        let content = self.read_checked(file_id, &latest)?;
        let session_token = self.fresh_secret(&st);
        let otp = self.fresh_secret(&st);
        let record = LeaseRecord {
            lease_id: st.catalog.next_lease_id,
            user: user.to_string(),
            token_sha256: sha256_hex(session_token.as_bytes()),
            otp_sha256: sha256_hex(otp.as_bytes()),
            acquired_at: now,
            last_activity: now,
        };
        st.catalog.next_lease_id += 1;
        st.catalog.leases.insert(file_id, record);
        store::write_catalog(self.root(), &st.catalog)?;
        Ok(Checkout {
            lease: Lease {
                file_id,
                user: user.to_string(),
                session_token,
                otp,
                acquired_at: now,
                last_activity: now,
            },
            version: latest.seq,
            content,
        })
    }

    /// Finds the lease a token currently identifies. A superseded token
    /// revokes whatever lease it belonged to.
    fn lease_for_token(&self, st: &mut State, token: &str, now: DateTime<Utc>) -> Result<FileId, RepoError> {
        let digest = sha256_hex(token.as_bytes());
        if let Some((&file_id, _)) = st.catalog.leases.iter().find(|(_, l)| l.token_sha256 == digest) {
            return Ok(file_id);
        }
        let Some(&lease_id) = st.catalog.retired_tokens.get(&digest) else {
            return Err(RepoError::NoActiveLease);
        };
        let revoked = st
            .catalog
            .leases
            .iter()
            .find(|(_, l)| l.lease_id == lease_id)
            .map(|(&id, l)| (id, l.user.clone()));
        match revoked {
            Some((file_id, user)) => {
                self.release(st, file_id)?;
                store::log_event(self.root(), now, "stale-token", &user, Some(file_id))?;
            }
            None => store::log_event(self.root(), now, "stale-token", "-", None)?,
        }
        Err(RepoError::StaleToken)
    }

    fn is_expired(&self, lease: &LeaseRecord, now: DateTime<Utc>) -> bool {
        (now - lease.last_activity).num_milliseconds() > self.config.inactivity_timeout as i64 * 1000
    }

    /// Removes a lease and retires its token. Persists the catalog.
    fn release(&self, st: &mut State, file_id: FileId) -> Result<Option<LeaseRecord>, RepoError> {
        let Some(lease) = st.catalog.leases.remove(&file_id) else {
            return Ok(None);
        };
        store::retire(self.root(), &lease.token_sha256, lease.lease_id)?;
        st.catalog
            .retired_tokens
            .insert(lease.token_sha256.clone(), lease.lease_id);
        store::write_catalog(self.root(), &st.catalog)?;
        Ok(Some(lease))
    }

    fn finish_checkin(
        &self,
        st: &mut State,
        file_id: FileId,
        action: Checkin<'_>,
        now: DateTime<Utc>,
    ) -> Result<Option<Version>, RepoError> {
        let lease = &st.catalog.leases[&file_id];
        if self.is_expired(lease, now) {
            return Err(RepoError::LeaseExpired);
        }
        let user = lease.user.clone();
        let created = match action {
            Checkin::Discard => None,
            Checkin::Save(bytes) => {
                let unchanged = st.versions[&file_id]
                    .last()
                    .is_some_and(|v| v.checksum == sha256_hex(bytes));
                if unchanged {
                    None
                } else {
                    Some(self.append_version(st, file_id, &user, bytes, now)?)
                }
            }
        };
        self.release(st, file_id)?;
        Ok(created)
    }

    /// Ends the lease identified by `token`. Saving byte-identical content
    /// creates no version.
    pub fn checkin(&self, token: &str, action: Checkin<'_>, now: DateTime<Utc>) -> Result<Option<Version>, RepoError> {
        let mut st = self.lock();
        let file_id = self.lease_for_token(&mut st, token, now)?;
        self.finish_checkin(&mut st, file_id, action, now)
    }

    /// Ends `user`'s lease on `file_id`, authorized by the lease's one-time
    /// password. A wrong password revokes the lease.
    pub fn checkin_with_otp(
        &self,
        user: &str,
        file_id: FileId,
        otp: &str,
        action: Checkin<'_>,
        now: DateTime<Utc>,
    ) -> Result<Option<Version>, RepoError> {
        let mut st = self.lock();
        Self::known_file(&st, file_id)?;
        let lease = match st.catalog.leases.get(&file_id) {
            Some(l) if l.user == user => l,
            _ => return Err(RepoError::NoActiveLease),
        };
        if lease.otp_sha256 != sha256_hex(otp.as_bytes()) {
            self.release(&mut st, file_id)?;
            store::log_event(self.root(), now, "bad-otp", user, Some(file_id))?;
            return Err(RepoError::StaleToken);
        }
        self.finish_checkin(&mut st, file_id, action, now)
    }

    /// Rotates a lease token and records activity. The old token is never
    /// accepted again.
    pub fn renew(&self, token: &str, now: DateTime<Utc>) -> Result<String, RepoError> {
        let mut st = self.lock();
        let file_id = self.lease_for_token(&mut st, token, now)?;
        if self.is_expired(&st.catalog.leases[&file_id], now) {
            return Err(RepoError::LeaseExpired);
        }
        let fresh = self.fresh_secret(&st);
        let lease = st.catalog.leases.get_mut(&file_id).expect("found above");
        let old = std::mem::replace(&mut lease.token_sha256, sha256_hex(fresh.as_bytes()));
        lease.last_activity = lease.last_activity.max(now);
        let lease_id = lease.lease_id;
        store::retire(self.root(), &old, lease_id)?;
        st.catalog.retired_tokens.insert(old, lease_id);
        store::write_catalog(self.root(), &st.catalog)?;
        Ok(fresh)
    }

    /// Releases every lease idle for strictly longer than the timeout,
    /// discarding its edits.
    pub fn expire_sweep(&self, now: DateTime<Utc>) -> Result<Vec<LeaseInfo>, RepoError> {
        let mut st = self.lock();
        let idle: Vec<FileId> = st
            .catalog
            .leases
            .iter()
            .filter(|(_, l)| self.is_expired(l, now))
            .map(|(&id, _)| id)
            .collect();
        let mut released = Vec::with_capacity(idle.len());
        for file_id in idle {
            if let Some(l) = self.release(&mut st, file_id)? {
                store::log_event(self.root(), now, "lease-expired", &l.user, Some(file_id))?;
                released.push(info(file_id, &l));
            }
        }
        Ok(released)
    }

    pub fn history(&self, user: &str, file_id: FileId) -> Result<Vec<Version>, RepoError> {
        let st = self.lock();
        Self::require(
            &st,
            user,
            file_id,
            "view, audit or download",
            Privileges::can_read_history,
        )?;
        Ok(st.versions.get(&file_id).cloned().unwrap_or_default())
    }

    /// The stored bytes of one version, checked against its checksum. The
    /// read itself happens outside the repository lock.
    pub fn get_version(&self, user: &str, file_id: FileId, seq: u64) -> Result<Vec<u8>, RepoError> {
        self.fetch(user, file_id, seq, "view or download", Privileges::can_fetch)
    }

    /// Like [`get_version`](Self::get_version), for auditors: needs the
    /// audit privilege instead.
    pub fn audit_version(&self, user: &str, file_id: FileId, seq: u64) -> Result<Vec<u8>, RepoError> {
        self.fetch(user, file_id, seq, "audit", |p| p.audit)
    }

    fn fetch(
        &self,
        user: &str,
        file_id: FileId,
        seq: u64,
        needed: &'static str,
        ok: impl Fn(&Privileges) -> bool,
    ) -> Result<Vec<u8>, RepoError> {
        let version = {
            let st = self.lock();
            Self::require(&st, user, file_id, needed, ok)?;
            st.versions
                .get(&file_id)
                .and_then(|v| v.get((seq as usize).wrapping_sub(1)))
                .cloned()
                .ok_or(RepoError::UnknownVersion { file_id, seq })?
        };
        self.read_checked(file_id, &version)
    }

    /// Appends a version without a lease. Refuses while someone holds one.
    pub fn admin_update(
        &self,
        admin: &str,
        file_id: FileId,
        bytes: &[u8],
        now: DateTime<Utc>,
    ) -> Result<Version, RepoError> {
        let mut st = self.lock();
        Self::known_file(&st, file_id)?;
        if !Self::privileges_in(&st, admin, file_id).admin {
            return Err(RepoError::NotAdmin(admin.to_string()));
        }
        if let Some(l) = st.catalog.leases.get(&file_id) {
            return Err(RepoError::Locked {
                holder: l.user.clone(),
                since: l.acquired_at,
            });
        }
        let version = self.append_version(&mut st, file_id, admin, bytes, now)?;
        store::log_event(self.root(), now, "admin-update", admin, Some(file_id))?;
        Ok(version)
    }

    pub fn set_privileges(
        &self,
        admin: &str,
        user: &str,
        file_id: FileId,
        privileges: Privileges,
        now: DateTime<Utc>,
    ) -> Result<(), RepoError> {
        let mut st = self.lock();
        Self::known_file(&st, file_id)?;
        if !Self::privileges_in(&st, admin, file_id).admin {
            return Err(RepoError::NotAdmin(admin.to_string()));
        }
        let privileges = privileges.normalized();
        let grants = &mut st.catalog.privileges;
        grants.retain(|g| !(g.user == user && g.file_id == file_id));
        if !privileges.is_empty() {
            grants.push(Grant {
                user: user.to_string(),
                file_id,
                privileges,
            });
            grants.sort_by(|a, b| (a.file_id, &a.user).cmp(&(b.file_id, &b.user)));
        }
        store::write_catalog(self.root(), &st.catalog)?;
        store::log_event(
            self.root(),
            now,
            &format!("privileges={privileges}"),
            user,
            Some(file_id),
        )?;
        Ok(())
    }

    pub fn snapshot(&self) -> RepoSnapshot {
        let st = self.lock();
        RepoSnapshot {
            admins: st.catalog.admins.iter().cloned().collect(),
            files: st
                .catalog
                .files
                .iter()
                .map(|(&id, f)| (id, f.name.clone(), st.versions.get(&id).cloned().unwrap_or_default()))
                .collect(),
            privileges: st
                .catalog
                .privileges
                .iter()
                .map(|g| (g.user.clone(), g.file_id, g.privileges))
                .collect(),
            leases: st.catalog.leases.iter().map(|(&id, l)| info(id, l)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeDelta, TimeZone};

    fn t(secs: i64) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2003, 5, 1, 9, 0, 0).unwrap() + TimeDelta::seconds(secs)
    }

    fn fresh() -> (tempfile::TempDir, Repository, FileId) {
        let dir = tempfile::tempdir().unwrap();
        let repo = Repository::init(RepoConfig::new(dir.path().join("repo")), &["root"]).unwrap();
        let (id, v) = repo.add_file("root", "marks.ttz", b"v1", t(0)).unwrap();
        assert_eq!(v.seq, 1);
        let editor = Privileges {
            edit: true,
            ..Privileges::NONE
        };
        repo.set_privileges("root", "alice", id, editor, t(0)).unwrap();
        repo.set_privileges("root", "bob", id, editor, t(0)).unwrap();
        (dir, repo, id)
    }

    #[test]
    fn init_rejects_non_empty() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("x"), b"").unwrap();
        assert!(matches!(
            Repository::init(RepoConfig::new(dir.path()), &["root"]),
            Err(RepoError::PathNotEmpty(_))
        ));
        let empty = tempfile::tempdir().unwrap();
        let repo = Repository::init(RepoConfig::new(empty.path()), &["root"]).unwrap();
        assert!(repo.list_files("root").is_empty());
        assert!(matches!(
            Repository::open(RepoConfig::new(dir.path())),
            Err(RepoError::NotARepository(_))
        ));
    }

    #[test]
    fn config_validation() {
        let mut c = RepoConfig::new("/nowhere");
        c.inactivity_timeout = 0;
        assert!(matches!(c.validate(), Err(RepoError::InvalidConfig(_))));
        c.inactivity_timeout = 5;
        c.token_bits = 64;
        assert!(matches!(c.validate(), Err(RepoError::InvalidConfig(_))));
        c.token_bits = 256;
        c.validate().unwrap();
    }

    #[test]
    fn add_file_rules() {
        let (_d, repo, id) = fresh();
        assert!(matches!(
            repo.add_file("alice", "x", b"", t(1)),
            Err(RepoError::NotAdmin(_))
        ));
        assert!(matches!(
            repo.add_file("root", "marks.ttz", b"", t(1)),
            Err(RepoError::DuplicateName(_))
        ));
        assert!(matches!(
            repo.add_file("root", "a/b", b"", t(1)),
            Err(RepoError::InvalidName(_))
        ));
        assert_eq!(repo.get_version("alice", id, 1).unwrap(), b"v1");
        assert_eq!(repo.history("alice", id).unwrap().len(), 1);
        assert_eq!(repo.find_file("marks.ttz"), Some(id));
    }

    #[test]
    fn exclusive_checkout() {
        let (_d, repo, id) = fresh();
        let co = repo.checkout("alice", id, t(10)).unwrap();
        assert_eq!(co.content, b"v1");
        assert_eq!(co.version, 1);
        assert_eq!(co.lease.session_token.len(), 32);
        assert_ne!(co.lease.session_token, co.lease.otp);
        match repo.checkout("bob", id, t(20)) {
            Err(RepoError::Locked { holder, since }) => assert_eq!((holder.as_str(), since), ("alice", t(10))),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            repo.checkout("carol", id, t(20)),
            Err(RepoError::NoPrivilege { .. })
        ));
        assert!(matches!(
            repo.checkout("alice", 99, t(20)),
            Err(RepoError::UnknownFile(99))
        ));
    }

    #[test]
    fn checkin_versions() {
        let (_d, repo, id) = fresh();
        let co = repo.checkout("alice", id, t(10)).unwrap();
        assert_eq!(
            repo.checkin(&co.lease.session_token, Checkin::Save(b"v1"), t(20))
                .unwrap(),
            None
        );
        assert!(repo.lease_info(id).is_none());
        let co = repo.checkout("bob", id, t(30)).unwrap();
        let v = repo
            .checkin(&co.lease.session_token, Checkin::Save(b"v2"), t(40))
            .unwrap()
            .unwrap();
        assert_eq!((v.seq, v.author.as_str(), v.saved_at, v.size), (2, "bob", t(40), 2));
        let co = repo.checkout("bob", id, t(50)).unwrap();
        assert_eq!(
            repo.checkin(&co.lease.session_token, Checkin::Discard, t(60)).unwrap(),
            None
        );
        assert_eq!(repo.history("alice", id).unwrap().len(), 2);
        assert_eq!(repo.get_version("alice", id, 1).unwrap(), b"v1");
        assert!(matches!(
            repo.get_version("alice", id, 0),
            Err(RepoError::UnknownVersion { seq: 0, .. })
        ));
        assert!(matches!(
            repo.get_version("alice", id, 3),
            Err(RepoError::UnknownVersion { seq: 3, .. })
        ));
    }

    #[test]
    fn renew_rotates_and_stale_token_revokes() {
        let (d, repo, id) = fresh();
        let co = repo.checkout("alice", id, t(0)).unwrap();
        let first = co.lease.session_token;
        let second = repo.renew(&first, t(5)).unwrap();
        assert_ne!(first, second);
        assert!(matches!(repo.renew(&first, t(6)), Err(RepoError::StaleToken)));
        // The replay revoked the lease, so even the current token is dead.
        assert!(repo.lease_info(id).is_none());
        assert!(matches!(
            repo.checkin(&second, Checkin::Save(b"x"), t(7)),
            Err(RepoError::StaleToken)
        ));
        assert!(matches!(
            repo.checkin("never-issued", Checkin::Discard, t(7)),
            Err(RepoError::NoActiveLease)
        ));
        let log = fs::read_to_string(d.path().join("repo").join("security.log")).unwrap();
        assert!(log.lines().any(|l| l.contains("\tstale-token\talice\t1")), "{log}");
        assert_eq!(repo.history("alice", id).unwrap().len(), 1);
    }

    #[test]
    fn otp_checkin() {
        let (_d, repo, id) = fresh();
        let co = repo.checkout("alice", id, t(0)).unwrap();
        assert!(matches!(
            repo.checkin_with_otp("bob", id, &co.lease.otp, Checkin::Discard, t(1)),
            Err(RepoError::NoActiveLease)
        ));
        let v = repo
            .checkin_with_otp("alice", id, &co.lease.otp, Checkin::Save(b"v2"), t(2))
            .unwrap();
        assert_eq!(v.unwrap().seq, 2);
        // Consumed: the lease is gone.
        assert!(matches!(
            repo.checkin_with_otp("alice", id, &co.lease.otp, Checkin::Discard, t(3)),
            Err(RepoError::NoActiveLease)
        ));
        repo.checkout("alice", id, t(4)).unwrap();
        assert!(matches!(
            repo.checkin_with_otp("alice", id, "guess", Checkin::Save(b"evil"), t(5)),
            Err(RepoError::StaleToken)
        ));
        assert!(repo.lease_info(id).is_none());
        assert_eq!(repo.history("root", id).unwrap().len(), 2);
    }

    #[test]
    fn expiry_boundary() {
        let (_d, repo, id) = fresh();
        assert!(repo.expire_sweep(t(0)).unwrap().is_empty());
        let co = repo.checkout("alice", id, t(0)).unwrap();
        assert!(repo.expire_sweep(t(1800)).unwrap().is_empty());
        assert_eq!(repo.expire_sweep(t(1801)).unwrap().len(), 1);
        assert!(matches!(
            repo.renew(&co.lease.session_token, t(1802)),
            Err(RepoError::StaleToken)
        ));
        repo.checkout("bob", id, t(1900)).unwrap();
    }

    #[test]
    fn expired_lease_rejects_checkin_until_swept() {
        let (_d, repo, id) = fresh();
        let co = repo.checkout("alice", id, t(0)).unwrap();
        assert!(matches!(
            repo.checkin(&co.lease.session_token, Checkin::Save(b"late"), t(4000)),
            Err(RepoError::LeaseExpired)
        ));
        assert!(matches!(
            repo.renew(&co.lease.session_token, t(4000)),
            Err(RepoError::LeaseExpired)
        ));
        assert!(repo.lease_info(id).is_some());
    }

    #[test]
    fn admin_update_and_privileges() {
        let (_d, repo, id) = fresh();
        let v = repo.admin_update("root", id, b"fixed", t(1)).unwrap();
        assert_eq!(v.seq, 2);
        assert!(matches!(
            repo.admin_update("alice", id, b"x", t(2)),
            Err(RepoError::NotAdmin(_))
        ));
        repo.checkout("alice", id, t(3)).unwrap();
        assert!(matches!(
            repo.admin_update("root", id, b"x", t(4)),
            Err(RepoError::Locked { .. })
        ));

        repo.set_privileges("root", "dora", id, "audit".parse().unwrap(), t(5))
            .unwrap();
        assert!(matches!(
            repo.checkout("dora", id, t(6)),
            Err(RepoError::NoPrivilege { .. })
        ));
        assert_eq!(repo.history("dora", id).unwrap().len(), 2);
        assert!(matches!(
            repo.get_version("dora", id, 1),
            Err(RepoError::NoPrivilege { .. })
        ));
        assert_eq!(repo.audit_version("dora", id, 1).unwrap(), b"v1");
        assert!(matches!(
            repo.audit_version("alice", id, 1),
            Err(RepoError::NoPrivilege { .. })
        ));
        repo.set_privileges("root", "dora", id, Privileges::NONE, t(7)).unwrap();
        assert!(matches!(repo.history("dora", id), Err(RepoError::NoPrivilege { .. })));
        assert!(repo.list_files("dora").is_empty());
        assert!(matches!(
            repo.set_privileges("alice", "dora", id, Privileges::ALL, t(8)),
            Err(RepoError::NotAdmin(_))
        ));
        assert!(matches!(
            repo.set_privileges("root", "dora", 42, Privileges::ALL, t(8)),
            Err(RepoError::UnknownFile(42))
        ));
        // A file-level admin may manage that file.
        repo.set_privileges("root", "erin", id, Privileges::ALL, t(9)).unwrap();
        repo.set_privileges("erin", "dora", id, "view".parse().unwrap(), t(10))
            .unwrap();
        assert_eq!(repo.list_files("dora")[0].privileges.names(), ["view"]);
    }

    #[test]
    fn reopen_preserves_state() {
        let (d, repo, id) = fresh();
        let co = repo.checkout("alice", id, t(0)).unwrap();
        let token = repo.renew(&co.lease.session_token, t(1)).unwrap();
        let before = repo.snapshot();
        drop(repo);
        let repo = Repository::open(RepoConfig::new(d.path().join("repo"))).unwrap();
        assert_eq!(repo.snapshot(), before);
        assert!(matches!(
            repo.renew(&co.lease.session_token, t(2)),
            Err(RepoError::StaleToken)
        ));
        assert!(matches!(
            repo.checkin(&token, Checkin::Discard, t(3)),
            Err(RepoError::StaleToken)
        ));
    }

    #[test]
    fn catalog_never_holds_secrets() {
        let (d, repo, id) = fresh();
        let co = repo.checkout("alice", id, t(0)).unwrap();
        let catalog = fs::read_to_string(d.path().join("repo").join("catalog.json")).unwrap();
        assert!(!catalog.contains(&co.lease.session_token));
        assert!(!catalog.contains(&co.lease.otp));
    }

    #[test]
    fn tampered_snapshot_is_detected() {
        let (d, repo, id) = fresh();
        fs::write(store::snapshot_path(&d.path().join("repo"), id, 1), b"v9").unwrap();
        assert!(matches!(repo.get_version("alice", id, 1), Err(RepoError::Corrupt(_))));
    }

    #[test]
    fn distinct_tokens() {
        let (_d, repo, id) = fresh();
        let mut token = repo.checkout("alice", id, t(0)).unwrap().lease.session_token;
        let mut seen = std::collections::HashSet::new();
        seen.insert(token.clone());
        for i in 0..200 {
            token = repo.renew(&token, t(i)).unwrap();
            assert!(seen.insert(token.clone()));
        }
    }
}
