use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::Sha256;

use super::ServiceError;

/// PBKDF2-HMAC-SHA256 rounds for newly set passwords.
pub const DEFAULT_ITERATIONS: u32 = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Credential {
    salt: String,
    iterations: u32,
    hash: String,
}

fn stretch(salt: &[u8], password: &str, iterations: u32) -> [u8; 32] {
    pbkdf2::pbkdf2_hmac_array::<Sha256, 32>(password.as_bytes(), salt, iterations)
}

fn same(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

/// Salted, iterated password digests, optionally persisted as `users.json`.
/// Plaintext passwords are never stored.
#[derive(Debug, Clone, Default)]
pub struct Credentials {
    path: Option<PathBuf>,
    users: BTreeMap<String, Credential>,
    iterations: u32,
}

impl Credentials {
    pub fn in_memory() -> Self {
        Self {
            path: None,
            users: BTreeMap::new(),
            iterations: DEFAULT_ITERATIONS,
        }
    }

    /// Opens a credential file; a missing file is an empty table that is
    /// created on the first change.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, ServiceError> {
        let path = path.as_ref().to_path_buf();
        let users = match fs::read(&path) {
            Ok(raw) => serde_json::from_slice(&raw)?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(e.into()),
        };
        Ok(Self {
            path: Some(path),
            users,
            iterations: DEFAULT_ITERATIONS,
        })
    }

    /// Rounds used for passwords set from now on.
    pub fn with_iterations(mut self, iterations: u32) -> Self {
        self.iterations = iterations.max(1);
        self
    }

    pub fn contains(&self, user: &str) -> bool {
        self.users.contains_key(user)
    }

    pub fn users(&self) -> impl Iterator<Item = &str> {
        self.users.keys().map(String::as_str)
    }

    pub fn set_password(&mut self, user: &str, password: &str) -> Result<(), ServiceError> {
        if user.is_empty() || user.chars().any(|c| c.is_control() || c.is_whitespace()) {
            return Err(ServiceError::InvalidUser(user.to_string()));
        }
        let mut salt = [0u8; 16];
        rand::rng().fill_bytes(&mut salt);
        let credential = Credential {
            salt: hex::encode(salt),
            iterations: self.iterations,
            hash: hex::encode(stretch(&salt, password, self.iterations)),
        };
        self.users.insert(user.to_string(), credential);
        self.save()
    }

    fn save(&self) -> Result<(), ServiceError> {
        if let Some(path) = &self.path {
            let tmp = path.with_extension("json.tmp");
            fs::write(&tmp, serde_json::to_vec_pretty(&self.users)?)?;
            fs::rename(tmp, path)?;
        }
        Ok(())
    }

    /// Checks a password. Unknown users cost the same work as known ones.
    pub fn verify(&self, user: &str, password: &str) -> bool {
        match self.users.get(user) {
            Some(c) => {
                let (Ok(salt), Ok(expected)) = (hex::decode(&c.salt), hex::decode(&c.hash)) else {
                    return false;
                };
                same(&stretch(&salt, password, c.iterations), &expected)
            }
            None => {
                stretch(b"no such user....", password, self.iterations);
                false
            }
        }
    }
}
